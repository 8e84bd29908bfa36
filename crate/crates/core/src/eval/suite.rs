use super::EvalError;
use crate::domain::Domain;
use crate::env::household::{generate_task, Family};
use crate::env::shop::{generate_shop_task, template_names, Catalog};
use crate::env::TaskSpec;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

/// Per-family task counts of the 134-task household test split.
pub const TABLE1_HOUSEHOLD_COUNTS: [(Family, usize); 6] = [
    (Family::Pick, 24),
    (Family::Clean, 31),
    (Family::Heat, 23),
    (Family::Cool, 21),
    (Family::Look, 18),
    (Family::Pick2, 17),
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SuiteEntry {
    Household {
        family: Family,
        seed: u64,
    },
    Shop {
        template: String,
        seed: u64,
        #[serde(default)]
        catalog_seed: u64,
    },
}

impl SuiteEntry {
    pub fn task_id(&self) -> String {
        match self {
            SuiteEntry::Household { family, seed } => format!("{}-{seed}", family.as_str()),
            SuiteEntry::Shop {
                template,
                seed,
                catalog_seed,
            } => format!("{}-{catalog_seed}-{seed}", template.replace(' ', "_")),
        }
    }

    pub fn task_type(&self) -> String {
        match self {
            SuiteEntry::Household { family, .. } => family.as_str().to_string(),
            SuiteEntry::Shop { template, .. } => template.clone(),
        }
    }

    pub fn resolve(&self, catalogs: &CatalogCache) -> Result<TaskSpec, EvalError> {
        Ok(match self {
            SuiteEntry::Household { family, seed } => TaskSpec::Household(generate_task(*family, *seed)?.0),
            SuiteEntry::Shop {
                template,
                seed,
                catalog_seed,
            } => TaskSpec::Shop(generate_shop_task(&catalogs.get(*catalog_seed), template, *seed)?),
        })
    }
}

/// Catalogs keyed by seed, built once per suite.
#[derive(Debug, Default)]
pub struct CatalogCache(std::sync::Mutex<BTreeMap<u64, Arc<Catalog>>>);

impl CatalogCache {
    pub fn get(&self, seed: u64) -> Arc<Catalog> {
        let mut m = self.0.lock().expect("catalog cache lock");
        Arc::clone(m.entry(seed).or_insert_with(|| Arc::new(Catalog::generate(seed))))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Suite {
    pub domain: Domain,
    pub tasks: Vec<SuiteEntry>,
}

impl Suite {
    pub fn load(path: &Path) -> Result<Self, EvalError> {
        super::read_json(path)
    }

    pub fn save(&self, path: &Path) -> Result<(), EvalError> {
        super::write_json(path, self)
    }
}

/// Split `n` across families proportionally to the test-split counts, by largest remainder.
pub fn household_counts(n: usize) -> Vec<(Family, usize)> {
    let total: usize = TABLE1_HOUSEHOLD_COUNTS.iter().map(|(_, c)| c).sum();
    let mut out: Vec<(Family, usize, usize)> = TABLE1_HOUSEHOLD_COUNTS
        .iter()
        .map(|&(f, c)| (f, n * c / total, n * c % total))
        .collect();
    let assigned: usize = out.iter().map(|x| x.1).sum();
    let mut order: Vec<usize> = (0..out.len()).collect();
    order.sort_by(|&a, &b| out[b].2.cmp(&out[a].2).then(a.cmp(&b)));
    for &i in order.iter().take(n - assigned) {
        out[i].1 += 1;
    }
    out.into_iter().map(|(f, c, _)| (f, c)).collect()
}

fn test_seed(seed: u64, i: u64) -> u64 {
    // Offset well clear of the gen-data seed range.
    seed.wrapping_mul(1_000_003).wrapping_add(1_000_000 + i)
}

/// A deterministic evaluation suite of `n` tasks, disjoint in seed from gen-data.
pub fn generate_suite(domain: Domain, n: usize, seed: u64, catalog_seed: u64) -> Suite {
    let tasks = match domain {
        Domain::Household => {
            let mut v = Vec::with_capacity(n);
            for (family, c) in household_counts(n) {
                for _ in 0..c {
                    v.push(SuiteEntry::Household {
                        family,
                        seed: test_seed(seed, v.len() as u64),
                    });
                }
            }
            v
        }
        Domain::Shop => {
            let names = template_names();
            (0..n)
                .map(|i| SuiteEntry::Shop {
                    template: names[i % names.len()].to_string(),
                    seed: test_seed(seed, i as u64),
                    catalog_seed,
                })
                .collect()
        }
    };
    Suite { domain, tasks }
}
