use super::EvalError;
use crate::distill::fewshot::{plan_sentence, SHOP_BASE_THOUGHT};
use crate::domain::Domain;
use crate::env::household::{corrupt_household, expert_plan, generate_task, Family, HouseholdEnv};
use crate::env::shop::{corrupt_shop, generate_shop_task, oracle_solve, template_names, Catalog, ShopEnv};
use crate::env::{CorruptionMode, EnvError, Environment};
use crate::trajectory::{Outcome, Source, Step, StepKind, Trajectory};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;
use tracing::{debug, info};

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenReport {
    pub pairs: usize,
    pub modes: BTreeMap<CorruptionMode, usize>,
    pub per_type: BTreeMap<String, usize>,
}

fn data_seed(seed: u64, i: u64) -> u64 {
    seed.wrapping_mul(1_000_003).wrapping_add(i)
}

fn rollout(env: &mut dyn Environment, think: Option<&str>, actions: &[String]) -> Vec<Step> {
    let mut steps = Vec::new();
    if let Some(t) = think {
        steps.push(Step {
            index: 0,
            kind: StepKind::Think,
            text: t.to_string(),
            observation: "OK.".into(),
        });
    }
    for a in actions {
        if env.is_done() {
            break;
        }
        let out = env.step(a);
        steps.push(Step {
            index: steps.len(),
            kind: StepKind::Action,
            text: a.clone(),
            observation: out.observation,
        });
    }
    steps
}

struct Built {
    success: Trajectory,
    failure: Trajectory,
    mode: CorruptionMode,
}

fn trajectory(
    id: String,
    task_id: &str,
    task_type: &str,
    env: &dyn Environment,
    steps: Vec<Step>,
    source: Source,
) -> Trajectory {
    let score = env.score();
    Trajectory {
        id,
        task_id: task_id.to_string(),
        task_type: task_type.to_string(),
        instruction: env.instruction().to_string(),
        initial_observation: env.initial_observation().to_string(),
        steps,
        outcome: if score >= 1.0 { Outcome::Success } else { Outcome::Failure },
        score,
        source,
    }
}

/// Corruption modes to try, starting at the task's slot in the cycle.
fn mode_cycle(i: usize) -> impl Iterator<Item = CorruptionMode> {
    (0..CorruptionMode::ALL.len()).map(move |k| CorruptionMode::ALL[(i + k) % CorruptionMode::ALL.len()])
}

fn household_pair(i: usize, seed: u64) -> Result<Built, EvalError> {
    let family = Family::ALL[i % Family::ALL.len()];
    let (task, world) = generate_task(family, data_seed(seed, i as u64))?;
    let plan = expert_plan(&task, &world, i % 3 == 2).ok_or(EnvError::Unsolvable(1))?;
    let task_id = format!("household-{i:04}");
    let mut env = HouseholdEnv::from_world(task.clone(), world.clone());
    let steps = rollout(&mut env, None, &plan);
    let success = trajectory(format!("{task_id}-s"), &task_id, family.as_str(), &env, steps, Source::Expert);
    let think = format!(
        "To solve the task, I need to {}.",
        plan_sentence(&family.plan(&task.target, &task.destination))
    );
    for mode in mode_cycle(i) {
        let Ok(bad) = corrupt_household(&world, &plan, mode, data_seed(seed, i as u64)) else { continue };
        let mut env = HouseholdEnv::from_world(task.clone(), world.clone());
        let steps = rollout(&mut env, Some(&think), &bad);
        let failure = trajectory(format!("{task_id}-f"), &task_id, family.as_str(), &env, steps, Source::Agent);
        if failure.outcome == Outcome::Failure {
            return Ok(Built { success, failure, mode });
        }
        debug!(%task_id, ?mode, "corruption still succeeds; trying the next mode");
    }
    Err(EnvError::Inapplicable(CorruptionMode::ALL[i % 4]).into())
}

fn shop_pair(i: usize, seed: u64, catalog: &Arc<Catalog>) -> Result<Built, EvalError> {
    let names = template_names();
    let template = names[i % names.len()];
    let task = generate_shop_task(catalog, template, data_seed(seed, i as u64))?;
    let plan = oracle_solve(catalog, &task).ok_or(EnvError::Unsolvable(1))?;
    let task_id = format!("shop-{i:04}");
    let mut env = ShopEnv::new(task.clone(), Arc::clone(catalog));
    let steps = rollout(&mut env, None, &plan);
    let success = trajectory(format!("{task_id}-s"), &task_id, template, &env, steps, Source::Expert);
    for mode in mode_cycle(i) {
        let Ok(bad) = corrupt_shop(catalog, &task, &plan, mode, data_seed(seed, i as u64)) else { continue };
        let mut env = ShopEnv::new(task.clone(), Arc::clone(catalog));
        let steps = rollout(&mut env, Some(SHOP_BASE_THOUGHT), &bad);
        let failure = trajectory(format!("{task_id}-f"), &task_id, template, &env, steps, Source::Agent);
        if failure.outcome == Outcome::Failure {
            return Ok(Built { success, failure, mode });
        }
    }
    Err(EnvError::Inapplicable(CorruptionMode::ALL[i % 4]).into())
}

/// One expert success and one corrupted failure per task, `n_pairs` tasks.
/// Tasks whose every corruption still succeeds are skipped and replaced by the next index.
pub fn gen_offline_data(
    domain: Domain,
    n_pairs: usize,
    seed: u64,
    catalog_seed: u64,
) -> Result<(Vec<Trajectory>, GenReport), EvalError> {
    if n_pairs == 0 {
        return Err(EvalError::InvalidConfig("n_pairs must be at least 1".into()));
    }
    let catalog = Arc::new(Catalog::generate(catalog_seed));
    let mut out = Vec::with_capacity(2 * n_pairs);
    let mut report = GenReport::default();
    let mut i = 0;
    while report.pairs < n_pairs {
        let built = match domain {
            Domain::Household => household_pair(i, seed),
            Domain::Shop => shop_pair(i, seed, &catalog),
        };
        i += 1;
        let b = match built {
            Ok(b) => b,
            Err(e) if i < 4 * n_pairs + 64 => {
                debug!(index = i - 1, error = %e, "skipping task");
                continue;
            }
            Err(e) => return Err(e),
        };
        report.pairs += 1;
        *report.modes.entry(b.mode).or_insert(0) += 1;
        *report.per_type.entry(b.success.task_type.clone()).or_insert(0) += 1;
        out.push(b.success);
        out.push(b.failure);
    }
    info!(domain = %domain, pairs = report.pairs, "generated offline data");
    Ok((out, report))
}

pub fn write_offline_data(
    domain: Domain,
    n_pairs: usize,
    seed: u64,
    catalog_seed: u64,
    path: &Path,
) -> Result<GenReport, EvalError> {
    let (trajs, report) = gen_offline_data(domain, n_pairs, seed, catalog_seed)?;
    let text: String = trajs.iter().map(|t| t.to_json_line() + "\n").collect();
    super::atomic_write(path, text.as_bytes())?;
    Ok(report)
}
