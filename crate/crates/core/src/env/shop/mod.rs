//! Web-shop text world: a seeded catalog, keyword search, item pages with option groups,
//! and fractional purchase scoring.

mod catalog;
mod corrupt;
mod solve;
mod world;

pub use catalog::{product, template_names, tokens, Catalog, OptionGroup, Product, ShopItem, PRODUCTS};
pub use corrupt::corrupt_shop;
pub use solve::oracle_solve;
pub use world::{shop_score, DetailKind, Page, ShopWorld, PAGE_SIZE};

use super::{EnvError, Environment, StepOutcome};
use crate::domain::Domain;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShopTask {
    pub template: String,
    pub instruction: String,
    pub required_attributes: Vec<String>,
    pub required_options: Vec<String>,
    pub price_cap: f64,
    pub target_item: String,
    pub catalog_seed: u64,
    pub seed: u64,
}

impl ShopTask {
    /// Words the agent should search for: attributes then the product noun.
    pub fn query(&self) -> String {
        need_phrase(&self.required_attributes, &self.template)
    }
}

fn need_phrase(attrs: &[String], noun: &str) -> String {
    let mut parts: Vec<&str> = attrs.iter().map(String::as_str).collect();
    parts.push(noun);
    parts.join(" ")
}

/// Parsed view of an instruction, as an agent would read it.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedInstruction {
    pub need: String,
    pub options_text: String,
    pub price_cap: f64,
}

pub fn parse_instruction(s: &str) -> Option<ParsedInstruction> {
    let body = s.trim().strip_prefix("i would like a ")?;
    let (head, price) = body.rsplit_once(", and price lower than ")?;
    let price_cap: f64 = price.strip_suffix(" dollars")?.trim().parse().ok()?;
    let (need, options_text) = match head.split_once(" with ") {
        Some((n, o)) => (n.to_string(), o.to_string()),
        None => (head.to_string(), String::new()),
    };
    Some(ParsedInstruction {
        need,
        options_text,
        price_cap,
    })
}

/// Draw a task whose every identity- and price-matching item offers the required options,
/// with at least one such item on the first results page.
pub fn generate_shop_task(catalog: &Catalog, template: &str, seed: u64) -> Result<ShopTask, EnvError> {
    let cands: Vec<usize> = catalog
        .items
        .iter()
        .enumerate()
        .filter(|(_, it)| it.template == template)
        .map(|(i, _)| i)
        .collect();
    if cands.is_empty() {
        return Err(EnvError::UnknownTaskType(template.to_string()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7461_736B);
    for _ in 0..200 {
        let it = &catalog.items[*cands.choose(&mut rng).expect("candidates")];
        let n_attr = rng.gen_range(1..=it.attributes.len());
        let attrs: Vec<String> = it.attributes[..n_attr].to_vec();
        let mut options = Vec::new();
        for g in &it.options {
            if rng.gen_bool(0.85) {
                options.push(g.values.choose(&mut rng).expect("values").clone());
            }
        }
        let cap = ((it.price / 10.0).ceil() + rng.gen_range(0..3) as f64) * 10.0;
        let ok = catalog.items.iter().all(|other| {
            let matches = other.template == template && other.has_attributes(&attrs) && other.price <= cap;
            !matches || options.iter().all(|o| other.offers(o))
        });
        let matching = |i: &usize| {
            let other = &catalog.items[*i];
            other.template == template && other.has_attributes(&attrs) && other.price <= cap
        };
        // A matching item must surface on the first results page: paging twice would
        // repeat `click[Next >]`, which the repeat guard forbids.
        let first_page = catalog.search(&need_phrase(&attrs, template));
        if !ok || !first_page.iter().take(PAGE_SIZE).any(matching) {
            continue;
        }
        let mut instruction = format!("i would like a {}", need_phrase(&attrs, template));
        if !options.is_empty() {
            instruction.push_str(" with ");
            instruction.push_str(&options.join(" and "));
        }
        instruction.push_str(&format!(", and price lower than {cap:.2} dollars"));
        return Ok(ShopTask {
            template: template.to_string(),
            instruction,
            required_attributes: attrs,
            required_options: options,
            price_cap: cap,
            target_item: it.item_id.clone(),
            catalog_seed: catalog.seed,
            seed,
        });
    }
    Err(EnvError::Unsolvable(200))
}

/// Completion report a shop skill gives when it hands control back.
pub fn done_report(skill: &str) -> String {
    match skill {
        "search_item" => "I have found a list of items.",
        "select_item" => "I have selected the required item and it matches the instruction.",
        "select_item_attributes" => "I have selected the additional attributes.",
        "purchase_item" => "I have purchased the item.",
        _ => "I have finished the subtask.",
    }
    .to_string()
}

pub struct ShopEnv {
    task: ShopTask,
    catalog: Arc<Catalog>,
    world: ShopWorld,
    initial: String,
    last: String,
}

impl ShopEnv {
    pub fn new(task: ShopTask, catalog: Arc<Catalog>) -> Self {
        let initial = ShopWorld::search_page(&task);
        ShopEnv {
            task,
            catalog,
            world: ShopWorld::default(),
            last: initial.clone(),
            initial,
        }
    }

    pub fn world(&self) -> &ShopWorld {
        &self.world
    }

    pub fn task(&self) -> &ShopTask {
        &self.task
    }
}

impl Environment for ShopEnv {
    fn domain(&self) -> Domain {
        Domain::Shop
    }

    fn instruction(&self) -> &str {
        &self.task.instruction
    }

    fn initial_observation(&self) -> &str {
        &self.initial
    }

    fn step(&mut self, action: &str) -> StepOutcome {
        let observation = if self.is_done() {
            Domain::Shop.noop_observation().to_string()
        } else {
            self.world
                .apply(&self.catalog, &self.task, action)
                .unwrap_or_else(|| Domain::Shop.noop_observation().to_string())
        };
        self.last = observation.clone();
        let score = self.score();
        StepOutcome {
            observation,
            done: self.is_done(),
            success: self.is_done() && score >= 1.0,
            score,
        }
    }

    fn last_observation(&self) -> &str {
        &self.last
    }

    fn is_done(&self) -> bool {
        self.world.page == Page::Done
    }

    fn score(&self) -> f64 {
        if self.is_done() {
            let (m, t) = self.world.score;
            m as f64 / t as f64
        } else {
            0.0
        }
    }
}
