//! Deterministic text-world simulators behind one stepping interface.

pub mod household;
pub mod shop;

use crate::domain::Domain;
use serde::{Deserialize, Serialize};
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvError {
    #[error("unknown task type `{0}`")]
    UnknownTaskType(String),
    #[error("could not generate a solvable task after {0} attempts")]
    Unsolvable(usize),
    #[error("corruption mode {0:?} does not apply to this trajectory")]
    Inapplicable(CorruptionMode),
    #[error("replay diverged at step {step}: {reason}")]
    ReplayDiverged { step: usize, reason: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub observation: String,
    pub done: bool,
    pub success: bool,
    pub score: f64,
}

/// A live episode. Stepping is deterministic given the construction seed.
pub trait Environment: Send {
    fn domain(&self) -> Domain;
    fn instruction(&self) -> &str;
    fn initial_observation(&self) -> &str;
    fn step(&mut self, action: &str) -> StepOutcome;
    /// Most recent observation, or the initial one before any step.
    fn last_observation(&self) -> &str;
    fn is_done(&self) -> bool;
    fn score(&self) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorruptionMode {
    WrongPreposition,
    ActionLoop,
    WrongObject,
    SkipSubgoal,
}

impl CorruptionMode {
    pub const ALL: [CorruptionMode; 4] = [
        CorruptionMode::WrongPreposition,
        CorruptionMode::ActionLoop,
        CorruptionMode::WrongObject,
        CorruptionMode::SkipSubgoal,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CorruptionMode::WrongPreposition => "wrong_preposition",
            CorruptionMode::ActionLoop => "action_loop",
            CorruptionMode::WrongObject => "wrong_object",
            CorruptionMode::SkipSubgoal => "skip_subgoal",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.as_str() == s.trim())
    }
}

/// Task description for either domain, sufficient to rebuild the episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TaskSpec {
    Household(household::HouseholdTask),
    Shop(shop::ShopTask),
}

impl TaskSpec {
    pub fn domain(&self) -> Domain {
        match self {
            TaskSpec::Household(_) => Domain::Household,
            TaskSpec::Shop(_) => Domain::Shop,
        }
    }

    pub fn instruction(&self) -> &str {
        match self {
            TaskSpec::Household(t) => &t.instruction,
            TaskSpec::Shop(t) => &t.instruction,
        }
    }

    pub fn task_type(&self) -> String {
        match self {
            TaskSpec::Household(t) => t.family.as_str().to_string(),
            TaskSpec::Shop(t) => t.template.clone(),
        }
    }
}

/// Household families have fixed names; everything else is a shop template.
pub fn domain_of_task_type(task_type: &str) -> Domain {
    if household::Family::parse(task_type).is_some() {
        Domain::Household
    } else {
        Domain::Shop
    }
}

/// Fresh episode for a task. Shop tasks need the catalog they were drawn from.
pub fn env_reset(task: &TaskSpec, catalog: Option<&Arc<shop::Catalog>>) -> Box<dyn Environment> {
    match task {
        TaskSpec::Household(t) => Box::new(household::HouseholdEnv::new(t.clone())),
        TaskSpec::Shop(t) => {
            let cat = match catalog {
                Some(c) => Arc::clone(c),
                None => Arc::new(shop::Catalog::generate(t.catalog_seed)),
            };
            Box::new(shop::ShopEnv::new(t.clone(), cat))
        }
    }
}
