//! Household text world: rooms of receptacles, portable objects, and six task families.

mod corrupt;
mod generate;
pub mod grammar;
mod solve;
mod world;

pub use corrupt::corrupt_household;
pub use generate::{generate_task, similar_object, TARGETS};
pub use grammar::{parse_action, verb_of, HouseAction, Label, TransformVerb, VERBS};
pub use solve::{expert_plan, oracle_solve};
pub use world::{is_fixed, list_phrase, transformer_for, HouseholdWorld, Loc, Receptacle, Thing};

use super::{Environment, StepOutcome};
use crate::domain::Domain;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Pick,
    Clean,
    Heat,
    Cool,
    Look,
    Pick2,
}

impl Family {
    pub const ALL: [Family; 6] = [
        Family::Pick,
        Family::Clean,
        Family::Heat,
        Family::Cool,
        Family::Look,
        Family::Pick2,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Family::Pick => "pick",
            Family::Clean => "clean",
            Family::Heat => "heat",
            Family::Cool => "cool",
            Family::Look => "look",
            Family::Pick2 => "pick2",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|f| f.as_str() == s)
    }

    /// Transformation verb the task needs before placement, if any.
    pub fn transform(self) -> Option<TransformVerb> {
        match self {
            Family::Clean => Some(TransformVerb::Clean),
            Family::Heat => Some(TransformVerb::Heat),
            Family::Cool => Some(TransformVerb::Cool),
            _ => None,
        }
    }

    /// Skill-level plan, as invocations.
    pub fn plan(self, target: &str, destination: &str) -> Vec<String> {
        let acquire = [format!("find({target})"), format!("take({target})")];
        let put = format!("put({target}, {destination})");
        let mut p: Vec<String> = acquire.to_vec();
        match self {
            Family::Pick => p.push(put),
            Family::Pick2 => {
                p.push(put.clone());
                p.extend(acquire);
                p.push(put);
            }
            Family::Look => {
                p.push(format!("find({destination})"));
                p.push(format!("use({destination})"));
            }
            Family::Clean | Family::Heat | Family::Cool => {
                let v = self.transform().expect("transform family").as_str();
                p.push(format!("{v}({target})"));
                p.push(put);
            }
        }
        p
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HouseholdTask {
    pub family: Family,
    pub target: String,
    /// Receptacle name for placement families; the lamp name for look tasks.
    pub destination: String,
    pub instruction: String,
    pub seed: u64,
}

impl HouseholdTask {
    pub fn world(&self) -> HouseholdWorld {
        generate_task(self.family, self.seed)
            .expect("task was generated from this seed")
            .1
    }
}

const TEMPLATES: [(Family, &str); 13] = [
    (Family::Pick, "put a {t} in {d}."),
    (Family::Pick, "put some {t} on {d}."),
    (Family::Pick, "find some {t} and put it in {d}."),
    (Family::Clean, "put a clean {t} in {d}."),
    (Family::Clean, "clean some {t} and put it in {d}."),
    (Family::Heat, "put a hot {t} in {d}."),
    (Family::Heat, "heat some {t} and put it in {d}."),
    (Family::Cool, "put a cool {t} in {d}."),
    (Family::Cool, "cool some {t} and put it in {d}."),
    (Family::Look, "look at {t} under the {d}."),
    (Family::Look, "examine the {t} with the {d}."),
    (Family::Pick2, "put two {t} in {d}."),
    (Family::Pick2, "find two {t} and put them in {d}."),
];

pub(crate) fn instruction_templates(family: Family) -> Vec<&'static str> {
    TEMPLATES.iter().filter(|(f, _)| *f == family).map(|(_, t)| *t).collect()
}

/// Recover (family, target, destination) from an instruction produced by the generator.
pub fn parse_instruction(s: &str) -> Option<(Family, String, String)> {
    let s = s.trim();
    for (family, tpl) in TEMPLATES {
        let (pre, rest) = tpl.split_once("{t}")?;
        let (mid, post) = rest.split_once("{d}")?;
        let Some(body) = s.strip_prefix(pre).and_then(|b| b.strip_suffix(post)) else {
            continue;
        };
        let Some((t, d)) = body.split_once(mid) else { continue };
        let single = |w: &str| !w.is_empty() && w.bytes().all(|b| b.is_ascii_lowercase());
        if single(t) && single(d) {
            return Some((family, t.to_string(), d.to_string()));
        }
    }
    None
}

/// Completion report a skill policy gives when it hands control back.
pub fn done_report(skill: &str, args: &[String]) -> String {
    let a0 = args.first().map(String::as_str).unwrap_or("object");
    match skill {
        "find" => format!("I have found the {a0}."),
        "take" => format!("I have taken the {a0}."),
        "put" => format!(
            "I have put the {a0} in/on the {}.",
            args.get(1).map(String::as_str).unwrap_or("receptacle")
        ),
        "heat" => format!("I have heated the {a0}."),
        "cool" => format!("I have cooled the {a0}."),
        "clean" => format!("I have cleaned the {a0}."),
        "use" => format!("I have used the {a0}."),
        _ => "I have finished the subtask.".to_string(),
    }
}

pub struct HouseholdEnv {
    task: HouseholdTask,
    world: HouseholdWorld,
    initial: String,
    last: String,
    done: bool,
    success: bool,
}

impl HouseholdEnv {
    pub fn new(task: HouseholdTask) -> Self {
        let world = task.world();
        Self::from_world(task, world)
    }

    pub fn from_world(task: HouseholdTask, world: HouseholdWorld) -> Self {
        let initial = world.initial_observation();
        HouseholdEnv {
            task,
            world,
            last: initial.clone(),
            initial,
            done: false,
            success: false,
        }
    }

    pub fn world(&self) -> &HouseholdWorld {
        &self.world
    }

    pub fn task(&self) -> &HouseholdTask {
        &self.task
    }
}

impl Environment for HouseholdEnv {
    fn domain(&self) -> Domain {
        Domain::Household
    }

    fn instruction(&self) -> &str {
        &self.task.instruction
    }

    fn initial_observation(&self) -> &str {
        &self.initial
    }

    fn step(&mut self, action: &str) -> StepOutcome {
        let observation = if self.done {
            Domain::Household.noop_observation().to_string()
        } else {
            self.world
                .apply(action)
                .unwrap_or_else(|| Domain::Household.noop_observation().to_string())
        };
        if !self.done && self.world.satisfies(&self.task) {
            self.done = true;
            self.success = true;
        }
        self.last = observation.clone();
        StepOutcome {
            observation,
            done: self.done,
            success: self.success,
            score: self.score(),
        }
    }

    fn last_observation(&self) -> &str {
        &self.last
    }

    fn is_done(&self) -> bool {
        self.done
    }

    fn score(&self) -> f64 {
        if self.success {
            1.0
        } else {
            0.0
        }
    }
}
