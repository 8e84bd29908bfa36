//! Environment domains and the shared text rendering rules for each.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Household,
    Shop,
}

impl Domain {
    pub fn as_str(self) -> &'static str {
        match self {
            Domain::Household => "household",
            Domain::Shop => "shop",
        }
    }

    /// Text reported by the env for a step it could not interpret or apply.
    pub fn noop_observation(self) -> &'static str {
        match self {
            Domain::Household => "Nothing happens.",
            Domain::Shop => "Invalid action!",
        }
    }

    /// Default completion stop sequences for one agent line.
    pub fn stop_sequences(self) -> Vec<String> {
        match self {
            Domain::Household => vec!["\n>".to_string()],
            Domain::Shop => vec!["\nObservation:".to_string()],
        }
    }

    /// Render the opening of an episode as the agent sees it.
    pub fn episode_header(self, initial_observation: &str, instruction: &str) -> String {
        match self {
            Domain::Household => format!("{initial_observation}\nYour task is to: {instruction}\n"),
            Domain::Shop => format!("{initial_observation}\n\n"),
        }
    }

    /// Render one agent line and its observation.
    pub fn render_turn(self, line: &str, observation: &str) -> String {
        match self {
            Domain::Household => format!("> {line}\n{observation}\n"),
            Domain::Shop => {
                if observation.contains('\n') {
                    format!("Action: {line}\nObservation:\n{observation}\n\n")
                } else {
                    format!("Action: {line}\nObservation: {observation}\n\n")
                }
            }
        }
    }

    /// Agent-line form of a reasoning step.
    pub fn think_line(self, thought: &str) -> String {
        match self {
            Domain::Household => format!("think: {thought}"),
            Domain::Shop => format!("think[{thought}]"),
        }
    }

    /// Agent-line form of a skill invocation at base level.
    pub fn call_line(self, signature: &str) -> String {
        match self {
            Domain::Household => format!("call: {signature}"),
            Domain::Shop => signature.to_string(),
        }
    }

    /// Agent-line form of a skill completion report.
    pub fn done_line(self, signature: &str, report: &str) -> String {
        match self {
            Domain::Household => format!("Done {signature}: {report}"),
            Domain::Shop => format!("Done[{report}]"),
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Domain {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "household" | "alfworld" => Ok(Domain::Household),
            "shop" | "webshop" => Ok(Domain::Shop),
            other => Err(format!("unknown domain `{other}`")),
        }
    }
}
