use crate::discovery::parse_call;
use crate::domain::Domain;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Parsed {
    Think(String),
    EnvAction(String),
    Call(String, Vec<String>),
    Done(String),
    Unparseable,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentTurn {
    pub raw: String,
    pub parsed: Parsed,
}

fn household(line: &str) -> Parsed {
    let l = line.strip_prefix('>').map(str::trim_start).unwrap_or(line);
    if l.is_empty() {
        return Parsed::Unparseable;
    }
    if let Some(t) = l.strip_prefix("think:") {
        return Parsed::Think(t.trim().to_string());
    }
    if let Some(c) = l.strip_prefix("call:") {
        return match parse_call(c) {
            Some((name, args)) => Parsed::Call(name, args),
            None => Parsed::Unparseable,
        };
    }
    if let Some(rest) = l.strip_prefix("Done") {
        let report = match rest.split_once(':') {
            Some((_, r)) => r.trim(),
            None => rest.trim(),
        };
        return Parsed::Done(report.to_string());
    }
    Parsed::EnvAction(l.to_string())
}

fn shop(line: &str) -> Parsed {
    let l = line.strip_prefix("Action:").map(str::trim_start).unwrap_or(line);
    if let Some(t) = l.strip_prefix("think[").and_then(|r| r.strip_suffix(']')) {
        return Parsed::Think(t.trim().to_string());
    }
    if let Some(r) = l.strip_prefix("Done[").and_then(|r| r.strip_suffix(']')) {
        return Parsed::Done(r.trim().to_string());
    }
    if l == "Done" {
        return Parsed::Done(String::new());
    }
    if (l.starts_with("search[") || l.starts_with("click[")) && l.ends_with(']') {
        return Parsed::EnvAction(l.to_string());
    }
    match parse_call(l) {
        Some((name, args)) => Parsed::Call(name, args),
        None => Parsed::Unparseable,
    }
}

/// Classify one completion line under the domain's line protocol.
pub fn parse_agent_line(raw: &str, domain: Domain) -> AgentTurn {
    let line = raw.trim();
    let parsed = match domain {
        Domain::Household => household(line),
        Domain::Shop => shop(line),
    };
    AgentTurn {
        raw: line.to_string(),
        parsed,
    }
}
