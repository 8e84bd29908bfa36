//! Reading prompts back into turns and episodes.

use crate::domain::Domain;

pub(crate) const HOUSEHOLD_INIT: &str = "You are in the middle of a room.";
pub(crate) const SHOP_INIT: &str = "WebShop\nInstruction:\n";
const TASK_LINE: &str = "Your task is: ";
const FLAT_TASK_LINE: &str = "Your task is to: ";
const HISTORY_LINE: &str = "Your historical interactions:";

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Turn {
    pub action: String,
    pub obs: String,
}

impl Turn {
    pub fn is_think(&self) -> bool {
        self.action.starts_with("think:") || self.action.starts_with("think[")
    }

    pub fn is_call(&self) -> bool {
        self.action.starts_with("call:") || self.action.ends_with(')')
    }

    pub fn is_env(&self) -> bool {
        !self.is_think() && !self.is_call()
    }
}

/// The episode the prompt is asking about.
#[derive(Debug, Clone, Default, PartialEq)]
pub(crate) struct Episode {
    pub init: String,
    /// Present in flat and base prompts.
    pub instruction: Option<String>,
    /// Present in skill prompts.
    pub invocation: Option<String>,
    pub history: Vec<Turn>,
    pub turns: Vec<Turn>,
}

impl Episode {
    pub fn all_turns(&self) -> impl Iterator<Item = &Turn> {
        self.history.iter().chain(self.turns.iter())
    }

    pub fn env_count(&self) -> usize {
        self.all_turns().filter(|t| t.is_env()).count()
    }

    pub fn last_turn(&self) -> Option<&Turn> {
        self.turns.last().or(self.history.last())
    }
}

fn household_turns(lines: &[&str]) -> Vec<Turn> {
    let mut out: Vec<Turn> = Vec::new();
    let mut open = false;
    for l in lines {
        if let Some(a) = l.strip_prefix('>') {
            out.push(Turn {
                action: a.trim().to_string(),
                obs: String::new(),
            });
            open = true;
        } else if open {
            if let Some(t) = out.last_mut() {
                t.obs = l.to_string();
            }
            open = false;
        }
    }
    out
}

fn shop_turns(lines: &[&str]) -> Vec<Turn> {
    let mut out: Vec<Turn> = Vec::new();
    let mut i = 0;
    while i < lines.len() {
        let Some(a) = lines[i].strip_prefix("Action:") else {
            i += 1;
            continue;
        };
        let mut t = Turn {
            action: a.trim().to_string(),
            obs: String::new(),
        };
        i += 1;
        if let Some(o) = lines.get(i).and_then(|l| l.strip_prefix("Observation:")) {
            i += 1;
            if o.trim().is_empty() {
                let mut body = Vec::new();
                while i < lines.len() && !lines[i].is_empty() {
                    body.push(lines[i]);
                    i += 1;
                }
                t.obs = body.join("\n");
            } else {
                t.obs = o.trim().to_string();
            }
        }
        out.push(t);
    }
    out
}

/// Byte offset of the last episode opening that is not part of an observation.
fn episode_start(domain: Domain, prompt: &str) -> Option<usize> {
    match domain {
        Domain::Household => prompt.rfind(HOUSEHOLD_INIT),
        Domain::Shop => prompt.match_indices(SHOP_INIT).map(|(i, _)| i).filter(|&i| {
            let before = &prompt[..i];
            !before.ends_with("Observation:\n") && !before.ends_with("Current Page:\n")
        }).last(),
    }
}

/// Split one rendered episode (header, optional history, turns).
pub(crate) fn parse_episode(domain: Domain, text: &str) -> Episode {
    let lines: Vec<&str> = text.lines().collect();
    let (init_len, instruction) = match domain {
        Domain::Household => (1, None),
        Domain::Shop => (4, lines.get(2).map(|s| s.to_string())),
    };
    let init_len = init_len.min(lines.len());
    let mut ep = Episode {
        init: lines[..init_len].join("\n"),
        instruction,
        ..Default::default()
    };
    let rest = &lines[init_len..];
    let task_at = rest.iter().position(|l| l.starts_with(TASK_LINE));
    let hist_at = rest.iter().position(|l| *l == HISTORY_LINE);
    if let Some(p) = rest.iter().position(|l| l.starts_with(FLAT_TASK_LINE)) {
        ep.instruction = Some(rest[p][FLAT_TASK_LINE.len()..].trim().to_string());
        ep.turns = match domain {
            Domain::Household => household_turns(&rest[p + 1..]),
            Domain::Shop => shop_turns(&rest[p + 1..]),
        };
        return ep;
    }
    let parse = |ls: &[&str]| match domain {
        Domain::Household => household_turns(ls),
        Domain::Shop => shop_turns(ls),
    };
    match (hist_at, task_at) {
        (Some(h), Some(t)) if h < t => {
            ep.history = parse(&rest[h + 1..t]);
            ep.invocation = Some(rest[t][TASK_LINE.len()..].trim().to_string());
            ep.turns = parse(&rest[t + 1..]);
        }
        _ => ep.turns = parse(rest),
    }
    ep
}

/// The current episode of a policy prompt.
pub(crate) fn current_episode(domain: Domain, prompt: &str) -> Option<Episode> {
    let at = episode_start(domain, prompt)?;
    Some(parse_episode(domain, &prompt[at..]))
}

/// Numbered `Task i:` blocks of a stage body, each cut before any trailing list section.
pub(crate) fn task_blocks(body: &str) -> Vec<String> {
    let mut blocks: Vec<Vec<&str>> = Vec::new();
    for l in body.lines() {
        let is_head = l
            .strip_prefix("Task ")
            .and_then(|r| r.strip_suffix(':'))
            .is_some_and(|n| !n.is_empty() && n.bytes().all(|b| b.is_ascii_digit()));
        if is_head {
            blocks.push(Vec::new());
        } else if let Some(b) = blocks.last_mut() {
            b.push(l);
        }
    }
    blocks
        .into_iter()
        .map(|b| {
            let s = b.join("\n");
            let s = match s.find("\n\nHere is ") {
                Some(i) => &s[..i],
                None => &s[..],
            };
            s.trim_end().to_string()
        })
        .collect()
}

/// Text after `marker` up to the next blank line.
pub(crate) fn section_after<'a>(body: &'a str, marker: &str) -> Option<&'a str> {
    let i = body.find(marker)? + marker.len();
    let rest = body[i..].trim_start_matches('\n');
    let end = rest.find("\n\n").unwrap_or(rest.len());
    Some(&rest[..end])
}

/// Deterministic 64-bit hash of a string.
pub(crate) fn h64(s: &str) -> u64 {
    use sha2::{Digest, Sha256};
    let d = Sha256::digest(s.as_bytes());
    u64::from_le_bytes(d[..8].try_into().expect("8 bytes"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn household_skill_episode() {
        let p = "EXAMPLE\nYou are in the middle of a room. x\n> go to a 1\nold\nYou are in the middle of a room. Looking.\nYour historical interactions:\n> go to shelf 1\nOn the shelf 1, you see nothing.\nYour task is: find(apple)\n> think: hm\nOK.\n";
        let ep = current_episode(Domain::Household, p).unwrap();
        assert_eq!(ep.init, "You are in the middle of a room. Looking.");
        assert_eq!(ep.invocation.as_deref(), Some("find(apple)"));
        assert_eq!(ep.history.len(), 1);
        assert_eq!(ep.turns[0].action, "think: hm");
        assert_eq!(ep.env_count(), 1);
    }

    #[test]
    fn shop_flat_episode_skips_observed_search_pages() {
        let p = "WebShop\nInstruction:\ni would like a x\n[Search]\n\nAction: search[x]\nObservation:\n[Back to Search]\nPage 1 (Total results: 0)\n\nAction: click[Back to Search]\nObservation:\nWebShop\nInstruction:\ni would like a x\n[Search]\n\n";
        let ep = current_episode(Domain::Shop, p).unwrap();
        assert_eq!(ep.instruction.as_deref(), Some("i would like a x"));
        assert_eq!(ep.turns.len(), 2);
        assert!(ep.turns[1].obs.starts_with("WebShop\nInstruction:"));
    }

    #[test]
    fn blocks_drop_list_sections() {
        let b = task_blocks("Task 1:\nSuccess trial:\nA\n\nTask 2:\nB\n\nHere is the list:\n- x");
        assert_eq!(b, vec!["Success trial:\nA".to_string(), "B".to_string()]);
    }
}
