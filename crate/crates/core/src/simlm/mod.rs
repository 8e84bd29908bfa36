//! Deterministic simulated language models behind `sim://` endpoints.
//!
//! Each model reads the prompt back into an episode and answers as a scripted agent would.
//! `oracle` solves tasks; `corrupted` makes the configured mistakes unless the prompt's
//! guidance names them; `stall`, `repeat` and `junk` exercise the executor's stopping
//! rules. Every model answers offline stage prompts like the oracle.

mod house;
mod mistakes;
mod shop;
mod stage;
mod text;

use crate::domain::Domain;
use crate::env::CorruptionMode;
use crate::gateway::{PromptRequest, Upstream, UpstreamError};
use crate::templates::{all_stage_templates, Stage};
use mistakes::{household_mistakes, reflection_for, shop_mistakes, Evidence, FALLBACK_REFLECTION};
use text::{current_episode, h64, parse_episode, Episode};

pub use mistakes::marker as mistake_marker;

#[derive(Debug, Clone, PartialEq)]
pub enum SimKind {
    Oracle,
    /// Makes one of `modes` on a `rate` fraction of tasks, chosen by hashing the episode.
    Corrupted { modes: Vec<CorruptionMode>, rate: f64 },
    Stall,
    Repeat,
    Junk,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimModel {
    pub kind: SimKind,
}

const REFLECTION_OPENING: &str = "You will be given the log";

impl SimModel {
    pub fn new(kind: SimKind) -> Self {
        SimModel { kind }
    }

    /// `sim://oracle`, `sim://corrupted?modes=a,b&rate=0.5`, `sim://stall`, `sim://repeat`, `sim://junk`.
    pub fn from_endpoint(endpoint: &str) -> Result<Self, String> {
        let rest = endpoint
            .strip_prefix("sim://")
            .ok_or_else(|| format!("not a sim endpoint: {endpoint}"))?;
        let (name, query) = rest.split_once('?').unwrap_or((rest, ""));
        let kind = match name.trim_end_matches('/') {
            "oracle" => SimKind::Oracle,
            "stall" => SimKind::Stall,
            "repeat" => SimKind::Repeat,
            "junk" => SimKind::Junk,
            "corrupted" => {
                let mut modes = CorruptionMode::ALL.to_vec();
                let mut rate = 1.0;
                for kv in query.split('&').filter(|s| !s.is_empty()) {
                    let (k, v) = kv.split_once('=').ok_or_else(|| format!("bad query part `{kv}`"))?;
                    match k {
                        "modes" => {
                            modes = v
                                .split(',')
                                .map(|m| CorruptionMode::parse(m).ok_or_else(|| format!("unknown corruption mode `{m}`")))
                                .collect::<Result<_, _>>()?;
                        }
                        "rate" => {
                            rate = v.parse().map_err(|_| format!("bad rate `{v}`"))?;
                            if !(0.0..=1.0).contains(&rate) {
                                return Err(format!("rate {rate} outside [0, 1]"));
                            }
                        }
                        _ => return Err(format!("unknown parameter `{k}`")),
                    }
                }
                if modes.is_empty() {
                    return Err("corrupted model needs at least one mode".into());
                }
                SimKind::Corrupted { modes, rate }
            }
            other => return Err(format!("unknown sim model `{other}`")),
        };
        Ok(SimModel { kind })
    }

    /// The mistake this model makes in this episode, if any survives the guidance.
    fn mistake(&self, domain: Domain, ep: &Episode, guidance: &str) -> Option<CorruptionMode> {
        let SimKind::Corrupted { modes, rate } = &self.kind else { return None };
        let h = h64(&ep.init);
        if (h % 10_000) as f64 >= rate * 10_000.0 {
            return None;
        }
        let m = modes[((h >> 32) % modes.len() as u64) as usize];
        let g = guidance.to_lowercase();
        (!g.contains(mistake_marker(domain, m))).then_some(m)
    }

    pub fn respond(&self, prompt: &str) -> String {
        if let Some((stage, domain, body)) = classify_stage(prompt) {
            return stage::respond(stage, domain, body);
        }
        if prompt.starts_with(REFLECTION_OPENING) {
            return reflect(prompt);
        }
        let domain = if prompt.starts_with("Interact with a household") {
            Domain::Household
        } else if prompt.starts_with("Interact with a webshop") {
            Domain::Shop
        } else {
            return String::new();
        };
        let base = prompt.lines().nth(1).is_some_and(|l| l.starts_with("You can call subprocedures"));
        let Some(ep) = current_episode(domain, prompt) else { return String::new() };
        match &self.kind {
            SimKind::Stall => domain.think_line("I am not sure what to do next."),
            SimKind::Junk => String::new(),
            SimKind::Repeat if !base => match domain {
                Domain::Household => house::repeat_line(&ep),
                Domain::Shop => shop::repeat_line(&ep),
            },
            _ => {
                let guidance = &prompt[..prompt.rfind(ep.init.as_str()).unwrap_or(0)];
                let m = self.mistake(domain, &ep, guidance);
                match (domain, base, ep.invocation.is_some()) {
                    (Domain::Household, true, _) => house::base_line(&ep),
                    (Domain::Household, false, true) => house::skill_line(&ep, m),
                    (Domain::Household, false, false) => house::flat_line(&ep, m),
                    (Domain::Shop, true, _) => shop::base_line(&ep),
                    (Domain::Shop, false, true) => shop::skill_line(&ep, m),
                    (Domain::Shop, false, false) => shop::flat_line(&ep, m),
                }
            }
        }
    }
}

impl Upstream for SimModel {
    fn call(&self, _model: &str, req: &PromptRequest) -> Result<String, UpstreamError> {
        Ok(self.respond(&req.user_text))
    }
}

/// Stage, domain and body of an offline-stage prompt.
fn classify_stage(prompt: &str) -> Option<(Stage, Domain, &str)> {
    let (tpl, stage, domain) = all_stage_templates()
        .into_iter()
        .filter(|(t, _, _)| prompt.starts_with(t.trim_end()))
        .max_by_key(|(t, _, _)| t.trim_end().len())?;
    let body = prompt[tpl.trim_end().len()..].trim_start_matches('\n');
    let body = body.strip_suffix("New summarization: ").unwrap_or(body).trim_end();
    Some((stage, domain, body))
}

fn reflect(prompt: &str) -> String {
    let (domain, at) = match (prompt.rfind(text::HOUSEHOLD_INIT), prompt.rfind(text::SHOP_INIT)) {
        (Some(h), _) => (Domain::Household, h),
        (None, Some(s)) => (Domain::Shop, prompt.find(text::SHOP_INIT).unwrap_or(s)),
        _ => return FALLBACK_REFLECTION.to_string(),
    };
    let body = &prompt[at..];
    let body = body.strip_suffix("Plan: ").unwrap_or(body).trim_end();
    let ep = parse_episode(domain, body);
    let turns: Vec<_> = ep.all_turns().cloned().collect();
    let ev = Evidence {
        instruction: ep.instruction.clone().unwrap_or_default(),
        segment: turns.clone(),
        all: turns,
    };
    let found = match domain {
        Domain::Household => household_mistakes(&ev, None),
        Domain::Shop => shop_mistakes(&ev, None),
    };
    if found.is_empty() {
        return FALLBACK_REFLECTION.to_string();
    }
    found.iter().map(|m| reflection_for(domain, *m)).collect::<Vec<_>>().join(" ")
}

#[cfg(test)]
mod tests;
