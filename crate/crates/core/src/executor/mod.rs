//! Episode runners: the hierarchical base/skill loop, flat few-shot prompting, and
//! reflection over failed trials.

mod parse;

pub use parse::{parse_agent_line, AgentTurn, Parsed};

use crate::discovery::invocation;
use crate::distill::{build_base_prompt, build_skill_prompt, fewshot, skill_header, AblationFlags, KnowledgeBase, SkillKnowledge};
use crate::domain::Domain;
use crate::env::Environment;
use crate::gateway::{estimate_tokens, request_digest, Gateway, PromptRequest};
use crate::templates;
use crate::trajectory::Trajectory;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use tracing::debug;

pub const POLICY_MAX_TOKENS: u32 = 128;
pub const REFLECTION_MAX_TOKENS: u32 = 256;
pub const MAX_UNPARSEABLE: usize = 3;
/// Report used when a skill hands back control without a Done line.
pub const NO_REPORT: &str = "I could not finish the subtask.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct EpisodeBudget {
    pub max_turns: usize,
    pub per_skill_max_turns: usize,
    pub repeat_guard: bool,
}

impl Default for EpisodeBudget {
    fn default() -> Self {
        EpisodeBudget {
            max_turns: 30,
            per_skill_max_turns: 10,
            repeat_guard: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Event {
    PromptSent { digest: String },
    CompletionReceived { text: String },
    EnvStep { action: String, observation: String },
    ControlReturn { skill: String, report: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptEvent {
    pub seq: usize,
    #[serde(flatten)]
    pub event: Event,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transcript {
    pub events: Vec<TranscriptEvent>,
}

impl Transcript {
    pub fn push(&mut self, event: Event) {
        let seq = self.events.len();
        self.events.push(TranscriptEvent { seq, event });
    }

    pub fn to_jsonl(&self) -> String {
        self.events
            .iter()
            .map(|e| serde_json::to_string(e).expect("event serializes") + "\n")
            .collect()
    }

    pub fn env_steps(&self) -> impl Iterator<Item = (&str, &str)> {
        self.events.iter().filter_map(|e| match &e.event {
            Event::EnvStep { action, observation } => Some((action.as_str(), observation.as_str())),
            _ => None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    TaskSuccess,
    BudgetExhausted,
    RepeatGuard,
    EnvDone,
    AgentError,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub success: bool,
    pub score: f64,
    pub turns_used: usize,
    pub termination: Termination,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<String>,
    pub transcript: Transcript,
    /// Flat text of the episode as the agent experienced it.
    pub episode_log: String,
}

/// Prior-trial reflections, rendered for the prompt.
pub fn memory_block(memory: &[String]) -> String {
    if memory.is_empty() {
        return String::new();
    }
    let mut s = "Your memory for the task below:\n".to_string();
    for (i, m) in memory.iter().enumerate() {
        s.push_str(&format!("Trial {i}:\n{}\n", m.trim()));
    }
    s.push('\n');
    s
}

fn first_line(text: &str) -> String {
    text.lines().map(str::trim).find(|l| !l.is_empty()).unwrap_or("").to_string()
}

struct Run<'a> {
    env: &'a mut dyn Environment,
    gateway: &'a Gateway,
    budget: EpisodeBudget,
    domain: Domain,
    memory: String,
    transcript: Transcript,
    turns: usize,
    calls: usize,
    streak: usize,
    last_action: Option<String>,
    history: String,
    log: String,
    end: Option<(Termination, Option<String>)>,
}

impl<'a> Run<'a> {
    fn new(env: &'a mut dyn Environment, gateway: &'a Gateway, budget: EpisodeBudget, memory: &[String]) -> Self {
        let domain = env.domain();
        let log = domain.episode_header(env.initial_observation(), env.instruction());
        Run {
            env,
            gateway,
            budget,
            domain,
            memory: memory_block(memory),
            transcript: Transcript::default(),
            turns: 0,
            calls: 0,
            streak: 0,
            last_action: None,
            history: String::new(),
            log,
            end: None,
        }
    }

    fn header(&self) -> String {
        self.domain.episode_header(self.env.initial_observation(), self.env.instruction())
    }

    fn stop(&mut self, t: Termination, diagnostic: Option<String>) {
        if self.end.is_none() {
            self.end = Some((t, diagnostic));
        }
    }

    /// True once the episode must end; records why.
    fn finished(&mut self) -> bool {
        if self.end.is_some() {
            return true;
        }
        if self.env.is_done() {
            let t = if self.env.score() >= 1.0 {
                Termination::TaskSuccess
            } else {
                Termination::EnvDone
            };
            self.stop(t, None);
            return true;
        }
        if self.turns >= self.budget.max_turns {
            self.stop(Termination::BudgetExhausted, None);
            return true;
        }
        false
    }

    fn ask(&mut self, prompt: String) -> Option<AgentTurn> {
        let req = PromptRequest::user(prompt, POLICY_MAX_TOKENS, self.domain.stop_sequences());
        let digest = request_digest(&self.gateway.config().model_name, &req);
        self.transcript.push(Event::PromptSent { digest });
        match self.gateway.complete(&req) {
            Ok(c) => {
                let text = first_line(&c.text);
                self.transcript.push(Event::CompletionReceived { text: text.clone() });
                Some(parse_agent_line(&text, self.domain))
            }
            Err(e) => {
                self.stop(Termination::AgentError, Some(e.to_string()));
                None
            }
        }
    }

    fn think(&mut self, thought: &str) -> String {
        self.turns += 1;
        self.streak = 0;
        let r = self.domain.render_turn(&self.domain.think_line(thought), "OK.");
        self.log.push_str(&r);
        r
    }

    /// Execute an environment action; `None` when the repeat guard ends the episode.
    fn act(&mut self, action: &str) -> Option<String> {
        if self.budget.repeat_guard && self.last_action.as_deref() == Some(action) {
            self.stop(Termination::RepeatGuard, Some(format!("repeated action `{action}`")));
            return None;
        }
        self.streak = 0;
        self.turns += 1;
        let out = self.env.step(action);
        self.transcript.push(Event::EnvStep {
            action: action.to_string(),
            observation: out.observation.clone(),
        });
        self.last_action = Some(action.to_string());
        let r = self.domain.render_turn(action, &out.observation);
        self.history.push_str(&r);
        self.log.push_str(&r);
        Some(r)
    }

    /// Count an unusable turn; true when the streak ends the episode.
    fn unparseable(&mut self, raw: &str) -> bool {
        self.streak += 1;
        if self.streak >= MAX_UNPARSEABLE {
            self.stop(
                Termination::AgentError,
                Some(format!("{MAX_UNPARSEABLE} consecutive unparseable turns, last `{raw}`")),
            );
            return true;
        }
        false
    }

    fn finish(mut self) -> EpisodeResult {
        self.finished();
        let (termination, diagnostic) = self.end.take().unwrap_or((Termination::AgentError, None));
        let score = self.env.score();
        EpisodeResult {
            success: score >= 1.0,
            score,
            turns_used: self.turns,
            termination,
            diagnostic,
            transcript: self.transcript,
            episode_log: self.log,
        }
    }

    fn flat_loop(&mut self, prefix: &str) {
        let header = self.header();
        let mut text = String::new();
        while !self.finished() {
            let prompt = format!("{prefix}\n{}{header}{text}", self.memory);
            let Some(turn) = self.ask(prompt) else { break };
            match turn.parsed {
                Parsed::Think(t) => text.push_str(&self.think(&t)),
                Parsed::EnvAction(a) => {
                    if let Some(r) = self.act(&a) {
                        text.push_str(&r);
                    }
                }
                Parsed::Done(_) => self.stop(Termination::EnvDone, Some("agent declared done".into())),
                Parsed::Call(..) | Parsed::Unparseable => {
                    self.unparseable(&turn.raw);
                }
            }
        }
    }

    fn run_skill(&mut self, k: &SkillKnowledge, flags: AblationFlags, name: &str, args: &[String]) -> String {
        let inv = invocation(name, args);
        let prefix = build_skill_prompt(self.domain, k, flags);
        let head = skill_header(self.domain, self.env.initial_observation(), &self.history, &inv);
        let mut sub = String::new();
        let mut used = 0;
        let report = loop {
            if self.finished() {
                break String::new();
            }
            if used >= self.budget.per_skill_max_turns {
                debug!(skill = name, "skill budget exhausted");
                break NO_REPORT.to_string();
            }
            let prompt = format!("{prefix}\n{}{head}{sub}", self.memory);
            let Some(turn) = self.ask(prompt) else { break String::new() };
            match turn.parsed {
                Parsed::Think(t) => {
                    sub.push_str(&self.think(&t));
                    used += 1;
                }
                Parsed::EnvAction(a) => {
                    if let Some(r) = self.act(&a) {
                        sub.push_str(&r);
                        used += 1;
                    }
                }
                Parsed::Done(r) => {
                    self.streak = 0;
                    break if r.is_empty() { fewshot::done_report(self.domain, name, args) } else { r };
                }
                Parsed::Call(..) | Parsed::Unparseable => {
                    if self.unparseable(&turn.raw) {
                        break String::new();
                    }
                }
            }
        };
        self.transcript.push(Event::ControlReturn {
            skill: name.to_string(),
            report: report.clone(),
        });
        report
    }

    fn base_loop(&mut self, kb: &KnowledgeBase) {
        let prefix = build_base_prompt(self.domain, kb);
        let header = self.header();
        let flags = kb.ablation_provenance;
        let mut text = String::new();
        while !self.finished() {
            let prompt = format!("{prefix}\n{}{header}{text}", self.memory);
            let Some(turn) = self.ask(prompt) else { break };
            match turn.parsed {
                Parsed::Think(t) => text.push_str(&self.think(&t)),
                Parsed::Call(name, args) if kb.knowledge(&name).is_some() => {
                    self.streak = 0;
                    self.calls += 1;
                    if self.calls > self.budget.max_turns {
                        self.stop(Termination::BudgetExhausted, Some("too many skill calls".into()));
                        break;
                    }
                    let report = self.run_skill(&kb.per_skill[&name], flags, &name, &args);
                    let inv = invocation(&name, &args);
                    let turn = match self.domain {
                        Domain::Household => self.domain.render_turn(&self.domain.call_line(&inv), "Subprocedure finished."),
                        Domain::Shop => fewshot::base_shop_turn(&inv, &report, self.env.last_observation()),
                    };
                    text.push_str(&turn);
                }
                Parsed::Done(_) => self.stop(Termination::EnvDone, Some("base policy declared done".into())),
                Parsed::Call(..) | Parsed::EnvAction(_) | Parsed::Unparseable => {
                    if !turn.raw.is_empty() {
                        text.push_str(&self.domain.render_turn(&turn.raw, self.domain.noop_observation()));
                    }
                    self.unparseable(&turn.raw);
                }
            }
        }
    }
}

/// Fixed prompt for flat few-shot prompting.
pub fn react_prompt(domain: Domain, fewshot: &[String]) -> String {
    let k = SkillKnowledge {
        fewshot: fewshot.to_vec(),
        ..Default::default()
    };
    let none = AblationFlags {
        sd: false,
        pd: false,
        td: false,
        contrastive: false,
    };
    build_skill_prompt(domain, &k, none)
}

/// Append whole offline trajectories to `base` while the flat prompt stays within `token_budget`.
pub fn pack_long_fewshot(domain: Domain, base: &[String], extra: &[&Trajectory], token_budget: usize) -> Vec<String> {
    let mut out = base.to_vec();
    for t in extra {
        let r = t.render();
        if out.contains(&r) {
            continue;
        }
        out.push(r);
        if estimate_tokens(&react_prompt(domain, &out)) > token_budget {
            out.pop();
            break;
        }
    }
    out
}

pub fn run_react_episode(
    env: &mut dyn Environment,
    prompt: &str,
    budget: EpisodeBudget,
    gateway: &Gateway,
    memory: &[String],
) -> EpisodeResult {
    let mut run = Run::new(env, gateway, budget, memory);
    run.flat_loop(prompt);
    run.finish()
}

/// Hierarchical execution. A knowledge base holding only the pseudo-skill runs the flat loop.
pub fn run_o3d_episode(
    env: &mut dyn Environment,
    kb: &KnowledgeBase,
    budget: EpisodeBudget,
    gateway: &Gateway,
    memory: &[String],
) -> EpisodeResult {
    let mut run = Run::new(env, gateway, budget, memory);
    if kb.is_pseudo() {
        let k = &kb.per_skill[&kb.skills[0].name];
        let prompt = build_skill_prompt(run.domain, k, kb.ablation_provenance);
        run.flat_loop(&prompt);
    } else {
        run.base_loop(kb);
    }
    run.finish()
}

#[derive(Debug, Clone, Copy)]
pub enum InnerPolicy<'a> {
    React(&'a str),
    O3d(&'a KnowledgeBase),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReflexionOutcome {
    pub trials: Vec<EpisodeResult>,
    pub memory: Vec<String>,
}

impl ReflexionOutcome {
    pub fn last(&self) -> &EpisodeResult {
        self.trials.last().expect("at least one trial")
    }
}

pub fn reflection_prompt(episode_log: &str) -> String {
    templates::fill(templates::REFLECTION, &[("transcript", episode_log.trim_end())])
}

/// Repeat the task, reflecting after each failure, until success or `max_trials`.
pub fn run_reflexion(
    make_env: &dyn Fn() -> Box<dyn Environment>,
    policy: InnerPolicy<'_>,
    max_trials: usize,
    budget: EpisodeBudget,
    gateway: &Gateway,
) -> ReflexionOutcome {
    let mut trials = Vec::new();
    let mut memory: Vec<String> = Vec::new();
    for trial in 0..max_trials.max(1) {
        let mut env = make_env();
        let r = match policy {
            InnerPolicy::React(p) => run_react_episode(env.as_mut(), p, budget, gateway, &memory),
            InnerPolicy::O3d(kb) => run_o3d_episode(env.as_mut(), kb, budget, gateway, &memory),
        };
        let success = r.success;
        let log = r.episode_log.clone();
        trials.push(r);
        if success || trial + 1 >= max_trials {
            break;
        }
        let req = PromptRequest::user(reflection_prompt(&log), REFLECTION_MAX_TOKENS, vec![]);
        match gateway.complete(&req) {
            Ok(c) => memory.push(c.text.trim().to_string()),
            Err(e) => debug!(trial, error = %e, "reflection failed; memory unchanged"),
        }
    }
    ReflexionOutcome { trials, memory }
}

/// Per-task bookkeeping for reports.
pub fn termination_counts<'a>(results: impl IntoIterator<Item = &'a EpisodeResult>) -> BTreeMap<Termination, usize> {
    let mut m = BTreeMap::new();
    for r in results {
        *m.entry(r.termination).or_insert(0) += 1;
    }
    m
}

#[cfg(test)]
mod tests;
