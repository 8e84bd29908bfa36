use super::metrics::{compute_metrics, render_report, EpisodeSummary, Layout, SuiteMetrics};
use super::pipeline::load_data;
use super::suite::{CatalogCache, Suite, SuiteEntry};
use super::{atomic_write, require, write_json, EvalError, Mode, RunConfig};
use crate::distill::fewshot::select_flat_fewshot;
use crate::distill::KnowledgeBase;
use crate::env::{env_reset, Environment};
use crate::executor::{
    pack_long_fewshot, react_prompt, run_o3d_episode, run_react_episode, run_reflexion, EpisodeResult, InnerPolicy,
    Termination,
};
use crate::gateway::Gateway;
use crate::trajectory::{Dataset, Trajectory};
use rayon::prelude::*;
use std::collections::BTreeMap;
use tracing::{info, warn};

/// What an episode is run with: a flat prompt per task type, or a knowledge base.
#[derive(Debug, Clone)]
pub enum Policy {
    Flat {
        by_type: BTreeMap<String, String>,
        fallback: String,
    },
    Kb(KnowledgeBase),
}

impl Policy {
    fn prompt_for(&self, task_type: &str) -> Option<&str> {
        match self {
            Policy::Flat { by_type, fallback } => Some(by_type.get(task_type).unwrap_or(fallback)),
            Policy::Kb(_) => None,
        }
    }
}

fn by_length(mut v: Vec<&Trajectory>) -> Vec<&Trajectory> {
    v.sort_by(|a, b| (a.steps.len(), &a.id).cmp(&(b.steps.len(), &b.id)));
    v
}

fn flat_prompts(cfg: &RunConfig, data: &Dataset) -> Policy {
    let mut types: BTreeMap<&str, Vec<&Trajectory>> = BTreeMap::new();
    for t in data.successes() {
        types.entry(&t.task_type).or_default().push(t);
    }
    let all: Vec<&Trajectory> = by_length(data.successes().collect());
    let build = |same: &[&Trajectory]| {
        let base = select_flat_fewshot(same, cfg.fewshot_k);
        let examples = if cfg.mode == Mode::ReactLong {
            let mut extra = by_length(same.to_vec());
            extra.extend(all.iter().filter(|t| !same.iter().any(|s| s.id == t.id)));
            pack_long_fewshot(cfg.domain, &base, &extra, cfg.long_token_budget())
        } else {
            base
        };
        react_prompt(cfg.domain, &examples)
    };
    Policy::Flat {
        by_type: types.iter().map(|(k, v)| (k.to_string(), build(v))).collect(),
        fallback: build(&all),
    }
}

pub fn build_policy(cfg: &RunConfig) -> Result<Policy, EvalError> {
    if cfg.mode.uses_kb() {
        let path = cfg.kb_path();
        require(&path)?;
        Ok(Policy::Kb(KnowledgeBase::load(&path)?))
    } else {
        Ok(flat_prompts(cfg, &load_data(cfg)?))
    }
}

#[derive(Debug, Clone)]
pub struct SuiteRun {
    pub results: Vec<EpisodeSummary>,
    pub metrics: SuiteMetrics,
    pub report: String,
}

struct Episode {
    summary: EpisodeSummary,
    trials: Vec<EpisodeResult>,
    memory: Vec<String>,
}

fn failed(entry: &SuiteEntry, diagnostic: String) -> Episode {
    Episode {
        summary: EpisodeSummary {
            task_id: entry.task_id(),
            task_type: entry.task_type(),
            success: false,
            score: 0.0,
            turns_used: 0,
            termination: Termination::AgentError,
            trials: 0,
            diagnostic: Some(diagnostic),
        },
        trials: Vec::new(),
        memory: Vec::new(),
    }
}

fn run_one(cfg: &RunConfig, policy: &Policy, entry: &SuiteEntry, catalogs: &CatalogCache, gw: &Gateway) -> Episode {
    let task = match entry.resolve(catalogs) {
        Ok(t) => t,
        Err(e) => return failed(entry, e.to_string()),
    };
    let catalog = match entry {
        SuiteEntry::Shop { catalog_seed, .. } => Some(catalogs.get(*catalog_seed)),
        SuiteEntry::Household { .. } => None,
    };
    let make = || -> Box<dyn Environment> { env_reset(&task, catalog.as_ref()) };
    let task_type = task.task_type();
    let inner = match policy {
        Policy::Kb(kb) => InnerPolicy::O3d(kb),
        Policy::Flat { .. } => InnerPolicy::React(policy.prompt_for(&task_type).expect("flat prompt")),
    };
    let (trials, memory) = if cfg.mode.reflects() {
        let out = run_reflexion(&make, inner, cfg.reflexion_trials(), cfg.budget, gw);
        (out.trials, out.memory)
    } else {
        let mut env = make();
        let r = match inner {
            InnerPolicy::O3d(kb) => run_o3d_episode(env.as_mut(), kb, cfg.budget, gw, &[]),
            InnerPolicy::React(p) => run_react_episode(env.as_mut(), p, cfg.budget, gw, &[]),
        };
        (vec![r], Vec::new())
    };
    let last = trials.last().expect("at least one trial");
    if let Some(d) = &last.diagnostic {
        warn!(task = %entry.task_id(), diagnostic = %d, "episode ended with a diagnostic");
    }
    Episode {
        summary: EpisodeSummary {
            task_id: entry.task_id(),
            task_type,
            success: last.success,
            score: last.score,
            turns_used: last.turns_used,
            termination: last.termination,
            trials: trials.len(),
            diagnostic: last.diagnostic.clone(),
        },
        trials,
        memory,
    }
}

fn dump(cfg: &RunConfig, ep: &Episode) -> Result<(), EvalError> {
    let dir = cfg.output_dir.join("transcripts");
    let mut events = String::new();
    let mut log = String::new();
    for (i, t) in ep.trials.iter().enumerate() {
        events.push_str(&t.transcript.to_jsonl());
        if ep.trials.len() > 1 {
            log.push_str(&format!("## trial {i}\n"));
        }
        log.push_str(&t.episode_log);
        log.push('\n');
    }
    for (i, m) in ep.memory.iter().enumerate() {
        log.push_str(&format!("## reflection {i}\n{m}\n"));
    }
    let id = &ep.summary.task_id;
    atomic_write(&dir.join(format!("{id}.jsonl")), events.as_bytes())?;
    atomic_write(&dir.join(format!("{id}.txt")), log.as_bytes())
}

fn report_text(cfg: &RunConfig, metrics: &SuiteMetrics) -> String {
    let mut out = format!(
        "mode: {}\nepisodes: {}\n\n",
        cfg.mode.as_str(),
        metrics.overall.episodes
    );
    out.push_str(&render_report(metrics, Layout::from(cfg.domain)));
    out.push_str("\nterminations:\n");
    for (t, n) in &metrics.terminations {
        out.push_str(&format!("  {}: {n}\n", serde_json::to_value(t).expect("termination").as_str().unwrap_or("")));
    }
    out
}

/// Run every suite task under the configured mode on a pool of `workers` threads.
/// Results keep suite order; a task that fails to build is recorded, not fatal.
pub fn run_suite(cfg: &RunConfig, gateway: &Gateway) -> Result<SuiteRun, EvalError> {
    cfg.validate_run()?;
    let suite_path = cfg.suite.as_ref().expect("validated");
    let suite = Suite::load(suite_path)?;
    if suite.domain != cfg.domain {
        return Err(EvalError::InvalidConfig(format!(
            "suite is for {} but the config says {}",
            suite.domain, cfg.domain
        )));
    }
    let policy = build_policy(cfg)?;
    let catalogs = CatalogCache::default();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| EvalError::InvalidConfig(e.to_string()))?;
    let episodes: Vec<Episode> = pool.install(|| {
        suite
            .tasks
            .par_iter()
            .map(|e| run_one(cfg, &policy, e, &catalogs, gateway))
            .collect()
    });
    gateway.flush()?;

    let results: Vec<EpisodeSummary> = episodes.iter().map(|e| e.summary.clone()).collect();
    let metrics = compute_metrics(&results);
    let report = report_text(cfg, &metrics);
    let lines: String = results
        .iter()
        .map(|r| serde_json::to_string(r).expect("summary serializes") + "\n")
        .collect();
    atomic_write(&cfg.output_dir.join("results.jsonl"), lines.as_bytes())?;
    write_json(&cfg.output_dir.join("metrics.json"), &metrics)?;
    atomic_write(&cfg.output_dir.join("report.txt"), report.as_bytes())?;
    if cfg.dump_transcripts {
        for e in &episodes {
            dump(cfg, e)?;
        }
    }
    info!(
        episodes = metrics.overall.episodes,
        successes = metrics.overall.successes,
        "suite finished"
    );
    Ok(SuiteRun {
        results,
        metrics,
        report,
    })
}
