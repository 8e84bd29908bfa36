use super::EvalError;
use crate::distill::{AblationFlags, DistillSchedule};
use crate::domain::Domain;
use crate::executor::EpisodeBudget;
use crate::gateway::GatewayConfig;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    React,
    ReactLong,
    #[default]
    O3d,
    Reflexion,
    ReflexionO3d,
}

impl Mode {
    pub const ALL: [Mode; 5] = [Mode::React, Mode::ReactLong, Mode::O3d, Mode::Reflexion, Mode::ReflexionO3d];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::React => "react",
            Mode::ReactLong => "react_long",
            Mode::O3d => "o3d",
            Mode::Reflexion => "reflexion",
            Mode::ReflexionO3d => "reflexion_o3d",
        }
    }

    /// Modes whose policy comes from a knowledge base.
    pub fn uses_kb(self) -> bool {
        matches!(self, Mode::O3d | Mode::ReflexionO3d)
    }

    pub fn reflects(self) -> bool {
        matches!(self, Mode::Reflexion | Mode::ReflexionO3d)
    }
}

impl FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Mode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown mode `{s}`"))
    }
}

/// Stage 1 schedule. Unset fields take the domain defaults.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct DiscoveryConfig {
    pub batch_size: Option<usize>,
    pub iterations: Option<usize>,
    pub segment_retries: usize,
}

impl Default for DiscoveryConfig {
    fn default() -> Self {
        DiscoveryConfig {
            batch_size: None,
            iterations: None,
            segment_retries: 2,
        }
    }
}

impl DiscoveryConfig {
    /// (batch size, iterations).
    pub fn resolve(&self, domain: Domain) -> (usize, usize) {
        let (b, n) = match domain {
            Domain::Household => (1, 6),
            Domain::Shop => (2, 15),
        };
        (self.batch_size.unwrap_or(b), self.iterations.unwrap_or(n))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub domain: Domain,
    #[serde(default)]
    pub mode: Mode,
    #[serde(default)]
    pub datasets: Vec<PathBuf>,
    #[serde(default)]
    pub kb: Option<PathBuf>,
    /// Stage 1 outputs; default to `output_dir/skills.json` and `output_dir/segmented.jsonl`.
    #[serde(default)]
    pub skills: Option<PathBuf>,
    #[serde(default)]
    pub segmented: Option<PathBuf>,
    #[serde(default)]
    pub suite: Option<PathBuf>,
    pub output_dir: PathBuf,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub dump_transcripts: bool,
    /// Reflexion trials per task; 10 for household and 3 for shop when unset.
    #[serde(default)]
    pub reflexion_trials: Option<usize>,
    /// Prompt budget for ReAct-long few-shot packing; three quarters of the context when unset.
    #[serde(default)]
    pub long_token_budget: Option<usize>,
    #[serde(default = "default_fewshot_k")]
    pub fewshot_k: usize,
    #[serde(default)]
    pub ablation: AblationFlags,
    #[serde(default)]
    pub budget: EpisodeBudget,
    #[serde(default)]
    pub backend: GatewayConfig,
    #[serde(default)]
    pub discovery: DiscoveryConfig,
    #[serde(default)]
    pub schedule: Option<DistillSchedule>,
}

fn default_workers() -> usize {
    1
}

fn default_fewshot_k() -> usize {
    2
}

impl RunConfig {
    pub fn new(domain: Domain, output_dir: impl Into<PathBuf>) -> Self {
        RunConfig {
            domain,
            mode: Mode::default(),
            datasets: Vec::new(),
            kb: None,
            skills: None,
            segmented: None,
            suite: None,
            output_dir: output_dir.into(),
            workers: default_workers(),
            seed: 0,
            dump_transcripts: false,
            reflexion_trials: None,
            long_token_budget: None,
            fewshot_k: default_fewshot_k(),
            ablation: AblationFlags::FULL,
            budget: EpisodeBudget::default(),
            backend: GatewayConfig::default(),
            discovery: DiscoveryConfig::default(),
            schedule: None,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, EvalError> {
        toml::from_str(text).map_err(|e| EvalError::InvalidConfig(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Parse a config file. Relative paths inside it resolve against its directory.
    pub fn load(path: &Path) -> Result<Self, EvalError> {
        super::require(path)?;
        let text = std::fs::read_to_string(path).map_err(|e| EvalError::io(path, e))?;
        let mut cfg = Self::from_toml(&text)?;
        if let Some(dir) = path.parent() {
            cfg.rebase(dir);
        }
        Ok(cfg)
    }

    fn rebase(&mut self, dir: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        };
        self.datasets.iter_mut().for_each(fix);
        for p in [&mut self.kb, &mut self.skills, &mut self.segmented, &mut self.suite]
            .into_iter()
            .flatten()
        {
            fix(p);
        }
        fix(&mut self.output_dir);
        if let Some(p) = self.backend.cassette_path.as_mut() {
            fix(p);
        }
    }

    pub fn skills_path(&self) -> PathBuf {
        self.skills.clone().unwrap_or_else(|| self.output_dir.join("skills.json"))
    }

    pub fn segmented_path(&self) -> PathBuf {
        self.segmented.clone().unwrap_or_else(|| self.output_dir.join("segmented.jsonl"))
    }

    pub fn kb_path(&self) -> PathBuf {
        self.kb.clone().unwrap_or_else(|| self.output_dir.join("kb.json"))
    }

    pub fn reflexion_trials(&self) -> usize {
        self.reflexion_trials.unwrap_or(match self.domain {
            Domain::Household => 10,
            Domain::Shop => 3,
        })
    }

    pub fn long_token_budget(&self) -> usize {
        self.long_token_budget
            .unwrap_or(self.backend.context_limit_tokens * 3 / 4)
    }

    pub fn distill_schedule(&self) -> DistillSchedule {
        self.schedule
            .unwrap_or_else(|| DistillSchedule::for_domain(self.domain, self.ablation))
    }

    /// Checks that hold for every command.
    pub fn validate(&self) -> Result<(), EvalError> {
        let bad = |m: String| Err(EvalError::InvalidConfig(m));
        if self.workers == 0 {
            return bad("workers must be at least 1".into());
        }
        if self.reflexion_trials == Some(0) {
            return bad("reflexion_trials must be at least 1".into());
        }
        if self.budget.max_turns == 0 {
            return bad("budget.max_turns must be at least 1".into());
        }
        if self.discovery.batch_size == Some(0) || self.discovery.iterations == Some(0) {
            return bad("discovery batch_size and iterations must be at least 1".into());
        }
        Ok(())
    }

    /// Additional checks before running a suite: the mode's artifacts must be named.
    pub fn validate_run(&self) -> Result<(), EvalError> {
        self.validate()?;
        let bad = |m: String| Err(EvalError::InvalidConfig(m));
        if self.suite.is_none() {
            return bad("running needs a suite path".into());
        }
        if self.mode.uses_kb() && self.kb.is_none() {
            return bad(format!("mode {} needs a kb path", self.mode.as_str()));
        }
        if !self.mode.uses_kb() && self.datasets.is_empty() {
            return bad(format!("mode {} needs datasets for few-shot examples", self.mode.as_str()));
        }
        if !self.mode.uses_kb() && self.ablation != AblationFlags::FULL {
            return bad("ablation flags only apply to knowledge-base modes".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
domain = "household"
mode = "reflexion_o3d"
datasets = ["data/household.jsonl"]
kb = "out/kb.json"
suite = "suite.json"
output_dir = "out/run"
workers = 4

[ablation]
sd = true
pd = true
td = false
contrastive = true

[budget]
max_turns = 30

[backend]
mode = "replay"
cassette_path = "golden/oracle.json"
"#;

    #[test]
    fn parses_and_rebases() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("run.toml");
        std::fs::write(&p, SAMPLE).unwrap();
        let cfg = RunConfig::load(&p).unwrap();
        assert_eq!(cfg.mode, Mode::ReflexionO3d);
        assert_eq!(cfg.kb.as_deref(), Some(dir.path().join("out/kb.json").as_path()));
        assert_eq!(cfg.backend.cassette_path, Some(dir.path().join("golden/oracle.json")));
        assert_eq!(cfg.budget.per_skill_max_turns, 10);
        assert_eq!(cfg.reflexion_trials(), 10);
        assert!(!cfg.ablation.td);
        cfg.validate_run().unwrap();
    }

    #[test]
    fn kb_modes_need_a_kb() {
        let mut cfg = RunConfig::new(Domain::Shop, "out");
        cfg.mode = Mode::ReflexionO3d;
        cfg.suite = Some("suite.json".into());
        assert!(matches!(cfg.validate_run(), Err(EvalError::InvalidConfig(_))));
        cfg.kb = Some("kb.json".into());
        cfg.validate_run().unwrap();
        assert_eq!(cfg.reflexion_trials(), 3);
    }

    #[test]
    fn flat_modes_need_data_and_no_ablation() {
        let mut cfg = RunConfig::new(Domain::Household, "out");
        cfg.mode = Mode::React;
        cfg.suite = Some("suite.json".into());
        assert!(cfg.validate_run().is_err());
        cfg.datasets.push("d.jsonl".into());
        cfg.validate_run().unwrap();
        cfg.ablation.td = false;
        assert!(cfg.validate_run().is_err());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = RunConfig::from_toml("domain = \"shop\"\noutput_dir = \"o\"\napi_key = \"x\"\n").unwrap_err();
        assert!(err.to_string().contains("api_key"));
    }

    #[test]
    fn toml_roundtrip() {
        let mut cfg = RunConfig::new(Domain::Shop, "out");
        cfg.kb = Some("kb.json".into());
        assert_eq!(RunConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }
}
