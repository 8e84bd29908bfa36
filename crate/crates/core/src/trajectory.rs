//! Offline trajectory store: JSONL loading, validation, indexing and batch sampling.

use crate::domain::Domain;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("cannot read {path}: {source}")]
    FileUnreadable {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot write {path}: {source}")]
    FileUnwritable {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {reason}")]
    MalformedRecord { line: usize, reason: String },
    #[error("trajectory `{id}`: {reason}")]
    InvariantViolation { id: String, reason: String },
    #[error("no trajectories match the selection")]
    EmptySelection,
    #[error("batch size must be at least 1")]
    InvalidBatchSize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StepKind {
    Action,
    Think,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Success,
    Failure,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Expert,
    Agent,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub index: usize,
    pub kind: StepKind,
    pub text: String,
    pub observation: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub id: String,
    pub task_id: String,
    pub task_type: String,
    pub instruction: String,
    pub initial_observation: String,
    pub steps: Vec<Step>,
    pub outcome: Outcome,
    pub score: f64,
    pub source: Source,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StepRecord {
    kind: StepKind,
    text: String,
    observation: String,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrajectoryRecord {
    id: String,
    task_id: String,
    task_type: String,
    instruction: String,
    initial_observation: String,
    steps: Vec<StepRecord>,
    outcome: Outcome,
    score: f64,
    source: Source,
}

impl Trajectory {
    pub fn validate(&self) -> Result<(), DatasetError> {
        let bad = |reason: &str| DatasetError::InvariantViolation {
            id: self.id.clone(),
            reason: reason.to_string(),
        };
        if self.id.is_empty() {
            return Err(bad("empty id"));
        }
        if self.steps.is_empty() {
            return Err(bad("no steps"));
        }
        for (i, s) in self.steps.iter().enumerate() {
            if s.index != i {
                return Err(bad("step indices are not contiguous from 0"));
            }
        }
        if !(0.0..=1.0).contains(&self.score) || self.score.is_nan() {
            return Err(bad("score outside [0, 1]"));
        }
        if self.outcome == Outcome::Success && self.score != 1.0 {
            return Err(bad("success trajectory must have score 1"));
        }
        Ok(())
    }

    /// Household or shop, inferred from the task type.
    pub fn domain(&self) -> Domain {
        crate::env::domain_of_task_type(&self.task_type)
    }

    pub fn is_success(&self) -> bool {
        self.outcome == Outcome::Success
    }

    pub fn action_steps(&self) -> impl Iterator<Item = &Step> {
        self.steps.iter().filter(|s| s.kind == StepKind::Action)
    }

    /// Render steps `range` as agent-visible history lines.
    pub fn render_steps(&self, range: std::ops::RangeInclusive<usize>) -> String {
        let domain = self.domain();
        let mut out = String::new();
        for s in &self.steps[range] {
            out.push_str(&render_step(domain, s));
        }
        out
    }

    /// The full episode as the agent would have seen it.
    pub fn render(&self) -> String {
        let domain = self.domain();
        let mut out = domain.episode_header(&self.initial_observation, &self.instruction);
        if !self.steps.is_empty() {
            out.push_str(&self.render_steps(0..=self.steps.len() - 1));
        }
        out
    }

    fn from_record(r: TrajectoryRecord) -> Self {
        Trajectory {
            id: r.id,
            task_id: r.task_id,
            task_type: r.task_type,
            instruction: r.instruction,
            initial_observation: r.initial_observation,
            steps: r
                .steps
                .into_iter()
                .enumerate()
                .map(|(index, s)| Step {
                    index,
                    kind: s.kind,
                    text: s.text,
                    observation: s.observation,
                })
                .collect(),
            outcome: r.outcome,
            score: r.score,
            source: r.source,
        }
    }

    fn to_record(&self) -> TrajectoryRecord {
        TrajectoryRecord {
            id: self.id.clone(),
            task_id: self.task_id.clone(),
            task_type: self.task_type.clone(),
            instruction: self.instruction.clone(),
            initial_observation: self.initial_observation.clone(),
            steps: self
                .steps
                .iter()
                .map(|s| StepRecord {
                    kind: s.kind,
                    text: s.text.clone(),
                    observation: s.observation.clone(),
                })
                .collect(),
            outcome: self.outcome,
            score: self.score,
            source: self.source,
        }
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(&self.to_record()).expect("trajectory serializes")
    }
}

/// Render one stored step with the domain's turn format.
pub fn render_step(domain: Domain, s: &Step) -> String {
    match s.kind {
        StepKind::Action => domain.render_turn(&s.text, &s.observation),
        StepKind::Think => domain.render_turn(&domain.think_line(&s.text), &s.observation),
    }
}

/// Validated, indexed collection of trajectories in file order.
#[derive(Debug, Clone, Default)]
pub struct Dataset {
    trajectories: Vec<Trajectory>,
    by_task: BTreeMap<String, Vec<usize>>,
}

impl Dataset {
    pub fn new(trajectories: Vec<Trajectory>) -> Result<Self, DatasetError> {
        let mut seen = HashSet::new();
        let mut by_task: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (i, t) in trajectories.iter().enumerate() {
            t.validate()?;
            if !seen.insert(t.id.clone()) {
                return Err(DatasetError::InvariantViolation {
                    id: t.id.clone(),
                    reason: "duplicate id".into(),
                });
            }
            by_task.entry(t.task_id.clone()).or_default().push(i);
        }
        Ok(Dataset {
            trajectories,
            by_task,
        })
    }

    pub fn trajectories(&self) -> &[Trajectory] {
        &self.trajectories
    }

    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Trajectory> {
        self.trajectories.iter().find(|t| t.id == id)
    }

    pub fn by_task(&self, task_id: &str) -> impl Iterator<Item = &Trajectory> {
        self.by_task
            .get(task_id)
            .into_iter()
            .flatten()
            .map(|&i| &self.trajectories[i])
    }

    pub fn successes(&self) -> impl Iterator<Item = &Trajectory> {
        self.trajectories.iter().filter(|t| t.is_success())
    }

    pub fn failures(&self) -> impl Iterator<Item = &Trajectory> {
        self.trajectories.iter().filter(|t| !t.is_success())
    }
}

pub fn parse_jsonl(text: &str) -> Result<Dataset, DatasetError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: TrajectoryRecord =
            serde_json::from_str(line).map_err(|e| DatasetError::MalformedRecord {
                line: i + 1,
                reason: e.to_string(),
            })?;
        out.push(Trajectory::from_record(rec));
    }
    Dataset::new(out)
}

pub fn load_dataset(path: &Path) -> Result<Dataset, DatasetError> {
    let text = fs::read_to_string(path).map_err(|source| DatasetError::FileUnreadable {
        path: path.to_path_buf(),
        source,
    })?;
    parse_jsonl(&text)
}

/// Load and concatenate several files, validating the union.
pub fn load_datasets(paths: &[PathBuf]) -> Result<Dataset, DatasetError> {
    let mut all = Vec::new();
    for p in paths {
        all.extend(load_dataset(p)?.trajectories);
    }
    Dataset::new(all)
}

pub fn write_dataset(path: &Path, trajectories: &[Trajectory]) -> Result<(), DatasetError> {
    let unwritable = |source| DatasetError::FileUnwritable {
        path: path.to_path_buf(),
        source,
    };
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(unwritable)?;
        }
    }
    let file = fs::File::create(path).map_err(unwritable)?;
    let mut w = BufWriter::new(file);
    for t in trajectories {
        writeln!(w, "{}", t.to_json_line()).map_err(unwritable)?;
    }
    w.flush().map_err(unwritable)
}

pub type Filter<'f> = &'f dyn Fn(&Trajectory) -> bool;

/// Cursor over a (possibly shuffled) selection; consecutive batches are disjoint
/// within an epoch and wrap to a new epoch only once the selection is exhausted.
#[derive(Debug, Clone)]
pub struct BatchSampler<'a> {
    pool: Vec<&'a Trajectory>,
    cursor: usize,
}

impl<'a> BatchSampler<'a> {
    pub fn shuffled(
        dataset: &'a Dataset,
        seed: u64,
        filter: Option<Filter<'_>>,
    ) -> Result<Self, DatasetError> {
        let mut s = Self::in_order(dataset, filter)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        s.pool.shuffle(&mut rng);
        Ok(s)
    }

    pub fn in_order(dataset: &'a Dataset, filter: Option<Filter<'_>>) -> Result<Self, DatasetError> {
        let pool: Vec<_> = dataset
            .trajectories
            .iter()
            .filter(|t| filter.is_none_or(|f| f(t)))
            .collect();
        if pool.is_empty() {
            return Err(DatasetError::EmptySelection);
        }
        Ok(BatchSampler { pool, cursor: 0 })
    }

    pub fn from_pool(pool: Vec<&'a Trajectory>) -> Result<Self, DatasetError> {
        if pool.is_empty() {
            return Err(DatasetError::EmptySelection);
        }
        Ok(BatchSampler { pool, cursor: 0 })
    }

    pub fn pool_len(&self) -> usize {
        self.pool.len()
    }

    pub fn next_batch(&mut self, n: usize) -> Result<Vec<&'a Trajectory>, DatasetError> {
        if n == 0 {
            return Err(DatasetError::InvalidBatchSize);
        }
        if self.cursor >= self.pool.len() {
            self.cursor = 0;
        }
        let end = (self.cursor + n).min(self.pool.len());
        let batch = self.pool[self.cursor..end].to_vec();
        self.cursor = end;
        Ok(batch)
    }
}

/// One seeded batch of up to `n` distinct trajectories.
pub fn sample_batch<'a>(
    dataset: &'a Dataset,
    n: usize,
    seed: u64,
    filter: Option<Filter<'_>>,
) -> Result<Vec<&'a Trajectory>, DatasetError> {
    BatchSampler::shuffled(dataset, seed, filter)?.next_batch(n)
}

#[derive(Debug, Clone, Copy)]
pub struct ContrastivePair<'a> {
    pub success: &'a Trajectory,
    pub failure: &'a Trajectory,
}

/// For each task with both outcomes, pair the lowest-id success with the lowest-id failure.
/// Pairs come out ordered by task id.
pub fn make_contrastive_pairs(dataset: &Dataset) -> Vec<ContrastivePair<'_>> {
    let mut pairs = Vec::new();
    for idxs in dataset.by_task.values() {
        let pick = |outcome: Outcome| {
            idxs.iter()
                .map(|&i| &dataset.trajectories[i])
                .filter(|t| t.outcome == outcome)
                .min_by(|a, b| a.id.cmp(&b.id))
        };
        if let (Some(success), Some(failure)) = (pick(Outcome::Success), pick(Outcome::Failure)) {
            pairs.push(ContrastivePair { success, failure });
        }
    }
    pairs
}

pub fn dataset_stats(dataset: &Dataset) -> BTreeMap<(String, Outcome), usize> {
    let mut m = BTreeMap::new();
    for t in &dataset.trajectories {
        *m.entry((t.task_type.clone(), t.outcome)).or_insert(0) += 1;
    }
    m
}
