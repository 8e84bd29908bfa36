use super::{read_json, require, write_json, EvalError, RunConfig};
use crate::discovery::{
    discover_skills, segment_dataset, DiscoveryLog, SegmentationReport, SegmentedTrajectory, SkillSet, SkillSpec,
};
use crate::distill::{distill, DistillReport, KnowledgeBase};
use crate::gateway::Gateway;
use crate::trajectory::{load_datasets, Dataset, Trajectory};
use std::path::Path;
use tracing::info;

#[derive(Debug, Clone)]
pub struct DiscoverArtifacts {
    pub skills: SkillSet,
    pub segmented: Vec<SegmentedTrajectory>,
    pub log: DiscoveryLog,
    pub report: SegmentationReport,
}

pub(crate) fn load_data(cfg: &RunConfig) -> Result<Dataset, EvalError> {
    if cfg.datasets.is_empty() {
        return Err(EvalError::InvalidConfig("no datasets configured".into()));
    }
    for p in &cfg.datasets {
        require(p)?;
    }
    Ok(load_datasets(&cfg.datasets)?)
}

fn write_segmented(path: &Path, segs: &[SegmentedTrajectory]) -> Result<(), EvalError> {
    let text: String = segs
        .iter()
        .map(|s| serde_json::to_string(s).expect("segments serialize") + "\n")
        .collect();
    super::atomic_write(path, text.as_bytes())
}

fn read_segmented(path: &Path) -> Result<Vec<SegmentedTrajectory>, EvalError> {
    require(path)?;
    let text = std::fs::read_to_string(path).map_err(|e| EvalError::io(path, e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| EvalError::Malformed {
                path: path.to_path_buf(),
                reason: format!("line {}: {e}", i + 1),
            })
        })
        .collect()
}

/// Stage 1: discover skills from successes, then segment every trajectory.
/// With SD off the skill set is the single pseudo-skill and segments are whole trajectories.
pub fn run_discover(cfg: &RunConfig, gateway: &Gateway) -> Result<DiscoverArtifacts, EvalError> {
    cfg.validate()?;
    let data = load_data(cfg)?;
    let (skills, log) = if cfg.ablation.sd {
        let pool: Vec<&Trajectory> = data.successes().collect();
        let (batch, iters) = cfg.discovery.resolve(cfg.domain);
        discover_skills(&pool, cfg.domain, batch, iters, gateway)?
    } else {
        (SkillSet::new(vec![SkillSpec::pseudo_task()]), DiscoveryLog::default())
    };
    let all: Vec<&Trajectory> = data.trajectories().iter().collect();
    let (segmented, report) = segment_dataset(&all, &skills, gateway, cfg.discovery.segment_retries)?;
    gateway.flush()?;

    write_json(&cfg.skills_path(), &skills)?;
    write_segmented(&cfg.segmented_path(), &segmented)?;
    write_json(&cfg.output_dir.join("discovery_log.json"), &log)?;
    write_json(&cfg.output_dir.join("segmentation_report.json"), &report)?;
    info!(skills = ?skills.names(), fallbacks = report.fallbacks.len(), "discovery artifacts written");
    Ok(DiscoverArtifacts {
        skills,
        segmented,
        log,
        report,
    })
}

/// Stage 2: consume the Stage 1 artifacts and the datasets, write the knowledge base.
pub fn run_distill(cfg: &RunConfig, gateway: &Gateway) -> Result<(KnowledgeBase, DistillReport), EvalError> {
    cfg.validate()?;
    let data = load_data(cfg)?;
    let skills: SkillSet = read_json(&cfg.skills_path())?;
    let segmented = read_segmented(&cfg.segmented_path())?;
    let (kb, report) = distill(
        cfg.domain,
        &data,
        &skills,
        &segmented,
        cfg.ablation,
        cfg.distill_schedule(),
        gateway,
    )?;
    gateway.flush()?;
    write_json(&cfg.kb_path(), &kb)?;
    write_json(&cfg.output_dir.join("distill_report.json"), &report)?;
    info!(kb = %cfg.kb_path().display(), "knowledge base written");
    Ok((kb, report))
}
