//! Per-skill knowledge distillation: primitive actions, improvement tips, and few-shot
//! examples, assembled into a knowledge base of policy prompts.

pub mod fewshot;
mod kb;
mod primitives;
mod tips;

pub use kb::{
    build_base_prompt, build_skill_prompt, skill_list, AblationFlags, KnowledgeBase, SkillKnowledge,
    HOUSEHOLD_PRIMITIVE_HEADER, SHOP_PRIMITIVE_HEADER,
};
pub use primitives::{
    describe, discover_primitives, merge_primitives, parse_primitive_response, pattern_matches,
    render_primitive_block, render_primitive_prompt, PrimitiveSpec,
};
pub use tips::{
    distill_tips, merge_tips, normalize_tip, parse_tips, render_tip_prompt, PairView, Tip, TipMode, TipOrigin,
};

use crate::discovery::{Segment, SegmentedTrajectory, SkillSet, SkillSpec, PSEUDO_SKILL};
use crate::domain::Domain;
use crate::gateway::{Gateway, GatewayError};
use crate::trajectory::{make_contrastive_pairs, Dataset, Trajectory};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;
use tracing::{info, warn};

#[derive(Debug, Error)]
pub enum DistillError {
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error("no primitives found for skill `{0}`")]
    NoPrimitivesFound(String),
    #[error("no contrastive pairs contain skill `{0}`")]
    NoPairsForSkill(String),
    #[error("malformed primitive block at line {0}")]
    MalformedBlock(usize),
    #[error("malformed knowledge base: {0}")]
    MalformedKb(String),
    #[error("{0}")]
    Io(String),
}

/// Context a skill policy starts from: the initial observation, the environment
/// history so far, and the invocation.
pub fn skill_header(domain: Domain, initial_observation: &str, history: &str, invocation: &str) -> String {
    let init = match domain {
        Domain::Household => initial_observation.trim_end().to_string(),
        Domain::Shop => format!("{}\n", initial_observation.trim_end()),
    };
    format!("{init}\nYour historical interactions:\n{history}Your task is: {invocation}\n")
}

/// A segment with the history that preceded it, as the skill policy sees it.
pub fn segment_view(t: &Trajectory, seg: &Segment) -> String {
    if seg.skill == PSEUDO_SKILL {
        return t.render();
    }
    let history = if seg.start == 0 {
        String::new()
    } else {
        t.render_steps(0..=seg.start - 1)
    };
    let mut out = skill_header(t.domain(), &t.initial_observation, &history, &seg.invocation());
    out.push_str(&t.render_steps(seg.start..=seg.end));
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DistillSchedule {
    /// Success trajectories whose segments feed primitive discovery.
    pub primitive_trajectories: usize,
    pub primitive_batch: usize,
    /// Contrastive pairs available to tip distillation.
    pub tip_pairs: usize,
    pub tip_batch: usize,
    pub fewshot_k: usize,
}

impl DistillSchedule {
    pub fn for_domain(domain: Domain, flags: AblationFlags) -> Self {
        match domain {
            Domain::Household if !flags.sd && !flags.pd && flags.td => DistillSchedule {
                primitive_trajectories: 12,
                primitive_batch: 1,
                tip_pairs: 30,
                tip_batch: 2,
                fewshot_k: 2,
            },
            Domain::Household => DistillSchedule {
                primitive_trajectories: 12,
                primitive_batch: 1,
                tip_pairs: 80,
                tip_batch: 1,
                fewshot_k: 2,
            },
            Domain::Shop => DistillSchedule {
                primitive_trajectories: 90,
                primitive_batch: 1,
                tip_pairs: 30,
                tip_batch: 1,
                fewshot_k: 2,
            },
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DistillReport {
    pub primitive_counts: BTreeMap<String, usize>,
    pub tip_counts: BTreeMap<String, usize>,
    pub no_pairs: Vec<String>,
    pub no_primitives: Vec<String>,
}

fn segments_of<'a>(
    trajs: &[&'a Trajectory],
    segs: &'a BTreeMap<String, &'a SegmentedTrajectory>,
    skill: &str,
) -> Vec<(&'a Trajectory, &'a Segment)> {
    let mut out = Vec::new();
    for t in trajs {
        if let Some(st) = segs.get(&t.id) {
            out.extend(st.segments.iter().filter(|s| s.skill == skill).map(|s| (*t, s)));
        }
    }
    out
}

fn first_segment<'a>(segs: &'a BTreeMap<String, &'a SegmentedTrajectory>, t: &Trajectory, skill: &str) -> Option<&'a Segment> {
    segs.get(&t.id)?.segments.iter().find(|s| s.skill == skill)
}

/// Skill name, its knowledge, and the skill if it found no primitives / no pairs.
type SkillOutcome = (String, SkillKnowledge, Option<String>, Option<String>);

/// Run primitive discovery, tip distillation and few-shot selection for every skill.
pub fn distill(
    domain: Domain,
    dataset: &Dataset,
    skills: &SkillSet,
    segmented: &[SegmentedTrajectory],
    flags: AblationFlags,
    schedule: DistillSchedule,
    gateway: &Gateway,
) -> Result<(KnowledgeBase, DistillReport), DistillError> {
    let by_id: BTreeMap<String, &SegmentedTrajectory> =
        segmented.iter().map(|s| (s.trajectory_id.clone(), s)).collect();
    let successes: Vec<&Trajectory> = dataset.successes().filter(|t| by_id.contains_key(&t.id)).collect();
    let prim_pool: Vec<&Trajectory> = successes.iter().take(schedule.primitive_trajectories).copied().collect();
    let pairs: Vec<_> = make_contrastive_pairs(dataset).into_iter().take(schedule.tip_pairs).collect();
    let mode = if flags.contrastive {
        TipMode::Contrastive
    } else {
        TipMode::NonContrastive
    };

    let results: Vec<Result<SkillOutcome, DistillError>> = skills
        .skills
        .par_iter()
        .map(|skill| {
            let mut k = SkillKnowledge::default();
            let mut no_prims = None;
            let mut no_pairs = None;
            if flags.pd {
                let items = segments_of(&prim_pool, &by_id, &skill.name);
                match discover_primitives(domain, skill, &items, schedule.primitive_batch, gateway) {
                    Ok(p) => k.primitives = p,
                    Err(DistillError::NoPrimitivesFound(s)) => no_prims = Some(s),
                    Err(e) => return Err(e),
                }
            }
            if flags.td {
                let views = tip_views(&pairs, &by_id, skill);
                match distill_tips(domain, skill, &views, mode, schedule.tip_batch, gateway) {
                    Ok(t) => k.tips = t,
                    Err(DistillError::NoPairsForSkill(s)) => no_pairs = Some(s),
                    Err(e) => return Err(e),
                }
            }
            k.fewshot = if skill.is_pseudo() {
                fewshot::select_flat_fewshot(&successes, schedule.fewshot_k)
            } else {
                fewshot::select_fewshot(&segments_of(&successes, &by_id, &skill.name), schedule.fewshot_k)
            };
            Ok((skill.name.clone(), k, no_prims, no_pairs))
        })
        .collect();

    let mut per_skill = BTreeMap::new();
    let mut report = DistillReport::default();
    for r in results {
        let (name, k, np, nt) = r?;
        report.primitive_counts.insert(name.clone(), k.primitives.len());
        report.tip_counts.insert(name.clone(), k.tips.len());
        if let Some(s) = np {
            warn!(skill = %s, "no primitives found");
            report.no_primitives.push(s);
        }
        if let Some(s) = nt {
            warn!(skill = %s, "no contrastive pairs for skill");
            report.no_pairs.push(s);
        }
        per_skill.insert(name, k);
    }

    let base_fewshot = if skills.is_pseudo() {
        Vec::new()
    } else {
        let items: Vec<(&Trajectory, &SegmentedTrajectory)> =
            successes.iter().map(|t| (*t, by_id[&t.id])).collect();
        fewshot::select_base_fewshot(&items, schedule.fewshot_k)
    };
    let kb = KnowledgeBase {
        skills: skills.skills.clone(),
        per_skill,
        base_fewshot,
        ablation_provenance: flags,
    };
    kb.validate()?;
    info!(skills = kb.skills.len(), "distillation finished");
    Ok((kb, report))
}

fn tip_views(
    pairs: &[crate::trajectory::ContrastivePair<'_>],
    by_id: &BTreeMap<String, &SegmentedTrajectory>,
    skill: &SkillSpec,
) -> Vec<PairView> {
    let mut out = Vec::new();
    for p in pairs {
        if skill.is_pseudo() {
            out.push(PairView {
                success: p.success.render(),
                failure: Some(p.failure.render()),
            });
            continue;
        }
        let Some(s) = first_segment(by_id, p.success, &skill.name) else { continue };
        out.push(PairView {
            success: segment_view(p.success, s),
            failure: first_segment(by_id, p.failure, &skill.name).map(|f| segment_view(p.failure, f)),
        });
    }
    out
}
