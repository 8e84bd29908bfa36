//! Skill discovery from successful trajectories and segmentation of trajectories into
//! skill-labelled spans.

mod skill;

pub use skill::{invocation, parse_call, SkillSet, SkillSpec, PSEUDO_SKILL};

use crate::domain::Domain;
use crate::gateway::{Gateway, GatewayError, PromptRequest};
use crate::templates;
use crate::trajectory::{BatchSampler, DatasetError, StepKind, Trajectory};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;
use tracing::{debug, info, warn};

pub const STAGE_MAX_TOKENS: u32 = 2048;

#[derive(Debug, Error)]
pub enum DiscoveryError {
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error("response has no subtask list: {0}")]
    MalformedResponse(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SegmentationError {
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error("segment names unknown skill `{0}`")]
    UnknownSkill(String),
    #[error("segmentation does not match the trajectory: {0}")]
    Mismatch(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub skill: String,
    pub args: Vec<String>,
    /// Inclusive step range over the full step list.
    pub start: usize,
    pub end: usize,
}

impl Segment {
    pub fn invocation(&self) -> String {
        invocation(&self.skill, &self.args)
    }

    pub fn len(&self) -> usize {
        self.end + 1 - self.start
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentedTrajectory {
    pub trajectory_id: String,
    pub segments: Vec<Segment>,
}

impl SegmentedTrajectory {
    /// Spans are contiguous, non-overlapping and cover every step.
    pub fn check(&self, n_steps: usize) -> Result<(), String> {
        let mut next = 0;
        for s in &self.segments {
            if s.start != next || s.end < s.start {
                return Err(format!("segment {s:?} does not start at {next}"));
            }
            next = s.end + 1;
        }
        if next != n_steps {
            return Err(format!("segments cover {next} of {n_steps} steps"));
        }
        Ok(())
    }
}

fn list_block(skills: &SkillSet) -> String {
    if skills.skills.is_empty() {
        "Here is no list of subtasks to start with.".to_string()
    } else {
        let lines: Vec<String> = skills.skills.iter().map(|s| format!("- {}", s.signature())).collect();
        format!("Here is the list of subtasks to start with:\n\n{}", lines.join("\n"))
    }
}

fn trial_label(t: &Trajectory) -> &'static str {
    if t.is_success() {
        "Success trial:"
    } else {
        "Failure trial:"
    }
}

pub fn render_discovery_prompt(domain: Domain, batch: &[&Trajectory], skills: &SkillSet) -> String {
    let trials: Vec<String> = batch
        .iter()
        .enumerate()
        .map(|(i, t)| format!("Task {}:\n{}\n{}", i + 1, trial_label(t), t.render().trim_end()))
        .collect();
    let body = format!("{}\n\n{}", trials.join("\n\n"), list_block(skills));
    templates::stage_prompt(templates::skill_discovery(domain), &body)
}

pub const SEGMENT_REQUEST: &str = "Segment the trial above using only the subtasks in this list.";

pub fn render_segmentation_prompt(domain: Domain, t: &Trajectory, skills: &SkillSet, attempt: usize) -> String {
    let mut body = format!(
        "Task 1:\n{}\n{}\n\n{}\n\n{}",
        trial_label(t),
        t.render().trim_end(),
        list_block(skills),
        SEGMENT_REQUEST
    );
    if attempt > 0 {
        body.push_str(&format!(
            "\nAttempt {}: copy every action line of the trial exactly and in order.",
            attempt + 1
        ));
    }
    templates::stage_prompt(templates::skill_discovery(domain), &body)
}

fn declaration(line: &str) -> Option<SkillSpec> {
    let l = line.trim();
    let rest = l.strip_prefix("- ").or_else(|| l.strip_prefix("* "))?;
    if rest.ends_with(':') {
        return None;
    }
    let (name, params) = parse_call(rest)?;
    let params = params.into_iter().map(|p| p.to_lowercase().replace(' ', "_")).collect();
    Some(SkillSpec { name, params })
}

/// Skill declarations (`- name(params)` lines without a trailing colon), deduplicated by name.
pub fn parse_skill_list(response: &str) -> Result<Vec<SkillSpec>, DiscoveryError> {
    let mut out: Vec<SkillSpec> = Vec::new();
    for line in response.lines() {
        if let Some(s) = declaration(line) {
            if !out.iter().any(|x| x.name == s.name) {
                out.push(s);
            }
        }
    }
    if out.is_empty() {
        return Err(DiscoveryError::MalformedResponse(response.chars().take(200).collect()));
    }
    Ok(out)
}

/// New declarations first, then any earlier skill the response dropped, so the set never shrinks.
pub fn merge_skills(previous: &SkillSet, new: Vec<SkillSpec>) -> SkillSet {
    let mut skills: Vec<SkillSpec> = Vec::new();
    for s in new.into_iter().chain(previous.skills.iter().cloned()) {
        if !skills.iter().any(|x| x.name == s.name) {
            skills.push(s);
        }
    }
    SkillSet { skills }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct DiscoveryLog {
    pub iterations: Vec<Vec<String>>,
}

/// Iterate over `pool` in order, `batch_size` at a time, refining the skill list.
pub fn discover_skills(
    pool: &[&Trajectory],
    domain: Domain,
    batch_size: usize,
    max_iters: usize,
    gateway: &Gateway,
) -> Result<(SkillSet, DiscoveryLog), DiscoveryError> {
    let mut sampler = BatchSampler::from_pool(pool.to_vec())?;
    let mut set = SkillSet::default();
    let mut log = DiscoveryLog::default();
    for iter in 0..max_iters {
        let batch = sampler.next_batch(batch_size)?;
        let prompt = render_discovery_prompt(domain, &batch, &set);
        let resp = gateway.complete(&PromptRequest::user(prompt, STAGE_MAX_TOKENS, vec![]))?;
        let parsed = parse_skill_list(&resp.text)?;
        set = merge_skills(&set, parsed);
        debug!(iter, skills = ?set.names(), "discovery iteration");
        log.iterations.push(set.skills.iter().map(SkillSpec::signature).collect());
    }
    info!(skills = ?set.names(), "skill discovery finished");
    Ok((set, log))
}

fn action_line(domain: Domain, line: &str) -> Option<String> {
    let l = line.trim();
    let a = match domain {
        Domain::Household => l.strip_prefix('>')?.trim(),
        Domain::Shop => l.strip_prefix("Action:")?.trim(),
    };
    let is_think = match domain {
        Domain::Household => a.starts_with("think:"),
        Domain::Shop => a.starts_with("think["),
    };
    (!is_think && !a.is_empty()).then(|| a.to_string())
}

fn segment_header(line: &str) -> Option<(String, Vec<String>)> {
    if line.starts_with(' ') || line.starts_with('\t') {
        return None;
    }
    let rest = line.trim_end().strip_prefix("- ")?.strip_suffix(':')?;
    parse_call(rest)
}

/// Match segment blocks in a response to the trajectory's action steps.
pub fn parse_segmentation(
    response: &str,
    t: &Trajectory,
    skills: &SkillSet,
) -> Result<SegmentedTrajectory, SegmentationError> {
    let domain = t.domain();
    let actions: Vec<usize> = t
        .steps
        .iter()
        .filter(|s| s.kind == StepKind::Action)
        .map(|s| s.index)
        .collect();
    let mut blocks: Vec<(String, Vec<String>, Vec<String>)> = Vec::new();
    for line in response.lines() {
        if let Some((name, args)) = segment_header(line) {
            blocks.push((name, args, Vec::new()));
        } else if let (Some(b), Some(a)) = (blocks.last_mut(), action_line(domain, line)) {
            b.2.push(a);
        }
    }
    let mut cursor = 0;
    let mut segments = Vec::new();
    for (name, args, lines) in blocks {
        if lines.is_empty() {
            continue;
        }
        if skills.get(&name).is_none() {
            return Err(SegmentationError::UnknownSkill(name));
        }
        let start = segments.last().map_or(0, |s: &Segment| s.end + 1);
        let mut last = None;
        for l in &lines {
            let Some(&step) = actions.get(cursor) else {
                return Err(SegmentationError::Mismatch(format!("extra action `{l}`")));
            };
            if t.steps[step].text.trim() != l {
                return Err(SegmentationError::Mismatch(format!(
                    "expected `{}`, got `{l}`",
                    t.steps[step].text
                )));
            }
            last = Some(step);
            cursor += 1;
        }
        segments.push(Segment {
            skill: name,
            args,
            start,
            end: last.expect("non-empty block"),
        });
    }
    if cursor != actions.len() {
        return Err(SegmentationError::Mismatch(format!(
            "{} of {} actions covered",
            cursor,
            actions.len()
        )));
    }
    if let Some(s) = segments.last_mut() {
        s.end = t.steps.len() - 1;
    }
    Ok(SegmentedTrajectory {
        trajectory_id: t.id.clone(),
        segments,
    })
}

pub fn segment_trajectory(
    t: &Trajectory,
    skills: &SkillSet,
    gateway: &Gateway,
    attempt: usize,
) -> Result<SegmentedTrajectory, SegmentationError> {
    let prompt = render_segmentation_prompt(t.domain(), t, skills, attempt);
    let resp = gateway.complete(&PromptRequest::user(prompt, STAGE_MAX_TOKENS, vec![]))?;
    parse_segmentation(&resp.text, t, skills)
}

/// One segment over the whole trajectory.
pub fn whole_segment(t: &Trajectory, skill: &str) -> SegmentedTrajectory {
    SegmentedTrajectory {
        trajectory_id: t.id.clone(),
        segments: vec![Segment {
            skill: skill.to_string(),
            args: Vec::new(),
            start: 0,
            end: t.steps.len() - 1,
        }],
    }
}

/// Skill named by the most frequent action verb, falling back to the first skill.
pub fn fallback_skill(t: &Trajectory, skills: &SkillSet) -> String {
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for s in t.action_steps() {
        let verb: String = s
            .text
            .split(|c: char| c.is_whitespace() || c == '[')
            .next()
            .unwrap_or("")
            .to_string();
        *counts.entry(verb).or_insert(0) += 1;
    }
    let mut verbs: Vec<(String, usize)> = counts.into_iter().collect();
    verbs.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    for (v, _) in verbs {
        if let Some(s) = skills
            .skills
            .iter()
            .find(|s| s.name == v || s.name.starts_with(&format!("{v}_")))
        {
            return s.name.clone();
        }
    }
    skills.skills.first().map(|s| s.name.clone()).unwrap_or_else(|| PSEUDO_SKILL.into())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FallbackRecord {
    pub trajectory_id: String,
    pub skill: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentationReport {
    pub segmented: usize,
    pub retries: usize,
    pub fallbacks: Vec<FallbackRecord>,
}

/// Segment every trajectory, retrying parse failures and falling back to one
/// whole-trajectory segment. Gateway errors abort.
pub fn segment_dataset(
    trajectories: &[&Trajectory],
    skills: &SkillSet,
    gateway: &Gateway,
    max_retries: usize,
) -> Result<(Vec<SegmentedTrajectory>, SegmentationReport), GatewayError> {
    let mut out = Vec::new();
    let mut report = SegmentationReport::default();
    for t in trajectories {
        if skills.is_pseudo() {
            out.push(whole_segment(t, PSEUDO_SKILL));
            report.segmented += 1;
            continue;
        }
        let mut done = None;
        let mut last_err = String::new();
        for attempt in 0..=max_retries {
            match segment_trajectory(t, skills, gateway, attempt) {
                Ok(s) => {
                    done = Some(s);
                    break;
                }
                Err(SegmentationError::Gateway(e)) => return Err(e),
                Err(e) => {
                    if attempt < max_retries {
                        report.retries += 1;
                    }
                    last_err = e.to_string();
                }
            }
        }
        match done {
            Some(s) => {
                report.segmented += 1;
                out.push(s);
            }
            None => {
                let skill = fallback_skill(t, skills);
                warn!(id = %t.id, %skill, reason = %last_err, "segmentation fell back to one segment");
                report.fallbacks.push(FallbackRecord {
                    trajectory_id: t.id.clone(),
                    skill: skill.clone(),
                    reason: last_err,
                });
                out.push(whole_segment(t, &skill));
            }
        }
    }
    Ok((out, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trajectory::{Outcome, Source, Step};

    fn apple() -> Trajectory {
        let steps = [
            ("go to fridge 1", "The fridge 1 is closed."),
            ("open fridge 1", "You open the fridge 1. The fridge 1 is open. In it, you see a lettuce 2."),
            ("close fridge 1", "You close the fridge 1."),
            ("go to garbagecan 1", "On the garbagecan 1, you see a apple 3, and a egg 3."),
            ("take apple 3 from garbagecan 1", "You pick up the apple 3 from the garbagecan 1."),
            ("go to sidetable 1", "On the sidetable 1, you see a cup 1."),
            ("put apple 3 in/on sidetable 1", "You put the apple 3 in/on the sidetable 1."),
        ];
        Trajectory {
            id: "apple".into(),
            task_id: "t".into(),
            task_type: "pick".into(),
            instruction: "find some apple and put it in sidetable.".into(),
            initial_observation: "You are in the middle of a room.".into(),
            steps: steps
                .iter()
                .enumerate()
                .map(|(i, (a, o))| Step {
                    index: i,
                    kind: StepKind::Action,
                    text: a.to_string(),
                    observation: o.to_string(),
                })
                .collect(),
            outcome: Outcome::Success,
            score: 1.0,
            source: Source::Expert,
        }
    }

    fn skills() -> SkillSet {
        SkillSet::new(vec![
            SkillSpec::new("find", &["object"]),
            SkillSpec::new("take", &["object"]),
            SkillSpec::new("put", &["object", "receptacle"]),
        ])
    }

    const RESPONSE: &str = "blah\n- find(apple):\n    > go to fridge 1\n    The fridge 1 is closed.\n    > open fridge 1\n    x\n    > close fridge 1\n    > go to garbagecan 1\n- take(apple):\n    > take apple 3 from garbagecan 1\n- put(apple, sidetable):\n    > go to sidetable 1\n    > put apple 3 in/on sidetable 1\n\nwe list the subtasks below:\n\n- find(object)\n- take(object)\n- put(object, receptable)\n";

    #[test]
    fn parses_skill_list() {
        let s = parse_skill_list(RESPONSE).unwrap();
        assert_eq!(
            s,
            vec![
                SkillSpec::new("find", &["object"]),
                SkillSpec::new("take", &["object"]),
                SkillSpec::new("put", &["object", "receptable"]),
            ]
        );
        assert!(parse_skill_list("nothing here").is_err());
    }

    #[test]
    fn parses_apple_segmentation() {
        let seg = parse_segmentation(RESPONSE, &apple(), &skills()).unwrap();
        let spans: Vec<_> = seg.segments.iter().map(|s| (s.invocation(), s.start, s.end)).collect();
        assert_eq!(
            spans,
            vec![
                ("find(apple)".to_string(), 0, 3),
                ("take(apple)".to_string(), 4, 4),
                ("put(apple, sidetable)".to_string(), 5, 6)
            ]
        );
        seg.check(7).unwrap();
    }

    #[test]
    fn mismatch_and_unknown_skill() {
        let bad = RESPONSE.replace("> close fridge 1", "> close fridge 2");
        assert!(matches!(
            parse_segmentation(&bad, &apple(), &skills()),
            Err(SegmentationError::Mismatch(_))
        ));
        let bad = RESPONSE.replace("- take(apple):", "- grab(apple):");
        assert!(matches!(
            parse_segmentation(&bad, &apple(), &skills()),
            Err(SegmentationError::UnknownSkill(_))
        ));
    }

    #[test]
    fn fallback_uses_frequent_verb() {
        // go is most frequent but names no skill; the one-count tie resolves alphabetically.
        assert_eq!(fallback_skill(&apple(), &skills()), "put");
    }

    #[test]
    fn merge_never_shrinks() {
        let m = merge_skills(&skills(), vec![SkillSpec::new("heat", &["object"])]);
        assert_eq!(m.names(), vec!["heat", "find", "take", "put"]);
    }

    #[test]
    fn merge_drops_repeated_names() {
        let a = SkillSpec::new("a", &["object"]);
        let m = merge_skills(&SkillSet::default(), vec![a.clone(), SkillSpec::new("a", &["receptacle"]), a]);
        assert_eq!(m.skills, vec![SkillSpec::new("a", &["object"])]);
    }
}
