use super::segment_view;
use crate::discovery::{Segment, SegmentedTrajectory};
use crate::domain::Domain;
use crate::env::{household, shop};
use crate::trajectory::Trajectory;

/// Completion report for a skill invocation.
pub fn done_report(domain: Domain, skill: &str, args: &[String]) -> String {
    match domain {
        Domain::Household => household::done_report(skill, args),
        Domain::Shop => shop::done_report(skill),
    }
}

/// The closing turn a skill policy emits when it hands control back.
pub fn done_turn(domain: Domain, seg: &Segment) -> String {
    let line = domain.done_line(&seg.invocation(), &done_report(domain, &seg.skill, &seg.args));
    match domain {
        Domain::Household => format!("> {line}\n"),
        Domain::Shop => format!("Action: {line}\n"),
    }
}

pub fn skill_example(t: &Trajectory, seg: &Segment) -> String {
    format!("{}{}", segment_view(t, seg), done_turn(t.domain(), seg))
}

/// The `k` shortest segments by step count, ties by trajectory id then start.
pub fn select_fewshot(items: &[(&Trajectory, &Segment)], k: usize) -> Vec<String> {
    let mut v: Vec<&(&Trajectory, &Segment)> = items.iter().collect();
    v.sort_by(|a, b| {
        (a.1.len(), &a.0.id, a.1.start).cmp(&(b.1.len(), &b.0.id, b.1.start))
    });
    v.into_iter().take(k).map(|(t, s)| skill_example(t, s)).collect()
}

/// The `k` shortest whole trajectories, rendered flat.
pub fn select_flat_fewshot(trajs: &[&Trajectory], k: usize) -> Vec<String> {
    let mut v = trajs.to_vec();
    v.sort_by(|a, b| (a.steps.len(), &a.id).cmp(&(b.steps.len(), &b.id)));
    v.into_iter().take(k).map(Trajectory::render).collect()
}

pub const SHOP_BASE_THOUGHT: &str = "I need to first search for available items, then select the item that matches the instruction. If there are additional options for certain attributes, I also need to select them before purchase. Otherwise I can directly purchase the item.";

pub(crate) fn plan_sentence(calls: &[String]) -> String {
    match calls {
        [] => String::new(),
        [one] => one.clone(),
        [init @ .., last] => format!("{}, then {last}", init.join(", ")),
    }
}

/// Think turn plus one call turn per segment.
pub fn base_example(t: &Trajectory, seg: &SegmentedTrajectory) -> String {
    let domain = t.domain();
    let mut out = domain.episode_header(&t.initial_observation, &t.instruction);
    let calls: Vec<String> = seg.segments.iter().map(Segment::invocation).collect();
    match domain {
        Domain::Household => {
            let thought = format!("To solve the task, I need to {}.", plan_sentence(&calls));
            out.push_str(&domain.render_turn(&domain.think_line(&thought), "OK."));
            for c in &calls {
                out.push_str(&domain.render_turn(&domain.call_line(c), "Subprocedure finished."));
            }
        }
        Domain::Shop => {
            out.push_str(&domain.render_turn(&domain.think_line(SHOP_BASE_THOUGHT), "OK."));
            for s in &seg.segments {
                out.push_str(&base_shop_turn(&s.invocation(), &shop::done_report(&s.skill), &t.steps[s.end].observation));
            }
        }
    }
    out
}

/// Base-level record of one finished shop skill.
pub fn base_shop_turn(call: &str, report: &str, page: &str) -> String {
    format!("Action: {call}\nObservation:\nSubprocedure Done[{report}]\nCurrent Page:\n{page}\n\n")
}

/// The `k` examples with the fewest segments, then fewest steps, then by id.
pub fn select_base_fewshot(items: &[(&Trajectory, &SegmentedTrajectory)], k: usize) -> Vec<String> {
    let mut v: Vec<&(&Trajectory, &SegmentedTrajectory)> = items.iter().collect();
    v.sort_by(|a, b| {
        (a.1.segments.len(), a.0.steps.len(), &a.0.id).cmp(&(b.1.segments.len(), b.0.steps.len(), &b.0.id))
    });
    v.into_iter().take(k).map(|(t, s)| base_example(t, s)).collect()
}
