//! Household policies read their state back from the transcript.

use super::text::{Episode, Turn};
use crate::discovery::parse_call;
use crate::distill::fewshot::plan_sentence;
use crate::env::household::{
    done_report, parse_action, parse_instruction, similar_object, transformer_for, Family, HouseAction, Label,
};
use crate::env::CorruptionMode;
use std::collections::{BTreeMap, BTreeSet};

fn parse_list(s: &str) -> Vec<Label> {
    let s = s.trim().trim_end_matches('.');
    if s == "nothing" {
        return Vec::new();
    }
    s.split(", ")
        .filter_map(|p| {
            let p = p.strip_prefix("and ").unwrap_or(p);
            Label::parse(p.strip_prefix("a ").unwrap_or(p))
        })
        .collect()
}

/// What the agent can know from the transcript so far.
#[derive(Debug, Default)]
pub(crate) struct Belief {
    pub receptacles: Vec<Label>,
    pub at: Option<Label>,
    pub closed: BTreeSet<Label>,
    pub contents: BTreeMap<Label, Vec<Label>>,
    pub held: Option<Label>,
    pub done_verbs: BTreeMap<Label, BTreeSet<&'static str>>,
    pub placed: Vec<(Label, Label)>,
    pub used: bool,
}

impl Belief {
    pub fn from_episode(ep: &Episode) -> Self {
        let mut b = Belief {
            receptacles: ep
                .init
                .split_once("you see ")
                .map(|(_, l)| parse_list(l))
                .unwrap_or_default(),
            ..Default::default()
        };
        for t in ep.all_turns() {
            b.update(t);
        }
        b
    }

    fn update(&mut self, t: &Turn) {
        if !t.is_env() || t.obs == "Nothing happens." {
            return;
        }
        let Some(a) = parse_action(&t.action) else { return };
        match a {
            HouseAction::GoTo(r) => {
                if t.obs.ends_with("is closed.") {
                    self.closed.insert(r.clone());
                } else if let Some((_, l)) = t.obs.split_once("you see ") {
                    self.closed.remove(&r);
                    self.contents.insert(r.clone(), parse_list(l));
                }
                self.at = Some(r);
            }
            HouseAction::Open(r) => {
                self.closed.remove(&r);
                if let Some((_, l)) = t.obs.split_once("you see ") {
                    self.contents.insert(r, parse_list(l));
                }
            }
            HouseAction::Close(r) => {
                self.closed.insert(r);
            }
            HouseAction::Take(o, r) => {
                if let Some(c) = self.contents.get_mut(&r) {
                    c.retain(|x| *x != o);
                }
                self.held = Some(o);
            }
            HouseAction::Put(o, r) => {
                self.contents.entry(r.clone()).or_default().push(o.clone());
                self.placed.push((o, r));
                self.held = None;
            }
            HouseAction::Transform(v, o, _) => {
                self.done_verbs.entry(o).or_default().insert(v.as_str());
            }
            HouseAction::Use(_) => self.used = true,
        }
    }

    fn is_placed(&self, l: &Label) -> bool {
        self.placed.iter().any(|(o, _)| o == l)
    }

    fn here(&self) -> Option<(&Label, &[Label])> {
        let at = self.at.as_ref()?;
        if self.closed.contains(at) {
            return None;
        }
        Some((at, self.contents.get(at).map(Vec::as_slice).unwrap_or(&[])))
    }

    fn available(&self, name: &str, l: &Label) -> bool {
        l.name == name && !self.is_placed(l) && self.held.as_ref() != Some(l)
    }

    fn receptacle_named(&self, name: &str) -> Option<&Label> {
        match &self.at {
            Some(a) if a.name == name => Some(a),
            _ => self.receptacles.iter().find(|r| r.name == name),
        }
    }

    fn reach(&self, r: &Label) -> String {
        if self.at.as_ref() == Some(r) {
            format!("open {r}")
        } else {
            format!("go to {r}")
        }
    }

    pub fn transformed(&self, o: &Label, verb: &str) -> bool {
        self.done_verbs.get(o).is_some_and(|v| v.contains(verb))
    }
}

/// One policy step: an action line, or readiness to report back.
#[derive(Debug, PartialEq, Eq)]
pub(crate) enum Step {
    Act(String),
    Ready,
}

fn find_step(b: &Belief, name: &str) -> Step {
    if let Some((_, c)) = b.here() {
        if c.iter().any(|l| b.available(name, l)) {
            return Step::Ready;
        }
    }
    for r in &b.receptacles {
        if b.contents.get(r).is_some_and(|c| c.iter().any(|l| b.available(name, l))) {
            return Step::Act(b.reach(r));
        }
    }
    for r in &b.receptacles {
        if !b.contents.contains_key(r) {
            return Step::Act(b.reach(r));
        }
    }
    Step::Ready
}

fn take_step(b: &Belief, name: &str, wrong: bool) -> Step {
    if b.held.is_some() {
        return Step::Ready;
    }
    if let Some((at, c)) = b.here() {
        let sim = similar_object(name);
        let pick = if wrong { c.iter().find(|l| b.available(sim, l)) } else { None };
        if let Some(o) = pick.or_else(|| c.iter().find(|l| b.available(name, l))) {
            return Step::Act(format!("take {o} from {at}"));
        }
    }
    find_step(b, name)
}

fn put_step(b: &Belief, dest: &str, wrong: bool) -> Step {
    let Some(o) = &b.held else { return Step::Ready };
    let Some(r) = b.receptacle_named(dest) else { return Step::Ready };
    if b.at.as_ref() != Some(r) || b.closed.contains(r) {
        return Step::Act(b.reach(r));
    }
    let prep = if wrong { "on" } else { "in/on" };
    Step::Act(format!("put {o} {prep} {r}"))
}

fn transform_step(b: &Belief, verb: &str) -> Step {
    let Some(o) = &b.held else { return Step::Ready };
    if b.transformed(o, verb) {
        return Step::Ready;
    }
    let Some(r) = transformer_for(verb).and_then(|t| b.receptacle_named(t)) else {
        return Step::Ready;
    };
    if b.at.as_ref() != Some(r) {
        return Step::Act(format!("go to {r}"));
    }
    Step::Act(format!("{verb} {o} with {r}"))
}

fn use_step(b: &Belief, lamp: &str) -> Step {
    if b.used {
        return Step::Ready;
    }
    if let Some((_, c)) = b.here() {
        if let Some(l) = c.iter().find(|l| l.name == lamp) {
            return Step::Act(format!("use {l}"));
        }
    }
    find_step(b, lamp)
}

/// `go to` repeated right after the first one, when the loop mistake is active.
fn looped(ep: &Episode, mistake: Option<CorruptionMode>) -> Option<String> {
    if mistake != Some(CorruptionMode::ActionLoop) || ep.env_count() != 1 {
        return None;
    }
    let last = ep.last_turn()?;
    (last.is_env() && last.action.starts_with("go to ")).then(|| last.action.clone())
}

fn line(s: impl AsRef<str>) -> String {
    format!("> {}", s.as_ref())
}

/// Next line of a skill policy.
pub(crate) fn skill_line(ep: &Episode, mistake: Option<CorruptionMode>) -> String {
    let inv = ep.invocation.clone().unwrap_or_default();
    let Some((name, args)) = parse_call(&inv) else {
        return line("think: I do not know this subtask.");
    };
    if let Some(a) = looped(ep, mistake) {
        return line(a);
    }
    let b = Belief::from_episode(ep);
    let a0 = args.first().cloned().unwrap_or_default();
    let step = match name.as_str() {
        "find" => find_step(&b, &a0),
        "take" => take_step(&b, &a0, mistake == Some(CorruptionMode::WrongObject)),
        "put" => put_step(
            &b,
            args.get(1).map(String::as_str).unwrap_or(""),
            mistake == Some(CorruptionMode::WrongPreposition),
        ),
        "heat" | "cool" | "clean" => transform_step(&b, &name),
        "use" => use_step(&b, &a0),
        _ => Step::Ready,
    };
    match step {
        Step::Act(a) => line(a),
        Step::Ready => line(format!("Done {inv}: {}", done_report(&name, &args))),
    }
}

/// Next line of the flat policy, a subgoal machine over the same belief.
pub(crate) fn flat_line(ep: &Episode, mistake: Option<CorruptionMode>) -> String {
    let Some((family, target, dest)) = ep.instruction.as_deref().and_then(parse_instruction) else {
        return line("think: I cannot read the task.");
    };
    if ep.turns.is_empty() {
        let plan = family.plan(&target, &dest);
        return line(format!("think: To solve the task, I need to {}.", plan_sentence(&plan)));
    }
    if let Some(a) = looped(ep, mistake) {
        return line(a);
    }
    let b = Belief::from_episode(ep);
    let wrong_obj = mistake == Some(CorruptionMode::WrongObject);
    let skip = mistake == Some(CorruptionMode::SkipSubgoal);
    let sim = similar_object(&target);
    let is_target = |l: &Label| l.name == target || (wrong_obj && l.name == sim);
    let verb = family.transform().map(|v| v.as_str());
    let step = match (&b.held, family) {
        (Some(h), Family::Look) if is_target(h) => use_step(&b, &dest),
        (None, Family::Look) => take_step(&b, &target, wrong_obj),
        (Some(h), _) if is_target(h) => match verb {
            Some(v) if !skip && !b.transformed(h, v) => transform_step(&b, v),
            _ => put_step(&b, &dest, mistake == Some(CorruptionMode::WrongPreposition)),
        },
        (Some(_), _) => Step::Ready,
        (None, _) => {
            let needed = if family == Family::Pick2 { 2 } else { 1 };
            let placed = b
                .placed
                .iter()
                .filter(|(o, r)| is_target(o) && r.name == dest)
                .filter(|(o, _)| skip || verb.is_none_or(|v| b.transformed(o, v)))
                .count();
            if placed >= needed {
                Step::Ready
            } else {
                take_step(&b, &target, wrong_obj)
            }
        }
    };
    match step {
        Step::Act(a) => line(a),
        Step::Ready => line("think: I believe the task is complete."),
    }
}

/// Next line of the base policy: a think, then the calls of the family plan.
pub(crate) fn base_line(ep: &Episode) -> String {
    let Some((family, target, dest)) = ep.instruction.as_deref().and_then(parse_instruction) else {
        return line("think: I cannot read the task.");
    };
    let plan = family.plan(&target, &dest);
    if ep.turns.is_empty() {
        return line(format!("think: To solve the task, I need to {}.", plan_sentence(&plan)));
    }
    let calls = ep.turns.iter().filter(|t| t.action.starts_with("call:")).count();
    match plan.get(calls) {
        Some(c) => line(format!("call: {c}")),
        None => line("Done"),
    }
}

/// An action that is repeated verbatim.
pub(crate) fn repeat_line(ep: &Episode) -> String {
    let b = Belief::from_episode(ep);
    match b.receptacles.first() {
        Some(r) => line(format!("go to {r}")),
        None => line("look"),
    }
}
