use super::grammar::HouseAction;
use super::world::{is_fixed, transformer_for, HouseholdWorld};
use super::{Family, HouseholdTask};
use std::collections::{HashSet, VecDeque};

const MAX_DEPTH: usize = 40;

fn successors(task: &HouseholdTask, w: &HouseholdWorld) -> Vec<HouseAction> {
    let mut out = Vec::new();
    for (i, r) in w.receptacles.iter().enumerate() {
        if w.at != Some(i) {
            out.push(HouseAction::GoTo(r.label.clone()));
        }
    }
    let Some(at) = w.at else { return out };
    let rec = &w.receptacles[at];
    if rec.openable && !rec.open {
        out.push(HouseAction::Open(rec.label.clone()));
    }
    if rec.accessible() {
        match w.held {
            None => {
                for &o in &rec.contents {
                    if w.objects[o].label.name == task.target {
                        out.push(HouseAction::Take(w.objects[o].label.clone(), rec.label.clone()));
                    }
                }
            }
            Some(h) => {
                if rec.label.name == task.destination {
                    out.push(HouseAction::Put(w.objects[h].label.clone(), rec.label.clone()));
                }
            }
        }
        if task.family == Family::Look {
            for &o in &rec.contents {
                if is_fixed(&w.objects[o].label.name) {
                    out.push(HouseAction::Use(w.objects[o].label.clone()));
                }
            }
        }
    }
    if let (Some(h), Some(v)) = (w.held, task.family.transform()) {
        if transformer_for(v.as_str()) == Some(rec.label.name.as_str()) {
            out.push(HouseAction::Transform(v, w.objects[h].label.clone(), rec.label.clone()));
        }
    }
    out
}

/// Shortest action sequence reaching the task predicate, by breadth-first search
/// over task-relevant actions.
pub fn oracle_solve(task: &HouseholdTask, world: &HouseholdWorld) -> Option<Vec<String>> {
    if world.satisfies(task) {
        return Some(Vec::new());
    }
    let mut seen: HashSet<HouseholdWorld> = HashSet::new();
    let mut queue: VecDeque<(HouseholdWorld, Vec<String>)> = VecDeque::new();
    seen.insert(world.clone());
    queue.push_back((world.clone(), Vec::new()));
    while let Some((w, path)) = queue.pop_front() {
        if path.len() >= MAX_DEPTH {
            continue;
        }
        for a in successors(task, &w) {
            let mut next = w.clone();
            if next.apply_parsed(&a).is_none() {
                continue;
            }
            let mut p = path.clone();
            p.push(a.to_string());
            if next.satisfies(task) {
                return Some(p);
            }
            if seen.insert(next.clone()) {
                queue.push_back((next, p));
            }
        }
    }
    None
}

/// Demonstration plan: optionally inspect one irrelevant closed receptacle first
/// (go, open, close), then follow the shortest plan from there.
pub fn expert_plan(task: &HouseholdTask, world: &HouseholdWorld, detour: bool) -> Option<Vec<String>> {
    if !detour {
        return oracle_solve(task, world);
    }
    let transformer = task.family.transform().and_then(|v| transformer_for(v.as_str()));
    let candidate = world.receptacles.iter().find(|r| {
        r.openable
            && !r.open
            && r.label.name != task.destination
            && Some(r.label.name.as_str()) != transformer
            && !r.contents.iter().any(|&o| world.objects[o].label.name == task.target)
    });
    let Some(r) = candidate else {
        return oracle_solve(task, world);
    };
    let prefix = [
        HouseAction::GoTo(r.label.clone()),
        HouseAction::Open(r.label.clone()),
        HouseAction::Close(r.label.clone()),
    ];
    let mut w = world.clone();
    let mut plan = Vec::new();
    for a in prefix {
        w.apply_parsed(&a)?;
        plan.push(a.to_string());
    }
    plan.extend(oracle_solve(task, &w)?);
    Some(plan)
}
