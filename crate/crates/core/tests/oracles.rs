//! Independent oracles: an unpruned full-grammar search for household plan length, and a
//! rule-based segmenter for expert household logs.

use o3d::discovery::{segment_dataset, SkillSet, SkillSpec};
use o3d::env::household::{generate_task, oracle_solve, verb_of, Family, HouseholdWorld};
use o3d::eval::gen_offline_data;
use o3d::gateway::{BackendMode, Gateway, GatewayConfig};
use o3d::trajectory::{Source, StepKind, Trajectory};
use o3d::Domain;
use std::collections::{HashSet, VecDeque};

/// Every syntactically valid action over the world's labels.
fn all_actions(w: &HouseholdWorld) -> Vec<String> {
    let recs: Vec<String> = w.receptacles.iter().map(|r| r.label.to_string()).collect();
    let objs: Vec<String> = w.objects.iter().map(|o| o.label.to_string()).collect();
    let mut out = Vec::new();
    for r in &recs {
        out.push(format!("go to {r}"));
        out.push(format!("open {r}"));
        out.push(format!("close {r}"));
        for o in &objs {
            out.push(format!("take {o} from {r}"));
            out.push(format!("put {o} in/on {r}"));
            for v in ["heat", "cool", "clean"] {
                out.push(format!("{v} {o} with {r}"));
            }
        }
    }
    for o in &objs {
        out.push(format!("use {o}"));
    }
    out
}

/// Length of the shortest solution, searching the whole grammar up to `limit` steps.
fn shortest(task: &o3d::env::household::HouseholdTask, start: &HouseholdWorld, limit: usize) -> Option<usize> {
    let actions = all_actions(start);
    let mut seen = HashSet::from([start.clone()]);
    let mut queue = VecDeque::from([(start.clone(), 0usize)]);
    while let Some((w, d)) = queue.pop_front() {
        if w.satisfies(task) {
            return Some(d);
        }
        if d == limit {
            continue;
        }
        for a in &actions {
            let mut n = w.clone();
            if n.apply(a).is_some() && seen.insert(n.clone()) {
                queue.push_back((n, d + 1));
            }
        }
    }
    None
}

#[test]
fn pruned_planner_is_optimal_on_small_rooms() {
    let mut checked = 0;
    for f in [Family::Pick, Family::Heat, Family::Cool, Family::Clean, Family::Look] {
        let mut per_family = 0;
        for seed in 0..40 {
            let (task, world) = generate_task(f, seed).unwrap();
            if world.receptacles.len() > 6 {
                continue;
            }
            let plan = oracle_solve(&task, &world).unwrap();
            assert_eq!(shortest(&task, &world, plan.len()), Some(plan.len()), "{f:?} seed {seed}");
            checked += 1;
            per_family += 1;
            if per_family == 3 {
                break;
            }
        }
    }
    assert!(checked >= 5, "only {checked} small rooms");
}

/// Navigation before `take` or `use` is `find`; navigation before any other verb joins that verb's segment.
fn rule_segments(t: &Trajectory) -> Vec<(String, Vec<String>)> {
    let mut out = Vec::new();
    let mut pending: Vec<String> = Vec::new();
    for s in t.action_steps() {
        let verb = verb_of(&s.text).expect("grammar verb");
        match verb {
            "go to" | "open" | "close" => pending.push(s.text.clone()),
            v @ ("take" | "use") => {
                if !pending.is_empty() {
                    out.push(("find".to_string(), std::mem::take(&mut pending)));
                }
                out.push((v.to_string(), vec![s.text.clone()]));
            }
            v => {
                pending.push(s.text.clone());
                out.push((v.to_string(), std::mem::take(&mut pending)));
            }
        }
    }
    assert!(pending.is_empty(), "{} ends on navigation", t.id);
    out
}

#[test]
fn oracle_segmentation_matches_rule_segmenter() {
    let (trajs, _) = gen_offline_data(Domain::Household, 50, 7, 0).unwrap();
    let experts: Vec<&Trajectory> = trajs.iter().filter(|t| t.source == Source::Expert).collect();
    assert_eq!(experts.len(), 50);
    let skills = SkillSet::new(vec![
        SkillSpec::new("find", &["object"]),
        SkillSpec::new("take", &["object"]),
        SkillSpec::new("put", &["object", "receptacle"]),
        SkillSpec::new("heat", &["object"]),
        SkillSpec::new("cool", &["object"]),
        SkillSpec::new("clean", &["object"]),
        SkillSpec::new("use", &["object"]),
    ]);
    let gw = Gateway::new(GatewayConfig {
        mode: BackendMode::Live,
        endpoint: "sim://oracle".into(),
        ..Default::default()
    })
    .unwrap();
    let (segs, report) = segment_dataset(&experts, &skills, &gw, 2).unwrap();
    assert!(report.fallbacks.is_empty());
    for (s, t) in segs.iter().zip(&experts) {
        let got: Vec<(String, Vec<String>)> = s
            .segments
            .iter()
            .map(|g| {
                let acts = t.steps[g.start..=g.end]
                    .iter()
                    .filter(|x| x.kind == StepKind::Action)
                    .map(|x| x.text.clone())
                    .collect();
                (g.skill.clone(), acts)
            })
            .collect();
        assert_eq!(got, rule_segments(t), "{}", t.id);
    }
}
