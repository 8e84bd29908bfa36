use super::*;
use crate::discovery::SkillSpec;
use crate::env::household::{generate_task, oracle_solve, Family, HouseholdEnv};
use crate::gateway::{BackendMode, FnUpstream, GatewayConfig};
use std::collections::VecDeque;
use std::sync::Mutex;

fn live(f: impl Fn(&PromptRequest) -> String + Send + Sync + 'static) -> Gateway {
    let cfg = GatewayConfig {
        mode: BackendMode::Live,
        ..Default::default()
    };
    Gateway::with_upstream(cfg, Box::new(FnUpstream(move |r: &PromptRequest| Ok(f(r))))).unwrap()
}

fn scripted(lines: &[&str]) -> Gateway {
    let q = Mutex::new(lines.iter().map(|s| s.to_string()).collect::<VecDeque<_>>());
    live(move |_| q.lock().unwrap().pop_front().unwrap_or_default())
}

fn task(family: Family, seed: u64) -> (HouseholdEnv, Vec<String>) {
    let (t, w) = generate_task(family, seed).unwrap();
    let plan = oracle_solve(&t, &w).unwrap();
    (HouseholdEnv::from_world(t, w), plan)
}

/// Lines after the current episode header, in the flat transcript.
fn turns_so_far(prompt: &str) -> usize {
    let tail = &prompt[prompt.rfind("Your task is to:").unwrap()..];
    tail.lines().filter(|l| l.starts_with("> ")).count()
}

fn one_skill_kb() -> KnowledgeBase {
    let s = SkillSpec::new("solve", &["object"]);
    KnowledgeBase {
        per_skill: BTreeMap::from([(s.name.clone(), SkillKnowledge::default())]),
        skills: vec![s],
        base_fewshot: Vec::new(),
        ablation_provenance: AblationFlags::FULL,
    }
}

#[test]
fn flat_oracle_script_succeeds() {
    let (mut env, plan) = task(Family::Pick, 3);
    let refs: Vec<&str> = plan.iter().map(String::as_str).collect();
    let gw = scripted(&refs);
    let r = run_react_episode(&mut env, &react_prompt(Domain::Household, &[]), EpisodeBudget::default(), &gw, &[]);
    assert_eq!(r.termination, Termination::TaskSuccess);
    assert!(r.success);
    assert_eq!(r.turns_used, plan.len());
    assert_eq!(r.transcript.env_steps().count(), plan.len());
}

#[test]
fn hierarchical_call_returns_control() {
    let (mut env, plan) = task(Family::Heat, 8);
    let mut lines = vec!["> think: I will solve it.".to_string(), "> call: solve(x)".to_string()];
    lines.extend(plan.iter().map(|a| format!("> {a}")));
    let refs: Vec<&str> = lines.iter().map(String::as_str).collect();
    let gw = scripted(&refs);
    let budget = EpisodeBudget {
        per_skill_max_turns: 30,
        ..Default::default()
    };
    let r = run_o3d_episode(&mut env, &one_skill_kb(), budget, &gw, &[]);
    assert_eq!(r.termination, Termination::TaskSuccess);
    assert_eq!(r.turns_used, plan.len() + 1);
    let returns = r
        .transcript
        .events
        .iter()
        .filter(|e| matches!(e.event, Event::ControlReturn { .. }))
        .count();
    assert_eq!(returns, 1);
    assert!(r.transcript.events.windows(2).all(|w| w[0].seq + 1 == w[1].seq));
}

#[test]
fn skill_budget_hands_back_control() {
    let (mut env, plan) = task(Family::Pick, 4);
    let lines = ["> call: solve(x)", plan[0].as_str(), plan[1].as_str(), "", "", ""];
    let gw = scripted(&lines);
    let budget = EpisodeBudget {
        per_skill_max_turns: 1,
        ..Default::default()
    };
    let r = run_o3d_episode(&mut env, &one_skill_kb(), budget, &gw, &[]);
    assert_eq!(r.transcript.env_steps().count(), 1);
    assert!(r.transcript.events.iter().any(|e| e.event
        == Event::ControlReturn {
            skill: "solve".into(),
            report: NO_REPORT.into()
        }));
}

#[test]
fn repeat_guard_fires_on_identical_actions() {
    let (mut env, _) = task(Family::Pick, 5);
    let gw = scripted(&["go to shelf 1", "go to shelf 1"]);
    let r = run_react_episode(&mut env, "P", EpisodeBudget::default(), &gw, &[]);
    assert_eq!(r.termination, Termination::RepeatGuard);
    assert_eq!(r.turns_used, 1);
}

#[test]
fn stalling_exhausts_budget() {
    let (mut env, _) = task(Family::Cool, 2);
    let gw = live(|_| "> think: hmm".into());
    let r = run_o3d_episode(&mut env, &one_skill_kb(), EpisodeBudget::default(), &gw, &[]);
    assert_eq!(r.termination, Termination::BudgetExhausted);
    assert_eq!(r.turns_used, 30);
}

#[test]
fn base_env_actions_are_unparseable() {
    let (mut env, _) = task(Family::Pick, 6);
    let gw = scripted(&["go to shelf 1", "call: nope(x)", ""]);
    let r = run_o3d_episode(&mut env, &one_skill_kb(), EpisodeBudget::default(), &gw, &[]);
    assert_eq!(r.termination, Termination::AgentError);
    assert_eq!(r.turns_used, 0);
    assert_eq!(r.transcript.env_steps().count(), 0);
}

#[test]
fn gateway_error_is_agent_error() {
    let (mut env, _) = task(Family::Pick, 6);
    let cfg = GatewayConfig {
        mode: BackendMode::Live,
        context_limit_tokens: 10,
        ..Default::default()
    };
    let gw = Gateway::with_upstream(cfg, Box::new(FnUpstream(|_: &PromptRequest| Ok(String::new())))).unwrap();
    let r = run_react_episode(&mut env, "P", EpisodeBudget::default(), &gw, &[]);
    assert_eq!(r.termination, Termination::AgentError);
    assert!(r.diagnostic.unwrap().contains("context"));
}

#[test]
fn reflexion_retries_with_memory() {
    let (env, plan) = task(Family::Pick, 7);
    let (t, w) = (env.task().clone(), env.world().clone());
    let prompts = std::sync::Arc::new(Mutex::new(Vec::<String>::new()));
    let seen = prompts.clone();
    let gw = live(move |r| {
        seen.lock().unwrap().push(r.user_text.clone());
        if r.user_text.starts_with("You will be given the log") {
            return "Plan: go straight to the target.".into();
        }
        if !r.user_text.contains("Trial 0:") {
            return "> think: wander".into();
        }
        plan.get(turns_so_far(&r.user_text)).cloned().unwrap_or_default()
    });
    let make = move || -> Box<dyn Environment> { Box::new(HouseholdEnv::from_world(t.clone(), w.clone())) };
    let out = run_reflexion(&make, InnerPolicy::React("P"), 3, EpisodeBudget::default(), &gw);
    assert_eq!(out.trials.len(), 2);
    assert_eq!(out.memory, vec!["Plan: go straight to the target."]);
    assert!(out.last().success);
    let prompts = prompts.lock().unwrap();
    assert!(prompts.last().unwrap().contains("Your memory for the task below:\nTrial 0:\nPlan: go straight to the target.\n"));
}

#[test]
fn reflexion_success_first_try_leaves_memory_empty() {
    let (env, plan) = task(Family::Pick, 9);
    let (t, w) = (env.task().clone(), env.world().clone());
    let gw = live(move |r| plan.get(turns_so_far(&r.user_text)).cloned().unwrap_or_default());
    let make = move || -> Box<dyn Environment> { Box::new(HouseholdEnv::from_world(t.clone(), w.clone())) };
    let out = run_reflexion(&make, InnerPolicy::React("P"), 10, EpisodeBudget::default(), &gw);
    assert_eq!(out.trials.len(), 1);
    assert!(out.memory.is_empty());
}

#[test]
fn pseudo_kb_matches_flat_prompting() {
    let fs = vec!["EXAMPLE\n".to_string()];
    let (env, plan) = task(Family::Clean, 1);
    let (t, w) = (env.task().clone(), env.world().clone());
    let gw = live(move |r| plan.get(turns_so_far(&r.user_text)).cloned().unwrap_or_default());
    let mut a = HouseholdEnv::from_world(t.clone(), w.clone());
    let mut b = HouseholdEnv::from_world(t, w);
    let ra = run_react_episode(&mut a, &react_prompt(Domain::Household, &fs), EpisodeBudget::default(), &gw, &[]);
    let rb = run_o3d_episode(&mut b, &KnowledgeBase::flat(fs), EpisodeBudget::default(), &gw, &[]);
    assert_eq!(ra, rb);
    assert!(ra.success);
}

#[test]
fn memory_block_format() {
    assert_eq!(memory_block(&[]), "");
    assert_eq!(memory_block(&["a".into(), "b".into()]), "Your memory for the task below:\nTrial 0:\na\nTrial 1:\nb\n\n");
}
