use super::*;
use crate::discovery::SkillSpec;
use crate::distill::{AblationFlags, KnowledgeBase, SkillKnowledge};
use crate::env::household::{generate_task, Family, HouseholdEnv};
use crate::env::shop::{generate_shop_task, template_names, Catalog, ShopEnv};
use crate::env::Environment;
use crate::executor::{react_prompt, run_o3d_episode, run_react_episode, EpisodeBudget, Termination};
use crate::gateway::{BackendMode, Gateway, GatewayConfig};
use std::collections::BTreeMap;
use std::sync::Arc;

fn gateway(endpoint: &str) -> Gateway {
    let cfg = GatewayConfig {
        mode: BackendMode::Live,
        endpoint: endpoint.into(),
        ..Default::default()
    };
    Gateway::new(cfg).unwrap()
}

fn kb(domain: Domain, tips: &[(&str, &str)]) -> KnowledgeBase {
    let skills: Vec<SkillSpec> = match domain {
        Domain::Household => vec![
            SkillSpec::new("find", &["object"]),
            SkillSpec::new("take", &["object"]),
            SkillSpec::new("put", &["object", "receptacle"]),
            SkillSpec::new("heat", &["object"]),
            SkillSpec::new("cool", &["object"]),
            SkillSpec::new("clean", &["object"]),
            SkillSpec::new("use", &["object"]),
        ],
        Domain::Shop => ["search_item", "select_item", "select_item_attributes", "purchase_item"]
            .iter()
            .map(|n| SkillSpec::new(n, &[]))
            .collect(),
    };
    let mut per_skill: BTreeMap<String, SkillKnowledge> =
        skills.iter().map(|s| (s.name.clone(), SkillKnowledge::default())).collect();
    for (skill, tip) in tips {
        per_skill
            .get_mut(*skill)
            .unwrap()
            .tips
            .push(crate::distill::Tip::new(tip, crate::distill::TipOrigin::Human));
    }
    KnowledgeBase {
        skills,
        per_skill,
        base_fewshot: Vec::new(),
        ablation_provenance: AblationFlags::FULL,
    }
}

fn household(family: Family, seed: u64) -> HouseholdEnv {
    let (t, w) = generate_task(family, seed).unwrap();
    HouseholdEnv::from_world(t, w)
}

#[test]
fn endpoints_parse() {
    assert_eq!(SimModel::from_endpoint("sim://oracle").unwrap().kind, SimKind::Oracle);
    assert_eq!(
        SimModel::from_endpoint("sim://corrupted?modes=wrong_preposition,action_loop&rate=0.5").unwrap().kind,
        SimKind::Corrupted {
            modes: vec![CorruptionMode::WrongPreposition, CorruptionMode::ActionLoop],
            rate: 0.5
        }
    );
    assert!(SimModel::from_endpoint("sim://corrupted?modes=nope").is_err());
    assert!(SimModel::from_endpoint("sim://corrupted?rate=2").is_err());
    assert!(SimModel::from_endpoint("sim://gpt").is_err());
}

#[test]
fn oracle_solves_household_flat_and_hierarchical() {
    let gw = gateway("sim://oracle");
    let k = kb(Domain::Household, &[]);
    let prompt = react_prompt(Domain::Household, &[]);
    for (i, family) in Family::ALL.iter().cycle().take(60).enumerate() {
        let r = run_react_episode(&mut household(*family, i as u64), &prompt, EpisodeBudget::default(), &gw, &[]);
        assert!(r.success, "flat {family:?} seed {i}: {:?}\n{}", r.termination, r.episode_log);
        let r = run_o3d_episode(&mut household(*family, i as u64), &k, EpisodeBudget::default(), &gw, &[]);
        assert!(r.success, "o3d {family:?} seed {i}: {:?}\n{}", r.termination, r.episode_log);
    }
}

#[test]
fn oracle_solves_shop_flat_and_hierarchical() {
    let gw = gateway("sim://oracle");
    let k = kb(Domain::Shop, &[]);
    let prompt = react_prompt(Domain::Shop, &[]);
    let catalog = Arc::new(Catalog::generate(3));
    for (i, tpl) in template_names().iter().cycle().take(40).enumerate() {
        let task = generate_shop_task(&catalog, tpl, i as u64).unwrap();
        let mut env = ShopEnv::new(task.clone(), catalog.clone());
        let r = run_react_episode(&mut env, &prompt, EpisodeBudget::default(), &gw, &[]);
        assert!(r.success, "flat {tpl} seed {i}: {:?}\n{}", r.termination, r.episode_log);
        let mut env = ShopEnv::new(task, catalog.clone());
        let r = run_o3d_episode(&mut env, &k, EpisodeBudget::default(), &gw, &[]);
        assert!(r.success, "o3d {tpl} seed {i}: {:?}\n{}", r.termination, r.episode_log);
    }
}

#[test]
fn corrupted_mistakes_fail_and_markers_suppress_them() {
    let prompt = react_prompt(Domain::Household, &[]);
    for mode in CorruptionMode::ALL {
        let gw = gateway(&format!("sim://corrupted?modes={}", mode.as_str()));
        let family = if mode == CorruptionMode::SkipSubgoal { Family::Heat } else { Family::Pick };
        let r = run_react_episode(&mut household(family, 2), &prompt, EpisodeBudget::default(), &gw, &[]);
        assert!(!r.success, "{mode:?} should fail");
        let guided = format!("{prompt}\n{}\n", mistake_marker(Domain::Household, mode));
        let r = run_react_episode(&mut household(family, 2), &guided, EpisodeBudget::default(), &gw, &[]);
        assert!(r.success, "{mode:?} should be suppressed: {}", r.episode_log);
    }
}

#[test]
fn shop_corruptions_fail() {
    let catalog = Arc::new(Catalog::generate(3));
    let prompt = react_prompt(Domain::Shop, &[]);
    let task = (0..50)
        .map(|s| generate_shop_task(&catalog, "deodorant", s).unwrap())
        .find(|t| !t.required_options.is_empty())
        .unwrap();
    for mode in [CorruptionMode::WrongPreposition, CorruptionMode::ActionLoop, CorruptionMode::SkipSubgoal] {
        let gw = gateway(&format!("sim://corrupted?modes={}", mode.as_str()));
        let r = run_react_episode(&mut ShopEnv::new(task.clone(), catalog.clone()), &prompt, EpisodeBudget::default(), &gw, &[]);
        assert!(!r.success, "{mode:?}");
    }
}

#[test]
fn reflection_names_the_mistake() {
    let gw = gateway("sim://corrupted?modes=wrong_preposition");
    let r = run_react_episode(
        &mut household(Family::Pick, 4),
        &react_prompt(Domain::Household, &[]),
        EpisodeBudget::default(),
        &gw,
        &[],
    );
    assert_eq!(r.termination, Termination::RepeatGuard);
    let text = SimModel::new(SimKind::Oracle).respond(&crate::executor::reflection_prompt(&r.episode_log));
    assert!(text.contains(mistake_marker(Domain::Household, CorruptionMode::WrongPreposition)), "{text}");
}

#[test]
fn stall_repeat_and_junk_trip_the_stopping_rules() {
    let prompt = react_prompt(Domain::Household, &[]);
    let run = |e: &str| run_react_episode(&mut household(Family::Cool, 1), &prompt, EpisodeBudget::default(), &gateway(e), &[]);
    let r = run("sim://stall");
    assert_eq!((r.termination, r.turns_used), (Termination::BudgetExhausted, 30));
    assert_eq!(run("sim://repeat").termination, Termination::RepeatGuard);
    assert_eq!(run("sim://junk").termination, Termination::AgentError);
    let r = run_o3d_episode(&mut household(Family::Cool, 1), &kb(Domain::Household, &[]), EpisodeBudget::default(), &gateway("sim://repeat"), &[]);
    assert_eq!(r.termination, Termination::RepeatGuard);
}

#[test]
fn stage_prompts_are_recognised() {
    let body = "Task 1:\nSuccess trial:\nX";
    let p = crate::templates::stage_prompt(crate::templates::HOUSEHOLD_TIPS_NC, body);
    let (stage, domain, b) = classify_stage(&p).unwrap();
    assert_eq!((stage, domain, b), (Stage::TipsNonContrastive, Domain::Household, body));
    assert!(classify_stage("Interact with a household").is_none());
}

#[test]
fn env_trait_object_is_usable() {
    let env: Box<dyn Environment> = Box::new(household(Family::Pick, 0));
    assert_eq!(env.domain(), Domain::Household);
}
