//! End-to-end acceptance checks, replayed from the golden cassettes in `tests/golden`.
//!
//! Runs as a plain binary so every criterion prints one PASS/FAIL line, even under a
//! captured `cargo test`. The live smoke test runs only when `O3D_LIVE_ENDPOINT` is set.

use o3d::discovery::{SkillSet, SkillSpec};
use o3d::distill::{build_skill_prompt, KnowledgeBase, HOUSEHOLD_PRIMITIVE_HEADER};
use o3d::env::shop::{generate_shop_task, oracle_solve, Catalog, ShopEnv};
use o3d::env::Environment;
use o3d::eval::{
    compute_metrics, generate_suite, percent, render_comparison, render_report, run_discover, run_distill, run_suite,
    write_offline_data, EpisodeSummary, Layout, Mode, RunConfig,
};
use o3d::executor::Termination;
use o3d::gateway::{BackendMode, Gateway};
use o3d::trajectory::{load_dataset, make_contrastive_pairs};
use o3d::Domain;
use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

const TIPS_HEADER: &str = "Please consider the following tips to solve new tasks:";

fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

/// Scratch copy of the golden `work/` inputs, regenerated from the same seeds as `record.sh`.
struct Work {
    dir: tempfile::TempDir,
}

impl Work {
    fn new() -> Self {
        let dir = tempfile::tempdir().expect("tempdir");
        let w = dir.path().join("work");
        write_offline_data(Domain::Household, 80, 0, 0, &w.join("household.jsonl")).unwrap();
        write_offline_data(Domain::Shop, 90, 0, 0, &w.join("shop.jsonl")).unwrap();
        generate_suite(Domain::Household, 30, 0, 0).save(&w.join("household_suite30.json")).unwrap();
        generate_suite(Domain::Household, 3, 0, 0).save(&w.join("household_suite3.json")).unwrap();
        generate_suite(Domain::Shop, 16, 0, 0).save(&w.join("shop_suite16.json")).unwrap();
        Work { dir }
    }

    fn root(&self) -> &Path {
        self.dir.path()
    }

    /// Golden config with every `work/` path moved under the scratch dir, replaying only.
    fn config(&self, name: &str) -> RunConfig {
        let golden = golden_dir();
        let mut cfg = RunConfig::load(&golden.join(format!("{name}.toml"))).unwrap();
        let move_path = |p: &Path| -> PathBuf {
            match p.strip_prefix(&golden) {
                Ok(rel) if rel.starts_with("work") => self.root().join(rel),
                _ => p.to_path_buf(),
            }
        };
        cfg.datasets = cfg.datasets.iter().map(|p| move_path(p)).collect();
        cfg.suite = cfg.suite.as_deref().map(move_path);
        cfg.kb = cfg.kb.as_deref().map(move_path);
        cfg.skills = cfg.skills.as_deref().map(move_path);
        cfg.segmented = cfg.segmented.as_deref().map(move_path);
        cfg.output_dir = move_path(&cfg.output_dir);
        cfg.backend.mode = BackendMode::Replay;
        cfg
    }
}

fn gateway(cfg: &RunConfig) -> Gateway {
    Gateway::new(cfg.backend.clone()).unwrap()
}

fn eval(cfg: &RunConfig) -> o3d::eval::SuiteRun {
    let gw = gateway(cfg);
    if cfg.mode.uses_kb() {
        run_discover(cfg, &gw).unwrap();
        run_distill(cfg, &gw).unwrap();
    }
    run_suite(cfg, &gw).unwrap()
}

type Check = Result<String, String>;

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn skill_names(s: &SkillSet) -> BTreeSet<String> {
    s.names().into_iter().map(String::from).collect()
}

fn set(xs: &[&str]) -> BTreeSet<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

fn c1_household_pipeline(w: &Work) -> Check {
    let t0 = Instant::now();
    let cfg = w.config("household_o3d");
    let gw = gateway(&cfg);
    let art = run_discover(&cfg, &gw).map_err(|e| e.to_string())?;
    let want = set(&["find", "take", "put", "cool", "heat", "use", "clean"]);
    ensure(skill_names(&art.skills) == want, format!("skills {:?}", art.skills.names()))?;
    let (kb, report) = run_distill(&cfg, &gw).map_err(|e| e.to_string())?;
    ensure(skill_names(&kb.skill_set()) == want, "kb skills differ")?;
    for (name, k) in &kb.per_skill {
        ensure(!k.primitives.is_empty(), format!("{name} has no primitives"))?;
        ensure(
            !k.tips.is_empty() || report.no_pairs.contains(name),
            format!("{name} has no tips and no NoPairsForSkill record"),
        )?;
    }
    let took = t0.elapsed();
    ensure(took < Duration::from_secs(60), format!("took {took:?}"))?;
    Ok(format!("7 skills, kb complete, {:.1}s", took.as_secs_f64()))
}

fn c2_shop_discovery(w: &Work) -> Check {
    let cfg = w.config("shop_o3d");
    let art = run_discover(&cfg, &gateway(&cfg)).map_err(|e| e.to_string())?;
    let want = set(&["search_item", "select_item", "select_item_attributes", "purchase_item"]);
    ensure(skill_names(&art.skills) == want, format!("skills {:?}", art.skills.names()))?;
    Ok(art.skills.names().join(", "))
}

fn c3_segmentation_cover(w: &Work) -> Check {
    let mut checked = 0;
    for name in ["household_o3d", "shop_o3d"] {
        let cfg = w.config(name);
        let art = run_discover(&cfg, &gateway(&cfg)).map_err(|e| e.to_string())?;
        let data = load_dataset(&cfg.datasets[0]).map_err(|e| e.to_string())?;
        ensure(art.segmented.len() == data.len(), "not every trajectory was segmented")?;
        for s in &art.segmented {
            let t = data.get(&s.trajectory_id).ok_or("segmented id not in dataset")?;
            s.check(t.steps.len()).map_err(|e| format!("{}: {e}", t.id))?;
            checked += 1;
        }
    }
    ensure(checked >= 100, format!("only {checked} trajectories"))?;
    Ok(format!("{checked}/{checked} trajectories"))
}

fn c4_oracle_separation(w: &Work) -> Check {
    let t0 = Instant::now();
    let o3d = eval(&w.config("household_o3d"));
    let react = eval(&w.config("household_react_corrupted"));
    let took = t0.elapsed();
    let (a, b) = (o3d.metrics.overall.success_rate_percent, react.metrics.overall.success_rate_percent);
    ensure(o3d.metrics.overall.episodes == 30, "suite is not 30 tasks")?;
    ensure(a == Some(100), format!("O3D SR {a:?}"))?;
    ensure(b.is_some_and(|x| x <= 50), format!("ReAct SR {b:?}"))?;
    ensure(took < Duration::from_secs(30), format!("took {took:?}"))?;
    Ok(format!("O3D {} vs ReAct {}, {:.1}s", a.unwrap(), b.unwrap(), took.as_secs_f64()))
}

fn c5_budget_and_guard(w: &Work) -> Check {
    let stall = eval(&w.config("household_stall"));
    for r in &stall.results {
        ensure(
            r.turns_used == 30 && r.termination == Termination::BudgetExhausted,
            format!("stall {}: {} turns, {:?}", r.task_id, r.turns_used, r.termination),
        )?;
    }
    let repeat = eval(&w.config("household_repeat"));
    for r in &repeat.results {
        ensure(
            r.turns_used == 1 && r.termination == Termination::RepeatGuard,
            format!("repeat {}: {} turns, {:?}", r.task_id, r.turns_used, r.termination),
        )?;
    }
    ensure(!stall.results.is_empty() && !repeat.results.is_empty(), "empty suites")?;
    Ok("stall stops at 30 turns, repeat guard fires on the second occurrence".into())
}

fn c6_contrastive_pairs(w: &Work) -> Check {
    let data = load_dataset(&w.root().join("work/household.jsonl")).map_err(|e| e.to_string())?;
    let pairs = make_contrastive_pairs(&data);
    ensure(pairs.len() == 80, format!("{} pairs", pairs.len()))?;
    for p in &pairs {
        ensure(p.success.task_id == p.failure.task_id, "task ids differ")?;
        ensure(p.success.is_success() && !p.failure.is_success(), "outcomes not opposite")?;
    }
    Ok("80 pairs".into())
}

fn c7_shop_scoring() -> Check {
    // A task with one option requirement, plus identity and price: three in all.
    let (catalog, task) = (0..40)
        .flat_map(|cs| {
            let c = Arc::new(Catalog::generate(cs));
            (0..300).filter_map(move |s| generate_shop_task(&c, "deodorant", s).ok().map(|t| (c.clone(), t)))
        })
        .find(|(_, t)| t.required_options == ["bright citrus"])
        .ok_or("no deodorant task needs only bright citrus")?;
    let plan = oracle_solve(&catalog, &task).ok_or("unsolvable")?;
    let play = |actions: &[String]| {
        let mut env = ShopEnv::new(task.clone(), catalog.clone());
        let mut last = None;
        for a in actions {
            last = Some(env.step(a));
        }
        last.expect("non-empty plan")
    };

    let full = play(&plan);
    ensure((full.score - 1.0).abs() < 1e-9 && full.success, format!("full match {full:?}"))?;

    let partial: Vec<String> = plan.iter().filter(|a| *a != "click[bright citrus]").cloned().collect();
    ensure(partial.len() + 1 == plan.len(), "plan does not click the option")?;
    let p = play(&partial);
    ensure((p.score - 0.667).abs() <= 0.001 && !p.success, format!("2 of 3 {p:?}"))?;

    let upto = plan.iter().position(|a| a == "click[bright citrus]").unwrap();
    let mut env = ShopEnv::new(task.clone(), catalog.clone());
    for a in &plan[..upto] {
        env.step(a);
    }
    let before = env.world().clone();
    let o = env.step("click[BRIGHT CITRUS]");
    ensure(o.observation == "Invalid action!", format!("observation {:?}", o.observation))?;
    ensure(env.world() == &before, "state changed")?;
    Ok(format!("full 1.0, partial {:.3}, case-mismatched click rejected", p.score))
}

fn episodes(task_type: &str, n: usize, successes: usize) -> Vec<EpisodeSummary> {
    (0..n)
        .map(|i| EpisodeSummary {
            task_id: format!("{task_type}-{i}"),
            task_type: task_type.into(),
            success: i < successes,
            score: if i < successes { 1.0 } else { 0.0 },
            turns_used: 1,
            termination: if i < successes { Termination::TaskSuccess } else { Termination::BudgetExhausted },
            trials: 1,
            diagnostic: None,
        })
        .collect()
}

fn c8_metrics() -> Check {
    ensure(percent(122, 134) == Some(91), "122/134")?;
    // Household rows of the GPT-4 results table, with per-family counts 24/31/23/21/18/17.
    let families = [("pick", 24), ("clean", 31), ("heat", 23), ("cool", 21), ("look", 18), ("pick2", 17)];
    let o3d_ok = [22, 31, 22, 20, 18, 9];
    let react_ok = [16, 23, 17, 14, 18, 8];
    let build = |ok: &[usize]| {
        let mut r = Vec::new();
        for ((t, n), s) in families.iter().zip(ok) {
            r.extend(episodes(t, *n, *s));
        }
        compute_metrics(&r)
    };
    let (o3d, react) = (build(&o3d_ok), build(&react_ok));
    let table = render_comparison(&[("ReAct", &react), ("O3D", &o3d)], Layout::Household);
    let want = concat!(
        "         Pick  Clean   Heat   Cool   Look  Pick2    All\n",
        "ReAct      67     74     74     67    100     47     72\n",
        "O3D        92    100     96     95    100     53     91\n",
    );
    ensure(table == want, format!("household table:\n{table}"))?;
    ensure(render_comparison(&[("ReAct", &react), ("O3D", &o3d)], Layout::Household) == table, "unstable")?;

    let shop = compute_metrics(&episodes("shampoo", 4, 1));
    let s = render_report(&shop, Layout::Shop);
    ensure(s.lines().next().map(str::split_whitespace).map(Iterator::collect::<Vec<_>>) == Some(vec!["SR", "Score"]), s.clone())?;
    ensure(render_report(&shop, Layout::Shop) == s, "unstable shop table")?;
    Ok("91 for 122/134; household and shop headers stable".into())
}

fn c9_determinism(w: &Work) -> Check {
    let cfg = w.config("household_o3d");
    let files = ["results.jsonl", "report.txt", "metrics.json"];
    let read = || -> Vec<Vec<u8>> { files.iter().map(|f| std::fs::read(cfg.output_dir.join(f)).unwrap()).collect() };
    eval(&cfg);
    let first = read();
    eval(&cfg);
    ensure(read() == first, "outputs differ between runs")?;
    Ok(format!("{} byte-identical", files.join(", ")))
}

fn prompts(kb: &KnowledgeBase) -> Vec<String> {
    kb.skills
        .iter()
        .map(|s| build_skill_prompt(Domain::Household, &kb.per_skill[&s.name], kb.ablation_provenance))
        .collect()
}

fn c10_ablation_wiring(w: &Work) -> Check {
    let build = |name: &str| -> Result<KnowledgeBase, String> {
        let cfg = w.config(name);
        let gw = gateway(&cfg);
        run_discover(&cfg, &gw).map_err(|e| e.to_string())?;
        Ok(run_distill(&cfg, &gw).map_err(|e| e.to_string())?.0)
    };
    let full = build("household_o3d")?;
    let all_tips: Vec<String> = full.per_skill.values().flat_map(|k| k.tips.iter().map(|t| t.text.clone())).collect();
    let no_tip_text = |p: &str| all_tips.iter().all(|t| !p.contains(t.as_str()));

    let sd = build("household_sd")?;
    ensure(sd.skills.len() == 7 && !sd.is_pseudo(), "SD-only should keep the 7 skills")?;
    ensure(sd.per_skill.values().all(|k| k.tips.is_empty() && k.primitives.is_empty()), "SD-only distilled knowledge")?;
    for p in prompts(&sd) {
        ensure(!p.contains(TIPS_HEADER) && !p.contains(HOUSEHOLD_PRIMITIVE_HEADER) && no_tip_text(&p), "SD-only prompt has guidance")?;
    }

    let pd = build("household_pd")?;
    ensure(pd.skills == vec![SkillSpec::pseudo_task()], "PD-only should use the pseudo skill")?;
    let k = &pd.per_skill["task"];
    ensure(!k.primitives.is_empty() && k.tips.is_empty(), "PD-only knowledge shape")?;
    for p in prompts(&pd) {
        ensure(p.contains(&format!("1. {HOUSEHOLD_PRIMITIVE_HEADER}")), "PD-only prompt lacks primitives")?;
        ensure(no_tip_text(&p), "PD-only prompt has tip text")?;
    }

    let td = build("household_td")?;
    ensure(td.skills == vec![SkillSpec::pseudo_task()], "TD-only should use the pseudo skill")?;
    let k = &td.per_skill["task"];
    ensure(!k.tips.is_empty() && k.primitives.is_empty(), "TD-only knowledge shape")?;
    for p in prompts(&td) {
        ensure(p.contains(TIPS_HEADER) && p.contains(&k.tips[0].text), "TD-only prompt lacks tips")?;
        ensure(!p.contains(HOUSEHOLD_PRIMITIVE_HEADER), "TD-only prompt has primitives")?;
    }
    Ok("SD/PD/TD-only prompts carry only their own guidance".into())
}

fn c11_live_smoke(w: &Work) -> Option<Check> {
    let endpoint = std::env::var("O3D_LIVE_ENDPOINT").ok()?;
    let mut cfg = w.config("household_stall");
    cfg.mode = Mode::React;
    cfg.backend.mode = BackendMode::Live;
    cfg.backend.endpoint = endpoint;
    cfg.backend.cassette_path = None;
    if let Ok(m) = std::env::var("O3D_LIVE_MODEL") {
        cfg.backend.model_name = m;
    }
    if let Ok(k) = std::env::var("O3D_LIVE_KEY_ENV") {
        cfg.backend.api_key_env = k;
    }
    let suite = w.root().join("work/live_suite.json");
    generate_suite(Domain::Household, 1, 0, 0).save(&suite).unwrap();
    cfg.suite = Some(suite);
    cfg.output_dir = w.root().join("work/live");
    let run = match Gateway::new(cfg.backend.clone()).map_err(|e| e.to_string()).and_then(|gw| run_suite(&cfg, &gw).map_err(|e| e.to_string())) {
        Ok(r) => r,
        Err(e) => return Some(Err(e)),
    };
    let gateway_error = run
        .results
        .iter()
        .filter_map(|r| r.diagnostic.as_deref())
        .find(|d| ["upstream", "rate limited", "gateway", "context limit"].iter().any(|k| d.contains(k)));
    Some(match gateway_error {
        Some(d) => Err(d.to_string()),
        None => Ok(format!("episode ended with {:?}", run.results[0].termination)),
    })
}

fn main() {
    // `cargo test -- --list` and filters: behave like an empty harness when asked to list.
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let work = Work::new();
    let mut results: Vec<(u32, &str, Check)> = vec![
        (1, "household discover+distill", c1_household_pipeline(&work)),
        (2, "shop skill discovery", c2_shop_discovery(&work)),
        (3, "segmentation cover", c3_segmentation_cover(&work)),
        (4, "oracle separation", c4_oracle_separation(&work)),
        (5, "budget and repeat guard", c5_budget_and_guard(&work)),
        (6, "contrastive pairing", c6_contrastive_pairs(&work)),
        (7, "shop scoring", c7_shop_scoring()),
        (8, "metric arithmetic and layout", c8_metrics()),
        (9, "determinism", c9_determinism(&work)),
        (10, "ablation wiring", c10_ablation_wiring(&work)),
    ];
    match c11_live_smoke(&work) {
        Some(r) => results.push((11, "live smoke", r)),
        None => println!("SKIP criterion 11: live smoke (set O3D_LIVE_ENDPOINT to run)"),
    }
    let mut failed = 0;
    for (n, name, r) in &results {
        match r {
            Ok(d) => println!("PASS criterion {n}: {name} ({d})"),
            Err(e) => {
                failed += 1;
                println!("FAIL criterion {n}: {name}: {e}");
            }
        }
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
