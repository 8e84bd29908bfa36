use o3d::eval::{generate_suite, run_discover, run_distill, run_suite, write_offline_data, Mode, RunConfig};
use o3d::gateway::{BackendMode, Gateway, GatewayConfig};
use o3d::Domain;
use std::path::Path;

fn config(dir: &Path, domain: Domain, endpoint: &str, mode: BackendMode) -> RunConfig {
    let mut cfg = RunConfig::new(domain, dir.join("out"));
    cfg.datasets = vec![dir.join("data.jsonl")];
    cfg.kb = Some(dir.join("out/kb.json"));
    cfg.suite = Some(dir.join("suite.json"));
    cfg.workers = 4;
    cfg.backend = GatewayConfig {
        mode,
        endpoint: endpoint.into(),
        model_name: "sim".into(),
        cassette_path: Some(dir.join("cassette.json")),
        ..Default::default()
    };
    cfg
}

fn prepare(dir: &Path, domain: Domain, pairs: usize, tasks: usize) {
    write_offline_data(domain, pairs, 0, 0, &dir.join("data.jsonl")).unwrap();
    generate_suite(domain, tasks, 0, 0).save(&dir.join("suite.json")).unwrap();
}

#[test]
fn household_record_then_replay() {
    let dir = tempfile::tempdir().unwrap();
    prepare(dir.path(), Domain::Household, 24, 12);
    let cfg = config(dir.path(), Domain::Household, "sim://oracle", BackendMode::Record);
    let gw = Gateway::new(cfg.backend.clone()).unwrap();
    let art = run_discover(&cfg, &gw).unwrap();
    assert_eq!(art.skills.names(), ["find", "take", "put", "heat", "cool", "clean", "use"].to_vec());
    assert!(art.report.fallbacks.is_empty(), "{:?}", art.report.fallbacks);
    let (kb, report) = run_distill(&cfg, &gw).unwrap();
    assert_eq!(kb.skills.len(), 7);
    for (name, k) in &kb.per_skill {
        assert!(!k.primitives.is_empty(), "{name}");
        assert!(!k.tips.is_empty() || report.no_pairs.contains(name), "{name}");
    }
    let first = run_suite(&cfg, &gw).unwrap();
    assert_eq!(first.metrics.overall.success_rate_percent, Some(100), "{}", first.report);
    drop(gw);

    let replay = config(dir.path(), Domain::Household, "sim://oracle", BackendMode::Replay);
    let gw = Gateway::new(replay.backend.clone()).unwrap();
    let results = std::fs::read(dir.path().join("out/results.jsonl")).unwrap();
    let again = run_suite(&replay, &gw).unwrap();
    assert_eq!(again.metrics, first.metrics);
    assert_eq!(std::fs::read(dir.path().join("out/results.jsonl")).unwrap(), results);
}

#[test]
fn shop_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    prepare(dir.path(), Domain::Shop, 30, 8);
    let cfg = config(dir.path(), Domain::Shop, "sim://oracle", BackendMode::Record);
    let gw = Gateway::new(cfg.backend.clone()).unwrap();
    let art = run_discover(&cfg, &gw).unwrap();
    assert_eq!(
        art.skills.names(),
        ["search_item", "select_item", "select_item_attributes", "purchase_item"].to_vec()
    );
    run_distill(&cfg, &gw).unwrap();
    let run = run_suite(&cfg, &gw).unwrap();
    assert_eq!(run.metrics.overall.success_rate_percent, Some(100), "{}", run.report);
}

#[test]
fn react_under_corruption_fails_more() {
    let dir = tempfile::tempdir().unwrap();
    prepare(dir.path(), Domain::Household, 12, 12);
    let mut cfg = config(
        dir.path(),
        Domain::Household,
        "sim://corrupted?modes=wrong_preposition,action_loop&rate=1",
        BackendMode::Live,
    );
    cfg.mode = Mode::React;
    let gw = Gateway::new(cfg.backend.clone()).unwrap();
    let run = run_suite(&cfg, &gw).unwrap();
    assert!(run.metrics.overall.success_rate_percent.unwrap() <= 50, "{}", run.report);
}
