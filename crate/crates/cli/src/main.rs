use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use o3d::eval::{
    generate_suite, render_comparison, run_discover, run_distill, run_suite, write_offline_data, Layout, RunConfig,
    SuiteMetrics,
};
use o3d::gateway::{BackendMode, Cassette, Gateway};
use o3d::Domain;
use std::path::PathBuf;
use tracing_subscriber::EnvFilter;

#[derive(Parser, Debug)]
#[command(name = "o3d", version, about = "Offline skill discovery and distillation pipeline")]
struct Cli {
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Override the backend mode: live, replay or record.
    #[arg(long, global = true)]
    backend: Option<BackendMode>,
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Write per-episode transcripts under the output directory.
    #[arg(long, global = true)]
    dump_transcripts: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate paired success/failure trajectories.
    GenData {
        #[arg(long)]
        domain: Domain,
        #[arg(long, default_value_t = 80)]
        pairs: usize,
        #[arg(long, default_value_t = 0)]
        catalog_seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate an evaluation suite.
    Suite {
        #[arg(long)]
        domain: Domain,
        #[arg(long, default_value_t = 134)]
        tasks: usize,
        #[arg(long, default_value_t = 0)]
        catalog_seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Stage 1: discover skills and segment the datasets.
    Discover,
    /// Stage 2: distill primitives, tips and examples into a knowledge base.
    Distill,
    /// Run the suite under the configured mode.
    Run,
    /// Discover, distill (knowledge-base modes only) and run.
    Eval,
    /// Render a comparison table from metrics files given as LABEL=PATH.
    Report {
        #[arg(long)]
        layout: Layout,
        #[arg(required = true)]
        runs: Vec<String>,
    },
    /// Record or verify the cassette named by the config.
    Cassette {
        #[command(subcommand)]
        action: CassetteAction,
    },
}

#[derive(Subcommand, Debug)]
enum CassetteAction {
    /// Run eval in record mode, filling the cassette.
    Record,
    /// Check the cassette parses and that an eval replays with no misses.
    Verify,
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let path = cli.config.as_ref().context("this command needs --config")?;
    let mut cfg = RunConfig::load(path).with_context(|| format!("loading {}", path.display()))?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(b) = cli.backend {
        cfg.backend.mode = b;
    }
    if let Some(w) = cli.workers {
        cfg.workers = w;
    }
    cfg.dump_transcripts |= cli.dump_transcripts;
    cfg.validate()?;
    Ok(cfg)
}

fn eval(cfg: &RunConfig) -> Result<String> {
    let gw = Gateway::new(cfg.backend.clone())?;
    if cfg.mode.uses_kb() {
        run_discover(cfg, &gw)?;
        run_distill(cfg, &gw)?;
    }
    let run = run_suite(cfg, &gw)?;
    gw.flush()?;
    Ok(run.report)
}

fn main() -> Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    match &cli.command {
        Command::GenData {
            domain,
            pairs,
            catalog_seed,
            out,
        } => {
            let r = write_offline_data(*domain, *pairs, cli.seed.unwrap_or(0), *catalog_seed, out)?;
            println!("{} pairs written to {}", r.pairs, out.display());
            for (m, n) in &r.modes {
                println!("  {}: {n}", m.as_str());
            }
        }
        Command::Suite {
            domain,
            tasks,
            catalog_seed,
            out,
        } => {
            generate_suite(*domain, *tasks, cli.seed.unwrap_or(0), *catalog_seed).save(out)?;
            println!("{tasks} tasks written to {}", out.display());
        }
        Command::Discover => {
            let cfg = load_config(&cli)?;
            let gw = Gateway::new(cfg.backend.clone())?;
            let a = run_discover(&cfg, &gw)?;
            println!("skills: {}", a.skills.names().join(", "));
            println!("segmented: {} (fallbacks {})", a.segmented.len(), a.report.fallbacks.len());
        }
        Command::Distill => {
            let cfg = load_config(&cli)?;
            let gw = Gateway::new(cfg.backend.clone())?;
            let (kb, report) = run_distill(&cfg, &gw)?;
            for s in &kb.skills {
                println!(
                    "{}: {} primitives, {} tips",
                    s.signature(),
                    report.primitive_counts.get(&s.name).unwrap_or(&0),
                    report.tip_counts.get(&s.name).unwrap_or(&0)
                );
            }
        }
        Command::Run => {
            let cfg = load_config(&cli)?;
            let gw = Gateway::new(cfg.backend.clone())?;
            print!("{}", run_suite(&cfg, &gw)?.report);
        }
        Command::Eval => {
            let cfg = load_config(&cli)?;
            print!("{}", eval(&cfg)?);
        }
        Command::Report { layout, runs } => {
            let mut loaded = Vec::new();
            for r in runs {
                let (label, path) = r.split_once('=').context("runs are LABEL=PATH")?;
                let text = std::fs::read_to_string(path).with_context(|| format!("reading {path}"))?;
                let m: SuiteMetrics = serde_json::from_str(&text).with_context(|| format!("parsing {path}"))?;
                loaded.push((label.to_string(), m));
            }
            let rows: Vec<(&str, &SuiteMetrics)> = loaded.iter().map(|(l, m)| (l.as_str(), m)).collect();
            print!("{}", render_comparison(&rows, *layout));
        }
        Command::Cassette { action } => {
            let mut cfg = load_config(&cli)?;
            let path = cfg.backend.cassette_path.clone().context("config has no backend.cassette_path")?;
            match action {
                CassetteAction::Record => {
                    cfg.backend.mode = BackendMode::Record;
                    print!("{}", eval(&cfg)?);
                    println!("cassette: {} entries", Cassette::load(&path)?.len());
                }
                CassetteAction::Verify => {
                    let c = Cassette::load(&path)?;
                    cfg.backend.mode = BackendMode::Replay;
                    let gw = Gateway::new(cfg.backend.clone())?;
                    if cfg.mode.uses_kb() {
                        run_discover(&cfg, &gw)?;
                        run_distill(&cfg, &gw)?;
                    }
                    let run = run_suite(&cfg, &gw)?;
                    let misses = run
                        .results
                        .iter()
                        .filter(|r| r.diagnostic.as_deref().is_some_and(|d| d.contains("no cassette entry")))
                        .count();
                    if misses > 0 {
                        bail!("{misses} episodes hit cassette misses");
                    }
                    println!("cassette ok: {} entries, {} episodes replayed", c.len(), run.results.len());
                }
            }
        }
    }
    Ok(())
}
