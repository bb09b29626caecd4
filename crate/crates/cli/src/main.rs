use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lcom_search::LcomMode;
use lcom_search_cli::{cmd_bench, cmd_generate, cmd_oracle, cmd_render, cmd_run, CliError, RunConfig};

#[derive(Parser)]
#[command(name = "lcom-search", version, about = "Language-conditioned object search on occupancy grids")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Run configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `out_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated seeds; override `seeds`.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Observation-model mode, e.g. static or dynamic-both.
    #[arg(long)]
    mode: Option<LcomMode>,
}

#[derive(Subcommand)]
enum Command {
    /// Run episodes and write one log per (arm, scene, seed).
    Run(RunArgs),
    /// Run all arms in parallel and write per-episode and summary CSVs.
    Bench(RunArgs),
    /// Validate scenes and print their oracle action counts.
    Oracle {
        /// Take the scene list from a run configuration.
        #[arg(long)]
        config: Option<PathBuf>,
        scenes: Vec<PathBuf>,
    },
    /// Render a belief snapshot CSV as a text heatmap.
    Render { belief: PathBuf },
    /// Generate a random scene suite.
    Generate {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 24)]
        count: usize,
        #[arg(long, default_value_t = 16)]
        size: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn load(args: &RunArgs) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::load(&args.config)?;
    if let Some(out) = &args.out {
        cfg.out_dir = out.clone();
    }
    if let Some(seeds) = &args.seeds {
        cfg.seeds = seeds.clone();
    }
    if let Some(mode) = args.mode {
        cfg.restrict_mode(mode)?;
    }
    Ok(cfg)
}

fn main_inner(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run(args) => {
            let cfg = load(&args)?;
            let results = cmd_run(&cfg)?;
            for r in results {
                println!(
                    "{} {} seed {}: success={} actions={} oracle={}",
                    r.arm, r.scene, r.seed, r.success, r.actions, r.oracle
                );
            }
        }
        Command::Bench(args) => {
            let cfg = load(&args)?;
            let bench = cmd_bench(&cfg)?;
            println!("{}", lcom_search::metrics::BenchmarkResult::SUMMARY_HEADER);
            for a in &bench.arms {
                println!(
                    "{},{},{},{:.4},{:.4},{:.4},{:.4},{:.2},{:.2},{:.3}",
                    a.arm,
                    a.episodes,
                    a.seeds,
                    a.completion.mean,
                    a.completion.se,
                    a.spl.mean,
                    a.spl.se,
                    a.mean_actions,
                    a.mean_oracle,
                    a.mean_seconds
                );
            }
            eprintln!("wrote {}", cfg.out_dir.display());
        }
        Command::Oracle { config, mut scenes } => {
            if let Some(path) = config {
                scenes.extend(RunConfig::load(&path)?.scene_paths()?);
            }
            if scenes.is_empty() {
                return Err(CliError::Input("no scenes given".into()));
            }
            let mut failed = false;
            println!("scene,oracle");
            for row in cmd_oracle(&scenes)? {
                let l = row.oracle.map(|l| l.to_string()).unwrap_or_else(|| "unreachable".into());
                println!("{},{}", row.scene, l);
                for f in &row.findings {
                    eprintln!("{}: {f}", row.scene);
                    failed |= f.starts_with("error");
                }
            }
            if failed {
                return Err(CliError::Input("some scenes have errors".into()));
            }
        }
        Command::Render { belief } => {
            let text = std::fs::read_to_string(&belief).map_err(|e| CliError::io(&belief, e))?;
            print!("{}", cmd_render(&text)?);
        }
        Command::Generate { out, count, size, seed } => {
            for p in cmd_generate(&out, count, size, seed)? {
                println!("{}", p.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match main_inner(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
