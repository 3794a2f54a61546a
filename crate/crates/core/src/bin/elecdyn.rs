use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use elecdyn::bounds::{check_candidate_bound, check_voter_bound, ContractionReport};
use elecdyn::oracles::{run_oracle_comparison, OracleStudy, ORACLE_BANDS_CSV};
use elecdyn::runner::{
    read_results, run_grid, run_simulation, summarize, write_results, GridSpec, RunConfig, RunResult, RunSummary,
    SummaryMode, RUNS_CSV,
};
use elecdyn::{Error, Result};

/// Repeated-election polarization dynamics.
#[derive(Parser)]
#[command(name = "elecdyn", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Base random seed (overrides the file).
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long, default_value_t = default_workers())]
    workers: usize,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one configuration.
    Run {
        /// Run configuration (TOML).
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Run the factorial grid.
    Grid {
        /// Grid specification (TOML); the full default grid when omitted.
        #[arg(long)]
        spec: Option<PathBuf>,
        /// Restrict to candidate mechanisms with zero centroid pull.
        #[arg(long)]
        mu_zero: bool,
        /// Replicates per cell, seeded `seed, seed + 1, ...`.
        #[arg(long)]
        replicates: Option<usize>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        rounds: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Paired comparison of the centrality and depolarization oracles.
    Oracle {
        /// Study settings (TOML); defaults when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        replicates: Option<usize>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        rounds: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Simulate a noiseless configuration and check the contraction bounds round by round.
    BoundsCheck {
        #[arg(long)]
        config: PathBuf,
        /// Also check the candidate dispersion bound.
        #[arg(long)]
        candidate: bool,
        /// Use the repulsion form of the candidate bound.
        #[arg(long)]
        repulsion: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Build summary tables from a grid output directory.
    Summarize {
        /// Directory written by `grid`.
        #[arg(long)]
        in_dir: PathBuf,
        /// trajectory, mechanism_heatmap, balance_heatmap, tradeoff, candidate_side or all.
        #[arg(long, default_value = "all")]
        mode: String,
        /// Where to write tables; defaults to the input directory.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

/// Completed, but some cells failed or some bound was violated.
const EXIT_INCOMPLETE: u8 = 1;
/// Invalid input, refused check or I/O failure.
const EXIT_ERROR: u8 = 2;

fn main() -> ExitCode {
    match dispatch(Cli::parse().command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_INCOMPLETE),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}

fn dispatch(cmd: Command) -> Result<bool> {
    match cmd {
        Command::Run { config, common } => cmd_run(&config, &common),
        Command::Grid { spec, mu_zero, replicates, n, rounds, common } => {
            let mut grid = match spec {
                Some(path) => GridSpec::load(&path)?,
                None => GridSpec::default(),
            };
            grid.mu_zero |= mu_zero;
            if common.seed.is_some() || replicates.is_some() {
                let base = common.seed.unwrap_or(0);
                let count = replicates.unwrap_or(grid.replicate_seeds.len()) as u64;
                grid.replicate_seeds = (base..base + count).collect();
            }
            grid.n = n.unwrap_or(grid.n);
            grid.rounds = rounds.unwrap_or(grid.rounds);
            let results = run_grid(&grid, common.workers)?;
            write_results(&common.out_dir, &results)?;
            Ok(report_runs(&results, &common.out_dir))
        }
        Command::Oracle { config, replicates, n, rounds, common } => {
            let mut study = match config {
                Some(path) => OracleStudy::from_toml(&fs::read_to_string(path)?)?,
                None => OracleStudy::default(),
            };
            study.replicates = replicates.unwrap_or(study.replicates);
            study.n = n.unwrap_or(study.n);
            study.rounds = rounds.unwrap_or(study.rounds);
            study.base_seed = common.seed.unwrap_or(study.base_seed);
            let cmp = run_oracle_comparison(&study, common.workers)?;
            cmp.write(&common.out_dir)?;
            println!("wrote {}", common.out_dir.join(ORACLE_BANDS_CSV).display());
            Ok(true)
        }
        Command::BoundsCheck { config, candidate, repulsion, common } => {
            cmd_bounds(&config, candidate, repulsion, &common)
        }
        Command::Summarize { in_dir, mode, out_dir } => {
            let modes: Vec<SummaryMode> = if mode == "all" {
                SummaryMode::ALL.to_vec()
            } else {
                vec![mode.parse()?]
            };
            let results = read_results(&in_dir)?;
            let out_dir = out_dir.unwrap_or_else(|| in_dir.clone());
            fs::create_dir_all(&out_dir)?;
            for m in modes {
                let path = out_dir.join(format!("summary_{}.csv", m.label()));
                summarize(&results, m)?.write_csv(&path)?;
                println!("wrote {}", path.display());
            }
            Ok(true)
        }
    }
}

fn load_run(path: &Path, common: &Common) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(path)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn cmd_run(path: &Path, common: &Common) -> Result<bool> {
    let cfg = load_run(path, common)?;
    let result = match run_simulation(&cfg) {
        Ok(out) => RunResult { summary: RunSummary::from_records(0, 0, &cfg, &out.records), records: out.records },
        Err(e @ Error::Config(_)) => return Err(e),
        Err(e) => RunResult { summary: RunSummary::failed(0, 0, &cfg, &e), records: Vec::new() },
    };
    let results = [result];
    write_results(&common.out_dir, &results)?;
    Ok(report_runs(&results, &common.out_dir))
}

fn report_runs(results: &[RunResult], dir: &Path) -> bool {
    let failed: Vec<&RunSummary> = results.iter().map(|r| &r.summary).filter(|s| !s.is_ok()).collect();
    for s in &failed {
        eprintln!("run {} failed: {}", s.run_id, s.error);
    }
    println!("{} runs, {} failed; wrote {}", results.len(), failed.len(), dir.join(RUNS_CSV).display());
    failed.is_empty()
}

fn cmd_bounds(path: &Path, candidate: bool, repulsion: bool, common: &Common) -> Result<bool> {
    let cfg = load_run(path, common)?;
    let out = run_simulation(&cfg)?;
    let mut reports: Vec<ContractionReport> = vec![check_voter_bound(&out.records, &out.params)?];
    if candidate || repulsion {
        reports.push(check_candidate_bound(&out.records, &out.params, &cfg.rule, repulsion)?);
    }
    fs::create_dir_all(&common.out_dir)?;
    let dest = common.out_dir.join("bounds.json");
    fs::write(&dest, serde_json::to_string_pretty(&reports)?)?;
    for r in &reports {
        let verdict = if r.all_satisfied { "satisfied" } else { "VIOLATED" };
        println!("{} bound: {verdict} over {} rounds (max violation {:e})", r.bound, r.rows.len(), r.max_violation);
    }
    println!("wrote {}", dest.display());
    Ok(reports.iter().all(|r| r.all_satisfied))
}
