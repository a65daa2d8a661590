use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use bnb_nsga::bnb::BnbConfig;
use bnb_nsga::harness::{
    compare, export, read_summaries, run_experiment, snap_for, summarize_groups, Comparison,
    ExperimentConfig, ExperimentFile, SolverConfig, SolverKind, Summary,
};
use bnb_nsga::metrics::{read_front_csv, write_front_csv, ReferenceFront};
use bnb_nsga::nsga2::Nsga2Config;
use bnb_nsga::oracle::{cache_path, cached_true_front, true_front, OracleConfig};
use bnb_nsga::problems::{by_name, ProblemSpec};

/// Environment variable holding the worker thread count.
const WORKERS_ENV: &str = "BNBNSGA_WORKERS";

#[derive(Parser)]
#[command(
    name = "bnbnsga",
    version,
    about = "NSGA-II and branch-and-bound NSGA-II for multi-objective MINLP"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run repeated seeded trials of one solver configuration.
    Run {
        #[arg(long)]
        problem: String,
        #[arg(long)]
        solver: SolverKind,
        /// TOML solver config; defaults when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Combination ID recorded in the output.
        #[arg(long, default_value_t = 0)]
        id: u32,
        #[arg(long, default_value_t = 20)]
        reps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Directory of cached reference fronts.
        #[arg(long)]
        oracle_cache: Option<PathBuf>,
        /// Record wall-clock time (makes runs.csv non-reproducible).
        #[arg(long)]
        wall_time: bool,
    },
    /// Run every combination of a sweep file.
    Sweep {
        #[arg(long)]
        file: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        oracle_cache: Option<PathBuf>,
    },
    /// Compute a reference front.
    Oracle {
        #[arg(long)]
        problem: String,
        /// Grid points per continuous variable.
        #[arg(long)]
        grid: Option<usize>,
        /// Resampling step.
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score an approximate front against a reference front.
    Metrics {
        #[arg(long)]
        approx: PathBuf,
        #[arg(long = "true")]
        truth: PathBuf,
        /// Treat GD distances up to this value as zero.
        #[arg(long)]
        snap: Option<f64>,
        /// Evaluation count to report.
        #[arg(long, default_value_t = 0)]
        evals: u64,
    },
    /// Investment ratio of candidate runs over baseline runs.
    Compare {
        #[arg(long)]
        baseline: PathBuf,
        #[arg(long)]
        candidate: PathBuf,
    },
}

fn read_toml<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn solver_config(kind: SolverKind, path: Option<&Path>) -> Result<SolverConfig> {
    Ok(match (kind, path) {
        (SolverKind::Nsga2, None) => SolverConfig::Nsga2(Nsga2Config::default()),
        (SolverKind::Bnb, None) => SolverConfig::Bnb(BnbConfig::default()),
        (SolverKind::Nsga2, Some(p)) => SolverConfig::Nsga2(read_toml(p)?),
        (SolverKind::Bnb, Some(p)) => SolverConfig::Bnb(read_toml(p)?),
    })
}

fn reference(problem: &ProblemSpec, cfg: &OracleConfig, cache: &Path) -> Result<ReferenceFront> {
    let points = cached_true_front(cache, problem, cfg)?;
    Ok(ReferenceFront::new(points, snap_for(problem))?)
}

fn run_all(experiments: &[ExperimentConfig], out: &Path, cache: Option<PathBuf>) -> Result<()> {
    let cache = cache.unwrap_or_else(|| out.join("oracle"));
    let mut records = Vec::new();
    let mut fronts = Vec::new();
    for cfg in experiments {
        let problem = by_name(&cfg.problem)?;
        let oracle = cfg.oracle_config(&problem);
        let truth = reference(&problem, &oracle, &cache)?;
        std::fs::create_dir_all(out)?;
        std::fs::copy(
            cache_path(&cache, &problem, &oracle),
            out.join(format!("{}-true.csv", problem.name)),
        )?;
        log::info!(
            "{} {} id {}: {} repetitions",
            cfg.problem,
            cfg.solver.kind(),
            cfg.id,
            cfg.repetitions
        );
        let result = run_experiment(cfg, &truth)?;
        records.extend(result.records);
        fronts.extend(result.fronts);
    }
    let summaries = summarize_groups(&records)?;
    export(out, &records, &fronts, &summaries, &[])?;
    print_summaries(&summaries);
    Ok(())
}

fn print_summaries(summaries: &[Summary]) {
    println!("problem\tsolver\tid\truns\tfailed\tgd\td_spread\tonvg\tpurity\tevals");
    for s in summaries {
        let mean = |k: &str| s.metrics.get(k).map_or(f64::NAN, |d| d.mean);
        println!(
            "{}\t{}\t{}\t{}\t{}\t{:.3e}\t{:.3e}\t{:.1}\t{:.3}\t{:.4e}",
            s.problem,
            s.solver,
            s.id,
            s.runs,
            s.failures,
            mean("gd"),
            mean("d_spread"),
            mean("onvg"),
            mean("purity"),
            mean("evals")
        );
    }
}

fn comparisons(baseline: &[Summary], candidate: &[Summary]) -> Result<Vec<Comparison>> {
    let mut out = Vec::new();
    for c in candidate {
        let Some(b) = baseline.iter().find(|b| b.problem == c.problem) else {
            bail!("baseline has no summary for problem {}", c.problem);
        };
        out.push(compare(b, c)?);
    }
    Ok(out)
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Ok(v) = std::env::var(WORKERS_ENV) {
        let n: usize = v
            .parse()
            .with_context(|| format!("{WORKERS_ENV}={v} is not a count"))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()?;
    }
    match Cli::parse().command {
        Command::Run {
            problem,
            solver,
            config,
            id,
            reps,
            seed,
            out,
            oracle_cache,
            wall_time,
        } => {
            let mut cfg =
                ExperimentConfig::new(problem, id, solver_config(solver, config.as_deref())?);
            cfg.repetitions = reps;
            cfg.base_seed = seed;
            cfg.record_wall_time = wall_time;
            cfg.validate()?;
            run_all(&[cfg], &out, oracle_cache)
        }
        Command::Sweep {
            file,
            out,
            oracle_cache,
        } => {
            let sweep: ExperimentFile = read_toml(&file)?;
            run_all(&sweep.experiments()?, &out, oracle_cache)
        }
        Command::Oracle {
            problem,
            grid,
            epsilon,
            out,
        } => {
            let problem = by_name(&problem)?;
            let mut cfg = OracleConfig::for_problem(&problem);
            if let Some(g) = grid {
                cfg.continuous_grid_points = g;
            }
            if let Some(e) = epsilon {
                cfg.epsilon = e;
            }
            let front = true_front(&problem, &cfg)?;
            std::fs::create_dir_all(&out)?;
            let csv = out.join(format!("{}-true.csv", problem.name));
            write_front_csv(&csv, &front.points)?;
            let meta = serde_json::json!({
                "problem": problem.name,
                "config": cfg,
                "points": front.points.len(),
                "evaluations": front.evaluations,
                "grid_pitch": front.grid_pitch,
                "resample_step": front.resample_step,
                "contributing": front.contributing,
            });
            let meta_path = out.join(format!("{}-true.json", problem.name));
            std::fs::write(&meta_path, serde_json::to_string_pretty(&meta)? + "\n")?;
            println!("{} points -> {}", front.points.len(), csv.display());
            Ok(())
        }
        Command::Metrics {
            approx,
            truth,
            snap,
            evals,
        } => {
            let approx = read_front_csv(&approx)?;
            let truth = ReferenceFront::new(read_front_csv(&truth)?, snap)?;
            let report = truth.report(&approx, evals)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(())
        }
        Command::Compare {
            baseline,
            candidate,
        } => {
            let b = read_summaries(&baseline.join("summary.json"))?;
            let c = read_summaries(&candidate.join("summary.json"))?;
            let result = comparisons(&b, &c)?;
            let text = serde_json::to_string_pretty(&result)?;
            std::fs::write(candidate.join("comparison.json"), text.clone() + "\n")?;
            println!("{text}");
            Ok(())
        }
    }
}
