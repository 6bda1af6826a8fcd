use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use intermit::constraints::{verify_matroid_axioms, verify_matroid_axioms_sampled, AxiomReport, EXHAUSTIVE_CAP};
use intermit::envsim::{simulate, write_snapshot_csv};
use intermit::exec::Execution;
use intermit::groundset::GridSpec;
use intermit::harness::{
    build_trial, emit_outputs, oracle_one, run_monte_carlo, solve_one, write_run_summary, write_schedule,
    ExperimentConfig, OUTPUT_DIR_ENV,
};
use intermit::{Error, Result};

#[derive(Parser)]
#[command(name = "intermit", version, about = "Intermittent multi-robot deployment planning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config (TOML).
    config: PathBuf,
    /// Trial whose random instance is used.
    #[arg(long, default_value_t = 0)]
    trial: u64,
    /// Output directory; overrides the config and INTERMIT_OUTPUT_DIR.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run on one thread.
    #[arg(long)]
    sequential: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Threshold greedy on one instance; writes schedule.csv and run_summary.txt.
    Solve(Common),
    /// Exhaustive optimum of one instance; writes oracle_schedule.csv.
    Oracle(Common),
    /// Monte Carlo greedy-vs-optimal sweep.
    Mc {
        config: PathBuf,
        #[arg(long)]
        trials: Option<u64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        sequential: bool,
    },
    /// Checks the matroid axioms of every configured matroid on one ground set.
    VerifyMatroids {
        config: PathBuf,
        #[arg(long, default_value_t = 0)]
        trial: u64,
        /// Random restrictions checked when the ground set is too large to enumerate.
        #[arg(long, default_value_t = 200)]
        samples: usize,
    },
    /// Writes ground-truth field snapshots, one CSV per time step.
    SimField {
        #[command(flatten)]
        common: Common,
        /// Grid cells per side of the snapshot.
        #[arg(long, default_value_t = 40)]
        resolution: usize,
    },
}

fn execution(sequential: bool) -> Execution {
    if sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    }
}

fn output_dir(cli: Option<&Path>, cfg: &ExperimentConfig) -> PathBuf {
    cli.map(Path::to_path_buf)
        .or_else(|| std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| cfg.output_dir.clone())
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })
}

fn solve(c: &Common) -> Result<()> {
    let cfg = ExperimentConfig::load(&c.config)?;
    let dir = output_dir(c.out.as_deref(), &cfg);
    let (inst, res) = solve_one(&cfg, c.trial, execution(c.sequential))?;
    create_dir(&dir)?;
    let ground = &inst.problem.ground;
    write_schedule(&dir.join("schedule.csv"), ground, &res.deployment)?;
    ground.write_csv(&dir.join("ground_set.csv"))?;
    let p = &inst.params;
    let entries = [
        ("trial", c.trial.to_string()),
        ("dimensions", format!("T={} L={} R={} P={} Q={}", p.horizon, p.active_times, p.robots, p.grid_p, p.grid_q)),
        ("ground_size", ground.len().to_string()),
        ("mutual_information", res.value.to_string()),
        ("selected", res.deployment.len().to_string()),
        ("total_cost", res.deployment.total_cost(ground).to_string()),
        ("oracle_calls", res.oracle_calls.to_string()),
        ("rho_iterations", res.trace.len().to_string()),
        ("monotonicity_warning", res.monotonicity_warning.to_string()),
        ("kernel", format!("{:?}", inst.kernel)),
        ("elapsed_seconds", res.elapsed.as_secs_f64().to_string()),
    ];
    write_run_summary(&dir.join("run_summary.txt"), &entries)?;
    println!(
        "greedy MI {:.6} with {} elements ({} oracle calls); wrote {}",
        res.value,
        res.deployment.len(),
        res.oracle_calls,
        dir.display()
    );
    Ok(())
}

fn oracle(c: &Common) -> Result<()> {
    let cfg = ExperimentConfig::load(&c.config)?;
    let dir = output_dir(c.out.as_deref(), &cfg);
    let (inst, res) = oracle_one(&cfg, c.trial, execution(c.sequential))?;
    create_dir(&dir)?;
    write_schedule(&dir.join("oracle_schedule.csv"), &inst.problem.ground, &res.optimal)?;
    let entries = [
        ("trial", c.trial.to_string()),
        ("ground_size", inst.problem.ground.len().to_string()),
        ("optimal_mutual_information", res.value.to_string()),
        ("selected", res.optimal.len().to_string()),
        ("visited", res.visited.to_string()),
        ("evaluations", res.evaluations.to_string()),
        ("elapsed_seconds", res.elapsed.as_secs_f64().to_string()),
    ];
    write_run_summary(&dir.join("oracle_summary.txt"), &entries)?;
    println!(
        "optimal MI {:.6} with {} elements ({} sets visited); wrote {}",
        res.value,
        res.optimal.len(),
        res.visited,
        dir.display()
    );
    Ok(())
}

fn monte_carlo(config: &Path, trials: Option<u64>, seed: Option<u64>, out: Option<&Path>, sequential: bool) -> Result<()> {
    let mut cfg = ExperimentConfig::load(config)?;
    if let Some(n) = trials {
        cfg.trials = n;
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let dir = output_dir(out, &cfg);
    cfg.output_dir = dir.clone();
    let mc = run_monte_carlo(&cfg, execution(sequential))?;
    let manifest = emit_outputs(&mc, &cfg, &dir)?;
    let completed = mc.completed().count();
    println!(
        "{} trials, {} with exact optimum, {} failed; bound {:.4}, {} violations",
        mc.records.len(),
        completed,
        mc.failures.len(),
        mc.bound,
        mc.bound_violations().len()
    );
    for path in manifest {
        println!("  {}", path.display());
    }
    if !mc.failures.is_empty() {
        log::warn!("{} trials failed; see failures.csv", mc.failures.len());
    }
    Ok(())
}

fn verify(config: &Path, trial: u64, samples: usize) -> Result<()> {
    let cfg = ExperimentConfig::load(config)?;
    let inst = build_trial(&cfg, trial)?;
    let ground = &inst.problem.ground;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(trial));
    let mut failed = Vec::new();
    for spec in &inst.problem.constraints.matroids {
        let (mode, report) = if ground.len() <= EXHAUSTIVE_CAP {
            ("exhaustive", verify_matroid_axioms(spec, ground, EXHAUSTIVE_CAP)?)
        } else {
            ("sampled", verify_matroid_axioms_sampled(spec, ground, samples, &mut rng)?)
        };
        match report {
            AxiomReport::Pass {
                checked_sets,
                independent_sets,
            } => println!(
                "PASS {} ({mode}, {checked_sets} sets, {independent_sets} independent)",
                spec.variant()
            ),
            AxiomReport::Violation(v) => {
                println!("FAIL {} ({mode}): {v:?}", spec.variant());
                failed.push(spec.variant().to_string());
            }
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Error::Verification(format!("axioms violated by {}", failed.join(", "))))
    }
}

fn sim_field(c: &Common, resolution: usize) -> Result<()> {
    let cfg = ExperimentConfig::load(&c.config)?;
    let dir = output_dir(c.out.as_deref(), &cfg);
    let inst = build_trial(&cfg, c.trial)?;
    let grid = GridSpec::new(resolution, resolution, cfg.field.width, cfg.field.height)?;
    // independent stream from the trial's training draw
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(c.trial) ^ 0x5eed_f1e1d);
    let states = simulate(&cfg.gmm, inst.params.horizon, &mut rng);
    create_dir(&dir)?;
    for (t, state) in states.iter().enumerate() {
        write_snapshot_csv(&dir.join(format!("field_t{t}.csv")), state, &cfg.gmm, &grid)?;
    }
    println!("wrote {} snapshots to {}", states.len(), dir.display());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Solve(c) => solve(&c),
        Command::Oracle(c) => oracle(&c),
        Command::Mc {
            config,
            trials,
            seed,
            out,
            sequential,
        } => monte_carlo(&config, trials, seed, out.as_deref(), sequential),
        Command::VerifyMatroids {
            config,
            trial,
            samples,
        } => verify(&config, trial, samples),
        Command::SimField { common, resolution } => sim_field(&common, resolution),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
