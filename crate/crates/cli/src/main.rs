use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use minishrink::device::{ObjectiveSet, UsrOrientation};
use minishrink::feature_model::RomPolicy;
use minishrink::search::{Algorithm, SearchParams};
use minishrink_cli::{
    parse_rom_policy, BenchOptions, CompareOptions, EvaluatorChoice, Failure, OptimizeOptions,
    Setup,
};

/// Multi-objective feature selection for shrinking a configurable
/// interpreter onto constrained devices.
#[derive(Parser)]
#[command(name = "minishrink", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Search for configurations of one application and write a report.
    Optimize {
        #[command(flatten)]
        setup: SetupArgs,
        #[command(flatten)]
        search: SearchArgs,
        /// Application spec file.
        #[arg(long)]
        app: PathBuf,
        /// `nsga2`, `hybrid-rs` or `sway`.
        #[arg(long, default_value = "nsga2")]
        algo: Algorithm,
    },
    /// Measure every feature and dependency group flipped on its own.
    Bench {
        #[command(flatten)]
        setup: SetupArgs,
        /// Application spec file.
        #[arg(long)]
        app: PathBuf,
        /// Measurement repetitions per configuration.
        #[arg(long, default_value_t = 10)]
        runs: usize,
    },
    /// Run several algorithms repeatedly and compare their fronts.
    Compare {
        #[command(flatten)]
        setup: SetupArgs,
        #[command(flatten)]
        search: SearchArgs,
        /// Application spec files; may be repeated.
        #[arg(long = "app", required = true)]
        apps: Vec<PathBuf>,
        /// Comma-separated algorithms.
        #[arg(long, value_delimiter = ',', default_value = "nsga2,hybrid-rs")]
        algo: Vec<Algorithm>,
        /// Independent runs per algorithm.
        #[arg(long, default_value_t = 30)]
        runs: usize,
    },
}

#[derive(Args)]
struct SetupArgs {
    /// Feature model file.
    #[arg(long)]
    model: PathBuf,
    /// Device catalog file.
    #[arg(long)]
    devices: Option<PathBuf>,
    /// Cost model for the simulated evaluator.
    #[arg(long)]
    costs: Option<PathBuf>,
    /// `simulated` or `external:CMD`.
    #[arg(long, default_value = "simulated")]
    evaluator: EvaluatorChoice,
    /// Seed of the simulated measurement noise.
    #[arg(long, default_value_t = 0)]
    noise_seed: u64,
    /// Repetitions per external measurement during a search.
    #[arg(long, default_value_t = 10)]
    measure_runs: usize,
    /// Seconds before an external evaluation is abandoned.
    #[arg(long, default_value_t = 600)]
    timeout: u64,
    /// `deactivate` or `activate_all_reset`; overrides the model file.
    #[arg(long, value_parser = parse_rom_policy)]
    rom_policy: Option<RomPolicy>,
    /// `as_written` or `slack`.
    #[arg(long, default_value = "as_written")]
    usr_orientation: UsrOrientation,
    /// Worker threads for evaluating a batch.
    #[arg(long, default_value_t = 1)]
    parallel: usize,
    /// Persistent evaluation cache; `MINISHRINK_CACHE` takes precedence.
    #[arg(long)]
    cache: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

impl SetupArgs {
    fn setup(&self) -> Setup {
        Setup {
            model: self.model.clone(),
            devices: self.devices.clone(),
            costs: self.costs.clone(),
            evaluator: self.evaluator.clone(),
            noise_seed: self.noise_seed,
            measure_runs: self.measure_runs,
            timeout: Duration::from_secs(self.timeout),
            rom_policy: self.rom_policy,
            orientation: self.usr_orientation,
            parallel: self.parallel.max(1),
            cache: self.cache.clone(),
        }
    }
}

#[derive(Args)]
struct SearchArgs {
    /// Search seed; compare run `r` uses `seed + r`.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Distinct configurations a run may evaluate.
    #[arg(long, default_value_t = 250)]
    budget: usize,
    /// NSGA-II population size.
    #[arg(long, default_value_t = 10)]
    population: usize,
    /// Crossover probability.
    #[arg(long, default_value_t = 0.8)]
    cxpb: f64,
    /// Probability that an offspring is mutated.
    #[arg(long, default_value_t = 0.1)]
    mutpb: f64,
    /// Comma-separated subset of udr, cs, mu, et.
    #[arg(long, default_value = "udr,cs,mu,et")]
    objectives: ObjectiveSet,
    /// SWAY candidate pool size.
    #[arg(long, default_value_t = 10_000)]
    pool_size: usize,
}

impl SearchArgs {
    fn params(&self) -> SearchParams {
        SearchParams {
            budget: self.budget,
            population: self.population,
            crossover_prob: self.cxpb,
            mutation_prob: self.mutpb,
            seed: self.seed,
            objectives: self.objectives.clone(),
            pool_size: self.pool_size,
            ..SearchParams::default()
        }
    }
}

fn execute(command: Command) -> Result<(), Failure> {
    match command {
        Command::Optimize { setup, search, app, algo } => {
            let opts = OptimizeOptions { setup: setup.setup(), app, algorithm: algo, params: search.params() };
            let (report, timing) = minishrink_cli::optimize(&opts)?;
            minishrink_cli::write_optimize(&report, &timing, &setup.out)?;
            let s = &report.summary;
            println!(
                "{} {}: {} solutions from {} evaluations, devices {} -> {} (NDA {})",
                report.app,
                report.algorithm,
                report.archive.len(),
                report.evaluations,
                s.devices_before,
                s.devices_after,
                s.nda
            );
        }
        Command::Bench { setup, app, runs } => {
            let opts = BenchOptions { setup: setup.setup(), app, runs };
            let rows = minishrink_cli::bench(&opts)?;
            minishrink_cli::write_bench(&rows, &setup.out)?;
            let skipped = rows.iter().filter(|r| r.measured.is_none()).count();
            println!("{} rows, {} skipped", rows.len(), skipped);
        }
        Command::Compare { setup, search, apps, algo, runs } => {
            let opts = CompareOptions {
                setup: setup.setup(),
                apps,
                algorithms: algo,
                runs,
                params: search.params(),
            };
            let report = minishrink_cli::compare(&opts)?;
            minishrink_cli::write_compare(&report, &setup.out)?;
            for row in &report.summary {
                println!(
                    "{} {}: PFS {} ({:.2}%), p = {:.4}, delta = {:.3} ({})",
                    row.app, row.algorithm, row.pfs_count, row.pfs_pct, row.u_p_value,
                    row.cliffs_delta, row.magnitude
                );
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if e.use_stderr() => {
            let _ = e.print();
            return ExitCode::from(3);
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("minishrink: {failure}");
            ExitCode::from(failure.exit_code() as u8)
        }
    }
}
