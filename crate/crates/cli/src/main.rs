use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use fraclab_core::metrics::{fit_time_exponent, l1_sigma_norm, parabolic_holder_seminorm};
use fraclab_core::{Checkpoint, LabError, ParabolicCylinder, Result};
use fraclab_cli::config::{ScenarioConfig, SCENARIOS};
use fraclab_cli::run::{exit_code, run_scenario, EXIT_OK};
use fraclab_cli::verify::{coverage_table, verify_exit_code, verify_suite, VerifyOptions};

#[derive(Parser)]
#[command(name = "lab", version, about = "Nonlocal parabolic regularity laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a scenario, measure it and judge its thresholds.
    Run {
        /// Scenario JSON file or built-in scenario name.
        config: PathBuf,
        /// Override the output directory.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Run the seeded invariant suites.
    Verify {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Inject a kernel outside the ellipticity band.
        #[arg(long)]
        corrupt_kernel: bool,
    },
    /// Evaluate one metric on a stored checkpoint.
    Metrics {
        checkpoint: PathBuf,
        #[arg(long, value_enum)]
        kind: MetricKind,
        #[arg(long, default_value_t = 0.5)]
        alpha: f64,
        /// Cylinder as `x,t,r`.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true, default_value = "0,0,0.5")]
        cyl: Vec<f64>,
    },
    /// List the built-in scenarios.
    Presets,
}

#[derive(Clone, Copy, ValueEnum)]
enum MetricKind {
    Holder,
    TimeExponent,
    L1Sigma,
}

fn init_threads() -> Result<()> {
    let Ok(v) = std::env::var("LAB_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .parse()
        .map_err(|_| LabError::Config(format!("LAB_THREADS must be a positive integer, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| LabError::Config(e.to_string()))
}

fn metrics(path: &Path, kind: MetricKind, alpha: f64, cyl: &[f64]) -> Result<()> {
    let &[x, t, r] = cyl else {
        return Err(LabError::Config(format!("--cyl expects x,t,r, got {cyl:?}")));
    };
    let ck = Checkpoint::load(path)?;
    let field = ck.to_field()?;
    let q = ParabolicCylinder::new(x, t, r, ck.sigma)?;
    match kind {
        MetricKind::Holder => {
            println!("{}", parabolic_holder_seminorm(&field, &q, alpha)?);
        }
        MetricKind::TimeExponent => {
            let fit = fit_time_exponent(&field, x, &q)?;
            println!("{} (residual {}, {} levels)", fit.exponent, fit.residual, fit.levels.len());
        }
        MetricKind::L1Sigma => {
            println!("{}", l1_sigma_norm(&field, field.n_times() - 1, ck.sigma)?);
        }
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<i32> {
    init_threads()?;
    match cli.command {
        Command::Run { config, output } => {
            let mut cfg = ScenarioConfig::load(&config)?;
            if let Some(o) = output {
                cfg.output = o;
            }
            let out = run_scenario(&cfg)?;
            for v in &out.summary.verdicts {
                println!("{} {} = {}", if v.pass { "PASS" } else { "FAIL" }, v.metric, v.value);
            }
            println!(
                "{}: {} in {:.1}s (budget {}s)",
                cfg.scenario,
                if out.summary.pass { "pass" } else { "fail" },
                out.summary.runtime_secs,
                cfg.budget_secs
            );
            Ok(out.exit_code())
        }
        Command::Verify {
            seed,
            corrupt_kernel,
        } => {
            let verdicts = verify_suite(VerifyOptions {
                seed,
                corrupt_kernel,
            });
            print!("{}", coverage_table());
            for v in &verdicts {
                let state = if v.passed() { "PASS" } else { "FAIL" };
                println!("{state} {} ({} checks)", v.suite, v.checks);
                for f in v.failures.iter().take(5) {
                    println!("  {f}");
                }
            }
            Ok(verify_exit_code(&verdicts))
        }
        Command::Metrics {
            checkpoint,
            kind,
            alpha,
            cyl,
        } => {
            metrics(&checkpoint, kind, alpha, &cyl)?;
            Ok(EXIT_OK)
        }
        Command::Presets => {
            for (name, _) in SCENARIOS {
                println!("{name}");
            }
            Ok(EXIT_OK)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = dispatch(cli).unwrap_or_else(|e| {
        eprintln!("error: {e}");
        exit_code(&e)
    });
    ExitCode::from(code as u8)
}
