//! Command-line driver: sweeps, curves, scans, bound verification, and the
//! weight-container round trip.
//!
//! Exit codes: 0 on success, 1 when a verification check fails, 2 on
//! usage or configuration errors.

mod config;

use bottlenet_core::harness::{
    bound_names, run_bound_suite, run_hessian_scan, run_perturbation_curves, run_width_sweep,
    write_atomic,
};
use bottlenet_core::net::{load_weights, save_sidecar, save_weights, InputVector, WeightSet};
use bottlenet_core::{Error, Result};
use clap::{Args, Parser, Subcommand};
use config::{ConfigMap, RunConfig};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

#[derive(Parser)]
#[command(
    name = "bottlenet",
    about = "Bottleneck linear networks: residual sweeps, perturbation curves, and bound verification",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// Run configuration file (key = value lines under [section] headers).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override one config key, e.g. --set sweep.seeds=4 (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,

    /// Output directory for reports.
    #[arg(long, default_value = "out", global = true)]
    out: PathBuf,

    /// Master seed; fully determines all outputs.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads (0 = automatic).
    #[arg(long, default_value_t = 0, global = true)]
    jobs: usize,

    /// Named parameter preset (default | curves-large).
    #[arg(long, global = true)]
    preset: Option<String>,

    /// Print the fully resolved configuration.
    #[arg(short, long, global = true)]
    verbose: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Width sweep: jet/surrogate residual decay and the fitted slope.
    Sweep(CommonArgs),
    /// Perturbation curves along 1D weight-space lines.
    Perturb(CommonArgs),
    /// Second-derivative block-structure scan.
    Hessian(CommonArgs),
    /// Bound suite plus concentration tail checks.
    Verify {
        #[command(flatten)]
        common: CommonArgs,
        /// List the bound names and exit.
        #[arg(long)]
        list: bool,
    },
    /// Initialize weights for the configured architecture and write the
    /// binary container plus JSON sidecar.
    InitDump(CommonArgs),
    /// Load a weight container and evaluate the network on an input.
    Eval {
        #[command(flatten)]
        common: CommonArgs,
        /// Weight container path.
        #[arg(long)]
        weights: PathBuf,
        /// Comma-separated input vector (defaults to the first basis
        /// vector).
        #[arg(long)]
        input: Option<String>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn resolve(common: &CommonArgs) -> Result<RunConfig> {
    let mut map = match &common.config {
        Some(path) => ConfigMap::from_file(path)?,
        None => ConfigMap::default(),
    };
    for assignment in &common.set {
        map.set(assignment)?;
    }
    RunConfig::resolve(map, common.preset.as_deref(), common.seed)
}

fn with_pool<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    if jobs == 0 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("cannot build worker pool: {e}")))?;
    Ok(pool.install(f))
}

/// Timestamped log sidecar with the fully resolved run configuration;
/// the only artifact carrying wall-clock times.
fn write_log<C: serde::Serialize>(out: &Path, resolved: &C, lines: &[String]) -> Result<()> {
    std::fs::create_dir_all(out)?;
    let stamp = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let mut text = format!("unix_time {stamp}\n");
    for l in lines {
        text.push_str(l);
        text.push('\n');
    }
    let echo = serde_json::to_string(resolved).map_err(|e| Error::Format(e.to_string()))?;
    text.push_str("resolved_config ");
    text.push_str(&echo);
    text.push('\n');
    write_atomic(&out.join("run.log"), text.as_bytes())?;
    Ok(())
}

fn dispatch(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Sweep(common) => {
            let cfg = resolve(&common)?;
            cfg.sweep.validate()?;
            if common.verbose {
                println!("{}", serde_json::to_string_pretty(&cfg.sweep).unwrap());
            }
            let report = with_pool(common.jobs, || run_width_sweep(&cfg.sweep))??;
            report.write(&common.out)?;
            let slope = report.slope.as_ref().map(|s| s.value).unwrap_or(f64::NAN);
            let rate = report.bound_pass_rate();
            let ok = report.slope_in_band() && rate >= 0.95;
            println!(
                "sweep: slope {slope:.4} (band {:?}), remainder-bound rate {rate:.3} -> {}",
                report.config.slope_band,
                if ok { "ok" } else { "FAIL" }
            );
            write_log(
                &common.out,
                &cfg.sweep,
                &[format!("sweep slope {slope} rate {rate} ok {ok}")],
            )?;
            Ok(if ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
        Command::Perturb(common) => {
            let cfg = resolve(&common)?;
            cfg.curves.validate()?;
            if common.verbose {
                println!("{}", serde_json::to_string_pretty(&cfg.curves).unwrap());
            }
            let report = with_pool(common.jobs, || run_perturbation_curves(&cfg.curves))??;
            report.write(&common.out)?;
            println!(
                "perturb: {} records, tanh/identity contrast {:.1}",
                report.records.len(),
                report.checks.contrast_ratio
            );
            write_log(
                &common.out,
                &cfg.curves,
                &[format!("perturb records {}", report.records.len())],
            )?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Hessian(common) => {
            let cfg = resolve(&common)?;
            cfg.hessian.validate()?;
            if common.verbose {
                println!("{}", serde_json::to_string_pretty(&cfg.hessian).unwrap());
            }
            let report = with_pool(common.jobs, || run_hessian_scan(&cfg.hessian))??;
            report.write(&common.out)?;
            let ok = report.within_rate >= 0.90
                && report.cross_rate >= 0.95
                && report.max_same_slot == 0.0;
            println!(
                "hessian: within rate {:.3}, cross rate {:.3}, same-slot max {} -> {}",
                report.within_rate,
                report.cross_rate,
                report.max_same_slot,
                if ok { "ok" } else { "FAIL" }
            );
            write_log(&common.out, &cfg.hessian, &[format!("hessian ok {ok}")])?;
            Ok(if ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
        Command::Verify { common, list } => {
            if list {
                for name in bound_names() {
                    println!("{name}");
                }
                return Ok(ExitCode::SUCCESS);
            }
            let cfg = resolve(&common)?;
            cfg.verify.validate()?;
            if common.verbose {
                println!("{}", serde_json::to_string_pretty(&cfg.verify).unwrap());
            }
            let report = with_pool(common.jobs, || run_bound_suite(&cfg.verify))??;
            report.write(&common.out)?;
            for r in &report.rates {
                println!(
                    "verify: {:<24} rate {:.3} (required {:.2}) {}",
                    r.bound_name,
                    r.rate,
                    r.required,
                    if r.passed { "ok" } else { "FAIL" }
                );
            }
            for t in &report.tails {
                println!(
                    "verify: tail {:?} rate {:.4} bound {:.4} {}",
                    t.kind,
                    t.empirical,
                    t.bound,
                    if t.satisfied { "ok" } else { "FAIL" }
                );
            }
            write_log(
                &common.out,
                &cfg.verify,
                &[format!("verify all_passed {}", report.all_passed)],
            )?;
            Ok(if report.all_passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
        Command::InitDump(common) => {
            let cfg = resolve(&common)?;
            let spec = cfg.network.spec(cfg.hidden)?;
            let seed = common.seed.unwrap_or(42);
            let w = WeightSet::init(&spec, seed);
            std::fs::create_dir_all(&common.out)?;
            let bin = common.out.join("weights.bin");
            let side = common.out.join("weights.json");
            save_weights(&w, &bin)?;
            save_sidecar(&spec, Some(seed), &side)?;
            println!("wrote {} and {}", bin.display(), side.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Eval {
            common,
            weights,
            input,
        } => {
            let w = load_weights(&weights)?;
            if common.verbose {
                eprintln!(
                    "loaded {} ({} blocks, hidden {})",
                    weights.display(),
                    w.spec().blocks,
                    w.spec().hidden
                );
            }
            let x = match input {
                Some(text) => {
                    let vals: Vec<f64> = text
                        .split(',')
                        .map(|p| {
                            p.trim()
                                .parse()
                                .map_err(|_| Error::InvalidConfig(format!("bad input entry `{p}`")))
                        })
                        .collect::<Result<_>>()?;
                    InputVector::new(vals)?
                }
                None => InputVector::basis(w.spec().input_dim(), 1.0),
            };
            let out = w.forward(&x)?;
            for v in out {
                println!("{v}");
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}
