//! Command-line front end for the operator-splitting toolkit.
//!
//! Exit codes: 0 success, 2 certification failure, 3 divergence,
//! 4 configuration or usage error, 1 anything else.

use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use opsplit::splitting::{
    certify_multi, certify_two_op, multi_adr_run, multi_adr_run_switched, AdrParams,
    RegimeCertificate, DEFAULT_EPS, DEFAULT_MAX_ITER,
};
use opsplit::Vector;
use opsplit_cli::config::ExperimentConfig;
use opsplit_cli::experiment::{
    run_compare, run_experiment, summarize, write_cell_csv, write_summary_csv,
};
use opsplit_cli::instance::AffineInstance;
use opsplit_cli::{exit_code, CliError, CliResult};

#[derive(Parser)]
#[command(name = "opsplit", version, about = "Adaptive splitting methods for comonotone inclusions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the step-signal denoising benchmark and write per-cell CSV logs.
    Denoise {
        /// TOML config file; built-in defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory, overriding the config's `out_dir`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Certify a parameter tuple against declared comonotonicity moduli.
    ValidateParams {
        /// Comma-separated moduli, one per operator (last block last).
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true, required = true)]
        sigma: Vec<f64>,
        #[arg(long)]
        gamma: f64,
        /// Second stepsize; exactly one of --delta / --lambda, or both if consistent.
        #[arg(long)]
        delta: Option<f64>,
        /// Relaxation parameter implying delta = gamma (lambda - 1).
        #[arg(long)]
        lambda: Option<f64>,
        /// Relaxation weight; defaults to delta / (gamma + delta).
        #[arg(long)]
        kappa: Option<f64>,
        /// Comma-separated splitting weights for the weight-certified branch.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        theta: Option<Vec<f64>>,
    },
    /// Solve an affine inclusion instance with the adaptive iteration.
    RunInclusion {
        /// Instance file (see the documented plain-text grammar).
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        gamma: f64,
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long)]
        lambda: Option<f64>,
        /// Relaxation weight; defaults to delta / (gamma + delta).
        #[arg(long)]
        kappa: Option<f64>,
        #[arg(long, default_value_t = DEFAULT_MAX_ITER)]
        max_iter: usize,
        #[arg(long, default_value_t = DEFAULT_EPS)]
        eps: f64,
        /// Evaluate the shared block before the leading blocks.
        #[arg(long)]
        switched: bool,
        /// Write a per-iteration trace CSV here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Race the specialized method against the sequential baseline at a fixed horizon.
    Compare {
        /// TOML config file; built-in defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 2000)]
        horizon: usize,
    },
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 4,
            };
            let _ = err.print();
            std::process::exit(code);
        }
    };
    match run(cli) {
        Ok(code) => std::process::exit(code),
        Err(err) => {
            eprintln!("error: {err}");
            std::process::exit(exit_code(&err));
        }
    }
}

fn run(cli: Cli) -> CliResult<i32> {
    match cli.command {
        Command::Denoise { config, out } => denoise(config, out),
        Command::ValidateParams { sigma, gamma, delta, lambda, kappa, theta } => {
            validate_params(&sigma, gamma, delta, lambda, kappa, theta.as_deref())
        }
        Command::RunInclusion {
            instance,
            gamma,
            delta,
            lambda,
            kappa,
            max_iter,
            eps,
            switched,
            out,
        } => run_inclusion(&instance, gamma, delta, lambda, kappa, max_iter, eps, switched, out),
        Command::Compare { config, horizon } => compare(config, horizon),
    }
}

fn load_config(path: Option<PathBuf>) -> CliResult<ExperimentConfig> {
    let cfg = match path {
        Some(p) => ExperimentConfig::load(&p)?,
        None => ExperimentConfig::default(),
    };
    cfg.validate()?;
    Ok(cfg)
}

/// Resolves (gamma, delta | lambda, kappa?) into a full parameter tuple.
fn resolve_params(
    gamma: f64,
    delta: Option<f64>,
    lambda: Option<f64>,
    kappa: Option<f64>,
) -> CliResult<AdrParams> {
    let delta = match (delta, lambda) {
        (Some(d), None) => d,
        (None, Some(l)) => {
            if !(l > 1.0 && l.is_finite()) {
                return Err(CliError::Config(format!("--lambda must exceed 1, got {l}")));
            }
            gamma * (l - 1.0)
        }
        (Some(d), Some(l)) => {
            let implied = gamma * (l - 1.0);
            if (d - implied).abs() > 1e-9 * d.abs().max(implied.abs()).max(1.0) {
                return Err(CliError::Config(format!(
                    "--delta {d} and --lambda {l} disagree: the coupling implies delta = {implied}"
                )));
            }
            d
        }
        (None, None) => {
            return Err(CliError::Config("give --delta or --lambda".into()));
        }
    };
    let params = match kappa {
        Some(k) => AdrParams::from_stepsizes(gamma, delta, k)?,
        None => AdrParams::with_special_kappa(gamma, delta)?,
    };
    Ok(params)
}

fn print_certificate(cert: &RegimeCertificate) {
    let verdict = if cert.is_certified() { "certified" } else { "NOT certified" };
    println!("condition: {} ({verdict})", cert.condition);
    println!("kappa_star: {}", cert.kappa_star);
    if let Some(bounds) = &cert.kappa_i_star {
        let list: Vec<String> = bounds.iter().map(f64::to_string).collect();
        println!("per-block kappa bounds: [{}]", list.join(", "));
    }
    if let Some(theta) = &cert.theta {
        let list: Vec<String> = theta.iter().map(f64::to_string).collect();
        println!("splitting weights: [{}]", list.join(", "));
    }
    println!("strong shadow convergence: {}", cert.strong_shadow);
    for note in &cert.diagnostics {
        println!("  - {note}");
    }
}

fn validate_params(
    sigma: &[f64],
    gamma: f64,
    delta: Option<f64>,
    lambda: Option<f64>,
    kappa: Option<f64>,
    theta: Option<&[f64]>,
) -> CliResult<i32> {
    if sigma.len() < 2 {
        return Err(CliError::Config(format!(
            "--sigma needs at least 2 moduli, got {}",
            sigma.len()
        )));
    }
    let params = resolve_params(gamma, delta, lambda, kappa)?;
    println!(
        "parameters: gamma = {}, delta = {}, lambda = {}, mu = {}, kappa = {}",
        params.gamma, params.delta, params.lambda, params.mu, params.kappa
    );
    let list: Vec<String> = sigma.iter().map(f64::to_string).collect();
    println!("moduli: [{}]", list.join(", "));
    let cert = if sigma.len() == 2 {
        if theta.is_some() {
            return Err(CliError::Config(
                "--theta applies to 3 or more operators".into(),
            ));
        }
        certify_two_op(sigma[0], sigma[1], &params)?
    } else {
        certify_multi(sigma, &params, theta)?
    };
    print_certificate(&cert);
    Ok(if cert.is_certified() { 0 } else { 2 })
}

#[allow(clippy::too_many_arguments)]
fn run_inclusion(
    instance: &std::path::Path,
    gamma: f64,
    delta: Option<f64>,
    lambda: Option<f64>,
    kappa: Option<f64>,
    max_iter: usize,
    eps: f64,
    switched: bool,
    out: Option<PathBuf>,
) -> CliResult<i32> {
    let inst = AffineInstance::load(instance)?;
    let ops = inst.resolvent_ops()?;
    let params = resolve_params(gamma, delta, lambda, kappa)?;
    println!(
        "instance: {} operators on dimension {}",
        inst.operator_count(),
        inst.dim
    );

    // The certificate is advisory here: declared moduli may be absent or
    // partial, and the iteration is still well defined without them.
    match certify_multi(&inst.sigmas(), &params, None) {
        Ok(cert) => {
            print_certificate(&cert);
            if !cert.is_certified() {
                println!("warning: running outside the certified regime");
            }
        }
        Err(err) => println!("certificate unavailable: {err}"),
    }

    let x0 = vec![Vector::zeros(inst.dim); inst.operator_count() - 1];
    let trace = if switched {
        multi_adr_run_switched(&ops, &params, &x0, max_iter, eps)?
    } else {
        multi_adr_run(&ops, &params, &x0, max_iter, eps)?
    };
    if trace.converged {
        println!("converged in {} iterations", trace.iterations);
    } else {
        println!(
            "stopped after {} iterations without meeting eps = {eps}",
            trace.iterations
        );
    }
    if let Some(shadow) = trace.shadow() {
        if shadow.len() <= 12 {
            let list: Vec<String> = shadow.iter().map(f64::to_string).collect();
            println!("shadow point: [{}]", list.join(", "));
        } else {
            println!("shadow point norm: {}", shadow.norm());
        }
    }
    if let Some(path) = out {
        let mut text = String::from("iter,step_norm,elapsed_ms\n");
        for (k, (step, ms)) in trace.step_norms.iter().zip(&trace.elapsed_ms).enumerate() {
            text.push_str(&format!("{},{},{}\n", k + 1, step, ms));
        }
        std::fs::write(&path, text)?;
        println!("trace written to {}", path.display());
    }
    Ok(0)
}

fn denoise(config: Option<PathBuf>, out: Option<PathBuf>) -> CliResult<i32> {
    let mut cfg = load_config(config)?;
    if let Some(dir) = out {
        cfg.out_dir = dir;
    }
    let report = run_experiment(&cfg)?;

    let mut failures: Vec<i32> = Vec::new();
    for cell in &report.cells {
        match &cell.outcome {
            Ok(done) => {
                let path = write_cell_csv(&cfg.out_dir, &cfg, done)?;
                let status = if done.converged { "converged" } else { "hit max_iter" };
                let mae = done
                    .final_mae
                    .map(|v| format!("{v:.4}"))
                    .unwrap_or_else(|| "-".into());
                println!(
                    "{} seed {}: {} in {} iterations, residual {:.3e}, mae {}, log {}",
                    cell.algorithm.name(),
                    cell.seed,
                    status,
                    done.iterations,
                    done.final_residual,
                    mae,
                    path.display()
                );
            }
            Err(err) => {
                eprintln!("{} seed {}: error: {err}", cell.algorithm.name(), cell.seed);
                failures.push(exit_code(err));
            }
        }
    }

    write_summary_csv(&cfg.out_dir, &cfg, &report)?;
    println!();
    println!(
        "{:<10} {:>5} {:>9} {:>12} {:>10} {:>13} {:>9} {:>9}",
        "algorithm", "cells", "converged", "mean_iters", "std_iters", "mean_residual", "mean_mae", "std_mae"
    );
    for row in summarize(&cfg, &report) {
        println!(
            "{:<10} {:>5} {:>9} {:>12.1} {:>10.1} {:>13.3e} {:>9.4} {:>9.4}",
            row.algorithm.name(),
            row.cells,
            row.converged,
            row.mean_iterations,
            row.std_iterations,
            row.mean_residual,
            row.mean_mae,
            row.std_mae
        );
    }
    println!("summary written to {}", cfg.out_dir.join("summary.csv").display());

    if failures.contains(&2) {
        return Ok(2);
    }
    if failures.contains(&3) {
        return Ok(3);
    }
    if let Some(&code) = failures.first() {
        return Ok(code);
    }
    Ok(0)
}

fn compare(config: Option<PathBuf>, horizon: usize) -> CliResult<i32> {
    let cfg = load_config(config)?;
    let rows = run_compare(&cfg, horizon)?;
    println!(
        "{:>6} {:>16} {:>16}  winner",
        "seed", "alg3", "gs_admm"
    );
    let mut wins = 0;
    for row in &rows {
        let winner = if row.special <= row.baseline { "alg3" } else { "gs_admm" };
        if row.special <= row.baseline {
            wins += 1;
        }
        println!("{:>6} {:>16.6e} {:>16.6e}  {winner}", row.seed, row.special, row.baseline);
    }
    println!(
        "alg3 reaches the smaller residual on {wins}/{} seeds after {horizon} iterations",
        rows.len()
    );
    Ok(0)
}
