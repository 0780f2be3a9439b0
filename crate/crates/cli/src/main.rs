//! Command-line surface of the polymer laboratory.

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use lgpoly::harness::{content_hash, run_phase_scan, workers_from_env, ExperimentConfig};
use lgpoly::operator::{inverse_identity_report, neg_log_lambda1, spectrum_small, DENSE_CAP};
use lgpoly::polymer::{
    corner_sets, max_free_energy_exact, max_free_energy_restricted, FreeEnergyMode,
    MaxFreeEnergyResult,
};
use lgpoly::sampler::{sample_field, WeightField};
use lgpoly::specialfn::{PolymerParams, ScaleFunctions};
use lgpoly::tw::TwEvaluator;
use std::path::PathBuf;
use std::time::Instant;

#[derive(Parser)]
#[command(name = "lgpoly", version, about = "log-gamma polymer laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the model constants for a shape parameter as JSON.
    Constants {
        #[arg(long)]
        theta: f64,
    },
    /// Sample an inverse-gamma weight field into a binary file.
    Sample(SampleArgs),
    /// Maximal free energy of a stored field (exact or corner mode).
    FreeEnergy(FreeEnergyArgs),
    /// Operator checks: inverse identity, -log lambda1, dense spectrum.
    OperatorCheck(OperatorArgs),
    /// Tabulate F_GUE on a grid into a CSV file.
    Tw(TwArgs),
    /// Run a Monte Carlo phase scan from a TOML config.
    PhaseScan {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Args)]
struct SampleArgs {
    #[arg(long)]
    theta: f64,
    #[arg(long)]
    rows: usize,
    #[arg(long)]
    cols: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FreeEnergyArgs {
    #[arg(long)]
    field: PathBuf,
    /// Exact O(N^4) mode (the default).
    #[arg(long, conflicts_with = "corners")]
    exact: bool,
    /// Corner-restricted mode with the given delta in (0, 1/3).
    #[arg(long)]
    corners: Option<f64>,
    /// Override the exact-mode N cap (default 256).
    #[arg(long)]
    exact_cap: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct OperatorArgs {
    #[arg(long)]
    field: PathBuf,
    /// identity | lambda1 | spectrum
    #[arg(long)]
    mode: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TwArgs {
    /// Grid as a:b:step, e.g. -6:4:0.1
    #[arg(long, allow_hyphen_values = true)]
    grid: String,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Constants { theta } => constants(theta),
        Command::Sample(args) => sample(args),
        Command::FreeEnergy(args) => free_energy(args),
        Command::OperatorCheck(args) => operator_check(args),
        Command::Tw(args) => tw_table(args),
        Command::PhaseScan { config } => phase_scan(config),
    }
}

fn constants(theta: f64) -> Result<()> {
    let params = PolymerParams::new(theta)?;
    let sf = ScaleFunctions::new(theta)?;
    // 15 significant digits
    println!(
        "{{\n  \"theta\": {:.14e},\n  \"theta_c\": {:.14e},\n  \"psi_half_theta\": {:.14e},\n  \"sigma_theta\": {:.14e},\n  \"h_one\": {:.14e},\n  \"sigma_one\": {:.14e}\n}}",
        theta,
        params.theta_c,
        params.psi_half_theta,
        params.sigma_theta,
        sf.h(1.0)?,
        sf.sigma(1.0)?
    );
    Ok(())
}

fn sample(args: SampleArgs) -> Result<()> {
    let field = sample_field(args.theta, args.rows, args.cols, args.seed)?;
    field
        .write_to_path(&args.out)
        .with_context(|| format!("writing {}", args.out.display()))?;
    eprintln!(
        "wrote {}x{} field (theta={}, seed={}) to {}",
        args.rows,
        args.cols,
        args.theta,
        args.seed,
        args.out.display()
    );
    Ok(())
}

fn free_energy(args: FreeEnergyArgs) -> Result<()> {
    let field = WeightField::read_from_path(&args.field)
        .with_context(|| format!("reading {}", args.field.display()))?;
    let started = Instant::now();
    let result: MaxFreeEnergyResult = match args.corners {
        Some(delta) => {
            let n = field.square_side()?;
            let (sw, ne) = corner_sets(n, delta)?;
            let mut r = max_free_energy_restricted(&field, &sw, &ne)?;
            r.delta = Some(delta);
            r
        }
        None => match args.exact_cap {
            Some(cap) => lgpoly::polymer::max_free_energy_exact_capped(&field, cap)?,
            None => max_free_energy_exact(&field)?,
        },
    };
    let elapsed_ms = started.elapsed().as_secs_f64() * 1e3;
    let report = serde_json::json!({
        "value": result.value,
        "arg_start": result.arg_start,
        "arg_end": result.arg_end,
        "mode": match result.mode {
            FreeEnergyMode::Exact => "exact",
            FreeEnergyMode::CornerRestricted => "corners",
        },
        "delta": result.delta,
        "elapsed_ms": elapsed_ms,
        "N": field.rows,
        "theta": field.theta,
        "seed": field.seed,
    });
    std::fs::write(&args.out, serde_json::to_string_pretty(&report)?)?;
    println!("{}", report["value"]);
    Ok(())
}

fn operator_check(args: OperatorArgs) -> Result<()> {
    let field = WeightField::read_from_path(&args.field)?;
    let n = field.square_side()?;
    let started = Instant::now();
    let report = match args.mode.as_str() {
        "identity" => {
            if n > 8 {
                bail!("identity mode is float-range guarded at N <= 8, got N = {n}");
            }
            let rep = inverse_identity_report(&field)?;
            serde_json::json!({
                "mode": "identity",
                "ok": rep.all_ok,
                "pairs_checked": rep.pairs_checked,
                "pairs_ok": rep.pairs_ok,
                "max_rel_err": rep.max_rel_err,
                "rel_tolerance": 1e-8,
                "abs_tolerance_zero_case": 1e-12,
            })
        }
        "lambda1" => {
            let mut res = neg_log_lambda1(&field)?;
            let fe = max_free_energy_exact(&field)?;
            res.attach_sandwich(fe.value, n);
            serde_json::json!({
                "mode": "lambda1",
                "ok": res.sandwich_ok,
                "neg_log_lambda1": res.neg_log_lambda1,
                "f_n": res.f_n,
                "sandwich_upper": fe.value + 4.0 * (n as f64).ln(),
                "iterations": res.iterations,
                "residual": res.residual,
                "converged": res.converged,
                "tolerance": 1e-6,
            })
        }
        "spectrum" => {
            if n > DENSE_CAP {
                bail!("spectrum mode is dense and capped at N <= {DENSE_CAP}");
            }
            let vals = spectrum_small(&field)?;
            let log_prod: f64 = vals.iter().map(|v| v.ln()).sum();
            let log_det: f64 = -field.log_weights().iter().sum::<f64>();
            let det_ok = (log_prod - log_det).abs() <= 1e-6 * log_det.abs().max(1.0);
            serde_json::json!({
                "mode": "spectrum",
                "ok": det_ok,
                "singular_values": vals,
                "log_product": log_prod,
                "log_determinant": log_det,
                "tolerance": 1e-6,
            })
        }
        other => bail!("unknown mode {other:?}; expected identity|lambda1|spectrum"),
    };
    let mut report = report;
    report["elapsed_ms"] = serde_json::json!(started.elapsed().as_secs_f64() * 1e3);
    std::fs::write(&args.out, serde_json::to_string_pretty(&report)?)?;
    println!("{}", report["ok"]);
    Ok(())
}

fn tw_table(args: TwArgs) -> Result<()> {
    let parts: Vec<&str> = args.grid.split(':').collect();
    if parts.len() != 3 {
        bail!("grid must be a:b:step, got {:?}", args.grid);
    }
    let a: f64 = parts[0].parse().context("grid start")?;
    let b: f64 = parts[1].parse().context("grid end")?;
    let step: f64 = parts[2].parse().context("grid step")?;
    if !(step > 0.0) || b < a {
        bail!("need a <= b and step > 0");
    }
    let eval = TwEvaluator::new(lgpoly::tw::DEFAULT_ORDER, lgpoly::tw::DEFAULT_CUTOFF)?;
    let mut out = String::from("x,f_gue\n");
    let mut i = 0usize;
    loop {
        let x = a + i as f64 * step;
        if x > b + 1e-12 {
            break;
        }
        // 12 significant digits
        out.push_str(&format!("{x},{:.11e}\n", eval.f_gue(x)));
        i += 1;
    }
    std::fs::write(&args.out, out)?;
    Ok(())
}

fn phase_scan(config_path: PathBuf) -> Result<()> {
    let raw = std::fs::read(&config_path)
        .with_context(|| format!("reading {}", config_path.display()))?;
    let cfg = ExperimentConfig::from_toml_str(std::str::from_utf8(&raw)?)?;
    let workers = workers_from_env();
    let mut out = run_phase_scan(&cfg, workers)?;
    out.summary.input_hash = Some(content_hash(&raw));
    out.write_files()?;
    eprintln!(
        "phase scan: {} records ({} failed) in {} ms -> {} / {}",
        out.summary.total_records,
        out.summary.failed_records,
        out.summary.wall_clock_ms,
        cfg.csv_out,
        cfg.summary_out
    );
    Ok(())
}
