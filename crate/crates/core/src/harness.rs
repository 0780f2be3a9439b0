//! Monte Carlo experiment runner and persistence.
//!
//! A phase scan walks the (θ, N) grid, draws `replications` independent
//! fields per cell, and records the maximal free energy, the corner
//! free energy, its rescaled version and (optionally) -log λ₁.
//! Replicate seeds are derived as hash(master_seed, θ-index, N-index,
//! replicate-index), so the work is embarrassingly parallel and the
//! output is stable under any re-partitioning; records are sorted
//! before writing, which makes the CSV byte-identical for any worker
//! count. Per-record wall time is kept in memory and aggregated into
//! the summary, never written to the CSV.

use crate::error::{Error, Result};
use crate::numeric::{mean, quantile, splitmix64, variance};
use crate::polymer::{
    self, corner_sets, corner_side, max_free_energy_exact_capped, max_free_energy_restricted,
    rescaled_free_energy, LatticePoint,
};
use crate::sampler::sample_field;
use crate::specialfn::{critical_theta, PolymerParams};
use crate::tw;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::time::Instant;

/// Scan configuration; mirrors the TOML config tree key for key.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(default = "default_theta_grid")]
    pub theta_list: Vec<f64>,
    pub n_list: Vec<usize>,
    pub replications: usize,
    pub master_seed: u64,
    /// "exact" or "corners".
    #[serde(default = "default_mode")]
    pub mode: String,
    /// Corner exponent δ for corners mode.
    #[serde(default = "default_delta")]
    pub corners_delta: f64,
    #[serde(default)]
    pub compute_operator: bool,
    #[serde(default)]
    pub exact_cap: Option<usize>,
    #[serde(default = "default_csv_out")]
    pub csv_out: String,
    #[serde(default = "default_summary_out")]
    pub summary_out: String,
}

/// θ grid bracketing both the critical point and the half-critical
/// boundary of the earlier operator result.
pub fn default_theta_grid() -> Vec<f64> {
    let tc = critical_theta();
    vec![0.5, 1.5, tc / 2.0, tc - 0.3, tc, tc + 0.3, 5.0]
}

fn default_mode() -> String {
    "exact".into()
}

fn default_delta() -> f64 {
    1.0 / 12.0
}

fn default_csv_out() -> String {
    "records.csv".into()
}

fn default_summary_out() -> String {
    "summary.json".into()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScanMode {
    Exact,
    Corners(f64),
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.theta_list.is_empty() || self.n_list.is_empty() {
            return Err(Error::Config("theta_list and n_list must be nonempty".into()));
        }
        if self.replications == 0 {
            return Err(Error::Config("replications must be >= 1".into()));
        }
        if self.theta_list.iter().any(|&t| !(t > 0.0)) {
            return Err(Error::Config("all thetas must be positive".into()));
        }
        if self.n_list.iter().any(|&n| n == 0) {
            return Err(Error::Config("all N must be >= 1".into()));
        }
        self.scan_mode()?;
        Ok(())
    }

    pub fn scan_mode(&self) -> Result<ScanMode> {
        match self.mode.as_str() {
            "exact" => Ok(ScanMode::Exact),
            "corners" => {
                if !(self.corners_delta > 0.0 && self.corners_delta < 1.0 / 3.0) {
                    return Err(Error::Config(format!(
                        "corners mode requires delta in (0, 1/3), got {}",
                        self.corners_delta
                    )));
                }
                Ok(ScanMode::Corners(self.corners_delta))
            }
            other => Err(Error::Config(format!(
                "mode must be \"exact\" or \"corners\", got {other:?}"
            ))),
        }
    }
}

/// One (θ, N, replicate) measurement.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentRecord {
    pub theta: f64,
    pub n: usize,
    pub seed: u64,
    pub f_n: f64,
    pub arg_start: Option<LatticePoint>,
    pub arg_end: Option<LatticePoint>,
    /// ‖end - start‖₁, recorded for the open argmax-separation question.
    pub arg_sep: Option<usize>,
    pub log_z_corner: f64,
    pub rescaled: f64,
    pub neg_log_lambda1: Option<f64>,
    /// In-memory only; aggregated into the summary, not the CSV.
    pub elapsed_ms: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CellSummary {
    pub theta: f64,
    pub n: usize,
    pub count: usize,
    pub f_mean: f64,
    pub f_var: f64,
    /// 5/25/50/75/95 percent quantiles.
    pub f_quantiles: [f64; 5],
    pub rescaled_mean: f64,
    pub rescaled_var: f64,
    pub rescaled_quantiles: [f64; 5],
    pub mean_elapsed_ms: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ThetaGrowthFits {
    pub theta: f64,
    pub power: Option<GrowthFit>,
    pub log: Option<GrowthFit>,
    pub crit: Option<GrowthFit>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScanSummary {
    pub config: ExperimentConfig,
    /// Git-style content hash of the binary config input, when known.
    pub input_hash: Option<String>,
    pub wall_clock_ms: u128,
    pub total_records: usize,
    pub failed_records: usize,
    pub cells: Vec<CellSummary>,
    pub growth_fits: Vec<ThetaGrowthFits>,
}

#[derive(Debug, Clone)]
pub struct ScanOutput {
    pub records: Vec<ExperimentRecord>,
    pub summary: ScanSummary,
}

/// Replicate seed: hash(master, θ-index, N-index, replicate-index).
pub fn replicate_seed(master: u64, theta_idx: usize, n_idx: usize, rep: usize) -> u64 {
    let mut s = splitmix64(master ^ 0x9E37_79B9_7F4A_7C15);
    s = splitmix64(s ^ theta_idx as u64);
    s = splitmix64(s ^ n_idx as u64);
    splitmix64(s ^ rep as u64)
}

/// Worker-count override from the THREADS environment variable.
pub fn workers_from_env() -> Option<usize> {
    std::env::var("THREADS").ok().and_then(|v| v.parse().ok())
}

fn compute_record(
    cfg: &ExperimentConfig,
    mode: ScanMode,
    theta_idx: usize,
    n_idx: usize,
    rep: usize,
) -> Result<ExperimentRecord> {
    let started = Instant::now();
    let theta = cfg.theta_list[theta_idx];
    let n = cfg.n_list[n_idx];
    let seed = replicate_seed(cfg.master_seed, theta_idx, n_idx, rep);
    let field = sample_field(theta, n, n, seed)?;
    let fe = match mode {
        ScanMode::Exact => max_free_energy_exact_capped(
            &field,
            cfg.exact_cap.unwrap_or(polymer::DEFAULT_EXACT_CAP),
        )?,
        ScanMode::Corners(delta) => {
            let (sw, ne) = corner_sets(n, delta)?;
            let mut r = max_free_energy_restricted(&field, &sw, &ne)?;
            r.delta = Some(delta);
            r
        }
    };
    let log_z_corner = polymer::log_partition(
        &field,
        LatticePoint::new(1, 1),
        LatticePoint::new(n, n),
    )?;
    let rescaled = rescaled_free_energy(&field, n, n)?;
    let neg_log_lambda1 = if cfg.compute_operator {
        Some(crate::operator::neg_log_lambda1(&field)?.neg_log_lambda1)
    } else {
        None
    };
    let arg_sep = fe
        .arg_start
        .zip(fe.arg_end)
        .map(|(s, e)| s.l1_dist(&e));
    Ok(ExperimentRecord {
        theta,
        n,
        seed,
        f_n: fe.value,
        arg_start: fe.arg_start,
        arg_end: fe.arg_end,
        arg_sep,
        log_z_corner,
        rescaled,
        neg_log_lambda1,
        elapsed_ms: started.elapsed().as_secs_f64() * 1e3,
    })
}

/// Run the full scan. `workers` overrides the rayon pool size (the CLI
/// passes the THREADS variable); output is identical for any value.
pub fn run_phase_scan(cfg: &ExperimentConfig, workers: Option<usize>) -> Result<ScanOutput> {
    cfg.validate()?;
    match workers {
        Some(k) if k > 0 => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(k)
                .build()
                .map_err(|e| Error::Config(e.to_string()))?;
            pool.install(|| run_phase_scan_inner(cfg))
        }
        _ => run_phase_scan_inner(cfg),
    }
}

fn run_phase_scan_inner(cfg: &ExperimentConfig) -> Result<ScanOutput> {
    let started = Instant::now();
    let mode = cfg.scan_mode()?;
    let mut tasks = Vec::new();
    for ti in 0..cfg.theta_list.len() {
        for ni in 0..cfg.n_list.len() {
            for rep in 0..cfg.replications {
                tasks.push((ti, ni, rep));
            }
        }
    }
    let total = tasks.len();
    let results: Vec<((usize, usize, usize), Result<ExperimentRecord>)> = tasks
        .into_par_iter()
        .map(|key| (key, compute_record(cfg, mode, key.0, key.1, key.2)))
        .collect();

    let mut keyed: Vec<((usize, usize, usize), ExperimentRecord)> = Vec::with_capacity(total);
    let mut failed = 0usize;
    for (key, res) in results {
        match res {
            Ok(rec) => keyed.push((key, rec)),
            Err(e) => {
                failed += 1;
                eprintln!(
                    "record (theta_idx={}, n_idx={}, rep={}) failed: {e}",
                    key.0, key.1, key.2
                );
            }
        }
    }
    if failed * 100 > total {
        return Err(Error::Config(format!(
            "{failed}/{total} records failed (more than 1%)"
        )));
    }
    keyed.sort_by_key(|(key, _)| *key);
    let records: Vec<ExperimentRecord> = keyed.into_iter().map(|(_, r)| r).collect();

    let mut cells = Vec::new();
    let mut growth_fits = Vec::new();
    for (ti, &theta) in cfg.theta_list.iter().enumerate() {
        let mut n_means = Vec::new();
        for &n in &cfg.n_list {
            let sub: Vec<&ExperimentRecord> = records
                .iter()
                .filter(|r| r.theta == theta && r.n == n)
                .collect();
            if sub.is_empty() {
                continue;
            }
            let fs: Vec<f64> = sub.iter().map(|r| r.f_n).collect();
            let rs: Vec<f64> = sub.iter().map(|r| r.rescaled).collect();
            let mut fs_sorted = fs.clone();
            fs_sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let mut rs_sorted = rs.clone();
            rs_sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let qs = |v: &[f64]| {
                [
                    quantile(v, 0.05),
                    quantile(v, 0.25),
                    quantile(v, 0.50),
                    quantile(v, 0.75),
                    quantile(v, 0.95),
                ]
            };
            cells.push(CellSummary {
                theta,
                n,
                count: sub.len(),
                f_mean: mean(&fs),
                f_var: if fs.len() > 1 { variance(&fs) } else { 0.0 },
                f_quantiles: qs(&fs_sorted),
                rescaled_mean: mean(&rs),
                rescaled_var: if rs.len() > 1 { variance(&rs) } else { 0.0 },
                rescaled_quantiles: qs(&rs_sorted),
                mean_elapsed_ms: mean(&sub.iter().map(|r| r.elapsed_ms).collect::<Vec<_>>()),
            });
            n_means.push((n as f64, mean(&fs)));
        }
        let _ = ti;
        growth_fits.push(ThetaGrowthFits {
            theta,
            power: fit_growth_exponent(&n_means, GrowthModel::Power).ok(),
            log: fit_growth_exponent(&n_means, GrowthModel::Log).ok(),
            crit: fit_growth_exponent(&n_means, GrowthModel::Crit).ok(),
        });
    }

    Ok(ScanOutput {
        records,
        summary: ScanSummary {
            config: cfg.clone(),
            input_hash: None,
            wall_clock_ms: started.elapsed().as_millis(),
            total_records: total,
            failed_records: failed,
            cells,
            growth_fits,
        },
    })
}

impl ScanOutput {
    /// Per-record CSV: header row, comma separators, '.' decimals,
    /// UTF-8, LF endings. Optional columns render as empty strings.
    pub fn csv(&self) -> String {
        let mut s = String::from(
            "theta,n,seed,f_n,start_x,start_y,end_x,end_y,arg_sep,log_z_corner,rescaled,neg_log_lambda1\n",
        );
        for r in &self.records {
            let (sx, sy) = r
                .arg_start
                .map(|p| (p.x.to_string(), p.y.to_string()))
                .unwrap_or_default();
            let (ex, ey) = r
                .arg_end
                .map(|p| (p.x.to_string(), p.y.to_string()))
                .unwrap_or_default();
            let sep = r.arg_sep.map(|v| v.to_string()).unwrap_or_default();
            let nll = r.neg_log_lambda1.map(|v| v.to_string()).unwrap_or_default();
            s.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{},{}\n",
                r.theta, r.n, r.seed, r.f_n, sx, sy, ex, ey, sep, r.log_z_corner, r.rescaled, nll
            ));
        }
        s
    }

    /// Write the CSV and summary JSON to the paths in the config.
    pub fn write_files(&self) -> Result<()> {
        std::fs::write(&self.summary.config.csv_out, self.csv())?;
        let json = serde_json::to_string_pretty(&self.summary)
            .map_err(|e| Error::Format(e.to_string()))?;
        std::fs::write(&self.summary.config.summary_out, json)?;
        Ok(())
    }
}

/// Git-style content hash (sha256 over a "blob <len>\0" framed payload).
pub fn content_hash(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(format!("blob {}\0", bytes.len()).as_bytes());
    hasher.update(bytes);
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Growth-law regressors for the three phases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GrowthModel {
    /// log y = a + b log N.
    Power,
    /// y = a + b log N.
    Log,
    /// y = a + b N^{1/3} (log N)^{2/3}.
    Crit,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct GrowthFit {
    pub model: GrowthModel,
    pub intercept: f64,
    pub slope: f64,
    pub r_squared: f64,
}

/// Least squares of a growth statistic against one of the three model
/// regressors.
pub fn fit_growth_exponent(pairs: &[(f64, f64)], model: GrowthModel) -> Result<GrowthFit> {
    let mut distinct: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    distinct.sort_by(|a, b| a.partial_cmp(b).unwrap());
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(Error::Domain(format!(
            "degenerate design: need >= 3 distinct N values, got {}",
            distinct.len()
        )));
    }
    let mut xs = Vec::with_capacity(pairs.len());
    let mut ys = Vec::with_capacity(pairs.len());
    for &(n, y) in pairs {
        if !(n > 1.0) {
            return Err(Error::Domain("growth fits need N > 1".into()));
        }
        match model {
            GrowthModel::Power => {
                if !(y > 0.0) {
                    return Err(Error::Domain(
                        "power model requires positive statistics".into(),
                    ));
                }
                xs.push(n.ln());
                ys.push(y.ln());
            }
            GrowthModel::Log => {
                xs.push(n.ln());
                ys.push(y);
            }
            GrowthModel::Crit => {
                xs.push(n.cbrt() * n.ln().powf(2.0 / 3.0));
                ys.push(y);
            }
        }
    }
    let (intercept, slope, r_squared) = crate::numeric::ols(&xs, &ys);
    Ok(GrowthFit {
        model,
        intercept,
        slope,
        r_squared,
    })
}

/// Subcritical comparison of the rescaled maximal free energy and the
/// rescaled corner free energy against F_GUE, plus the fraction of
/// replicates whose argmax falls in the δ = 1/12 corners.
#[derive(Debug, Clone, Serialize)]
pub struct TwComparisonReport {
    pub theta: f64,
    pub n: usize,
    pub replications: usize,
    pub ks_max_statistic: f64,
    pub ks_corner_statistic: f64,
    pub corner_fraction: f64,
}

pub fn subcritical_tw_comparison(
    theta: f64,
    n: usize,
    replications: usize,
    master_seed: u64,
) -> Result<TwComparisonReport> {
    let params = PolymerParams::new(theta)?;
    if theta >= params.theta_c {
        return Err(Error::Phase(format!(
            "subcritical comparison requires theta < theta_c = {}, got {theta}",
            params.theta_c
        )));
    }
    if replications == 0 {
        return Err(Error::Domain("replications must be >= 1".into()));
    }
    let side = corner_side(n, 1.0 / 12.0)?;
    let per_rep: Vec<(f64, f64, bool)> = (0..replications)
        .into_par_iter()
        .map(|rep| -> Result<(f64, f64, bool)> {
            let seed = replicate_seed(master_seed, 0, 0, rep);
            let field = sample_field(theta, n, n, seed)?;
            let fe = polymer::max_free_energy_exact(&field)?;
            let stat = (fe.value + 2.0 * n as f64 * params.psi_half_theta)
                / (params.sigma_theta * (n as f64).cbrt());
            let corner = rescaled_free_energy(&field, n, n)?;
            let (s, e) = (fe.arg_start.unwrap(), fe.arg_end.unwrap());
            let localized =
                s.x <= side && s.y <= side && e.x >= n + 1 - side && e.y >= n + 1 - side;
            Ok((stat, corner, localized))
        })
        .collect::<Result<_>>()?;
    let mut max_stats: Vec<f64> = per_rep.iter().map(|r| r.0).collect();
    let mut corner_stats: Vec<f64> = per_rep.iter().map(|r| r.1).collect();
    max_stats.sort_by(|a, b| a.partial_cmp(b).unwrap());
    corner_stats.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let localized = per_rep.iter().filter(|r| r.2).count();
    Ok(TwComparisonReport {
        theta,
        n,
        replications,
        ks_max_statistic: tw::ks_distance(&max_stats, tw::f_gue)?,
        ks_corner_statistic: tw::ks_distance(&corner_stats, tw::f_gue)?,
        corner_fraction: localized as f64 / replications as f64,
    })
}
