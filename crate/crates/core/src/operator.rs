//! The lower-triangular block of the honeycomb adjacency operator.
//!
//! Sites (x, y) of the N x N box are ordered x-major, which places both
//! predecessors (x-1, y) and (x, y-1) strictly earlier, so the operator
//! is lower triangular and invertible whenever every diagonal entry
//! 1/w_{x,y} is nonzero (almost surely). The inverse is dense with
//! exponentially large entries, so everything here is matrix-free:
//! apply, transpose-apply, forward and back substitution, each O(N^2).

use crate::error::{Error, Result};
use crate::numeric::splitmix64;
use crate::polymer::{self, LatticePoint};
use crate::sampler::WeightField;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

/// Dense-mode cap for spectrum and SVD cross-checks.
pub const DENSE_CAP: usize = 12;

const POWER_TOL: f64 = 1e-9;
const POWER_MAX_ITER: usize = 100_000;
const SANDWICH_TOL: f64 = 1e-6;

/// scaled solves renormalize whenever a block exceeds 2^512
const RESCALE_LIMIT: f64 = 1.34078079299425971e154; // 2^512
const RESCALE_FACTOR: f64 = 7.45834073120020674e-155; // 2^-512
const RESCALE_LOG: f64 = 512.0 * std::f64::consts::LN_2;

/// Matrix-free triangular operator for an N x N field.
#[derive(Debug, Clone)]
pub struct TriangularOperator {
    pub n: usize,
    /// w_{x,y} in site order (the solve multiplier).
    w: Vec<f64>,
    /// 1/w_{x,y} in site order (the diagonal).
    inv_w: Vec<f64>,
}

/// Build the operator from a square field.
pub fn build_operator(field: &WeightField) -> Result<TriangularOperator> {
    let n = field.square_side()?;
    let w: Vec<f64> = field.log_weights().iter().map(|&lw| lw.exp()).collect();
    let inv_w: Vec<f64> = field.log_weights().iter().map(|&lw| (-lw).exp()).collect();
    Ok(TriangularOperator { n, w, inv_w })
}

impl TriangularOperator {
    pub fn n_sites(&self) -> usize {
        self.n * self.n
    }

    #[inline]
    fn idx(&self, x: usize, y: usize) -> usize {
        (x - 1) * self.n + (y - 1)
    }

    /// Ã v.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut out = vec![0.0; n * n];
        for i in 0..n * n {
            let mut acc = self.inv_w[i] * v[i];
            if i >= n {
                acc += v[i - n];
            }
            if i % n != 0 {
                acc += v[i - 1];
            }
            out[i] = acc;
        }
        out
    }

    /// Ãᵀ v.
    pub fn apply_transpose(&self, v: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut out = vec![0.0; n * n];
        for i in 0..n * n {
            let mut acc = self.inv_w[i] * v[i];
            if i + n < n * n {
                acc += v[i + n];
            }
            if (i + 1) % n != 0 {
                acc += v[i + 1];
            }
            out[i] = acc;
        }
        out
    }

    /// Forward substitution for Ã x = b.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let (x, log_scale) = self.solve_scaled(b, false);
        debug_assert_eq!(log_scale, 0.0);
        x
    }

    /// Back substitution for Ãᵀ x = b.
    pub fn solve_transpose(&self, b: &[f64]) -> Vec<f64> {
        let (x, log_scale) = self.solve_transpose_scaled(b, false);
        debug_assert_eq!(log_scale, 0.0);
        x
    }

    /// Forward substitution with block renormalization: returns
    /// (x', log_scale) with true x = x' e^{log_scale}. Keeps the solve
    /// meaningful even when entries of Ã⁻¹ overflow f64.
    pub fn solve_scaled(&self, b: &[f64], rescale: bool) -> (Vec<f64>, f64) {
        let n = self.n;
        let mut x = b.to_vec();
        let mut log_scale = 0.0;
        for row in 0..n {
            let base = row * n;
            for col in 0..n {
                let i = base + col;
                let mut rhs = x[i];
                if i >= n {
                    rhs -= x[i - n];
                }
                if col != 0 {
                    rhs -= x[i - 1];
                }
                x[i] = self.w[i] * rhs;
            }
            if rescale {
                let block_max = x[base..base + n].iter().fold(0.0f64, |m, &v| m.max(v.abs()));
                if block_max > RESCALE_LIMIT {
                    for v in x.iter_mut() {
                        *v *= RESCALE_FACTOR;
                    }
                    log_scale += RESCALE_LOG;
                }
            }
        }
        (x, log_scale)
    }

    /// Back substitution with block renormalization.
    pub fn solve_transpose_scaled(&self, b: &[f64], rescale: bool) -> (Vec<f64>, f64) {
        let n = self.n;
        let mut x = b.to_vec();
        let mut log_scale = 0.0;
        for row in (0..n).rev() {
            let base = row * n;
            for col in (0..n).rev() {
                let i = base + col;
                let mut rhs = x[i];
                if i + n < n * n {
                    rhs -= x[i + n];
                }
                if col + 1 != n {
                    rhs -= x[i + 1];
                }
                x[i] = self.w[i] * rhs;
            }
            if rescale {
                let block_max = x[base..base + n].iter().fold(0.0f64, |m, &v| m.max(v.abs()));
                if block_max > RESCALE_LIMIT {
                    for v in x.iter_mut() {
                        *v *= RESCALE_FACTOR;
                    }
                    log_scale += RESCALE_LOG;
                }
            }
        }
        (x, log_scale)
    }

    /// Dense N² x N² matrix (small N only; for oracles and spectra).
    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let m = self.n_sites();
        let mut d = nalgebra::DMatrix::zeros(m, m);
        for x in 1..=self.n {
            for y in 1..=self.n {
                let i = self.idx(x, y);
                d[(i, i)] = self.inv_w[i];
                if x > 1 {
                    d[(i, self.idx(x - 1, y))] = 1.0;
                }
                if y > 1 {
                    d[(i, self.idx(x, y - 1))] = 1.0;
                }
            }
        }
        d
    }
}

/// One entry of the inverse compared against the signed partition
/// function Z(S;T)(-1)^{|T-S|_1}.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct InverseEntryCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub ok: bool,
}

const IDENTITY_REL_TOL: f64 = 1e-8;
const IDENTITY_ABS_TOL: f64 = 1e-12;

fn signed_z(field: &WeightField, s: LatticePoint, t: LatticePoint) -> Result<f64> {
    if !s.leq(&t) {
        return Ok(0.0);
    }
    let log_z = polymer::log_partition(field, s, t)?;
    if log_z.abs() > 600.0 {
        return Err(Error::Range(format!(
            "|log Z| = {} exceeds the float-safety guard of 600",
            log_z.abs()
        )));
    }
    let sign = if s.l1_dist(&t) % 2 == 0 { 1.0 } else { -1.0 };
    Ok(sign * log_z.exp())
}

fn entry_agrees(lhs: f64, rhs: f64) -> bool {
    if rhs == 0.0 {
        lhs.abs() <= IDENTITY_ABS_TOL
    } else {
        (lhs - rhs).abs() <= IDENTITY_REL_TOL * rhs.abs().max(lhs.abs())
    }
}

/// Check (Ã⁻¹)_{T,S} = Z(S;T)(-1)^{|T-S|_1} for one pair.
pub fn inverse_entry_check(
    field: &WeightField,
    s: LatticePoint,
    t: LatticePoint,
) -> Result<InverseEntryCheck> {
    let op = build_operator(field)?;
    if !field.contains(s.x, s.y) || !field.contains(t.x, t.y) {
        return Err(Error::Bounds("S and T must lie in the field".into()));
    }
    // guard the whole column before solving in linear space
    if s.leq(&LatticePoint::new(field.rows, field.cols)) {
        let grid = polymer::log_partition_grid(field, s)?;
        let mut max_abs: f64 = 0.0;
        for x in s.x..=field.rows {
            for y in s.y..=field.cols {
                max_abs = max_abs.max(grid.value(x, y).abs());
            }
        }
        if max_abs > 600.0 {
            return Err(Error::Range(format!(
                "|log Z| reaches {max_abs} on the column, beyond the guard of 600"
            )));
        }
    }
    let mut e = vec![0.0; op.n_sites()];
    e[op.idx(s.x, s.y)] = 1.0;
    let col = op.solve(&e);
    let lhs = col[op.idx(t.x, t.y)];
    let rhs = signed_z(field, s, t)?;
    Ok(InverseEntryCheck {
        lhs,
        rhs,
        ok: entry_agrees(lhs, rhs),
    })
}

/// Summary of the inverse identity over all N⁴ ordered pairs.
#[derive(Debug, Clone, Serialize)]
pub struct IdentityReport {
    pub pairs_checked: usize,
    pub pairs_ok: usize,
    pub max_rel_err: f64,
    pub all_ok: bool,
}

/// Check every entry of Ã⁻¹ against the signed partition functions.
pub fn inverse_identity_report(field: &WeightField) -> Result<IdentityReport> {
    let op = build_operator(field)?;
    let n = op.n;
    let mut report = IdentityReport {
        pairs_checked: 0,
        pairs_ok: 0,
        max_rel_err: 0.0,
        all_ok: true,
    };
    for sx in 1..=n {
        for sy in 1..=n {
            let s = LatticePoint::new(sx, sy);
            let grid = polymer::log_partition_grid(field, s)?;
            let mut max_abs: f64 = 0.0;
            for x in sx..=n {
                for y in sy..=n {
                    max_abs = max_abs.max(grid.value(x, y).abs());
                }
            }
            if max_abs > 600.0 {
                return Err(Error::Range(format!(
                    "|log Z| reaches {max_abs}, beyond the guard of 600"
                )));
            }
            let mut e = vec![0.0; op.n_sites()];
            e[op.idx(sx, sy)] = 1.0;
            let col = op.solve(&e);
            for tx in 1..=n {
                for ty in 1..=n {
                    let t = LatticePoint::new(tx, ty);
                    let lhs = col[op.idx(tx, ty)];
                    let rhs = if s.leq(&t) {
                        let lz = grid.value(tx, ty);
                        let sign = if s.l1_dist(&t) % 2 == 0 { 1.0 } else { -1.0 };
                        sign * lz.exp()
                    } else {
                        0.0
                    };
                    let ok = entry_agrees(lhs, rhs);
                    report.pairs_checked += 1;
                    if ok {
                        report.pairs_ok += 1;
                    } else {
                        report.all_ok = false;
                    }
                    if rhs != 0.0 {
                        let rel = (lhs - rhs).abs() / rhs.abs().max(lhs.abs());
                        report.max_rel_err = report.max_rel_err.max(rel);
                    }
                }
            }
        }
    }
    Ok(report)
}

/// Estimate of -log λ₁ with iteration diagnostics and, when attached,
/// the sandwich verdict 𝖥 <= -log λ₁ <= 𝖥 + 4 log N.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SpectralResult {
    pub neg_log_lambda1: f64,
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
    pub f_n: Option<f64>,
    pub sandwich_ok: Option<bool>,
}

impl SpectralResult {
    /// Attach the maximal free energy of the same field and evaluate
    /// the sandwich bound.
    pub fn attach_sandwich(&mut self, f_n: f64, n: usize) {
        let upper = f_n + 4.0 * (n as f64).ln();
        self.f_n = Some(f_n);
        self.sandwich_ok = Some(
            self.neg_log_lambda1 >= f_n - SANDWICH_TOL
                && self.neg_log_lambda1 <= upper + SANDWICH_TOL,
        );
    }
}

/// -log λ₁ = log σ_max(Ã⁻¹) by power iteration on v -> Ã⁻ᵀ Ã⁻¹ v.
///
/// The iterate is renormalized after every half-step and the log of
/// each growth factor is accumulated, so the estimate stays exact in
/// log scale even when σ_max overflows any float. Non-convergence
/// (possible when the top singular values are nearly degenerate) is
/// reported through `converged`/`residual` with the best estimate.
pub fn neg_log_lambda1(field: &WeightField) -> Result<SpectralResult> {
    let op = build_operator(field)?;
    let m = op.n_sites();
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(field.seed.wrapping_add(0x5EED)));
    let mut v: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
    normalize(&mut v);
    if m == 1 {
        // -log λ₁ = log w₁₁ exactly
        return Ok(SpectralResult {
            neg_log_lambda1: op.w[0].ln(),
            iterations: 0,
            residual: 0.0,
            converged: true,
            f_n: None,
            sandwich_ok: None,
        });
    }
    let mut estimate = f64::NEG_INFINITY;
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    while iterations < POWER_MAX_ITER {
        iterations += 1;
        let (mut y, ls1) = op.solve_scaled(&v, true);
        let n1 = norm(&y);
        let log_gamma1 = n1.ln() + ls1;
        scale(&mut y, 1.0 / n1);
        let (mut z, ls2) = op.solve_transpose_scaled(&y, true);
        let n2 = norm(&z);
        let log_gamma2 = n2.ln() + ls2;
        scale(&mut z, 1.0 / n2);
        v = z;
        let next = 0.5 * (log_gamma1 + log_gamma2);
        residual = (next - estimate).abs();
        estimate = next;
        if residual < POWER_TOL {
            break;
        }
    }
    Ok(SpectralResult {
        neg_log_lambda1: estimate,
        iterations,
        residual,
        converged: residual < POWER_TOL,
        f_n: None,
        sandwich_ok: None,
    })
}

/// `neg_log_lambda1` plus the exact 𝖥_N of the same field and the
/// sandwich verdict.
pub fn neg_log_lambda1_with_sandwich(field: &WeightField) -> Result<SpectralResult> {
    let mut res = neg_log_lambda1(field)?;
    let fe = polymer::max_free_energy_exact(field)?;
    res.attach_sandwich(fe.value, field.square_side()?);
    Ok(res)
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|&x| x * x).sum::<f64>().sqrt()
}

fn normalize(v: &mut [f64]) {
    let n = norm(v);
    scale(v, 1.0 / n);
}

fn scale(v: &mut [f64], c: f64) {
    for x in v.iter_mut() {
        *x *= c;
    }
}

/// All N² singular values of Ã, ascending (dense mode, N <= 12).
///
/// These are the positive eigenvalues of the bipartite doubling. Small
/// singular values are only resolvable when 𝖥_N is moderate (absolute
/// SVD error is eps * ||Ã||), which in practice means θ well above 1
/// or tiny N.
pub fn spectrum_small(field: &WeightField) -> Result<Vec<f64>> {
    let op = build_operator(field)?;
    if op.n > DENSE_CAP {
        return Err(Error::Size(format!(
            "dense spectrum capped at N <= {DENSE_CAP}, got {}",
            op.n
        )));
    }
    let dense = op.to_dense();
    let svd = dense.svd(false, false);
    let mut vals: Vec<f64> = svd.singular_values.iter().cloned().collect();
    vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(vals)
}
