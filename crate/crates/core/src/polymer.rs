//! Log-space dynamic programming for partition functions and the
//! maximal free energy.
//!
//! Z grows like e^{cN} and single weights overflow for small θ, so every
//! path sum is carried in natural-log space with two-argument
//! log-sum-exp; -inf is the distinguished sentinel for an empty path
//! set and is never produced by combining finite values.

use crate::error::{Error, Result};
use crate::numeric::log_add_exp;
use crate::sampler::WeightField;
use crate::specialfn::ScaleFunctions;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Default cap for the O(N^4) exact mode (~4e9 cell updates).
pub const DEFAULT_EXACT_CAP: usize = 256;

/// 1-based lattice coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LatticePoint {
    pub x: usize,
    pub y: usize,
}

impl LatticePoint {
    pub fn new(x: usize, y: usize) -> Self {
        Self { x, y }
    }

    /// Component-wise partial order: both coordinates no larger.
    pub fn leq(&self, other: &LatticePoint) -> bool {
        self.x <= other.x && self.y <= other.y
    }

    pub fn l1_dist(&self, other: &LatticePoint) -> usize {
        self.x.abs_diff(other.x) + self.y.abs_diff(other.y)
    }
}

fn check_in_field(field: &WeightField, p: LatticePoint, what: &str) -> Result<()> {
    if !field.contains(p.x, p.y) {
        return Err(Error::Bounds(format!(
            "{what} ({}, {}) outside {}x{} field",
            p.x, p.y, field.rows, field.cols
        )));
    }
    Ok(())
}

/// log Z(start; end): the point-to-point free energy.
pub fn log_partition(field: &WeightField, start: LatticePoint, end: LatticePoint) -> Result<f64> {
    check_in_field(field, start, "start")?;
    check_in_field(field, end, "end")?;
    if !start.leq(&end) {
        return Err(Error::Ordering(format!(
            "start ({},{}) must be <= end ({},{})",
            start.x, start.y, end.x, end.y
        )));
    }
    let cols = field.cols;
    let lw = field.log_weights();
    let width = end.y - start.y + 1;
    let mut buf = vec![0.0f64; width];
    let row0 = &lw[(start.x - 1) * cols + (start.y - 1)..(start.x - 1) * cols + end.y];
    buf[0] = row0[0];
    for j in 1..width {
        buf[j] = buf[j - 1] + row0[j];
    }
    for i in (start.x + 1)..=end.x {
        let row = &lw[(i - 1) * cols + (start.y - 1)..(i - 1) * cols + end.y];
        buf[0] += row[0];
        let mut left = buf[0];
        for j in 1..width {
            let v = row[j] + log_add_exp(buf[j], left);
            buf[j] = v;
            left = v;
        }
    }
    Ok(buf[width - 1])
}

/// log Z(start; T) for every T >= start, -inf elsewhere.
#[derive(Debug, Clone)]
pub struct LogZGrid {
    pub start: LatticePoint,
    pub rows: usize,
    pub cols: usize,
    values: Vec<f64>,
}

impl LogZGrid {
    /// log Z(start; (x, y)); -inf for (x, y) not >= start.
    pub fn value(&self, x: usize, y: usize) -> f64 {
        assert!(x >= 1 && x <= self.rows && y >= 1 && y <= self.cols);
        self.values[(x - 1) * self.cols + (y - 1)]
    }
}

/// One DP sweep filling log Z(start; T) over the whole field.
pub fn log_partition_grid(field: &WeightField, start: LatticePoint) -> Result<LogZGrid> {
    check_in_field(field, start, "start")?;
    let (rows, cols) = (field.rows, field.cols);
    let lw = field.log_weights();
    let mut values = vec![f64::NEG_INFINITY; rows * cols];
    let row0 = (start.x - 1) * cols;
    values[row0 + start.y - 1] = lw[row0 + start.y - 1];
    for y in (start.y + 1)..=cols {
        values[row0 + y - 1] = values[row0 + y - 2] + lw[row0 + y - 1];
    }
    for x in (start.x + 1)..=rows {
        let r = (x - 1) * cols;
        let up = r - cols;
        values[r + start.y - 1] = values[up + start.y - 1] + lw[r + start.y - 1];
        for y in (start.y + 1)..=cols {
            let v = lw[r + y - 1] + log_add_exp(values[up + y - 1], values[r + y - 2]);
            values[r + y - 1] = v;
        }
    }
    Ok(LogZGrid {
        start,
        rows,
        cols,
        values,
    })
}

/// How a maximal free energy was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FreeEnergyMode {
    Exact,
    CornerRestricted,
}

/// Value and argmax of a (possibly restricted) maximal free energy.
///
/// `arg_start`/`arg_end` are None exactly when no ordered pair exists
/// and `value` is the -inf sentinel. In exact mode the value dominates
/// every single log-weight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaxFreeEnergyResult {
    pub value: f64,
    pub arg_start: Option<LatticePoint>,
    pub arg_end: Option<LatticePoint>,
    pub mode: FreeEnergyMode,
    /// Corner exponent parameter when mode is CornerRestricted.
    pub delta: Option<f64>,
}

#[derive(Clone, Copy)]
struct Best {
    value: f64,
    start: LatticePoint,
    end: LatticePoint,
}

impl Best {
    fn none() -> Self {
        Best {
            value: f64::NEG_INFINITY,
            start: LatticePoint::new(0, 0),
            end: LatticePoint::new(0, 0),
        }
    }

    /// Keep the larger value; on exact ties the lexicographically
    /// smallest (start, end) wins, making parallel reduction
    /// order-independent.
    fn merge(self, other: Best) -> Best {
        if other.value > self.value {
            other
        } else if other.value == self.value
            && other.value > f64::NEG_INFINITY
            && (other.start, other.end) < (self.start, self.end)
        {
            other
        } else {
            self
        }
    }
}

/// Linear-space sweep with per-row power-of-two rescaling.
///
/// One multiply-add per cell instead of a log-sum-exp, which is what
/// makes the O(N^4) exact mode affordable. All values in a row share a
/// common scale, so the in-row maximum is tracked with plain compares
/// and only one log is taken per row. Returns None when the in-row
/// dynamic range outruns f64 (underflow to zero under positive inflow,
/// or a masked maximum pushed into the subnormal range); the caller
/// then falls back to the log-space sweep.
fn sweep_from_linear(
    field: &WeightField,
    w_lin: &[f64],
    start: LatticePoint,
    mask: Option<&[bool]>,
    buf: &mut Vec<f64>,
) -> Option<Best> {
    const SCALE_LIMIT: f64 = 1.340_780_792_994_259_7e154; // 2^512
    const SCALE_DOWN: f64 = 7.458_340_731_200_206_7e-155; // 2^-512
    const SCALE_LOG: f64 = 512.0 * std::f64::consts::LN_2;

    let (rows, cols) = (field.rows, field.cols);
    let width = cols - start.y + 1;
    buf.clear();
    buf.resize(width, 0.0);
    let mut best = Best::none();
    let mut offset = 0.0f64;

    for i in start.x..=rows {
        let row = &w_lin[(i - 1) * cols + (start.y - 1)..(i - 1) * cols + cols];
        let mut underflow = false;
        if i == start.x {
            buf[0] = row[0];
            underflow |= buf[0] == 0.0;
            for j in 1..width {
                let v = buf[j - 1] * row[j];
                underflow |= v == 0.0 && buf[j - 1] != 0.0;
                buf[j] = v;
            }
        } else {
            buf[0] *= row[0];
            let mut left = buf[0];
            for j in 1..width {
                let inflow = buf[j] + left;
                let v = row[j] * inflow;
                underflow |= v == 0.0 && inflow != 0.0;
                buf[j] = v;
                left = v;
            }
        }
        // one pass: full row max for rescaling, masked max for the best
        let mut full_max = 0.0f64;
        let mut row_best = 0.0f64;
        let mut arg = 0usize;
        match mask {
            None => {
                for (j, &v) in buf.iter().enumerate() {
                    if v > full_max {
                        full_max = v;
                        row_best = v;
                        arg = j;
                    }
                }
            }
            Some(m) => {
                let row_off = (i - 1) * cols + (start.y - 1);
                for (j, &v) in buf.iter().enumerate() {
                    if v > full_max {
                        full_max = v;
                    }
                    if v > row_best && m[row_off + j] {
                        row_best = v;
                        arg = j;
                    }
                }
            }
        }
        if underflow || !full_max.is_finite() {
            return None;
        }
        if row_best > 0.0 {
            // masked maxima in the subnormal range have degraded
            // precision; be strict and redo in log space
            if row_best < f64::MIN_POSITIVE {
                return None;
            }
            let val = row_best.ln() + offset;
            if val > best.value {
                best.value = val;
                best.start = start;
                best.end = LatticePoint::new(i, start.y + arg);
            }
        }
        if full_max > SCALE_LIMIT {
            for v in buf.iter_mut() {
                *v *= SCALE_DOWN;
            }
            offset += SCALE_LOG;
        } else if full_max > 0.0 && full_max < SCALE_DOWN {
            for v in buf.iter_mut() {
                *v /= SCALE_DOWN;
            }
            offset -= SCALE_LOG;
        }
    }
    Some(best)
}

/// Exponentiated weights for the linear kernel; None when any weight
/// overflows in linear space (the log-space sweep then handles it).
fn linear_weights(field: &WeightField) -> Option<Vec<f64>> {
    let w: Vec<f64> = field.log_weights().iter().map(|&l| l.exp()).collect();
    if w.iter().all(|v| v.is_finite()) {
        Some(w)
    } else {
        None
    }
}

/// Log-space reference sweep; the fallback when the linear kernel
/// reports insufficient dynamic range.
fn sweep_from(
    field: &WeightField,
    start: LatticePoint,
    mask: Option<&[bool]>,
    buf: &mut Vec<f64>,
) -> Best {
    let (rows, cols) = (field.rows, field.cols);
    let lw = field.log_weights();
    let width = cols - start.y + 1;
    buf.clear();
    buf.resize(width, 0.0);
    let mut best = Best::none();
    let consider = |val: f64, x: usize, y: usize, best: &mut Best| {
        if val > best.value {
            if let Some(m) = mask {
                if !m[(x - 1) * cols + (y - 1)] {
                    return;
                }
            }
            best.value = val;
            best.start = start;
            best.end = LatticePoint::new(x, y);
        }
    };
    {
        let row = &lw[(start.x - 1) * cols + (start.y - 1)..(start.x - 1) * cols + cols];
        buf[0] = row[0];
        consider(buf[0], start.x, start.y, &mut best);
        for j in 1..width {
            buf[j] = buf[j - 1] + row[j];
            consider(buf[j], start.x, start.y + j, &mut best);
        }
    }
    for i in (start.x + 1)..=rows {
        let row = &lw[(i - 1) * cols + (start.y - 1)..(i - 1) * cols + cols];
        buf[0] += row[0];
        consider(buf[0], i, start.y, &mut best);
        let mut left = buf[0];
        for j in 1..width {
            let v = row[j] + log_add_exp(buf[j], left);
            buf[j] = v;
            left = v;
            consider(v, i, start.y + j, &mut best);
        }
    }
    best
}

/// Exact maximal free energy over all ordered start/end pairs of an
/// N x N field, with the default N cap.
pub fn max_free_energy_exact(field: &WeightField) -> Result<MaxFreeEnergyResult> {
    max_free_energy_exact_capped(field, DEFAULT_EXACT_CAP)
}

/// Exact mode with an explicit cap override. O(N^4) cell updates,
/// parallel over start points; each worker owns a private row buffer.
pub fn max_free_energy_exact_capped(
    field: &WeightField,
    cap: usize,
) -> Result<MaxFreeEnergyResult> {
    let n = field.square_side()?;
    if n > cap {
        return Err(Error::Capacity(format!(
            "exact mode capped at N <= {cap}, got N = {n}"
        )));
    }
    let w_lin = linear_weights(field);
    // one task per start row; fold in row order for determinism
    let row_bests: Vec<Best> = (1..=n)
        .into_par_iter()
        .map(|a| {
            let mut buf = Vec::new();
            let mut best = Best::none();
            for b in 1..=n {
                let start = LatticePoint::new(a, b);
                let cand = w_lin
                    .as_deref()
                    .and_then(|w| sweep_from_linear(field, w, start, None, &mut buf))
                    .unwrap_or_else(|| sweep_from(field, start, None, &mut buf));
                best = best.merge(cand);
            }
            best
        })
        .collect();
    let best = row_bests.into_iter().fold(Best::none(), Best::merge);
    Ok(MaxFreeEnergyResult {
        value: best.value,
        arg_start: Some(best.start),
        arg_end: Some(best.end),
        mode: FreeEnergyMode::Exact,
        delta: None,
    })
}

/// Maximal free energy restricted to start in K1, end in K2.
///
/// Returns the -inf sentinel result when no ordered pair exists.
pub fn max_free_energy_restricted(
    field: &WeightField,
    k1: &[LatticePoint],
    k2: &[LatticePoint],
) -> Result<MaxFreeEnergyResult> {
    if k1.is_empty() || k2.is_empty() {
        return Err(Error::Domain("K1 and K2 must be nonempty".into()));
    }
    for &p in k1.iter().chain(k2) {
        check_in_field(field, p, "restriction point")?;
    }
    let mut mask = vec![false; field.rows * field.cols];
    for &p in k2 {
        mask[(p.x - 1) * field.cols + (p.y - 1)] = true;
    }
    let mut starts: Vec<LatticePoint> = k1.to_vec();
    starts.sort();
    starts.dedup();
    let w_lin = linear_weights(field);
    let best = starts
        .par_iter()
        .map(|&s| {
            let mut buf = Vec::new();
            w_lin
                .as_deref()
                .and_then(|w| sweep_from_linear(field, w, s, Some(&mask), &mut buf))
                .unwrap_or_else(|| sweep_from(field, s, Some(&mask), &mut buf))
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold(Best::none(), Best::merge);
    if best.value == f64::NEG_INFINITY {
        return Ok(MaxFreeEnergyResult {
            value: f64::NEG_INFINITY,
            arg_start: None,
            arg_end: None,
            mode: FreeEnergyMode::CornerRestricted,
            delta: None,
        });
    }
    Ok(MaxFreeEnergyResult {
        value: best.value,
        arg_start: Some(best.start),
        arg_end: Some(best.end),
        mode: FreeEnergyMode::CornerRestricted,
        delta: None,
    })
}

/// Side length ⌊N^{1/3+2δ}⌋ of the corner boxes, clamped to [1, N].
pub fn corner_side(n: usize, delta: f64) -> Result<usize> {
    if !(delta > 0.0 && delta < 1.0 / 3.0) {
        return Err(Error::Domain(format!(
            "delta must lie in (0, 1/3), got {delta}"
        )));
    }
    if n == 0 {
        return Err(Error::Domain("N must be >= 1".into()));
    }
    // guard against 8^{1/3} evaluating to 1.999... before the floor
    let side = ((n as f64).powf(1.0 / 3.0 + 2.0 * delta) + 1e-9).floor() as usize;
    Ok(side.clamp(1, n))
}

/// South-west and north-east corners of side ⌊N^{1/3+2δ}⌋ (NE mirrored).
pub fn corner_sets(n: usize, delta: f64) -> Result<(Vec<LatticePoint>, Vec<LatticePoint>)> {
    let s = corner_side(n, delta)?;
    let mut sw = Vec::with_capacity(s * s);
    let mut ne = Vec::with_capacity(s * s);
    for x in 1..=s {
        for y in 1..=s {
            sw.push(LatticePoint::new(x, y));
            ne.push(LatticePoint::new(n - s + x, n - s + y));
        }
    }
    Ok((sw, ne))
}

/// The outer boundary layers of the two corners, split into their
/// sub-frames. The corner point shared by two sub-frames is assigned to
/// exactly one of them (right for SW, left for NE).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CornerFrames {
    pub sw_right: Vec<LatticePoint>,
    pub sw_top: Vec<LatticePoint>,
    pub ne_left: Vec<LatticePoint>,
    pub ne_bottom: Vec<LatticePoint>,
}

impl CornerFrames {
    pub fn sw(&self) -> Vec<LatticePoint> {
        let mut v = self.sw_right.clone();
        v.extend_from_slice(&self.sw_top);
        v
    }

    pub fn ne(&self) -> Vec<LatticePoint> {
        let mut v = self.ne_left.clone();
        v.extend_from_slice(&self.ne_bottom);
        v
    }
}

/// Frames of the corner sets: points just outside a corner whose left
/// or lower (resp. right or upper) neighbor lies inside it.
pub fn frame_sets(n: usize, delta: f64) -> Result<CornerFrames> {
    let s = corner_side(n, delta)?;
    let k = s + 1;
    let mut frames = CornerFrames {
        sw_right: Vec::new(),
        sw_top: Vec::new(),
        ne_left: Vec::new(),
        ne_bottom: Vec::new(),
    };
    if k > n {
        // frame layer falls outside the field
        return Ok(frames);
    }
    for j in 1..=k {
        frames.sw_right.push(LatticePoint::new(k, j));
    }
    for i in 1..k {
        frames.sw_top.push(LatticePoint::new(i, k));
    }
    let m = n - k + 1;
    for j in m..=n {
        frames.ne_left.push(LatticePoint::new(m, j));
    }
    for i in (m + 1)..=n {
        frames.ne_bottom.push(LatticePoint::new(i, m));
    }
    Ok(frames)
}

/// Hexagonal diagonal strip between p and q with half-width a.
///
/// Boundary vertices: p -> p+(a,0) -> q-(0,a) -> q -> q-(a,0) ->
/// p+(0,a) -> p. For square spans this is exactly the band
/// |(i - p.x) - (j - p.y)| <= a intersected with the rectangle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hexagon {
    pub p: LatticePoint,
    pub q: LatticePoint,
    pub a: f64,
}

impl Hexagon {
    pub fn new(p: LatticePoint, q: LatticePoint, a: f64) -> Result<Self> {
        if !p.leq(&q) {
            return Err(Error::Ordering(format!(
                "hexagon requires p <= q, got ({},{}) and ({},{})",
                p.x, p.y, q.x, q.y
            )));
        }
        if !(a >= 0.0) {
            return Err(Error::Geometry(format!("half-width a must be >= 0, got {a}")));
        }
        let min_side = (q.x - p.x).min(q.y - p.y) as f64;
        if min_side < a {
            return Err(Error::Geometry(format!(
                "min side {min_side} smaller than a = {a}"
            )));
        }
        Ok(Self { p, q, a })
    }

    /// Lattice membership in the closed hexagonal domain.
    pub fn contains(&self, x: usize, y: usize) -> bool {
        if x < self.p.x || x > self.q.x || y < self.p.y || y > self.q.y {
            return false;
        }
        let dx = (self.q.x - self.p.x) as f64 - self.a;
        let dy = (self.q.y - self.p.y) as f64 - self.a;
        let xi = (x - self.p.x) as f64;
        let yj = (y - self.p.y) as f64;
        // on/above the lower-right edge
        if dx * yj - dy * (xi - self.a) < 0.0 {
            return false;
        }
        let xq = x as f64 - self.q.x as f64;
        let yq = y as f64 - self.q.y as f64;
        // on/below the upper-left edge
        if dy * (xq + self.a) - dx * yq < 0.0 {
            return false;
        }
        true
    }
}

/// log Z(p; q; a): path sum restricted to vertices inside the hexagon.
/// Returns -inf when no admissible path exists (the Z = 0 convention).
pub fn log_partition_hexagon(field: &WeightField, hex: &Hexagon) -> Result<f64> {
    check_in_field(field, hex.p, "hexagon p")?;
    check_in_field(field, hex.q, "hexagon q")?;
    let cols = field.cols;
    let lw = field.log_weights();
    let (p, q) = (hex.p, hex.q);
    let width = q.y - p.y + 1;
    let mut buf = vec![f64::NEG_INFINITY; width];
    buf[0] = lw[(p.x - 1) * cols + (p.y - 1)];
    for i in p.x..=q.x {
        let row = &lw[(i - 1) * cols + (p.y - 1)..(i - 1) * cols + q.y];
        let first_row = i == p.x;
        let start_j = usize::from(first_row);
        let mut left = if first_row { buf[0] } else { f64::NEG_INFINITY };
        for jj in start_j..width {
            let above = if first_row { f64::NEG_INFINITY } else { buf[jj] };
            // finite + (-inf) stays -inf, so unreachable cells propagate
            let v = if hex.contains(i, p.y + jj) {
                row[jj] + log_add_exp(above, left)
            } else {
                f64::NEG_INFINITY
            };
            buf[jj] = v;
            left = v;
        }
    }
    Ok(buf[width - 1])
}

/// The disjoint-strip lower-bound statistic for the critical phase.
#[derive(Debug, Clone)]
pub struct CriticalLowerBound {
    /// max over the strip log partition functions.
    pub y_n: f64,
    pub strip_log_z: Vec<f64>,
    pub strips: Vec<Hexagon>,
    pub m: usize,
    pub k_width: usize,
}

fn strip_geometry(n: usize) -> Result<(usize, usize, usize)> {
    if n < 2 {
        return Err(Error::Size("need N >= 2 for the strip construction".into()));
    }
    let m = n / 2;
    let k_width = (m as f64).powf(0.75).floor() as usize;
    let k_strips = ((n as f64).powf(0.125) + 1e-9).floor() as usize;
    let top = m + 2 * k_width * (k_strips - 1);
    if top > n {
        return Err(Error::Size(format!(
            "strips reach column {top}, field side is {n}"
        )));
    }
    Ok((m, k_width, k_strips))
}

/// Y_N = max_i log Z(P_i; Q_i; K-1) over k disjoint diagonal strips,
/// with M = ⌊N/2⌋, K = ⌊M^{3/4}⌋, k = ⌊N^{1/8}⌋,
/// P_i = (1, 1 + 2K(i-1)), Q_i = (M, M + 2K(i-1)).
pub fn critical_lower_bound_statistic(field: &WeightField) -> Result<CriticalLowerBound> {
    let n = field.square_side()?;
    let (m, k_width, k_strips) = strip_geometry(n)?;
    let a = (k_width - 1) as f64;
    let mut strips = Vec::with_capacity(k_strips);
    for i in 0..k_strips {
        let off = 2 * k_width * i;
        strips.push(Hexagon::new(
            LatticePoint::new(1, 1 + off),
            LatticePoint::new(m, m + off),
            a,
        )?);
    }
    // the strips must be pairwise disjoint in (y - x): band i covers
    // [2K(i-1) - (K-1), 2K(i-1) + (K-1)], adjacent bands are 2 apart
    for w in strips.windows(2) {
        let hi = (w[0].q.y - w[0].q.x) as f64 + a;
        let lo = (w[1].p.y - w[1].p.x) as f64 - a;
        assert!(lo > hi, "strip bands overlap");
    }
    let strip_log_z: Vec<f64> = strips
        .par_iter()
        .map(|hx| log_partition_hexagon(field, hx))
        .collect::<Result<_>>()?;
    let y_n = strip_log_z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(CriticalLowerBound {
        y_n,
        strip_log_z,
        strips,
        m,
        k_width,
    })
}

/// Y_N without materializing the full N x N field: only the
/// strip-covering subrectangle is sampled. Per-cell seeding makes the
/// values bit-identical to `critical_lower_bound_statistic` on the
/// full field with the same (theta, seed).
pub fn critical_lower_bound_statistic_sampled(
    theta: f64,
    n: usize,
    seed: u64,
) -> Result<CriticalLowerBound> {
    let (m, k_width, k_strips) = strip_geometry(n)?;
    let cols = m + 2 * k_width * (k_strips - 1);
    let sub = crate::sampler::sample_field(theta, m, cols, seed)?;
    let a = (k_width - 1) as f64;
    let mut strips = Vec::with_capacity(k_strips);
    for i in 0..k_strips {
        let off = 2 * k_width * i;
        strips.push(Hexagon::new(
            LatticePoint::new(1, 1 + off),
            LatticePoint::new(m, m + off),
            a,
        )?);
    }
    let strip_log_z: Vec<f64> = strips
        .par_iter()
        .map(|hx| log_partition_hexagon(&sub, hx))
        .collect::<Result<_>>()?;
    let y_n = strip_log_z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(CriticalLowerBound {
        y_n,
        strip_log_z,
        strips,
        m,
        k_width,
    })
}

/// The rescaled free energy (log Z(1,1;M,N) + M h(N/M)) / (M^{1/3} σ(N/M)).
pub fn rescaled_free_energy(field: &WeightField, m: usize, n: usize) -> Result<f64> {
    if m < 1 || n < 1 {
        return Err(Error::Domain("need M, N >= 1".into()));
    }
    let end = LatticePoint::new(m, n);
    check_in_field(field, end, "end")?;
    let log_z = log_partition(field, LatticePoint::new(1, 1), end)?;
    let sf = ScaleFunctions::new(field.theta)?;
    let ratio = n as f64 / m as f64;
    let m13 = (m as f64).cbrt();
    Ok((log_z + m as f64 * sf.h(ratio)?) / (m13 * sf.sigma(ratio)?))
}

/// The rescaled free-energy profile sampled on the KPZ transversal grid
/// and extended by linear interpolation.
#[derive(Debug, Clone)]
pub struct ProfileCurve {
    pub xs: Vec<f64>,
    pub values: Vec<f64>,
}

impl ProfileCurve {
    /// Linear interpolation between sample points; clamped at the ends.
    pub fn eval(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x <= self.xs[0] {
            return self.values[0];
        }
        if x >= self.xs[n - 1] {
            return self.values[n - 1];
        }
        let idx = self.xs.partition_point(|&u| u <= x).saturating_sub(1);
        let (x0, x1) = (self.xs[idx], self.xs[idx + 1]);
        let t = (x - x0) / (x1 - x0);
        self.values[idx] * (1.0 - t) + self.values[idx + 1] * t
    }
}

/// Sample f^LG at x-grid spacing N^{-2/3}:
/// f(x) = N^{-1/3} (log Z(1,1; ⌊rN⌋ + xN^{2/3}, N) + h(r) N + h'(r) x N^{2/3}).
pub fn profile_f_lg(field: &WeightField, n: usize, r: f64, t: f64) -> Result<ProfileCurve> {
    if n < 1 || !(r > 0.0) || !(t > 0.0) {
        return Err(Error::Domain("need N >= 1, r > 0, T > 0".into()));
    }
    let n23 = (n as f64).powf(2.0 / 3.0);
    if (r * n as f64) < 2.0 + t * n23 {
        return Err(Error::Domain(format!(
            "profile requires rN >= 2 + T N^(2/3): {} < {}",
            r * n as f64,
            2.0 + t * n23
        )));
    }
    let base = (r * n as f64).floor() as usize;
    let k_max = (t * n23).floor() as usize + 1;
    let rows_needed = base + k_max;
    if rows_needed > field.rows || n > field.cols {
        return Err(Error::Bounds(format!(
            "profile needs a {}x{} field, have {}x{}",
            rows_needed, n, field.rows, field.cols
        )));
    }
    let sf = ScaleFunctions::new(field.theta)?;
    let h_r = sf.h(r)?;
    let hp_r = sf.h_prime(r)?;
    let grid = log_partition_grid(field, LatticePoint::new(1, 1))?;
    let n13 = (n as f64).cbrt();
    let mut xs = Vec::with_capacity(2 * k_max + 1);
    let mut values = Vec::with_capacity(2 * k_max + 1);
    for k in -(k_max as i64)..=(k_max as i64) {
        let row = (base as i64 + k) as usize;
        let log_z = grid.value(row, n);
        xs.push(k as f64 / n23);
        values.push((log_z + h_r * n as f64 + hp_r * k as f64) / n13);
    }
    Ok(ProfileCurve { xs, values })
}
