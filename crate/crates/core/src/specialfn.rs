//! Digamma/polygamma evaluation and the model constants built on them.
//!
//! All evaluators use the same scheme: shift the argument above a
//! threshold with the recurrence, then apply the Bernoulli asymptotic
//! expansion. Naive summation of the defining series converges far too
//! slowly for the 1e-12 accuracy contract.

use crate::error::{Error, Result};
use std::sync::OnceLock;

/// Euler-Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

const SHIFT_THRESHOLD: f64 = 10.0;

// B_{2k}/(2k) for k = 1..8
const DIGAMMA_COEFF: [f64; 8] = [
    1.0 / 12.0,
    -1.0 / 120.0,
    1.0 / 252.0,
    -1.0 / 240.0,
    1.0 / 132.0,
    -691.0 / 32760.0,
    1.0 / 12.0,
    -3617.0 / 8160.0,
];

// B_{2k} for k = 1..8
const BERNOULLI: [f64; 8] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
    -3617.0 / 510.0,
];

// B_{2k}/((2k)(2k-1)) for k = 1..8, Stirling series of log-gamma
const LNGAMMA_COEFF: [f64; 8] = [
    1.0 / 12.0,
    -1.0 / 360.0,
    1.0 / 1260.0,
    -1.0 / 1680.0,
    1.0 / 1188.0,
    -691.0 / 360360.0,
    7.0 / 1092.0,
    -3617.0 / 122400.0,
];

fn check_positive(name: &str, z: f64) -> Result<()> {
    if !z.is_finite() || z <= 0.0 {
        return Err(Error::Domain(format!("{name} requires z > 0, got {z}")));
    }
    Ok(())
}

/// Digamma function Ψ(z) for z > 0.
pub fn digamma(z: f64) -> Result<f64> {
    check_positive("digamma", z)?;
    let mut acc = 0.0;
    let mut x = z;
    while x < SHIFT_THRESHOLD {
        acc -= 1.0 / x;
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    let mut term = inv2;
    let mut tail = 0.0;
    for c in DIGAMMA_COEFF {
        tail += c * term;
        term *= inv2;
    }
    Ok(acc + x.ln() - 0.5 * inv - tail)
}

/// Polygamma function of order 1 (Ψ') or 2 (Ψ'') for z > 0.
pub fn polygamma(order: u32, z: f64) -> Result<f64> {
    check_positive("polygamma", z)?;
    match order {
        1 => Ok(trigamma_unchecked(z)),
        2 => Ok(tetragamma_unchecked(z)),
        other => Err(Error::UnsupportedOrder(other)),
    }
}

fn trigamma_unchecked(z: f64) -> f64 {
    let mut acc = 0.0;
    let mut x = z;
    while x < SHIFT_THRESHOLD {
        acc += 1.0 / (x * x);
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    let mut term = inv * inv2;
    let mut tail = 0.0;
    for b in BERNOULLI {
        tail += b * term;
        term *= inv2;
    }
    acc + inv + 0.5 * inv2 + tail
}

fn tetragamma_unchecked(z: f64) -> f64 {
    let mut acc = 0.0;
    let mut x = z;
    while x < SHIFT_THRESHOLD {
        acc -= 2.0 / (x * x * x);
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    let mut term = inv2 * inv2;
    let mut tail = 0.0;
    for (k, b) in BERNOULLI.iter().enumerate() {
        tail += (2 * k as u32 + 3) as f64 * b * term;
        term *= inv2;
    }
    acc - inv2 - inv * inv2 - tail
}

/// Natural log of the gamma function for z > 0.
pub fn ln_gamma(z: f64) -> Result<f64> {
    check_positive("ln_gamma", z)?;
    let mut acc = 0.0;
    let mut x = z;
    while x < SHIFT_THRESHOLD {
        acc -= x.ln();
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    let mut term = inv;
    let mut tail = 0.0;
    for c in LNGAMMA_COEFF {
        tail += c * term;
        term *= inv2;
    }
    const HALF_LN_TWO_PI: f64 = 0.918_938_533_204_672_8;
    Ok(acc + (x - 0.5) * x.ln() - x + HALF_LN_TWO_PI + tail)
}

/// Bisection of a strictly increasing function to bracket width `tol`.
///
/// Deterministic and derivative-free; capped at 200 halvings.
fn bisect_increasing<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    debug_assert!(f(lo) <= 0.0 && f(hi) >= 0.0);
    for _ in 0..200 {
        if hi - lo <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// The critical shape parameter: θ_c = 2γ* where Ψ(γ*) = 0.
///
/// Ψ is strictly increasing on (0, ∞) with a sign change in [1, 2], so
/// bisection on that bracket always succeeds.
pub fn critical_theta() -> f64 {
    static CACHE: OnceLock<f64> = OnceLock::new();
    *CACHE.get_or_init(|| {
        let root = bisect_increasing(|x| digamma(x).unwrap(), 1.0, 2.0, 1e-14);
        2.0 * root
    })
}

/// Shape parameter with its derived model constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolymerParams {
    pub theta: f64,
    /// Cached critical point θ_c (independent of θ).
    pub theta_c: f64,
    /// Ψ(θ/2), the per-step drift of the diagonal free energy.
    pub psi_half_theta: f64,
    /// (-Ψ''(θ/2))^{1/3}, the diagonal fluctuation scale.
    pub sigma_theta: f64,
}

impl PolymerParams {
    pub fn new(theta: f64) -> Result<Self> {
        if !theta.is_finite() || theta <= 0.0 {
            return Err(Error::Domain(format!("theta must be positive, got {theta}")));
        }
        let psi_half_theta = digamma(theta / 2.0)?;
        let sigma_theta = (-polygamma(2, theta / 2.0)?).cbrt();
        Ok(Self {
            theta,
            theta_c: critical_theta(),
            psi_half_theta,
            sigma_theta,
        })
    }

    /// Subcritical, critical or supercritical phase of this θ.
    pub fn is_subcritical(&self) -> bool {
        self.theta < self.theta_c
    }
}

/// The scale functions g, g⁻¹, h and σ(x) of the polymer free energy.
///
/// g(z) = Ψ'(θ-z)/Ψ'(z) is a smooth increasing bijection (0,θ) → (0,∞);
/// everything else is evaluated through its inverse.
#[derive(Debug, Clone, Copy)]
pub struct ScaleFunctions {
    pub theta: f64,
}

impl ScaleFunctions {
    pub fn new(theta: f64) -> Result<Self> {
        if !theta.is_finite() || theta <= 0.0 {
            return Err(Error::Domain(format!("theta must be positive, got {theta}")));
        }
        Ok(Self { theta })
    }

    /// g(z) = Ψ'(θ-z)/Ψ'(z) for z in (0, θ).
    pub fn g(&self, z: f64) -> Result<f64> {
        if !(z > 0.0 && z < self.theta) {
            return Err(Error::Domain(format!(
                "g requires z in (0, {}), got {z}",
                self.theta
            )));
        }
        Ok(trigamma_unchecked(self.theta - z) / trigamma_unchecked(z))
    }

    /// Inverse of g, computed by bisection on a bracket that hugs the
    /// endpoints (the bijection is only asserted on the open interval,
    /// so the initial bracket starts at relative offset 1e-9 and widens
    /// toward the endpoints if needed).
    pub fn g_inverse(&self, x: f64) -> Result<f64> {
        if !x.is_finite() || x <= 0.0 {
            return Err(Error::Domain(format!("g_inverse requires x > 0, got {x}")));
        }
        let th = self.theta;
        let mut eps = 1e-9;
        let (mut lo, mut hi) = (eps * th, (1.0 - eps) * th);
        // widen adaptively when x falls outside the initial bracket image
        while self.g(lo).unwrap() > x && eps > 1e-15 {
            eps *= 1e-3;
            lo = eps * th;
        }
        let mut eps_hi = 1e-9;
        while self.g(hi).unwrap() < x && eps_hi > 1e-15 {
            eps_hi *= 1e-3;
            hi = (1.0 - eps_hi) * th;
        }
        let f = |z: f64| trigamma_unchecked(th - z) / trigamma_unchecked(z) - x;
        Ok(bisect_increasing(f, lo, hi, 1e-14 * th.max(1.0)))
    }

    /// h(x) = x·Ψ(g⁻¹(x)) + Ψ(θ - g⁻¹(x)), the law-of-large-numbers shape.
    pub fn h(&self, x: f64) -> Result<f64> {
        if !x.is_finite() || x <= 0.0 {
            return Err(Error::Domain(format!("h requires x > 0, got {x}")));
        }
        let u = self.g_inverse(x)?;
        Ok(x * digamma(u)? + digamma(self.theta - u)?)
    }

    /// h'(x) = Ψ(g⁻¹(x)).
    pub fn h_prime(&self, x: f64) -> Result<f64> {
        if !x.is_finite() || x <= 0.0 {
            return Err(Error::Domain(format!("h_prime requires x > 0, got {x}")));
        }
        digamma(self.g_inverse(x)?)
    }

    /// σ(x) = (x·Σ 1/(n+g⁻¹(x))³ + Σ 1/(n+θ-g⁻¹(x))³)^{1/3}, the
    /// direction-dependent fluctuation scale.
    pub fn sigma(&self, x: f64) -> Result<f64> {
        if !x.is_finite() || x <= 0.0 {
            return Err(Error::Domain(format!("sigma requires x > 0, got {x}")));
        }
        let u = self.g_inverse(x)?;
        // Σ 1/(n+a)³ = -Ψ''(a)/2
        let s1 = -0.5 * tetragamma_unchecked(u);
        let s2 = -0.5 * tetragamma_unchecked(self.theta - u);
        Ok((x * s1 + s2).cbrt())
    }
}
