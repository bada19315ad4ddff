//! Linear analysis at the endemic equilibrium, one cosine mode at a time.
//!
//! Projecting the linearization onto `cos(n x / l)` factors the
//! characteristic equation. The factor that can reach the imaginary axis is
//!
//! ```text
//! λ² + A_n λ + B_n + e^{-λω} (C λ + D_n) = 0
//! ```
//!
//! and everything here is built on its closed-form crossing analysis.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::ModelParams;

/// Number of additional delay branches computed per mode by default.
pub const DEFAULT_J_MAX: usize = 5;

/// Relative tolerance under which two critical delays count as a tie.
pub const TIE_TOL: f64 = 1e-9;

/// Lower bound on `S_n` before a branch warning is logged.
const SINE_FLOOR: f64 = -1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModeCoefficients {
    pub n: usize,
    #[serde(rename = "A_n")]
    pub a: f64,
    #[serde(rename = "B_n")]
    pub b: f64,
    #[serde(rename = "C")]
    pub c: f64,
    #[serde(rename = "D_n")]
    pub d: f64,
}

impl ModeCoefficients {
    /// Quartic coefficients `(p, q)` of `z⁴ + p z² + q = 0`.
    pub fn quartic(&self) -> (f64, f64) {
        let p = self.a * self.a - 2.0 * self.b - self.c * self.c;
        let q = self.b * self.b - self.d * self.d;
        (p, q)
    }

    pub fn discriminant(&self) -> f64 {
        let (p, q) = self.quartic();
        p * p - 4.0 * q
    }

    /// Left side of the mode characteristic equation at `(λ, ω)`.
    pub fn characteristic(&self, lambda: Complex64, omega: f64) -> Complex64 {
        lambda * lambda
            + self.a * lambda
            + self.b
            + (-lambda * omega).exp() * (self.c * lambda + self.d)
    }
}

pub fn mode_coefficients(p: &ModelParams, n: usize) -> Result<ModeCoefficients> {
    let i_star = p.endemic()?[1];
    Ok(coefficients_at(p, i_star, n))
}

fn coefficients_at(p: &ModelParams, i_star: f64, n: usize) -> ModeCoefficients {
    let k = p.wavenumber_sq(n);
    let c = p.mu * i_star;
    ModeCoefficients {
        n,
        a: p.d + (p.d1 + p.d2) * k,
        b: p.d2 * k * (p.d + p.d1 * k),
        c,
        d: c * (p.d2 * k + p.d),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModeCutoff {
    /// Largest mode with `B_n - D_n < 0`.
    pub n1: usize,
    /// Positive real root of `B_n - D_n = 0` viewed as a function of `n`.
    pub n2: f64,
}

pub fn mode_cutoff(p: &ModelParams) -> Result<ModeCutoff> {
    let i_star = p.endemic()?[1];
    let c = p.mu * i_star;
    let l2 = p.l * p.l;
    // B - D as a quadratic in X = n².
    let qa = p.d1 * p.d2 / (l2 * l2);
    let qb = (p.d - c) * p.d2 / l2;
    let qc = -c * p.d;
    let root = qb * qb - 4.0 * qa * qc;
    let q = -0.5 * (qb + qb.signum() * root.sqrt());
    let x = if qb >= 0.0 { qc / q } else { q / qa };
    let n2 = x.sqrt();

    let gap = |n: usize| {
        let m = coefficients_at(p, i_star, n);
        m.b - m.d
    };
    let mut n1 = n2.floor() as usize;
    while gap(n1 + 1) < 0.0 {
        n1 += 1;
    }
    while n1 > 0 && gap(n1) >= 0.0 {
        n1 -= 1;
    }
    Ok(ModeCutoff { n1, n2 })
}

/// Positive root `z_n` of the crossing quartic, or `None` when mode `n`
/// never reaches the imaginary axis.
pub fn crossing_frequency(p: &ModelParams, n: usize) -> Result<Option<f64>> {
    Ok(frequency_of(&mode_coefficients(p, n)?))
}

fn frequency_of(m: &ModeCoefficients) -> Option<f64> {
    if m.b - m.d >= 0.0 {
        return None;
    }
    let (p, q) = m.quartic();
    let sq = (p * p - 4.0 * q).sqrt();
    let z2 = if p > 0.0 {
        -2.0 * q / (p + sq)
    } else {
        0.5 * (sq - p)
    };
    Some(z2.sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HopfCrossing {
    pub n: usize,
    pub coefficients: ModeCoefficients,
    pub z: f64,
    /// `sin(z ω)` at a crossing.
    pub sin: f64,
    /// `cos(z ω)` at a crossing.
    pub cos: f64,
    pub discriminant: f64,
    /// `ω_n^j` for `j = 0..=j_max`.
    pub omegas: Vec<f64>,
}

impl HopfCrossing {
    pub fn omega0(&self) -> f64 {
        self.omegas[0]
    }
}

pub fn critical_delays(p: &ModelParams, n: usize, j_max: usize) -> Result<HopfCrossing> {
    let m = mode_coefficients(p, n)?;
    crossing_of(m, j_max).ok_or(Error::ModeStableForAllDelays { n })
}

fn crossing_of(m: ModeCoefficients, j_max: usize) -> Option<HopfCrossing> {
    let z = frequency_of(&m)?;
    let (a, b, c, d) = (m.a, m.b, m.c, m.d);
    let z2 = z * z;
    let den = c * c * z2 + d * d;
    let sin = z * (a * d - b * c + z2 * c) / den;
    let cos = -(a * c * z2 + (b - z2) * d) / den;
    if sin < SINE_FLOOR {
        log::warn!("mode {}: sin(zω) = {sin:e} is negative; using the lower branch", m.n);
    }
    let acos = cos.clamp(-1.0, 1.0).acos();
    let base = if sin >= 0.0 { acos } else { 2.0 * PI - acos };
    let omegas = (0..=j_max)
        .map(|j| (base + 2.0 * PI * j as f64) / z)
        .collect();
    Some(HopfCrossing {
        n: m.n,
        coefficients: m,
        z,
        sin,
        cos,
        discriminant: m.discriminant(),
        omegas,
    })
}

/// All crossings for `n = 0..=n1`.
pub fn crossings(p: &ModelParams, j_max: usize) -> Result<Vec<HopfCrossing>> {
    let cut = mode_cutoff(p)?;
    let i_star = p.endemic()?[1];
    Ok((0..=cut.n1)
        .filter_map(|n| crossing_of(coefficients_at(p, i_star, n), j_max))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FirstHopf {
    pub n0: usize,
    pub omega_star: f64,
    pub z_star: f64,
    /// Every mode whose first critical delay ties with `omega_star`; empty
    /// when the minimizer is unique.
    pub ties: Vec<usize>,
}

impl FirstHopf {
    pub fn is_tie(&self) -> bool {
        !self.ties.is_empty()
    }

    /// Predicted oscillation period at onset, in original time.
    pub fn period(&self) -> f64 {
        2.0 * PI / self.z_star
    }
}

pub fn first_hopf(p: &ModelParams) -> Result<FirstHopf> {
    let all = crossings(p, 0)?;
    Ok(first_of(&all))
}

fn first_of(all: &[HopfCrossing]) -> FirstHopf {
    let best = all
        .iter()
        .min_by(|x, y| x.omega0().total_cmp(&y.omega0()))
        .expect("mode 0 always crosses");
    let ties: Vec<usize> = all
        .iter()
        .filter(|c| {
            let scale = c.omega0().max(best.omega0());
            (c.omega0() - best.omega0()).abs() < TIE_TOL * scale
        })
        .map(|c| c.n)
        .collect();
    FirstHopf {
        n0: best.n,
        omega_star: best.omega0(),
        z_star: best.z,
        ties: if ties.len() > 1 { ties } else { Vec::new() },
    }
}

/// `Re (dλ/dω)⁻¹` at `ω_n^j`, from the closed form `√Δ / (C² z² + D²)`.
pub fn transversality(p: &ModelParams, n: usize, j: usize) -> Result<f64> {
    let cr = critical_delays(p, n, j)?;
    Ok(transversality_of(&cr))
}

fn transversality_of(cr: &HopfCrossing) -> f64 {
    let m = &cr.coefficients;
    cr.discriminant.sqrt() / (m.c * m.c * cr.z * cr.z + m.d * m.d)
}

/// Complex `(dλ/dω)⁻¹` along the root through `i z_n` at `ω_n^j`.
pub fn inverse_root_speed(p: &ModelParams, n: usize, j: usize) -> Result<Complex64> {
    let cr = critical_delays(p, n, j)?;
    Ok(inverse_speed_of(&cr.coefficients, cr.z, cr.omegas[j]))
}

pub(crate) fn inverse_speed_of(m: &ModeCoefficients, z: f64, omega: f64) -> Complex64 {
    let lam = Complex64::new(0.0, z);
    let q = m.c * lam + m.d;
    (2.0 * lam + m.a) / ((-lam * omega).exp() * lam * q) + (m.c - omega * q) / (lam * q)
}

/// `dλ/dω` at `ω_n^j`.
pub fn root_speed(p: &ModelParams, n: usize, j: usize) -> Result<Complex64> {
    Ok(inverse_root_speed(p, n, j)?.inv())
}

/// `α² e^{-2dτ} - (2β y* + d₃ n²/l²)²`; negative means the mature factor
/// never has purely imaginary roots.
pub fn third_factor_margin(p: &ModelParams, n: usize) -> f64 {
    let recruit = p.alpha * p.survival();
    let y_bar = recruit / p.beta;
    let s = 2.0 * p.beta * y_bar + p.d3 * p.wavenumber_sq(n);
    recruit * recruit - s * s
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stability {
    Stable,
    Unstable,
    /// On the stability boundary within tolerance; no claim is made.
    Critical,
    Absent,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityReport {
    #[serde(rename = "E0")]
    pub e0: Stability,
    #[serde(rename = "E1")]
    pub e1: Stability,
    #[serde(rename = "E2")]
    pub e2: Stability,
    pub omega_star: Option<f64>,
}

pub fn linear_stability(p: &ModelParams) -> Result<StabilityReport> {
    p.validate()?;
    let eq = p.equilibria();
    let e1 = if eq.at_threshold {
        Stability::Critical
    } else if eq.r0 < 1.0 {
        Stability::Stable
    } else {
        Stability::Unstable
    };
    let (e2, omega_star) = match eq.e2 {
        None => (Stability::Absent, None),
        Some(_) => {
            let w = first_hopf(p)?.omega_star;
            let s = if (p.omega - w).abs() <= TIE_TOL * w {
                Stability::Critical
            } else if p.omega < w {
                Stability::Stable
            } else {
                Stability::Unstable
            };
            (s, Some(w))
        }
    };
    Ok(StabilityReport {
        e0: Stability::Unstable,
        e1,
        e2,
        omega_star,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Pattern {
    /// `ω_n^0` increases over the whole range.
    Increasing,
    /// Decreases for `n ≤ m`, then increases.
    DecreasingThenIncreasing { m: usize },
    Mixed,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonotonicityProfile {
    pub omegas: Vec<f64>,
    pub pattern: Pattern,
    /// Largest `m` with `ω_n^0` decreasing on `0..=m`.
    pub decreasing_until: usize,
    /// `ω_n^0` decreasing on `0..=m` for some `m ≥ 1`.
    pub h1: bool,
    /// `ω_n^0` increasing for `n ≥ 1`.
    pub h2: bool,
    pub minimizer: usize,
}

pub fn monotonicity_profile(p: &ModelParams) -> Result<MonotonicityProfile> {
    let omegas: Vec<f64> = crossings(p, 0)?.iter().map(|c| c.omega0()).collect();
    let last = omegas.len() - 1;
    let mut m = 0;
    while m < last && omegas[m + 1] < omegas[m] {
        m += 1;
    }
    let increasing_from = |k: usize| omegas[k..].windows(2).all(|w| w[1] > w[0]);
    let pattern = if m == 0 && increasing_from(0) {
        Pattern::Increasing
    } else if m > 0 && increasing_from(m) {
        Pattern::DecreasingThenIncreasing { m }
    } else {
        Pattern::Mixed
    };
    let minimizer = omegas
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap_or(0);
    Ok(MonotonicityProfile {
        h1: m >= 1,
        h2: increasing_from(1.min(last)),
        omegas,
        pattern,
        decreasing_until: m,
        minimizer,
    })
}

/// Per-mode summary record.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModeRecord {
    pub n: usize,
    #[serde(rename = "A_n")]
    pub a: f64,
    #[serde(rename = "B_n")]
    pub b: f64,
    #[serde(rename = "C")]
    pub c: f64,
    #[serde(rename = "D_n")]
    pub d: f64,
    pub z_n: Option<f64>,
    pub omegas: Vec<f64>,
    pub transversality: Option<f64>,
}

/// Records for modes `0..=n_max`; modes without a crossing carry `None`.
pub fn mode_records(p: &ModelParams, n_max: usize, j_max: usize) -> Result<Vec<ModeRecord>> {
    let i_star = p.endemic()?[1];
    Ok((0..=n_max)
        .map(|n| {
            let m = coefficients_at(p, i_star, n);
            let cr = crossing_of(m, j_max);
            ModeRecord {
                n,
                a: m.a,
                b: m.b,
                c: m.c,
                d: m.d,
                z_n: cr.as_ref().map(|c| c.z),
                transversality: cr.as_ref().map(transversality_of),
                omegas: cr.map(|c| c.omegas).unwrap_or_default(),
            }
        })
        .collect())
}
