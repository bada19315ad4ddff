//! Center-manifold reduction at the first Hopf point and the resulting
//! Hopf coefficients `c1(0)`, `μ2`, `β2`, `T2`.
//!
//! Time is rescaled by `ω*` so the freely-moving delay becomes 1 and the
//! maturation delay becomes `τ* = τ/ω*`. Segments are sums of exponentials
//! (see [`segment`]) so every pairing is evaluated in closed form.

pub mod segment;

use std::f64::consts::PI;

use nalgebra::{Matrix2, Matrix3, Vector3};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::spectral::{self, FirstHopf};

pub use segment::{bilinear_form, DelayKernel, ExpTerm, Segment};

type C = Complex64;

const ZERO: C = C::new(0.0, 0.0);
const I: C = C::new(0.0, 1.0);

fn re(x: f64) -> C {
    C::new(x, 0.0)
}

/// Amplitude convention for the critical eigenfunction `a · b_{n0}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeScaling {
    /// Homogeneous onset uses the constant function 1 (the ODE reduction);
    /// inhomogeneous onset uses the L²-normalized cosine.
    #[default]
    UnitConstant,
    /// Always the L²-normalized cosine.
    Orthonormal,
}

/// `∫_0^{lπ} b_a b_b b_c dx` for the L²-normalized Neumann cosines
/// `b_0 = (lπ)^{-1/2}`, `b_n = (2/(lπ))^{1/2} cos(n x/l)`.
pub fn cosine_triple(l: f64, a: usize, b: usize, c: usize) -> f64 {
    let len = l * PI;
    let norm = |n: usize| {
        if n == 0 {
            len.powf(-0.5)
        } else {
            (2.0 / len).sqrt()
        }
    };
    let (a, b, c) = (a as i64, b as i64, c as i64);
    let hits = [a + b + c, a + b - c, a - b + c, -a + b + c]
        .iter()
        .filter(|&&s| s == 0)
        .count();
    norm(a as usize) * norm(b as usize) * norm(c as usize) * len / 4.0 * hits as f64
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EigenData {
    pub n0: usize,
    pub omega_star: f64,
    pub z_star: f64,
    pub tau_star: f64,
    pub xi1: C,
    pub xi2: C,
    pub eta1: C,
    pub eta2: C,
    /// `(Φ*, Φ)`.
    pub innerprod: [[f64; 2]; 2],
    /// `Ψ1(0) - iΨ2(0)`.
    pub psi0: [C; 3],
    pub scaling: ModeScaling,
    /// Amplitude `a` of the critical eigenfunction `a · b_{n0}`.
    pub amplitude: f64,
    /// `a ∫ b_{n0}³ dx`.
    pub gamma: f64,
    #[serde(skip)]
    pub kernel: DelayKernel,
    #[serde(skip)]
    params: ModelParams,
}

impl EigenData {
    /// `ω0 = z* ω*`, the critical frequency in rescaled time.
    pub fn omega0(&self) -> f64 {
        self.z_star * self.omega_star
    }

    fn span(&self) -> f64 {
        self.kernel.span()
    }

    /// Right eigenvector `p1(θ) = (1, ξ1, ξ2) e^{iω0θ}`.
    pub fn p1(&self) -> Segment {
        Segment::exponential(
            self.span(),
            Vector3::new(re(1.0), self.xi1, self.xi2),
            I * self.omega0(),
        )
    }

    /// Left eigenvector `q1(s) = (1, η1, η2) e^{-iω0 s}`.
    pub fn q1(&self) -> Segment {
        Segment::exponential(
            self.span(),
            Vector3::new(re(1.0), self.eta1, self.eta2),
            -I * self.omega0(),
        )
    }

    pub fn phi(&self) -> [Segment; 2] {
        let p = self.p1();
        [p.re(), p.im()]
    }

    pub fn phi_star(&self) -> [Segment; 2] {
        let q = self.q1();
        [q.re(), q.im()]
    }

    /// `Ψ = (Φ*, Φ)⁻¹ Φ*`.
    pub fn psi(&self) -> Result<[Segment; 2]> {
        let g = to_matrix(self.innerprod);
        let inv = g.try_inverse().ok_or(Error::DegeneratePairing)?;
        let [s1, s2] = self.phi_star();
        let comb = |i: usize| s1.scale(re(inv[(i, 0)])).add(&s2.scale(re(inv[(i, 1)])));
        Ok([comb(0), comb(1)])
    }

    /// `ω* M_n(λ)` with `M_n(λ) = λ + D n²/l² - B1 - B2 e^{-λω*} - B3 e^{-λτ}`
    /// and `λ` in original time.
    pub fn scaled_characteristic_matrix(&self, n: usize, lambda: C) -> Matrix3<C> {
        let k = &self.kernel;
        let p = &self.params;
        let diff = Matrix3::from_diagonal(&Vector3::new(p.d1, p.d2, p.d3)) * p.wavenumber_sq(n);
        let m = Matrix3::from_diagonal_element(lambda) + (diff - k.b1).map(re)
            - k.b2.map(re) * (-lambda * k.omega_star).exp()
            - k.b3.map(re) * (-lambda * p.tau).exp();
        m * re(k.omega_star)
    }
}

fn to_matrix(a: [[f64; 2]; 2]) -> Matrix2<f64> {
    Matrix2::new(a[0][0], a[0][1], a[1][0], a[1][1])
}

/// Linearization blocks at the endemic equilibrium.
pub fn linear_blocks(p: &ModelParams) -> Result<(Matrix3<f64>, Matrix3<f64>, Matrix3<f64>)> {
    let [s, i, y] = p.endemic()?;
    let recruit = p.alpha * p.survival();
    let b1 = Matrix3::new(
        -p.d,
        -p.mu * s + p.gamma,
        p.alpha,
        0.0,
        p.mu * s - p.d - p.gamma,
        0.0,
        0.0,
        0.0,
        -2.0 * p.beta * y,
    );
    let b2 = Matrix3::new(-p.mu * i, 0.0, 0.0, p.mu * i, 0.0, 0.0, 0.0, 0.0, 0.0);
    let b3 = Matrix3::new(0.0, 0.0, -recruit, 0.0, 0.0, 0.0, 0.0, 0.0, recruit);
    Ok((b1, b2, b3))
}

pub fn eigen_basis(p: &ModelParams, fh: &FirstHopf) -> Result<EigenData> {
    eigen_basis_with(p, fh, ModeScaling::default())
}

pub fn eigen_basis_with(p: &ModelParams, fh: &FirstHopf, scaling: ModeScaling) -> Result<EigenData> {
    if fh.is_tie() {
        return Err(Error::DoubleHopf {
            modes: fh.ties.clone(),
        });
    }
    let [s, i, y] = p.endemic()?;
    let (b1, b2, b3) = linear_blocks(p)?;
    let (w, z, n0) = (fh.omega_star, fh.z_star, fh.n0);
    let kernel = DelayKernel {
        omega_star: w,
        tau_star: p.tau / w,
        b1,
        b2,
        b3,
    };
    let k0 = p.wavenumber_sq(n0);
    let iz = I * z;
    let recruit = p.alpha * p.survival();
    let lag = (-iz * p.tau).exp();

    let xi1 = p.mu * i * (-iz * w).exp() / (p.d2 * k0 + iz);
    let eta1 = (p.gamma - p.mu * s) / (iz + p.d2 * k0);
    let eta2 = (p.alpha - recruit * lag) / (iz + p.d3 * k0 + 2.0 * p.beta * y - recruit * lag);

    let len = p.domain_length();
    let amplitude = match (scaling, n0) {
        (ModeScaling::UnitConstant, 0) => len.sqrt(),
        _ => 1.0,
    };
    let gamma = amplitude * cosine_triple(p.l, n0, n0, n0);

    let mut ed = EigenData {
        n0,
        omega_star: w,
        z_star: z,
        tau_star: kernel.tau_star,
        xi1,
        xi2: ZERO,
        eta1,
        eta2,
        innerprod: [[0.0; 2]; 2],
        psi0: [ZERO; 3],
        scaling,
        amplitude,
        gamma,
        kernel,
        params: *p,
    };
    let phi = ed.phi();
    let phi_star = ed.phi_star();
    for a in 0..2 {
        for b in 0..2 {
            ed.innerprod[a][b] = bilinear_form(&phi_star[a], &phi[b], &kernel)?.re;
        }
    }
    let g = to_matrix(ed.innerprod);
    if g.determinant().abs() < 1e-12 * g.norm_squared() {
        return Err(Error::DegeneratePairing);
    }
    let [psi1, psi2] = ed.psi()?;
    let (a0, b0) = (psi1.eval(0.0), psi2.eval(0.0));
    for k in 0..3 {
        ed.psi0[k] = a0[k] - I * b0[k];
    }
    Ok(ed)
}

/// Quadratic nonlinearity coefficients `F̃20`, `F̃11` (rescaled time).
fn quadratic_terms(ed: &EigenData) -> (Vector3<C>, Vector3<C>) {
    let mu = ed.params.mu;
    let w = ed.omega_star;
    let em = (-I * ed.omega0()).exp();
    let ep = (I * ed.omega0()).exp();
    let f20 = 0.5 * mu * em * ed.xi1 * w;
    let f11 = 0.25 * mu * (em * ed.xi1.conj() + ep * ed.xi1) * w;
    (
        Vector3::new(-f20, f20, ZERO),
        Vector3::new(-f11, f11, ZERO),
    )
}

fn dot(a: &[C; 3], b: &Vector3<C>) -> C {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// `(g20, g11, g02)`; all zero unless the critical mode is homogeneous.
pub fn g_coefficients(ed: &EigenData) -> (C, C, C) {
    if ed.n0 != 0 {
        return (ZERO, ZERO, ZERO);
    }
    let (f20, f11) = quadratic_terms(ed);
    let g20 = dot(&ed.psi0, &f20) * ed.gamma;
    let g11 = dot(&ed.psi0, &f11) * ed.gamma;
    (g20, g11, g20.conj())
}

/// One quadratic center-manifold correction `W(θ) = Σ_n W^n(θ) b_n`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Correction {
    /// Coefficients of `p1` and `p̄1` in the critical-mode part, which is
    /// multiplied by the critical eigenfunction.
    pub critical: [C; 2],
    /// Exponent of the non-critical part: `2iω0` for `W20`, 0 for `W11`.
    pub rate: C,
    /// `(n, E^n)` for every contributing mode.
    pub modes: Vec<(usize, [C; 3])>,
}

impl Correction {
    /// Coefficient of `b_n` as a segment in `θ`.
    pub fn mode_segment(&self, n: usize, ed: &EigenData) -> Segment {
        let mut seg = Segment::new(ed.span());
        if n == ed.n0 {
            let p = ed.p1();
            seg = seg
                .add(&p.scale(self.critical[0] * ed.amplitude))
                .add(&p.conj().scale(self.critical[1] * ed.amplitude));
        }
        for (m, e) in &self.modes {
            if *m == n {
                seg = seg.push(Vector3::from(*e), self.rate);
            }
        }
        seg
    }

    /// `∫_0^{lπ} W(θ, x) b_{n0}(x)² dx` as a segment in `θ`.
    pub fn projected(&self, ed: &EigenData) -> Segment {
        let p = ed.p1();
        let mut seg = p
            .scale(self.critical[0] * ed.gamma)
            .add(&p.conj().scale(self.critical[1] * ed.gamma));
        for (n, e) in &self.modes {
            let c = cosine_triple(ed.params.l, ed.n0, ed.n0, *n);
            seg = seg.push(Vector3::from(*e) * re(c), self.rate);
        }
        seg
    }

    pub fn mode_indices(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.modes.iter().map(|m| m.0).collect();
        v.dedup();
        v
    }
}

/// Modes `n` with `∫ b_{n0}² b_n ≠ 0`.
fn coupled_modes(n0: usize) -> Vec<usize> {
    if n0 == 0 {
        vec![0]
    } else {
        vec![0, 2 * n0]
    }
}

fn solve_mode(ed: &EigenData, n: usize, lambda: C, rhs: Vector3<C>) -> Result<Vector3<C>> {
    let m = ed.scaled_characteristic_matrix(n, lambda);
    let scale = m.norm();
    if m.determinant().norm() < 1e-13 * scale * scale * scale {
        return Err(Error::ResonantCorrection { n });
    }
    m.lu().solve(&rhs).ok_or(Error::ResonantCorrection { n })
}

/// `(W20, W11)`.
pub fn center_manifold_correction(ed: &EigenData) -> Result<(Correction, Correction)> {
    let (g20, g11, g02) = g_coefficients(ed);
    let (f20, f11) = quadratic_terms(ed);
    let w0 = ed.omega0();
    let a2 = ed.amplitude * ed.amplitude;
    let mut e20 = Vec::new();
    let mut e11 = Vec::new();
    for n in coupled_modes(ed.n0) {
        let c = cosine_triple(ed.params.l, ed.n0, ed.n0, n) * a2;
        let e = solve_mode(ed, n, 2.0 * I * ed.z_star, f20 * re(c))?;
        e20.push((n, [e[0], e[1], e[2]]));
        let e = solve_mode(ed, n, ZERO, f11 * re(c))?;
        e11.push((n, [e[0], e[1], e[2]]));
    }
    let w20 = Correction {
        critical: [0.5 * I * g20 / w0, 0.5 * I * g02.conj() / (3.0 * w0)],
        rate: 2.0 * I * w0,
        modes: e20,
    };
    let w11 = Correction {
        critical: [-0.5 * I * g11 / w0, 0.5 * I * g11.conj() / w0],
        rate: ZERO,
        modes: e11,
    };
    Ok((w20, w11))
}

/// Which quadratic correction a residual refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Order {
    W20,
    W11,
}

/// Largest residual of the defining equations of `W20` or `W11`: the
/// delay-interval ODE at the sampled `θ < 0` and the boundary condition at
/// `θ = 0` for every contributing mode.
pub fn correction_residual(ed: &EigenData, w: &Correction, order: Order, thetas: &[f64]) -> f64 {
    let (g20, g11, g02) = g_coefficients(ed);
    let (f20, f11) = quadratic_terms(ed);
    let (gz, gzb, f, rate) = match order {
        Order::W20 => (g20, g02.conj(), f20, 2.0 * I * ed.omega0()),
        Order::W11 => (g11, g11.conj(), f11, ZERO),
    };
    let p = ed.p1();
    let pb = p.conj();
    // Critical-mode projection term.
    let proj = |th: f64| (p.eval(th) * gz + pb.eval(th) * gzb) * re(0.5 * ed.amplitude);
    let k = &ed.kernel;
    let pr = &ed.params;
    let mut modes = w.mode_indices();
    if !modes.contains(&ed.n0) {
        modes.push(ed.n0);
    }
    let mut worst: f64 = 0.0;
    for n in modes {
        let seg = w.mode_segment(n, ed);
        for &th in thetas {
            let lhs = seg.eval(th) * rate - seg.derivative(th);
            let h = if n == ed.n0 { -proj(th) } else { Vector3::zeros() };
            worst = worst.max((lhs - h).norm());
        }
        let diff = Matrix3::from_diagonal(&Vector3::new(pr.d1, pr.d2, pr.d3)) * pr.wavenumber_sq(n);
        let at = |th: f64| seg.eval(th);
        let lin = (k.b1.map(re) * at(0.0) + k.b2.map(re) * at(-1.0) + k.b3.map(re) * at(-k.tau_star))
            * re(k.omega_star);
        let lhs = at(0.0) * rate + diff.map(re) * at(0.0) * re(k.omega_star) - lin;
        let c = cosine_triple(pr.l, ed.n0, ed.n0, n) * ed.amplitude * ed.amplitude;
        let mut h = f * re(c);
        if n == ed.n0 {
            h -= proj(0.0);
        }
        worst = worst.max((lhs - h).norm());
    }
    worst
}

/// `(κ1, κ2, g21)`.
pub fn g21_coefficient(ed: &EigenData, w20: &Correction, w11: &Correction) -> (C, C, C) {
    let a = w20.projected(ed);
    let b = w11.projected(ed);
    let ep = (I * ed.omega0()).exp();
    let em = (-I * ed.omega0()).exp();
    let (a0, am) = (a.eval(0.0), a.eval(-1.0));
    let (b0, bm) = (b.eval(0.0), b.eval(-1.0));
    let kappa1 = 0.5 * ep * a0[1] + em * b0[1] + 0.5 * ed.xi1.conj() * am[0] + ed.xi1 * bm[0];
    let kappa2 = 0.5 * ed.xi2.conj() * a0[2] + ed.xi2 * b0[2];
    let pr = &ed.params;
    let g21 = ed.omega_star
        * (-pr.mu * kappa1 * ed.psi0[0] + pr.mu * kappa1 * ed.psi0[1]
            - pr.beta * kappa2 * ed.psi0[2]);
    (kappa1, kappa2, g21)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Supercritical,
    Subcritical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OrbitStability {
    Stable,
    Unstable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PeriodTrend {
    Increasing,
    Decreasing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Classification {
    pub direction: Direction,
    pub orbit: OrbitStability,
    pub period: PeriodTrend,
}

impl Classification {
    pub fn from_signs(mu2: f64, beta2: f64, t2: f64) -> Self {
        Classification {
            direction: if mu2 > 0.0 {
                Direction::Supercritical
            } else {
                Direction::Subcritical
            },
            orbit: if beta2 < 0.0 {
                OrbitStability::Stable
            } else {
                OrbitStability::Unstable
            },
            period: if t2 > 0.0 {
                PeriodTrend::Increasing
            } else {
                PeriodTrend::Decreasing
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormalFormResult {
    pub n0: usize,
    pub omega_star: f64,
    pub z_star: f64,
    pub g20: C,
    pub g11: C,
    pub g02: C,
    pub g21: C,
    pub kappa1: C,
    pub kappa2: C,
    #[serde(rename = "Gamma")]
    pub gamma: f64,
    pub scaling: ModeScaling,
    #[serde(rename = "W20")]
    pub w20: Correction,
    #[serde(rename = "W11")]
    pub w11: Correction,
    pub c1_0: C,
    /// `dλ/dω` at `ω*`.
    pub lambda_prime: C,
    pub mu2: f64,
    pub beta2: f64,
    #[serde(rename = "T2")]
    pub t2: f64,
    pub classification: Classification,
    /// `2π / z*` in original time.
    pub period: f64,
}

pub fn hopf_properties(p: &ModelParams) -> Result<NormalFormResult> {
    hopf_properties_with(p, ModeScaling::default())
}

pub fn hopf_properties_with(p: &ModelParams, scaling: ModeScaling) -> Result<NormalFormResult> {
    p.validate()?;
    let fh = spectral::first_hopf(p)?;
    let ed = eigen_basis_with(p, &fh, scaling)?;
    let (g20, g11, g02) = g_coefficients(&ed);
    let (w20, w11) = center_manifold_correction(&ed)?;
    let (kappa1, kappa2, g21) = g21_coefficient(&ed, &w20, &w11);
    let w0 = ed.omega0();
    let c1 = I / (2.0 * w0) * (g11 * g20 - 2.0 * g11.norm_sqr() - g02.norm_sqr() / 3.0) + g21 / 2.0;

    let m = spectral::mode_coefficients(p, fh.n0)?;
    let lambda_prime = spectral::inverse_speed_of(&m, fh.z_star, fh.omega_star).inv();
    let mu2 = -c1.re / lambda_prime.re;
    let beta2 = 2.0 * c1.re;
    let t2 = -(c1.im + mu2 * lambda_prime.im) / w0;
    Ok(NormalFormResult {
        n0: fh.n0,
        omega_star: fh.omega_star,
        z_star: fh.z_star,
        g20,
        g11,
        g02,
        g21,
        kappa1,
        kappa2,
        gamma: ed.gamma,
        scaling,
        w20,
        w11,
        c1_0: c1,
        lambda_prime,
        mu2,
        beta2,
        t2,
        classification: Classification::from_signs(mu2, beta2, t2),
        period: fh.period(),
    })
}
