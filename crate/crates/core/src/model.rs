//! Model parameters, the basic reproduction ratio, constant equilibria and the
//! reaction part of the delayed reaction-diffusion system.
//!
//! The state is `(S, I, y)`: susceptible immature, infected immature and
//! mature densities on the interval `(0, l·π)` with no-flux boundaries.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `|R0 - 1|` below this is treated as the threshold itself.
pub const THRESHOLD_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Birth rate of mature individuals.
    pub alpha: f64,
    /// Death rate of immature individuals.
    pub d: f64,
    /// Transmission rate.
    pub mu: f64,
    /// Recovery rate.
    pub gamma: f64,
    /// Logistic death rate of mature individuals.
    pub beta: f64,
    /// Maturation delay.
    pub tau: f64,
    /// Freely-moving delay; the bifurcation parameter.
    pub omega: f64,
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
    /// Domain length factor: the domain is `(0, l·π)`.
    pub l: f64,
}

impl ModelParams {
    /// Endemic parameter set used throughout the worked examples
    /// (`R0 ≈ 5.847`, `l = 3`, `ω = 0`).
    pub fn baseline() -> Self {
        ModelParams {
            alpha: 2.1,
            d: 0.5,
            mu: 0.5,
            gamma: 0.1,
            beta: 0.3,
            tau: 1.0,
            omega: 0.0,
            d1: 0.05,
            d2: 0.2,
            d3: 0.06,
            l: 3.0,
        }
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn with_d2(mut self, d2: f64) -> Self {
        self.d2 = d2;
        self
    }

    pub fn with_omega(mut self, omega: f64) -> Self {
        self.omega = omega;
        self
    }

    pub fn with_tau(mut self, tau: f64) -> Self {
        self.tau = tau;
        self
    }

    pub fn with_l(mut self, l: f64) -> Self {
        self.l = l;
        self
    }

    /// Survival fraction `e^{-dτ}` of immatures through maturation.
    pub fn survival(&self) -> f64 {
        (-self.d * self.tau).exp()
    }

    /// Domain length `l·π`.
    pub fn domain_length(&self) -> f64 {
        self.l * std::f64::consts::PI
    }

    /// `n²/l²`, the Laplacian eigenvalue magnitude of mode `n`.
    pub fn wavenumber_sq(&self, n: usize) -> f64 {
        let n = n as f64;
        n * n / (self.l * self.l)
    }

    pub fn diffusion(&self) -> [f64; 3] {
        [self.d1, self.d2, self.d3]
    }

    pub fn validate(&self) -> Result<()> {
        let v = validate_params(self);
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidParams(v))
        }
    }

    pub fn reproduction_ratio(&self) -> f64 {
        basic_reproduction_ratio(self)
    }

    pub fn equilibria(&self) -> EquilibriumSet {
        equilibria(self)
    }

    /// Endemic equilibrium, or [`Error::NoEndemicEquilibrium`].
    pub fn endemic(&self) -> Result<[f64; 3]> {
        let eq = equilibria(self);
        eq.e2.ok_or(Error::NoEndemicEquilibrium { r0: eq.r0 })
    }
}

/// A violated parameter invariant.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub key: &'static str,
    pub rule: &'static str,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.rule)
    }
}

/// Every violated invariant of `p`; empty when the parameters are usable.
pub fn validate_params(p: &ModelParams) -> Vec<Violation> {
    let mut out = Vec::new();
    let fields: [(&'static str, f64); 11] = [
        ("alpha", p.alpha),
        ("d", p.d),
        ("mu", p.mu),
        ("gamma", p.gamma),
        ("beta", p.beta),
        ("tau", p.tau),
        ("omega", p.omega),
        ("d1", p.d1),
        ("d2", p.d2),
        ("d3", p.d3),
        ("l", p.l),
    ];
    for (key, value) in fields {
        if !value.is_finite() {
            out.push(Violation {
                key,
                rule: finite_rule(key),
            });
        }
    }
    let positive: [(&'static str, f64, &'static str); 10] = [
        ("alpha", p.alpha, "alpha > 0"),
        ("d", p.d, "d > 0"),
        ("mu", p.mu, "mu > 0"),
        ("gamma", p.gamma, "gamma > 0"),
        ("beta", p.beta, "beta > 0"),
        ("tau", p.tau, "tau > 0"),
        ("d1", p.d1, "d1 > 0"),
        ("d2", p.d2, "d2 > 0"),
        ("d3", p.d3, "d3 > 0"),
        ("l", p.l, "l > 0"),
    ];
    for (key, value, rule) in positive {
        if value.is_finite() && value <= 0.0 {
            out.push(Violation { key, rule });
        }
    }
    if p.omega.is_finite() && p.omega < 0.0 {
        out.push(Violation {
            key: "omega",
            rule: "omega >= 0",
        });
    }
    if p.omega.is_finite() && p.tau.is_finite() && p.omega >= p.tau {
        out.push(Violation {
            key: "omega",
            rule: "omega < tau",
        });
    }
    out
}

fn finite_rule(key: &str) -> &'static str {
    match key {
        "alpha" => "alpha finite",
        "d" => "d finite",
        "mu" => "mu finite",
        "gamma" => "gamma finite",
        "beta" => "beta finite",
        "tau" => "tau finite",
        "omega" => "omega finite",
        "d1" => "d1 finite",
        "d2" => "d2 finite",
        "d3" => "d3 finite",
        _ => "l finite",
    }
}

pub fn basic_reproduction_ratio(p: &ModelParams) -> f64 {
    let e = p.survival();
    p.mu * p.alpha * p.alpha * e * (1.0 - e) / (p.d * p.beta * (p.d + p.gamma))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EquilibriumSet {
    #[serde(rename = "E0")]
    pub e0: [f64; 3],
    #[serde(rename = "E1")]
    pub e1: [f64; 3],
    /// Endemic equilibrium; present only when `R0 > 1` strictly.
    #[serde(rename = "E2")]
    pub e2: Option<[f64; 3]>,
    #[serde(rename = "R0")]
    pub r0: f64,
    /// Set when `R0` is within [`THRESHOLD_TOL`] of 1.
    pub at_threshold: bool,
}

pub fn equilibria(p: &ModelParams) -> EquilibriumSet {
    let e = p.survival();
    let y_bar = p.alpha * e / p.beta;
    let s_bar = p.alpha * p.alpha * e * (1.0 - e) / (p.d * p.beta);
    let r0 = basic_reproduction_ratio(p);
    let at_threshold = (r0 - 1.0).abs() <= THRESHOLD_TOL;
    let e2 = if r0 > 1.0 && !at_threshold {
        let s_star = (p.d + p.gamma) / p.mu;
        Some([s_star, s_star * (r0 - 1.0), y_bar])
    } else {
        None
    };
    if at_threshold {
        log::warn!("R0 = {r0} is at the threshold; endemic equilibrium reported absent");
    }
    EquilibriumSet {
        e0: [0.0; 3],
        e1: [s_bar, 0.0, y_bar],
        e2,
        r0,
        at_threshold,
    }
}

/// Reaction terms with the parameter combinations precomputed, for use in
/// inner loops.
#[derive(Debug, Clone, Copy)]
pub struct Reaction {
    alpha: f64,
    d: f64,
    mu: f64,
    gamma: f64,
    beta: f64,
    recruit: f64,
}

impl Reaction {
    pub fn new(p: &ModelParams) -> Self {
        Reaction {
            alpha: p.alpha,
            d: p.d,
            mu: p.mu,
            gamma: p.gamma,
            beta: p.beta,
            recruit: p.alpha * p.survival(),
        }
    }

    /// `(dS/dt, dI/dt, dy/dt)` without diffusion. `s_lag` is `S(t-ω)` and
    /// `y_lag` is `y(t-τ)`.
    #[inline]
    pub fn eval(&self, s: f64, i: f64, y: f64, s_lag: f64, y_lag: f64) -> [f64; 3] {
        let matured = self.recruit * y_lag;
        let infection = self.mu * s_lag * i;
        [
            self.alpha * y - self.d * s - matured - infection + self.gamma * i,
            infection - (self.d + self.gamma) * i,
            matured - self.beta * y * y,
        ]
    }
}

pub fn reaction_rhs(current: [f64; 3], s_lag: f64, y_lag: f64, p: &ModelParams) -> [f64; 3] {
    Reaction::new(p).eval(current[0], current[1], current[2], s_lag, y_lag)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn extinction() -> ModelParams {
        ModelParams::baseline().with_alpha(0.85)
    }

    #[test]
    fn baseline_is_valid() {
        let p = ModelParams::baseline().with_d2(0.2);
        assert!(validate_params(&p).is_empty());
    }

    #[test]
    fn omega_not_below_tau_is_reported() {
        let p = ModelParams::baseline().with_omega(2.0);
        let v = validate_params(&p);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].rule, "omega < tau");
    }

    #[test]
    fn zero_beta_is_reported() {
        let mut p = ModelParams::baseline();
        p.beta = 0.0;
        let v = validate_params(&p);
        assert!(v.iter().any(|x| x.rule == "beta > 0"));
    }

    #[test]
    fn every_violation_is_listed() {
        let mut p = ModelParams::baseline();
        p.alpha = -1.0;
        p.d3 = 0.0;
        p.omega = f64::NAN;
        let rules: Vec<_> = validate_params(&p).into_iter().map(|v| v.rule).collect();
        assert!(rules.contains(&"alpha > 0"));
        assert!(rules.contains(&"d3 > 0"));
        assert!(rules.contains(&"omega finite"));
    }

    #[test]
    fn reproduction_ratio_reference_values() {
        assert!((basic_reproduction_ratio(&extinction()) - 0.9579).abs() < 1e-4);
        assert!((basic_reproduction_ratio(&ModelParams::baseline()) - 5.8470).abs() < 1e-4);
    }

    #[test]
    fn reproduction_ratio_is_linear_in_mu() {
        let p = ModelParams::baseline();
        let mut q = p;
        q.mu = p.mu * 1e-9;
        assert!((basic_reproduction_ratio(&q) - 1e-9 * basic_reproduction_ratio(&p)).abs() < 1e-15);
    }

    #[test]
    fn reproduction_ratio_two_routes_agree() {
        for p in [extinction(), ModelParams::baseline(), ModelParams::baseline().with_tau(2.5)] {
            let eq = equilibria(&p);
            let via_sbar = p.mu * eq.e1[0] / (p.d + p.gamma);
            assert!((eq.r0 - via_sbar).abs() < 1e-12);
        }
    }

    #[test]
    fn equilibria_reference_values() {
        let eq = equilibria(&extinction());
        assert!(eq.e2.is_none());
        for (got, want) in eq.e1.iter().zip([1.1495, 0.0, 1.7185]) {
            assert!((got - want).abs() < 1e-3);
        }
        let e2 = equilibria(&ModelParams::baseline()).e2.unwrap();
        for (got, want) in e2.iter().zip([1.2, 5.8164, 4.2457]) {
            assert!((got - want).abs() < 1e-3);
        }
    }

    #[test]
    fn equilibria_zero_the_reaction() {
        for p in [extinction(), ModelParams::baseline(), ModelParams::baseline().with_d2(40.0)] {
            let eq = equilibria(&p);
            let mut points = vec![eq.e0, eq.e1];
            points.extend(eq.e2);
            for u in points {
                let r = reaction_rhs(u, u[0], u[2], &p);
                for c in r {
                    assert!(c.abs() < 1e-12, "residual {c} at {u:?}");
                }
            }
        }
    }

    #[test]
    fn reaction_matches_hand_evaluation() {
        let p = ModelParams::baseline();
        let (s, i, y, s_lag, y_lag) = (1.0, 1.0, 1.0, 1.0, 1.0);
        let e = (-0.5f64).exp();
        let want = [
            2.1 * y - 0.5 * s - 2.1 * e * y_lag - 0.5 * s_lag * i + 0.1 * i,
            0.5 * s_lag * i - 0.5 * i - 0.1 * i,
            2.1 * e * y_lag - 0.3 * y * y,
        ];
        let got = reaction_rhs([s, i, y], s_lag, y_lag, &p);
        for k in 0..3 {
            assert!((got[k] - want[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn threshold_is_flagged_and_has_no_endemic_state() {
        // Solve R0 = 1 for mu.
        let mut p = ModelParams::baseline();
        p.mu /= basic_reproduction_ratio(&p);
        let eq = equilibria(&p);
        assert!(eq.at_threshold);
        assert!(eq.e2.is_none());
    }

    #[test]
    fn endemic_state_is_positive() {
        let e2 = ModelParams::baseline().endemic().unwrap();
        assert!(e2.iter().all(|&c| c > 0.0));
        assert!(matches!(
            extinction().endemic(),
            Err(Error::NoEndemicEquilibrium { .. })
        ));
    }

    #[test]
    fn equilibria_are_bitwise_deterministic() {
        let p = ModelParams::baseline().with_d2(2.5);
        let a = serde_json::to_string(&equilibria(&p)).unwrap();
        let b = serde_json::to_string(&equilibria(&p)).unwrap();
        assert_eq!(a, b);
    }
}
