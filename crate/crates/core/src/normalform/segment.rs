//! Functions on a delay interval represented as finite sums of
//! `coefficient · e^{rate·θ}`, and the bilinear pairing between an adjoint
//! segment on `[0, h]` and a state segment on `[-h, 0]`.
//!
//! Every integral the pairing needs has a closed form for such sums.

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;

use crate::error::{Error, Result};

type C = Complex64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpTerm {
    pub coef: Vector3<C>,
    pub rate: C,
}

/// `Σ coef_k e^{rate_k θ}` on an interval of length `span`.
///
/// A state segment lives on `[-span, 0]`, an adjoint segment on `[0, span]`;
/// the representation is the same and the caller decides the role.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub span: f64,
    pub terms: Vec<ExpTerm>,
}

impl Segment {
    pub fn new(span: f64) -> Self {
        Segment {
            span,
            terms: Vec::new(),
        }
    }

    pub fn exponential(span: f64, coef: Vector3<C>, rate: C) -> Self {
        Segment {
            span,
            terms: vec![ExpTerm { coef, rate }],
        }
    }

    pub fn constant(span: f64, coef: Vector3<C>) -> Self {
        Self::exponential(span, coef, C::new(0.0, 0.0))
    }

    pub fn push(mut self, coef: Vector3<C>, rate: C) -> Self {
        self.terms.push(ExpTerm { coef, rate });
        self
    }

    pub fn eval(&self, theta: f64) -> Vector3<C> {
        self.terms
            .iter()
            .fold(Vector3::zeros(), |acc, t| acc + t.coef * (t.rate * theta).exp())
    }

    pub fn derivative(&self, theta: f64) -> Vector3<C> {
        self.terms.iter().fold(Vector3::zeros(), |acc, t| {
            acc + t.coef * (t.rate * (t.rate * theta).exp())
        })
    }

    pub fn conj(&self) -> Self {
        Segment {
            span: self.span,
            terms: self
                .terms
                .iter()
                .map(|t| ExpTerm {
                    coef: t.coef.map(|c| c.conj()),
                    rate: t.rate.conj(),
                })
                .collect(),
        }
    }

    pub fn scale(&self, k: C) -> Self {
        Segment {
            span: self.span,
            terms: self
                .terms
                .iter()
                .map(|t| ExpTerm {
                    coef: t.coef * k,
                    rate: t.rate,
                })
                .collect(),
        }
    }

    pub fn add(&self, other: &Segment) -> Self {
        let mut terms = self.terms.clone();
        terms.extend_from_slice(&other.terms);
        Segment {
            span: self.span,
            terms,
        }
    }

    /// Real part as a segment: `(f + f̄) / 2`.
    pub fn re(&self) -> Self {
        self.add(&self.conj()).scale(C::new(0.5, 0.0))
    }

    /// Imaginary part as a segment: `(f - f̄) / 2i`.
    pub fn im(&self) -> Self {
        self.add(&self.conj().scale(C::new(-1.0, 0.0)))
            .scale(C::new(0.0, -0.5))
    }
}

/// The delayed linear operator of the critical mode, in time rescaled by
/// `ω*`: `L φ = ω* [B1 φ(0) + B2 φ(-1) + B3 φ(-τ*)]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelayKernel {
    pub omega_star: f64,
    pub tau_star: f64,
    pub b1: Matrix3<f64>,
    pub b2: Matrix3<f64>,
    pub b3: Matrix3<f64>,
}

impl DelayKernel {
    /// Segment length needed to hold both delays.
    pub fn span(&self) -> f64 {
        self.tau_star.max(1.0)
    }
}

/// `ψ(0)φ(0) + ω*∫_{-1}^0 ψ(ξ+1) B2 φ(ξ) dξ + ω*∫_{-τ*}^0 ψ(ξ+τ*) B3 φ(ξ) dξ`.
pub fn bilinear_form(psi: &Segment, phi: &Segment, kernel: &DelayKernel) -> Result<C> {
    if (psi.span - phi.span).abs() > 1e-12 * psi.span.max(phi.span) {
        return Err(Error::SegmentDomainMismatch {
            left: psi.span,
            right: phi.span,
        });
    }
    if phi.span < kernel.span() * (1.0 - 1e-12) {
        return Err(Error::SegmentDomainMismatch {
            left: phi.span,
            right: kernel.span(),
        });
    }
    let b2 = kernel.b2.map(|x| C::new(x, 0.0));
    let b3 = kernel.b3.map(|x| C::new(x, 0.0));
    let mut total = C::new(0.0, 0.0);
    for r in &psi.terms {
        for v in &phi.terms {
            total += r.coef.dot(&v.coef);
            let s = r.rate + v.rate;
            total += kernel.omega_star
                * r.coef.dot(&(b2 * v.coef))
                * delay_integral(r.rate, s, 1.0);
            total += kernel.omega_star
                * r.coef.dot(&(b3 * v.coef))
                * delay_integral(r.rate, s, kernel.tau_star);
        }
    }
    Ok(total)
}

/// `∫_{-h}^0 e^{a(ξ+h)} e^{bξ} dξ` with `s = a + b`.
fn delay_integral(a: C, s: C, h: f64) -> C {
    let x = s * h;
    // (1 - e^{-x}) / x, by series near zero.
    let ratio = if x.norm() < 1e-3 {
        C::new(1.0, 0.0) - x / 2.0 + x * x / 6.0 - x * x * x / 24.0 + x * x * x * x / 120.0
    } else {
        (C::new(1.0, 0.0) - (-x).exp()) / x
    };
    (a * h).exp() * h * ratio
}
