//! Second-order Neumann Laplacian on a uniform grid and the tridiagonal
//! solve used by the Crank–Nicolson diffusion step.

/// Central differences with ghost-point reflection `u[-1] = u[1]`,
/// `u[N] = u[N-2]`.
pub fn laplacian_neumann(field: &[f64], dx: f64) -> Vec<f64> {
    let mut out = vec![0.0; field.len()];
    laplacian_into(field, dx, &mut out);
    out
}

pub fn laplacian_into(u: &[f64], dx: f64, out: &mut [f64]) {
    let n = u.len();
    assert!(n >= 3, "Neumann Laplacian needs at least 3 points");
    let r = 1.0 / (dx * dx);
    out[0] = 2.0 * (u[1] - u[0]) * r;
    for j in 1..n - 1 {
        out[j] = (u[j - 1] - 2.0 * u[j] + u[j + 1]) * r;
    }
    out[n - 1] = 2.0 * (u[n - 2] - u[n - 1]) * r;
}

/// Prefactored Thomas solver for `(I - c·Δ_h) u = rhs`.
#[derive(Debug, Clone)]
pub struct ImplicitDiffusion {
    lower: Vec<f64>,
    upper: Vec<f64>,
    inv_pivot: Vec<f64>,
}

impl ImplicitDiffusion {
    pub fn new(n: usize, c: f64, dx: f64) -> Self {
        let r = c / (dx * dx);
        let diag = 1.0 + 2.0 * r;
        let mut lower = vec![-r; n];
        let mut upper = vec![-r; n];
        lower[0] = 0.0;
        upper[n - 1] = 0.0;
        upper[0] = -2.0 * r;
        lower[n - 1] = -2.0 * r;
        // Forward elimination of the constant matrix.
        let mut inv_pivot = vec![0.0; n];
        let mut up = vec![0.0; n];
        inv_pivot[0] = 1.0 / diag;
        up[0] = upper[0] * inv_pivot[0];
        for j in 1..n {
            inv_pivot[j] = 1.0 / (diag - lower[j] * up[j - 1]);
            up[j] = upper[j] * inv_pivot[j];
        }
        ImplicitDiffusion {
            lower,
            upper: up,
            inv_pivot,
        }
    }

    /// Solves in place.
    pub fn solve(&self, rhs: &mut [f64]) {
        let n = rhs.len();
        rhs[0] *= self.inv_pivot[0];
        for j in 1..n {
            rhs[j] = (rhs[j] - self.lower[j] * rhs[j - 1]) * self.inv_pivot[j];
        }
        for j in (0..n - 1).rev() {
            rhs[j] -= self.upper[j] * rhs[j + 1];
        }
    }
}
