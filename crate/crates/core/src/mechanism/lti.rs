//! Stable LTI payoff dynamics in state-space form.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Eigenvalue margin for the Hurwitz gate.
pub const HURWITZ_TOL: f64 = 1e-10;

/// `qdot = A q + B x`, `u = C q + D x`, `q(0) = 0`, with `A` Hurwitz.
#[derive(Debug, Clone, PartialEq)]
pub struct LtiPdm {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    c: DMatrix<f64>,
    d: DMatrix<f64>,
}

impl LtiPdm {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, c: DMatrix<f64>, d: DMatrix<f64>) -> Result<Self> {
        let chi = a.nrows();
        let n = d.nrows();
        let dims = [
            (a.ncols(), chi, "A columns"),
            (b.nrows(), chi, "B rows"),
            (b.ncols(), n, "B columns"),
            (c.nrows(), n, "C rows"),
            (c.ncols(), chi, "C columns"),
            (d.ncols(), n, "D columns"),
        ];
        for (got, expected, context) in dims {
            if got != expected {
                return Err(Error::Dimension {
                    expected,
                    got,
                    context,
                });
            }
        }
        if n == 0 {
            return Err(Error::config("LTI model needs at least one strategy"));
        }
        if [&a, &b, &c, &d].iter().any(|m| m.iter().any(|v| !v.is_finite())) {
            return Err(Error::config("LTI matrices must be finite"));
        }
        let pdm = Self { a, b, c, d };
        let abscissa = pdm.spectral_abscissa();
        if abscissa > -HURWITZ_TOL {
            return Err(Error::config(format!(
                "LTI state matrix is not Hurwitz (max real part of eigenvalues {abscissa:e})"
            )));
        }
        Ok(pdm)
    }

    /// Static model `u = D x` (no state).
    pub fn static_gain(d: DMatrix<f64>) -> Result<Self> {
        let n = d.nrows();
        Self::new(DMatrix::zeros(0, 0), DMatrix::zeros(0, n), DMatrix::zeros(n, 0), d)
    }

    pub fn n(&self) -> usize {
        self.d.nrows()
    }

    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn matrices(&self) -> (&DMatrix<f64>, &DMatrix<f64>, &DMatrix<f64>, &DMatrix<f64>) {
        (&self.a, &self.b, &self.c, &self.d)
    }

    /// Largest real part among the eigenvalues of `A` (`-inf` when stateless).
    pub fn spectral_abscissa(&self) -> f64 {
        if self.state_dim() == 0 {
            return f64::NEG_INFINITY;
        }
        self.a
            .clone()
            .complex_eigenvalues()
            .iter()
            .map(|z| z.re)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn derivative_into(&self, q: &[f64], x: &[f64], out: &mut [f64]) {
        let chi = self.state_dim();
        let n = self.n();
        for (i, o) in out.iter_mut().enumerate().take(chi) {
            let mut acc = 0.0;
            for j in 0..chi {
                acc += self.a[(i, j)] * q[j];
            }
            for j in 0..n {
                acc += self.b[(i, j)] * x[j];
            }
            *o = acc;
        }
    }

    pub fn output_into(&self, q: &[f64], x: &[f64], out: &mut [f64]) {
        let chi = self.state_dim();
        let n = self.n();
        for (i, o) in out.iter_mut().enumerate().take(n) {
            let mut acc = 0.0;
            for j in 0..chi {
                acc += self.c[(i, j)] * q[j];
            }
            for j in 0..n {
                acc += self.d[(i, j)] * x[j];
            }
            *o = acc;
        }
    }

    /// `F(0) = D - C A^{-1} B`.
    pub fn dc_gain(&self) -> DMatrix<f64> {
        if self.state_dim() == 0 {
            return self.d.clone();
        }
        let sol = self
            .a
            .clone()
            .lu()
            .solve(&self.b)
            .expect("Hurwitz matrix is invertible");
        &self.d - &self.c * sol
    }

    /// `F(j omega) = C (j omega I - A)^{-1} B + D`.
    pub fn frequency_response(&self, omega: f64) -> DMatrix<Complex64> {
        let d = self.d.map(|v| Complex64::new(v, 0.0));
        let chi = self.state_dim();
        if chi == 0 {
            return d;
        }
        let mut m = self.a.map(|v| Complex64::new(-v, 0.0));
        for i in 0..chi {
            m[(i, i)] += Complex64::new(0.0, omega);
        }
        let b = self.b.map(|v| Complex64::new(v, 0.0));
        let c = self.c.map(|v| Complex64::new(v, 0.0));
        let sol = m
            .lu()
            .solve(&b)
            .expect("j omega I - A is invertible for Hurwitz A");
        c * sol + d
    }

    /// `||D||_inf + int_0^inf ||C e^{At} B||_inf dt`, the integral taken
    /// numerically with an upper Riemann sum. States are on the simplex, so
    /// this bounds `||u(t)||_inf` for every input trajectory.
    pub fn bibo_bound(&self) -> f64 {
        let row_sum = |m: &DMatrix<f64>| {
            (0..m.nrows())
                .map(|i| m.row(i).iter().map(|v| v.abs()).sum::<f64>())
                .fold(0.0, f64::max)
        };
        let direct = row_sum(&self.d);
        if self.state_dim() == 0 {
            return direct;
        }
        let eig = self.a.clone().complex_eigenvalues();
        let fastest = eig.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let slowest = eig.iter().map(|z| -z.re).fold(f64::INFINITY, f64::min);
        let dt = 0.01 / fastest;
        let horizon = 40.0 / slowest;
        let step = (&self.a * dt).exp();
        let mut phi_b = self.b.clone();
        let mut prev = row_sum(&(&self.c * &phi_b));
        let mut integral = 0.0;
        let mut t = 0.0;
        let max_steps = 5_000_000usize;
        for _ in 0..max_steps {
            phi_b = &step * &phi_b;
            let cur = row_sum(&(&self.c * &phi_b));
            integral += prev.max(cur) * dt;
            prev = cur;
            t += dt;
            if t >= horizon {
                break;
            }
        }
        // Tail beyond the horizon decays like exp(-slowest t).
        direct + integral + prev / slowest
    }
}
