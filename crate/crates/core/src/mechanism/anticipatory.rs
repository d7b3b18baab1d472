//! Potential game with a filtered anticipatory perturbation:
//!
//! ```text
//! qdot = lambda (A x + b - q),        q(0) = 0
//! u    = F(x) + k lambda (A x + b - q)
//! ```
//!
//! with `A` symmetric and `k A` negative semidefinite.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::game::MemorylessGame;
use super::lti::{LtiPdm, HURWITZ_TOL};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct AnticipatoryPdm {
    base: MemorylessGame,
    lambda: f64,
    a: DMatrix<f64>,
    b: DVector<f64>,
    k: f64,
}

impl AnticipatoryPdm {
    pub fn new(base: MemorylessGame, lambda: f64, a: DMatrix<f64>, b: DVector<f64>, k: f64) -> Result<Self> {
        let n = base.n();
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::config("lambda must be positive"));
        }
        if !k.is_finite() {
            return Err(Error::config("k must be finite"));
        }
        if a.shape() != (n, n) {
            return Err(Error::Dimension {
                expected: n,
                got: a.nrows(),
                context: "anticipatory A",
            });
        }
        if b.len() != n {
            return Err(Error::Dimension {
                expected: n,
                got: b.len(),
                context: "anticipatory b",
            });
        }
        if a != a.transpose() {
            return Err(Error::config("anticipatory A must be symmetric"));
        }
        let top = SymmetricEigen::new(&a * k)
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        if top > HURWITZ_TOL {
            return Err(Error::config(format!(
                "k*A must be negative semidefinite (largest eigenvalue {top:e})"
            )));
        }
        Ok(Self { base, lambda, a, b, k })
    }

    pub fn n(&self) -> usize {
        self.base.n()
    }

    pub fn base(&self) -> &MemorylessGame {
        &self.base
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn offset(&self) -> &DVector<f64> {
        &self.b
    }

    fn gap(&self, q: &[f64], x: &[f64], out: &mut [f64]) {
        let n = self.n();
        for (i, o) in out.iter_mut().enumerate() {
            let ax: f64 = (0..n).map(|j| self.a[(i, j)] * x[j]).sum();
            *o = ax + self.b[i] - q[i];
        }
    }

    pub fn derivative_into(&self, q: &[f64], x: &[f64], out: &mut [f64]) {
        self.gap(q, x, out);
        out.iter_mut().for_each(|o| *o *= self.lambda);
    }

    pub fn output_into(&self, q: &[f64], x: &[f64], out: &mut [f64]) {
        let mut gap = vec![0.0; self.n()];
        self.gap(q, x, &mut gap);
        self.base.evaluate_into(x, out);
        let kl = self.k * self.lambda;
        for (o, g) in out.iter_mut().zip(gap) {
            *o += kl * g;
        }
    }

    /// LTI realization of `x -> k lambda (A x - q)` (the perturbation with
    /// `b` dropped, which only contributes a decaying transient).
    pub fn perturbation(&self) -> LtiPdm {
        let n = self.n();
        let id = DMatrix::<f64>::identity(n, n);
        let l = self.lambda;
        let kl = self.k * l;
        LtiPdm::new(-&id * l, &self.a * l, -&id * kl, &self.a * kl).expect("stable by construction")
    }

    /// Base bound plus `2 |k| lambda max_vertex ||A e_i + b||_inf`: the
    /// filter state stays in the convex hull of 0 and past values of `Ax+b`.
    pub fn bibo_bound(&self) -> f64 {
        let n = self.n();
        let target = (0..n)
            .map(|j| (0..n).map(|i| (self.a[(i, j)] + self.b[i]).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        self.base.bibo_bound() + 2.0 * self.k.abs() * self.lambda * target
    }
}
