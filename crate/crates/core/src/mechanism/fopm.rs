//! First-order payoff modification: `sdot = u - mu s`, `p = gamma (s + nu u)`.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fopm {
    mu: f64,
    gamma: f64,
    nu: f64,
}

impl Fopm {
    /// Requires `mu > 0` and a nonnegative static gain `gamma (nu + 1/mu)`.
    pub fn new(mu: f64, gamma: f64, nu: f64) -> Result<Self> {
        if !(mu.is_finite() && mu > 0.0) {
            return Err(Error::config(format!("mu must be positive (got {mu})")));
        }
        if !(gamma.is_finite() && nu.is_finite()) {
            return Err(Error::config("gamma and nu must be finite"));
        }
        let f = Self { mu, gamma, nu };
        if f.static_gain() < 0.0 {
            return Err(Error::config(format!(
                "static gain gamma*(nu + 1/mu) = {} is negative",
                f.static_gain()
            )));
        }
        Ok(f)
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn static_gain(&self) -> f64 {
        self.gamma * (self.nu + 1.0 / self.mu)
    }

    pub fn gamma_nu(&self) -> f64 {
        self.gamma * self.nu
    }

    pub fn derivative_into(&self, s: &[f64], u: &[f64], out: &mut [f64]) {
        for ((o, si), ui) in out.iter_mut().zip(s).zip(u) {
            *o = ui - self.mu * si;
        }
    }

    pub fn output_into(&self, s: &[f64], u: &[f64], out: &mut [f64]) {
        for ((o, si), ui) in out.iter_mut().zip(s).zip(u) {
            *o = self.gamma * (si + self.nu * ui);
        }
    }

    /// `sup ||p||_inf` given `sup ||u||_inf <= input_bound` and `s(0) = 0`.
    pub fn output_bound(&self, input_bound: f64) -> f64 {
        self.gamma.abs() * (self.nu.abs() + 1.0 / self.mu) * input_bound
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn static_gain_gate() {
        assert!(Fopm::new(0.0, 1.0, 0.0).is_err());
        assert!(Fopm::new(0.5, -1.0, 0.0).is_err());
        // gamma < 0 with nu < -1/mu keeps the gain nonnegative.
        assert!(Fopm::new(0.5, -1.0, -3.0).is_ok());
        assert!(Fopm::new(0.01, 1.0, 0.0).is_ok());
    }

    #[test]
    fn steady_state_output() {
        let f = Fopm::new(0.5, 2.0, 0.25).unwrap();
        let u = [1.0, -2.0];
        let s: Vec<f64> = u.iter().map(|v| v / f.mu()).collect();
        let mut ds = [9.0; 2];
        f.derivative_into(&s, &u, &mut ds);
        assert_eq!(ds, [0.0, 0.0]);
        let mut p = [0.0; 2];
        f.output_into(&s, &u, &mut p);
        for i in 0..2 {
            assert_abs_diff_eq!(p[i], f.static_gain() * u[i], epsilon = 1e-14);
        }
    }

    #[test]
    fn toll_channel_derivative() {
        let f = Fopm::new(0.01, 1.0, 0.0).unwrap();
        let x2 = 0.3;
        let s = [0.0, -2.0, 0.0];
        let u = [0.0, -x2, 0.0];
        let mut ds = [0.0; 3];
        f.derivative_into(&s, &u, &mut ds);
        assert_abs_diff_eq!(ds[1], -x2 - 0.01 * s[1], epsilon = 1e-15);
        let mut p = [1.0; 3];
        f.output_into(&[0.0; 3], &[0.0; 3], &mut p);
        assert_eq!(p, [0.0; 3]);
    }
}
