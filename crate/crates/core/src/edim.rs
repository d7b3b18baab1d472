//! The evolutionary differential inclusion `xdot in alpha*B(x,p) + beta*V(x,p)`
//! and its correlation function.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rules::{check_well_behaved, RevisionProtocol, WellBehavedReport};
use crate::simplex::{argmax_face, barycenter_of, nearest_on_face, DEFAULT_TIE_TOL};

/// Samples and seed of the well-behavedness check run at construction.
pub const CONSTRUCTION_CHECK_SAMPLES: usize = 1000;
pub const CONSTRUCTION_CHECK_SEED: u64 = 0x5eed;

/// Which element of the best-response face drives the best-response term.
///
/// Any element is admissible for the inclusion; `p'x_hat` is the same for all
/// of them, so the correlation function does not depend on the choice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieSelection {
    /// Uniform weight on the tied maximizers.
    #[default]
    Barycenter,
    /// The point of the face closest to the current state.
    Nearest,
}

#[derive(Debug, Clone)]
pub struct EdimSpec {
    alpha: f64,
    beta: f64,
    rule: Option<RevisionProtocol>,
    tie_tol: f64,
    selection: TieSelection,
    rule_report: Option<WellBehavedReport>,
}

impl EdimSpec {
    /// Validates the weights and, when `beta > 0`, runs the well-behavedness
    /// sampling check on the rule; a failed check is a configuration error.
    pub fn new(alpha: f64, beta: f64, rule: Option<RevisionProtocol>) -> Result<Self> {
        let mut spec = Self::new_unchecked(alpha, beta, rule)?;
        if let Some(rule) = spec.rule.as_ref().filter(|_| beta > 0.0) {
            let report = check_well_behaved(rule, CONSTRUCTION_CHECK_SAMPLES, CONSTRUCTION_CHECK_SEED);
            if !report.passed() {
                return Err(Error::config(format!(
                    "rule '{}' is not well-behaved ({} positive-correlation and {} stationarity violations in {} samples)",
                    rule.name(),
                    report.pc_violations,
                    report.ns_violations,
                    report.samples
                )));
            }
            spec.rule_report = Some(report);
        }
        Ok(spec)
    }

    /// Same weight validation as [`EdimSpec::new`] but skips the rule check.
    pub fn new_unchecked(alpha: f64, beta: f64, rule: Option<RevisionProtocol>) -> Result<Self> {
        if !(alpha.is_finite() && beta.is_finite()) || alpha < 0.0 || beta < 0.0 {
            return Err(Error::config("alpha and beta must be finite and nonnegative"));
        }
        if alpha + beta <= 0.0 {
            return Err(Error::config("alpha + beta must be positive"));
        }
        if beta > 0.0 && rule.is_none() {
            return Err(Error::config("beta > 0 requires a revision rule"));
        }
        Ok(Self {
            alpha,
            beta,
            rule,
            tie_tol: DEFAULT_TIE_TOL,
            selection: TieSelection::Barycenter,
            rule_report: None,
        })
    }

    pub fn with_tie_tol(mut self, tie_tol: f64) -> Result<Self> {
        if !(tie_tol.is_finite() && tie_tol >= 0.0) {
            return Err(Error::config("tie tolerance must be finite and >= 0"));
        }
        self.tie_tol = tie_tol;
        Ok(self)
    }

    pub fn with_selection(mut self, selection: TieSelection) -> Self {
        self.selection = selection;
        self
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn rule(&self) -> Option<&RevisionProtocol> {
        self.rule.as_ref()
    }

    pub fn tie_tol(&self) -> f64 {
        self.tie_tol
    }

    pub fn selection(&self) -> TieSelection {
        self.selection
    }

    /// Result of the construction-time rule check, if one ran.
    pub fn rule_report(&self) -> Option<&WellBehavedReport> {
        self.rule_report.as_ref()
    }

    /// The field is smooth (Lipschitz) exactly when the best-response term is off.
    pub fn is_smooth(&self) -> bool {
        self.alpha == 0.0
    }

    /// The rule structure is a conic combination of SEPT and ND-IPC terms
    /// (or the continuous term is absent), which makes the inclusion
    /// delta-passive.
    pub fn is_delta_passive_by_class(&self) -> bool {
        self.beta == 0.0 || self.rule.as_ref().is_some_and(|r| r.is_sept_plus_nd_ipc())
    }

    pub fn field(&self, x: &[f64], p: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        self.field_into(x, p, &mut out);
        out
    }

    /// Writes `alpha*(x_hat - x) + beta*V(x,p)` into `out`.
    pub fn field_into(&self, x: &[f64], p: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        if self.beta > 0.0 {
            if let Some(rule) = &self.rule {
                rule.mean_dynamic_into(x, p, out);
                out.iter_mut().for_each(|o| *o *= self.beta);
            }
        }
        if self.alpha > 0.0 {
            let face = argmax_face(p, self.tie_tol);
            let mut hat = vec![0.0; x.len()];
            match self.selection {
                TieSelection::Barycenter => barycenter_of(&face, &mut hat),
                TieSelection::Nearest => nearest_on_face(x, &face, &mut hat),
            }
            for ((o, h), xi) in out.iter_mut().zip(&hat).zip(x) {
                *o += self.alpha * (h - xi);
            }
        }
    }

    /// `alpha*(max p - p'x) + beta*p'V(x,p)`; independent of the selection.
    /// The best-response part is summed as `sum x_i (max p - p_i)` so it
    /// stays nonnegative in floating point.
    pub fn correlation(&self, x: &[f64], p: &[f64]) -> f64 {
        let mut rho = 0.0;
        if self.alpha > 0.0 {
            let pmax = p.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            rho += self.alpha * x.iter().zip(p).map(|(xi, pi)| xi * (pmax - pi)).sum::<f64>();
        }
        if self.beta > 0.0 {
            if let Some(rule) = &self.rule {
                rho += self.beta * rule.payoff_correlation(x, p);
            }
        }
        rho
    }
}
