//! Numerical passivity certificates.
//!
//! Trajectory integrals (counterclockwise and delta-passivity) are computed
//! over finite recorded horizons; a bounded running minimum is *consistent
//! with* the property, never a proof of it. The static checks (potential,
//! contractive, negative-imaginary) are sampling or grid based for the same
//! reason and report their coverage.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::edim::EdimSpec;
use crate::error::{Error, Result};
use crate::mechanism::{AnticipatoryPdm, GameKind, LtiPdm, MemorylessGame, PayoffMechanism, Pdm};
use crate::rules::check_well_behaved;
use crate::sampling;
use crate::sim::RunRecord;
use crate::simplex;

/// Central-difference step for Jacobian estimates.
pub const JACOBIAN_STEP: f64 = 1e-5;
/// Largest tangent-space Jacobian asymmetry accepted as "potential".
pub const POTENTIAL_TOL: f64 = 1e-6;
/// Largest `(y-x)'(F(y)-F(x))` accepted as "contractive".
pub const CONTRACTIVE_TOL: f64 = 1e-9;
/// Smallest NI eigenvalue accepted.
pub const NI_TOL: f64 = 1e-9;
/// Default sweep for the NI check.
pub const NI_GRID: (f64, f64, usize) = (1e-3, 1e6, 400);

/// Trapezoid accumulation of an integrand sampled on `times`.
#[derive(Debug, Clone, Serialize)]
pub struct RunningIntegral {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub running_min: f64,
}

impl RunningIntegral {
    pub fn from_integrand(times: &[f64], integrand: &[f64]) -> Self {
        let mut values = Vec::with_capacity(times.len());
        let mut acc = 0.0;
        let mut running_min: f64 = 0.0;
        values.push(0.0);
        for k in 1..times.len() {
            acc += 0.5 * (integrand[k] + integrand[k - 1]) * (times[k] - times[k - 1]);
            running_min = running_min.min(acc);
            values.push(acc);
        }
        Self {
            times: times.to_vec(),
            values,
            running_min,
        }
    }

    pub fn final_value(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }

    /// Change of the running minimum over samples with `t >= t0`.
    pub fn min_drop_after(&self, t0: f64) -> f64 {
        let mut before: f64 = 0.0;
        let mut overall: f64 = 0.0;
        for (t, v) in self.times.iter().zip(&self.values) {
            if *t < t0 {
                before = before.min(*v);
            }
            overall = overall.min(*v);
        }
        before - overall
    }
}

/// Time derivative of a sampled vector series: centered differences inside,
/// one-sided at the ends.
pub fn finite_difference(times: &[f64], series: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let m = times.len();
    if m < 3 || series.len() != m {
        return Err(Error::Insufficient(format!(
            "need at least 3 aligned samples for derivatives (got {m})"
        )));
    }
    let dim = series[0].len();
    let diff = |a: usize, b: usize| -> Vec<f64> {
        let dt = times[b] - times[a];
        (0..dim).map(|i| (series[b][i] - series[a][i]) / dt).collect()
    };
    let mut out = Vec::with_capacity(m);
    out.push(diff(0, 1));
    for k in 1..m - 1 {
        out.push(diff(k - 1, k + 1));
    }
    out.push(diff(m - 2, m - 1));
    Ok(out)
}

/// `int u_dot' x dt` over sampled series.
pub fn ccw_integral_series(times: &[f64], u: &[Vec<f64>], x: &[Vec<f64>]) -> Result<RunningIntegral> {
    let udot = finite_difference(times, u)?;
    let integrand: Vec<f64> = udot.iter().zip(x).map(|(a, b)| simplex::dot(a, b)).collect();
    Ok(RunningIntegral::from_integrand(times, &integrand))
}

/// `int a_dot' b_dot dt` where either derivative may be supplied exactly.
pub fn derivative_product_integral(
    times: &[f64],
    a_dot: &[Vec<f64>],
    b_dot: &[Vec<f64>],
    sign: f64,
) -> RunningIntegral {
    let integrand: Vec<f64> = a_dot
        .iter()
        .zip(b_dot)
        .map(|(a, b)| sign * simplex::dot(a, b))
        .collect();
    RunningIntegral::from_integrand(times, integrand.as_slice())
}

/// CCW integral `int u_dot' x dt` of a recorded run.
pub fn ccw_integral(record: &RunRecord) -> Result<RunningIntegral> {
    ccw_integral_series(&record.times, &record.u, &record.x)
}

/// Which derivative pairing a delta-passivity integral uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DeltaPair {
    /// `int u_dot' x_dot`: PDM delta-passivity.
    PdmPassive,
    /// `int -u_dot' x_dot`: PDM delta-antipassivity.
    PdmAntipassive,
    /// `int x_dot' p_dot`: delta-passivity of the inclusion.
    Edim,
}

/// Delta-passivity integral of a recorded run. Uses the recorded field
/// values for `x_dot` and finite differences for `u_dot`, `p_dot`.
pub fn delta_integral(record: &RunRecord, pair: DeltaPair) -> Result<RunningIntegral> {
    let xdot = if record.xdot.len() == record.times.len() {
        record.xdot.clone()
    } else {
        finite_difference(&record.times, &record.x)?
    };
    let (other, sign) = match pair {
        DeltaPair::PdmPassive => (finite_difference(&record.times, &record.u)?, 1.0),
        DeltaPair::PdmAntipassive => (finite_difference(&record.times, &record.u)?, -1.0),
        DeltaPair::Edim => (finite_difference(&record.times, &record.p)?, 1.0),
    };
    Ok(derivative_product_integral(&record.times, &other, &xdot, sign))
}

/// `n` log-spaced frequencies in `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.log10(), hi.log10());
    (0..n)
        .map(|k| 10f64.powf(a + (b - a) * k as f64 / (n - 1) as f64))
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct NiReport {
    pub omegas: Vec<f64>,
    /// Ascending eigenvalues of `j(F(jw) - F(jw)^*)` per frequency.
    pub eigenvalues: Vec<Vec<f64>>,
    pub min_eigenvalue: f64,
    pub argmin_omega: f64,
    pub passed: bool,
}

/// Sweeps the negative-imaginary condition `j(F(jw) - F(jw)^*) >= 0`.
pub fn ni_check(pdm: &LtiPdm, omegas: &[f64]) -> Result<NiReport> {
    if omegas.is_empty() || omegas.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
        return Err(Error::config("NI grid must be nonempty with positive frequencies"));
    }
    let eigenvalues: Vec<Vec<f64>> = omegas
        .par_iter()
        .map(|&w| {
            let f = pdm.frequency_response(w);
            let h: DMatrix<Complex64> = (&f - f.adjoint()) * Complex64::new(0.0, 1.0);
            // Symmetrize away rounding so the solver sees an exact Hermitian.
            let h = (&h + h.adjoint()) * Complex64::new(0.5, 0.0);
            let mut eig: Vec<f64> = SymmetricEigen::new(h).eigenvalues.iter().copied().collect();
            eig.sort_by(f64::total_cmp);
            eig
        })
        .collect();
    let (argmin, min_eigenvalue) = eigenvalues
        .iter()
        .enumerate()
        .map(|(k, e)| (k, e.first().copied().unwrap_or(0.0)))
        .fold((0, f64::INFINITY), |acc, cur| if cur.1 < acc.1 { cur } else { acc });
    Ok(NiReport {
        omegas: omegas.to_vec(),
        argmin_omega: omegas[argmin],
        min_eigenvalue,
        passed: min_eigenvalue >= -NI_TOL,
        eigenvalues,
    })
}

/// Analytic NI matrix of the anticipatory perturbation:
/// `-2 k lambda^2 w / (w^2 + lambda^2) * A`.
pub fn anticipatory_ni_eigenvalues(pdm: &AnticipatoryPdm, omega: f64) -> Vec<f64> {
    let l = pdm.lambda();
    let scale = -2.0 * pdm.k() * l * l * omega / (omega * omega + l * l);
    let mut eig: Vec<f64> = SymmetricEigen::new(pdm.matrix().clone())
        .eigenvalues
        .iter()
        .map(|e| scale * e)
        .collect();
    eig.sort_by(f64::total_cmp);
    eig
}

#[derive(Debug, Clone, Serialize)]
pub struct PotentialReport {
    pub samples: usize,
    pub max_asymmetry: f64,
    /// Sample point where the asymmetry peaked.
    pub witness: Vec<f64>,
    pub passed: bool,
}

fn jacobian(game: &MemorylessGame, x: &[f64]) -> DMatrix<f64> {
    let n = game.n();
    let mut j = DMatrix::zeros(n, n);
    let mut xp = x.to_vec();
    let mut xm = x.to_vec();
    for c in 0..n {
        xp[c] += JACOBIAN_STEP;
        xm[c] -= JACOBIAN_STEP;
        let fp = game.evaluate(&xp);
        let fm = game.evaluate(&xm);
        for r in 0..n {
            j[(r, c)] = (fp[r] - fm[r]) / (2.0 * JACOBIAN_STEP);
        }
        xp[c] = x[c];
        xm[c] = x[c];
    }
    j
}

/// Symmetry of the Jacobian on the simplex tangent space, estimated by
/// central differences at sampled interior points.
pub fn potential_check(game: &MemorylessGame, samples: usize, seed: u64) -> PotentialReport {
    let n = game.n();
    let proj = DMatrix::<f64>::identity(n, n) - DMatrix::from_element(n, n, 1.0 / n as f64);
    let mut rng = sampling::rng(seed);
    let mut report = PotentialReport {
        samples,
        max_asymmetry: 0.0,
        witness: Vec::new(),
        passed: true,
    };
    for _ in 0..samples.max(1) {
        let x = sampling::uniform_simplex(&mut rng, n);
        let j = jacobian(game, &x);
        let asym = &proj * (&j - j.transpose()) * &proj;
        let a = asym.amax();
        if a > report.max_asymmetry || report.witness.is_empty() {
            report.max_asymmetry = report.max_asymmetry.max(a);
            report.witness = x;
        }
    }
    report.passed = report.max_asymmetry < POTENTIAL_TOL;
    report
}

#[derive(Debug, Clone, Serialize)]
pub struct MonotonicityReport {
    pub pairs: usize,
    /// Largest `(y-x)'(F(y)-F(x))`; at most 0 for contractive games.
    pub max_value: f64,
    /// Smallest value; at least 0 when `-F` is contractive.
    pub min_value: f64,
    pub witness: (Vec<f64>, Vec<f64>),
    pub passed: bool,
}

impl MonotonicityReport {
    /// `-F` contractive (delta-passive game).
    pub fn anti_contractive(&self) -> bool {
        self.min_value >= -CONTRACTIVE_TOL
    }
}

/// Samples pairs of states (all vertex pairs first, then uniform pairs).
pub fn contractive_check(game: &MemorylessGame, pair_samples: usize, seed: u64) -> MonotonicityReport {
    let n = game.n();
    let mut pairs: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
    'outer: for i in 0..n {
        for j in i + 1..n {
            if pairs.len() >= pair_samples {
                break 'outer;
            }
            pairs.push((
                simplex::PopulationState::vertex(n, i).into_inner(),
                simplex::PopulationState::vertex(n, j).into_inner(),
            ));
        }
    }
    let mut rng = sampling::rng(seed);
    while pairs.len() < pair_samples {
        let x = sampling::uniform_simplex(&mut rng, n);
        let y = sampling::uniform_simplex(&mut rng, n);
        pairs.push((x, y));
    }
    let mut report = MonotonicityReport {
        pairs: pairs.len(),
        max_value: f64::NEG_INFINITY,
        min_value: f64::INFINITY,
        witness: (Vec::new(), Vec::new()),
        passed: true,
    };
    for (x, y) in pairs {
        let fx = game.evaluate(&x);
        let fy = game.evaluate(&y);
        let v: f64 = (0..n).map(|i| (y[i] - x[i]) * (fy[i] - fx[i])).sum();
        report.min_value = report.min_value.min(v);
        if v > report.max_value {
            report.max_value = v;
            report.witness = (x, y);
        }
    }
    if report.pairs == 0 {
        report.max_value = 0.0;
        report.min_value = 0.0;
    }
    report.passed = report.max_value <= CONTRACTIVE_TOL;
    report
}

/// Lower bound on the CCW integral of a potential game with affine payoff
/// `A x + b`: integration by parts gives `[u'x] - [f]`, and both terms are
/// bounded on the simplex.
pub fn potential_ccw_lower_bound(game: &MemorylessGame) -> f64 {
    let (a, b) = game.affine_form();
    let f_abs = 0.5 * a.amax() + b.amax();
    -(2.0 * game.bibo_bound() + 2.0 * f_abs)
}

/// Outcome of a static test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Holds,
    Fails,
    /// Declared by the model (e.g. from its base game) but not decided here.
    Claimed,
    Undetermined,
}

impl Verdict {
    fn and(self, other: Verdict) -> Verdict {
        use Verdict::*;
        match (self, other) {
            (Fails, _) | (_, Fails) => Fails,
            (Undetermined, _) | (_, Undetermined) => Undetermined,
            (Claimed, _) | (_, Claimed) => Claimed,
            _ => Holds,
        }
    }

    fn from_bool(b: bool) -> Verdict {
        if b {
            Verdict::Holds
        } else {
            Verdict::Fails
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FilterSummary {
    pub mu: f64,
    pub gamma: f64,
    pub nu: f64,
    pub gamma_nu: f64,
    pub static_gain: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PartAssessment {
    pub index: usize,
    pub pdm_kind: &'static str,
    pub filter: Option<FilterSummary>,
    pub bibo_bound: f64,
    pub ccw: Verdict,
    pub delta_antipassive: Verdict,
    pub delta_passive: Verdict,
    /// Which numbered condition the filter puts this part under (1, 2 or 3).
    pub condition: Option<u8>,
    /// Filtered parts: requirements on the mechanism. Direct parts:
    /// requirements on an added CCW, delta-antipassive PDM.
    pub requirements: Verdict,
    pub evidence: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    Theorem,
    /// A conforming mechanism plus CCW, delta-antipassive PDMs.
    CorollaryI,
    /// Several conforming filtered parts sharing `mu`.
    CorollaryII,
}

#[derive(Debug, Clone, Serialize)]
pub struct GateReport {
    pub edim_delta_passive: Verdict,
    pub rule_well_behaved: Verdict,
    pub parts: Vec<PartAssessment>,
    pub route: Option<Route>,
    pub eligible: Verdict,
    /// Whether convergence to the Nash set (not only to best responses) follows.
    pub nash_convergence: bool,
    pub notes: Vec<String>,
}

/// Sample sizes for the gate's static checks.
#[derive(Debug, Clone, Copy)]
pub struct GateSampling {
    pub potential_samples: usize,
    pub contractive_pairs: usize,
    pub seed: u64,
}

impl Default for GateSampling {
    fn default() -> Self {
        Self {
            potential_samples: 200,
            contractive_pairs: 10_000,
            seed: 11,
        }
    }
}

fn assess_game(game: &MemorylessGame, s: GateSampling, ev: &mut Vec<String>) -> (Verdict, Verdict, Verdict) {
    let pot = potential_check(game, s.potential_samples, s.seed);
    ev.push(format!(
        "potential check: max tangent Jacobian asymmetry {:.3e} over {} samples",
        pot.max_asymmetry, pot.samples
    ));
    if !pot.passed {
        ev.push(format!("asymmetry witness x = {:?}", pot.witness));
    }
    let mono = contractive_check(game, s.contractive_pairs, s.seed);
    ev.push(format!(
        "monotonicity over {} pairs: max {:.3e}, min {:.3e}",
        mono.pairs, mono.max_value, mono.min_value
    ));
    let claims = game.claims();
    if claims.potential && !pot.passed {
        ev.push("game claims to be potential but the check failed".into());
    }
    if claims.contractive && !mono.passed {
        ev.push("game claims to be contractive but the check failed".into());
    }
    (
        Verdict::from_bool(pot.passed),
        Verdict::from_bool(mono.passed),
        Verdict::from_bool(mono.anti_contractive()),
    )
}

fn assess_pdm(pdm: &Pdm, s: GateSampling, ev: &mut Vec<String>) -> (Verdict, Verdict, Verdict) {
    match pdm {
        Pdm::Game(g) => assess_game(g, s, ev),
        Pdm::Lti(l) => {
            let grid = log_grid(NI_GRID.0, NI_GRID.1, NI_GRID.2);
            let ccw = match ni_check(l, &grid) {
                Ok(r) => {
                    ev.push(format!(
                        "NI sweep [{:e}, {:e}] x{}: min eigenvalue {:.3e} at w = {:.3e}",
                        NI_GRID.0, NI_GRID.1, NI_GRID.2, r.min_eigenvalue, r.argmin_omega
                    ));
                    if r.passed {
                        Verdict::Holds
                    } else {
                        Verdict::Undetermined
                    }
                }
                Err(e) => {
                    ev.push(format!("NI sweep failed: {e}"));
                    Verdict::Undetermined
                }
            };
            ev.push("delta-passivity of LTI models is left to trajectory monitors".into());
            (ccw, Verdict::Undetermined, Verdict::Undetermined)
        }
        Pdm::Anticipatory(a) => {
            let (pot, contr, anti) = assess_game(a.base(), s, ev);
            let grid = log_grid(NI_GRID.0, NI_GRID.1, NI_GRID.2);
            let ni_passed = match ni_check(&a.perturbation(), &grid) {
                Ok(ni) => {
                    ev.push(format!(
                        "perturbation NI sweep: min eigenvalue {:.3e} at w = {:.3e}",
                        ni.min_eigenvalue, ni.argmin_omega
                    ));
                    ni.passed
                }
                Err(e) => {
                    ev.push(format!("perturbation NI sweep failed: {e}"));
                    false
                }
            };
            let ccw = if pot == Verdict::Holds && ni_passed {
                Verdict::Holds
            } else {
                Verdict::Undetermined
            };
            let lift = |v: Verdict| match v {
                Verdict::Holds if a.k() == 0.0 => Verdict::Holds,
                Verdict::Holds => Verdict::Claimed,
                _ => Verdict::Undetermined,
            };
            if a.k() != 0.0 {
                ev.push("delta-(anti)passivity inherited from the base game as a claim".into());
            }
            (ccw, lift(contr), lift(anti))
        }
    }
}

/// Static eligibility of a closed loop for the convergence guarantee.
pub fn theorem1_gate(mech: &PayoffMechanism, spec: &EdimSpec, sampling: GateSampling) -> GateReport {
    let mut notes = Vec::new();
    let edim_delta_passive = if spec.is_delta_passive_by_class() {
        Verdict::Holds
    } else {
        notes.push("rule is not a conic SEPT + ND-IPC combination; inclusion delta-passivity undetermined".into());
        Verdict::Undetermined
    };
    let rule_well_behaved = match (spec.beta() > 0.0, spec.rule()) {
        (false, _) => Verdict::Holds,
        (true, Some(rule)) => {
            let report = spec
                .rule_report()
                .cloned()
                .unwrap_or_else(|| check_well_behaved(rule, 1000, crate::edim::CONSTRUCTION_CHECK_SEED));
            if report.passed() {
                Verdict::Holds
            } else {
                Verdict::Fails
            }
        }
        (true, None) => Verdict::Fails,
    };

    let parts: Vec<PartAssessment> = mech
        .parts()
        .iter()
        .enumerate()
        .map(|(index, part)| {
            let mut evidence = Vec::new();
            let (ccw, anti, pass) = assess_pdm(&part.pdm, sampling, &mut evidence);
            let (condition, requirements) = match part.fopm {
                Some(f) => {
                    let gn = f.gamma_nu();
                    let (c, need) = if gn > 0.0 {
                        (1, anti)
                    } else if gn < 0.0 {
                        (2, pass)
                    } else {
                        (3, Verdict::Holds)
                    };
                    (Some(c), ccw.and(need))
                }
                None => (None, ccw.and(anti)),
            };
            PartAssessment {
                index,
                pdm_kind: part.pdm.kind_name(),
                filter: part.fopm.map(|f| FilterSummary {
                    mu: f.mu(),
                    gamma: f.gamma(),
                    nu: f.nu(),
                    gamma_nu: f.gamma_nu(),
                    static_gain: f.static_gain(),
                }),
                bibo_bound: part.pdm.bibo_bound(),
                ccw,
                delta_antipassive: anti,
                delta_passive: pass,
                condition,
                requirements,
                evidence,
            }
        })
        .collect();

    let filtered = parts.iter().filter(|p| p.filter.is_some()).count();
    let direct = parts.len() - filtered;
    let mut mech_verdict = parts
        .iter()
        .fold(Verdict::Holds, |acc, p| acc.and(p.requirements));
    let route = match (filtered, direct) {
        (1, 0) => Some(Route::Theorem),
        (0, _) => {
            notes.push("no payoff filter: treated as a zero filtered mechanism plus direct PDMs".into());
            Some(Route::CorollaryI)
        }
        (1, _) => Some(Route::CorollaryI),
        _ => {
            if mech.shared_mu().is_some() {
                Some(Route::CorollaryII)
            } else {
                notes.push("filtered parts use different mu; no sum route applies".into());
                mech_verdict = Verdict::Fails;
                None
            }
        }
    };
    let eligible = edim_delta_passive.and(rule_well_behaved).and(mech_verdict);
    let nash_convergence = spec.alpha() == 0.0;
    if !nash_convergence {
        notes.push("best-response term present: only convergence to best responses of p(t) follows".into());
    }
    GateReport {
        edim_delta_passive,
        rule_well_behaved,
        parts,
        route,
        eligible,
        nash_convergence,
        notes,
    }
}

/// The combined PDM output map when every part is a memoryless game.
pub fn aggregate_game(mech: &PayoffMechanism) -> Option<MemorylessGame> {
    let n = mech.n();
    let mut a = DMatrix::zeros(n, n);
    let mut b = nalgebra::DVector::zeros(n);
    for part in mech.parts() {
        match &part.pdm {
            Pdm::Game(g) => {
                let (ga, gb) = g.affine_form();
                a += ga;
                b += gb;
            }
            _ => return None,
        }
    }
    MemorylessGame::affine(a, b).ok()
}

/// Whether a game kind is a congestion game with nondecreasing link costs.
pub fn is_monotone_congestion(game: &MemorylessGame) -> bool {
    matches!(game.kind(), GameKind::Congestion(net) if net.has_nondecreasing_costs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mechanism::Fopm;
    use crate::mechanism::MechanismPart;
    use crate::rules::RevisionProtocol;
    use approx::assert_abs_diff_eq;
    use nalgebra::DVector;

    #[test]
    fn running_integral_basics() {
        let t = [0.0, 1.0, 2.0, 3.0];
        let r = RunningIntegral::from_integrand(&t, &[0.0, -2.0, 0.0, 4.0]);
        assert_eq!(r.values, vec![0.0, -1.0, -2.0, 0.0]);
        assert_eq!(r.running_min, -2.0);
        assert_eq!(r.min_drop_after(1.5), 1.0);
    }

    #[test]
    fn ccw_needs_three_samples() {
        assert!(ccw_integral_series(&[0.0, 1.0], &[vec![0.0], vec![1.0]], &[vec![1.0], vec![1.0]]).is_err());
    }

    #[test]
    fn ccw_of_constant_input_is_zero() {
        let t: Vec<f64> = (0..10).map(|k| k as f64 * 0.1).collect();
        let u = vec![vec![1.0, -2.0]; 10];
        let x: Vec<Vec<f64>> = t.iter().map(|s| vec![s / 2.0, 1.0 - s / 2.0]).collect();
        let r = ccw_integral_series(&t, &u, &x).unwrap();
        assert!(r.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn ccw_line_integral_closed_form() {
        // Symmetric affine game along a straight path; integrand is affine in t,
        // so the trapezoid rule with exact differences is exact.
        let a = DMatrix::from_row_slice(3, 3, &[-2.0, 1.0, 0.5, 1.0, -3.0, 0.0, 0.5, 0.0, -1.0]);
        let b = DVector::from_vec(vec![0.3, -0.2, 0.1]);
        let game = MemorylessGame::affine(a.clone(), b).unwrap();
        let x0 = DVector::from_vec(vec![0.7, 0.2, 0.1]);
        let x1 = DVector::from_vec(vec![0.1, 0.3, 0.6]);
        let m = 101;
        let t: Vec<f64> = (0..m).map(|k| k as f64 / (m - 1) as f64).collect();
        let xs: Vec<Vec<f64>> = t
            .iter()
            .map(|s| (&x0 * (1.0 - s) + &x1 * *s).as_slice().to_vec())
            .collect();
        let us: Vec<Vec<f64>> = xs.iter().map(|x| game.evaluate(x)).collect();
        let r = ccw_integral_series(&t, &us, &xs).unwrap();
        let d = &x1 - &x0;
        let closed = (&a * &d).dot(&((&x0 + &x1) * 0.5));
        assert_abs_diff_eq!(r.final_value(), closed, epsilon = 1e-12);
    }

    #[test]
    fn ni_examples() {
        let grid = log_grid(1e-3, 1e6, 400);
        let pdm = AnticipatoryPdm::new(MemorylessGame::zero(3), 1.0, DMatrix::identity(3, 3), DVector::zeros(3), -1.0)
            .unwrap();
        let r = ni_check(&pdm.perturbation(), &grid).unwrap();
        assert!(r.passed);
        for (w, eig) in r.omegas.iter().zip(&r.eigenvalues) {
            let want = 2.0 * w / (w * w + 1.0);
            for e in eig {
                assert_abs_diff_eq!(*e, want, epsilon = 1e-8);
            }
        }
        let d = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, -1.0]);
        let r = ni_check(&LtiPdm::static_gain(d).unwrap(), &grid).unwrap();
        assert!(r.passed);
        assert_eq!(r.min_eigenvalue, 0.0);
        assert!(ni_check(&LtiPdm::static_gain(DMatrix::identity(2, 2)).unwrap(), &[]).is_err());
    }

    #[test]
    fn potential_examples() {
        assert!(potential_check(&MemorylessGame::braess(), 100, 3).passed);
        assert!(potential_check(&MemorylessGame::zero(3), 10, 3).passed);
        let mut a = DMatrix::zeros(3, 3);
        a[(0, 1)] = 1.0;
        let r = potential_check(&MemorylessGame::affine(a, DVector::zeros(3)).unwrap(), 10, 3);
        assert!(!r.passed);
        assert_abs_diff_eq!(r.max_asymmetry, 1.0 / 3.0, epsilon = 1e-6);
        assert_eq!(r.witness.len(), 3);
    }

    #[test]
    fn contractive_examples() {
        assert!(contractive_check(&MemorylessGame::braess(), 2000, 5).passed);
        let coord = MemorylessGame::affine(DMatrix::identity(3, 3), DVector::zeros(3)).unwrap();
        let r = contractive_check(&coord, 100, 5);
        assert!(!r.passed);
        assert_abs_diff_eq!(r.max_value, 2.0, epsilon = 1e-12);
        let constant = MemorylessGame::affine(DMatrix::zeros(3, 3), DVector::from_vec(vec![1.0, 2.0, 3.0])).unwrap();
        let r = contractive_check(&constant, 100, 5);
        assert!(r.passed);
        assert_eq!(r.max_value, 0.0);
    }

    #[test]
    fn gate_on_toll_mechanism() {
        let mech = PayoffMechanism::braess_toll(1.0, 0.01).unwrap();
        let spec = EdimSpec::new(0.0, 1.0, Some(RevisionProtocol::smith())).unwrap();
        let r = theorem1_gate(&mech, &spec, GateSampling::default());
        assert_eq!(r.route, Some(Route::CorollaryI));
        assert_eq!(r.eligible, Verdict::Holds);
        assert_eq!(r.parts[1].condition, Some(3));
        assert!(r.nash_convergence);
    }

    #[test]
    fn gate_on_anticipatory_condition_one() {
        let ant = AnticipatoryPdm::new(
            MemorylessGame::braess(),
            2.0,
            -DMatrix::<f64>::identity(3, 3),
            DVector::zeros(3),
            1.0,
        )
        .unwrap();
        let mech = PayoffMechanism::single(MechanismPart::filtered(
            Pdm::Anticipatory(ant),
            Fopm::new(0.5, 1.0, 0.5).unwrap(),
        ));
        let spec = EdimSpec::new(1.0, 1.0, Some(RevisionProtocol::bnn())).unwrap();
        let r = theorem1_gate(&mech, &spec, GateSampling::default());
        assert_eq!(r.route, Some(Route::Theorem));
        assert_eq!(r.parts[0].condition, Some(1));
        assert_eq!(r.parts[0].ccw, Verdict::Holds);
        assert_eq!(r.parts[0].delta_antipassive, Verdict::Claimed);
        assert!(r.parts[0].evidence.iter().any(|e| e.contains("NI sweep")));
        assert!(!r.nash_convergence);
    }

    #[test]
    fn gate_rejects_mismatched_mu() {
        let sensor = || Pdm::Game(MemorylessGame::toll_sensor(3, 1, -1.0).unwrap());
        let mech = PayoffMechanism::new(vec![
            MechanismPart::filtered(sensor(), Fopm::new(0.1, 1.0, 0.0).unwrap()),
            MechanismPart::filtered(sensor(), Fopm::new(0.2, 1.0, 0.0).unwrap()),
        ])
        .unwrap();
        let spec = EdimSpec::new(0.0, 1.0, Some(RevisionProtocol::smith())).unwrap();
        let r = theorem1_gate(&mech, &spec, GateSampling::default());
        assert_eq!(r.route, None);
        assert_eq!(r.eligible, Verdict::Fails);
    }
}
