//! Revision protocols (learning rules) and the mean dynamic they induce.
//!
//! A protocol is a conic combination of terms. Each term is either an
//! impartial pairwise comparison term, `T_ij = psi_j(p_j - p_i)`, or a
//! separable excess-payoff term, `T_ij = phi_j(p_j - p'x)`. The mean dynamic
//! is the net inflow `V_i = sum_j x_j T_ji - x_i T_ij`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::sampling;
use crate::simplex::{self, distance_to_best_response, DEFAULT_TIE_TOL};

/// Mean-dynamic sup-norm at or below which a state counts as stationary.
pub const STATIONARY_TOL: f64 = 1e-10;
/// Best-response distance at or below which a state counts as a best response.
pub const BEST_RESPONSE_DIST_TOL: f64 = 1e-8;
/// Payoffs in the well-behavedness sampler are drawn from `[-R, R]^n`.
pub const SAMPLE_PAYOFF_RANGE: f64 = 10.0;

/// Monotone piecewise-linear shape through `(0, 0)` and the given knots.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapeTable {
    knots: Vec<(f64, f64)>,
}

impl ShapeTable {
    /// Knots must have strictly increasing positive abscissae and positive,
    /// nondecreasing values.
    pub fn new(knots: Vec<(f64, f64)>) -> Result<Self> {
        if knots.is_empty() {
            return Err(Error::config("shape table needs at least one knot"));
        }
        let mut prev = (0.0, 0.0);
        for &(t, v) in &knots {
            if !(t.is_finite() && v.is_finite()) {
                return Err(Error::config("shape table knots must be finite"));
            }
            if t <= prev.0 {
                return Err(Error::config(
                    "shape table abscissae must be positive and strictly increasing",
                ));
            }
            if v <= 0.0 || v < prev.1 {
                return Err(Error::config(
                    "shape table values must be positive and nondecreasing",
                ));
            }
            prev = (t, v);
        }
        Ok(Self { knots })
    }

    pub fn knots(&self) -> &[(f64, f64)] {
        &self.knots
    }

    fn eval(&self, tau: f64) -> f64 {
        if tau <= 0.0 {
            return 0.0;
        }
        let mut prev = (0.0, 0.0);
        for &(t, v) in &self.knots {
            if tau <= t {
                return prev.1 + (v - prev.1) * (tau - prev.0) / (t - prev.0);
            }
            prev = (t, v);
        }
        // Continue the last segment's slope.
        let slope = match self.knots.len() {
            1 => prev.1 / prev.0,
            k => {
                let (t0, v0) = self.knots[k - 2];
                (prev.1 - v0) / (prev.0 - t0)
            }
        };
        prev.1 + slope * (tau - prev.0)
    }
}

/// Shape applied to a payoff difference or an excess payoff.
#[derive(Debug, Clone, PartialEq)]
pub enum ShapeFunction {
    /// `[tau]_+`
    Relu,
    /// `[tau]_+^k`, `k >= 1`
    ReluPower(f64),
    Table(ShapeTable),
    /// Constant rate regardless of sign. Violates the sign condition; only
    /// useful as a negative fixture.
    Constant(f64),
}

impl ShapeFunction {
    pub fn relu_power(k: f64) -> Result<Self> {
        if !(k.is_finite() && k >= 1.0) {
            return Err(Error::config(format!("relu power exponent {k} must be >= 1")));
        }
        Ok(Self::ReluPower(k))
    }

    #[inline]
    pub fn eval(&self, tau: f64) -> f64 {
        match self {
            Self::Relu => tau.max(0.0),
            Self::ReluPower(k) => {
                if tau > 0.0 {
                    if *k == 2.0 {
                        tau * tau
                    } else if *k == 3.0 {
                        tau * tau * tau
                    } else {
                        tau.powf(*k)
                    }
                } else {
                    0.0
                }
            }
            Self::Table(t) => t.eval(tau),
            Self::Constant(c) => *c,
        }
    }

    /// Positive exactly on positive arguments.
    pub fn is_sign_preserving(&self) -> bool {
        !matches!(self, Self::Constant(_))
    }

    pub fn is_nondecreasing(&self) -> bool {
        // Tables are validated monotone at construction.
        true
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RuleClass {
    /// Impartial pairwise comparison.
    Ipc,
    /// Separable excess payoff target.
    Sept,
}

/// Shapes for each destination strategy.
#[derive(Debug, Clone, PartialEq)]
pub enum Shapes {
    Uniform(ShapeFunction),
    PerStrategy(Vec<ShapeFunction>),
}

impl Shapes {
    #[inline]
    fn get(&self, j: usize) -> &ShapeFunction {
        match self {
            Shapes::Uniform(s) => s,
            Shapes::PerStrategy(v) => &v[j],
        }
    }

    fn all(&self) -> Box<dyn Iterator<Item = &ShapeFunction> + '_> {
        match self {
            Shapes::Uniform(s) => Box::new(std::iter::once(s)),
            Shapes::PerStrategy(v) => Box::new(v.iter()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RuleTerm {
    pub weight: f64,
    pub class: RuleClass,
    pub shapes: Shapes,
}

impl RuleTerm {
    pub fn uniform(weight: f64, class: RuleClass, shape: ShapeFunction) -> Self {
        Self {
            weight,
            class,
            shapes: Shapes::Uniform(shape),
        }
    }
}

/// A learning rule: a nonnegative combination of IPC and SEPT terms.
#[derive(Debug, Clone, PartialEq)]
pub struct RevisionProtocol {
    name: String,
    terms: Vec<RuleTerm>,
}

impl RevisionProtocol {
    pub fn new(name: impl Into<String>, terms: Vec<RuleTerm>) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::config("revision protocol needs at least one term"));
        }
        if terms.iter().any(|t| !(t.weight.is_finite() && t.weight >= 0.0)) {
            return Err(Error::config("rule term weights must be finite and >= 0"));
        }
        if !terms.iter().any(|t| t.weight > 0.0) {
            return Err(Error::config("rule needs a term with positive weight"));
        }
        let mut dim = None;
        for t in &terms {
            if let Shapes::PerStrategy(v) = &t.shapes {
                match dim {
                    None => dim = Some(v.len()),
                    Some(d) if d != v.len() => {
                        return Err(Error::config(
                            "per-strategy shape lists disagree on the number of strategies",
                        ))
                    }
                    _ => {}
                }
            }
        }
        Ok(Self {
            name: name.into(),
            terms,
        })
    }

    /// `T_ij = [p_j - p_i]_+`
    pub fn smith() -> Self {
        Self::new(
            "smith",
            vec![RuleTerm::uniform(1.0, RuleClass::Ipc, ShapeFunction::Relu)],
        )
        .expect("valid")
    }

    /// `T_ij = [p_j - p'x]_+`
    pub fn bnn() -> Self {
        Self::new(
            "bnn",
            vec![RuleTerm::uniform(1.0, RuleClass::Sept, ShapeFunction::Relu)],
        )
        .expect("valid")
    }

    /// `0.2 [p_j - p_i]_+ + 0.1 [p_j - p_i]_+^2 + 0.4 [p_j - p'x]_+^3`
    pub fn hybrid_example() -> Self {
        Self::new(
            "hybrid1",
            vec![
                RuleTerm::uniform(0.2, RuleClass::Ipc, ShapeFunction::Relu),
                RuleTerm::uniform(0.1, RuleClass::Ipc, ShapeFunction::ReluPower(2.0)),
                RuleTerm::uniform(0.4, RuleClass::Sept, ShapeFunction::ReluPower(3.0)),
            ],
        )
        .expect("valid")
    }

    pub fn by_name(name: &str) -> Option<Self> {
        match name {
            "smith" => Some(Self::smith()),
            "bnn" => Some(Self::bnn()),
            "hybrid1" => Some(Self::hybrid_example()),
            _ => None,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn terms(&self) -> &[RuleTerm] {
        &self.terms
    }

    pub fn weights(&self) -> Vec<f64> {
        self.terms.iter().map(|t| t.weight).collect()
    }

    /// Number of strategies fixed by per-strategy shapes, if any.
    pub fn fixed_dimension(&self) -> Option<usize> {
        self.terms.iter().find_map(|t| match &t.shapes {
            Shapes::PerStrategy(v) => Some(v.len()),
            Shapes::Uniform(_) => None,
        })
    }

    pub fn supports(&self, n: usize) -> bool {
        self.fixed_dimension().is_none_or(|d| d == n)
    }

    /// Every term is IPC or SEPT with sign-preserving shapes.
    pub fn has_valid_shapes(&self) -> bool {
        self.terms
            .iter()
            .all(|t| t.shapes.all().all(ShapeFunction::is_sign_preserving))
    }

    /// Conic combination of a SEPT rule and a nondecreasing IPC rule.
    pub fn is_sept_plus_nd_ipc(&self) -> bool {
        self.has_valid_shapes()
            && self.terms.iter().all(|t| match t.class {
                RuleClass::Sept => true,
                RuleClass::Ipc => t.shapes.all().all(ShapeFunction::is_nondecreasing),
            })
    }

    /// The conditional switch-rate matrix `T(x, p)`, row = origin.
    pub fn switch_rates(&self, x: &[f64], p: &[f64]) -> Vec<Vec<f64>> {
        let n = x.len();
        let avg = simplex::dot(p, x);
        let mut t = vec![vec![0.0; n]; n];
        for term in &self.terms {
            for (i, row) in t.iter_mut().enumerate() {
                for (j, entry) in row.iter_mut().enumerate() {
                    let arg = match term.class {
                        RuleClass::Ipc => p[j] - p[i],
                        RuleClass::Sept => p[j] - avg,
                    };
                    *entry += term.weight * term.shapes.get(j).eval(arg);
                }
            }
        }
        t
    }

    pub fn mean_dynamic(&self, x: &[f64], p: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        self.mean_dynamic_into(x, p, &mut out);
        out
    }

    /// `p'V(x, p)` summed as `sum x_i T_ij (p_j - p_i)` for IPC terms and
    /// `mass * sum phi_j (p_j - p'x)` for SEPT terms. Every summand is a
    /// product of nonnegative factors under sign-preserving shapes, so the
    /// result is never negative through rounding.
    pub fn payoff_correlation(&self, x: &[f64], p: &[f64]) -> f64 {
        let n = x.len();
        let mass: f64 = x.iter().sum();
        let avg = simplex::dot(p, x);
        let mut rho = 0.0;
        for term in self.terms.iter().filter(|t| t.weight > 0.0) {
            let mut acc = 0.0;
            match term.class {
                RuleClass::Ipc => {
                    for i in 0..n {
                        for j in 0..n {
                            let d = p[j] - p[i];
                            if j != i && x[i] > 0.0 {
                                acc += x[i] * term.shapes.get(j).eval(d) * d;
                            }
                        }
                    }
                }
                RuleClass::Sept => {
                    for j in 0..n {
                        let d = p[j] - avg;
                        acc += term.shapes.get(j).eval(d) * d;
                    }
                    acc *= mass;
                }
            }
            rho += term.weight * acc;
        }
        rho
    }

    /// Writes `V(x, p)` into `out`.
    pub fn mean_dynamic_into(&self, x: &[f64], p: &[f64], out: &mut [f64]) {
        let n = x.len();
        out.iter_mut().for_each(|o| *o = 0.0);
        let mass: f64 = x.iter().sum();
        let avg = simplex::dot(p, x);
        for term in &self.terms {
            if term.weight == 0.0 {
                continue;
            }
            let w = term.weight;
            match term.class {
                RuleClass::Ipc => {
                    for i in 0..n {
                        let mut inflow = 0.0;
                        let mut out_rate = 0.0;
                        for j in 0..n {
                            if j == i {
                                continue;
                            }
                            inflow += x[j] * term.shapes.get(i).eval(p[i] - p[j]);
                            out_rate += term.shapes.get(j).eval(p[j] - p[i]);
                        }
                        out[i] += w * (inflow - x[i] * out_rate);
                    }
                }
                RuleClass::Sept => {
                    let mut total = 0.0;
                    let rates: Vec<f64> = (0..n)
                        .map(|j| {
                            let r = term.shapes.get(j).eval(p[j] - avg);
                            total += r;
                            r
                        })
                        .collect();
                    for i in 0..n {
                        out[i] += w * (rates[i] * mass - x[i] * total);
                    }
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ViolationKind {
    /// Nonzero mean dynamic without positive correlation.
    PositiveCorrelation,
    /// Stationarity and best-response membership disagree.
    NashStationarity,
}

#[derive(Debug, Clone, Serialize)]
pub struct Witness {
    pub kind: ViolationKind,
    pub x: Vec<f64>,
    pub p: Vec<f64>,
    pub mean_dynamic: Vec<f64>,
    pub correlation: f64,
    pub best_response_distance: f64,
}

/// Outcome of the sampling check. Sampling never proves the property; it
/// either finds a counterexample or reports how many samples were clean.
#[derive(Debug, Clone, Serialize)]
pub struct WellBehavedReport {
    pub rule: String,
    pub samples: usize,
    pub stationary_samples: usize,
    pub dimensions: Vec<usize>,
    pub pc_violations: usize,
    pub ns_violations: usize,
    pub witnesses: Vec<Witness>,
}

impl WellBehavedReport {
    pub fn passed(&self) -> bool {
        self.pc_violations == 0 && self.ns_violations == 0
    }
}

const MAX_WITNESSES: usize = 5;

/// Samples `(x, p)` pairs and tests positive correlation and Nash
/// stationarity. Every fourth sample is built so that `x` is a best response
/// to `p`, otherwise the stationarity direction would never be exercised.
pub fn check_well_behaved(rule: &RevisionProtocol, sample_count: usize, seed: u64) -> WellBehavedReport {
    let dims: Vec<usize> = match rule.fixed_dimension() {
        Some(d) => vec![d],
        None => vec![2, 3, 4, 5],
    };
    let mut rng = sampling::rng(seed);
    let mut report = WellBehavedReport {
        rule: rule.name().to_string(),
        samples: sample_count,
        stationary_samples: 0,
        dimensions: dims.clone(),
        pc_violations: 0,
        ns_violations: 0,
        witnesses: Vec::new(),
    };
    let r = SAMPLE_PAYOFF_RANGE;
    for k in 0..sample_count {
        let n = dims[k % dims.len()];
        let (x, p) = if k % 4 == 3 {
            report.stationary_samples += 1;
            stationary_pair(&mut rng, n)
        } else {
            (
                sampling::uniform_simplex(&mut rng, n),
                sampling::uniform_box(&mut rng, n, -r, r),
            )
        };
        let v = rule.mean_dynamic(&x, &p);
        let vnorm = simplex::max_abs(&v);
        let corr = simplex::dot(&p, &v);
        let dist = distance_to_best_response(&x, &p, DEFAULT_TIE_TOL);

        let mut record = |kind| {
            if report.witnesses.len() < MAX_WITNESSES {
                report.witnesses.push(Witness {
                    kind,
                    x: x.clone(),
                    p: p.clone(),
                    mean_dynamic: v.clone(),
                    correlation: corr,
                    best_response_distance: dist,
                });
            }
        };
        if vnorm > STATIONARY_TOL && corr <= 0.0 {
            report.pc_violations += 1;
            record(ViolationKind::PositiveCorrelation);
        }
        if (vnorm <= STATIONARY_TOL) != (dist <= BEST_RESPONSE_DIST_TOL) {
            report.ns_violations += 1;
            record(ViolationKind::NashStationarity);
        }
    }
    report
}

/// A payoff vector with a random tied-maximal face and a state supported on
/// that face.
fn stationary_pair<R: rand::Rng>(rng: &mut R, n: usize) -> (Vec<f64>, Vec<f64>) {
    let r = SAMPLE_PAYOFF_RANGE;
    let mut p = sampling::uniform_box(rng, n, -r, r - 1.0);
    let mut face: Vec<usize> = (0..n).filter(|_| rng.random_bool(0.5)).collect();
    if face.is_empty() {
        face.push(rng.random_range(0..n));
    }
    let top = p.iter().copied().fold(f64::NEG_INFINITY, f64::max) + rng.random_range(0.1..1.0);
    let weights = sampling::uniform_simplex(rng, face.len());
    let mut x = vec![0.0; n];
    for (&i, w) in face.iter().zip(weights) {
        p[i] = top;
        x[i] = w;
    }
    (x, p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn smith_rates() {
        let t = RevisionProtocol::smith().switch_rates(&[0.5, 0.5], &[1.0, 0.0]);
        assert_eq!(t[1][0], 1.0);
        assert_eq!(t[0][1], 0.0);
        let t = RevisionProtocol::smith().switch_rates(&[0.5, 0.5], &[3.0, 3.0]);
        assert!(t.iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn bnn_rates() {
        let bnn = RevisionProtocol::bnn();
        let t = bnn.switch_rates(&[0.5, 0.5], &[1.0, 0.0]);
        assert_abs_diff_eq!(t[1][0], 0.5, epsilon = 1e-15);
        assert_eq!(t[0][1], 0.0);
        let t = bnn.switch_rates(&[0.0, 1.0, 0.0], &[-3.0, 2.0, 7.0]);
        assert!(t.iter().all(|row| row[1] == 0.0));
    }

    #[test]
    fn hybrid_rates_and_weights() {
        let h = RevisionProtocol::hybrid_example();
        assert_eq!(h.weights(), vec![0.2, 0.1, 0.4]);
        let t = h.switch_rates(&[0.5, 0.5], &[2.0, 0.0]);
        assert_abs_diff_eq!(t[1][0], 1.2, epsilon = 1e-14);
        assert_eq!(t[0][1], 0.0);
        assert!(h.is_sept_plus_nd_ipc());
    }

    #[test]
    fn mean_dynamic_examples() {
        let v = RevisionProtocol::smith().mean_dynamic(&[0.5, 0.5], &[1.0, 0.0]);
        assert_abs_diff_eq!(v[0], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(v[1], -0.5, epsilon = 1e-15);
        let v = RevisionProtocol::bnn().mean_dynamic(&[0.5, 0.5], &[1.0, 0.0]);
        assert_abs_diff_eq!(v[0], 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(v[1], -0.25, epsilon = 1e-15);
        for rule in ["smith", "bnn", "hybrid1"] {
            let v = RevisionProtocol::by_name(rule)
                .unwrap()
                .mean_dynamic(&[0.25, 0.5, 0.25], &[-8.5, -8.5, -8.5]);
            assert_eq!(v, vec![0.0; 3], "{rule}");
        }
    }

    #[test]
    fn mean_dynamic_matches_matrix_form() {
        let x = [0.2, 0.3, 0.1, 0.4];
        let p = [1.5, -2.0, 0.7, 3.1];
        for rule in ["smith", "bnn", "hybrid1"] {
            let r = RevisionProtocol::by_name(rule).unwrap();
            let t = r.switch_rates(&x, &p);
            let v = r.mean_dynamic(&x, &p);
            for i in 0..4 {
                let direct: f64 = (0..4).map(|j| x[j] * t[j][i] - x[i] * t[i][j]).sum();
                assert_abs_diff_eq!(v[i], direct, epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn well_behaved_named_rules() {
        for rule in ["smith", "bnn", "hybrid1"] {
            let r = check_well_behaved(&RevisionProtocol::by_name(rule).unwrap(), 1000, 1);
            assert!(r.passed(), "{rule}: {r:?}");
            assert!(r.stationary_samples > 0);
        }
    }

    #[test]
    fn broken_rule_is_caught() {
        let broken = RevisionProtocol::new(
            "always-switch",
            vec![RuleTerm::uniform(1.0, RuleClass::Ipc, ShapeFunction::Constant(1.0))],
        )
        .unwrap();
        assert!(!broken.has_valid_shapes());
        let r = check_well_behaved(&broken, 1000, 1);
        assert!(!r.passed());
        assert!(!r.witnesses.is_empty());
        assert!(r.pc_violations > 0 && r.ns_violations > 0);
    }

    #[test]
    fn shape_table_validation_and_eval() {
        assert!(ShapeTable::new(vec![(1.0, 0.0)]).is_err());
        assert!(ShapeTable::new(vec![(1.0, 2.0), (0.5, 3.0)]).is_err());
        assert!(ShapeTable::new(vec![(1.0, 2.0), (2.0, 1.0)]).is_err());
        let t = ShapeFunction::Table(ShapeTable::new(vec![(1.0, 2.0), (2.0, 3.0)]).unwrap());
        assert_eq!(t.eval(-1.0), 0.0);
        assert_eq!(t.eval(0.0), 0.0);
        assert_abs_diff_eq!(t.eval(0.5), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(t.eval(1.5), 2.5, epsilon = 1e-15);
        assert_abs_diff_eq!(t.eval(3.0), 4.0, epsilon = 1e-15);
    }

    #[test]
    fn protocol_validation() {
        assert!(RevisionProtocol::new("x", vec![]).is_err());
        assert!(RevisionProtocol::new(
            "x",
            vec![RuleTerm::uniform(0.0, RuleClass::Ipc, ShapeFunction::Relu)]
        )
        .is_err());
        assert!(RevisionProtocol::new(
            "x",
            vec![RuleTerm::uniform(-1.0, RuleClass::Ipc, ShapeFunction::Relu)]
        )
        .is_err());
    }

    fn simplex_point(n: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.0f64..1.0, n).prop_map(|v| {
            let s: f64 = v.iter().sum::<f64>() + 1e-9;
            v.into_iter().map(|e| (e + 1e-9 / 4.0) / s).collect()
        })
    }

    proptest! {
        #[test]
        fn conservation_shift_invariance_and_pc(
            x in simplex_point(4),
            p in prop::collection::vec(-10.0f64..10.0, 4),
            c in -20.0f64..20.0,
            which in 0usize..3,
        ) {
            let rule = RevisionProtocol::by_name(["smith", "bnn", "hybrid1"][which]).unwrap();
            let v = rule.mean_dynamic(&x, &p);
            prop_assert!(v.iter().sum::<f64>().abs() < 1e-11);
            prop_assert!(simplex::dot(&p, &v) >= -1e-12);
            let rho = rule.payoff_correlation(&x, &p);
            prop_assert!(rho >= 0.0);
            prop_assert!((rho - simplex::dot(&p, &v)).abs() < 1e-9 * (1.0 + rho));
            let shifted: Vec<f64> = p.iter().map(|e| e + c).collect();
            let w = rule.mean_dynamic(&x, &shifted);
            for (a, b) in v.iter().zip(&w) {
                prop_assert!((a - b).abs() < 1e-9 * (1.0 + a.abs()));
            }
        }
    }
}
