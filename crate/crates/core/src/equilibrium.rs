//! Nash equilibria of affine stationary games `F(x) = A x + b` by support
//! enumeration, and distances to the resulting set.

use nalgebra::{DMatrix, DVector, SVD};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::mechanism::PayoffMechanism;
use crate::simplex::{self, PopulationState};

/// Largest strategy count accepted by the enumeration (2^n - 1 supports).
pub const MAX_STRATEGIES: usize = 12;
/// Slack allowed on off-support payoffs.
pub const PAYOFF_SLACK: f64 = 1e-9;
/// Merge radius for equilibria found from different supports.
pub const DEDUP_RADIUS: f64 = 1e-8;
/// Best-response residual tolerated when re-verifying an equilibrium.
pub const VERIFY_TOL: f64 = 1e-8;

const RANK_EPS: f64 = 1e-11;

/// A continuum of equilibria sharing one support: the polytope of states
/// supported on `support` with equal payoffs there and no better payoff
/// elsewhere.
#[derive(Debug, Clone, Serialize)]
pub struct NashFace {
    pub support: Vec<usize>,
    /// One equilibrium on the face.
    pub representative: Vec<f64>,
    #[serde(skip)]
    a: DMatrix<f64>,
    #[serde(skip)]
    b: DVector<f64>,
}

impl NashFace {
    /// Distance from `x` to the face polytope (Dykstra's alternating
    /// projections).
    pub fn distance(&self, x: &[f64]) -> f64 {
        simplex::euclidean(x, &self.project(x))
    }

    fn project(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        let lead = self.support[0];
        let off: Vec<usize> = (0..n).filter(|i| !self.support.contains(i)).collect();

        // Affine constraints: zero off support, unit mass, equal payoffs on support.
        let mut rows: Vec<(Vec<f64>, f64)> = Vec::new();
        for &i in &off {
            let mut r = vec![0.0; n];
            r[i] = 1.0;
            rows.push((r, 0.0));
        }
        rows.push((vec![1.0; n], 1.0));
        for &i in self.support.iter().skip(1) {
            let r: Vec<f64> = (0..n).map(|j| self.a[(i, j)] - self.a[(lead, j)]).collect();
            rows.push((r, self.b[lead] - self.b[i]));
        }
        let e = DMatrix::from_fn(rows.len(), n, |r, c| rows[r].0[c]);
        let f = DVector::from_iterator(rows.len(), rows.iter().map(|r| r.1));
        let pinv = e
            .clone()
            .pseudo_inverse(RANK_EPS)
            .expect("pseudo-inverse of a finite matrix");
        let affine = |y: &DVector<f64>| y - &pinv * (&e * y - &f);

        // Half-spaces: off-support payoffs no better than the lead strategy.
        let halfspaces: Vec<(DVector<f64>, f64)> = off
            .iter()
            .map(|&j| {
                let g = DVector::from_fn(n, |c, _| self.a[(j, c)] - self.a[(lead, c)]);
                (g, self.b[lead] - self.b[j])
            })
            .collect();

        let sets = 2 + halfspaces.len();
        let mut y = DVector::from_column_slice(x);
        let mut corrections = vec![DVector::<f64>::zeros(n); sets];
        for _ in 0..20_000 {
            let start = y.clone();
            for (k, corr) in corrections.iter_mut().enumerate() {
                let z = &y + &*corr;
                let proj = match k {
                    0 => affine(&z),
                    1 => z.map(|v| v.max(0.0)),
                    _ => {
                        let (g, h) = &halfspaces[k - 2];
                        let viol = g.dot(&z) - h;
                        let gg = g.dot(g);
                        if viol > 0.0 && gg > 0.0 {
                            &z - g * (viol / gg)
                        } else {
                            z.clone()
                        }
                    }
                };
                *corr = &z - &proj;
                y = proj;
            }
            if (&y - &start).amax() < 1e-14 {
                break;
            }
        }
        y.as_slice().to_vec()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct NashSet {
    /// Isolated equilibria.
    pub points: Vec<PopulationState>,
    /// Degenerate components, one per support with an underdetermined system.
    pub faces: Vec<NashFace>,
}

impl NashSet {
    pub fn is_empty(&self) -> bool {
        self.points.is_empty() && self.faces.is_empty()
    }
}

/// Equilibria of `F(x) = A x + b` on the simplex.
pub fn nash_affine(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<NashSet> {
    let n = b.len();
    if a.shape() != (n, n) {
        return Err(Error::Dimension {
            expected: n,
            got: a.nrows(),
            context: "stationary game matrix",
        });
    }
    if n == 0 || n > MAX_STRATEGIES {
        return Err(Error::config(format!(
            "support enumeration handles 1..={MAX_STRATEGIES} strategies, got {n}"
        )));
    }
    let mut points: Vec<PopulationState> = Vec::new();
    let mut faces = Vec::new();
    for mask in 1u32..(1u32 << n) {
        let support: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
        let m = support.len();
        // Unknowns (x_S, v): equal payoff v on S, unit mass.
        let mut sys = DMatrix::zeros(m + 1, m + 1);
        let mut rhs = DVector::zeros(m + 1);
        for (r, &i) in support.iter().enumerate() {
            for (c, &j) in support.iter().enumerate() {
                sys[(r, c)] = a[(i, j)];
            }
            sys[(r, m)] = -1.0;
            rhs[r] = -b[i];
        }
        for c in 0..m {
            sys[(m, c)] = 1.0;
        }
        rhs[m] = 1.0;

        let svd = SVD::new(sys.clone(), true, true);
        let scale = svd.singular_values.max().max(1.0);
        let rank = svd.rank(RANK_EPS * scale);
        let sol = svd.solve(&rhs, RANK_EPS * scale).expect("svd with u and v");
        if (&sys * &sol - &rhs).amax() > 1e-9 * scale {
            continue;
        }
        if rank == m + 1 {
            let mut x = vec![0.0; n];
            for (k, &i) in support.iter().enumerate() {
                x[i] = sol[k];
            }
            if x.iter().any(|&v| v < -1e-12) {
                continue;
            }
            x.iter_mut().for_each(|v| *v = v.max(0.0));
            let v = sol[m];
            let payoff = a * DVector::from_column_slice(&x) + b;
            if (0..n).any(|j| !support.contains(&j) && payoff[j] > v + PAYOFF_SLACK) {
                continue;
            }
            if points.iter().any(|p| simplex::euclidean(p, &x) < DEDUP_RADIUS) {
                continue;
            }
            if best_response_residual(a, b, &x) > VERIFY_TOL {
                continue;
            }
            let x = PopulationState::normalize(&x)?;
            points.push(x);
        } else {
            let mut face = NashFace {
                support: support.clone(),
                representative: Vec::new(),
                a: a.clone(),
                b: b.clone(),
            };
            let mut start = vec![0.0; n];
            for &i in &support {
                start[i] = 1.0 / m as f64;
            }
            let rep = face.project(&start);
            if rep.iter().any(|&v| v < -1e-9)
                || (rep.iter().sum::<f64>() - 1.0).abs() > 1e-9
                || best_response_residual(a, b, &rep) > VERIFY_TOL
            {
                continue;
            }
            face.representative = rep;
            faces.push(face);
        }
    }
    let set = NashSet { points, faces };
    if set.is_empty() {
        return Err(Error::EmptyNashSet);
    }
    Ok(set)
}

/// Equilibria of a mechanism's stationary game.
pub fn nash_for_mechanism(mech: &PayoffMechanism) -> Result<NashSet> {
    let (a, b) = mech.stationary_affine();
    nash_affine(&a, &b)
}

/// `max_i F_i(x) - F(x)'x`, scaled relative to the payoff magnitude.
fn best_response_residual(a: &DMatrix<f64>, b: &DVector<f64>, x: &[f64]) -> f64 {
    let p = a * DVector::from_column_slice(x) + b;
    let pmax = p.max();
    (pmax - simplex::dot(p.as_slice(), x)) / pmax.abs().max(1.0)
}

/// Euclidean distance from `x` to the nearest equilibrium.
pub fn nash_distance(x: &[f64], nash: &NashSet) -> Result<f64> {
    if nash.is_empty() {
        return Err(Error::EmptyNashSet);
    }
    let points = nash.points.iter().map(|p| simplex::euclidean(x, p));
    let faces = nash.faces.iter().map(|f| f.distance(x));
    Ok(points.chain(faces).fold(f64::INFINITY, f64::min))
}
