//! Geometry of the population simplex.
//!
//! States live on `{x in [0,1]^n : sum x = 1}`. The best-response set of a
//! payoff vector is the face spanned by its maximizing strategies; this module
//! computes that face (with a relative tie tolerance), picks a deterministic
//! element of it, and measures Euclidean distances to it.

use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance used to decide payoff ties.
pub const DEFAULT_TIE_TOL: f64 = 1e-9;

/// Absolute tolerance on the unit-mass constraint of a validated state.
pub const MASS_TOL: f64 = 1e-12;

/// A point on the probability simplex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PopulationState(Vec<f64>);

impl PopulationState {
    /// Accepts `shares` only if it already lies on the simplex.
    pub fn new(shares: Vec<f64>) -> Result<Self> {
        if shares.is_empty() {
            return Err(Error::Degenerate("empty state".into()));
        }
        if let Some(v) = shares.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("state entry {v}")));
        }
        if shares.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
            return Err(Error::Degenerate(format!(
                "state entries must lie in [0,1]: {shares:?}"
            )));
        }
        let mass: f64 = shares.iter().sum();
        if (mass - 1.0).abs() > MASS_TOL {
            return Err(Error::Degenerate(format!(
                "state must sum to 1 (got {mass})"
            )));
        }
        Ok(Self(shares))
    }

    /// Clamps negative entries to zero and rescales to unit mass.
    pub fn normalize(v: &[f64]) -> Result<Self> {
        if let Some(bad) = v.iter().find(|e| !e.is_finite()) {
            return Err(Error::NonFinite(format!("entry {bad}")));
        }
        let mut shares = v.to_vec();
        renormalize(&mut shares)?;
        Ok(Self(shares))
    }

    pub fn vertex(n: usize, i: usize) -> Self {
        let mut v = vec![0.0; n];
        v[i] = 1.0;
        Self(v)
    }

    pub fn barycenter(n: usize) -> Self {
        Self(vec![1.0 / n as f64; n])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for PopulationState {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Payoff (or payoff input) vector. Entries are finite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PayoffVector(Vec<f64>);

impl PayoffVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("payoff entry {v}")));
        }
        Ok(Self(values))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

impl Deref for PayoffVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// In-place clamp-and-rescale. Returns the mass defect `|sum - 1|` measured
/// before the rescale.
pub fn renormalize(v: &mut [f64]) -> Result<f64> {
    let raw: f64 = v.iter().sum();
    let mut mass = 0.0;
    for e in v.iter_mut() {
        if *e < 0.0 {
            *e = 0.0;
        }
        mass += *e;
    }
    if mass <= 0.0 || !mass.is_finite() {
        return Err(Error::Degenerate(
            "vector has no positive mass to normalize".into(),
        ));
    }
    for e in v.iter_mut() {
        *e /= mass;
    }
    Ok((raw - 1.0).abs())
}

/// The face of the simplex spanned by (near-)maximizing strategies.
#[derive(Debug, Clone, PartialEq)]
pub struct ArgmaxFace {
    /// Strategy indices (0-based, ascending).
    pub indices: Vec<usize>,
    pub max_value: f64,
}

impl ArgmaxFace {
    pub fn contains(&self, i: usize) -> bool {
        self.indices.binary_search(&i).is_ok()
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Indices `i` with `p[i] >= max - tie_tol * max(1, |max|)`.
pub fn argmax_face(p: &[f64], tie_tol: f64) -> ArgmaxFace {
    let max_value = p.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let cut = max_value - tie_tol * max_value.abs().max(1.0);
    let indices = p
        .iter()
        .enumerate()
        .filter(|(_, &v)| v >= cut)
        .map(|(i, _)| i)
        .collect();
    ArgmaxFace { indices, max_value }
}

/// `x_hat - x` with `x_hat` the barycenter of the tie face.
pub fn best_response_selection(x: &[f64], p: &[f64], tie_tol: f64) -> Vec<f64> {
    let face = argmax_face(p, tie_tol);
    let mut out = vec![0.0; x.len()];
    barycenter_of(&face, &mut out);
    for (o, xi) in out.iter_mut().zip(x) {
        *o -= xi;
    }
    out
}

/// Writes the uniform point on `face` into `out`.
pub fn barycenter_of(face: &ArgmaxFace, out: &mut [f64]) {
    out.iter_mut().for_each(|o| *o = 0.0);
    let w = 1.0 / face.len() as f64;
    for &i in &face.indices {
        out[i] = w;
    }
}

/// Writes the point of `face` closest to `x` into `out`.
pub fn nearest_on_face(x: &[f64], face: &ArgmaxFace, out: &mut [f64]) {
    out.iter_mut().for_each(|o| *o = 0.0);
    let restricted: Vec<f64> = face.indices.iter().map(|&i| x[i]).collect();
    let proj = project_onto_simplex(&restricted);
    for (&i, v) in face.indices.iter().zip(proj) {
        out[i] = v;
    }
}

/// Euclidean projection onto the probability simplex (sort-and-threshold).
pub fn project_onto_simplex(v: &[f64]) -> Vec<f64> {
    if v.is_empty() {
        return Vec::new();
    }
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (k, &u) in sorted.iter().enumerate() {
        cumsum += u;
        let t = (cumsum - 1.0) / (k + 1) as f64;
        if u - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|&e| (e - theta).max(0.0)).collect()
}

/// Euclidean distance from `x` to the convex hull of the face vertices.
pub fn distance_to_face(x: &[f64], face: &ArgmaxFace) -> f64 {
    let restricted: Vec<f64> = face.indices.iter().map(|&i| x[i]).collect();
    let proj = project_onto_simplex(&restricted);
    let on_face: f64 = restricted
        .iter()
        .zip(&proj)
        .map(|(a, b)| (a - b).powi(2))
        .sum();
    let off_face: f64 = x
        .iter()
        .enumerate()
        .filter(|(i, _)| !face.contains(*i))
        .map(|(_, v)| v * v)
        .sum();
    (on_face + off_face).sqrt()
}

/// Distance from `x` to the best-response set of `p`.
pub fn distance_to_best_response(x: &[f64], p: &[f64], tie_tol: f64) -> f64 {
    distance_to_face(x, &argmax_face(p, tie_tol))
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt()
}

pub fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, e| m.max(e.abs()))
}
