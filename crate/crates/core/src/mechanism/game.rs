//! Memoryless games `x -> F(x)`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// A link with affine latency `constant + slope * flow`.
#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub name: String,
    pub constant: f64,
    pub slope: f64,
}

impl Edge {
    pub fn new(name: impl Into<String>, constant: f64, slope: f64) -> Self {
        Self {
            name: name.into(),
            constant,
            slope,
        }
    }
}

/// Routes over a set of affine-latency links. Strategy `r` is route `r`; its
/// payoff is minus the route latency.
#[derive(Debug, Clone, PartialEq)]
pub struct CongestionNetwork {
    edges: Vec<Edge>,
    routes: Vec<Vec<usize>>,
}

impl CongestionNetwork {
    pub fn new(edges: Vec<Edge>, routes: Vec<Vec<usize>>) -> Result<Self> {
        if routes.is_empty() {
            return Err(Error::config("congestion network needs at least one route"));
        }
        for e in &edges {
            if !(e.constant.is_finite() && e.slope.is_finite()) {
                return Err(Error::config(format!("edge '{}' has non-finite cost", e.name)));
            }
        }
        for (r, route) in routes.iter().enumerate() {
            if route.is_empty() {
                return Err(Error::config(format!("route {r} uses no edges")));
            }
            if let Some(&bad) = route.iter().find(|&&e| e >= edges.len()) {
                return Err(Error::config(format!("route {r} references unknown edge {bad}")));
            }
        }
        Ok(Self { edges, routes })
    }

    /// Four-node network A, B, C, D with links AB: 5, BD: 2+2f, AC: 2+2f,
    /// CB: 1+f, CD: 5 and routes ABD, ACBD, ACD.
    pub fn braess() -> Self {
        let edges = vec![
            Edge::new("AB", 5.0, 0.0),
            Edge::new("BD", 2.0, 2.0),
            Edge::new("AC", 2.0, 2.0),
            Edge::new("CB", 1.0, 1.0),
            Edge::new("CD", 5.0, 0.0),
        ];
        let routes = vec![vec![0, 1], vec![2, 3, 1], vec![2, 4]];
        Self::new(edges, routes).expect("valid network")
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn routes(&self) -> &[Vec<usize>] {
        &self.routes
    }

    pub fn has_nondecreasing_costs(&self) -> bool {
        self.edges.iter().all(|e| e.slope >= 0.0)
    }

    pub fn edge_flows(&self, x: &[f64]) -> Vec<f64> {
        let mut flows = vec![0.0; self.edges.len()];
        for (route, share) in self.routes.iter().zip(x) {
            for &e in route {
                flows[e] += share;
            }
        }
        flows
    }

    pub fn route_latencies(&self, x: &[f64]) -> Vec<f64> {
        let flows = self.edge_flows(x);
        self.routes
            .iter()
            .map(|route| {
                route
                    .iter()
                    .map(|&e| self.edges[e].constant + self.edges[e].slope * flows[e])
                    .sum()
            })
            .collect()
    }

    /// Payoff map as `A x + b` (route-edge incidence weighted by slopes).
    fn affine_form(&self) -> (DMatrix<f64>, DVector<f64>) {
        let n = self.routes.len();
        let mut a = DMatrix::zeros(n, n);
        let mut b = DVector::zeros(n);
        for (r, route) in self.routes.iter().enumerate() {
            for &e in route {
                b[r] -= self.edges[e].constant;
                for (s, other) in self.routes.iter().enumerate() {
                    if other.contains(&e) {
                        a[(r, s)] -= self.edges[e].slope;
                    }
                }
            }
        }
        (a, b)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum GameKind {
    Affine { a: DMatrix<f64>, b: DVector<f64> },
    Congestion(CongestionNetwork),
    /// `u = sign * x_k * e_k`.
    TollSensor { strategy: usize, sign: f64 },
}

/// Properties a game declares about itself; checked by the passivity gates.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct GameClaims {
    pub potential: bool,
    pub contractive: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MemorylessGame {
    n: usize,
    kind: GameKind,
    claims: GameClaims,
}

impl MemorylessGame {
    pub fn affine(a: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        let n = b.len();
        if n == 0 {
            return Err(Error::config("affine game needs at least one strategy"));
        }
        if a.shape() != (n, n) {
            return Err(Error::Dimension {
                expected: n,
                got: a.nrows(),
                context: "affine game matrix",
            });
        }
        if a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
            return Err(Error::config("affine game entries must be finite"));
        }
        Ok(Self {
            n,
            kind: GameKind::Affine { a, b },
            claims: GameClaims::default(),
        })
    }

    pub fn zero(n: usize) -> Self {
        Self::affine(DMatrix::zeros(n, n), DVector::zeros(n)).expect("valid")
    }

    pub fn congestion(network: CongestionNetwork) -> Self {
        let claims = GameClaims {
            potential: true,
            contractive: network.has_nondecreasing_costs(),
        };
        Self {
            n: network.routes.len(),
            kind: GameKind::Congestion(network),
            claims,
        }
    }

    /// The three-route congestion game on [`CongestionNetwork::braess`].
    pub fn braess() -> Self {
        Self::congestion(CongestionNetwork::braess())
    }

    pub fn toll_sensor(n: usize, strategy: usize, sign: f64) -> Result<Self> {
        if strategy >= n {
            return Err(Error::config(format!(
                "toll sensor strategy {strategy} out of range for {n} strategies"
            )));
        }
        if !sign.is_finite() {
            return Err(Error::config("toll sensor sign must be finite"));
        }
        Ok(Self {
            n,
            kind: GameKind::TollSensor { strategy, sign },
            claims: GameClaims {
                potential: true,
                contractive: sign <= 0.0,
            },
        })
    }

    pub fn with_claims(mut self, claims: GameClaims) -> Self {
        self.claims = claims;
        self
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> &GameKind {
        &self.kind
    }

    pub fn claims(&self) -> GameClaims {
        self.claims
    }

    pub fn evaluate(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        self.evaluate_into(x, &mut out);
        out
    }

    pub fn evaluate_into(&self, x: &[f64], out: &mut [f64]) {
        match &self.kind {
            GameKind::Affine { a, b } => {
                for (i, o) in out.iter_mut().enumerate() {
                    *o = b[i] + (0..self.n).map(|j| a[(i, j)] * x[j]).sum::<f64>();
                }
            }
            GameKind::Congestion(net) => {
                for (o, l) in out.iter_mut().zip(net.route_latencies(x)) {
                    *o = -l;
                }
            }
            GameKind::TollSensor { strategy, sign } => {
                out.iter_mut().for_each(|o| *o = 0.0);
                out[*strategy] = sign * x[*strategy];
            }
        }
    }

    /// Every supported kind is affine on the simplex.
    pub fn affine_form(&self) -> (DMatrix<f64>, DVector<f64>) {
        match &self.kind {
            GameKind::Affine { a, b } => (a.clone(), b.clone()),
            GameKind::Congestion(net) => net.affine_form(),
            GameKind::TollSensor { strategy, sign } => {
                let mut a = DMatrix::zeros(self.n, self.n);
                a[(*strategy, *strategy)] = *sign;
                (a, DVector::zeros(self.n))
            }
        }
    }

    /// `sup_x ||F(x)||_inf` over the simplex, exact by vertex enumeration
    /// since each component is affine.
    pub fn bibo_bound(&self) -> f64 {
        let (a, b) = self.affine_form();
        (0..self.n)
            .map(|j| {
                (0..self.n)
                    .map(|i| (a[(i, j)] + b[i]).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    }
}
