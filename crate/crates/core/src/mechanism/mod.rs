//! Payoff mechanisms: a payoff dynamics model (PDM) `x -> u` optionally
//! followed by a first-order payoff modification (FOPM) `u -> p`, and sums of
//! such parts.

mod anticipatory;
mod fopm;
mod game;
mod lti;

pub use anticipatory::AnticipatoryPdm;
pub use fopm::Fopm;
pub use game::{CongestionNetwork, Edge, GameClaims, GameKind, MemorylessGame};
pub use lti::{LtiPdm, HURWITZ_TOL};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Payoff dynamics model.
#[derive(Debug, Clone, PartialEq)]
pub enum Pdm {
    Game(MemorylessGame),
    Lti(LtiPdm),
    Anticipatory(AnticipatoryPdm),
}

impl Pdm {
    pub fn n(&self) -> usize {
        match self {
            Pdm::Game(g) => g.n(),
            Pdm::Lti(l) => l.n(),
            Pdm::Anticipatory(a) => a.n(),
        }
    }

    pub fn state_dim(&self) -> usize {
        match self {
            Pdm::Game(_) => 0,
            Pdm::Lti(l) => l.state_dim(),
            Pdm::Anticipatory(a) => a.n(),
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Pdm::Game(_) => "game",
            Pdm::Lti(_) => "lti",
            Pdm::Anticipatory(_) => "anticipatory",
        }
    }

    fn check_dims(&self, q: &[f64], x: &[f64]) -> Result<()> {
        if q.len() != self.state_dim() {
            return Err(Error::Dimension {
                expected: self.state_dim(),
                got: q.len(),
                context: "PDM state",
            });
        }
        if x.len() != self.n() {
            return Err(Error::Dimension {
                expected: self.n(),
                got: x.len(),
                context: "population state",
            });
        }
        Ok(())
    }

    /// `qdot = G(q, x)`; empty for memoryless games.
    pub fn derivative(&self, q: &[f64], x: &[f64]) -> Result<Vec<f64>> {
        self.check_dims(q, x)?;
        let mut out = vec![0.0; self.state_dim()];
        self.derivative_into(q, x, &mut out);
        Ok(out)
    }

    /// `u = H(q, x)`.
    pub fn output(&self, q: &[f64], x: &[f64]) -> Result<Vec<f64>> {
        self.check_dims(q, x)?;
        let mut out = vec![0.0; self.n()];
        self.output_into(q, x, &mut out);
        Ok(out)
    }

    pub(crate) fn derivative_into(&self, q: &[f64], x: &[f64], out: &mut [f64]) {
        match self {
            Pdm::Game(_) => {}
            Pdm::Lti(l) => l.derivative_into(q, x, out),
            Pdm::Anticipatory(a) => a.derivative_into(q, x, out),
        }
    }

    pub(crate) fn output_into(&self, q: &[f64], x: &[f64], out: &mut [f64]) {
        match self {
            Pdm::Game(g) => g.evaluate_into(x, out),
            Pdm::Lti(l) => l.output_into(q, x, out),
            Pdm::Anticipatory(a) => a.output_into(q, x, out),
        }
    }

    /// The map `x -> u` reached once the PDM state settles for frozen `x`.
    pub fn stationary_affine(&self) -> (DMatrix<f64>, DVector<f64>) {
        match self {
            Pdm::Game(g) => g.affine_form(),
            Pdm::Lti(l) => (l.dc_gain(), DVector::zeros(l.n())),
            Pdm::Anticipatory(a) => a.base().affine_form(),
        }
    }

    pub fn bibo_bound(&self) -> f64 {
        match self {
            Pdm::Game(g) => g.bibo_bound(),
            Pdm::Lti(l) => l.bibo_bound(),
            Pdm::Anticipatory(a) => a.bibo_bound(),
        }
    }
}

/// One summand of a mechanism. Without a payoff filter the PDM output is
/// passed straight through as payoff.
#[derive(Debug, Clone, PartialEq)]
pub struct MechanismPart {
    pub pdm: Pdm,
    pub fopm: Option<Fopm>,
}

impl MechanismPart {
    pub fn direct(pdm: Pdm) -> Self {
        Self { pdm, fopm: None }
    }

    pub fn filtered(pdm: Pdm, fopm: Fopm) -> Self {
        Self {
            pdm,
            fopm: Some(fopm),
        }
    }

    /// Gain from the PDM's stationary output to the part's stationary payoff.
    pub fn static_gain(&self) -> f64 {
        self.fopm.map_or(1.0, |f| f.static_gain())
    }
}

/// Scratch outputs of one mechanism evaluation.
#[derive(Debug, Clone)]
pub struct MechanismEval {
    pub u: Vec<f64>,
    pub p: Vec<f64>,
    pub dq: Vec<f64>,
    pub ds: Vec<f64>,
    part_u: Vec<f64>,
    part_p: Vec<f64>,
}

/// Sum of parts; all outputs add.
#[derive(Debug, Clone, PartialEq)]
pub struct PayoffMechanism {
    n: usize,
    parts: Vec<MechanismPart>,
}

impl PayoffMechanism {
    pub fn new(parts: Vec<MechanismPart>) -> Result<Self> {
        let n = parts
            .first()
            .map(|p| p.pdm.n())
            .ok_or_else(|| Error::config("mechanism needs at least one part"))?;
        for (k, part) in parts.iter().enumerate() {
            if part.pdm.n() != n {
                return Err(Error::config(format!(
                    "part {k} has {} strategies, expected {n}",
                    part.pdm.n()
                )));
            }
        }
        Ok(Self { n, parts })
    }

    pub fn single(part: MechanismPart) -> Self {
        Self::new(vec![part]).expect("one part")
    }

    /// The untolled three-route congestion game, payoffs passed through.
    pub fn braess_no_toll() -> Self {
        Self::single(MechanismPart::direct(Pdm::Game(MemorylessGame::braess())))
    }

    /// Congestion game plus a dynamic toll on the middle route: the toll
    /// channel reads `u = -(0, x_2, 0)` and filters it with `gamma = b`,
    /// `nu = 0`, so `p = F(x) + s` with `sdot_2 = -x_2 - mu s_2`.
    pub fn braess_toll(b: f64, mu: f64) -> Result<Self> {
        let sensor = MemorylessGame::toll_sensor(3, 1, -1.0)?;
        Self::new(vec![
            MechanismPart::direct(Pdm::Game(MemorylessGame::braess())),
            MechanismPart::filtered(Pdm::Game(sensor), Fopm::new(mu, b, 0.0)?),
        ])
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn parts(&self) -> &[MechanismPart] {
        &self.parts
    }

    pub fn pdm_state_dim(&self) -> usize {
        self.parts.iter().map(|p| p.pdm.state_dim()).sum()
    }

    pub fn fopm_state_dim(&self) -> usize {
        self.parts.iter().filter(|p| p.fopm.is_some()).count() * self.n
    }

    pub fn scratch(&self) -> MechanismEval {
        MechanismEval {
            u: vec![0.0; self.n],
            p: vec![0.0; self.n],
            dq: vec![0.0; self.pdm_state_dim()],
            ds: vec![0.0; self.fopm_state_dim()],
            part_u: vec![0.0; self.n],
            part_p: vec![0.0; self.n],
        }
    }

    /// Evaluates the aggregate PDM output `u`, payoff `p`, and the state
    /// derivatives at `(q, s, x)`.
    pub fn evaluate(&self, q: &[f64], s: &[f64], x: &[f64], out: &mut MechanismEval) {
        out.u.iter_mut().for_each(|v| *v = 0.0);
        out.p.iter_mut().for_each(|v| *v = 0.0);
        let n = self.n;
        let mut q_off = 0;
        let mut s_off = 0;
        for part in &self.parts {
            let chi = part.pdm.state_dim();
            let qp = &q[q_off..q_off + chi];
            part.pdm.output_into(qp, x, &mut out.part_u);
            part.pdm.derivative_into(qp, x, &mut out.dq[q_off..q_off + chi]);
            q_off += chi;
            match &part.fopm {
                Some(f) => {
                    let sp = &s[s_off..s_off + n];
                    f.derivative_into(sp, &out.part_u, &mut out.ds[s_off..s_off + n]);
                    f.output_into(sp, &out.part_u, &mut out.part_p);
                    s_off += n;
                }
                None => out.part_p.copy_from_slice(&out.part_u),
            }
            for i in 0..n {
                out.u[i] += out.part_u[i];
                out.p[i] += out.part_p[i];
            }
        }
    }

    /// Payoff output `p` at `(q, s, x)`.
    pub fn payoff(&self, q: &[f64], s: &[f64], x: &[f64]) -> Vec<f64> {
        let mut eval = self.scratch();
        self.evaluate(q, s, x, &mut eval);
        eval.p
    }

    /// `F_P(x) = sum_k gain_k * (stationary map of PDM k)(x)`.
    pub fn stationary_game(&self, x: &[f64]) -> Vec<f64> {
        let (a, b) = self.stationary_affine();
        let xv = DVector::from_column_slice(x);
        (a * xv + b).as_slice().to_vec()
    }

    /// The stationary game as `A x + b`. All supported PDM kinds have an
    /// affine stationary map, so this always succeeds for them.
    pub fn stationary_affine(&self) -> (DMatrix<f64>, DVector<f64>) {
        let mut a = DMatrix::zeros(self.n, self.n);
        let mut b = DVector::zeros(self.n);
        for part in &self.parts {
            let g = part.static_gain();
            let (pa, pb) = part.pdm.stationary_affine();
            a += pa * g;
            b += pb * g;
        }
        (a, b)
    }

    /// Sum of the PDM output bounds.
    pub fn bibo_bound(&self) -> f64 {
        self.parts.iter().map(|p| p.pdm.bibo_bound()).sum()
    }

    /// Bound on `||p(t)||_inf` for every trajectory from zero initial state.
    pub fn payoff_bound(&self) -> f64 {
        self.parts
            .iter()
            .map(|part| {
                let beta = part.pdm.bibo_bound();
                part.fopm.map_or(beta, |f| f.output_bound(beta))
            })
            .sum()
    }

    /// Common `mu` of all filtered parts, if they agree.
    pub fn shared_mu(&self) -> Option<f64> {
        let mut mus = self.parts.iter().filter_map(|p| p.fopm.map(|f| f.mu()));
        let first = mus.next()?;
        mus.all(|m| m == first).then_some(first)
    }
}
