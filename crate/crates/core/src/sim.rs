//! Fixed-step closed-loop integration.
//!
//! The closed loop state is `(x, q, s)`: population shares, PDM states and
//! filter states. Smooth runs (`alpha = 0`) use classical RK4; runs with a
//! best-response term use forward Euler, the standard scheme for this kind
//! of discontinuous inclusion. Shares are clipped and rescaled onto the
//! simplex after every step and the removed defect is tracked.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::edim::{EdimSpec, TieSelection};
use crate::equilibrium::{nash_distance, nash_for_mechanism, NashSet};
use crate::error::{Error, Result};
use crate::mechanism::{PayoffMechanism, Pdm};
use crate::passivity;
use crate::simplex::{self, argmax_face, distance_to_face, PopulationState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Integrator {
    Rk4,
    Euler,
}

/// One closed-loop run.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub mechanism: PayoffMechanism,
    pub spec: EdimSpec,
    pub x0: PopulationState,
    pub horizon: f64,
    pub step: f64,
    /// Record every `record_stride`-th step (the last step is always kept).
    pub record_stride: usize,
    /// Carried into the record; the integration itself is deterministic.
    pub seed: u64,
    /// Relative tie tolerance used for the best-response distance diagnostic.
    pub diagnostic_tie_tol: f64,
}

impl Scenario {
    pub fn new(
        name: impl Into<String>,
        mechanism: PayoffMechanism,
        spec: EdimSpec,
        x0: PopulationState,
        horizon: f64,
        step: f64,
    ) -> Result<Self> {
        let s = Self {
            name: name.into(),
            mechanism,
            spec,
            x0,
            horizon,
            step,
            record_stride: 1,
            seed: 0,
            diagnostic_tie_tol: simplex::DEFAULT_TIE_TOL,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.record_stride = stride.max(1);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_diagnostic_tie_tol(mut self, tol: f64) -> Self {
        self.diagnostic_tie_tol = tol;
        self
    }

    pub fn integrator(&self) -> Integrator {
        if self.spec.is_smooth() {
            Integrator::Rk4
        } else {
            Integrator::Euler
        }
    }

    pub fn steps(&self) -> usize {
        (self.horizon / self.step).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step.is_finite() && self.step > 0.0) {
            return Err(Error::config(format!("step must be positive (got {})", self.step)));
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(Error::config(format!("horizon must be positive (got {})", self.horizon)));
        }
        let n = self.steps();
        if n == 0 || (n as f64 * self.step - self.horizon).abs() > 1e-9 * self.horizon.max(1.0) {
            return Err(Error::config(format!(
                "horizon {} is not a whole number of steps of {}",
                self.horizon, self.step
            )));
        }
        if self.x0.len() != self.mechanism.n() {
            return Err(Error::Dimension {
                expected: self.mechanism.n(),
                got: self.x0.len(),
                context: "initial state",
            });
        }
        if let Some(rule) = self.spec.rule() {
            if !rule.supports(self.x0.len()) {
                return Err(Error::config(format!(
                    "rule {} does not support {} strategies",
                    rule.name(),
                    self.x0.len()
                )));
            }
        }
        if !(self.diagnostic_tie_tol.is_finite() && self.diagnostic_tie_tol >= 0.0) {
            return Err(Error::config("diagnostic tie tolerance must be nonnegative"));
        }
        Ok(())
    }
}

/// Serializable echo of the scenario inputs.
#[derive(Debug, Clone, Serialize)]
pub struct ScenarioEcho {
    pub name: String,
    pub n: usize,
    pub alpha: f64,
    pub beta: f64,
    pub rule: Option<String>,
    pub tie_tol: f64,
    pub selection: TieSelection,
    pub diagnostic_tie_tol: f64,
    pub x0: Vec<f64>,
    pub horizon: f64,
    pub step: f64,
    pub record_stride: usize,
    pub seed: u64,
    pub integrator: Integrator,
    pub mechanism: Vec<PartEcho>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PartEcho {
    pub pdm: &'static str,
    pub state_dim: usize,
    pub fopm: Option<[f64; 3]>,
}

impl ScenarioEcho {
    fn of(s: &Scenario) -> Self {
        Self {
            name: s.name.clone(),
            n: s.x0.len(),
            alpha: s.spec.alpha(),
            beta: s.spec.beta(),
            rule: s.spec.rule().map(|r| r.name().to_string()),
            tie_tol: s.spec.tie_tol(),
            selection: s.spec.selection(),
            diagnostic_tie_tol: s.diagnostic_tie_tol,
            x0: s.x0.to_vec(),
            horizon: s.horizon,
            step: s.step,
            record_stride: s.record_stride,
            seed: s.seed,
            integrator: s.integrator(),
            mechanism: s
                .mechanism
                .parts()
                .iter()
                .map(|p| PartEcho {
                    pdm: p.pdm.kind_name(),
                    state_dim: p.pdm.state_dim(),
                    fopm: p.fopm.map(|f| [f.mu(), f.gamma(), f.nu()]),
                })
                .collect(),
        }
    }
}

/// Final values and certificate minima of a run.
#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub version: &'static str,
    pub scenario: ScenarioEcho,
    pub steps: usize,
    pub final_time: f64,
    pub final_x: Vec<f64>,
    pub final_u: Vec<f64>,
    pub final_p: Vec<f64>,
    pub final_rho: f64,
    pub rho_integral: f64,
    pub final_d_br: f64,
    pub final_d_ne: Option<f64>,
    pub nash: Option<NashSet>,
    /// Running minimum of `int u_dot' x`.
    pub ccw_running_min: f64,
    /// Certified lower bound when every PDM is a potential memoryless game.
    pub ccw_lower_bound: Option<f64>,
    /// Running minimum of `int x_dot' p_dot`.
    pub edim_delta_running_min: f64,
    /// Running minimum of `int -u_dot' x_dot`.
    pub pdm_antipassive_running_min: f64,
    pub max_simplex_defect: f64,
}

/// Recorded trajectory plus summary.
#[derive(Debug, Clone, Serialize)]
pub struct RunRecord {
    pub times: Vec<f64>,
    pub x: Vec<Vec<f64>>,
    pub u: Vec<Vec<f64>>,
    pub p: Vec<Vec<f64>>,
    /// Inclusion field at the recorded state.
    pub xdot: Vec<Vec<f64>>,
    pub rho: Vec<f64>,
    pub rho_integral: Vec<f64>,
    pub d_br: Vec<f64>,
    pub d_ne: Vec<Option<f64>>,
    pub ccw_integral: Vec<f64>,
    pub edim_delta_integral: Vec<f64>,
    pub pdm_antipassive_integral: Vec<f64>,
    pub summary: RunSummary,
}

impl RunRecord {
    pub fn final_x(&self) -> &[f64] {
        &self.summary.final_x
    }

    /// Trajectory as CSV: `t, x.., u.., p.., rho, rho_integral, d_br, d_ne,
    /// ccw_integral, delta_integral`. Floats use shortest round-trip form.
    pub fn to_csv(&self) -> String {
        let n = self.summary.scenario.n;
        let mut out = String::from("t");
        for prefix in ["x", "u", "p"] {
            for i in 1..=n {
                let _ = write!(out, ",{prefix}{i}");
            }
        }
        out.push_str(",rho,rho_integral,d_br,d_ne,ccw_integral,delta_integral\n");
        for k in 0..self.times.len() {
            let _ = write!(out, "{}", self.times[k]);
            for v in self.x[k].iter().chain(&self.u[k]).chain(&self.p[k]) {
                let _ = write!(out, ",{v}");
            }
            let d_ne = self.d_ne[k].map(|d| d.to_string()).unwrap_or_default();
            let _ = writeln!(
                out,
                ",{},{},{},{},{},{}",
                self.rho[k], self.rho_integral[k], self.d_br[k], d_ne, self.ccw_integral[k], self.edim_delta_integral[k]
            );
        }
        out
    }

    pub fn summary_json(&self) -> String {
        serde_json::to_string_pretty(&self.summary).expect("summary serializes")
    }

    /// Writes `<stem>.csv` and `<stem>.json` into `dir`.
    pub fn write_to(&self, dir: &Path, stem: &str) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::File::create(dir.join(format!("{stem}.csv")))?.write_all(self.to_csv().as_bytes())?;
        let mut json = self.summary_json();
        json.push('\n');
        std::fs::File::create(dir.join(format!("{stem}.json")))?.write_all(json.as_bytes())
    }
}

/// Values observed at one state of the loop.
#[derive(Clone)]
struct Observation {
    x: Vec<f64>,
    u: Vec<f64>,
    p: Vec<f64>,
    xdot: Vec<f64>,
    rho: f64,
}

struct ClosedLoop<'a> {
    mech: &'a PayoffMechanism,
    spec: &'a EdimSpec,
    n: usize,
    chi: usize,
    eval: crate::mechanism::MechanismEval,
}

impl ClosedLoop<'_> {
    fn derivative(&mut self, z: &[f64], dz: &mut [f64]) {
        let (n, chi) = (self.n, self.chi);
        let (x, rest) = z.split_at(n);
        let (q, s) = rest.split_at(chi);
        self.mech.evaluate(q, s, x, &mut self.eval);
        self.spec.field_into(x, &self.eval.p, &mut dz[..n]);
        dz[n..n + chi].copy_from_slice(&self.eval.dq);
        dz[n + chi..].copy_from_slice(&self.eval.ds);
    }

    fn observe(&self, z: &[f64], dz: &[f64]) -> Observation {
        let x = z[..self.n].to_vec();
        let p = self.eval.p.clone();
        Observation {
            rho: self.spec.correlation(&x, &p),
            x,
            u: self.eval.u.clone(),
            p,
            xdot: dz[..self.n].to_vec(),
        }
    }
}

struct Recorder {
    record: RunRecord,
    nash: Option<NashSet>,
    diag_tol: f64,
}

impl Recorder {
    fn push(&mut self, t: f64, obs: &Observation, integrals: &Integrals) {
        let r = &mut self.record;
        r.times.push(t);
        r.x.push(obs.x.clone());
        r.u.push(obs.u.clone());
        r.p.push(obs.p.clone());
        r.xdot.push(obs.xdot.clone());
        r.rho.push(obs.rho);
        r.rho_integral.push(integrals.rho);
        r.d_br.push(distance_to_face(&obs.x, &argmax_face(&obs.p, self.diag_tol)));
        r.d_ne.push(self.nash.as_ref().and_then(|set| nash_distance(&obs.x, set).ok()));
        r.ccw_integral.push(integrals.ccw);
        r.edim_delta_integral.push(integrals.edim);
        r.pdm_antipassive_integral.push(integrals.pdm);
    }

    fn finish(mut self, t: f64, steps: usize, last: &Observation, integrals: &Integrals, defect: f64) -> RunRecord {
        let s = &mut self.record.summary;
        s.steps = steps;
        s.final_time = t;
        s.final_x = last.x.clone();
        s.final_u = last.u.clone();
        s.final_p = last.p.clone();
        s.final_rho = last.rho;
        s.rho_integral = integrals.rho;
        s.final_d_br = distance_to_face(&last.x, &argmax_face(&last.p, self.diag_tol));
        s.final_d_ne = self.nash.as_ref().and_then(|set| nash_distance(&last.x, set).ok());
        s.nash = self.nash.take();
        s.ccw_running_min = integrals.ccw_min;
        s.edim_delta_running_min = integrals.edim_min;
        s.pdm_antipassive_running_min = integrals.pdm_min;
        s.max_simplex_defect = defect;
        self.record
    }
}

#[derive(Default)]
struct Integrals {
    rho: f64,
    ccw: f64,
    edim: f64,
    pdm: f64,
    ccw_min: f64,
    edim_min: f64,
    pdm_min: f64,
}

impl Integrals {
    /// Advances over one step from `a` to `b`: trapezoid in the exact field
    /// values, differences for `u` and `p`.
    fn advance(&mut self, a: &Observation, b: &Observation, h: f64) {
        self.rho += 0.5 * h * (a.rho + b.rho);
        let mut ccw = 0.0;
        let mut edim = 0.0;
        let mut pdm = 0.0;
        for i in 0..a.x.len() {
            let du = b.u[i] - a.u[i];
            ccw += du * 0.5 * (a.x[i] + b.x[i]);
            edim += 0.5 * (a.xdot[i] + b.xdot[i]) * (b.p[i] - a.p[i]);
            pdm -= du * 0.5 * (a.xdot[i] + b.xdot[i]);
        }
        self.ccw += ccw;
        self.edim += edim;
        self.pdm += pdm;
        self.ccw_min = self.ccw_min.min(self.ccw);
        self.edim_min = self.edim_min.min(self.edim);
        self.pdm_min = self.pdm_min.min(self.pdm);
    }
}

fn ccw_bound(mech: &PayoffMechanism) -> Option<f64> {
    let all_games = mech.parts().iter().all(|p| matches!(p.pdm, Pdm::Game(_)));
    if !all_games {
        return None;
    }
    let game = passivity::aggregate_game(mech)?;
    passivity::potential_check(&game, 50, 1)
        .passed
        .then(|| passivity::potential_ccw_lower_bound(&game))
}

/// Integrates one scenario. A non-finite state aborts with
/// [`Error::Diverged`], which carries the partial record.
pub fn simulate(scenario: &Scenario) -> Result<RunRecord> {
    scenario.validate()?;
    let mech = &scenario.mechanism;
    let n = mech.n();
    let chi = mech.pdm_state_dim();
    let dim = n + chi + mech.fopm_state_dim();
    let h = scenario.step;
    let steps = scenario.steps();
    let stride = scenario.record_stride.max(1);
    let integrator = scenario.integrator();

    let nash = nash_for_mechanism(mech).ok();
    let mut summary_ccw_bound = ccw_bound(mech);
    let capacity = steps / stride + 2;
    let empty_summary = RunSummary {
        version: env!("CARGO_PKG_VERSION"),
        scenario: ScenarioEcho::of(scenario),
        steps: 0,
        final_time: 0.0,
        final_x: Vec::new(),
        final_u: Vec::new(),
        final_p: Vec::new(),
        final_rho: 0.0,
        rho_integral: 0.0,
        final_d_br: 0.0,
        final_d_ne: None,
        nash: None,
        ccw_running_min: 0.0,
        ccw_lower_bound: summary_ccw_bound.take(),
        edim_delta_running_min: 0.0,
        pdm_antipassive_running_min: 0.0,
        max_simplex_defect: 0.0,
    };
    let mut rec = Recorder {
        record: RunRecord {
            times: Vec::with_capacity(capacity),
            x: Vec::with_capacity(capacity),
            u: Vec::with_capacity(capacity),
            p: Vec::with_capacity(capacity),
            xdot: Vec::with_capacity(capacity),
            rho: Vec::with_capacity(capacity),
            rho_integral: Vec::with_capacity(capacity),
            d_br: Vec::with_capacity(capacity),
            d_ne: Vec::with_capacity(capacity),
            ccw_integral: Vec::with_capacity(capacity),
            edim_delta_integral: Vec::with_capacity(capacity),
            pdm_antipassive_integral: Vec::with_capacity(capacity),
            summary: empty_summary,
        },
        nash,
        diag_tol: scenario.diagnostic_tie_tol,
    };

    let mut lp = ClosedLoop {
        mech,
        spec: &scenario.spec,
        n,
        chi,
        eval: mech.scratch(),
    };
    let mut z = vec![0.0; dim];
    z[..n].copy_from_slice(&scenario.x0);
    let mut k1 = vec![0.0; dim];
    let (mut k2, mut k3, mut k4) = (vec![0.0; dim], vec![0.0; dim], vec![0.0; dim]);
    let mut tmp = vec![0.0; dim];

    lp.derivative(&z, &mut k1);
    let mut obs = lp.observe(&z, &k1);
    let mut integrals = Integrals::default();
    let mut defect: f64 = 0.0;
    rec.push(0.0, &obs, &integrals);

    for k in 1..=steps {
        let t = k as f64 * h;
        match integrator {
            Integrator::Euler => {
                for i in 0..dim {
                    z[i] += h * k1[i];
                }
            }
            Integrator::Rk4 => {
                for i in 0..dim {
                    tmp[i] = z[i] + 0.5 * h * k1[i];
                }
                lp.derivative(&tmp, &mut k2);
                for i in 0..dim {
                    tmp[i] = z[i] + 0.5 * h * k2[i];
                }
                lp.derivative(&tmp, &mut k3);
                for i in 0..dim {
                    tmp[i] = z[i] + h * k3[i];
                }
                lp.derivative(&tmp, &mut k4);
                for i in 0..dim {
                    z[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
                }
            }
        }
        let finite = z.iter().all(|v| v.is_finite());
        let renorm = if finite { simplex::renormalize(&mut z[..n]).ok() } else { None };
        let Some(d) = renorm else {
            let partial = rec.finish(t - h, k - 1, &obs, &integrals, defect);
            return Err(Error::Diverged {
                time: t,
                partial: Box::new(partial),
            });
        };
        defect = defect.max(d);
        lp.derivative(&z, &mut k1);
        let next = lp.observe(&z, &k1);
        integrals.advance(&obs, &next, h);
        obs = next;
        if k % stride == 0 || k == steps {
            rec.push(t, &obs, &integrals);
        }
    }
    Ok(rec.finish(steps as f64 * h, steps, &obs, &integrals, defect))
}

/// Runs scenarios in parallel; results keep the input order.
pub fn batch(scenarios: &[Scenario]) -> Vec<Result<RunRecord>> {
    scenarios.par_iter().map(simulate).collect()
}
