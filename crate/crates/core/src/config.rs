//! Declarative scenario files (TOML) and the built-in scenarios.
//!
//! ```toml
//! name = "example"
//! x0 = [0.0, 0.9, 0.1]
//! horizon = 200.0
//! step = 1e-3
//!
//! [dynamics]
//! alpha = 0.0
//! beta = 1.0
//! rule = "smith"
//!
//! [[mechanism]]
//! pdm = { kind = "braess" }
//!
//! [[mechanism]]
//! pdm = { kind = "toll_sensor", strategy = 2, sign = -1.0 }
//! fopm = { mu = 0.01, gamma = 1.0, nu = 0.0 }
//! ```
//!
//! Strategy indices in files are 1-based.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::edim::{EdimSpec, TieSelection};
use crate::error::{Error, Result};
use crate::mechanism::{
    AnticipatoryPdm, CongestionNetwork, Edge, Fopm, GameClaims, LtiPdm, MechanismPart, MemorylessGame,
    PayoffMechanism, Pdm,
};
use crate::rules::{RevisionProtocol, RuleClass, RuleTerm, ShapeFunction, ShapeTable, Shapes};
use crate::sim::Scenario;
use crate::simplex::{PopulationState, DEFAULT_TIE_TOL};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub x0: Vec<f64>,
    pub horizon: f64,
    pub step: f64,
    #[serde(default = "one")]
    pub record_stride: usize,
    #[serde(default)]
    pub seed: u64,
    pub dynamics: DynamicsConfig,
    pub mechanism: Vec<PartConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub acceptance: Option<AcceptanceConfig>,
}

fn one() -> usize {
    1
}

fn default_tie_tol() -> f64 {
    DEFAULT_TIE_TOL
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct DynamicsConfig {
    #[serde(default)]
    pub alpha: f64,
    #[serde(default)]
    pub beta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rule: Option<RuleConfig>,
    #[serde(default = "default_tie_tol")]
    pub tie_tol: f64,
    #[serde(default)]
    pub selection: TieSelection,
    /// Tie tolerance for the best-response distance diagnostic; defaults to
    /// `tie_tol`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostic_tie_tol: Option<f64>,
    /// Skip the sampled well-behavedness check on construction.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub skip_rule_check: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum RuleConfig {
    Named(String),
    Custom {
        name: String,
        terms: Vec<TermConfig>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct TermConfig {
    pub weight: f64,
    pub class: ClassConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shape: Option<ShapeConfig>,
    /// One shape per strategy, overriding `shape`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shapes: Option<Vec<ShapeConfig>>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum ClassConfig {
    Ipc,
    Sept,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ShapeConfig {
    Relu,
    ReluPower { power: f64 },
    Table { knots: Vec<[f64; 2]> },
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PartConfig {
    pub pdm: PdmConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fopm: Option<FopmConfig>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct FopmConfig {
    pub mu: f64,
    pub gamma: f64,
    #[serde(default)]
    pub nu: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct EdgeConfig {
    pub name: String,
    pub constant: f64,
    pub slope: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PdmConfig {
    Affine {
        a: Vec<Vec<f64>>,
        b: Vec<f64>,
        #[serde(default)]
        potential: bool,
        #[serde(default)]
        contractive: bool,
    },
    /// Routes list edge names.
    Congestion {
        edges: Vec<EdgeConfig>,
        routes: Vec<Vec<String>>,
    },
    Braess,
    TollSensor {
        strategy: usize,
        #[serde(default = "minus_one")]
        sign: f64,
    },
    Lti {
        a: Vec<Vec<f64>>,
        b: Vec<Vec<f64>>,
        c: Vec<Vec<f64>>,
        d: Vec<Vec<f64>>,
    },
    Anticipatory {
        base: Box<PdmConfig>,
        lambda: f64,
        a: Vec<Vec<f64>>,
        b: Vec<f64>,
        k: f64,
    },
}

fn minus_one() -> f64 {
    -1.0
}

/// Thresholds checked by `--assert`; each is optional.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct AcceptanceConfig {
    pub max_final_nash_distance: Option<f64>,
    pub max_final_br_distance: Option<f64>,
    pub max_final_rho: Option<f64>,
    pub max_late_rho_integral_growth: Option<f64>,
}

fn at(path: &str, e: Error) -> Error {
    match e {
        Error::Config(m) => Error::Config(format!("{path}: {m}")),
        Error::Dimension { expected, got, context } => {
            Error::Config(format!("{path}: {context} expects {expected} entries, got {got}"))
        }
        other => Error::Config(format!("{path}: {other}")),
    }
}

fn matrix(path: &str, rows: &[Vec<f64>], nrows: usize, ncols: usize) -> Result<DMatrix<f64>> {
    if rows.len() != nrows || rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Config(format!("{path}: expected a {nrows}x{ncols} matrix")));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

fn square(path: &str, rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    matrix(path, rows, rows.len(), rows.len())
}

fn shape(path: &str, s: &ShapeConfig) -> Result<ShapeFunction> {
    match s {
        ShapeConfig::Relu => Ok(ShapeFunction::Relu),
        ShapeConfig::ReluPower { power } => ShapeFunction::relu_power(*power).map_err(|e| at(path, e)),
        ShapeConfig::Table { knots } => ShapeTable::new(knots.iter().map(|k| (k[0], k[1])).collect())
            .map(ShapeFunction::Table)
            .map_err(|e| at(path, e)),
    }
}

impl RuleConfig {
    pub fn build(&self) -> Result<RevisionProtocol> {
        match self {
            RuleConfig::Named(name) => RevisionProtocol::by_name(name).ok_or_else(|| {
                Error::Config(format!(
                    "dynamics.rule: unknown rule '{name}' (expected smith, bnn or hybrid1)"
                ))
            }),
            RuleConfig::Custom { name, terms } => {
                let mut built = Vec::with_capacity(terms.len());
                for (k, t) in terms.iter().enumerate() {
                    let path = format!("dynamics.rule.terms[{k}]");
                    let class = match t.class {
                        ClassConfig::Ipc => RuleClass::Ipc,
                        ClassConfig::Sept => RuleClass::Sept,
                    };
                    let shapes = match (&t.shapes, &t.shape) {
                        (Some(list), _) => Shapes::PerStrategy(
                            list.iter()
                                .enumerate()
                                .map(|(i, s)| shape(&format!("{path}.shapes[{i}]"), s))
                                .collect::<Result<_>>()?,
                        ),
                        (None, Some(s)) => Shapes::Uniform(shape(&format!("{path}.shape"), s)?),
                        (None, None) => return Err(Error::Config(format!("{path}: needs shape or shapes"))),
                    };
                    built.push(RuleTerm {
                        weight: t.weight,
                        class,
                        shapes,
                    });
                }
                RevisionProtocol::new(name.clone(), built).map_err(|e| at("dynamics.rule", e))
            }
        }
    }
}

impl PdmConfig {
    fn game(&self, path: &str, n: usize) -> Result<MemorylessGame> {
        match self {
            PdmConfig::Affine {
                a,
                b,
                potential,
                contractive,
            } => {
                let am = matrix(&format!("{path}.a"), a, n, n)?;
                if b.len() != n {
                    return Err(Error::Config(format!("{path}.b: expected {n} entries, got {}", b.len())));
                }
                Ok(MemorylessGame::affine(am, DVector::from_column_slice(b))
                    .map_err(|e| at(path, e))?
                    .with_claims(GameClaims {
                        potential: *potential,
                        contractive: *contractive,
                    }))
            }
            PdmConfig::Congestion { edges, routes } => {
                let mut route_idx = Vec::with_capacity(routes.len());
                for (r, route) in routes.iter().enumerate() {
                    let mut idx = Vec::with_capacity(route.len());
                    for name in route {
                        let e = edges.iter().position(|e| &e.name == name).ok_or_else(|| {
                            Error::Config(format!("{path}.routes[{r}]: unknown edge '{name}'"))
                        })?;
                        idx.push(e);
                    }
                    route_idx.push(idx);
                }
                let net = CongestionNetwork::new(
                    edges.iter().map(|e| Edge::new(e.name.clone(), e.constant, e.slope)).collect(),
                    route_idx,
                )
                .map_err(|e| at(path, e))?;
                Ok(MemorylessGame::congestion(net))
            }
            PdmConfig::Braess => Ok(MemorylessGame::braess()),
            PdmConfig::TollSensor { strategy, sign } => {
                if *strategy == 0 || *strategy > n {
                    return Err(Error::Config(format!(
                        "{path}.strategy: must be in 1..={n} (got {strategy})"
                    )));
                }
                MemorylessGame::toll_sensor(n, strategy - 1, *sign).map_err(|e| at(path, e))
            }
            _ => Err(Error::Config(format!("{path}: expected a memoryless game"))),
        }
    }

    pub fn build(&self, path: &str, n: usize) -> Result<Pdm> {
        let pdm = match self {
            PdmConfig::Lti { a, b, c, d } => {
                let states = a.len();
                LtiPdm::new(
                    square(&format!("{path}.a"), a)?,
                    matrix(&format!("{path}.b"), b, states, n)?,
                    matrix(&format!("{path}.c"), c, n, states)?,
                    matrix(&format!("{path}.d"), d, n, n)?,
                )
                .map(Pdm::Lti)
                .map_err(|e| at(path, e))?
            }
            PdmConfig::Anticipatory { base, lambda, a, b, k } => {
                let base = base.game(&format!("{path}.base"), n)?;
                if b.len() != n {
                    return Err(Error::Config(format!("{path}.b: expected {n} entries, got {}", b.len())));
                }
                AnticipatoryPdm::new(
                    base,
                    *lambda,
                    matrix(&format!("{path}.a"), a, n, n)?,
                    DVector::from_column_slice(b),
                    *k,
                )
                .map(Pdm::Anticipatory)
                .map_err(|e| at(path, e))?
            }
            game => Pdm::Game(game.game(path, n)?),
        };
        if pdm.n() != n {
            return Err(Error::Config(format!(
                "{path}: model has {} strategies but x0 has {n}",
                pdm.n()
            )));
        }
        Ok(pdm)
    }
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn mechanism(&self) -> Result<PayoffMechanism> {
        let n = self.x0.len();
        let mut parts = Vec::with_capacity(self.mechanism.len());
        for (k, part) in self.mechanism.iter().enumerate() {
            let path = format!("mechanism[{k}]");
            let pdm = part.pdm.build(&format!("{path}.pdm"), n)?;
            let fopm = part
                .fopm
                .map(|f| Fopm::new(f.mu, f.gamma, f.nu))
                .transpose()
                .map_err(|e| at(&format!("{path}.fopm"), e))?;
            parts.push(MechanismPart { pdm, fopm });
        }
        PayoffMechanism::new(parts).map_err(|e| at("mechanism", e))
    }

    pub fn edim(&self) -> Result<EdimSpec> {
        let d = &self.dynamics;
        let rule = d.rule.as_ref().map(RuleConfig::build).transpose()?;
        let spec = if d.skip_rule_check {
            EdimSpec::new_unchecked(d.alpha, d.beta, rule)
        } else {
            EdimSpec::new(d.alpha, d.beta, rule)
        }
        .map_err(|e| at("dynamics", e))?;
        Ok(spec
            .with_tie_tol(d.tie_tol)
            .map_err(|e| at("dynamics.tie_tol", e))?
            .with_selection(d.selection))
    }

    pub fn build(&self) -> Result<Scenario> {
        let x0 = PopulationState::new(self.x0.clone()).map_err(|e| at("x0", e))?;
        let diag = self.dynamics.diagnostic_tie_tol.unwrap_or(self.dynamics.tie_tol);
        Ok(Scenario::new(&self.name, self.mechanism()?, self.edim()?, x0, self.horizon, self.step)
            .map_err(|e| at("scenario", e))?
            .with_stride(self.record_stride)
            .with_seed(self.seed)
            .with_diagnostic_tie_tol(diag))
    }
}

const BRAESS_NOTOLL_SMITH: &str = r#"name = "braess-notoll-smith"
x0 = [0.0, 0.9, 0.1]
horizon = 200.0
step = 1e-3
record_stride = 100

[dynamics]
alpha = 0.0
beta = 1.0
rule = "smith"

[[mechanism]]
pdm = { kind = "braess" }
"#;

fn toll_builtin(name: &str, rule: &str, x0: &str) -> String {
    format!(
        r#"name = "{name}"
x0 = {x0}
horizon = 1500.0
step = 1e-3
record_stride = 1000

[dynamics]
alpha = 0.0
beta = 1.0
rule = "{rule}"
tie_tol = 1e-3
selection = "nearest"

[[mechanism]]
pdm = {{ kind = "braess" }}

[[mechanism]]
pdm = {{ kind = "toll_sensor", strategy = 2, sign = -1.0 }}
fopm = {{ mu = 0.01, gamma = 1.0, nu = 0.0 }}

[acceptance]
max_final_nash_distance = 0.02
max_final_br_distance = 0.02
max_final_rho = 1e-4
"#
    )
}

pub const BUILTIN_NAMES: [&str; 4] = [
    "braess-notoll-smith",
    "braess-toll-smith",
    "braess-toll-bnn",
    "braess-toll-hybrid1",
];

/// TOML text of a built-in scenario.
pub fn builtin_text(name: &str) -> Option<String> {
    match name {
        "braess-notoll-smith" => Some(BRAESS_NOTOLL_SMITH.to_string()),
        "braess-toll-smith" => Some(toll_builtin(name, "smith", "[0.0, 0.9, 0.1]")),
        "braess-toll-bnn" => Some(toll_builtin(name, "bnn", "[0.0, 0.0, 1.0]")),
        "braess-toll-hybrid1" => Some(toll_builtin(name, "hybrid1", "[0.6, 0.3, 0.1]")),
        _ => None,
    }
}

pub fn builtin(name: &str) -> Option<ScenarioConfig> {
    builtin_text(name).map(|t| ScenarioConfig::from_toml(&t).expect("built-in configs parse"))
}
