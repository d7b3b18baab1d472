//! Nash-equilibrium learning in large populations.
//!
//! The crate models a single population revising strategies under an
//! evolutionary differential inclusion (best response blended with a
//! continuous learning rule) closed in feedback with a payoff mechanism: a
//! payoff dynamics model followed by a first-order payoff modification
//! filter. Alongside the simulator it provides the numerical checks used to
//! argue convergence: counterclockwise and delta-passivity running
//! integrals, a negative-imaginary frequency sweep for LTI models, and
//! potential / contractive game tests.
//!
//! Module map:
//! - [`simplex`]: simplex geometry, best-response faces and distances
//! - [`rules`]: revision protocols and the mean dynamic
//! - [`edim`]: the combined inclusion field and the correlation function
//! - [`mechanism`]: payoff dynamics models, the payoff filter, composition
//! - [`equilibrium`]: support enumeration for affine stationary games
//! - [`passivity`]: running-integral certificates and static gates
//! - [`sim`]: fixed-step closed-loop integration and run records
//! - [`config`]: declarative scenario files and the built-in scenarios

pub mod config;
pub mod edim;
pub mod equilibrium;
mod error;
pub mod mechanism;
pub mod passivity;
pub mod rules;
pub mod sampling;
pub mod sim;
pub mod simplex;

pub use edim::{EdimSpec, TieSelection};
pub use equilibrium::{nash_affine, nash_distance, NashSet};
pub use error::{Error, Result};
pub use mechanism::{
    AnticipatoryPdm, Fopm, GameKind, LtiPdm, MechanismPart, MemorylessGame, PayoffMechanism, Pdm,
};
pub use rules::{RevisionProtocol, RuleClass, ShapeFunction};
pub use sim::{batch, simulate, RunRecord, Scenario};
pub use simplex::{ArgmaxFace, PayoffVector, PopulationState};
