//! Simulation and tail asymptotics for iterated random Lipschitz maps
//! `R_{n+1} = Psi_{n+1}(R_n)` with heavy-tailed (slowly varying) inputs.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotics;
pub mod distributions;
pub mod engine;
pub mod error;
pub mod estimation;
pub mod logreal;
pub mod quadrature;
pub mod rng;
pub mod systems;

pub use asymptotics::{Aux, IntegratedTail, Prediction, Regime};
pub use distributions::{
    Atom, Coupling, CustomLaw, Family, InputLaw, LawFlags, Marginal, TailDominance, TailKind,
    Triple,
};
pub use engine::{Method, StationarySample, SupWalkSample, Truncation, WalkStop};
pub use error::{EnvelopeSide, Error, Result};
pub use estimation::{Horizon, TailCurve, Trend};
pub use logreal::{LogReal, LogSum};
pub use rng::RngStream;
pub use systems::{LipschitzSystem, MapDraw, SystemKind};
