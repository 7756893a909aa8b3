//! Trajectories, stationary samples, the supremum walk and an exact
//! enumeration oracle. All arithmetic on trajectory values is in [`LogReal`].

mod batch;
mod enumerate;
mod forward;
mod perpetuity;
mod supwalk;

pub use batch::{count_exceedances, par_fold, ExceedanceCounts, SHARD};
pub use enumerate::{enumerate_finite, ENUMERATION_BOUND};
pub use forward::{
    iterate_forward, sample_stationary_forward, write_trajectory_csv, CouplingOptions,
};
pub use perpetuity::{sample_lower_perpetuity, sample_perpetuity, sample_upper_perpetuity};
pub use supwalk::{late_record_bias, sample_sup_walk, SupWalkSample};

use serde::Serialize;

use crate::asymptotics::probe_depth;
use crate::distributions::InputLaw;
use crate::error::Result;
use crate::logreal::LogReal;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    BackwardSeries,
    ForwardCoupling,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StationarySample {
    pub value: LogReal,
    pub terms_used: usize,
    /// `ln` of the pathwise envelope of the first omitted term.
    pub residual_log_bound: f64,
    pub method: Method,
}

impl StationarySample {
    /// Residual at least `rel_tol_log` below the value.
    pub fn converged(&self, rel_tol_log: f64) -> bool {
        self.value.is_zero() && self.residual_log_bound <= -rel_tol_log
            || self.residual_log_bound <= self.value.log_mag() - rel_tol_log
    }
}

/// Stopping rule for perpetuity series.
///
/// The series stops at the first `n` where the envelope of the next term,
/// `(running max of ln(Bbar v |B - D|)) + S_n`, is `rel_tol_log` below the
/// running magnitude, the walk `S_n = sum ln A_j` is at or below
/// `-min_depth`, and at least `min_terms` terms were summed. With
/// `min_terms == max_terms` the result is the partial sum of that many terms.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Truncation {
    pub rel_tol_log: f64,
    pub min_depth: f64,
    pub min_terms: usize,
    pub max_terms: usize,
}

impl Default for Truncation {
    fn default() -> Self {
        Truncation {
            rel_tol_log: 50.0,
            min_depth: 0.0,
            min_terms: 0,
            max_terms: 1_000_000,
        }
    }
}

impl Truncation {
    /// Exactly `n` terms, whatever the residual.
    pub fn fixed(n: usize) -> Self {
        Truncation {
            rel_tol_log: f64::INFINITY,
            min_depth: f64::NEG_INFINITY,
            min_terms: n,
            max_terms: n,
        }
    }

    /// Default rule plus the walk depth past which a late big term can move
    /// `P[R > e^u]` by at most a fraction `bias_tol`.
    pub fn for_probe(law: &InputLaw, u: f64, bias_tol: f64) -> Result<Self> {
        Ok(Truncation {
            min_depth: probe_depth(law, u, bias_tol)?,
            ..Self::default()
        })
    }
}

/// Stopping rule for the supremum walk: stop once `S_n <= max - guard_log`
/// and `S_n <= -min_depth`, or at `max_steps`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct WalkStop {
    pub guard_log: f64,
    pub min_depth: f64,
    pub max_steps: usize,
}

impl Default for WalkStop {
    fn default() -> Self {
        WalkStop {
            guard_log: 60.0,
            min_depth: 0.0,
            max_steps: 10_000_000,
        }
    }
}

impl WalkStop {
    pub fn for_probe(law: &InputLaw, u: f64, bias_tol: f64) -> Result<Self> {
        Ok(WalkStop {
            min_depth: probe_depth(law, u, bias_tol)?,
            ..Self::default()
        })
    }
}
