use thiserror::Error;

/// Which side of the envelope sandwich a draw broke.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum EnvelopeSide {
    /// `a*t + b - d <= psi(t)`
    Lower,
    /// `psi(t) <= a*t^+ + b^+ + d`
    Upper,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid {family} law: {reason}")]
    Config {
        family: &'static str,
        reason: String,
    },

    #[error("tail vanishes at x = {x}: not in L on this range")]
    TailVanishes { x: f64 },

    #[error("grid too coarse: bracket width {width:.3e} exceeds {allowed:.3e}; refine steps by a factor of at least {refine:.1}")]
    GridTooCoarse {
        width: f64,
        allowed: f64,
        refine: f64,
    },

    #[error("density mass {mass} differs from 1 by more than 1e-8")]
    MassNotNormalized { mass: f64 },

    #[error("degenerate: convolution equivalence needs a positive weight sum")]
    DegenerateWeights,

    #[error("tail integral does not converge numerically")]
    NonIntegrable,

    #[error("regime {regime} does not apply to this law: {reason}")]
    RegimeMismatch {
        regime: &'static str,
        reason: String,
    },

    #[error("regime {regime} needs {needed} P[R_k > 0] estimates, got {got}")]
    MissingAux {
        regime: &'static str,
        needed: usize,
        got: usize,
    },

    #[error("u = {u} is at or below the saturation point {saturation} of the integrated tail")]
    BelowSaturation { u: f64, saturation: f64 },

    #[error(
        "truncation cap hit after {terms} terms (log magnitude {log_scale:.3}, walk at {walk:.3})"
    )]
    TruncationCap {
        terms: usize,
        log_scale: f64,
        walk: f64,
    },

    #[error("supremum walk hit the step cap after {steps} steps; current maximum {current_max:.3} is possibly biased low")]
    WalkCap { steps: usize, current_max: f64 },

    #[error("value left the representable log range at depth {depth}")]
    Overflow { depth: usize },

    #[error("enumeration needs {paths} paths, above the bound {bound}")]
    EnumerationTooLarge { paths: f64, bound: u64 },

    #[error("enumeration requires a finitely supported law, got {family}")]
    NotFinite { family: &'static str },

    #[error("no samples")]
    EmptySamples,

    #[error("grid must be nonempty and strictly increasing")]
    BadGrid,

    #[error("no theory attached to the tail curve")]
    NoTheory,

    #[error("theory value at u = {u} is zero; ratio undefined")]
    ZeroTheory { u: f64 },

    #[error("envelope violated at draw {draw}, t = {t}: {side:?} inequality (relative excess {excess:.3e})")]
    EnvelopeViolation {
        draw: usize,
        t: f64,
        side: EnvelopeSide,
        excess: f64,
    },

    #[error("could not start worker pool: {0}")]
    ThreadPool(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
