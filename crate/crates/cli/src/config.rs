use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use slowtail::{Atom, Coupling, InputLaw, LipschitzSystem, Marginal, Regime, SystemKind};

pub const SCHEMA_VERSION: u32 = 1;

/// One scenario file. Unknown keys are rejected so typos fail loudly.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema_version: u32,
    pub name: String,
    #[serde(default)]
    pub description: String,
    /// Result the scenario exercises.
    #[serde(default)]
    pub theorem: String,
    /// Acceptance criteria the scenario implements.
    #[serde(default)]
    pub criteria: Vec<u32>,
    pub seed: u64,
    #[serde(default = "one")]
    pub workers: usize,
    pub n_samples: u64,
    #[serde(default)]
    pub grid: Vec<f64>,
    pub law: LawSpec,
    #[serde(default)]
    pub system: SystemSpec,
    pub mode: Mode,
}

fn one() -> usize {
    1
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum LawSpec {
    ParetoLog {
        alpha: f64,
        shift: f64,
        coupling: Coupling,
    },
    WeibullLog {
        beta: f64,
        scale: f64,
        shift: f64,
        coupling: Coupling,
    },
    Deterministic {
        a: f64,
        b: f64,
        #[serde(default)]
        d: f64,
    },
    Discrete {
        atoms: Vec<Atom>,
    },
    IndicatorCounter {
        base: Marginal,
    },
}

impl LawSpec {
    pub fn build(&self) -> slowtail::Result<InputLaw> {
        match self {
            LawSpec::ParetoLog {
                alpha,
                shift,
                coupling,
            } => InputLaw::pareto_log(*alpha, *shift, *coupling),
            LawSpec::WeibullLog {
                beta,
                scale,
                shift,
                coupling,
            } => InputLaw::weibull_log(*beta, *scale, *shift, *coupling),
            LawSpec::Deterministic { a, b, d } => InputLaw::deterministic(*a, *b, *d),
            LawSpec::Discrete { atoms } => InputLaw::discrete(atoms.clone()),
            LawSpec::IndicatorCounter { base } => InputLaw::indicator_counter(*base),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    pub kind: SystemKind,
}

impl Default for SystemSpec {
    fn default() -> Self {
        SystemSpec {
            kind: SystemKind::Affine,
        }
    }
}

/// `ratio = p_hat / theory` must land in `[lo, hi]` at grid point `u`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatioBand {
    pub u: f64,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Margins {
    pub lo: f64,
    pub hi: f64,
}

impl Default for Margins {
    fn default() -> Self {
        Margins { lo: 0.5, hi: 1.5 }
    }
}

fn bias_tol() -> f64 {
    0.02
}

fn guard() -> f64 {
    60.0
}

fn doublings() -> u32 {
    20
}

fn nodes_per_doubling() -> u32 {
    1024
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Mode {
    /// Backward perpetuity samples against the stationary prediction.
    Stationary {
        #[serde(default)]
        regime: Option<Regime>,
        /// Truncation depth so a late big term moves the tail at the largest
        /// grid point by at most this fraction.
        #[serde(default = "bias_tol")]
        bias_tol: f64,
        #[serde(default)]
        sandwich: Option<Margins>,
        /// Require the ratio sequence to be nondecreasing in `u`.
        #[serde(default)]
        ratio_nondecreasing: bool,
        /// Every sample must equal this value to 1e-12 relative.
        #[serde(default)]
        expect_constant: Option<f64>,
    },
    FiniteHorizon {
        n: usize,
        #[serde(default)]
        r0: f64,
        #[serde(default)]
        w: f64,
        #[serde(default)]
        regime: Option<Regime>,
        #[serde(default)]
        band: Option<RatioBand>,
    },
    SupWalk {
        #[serde(default = "guard")]
        guard_log: f64,
        #[serde(default = "bias_tol")]
        bias_tol: f64,
        #[serde(default)]
        band: Option<RatioBand>,
        /// Require `|ratio - 1|` nonincreasing along the grid, ties within
        /// one standard error.
        #[serde(default)]
        trend_to_one: bool,
    },
    /// Distribution-class checks on the law plus fixed controls.
    Diagnostics {
        #[serde(default = "doublings")]
        doublings: u32,
        #[serde(default = "nodes_per_doubling")]
        nodes_per_doubling: u32,
        #[serde(default)]
        subexp_band: Option<[f64; 2]>,
        /// Further laws for the separation check.
        #[serde(default)]
        extra_laws: Vec<LawSpec>,
    },
    Example34 {
        #[serde(default = "bias_tol")]
        bias_tol: f64,
        /// Terminal factor interval must lie inside.
        #[serde(default)]
        terminal_within: Option<[f64; 2]>,
    },
    BoundedExample {
        bound: f64,
        #[serde(default)]
        tol: f64,
    },
}

impl Mode {
    pub fn name(&self) -> &'static str {
        match self {
            Mode::Stationary { .. } => "stationary",
            Mode::FiniteHorizon { .. } => "finite_horizon",
            Mode::SupWalk { .. } => "sup_walk",
            Mode::Diagnostics { .. } => "diagnostics",
            Mode::Example34 { .. } => "example34",
            Mode::BoundedExample { .. } => "bounded_example",
        }
    }
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Self> {
        let s: Scenario = toml::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            bail!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            );
        }
        if self.n_samples == 0 && !matches!(self.mode, Mode::Diagnostics { .. }) {
            bail!("n_samples must be positive");
        }
        if self.workers == 0 {
            bail!("workers must be positive");
        }
        if self.grid.windows(2).any(|w| !(w[0] < w[1])) || self.grid.iter().any(|u| !u.is_finite())
        {
            bail!("grid must be finite and strictly increasing");
        }
        let needs_grid = !matches!(self.mode, Mode::BoundedExample { .. });
        if needs_grid && self.grid.is_empty() {
            bail!("mode {} needs a nonempty grid", self.mode.name());
        }
        Ok(())
    }

    pub fn law(&self) -> Result<InputLaw> {
        self.law.build().context("building the law")
    }

    pub fn system(&self) -> Result<LipschitzSystem> {
        LipschitzSystem::new(self.system.kind, self.law()?).context("building the system")
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }
}
