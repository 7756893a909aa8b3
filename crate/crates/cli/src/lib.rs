//! Scenario runner: TOML scenario files in, CSV/JSON/SVG artifacts out.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod output;
pub mod run;
pub mod scenarios;
pub mod svg;

pub use config::{Mode, Scenario, SCHEMA_VERSION};
pub use run::{run_scenario, theory_only, Check, Outcome, Summary};

/// Command-line overrides applied on top of a scenario file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub samples: Option<u64>,
}

impl Overrides {
    pub fn apply(&self, sc: &mut Scenario) {
        if let Some(s) = self.seed {
            sc.seed = s;
        }
        if let Some(w) = self.workers {
            sc.workers = w;
        }
        if let Some(n) = self.samples {
            sc.n_samples = n;
        }
    }
}

/// Process exit codes.
pub mod exit {
    pub const PASS: u8 = 0;
    pub const ERROR: u8 = 1;
    pub const VERDICT_FAILED: u8 = 2;
}
