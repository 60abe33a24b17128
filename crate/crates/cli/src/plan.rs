//! Coverage plan files.

use serde::{Deserialize, Serialize};

use weakdep::adversarial::BaseFile;
use weakdep::confsets::{Bound, Interval};
use weakdep::functional::FunctionalFile;
use weakdep::law::LawFile;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LawEntry {
    pub label: String,
    pub law: LawFile,
}

/// Laws generated toward `zeta` from `base`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepEntry {
    pub base: BaseFile,
    pub zeta: f64,
    pub tv_targets: Vec<f64>,
}

/// Either `laws` (with `functional`) or `sweep` (functional taken from the
/// base). Seed, level and grid come from the command line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub functional: Option<FunctionalFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub laws: Option<Vec<LawEntry>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepEntry>,
    pub methods: Vec<String>,
    pub n: usize,
    pub reps: usize,
    /// The parameter range `S`; `"inf"`/`"-inf"` allowed.
    pub range: [Bound; 2],
}

impl PlanFile {
    pub fn range(&self) -> Result<Interval, String> {
        Interval::new(self.range[0].0, self.range[1].0).map_err(|e| e.to_string())
    }
}
