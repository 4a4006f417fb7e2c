//! Run configuration files (TOML). Unknown keys are rejected; the parsed
//! value serializes back to an equivalent document for the run manifest.

use std::path::{Path, PathBuf};

use mixsel_core::divergence::Scheme;
use mixsel_core::em::FitOptions;
use mixsel_core::order::Penalty;
use mixsel_core::{LocationFamily, MixtureParams, SieveSchedule};
use serde::{Deserialize, Serialize};

use crate::error::{MixselError, Result};
use crate::parse;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Study {
    Consistency,
    Inconsistency,
    Lil,
    Geometry,
    Entropy,
}

impl Study {
    pub fn name(&self) -> &'static str {
        match self {
            Study::Consistency => "consistency",
            Study::Inconsistency => "inconsistency",
            Study::Lil => "lil",
            Study::Geometry => "geometry",
            Study::Entropy => "entropy",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub study: Study,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verbosity: Option<String>,
    pub truth: TruthConfig,
    #[serde(default)]
    pub quadrature: QuadratureConfig,
    #[serde(default)]
    pub fit: FitConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selection: Option<SelectionConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lil: Option<LilConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub geometry: Option<GeometryConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entropy: Option<EntropyConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruthConfig {
    pub weights: Vec<f64>,
    /// One point per component.
    pub locations: Vec<Vec<f64>>,
    #[serde(default = "one")]
    pub sigma: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case", tag = "scheme")]
pub enum QuadratureConfig {
    GaussHermite {
        order: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        scale: Option<f64>,
    },
    Uniform {
        step: f64,
        radius: f64,
    },
    MonteCarlo {
        samples: usize,
    },
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig::GaussHermite { order: 40, scale: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    #[serde(default = "default_starts")]
    pub starts: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
}

fn default_starts() -> usize {
    20
}
fn default_tol() -> f64 {
    1e-6
}
fn default_max_iter() -> usize {
    1000
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig { starts: default_starts(), tol: default_tol(), max_iter: default_max_iter() }
    }
}

impl FitConfig {
    pub fn options(&self, seed: u64) -> FitOptions {
        FitOptions { starts: self.starts, tol: self.tol, max_iter: self.max_iter, seed }
    }
}

/// Consistency and inconsistency studies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelectionConfig {
    pub n_grid: Vec<usize>,
    pub replicates: usize,
    /// Penalty strings, e.g. `bic`, `loglog:0.05`, `linear:loglog`.
    pub penalties: Vec<String>,
    /// Sieve string, e.g. `const:10`.
    pub sieve: String,
    #[serde(default = "default_q_cap")]
    pub q_cap: usize,
}

fn default_q_cap() -> usize {
    mixsel_core::order::DEFAULT_Q_CAP
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LilModelKind {
    /// Known `N(0, σ²I)` against one free location.
    Regular,
    /// `q` components against the truth's order.
    Mixture,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LilConfig {
    pub replicates: usize,
    /// Trajectory sizes `2^min_exp … 2^max_exp`.
    pub min_exp: u32,
    pub max_exp: u32,
    pub radius: f64,
    /// Order of the larger mixture model; defaults to one above the truth.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<usize>,
    pub models: Vec<LilModelKind>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    pub q: usize,
    /// Every location coordinate ranges over `[box_lo, box_hi]`.
    pub box_lo: f64,
    pub box_hi: f64,
    pub samples: usize,
    /// Lattice points per axis for the level sets (two components, one
    /// dimension only); 0 disables them.
    #[serde(default)]
    pub resolution: usize,
    pub epsilon: f64,
    /// Overrides the default cell radius `ε/4` of the partition.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub partition_radius: Option<f64>,
    /// Radius of the parameter ball for the envelope norms; omitted to skip.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub envelope_radius: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntropyConfig {
    pub q: Vec<usize>,
    pub epsilon: f64,
    pub radius: f64,
    pub functions: usize,
    /// Geometric δ-grid `ε·ratio^k`, `k < points`.
    pub ratio: f64,
    pub points: usize,
    #[serde(default = "default_max_candidates")]
    pub max_candidates: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub local_global: Option<LocalGlobalConfig>,
}

fn default_max_candidates() -> u64 {
    100_000_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LocalGlobalConfig {
    pub weighted_functions: usize,
    /// Weighted-class grid `eps_max·eps_ratio^k`, `k < eps_points`.
    pub eps_max: f64,
    pub eps_ratio: f64,
    pub eps_points: usize,
    /// Ratio-study samples used to measure `c*` for the envelope.
    pub ratio_samples: usize,
    /// `(δ, ρ)` pairs.
    pub pairs: Vec<[f64; 2]>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<RunConfig> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| MixselError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| MixselError::Config(format!("{}: {e}", path.display())))?;
        RunConfig::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn truth(&self) -> Result<MixtureParams> {
        let d = self.truth.locations.first().map_or(0, Vec::len);
        if d == 0 || self.truth.locations.iter().any(|l| l.len() != d) {
            return Err(MixselError::Config("truth locations must share a positive dimension".into()));
        }
        let flat = self.truth.locations.concat();
        MixtureParams::new(self.truth.weights.clone(), flat, d).map_err(|e| MixselError::Config(format!("truth: {e}")))
    }

    pub fn family(&self) -> Result<LocationFamily> {
        let d = self.truth.locations.first().map_or(0, Vec::len);
        LocationFamily::scaled(self.truth.sigma, d).map_err(|e| MixselError::Config(format!("truth: {e}")))
    }

    pub fn scheme(&self, seed: u64) -> Scheme {
        match self.quadrature {
            QuadratureConfig::GaussHermite { order, scale } => Scheme::TensorGaussHermite { order, scale },
            QuadratureConfig::Uniform { step, radius } => Scheme::UniformGrid { step, radius },
            QuadratureConfig::MonteCarlo { samples } => Scheme::MonteCarlo { samples, seed },
        }
    }

    pub fn penalties(&self) -> Result<Vec<Penalty>> {
        self.selection()?.penalties.iter().map(|p| parse::parse_penalty(p)).collect()
    }

    pub fn sieve(&self) -> Result<SieveSchedule> {
        parse::parse_sieve(&self.selection()?.sieve)
    }

    pub fn selection(&self) -> Result<&SelectionConfig> {
        self.selection.as_ref().ok_or_else(|| missing("selection"))
    }

    /// Schema checks beyond what deserialization enforces.
    pub fn validate(&self) -> Result<()> {
        self.truth()?;
        self.family()?;
        if self.fit.starts == 0 || self.fit.max_iter == 0 || !(self.fit.tol >= 0.0) {
            return Err(MixselError::Config("fit: starts and max_iter must be positive, tol nonnegative".into()));
        }
        if self.threads == Some(0) {
            return Err(MixselError::Config("threads must be positive".into()));
        }
        match self.study {
            Study::Consistency | Study::Inconsistency => {
                let s = self.selection()?;
                if s.replicates == 0 {
                    return Err(MixselError::Config("selection.replicates must be at least 1".into()));
                }
                if s.n_grid.is_empty() || s.n_grid.windows(2).any(|w| w[1] <= w[0]) || s.n_grid[0] < 3 {
                    return Err(MixselError::Config("selection.n_grid must increase strictly from at least 3".into()));
                }
                if s.q_cap == 0 {
                    return Err(MixselError::Config("selection.q_cap must be at least 1".into()));
                }
                let pens = self.penalties()?;
                if pens.is_empty() {
                    return Err(MixselError::Config("selection.penalties is empty".into()));
                }
                if self.study == Study::Inconsistency && !pens.iter().any(|p| matches!(p, Penalty::LogLog { .. })) {
                    return Err(MixselError::Config("inconsistency study needs a loglog penalty".into()));
                }
                self.sieve()?;
            }
            Study::Lil => {
                let l = self.lil.as_ref().ok_or_else(|| missing("lil"))?;
                if l.replicates == 0 || l.min_exp < 4 || l.max_exp < l.min_exp || l.max_exp > 30 || l.models.is_empty() {
                    return Err(MixselError::Config("lil: need replicates ≥ 1, 4 ≤ min_exp ≤ max_exp ≤ 30 and a model".into()));
                }
                if !(l.radius >= 0.0) {
                    return Err(MixselError::Config("lil.radius must be nonnegative".into()));
                }
                let q_star = self.truth()?.order();
                if l.models.contains(&LilModelKind::Mixture) && l.q.unwrap_or(q_star + 1) <= q_star {
                    return Err(MixselError::Config("lil.q must exceed the truth's order".into()));
                }
            }
            Study::Geometry => {
                let g = self.geometry.as_ref().ok_or_else(|| missing("geometry"))?;
                if g.q == 0 || !(g.box_lo < g.box_hi) || g.samples < 1000 || !(g.epsilon > 0.0) {
                    return Err(MixselError::Config("geometry: need q ≥ 1, box_lo < box_hi, samples ≥ 1000, epsilon > 0".into()));
                }
                if g.resolution == 1 || (g.resolution > 1 && (g.q != 2 || self.truth()?.dim() != 1)) {
                    return Err(MixselError::Config("geometry.resolution needs q = 2, d = 1 and at least 2 points".into()));
                }
            }
            Study::Entropy => {
                let e = self.entropy.as_ref().ok_or_else(|| missing("entropy"))?;
                if !(e.epsilon > 0.0) || !(e.ratio > 0.0 && e.ratio < 1.0) || e.points < 4 || e.functions < 100 || !(e.radius >= 0.0) {
                    return Err(MixselError::Config("entropy: need epsilon > 0, 0 < ratio < 1, points ≥ 4, functions ≥ 100".into()));
                }
                if e.q.contains(&0) {
                    return Err(MixselError::Config("entropy.q entries must be positive".into()));
                }
            }
        }
        Ok(())
    }
}

fn missing(section: &str) -> MixselError {
    MixselError::Config(format!("missing [{section}] section"))
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
study = "consistency"
seed = 7

[truth]
weights = [0.5, 0.5]
locations = [[-1.0], [1.0]]

[selection]
n_grid = [200, 500]
replicates = 3
penalties = ["bic", "loglog:0.05"]
sieve = "const:10"
q_cap = 4
"#;

    #[test]
    fn round_trip_is_lossless() {
        let cfg = RunConfig::from_toml(BASE).unwrap();
        assert_eq!(RunConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
        assert_eq!(cfg.quadrature, QuadratureConfig::GaussHermite { order: 40, scale: None });
    }

    #[test]
    fn unknown_keys_are_named() {
        let err = RunConfig::from_toml(&format!("{BASE}\nbogus = 1\n")).unwrap_err();
        assert!(err.to_string().contains("bogus"), "{err}");
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn schema_checks() {
        assert!(RunConfig::from_toml(&BASE.replace("[200, 500]", "[500, 200]")).is_err());
        assert!(RunConfig::from_toml(&BASE.replace("replicates = 3", "replicates = 0")).is_err());
        assert!(RunConfig::from_toml(&BASE.replace("\"bic\", ", "\"aic\", ")).is_err());
        assert!(RunConfig::from_toml(&BASE.replace("study = \"consistency\"", "study = \"nope\"")).is_err());
        assert!(RunConfig::from_toml(&BASE.replace("seed = 7", "")).is_err());
    }
}
