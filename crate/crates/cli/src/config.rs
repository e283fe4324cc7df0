use std::path::{Path, PathBuf};

use jsqd_core::{DSchedule, RareEventKind, TiltSpec};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Lln,
    RateTable,
    RareDecay,
    SkorokhodSelftest,
    FluidSelftest,
    RemarkBound,
}

impl ExperimentKind {
    pub fn is_selftest(self) -> bool {
        matches!(
            self,
            ExperimentKind::SkorokhodSelftest | ExperimentKind::FluidSelftest
        )
    }
}

/// Parameter lists; the experiment runs over their Cartesian product.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    #[serde(default)]
    pub n: Vec<u64>,
    #[serde(default)]
    pub d_schedule: Vec<DSchedule>,
    #[serde(default)]
    pub lambda: Vec<f64>,
    #[serde(default)]
    pub epsilon: Vec<f64>,
    #[serde(default)]
    pub horizon: Vec<f64>,
    #[serde(default)]
    pub j: Vec<u32>,
    /// Skorokhod problem dimensions.
    #[serde(default)]
    pub m: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    pub rate_gap: f64,
    pub brute_force_step: f64,
    pub slope_rel: f64,
    pub lln_p95: f64,
    pub residual: f64,
    pub refinement: f64,
    pub fluid_mass: f64,
    pub fluid_pinned: f64,
    pub fluid_cost: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            rate_gap: 1e-6,
            brute_force_step: 1e-4,
            slope_rel: 0.15,
            lln_p95: 0.05,
            residual: 1e-8,
            refinement: 1e-6,
            fluid_mass: 1e-3,
            fluid_pinned: 1e-10,
            fluid_cost: 1e-6,
        }
    }
}

/// Config as written by the user. Optional fields get kind-specific
/// defaults in [`RawConfig::resolve`].
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    kind: ExperimentKind,
    seed: u64,
    output_dir: PathBuf,
    grid: Grid,
    replications: Option<u64>,
    initial: Option<Vec<f64>>,
    report_dt: Option<f64>,
    fluid_dt: Option<f64>,
    epsilon_event: Option<RareEventKind>,
    j_event: Option<RareEventKind>,
    tilt: Option<TiltSpec>,
    cases: Option<usize>,
    segments: Option<usize>,
    #[serde(default)]
    tolerances: Option<Tolerances>,
}

/// Fully resolved experiment description; this is what the manifest records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub grid: Grid,
    /// Replicas per grid point. Zero skips the Monte Carlo part of
    /// `remark-bound`.
    pub replications: u64,
    /// Scaled initial tails `x_1 >= x_2 >= ...`.
    pub initial: Vec<f64>,
    pub report_dt: f64,
    pub fluid_dt: f64,
    pub epsilon_event: RareEventKind,
    pub j_event: RareEventKind,
    /// Fixed tilt; `None` means the optimal tilt for each grid point.
    pub tilt: Option<TiltSpec>,
    pub cases: usize,
    pub segments: usize,
    pub tolerances: Tolerances,
}

impl RawConfig {
    fn resolve(self, base: &Path) -> Result<ExperimentConfig> {
        use ExperimentKind::*;
        let kind = self.kind;
        let output_dir = if self.output_dir.is_absolute() {
            self.output_dir
        } else {
            base.join(self.output_dir)
        };
        let cfg = ExperimentConfig {
            kind,
            seed: self.seed,
            output_dir,
            grid: self.grid,
            replications: self.replications.unwrap_or(match kind {
                Lln => 100,
                RareDecay => 10_000,
                RemarkBound => 0,
                _ => 0,
            }),
            initial: self.initial.unwrap_or_else(|| match kind {
                Lln => vec![0.5, 0.2, 0.05],
                _ => vec![1.0],
            }),
            report_dt: self.report_dt.unwrap_or(0.01),
            fluid_dt: self.fluid_dt.unwrap_or(match kind {
                FluidSelftest => 1e-4,
                _ => 1e-3,
            }),
            epsilon_event: self.epsilon_event.unwrap_or(RareEventKind::GEps),
            j_event: self.j_event.unwrap_or(RareEventKind::UJ),
            tilt: self.tilt,
            cases: self.cases.unwrap_or(500),
            segments: self.segments.unwrap_or(12),
            tolerances: self.tolerances.unwrap_or_default(),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

fn require<T>(name: &str, list: &[T]) -> Result<()> {
    if list.is_empty() {
        return Err(CliError::Config(format!(
            "grid.{name} must be non-empty for this experiment"
        )));
    }
    Ok(())
}

fn positive(name: &str, values: &[f64]) -> Result<()> {
    if let Some(v) = values.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
        return Err(CliError::Config(format!(
            "{name} must be positive and finite, got {v}"
        )));
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<(Self, Vec<u8>)> {
        let bytes = std::fs::read(path).map_err(|source| CliError::ReadConfig {
            path: path.to_path_buf(),
            source,
        })?;
        let text = String::from_utf8(bytes.clone()).map_err(|e| CliError::Config(e.to_string()))?;
        let raw: RawConfig = toml::from_str(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        Ok((raw.resolve(base)?, bytes))
    }

    pub fn from_toml_str(text: &str, base: &Path) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text)?;
        raw.resolve(base)
    }

    pub fn validate(&self) -> Result<()> {
        use ExperimentKind::*;
        let g = &self.grid;
        match self.kind {
            Lln => {
                require("n", &g.n)?;
                require("d_schedule", &g.d_schedule)?;
                require("lambda", &g.lambda)?;
                require("horizon", &g.horizon)?;
            }
            RateTable | FluidSelftest => {
                require("epsilon", &g.epsilon)?;
                require("horizon", &g.horizon)?;
            }
            RareDecay => {
                require("n", &g.n)?;
                require("d_schedule", &g.d_schedule)?;
                require("horizon", &g.horizon)?;
                if g.epsilon.is_empty() && g.j.is_empty() {
                    return Err(CliError::Config(
                        "rare-decay needs grid.epsilon or grid.j".into(),
                    ));
                }
                if !matches!(
                    self.epsilon_event,
                    RareEventKind::GEps | RareEventKind::FEps
                ) {
                    return Err(CliError::Config(
                        "epsilon_event must be G_eps or F_eps".into(),
                    ));
                }
                if !matches!(self.j_event, RareEventKind::UJ | RareEventKind::VJ) {
                    return Err(CliError::Config("j_event must be U_j or V_j".into()));
                }
                if let Some(j) = g.j.iter().find(|&&j| j < 3) {
                    return Err(CliError::Config(format!("j must be at least 3, got {j}")));
                }
            }
            SkorokhodSelftest => {
                require("m", &g.m)?;
                if g.m.contains(&0) {
                    return Err(CliError::Config(
                        "dimensions in grid.m must be positive".into(),
                    ));
                }
                if self.segments == 0 {
                    return Err(CliError::Config("segments must be positive".into()));
                }
            }
            RemarkBound => {
                require("n", &g.n)?;
                require("d_schedule", &g.d_schedule)?;
                require("horizon", &g.horizon)?;
            }
        }
        if g.n.contains(&0) {
            return Err(CliError::Config("n must be positive".into()));
        }
        positive("epsilon", &g.epsilon)?;
        positive("horizon", &g.horizon)?;
        positive("report_dt", &[self.report_dt])?;
        positive("fluid_dt", &[self.fluid_dt])?;
        if let Some(v) = g.lambda.iter().find(|v| !(**v >= 0.0 && v.is_finite())) {
            return Err(CliError::Config(format!(
                "lambda must be non-negative, got {v}"
            )));
        }
        jsqd_core::occupancy::check_l1_down(&self.initial)
            .map_err(|e| CliError::Config(e.to_string()))?;
        let needs_reps = matches!(self.kind, Lln | RareDecay);
        if needs_reps && self.replications < 2 {
            return Err(CliError::Config("replications must be at least 2".into()));
        }
        if self.kind == RemarkBound && self.replications == 1 {
            return Err(CliError::Config(
                "replications must be 0 or at least 2".into(),
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_filled_per_kind() {
        let cfg = ExperimentConfig::from_toml_str(
            "kind = \"lln\"\nseed = 1\noutput_dir = \"out\"\n[grid]\nn = [100]\nd_schedule = [\"sqrt\"]\nlambda = [0.9]\nhorizon = [2.0]\n",
            Path::new("/tmp"),
        )
        .unwrap();
        assert_eq!(cfg.replications, 100);
        assert_eq!(cfg.initial, vec![0.5, 0.2, 0.05]);
        assert_eq!(cfg.output_dir, PathBuf::from("/tmp/out"));
    }

    #[test]
    fn seed_is_mandatory() {
        let err = ExperimentConfig::from_toml_str(
            "kind = \"rate-table\"\noutput_dir = \"o\"\n[grid]\nepsilon = [1.0]\nhorizon = [1.0]\n",
            Path::new("."),
        )
        .unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn empty_grid_is_rejected() {
        let err = ExperimentConfig::from_toml_str(
            "kind = \"rate-table\"\nseed = 0\noutput_dir = \"o\"\n[grid]\nepsilon = [1.0]\n",
            Path::new("."),
        )
        .unwrap_err();
        assert!(err.to_string().contains("horizon"), "{err}");
    }
}
