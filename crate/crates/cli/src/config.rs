//! Experiment configuration, a single JSON document.

use std::path::{Path, PathBuf};

use model_reward::data::{CsvSchema, PartitionSpec, Standardize};
use model_reward::game::CharacteristicFunction;
use model_reward::KernelSpec;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Where training data come from. Absent only when `game` is given.
    #[serde(default)]
    pub data: Option<DataSource>,
    #[serde(default)]
    pub parties: Option<PartyAssignment>,
    #[serde(default)]
    pub standardize: Standardize,
    #[serde(default)]
    pub model: Option<ModelConfig>,
    #[serde(default)]
    pub shapley: ShapleyConfig,
    /// Operating rho values; defaults to 1.0, 0.9, ..., 0.0.
    #[serde(default)]
    pub rho: Option<Vec<f64>>,
    #[serde(default)]
    pub realization: RealizationConfig,
    #[serde(default)]
    pub test: Option<TestSource>,
    /// A characteristic function to use instead of valuing data.
    #[serde(default)]
    pub game: Option<CharacteristicFunction>,
    /// Repeats the experiment over train-test splits and partitions.
    #[serde(default)]
    pub batch: Option<BatchConfig>,
    /// Default output directory when `--out` is not given.
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    Friedman {
        m: usize,
        seed: u64,
    },
    Csv {
        path: PathBuf,
        schema: CsvSchema,
    },
    /// One CSV per party; implies explicit party assignment.
    PartyCsvs {
        paths: Vec<PathBuf>,
        schema: CsvSchema,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum PartyAssignment {
    Partition {
        n_parties: usize,
        min_fraction: f64,
        seed: u64,
    },
    /// Party `k` takes the first `count` unassigned rows whose `feature`
    /// lies in `[lo, hi]`.
    FeatureRanges {
        ranges: Vec<FeatureRange>,
    },
    Explicit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureRange {
    pub feature: usize,
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelConfig {
    Blr {
        #[serde(default)]
        prior_mean: Option<Vec<f64>>,
        prior_cov: PriorCovariance,
        noise_variance: f64,
    },
    Gp {
        kernel: KernelSpec,
        noise_variance: f64,
    },
    SparseDtc {
        kernel: KernelSpec,
        noise_variance: f64,
        inducing: InducingConfig,
    },
}

/// A scalar `s` means `s * I`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PriorCovariance {
    Isotropic(f64),
    Matrix(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum InducingConfig {
    /// A seeded subset of the pooled training inputs. `count` defaults to
    /// 10% of the rows, at most 256.
    RandomSubset {
        #[serde(default)]
        count: Option<usize>,
        seed: u64,
    },
    Explicit {
        inputs: Vec<Vec<f64>>,
    },
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case", deny_unknown_fields)]
pub enum ShapleyConfig {
    #[default]
    Exact,
    Sampled {
        samples: usize,
        seed: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RealizationConfig {
    /// Residual tolerance relative to `max(1, v_N)`.
    #[serde(default = "default_relative_tolerance")]
    pub relative_tolerance: f64,
    #[serde(default = "default_realizations")]
    pub realizations: usize,
    #[serde(default)]
    pub seed: u64,
    /// Rho values to realize and evaluate; defaults to every reward row.
    #[serde(default)]
    pub rho: Option<Vec<f64>>,
}

fn default_relative_tolerance() -> f64 {
    1e-6
}

fn default_realizations() -> usize {
    20
}

impl Default for RealizationConfig {
    fn default() -> Self {
        Self {
            relative_tolerance: default_relative_tolerance(),
            realizations: default_realizations(),
            seed: 0,
            rho: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum TestSource {
    Holdout { fraction: f64, seed: u64 },
    Friedman { m: usize, seed: u64 },
    Csv { path: PathBuf, schema: CsvSchema },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatchConfig {
    pub splits: usize,
    pub partitions: usize,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads the config and resolves relative paths against its directory.
    pub fn load(path: &Path) -> Result<(Self, Vec<u8>), CliError> {
        let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
        let text = std::str::from_utf8(&bytes).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_json(text)?;
        if let Some(base) = path.parent() {
            cfg.resolve_paths(base);
        }
        Ok((cfg, bytes))
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        match &mut self.data {
            Some(DataSource::Csv { path, .. }) => fix(path),
            Some(DataSource::PartyCsvs { paths, .. }) => paths.iter_mut().for_each(fix),
            _ => {}
        }
        if let Some(TestSource::Csv { path, .. }) = &mut self.test {
            fix(path);
        }
        if let Some(out) = &mut self.output_dir {
            fix(out);
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        match (&self.data, &self.game) {
            (None, None) => return bad("either `data` or `game` is required".into()),
            (Some(_), Some(_)) => return bad("`data` and `game` are mutually exclusive".into()),
            _ => {}
        }
        if let Some(data) = &self.data {
            if self.model.is_none() {
                return bad("`model` is required with `data`".into());
            }
            match (data, &self.parties) {
                (DataSource::PartyCsvs { paths, .. }, None | Some(PartyAssignment::Explicit)) => {
                    if paths.is_empty() {
                        return bad("`party_csvs` needs at least one path".into());
                    }
                }
                (DataSource::PartyCsvs { .. }, Some(_)) => {
                    return bad("`party_csvs` data fix the parties; use `parties: {\"type\": \"explicit\"}`".into())
                }
                (_, None) => return bad("`parties` is required".into()),
                (_, Some(PartyAssignment::Explicit)) => {
                    return bad("explicit party assignment requires `party_csvs` data".into())
                }
                (_, Some(PartyAssignment::Partition { n_parties, min_fraction, .. })) => {
                    if *n_parties == 0 || !(*min_fraction > 0.0) || min_fraction * *n_parties as f64 > 1.0 + 1e-12 {
                        return bad("partition needs n_parties >= 1 and 0 < min_fraction <= 1/n_parties".into());
                    }
                }
                (_, Some(PartyAssignment::FeatureRanges { ranges })) => {
                    if ranges.is_empty() {
                        return bad("`feature_ranges` needs at least one range".into());
                    }
                    if ranges.iter().any(|r| !(r.lo <= r.hi)) {
                        return bad("feature ranges need lo <= hi".into());
                    }
                }
            }
            if matches!((data, &self.test), (DataSource::PartyCsvs { .. }, Some(TestSource::Holdout { .. }))) {
                return bad("a holdout test split needs a single data source".into());
            }
        }
        for r in self.rho.iter().flatten().chain(self.realization.rho.iter().flatten()) {
            if !(0.0..=1.0).contains(r) {
                return bad(format!("rho {r} outside [0, 1]"));
            }
        }
        if let Some(rho) = &self.rho {
            if rho.is_empty() {
                return bad("`rho` must not be empty".into());
            }
        }
        if let ShapleyConfig::Sampled { samples: 0, .. } = self.shapley {
            return bad("sampled Shapley needs at least one sample".into());
        }
        let rt = self.realization.relative_tolerance;
        if !(rt > 0.0) || !rt.is_finite() {
            return bad(format!("relative_tolerance {rt} must be positive"));
        }
        if self.realization.realizations == 0 {
            return bad("`realizations` must be at least 1".into());
        }
        if let Some(TestSource::Holdout { fraction, .. }) = self.test {
            if !(fraction > 0.0 && fraction < 1.0) {
                return bad(format!("holdout fraction {fraction} must lie in (0, 1)"));
            }
        }
        if let Some(b) = self.batch {
            if b.splits == 0 || b.partitions == 0 {
                return bad("batch splits and partitions must be at least 1".into());
            }
            if self.game.is_some() {
                return bad("`batch` needs data".into());
            }
        }
        Ok(())
    }

    /// Sorted descending, duplicates removed.
    pub fn rho_grid(&self) -> Vec<f64> {
        let mut grid = self.rho.clone().unwrap_or_else(|| (0..=10).rev().map(|k| k as f64 / 10.0).collect());
        grid.sort_by(|a, b| b.total_cmp(a));
        grid.dedup();
        grid
    }
}

impl PartyAssignment {
    pub fn partition_spec(&self) -> Option<PartitionSpec> {
        match *self {
            PartyAssignment::Partition { n_parties, min_fraction, seed } => {
                Some(PartitionSpec { n_parties, min_fraction, seed })
            }
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_game_config() {
        let cfg = ExperimentConfig::from_json(r#"{"game": {"n": 2, "values": [0, 7, 5, 8]}}"#).unwrap();
        assert_eq!(cfg.rho_grid().len(), 11);
        assert_eq!(cfg.rho_grid()[0], 1.0);
        assert_eq!(cfg.shapley, ShapleyConfig::Exact);
    }

    #[test]
    fn full_config_round_trips() {
        let text = r#"{
            "data": {"type": "friedman", "m": 500, "seed": 1},
            "parties": {"type": "partition", "n_parties": 3, "min_fraction": 0.1, "seed": 2},
            "standardize": {"inputs": true, "outputs": true},
            "model": {"type": "sparse_dtc", "noise_variance": 0.1,
                      "kernel": {"type": "squared_exponential", "signal_variance": 1.0, "lengthscales": [1, 1, 1, 1, 1, 1]},
                      "inducing": {"type": "random_subset", "seed": 4}},
            "shapley": {"method": "sampled", "samples": 100, "seed": 3},
            "rho": [0.2, 1.0, 0.2, 0.5],
            "realization": {"realizations": 5, "seed": 9},
            "test": {"type": "holdout", "fraction": 0.2, "seed": 5}
        }"#;
        let cfg = ExperimentConfig::from_json(text).unwrap();
        assert_eq!(cfg.rho_grid(), vec![1.0, 0.5, 0.2]);
        let again: ExperimentConfig = serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn rejects_bad_configs() {
        for text in [
            r#"{}"#,
            r#"{"game": {"n": 1, "values": [0, 1]}, "rho": [1.5]}"#,
            r#"{"game": {"n": 1, "values": [0, 1]}, "rho": []}"#,
            r#"{"game": {"n": 1, "values": [0, 1]}, "typo": 1}"#,
            r#"{"data": {"type": "friedman", "m": 10, "seed": 1}, "parties": {"type": "explicit"},
                "model": {"type": "gp", "noise_variance": 1, "kernel": {"type": "exponential", "signal_variance": 1, "lengthscales": [1]}}}"#,
            r#"{"data": {"type": "friedman", "m": 10, "seed": 1},
                "model": {"type": "gp", "noise_variance": 1, "kernel": {"type": "exponential", "signal_variance": 1, "lengthscales": [1]}}}"#,
        ] {
            assert!(matches!(ExperimentConfig::from_json(text), Err(CliError::Config(_))), "{text}");
        }
    }
}
