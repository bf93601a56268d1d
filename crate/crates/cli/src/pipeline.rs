//! The experiment stages: data, valuation, Shapley, rewards, realization and
//! evaluation.

use std::convert::Infallible;

use log::{info, warn};
use model_reward::data::{
    friedman_generate, holdout_split, load_csv, partition, sample_rows, standardize, StandardizationParams,
};
use model_reward::eval::{evaluate_allocation, EvaluationReport};
use model_reward::game::{
    allocate, check_incentives, check_monotone, check_submodular, exact_shapley, sampled_shapley,
    CharacteristicFunction, IncentiveReport, MonotoneWitness, RewardAllocation, ShapleyVector, SubmodularWitness,
    Threshold,
};
use model_reward::models::coalition_values;
use model_reward::realize::{RealizationEntry, Realizer};
use model_reward::{Dataset, ModelSpec};
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{
    DataSource, ExperimentConfig, InducingConfig, ModelConfig, PartyAssignment, PriorCovariance, ShapleyConfig,
    TestSource,
};
use crate::error::CliError;

/// Maximum default number of DTC inducing inputs.
pub const DEFAULT_INDUCING_CAP: usize = 256;

/// Training parties, optional test set and the model, after standardization.
#[derive(Debug, Clone)]
pub struct Inputs {
    pub parties: Vec<Dataset>,
    pub test: Option<Dataset>,
    pub model: ModelSpec,
    pub standardization: Option<StandardizationParams>,
}

/// Loads data, splits off the test set, assigns parties, standardizes with
/// statistics of the pooled training data and builds the model.
pub fn prepare_inputs(cfg: &ExperimentConfig) -> Result<Option<Inputs>, CliError> {
    let Some(source) = &cfg.data else { return Ok(None) };
    let (mut parties, mut test) = match source {
        DataSource::PartyCsvs { paths, schema } => {
            let parties = paths.iter().map(|p| load_csv(p, schema)).collect::<Result<Vec<_>, _>>()?;
            (parties, load_test(cfg)?)
        }
        DataSource::Friedman { .. } | DataSource::Csv { .. } => {
            let pool = match source {
                DataSource::Friedman { m, seed } => friedman_generate(*m, *seed),
                DataSource::Csv { path, schema } => load_csv(path, schema)?,
                DataSource::PartyCsvs { .. } => unreachable!(),
            };
            let (train, test) = match cfg.test {
                Some(TestSource::Holdout { fraction, seed }) => {
                    let (train, test) = holdout_split(&pool, fraction, seed)?;
                    (train, Some(test))
                }
                _ => (pool, None),
            };
            let test = match test {
                Some(t) => Some(t),
                None => load_test(cfg)?,
            };
            (assign_parties(cfg, &train)?, test)
        }
    };
    let dims: Vec<usize> = parties.iter().map(Dataset::dim).collect();
    if dims.windows(2).any(|w| w[0] != w[1]) {
        return Err(CliError::Config(format!("parties have differing input dimensions {dims:?}")));
    }
    if let Some(t) = &test {
        if t.dim() != dims[0] {
            return Err(CliError::Config(format!("test set has {} columns, training data {}", t.dim(), dims[0])));
        }
    }

    let standardization = if cfg.standardize.inputs || cfg.standardize.outputs {
        let pooled = Dataset::concat(&parties)?;
        let (_, params) = standardize(&pooled, cfg.standardize)?;
        parties = parties.iter().map(|p| params.apply(p)).collect::<Result<_, _>>()?;
        test = test.map(|t| params.apply(&t)).transpose()?;
        Some(params)
    } else {
        None
    };
    let model = build_model(cfg.model.as_ref().expect("validated"), &parties)?;
    model.validate()?;
    Ok(Some(Inputs { parties, test, model, standardization }))
}

fn load_test(cfg: &ExperimentConfig) -> Result<Option<Dataset>, CliError> {
    Ok(match &cfg.test {
        None | Some(TestSource::Holdout { .. }) => None,
        Some(TestSource::Friedman { m, seed }) => Some(friedman_generate(*m, *seed)),
        Some(TestSource::Csv { path, schema }) => Some(load_csv(path, schema)?),
    })
}

fn assign_parties(cfg: &ExperimentConfig, train: &Dataset) -> Result<Vec<Dataset>, CliError> {
    match cfg.parties.as_ref().expect("validated") {
        PartyAssignment::Partition { .. } => {
            let spec = cfg.parties.as_ref().and_then(PartyAssignment::partition_spec).expect("partition");
            Ok(partition(train, &spec)?)
        }
        PartyAssignment::FeatureRanges { ranges } => {
            let mut taken = vec![false; train.len()];
            let mut parties = Vec::with_capacity(ranges.len());
            for (k, r) in ranges.iter().enumerate() {
                if r.feature >= train.dim() {
                    return Err(CliError::Config(format!("range {k}: feature {} out of range", r.feature)));
                }
                let rows: Vec<usize> = (0..train.len())
                    .filter(|&i| !taken[i] && (r.lo..=r.hi).contains(&train.inputs()[(i, r.feature)]))
                    .take(r.count)
                    .collect();
                if rows.len() < r.count {
                    return Err(CliError::Config(format!(
                        "range {k}: only {} unassigned rows with feature {} in [{}, {}], {} requested",
                        rows.len(),
                        r.feature,
                        r.lo,
                        r.hi,
                        r.count
                    )));
                }
                rows.iter().for_each(|&i| taken[i] = true);
                parties.push(train.select(&rows));
            }
            Ok(parties)
        }
        PartyAssignment::Explicit => unreachable!("validated"),
    }
}

fn build_model(cfg: &ModelConfig, parties: &[Dataset]) -> Result<ModelSpec, CliError> {
    let d = parties[0].dim();
    Ok(match cfg {
        ModelConfig::Blr { prior_mean, prior_cov, noise_variance } => {
            let prior_cov = match prior_cov {
                PriorCovariance::Isotropic(s) => DMatrix::identity(d, d) * *s,
                PriorCovariance::Matrix(rows) => matrix_from_rows(rows, "prior_cov")?,
            };
            ModelSpec::Blr { prior_mean: prior_mean.clone(), prior_cov, noise_variance: *noise_variance }
        }
        ModelConfig::Gp { kernel, noise_variance } => ModelSpec::gp(kernel.clone(), *noise_variance),
        ModelConfig::SparseDtc { kernel, noise_variance, inducing } => {
            let inducing_inputs = match inducing {
                InducingConfig::Explicit { inputs } => matrix_from_rows(inputs, "inducing inputs")?,
                InducingConfig::RandomSubset { count, seed } => {
                    let pooled = Dataset::concat(parties)?;
                    let m = pooled.len();
                    let k = count.unwrap_or_else(|| (m.div_ceil(10)).clamp(1, DEFAULT_INDUCING_CAP));
                    sample_rows(&pooled, k, *seed)?.into_parts().0
                }
            };
            ModelSpec::sparse_dtc(kernel.clone(), *noise_variance, inducing_inputs)
        }
    })
}

fn matrix_from_rows(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>, CliError> {
    let cols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != cols) {
        return Err(CliError::Config(format!("{what}: rows have differing lengths")));
    }
    Ok(DMatrix::from_row_iterator(rows.len(), cols, rows.iter().flatten().copied()))
}

/// The characteristic function with its structural checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameArtifact {
    pub n: usize,
    pub values: Vec<f64>,
    pub monotone: bool,
    pub submodular: bool,
    pub monotone_witness: Option<MonotoneWitness>,
    pub submodular_witness: Option<SubmodularWitness>,
    pub party_sizes: Option<Vec<usize>>,
}

pub fn value(
    cfg: &ExperimentConfig,
    inputs: Option<&Inputs>,
) -> Result<(CharacteristicFunction, GameArtifact), CliError> {
    let cf = match (inputs, &cfg.game) {
        (Some(inp), _) => coalition_values(&inp.model, &inp.parties)?,
        (None, Some(cf)) => cf.clone(),
        (None, None) => unreachable!("validated"),
    };
    let monotone = check_monotone(&cf).err();
    let submodular = check_submodular(&cf).err();
    let artifact = GameArtifact {
        n: cf.n(),
        values: cf.values().to_vec(),
        monotone: monotone.is_none(),
        submodular: submodular.is_none(),
        monotone_witness: monotone,
        submodular_witness: submodular,
        party_sizes: inputs.map(|i| i.parties.iter().map(Dataset::len).collect()),
    };
    Ok((cf, artifact))
}

pub fn shapley(cfg: &ExperimentConfig, cf: &CharacteristicFunction) -> Result<ShapleyVector, CliError> {
    Ok(match cfg.shapley {
        ShapleyConfig::Exact => exact_shapley(cf)?,
        ShapleyConfig::Sampled { samples, seed } => {
            sampled_shapley(|mask| Ok::<_, Infallible>(cf.value(mask)), cf.n(), samples, seed).expect("infallible")
        }
    })
}

/// One reward row: a grid value or a named threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardRow {
    pub label: String,
    pub rho: f64,
    pub allocation: RewardAllocation,
    pub incentives: IncentiveReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub rho_r: Threshold,
    pub rho_s: Threshold,
    pub dominated_sets: Vec<u32>,
    pub rows: Vec<ThresholdRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdRow {
    pub label: String,
    pub rho: f64,
    pub incentives: IncentiveReport,
}

/// Rewards over the rho grid plus rows at the clamped `rho_r` and `rho_s`,
/// sorted by descending rho (grid rows first on ties).
pub fn rewards(
    cfg: &ExperimentConfig,
    cf: &CharacteristicFunction,
    sh: &ShapleyVector,
) -> Result<(Vec<RewardRow>, Thresholds), CliError> {
    let probe = allocate(cf, sh, 1.0)?;
    let rho_r = probe.rho_r.expect("set by allocate");
    let rho_s = probe.rho_s.expect("set by allocate");
    let mut wanted: Vec<(String, f64)> = cfg.rho_grid().into_iter().map(|r| ("grid".to_string(), r)).collect();
    wanted.push(("rho_r".into(), rho_r.clamped()));
    wanted.push(("rho_s".into(), rho_s.clamped()));
    wanted.sort_by(|a, b| b.1.total_cmp(&a.1));
    let rows = wanted
        .into_iter()
        .map(|(label, rho)| {
            let allocation = allocate(cf, sh, rho)?;
            let incentives = check_incentives(cf, &allocation)?;
            Ok(RewardRow { label, rho, allocation, incentives })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let thresholds = Thresholds {
        rho_r,
        rho_s,
        dominated_sets: probe.dominated_sets.clone(),
        rows: rows
            .iter()
            .map(|r| ThresholdRow { label: r.label.clone(), rho: r.rho, incentives: r.incentives.clone() })
            .collect(),
    };
    Ok((rows, thresholds))
}

/// Per-party outcome of a realization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PartyRealization {
    Solved(RealizationEntry),
    Failed { party: usize, target: f64, error: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealizedRho {
    pub labels: Vec<String>,
    pub rho: f64,
    pub tolerance: f64,
    pub v_n: f64,
    pub parties: Vec<PartyRealization>,
}

impl RealizedRho {
    /// The plan when every party was realized.
    pub fn plan(&self) -> Option<model_reward::RealizationPlan> {
        let entries = self
            .parties
            .iter()
            .map(|p| match p {
                PartyRealization::Solved(e) => Some(e.clone()),
                PartyRealization::Failed { .. } => None,
            })
            .collect::<Option<Vec<_>>>()?;
        Some(model_reward::RealizationPlan { tolerance: self.tolerance, v_n: self.v_n, entries })
    }
}

/// Distinct rho values to realize, with the labels of their reward rows.
fn realization_targets<'a>(
    cfg: &ExperimentConfig,
    rows: &'a [RewardRow],
) -> Result<Vec<(Vec<String>, &'a RewardRow)>, CliError> {
    let mut out: Vec<(Vec<String>, &RewardRow)> = Vec::new();
    for row in rows {
        match out.last_mut() {
            Some((labels, first)) if first.rho == row.rho => labels.push(row.label.clone()),
            _ => out.push((vec![row.label.clone()], row)),
        }
    }
    if let Some(wanted) = &cfg.realization.rho {
        for w in wanted {
            if !out.iter().any(|(_, r)| (r.rho - w).abs() <= 1e-12) {
                return Err(CliError::Config(format!("realization rho {w} is not among the reward rows")));
            }
        }
        out.retain(|(_, r)| wanted.iter().any(|w| (r.rho - w).abs() <= 1e-12));
    }
    Ok(out)
}

pub fn realize(cfg: &ExperimentConfig, inputs: &Inputs, rows: &[RewardRow]) -> Result<Vec<RealizedRho>, CliError> {
    let realizer = Realizer::new(&inputs.model, &inputs.parties)?;
    let tolerance = cfg.realization.relative_tolerance * realizer.v_n().abs().max(1.0);
    let targets = realization_targets(cfg, rows)?;
    let results: Vec<RealizedRho> = targets
        .par_iter()
        .map(|(labels, row)| {
            let parties = row
                .allocation
                .rewards
                .par_iter()
                .enumerate()
                .map(|(i, &target)| match realizer.solve(i, target, tolerance) {
                    Ok(e) => PartyRealization::Solved(e),
                    Err(e) => PartyRealization::Failed { party: i, target, error: e.to_string() },
                })
                .collect();
            RealizedRho { labels: labels.clone(), rho: row.rho, tolerance, v_n: realizer.v_n(), parties }
        })
        .collect();
    for r in &results {
        for p in &r.parties {
            if let PartyRealization::Failed { party, error, .. } = p {
                warn!("rho {}: party {party} not realized: {error}", r.rho);
            }
        }
    }
    Ok(results)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluatedRho {
    pub rho: f64,
    pub report: EvaluationReport,
}

/// Evaluates every fully realized rho; others are skipped with a warning.
pub fn evaluate(
    cfg: &ExperimentConfig,
    inputs: &Inputs,
    realized: &[RealizedRho],
    sh: &ShapleyVector,
) -> Result<Vec<EvaluatedRho>, CliError> {
    let test = inputs.test.as_ref().ok_or_else(|| CliError::Config("evaluation needs a `test` source".into()))?;
    let jobs: Vec<(f64, model_reward::RealizationPlan)> = realized
        .iter()
        .filter_map(|r| match r.plan() {
            Some(p) => Some((r.rho, p)),
            None => {
                warn!("rho {}: skipped in evaluation, some parties were not realized", r.rho);
                None
            }
        })
        .collect();
    let rc = &cfg.realization;
    jobs.par_iter()
        .map(|(rho, plan)| {
            let mut report = evaluate_allocation(&inputs.model, &inputs.parties, plan, test, rc.realizations, rc.seed)?;
            report.annotate(*rho, sh);
            info!("evaluated rho {rho}");
            Ok(EvaluatedRho { rho: *rho, report })
        })
        .collect()
}
