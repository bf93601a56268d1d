//! Predictive evaluation: MNLP, per-party reward reports and the
//! MNLP-based characteristic function.

use std::io::Write;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::game::{CharacteristicFunction, GameError, ShapleyVector};
use crate::models::{check_parties, Dataset, ModelError, ModelSpec, NoiseVector, Posterior, PredictiveDistribution};
use crate::realize::{sample_noisy_outputs, Eta, RealizationError, RealizationPlan};
use crate::{par, rng};

/// Normal quantile for two-sided 95% intervals.
pub const Z_95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Realization(#[from] RealizationError),
    #[error(transparent)]
    Game(#[from] GameError),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("party {party}{}: {source}", realization.map(|r| format!(", realization {r}")).unwrap_or_default())]
    At { party: usize, realization: Option<usize>, source: Box<EvalError> },
    #[error("CSV output: {0}")]
    Csv(String),
}

impl EvalError {
    fn at(self, party: usize, realization: Option<usize>) -> Self {
        EvalError::At { party, realization, source: Box::new(self) }
    }
}

/// Mean negative log predictive probability of `outputs`.
pub fn mnlp(pred: &PredictiveDistribution, outputs: &[f64]) -> Result<f64, EvalError> {
    if pred.len() != outputs.len() {
        return Err(EvalError::DimensionMismatch(format!("{} predictions for {} outputs", pred.len(), outputs.len())));
    }
    if outputs.is_empty() {
        return Err(EvalError::InvalidInput("MNLP needs at least one test point".into()));
    }
    if let Some(v) = pred.variances.iter().find(|v| !(**v > 0.0)) {
        return Err(EvalError::InvalidInput(format!("predictive variance {v} is not positive")));
    }
    let ln_2pi = (2.0 * std::f64::consts::PI).ln();
    let total: f64 = pred
        .means
        .iter()
        .zip(&pred.variances)
        .zip(outputs)
        .map(|((mu, var), y)| 0.5 * (ln_2pi + var.ln() + (mu - y).powi(2) / var))
        .sum();
    Ok(total / outputs.len() as f64)
}

fn fit_mnlp(
    model: &ModelSpec,
    inputs: &nalgebra::DMatrix<f64>,
    outputs: &DVector<f64>,
    noise: &NoiseVector,
    test: &Dataset,
) -> Result<f64, EvalError> {
    let pred = Posterior::fit(model, inputs, noise)?.at(test.inputs())?.predict(outputs)?;
    mnlp(&pred, test.outputs().as_slice())
}

/// One party under one noise realization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationRecord {
    pub party: usize,
    pub realization: usize,
    pub r_i: f64,
    pub v_i: f64,
    #[serde(rename = "v_N")]
    pub v_n: f64,
    pub ig_impr: f64,
    pub ig_max_impr: f64,
    pub mnlp_own: f64,
    pub mnlp_reward: f64,
    pub mnlp_grand: f64,
    pub mnlp_impr: f64,
    pub mnlp_max_impr: f64,
    pub rho: Option<f64>,
    pub phi_ratio: Option<f64>,
    pub eta: Eta,
}

/// Per-party aggregate over realizations. Confidence half-widths use the
/// normal approximation `1.96 * SE` (0 with a single realization).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartySummary {
    pub party: usize,
    pub realizations: usize,
    pub rho: Option<f64>,
    pub phi_ratio: Option<f64>,
    pub r_i: f64,
    pub v_i: f64,
    #[serde(rename = "v_N")]
    pub v_n: f64,
    pub ig_impr: f64,
    pub ig_max_impr: f64,
    pub mnlp_own: f64,
    pub mnlp_grand: f64,
    pub mnlp_reward_mean: f64,
    pub mnlp_reward_ci95: f64,
    pub mnlp_impr_mean: f64,
    pub mnlp_impr_ci95: f64,
    pub mnlp_max_impr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub records: Vec<EvaluationRecord>,
    pub summary: Vec<PartySummary>,
}

fn mean_ci(values: &[f64]) -> (f64, f64) {
    if values.iter().all(|v| *v == values[0]) {
        return (values[0], 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, Z_95 * (var / n).sqrt())
}

impl EvaluationReport {
    /// Attaches the operating rho and each party's `phi_i / phi*`.
    pub fn annotate(&mut self, rho: f64, shapley: &ShapleyVector) {
        let ratio = |i: usize| if shapley.phi_star > 0.0 { Some(shapley.phi[i] / shapley.phi_star) } else { None };
        for r in &mut self.records {
            r.rho = Some(rho);
            r.phi_ratio = ratio(r.party);
        }
        for s in &mut self.summary {
            s.rho = Some(rho);
            s.phi_ratio = ratio(s.party);
        }
    }

    pub fn write_records_csv(&self, w: impl Write) -> Result<(), EvalError> {
        write_rows(w, &self.records)
    }

    pub fn write_summary_csv(&self, w: impl Write) -> Result<(), EvalError> {
        write_rows(w, &self.summary)
    }
}

/// Writes rows with a header; an empty slice still gets the header.
pub fn write_rows<T: Serialize>(w: impl Write, rows: &[T]) -> Result<(), EvalError> {
    let err = |e: csv::Error| EvalError::Csv(e.to_string());
    let mut wr = csv::WriterBuilder::new().has_headers(true).from_writer(w);
    for r in rows {
        wr.serialize(r).map_err(err)?;
    }
    wr.flush().map_err(|e| EvalError::Csv(e.to_string()))
}

/// Evaluates each party's realized reward model on `test` over
/// `realizations` independent noise draws. Realization `k` uses the seed
/// `derive_seed(seed, "realization", [k])`, shared by all parties and
/// independent of the plan, so runs at different rho see the same
/// standardized noise.
pub fn evaluate_allocation(
    model: &ModelSpec,
    parties: &[Dataset],
    plan: &RealizationPlan,
    test: &Dataset,
    realizations: usize,
    seed: u64,
) -> Result<EvaluationReport, EvalError> {
    check_parties(model, parties)?;
    let n = parties.len();
    if plan.n() != n {
        return Err(EvalError::InvalidInput(format!("plan has {} entries for {n} parties", plan.n())));
    }
    if realizations == 0 {
        return Err(EvalError::InvalidInput("at least one realization is required".into()));
    }
    let s2 = model.noise_variance();
    let pooled = Dataset::concat(parties)?;
    let grand_noise = NoiseVector::homoscedastic(pooled.len(), s2)?;
    let mnlp_grand = fit_mnlp(model, pooled.inputs(), pooled.outputs(), &grand_noise, test)?;

    let per_party = par::map((0..n).collect(), |i| -> Result<Vec<EvaluationRecord>, EvalError> {
        let entry = &plan.entries[i];
        let own = &parties[i];
        let own_noise = NoiseVector::homoscedastic(own.len(), s2)?;
        let mnlp_own = fit_mnlp(model, own.inputs(), own.outputs(), &own_noise, test).map_err(|e| e.at(i, None))?;

        // the reward training inputs and noise do not change across draws
        let first = sample_noisy_outputs(model, parties, i, entry.eta, rng::derive_seed(seed, "realization", &[0]))?;
        let post = Posterior::fit(model, &first.inputs, &first.noise).map_err(|e| EvalError::from(e).at(i, None))?;
        let at = post.at(test.inputs())?;
        (0..realizations)
            .map(|k| {
                let outputs = if k == 0 {
                    first.outputs.clone()
                } else {
                    sample_noisy_outputs(
                        model,
                        parties,
                        i,
                        entry.eta,
                        rng::derive_seed(seed, "realization", &[k as u64]),
                    )?
                    .outputs
                };
                let pred = at.predict(&outputs).map_err(|e| EvalError::from(e).at(i, Some(k)))?;
                let mnlp_reward = mnlp(&pred, test.outputs().as_slice()).map_err(|e| e.at(i, Some(k)))?;
                Ok(EvaluationRecord {
                    party: i,
                    realization: k,
                    r_i: entry.target,
                    v_i: entry.own_value,
                    v_n: plan.v_n,
                    ig_impr: entry.target - entry.own_value,
                    ig_max_impr: plan.v_n - entry.own_value,
                    mnlp_own,
                    mnlp_reward,
                    mnlp_grand,
                    mnlp_impr: mnlp_own - mnlp_reward,
                    mnlp_max_impr: mnlp_own - mnlp_grand,
                    rho: None,
                    phi_ratio: None,
                    eta: entry.eta,
                })
            })
            .collect()
    });

    let mut records = Vec::with_capacity(n * realizations);
    let mut summary = Vec::with_capacity(n);
    for rows in per_party {
        let rows = rows?;
        let first = &rows[0];
        let reward: Vec<f64> = rows.iter().map(|r| r.mnlp_reward).collect();
        let impr: Vec<f64> = rows.iter().map(|r| r.mnlp_impr).collect();
        let (mnlp_reward_mean, mnlp_reward_ci95) = mean_ci(&reward);
        let (mnlp_impr_mean, mnlp_impr_ci95) = mean_ci(&impr);
        summary.push(PartySummary {
            party: first.party,
            realizations,
            rho: None,
            phi_ratio: None,
            r_i: first.r_i,
            v_i: first.v_i,
            v_n: first.v_n,
            ig_impr: first.ig_impr,
            ig_max_impr: first.ig_max_impr,
            mnlp_own: first.mnlp_own,
            mnlp_grand: first.mnlp_grand,
            mnlp_reward_mean,
            mnlp_reward_ci95,
            mnlp_impr_mean,
            mnlp_impr_ci95,
            mnlp_max_impr: first.mnlp_max_impr,
        });
        records.extend(rows);
    }
    Ok(EvaluationReport { records, summary })
}

/// `v'_C = MNLP_empty - MNLP_C` on `validation`, where `MNLP_C` trains on
/// the pooled data of `C` and `MNLP_empty` is the prior predictive.
pub fn mnlp_characteristic_function(
    model: &ModelSpec,
    parties: &[Dataset],
    validation: &Dataset,
) -> Result<CharacteristicFunction, EvalError> {
    check_parties(model, parties)?;
    if validation.is_empty() {
        return Err(EvalError::InvalidInput("validation set is empty".into()));
    }
    let n = parties.len();
    let s2 = model.noise_variance();
    let masks: Vec<u32> = (0..(1u32 << n)).collect();
    let scores = par::map(masks, |mask| -> Result<f64, EvalError> {
        let members: Vec<&Dataset> = (0..n).filter(|i| mask & (1 << i) != 0).map(|i| &parties[i]).collect();
        let data = if members.is_empty() { Dataset::empty(model.dim()) } else { Dataset::concat(members)? };
        let noise = NoiseVector::homoscedastic(data.len(), s2)?;
        fit_mnlp(model, data.inputs(), data.outputs(), &noise, validation)
    });
    let scores = scores.into_iter().collect::<Result<Vec<f64>, _>>()?;
    let empty = scores[0];
    let values: Vec<f64> = scores.iter().enumerate().map(|(m, s)| if m == 0 { 0.0 } else { empty - s }).collect();
    Ok(CharacteristicFunction::new(n, values)?)
}

/// Normalized data values and Shapley values under two valuations. A field
/// is `None` when its denominator is zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizedRow {
    pub party: usize,
    pub value_ig: Option<f64>,
    pub value_mnlp: Option<f64>,
    pub shapley_ig: Option<f64>,
    pub shapley_mnlp: Option<f64>,
    pub flagged: bool,
}

pub fn normalized_comparison(
    cf_ig: &CharacteristicFunction,
    cf_mnlp: &CharacteristicFunction,
    shapley_ig: &ShapleyVector,
    shapley_mnlp: &ShapleyVector,
) -> Result<Vec<NormalizedRow>, EvalError> {
    let n = cf_ig.n();
    if cf_mnlp.n() != n || shapley_ig.n() != n || shapley_mnlp.n() != n {
        return Err(EvalError::DimensionMismatch("games and Shapley vectors must share n".into()));
    }
    let ratio = |a: f64, b: f64| if b != 0.0 { Some(a / b) } else { None };
    let sum_ig: f64 = (0..n).map(|i| cf_ig.singleton(i)).sum();
    let sum_mnlp: f64 = (0..n).map(|i| cf_mnlp.singleton(i)).sum();
    Ok((0..n)
        .map(|i| {
            let row = NormalizedRow {
                party: i,
                value_ig: ratio(cf_ig.singleton(i), sum_ig),
                value_mnlp: ratio(cf_mnlp.singleton(i), sum_mnlp),
                shapley_ig: ratio(shapley_ig.phi[i], cf_ig.grand_value()),
                shapley_mnlp: ratio(shapley_mnlp.phi[i], cf_mnlp.grand_value()),
                flagged: false,
            };
            let flagged = [row.value_ig, row.value_mnlp, row.shapley_ig, row.shapley_mnlp].iter().any(Option::is_none);
            NormalizedRow { flagged, ..row }
        })
        .collect())
}

#[cfg(test)]
mod tests;
