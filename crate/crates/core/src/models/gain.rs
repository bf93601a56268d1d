use nalgebra::DMatrix;

use super::dataset::Dataset;
use super::kernel::kernel_matrix;
use super::linalg::{cholesky, log_det, solve_lower, symmetrize};
use super::spec::{ModelSpec, NoiseVector};
use super::ModelError;
use crate::game::{CharacteristicFunction, GameError, EXACT_SHAPLEY_LIMIT};
use crate::par;

/// Gains this far below zero are treated as rounding and clamped.
const NEGATIVE_GAIN_SLACK: f64 = 1e-9;

/// Noise-independent part of the information gain for a fixed input matrix.
///
/// The latent covariance of the training outputs is either held in full
/// (`K_XX` for a full GP) or as a factor `Phi` with covariance `Phi Phi^T`
/// (`X L0` for linear regression, `K_XU L_U^{-T}` for DTC). Evaluating the gain
/// for a noise vector then costs one Cholesky factorization.
#[derive(Debug, Clone)]
pub struct GainOperator {
    kind: GainKind,
}

#[derive(Debug, Clone)]
enum GainKind {
    Factor(DMatrix<f64>),
    Full(DMatrix<f64>),
}

impl GainOperator {
    pub fn new(model: &ModelSpec, inputs: &DMatrix<f64>) -> Result<Self, ModelError> {
        model.validate()?;
        model.check_inputs(inputs)?;
        let kind = match model {
            ModelSpec::Blr { prior_cov, .. } => {
                let l0 = cholesky(prior_cov.clone(), "prior covariance")?;
                GainKind::Factor(inputs * l0.l())
            }
            ModelSpec::Gp { kernel, .. } => GainKind::Full(kernel_matrix(kernel, inputs, inputs)?),
            ModelSpec::SparseDtc { kernel, inducing_inputs, .. } => {
                let kuu = kernel_matrix(kernel, inducing_inputs, inducing_inputs)?;
                let lu = cholesky(kuu, "inducing covariance K_UU")?;
                let kux = kernel_matrix(kernel, inducing_inputs, inputs)?;
                GainKind::Factor(solve_lower(&lu, &kux).transpose())
            }
        };
        Ok(Self { kind })
    }

    pub fn rows(&self) -> usize {
        match &self.kind {
            GainKind::Factor(phi) => phi.nrows(),
            GainKind::Full(k) => k.nrows(),
        }
    }

    /// The operator for the sub-dataset made of `rows`, in that order.
    pub fn restrict(&self, rows: &[usize]) -> Self {
        let kind = match &self.kind {
            GainKind::Factor(phi) => GainKind::Factor(phi.select_rows(rows)),
            GainKind::Full(k) => GainKind::Full(k.select_rows(rows).select_columns(rows)),
        };
        Self { kind }
    }

    /// `0.5 log det(I + K_noise^{-1/2} M K_noise^{-1/2})` where `M` is the
    /// latent covariance of the training outputs.
    pub fn gain(&self, noise: &NoiseVector) -> Result<f64, ModelError> {
        let m = self.rows();
        if noise.len() != m {
            return Err(ModelError::DimensionMismatch(format!(
                "noise vector has {} entries for {m} rows",
                noise.len()
            )));
        }
        if m == 0 {
            return Ok(0.0);
        }
        let inv_sd: Vec<f64> = noise.as_slice().iter().map(|v| 1.0 / v.sqrt()).collect();
        let mut a = match &self.kind {
            GainKind::Factor(phi) => {
                let mut psi = phi.clone();
                for (i, mut row) in psi.row_iter_mut().enumerate() {
                    row *= inv_sd[i];
                }
                let mut a = psi.tr_mul(&psi);
                for i in 0..a.nrows() {
                    a[(i, i)] += 1.0;
                }
                a
            }
            GainKind::Full(k) => DMatrix::from_fn(m, m, |i, j| {
                let v = k[(i, j)] * inv_sd[i] * inv_sd[j];
                if i == j {
                    v + 1.0
                } else {
                    v
                }
            }),
        };
        symmetrize(&mut a);
        let chol = cholesky(a, "I + K_noise^-1/2 M K_noise^-1/2")?;
        let gain = 0.5 * log_det(&chol);
        if gain >= 0.0 {
            Ok(gain)
        } else if gain >= -NEGATIVE_GAIN_SLACK {
            Ok(0.0)
        } else {
            Err(ModelError::NegativeGain(gain))
        }
    }
}

/// Information gain on the model parameters from observing outputs at
/// `inputs` with per-row noise variances `noise`. Independent of the outputs.
pub fn information_gain(model: &ModelSpec, inputs: &DMatrix<f64>, noise: &NoiseVector) -> Result<f64, ModelError> {
    if noise.len() != inputs.nrows() {
        return Err(ModelError::DimensionMismatch(format!(
            "noise vector has {} entries for {} rows",
            noise.len(),
            inputs.nrows()
        )));
    }
    GainOperator::new(model, inputs)?.gain(noise)
}

/// Row indices of each party inside the ascending-party concatenation.
pub(crate) fn party_row_ranges(parties: &[Dataset]) -> Vec<std::ops::Range<usize>> {
    let mut at = 0;
    parties
        .iter()
        .map(|p| {
            let r = at..at + p.len();
            at += p.len();
            r
        })
        .collect()
}

pub(crate) fn check_parties(model: &ModelSpec, parties: &[Dataset]) -> Result<(), ModelError> {
    let n = parties.len();
    if n == 0 || n > EXACT_SHAPLEY_LIMIT {
        return Err(GameError::PartyCount(n).into());
    }
    let d = model.dim();
    if let Some((i, p)) = parties.iter().enumerate().find(|(_, p)| p.dim() != d) {
        return Err(ModelError::DimensionMismatch(format!(
            "party {i} has {} input columns, model expects {d}",
            p.dim()
        )));
    }
    Ok(())
}

/// Rows of the coalition `mask`, parties in ascending order.
pub(crate) fn coalition_rows(ranges: &[std::ops::Range<usize>], mask: u32) -> Vec<usize> {
    ranges.iter().enumerate().filter(|(i, _)| mask & (1 << i) != 0).flat_map(|(_, r)| r.clone()).collect()
}

/// Information-gain value of every coalition's pooled inputs under
/// homoscedastic noise.
pub fn coalition_values(model: &ModelSpec, parties: &[Dataset]) -> Result<CharacteristicFunction, ModelError> {
    check_parties(model, parties)?;
    let n = parties.len();
    let pooled = Dataset::concat(parties)?;
    let op = GainOperator::new(model, pooled.inputs())?;
    let ranges = party_row_ranges(parties);
    let s2 = model.noise_variance();
    let masks: Vec<u32> = (1..(1u32 << n)).collect();
    let gains = par::map(masks, |mask| {
        let rows = coalition_rows(&ranges, mask);
        let noise = NoiseVector::homoscedastic(rows.len(), s2)?;
        op.restrict(&rows).gain(&noise)
    });
    let mut values = Vec::with_capacity(1 << n);
    values.push(0.0);
    for g in gains {
        values.push(g?);
    }
    Ok(CharacteristicFunction::new(n, values)?)
}
