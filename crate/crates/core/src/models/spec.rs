use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::kernel::KernelSpec;
use super::ModelError;

/// A Bayesian regression model with fixed hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ModelSpec {
    /// Linear regression `y = x^T theta + noise` with prior `theta ~ N(mean, cov)`.
    Blr {
        /// Defaults to the zero vector when omitted.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        prior_mean: Option<Vec<f64>>,
        #[serde(with = "matrix_rows")]
        prior_cov: DMatrix<f64>,
        noise_variance: f64,
    },
    /// Full-rank zero-mean GP.
    Gp { kernel: KernelSpec, noise_variance: f64 },
    /// Deterministic training conditional sparse GP on fixed inducing inputs.
    SparseDtc {
        kernel: KernelSpec,
        noise_variance: f64,
        #[serde(with = "matrix_rows")]
        inducing_inputs: DMatrix<f64>,
    },
}

impl ModelSpec {
    pub fn blr(prior_cov: DMatrix<f64>, noise_variance: f64) -> Self {
        ModelSpec::Blr { prior_mean: None, prior_cov, noise_variance }
    }

    pub fn gp(kernel: KernelSpec, noise_variance: f64) -> Self {
        ModelSpec::Gp { kernel, noise_variance }
    }

    pub fn sparse_dtc(kernel: KernelSpec, noise_variance: f64, inducing_inputs: DMatrix<f64>) -> Self {
        ModelSpec::SparseDtc { kernel, noise_variance, inducing_inputs }
    }

    pub fn noise_variance(&self) -> f64 {
        match self {
            ModelSpec::Blr { noise_variance, .. }
            | ModelSpec::Gp { noise_variance, .. }
            | ModelSpec::SparseDtc { noise_variance, .. } => *noise_variance,
        }
    }

    /// Input dimension expected by the model.
    pub fn dim(&self) -> usize {
        match self {
            ModelSpec::Blr { prior_cov, .. } => prior_cov.nrows(),
            ModelSpec::Gp { kernel, .. } | ModelSpec::SparseDtc { kernel, .. } => kernel.dim(),
        }
    }

    pub(crate) fn prior_mean_vector(&self) -> Option<DVector<f64>> {
        match self {
            ModelSpec::Blr { prior_mean, prior_cov, .. } => Some(match prior_mean {
                Some(m) => DVector::from_column_slice(m),
                None => DVector::zeros(prior_cov.nrows()),
            }),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let s2 = self.noise_variance();
        if !(s2.is_finite() && s2 > 0.0) {
            return Err(ModelError::InvalidSpec(format!("noise variance must be positive, got {s2}")));
        }
        match self {
            ModelSpec::Blr { prior_mean, prior_cov, .. } => {
                let d = prior_cov.nrows();
                if d == 0 || prior_cov.ncols() != d {
                    return Err(ModelError::InvalidSpec("prior covariance must be square and non-empty".into()));
                }
                if prior_cov.iter().any(|v| !v.is_finite()) {
                    return Err(ModelError::InvalidSpec("prior covariance has non-finite entries".into()));
                }
                let asym = (prior_cov - prior_cov.transpose()).amax();
                if asym > 1e-12 * prior_cov.amax().max(1.0) {
                    return Err(ModelError::InvalidSpec(format!("prior covariance is not symmetric (gap {asym:e})")));
                }
                if let Some(m) = prior_mean {
                    if m.len() != d {
                        return Err(ModelError::InvalidSpec(format!(
                            "prior mean has length {} but covariance is {d}x{d}",
                            m.len()
                        )));
                    }
                }
                Ok(())
            }
            ModelSpec::Gp { kernel, .. } => kernel.validate(),
            ModelSpec::SparseDtc { kernel, inducing_inputs, .. } => {
                kernel.validate()?;
                if inducing_inputs.nrows() == 0 {
                    return Err(ModelError::InvalidSpec("DTC needs at least one inducing input".into()));
                }
                if inducing_inputs.ncols() != kernel.dim() {
                    return Err(ModelError::InvalidSpec(format!(
                        "inducing inputs have {} columns, kernel expects {}",
                        inducing_inputs.ncols(),
                        kernel.dim()
                    )));
                }
                Ok(())
            }
        }
    }

    pub(crate) fn check_inputs(&self, inputs: &DMatrix<f64>) -> Result<(), ModelError> {
        if inputs.ncols() != self.dim() {
            return Err(ModelError::DimensionMismatch(format!(
                "model expects {} input columns, got {}",
                self.dim(),
                inputs.ncols()
            )));
        }
        Ok(())
    }
}

/// Per-observation noise variances (the diagonal of the noise covariance).
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseVector(Vec<f64>);

impl NoiseVector {
    pub fn new(variances: Vec<f64>) -> Result<Self, ModelError> {
        if let Some((i, v)) = variances.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v > 0.0)) {
            return Err(ModelError::InvalidNoise(format!("variance {i} is {v}")));
        }
        Ok(Self(variances))
    }

    pub fn homoscedastic(len: usize, variance: f64) -> Result<Self, ModelError> {
        Self::new(vec![variance; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

pub(crate) mod matrix_rows {
    use super::*;

    pub fn serialize<S: Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<f64>> = m.row_iter().map(|r| r.iter().copied().collect()).collect();
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DMatrix<f64>, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        let ncols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != ncols) {
            return Err(serde::de::Error::custom("matrix rows have different lengths"));
        }
        Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
    }
}
