use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::kernel::{kernel_matrix, KernelSpec};
use super::linalg::{cholesky, solve_lower, symmetrize, Chol};
use super::spec::{ModelSpec, NoiseVector};
use super::ModelError;

/// Gaussian predictive distribution of noisy outputs at test inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictiveDistribution {
    pub means: Vec<f64>,
    /// Include the observation noise, hence strictly positive.
    pub variances: Vec<f64>,
}

impl PredictiveDistribution {
    pub fn len(&self) -> usize {
        self.means.len()
    }

    pub fn is_empty(&self) -> bool {
        self.means.is_empty()
    }
}

/// Maps test inputs to the low-rank feature space of a factored posterior.
#[derive(Debug, Clone)]
enum FeatureMap {
    /// `phi(x) = L0^T x`, prior mean `x^T mu0`.
    Linear { l0: DMatrix<f64>, mean: DVector<f64> },
    /// `phi(x) = L_U^{-1} k(U, x)`, prior mean 0.
    Inducing { kernel: KernelSpec, inducing: DMatrix<f64>, lu: Chol },
}

#[derive(Debug, Clone)]
enum Kind {
    Full {
        kernel: KernelSpec,
        train: DMatrix<f64>,
        chol: Option<Chol>,
    },
    Factor {
        map: FeatureMap,
        phi: DMatrix<f64>,
        precision: Vec<f64>,
        /// Cholesky of `I + Phi^T W Phi`.
        chol: Chol,
        train_prior_mean: DVector<f64>,
    },
}

/// Posterior over the latent function given training inputs and noise.
/// Outputs are supplied later so one factorization serves many output draws.
#[derive(Debug, Clone)]
pub struct Posterior {
    noise_variance: f64,
    rows: usize,
    kind: Kind,
}

/// A [`Posterior`] specialised to a fixed set of test inputs. Predictive
/// variances are computed once; means are linear in the training outputs.
#[derive(Debug, Clone)]
pub struct PointPredictor<'a> {
    posterior: &'a Posterior,
    weights: DMatrix<f64>,
    prior_means: DVector<f64>,
    variances: Vec<f64>,
}

fn weighted_gram(phi: &DMatrix<f64>, precision: &[f64]) -> DMatrix<f64> {
    let mut psi = phi.clone();
    for (i, mut row) in psi.row_iter_mut().enumerate() {
        row *= precision[i].sqrt();
    }
    let mut a = psi.tr_mul(&psi);
    for i in 0..a.nrows() {
        a[(i, i)] += 1.0;
    }
    symmetrize(&mut a);
    a
}

impl Posterior {
    pub fn fit(model: &ModelSpec, inputs: &DMatrix<f64>, noise: &NoiseVector) -> Result<Self, ModelError> {
        model.validate()?;
        model.check_inputs(inputs)?;
        let m = inputs.nrows();
        if noise.len() != m {
            return Err(ModelError::DimensionMismatch(format!(
                "noise vector has {} entries for {m} rows",
                noise.len()
            )));
        }
        let kind = match model {
            ModelSpec::Gp { kernel, .. } => {
                let chol = if m == 0 {
                    None
                } else {
                    let mut ky = kernel_matrix(kernel, inputs, inputs)?;
                    for (i, v) in noise.as_slice().iter().enumerate() {
                        ky[(i, i)] += v;
                    }
                    Some(cholesky(ky, "training covariance K_XX + K_noise")?)
                };
                Kind::Full { kernel: kernel.clone(), train: inputs.clone(), chol }
            }
            ModelSpec::Blr { prior_cov, .. } => {
                let l0 = cholesky(prior_cov.clone(), "prior covariance")?.l();
                let mean = model.prior_mean_vector().expect("linear model has a prior mean");
                let phi = inputs * &l0;
                let train_prior_mean = inputs * &mean;
                Self::factor(FeatureMap::Linear { l0, mean }, phi, noise, train_prior_mean)?
            }
            ModelSpec::SparseDtc { kernel, inducing_inputs, .. } => {
                let kuu = kernel_matrix(kernel, inducing_inputs, inducing_inputs)?;
                let lu = cholesky(kuu, "inducing covariance K_UU")?;
                let kux = kernel_matrix(kernel, inducing_inputs, inputs)?;
                let phi = solve_lower(&lu, &kux).transpose();
                let map = FeatureMap::Inducing { kernel: kernel.clone(), inducing: inducing_inputs.clone(), lu };
                Self::factor(map, phi, noise, DVector::zeros(m))?
            }
        };
        Ok(Self { noise_variance: model.noise_variance(), rows: m, kind })
    }

    fn factor(
        map: FeatureMap,
        phi: DMatrix<f64>,
        noise: &NoiseVector,
        train_prior_mean: DVector<f64>,
    ) -> Result<Kind, ModelError> {
        let precision: Vec<f64> = noise.as_slice().iter().map(|v| 1.0 / v).collect();
        let chol = cholesky(weighted_gram(&phi, &precision), "I + Phi^T K_noise^-1 Phi")?;
        Ok(Kind::Factor { map, phi, precision, chol, train_prior_mean })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn at(&self, test: &DMatrix<f64>) -> Result<PointPredictor<'_>, ModelError> {
        let t = test.nrows();
        let s2 = self.noise_variance;
        match &self.kind {
            Kind::Full { kernel, train, chol } => {
                if test.ncols() != train.ncols() {
                    return Err(ModelError::DimensionMismatch(format!(
                        "test inputs have {} columns, model expects {}",
                        test.ncols(),
                        train.ncols()
                    )));
                }
                let prior = kernel.variance();
                let weights = match chol {
                    Some(c) => solve_lower(c, &kernel_matrix(kernel, train, test)?),
                    None => DMatrix::zeros(0, t),
                };
                let variances = weights.column_iter().map(|v| (prior - v.norm_squared()).max(0.0) + s2).collect();
                Ok(PointPredictor { posterior: self, weights, prior_means: DVector::zeros(t), variances })
            }
            Kind::Factor { map, chol, .. } => {
                let (features, prior_means, residual) = match map {
                    FeatureMap::Linear { l0, mean } => {
                        if test.ncols() != l0.nrows() {
                            return Err(ModelError::DimensionMismatch(format!(
                                "test inputs have {} columns, model expects {}",
                                test.ncols(),
                                l0.nrows()
                            )));
                        }
                        (l0.tr_mul(&test.transpose()), test * mean, vec![0.0; t])
                    }
                    FeatureMap::Inducing { kernel, inducing, lu } => {
                        let f = solve_lower(lu, &kernel_matrix(kernel, inducing, test)?);
                        let prior = kernel.variance();
                        let residual = f.column_iter().map(|c| (prior - c.norm_squared()).max(0.0)).collect();
                        (f, DVector::zeros(t), residual)
                    }
                };
                let weights = solve_lower(chol, &features);
                let variances = weights.column_iter().zip(residual).map(|(g, r)| r + g.norm_squared() + s2).collect();
                Ok(PointPredictor { posterior: self, weights, prior_means, variances })
            }
        }
    }
}

impl PointPredictor<'_> {
    pub fn variances(&self) -> &[f64] {
        &self.variances
    }

    pub fn predict(&self, outputs: &DVector<f64>) -> Result<PredictiveDistribution, ModelError> {
        let post = self.posterior;
        if outputs.len() != post.rows {
            return Err(ModelError::DimensionMismatch(format!(
                "{} training outputs for {} training rows",
                outputs.len(),
                post.rows
            )));
        }
        let means = match &post.kind {
            Kind::Full { chol: None, .. } => self.prior_means.clone(),
            Kind::Full { chol: Some(c), .. } => {
                let alpha = solve_lower(c, &DMatrix::from_column_slice(outputs.len(), 1, outputs.as_slice()));
                &self.prior_means + self.weights.tr_mul(&alpha).column(0)
            }
            Kind::Factor { phi, precision, chol, train_prior_mean, .. } => {
                let r = DVector::from_fn(outputs.len(), |i, _| (outputs[i] - train_prior_mean[i]) * precision[i]);
                let proj = phi.tr_mul(&r);
                let h = solve_lower(chol, &DMatrix::from_column_slice(proj.len(), 1, proj.as_slice()));
                &self.prior_means + self.weights.tr_mul(&h).column(0)
            }
        };
        Ok(PredictiveDistribution { means: means.iter().copied().collect(), variances: self.variances.clone() })
    }
}

/// Posterior predictive distribution at `test_inputs` after training on
/// `(train_inputs, train_outputs)` with per-row noise `noise`. With no
/// training rows this is the prior predictive.
pub fn posterior_predict(
    model: &ModelSpec,
    train_inputs: &DMatrix<f64>,
    train_outputs: &DVector<f64>,
    noise: &NoiseVector,
    test_inputs: &DMatrix<f64>,
) -> Result<PredictiveDistribution, ModelError> {
    Posterior::fit(model, train_inputs, noise)?.at(test_inputs)?.predict(train_outputs)
}
