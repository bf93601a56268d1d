use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::ModelError;

/// Stationary covariance functions with automatic relevance determination
/// (one lengthscale per input feature).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum KernelSpec {
    /// `s2 * exp(-0.5 * sum_a ((x_a - x'_a) / l_a)^2)`
    SquaredExponential { signal_variance: f64, lengthscales: Vec<f64> },
    /// `s2 * exp(-sum_a |x_a - x'_a| / l_a)`
    Exponential { signal_variance: f64, lengthscales: Vec<f64> },
    /// Elementwise sum of two non-composite kernels.
    Sum { left: Box<KernelSpec>, right: Box<KernelSpec> },
}

impl KernelSpec {
    pub fn squared_exponential(signal_variance: f64, lengthscales: Vec<f64>) -> Self {
        KernelSpec::SquaredExponential { signal_variance, lengthscales }
    }

    pub fn exponential(signal_variance: f64, lengthscales: Vec<f64>) -> Self {
        KernelSpec::Exponential { signal_variance, lengthscales }
    }

    pub fn sum(left: KernelSpec, right: KernelSpec) -> Self {
        KernelSpec::Sum { left: Box::new(left), right: Box::new(right) }
    }

    fn depth(&self) -> usize {
        match self {
            KernelSpec::Sum { left, right } => 1 + left.depth().max(right.depth()),
            _ => 1,
        }
    }

    /// Input dimension implied by the lengthscales.
    pub fn dim(&self) -> usize {
        match self {
            KernelSpec::SquaredExponential { lengthscales, .. } | KernelSpec::Exponential { lengthscales, .. } => {
                lengthscales.len()
            }
            KernelSpec::Sum { left, .. } => left.dim(),
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.depth() > 2 {
            return Err(ModelError::InvalidSpec("sum kernels may only combine two base kernels".into()));
        }
        match self {
            KernelSpec::SquaredExponential { signal_variance, lengthscales }
            | KernelSpec::Exponential { signal_variance, lengthscales } => {
                if !(signal_variance.is_finite() && *signal_variance > 0.0) {
                    return Err(ModelError::InvalidSpec(format!(
                        "signal variance must be positive, got {signal_variance}"
                    )));
                }
                if lengthscales.is_empty() {
                    return Err(ModelError::InvalidSpec("lengthscales must not be empty".into()));
                }
                if let Some(l) = lengthscales.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
                    return Err(ModelError::InvalidSpec(format!("lengthscale {l} must be positive")));
                }
                Ok(())
            }
            KernelSpec::Sum { left, right } => {
                left.validate()?;
                right.validate()?;
                if left.dim() != right.dim() {
                    return Err(ModelError::InvalidSpec(format!(
                        "summed kernels disagree on dimension: {} vs {}",
                        left.dim(),
                        right.dim()
                    )));
                }
                Ok(())
            }
        }
    }

    /// `k(x, x)`, identical for every `x` since all kernels are stationary.
    pub fn variance(&self) -> f64 {
        match self {
            KernelSpec::SquaredExponential { signal_variance, .. }
            | KernelSpec::Exponential { signal_variance, .. } => *signal_variance,
            KernelSpec::Sum { left, right } => left.variance() + right.variance(),
        }
    }

    fn accumulate(&self, a: &DMatrix<f64>, b: &DMatrix<f64>, out: &mut DMatrix<f64>) {
        match self {
            KernelSpec::SquaredExponential { signal_variance, lengthscales } => {
                fill(a, b, lengthscales, out, |diff| diff * diff, |s| signal_variance * (-0.5 * s).exp())
            }
            KernelSpec::Exponential { signal_variance, lengthscales } => {
                fill(a, b, lengthscales, out, f64::abs, |s| signal_variance * (-s).exp())
            }
            KernelSpec::Sum { left, right } => {
                left.accumulate(a, b, out);
                right.accumulate(a, b, out);
            }
        }
    }
}

fn fill(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    lengthscales: &[f64],
    out: &mut DMatrix<f64>,
    term: impl Fn(f64) -> f64,
    finish: impl Fn(f64) -> f64,
) {
    let d = lengthscales.len();
    let scale = |m: &DMatrix<f64>| -> Vec<f64> {
        // row-major, scaled by the lengthscales
        let mut v = Vec::with_capacity(m.nrows() * d);
        for i in 0..m.nrows() {
            for (k, l) in lengthscales.iter().enumerate() {
                v.push(m[(i, k)] / l);
            }
        }
        v
    };
    let sa = scale(a);
    let sb = scale(b);
    for j in 0..b.nrows() {
        let xb = &sb[j * d..(j + 1) * d];
        for i in 0..a.nrows() {
            let xa = &sa[i * d..(i + 1) * d];
            let s: f64 = xa.iter().zip(xb).map(|(p, q)| term(p - q)).sum();
            out[(i, j)] += finish(s);
        }
    }
}

/// Cross-covariance matrix `K[i, j] = k(a_i, b_j)`.
pub fn kernel_matrix(kernel: &KernelSpec, a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>, ModelError> {
    let d = kernel.dim();
    if a.ncols() != d || b.ncols() != d {
        return Err(ModelError::DimensionMismatch(format!(
            "kernel has {d} lengthscales but inputs have {} and {} columns",
            a.ncols(),
            b.ncols()
        )));
    }
    let mut out = DMatrix::zeros(a.nrows(), b.nrows());
    kernel.accumulate(a, b, &mut out);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(1, v.len(), v)
    }

    #[test]
    fn zero_distance_gives_signal_variance() {
        let k = KernelSpec::squared_exponential(2.0, vec![0.3, 1.7]);
        let x = row(&[0.4, -1.0]);
        assert_eq!(kernel_matrix(&k, &x, &x).unwrap()[(0, 0)], 2.0);
    }

    #[test]
    fn unit_distance_se() {
        let k = KernelSpec::squared_exponential(1.0, vec![1.0]);
        let v = kernel_matrix(&k, &row(&[0.0]), &row(&[1.0])).unwrap()[(0, 0)];
        assert!((v - 0.606_530_659_712_633_4).abs() < 1e-15);
    }

    #[test]
    fn exponential_and_sum() {
        let e = KernelSpec::exponential(1.5, vec![2.0, 1.0]);
        let v = kernel_matrix(&e, &row(&[0.0, 0.0]), &row(&[1.0, -0.5])).unwrap()[(0, 0)];
        assert!((v - 1.5 * (-1.0_f64).exp()).abs() < 1e-15);
        let s = KernelSpec::sum(KernelSpec::squared_exponential(2.0, vec![1.0, 1.0]), e);
        let x = row(&[0.2, 0.2]);
        assert_eq!(kernel_matrix(&s, &x, &x).unwrap()[(0, 0)], 3.5);
        assert_eq!(s.variance(), 3.5);
    }

    #[test]
    fn symmetric_gram_matrix() {
        let k = KernelSpec::sum(
            KernelSpec::squared_exponential(1.0, vec![0.5, 2.0]),
            KernelSpec::exponential(0.3, vec![1.0, 1.0]),
        );
        let x = DMatrix::from_fn(6, 2, |i, j| ((i * 7 + j * 3) % 5) as f64 * 0.37);
        let g = kernel_matrix(&k, &x, &x).unwrap();
        assert_eq!(g, g.transpose());
    }

    #[test]
    fn validation() {
        assert!(KernelSpec::squared_exponential(0.0, vec![1.0]).validate().is_err());
        assert!(KernelSpec::squared_exponential(1.0, vec![1.0, -1.0]).validate().is_err());
        let leaf = KernelSpec::squared_exponential(1.0, vec![1.0]);
        let nested = KernelSpec::sum(KernelSpec::sum(leaf.clone(), leaf.clone()), leaf.clone());
        assert!(nested.validate().is_err());
        let k = KernelSpec::squared_exponential(1.0, vec![1.0]);
        assert!(kernel_matrix(&k, &DMatrix::zeros(1, 2), &DMatrix::zeros(1, 2)).is_err());
    }

    #[test]
    fn json_shape() {
        let k =
            KernelSpec::sum(KernelSpec::squared_exponential(1.0, vec![1.0]), KernelSpec::exponential(2.0, vec![3.0]));
        let text = serde_json::to_string(&k).unwrap();
        assert!(text.starts_with(r#"{"type":"sum","left":{"type":"squared_exponential""#));
        assert_eq!(serde_json::from_str::<KernelSpec>(&text).unwrap(), k);
    }
}
