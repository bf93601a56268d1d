use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::DataError;
use crate::models::Dataset;

/// Which parts of a dataset to standardize.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Standardize {
    #[serde(default)]
    pub inputs: bool,
    #[serde(default)]
    pub outputs: bool,
}

/// Column means and population standard deviations. `None` marks a part
/// that was left as is.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardizationParams {
    pub input_mean: Option<Vec<f64>>,
    pub input_std: Option<Vec<f64>>,
    pub output_mean: Option<f64>,
    pub output_std: Option<f64>,
}

fn mean_std(values: impl Iterator<Item = f64> + Clone, column: &str) -> Result<(f64, f64), DataError> {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    let std = (values.map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    if !(std > 0.0) {
        return Err(DataError::ConstantColumn(column.to_string()));
    }
    Ok((mean, std))
}

/// Standardizes the selected parts to zero mean and unit population
/// standard deviation (divisor `m`).
pub fn standardize(data: &Dataset, what: Standardize) -> Result<(Dataset, StandardizationParams), DataError> {
    let mut params = StandardizationParams { input_mean: None, input_std: None, output_mean: None, output_std: None };
    if what.inputs {
        let (mut means, mut stds) = (Vec::new(), Vec::new());
        for (c, col) in data.inputs().column_iter().enumerate() {
            let (m, s) = mean_std(col.iter().copied(), &format!("x{c}"))?;
            means.push(m);
            stds.push(s);
        }
        params.input_mean = Some(means);
        params.input_std = Some(stds);
    }
    if what.outputs {
        let (m, s) = mean_std(data.outputs().iter().copied(), "y")?;
        params.output_mean = Some(m);
        params.output_std = Some(s);
    }
    let out = params.apply(data)?;
    Ok((out, params))
}

impl StandardizationParams {
    /// Applies the stored transform, e.g. to a test set with training
    /// statistics.
    pub fn apply(&self, data: &Dataset) -> Result<Dataset, DataError> {
        self.map(data, |v, m, s| (v - m) / s)
    }

    /// Undoes [`apply`](Self::apply).
    pub fn invert(&self, data: &Dataset) -> Result<Dataset, DataError> {
        self.map(data, |v, m, s| v * s + m)
    }

    fn map(&self, data: &Dataset, f: impl Fn(f64, f64, f64) -> f64) -> Result<Dataset, DataError> {
        let mut x: DMatrix<f64> = data.inputs().clone();
        let mut y: DVector<f64> = data.outputs().clone();
        if let (Some(means), Some(stds)) = (&self.input_mean, &self.input_std) {
            if means.len() != data.dim() {
                return Err(DataError::Model(crate::models::ModelError::DimensionMismatch(format!(
                    "standardization has {} columns, data has {}",
                    means.len(),
                    data.dim()
                ))));
            }
            for (c, mut col) in x.column_iter_mut().enumerate() {
                col.apply(|v| *v = f(*v, means[c], stds[c]));
            }
        }
        if let (Some(m), Some(s)) = (self.output_mean, self.output_std) {
            y.apply(|v| *v = f(*v, m, s));
        }
        Ok(Dataset::new(x, y)?)
    }

    /// Maps a standardized output value back to the original scale.
    pub fn invert_output(&self, v: f64) -> f64 {
        match (self.output_mean, self.output_std) {
            (Some(m), Some(s)) => v * s + m,
            _ => v,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::friedman_generate;

    const BOTH: Standardize = Standardize { inputs: true, outputs: true };

    #[test]
    fn one_two_three() {
        let d = Dataset::from_rows(&[vec![1.0], vec![2.0], vec![3.0]], vec![1.0, 2.0, 3.0]).unwrap();
        let (s, p) = standardize(&d, BOTH).unwrap();
        let e = 1.0 / (2.0_f64 / 3.0).sqrt();
        for (got, want) in s.outputs().iter().zip([-e, 0.0, e]) {
            assert!((got - want).abs() < 1e-15);
        }
        assert!((s.outputs()[0] + 1.2247).abs() < 1e-4);
        assert_eq!(s.inputs().column(0), s.outputs().column(0));
        assert_eq!(p.output_mean, Some(2.0));
    }

    #[test]
    fn round_trip_and_idempotence() {
        let d = friedman_generate(200, 2);
        let (s, p) = standardize(&d, BOTH).unwrap();
        let back = p.invert(&s).unwrap();
        for (a, b) in back.inputs().iter().zip(d.inputs().iter()) {
            assert!((a - b).abs() < 1e-12);
        }
        for (a, b) in back.outputs().iter().zip(d.outputs().iter()) {
            assert!((a - b).abs() < 1e-12);
        }
        let (again, _) = standardize(&s, BOTH).unwrap();
        for (a, b) in again.inputs().iter().zip(s.inputs().iter()) {
            assert!((a - b).abs() < 1e-12);
        }
        for c in 0..6 {
            let col = s.inputs().column(c);
            assert!(col.mean().abs() < 1e-12);
            assert!((col.variance() - 1.0).abs() < 1e-12);
        }
        assert!((p.invert_output(s.outputs()[3]) - d.outputs()[3]).abs() < 1e-12);
    }

    #[test]
    fn selective_and_constant() {
        let d = Dataset::from_rows(&[vec![1.0, 5.0], vec![2.0, 5.0]], vec![0.0, 4.0]).unwrap();
        match standardize(&d, BOTH) {
            Err(DataError::ConstantColumn(c)) => assert_eq!(c, "x1"),
            other => panic!("{other:?}"),
        }
        let (s, p) = standardize(&d, Standardize { inputs: false, outputs: true }).unwrap();
        assert_eq!(s.inputs(), d.inputs());
        assert!(p.input_mean.is_none());
        assert_eq!(s.outputs().as_slice(), &[-1.0, 1.0]);
    }
}
