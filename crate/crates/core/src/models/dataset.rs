use nalgebra::{DMatrix, DVector};

use super::ModelError;

/// Regression data: an `m x d` input matrix and `m` outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    inputs: DMatrix<f64>,
    outputs: DVector<f64>,
}

impl Dataset {
    pub fn new(inputs: DMatrix<f64>, outputs: DVector<f64>) -> Result<Self, ModelError> {
        if inputs.nrows() != outputs.len() {
            return Err(ModelError::InvalidData(format!(
                "{} input rows but {} outputs",
                inputs.nrows(),
                outputs.len()
            )));
        }
        if let Some(pos) = inputs.iter().position(|v| !v.is_finite()) {
            let (r, c) = (pos % inputs.nrows().max(1), pos / inputs.nrows().max(1));
            return Err(ModelError::InvalidData(format!("input ({r}, {c}) is not finite")));
        }
        if let Some(r) = outputs.iter().position(|v| !v.is_finite()) {
            return Err(ModelError::InvalidData(format!("output {r} is not finite")));
        }
        Ok(Self { inputs, outputs })
    }

    pub fn from_rows(rows: &[Vec<f64>], outputs: Vec<f64>) -> Result<Self, ModelError> {
        let d = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != d) {
            return Err(ModelError::InvalidData("ragged input rows".into()));
        }
        let inputs = DMatrix::from_fn(rows.len(), d, |i, j| rows[i][j]);
        Self::new(inputs, DVector::from_vec(outputs))
    }

    pub fn empty(dim: usize) -> Self {
        Self { inputs: DMatrix::zeros(0, dim), outputs: DVector::zeros(0) }
    }

    pub fn len(&self) -> usize {
        self.outputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outputs.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.inputs.ncols()
    }

    pub fn inputs(&self) -> &DMatrix<f64> {
        &self.inputs
    }

    pub fn outputs(&self) -> &DVector<f64> {
        &self.outputs
    }

    pub fn into_parts(self) -> (DMatrix<f64>, DVector<f64>) {
        (self.inputs, self.outputs)
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.inputs.row(i).iter().copied().collect()
    }

    /// Rows at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Self {
        Self { inputs: self.inputs.select_rows(indices), outputs: self.outputs.select_rows(indices) }
    }

    /// Row-wise concatenation. All parts must share the input dimension.
    pub fn concat<'a>(parts: impl IntoIterator<Item = &'a Dataset>) -> Result<Self, ModelError> {
        let parts: Vec<&Dataset> = parts.into_iter().collect();
        let Some(first) = parts.first() else {
            return Ok(Self::empty(0));
        };
        let d = first.dim();
        if let Some(bad) = parts.iter().find(|p| p.dim() != d) {
            return Err(ModelError::DimensionMismatch(format!(
                "cannot concatenate datasets of dimension {d} and {}",
                bad.dim()
            )));
        }
        let m: usize = parts.iter().map(|p| p.len()).sum();
        let mut inputs = DMatrix::zeros(m, d);
        let mut outputs = DVector::zeros(m);
        let mut at = 0;
        for p in parts {
            inputs.rows_mut(at, p.len()).copy_from(&p.inputs);
            outputs.rows_mut(at, p.len()).copy_from(&p.outputs);
            at += p.len();
        }
        Ok(Self { inputs, outputs })
    }

    pub fn with_outputs(&self, outputs: DVector<f64>) -> Result<Self, ModelError> {
        Self::new(self.inputs.clone(), outputs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation_and_concat() {
        assert!(Dataset::new(DMatrix::zeros(2, 1), DVector::zeros(3)).is_err());
        assert!(Dataset::from_rows(&[vec![1.0, f64::NAN]], vec![0.0]).is_err());
        let a = Dataset::from_rows(&[vec![1.0, 2.0]], vec![3.0]).unwrap();
        let b = Dataset::from_rows(&[vec![4.0, 5.0], vec![6.0, 7.0]], vec![8.0, 9.0]).unwrap();
        let c = Dataset::concat([&a, &Dataset::empty(2), &b]).unwrap();
        assert_eq!(c.len(), 3);
        assert_eq!(c.row(2), vec![6.0, 7.0]);
        assert_eq!(c.outputs()[1], 8.0);
        assert!(Dataset::concat([&a, &Dataset::empty(3)]).is_err());
        assert_eq!(c.select(&[2, 0]).outputs().as_slice(), &[9.0, 3.0]);
    }
}
