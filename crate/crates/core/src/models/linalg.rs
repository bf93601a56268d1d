use nalgebra::{Cholesky, DMatrix, Dyn};

use super::ModelError;

const JITTER_START: f64 = 1e-10;
const JITTER_MAX: f64 = 1e-6;

pub(crate) type Chol = Cholesky<f64, Dyn>;

pub(crate) fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Cholesky factor of a symmetric matrix. A plain factorization is tried
/// first; on failure `c * trace/n` is added to the diagonal with `c` growing
/// tenfold from 1e-10 to 1e-6.
pub(crate) fn cholesky(m: DMatrix<f64>, what: &str) -> Result<Chol, ModelError> {
    let n = m.nrows();
    if let Some(c) = Cholesky::new(m.clone()) {
        return Ok(c);
    }
    let diag = m.diagonal();
    let scale = if n == 0 { 1.0 } else { (diag.sum() / n as f64).abs().max(f64::MIN_POSITIVE) };
    let mut c = JITTER_START;
    while c <= JITTER_MAX * (1.0 + 1e-9) {
        let jitter = c * scale;
        let mut shifted = m.clone();
        for i in 0..n {
            shifted[(i, i)] += jitter;
        }
        if let Some(ch) = Cholesky::new(shifted) {
            return Ok(ch);
        }
        c *= 10.0;
    }
    Err(ModelError::NotPositiveDefinite {
        what: what.to_string(),
        size: n,
        jitter: JITTER_MAX * scale,
        min_diag: diag.min(),
        max_diag: diag.max(),
    })
}

/// `log det` from a Cholesky factor.
pub(crate) fn log_det(c: &Chol) -> f64 {
    2.0 * c.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>()
}

/// `L^{-1} b` for the lower factor of `c`.
pub(crate) fn solve_lower(c: &Chol, b: &DMatrix<f64>) -> DMatrix<f64> {
    let mut x = b.clone();
    c.l_dirty().solve_lower_triangular_mut(&mut x);
    x
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jitter_rescues_psd() {
        // rank one
        let v = DMatrix::from_column_slice(3, 1, &[1.0, 2.0, 3.0]);
        let m = &v * v.transpose();
        let c = cholesky(m, "rank one").unwrap();
        assert!(log_det(&c).is_finite());
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(matches!(cholesky(bad, "indefinite"), Err(ModelError::NotPositiveDefinite { .. })));
    }

    #[test]
    fn log_det_diagonal() {
        let m = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![2.0, 3.0]));
        let c = cholesky(m, "diag").unwrap();
        assert!((log_det(&c) - 6.0_f64.ln()).abs() < 1e-15);
    }
}
