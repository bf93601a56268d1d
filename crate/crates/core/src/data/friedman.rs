use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::models::Dataset;
use crate::rng;

pub const FRIEDMAN_DIM: usize = 6;

/// Noiseless Friedman response. The sixth feature is ignored.
pub fn friedman_mean(x: &[f64]) -> f64 {
    10.0 * (std::f64::consts::PI * x[0] * x[1]).sin() + 20.0 * (x[2] - 0.5).powi(2) + 10.0 * x[3] + 5.0 * x[4]
}

/// `m` points with six uniform features on `[0, 1]` and unit Gaussian noise
/// on the response.
pub fn friedman_generate(m: usize, seed: u64) -> Dataset {
    let mut inputs_rng = rng::stream(seed, "friedman-inputs", &[]);
    let mut noise_rng = rng::stream(seed, "friedman-noise", &[]);
    let x = DMatrix::from_row_iterator(m, FRIEDMAN_DIM, (0..m * FRIEDMAN_DIM).map(|_| inputs_rng.random::<f64>()));
    let y = DVector::from_fn(m, |r, _| {
        let row: Vec<f64> = x.row(r).iter().copied().collect();
        let eps: f64 = StandardNormal.sample(&mut noise_rng);
        friedman_mean(&row) + eps
    });
    Dataset::new(x, y).expect("finite generated data")
}
