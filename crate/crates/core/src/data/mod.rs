//! Synthetic data, standardization, party partitioning and CSV IO.

mod csv_io;
mod friedman;
mod partition;
mod standardize;

use std::path::PathBuf;

use rand::seq::index;
use thiserror::Error;

pub use crate::models::Dataset;
use crate::models::ModelError;
use crate::rng;
pub use csv_io::{load_csv, read_csv, write_csv, write_csv_to, Column, CsvSchema};
pub use friedman::{friedman_generate, friedman_mean, FRIEDMAN_DIM};
pub use partition::{partition, plan_partition, PartitionPlan, PartitionSpec};
pub use standardize::{standardize, StandardizationParams, Standardize};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("CSV line {line}{}: {message}", column.as_ref().map(|c| format!(", column {c}")).unwrap_or_default())]
    Parse { line: u64, column: Option<String>, message: String },
    #[error("missing column {0}")]
    MissingColumn(String),
    #[error("column {0} is constant and cannot be standardized")]
    ConstantColumn(String),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Rows with `lo <= x[feature] <= hi`, in their original order.
pub fn filter_by_feature_range(data: &Dataset, feature: usize, lo: f64, hi: f64) -> Result<Dataset, DataError> {
    if feature >= data.dim() {
        return Err(DataError::Infeasible(format!("feature {feature} out of range for {} columns", data.dim())));
    }
    if !(lo <= hi) {
        return Err(DataError::Infeasible(format!("empty range [{lo}, {hi}]")));
    }
    let rows: Vec<usize> = (0..data.len())
        .filter(|&r| {
            let v = data.inputs()[(r, feature)];
            lo <= v && v <= hi
        })
        .collect();
    Ok(data.select(&rows))
}

/// `k` rows sampled uniformly without replacement, in their original order.
pub fn sample_rows(data: &Dataset, k: usize, seed: u64) -> Result<Dataset, DataError> {
    Ok(data.select(&sampled_indices(data.len(), k, seed, "row-sample")?))
}

fn sampled_indices(m: usize, k: usize, seed: u64, label: &str) -> Result<Vec<usize>, DataError> {
    if k > m {
        return Err(DataError::Infeasible(format!("cannot sample {k} of {m} rows")));
    }
    let mut rows = index::sample(&mut rng::stream(seed, label, &[]), m, k).into_vec();
    rows.sort_unstable();
    Ok(rows)
}

/// Splits off a uniformly sampled test set of `round(test_fraction * m)`
/// rows. Both parts keep the original row order.
pub fn holdout_split(data: &Dataset, test_fraction: f64, seed: u64) -> Result<(Dataset, Dataset), DataError> {
    if !(0.0..=1.0).contains(&test_fraction) {
        return Err(DataError::Infeasible(format!("test fraction {test_fraction} outside [0, 1]")));
    }
    let m = data.len();
    let k = (test_fraction * m as f64).round() as usize;
    let test = sampled_indices(m, k, seed, "holdout")?;
    let mut is_test = vec![false; m];
    for &r in &test {
        is_test[r] = true;
    }
    let train: Vec<usize> = (0..m).filter(|&r| !is_test[r]).collect();
    Ok((data.select(&train), data.select(&test)))
}
