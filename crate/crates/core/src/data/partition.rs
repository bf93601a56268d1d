use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::DataError;
use crate::models::Dataset;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartitionSpec {
    pub n_parties: usize,
    /// Each party receives at least `ceil(min_fraction * m)` rows.
    pub min_fraction: f64,
    pub seed: u64,
}

/// Outcome of the partition procedure before rows are copied out.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionPlan {
    /// Feature the pivot pass compared on.
    pub feature: usize,
    /// Original index of the pivot row.
    pub pivot_row: usize,
    /// Position of the pivot row after the pass.
    pub pivot_position: usize,
    /// Row order after the pass: `order[k]` is the original row at `k`.
    pub order: Vec<usize>,
    pub block_sizes: Vec<usize>,
}

impl PartitionPlan {
    pub fn apply(&self, data: &Dataset) -> Vec<Dataset> {
        let mut at = 0;
        self.block_sizes
            .iter()
            .map(|&s| {
                let block = data.select(&self.order[at..at + s]);
                at += s;
                block
            })
            .collect()
    }
}

fn min_block(spec: &PartitionSpec, m: usize) -> usize {
    let raw = spec.min_fraction * m as f64;
    // absorb rounding such as 0.1 * 30 = 3.0000000000000004
    (raw * (1.0 - 1e-12)).ceil() as usize
}

/// Picks a random feature and pivot row, moves rows with a smaller feature
/// value in front of the pivot and the rest behind it (one partition pass,
/// no sorting), then cuts the rows into consecutive blocks of random sizes.
pub fn plan_partition(data: &Dataset, spec: &PartitionSpec) -> Result<PartitionPlan, DataError> {
    let n = spec.n_parties;
    let m = data.len();
    let infeasible = |msg: String| Err(DataError::Infeasible(msg));
    if n == 0 {
        return infeasible("at least one party is required".into());
    }
    if !(spec.min_fraction > 0.0) || spec.min_fraction * n as f64 > 1.0 + 1e-12 {
        return infeasible(format!("min_fraction {} must lie in (0, 1/{n}]", spec.min_fraction));
    }
    if m < n {
        return infeasible(format!("{m} rows cannot be split among {n} parties"));
    }
    if spec.min_fraction * (m as f64) < 1.0 - 1e-12 {
        return infeasible(format!("min_fraction {} of {m} rows is below one row", spec.min_fraction));
    }
    let floor = min_block(spec, m);
    if floor * n > m {
        return infeasible(format!("minimum block of {floor} rows infeasible for {m} rows and {n} parties"));
    }
    if data.dim() == 0 {
        return infeasible("data have no input features".into());
    }

    let feature = rng::stream(spec.seed, "partition-feature", &[]).random_range(0..data.dim());
    let pivot_row = rng::stream(spec.seed, "partition-pivot", &[]).random_range(0..m);
    let key = |r: usize| data.inputs()[(r, feature)];

    // Lomuto pass with the pivot parked at the end
    let mut order: Vec<usize> = (0..m).collect();
    order.swap(pivot_row, m - 1);
    let pivot_value = key(pivot_row);
    let mut store = 0;
    for k in 0..m - 1 {
        if key(order[k]) < pivot_value {
            order.swap(k, store);
            store += 1;
        }
    }
    order.swap(store, m - 1);

    // Uniform composition of the rows above the floor (stars and bars).
    let extra = m - floor * n;
    let mut cuts = index::sample(&mut rng::stream(spec.seed, "partition-sizes", &[]), extra + n - 1, n - 1).into_vec();
    cuts.sort_unstable();
    let mut block_sizes = Vec::with_capacity(n);
    let mut prev = 0;
    for (k, &c) in cuts.iter().enumerate() {
        // cut c is the (k+1)-th bar among extra + n - 1 slots
        let stars = c - k;
        block_sizes.push(floor + stars - prev);
        prev = stars;
    }
    block_sizes.push(floor + extra - prev);

    Ok(PartitionPlan { feature, pivot_row, pivot_position: store, order, block_sizes })
}

pub fn partition(data: &Dataset, spec: &PartitionSpec) -> Result<Vec<Dataset>, DataError> {
    Ok(plan_partition(data, spec)?.apply(data))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::friedman_generate;

    fn spec(n: usize, f: f64, seed: u64) -> PartitionSpec {
        PartitionSpec { n_parties: n, min_fraction: f, seed }
    }

    fn sorted_outputs<'a>(parts: impl IntoIterator<Item = &'a Dataset>) -> Vec<f64> {
        let mut v: Vec<f64> = parts.into_iter().flat_map(|d| d.outputs().iter().copied().collect::<Vec<_>>()).collect();
        v.sort_by(f64::total_cmp);
        v
    }

    #[test]
    fn three_parties_ten_percent() {
        let data = friedman_generate(100, 1);
        for seed in 0..50 {
            let parts = partition(&data, &spec(3, 0.1, seed)).unwrap();
            assert_eq!(parts.len(), 3);
            assert!(parts.iter().all(|p| p.len() >= 10));
            assert_eq!(parts.iter().map(Dataset::len).sum::<usize>(), 100);
            assert_eq!(sorted_outputs(&parts), sorted_outputs([&data]));
        }
    }

    #[test]
    fn single_party() {
        let data = friedman_generate(30, 2);
        let parts = partition(&data, &spec(1, 1.0, 3)).unwrap();
        assert_eq!(parts.len(), 1);
        assert_eq!(sorted_outputs(&parts), sorted_outputs([&data]));
    }

    #[test]
    fn pivot_lands_at_sorted_rank() {
        for seed in 0..100 {
            let data = friedman_generate(25, seed);
            let plan = plan_partition(&data, &spec(2, 0.2, seed)).unwrap();
            let a = plan.feature;
            let key = |r: usize| data.inputs()[(r, a)];
            let p = plan.pivot_position;
            assert_eq!(plan.order[p], plan.pivot_row);
            let pv = key(plan.pivot_row);
            assert!(plan.order[..p].iter().all(|&r| key(r) <= pv));
            assert!(plan.order[p + 1..].iter().all(|&r| key(r) >= pv));
            // full-sort oracle
            let mut sorted: Vec<f64> = (0..25).map(key).collect();
            sorted.sort_by(f64::total_cmp);
            assert_eq!(sorted[p], pv);
            assert_eq!((0..25).filter(|&r| key(r) < pv).count(), p);
            let mut seen = plan.order.clone();
            seen.sort_unstable();
            assert_eq!(seen, (0..25).collect::<Vec<_>>());
        }
    }

    #[test]
    fn block_sizes_cover_the_range() {
        let data = friedman_generate(12, 0);
        let mut seen = std::collections::BTreeSet::new();
        for seed in 0..300 {
            let plan = plan_partition(&data, &spec(3, 0.25, seed)).unwrap();
            assert!(plan.block_sizes.iter().all(|&s| s >= 3));
            assert_eq!(plan.block_sizes.iter().sum::<usize>(), 12);
            seen.insert(plan.block_sizes.clone());
        }
        // 3 spare rows over 3 blocks: C(5, 2) = 10 compositions
        assert_eq!(seen.len(), 10);
    }

    #[test]
    fn determinism_and_errors() {
        let data = friedman_generate(40, 5);
        assert_eq!(partition(&data, &spec(4, 0.1, 8)).unwrap(), partition(&data, &spec(4, 0.1, 8)).unwrap());
        assert!(partition(&data, &spec(4, 0.3, 8)).is_err());
        assert!(partition(&data, &spec(0, 0.1, 8)).is_err());
        assert!(partition(&data, &spec(2, 0.0, 8)).is_err());
        assert!(partition(&friedman_generate(3, 1), &spec(4, 0.25, 8)).is_err());
        assert!(partition(&friedman_generate(10, 1), &spec(2, 0.1, 8)).is_ok());
        assert!(partition(&friedman_generate(10, 1), &spec(2, 0.05, 8)).is_err());
        let parts = partition(&friedman_generate(30, 1), &spec(10, 0.1, 2)).unwrap();
        assert!(parts.iter().all(|p| p.len() == 3));
    }
}
