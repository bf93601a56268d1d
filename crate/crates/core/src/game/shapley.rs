use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::coalition::CharacteristicFunction;
use super::GameError;
use crate::{par, rng};

/// Largest party count accepted by [`exact_shapley`].
pub const EXACT_SHAPLEY_LIMIT: usize = 20;

const PERMUTATIONS_PER_BATCH: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapleyMethod {
    Exact,
    /// Monte-Carlo estimate over uniformly drawn permutations. `std_errors`
    /// are standard errors of the per-party means (0 when only one sample
    /// was drawn, where the variance is undefined).
    Sampled {
        samples: usize,
        std_errors: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapleyVector {
    pub phi: Vec<f64>,
    pub phi_star: f64,
    pub method: ShapleyMethod,
}

impl ShapleyVector {
    pub fn new(phi: Vec<f64>, method: ShapleyMethod) -> Self {
        let phi_star = phi.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Self { phi, phi_star, method }
    }

    pub fn n(&self) -> usize {
        self.phi.len()
    }

    pub fn is_exact(&self) -> bool {
        matches!(self.method, ShapleyMethod::Exact)
    }

    pub fn std_errors(&self) -> Option<&[f64]> {
        match &self.method {
            ShapleyMethod::Exact => None,
            ShapleyMethod::Sampled { std_errors, .. } => Some(std_errors),
        }
    }
}

/// Exact Shapley values via the subset-weighted sum
/// `phi_i = sum_{S not containing i} |S|!(n-|S|-1)!/n! * (v(S+i) - v(S))`.
///
/// Runs in `O(n 2^n)`.
pub fn exact_shapley(cf: &CharacteristicFunction) -> Result<ShapleyVector, GameError> {
    let n = cf.n();
    if n > EXACT_SHAPLEY_LIMIT {
        return Err(GameError::EnumerationLimit { n, limit: EXACT_SHAPLEY_LIMIT });
    }
    // weight[s] = 1 / (n * C(n-1, s))
    let mut weight = vec![0.0; n];
    let mut binom = 1.0_f64;
    for (s, w) in weight.iter_mut().enumerate() {
        if s > 0 {
            binom = binom * (n - s) as f64 / s as f64;
        }
        *w = 1.0 / (n as f64 * binom);
    }
    let values = cf.values();
    let phi = par::map((0..n).collect(), |i| {
        let bit = 1u32 << i;
        let mut acc = 0.0;
        for mask in 0..(1u32 << n) {
            if mask & bit == 0 {
                let s = mask.count_ones() as usize;
                acc += weight[s] * (values[(mask | bit) as usize] - values[mask as usize]);
            }
        }
        acc
    });
    Ok(ShapleyVector::new(phi, ShapleyMethod::Exact))
}

#[derive(Debug, Clone, Copy, Default)]
struct RunningStats {
    count: f64,
    mean: f64,
    m2: f64,
}

impl RunningStats {
    fn push(&mut self, x: f64) {
        self.count += 1.0;
        let delta = x - self.mean;
        self.mean += delta / self.count;
        self.m2 += delta * (x - self.mean);
    }

    fn merge(&mut self, other: &RunningStats) {
        if other.count == 0.0 {
            return;
        }
        if self.count == 0.0 {
            *self = *other;
            return;
        }
        let total = self.count + other.count;
        let delta = other.mean - self.mean;
        self.mean += delta * other.count / total;
        self.m2 += other.m2 + delta * delta * self.count * other.count / total;
        self.count = total;
    }

    fn std_error(&self) -> f64 {
        if self.count < 2.0 {
            0.0
        } else {
            (self.m2 / (self.count - 1.0) / self.count).sqrt()
        }
    }
}

/// Monte-Carlo Shapley estimate from `samples` uniformly random permutations.
///
/// `oracle` maps a coalition mask to its value and must be deterministic.
/// Permutations are drawn in fixed-size batches, each from its own stream keyed
/// by `(seed, batch index)`, and batch statistics are merged in batch order,
/// so the output is bit-identical for a given seed regardless of thread count.
pub fn sampled_shapley<E, F>(oracle: F, n: usize, samples: usize, seed: u64) -> Result<ShapleyVector, E>
where
    F: Fn(u32) -> Result<f64, E> + Sync + Send,
    E: Send,
{
    assert!(samples >= 1, "sampled_shapley needs at least one sample");
    assert!((1..=32).contains(&n), "party count must lie in 1..=32");
    let batches = samples.div_ceil(PERMUTATIONS_PER_BATCH);
    let per_batch = par::map((0..batches).collect(), |b| {
        let take = PERMUTATIONS_PER_BATCH.min(samples - b * PERMUTATIONS_PER_BATCH);
        let mut rng = rng::stream(seed, "shapley-permutations", &[b as u64]);
        let mut order: Vec<usize> = (0..n).collect();
        let mut stats = vec![RunningStats::default(); n];
        for _ in 0..take {
            order.shuffle(&mut rng);
            let mut mask = 0u32;
            let mut previous = 0.0;
            for &party in &order {
                mask |= 1 << party;
                let value = oracle(mask)?;
                stats[party].push(value - previous);
                previous = value;
            }
        }
        Ok(stats)
    });
    let mut total = vec![RunningStats::default(); n];
    for batch in per_batch {
        for (acc, s) in total.iter_mut().zip(batch?) {
            acc.merge(&s);
        }
    }
    let phi = total.iter().map(|s| s.mean).collect();
    let std_errors = total.iter().map(RunningStats::std_error).collect();
    Ok(ShapleyVector::new(phi, ShapleyMethod::Sampled { samples, std_errors }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::convert::Infallible;

    fn example_one() -> CharacteristicFunction {
        CharacteristicFunction::new(2, vec![0.0, 7.0, 5.0, 8.0]).unwrap()
    }

    #[test]
    fn worked_example() {
        let s = exact_shapley(&example_one()).unwrap();
        assert_eq!(s.phi, vec![5.0, 3.0]);
        assert_eq!(s.phi_star, 5.0);
    }

    #[test]
    fn symmetric_two_party() {
        let cf = CharacteristicFunction::new(2, vec![0.0, 2.5, 2.5, 4.0]).unwrap();
        let s = exact_shapley(&cf).unwrap();
        assert_eq!(s.phi, vec![2.0, 2.0]);
    }

    #[test]
    fn enumeration_limit() {
        let cf = CharacteristicFunction::from_fn(21, |m| m.count_ones() as f64).unwrap();
        assert!(matches!(exact_shapley(&cf), Err(GameError::EnumerationLimit { n: 21, .. })));
    }

    #[test]
    fn sampled_single_party_is_exact() {
        let s = sampled_shapley(|_| Ok::<_, Infallible>(3.25), 1, 100, 9).unwrap();
        assert_eq!(s.phi, vec![3.25]);
        assert_eq!(s.std_errors().unwrap(), &[0.0]);
    }

    #[test]
    fn sampled_example_within_four_standard_errors() {
        let cf = example_one();
        for seed in [0, 1, 2] {
            let s = sampled_shapley(|m| Ok::<_, Infallible>(cf.value(m)), 2, 50_000, seed).unwrap();
            let se = s.std_errors().unwrap();
            assert!((s.phi[0] - 5.0).abs() <= 4.0 * se[0]);
            assert!((s.phi[1] - 3.0).abs() <= 4.0 * se[1]);
        }
    }

    #[test]
    fn sampled_is_seed_deterministic() {
        let cf = CharacteristicFunction::from_fn(5, |m| (m.count_ones() as f64).sqrt() + (m & 3) as f64).unwrap();
        let a = sampled_shapley(|m| Ok::<_, Infallible>(cf.value(m)), 5, 1000, 4).unwrap();
        let b = sampled_shapley(|m| Ok::<_, Infallible>(cf.value(m)), 5, 1000, 4).unwrap();
        let c = sampled_shapley(|m| Ok::<_, Infallible>(cf.value(m)), 5, 1000, 5).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn oracle_errors_propagate() {
        let r = sampled_shapley(|m| if m == 0b11 { Err("boom") } else { Ok(1.0) }, 2, 10, 0);
        assert_eq!(r.unwrap_err(), "boom");
    }
}
