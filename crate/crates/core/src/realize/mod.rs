//! Reward realization by noise injection.
//!
//! Party `i` receives a model trained on its own data plus every other party's
//! outputs corrupted by Gaussian noise of variance `eta_i`. The information
//! gain of that training set falls continuously from `v_N` at `eta_i = 0` to
//! `v_i` as `eta_i` grows, so any target reward in `[v_i, v_N]` is met by a
//! one-dimensional root search.

mod brent;

use std::fmt;
use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::game::RewardAllocation;
use crate::models::{Dataset, GainOperator, ModelError, ModelSpec, NoiseVector};
use crate::{par, rng};
use brent::{brent, BrentFailure};

/// Root-finder iteration limit.
pub const MAX_ITERATIONS: usize = 200;
/// Largest noise variance tried while bracketing.
pub const ETA_CAP: f64 = 1e15;

/// Default IG residual tolerance `1e-6 * max(1, v_N)`.
pub fn default_tolerance(v_n: f64) -> f64 {
    1e-6 * v_n.abs().max(1.0)
}

/// Injected noise variance. `OwnDataOnly` is the infinite-noise limit: the
/// party trains on its own data alone.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Eta {
    Finite(f64),
    OwnDataOnly,
}

impl Eta {
    pub fn is_zero(self) -> bool {
        self == Eta::Finite(0.0)
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            Eta::Finite(v) => Some(v),
            Eta::OwnDataOnly => None,
        }
    }
}

impl fmt::Display for Eta {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Eta::Finite(v) => write!(f, "{v}"),
            Eta::OwnDataOnly => f.write_str("inf"),
        }
    }
}

impl Serialize for Eta {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Eta::Finite(v) => s.serialize_f64(*v),
            Eta::OwnDataOnly => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Eta {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) if v >= 0.0 && v.is_finite() => Ok(Eta::Finite(v)),
            Raw::Num(v) => Err(serde::de::Error::custom(format!("eta {v} must be finite and >= 0"))),
            Raw::Text(t) if t == "inf" => Ok(Eta::OwnDataOnly),
            Raw::Text(t) => Err(serde::de::Error::custom(format!("expected number or \"inf\", got {t:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RealizationError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("party {party} out of range for {n} parties")]
    PartyOutOfRange { party: usize, n: usize },
    #[error("eta {0} must be finite and non-negative")]
    InvalidEta(f64),
    #[error("party {party}: target {target} outside [v_i, v_N] = [{own}, {grand}]")]
    InfeasibleTarget { party: usize, target: f64, own: f64, grand: f64 },
    #[error("party {party}: no bracket found below eta = {cap:e}")]
    BracketNotFound { party: usize, cap: f64 },
    #[error("party {party}: no convergence after {evaluations} evaluations, bracket [{}, {}]", bracket[0], bracket[1])]
    NoConvergence { party: usize, evaluations: usize, bracket: [f64; 2] },
    #[error("inconsistent allocation: {0}")]
    Inconsistent(String),
    #[error("{}", format_party_errors(.0))]
    Parties(Vec<(usize, RealizationError)>),
}

fn format_party_errors(errors: &[(usize, RealizationError)]) -> String {
    let parts: Vec<String> = errors.iter().map(|(i, e)| format!("party {i}: {e}")).collect();
    format!("{} parties failed: {}", errors.len(), parts.join("; "))
}

/// One party's realized reward.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealizationEntry {
    pub party: usize,
    pub target: f64,
    pub eta: Eta,
    pub achieved_ig: f64,
    /// Information-gain evaluations spent on bracketing and root finding.
    pub iterations: usize,
    /// Final root-finder bracket; absent for boundary short-circuits.
    pub bracket: Option<[f64; 2]>,
    pub own_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealizationPlan {
    pub tolerance: f64,
    pub v_n: f64,
    pub entries: Vec<RealizationEntry>,
}

impl RealizationPlan {
    pub fn n(&self) -> usize {
        self.entries.len()
    }

    pub fn etas(&self) -> Vec<Eta> {
        self.entries.iter().map(|e| e.eta).collect()
    }
}

/// Pooled training data prepared once for every party's realization.
#[derive(Debug, Clone)]
pub struct Realizer {
    op: GainOperator,
    ranges: Vec<Range<usize>>,
    noise_variance: f64,
    own_values: Vec<f64>,
    v_n: f64,
}

impl Realizer {
    pub fn new(model: &ModelSpec, parties: &[Dataset]) -> Result<Self, ModelError> {
        crate::models::check_parties(model, parties)?;
        let pooled = Dataset::concat(parties)?;
        let op = GainOperator::new(model, pooled.inputs())?;
        let ranges = crate::models::party_row_ranges(parties);
        let s2 = model.noise_variance();
        let own_values = ranges
            .iter()
            .map(|r| {
                let rows: Vec<usize> = r.clone().collect();
                op.restrict(&rows).gain(&NoiseVector::homoscedastic(rows.len(), s2)?)
            })
            .collect::<Result<Vec<_>, _>>()?;
        let all: Vec<usize> = (0..op.rows()).collect();
        let v_n = op.restrict(&all).gain(&NoiseVector::homoscedastic(all.len(), s2)?)?;
        Ok(Self { op, ranges, noise_variance: s2, own_values, v_n })
    }

    pub fn n(&self) -> usize {
        self.ranges.len()
    }

    pub fn v_n(&self) -> f64 {
        self.v_n
    }

    /// `v_i`, the value of party `i`'s own data.
    pub fn own_value(&self, i: usize) -> f64 {
        self.own_values[i]
    }

    fn check_party(&self, i: usize) -> Result<(), RealizationError> {
        if i >= self.n() {
            return Err(RealizationError::PartyOutOfRange { party: i, n: self.n() });
        }
        Ok(())
    }

    /// Information gain of party `i`'s reward training set at noise `eta`.
    pub fn ig(&self, i: usize, eta: Eta) -> Result<f64, RealizationError> {
        self.check_party(i)?;
        match eta {
            Eta::OwnDataOnly => Ok(self.own_values[i]),
            Eta::Finite(0.0) => Ok(self.v_n),
            Eta::Finite(e) => {
                if !(e > 0.0) || !e.is_finite() {
                    return Err(RealizationError::InvalidEta(e));
                }
                let noise = reward_noise(&self.ranges, i, self.noise_variance, e);
                Ok(self.op.gain(&noise)?)
            }
        }
    }

    /// Solves for the noise variance that gives party `i` the information
    /// gain `target`, to within `tolerance`.
    pub fn solve(&self, i: usize, target: f64, tolerance: f64) -> Result<RealizationEntry, RealizationError> {
        self.check_party(i)?;
        let own = self.own_values[i];
        let grand = self.v_n;
        if !target.is_finite() || target > grand + tolerance || target < own - tolerance {
            return Err(RealizationError::InfeasibleTarget { party: i, target, own, grand });
        }
        let entry = |eta, achieved_ig, iterations, bracket| RealizationEntry {
            party: i,
            target,
            eta,
            achieved_ig,
            iterations,
            bracket,
            own_value: own,
        };
        if target >= grand - tolerance {
            return Ok(entry(Eta::Finite(0.0), grand, 0, None));
        }
        if target <= own + tolerance {
            return Ok(entry(Eta::OwnDataOnly, own, 0, None));
        }

        let g = |eta: f64| self.ig(i, Eta::Finite(eta)).map(|v| v - target);
        let (mut lo, mut g_lo) = (0.0, grand - target);
        let mut hi = 1.0;
        let mut evaluations = 0;
        let g_hi = loop {
            let v = g(hi)?;
            evaluations += 1;
            if v.abs() <= tolerance {
                return Ok(entry(Eta::Finite(hi), v + target, evaluations, Some([lo, hi])));
            }
            if v < 0.0 {
                break v;
            }
            if hi * 2.0 > ETA_CAP {
                return Err(RealizationError::BracketNotFound { party: i, cap: ETA_CAP });
            }
            (lo, g_lo) = (hi, v);
            hi *= 2.0;
        };
        match brent(g, (lo, g_lo), (hi, g_hi), tolerance, MAX_ITERATIONS) {
            Ok(root) => {
                Ok(entry(Eta::Finite(root.x), root.fx + target, evaluations + root.evaluations, Some(root.bracket)))
            }
            Err(BrentFailure::Eval(e)) => Err(e),
            Err(BrentFailure::NoConvergence { bracket, evaluations: used }) => {
                Err(RealizationError::NoConvergence { party: i, evaluations: evaluations + used, bracket })
            }
        }
    }
}

fn reward_noise(ranges: &[Range<usize>], owner: usize, s2: f64, eta: f64) -> NoiseVector {
    let m = ranges.last().map_or(0, |r| r.end);
    let mut v = vec![s2 + eta; m];
    for row in ranges[owner].clone() {
        v[row] = s2;
    }
    NoiseVector::new(v).expect("positive finite noise")
}

/// Information gain of party `i`'s reward training set: pooled inputs with
/// the owner's rows at noise `sigma^2` and all other rows at `sigma^2 + eta`.
pub fn ig_given_eta(model: &ModelSpec, parties: &[Dataset], i: usize, eta: f64) -> Result<f64, RealizationError> {
    if !(eta >= 0.0) || !eta.is_finite() {
        return Err(RealizationError::InvalidEta(eta));
    }
    Realizer::new(model, parties)?.ig(i, Eta::Finite(eta))
}

/// Solves for the noise variance realizing `target` for party `i`.
pub fn solve_eta(
    model: &ModelSpec,
    parties: &[Dataset],
    i: usize,
    target: f64,
    tolerance: f64,
) -> Result<RealizationEntry, RealizationError> {
    Realizer::new(model, parties)?.solve(i, target, tolerance)
}

/// Solves every party's noise variance for the rewards in `rewards`.
pub fn realize_allocation(
    model: &ModelSpec,
    parties: &[Dataset],
    rewards: &RewardAllocation,
    tolerance: f64,
) -> Result<RealizationPlan, RealizationError> {
    let realizer = Realizer::new(model, parties)?;
    realizer.realize(rewards, tolerance)
}

impl Realizer {
    pub fn realize(&self, rewards: &RewardAllocation, tolerance: f64) -> Result<RealizationPlan, RealizationError> {
        if rewards.n() != self.n() {
            return Err(RealizationError::Inconsistent(format!("{} rewards for {} parties", rewards.n(), self.n())));
        }
        if (rewards.v_n - self.v_n).abs() > tolerance {
            return Err(RealizationError::Inconsistent(format!(
                "allocation v_N = {} but the data give {}",
                rewards.v_n, self.v_n
            )));
        }
        let jobs: Vec<(usize, f64)> = rewards.rewards.iter().copied().enumerate().collect();
        let results = par::map(jobs, |(i, r)| self.solve(i, r, tolerance));
        let mut entries = Vec::with_capacity(results.len());
        let mut failures = Vec::new();
        for (i, res) in results.into_iter().enumerate() {
            match res {
                Ok(e) => entries.push(e),
                Err(e) => failures.push((i, e)),
            }
        }
        if !failures.is_empty() {
            return Err(RealizationError::Parties(failures));
        }
        Ok(RealizationPlan { tolerance, v_n: self.v_n, entries })
    }
}

/// A party's reward training set.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisyTrainingSet {
    pub inputs: DMatrix<f64>,
    pub outputs: DVector<f64>,
    pub noise: NoiseVector,
    pub owner: usize,
}

/// Builds party `i`'s reward training set, replacing the other parties'
/// outputs by `y + sqrt(eta) * eps`. The standard normal draws `eps` come
/// from a stream keyed by `(seed, i)` and are taken before scaling, so the
/// same seed gives the same `eps` at every `eta`.
pub fn sample_noisy_outputs(
    model: &ModelSpec,
    parties: &[Dataset],
    i: usize,
    eta: Eta,
    seed: u64,
) -> Result<NoisyTrainingSet, RealizationError> {
    crate::models::check_parties(model, parties)?;
    if i >= parties.len() {
        return Err(RealizationError::PartyOutOfRange { party: i, n: parties.len() });
    }
    let s2 = model.noise_variance();
    let eta = match eta {
        Eta::OwnDataOnly => {
            let own = &parties[i];
            return Ok(NoisyTrainingSet {
                inputs: own.inputs().clone(),
                outputs: own.outputs().clone(),
                noise: NoiseVector::homoscedastic(own.len(), s2)?,
                owner: i,
            });
        }
        Eta::Finite(e) if e >= 0.0 && e.is_finite() => e,
        Eta::Finite(e) => return Err(RealizationError::InvalidEta(e)),
    };
    let pooled = Dataset::concat(parties)?;
    let ranges = crate::models::party_row_ranges(parties);
    let (inputs, mut outputs) = pooled.into_parts();
    let mut stream = rng::stream(seed, "reward-noise", &[i as u64]);
    let scale = eta.sqrt();
    for (row, y) in outputs.iter_mut().enumerate() {
        if ranges[i].contains(&row) {
            continue;
        }
        let eps: f64 = StandardNormal.sample(&mut stream);
        *y += scale * eps;
    }
    let noise =
        if eta == 0.0 { NoiseVector::homoscedastic(inputs.nrows(), s2)? } else { reward_noise(&ranges, i, s2, eta) };
    Ok(NoisyTrainingSet { inputs, outputs, noise, owner: i })
}
