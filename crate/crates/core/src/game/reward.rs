use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::coalition::CharacteristicFunction;
use super::shapley::ShapleyVector;
use super::GameError;

/// Relative gap below which a party's Shapley value counts as tied with the
/// maximum.
const TIE_RELATIVE: f64 = 1e-12;

/// A rho threshold. `Unbounded` means no party constrains rho.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Threshold {
    Finite(f64),
    Unbounded,
}

impl Threshold {
    pub fn value(self) -> f64 {
        match self {
            Threshold::Finite(v) => v,
            Threshold::Unbounded => f64::INFINITY,
        }
    }

    pub fn from_value(v: f64) -> Self {
        if v == f64::INFINITY {
            Threshold::Unbounded
        } else {
            Threshold::Finite(v)
        }
    }

    /// The threshold as an operating rho, clamped to `[0, 1]`.
    pub fn clamped(self) -> f64 {
        self.value().clamp(0.0, 1.0)
    }
}

impl Serialize for Threshold {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Threshold::Finite(v) => s.serialize_f64(*v),
            Threshold::Unbounded => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Threshold {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(Threshold::Finite(v)),
            Raw::Text(t) if t == "inf" => Ok(Threshold::Unbounded),
            Raw::Text(t) => Err(serde::de::Error::custom(format!("expected number or \"inf\", got {t:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardAllocation {
    pub rho: f64,
    pub rewards: Vec<f64>,
    pub v_n: f64,
    /// Present when the allocation was built with the game at hand.
    pub rho_r: Option<Threshold>,
    pub rho_s: Option<Threshold>,
    /// `C_i = {j : phi_j <= phi_i}` as masks, one per party.
    pub dominated_sets: Vec<u32>,
}

impl RewardAllocation {
    pub fn n(&self) -> usize {
        self.rewards.len()
    }

    pub fn group_welfare(&self) -> f64 {
        self.rewards.iter().sum()
    }
}

/// Mask of the parties whose Shapley value is at most party `i`'s (ties
/// included, `i` itself always included).
pub fn dominated_set(shapley: &ShapleyVector, i: usize) -> u32 {
    let phi_i = shapley.phi[i];
    shapley.phi.iter().enumerate().filter(|(_, &p)| p <= phi_i).fold(1u32 << i, |m, (j, _)| m | (1 << j))
}

fn clean_phi(shapley: &ShapleyVector, v_n: f64) -> Result<Vec<f64>, GameError> {
    let slack = 1e-9 * v_n.abs().max(1.0);
    shapley
        .phi
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            if !p.is_finite() {
                Err(GameError::InvalidInput(format!("phi[{i}] = {p} is not finite")))
            } else if p < -slack {
                Err(GameError::InvalidInput(format!("phi[{i}] = {p} is negative")))
            } else {
                Ok(p.max(0.0))
            }
        })
        .collect()
}

/// rho-Shapley rewards `r_i = (phi_i / phi*)^rho * v_N`.
///
/// At `rho = 0` every party receives `v_N`, including null parties (`0^0 = 1`).
/// Thresholds are left unset; see [`allocate`].
pub fn rho_shapley_rewards(shapley: &ShapleyVector, v_n: f64, rho: f64) -> Result<RewardAllocation, GameError> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(GameError::RhoOutOfRange(rho));
    }
    if !(v_n >= 0.0) || !v_n.is_finite() {
        return Err(GameError::InvalidInput(format!("v_N = {v_n} must be finite and non-negative")));
    }
    let phi = clean_phi(shapley, v_n)?;
    let phi_star = phi.iter().copied().fold(0.0, f64::max);
    if phi_star <= 0.0 && v_n > 0.0 {
        return Err(GameError::Inconsistent(format!("max Shapley value is 0 while v_N = {v_n}")));
    }
    let rewards = phi
        .iter()
        .map(|&p| {
            if rho == 0.0 {
                v_n
            } else if phi_star <= 0.0 {
                0.0
            } else {
                (p / phi_star).powf(rho) * v_n
            }
        })
        .collect();
    let dominated_sets = (0..shapley.n()).map(|i| dominated_set(shapley, i)).collect();
    Ok(RewardAllocation { rho, rewards, v_n, rho_r: None, rho_s: None, dominated_sets })
}

/// Computes `min_i log(bound_i / v_N) / log(phi_i / phi*)` over the
/// non-excluded parties.
fn threshold_with(
    cf: &CharacteristicFunction,
    shapley: &ShapleyVector,
    bound: impl Fn(usize) -> f64,
) -> Result<Threshold, GameError> {
    if cf.n() != shapley.n() {
        return Err(GameError::PartyMismatch(cf.n(), shapley.n()));
    }
    let v_n = cf.grand_value();
    if v_n <= 0.0 {
        return Ok(Threshold::Unbounded);
    }
    let phi = clean_phi(shapley, v_n)?;
    let phi_star = phi.iter().copied().fold(0.0, f64::max);
    if phi_star <= 0.0 {
        return Err(GameError::Inconsistent(format!("max Shapley value is 0 while v_N = {v_n}")));
    }
    let slack = 1e-9 * v_n.max(1.0);
    let mut best = f64::INFINITY;
    for (i, &p) in phi.iter().enumerate() {
        if p >= phi_star * (1.0 - TIE_RELATIVE) {
            // r_i = v_N already dominates every coalition value
            continue;
        }
        let b = bound(i);
        if p == 0.0 {
            if b <= slack {
                continue;
            }
            return Err(GameError::Inconsistent(format!("party {i} has zero Shapley value but a bound of {b}")));
        }
        if b <= 0.0 {
            continue;
        }
        let term = (b / v_n).ln() / (p / phi_star).ln();
        best = best.min(term.max(0.0));
    }
    Ok(Threshold::from_value(best))
}

/// Largest rho for which rho-Shapley rewards are individually rational.
pub fn rho_r_threshold(cf: &CharacteristicFunction, shapley: &ShapleyVector) -> Result<Threshold, GameError> {
    threshold_with(cf, shapley, |i| cf.singleton(i))
}

/// Largest rho for which rho-Shapley rewards make the grand coalition stable,
/// using `v(C_i)` with `C_i = {j : phi_j <= phi_i}`.
pub fn rho_s_threshold(cf: &CharacteristicFunction, shapley: &ShapleyVector) -> Result<Threshold, GameError> {
    threshold_with(cf, shapley, |i| cf.value(dominated_set(shapley, i)))
}

/// rho-Shapley rewards for `cf` together with both thresholds.
pub fn allocate(cf: &CharacteristicFunction, shapley: &ShapleyVector, rho: f64) -> Result<RewardAllocation, GameError> {
    if cf.n() != shapley.n() {
        return Err(GameError::PartyMismatch(cf.n(), shapley.n()));
    }
    let mut alloc = rho_shapley_rewards(shapley, cf.grand_value(), rho)?;
    alloc.rho_r = Some(rho_r_threshold(cf, shapley)?);
    alloc.rho_s = Some(rho_s_threshold(cf, shapley)?);
    Ok(alloc)
}
