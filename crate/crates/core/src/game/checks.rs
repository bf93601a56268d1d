//! Incentive conditions, fairness axioms and structural game checks.

use serde::{Deserialize, Serialize};

use super::coalition::{full_mask, CharacteristicFunction};
use super::reward::RewardAllocation;
use super::shapley::exact_shapley;
use super::GameError;

/// Absolute slack for every equality or inequality test on game values.
pub const AXIOM_TOLERANCE: f64 = 1e-9;

/// Party count up to which the subset-pair checks enumerate all `3^n` pairs.
const PAIRWISE_LIMIT: usize = 12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub constraint: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub party: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub other_party: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coalition: Option<u32>,
}

impl Violation {
    fn party(constraint: &str, party: usize, coalition: Option<u32>) -> Self {
        Self { constraint: constraint.into(), party: Some(party), other_party: None, coalition }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IncentiveReport {
    /// R1: every reward is non-negative.
    pub non_negativity: bool,
    /// R2: no reward exceeds `v_N`.
    pub feasibility: bool,
    /// R3: some reward equals `v_N`.
    pub weak_efficiency: bool,
    /// R4: every reward is at least the party's own value.
    pub individual_rationality: bool,
    /// Every coalition has a member whose reward is at least its value.
    pub stability: bool,
    /// R5 via `r_i >= v(C_i)` for all parties.
    pub stability_sufficient: bool,
    pub group_welfare: f64,
    pub violations: Vec<Violation>,
}

impl IncentiveReport {
    pub fn all_pass(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Evaluates R1-R5 and exhaustive stability for `rewards` on `cf`.
pub fn check_incentives(cf: &CharacteristicFunction, rewards: &RewardAllocation) -> Result<IncentiveReport, GameError> {
    let n = cf.n();
    if rewards.n() != n {
        return Err(GameError::PartyMismatch(n, rewards.n()));
    }
    let v_n = cf.grand_value();
    let slack = AXIOM_TOLERANCE * v_n.abs().max(1.0);
    let r = &rewards.rewards;
    let mut violations = Vec::new();

    for (i, &ri) in r.iter().enumerate() {
        if ri < -slack {
            violations.push(Violation::party("R1", i, None));
        }
    }
    for (i, &ri) in r.iter().enumerate() {
        if ri > v_n + slack {
            violations.push(Violation::party("R2", i, Some(cf.grand_mask())));
        }
    }
    if !r.iter().any(|&ri| (ri - v_n).abs() <= slack) {
        violations.push(Violation {
            constraint: "R3".into(),
            party: None,
            other_party: None,
            coalition: Some(cf.grand_mask()),
        });
    }
    for (i, &ri) in r.iter().enumerate() {
        if ri < cf.singleton(i) - slack {
            violations.push(Violation::party("R4", i, Some(1 << i)));
        }
    }

    // best[mask] = max reward over members of mask
    let size = 1usize << n;
    let mut best = vec![f64::NEG_INFINITY; size];
    let mut unstable = None;
    for mask in 1..size {
        let low = mask.trailing_zeros() as usize;
        best[mask] = best[mask & (mask - 1)].max(r[low]);
        if unstable.is_none() && best[mask] < cf.value(mask as u32) - slack {
            unstable = Some(mask as u32);
        }
    }
    if let Some(mask) = unstable {
        violations.push(Violation {
            constraint: "stability".into(),
            party: None,
            other_party: None,
            coalition: Some(mask),
        });
    }

    for (i, &ri) in r.iter().enumerate() {
        let c_i = rewards.dominated_sets.get(i).copied().unwrap_or(1 << i);
        if ri < cf.value(c_i) - slack {
            violations.push(Violation::party("R5", i, Some(c_i)));
        }
    }

    let has = |name: &str| violations.iter().any(|v| v.constraint == name);
    Ok(IncentiveReport {
        non_negativity: !has("R1"),
        feasibility: !has("R2"),
        weak_efficiency: !has("R3"),
        individual_rationality: !has("R4"),
        stability: !has("stability"),
        stability_sufficient: !has("R5"),
        group_welfare: r.iter().sum(),
        violations,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairnessReport {
    /// F1: null parties get nothing.
    pub uselessness: bool,
    /// F2: interchangeable parties get equal rewards.
    pub symmetry: bool,
    /// F3: a party that weakly dominates another, strictly somewhere, gets more.
    pub strict_desirability: bool,
    pub violations: Vec<Violation>,
}

/// Subsets of `rest` (including the empty set).
fn submasks(rest: u32) -> impl Iterator<Item = u32> {
    let mut next = Some(rest);
    std::iter::from_fn(move || {
        let cur = next?;
        next = if cur == 0 { None } else { Some((cur - 1) & rest) };
        Some(cur)
    })
}

/// Checks fairness axioms F1-F3 for `rewards` on `cf`. Each axiom only fires
/// where its premise holds on `cf`.
pub fn check_fairness_axioms(cf: &CharacteristicFunction, rewards: &[f64]) -> Result<FairnessReport, GameError> {
    let n = cf.n();
    if n > PAIRWISE_LIMIT {
        return Err(GameError::EnumerationLimit { n, limit: PAIRWISE_LIMIT });
    }
    if rewards.len() != n {
        return Err(GameError::PartyMismatch(n, rewards.len()));
    }
    let full = full_mask(n);
    let tol = AXIOM_TOLERANCE;
    let mut violations = Vec::new();

    for (i, r_i) in rewards.iter().enumerate() {
        let bit = 1u32 << i;
        let null = submasks(full & !bit).all(|c| (cf.value(c | bit) - cf.value(c)).abs() <= tol);
        if null && r_i.abs() > tol {
            violations.push(Violation::party("F1", i, None));
        }
    }

    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let (bi, bj) = (1u32 << i, 1u32 << j);
            let rest = full & !bi & !bj;
            let mut weakly = true;
            let mut equal = true;
            let mut strict_at = None;
            for c in submasks(rest) {
                let diff = cf.value(c | bi) - cf.value(c | bj);
                if diff < -tol {
                    weakly = false;
                }
                if diff.abs() > tol {
                    equal = false;
                }
                if diff > tol && strict_at.is_none() {
                    strict_at = Some(c);
                }
            }
            if i < j && equal && (rewards[i] - rewards[j]).abs() > tol {
                violations.push(Violation {
                    constraint: "F2".into(),
                    party: Some(i),
                    other_party: Some(j),
                    coalition: None,
                });
            }
            if let (true, Some(b)) = (weakly, strict_at) {
                if !(rewards[i] > rewards[j]) {
                    violations.push(Violation {
                        constraint: "F3".into(),
                        party: Some(i),
                        other_party: Some(j),
                        coalition: Some(b),
                    });
                }
            }
        }
    }

    let has = |name: &str| violations.iter().any(|v| v.constraint == name);
    Ok(FairnessReport { uselessness: !has("F1"), symmetry: !has("F2"), strict_desirability: !has("F3"), violations })
}

/// Verifies that `(cf, cf2)` matches the strict-monotonicity premise for
/// party `i`: values of coalitions without `i` are unchanged, values of
/// coalitions with `i` weakly increase, and at least one strictly increases.
fn check_improvement_premise(
    cf: &CharacteristicFunction,
    cf2: &CharacteristicFunction,
    i: usize,
) -> Result<(), GameError> {
    if cf.n() != cf2.n() {
        return Err(GameError::PartyMismatch(cf.n(), cf2.n()));
    }
    if i >= cf.n() {
        return Err(GameError::InvalidInput(format!("party {i} out of range")));
    }
    let bit = 1u32 << i;
    let tol = AXIOM_TOLERANCE;
    let mut strict = false;
    for mask in 0..=cf.grand_mask() {
        let (a, b) = (cf.value(mask), cf2.value(mask));
        if mask & bit == 0 {
            if (a - b).abs() > tol {
                return Err(GameError::PremiseNotSatisfied(format!(
                    "coalition {mask:#b} excludes party {i} but its value changed"
                )));
            }
        } else if b < a - tol {
            return Err(GameError::PremiseNotSatisfied(format!(
                "coalition {mask:#b} containing party {i} decreased in value"
            )));
        } else if b > a + tol {
            strict = true;
        }
    }
    if !strict {
        return Err(GameError::PremiseNotSatisfied(format!(
            "no coalition containing party {i} strictly increased in value"
        )));
    }
    Ok(())
}

/// F4: party `i`'s reward strictly increases when its data becomes more
/// valuable, ceteris paribus. Returns whether `r2_i > r_i`.
pub fn check_strict_monotonicity(
    cf: &CharacteristicFunction,
    cf2: &CharacteristicFunction,
    i: usize,
    r_i: f64,
    r2_i: f64,
) -> Result<bool, GameError> {
    check_improvement_premise(cf, cf2, i)?;
    if !(cf2.grand_value() > r_i) {
        return Err(GameError::PremiseNotSatisfied(format!(
            "new grand value {} does not exceed the old reward {r_i}",
            cf2.grand_value()
        )));
    }
    Ok(r2_i > r_i)
}

/// Party monotonicity of the Shapley value: when only party `i`'s data
/// improves, `phi_i` rises by at least as much as any other party's.
pub fn check_party_monotonicity(
    cf: &CharacteristicFunction,
    cf2: &CharacteristicFunction,
    i: usize,
) -> Result<bool, GameError> {
    check_improvement_premise(cf, cf2, i)?;
    let before = exact_shapley(cf)?;
    let after = exact_shapley(cf2)?;
    let gain_i = after.phi[i] - before.phi[i];
    Ok((0..cf.n()).filter(|&j| j != i).all(|j| gain_i >= after.phi[j] - before.phi[j] - AXIOM_TOLERANCE))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MonotoneWitness {
    pub smaller: u32,
    pub larger: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubmodularWitness {
    pub party: usize,
    pub smaller: u32,
    pub larger: u32,
}

/// `v(C') >= v(C)` for all `C ⊆ C'`, within [`AXIOM_TOLERANCE`].
///
/// Up to 12 parties every nested pair is enumerated; beyond that the
/// equivalent single-addition form `v(C + j) >= v(C)` is checked.
pub fn check_monotone(cf: &CharacteristicFunction) -> Result<(), MonotoneWitness> {
    let full = cf.grand_mask();
    let tol = AXIOM_TOLERANCE;
    if cf.n() <= PAIRWISE_LIMIT {
        for larger in 0..=full {
            for smaller in submasks(larger) {
                if cf.value(larger) < cf.value(smaller) - tol {
                    return Err(MonotoneWitness { smaller, larger });
                }
            }
        }
    } else {
        for smaller in 0..=full {
            for j in 0..cf.n() {
                let larger = smaller | (1 << j);
                if larger != smaller && cf.value(larger) < cf.value(smaller) - tol {
                    return Err(MonotoneWitness { smaller, larger });
                }
            }
        }
    }
    Ok(())
}

/// `v(C + i) - v(C) >= v(C' + i) - v(C')` for all `C ⊆ C' ⊆ N \ {i}`,
/// within [`AXIOM_TOLERANCE`].
///
/// Up to 12 parties every nested pair is enumerated; beyond that the
/// equivalent local form with `C' = C + j` is checked.
pub fn check_submodular(cf: &CharacteristicFunction) -> Result<(), SubmodularWitness> {
    let n = cf.n();
    let full = cf.grand_mask();
    let tol = AXIOM_TOLERANCE;
    for i in 0..n {
        let bit = 1u32 << i;
        let gain = |c: u32| cf.value(c | bit) - cf.value(c);
        for larger in submasks(full & !bit) {
            if n <= PAIRWISE_LIMIT {
                for smaller in submasks(larger) {
                    if gain(smaller) < gain(larger) - tol {
                        return Err(SubmodularWitness { party: i, smaller, larger });
                    }
                }
            } else {
                for j in 0..n {
                    let smaller = larger & !(1 << j);
                    if smaller != larger && gain(smaller) < gain(larger) - tol {
                        return Err(SubmodularWitness { party: i, smaller, larger });
                    }
                }
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{allocate, rho_shapley_rewards};

    fn example_one() -> CharacteristicFunction {
        CharacteristicFunction::new(2, vec![0.0, 7.0, 5.0, 8.0]).unwrap()
    }

    #[test]
    fn submask_enumeration() {
        let mut s: Vec<u32> = submasks(0b101).collect();
        s.sort();
        assert_eq!(s, vec![0, 0b001, 0b100, 0b101]);
        assert_eq!(submasks(0).collect::<Vec<_>>(), vec![0]);
    }

    #[test]
    fn worked_example_violates_rationality() {
        let cf = example_one();
        let s = exact_shapley(&cf).unwrap();
        let alloc = allocate(&cf, &s, 1.0).unwrap();
        let report = check_incentives(&cf, &alloc).unwrap();
        assert!(!report.individual_rationality);
        assert!(report.non_negativity && report.feasibility && report.weak_efficiency);
        let r4: Vec<_> = report.violations.iter().filter(|v| v.constraint == "R4").collect();
        assert_eq!(r4.len(), 1);
        assert_eq!(r4[0].party, Some(1));
        assert!((report.group_welfare - 12.8).abs() < 1e-12);
    }

    #[test]
    fn zero_rho_passes_everything() {
        let cf = CharacteristicFunction::new(3, vec![0.0, 1.0, 2.0, 2.5, 1.5, 2.2, 3.0, 3.4]).unwrap();
        let s = exact_shapley(&cf).unwrap();
        let alloc = allocate(&cf, &s, 0.0).unwrap();
        let report = check_incentives(&cf, &alloc).unwrap();
        assert!(report.all_pass(), "{report:?}");
    }

    #[test]
    fn null_party_gets_nothing() {
        // party 2 adds nothing anywhere
        let base = [0.0, 3.0, 2.0, 4.0];
        let cf = CharacteristicFunction::from_fn(3, |m| base[(m & 0b11) as usize]).unwrap();
        let s = exact_shapley(&cf).unwrap();
        assert_eq!(s.phi[2], 0.0);
        let alloc = rho_shapley_rewards(&s, cf.grand_value(), 0.5).unwrap();
        assert_eq!(alloc.rewards[2], 0.0);
        let report = check_fairness_axioms(&cf, &alloc.rewards).unwrap();
        assert!(report.uselessness && report.symmetry && report.strict_desirability, "{report:?}");
        // ... which rho = 0 breaks
        let flat = rho_shapley_rewards(&s, cf.grand_value(), 0.0).unwrap();
        let report = check_fairness_axioms(&cf, &flat.rewards).unwrap();
        assert!(!report.uselessness);
    }

    #[test]
    fn duplicated_parties_are_symmetric() {
        // parties 0 and 1 interchangeable
        let cf = CharacteristicFunction::new(3, vec![0.0, 2.0, 2.0, 3.0, 1.0, 2.5, 2.5, 3.2]).unwrap();
        let s = exact_shapley(&cf).unwrap();
        let alloc = rho_shapley_rewards(&s, cf.grand_value(), 0.7).unwrap();
        let report = check_fairness_axioms(&cf, &alloc.rewards).unwrap();
        assert!(report.symmetry, "{report:?}");
        let skewed = vec![alloc.rewards[0], alloc.rewards[1] - 0.1, alloc.rewards[2]];
        assert!(!check_fairness_axioms(&cf, &skewed).unwrap().symmetry);
    }

    #[test]
    fn own_value_rewards_violate_strict_desirability() {
        // v0 = v1, but party 0 is worth more alongside party 2
        let cf = CharacteristicFunction::new(3, vec![0.0, 1.0, 1.0, 1.5, 1.0, 2.0, 1.5, 2.0]).unwrap();
        let own: Vec<f64> = (0..3).map(|i| cf.singleton(i)).collect();
        let report = check_fairness_axioms(&cf, &own).unwrap();
        assert!(!report.strict_desirability);
        let f3 = report.violations.iter().find(|v| v.constraint == "F3").unwrap();
        assert_eq!((f3.party, f3.other_party, f3.coalition), (Some(0), Some(1), Some(0b100)));
        let s = exact_shapley(&cf).unwrap();
        let shapley = check_fairness_axioms(&cf, &s.phi).unwrap();
        assert!(shapley.violations.is_empty(), "{shapley:?}");
    }

    #[test]
    fn strict_monotonicity_cases() {
        let cf = example_one();
        let cf2 = CharacteristicFunction::new(2, vec![0.0, 7.0, 5.0, 9.0]).unwrap();
        let r = allocate(&cf, &exact_shapley(&cf).unwrap(), 1.0).unwrap();
        let r2 = allocate(&cf2, &exact_shapley(&cf2).unwrap(), 1.0).unwrap();
        assert_eq!(r2.rewards[0], 9.0);
        assert!(check_strict_monotonicity(&cf, &cf2, 0, r.rewards[0], r2.rewards[0]).unwrap());
        assert!(matches!(check_strict_monotonicity(&cf, &cf, 0, 8.0, 8.0), Err(GameError::PremiseNotSatisfied(_))));
        let only_v2 = CharacteristicFunction::new(2, vec![0.0, 7.0, 6.0, 8.0]).unwrap();
        assert!(matches!(
            check_strict_monotonicity(&cf, &only_v2, 0, 8.0, 8.0),
            Err(GameError::PremiseNotSatisfied(_))
        ));
    }

    #[test]
    fn party_monotonicity_cases() {
        let cf = example_one();
        let cf2 = CharacteristicFunction::new(2, vec![0.0, 7.0, 5.0, 9.0]).unwrap();
        let s2 = exact_shapley(&cf2).unwrap();
        assert_eq!(s2.phi, vec![5.5, 3.5]);
        assert!(check_party_monotonicity(&cf, &cf2, 0).unwrap());
        // only the singleton of party 1 changes
        let cf3 = CharacteristicFunction::new(2, vec![0.0, 7.0, 6.0, 8.0]).unwrap();
        assert!(check_party_monotonicity(&cf, &cf3, 1).unwrap());
    }

    #[test]
    fn structural_counterexamples() {
        let superadditive = CharacteristicFunction::new(2, vec![0.0, 1.0, 1.0, 3.0]).unwrap();
        assert!(check_monotone(&superadditive).is_ok());
        let w = check_submodular(&superadditive).unwrap_err();
        assert_eq!(w.smaller, 0);
        let decreasing = CharacteristicFunction::new(2, vec![0.0, 2.0, 0.5, 1.0]).unwrap();
        let w = check_monotone(&decreasing).unwrap_err();
        assert_eq!(cf_gap(&decreasing, w), 1.0);
    }

    fn cf_gap(cf: &CharacteristicFunction, w: MonotoneWitness) -> f64 {
        cf.value(w.smaller) - cf.value(w.larger)
    }

    #[test]
    fn local_and_pairwise_forms_agree() {
        // 13 parties forces the local form; compare on a coverage game and a
        // perturbed one against direct pairwise checks over a sample.
        let cover = |m: u32| -> f64 {
            let mut items = 0u64;
            for i in 0..13 {
                if m & (1 << i) != 0 {
                    items |= 0b111u64 << (i * 2);
                }
            }
            items.count_ones() as f64
        };
        let cf = CharacteristicFunction::from_fn(13, cover).unwrap();
        assert!(check_monotone(&cf).is_ok());
        assert!(check_submodular(&cf).is_ok());
        let bumped = CharacteristicFunction::from_fn(13, |m| cover(m) + if m == 0b11 { 5.0 } else { 0.0 }).unwrap();
        assert!(check_submodular(&bumped).is_err());
        assert!(check_monotone(&bumped).is_err());
    }
}
