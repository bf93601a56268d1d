use super::*;
use crate::data::{friedman_generate, partition, standardize, PartitionSpec, Standardize};
use crate::game::{allocate, exact_shapley};
use crate::models::{coalition_values, KernelSpec};
use crate::realize::{default_tolerance, realize_allocation, RealizationEntry};

fn pd(means: Vec<f64>, variances: Vec<f64>) -> PredictiveDistribution {
    PredictiveDistribution { means, variances }
}

#[test]
fn mnlp_identities() {
    let v = 1.0 / (2.0 * std::f64::consts::PI);
    assert!(mnlp(&pd(vec![1.0, -2.0, 3.0], vec![v; 3]), &[1.0, -2.0, 3.0]).unwrap().abs() < 1e-15);
    let single = mnlp(&pd(vec![0.4], vec![1.0]), &[0.4]).unwrap();
    assert!((single - 0.5 * (2.0 * std::f64::consts::PI).ln()).abs() < 1e-15);
    assert!((single - 0.918939).abs() < 1e-6);
    assert!(mnlp(&pd(vec![0.0], vec![0.0]), &[0.0]).is_err());
    assert!(mnlp(&pd(vec![0.0], vec![1.0]), &[0.0, 1.0]).is_err());
}

#[test]
fn mnlp_matches_log_density_sum() {
    let mut r = rng::stream(3, "mnlp-test", &[]);
    use rand::Rng;
    for _ in 0..20 {
        let k = r.random_range(1..30);
        let means: Vec<f64> = (0..k).map(|_| r.random::<f64>() * 4.0 - 2.0).collect();
        let vars: Vec<f64> = (0..k).map(|_| r.random::<f64>() * 3.0 + 0.01).collect();
        let ys: Vec<f64> = (0..k).map(|_| r.random::<f64>() * 4.0 - 2.0).collect();
        let oracle = -(0..k)
            .map(|i| {
                let sd = vars[i].sqrt();
                let z = (ys[i] - means[i]) / sd;
                (-(0.5 * z * z)).exp().ln() - sd.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln()
            })
            .sum::<f64>()
            / k as f64;
        let got = mnlp(&pd(means, vars), &ys).unwrap();
        assert!((got - oracle).abs() < 1e-12);
    }
}

struct Setup {
    model: ModelSpec,
    parties: Vec<Dataset>,
    test: Dataset,
}

fn friedman_setup(seed: u64) -> Setup {
    let all = friedman_generate(120, seed);
    let (all, _) = standardize(&all, Standardize { inputs: false, outputs: true }).unwrap();
    let idx: Vec<usize> = (0..90).collect();
    let test = all.select(&(90..120).collect::<Vec<_>>());
    let parties = partition(&all.select(&idx), &PartitionSpec { n_parties: 3, min_fraction: 0.2, seed }).unwrap();
    let model = ModelSpec::gp(KernelSpec::squared_exponential(1.0, vec![0.6; 6]), 0.1);
    Setup { model, parties, test }
}

fn plan_with(setup: &Setup, etas: &[Eta]) -> RealizationPlan {
    let cf = coalition_values(&setup.model, &setup.parties).unwrap();
    let entries = etas
        .iter()
        .enumerate()
        .map(|(i, &eta)| RealizationEntry {
            party: i,
            target: 0.0,
            eta,
            achieved_ig: 0.0,
            iterations: 0,
            bracket: None,
            own_value: cf.singleton(i),
        })
        .collect();
    RealizationPlan { tolerance: 1e-6, v_n: cf.grand_value(), entries }
}

#[test]
fn zero_and_infinite_noise_reproduce_baselines() {
    let s = friedman_setup(1);
    let plan = plan_with(&s, &[Eta::Finite(0.0), Eta::OwnDataOnly, Eta::Finite(0.0)]);
    let report = evaluate_allocation(&s.model, &s.parties, &plan, &s.test, 2, 7).unwrap();
    assert_eq!(report.records.len(), 6);
    for r in &report.records {
        if r.party == 1 {
            assert_eq!(r.mnlp_reward, r.mnlp_own);
        } else {
            assert_eq!(r.mnlp_reward, r.mnlp_grand);
        }
    }
    assert_eq!(report.summary[0].mnlp_reward_ci95, 0.0);
}

#[test]
fn report_structure_and_ci() {
    let s = friedman_setup(2);
    let cf = coalition_values(&s.model, &s.parties).unwrap();
    let sh = exact_shapley(&cf).unwrap();
    let rho_r = allocate(&cf, &sh, 0.0).unwrap().rho_r.unwrap();
    let alloc = allocate(&cf, &sh, rho_r.clamped().min(0.5)).unwrap();
    let plan = realize_allocation(&s.model, &s.parties, &alloc, default_tolerance(cf.grand_value())).unwrap();

    let few = evaluate_allocation(&s.model, &s.parties, &plan, &s.test, 5, 3).unwrap();
    let many = evaluate_allocation(&s.model, &s.parties, &plan, &s.test, 40, 3).unwrap();
    assert_eq!(few.records.len(), 15);
    assert_eq!(many.records.len(), 120);
    // realization k is the same draw regardless of how many are requested
    assert_eq!(few.records[..5], many.records[..5]);
    for r in &many.records {
        assert!(r.ig_impr <= r.ig_max_impr + 1e-9);
        assert!(r.ig_impr >= -1e-9);
        assert_eq!(r.mnlp_impr, r.mnlp_own - r.mnlp_reward);
    }
    assert!(plan.etas().iter().any(|e| e.finite().is_some_and(|v| v > 0.0)));
    for (a, b) in few.summary.iter().zip(&many.summary) {
        if a.mnlp_reward_ci95 > 0.0 {
            assert!(b.mnlp_reward_ci95 < a.mnlp_reward_ci95);
        } else {
            assert_eq!(b.mnlp_reward_ci95, 0.0);
        }
    }
    assert_eq!(evaluate_allocation(&s.model, &s.parties, &plan, &s.test, 5, 3).unwrap(), few);

    let mut annotated = few.clone();
    annotated.annotate(0.5, &sh);
    let mut buf = Vec::new();
    annotated.write_records_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with(
        "party,realization,r_i,v_i,v_N,ig_impr,ig_max_impr,mnlp_own,mnlp_reward,mnlp_grand,mnlp_impr,mnlp_max_impr,rho,phi_ratio,eta\n"
    ));
    assert_eq!(text.lines().count(), 16);
    let mut buf = Vec::new();
    annotated.write_summary_csv(&mut buf).unwrap();
    assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 4);
}

#[test]
fn plan_mismatch() {
    let s = friedman_setup(3);
    let plan = plan_with(&s, &[Eta::Finite(0.0), Eta::Finite(0.0)]);
    assert!(evaluate_allocation(&s.model, &s.parties, &plan, &s.test, 1, 0).is_err());
    let plan = plan_with(&s, &[Eta::Finite(0.0); 3]);
    assert!(evaluate_allocation(&s.model, &s.parties, &plan, &s.test, 0, 0).is_err());
}

#[test]
fn mnlp_game() {
    let s = friedman_setup(4);
    let cf = mnlp_characteristic_function(&s.model, &s.parties, &s.test).unwrap();
    assert_eq!(cf.value(0), 0.0);
    // with a full third of the data each, every coalition beats the prior
    assert!(cf.values()[1..].iter().all(|&v| v > 0.0), "{:?}", cf.values());
    assert!(mnlp_characteristic_function(&s.model, &s.parties, &Dataset::empty(6)).is_err());
}

#[test]
fn normalized_rows() {
    let cf = CharacteristicFunction::new(2, vec![0.0, 7.0, 5.0, 8.0]).unwrap();
    let sh = exact_shapley(&cf).unwrap();
    let rows = normalized_comparison(&cf, &cf, &sh, &sh).unwrap();
    for r in &rows {
        assert_eq!(r.value_ig, r.value_mnlp);
        assert_eq!(r.shapley_ig, r.shapley_mnlp);
        assert!(!r.flagged);
    }
    assert_eq!(rows[0].shapley_ig, Some(5.0 / 8.0));

    let one = CharacteristicFunction::new(1, vec![0.0, 3.0]).unwrap();
    let sh1 = exact_shapley(&one).unwrap();
    let rows = normalized_comparison(&one, &one, &sh1, &sh1).unwrap();
    assert_eq!(rows[0].value_ig, Some(1.0));
    assert_eq!(rows[0].shapley_ig, Some(1.0));

    let zero = CharacteristicFunction::new(1, vec![0.0, 0.0]).unwrap();
    let sh0 = exact_shapley(&zero).unwrap();
    assert!(normalized_comparison(&one, &zero, &sh1, &sh0).unwrap()[0].flagged);
    assert!(normalized_comparison(&cf, &one, &sh, &sh1).is_err());
}

#[test]
fn friedman_shapley_normalized() {
    let s = friedman_setup(5);
    let cf = coalition_values(&s.model, &s.parties).unwrap();
    let sh = exact_shapley(&cf).unwrap();
    let rows = normalized_comparison(&cf, &cf, &sh, &sh).unwrap();
    let total: f64 = rows.iter().map(|r| r.shapley_ig.unwrap()).sum();
    assert!(rows.iter().all(|r| (0.0..=1.0).contains(&r.shapley_ig.unwrap())));
    assert!(total <= 1.0 + 1e-9);
}
