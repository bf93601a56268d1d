//! Browser entry points. Each export takes plain arguments and returns a JSON
//! string; the `*_report` functions behind them are plain Rust so they can be
//! tested natively.

use model_reward::data::{filter_by_feature_range, friedman_generate, sample_rows, standardize, Standardize};
use model_reward::game::{allocate, check_incentives, check_monotone, check_submodular, exact_shapley, Threshold};
use model_reward::models::coalition_values;
use model_reward::realize::Realizer;
use model_reward::rng::derive_seed;
use model_reward::{CharacteristicFunction, Dataset, Eta, KernelSpec, ModelSpec};
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Largest per-party sample size the page may request.
pub const MAX_POINTS_PER_PARTY: usize = 150;

/// Feature-0 ranges of the three demo parties: one broad, two halves.
const PARTY_RANGES: [(f64, f64); 3] = [(0.0, 1.0), (0.0, 0.5), (0.5, 1.0)];

#[derive(Debug, Clone, Serialize)]
pub struct CurvePoint {
    pub rho: f64,
    pub rewards: Vec<f64>,
    pub individually_rational: bool,
    pub stable: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct RewardCurves {
    pub phi: Vec<f64>,
    pub v_n: f64,
    pub singletons: Vec<f64>,
    pub rho_r: Threshold,
    pub rho_s: Threshold,
    pub monotone: bool,
    pub submodular: bool,
    pub points: Vec<CurvePoint>,
}

/// Rewards of every party at `steps` evenly spaced rho values in [0, 1].
pub fn reward_curves_report(game_json: &str, steps: usize) -> Result<RewardCurves, String> {
    let cf = CharacteristicFunction::from_json(game_json).map_err(|e| format!("game: {e}"))?;
    if cf.n() > 10 {
        return Err(format!("{} parties is too many for the page (at most 10)", cf.n()));
    }
    let steps = steps.clamp(2, 201);
    let sh = exact_shapley(&cf).map_err(|e| e.to_string())?;
    let probe = allocate(&cf, &sh, 1.0).map_err(|e| e.to_string())?;
    let points = (0..steps)
        .map(|k| {
            let rho = k as f64 / (steps - 1) as f64;
            let a = allocate(&cf, &sh, rho).map_err(|e| e.to_string())?;
            let rep = check_incentives(&cf, &a).map_err(|e| e.to_string())?;
            Ok(CurvePoint {
                rho,
                rewards: a.rewards,
                individually_rational: rep.individual_rationality,
                stable: rep.stability,
            })
        })
        .collect::<Result<Vec<_>, String>>()?;
    Ok(RewardCurves {
        phi: sh.phi.clone(),
        v_n: cf.grand_value(),
        singletons: (0..cf.n()).map(|i| cf.singleton(i)).collect(),
        rho_r: probe.rho_r.expect("set by allocate"),
        rho_s: probe.rho_s.expect("set by allocate"),
        monotone: check_monotone(&cf).is_ok(),
        submodular: check_submodular(&cf).is_ok(),
        points,
    })
}

/// Three Friedman parties with a standardized SE-kernel GP.
fn friedman_setup(
    points_per_party: usize,
    noise_variance: f64,
    lengthscale: f64,
    seed: u64,
) -> Result<(ModelSpec, Vec<Dataset>), String> {
    if points_per_party == 0 || points_per_party > MAX_POINTS_PER_PARTY {
        return Err(format!("points per party must lie in 1..={MAX_POINTS_PER_PARTY}"));
    }
    if !(noise_variance > 0.0) || !(lengthscale > 0.0) {
        return Err("noise variance and lengthscale must be positive".into());
    }
    let raw = PARTY_RANGES
        .iter()
        .enumerate()
        .map(|(i, &(lo, hi))| {
            let pool = friedman_generate(4 * points_per_party, derive_seed(seed, "demo-party", &[i as u64]));
            let inside = filter_by_feature_range(&pool, 0, lo, hi).map_err(|e| e.to_string())?;
            sample_rows(&inside, points_per_party, derive_seed(seed, "demo-sample", &[i as u64]))
                .map_err(|e| e.to_string())
        })
        .collect::<Result<Vec<_>, String>>()?;
    let pooled = Dataset::concat(&raw).map_err(|e| e.to_string())?;
    let (_, params) = standardize(&pooled, Standardize { inputs: true, outputs: true }).map_err(|e| e.to_string())?;
    let parties = raw.iter().map(|p| params.apply(p)).collect::<Result<Vec<_>, _>>().map_err(|e| e.to_string())?;
    // the sixth feature is irrelevant, so give it a long lengthscale
    let mut ls = vec![lengthscale; 5];
    ls.push(10.0 * lengthscale);
    let model = ModelSpec::gp(KernelSpec::squared_exponential(1.0, ls), noise_variance);
    Ok((model, parties))
}

#[derive(Debug, Clone, Serialize)]
pub struct FriedmanGame {
    pub game: CharacteristicFunction,
    pub curves: RewardCurves,
}

/// Information-gain game of the three Friedman parties with its reward curves.
pub fn friedman_game_report(
    points_per_party: usize,
    noise_variance: f64,
    lengthscale: f64,
    seed: u64,
) -> Result<FriedmanGame, String> {
    let (model, parties) = friedman_setup(points_per_party, noise_variance, lengthscale, seed)?;
    let game = coalition_values(&model, &parties).map_err(|e| e.to_string())?;
    let curves = reward_curves_report(&game.to_json(), 21)?;
    Ok(FriedmanGame { game, curves })
}

#[derive(Debug, Clone, Serialize)]
pub struct GainCurve {
    pub party: usize,
    pub own_value: f64,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct GainCurves {
    pub v_n: f64,
    pub parties: Vec<GainCurve>,
}

/// Information gain of each party's reward model as the noise variance `eta`
/// added to the other parties' outputs sweeps a log grid over [1e-4, 1e4].
pub fn ig_curves_report(
    points_per_party: usize,
    noise_variance: f64,
    lengthscale: f64,
    seed: u64,
    grid: usize,
) -> Result<GainCurves, String> {
    let (model, parties) = friedman_setup(points_per_party, noise_variance, lengthscale, seed)?;
    let realizer = Realizer::new(&model, &parties).map_err(|e| e.to_string())?;
    let grid = grid.clamp(2, 100);
    let etas: Vec<f64> = (0..grid).map(|k| 10f64.powf(-4.0 + 8.0 * k as f64 / (grid - 1) as f64)).collect();
    let parties = (0..realizer.n())
        .map(|i| {
            let points = etas
                .iter()
                .map(|&eta| Ok((eta, realizer.ig(i, Eta::Finite(eta)).map_err(|e| e.to_string())?)))
                .collect::<Result<Vec<_>, String>>()?;
            Ok(GainCurve { party: i, own_value: realizer.own_value(i), points })
        })
        .collect::<Result<Vec<_>, String>>()?;
    Ok(GainCurves { v_n: realizer.v_n(), parties })
}

fn to_js<T: Serialize>(r: Result<T, String>) -> Result<String, JsError> {
    let v = r.map_err(|e| JsError::new(&e))?;
    serde_json::to_string(&v).map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen(js_name = rewardCurves)]
pub fn reward_curves(game_json: &str, steps: usize) -> Result<String, JsError> {
    to_js(reward_curves_report(game_json, steps))
}

#[wasm_bindgen(js_name = friedmanGame)]
pub fn friedman_game(
    points_per_party: usize,
    noise_variance: f64,
    lengthscale: f64,
    seed: u32,
) -> Result<String, JsError> {
    to_js(friedman_game_report(points_per_party, noise_variance, lengthscale, u64::from(seed)))
}

#[wasm_bindgen(js_name = igCurves)]
pub fn ig_curves(
    points_per_party: usize,
    noise_variance: f64,
    lengthscale: f64,
    seed: u32,
    grid: usize,
) -> Result<String, JsError> {
    to_js(ig_curves_report(points_per_party, noise_variance, lengthscale, u64::from(seed), grid))
}
