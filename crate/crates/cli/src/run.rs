//! Subcommand execution.

use std::collections::BTreeMap;
use std::path::Path;

use log::info;
use model_reward::eval::write_rows;
use model_reward::rng::derive_seed;
use serde::Serialize;

use crate::artifacts::{sha256_hex, Manifest, Output, RunRecord};
use crate::config::{
    DataSource, ExperimentConfig, InducingConfig, ModelConfig, PartyAssignment, ShapleyConfig, TestSource,
};
use crate::error::CliError;
use crate::pipeline;

/// Pipeline stages in order; each command runs every stage up to its own.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, clap::ValueEnum)]
pub enum Command {
    Value,
    Shapley,
    Rewards,
    Realize,
    Evaluate,
    Experiment,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Value => "value",
            Command::Shapley => "shapley",
            Command::Rewards => "rewards",
            Command::Realize => "realize",
            Command::Evaluate => "evaluate",
            Command::Experiment => "experiment",
        }
    }
}

/// Every explicit seed in the config, keyed by its location.
pub fn seeds(cfg: &ExperimentConfig) -> BTreeMap<String, u64> {
    let mut s = BTreeMap::new();
    if let Some(DataSource::Friedman { seed, .. }) = cfg.data {
        s.insert("data".into(), seed);
    }
    if let Some(PartyAssignment::Partition { seed, .. }) = cfg.parties {
        s.insert("parties".into(), seed);
    }
    if let Some(ModelConfig::SparseDtc { inducing: InducingConfig::RandomSubset { seed, .. }, .. }) = cfg.model {
        s.insert("inducing".into(), seed);
    }
    if let ShapleyConfig::Sampled { seed, .. } = cfg.shapley {
        s.insert("shapley".into(), seed);
    }
    match cfg.test {
        Some(TestSource::Holdout { seed, .. }) | Some(TestSource::Friedman { seed, .. }) => {
            s.insert("test".into(), seed);
        }
        _ => {}
    }
    if cfg.data.is_some() {
        s.insert("realization".into(), cfg.realization.seed);
    }
    s
}

/// The config for batch run `(split, partition)`: the holdout seed is
/// derived from the split index and the partition seed from both.
pub fn batch_config(cfg: &ExperimentConfig, split: usize, part: usize) -> ExperimentConfig {
    let mut c = cfg.clone();
    c.batch = None;
    if let Some(TestSource::Holdout { seed, .. }) = &mut c.test {
        *seed = derive_seed(*seed, "split", &[split as u64]);
    }
    if let Some(PartyAssignment::Partition { seed, .. }) = &mut c.parties {
        *seed = derive_seed(*seed, "partition", &[split as u64, part as u64]);
    }
    c
}

fn write_rewards_csv(rows: &[pipeline::RewardRow]) -> Result<Vec<u8>, CliError> {
    let n = rows.first().map_or(0, |r| r.allocation.n());
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| CliError::Numeric(e.to_string());
    let mut header = vec!["label".to_string(), "rho".to_string()];
    header.extend((0..n).map(|i| format!("r_{i}")));
    w.write_record(&header).map_err(csv_err)?;
    for r in rows {
        let mut rec = vec![r.label.clone(), format!("{:?}", r.rho)];
        rec.extend(r.allocation.rewards.iter().map(|v| format!("{v:?}")));
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.into_inner().map_err(|e| CliError::Numeric(e.to_string()))
}

fn csv_bytes<T: Serialize>(rows: &[T]) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    write_rows(&mut buf, rows)?;
    Ok(buf)
}

/// Runs one configuration, writing artifacts under `prefix`.
fn run_single(
    cfg: &ExperimentConfig,
    command: Command,
    out: &mut Output,
    prefix: &str,
    steps: &mut Vec<String>,
) -> Result<(), CliError> {
    let step = |steps: &mut Vec<String>, name: &str| {
        info!("{prefix}{name} done");
        steps.push(format!("{prefix}{name}"));
    };
    let inputs = pipeline::prepare_inputs(cfg)?;
    let (cf, game) = pipeline::value(cfg, inputs.as_ref())?;
    out.write_json(&format!("{prefix}cf.json"), &game)?;
    step(steps, "value");
    if command < Command::Shapley {
        return Ok(());
    }
    let sh = pipeline::shapley(cfg, &cf)?;
    out.write_json(&format!("{prefix}shapley.json"), &sh)?;
    step(steps, "shapley");
    if command < Command::Rewards {
        return Ok(());
    }
    let (rows, thresholds) = pipeline::rewards(cfg, &cf, &sh)?;
    out.write(&format!("{prefix}rewards.csv"), &write_rewards_csv(&rows)?)?;
    out.write_json(&format!("{prefix}thresholds.json"), &thresholds)?;
    step(steps, "rewards");
    if command < Command::Realize {
        return Ok(());
    }
    let inputs = inputs.ok_or_else(|| CliError::Config("realization needs `data`, not an explicit `game`".into()))?;
    let realized = pipeline::realize(cfg, &inputs, &rows)?;
    out.write_json(&format!("{prefix}realization.json"), &realized)?;
    step(steps, "realize");
    if command < Command::Evaluate {
        return Ok(());
    }
    let evaluated = pipeline::evaluate(cfg, &inputs, &realized, &sh)?;
    let records: Vec<_> = evaluated.iter().flat_map(|e| e.report.records.iter().cloned()).collect();
    let summary: Vec<_> = evaluated.iter().flat_map(|e| e.report.summary.iter().cloned()).collect();
    out.write(&format!("{prefix}evaluation.csv"), &csv_bytes(&records)?)?;
    out.write(&format!("{prefix}evaluation_summary.csv"), &csv_bytes(&summary)?)?;
    step(steps, "evaluate");
    Ok(())
}

/// Runs `command` and commits its artifacts to `out_dir`.
pub fn execute(cfg: &ExperimentConfig, config_bytes: &[u8], command: Command, out_dir: &Path) -> Result<(), CliError> {
    let mut out = Output::create(out_dir)?;
    let mut manifest = Manifest {
        tool: "model-reward".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: command.name().into(),
        config_sha256: sha256_hex(config_bytes),
        status: "partial".into(),
        steps: Vec::new(),
        seeds: seeds(cfg),
        runs: Vec::new(),
        artifacts: Vec::new(),
        error: None,
    };
    let result = match cfg.batch {
        None => run_single(cfg, command, &mut out, "", &mut manifest.steps),
        Some(b) => (0..b.splits).flat_map(|s| (0..b.partitions).map(move |p| (s, p))).try_for_each(|(s, p)| {
            let run_cfg = batch_config(cfg, s, p);
            let dir = format!("split{s}_partition{p}");
            manifest.runs.push(RunRecord { dir: dir.clone(), seeds: seeds(&run_cfg) });
            run_single(&run_cfg, command, &mut out, &format!("{dir}/"), &mut manifest.steps)
        }),
    };
    match result {
        Ok(()) => {
            manifest.status = "complete".into();
            out.commit(manifest)
        }
        Err(e) => {
            manifest.error = Some(e.to_string());
            let staging = out.abandon(manifest)?;
            log::error!("partial results left in {}", staging.display());
            Err(e)
        }
    }
}
