//! REINFORCE with a greedy-rollout baseline.
//!
//! Every random draw is keyed through [`crate::seeds::derive`] by its role and
//! position, and gradients are reduced in a fixed chunk order, so a run is a
//! pure function of its config regardless of thread count, and resuming from
//! an epoch checkpoint reproduces the uninterrupted run.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use csp_autodiff::checkpoint::Checkpoint;
use csp_autodiff::{AdamConfig, ParamStore, Tape};
use csp_core::{generate_with, CoverageSpec, CspInstance, SpecGenerator};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::decoder::{rollout, rollout_on_tape, Decode};
use crate::params::model_from_checkpoint;
use crate::seeds::{self, derive};
use crate::{init_params, EncoderConfig, ModelError, Result};

pub const BASELINE_PREFIX: &str = "baseline.";

/// Instances per gradient-reduction chunk. Fixed so that the floating-point
/// summation order does not depend on the thread pool.
const CHUNK: usize = 8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub model: EncoderConfig,
    pub n_cities: usize,
    pub spec: SpecGenerator,
    pub batch_size: usize,
    pub epochs: usize,
    pub steps_per_epoch: usize,
    pub lr: f64,
    pub validation_size: usize,
    pub seed: u64,
    /// When false, `wall_time_s` is written as 0 so metric files from equal
    /// configs are byte-identical.
    pub record_wall_time: bool,
}

impl TrainConfig {
    /// 50 epochs of 320,000 instances in batches of 256.
    pub fn paper(n_cities: usize) -> Self {
        TrainConfig {
            model: EncoderConfig::default(),
            n_cities,
            spec: SpecGenerator::Fixed(CoverageSpec::KNearest { k: 7 }),
            batch_size: 256,
            epochs: 50,
            steps_per_epoch: 1250,
            lr: 1e-4,
            validation_size: 1000,
            seed: 0,
            record_wall_time: true,
        }
    }

    /// 10 epochs of 157 batches of 64 (10,048 instances per epoch).
    pub fn desk(n_cities: usize) -> Self {
        TrainConfig {
            batch_size: 64,
            epochs: 10,
            steps_per_epoch: 157,
            ..TrainConfig::paper(n_cities)
        }
    }

    pub fn instances_per_epoch(&self) -> usize {
        self.batch_size * self.steps_per_epoch
    }

    /// Smallest step count covering `instances` per epoch.
    pub fn with_instances_per_epoch(mut self, instances: usize) -> Self {
        self.steps_per_epoch = instances.div_ceil(self.batch_size.max(1)).max(1);
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        let positive = [
            self.n_cities,
            self.batch_size,
            self.steps_per_epoch,
            self.validation_size,
        ];
        if positive.contains(&0) {
            return Err(ModelError::Config(
                "cities, batch size, steps and validation size must be positive".into(),
            ));
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(ModelError::Config(format!("learning rate {} must be positive", self.lr)));
        }
        Ok(())
    }
}

pub fn training_instance(cfg: &TrainConfig, epoch: usize, step: usize, i: usize) -> Result<CspInstance> {
    let seed = derive(cfg.seed, &[seeds::TRAIN_INSTANCE, epoch as u64, step as u64, i as u64]);
    Ok(generate_with(cfg.n_cities, &cfg.spec, seed)?)
}

pub fn validation_set(cfg: &TrainConfig) -> Result<Vec<CspInstance>> {
    (0..cfg.validation_size)
        .map(|i| {
            let seed = derive(cfg.seed, &[seeds::VALIDATION, i as u64]);
            Ok(generate_with(cfg.n_cities, &cfg.spec, seed)?)
        })
        .collect()
}

/// Mean greedy cost over `instances`, summed in order.
pub fn validate(params: &ParamStore, model: &EncoderConfig, instances: &[CspInstance]) -> Result<f64> {
    if instances.is_empty() {
        return Err(ModelError::Config("empty validation set".into()));
    }
    let costs = greedy_costs(params, model, instances)?;
    Ok(costs.iter().sum::<f64>() / costs.len() as f64)
}

pub fn greedy_costs(params: &ParamStore, model: &EncoderConfig, instances: &[CspInstance]) -> Result<Vec<f64>> {
    instances
        .par_iter()
        .map(|inst| Ok(rollout(params, model, inst, Decode::Greedy)?.cost))
        .collect()
}

#[derive(Clone, Debug)]
pub struct BatchResult {
    /// Gradient buffers of the loss; values are a copy of the parameters.
    pub grads: ParamStore,
    pub loss: f64,
    pub mean_sample_cost: f64,
    pub mean_baseline_cost: f64,
}

/// Surrogate loss `(1/B) sum_i (L(pi_i) - L(pi_i*)) * log p(pi_i)`, the
/// advantage held constant, with its gradient. A descent step lowers the
/// probability of samples that are longer than the baseline's tour. `sample_seeds[i]` drives the sampled rollout
/// of `instances[i]`.
pub fn reinforce_batch_loss(
    params: &ParamStore,
    baseline: &ParamStore,
    model: &EncoderConfig,
    instances: &[CspInstance],
    sample_seeds: &[u64],
) -> Result<BatchResult> {
    if instances.is_empty() || instances.len() != sample_seeds.len() {
        return Err(ModelError::Config("one sample seed per instance is required".into()));
    }
    let b = instances.len() as f64;
    let base = greedy_costs(baseline, model, instances)?;
    let work: Vec<(usize, &CspInstance)> = instances.iter().enumerate().collect();
    let chunks: Vec<(ParamStore, f64, f64)> = work
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut acc = params.snapshot();
            let (mut loss, mut cost) = (0.0, 0.0);
            for &(i, inst) in chunk {
                let mut tape = Tape::new();
                let r = rollout_on_tape(&mut tape, params, model, inst, Decode::Sample(sample_seeds[i]))?;
                let adv = r.cost - base[i];
                let logp = tape.value(r.log_prob).item();
                loss += adv * logp / b;
                cost += r.cost;
                if adv != 0.0 {
                    let g = tape.backward_seeded(r.log_prob, adv / b)?;
                    tape.accumulate_into(&g, &mut acc, 1.0)?;
                }
            }
            Ok((acc, loss, cost))
        })
        .collect::<Result<_>>()?;
    let mut grads = params.snapshot();
    let (mut loss, mut cost) = (0.0, 0.0);
    for (g, l, c) in &chunks {
        grads.merge_grads(g)?;
        loss += l;
        cost += c;
    }
    Ok(BatchResult {
        grads,
        loss,
        mean_sample_cost: cost / b,
        mean_baseline_cost: base.iter().sum::<f64>() / b,
    })
}

#[derive(Clone, Debug)]
pub struct BaselineState {
    pub params: ParamStore,
    pub cost: f64,
}

/// Replaces the baseline iff `cost` is strictly lower. Returns whether it did.
pub fn maybe_update_baseline(state: &mut BaselineState, candidate: &ParamStore, cost: f64) -> bool {
    if cost < state.cost {
        state.params = candidate.snapshot();
        state.cost = cost;
        true
    } else {
        false
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub epoch: usize,
    pub step: usize,
    pub mean_sample_cost: f64,
    pub mean_baseline_cost: f64,
    pub loss: f64,
    pub wall_time_s: f64,
    pub baseline_replaced: u8,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRow {
    pub epoch: usize,
    pub validation_cost: f64,
    pub baseline_cost: f64,
    pub baseline_replaced: u8,
    pub wall_time_s: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub params: ParamStore,
    pub baseline: BaselineState,
    /// Validation cost of the untrained model.
    pub initial_validation_cost: f64,
    /// Validation cost of the trained model after every epoch.
    pub epochs: Vec<EpochRow>,
    pub out_dir: PathBuf,
}

pub fn epoch_checkpoint_path(dir: &Path, epoch: usize) -> PathBuf {
    dir.join(format!("ckpt_epoch{epoch}.bin"))
}

pub fn best_checkpoint_path(dir: &Path) -> PathBuf {
    dir.join("ckpt_best.bin")
}

fn write_checkpoint(
    path: &Path,
    cfg: &TrainConfig,
    params: &ParamStore,
    baseline: &BaselineState,
    epoch: usize,
    initial_cost: f64,
) -> Result<()> {
    let mut ck = Checkpoint::new(serde_json::json!({
        "model": cfg.model,
        "train": cfg,
        "epoch": epoch,
        "baseline_cost": baseline.cost,
        "initial_validation_cost": initial_cost,
    }));
    ck.arrays = params.to_named_arrays("");
    ck.arrays.extend(
        baseline
            .params
            .to_named_arrays(BASELINE_PREFIX)
            .into_iter()
            .filter(|(n, _)| !n[BASELINE_PREFIX.len()..].starts_with("adam.")),
    );
    ck.write(path)?;
    Ok(())
}

fn write_model_checkpoint(path: &Path, cfg: &TrainConfig, params: &ParamStore, cost: f64) -> Result<()> {
    let mut ck = Checkpoint::new(serde_json::json!({
        "model": cfg.model,
        "train": cfg,
        "validation_cost": cost,
    }));
    ck.arrays = params.to_named_arrays("");
    ck.write(path)?;
    Ok(())
}

struct Resumed {
    epoch: usize,
    params: ParamStore,
    baseline: BaselineState,
    initial_cost: f64,
}

fn latest_checkpoint(dir: &Path, cfg: &TrainConfig) -> Result<Option<Resumed>> {
    let mut latest = None;
    for k in 0..=cfg.epochs {
        if epoch_checkpoint_path(dir, k).exists() {
            latest = Some(k);
        }
    }
    let Some(k) = latest else { return Ok(None) };
    let ck = Checkpoint::read(&epoch_checkpoint_path(dir, k))?;
    let saved: TrainConfig = serde_json::from_value(ck.meta["train"].clone())
        .map_err(|e| ModelError::Config(format!("checkpoint lacks a training config: {e}")))?;
    if (TrainConfig { epochs: cfg.epochs, ..saved }) != *cfg {
        return Err(ModelError::Config(
            "checkpoint in the output directory was written with a different configuration".into(),
        ));
    }
    let (_, params) = model_from_checkpoint(&ck)?;
    let base = ParamStore::from_named_arrays(&ck.arrays, BASELINE_PREFIX)?;
    let num = |key: &str| {
        ck.meta[key]
            .as_f64()
            .ok_or_else(|| ModelError::Config(format!("checkpoint meta lacks `{key}`")))
    };
    Ok(Some(Resumed {
        epoch: k,
        params,
        baseline: BaselineState {
            params: base,
            cost: num("baseline_cost")?,
        },
        initial_cost: num("initial_validation_cost")?,
    }))
}

/// Keeps the rows of epochs before `epoch` (a crashed run may have left a
/// partial epoch behind) and returns a writer appending to the file.
fn open_rows<T: Serialize + serde::de::DeserializeOwned>(
    path: &Path,
    keep: impl Fn(&T) -> bool,
) -> Result<(csv::Writer<fs::File>, Vec<T>)> {
    let mut kept = Vec::new();
    if path.exists() {
        let mut rd = csv::Reader::from_path(path)?;
        for row in rd.deserialize() {
            let row: T = row?;
            if keep(&row) {
                kept.push(row);
            }
        }
    }
    let mut wr = csv::Writer::from_path(path)?;
    for row in &kept {
        wr.serialize(row)?;
    }
    wr.flush()?;
    Ok((wr, kept))
}

/// Runs (or resumes) training, writing `metrics.csv`, `epochs.csv` and
/// checkpoints into `out_dir`.
pub fn train(cfg: &TrainConfig, out_dir: &Path) -> Result<TrainOutcome> {
    cfg.validate()?;
    fs::create_dir_all(out_dir)?;
    let started = Instant::now();
    let clock = |t: &Instant| if cfg.record_wall_time { t.elapsed().as_secs_f64() } else { 0.0 };
    let valset = validation_set(cfg)?;

    let (start_epoch, mut params, mut baseline, initial_cost) = match latest_checkpoint(out_dir, cfg)? {
        Some(r) => {
            log::info!("resuming from epoch {}", r.epoch);
            (r.epoch, r.params, r.baseline, r.initial_cost)
        }
        None => {
            let params = init_params(&cfg.model, derive(cfg.seed, &[seeds::INIT]))?;
            let cost = validate(&params, &cfg.model, &valset)?;
            let baseline = BaselineState {
                params: params.snapshot(),
                cost,
            };
            write_checkpoint(&epoch_checkpoint_path(out_dir, 0), cfg, &params, &baseline, 0, cost)?;
            write_model_checkpoint(&best_checkpoint_path(out_dir), cfg, &baseline.params, cost)?;
            (0, params, baseline, cost)
        }
    };
    log::info!("initial validation cost {initial_cost:.4}");

    let (mut metrics, _) = open_rows::<MetricsRow>(&out_dir.join("metrics.csv"), |r| r.epoch < start_epoch)?;
    let (mut epochs_wr, mut epoch_rows) =
        open_rows::<EpochRow>(&out_dir.join("epochs.csv"), |r| r.epoch < start_epoch)?;

    for epoch in start_epoch..cfg.epochs {
        let mut last_row = None;
        for step in 0..cfg.steps_per_epoch {
            let instances = (0..cfg.batch_size)
                .map(|i| training_instance(cfg, epoch, step, i))
                .collect::<Result<Vec<_>>>()?;
            let sample_seeds: Vec<u64> = (0..cfg.batch_size)
                .map(|i| derive(cfg.seed, &[seeds::SAMPLE, epoch as u64, step as u64, i as u64]))
                .collect();
            let batch = reinforce_batch_loss(&params, &baseline.params, &cfg.model, &instances, &sample_seeds)?;
            if !batch.loss.is_finite() || !batch.grads.grads_finite() {
                let path = out_dir.join(format!("ckpt_diag_epoch{epoch}_step{step}.bin"));
                write_checkpoint(&path, cfg, &params, &baseline, epoch, initial_cost)?;
                return Err(ModelError::NonFiniteLoss {
                    epoch,
                    step,
                    path: path.display().to_string(),
                });
            }
            params.merge_grads(&batch.grads)?;
            params.adam_step(cfg.lr, AdamConfig::default());
            if let Some(row) = last_row.take() {
                metrics.serialize(row)?;
            }
            last_row = Some(MetricsRow {
                epoch,
                step,
                mean_sample_cost: batch.mean_sample_cost,
                mean_baseline_cost: batch.mean_baseline_cost,
                loss: batch.loss,
                wall_time_s: clock(&started),
                baseline_replaced: 0,
            });
            if step % 10 == 0 {
                log::debug!(
                    "epoch {epoch} step {step}: sample {:.4} baseline {:.4} loss {:.5}",
                    batch.mean_sample_cost,
                    batch.mean_baseline_cost,
                    batch.loss
                );
            }
        }
        let val = validate(&params, &cfg.model, &valset)?;
        let replaced = maybe_update_baseline(&mut baseline, &params, val);
        if let Some(mut row) = last_row {
            row.baseline_replaced = replaced as u8;
            metrics.serialize(row)?;
        }
        metrics.flush()?;
        let row = EpochRow {
            epoch,
            validation_cost: val,
            baseline_cost: baseline.cost,
            baseline_replaced: replaced as u8,
            wall_time_s: clock(&started),
        };
        epochs_wr.serialize(&row)?;
        epochs_wr.flush()?;
        epoch_rows.push(row);
        log::info!(
            "epoch {epoch}: validation {val:.4}, baseline {:.4}{}",
            baseline.cost,
            if replaced { " (replaced)" } else { "" }
        );
        if replaced {
            write_model_checkpoint(&best_checkpoint_path(out_dir), cfg, &baseline.params, baseline.cost)?;
        }
        write_checkpoint(
            &epoch_checkpoint_path(out_dir, epoch + 1),
            cfg,
            &params,
            &baseline,
            epoch + 1,
            initial_cost,
        )?;
    }
    Ok(TrainOutcome {
        params,
        baseline,
        initial_validation_cost: initial_cost,
        epochs: epoch_rows,
        out_dir: out_dir.to_path_buf(),
    })
}
