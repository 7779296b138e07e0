//! Training loops: self-supervised pretraining, travel-time finetuning and
//! evaluation. All loops are deterministic for a fixed seed.

use std::path::Path;

use mdti_model::objectives::{metrics, tte_loss, Metrics};
use mdti_model::road_encoder::road_gat;
use mdti_nn::optim::{clip_global_norm, AdamW};
use mdti_nn::{Tape, Tensor};
use mdti_traj::{GridSpec, RoadNetwork, TrajectorySample};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::checkpoint;
use crate::config::TrainConfig;
use crate::error::{MdtiError, Result};
use crate::model::{
    fit_library, precompute_gps, pretrain_batch, predict_tte, MdtiModel,
};
use crate::schedule::Schedule;

/// Adam moment decay rates. Shorter horizons than the common 0.9/0.999: the
/// desk-scale schedules run for a few hundred steps, and the second moment
/// must adapt within that budget or late-breaking gradients (the masked
/// language objective only finds signal after the encoders differentiate) are
/// scaled against stale statistics.
pub const ADAM_BETA1: f64 = 0.85;
pub const ADAM_BETA2: f64 = 0.95;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_cl: f64,
    pub train_mlm: f64,
    pub train_total: f64,
    pub val_cl: f64,
    pub val_mlm: f64,
    pub val_total: f64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct TrainLog {
    pub epochs: Vec<EpochStats>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct EvalReport {
    pub mae: f64,
    pub rmse: f64,
    pub mape: f64,
    pub n: usize,
    pub config_hash: String,
}

/// Batch index lists; a trailing singleton batch is dropped because the
/// contrastive objective is vacuous with a single pair.
fn batch_indices(n: usize, batch_size: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut out: Vec<Vec<usize>> = order.chunks(batch_size).map(|c| c.to_vec()).collect();
    if out.last().is_some_and(|b| b.len() == 1) && out.len() > 1 {
        out.pop();
    }
    out
}

fn check_finite(cl: f64, mlm: f64, total: f64, epoch: usize, batch: usize) -> Result<()> {
    if cl.is_finite() && mlm.is_finite() && total.is_finite() {
        Ok(())
    } else {
        Err(MdtiError::NonFiniteLoss { epoch, batch, cl, mlm })
    }
}

/// Mean losses over a split without parameter updates.
fn eval_losses(
    model: &MdtiModel,
    samples: &[TrajectorySample],
    z_lm: &[Tensor],
    net: &RoadNetwork,
    spec: &GridSpec,
    cfg: &TrainConfig,
    seed: u64,
) -> Result<(f64, f64, f64)> {
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fwd_rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9);
    let (mut cl, mut mlm, mut total, mut count) = (0.0, 0.0, 0.0, 0usize);
    for batch in batch_indices(samples.len(), cfg.batch_size, &mut shuffle_rng) {
        let tape = Tape::new();
        let bound = model.params.bind(&tape);
        let pairs: Vec<(&TrajectorySample, &Tensor)> =
            batch.iter().map(|&i| (&samples[i], &z_lm[i])).collect();
        let losses = pretrain_batch(
            &tape,
            &bound,
            model,
            &pairs,
            net,
            spec,
            cfg.loss_weights,
            false,
            &mut fwd_rng,
        )?;
        cl += losses.cl * batch.len() as f64;
        mlm += losses.mlm * batch.len() as f64;
        total += losses.total.value().item() * batch.len() as f64;
        count += batch.len();
    }
    if count == 0 {
        return Err(MdtiError::EmptySplit("validation".into()));
    }
    let n = count as f64;
    Ok((cl / n, mlm / n, total / n))
}

/// Self-supervised pretraining. Saves the best-validation checkpoint into
/// `out` when given and returns the final model with its epoch log.
pub fn pretrain(
    cfg: &TrainConfig,
    train: &[TrajectorySample],
    val: &[TrajectorySample],
    net: &RoadNetwork,
    spec: &GridSpec,
    out: Option<&Path>,
) -> Result<(MdtiModel, TrainLog)> {
    if train.is_empty() {
        return Err(MdtiError::EmptySplit("train".into()));
    }
    if val.is_empty() {
        return Err(MdtiError::EmptySplit("val".into()));
    }
    cfg.validate()?;
    let seed = cfg.effective_seed();
    let lib = fit_library(train, spec, cfg.k_patterns, seed)?;
    let mut model = MdtiModel::new(cfg.dims(), net.segments.len(), lib, seed)?;
    let embedder = model.embedder();
    let z_train = precompute_gps(train, spec, &model.lib, &embedder)?;
    let z_val = precompute_gps(val, spec, &model.lib, &embedder)?;

    let steps_per_epoch = {
        let mut probe = ChaCha8Rng::seed_from_u64(seed);
        batch_indices(train.len(), cfg.batch_size, &mut probe).len()
    };
    let schedule = Schedule {
        lr: cfg.lr,
        min_lr: cfg.min_lr,
        warmup_steps: cfg.warmup_epochs * steps_per_epoch,
        total_steps: cfg.epochs * steps_per_epoch,
    };
    let mut opt = AdamW::new(cfg.weight_decay);
    opt.beta1 = ADAM_BETA1;
    opt.beta2 = ADAM_BETA2;
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fwd_rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
    let mut log = TrainLog::default();
    let mut best_val = f64::INFINITY;
    let mut global_step = 0usize;

    for epoch in 0..cfg.epochs {
        let (mut cl_sum, mut mlm_sum, mut total_sum, mut count) = (0.0, 0.0, 0.0, 0usize);
        for (b, batch) in batch_indices(train.len(), cfg.batch_size, &mut shuffle_rng)
            .into_iter()
            .enumerate()
        {
            let tape = Tape::new();
            let bound = model.params.bind(&tape);
            let pairs: Vec<(&TrajectorySample, &Tensor)> =
                batch.iter().map(|&i| (&train[i], &z_train[i])).collect();
            let losses = pretrain_batch(
                &tape,
                &bound,
                &model,
                &pairs,
                net,
                spec,
                cfg.loss_weights,
                true,
                &mut fwd_rng,
            )?;
            let total = losses.total.value().item();
            check_finite(losses.cl, losses.mlm, total, epoch, b)?;
            let grads = losses.total.backward();
            model.params.zero_grads();
            model.params.accumulate(&bound, &grads);
            clip_global_norm(&mut model.params, cfg.grad_clip);
            opt.step(&mut model.params, schedule.lr_at(global_step), |_| true);
            global_step += 1;
            cl_sum += losses.cl * batch.len() as f64;
            mlm_sum += losses.mlm * batch.len() as f64;
            total_sum += total * batch.len() as f64;
            count += batch.len();
        }
        let n = count.max(1) as f64;
        let (val_cl, val_mlm, val_total) =
            eval_losses(&model, val, &z_val, net, spec, cfg, seed ^ 0x5645)?;
        let stats = EpochStats {
            epoch,
            train_cl: cl_sum / n,
            train_mlm: mlm_sum / n,
            train_total: total_sum / n,
            val_cl,
            val_mlm,
            val_total,
        };
        println!(
            "epoch {:>3}  train cl {:.4} mlm {:.4} total {:.4}  val cl {:.4} mlm {:.4} total {:.4}",
            stats.epoch,
            stats.train_cl,
            stats.train_mlm,
            stats.train_total,
            stats.val_cl,
            stats.val_mlm,
            stats.val_total
        );
        if val_total < best_val {
            best_val = val_total;
            if let Some(dir) = out {
                checkpoint::save(dir, &model, cfg)?;
            }
        }
        log.epochs.push(stats);
    }
    Ok((model, log))
}

/// Supervised travel-time finetuning with MAE loss. With `freeze` only the
/// prediction head ("tte.") is updated. Returns the per-epoch train MAE.
pub fn finetune_tte(
    model: &mut MdtiModel,
    cfg: &TrainConfig,
    train: &[TrajectorySample],
    net: &RoadNetwork,
    spec: &GridSpec,
    freeze: bool,
) -> Result<Vec<f64>> {
    if train.is_empty() {
        return Err(MdtiError::EmptySplit("train".into()));
    }
    let seed = cfg.effective_seed();
    let embedder = model.embedder();
    let z_train = precompute_gps(train, spec, &model.lib, &embedder)?;
    let steps_per_epoch = {
        let mut probe = ChaCha8Rng::seed_from_u64(seed);
        batch_indices(train.len(), cfg.batch_size, &mut probe).len()
    };
    let schedule = Schedule {
        lr: cfg.lr,
        min_lr: cfg.min_lr,
        warmup_steps: cfg.warmup_epochs * steps_per_epoch,
        total_steps: cfg.epochs * steps_per_epoch,
    };
    let mut opt = AdamW::new(cfg.weight_decay);
    opt.beta1 = ADAM_BETA1;
    opt.beta2 = ADAM_BETA2;
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(2));
    let mut fwd_rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(3));
    let trainable = move |name: &str| !freeze || name.starts_with("tte.");
    let mut epoch_mae = Vec::with_capacity(cfg.epochs);
    let mut global_step = 0usize;

    for epoch in 0..cfg.epochs {
        let (mut abs_sum, mut count) = (0.0, 0usize);
        for (b, batch) in batch_indices(train.len(), cfg.batch_size, &mut shuffle_rng)
            .into_iter()
            .enumerate()
        {
            let tape = Tape::new();
            let bound = model.params.bind(&tape);
            let g_emb = road_gat(&tape, &bound, &model.dims, net)?;
            let mut terms = Vec::with_capacity(batch.len());
            for &i in &batch {
                let pred = predict_tte(
                    &tape,
                    &bound,
                    model,
                    &train[i],
                    &z_train[i],
                    net,
                    spec,
                    &g_emb,
                    true,
                    &mut fwd_rng,
                )?;
                terms.push(tte_loss(&pred, train[i].travel_time));
            }
            let mut loss = terms[0].clone();
            for t in &terms[1..] {
                loss = loss.add(t);
            }
            loss = loss.scale(1.0 / terms.len() as f64);
            let mae = loss.value().item();
            check_finite(mae, 0.0, mae, epoch, b)?;
            let grads = loss.backward();
            model.params.zero_grads();
            model.params.accumulate(&bound, &grads);
            clip_global_norm(&mut model.params, cfg.grad_clip);
            opt.step(&mut model.params, schedule.lr_at(global_step), &trainable);
            global_step += 1;
            abs_sum += mae * batch.len() as f64;
            count += batch.len();
        }
        let mae = abs_sum / count.max(1) as f64;
        println!("finetune epoch {epoch:>3}  train mae {mae:.4}");
        epoch_mae.push(mae);
    }
    Ok(epoch_mae)
}

/// Travel-time predictions for a split, evaluation mode.
pub fn predict_split(
    model: &MdtiModel,
    samples: &[TrajectorySample],
    net: &RoadNetwork,
    spec: &GridSpec,
    batch_size: usize,
) -> Result<Vec<f64>> {
    let embedder = model.embedder();
    let z = precompute_gps(samples, spec, &model.lib, &embedder)?;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut preds = Vec::with_capacity(samples.len());
    for chunk in (0..samples.len()).collect::<Vec<_>>().chunks(batch_size.max(1)) {
        let tape = Tape::new();
        let bound = model.params.bind(&tape);
        let g_emb = road_gat(&tape, &bound, &model.dims, net)?;
        for &i in chunk {
            let pred = predict_tte(
                &tape, &bound, model, &samples[i], &z[i], net, spec, &g_emb, false, &mut rng,
            )?;
            preds.push(pred.value().item());
        }
    }
    Ok(preds)
}

pub fn evaluate(
    model: &MdtiModel,
    cfg: &TrainConfig,
    samples: &[TrajectorySample],
    net: &RoadNetwork,
    spec: &GridSpec,
    split: &str,
) -> Result<EvalReport> {
    if samples.is_empty() {
        return Err(MdtiError::EmptySplit(split.into()));
    }
    let preds = predict_split(model, samples, net, spec, cfg.batch_size)?;
    let targets: Vec<f64> = samples.iter().map(|s| s.travel_time).collect();
    let m: Metrics = metrics(&preds, &targets)?;
    Ok(EvalReport {
        mae: m.mae,
        rmse: m.rmse,
        mape: m.mape,
        n: samples.len(),
        config_hash: cfg.hash(),
    })
}

/// Fixed-length baseline: keep the first `n` GPS points (and their grid
/// cells) and the road segments entered before the cutoff time. The label is
/// unchanged. Samples shorter than `n` pass through as-is.
pub fn truncate_sample(sample: &TrajectorySample, n: usize) -> TrajectorySample {
    let n = n.max(2);
    if sample.gps.points.len() <= n {
        return sample.clone();
    }
    let points = sample.gps.points[..n].to_vec();
    let cutoff = points[n - 1].t;
    let mut segments = Vec::new();
    let mut timestamps = Vec::new();
    for (&s, &t) in sample.road.segments.iter().zip(&sample.road.timestamps) {
        if t <= cutoff {
            segments.push(s);
            timestamps.push(t);
        }
    }
    if segments.is_empty() {
        segments.push(sample.road.segments[0]);
        timestamps.push(sample.road.timestamps[0]);
    }
    TrajectorySample {
        id: sample.id.clone(),
        gps: mdti_traj::GpsTrajectory { points },
        grid: mdti_traj::GridTrajectory {
            cells: sample.grid.cells[..n].to_vec(),
        },
        road: mdti_traj::RoadTrajectory {
            segments,
            timestamps,
        },
        travel_time: sample.travel_time,
    }
}
