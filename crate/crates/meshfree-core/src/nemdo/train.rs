//! Adam training with a reduce-on-plateau schedule.
//!
//! The loop is single-threaded and fully deterministic: epoch shuffles are
//! derived from (seed, epoch), batches accumulate in sample order, and the
//! optimizer owns its state, so equal seeds reproduce identical logs and
//! parameters. Resumable state carries the Adam moments so an interrupted
//! run continues exactly as if it had never stopped.

use super::dataset::Dataset;
use super::net::{loss_and_grad, loss_batch};
use super::params::{Layout, Parameters};
use super::ModelConfig;
use crate::error::{Error, Result};
use crate::geometry::NormalizedStencil;
use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::Path;

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps_adam: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Plateau schedule: multiply lr by `factor` after `patience` epochs
    /// without relative validation improvement beyond `threshold`.
    pub plateau_factor: f64,
    pub plateau_patience: usize,
    pub plateau_threshold: f64,
    pub min_lr: f64,
    pub seed: u64,
    pub train_frac: f64,
    pub val_frac: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps_adam: 1e-8,
            epochs: 300,
            batch_size: 256,
            plateau_factor: 0.5,
            plateau_patience: 50,
            plateau_threshold: 1e-4,
            min_lr: 1e-7,
            seed: 0,
            train_frac: 0.8,
            val_frac: 0.1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.beta1 && self.beta1 < 1.0 && 0.0 < self.beta2 && self.beta2 < 1.0) {
            return Err(Error::invalid("Adam betas must lie in (0, 1)"));
        }
        if self.learning_rate <= 0.0 || self.batch_size == 0 || self.epochs == 0 {
            return Err(Error::invalid(
                "learning rate, batch size and epochs must be positive",
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub lr: f64,
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Clone, Debug)]
pub struct TrainResult {
    /// Best-validation parameters.
    pub params: Parameters,
    pub best_val_loss: f64,
    pub best_epoch: usize,
    pub log: Vec<EpochLog>,
    /// Set when a non-finite loss aborted the run; `params` then holds the
    /// last good checkpoint.
    pub diverged_at: Option<usize>,
}

/// Everything needed to continue an interrupted run exactly.
#[derive(Clone, Debug)]
pub struct TrainState {
    pub params: Parameters,
    pub best_params: Parameters,
    pub adam_m: Vec<f64>,
    pub adam_v: Vec<f64>,
    pub adam_t: u64,
    pub next_epoch: usize,
    pub lr: f64,
    pub best_val_loss: f64,
    pub best_epoch: usize,
    pub bad_epochs: usize,
    pub log: Vec<EpochLog>,
}

impl TrainState {
    fn fresh(layout: &Layout, tc: &TrainConfig) -> TrainState {
        let params = Parameters::init(layout, tc.seed);
        TrainState {
            best_params: params.clone(),
            params,
            adam_m: vec![0.0; layout.total()],
            adam_v: vec![0.0; layout.total()],
            adam_t: 0,
            next_epoch: 0,
            lr: tc.learning_rate,
            best_val_loss: f64::INFINITY,
            best_epoch: 0,
            bad_epochs: 0,
            log: Vec::new(),
        }
    }
}

fn mean_loss_chunked(
    config: &ModelConfig,
    layout: &Layout,
    params: &Parameters,
    set: &[&NormalizedStencil],
) -> Result<f64> {
    let mut total = 0.0;
    let mut count = 0usize;
    for chunk in set.chunks(512) {
        let l = loss_batch(config, layout, params, chunk)?;
        total += l * chunk.len() as f64;
        count += chunk.len();
    }
    Ok(total / count as f64)
}

/// Train from scratch.
pub fn train(
    dataset: &Dataset,
    model_config: &ModelConfig,
    tc: &TrainConfig,
) -> Result<TrainResult> {
    let (result, _) = train_resumable(dataset, model_config, tc, None)?;
    Ok(result)
}

/// Train, optionally resuming from a saved state; returns the result and
/// the final state for later resumption.
pub fn train_resumable(
    dataset: &Dataset,
    model_config: &ModelConfig,
    tc: &TrainConfig,
    resume: Option<TrainState>,
) -> Result<(TrainResult, TrainState)> {
    model_config.validate()?;
    tc.validate()?;
    if dataset.stencil_n != model_config.stencil_n {
        return Err(Error::invalid(format!(
            "dataset stencil size {} does not match model {}",
            dataset.stencil_n, model_config.stencil_n
        )));
    }
    let layout = Layout::new(model_config);
    let splits = dataset.split(tc.train_frac, tc.val_frac)?;
    let mut state = match resume {
        Some(s) => {
            if s.params.len() != layout.total() {
                return Err(Error::IncompatibleCheckpoint(
                    "resume state does not match the model layout".into(),
                ));
            }
            s
        }
        None => TrainState::fresh(&layout, tc),
    };

    let n_train = splits.train.len();
    let mut order: Vec<usize> = (0..n_train).collect();
    let mut grad = vec![0.0f64; layout.total()];
    let mut diverged_at = None;

    'epochs: for epoch in state.next_epoch..tc.epochs {
        // shuffle identity order with a per-epoch seed so a resumed run
        // sees exactly the batches of an uninterrupted one
        let mut rng = ChaCha8Rng::seed_from_u64(
            tc.seed ^ (epoch as u64).wrapping_mul(0x9e3779b97f4a7c15) ^ 0x5851f42d4c957f2d,
        );
        for (i, o) in order.iter_mut().enumerate() {
            *o = i;
        }
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch_ids in order.chunks(tc.batch_size) {
            let batch: Vec<&NormalizedStencil> =
                batch_ids.iter().map(|&i| splits.train[i]).collect();
            grad.iter_mut().for_each(|g| *g = 0.0);
            let loss = loss_and_grad(model_config, &layout, &state.params, &batch, &mut grad)?;
            if !loss.is_finite() {
                diverged_at = Some(epoch);
                break 'epochs;
            }
            epoch_loss += loss * batch.len() as f64;
            adam_step(&mut state, &grad, tc);
        }
        let train_loss = epoch_loss / n_train as f64;
        let val_loss = mean_loss_chunked(model_config, &layout, &state.params, &splits.val)?;
        if !val_loss.is_finite() {
            diverged_at = Some(epoch);
            break 'epochs;
        }
        state.log.push(EpochLog {
            epoch,
            lr: state.lr,
            train_loss,
            val_loss,
        });
        // checkpoint on validation improvement, schedule on stagnation
        if val_loss < state.best_val_loss * (1.0 - tc.plateau_threshold) {
            state.best_val_loss = val_loss;
            state.best_epoch = epoch;
            state.best_params = state.params.clone();
            state.bad_epochs = 0;
        } else {
            if val_loss < state.best_val_loss {
                state.best_val_loss = val_loss;
                state.best_epoch = epoch;
                state.best_params = state.params.clone();
            }
            state.bad_epochs += 1;
            if state.bad_epochs > tc.plateau_patience {
                state.lr = (state.lr * tc.plateau_factor).max(tc.min_lr);
                state.bad_epochs = 0;
            }
        }
        state.next_epoch = epoch + 1;
    }

    let result = TrainResult {
        params: state.best_params.clone(),
        best_val_loss: state.best_val_loss,
        best_epoch: state.best_epoch,
        log: state.log.clone(),
        diverged_at,
    };
    Ok((result, state))
}

fn adam_step(state: &mut TrainState, grad: &[f64], tc: &TrainConfig) {
    state.adam_t += 1;
    let t = state.adam_t as i32;
    let bc1 = 1.0 - tc.beta1.powi(t);
    let bc2 = 1.0 - tc.beta2.powi(t);
    let lr = state.lr;
    let p = state.params.as_mut_slice();
    for i in 0..grad.len() {
        let g = grad[i];
        state.adam_m[i] = tc.beta1 * state.adam_m[i] + (1.0 - tc.beta1) * g;
        state.adam_v[i] = tc.beta2 * state.adam_v[i] + (1.0 - tc.beta2) * g * g;
        let mhat = state.adam_m[i] / bc1;
        let vhat = state.adam_v[i] / bc2;
        p[i] -= lr * mhat / (vhat.sqrt() + tc.eps_adam);
    }
}

const STATE_MAGIC: &[u8; 4] = b"MFTS";

impl TrainState {
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        buf.extend_from_slice(STATE_MAGIC);
        buf.extend_from_slice(&1u32.to_le_bytes());
        buf.extend_from_slice(&(self.params.len() as u64).to_le_bytes());
        let push_all = |xs: &[f64], buf: &mut Vec<u8>| {
            for v in xs {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        };
        push_all(self.params.as_slice(), &mut buf);
        push_all(self.best_params.as_slice(), &mut buf);
        push_all(&self.adam_m, &mut buf);
        push_all(&self.adam_v, &mut buf);
        buf.extend_from_slice(&self.adam_t.to_le_bytes());
        buf.extend_from_slice(&(self.next_epoch as u64).to_le_bytes());
        buf.extend_from_slice(&self.lr.to_le_bytes());
        buf.extend_from_slice(&self.best_val_loss.to_le_bytes());
        buf.extend_from_slice(&(self.best_epoch as u64).to_le_bytes());
        buf.extend_from_slice(&(self.bad_epochs as u64).to_le_bytes());
        buf.extend_from_slice(&(self.log.len() as u64).to_le_bytes());
        for e in &self.log {
            buf.extend_from_slice(&(e.epoch as u64).to_le_bytes());
            buf.extend_from_slice(&e.lr.to_le_bytes());
            buf.extend_from_slice(&e.train_loss.to_le_bytes());
            buf.extend_from_slice(&e.val_loss.to_le_bytes());
        }
        std::fs::File::create(path)?.write_all(&buf)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<TrainState> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        let fail = |m: &str| Error::IncompatibleCheckpoint(format!("{}: {m}", path.display()));
        if bytes.len() < 16 || &bytes[..4] != STATE_MAGIC {
            return Err(fail("not a training state file"));
        }
        let mut cur = 4usize;
        let u64_at = |bytes: &[u8], cur: &mut usize| -> u64 {
            let v = u64::from_le_bytes(bytes[*cur..*cur + 8].try_into().unwrap());
            *cur += 8;
            v
        };
        let version = u32::from_le_bytes(bytes[cur..cur + 4].try_into().unwrap());
        cur += 4;
        if version != 1 {
            return Err(fail("unsupported version"));
        }
        let n = u64_at(&bytes, &mut cur) as usize;
        let need = 16 + 4 * n * 8 + 8 * 6 + 8;
        if bytes.len() < need {
            return Err(fail("truncated training state"));
        }
        let take_vec = |bytes: &[u8], cur: &mut usize| -> Vec<f64> {
            let mut v = Vec::with_capacity(n);
            for i in 0..n {
                v.push(f64::from_le_bytes(
                    bytes[*cur + 8 * i..*cur + 8 * i + 8].try_into().unwrap(),
                ));
            }
            *cur += 8 * n;
            v
        };
        let params = Parameters::from_vec(take_vec(&bytes, &mut cur));
        let best_params = Parameters::from_vec(take_vec(&bytes, &mut cur));
        let adam_m = take_vec(&bytes, &mut cur);
        let adam_v = take_vec(&bytes, &mut cur);
        let adam_t = u64_at(&bytes, &mut cur);
        let next_epoch = u64_at(&bytes, &mut cur) as usize;
        let lr = f64::from_le_bytes(bytes[cur..cur + 8].try_into().unwrap());
        cur += 8;
        let best_val_loss = f64::from_le_bytes(bytes[cur..cur + 8].try_into().unwrap());
        cur += 8;
        let best_epoch = u64_at(&bytes, &mut cur) as usize;
        let bad_epochs = u64_at(&bytes, &mut cur) as usize;
        let log_len = u64_at(&bytes, &mut cur) as usize;
        if bytes.len() < cur + log_len * 32 {
            return Err(fail("truncated log"));
        }
        let mut log = Vec::with_capacity(log_len);
        for _ in 0..log_len {
            let epoch = u64_at(&bytes, &mut cur) as usize;
            let lr = f64::from_le_bytes(bytes[cur..cur + 8].try_into().unwrap());
            cur += 8;
            let train_loss = f64::from_le_bytes(bytes[cur..cur + 8].try_into().unwrap());
            cur += 8;
            let val_loss = f64::from_le_bytes(bytes[cur..cur + 8].try_into().unwrap());
            cur += 8;
            log.push(EpochLog {
                epoch,
                lr,
                train_loss,
                val_loss,
            });
        }
        Ok(TrainState {
            params,
            best_params,
            adam_m,
            adam_v,
            adam_t,
            next_epoch,
            lr,
            best_val_loss,
            best_epoch,
            bad_epochs,
            log,
        })
    }
}
