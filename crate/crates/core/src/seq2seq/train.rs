//! Minibatch training loop shared by every model.

use log::{debug, info};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::optim::{AdamW, OptimConfig};
use super::params::{Grads, ParamStore};
use super::tape::{Tape, Var};
use super::Seq2SeqError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub steps: usize,
    pub batch_size: usize,
    pub optim: OptimConfig,
    pub seed: u64,
    /// Run the validation hook every this many steps (0 disables it).
    pub eval_every: usize,
    pub dropout: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { steps: 1000, batch_size: 8, optim: OptimConfig::default(), seed: 0, eval_every: 0, dropout: false }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean loss of each optimizer step.
    pub losses: Vec<f64>,
    pub skipped: usize,
    /// Step and score of the kept checkpoint when validation ran.
    pub best: Option<(usize, f64)>,
}

/// Validation callback: higher is better.
pub type Validate<'a> = &'a mut dyn FnMut(&ParamStore) -> f64;

/// Minimizes the mean of `loss` over shuffled minibatches. `loss` returns
/// `None` for examples that cannot be used. With a validation hook, the
/// parameters scoring best are restored at the end.
pub fn train_loop<E>(
    store: &mut ParamStore,
    examples: &[E],
    cfg: &TrainConfig,
    loss: impl Fn(&mut Tape<'_>, &E) -> Option<Var>,
    mut validate: Option<Validate<'_>>,
) -> Result<TrainReport, Seq2SeqError> {
    let mut report = TrainReport::default();
    if cfg.steps == 0 || examples.is_empty() {
        return Ok(report);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..examples.len()).collect();
    order.shuffle(&mut rng);
    let mut cursor = 0;
    let mut opt = AdamW::new(store, cfg.optim.clone());
    let mut best: Option<(usize, f64, ParamStore)> = None;
    for step in 0..cfg.steps {
        let mut grads = Grads::zeros_like(store);
        let mut total = 0.0;
        let mut used = 0;
        for b in 0..cfg.batch_size {
            if cursor == order.len() {
                order.shuffle(&mut rng);
                cursor = 0;
            }
            let ex = &examples[order[cursor]];
            cursor += 1;
            let mut tape = Tape::new(store);
            if cfg.dropout {
                tape = tape.with_dropout(cfg.seed ^ ((step as u64) << 20) ^ b as u64);
            }
            let Some(l) = loss(&mut tape, ex) else {
                report.skipped += 1;
                continue;
            };
            let value = tape.value(l).item();
            if !value.is_finite() {
                return Err(Seq2SeqError::NonFinite(format!("training step {step}")));
            }
            total += value;
            used += 1;
            grads.merge(&tape.backward(l));
        }
        if used == 0 {
            continue;
        }
        grads.scale(1.0 / used as f64);
        let norm = opt.step(store, &grads);
        let mean = total / used as f64;
        report.losses.push(mean);
        if !store.all_finite() {
            return Err(Seq2SeqError::NonFinite(format!("parameters after step {step} (grad norm {norm})")));
        }
        if step % 50 == 0 || step + 1 == cfg.steps {
            debug!("step {step} loss {mean:.4} grad-norm {norm:.3}");
        }
        if let Some(v) = validate.as_mut() {
            if cfg.eval_every > 0 && ((step + 1) % cfg.eval_every == 0 || step + 1 == cfg.steps) {
                let score = v(store);
                info!("step {} validation {score:.4}", step + 1);
                if best.as_ref().is_none_or(|b| score > b.1) {
                    best = Some((step + 1, score, store.clone()));
                }
            }
        }
    }
    if let Some((step, score, params)) = best {
        *store = params;
        report.best = Some((step, score));
    }
    Ok(report)
}
