//! Models, local training and the federated-averaging update.

mod data;
mod network;

pub use data::{Dataset, CLASSES, IMAGE_PIXELS, IMAGE_SIDE};
pub use network::{softmax, Architecture, LayerParams, Layout, Model, ParamRole};

use rand::seq::SliceRandom;
use rand::Rng;

use crate::{Error, Result};

/// `Δθ_k = θ_after − θ_before` of one client round.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalUpdate {
    pub delta: Vec<f64>,
}

/// Runs `iters` SGD steps from `theta_in` on `shard`.
///
/// Batches are drawn without replacement from one shuffle of the shard,
/// reshuffling when it runs out. A batch larger than the shard is drawn with
/// replacement.
pub fn local_sgd<R: Rng + ?Sized>(
    model: &Model,
    theta_in: &[f64],
    shard: &Dataset,
    iters: usize,
    batch_size: usize,
    lr: f64,
    rng: &mut R,
) -> Result<LocalUpdate> {
    if shard.is_empty() {
        return Err(Error::invalid("local training needs a nonempty shard"));
    }
    if batch_size == 0 {
        return Err(Error::invalid("batch size must be at least 1"));
    }
    let n = shard.len();
    let mut theta = theta_in.to_vec();
    let mut order: Vec<usize> = (0..n).collect();
    let mut cursor = n;
    let mut batch = Vec::with_capacity(batch_size);
    for _ in 0..iters {
        batch.clear();
        if batch_size > n {
            batch.extend((0..batch_size).map(|_| rng.random_range(0..n)));
        } else {
            if cursor + batch_size > n {
                order.shuffle(rng);
                cursor = 0;
            }
            batch.extend_from_slice(&order[cursor..cursor + batch_size]);
            cursor += batch_size;
        }
        let (_, grad) = model.loss_and_grad(&theta, shard, &batch)?;
        for (t, g) in theta.iter_mut().zip(&grad) {
            *t -= lr * g;
        }
    }
    let delta = theta.iter().zip(theta_in).map(|(a, b)| a - b).collect();
    Ok(LocalUpdate { delta })
}

/// Global step size `α_t = base / (decay · t + 1)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GlobalSchedule {
    pub base: f64,
    pub decay: f64,
}

impl Default for GlobalSchedule {
    /// `α_t = 1 / (3 (10⁻⁴ t + 1))`.
    fn default() -> Self {
        Self {
            base: 1.0 / 3.0,
            decay: 1e-4,
        }
    }
}

impl GlobalSchedule {
    pub fn alpha(&self, t: u64) -> f64 {
        self.base / (self.decay * t as f64 + 1.0)
    }
}

/// `θ(t+1) = θ(t) + α_t Δθ̂(t)`.
pub fn global_update(theta: &mut [f64], delta_hat: &[f64], t: u64, schedule: &GlobalSchedule) -> Result<()> {
    if theta.len() != delta_hat.len() {
        return Err(Error::dims("aggregated update", theta.len(), delta_hat.len()));
    }
    let alpha = schedule.alpha(t);
    for (p, d) in theta.iter_mut().zip(delta_hat) {
        *p += alpha * d;
    }
    Ok(())
}

/// Top-1 accuracy and mean cross-entropy. Ties in the arg-max go to the
/// lowest class index.
pub fn evaluate(model: &Model, theta: &[f64], test: &Dataset) -> Result<(f64, f64)> {
    if test.is_empty() {
        return Err(Error::invalid("evaluation needs a nonempty test set"));
    }
    let mut correct = 0usize;
    let mut loss = 0.0;
    for i in 0..test.len() {
        let p = model.predict(theta, test.image(i));
        let mut best = 0;
        for c in 1..CLASSES {
            if p[c] > p[best] {
                best = c;
            }
        }
        if best == test.labels[i] as usize {
            correct += 1;
        }
        loss -= p[test.labels[i] as usize].max(f64::MIN_POSITIVE).ln();
    }
    let n = test.len() as f64;
    Ok((correct as f64 / n, loss / n))
}
