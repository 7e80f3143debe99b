//! The optimizers: noisy projected SGD, a per-example-clipping baseline, and
//! plain SGD, all driven by one seed split into (init, batch, noise)
//! substreams.
//!
//! One iteration of the noisy trainer is
//! `θ_{k+1} = Π_C(θ_k − η_k ∇L_{B_k}(θ_k) + √(2 η_k σ²) z_k)` with `z_k`
//! standard normal per coordinate and `B_k` a fresh uniform size-m batch.
//! The gradient is evaluated at θ_k before the noise is added, and the
//! projection is applied last.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::{LossConstants, LossModel};
use crate::rng::{sample_batch, substream, Purpose};
use crate::types::{l2_norm, Dataset, L2Ball, RunSeed, StepSchedule};

/// Pre-projection norm blowup treated as divergence rather than silently
/// projected away; signals mis-set constants.
const DIVERGENCE_FACTOR: f64 = 1e6;

/// Which step-size cap the configuration must respect: the privacy theorem
/// needs η < 1/β, the utility lemmas η ≤ 1/(2β).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Privacy,
    Utility,
}

/// Parameters of one training run.
#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub iterations: usize,
    pub sigma2: f64,
    pub schedule: StepSchedule,
    pub ball: L2Ball,
    pub seed: RunSeed,
    pub mode: Mode,
    /// Record (k, θ_k) every `snapshot_stride` iterations; 0 disables
    /// snapshots. k = 0 is always included when enabled.
    pub snapshot_stride: usize,
    /// Record the full empirical loss at every iterate (k = 0..=K).
    pub record_loss: bool,
}

impl TrainConfig {
    pub fn validate(&self, constants: &LossConstants, n: usize) -> Result<()> {
        if self.batch_size == 0 || self.batch_size > n {
            return Err(Error::InvalidInput(format!(
                "batch size must satisfy 1 <= m <= n, got m = {}, n = {n}",
                self.batch_size
            )));
        }
        if !self.sigma2.is_finite() || self.sigma2 < 0.0 {
            return Err(Error::InvalidInput(format!(
                "noise variance must be finite and nonnegative, got {}",
                self.sigma2
            )));
        }
        if self.iterations > 0 {
            let max_eta = self.schedule.max_eta(self.iterations)?;
            match self.mode {
                Mode::Privacy => {
                    let cap = 1.0 / constants.beta;
                    if max_eta >= cap {
                        return Err(Error::InvalidInput(format!(
                            "privacy mode requires every step size < 1/beta = {cap}, schedule reaches {max_eta}"
                        )));
                    }
                }
                Mode::Utility => {
                    let cap = 1.0 / (2.0 * constants.beta);
                    if max_eta > cap {
                        return Err(Error::InvalidInput(format!(
                            "utility mode requires every step size <= 1/(2 beta) = {cap}, schedule reaches {max_eta}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// One epoch is ⌈n/m⌉ iterations.
pub fn iterations_for_epochs(epochs: usize, n: usize, m: usize) -> usize {
    epochs * n.div_ceil(m)
}

/// Everything a finished run exposes: the released final iterate, optional
/// intermediate snapshots and per-iteration losses, and the seed that
/// reproduces all of it.
///
/// The privacy bound covers only `final_theta`; the intermediate snapshots
/// and loss traces assume private internal state and exist for utility
/// measurement and debugging, not for release.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub snapshots: Vec<(usize, Vec<f64>)>,
    pub final_theta: Vec<f64>,
    pub losses: Option<Vec<f64>>,
    pub seed: RunSeed,
}

impl Trajectory {
    /// θ_k if it was snapshotted.
    pub fn snapshot(&self, k: usize) -> Option<&[f64]> {
        self.snapshots
            .iter()
            .find(|(i, _)| *i == k)
            .map(|(_, t)| t.as_slice())
    }
}

/// Draws θ₀ ~ Π_C(N(0, (2σ²/λ)·I_d)).
pub fn init_theta(
    d: usize,
    sigma2: f64,
    lambda: f64,
    ball: &L2Ball,
    rng: &mut impl Rng,
) -> Result<Vec<f64>> {
    if !(sigma2.is_finite() && sigma2 >= 0.0) || !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::InvalidInput(format!(
            "init needs sigma2 >= 0 and lambda > 0, got sigma2 = {sigma2}, lambda = {lambda}"
        )));
    }
    let sd = (2.0 * sigma2 / lambda).sqrt();
    let mut theta: Vec<f64> = (0..d)
        .map(|_| sd * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng))
        .collect();
    ball.project_in_place(&mut theta)?;
    Ok(theta)
}

enum Clip {
    Off,
    Norm(f64),
}

/// DP-SGLD: noisy projected stochastic gradient descent from the Gaussian
/// start point required by the privacy theorem.
pub fn dp_sgld_train(
    config: &TrainConfig,
    data: &Dataset,
    loss: &impl LossModel,
    constants: &LossConstants,
) -> Result<Trajectory> {
    config.validate(constants, data.n())?;
    let mut init_rng = substream(config.seed, Purpose::Init);
    let theta0 = init_theta(
        loss.dim(data),
        config.sigma2,
        constants.lambda,
        &config.ball,
        &mut init_rng,
    )?;
    run(config, data, loss, theta0, Clip::Off)
}

/// DP-SGLD from an explicit start point (projected onto the ball first).
/// Used for warm starts and for isolating the noise stream in tests.
pub fn dp_sgld_train_from(
    config: &TrainConfig,
    data: &Dataset,
    loss: &impl LossModel,
    constants: &LossConstants,
    theta0: Vec<f64>,
) -> Result<Trajectory> {
    config.validate(constants, data.n())?;
    run(config, data, loss, theta0, Clip::Off)
}

/// Clipped-Gaussian baseline: per-example gradients are rescaled to norm at
/// most `clip_norm` before averaging; noise, projection and initialization
/// match [`dp_sgld_train`], so a clip at or above the certified L reproduces
/// it exactly.
pub fn dp_sgd_train(
    config: &TrainConfig,
    data: &Dataset,
    loss: &impl LossModel,
    constants: &LossConstants,
    clip_norm: f64,
) -> Result<Trajectory> {
    if !clip_norm.is_finite() || clip_norm <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "clip norm must be finite and positive, got {clip_norm}"
        )));
    }
    config.validate(constants, data.n())?;
    let mut init_rng = substream(config.seed, Purpose::Init);
    let theta0 = init_theta(
        loss.dim(data),
        config.sigma2,
        constants.lambda,
        &config.ball,
        &mut init_rng,
    )?;
    run(config, data, loss, theta0, Clip::Norm(clip_norm))
}

/// Non-private baseline: σ² = 0 and θ₀ = 0.
pub fn sgd_train(
    config: &TrainConfig,
    data: &Dataset,
    loss: &impl LossModel,
    constants: &LossConstants,
) -> Result<Trajectory> {
    let mut cfg = config.clone();
    cfg.sigma2 = 0.0;
    cfg.validate(constants, data.n())?;
    run(&cfg, data, loss, vec![0.0; loss.dim(data)], Clip::Off)
}

fn run(
    config: &TrainConfig,
    data: &Dataset,
    loss: &impl LossModel,
    mut theta: Vec<f64>,
    clip: Clip,
) -> Result<Trajectory> {
    let d = theta.len();
    config.ball.project_in_place(&mut theta)?;

    let mut batch_rng = substream(config.seed, Purpose::Batch);
    let mut noise_rng = substream(config.seed, Purpose::Noise);

    let mut grad = vec![0.0; d];
    let mut scratch = vec![0.0; d];

    let mut snapshots = Vec::new();
    if config.snapshot_stride > 0 {
        snapshots.push((0, theta.clone()));
    }
    let mut losses = if config.record_loss {
        Some(vec![loss.value_all(&theta, data)?])
    } else {
        None
    };

    let guard = DIVERGENCE_FACTOR * config.ball.radius();
    for k in 0..config.iterations {
        let eta = config.schedule.eta(k)?;
        let idx = sample_batch(data.n(), config.batch_size, &mut batch_rng)?;

        match clip {
            Clip::Off => loss.batch_grad(&theta, data, &idx, &mut grad, &mut scratch)?,
            Clip::Norm(c) => {
                grad.fill(0.0);
                for &i in &idx {
                    loss.example_grad(&theta, data, i, &mut scratch)?;
                    let norm = l2_norm(&scratch);
                    if norm > c {
                        let scale = c / norm;
                        for s in scratch.iter_mut() {
                            *s *= scale;
                        }
                    }
                    for (g, s) in grad.iter_mut().zip(&scratch) {
                        *g += s;
                    }
                }
                let inv = 1.0 / idx.len() as f64;
                for g in grad.iter_mut() {
                    *g *= inv;
                }
            }
        }

        if config.sigma2 > 0.0 {
            let noise_scale = (2.0 * eta * config.sigma2).sqrt();
            for (t, g) in theta.iter_mut().zip(&grad) {
                let z: f64 = StandardNormal.sample(&mut noise_rng);
                *t = *t - eta * g + noise_scale * z;
            }
        } else {
            for (t, g) in theta.iter_mut().zip(&grad) {
                *t -= eta * g;
            }
        }

        let norm = l2_norm(&theta);
        if !norm.is_finite() || norm > guard {
            return Err(Error::Divergence { iteration: k, norm });
        }
        config.ball.project_in_place(&mut theta)?;

        if config.snapshot_stride > 0 && (k + 1) % config.snapshot_stride == 0 {
            snapshots.push((k + 1, theta.clone()));
        }
        if let Some(ls) = losses.as_mut() {
            ls.push(loss.value_all(&theta, data)?);
        }
    }

    Ok(Trajectory {
        snapshots,
        final_theta: theta,
        losses,
        seed: config.seed,
    })
}
