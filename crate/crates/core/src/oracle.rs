//! Independent verification engines.
//!
//! The privacy oracle runs the quadratic mean-estimation specialization of
//! the trainer, whose unprojected iterates are exactly Gaussian, and checks
//! that the closed-form Rényi divergence between runs on worst-case
//! neighboring datasets never exceeds the accountant's bound. The utility
//! oracles run seeded Monte-Carlo sweeps and hold the measured excess risk
//! against the theoretical bounds, one-sided.

use serde::Serialize;

use crate::accountant::{rdp_constant, PrivacyParams};
use crate::error::{Error, Result};
use crate::losses::{LossConstants, LossModel};
use crate::sgld::{dp_sgld_train, TrainConfig};
use crate::types::{l2_distance, Dataset, L2Ball, StepSchedule};

/// Mean and per-coordinate variance of an isotropic Gaussian iterate.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianState {
    pub mean: Vec<f64>,
    pub variance: f64,
}

/// Exact moments of the unprojected quadratic full-batch recursion
/// `θ_{k+1} = (1−η)θ_k + η·mean + √(2ησ²)·z`: the mean contracts toward the
/// data mean and the variance obeys `s²_{k+1} = (1−η)²s²_k + 2ησ²` from
/// `s²_0 = init_variance` and `μ_0 = 0`. Returns states for k = 0..=K.
pub fn gaussian_moments(
    data_mean: &[f64],
    eta: f64,
    sigma2: f64,
    k_count: usize,
    init_variance: f64,
) -> Result<Vec<GaussianState>> {
    if !eta.is_finite() || eta <= 0.0 || eta >= 1.0 {
        return Err(Error::InvalidInput(format!(
            "the Gaussian oracle needs 0 < eta < 1, got {eta}"
        )));
    }
    if sigma2 < 0.0 || init_variance < 0.0 {
        return Err(Error::InvalidInput("variances must be nonnegative".into()));
    }
    let mut states = Vec::with_capacity(k_count + 1);
    let mut mean = vec![0.0; data_mean.len()];
    let mut variance = init_variance;
    states.push(GaussianState {
        mean: mean.clone(),
        variance,
    });
    let contraction = 1.0 - eta;
    for _ in 0..k_count {
        for (m, &target) in mean.iter_mut().zip(data_mean) {
            *m = contraction * *m + eta * target;
        }
        variance = contraction * contraction * variance + 2.0 * eta * sigma2;
        states.push(GaussianState {
            mean: mean.clone(),
            variance,
        });
    }
    Ok(states)
}

/// Stationary point of the variance recursion, `2ησ²/(1 − (1−η)²)`.
pub fn stationary_variance(eta: f64, sigma2: f64) -> f64 {
    2.0 * eta * sigma2 / (1.0 - (1.0 - eta) * (1.0 - eta))
}

/// Order-α Rényi divergence between isotropic Gaussians with equal
/// covariance: `α‖μ_a − μ_b‖²/(2s²)`.
pub fn renyi_gaussian_isotropic(alpha: f64, mu_a: &[f64], mu_b: &[f64], s2: f64) -> Result<f64> {
    if !s2.is_finite() || s2 <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "Renyi divergence needs a positive variance, got {s2}"
        )));
    }
    if !alpha.is_finite() || alpha <= 1.0 {
        return Err(Error::InvalidInput(format!(
            "Renyi order must be > 1, got {alpha}"
        )));
    }
    let gap = l2_distance(mu_a, mu_b);
    Ok(alpha * gap * gap / (2.0 * s2))
}

/// Ball radius that keeps the projection inactive with probability at least
/// `1 − 1e−8` over a whole K-step run on the unit data domain: the worst
/// per-step standard deviation times a 10-sigma-style union-bound margin,
/// plus the data-mean offset.
pub fn oracle_required_radius(eta: f64, sigma2: f64, k_max: usize) -> f64 {
    let s2_max = (2.0 * sigma2).max(stationary_variance(eta, sigma2));
    1.0 + 10.0 * (2.0 * s2_max * ((k_max.max(1) as f64) * 1e8).ln()).sqrt()
}

/// Outcome of the analytic privacy check.
#[derive(Debug, Clone, Serialize)]
pub struct PrivacyOracleReport {
    pub n: usize,
    pub eta: f64,
    pub sigma2: f64,
    pub k_max: usize,
    pub radius: f64,
    pub lipschitz: f64,
    /// Largest oracle/bound ratio observed (the bound is not tight; this
    /// records the margin).
    pub max_ratio: f64,
    pub worst_k: usize,
    pub worst_alpha: f64,
    pub holds: bool,
}

/// Verifies the privacy theorem on mean estimation over the domain [−1, 1]:
/// neighboring datasets differ in one point flipped between the extremes, so
/// their means differ by 2/n, and for every k ≤ k_max and every α the exact
/// Rényi divergence of the coupled Gaussian iterates must stay below the
/// accountant's bound with quadratic-loss constants (λ = β = 1, L = R + 1).
pub fn privacy_oracle_check(
    n: usize,
    eta: f64,
    sigma2: f64,
    k_max: usize,
    alphas: &[f64],
    ball: &L2Ball,
) -> Result<PrivacyOracleReport> {
    if n < 2 || alphas.is_empty() {
        return Err(Error::InvalidInput(
            "oracle check needs n >= 2 and at least one Renyi order".into(),
        ));
    }
    if !eta.is_finite() || eta <= 0.0 || eta >= 1.0 || !sigma2.is_finite() || sigma2 <= 0.0 {
        return Err(Error::InvalidInput(
            "oracle check needs 0 < eta < 1 and sigma2 > 0".into(),
        ));
    }
    let required = oracle_required_radius(eta, sigma2, k_max);
    if ball.radius() < required {
        return Err(Error::Config(format!(
            "ball radius {} cannot certify the projection inactive; need at least {required}",
            ball.radius()
        )));
    }
    let lipschitz = ball.radius() + 1.0;
    let constants = LossConstants::new(lipschitz, 1.0, 1.0)?;
    let params: Vec<PrivacyParams> = alphas
        .iter()
        .map(|&alpha| PrivacyParams::new(alpha, constants, n, sigma2, 1))
        .collect::<Result<_>>()?;

    let mean_gap_target = 2.0 / n as f64;
    let contraction = 1.0 - eta;
    let mut mean_gap = 0.0;
    let mut variance = 2.0 * sigma2; // init variance 2 sigma^2 / lambda, lambda = 1
    let mut max_ratio = 0.0;
    let mut worst = (0usize, 0.0f64);
    let mut holds = true;
    for k in 1..=k_max {
        mean_gap = contraction * mean_gap + eta * mean_gap_target;
        variance = contraction * contraction * variance + 2.0 * eta * sigma2;
        for (p, &alpha) in params.iter().zip(alphas) {
            let oracle = alpha * mean_gap * mean_gap / (2.0 * variance);
            let bound = rdp_constant(p, eta, k)?;
            if oracle > bound * (1.0 + 1e-12) {
                holds = false;
            }
            let ratio = oracle / bound;
            if ratio > max_ratio {
                max_ratio = ratio;
                worst = (k, alpha);
            }
        }
    }
    Ok(PrivacyOracleReport {
        n,
        eta,
        sigma2,
        k_max,
        radius: ball.radius(),
        lipschitz,
        max_ratio,
        worst_k: worst.0,
        worst_alpha: worst.1,
        holds,
    })
}

/// Closed-form minimizer of the quadratic loss over the ball: the projected
/// data mean.
pub fn quadratic_optimum(data: &Dataset, ball: &L2Ball) -> Result<Vec<f64>> {
    ball.project(&data.mean_row())
}

const SOLVE_TOL: f64 = 1e-10;
const SOLVE_MAX_ITER: usize = 1_000_000;

/// Deterministic projected gradient descent to the constrained minimizer of
/// the full empirical loss, certified by a gradient-mapping norm below 1e−10
/// (which covers the boundary normal-cone condition too).
pub fn solve_optimum(
    data: &Dataset,
    loss: &impl LossModel,
    constants: &LossConstants,
    ball: &L2Ball,
) -> Result<Vec<f64>> {
    let d = loss.dim(data);
    let mut theta = vec![0.0; d];
    let mut grad = vec![0.0; d];
    let mut scratch = vec![0.0; d];
    let all: Vec<usize> = (0..data.n()).collect();
    let eta = 1.0 / constants.beta;
    for _ in 0..SOLVE_MAX_ITER {
        loss.batch_grad(&theta, data, &all, &mut grad, &mut scratch)?;
        let mut next: Vec<f64> = theta
            .iter()
            .zip(&grad)
            .map(|(t, g)| t - eta * g)
            .collect();
        ball.project_in_place(&mut next)?;
        let gap = l2_distance(&theta, &next) / eta;
        theta = next;
        if gap <= SOLVE_TOL {
            return Ok(theta);
        }
    }
    Err(Error::Convergence(format!(
        "projected gradient descent did not reach gradient-mapping norm {SOLVE_TOL} in {SOLVE_MAX_ITER} iterations"
    )))
}

/// Expected squared norm of the mini-batch gradient at the optimum,
/// `ξ² = E‖∇L_B(θ*)‖²` for uniform size-m batches without replacement:
/// `‖ḡ‖² + (n−m)/(m(n−1)) · (1/n)Σ‖g_i − ḡ‖²`.
pub fn xi_squared(
    data: &Dataset,
    loss: &impl LossModel,
    theta_star: &[f64],
    m: usize,
) -> Result<f64> {
    let n = data.n();
    if m == 0 || m > n {
        return Err(Error::InvalidInput(format!(
            "batch size must satisfy 1 <= m <= n, got m = {m}, n = {n}"
        )));
    }
    let d = loss.dim(data);
    let mut grads = vec![0.0; n * d];
    let mut mean = vec![0.0; d];
    for i in 0..n {
        let g = &mut grads[i * d..(i + 1) * d];
        loss.example_grad(theta_star, data, i, g)?;
        for (m_j, &g_j) in mean.iter_mut().zip(g.iter()) {
            *m_j += g_j;
        }
    }
    for m_j in &mut mean {
        *m_j /= n as f64;
    }
    let mean_norm2 = mean.iter().map(|v| v * v).sum::<f64>();
    let mut spread = 0.0;
    for i in 0..n {
        let g = &grads[i * d..(i + 1) * d];
        spread += g
            .iter()
            .zip(&mean)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>();
    }
    spread /= n as f64;
    let correction = (n - m) as f64 / (m as f64 * (n - 1) as f64);
    Ok(mean_norm2 + correction * spread)
}

/// Monte-Carlo utility measurement against a theoretical bound, evaluated
/// with both the MC estimate of `E‖θ₀ − θ*‖²` and the `4L²/λ²` envelope.
#[derive(Debug, Clone, Serialize)]
pub struct UtilityReport {
    pub mc_mean: f64,
    pub std_err: f64,
    pub seeds: usize,
    pub xi_squared: f64,
    /// Initial-error term of the bound under the MC estimate / the envelope.
    pub init_term_mc: f64,
    pub init_term_envelope: f64,
    pub xi_term: f64,
    pub noise_term: f64,
    pub bound_mc: f64,
    pub bound_envelope: f64,
}

impl UtilityReport {
    /// One-sided check: the measured risk must stay below both bound
    /// variants up to 3 standard errors.
    pub fn holds(&self) -> bool {
        let limit = 3.0 * self.std_err;
        self.mc_mean <= self.bound_mc + limit && self.mc_mean <= self.bound_envelope + limit
    }

    /// bound/measurement ratio, recorded for regression tracking.
    pub fn slack(&self) -> f64 {
        self.bound_mc / self.mc_mean
    }

    pub fn verify(&self) -> Result<()> {
        if self.holds() {
            Ok(())
        } else {
            Err(Error::Verification(format!(
                "MC mean {} exceeds bound {} (envelope {}) + 3*stderr {}",
                self.mc_mean,
                self.bound_mc,
                self.bound_envelope,
                3.0 * self.std_err
            )))
        }
    }
}

fn mean_and_stderr(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    if samples.len() < 2 {
        return (mean, 0.0);
    }
    let var = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Measures `E[L_D(θ_K) − L_D(θ*)]` over seeded runs with a constant step
/// size and checks it against
/// `(β/2)·E‖θ₀−θ*‖²·e^{−ληK} + βηξ²/(2λ) + βdσ²/λ`.
pub fn excess_risk_mc(
    config: &TrainConfig,
    data: &Dataset,
    loss: &impl LossModel,
    constants: &LossConstants,
    n_seeds: usize,
) -> Result<UtilityReport> {
    if n_seeds < 30 {
        return Err(Error::InvalidInput(format!(
            "utility measurement needs at least 30 seeds, got {n_seeds}"
        )));
    }
    let eta = match config.schedule {
        StepSchedule::Constant(eta) => eta,
        _ => {
            return Err(Error::InvalidInput(
                "excess-risk measurement needs a constant step size".into(),
            ))
        }
    };
    if eta > 1.0 / (2.0 * constants.beta) {
        return Err(Error::InvalidInput(
            "the fixed-step utility bound needs eta <= 1/(2 beta)".into(),
        ));
    }

    let theta_star = solve_optimum(data, loss, constants, &config.ball)?;
    let loss_star = loss.value_all(&theta_star, data)?;
    let xi2 = xi_squared(data, loss, &theta_star, config.batch_size)?;
    let d = loss.dim(data) as f64;

    let mut excess = Vec::with_capacity(n_seeds);
    let mut init_dist2 = 0.0;
    let mut run_cfg = config.clone();
    run_cfg.snapshot_stride = config.iterations.max(1);
    run_cfg.record_loss = false;
    for i in 0..n_seeds {
        run_cfg.seed = config.seed.offset(i as u64);
        let traj = dp_sgld_train(&run_cfg, data, loss, constants)?;
        let theta0 = traj
            .snapshot(0)
            .ok_or_else(|| Error::Numeric("missing initial snapshot".into()))?;
        let dist = l2_distance(theta0, &theta_star);
        init_dist2 += dist * dist;
        excess.push(loss.value_all(&traj.final_theta, data)? - loss_star);
    }
    init_dist2 /= n_seeds as f64;

    let (mc_mean, std_err) = mean_and_stderr(&excess);
    let decay = (-constants.lambda * eta * config.iterations as f64).exp();
    let envelope = 4.0 * constants.l * constants.l / (constants.lambda * constants.lambda);
    let xi_term = constants.beta * eta * xi2 / (2.0 * constants.lambda);
    let noise_term = constants.beta * d * config.sigma2 / constants.lambda;
    Ok(UtilityReport {
        mc_mean,
        std_err,
        seeds: n_seeds,
        xi_squared: xi2,
        init_term_mc: 0.5 * constants.beta * init_dist2 * decay,
        init_term_envelope: 0.5 * constants.beta * envelope * decay,
        xi_term,
        noise_term,
        bound_mc: 0.5 * constants.beta * init_dist2 * decay + xi_term + noise_term,
        bound_envelope: 0.5 * constants.beta * envelope * decay + xi_term + noise_term,
    })
}

/// Measures the average risk `E[(1/K)Σ_{k=1}^K L_D(θ_k) − L_D(θ*)]` under
/// the decreasing schedule and checks it against
/// `(2β/K)·E‖θ₀−θ*‖² + (4ξ²/(Kλ))·log(1 + λK/(4β)) + 2dσ²`.
pub fn avg_risk_mc(
    config: &TrainConfig,
    data: &Dataset,
    loss: &impl LossModel,
    constants: &LossConstants,
    n_seeds: usize,
) -> Result<UtilityReport> {
    if n_seeds < 30 {
        return Err(Error::InvalidInput(format!(
            "utility measurement needs at least 30 seeds, got {n_seeds}"
        )));
    }
    match config.schedule {
        StepSchedule::Decreasing { beta, lambda }
            if beta == constants.beta && lambda == constants.lambda => {}
        _ => {
            return Err(Error::InvalidInput(
                "average-risk measurement needs the decreasing schedule built from the certified constants".into(),
            ))
        }
    }
    let k_count = config.iterations;
    if k_count == 0 {
        return Err(Error::InvalidInput(
            "average-risk measurement needs at least one iteration".into(),
        ));
    }

    let theta_star = solve_optimum(data, loss, constants, &config.ball)?;
    let loss_star = loss.value_all(&theta_star, data)?;
    let xi2 = xi_squared(data, loss, &theta_star, config.batch_size)?;
    let d = loss.dim(data) as f64;

    let mut averages = Vec::with_capacity(n_seeds);
    let mut init_dist2 = 0.0;
    let mut run_cfg = config.clone();
    run_cfg.snapshot_stride = k_count;
    run_cfg.record_loss = true;
    for i in 0..n_seeds {
        run_cfg.seed = config.seed.offset(i as u64);
        let traj = dp_sgld_train(&run_cfg, data, loss, constants)?;
        let theta0 = traj
            .snapshot(0)
            .ok_or_else(|| Error::Numeric("missing initial snapshot".into()))?;
        let dist = l2_distance(theta0, &theta_star);
        init_dist2 += dist * dist;
        let losses = traj
            .losses
            .as_ref()
            .ok_or_else(|| Error::Numeric("missing loss trace".into()))?;
        let avg = losses[1..].iter().sum::<f64>() / k_count as f64 - loss_star;
        averages.push(avg);
    }
    init_dist2 /= n_seeds as f64;

    let (mc_mean, std_err) = mean_and_stderr(&averages);
    let kf = k_count as f64;
    let envelope = 4.0 * constants.l * constants.l / (constants.lambda * constants.lambda);
    let xi_term = 4.0 * xi2 / (kf * constants.lambda)
        * (1.0 + constants.lambda * kf / (4.0 * constants.beta)).ln();
    let noise_term = 2.0 * d * config.sigma2;
    Ok(UtilityReport {
        mc_mean,
        std_err,
        seeds: n_seeds,
        xi_squared: xi2,
        init_term_mc: 2.0 * constants.beta / kf * init_dist2,
        init_term_envelope: 2.0 * constants.beta / kf * envelope,
        xi_term,
        noise_term,
        bound_mc: 2.0 * constants.beta / kf * init_dist2 + xi_term + noise_term,
        bound_envelope: 2.0 * constants.beta / kf * envelope + xi_term + noise_term,
    })
}
