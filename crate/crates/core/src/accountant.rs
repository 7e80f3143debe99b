//! Rényi privacy accounting for the noisy trainer, conversion to (ε, δ),
//! the per-step composition baseline, and noise/iteration calibrators.
//!
//! All bounds share the asymptote `4αL²/(λn²σ²)`: the released final iterate
//! never leaks more than that no matter how long training runs. Finite-K
//! values approach it as `1 − exp(−(λ/2)·Σ η_k)` with the exact sum of the
//! step sizes actually taken. `1 − e^{-x}` is evaluated with `expm1` so the
//! small-K regime keeps full precision.
//!
//! The batch size appears in none of these formulas: the gradient
//! sensitivity bound `2L/n` that drives them is batch-free. (Neighboring
//! runs see different batches with probability m/n, and the conditional
//! gradient gap is at most 2L/m; the product cancels m away.)

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::LossConstants;
use crate::types::StepSchedule;

/// Inputs of the Rényi bounds.
#[derive(Debug, Clone, Copy)]
pub struct PrivacyParams {
    /// Rényi order, > 1.
    pub alpha: f64,
    pub constants: LossConstants,
    /// Dataset size.
    pub n: usize,
    /// Per-step noise variance σ².
    pub sigma2: f64,
    /// Parameter dimension (used by the calibrators).
    pub dim: usize,
}

impl PrivacyParams {
    pub fn new(
        alpha: f64,
        constants: LossConstants,
        n: usize,
        sigma2: f64,
        dim: usize,
    ) -> Result<Self> {
        if !alpha.is_finite() || alpha <= 1.0 {
            return Err(Error::InvalidInput(format!(
                "Renyi order must be > 1, got {alpha}"
            )));
        }
        if n == 0 {
            return Err(Error::InvalidInput("dataset size must be >= 1".into()));
        }
        if !sigma2.is_finite() || sigma2 <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "noise variance must be positive, got {sigma2}"
            )));
        }
        if dim == 0 {
            return Err(Error::InvalidInput("dimension must be >= 1".into()));
        }
        Ok(Self {
            alpha,
            constants,
            n,
            sigma2,
            dim,
        })
    }

    /// `4αL²/(λn²σ²)`, the K → ∞ limit of every bound below.
    pub fn asymptote(&self) -> f64 {
        let n = self.n as f64;
        4.0 * self.alpha * self.constants.l * self.constants.l
            / (self.constants.lambda * n * n * self.sigma2)
    }

    fn check_eta_cap(&self, schedule: &StepSchedule, k_count: usize) -> Result<()> {
        if k_count == 0 {
            return Ok(());
        }
        let cap = 1.0 / self.constants.beta;
        let max_eta = schedule.max_eta(k_count)?;
        if max_eta >= cap {
            return Err(Error::InvalidInput(format!(
                "the privacy theorem requires every step size < 1/beta = {cap}, schedule reaches {max_eta}"
            )));
        }
        Ok(())
    }

    fn eps_from_sum(&self, eta_sum: f64) -> f64 {
        self.asymptote() * (-(-0.5 * self.constants.lambda * eta_sum).exp_m1())
    }
}

/// Rényi bound for an arbitrary step schedule:
/// `ε = 4αL²/(λn²σ²) · (1 − e^{−(λ/2)·Σ η_k})` over the first K steps.
pub fn rdp_general(p: &PrivacyParams, schedule: &StepSchedule, k_count: usize) -> Result<f64> {
    p.check_eta_cap(schedule, k_count)?;
    Ok(p.eps_from_sum(schedule.sum(k_count)?))
}

/// Constant-step closed form `ε = 4αL²/(λn²σ²)·(1 − e^{−ληK/2})`; identical
/// to [`rdp_general`] with a constant schedule, down to the bit.
pub fn rdp_constant(p: &PrivacyParams, eta: f64, k_count: usize) -> Result<f64> {
    let schedule = StepSchedule::constant(eta)?;
    rdp_general(p, &schedule, k_count)
}

/// Closed form for the decreasing schedule `η_k = 1/(2β + λk/2)`:
/// `ε = 4αL²/(λn²σ²) · λK/(4β + λK)`.
pub fn rdp_decreasing(p: &PrivacyParams, k_count: usize) -> f64 {
    let lk = p.constants.lambda * k_count as f64;
    p.asymptote() * lk / (4.0 * p.constants.beta + lk)
}

/// Generic c-LSI form `ε = 2αL²/(c·n²σ⁴)·(1 − e^{−σ²c·Σ η_k})`. With
/// `c = λ/(2σ²)` it reduces to [`rdp_general`].
pub fn rdp_clsi(
    alpha: f64,
    l: f64,
    c: f64,
    n: usize,
    sigma2: f64,
    schedule: &StepSchedule,
    k_count: usize,
) -> Result<f64> {
    if !c.is_finite() || c <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "LSI constant must be positive, got {c}"
        )));
    }
    if !alpha.is_finite() || alpha <= 1.0 {
        return Err(Error::InvalidInput(format!(
            "Renyi order must be > 1, got {alpha}"
        )));
    }
    if !sigma2.is_finite() || sigma2 <= 0.0 || n == 0 {
        return Err(Error::InvalidInput(
            "need sigma2 > 0 and n >= 1 for the c-LSI bound".into(),
        ));
    }
    let nf = n as f64;
    let sum = schedule.sum(k_count)?;
    let prefactor = 2.0 * alpha * l * l / (c * nf * nf * sigma2 * sigma2);
    Ok(prefactor * (-(-sigma2 * c * sum).exp_m1()))
}

/// The per-step contraction the c-LSI proof telescopes: starting from
/// `R = 0`, each step applies `R ← (R − F)·e^{−a₁η_k} + F` with
/// `a₁ = σ²c`, `c = λ/(2σ²)`, and fixed point `F = 2αL²/(c·n²σ⁴)`.
/// Agrees with [`rdp_general`] because the contraction telescopes to the
/// closed form; kept iterative so the two routes stay independent.
pub fn rdp_recursion(p: &PrivacyParams, schedule: &StepSchedule, k_count: usize) -> Result<f64> {
    p.check_eta_cap(schedule, k_count)?;
    let nf = p.n as f64;
    let c = p.constants.lambda / (2.0 * p.sigma2);
    let a1 = p.sigma2 * c;
    let fixed_point =
        2.0 * p.alpha * p.constants.l * p.constants.l / (c * nf * nf * p.sigma2 * p.sigma2);
    let mut r = 0.0;
    for k in 0..k_count {
        let eta = schedule.eta(k)?;
        r = (r - fixed_point) * (-a1 * eta).exp() + fixed_point;
    }
    Ok(r)
}

/// Rényi-to-(ε, δ) conversion: `ε_dp = ε_rdp + log(1/δ)/(α − 1)`.
pub fn to_dp(eps_rdp: f64, alpha: f64, delta: f64) -> Result<f64> {
    if !delta.is_finite() || delta <= 0.0 || delta >= 1.0 {
        return Err(Error::InvalidInput(format!(
            "delta must lie in (0, 1), got {delta}"
        )));
    }
    if !alpha.is_finite() || alpha <= 1.0 {
        return Err(Error::InvalidInput(format!(
            "Renyi order must be > 1, got {alpha}"
        )));
    }
    Ok(eps_rdp + (1.0 / delta).ln() / (alpha - 1.0))
}

/// Linear-in-K per-step composition estimate `ε' = αL²ηK/(n²σ²)`, the
/// comparison target the exponential bound beats for large K.
pub fn composition_baseline(
    alpha: f64,
    l: f64,
    n: usize,
    sigma2: f64,
    eta: f64,
    k_count: usize,
) -> f64 {
    let nf = n as f64;
    alpha * l * l * eta * k_count as f64 / (nf * nf * sigma2)
}

/// Default grid of Rényi orders for [`optimize_alpha`]: {1.25, 1.5, 2..=64}.
pub fn default_alpha_grid() -> Vec<f64> {
    let mut grid = vec![1.25, 1.5];
    grid.extend((2..=64).map(f64::from));
    grid
}

/// α chosen by the (ε, δ) utility theorem: `1 + (2/ε)·log(1/δ)`.
pub fn closed_form_alpha(epsilon: f64, delta: f64) -> Result<f64> {
    if !delta.is_finite() || delta <= 0.0 || delta >= 1.0 || !epsilon.is_finite() || epsilon <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "need epsilon > 0 and delta in (0, 1), got epsilon = {epsilon}, delta = {delta}"
        )));
    }
    Ok(1.0 + 2.0 / epsilon * (1.0 / delta).ln())
}

/// Minimizes `to_dp(rdp_general(α), α, δ)` over a grid of orders. Ties go to
/// the smaller α.
#[allow(clippy::too_many_arguments)]
pub fn optimize_alpha(
    constants: &LossConstants,
    n: usize,
    sigma2: f64,
    dim: usize,
    schedule: &StepSchedule,
    k_count: usize,
    delta: f64,
    alpha_grid: &[f64],
) -> Result<(f64, f64)> {
    if alpha_grid.is_empty() {
        return Err(Error::InvalidInput("alpha grid is empty".into()));
    }
    let mut grid = alpha_grid.to_vec();
    grid.sort_by(|a, b| a.total_cmp(b));
    let mut best: Option<(f64, f64)> = None;
    for &alpha in &grid {
        let p = PrivacyParams::new(alpha, *constants, n, sigma2, dim)?;
        let eps_dp = to_dp(rdp_general(&p, schedule, k_count)?, alpha, delta)?;
        match best {
            Some((_, cur)) if eps_dp >= cur => {}
            _ => best = Some((alpha, eps_dp)),
        }
    }
    Ok(best.expect("grid is nonempty"))
}

/// Result of a calibrator: noise variance and iteration count meeting a
/// privacy target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub sigma2: f64,
    pub iterations: usize,
    pub alpha: f64,
}

/// Sets `σ² = 4αL²/(ελn²)` and `K = ⌈(2β/λ)·log(εn²/(αd))⌉` so the
/// (α, ε)-Rényi budget is met at step size 1/(2β); the asymptote equals
/// ε exactly, so any finite K stays below it. Requires `εn² > αd`.
pub fn calibrate_rdp(
    eps_target: f64,
    alpha: f64,
    constants: &LossConstants,
    n: usize,
    dim: usize,
) -> Result<Calibration> {
    if !eps_target.is_finite() || eps_target <= 0.0 || !alpha.is_finite() || alpha <= 1.0 || n == 0 || dim == 0 {
        return Err(Error::InvalidInput(
            "calibration needs eps > 0, alpha > 1, n >= 1, d >= 1".into(),
        ));
    }
    let nf = n as f64;
    let ratio = eps_target * nf * nf / (alpha * dim as f64);
    if ratio <= 1.0 {
        return Err(Error::InfeasibleCalibration(format!(
            "need eps*n^2 > alpha*d for a positive iteration count (ratio = {ratio})"
        )));
    }
    let sigma2 =
        4.0 * alpha * constants.l * constants.l / (eps_target * constants.lambda * nf * nf);
    let iterations = (2.0 * constants.beta / constants.lambda * ratio.ln()).ceil() as usize;
    Ok(Calibration {
        sigma2,
        iterations,
        alpha,
    })
}

/// (ε, δ) calibration via `α = 1 + (2/ε)log(1/δ)`:
/// `σ² = 8L²(ε + 2log(1/δ))/(ε²λn²)` and
/// `K = ⌈(2β/λ)·log(ε²n²/(4·log(1/δ)·d))⌉`.
/// The theorem hypothesis `ε ≤ 2·log(1/δ)` is enforced.
pub fn calibrate_dp(
    epsilon: f64,
    delta: f64,
    constants: &LossConstants,
    n: usize,
    dim: usize,
) -> Result<Calibration> {
    if !epsilon.is_finite() || epsilon <= 0.0 || !delta.is_finite() || delta <= 0.0 || delta >= 1.0 || n == 0 || dim == 0 {
        return Err(Error::InvalidInput(
            "calibration needs epsilon > 0, delta in (0, 1), n >= 1, d >= 1".into(),
        ));
    }
    let log_inv_delta = (1.0 / delta).ln();
    if epsilon > 2.0 * log_inv_delta {
        return Err(Error::InfeasibleCalibration(format!(
            "the utility theorem requires epsilon <= 2*log(1/delta) = {}",
            2.0 * log_inv_delta
        )));
    }
    let alpha = closed_form_alpha(epsilon, delta)?;
    let nf = n as f64;
    let sigma2 = 8.0 * constants.l * constants.l * (epsilon + 2.0 * log_inv_delta)
        / (epsilon * epsilon * constants.lambda * nf * nf);
    let arg = epsilon * epsilon * nf * nf / (4.0 * log_inv_delta * dim as f64);
    if arg <= 1.0 {
        return Err(Error::InfeasibleCalibration(format!(
            "need eps^2*n^2 > 4*log(1/delta)*d for a positive iteration count (ratio = {arg})"
        )));
    }
    let iterations = (2.0 * constants.beta / constants.lambda * arg.ln()).ceil() as usize;
    Ok(Calibration {
        sigma2,
        iterations,
        alpha,
    })
}

/// Decreasing-schedule calibration: same `σ²` as [`calibrate_rdp`] and
/// `K = ⌈max((β/λ)·r, (λ/β)·r²)⌉` with `r = εn²/(αd)`; K grows like n² below
/// the crossover `r = (β/λ)²` and like n⁴ above it.
pub fn calibrate_decreasing(
    eps_target: f64,
    alpha: f64,
    constants: &LossConstants,
    n: usize,
    dim: usize,
) -> Result<Calibration> {
    if !eps_target.is_finite() || eps_target <= 0.0 || !alpha.is_finite() || alpha <= 1.0 || n == 0 || dim == 0 {
        return Err(Error::InvalidInput(
            "calibration needs eps > 0, alpha > 1, n >= 1, d >= 1".into(),
        ));
    }
    let nf = n as f64;
    let r = eps_target * nf * nf / (alpha * dim as f64);
    let sigma2 =
        4.0 * alpha * constants.l * constants.l / (eps_target * constants.lambda * nf * nf);
    let ratio = constants.beta / constants.lambda;
    let iterations = (ratio * r).max(r * r / ratio).ceil().max(1.0) as usize;
    Ok(Calibration {
        sigma2,
        iterations,
        alpha,
    })
}

/// One point of an RDP curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RdpPoint {
    pub alpha: f64,
    pub eps_rdp: f64,
}

/// Privacy summary of one run: the RDP curve over the α grid, the optimized
/// (ε, δ) conversion, and the baseline/asymptote context at the chosen α.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PrivacyReport {
    pub rdp_curve: Vec<RdpPoint>,
    pub alpha: f64,
    pub eps_rdp: f64,
    pub eps_dp: f64,
    pub delta: f64,
    /// Per-step composition estimate `αL²·(Σ η_k)/(n²σ²)` at the chosen α.
    pub baseline: f64,
    /// `4αL²/(λn²σ²)` at the chosen α.
    pub asymptote: f64,
}

/// Builds the full privacy report for a run's exact parameters.
#[allow(clippy::too_many_arguments)]
pub fn privacy_report(
    constants: &LossConstants,
    n: usize,
    sigma2: f64,
    dim: usize,
    schedule: &StepSchedule,
    k_count: usize,
    delta: f64,
    alpha_grid: &[f64],
) -> Result<PrivacyReport> {
    let mut curve = Vec::with_capacity(alpha_grid.len());
    for &alpha in alpha_grid {
        let p = PrivacyParams::new(alpha, *constants, n, sigma2, dim)?;
        let eps = rdp_general(&p, schedule, k_count)?;
        if !eps.is_finite() || eps < 0.0 {
            return Err(Error::Numeric(format!(
                "RDP curve value at alpha = {alpha} is not a finite nonnegative number: {eps}"
            )));
        }
        curve.push(RdpPoint {
            alpha,
            eps_rdp: eps,
        });
    }
    let (alpha, eps_dp) = optimize_alpha(
        constants, n, sigma2, dim, schedule, k_count, delta, alpha_grid,
    )?;
    let p = PrivacyParams::new(alpha, *constants, n, sigma2, dim)?;
    let eps_rdp = rdp_general(&p, schedule, k_count)?;
    let nf = n as f64;
    let baseline =
        alpha * constants.l * constants.l * schedule.sum(k_count)? / (nf * nf * sigma2);
    Ok(PrivacyReport {
        rdp_curve: curve,
        alpha,
        eps_rdp,
        eps_dp,
        delta,
        baseline,
        asymptote: p.asymptote(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(alpha: f64, lambda: f64, beta: f64, n: usize, sigma2: f64) -> PrivacyParams {
        PrivacyParams::new(
            alpha,
            LossConstants::new(1.0, lambda, beta).unwrap(),
            n,
            sigma2,
            1,
        )
        .unwrap()
    }

    #[test]
    fn rdp_general_zero_steps_is_zero() {
        let p = params(2.0, 1.0, 1.0, 100, 1.0);
        let s = StepSchedule::constant(0.25).unwrap();
        assert_eq!(rdp_general(&p, &s, 0).unwrap(), 0.0);
    }

    #[test]
    fn rdp_general_reference_value() {
        let p = params(2.0, 1.0, 1.0, 100, 1.0);
        let s = StepSchedule::constant(0.25).unwrap();
        let eps = rdp_general(&p, &s, 100).unwrap();
        let expected = 8e-4 * (1.0 - (-12.5f64).exp());
        assert!((eps - expected).abs() < 1e-15, "{eps}");
        assert!((eps - 7.99997e-4).abs() < 1e-9);
        // long runs approach the asymptote
        let eps_long = rdp_general(&p, &s, 1_000_000).unwrap();
        assert!((eps_long - p.asymptote()).abs() <= 1e-12 * p.asymptote());
        assert!((p.asymptote() - 8e-4).abs() < 1e-18);
    }

    #[test]
    fn rdp_general_enforces_eta_cap() {
        let p = params(2.0, 1.0, 2.0, 100, 1.0);
        let s = StepSchedule::constant(0.5).unwrap(); // = 1/beta
        assert!(rdp_general(&p, &s, 10).is_err());
        let ok = StepSchedule::constant(0.49).unwrap();
        assert!(rdp_general(&p, &ok, 10).is_ok());
    }

    #[test]
    fn rdp_constant_equals_general_bitwise() {
        let p = params(3.0, 0.7, 2.5, 250, 0.4);
        let eta = 0.13;
        for k in [0usize, 1, 7, 100, 12345] {
            let a = rdp_constant(&p, eta, k).unwrap();
            let b = rdp_general(&p, &StepSchedule::constant(eta).unwrap(), k).unwrap();
            assert_eq!(a.to_bits(), b.to_bits(), "k = {k}");
        }
    }

    #[test]
    fn rdp_decreasing_closed_form() {
        let p = params(2.0, 0.5, 4.0, 100, 1.0);
        assert_eq!(rdp_decreasing(&p, 0), 0.0);
        // lambda*K = 4*beta gives exactly half the asymptote
        let k = (4.0 * 4.0 / 0.5) as usize;
        let eps = rdp_decreasing(&p, k);
        assert!((eps - 0.5 * p.asymptote()).abs() < 1e-18);
    }

    #[test]
    fn rdp_general_on_shifted_decreasing_stays_below_corollary() {
        // The corollary bounds the sum of steps 1..=K by an integral; that
        // sum is produced by the schedule shifted one step, i.e. by
        // Decreasing(beta + lambda/4, lambda).
        let (lambda, beta) = (1.0, 1.0);
        let p = params(2.0, lambda, beta, 100, 1.0);
        let shifted = StepSchedule::decreasing(beta + lambda / 4.0, lambda).unwrap();
        for k in [1usize, 2, 5, 10, 100, 1000, 10000] {
            let exact = rdp_general(&p, &shifted, k).unwrap();
            let corollary = rdp_decreasing(&p, k);
            assert!(exact <= corollary * (1.0 + 1e-12), "k = {k}");
        }
        // and the ratio approaches 1 as K grows
        let exact = rdp_general(&p, &shifted, 100_000).unwrap();
        let corollary = rdp_decreasing(&p, 100_000);
        assert!(exact / corollary > 0.999);
    }

    #[test]
    fn rdp_clsi_reduces_to_general() {
        let p = params(4.0, 0.8, 3.0, 500, 0.6);
        let c = p.constants.lambda / (2.0 * p.sigma2);
        let s = StepSchedule::constant(0.2).unwrap();
        for k in [1usize, 10, 1000] {
            let a = rdp_clsi(p.alpha, p.constants.l, c, p.n, p.sigma2, &s, k).unwrap();
            let b = rdp_general(&p, &s, k).unwrap();
            assert!((a - b).abs() <= 1e-12 * b, "k = {k}: {a} vs {b}");
        }
        assert_eq!(
            rdp_clsi(p.alpha, p.constants.l, c, p.n, p.sigma2, &s, 0).unwrap(),
            0.0
        );
    }

    #[test]
    fn rdp_clsi_decreases_when_c_doubles() {
        let s = StepSchedule::constant(0.2).unwrap();
        let base = rdp_clsi(2.0, 1.0, 0.5, 100, 1.0, &s, 50).unwrap();
        let doubled = rdp_clsi(2.0, 1.0, 1.0, 100, 1.0, &s, 50).unwrap();
        assert!(doubled < base);
    }

    #[test]
    fn rdp_recursion_matches_general_and_single_step_unrolling() {
        let p = params(2.0, 1.0, 1.5, 100, 0.5);
        let s = StepSchedule::constant(0.3).unwrap();
        for k in [1usize, 5, 50, 500] {
            let a = rdp_recursion(&p, &s, k).unwrap();
            let b = rdp_general(&p, &s, k).unwrap();
            assert!((a - b).abs() <= 1e-9 * b.max(1e-300), "k = {k}");
        }
        // K = 1 unrolls to F·(1 − e^{−a1·eta})
        let c = p.constants.lambda / (2.0 * p.sigma2);
        let a1 = p.sigma2 * c;
        let f = 2.0 * p.alpha / (c * 100.0f64.powi(2) * p.sigma2 * p.sigma2);
        let expected = f * (1.0 - (-a1 * 0.3f64).exp());
        let got = rdp_recursion(&p, &s, 1).unwrap();
        assert!((got - expected).abs() <= 1e-15);
    }

    #[test]
    fn rdp_recursion_is_nondecreasing_along_iterations() {
        let p = params(2.0, 1.0, 1.5, 100, 0.5);
        let s = StepSchedule::decreasing(1.5, 1.0).unwrap();
        let mut prev = 0.0;
        for k in 1..=100 {
            let r = rdp_recursion(&p, &s, k).unwrap();
            assert!(r >= prev);
            prev = r;
        }
    }

    #[test]
    fn to_dp_reference_and_edges() {
        let eps = to_dp(0.5, 2.0, 1e-5).unwrap();
        assert!((eps - (0.5 + 1e5f64.ln())).abs() < 1e-12);
        assert!((eps - 12.01293).abs() < 1e-5);
        // delta -> 1 wipes out the conversion term
        let near_one = to_dp(0.5, 2.0, 1.0 - 1e-12).unwrap();
        assert!((near_one - 0.5).abs() < 1e-10);
        // so does alpha -> infinity
        let huge_alpha = to_dp(0.5, 1e12, 1e-5).unwrap();
        assert!((huge_alpha - 0.5).abs() < 1e-10);
        assert!(to_dp(0.5, 2.0, 0.0).is_err());
        assert!(to_dp(0.5, 2.0, 1.0).is_err());
    }

    #[test]
    fn optimize_alpha_contract() {
        let constants = LossConstants::new(1.0, 1.0, 1.0).unwrap();
        let s = StepSchedule::constant(0.25).unwrap();
        // singleton grid returns that alpha
        let (a, _) = optimize_alpha(&constants, 100, 1.0, 1, &s, 100, 1e-5, &[3.0]).unwrap();
        assert_eq!(a, 3.0);
        // optimum is no worse than any grid point
        let grid = default_alpha_grid();
        let (_, best) = optimize_alpha(&constants, 100, 1.0, 1, &s, 100, 1e-5, &grid).unwrap();
        for &alpha in &grid {
            let p = PrivacyParams::new(alpha, constants, 100, 1.0, 1).unwrap();
            let eps = to_dp(rdp_general(&p, &s, 100).unwrap(), alpha, 1e-5).unwrap();
            assert!(best <= eps + 1e-15);
        }
        assert!(optimize_alpha(&constants, 100, 1.0, 1, &s, 100, 1e-5, &[]).is_err());
    }

    #[test]
    fn grid_optimum_beats_the_closed_form_alpha() {
        let constants = LossConstants::new(1.0, 1.0, 1.0).unwrap();
        let s = StepSchedule::constant(0.25).unwrap();
        let (epsilon, delta) = (1.0, 1e-5);
        let alpha_cf = closed_form_alpha(epsilon, delta).unwrap();
        let mut grid = default_alpha_grid();
        grid.push(alpha_cf);
        let (_, best) = optimize_alpha(&constants, 2000, 0.01, 1, &s, 500, delta, &grid).unwrap();
        let p = PrivacyParams::new(alpha_cf, constants, 2000, 0.01, 1).unwrap();
        let at_cf = to_dp(rdp_general(&p, &s, 500).unwrap(), alpha_cf, delta).unwrap();
        assert!(best <= at_cf + 1e-15);
    }

    #[test]
    fn baseline_matches_the_half_step_identity() {
        // at eta = 1/(2 beta) the baseline is alpha L^2 K / (2 beta n^2 sigma^2)
        let (alpha, l, n, sigma2, beta, k) = (2.0, 1.5, 200, 0.7, 3.0, 40);
        let eta = 1.0 / (2.0 * beta);
        let b = composition_baseline(alpha, l, n, sigma2, eta, k);
        let direct = alpha * l * l * k as f64 / (2.0 * beta * (n as f64).powi(2) * sigma2);
        assert!((b - direct).abs() <= 1e-15 * direct);
        assert_eq!(composition_baseline(alpha, l, n, sigma2, eta, 0), 0.0);
    }

    #[test]
    fn calibrate_rdp_reference_values_and_round_trip() {
        let constants = LossConstants::new(1.0, 1.0, 1.0).unwrap();
        let cal = calibrate_rdp(0.01, 2.0, &constants, 100, 1).unwrap();
        assert!((cal.sigma2 - 0.08).abs() < 1e-15);
        assert_eq!(cal.iterations, 8); // 2*log(50) = 7.824 rounded up
        let p = PrivacyParams::new(2.0, constants, 100, cal.sigma2, 1).unwrap();
        let eta = 1.0 / (2.0 * constants.beta);
        let eps = rdp_constant(&p, eta, cal.iterations).unwrap();
        assert!(eps <= 0.01);
    }

    #[test]
    fn calibrate_rdp_boundary_is_infeasible() {
        let constants = LossConstants::new(1.0, 1.0, 1.0).unwrap();
        // binary-exact boundary: eps*n^2 = alpha*d, so K would be 0
        let eps = 2.0 / 16384.0;
        let err = calibrate_rdp(eps, 2.0, &constants, 128, 1);
        assert!(matches!(err, Err(Error::InfeasibleCalibration(_))));
    }

    #[test]
    fn calibrate_dp_reference_alpha_and_consistency() {
        let constants = LossConstants::new(1.0, 1.0, 1.0).unwrap();
        let cal = calibrate_dp(1.0, 1e-5, &constants, 1000, 1).unwrap();
        assert!((cal.alpha - 24.0259).abs() < 1e-3);
        // the asymptote at calibrated parameters converts back to exactly eps
        let p = PrivacyParams::new(cal.alpha, constants, 1000, cal.sigma2, 1).unwrap();
        let eps_dp = to_dp(p.asymptote(), cal.alpha, 1e-5).unwrap();
        assert!(eps_dp <= 1.0 + 1e-12, "{eps_dp}");
        // finite K keeps strictly below the asymptote
        let eta = 1.0 / (2.0 * constants.beta);
        let finite = to_dp(
            rdp_constant(&p, eta, cal.iterations).unwrap(),
            cal.alpha,
            1e-5,
        )
        .unwrap();
        assert!(finite <= 1.0);
    }

    #[test]
    fn calibrate_dp_enforces_theorem_hypothesis() {
        let constants = LossConstants::new(1.0, 1.0, 1.0).unwrap();
        let err = calibrate_dp(30.0, 1e-5, &constants, 1000, 1);
        assert!(matches!(err, Err(Error::InfeasibleCalibration(_))));
    }

    #[test]
    fn calibrate_decreasing_branch_crossover() {
        // beta/lambda = 4 and n = 128 keep every quantity binary-exact
        let constants = LossConstants::new(1.0, 0.25, 1.0).unwrap();
        let (alpha, dim, n) = (2.0, 1usize, 128usize);
        let eps_for = |r: f64| alpha * dim as f64 * r / (n as f64 * n as f64);
        // at the crossover r = (beta/lambda)^2 = 16 both branches agree
        let cal = calibrate_decreasing(eps_for(16.0), alpha, &constants, n, dim).unwrap();
        assert_eq!(cal.iterations, 64);
        // far below it the linear branch dominates: K = (beta/lambda) * r
        let small = calibrate_decreasing(eps_for(1.0), alpha, &constants, n, dim).unwrap();
        assert_eq!(small.iterations, 4);
        // far above it the quadratic branch: K = (lambda/beta) * r^2
        let big = calibrate_decreasing(eps_for(4096.0), alpha, &constants, n, dim).unwrap();
        assert_eq!(big.iterations, 4_194_304);
    }

    #[test]
    fn epsilon_monotonicity_probes() {
        let constants = LossConstants::new(1.0, 1.0, 2.0).unwrap();
        let s = StepSchedule::constant(0.25).unwrap();
        let eps = |alpha: f64, n: usize, sigma2: f64, k: usize| {
            let p = PrivacyParams::new(alpha, constants, n, sigma2, 1).unwrap();
            rdp_general(&p, &s, k).unwrap()
        };
        assert!(eps(2.0, 100, 1.0, 20) <= eps(2.0, 100, 1.0, 40));
        assert!(eps(2.0, 100, 1.0, 20) < eps(4.0, 100, 1.0, 20));
        assert!(eps(2.0, 200, 1.0, 20) < eps(2.0, 100, 1.0, 20));
        assert!(eps(2.0, 100, 2.0, 20) < eps(2.0, 100, 1.0, 20));
        // and the asymptote caps everything
        let p = PrivacyParams::new(2.0, constants, 100, 1.0, 1).unwrap();
        for k in [1usize, 10, 100, 100000] {
            assert!(rdp_general(&p, &s, k).unwrap() <= p.asymptote());
            assert!(rdp_decreasing(&p, k) <= p.asymptote());
        }
    }

    #[test]
    fn privacy_report_is_self_consistent() {
        let constants = LossConstants::new(1.0, 1.0, 1.0).unwrap();
        let s = StepSchedule::constant(0.25).unwrap();
        let grid = default_alpha_grid();
        let report = privacy_report(&constants, 100, 1.0, 1, &s, 100, 1e-5, &grid).unwrap();
        assert_eq!(report.rdp_curve.len(), grid.len());
        assert!(report.rdp_curve.iter().all(|pt| pt.eps_rdp.is_finite()));
        assert!(report.eps_dp >= report.eps_rdp);
        assert!(report.eps_rdp <= report.asymptote);
    }
}
