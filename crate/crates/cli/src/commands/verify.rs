//! `verify`: self-contained verification suites over shipped fixtures, with
//! a machine-readable verdict and a non-zero exit code on any failure.

use std::path::Path;

use clap::ValueEnum;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::Serialize;
use sgld_core::accountant::{
    calibrate_dp, calibrate_rdp, composition_baseline, rdp_clsi, rdp_constant, rdp_decreasing,
    rdp_general, rdp_recursion, PrivacyParams,
};
use sgld_core::losses::{LossConstants, LossModel, QuadraticLoss};
use sgld_core::oracle::{
    avg_risk_mc, excess_risk_mc, oracle_required_radius, privacy_oracle_check, xi_squared,
};
use sgld_core::sgld::{Mode, TrainConfig};
use sgld_core::types::{Dataset, L2Ball, RunSeed, StepSchedule};
use sgld_core::Error;

use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Identities,
    Privacy,
    Utility,
    All,
}

#[derive(Debug, Serialize)]
pub struct Assertion {
    pub suite: &'static str,
    pub name: &'static str,
    pub pass: bool,
    pub details: String,
}

#[derive(Debug, Serialize)]
pub struct Verdict {
    pub pass: bool,
    pub assertions: Vec<Assertion>,
}

type Check = std::result::Result<String, String>;

fn run_check(
    out: &mut Vec<Assertion>,
    suite: &'static str,
    name: &'static str,
    f: impl FnOnce() -> Check,
) {
    let (pass, details) = match f() {
        Ok(d) => (true, d),
        Err(d) => (false, d),
    };
    out.push(Assertion {
        suite,
        name,
        pass,
        details,
    });
}

struct RandomCase {
    params: PrivacyParams,
    schedule: StepSchedule,
    k_count: usize,
}

/// Seeded random accounting cases spanning all three schedule kinds.
fn random_cases(count: usize) -> Vec<RandomCase> {
    let mut rng = ChaCha12Rng::seed_from_u64(0x5EED_CA5E);
    let mut cases = Vec::with_capacity(count);
    for i in 0..count {
        let lambda: f64 = rng.random_range(0.05..2.0);
        let beta = lambda * rng.random_range(1.05..20.0);
        let l: f64 = rng.random_range(0.5..3.0);
        let alpha: f64 = rng.random_range(1.1..64.0);
        let sigma2: f64 = rng.random_range(0.1..4.0);
        let n: usize = rng.random_range(10..5000);
        let k_count: usize = rng.random_range(1..=10_000);
        let schedule = match i % 3 {
            0 => StepSchedule::constant(rng.random_range(0.05..0.95) / beta).unwrap(),
            1 => StepSchedule::decreasing(beta, lambda).unwrap(),
            _ => {
                let etas: Vec<f64> = (0..k_count)
                    .map(|_| rng.random_range(0.05..0.95) / beta)
                    .collect();
                StepSchedule::explicit(etas).unwrap()
            }
        };
        cases.push(RandomCase {
            params: PrivacyParams::new(
                alpha,
                LossConstants::new(l, lambda, beta).unwrap(),
                n,
                sigma2,
                1,
            )
            .unwrap(),
            schedule,
            k_count,
        });
    }
    cases
}

fn check_recursion_vs_general() -> Check {
    let mut worst: f64 = 0.0;
    for case in random_cases(50) {
        let general = rdp_general(&case.params, &case.schedule, case.k_count)
            .map_err(|e| e.to_string())?;
        let recursion = rdp_recursion(&case.params, &case.schedule, case.k_count)
            .map_err(|e| e.to_string())?;
        let rel = (recursion - general).abs() / general.max(1e-300);
        worst = worst.max(rel);
        if rel > 1e-9 {
            return Err(format!(
                "recursion {recursion} vs closed form {general}: relative gap {rel} > 1e-9"
            ));
        }
    }
    Ok(format!(
        "50 random schedules agree; worst relative gap {worst:.3e}"
    ))
}

fn check_clsi_vs_general() -> Check {
    let mut worst: f64 = 0.0;
    for case in random_cases(50) {
        let p = &case.params;
        let general =
            rdp_general(p, &case.schedule, case.k_count).map_err(|e| e.to_string())?;
        let c = p.constants.lambda / (2.0 * p.sigma2);
        let clsi = rdp_clsi(
            p.alpha,
            p.constants.l,
            c,
            p.n,
            p.sigma2,
            &case.schedule,
            case.k_count,
        )
        .map_err(|e| e.to_string())?;
        let rel = (clsi - general).abs() / general.max(1e-300);
        worst = worst.max(rel);
        if rel > 1e-12 {
            return Err(format!(
                "c-LSI form {clsi} vs general {general}: relative gap {rel} > 1e-12"
            ));
        }
    }
    Ok(format!(
        "c = lambda/(2 sigma^2) reduction holds; worst relative gap {worst:.3e}"
    ))
}

fn check_constant_bitwise() -> Check {
    for case in random_cases(20) {
        if let StepSchedule::Constant(eta) = case.schedule {
            let a = rdp_constant(&case.params, eta, case.k_count).map_err(|e| e.to_string())?;
            let b = rdp_general(&case.params, &case.schedule, case.k_count)
                .map_err(|e| e.to_string())?;
            if a.to_bits() != b.to_bits() {
                return Err(format!("closed form {a} differs from general {b}"));
            }
        }
    }
    Ok("constant closed form is bit-identical to the general bound".to_string())
}

fn check_decreasing_corollary() -> Check {
    let constants = LossConstants::new(1.0, 1.0, 1.0).unwrap();
    let p = PrivacyParams::new(2.0, constants, 100, 1.0, 1).unwrap();
    // the corollary integrates the tail sum eta_1..eta_K, produced exactly
    // by the schedule shifted one step
    let shifted = StepSchedule::decreasing(1.0 + 0.25, 1.0).unwrap();
    let mut last_ratio = 0.0;
    for k in [1usize, 10, 100, 1000, 10000, 100000] {
        let exact = rdp_general(&p, &shifted, k).map_err(|e| e.to_string())?;
        let corollary = rdp_decreasing(&p, k);
        if exact > corollary * (1.0 + 1e-12) {
            return Err(format!(
                "K = {k}: exact tail-sum bound {exact} exceeds the corollary {corollary}"
            ));
        }
        last_ratio = exact / corollary;
    }
    if last_ratio < 0.999 {
        return Err(format!(
            "exact/corollary ratio {last_ratio} did not approach 1 for large K"
        ));
    }
    Ok(format!(
        "corollary dominates the exact tail sum; ratio at K = 1e5 is {last_ratio:.6}"
    ))
}

fn check_regime_factor_two() -> Check {
    let mut worst_window = (f64::INFINITY, 0.0f64);
    let mut worst_linear: f64 = 0.0;
    for (lambda, beta_ratio, n, sigma2, alpha) in [
        (1.0, 1.0, 100usize, 1.0, 2.0),
        (0.2, 10.0, 500, 0.5, 4.0),
        (0.05, 100.0, 1000, 0.25, 8.0),
    ] {
        let beta = lambda * beta_ratio;
        let constants = LossConstants::new(1.0, lambda, beta).unwrap();
        let p = PrivacyParams::new(alpha, constants, n, sigma2, 1).unwrap();
        let eta = 1.0 / (2.0 * beta);
        // stay in the small-K regime lambda*K/(4 beta) <= 0.01
        let k_cap = (0.04 * beta / lambda).floor().max(1.0) as usize;
        for k in [1usize, k_cap / 2, k_cap] {
            let k = k.max(1);
            if lambda * k as f64 / (4.0 * beta) > 0.01 {
                continue;
            }
            let eps = rdp_constant(&p, eta, k).map_err(|e| e.to_string())?;
            let baseline = composition_baseline(alpha, 1.0, n, sigma2, eta, k);
            let ratio = eps / baseline;
            if !(1.9..=2.0).contains(&ratio) {
                return Err(format!(
                    "eps/baseline ratio {ratio} outside [1.9, 2.0] at K = {k}"
                ));
            }
            worst_window = (worst_window.0.min(ratio), worst_window.1.max(ratio));
            let linear = alpha * 1.0 * k as f64 / (beta * (n as f64).powi(2) * sigma2);
            let rel = (eps - linear).abs() / linear;
            worst_linear = worst_linear.max(rel);
            if rel > 0.05 {
                return Err(format!(
                    "small-K closed form {eps} deviates from alpha L^2 K/(beta n^2 sigma^2) = {linear} by {rel}"
                ));
            }
        }
    }
    Ok(format!(
        "ratio window [{:.4}, {:.4}], worst linear-approximation error {:.2e}",
        worst_window.0, worst_window.1, worst_linear
    ))
}

fn check_asymptote_limit() -> Check {
    let constants = LossConstants::new(1.5, 0.8, 2.0).unwrap();
    let p = PrivacyParams::new(4.0, constants, 200, 0.5, 1).unwrap();
    let eta = 0.4; // < 1/beta
    // lambda/2 * eta * K = 0.16 K; K = 100 gives e^-16 ~ 1.1e-7 < 1e-6
    let eps = rdp_constant(&p, eta, 100).map_err(|e| e.to_string())?;
    let rel = (p.asymptote() - eps) / p.asymptote();
    if rel > 1e-6 {
        return Err(format!(
            "bound {eps} is {rel} away from the asymptote {}",
            p.asymptote()
        ));
    }
    Ok(format!("asymptote reached within {rel:.3e} relative"))
}

fn check_calibration_round_trip() -> Check {
    let mut count = 0;
    for lambda in [0.1, 1.0] {
        for beta_ratio in [1.0, 20.0] {
            for l in [0.5, 2.0] {
                let constants = LossConstants::new(l, lambda, lambda * beta_ratio).unwrap();
                for (eps, alpha, n, dim) in [
                    (0.5, 2.0, 500usize, 4usize),
                    (0.05, 8.0, 2000, 10),
                    (2.0, 1.5, 100, 1),
                ] {
                    let cal = calibrate_rdp(eps, alpha, &constants, n, dim)
                        .map_err(|e| e.to_string())?;
                    let p = PrivacyParams::new(alpha, constants, n, cal.sigma2, dim)
                        .map_err(|e| e.to_string())?;
                    let eta = 1.0 / (2.0 * constants.beta);
                    let achieved =
                        rdp_constant(&p, eta, cal.iterations).map_err(|e| e.to_string())?;
                    if achieved > eps {
                        return Err(format!(
                            "calibrated run reaches eps {achieved} above the target {eps}"
                        ));
                    }
                    count += 1;
                }
            }
        }
    }
    Ok(format!("{count} calibration targets all satisfied"))
}

fn check_calibration_hypothesis() -> Check {
    let constants = LossConstants::new(1.0, 1.0, 1.0).unwrap();
    match calibrate_dp(30.0, 1e-5, &constants, 1000, 1) {
        Err(Error::InfeasibleCalibration(_)) => {
            Ok("epsilon > 2 log(1/delta) correctly rejected".to_string())
        }
        other => Err(format!(
            "expected an infeasible-calibration error, got {other:?}"
        )),
    }
}

fn combinations(n: usize, m: usize, mut visit: impl FnMut(&[usize])) {
    let mut idx: Vec<usize> = (0..m).collect();
    loop {
        visit(&idx);
        let mut i = m;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if idx[i] != i + n - m {
                break;
            }
            if i == 0 {
                return;
            }
        }
        idx[i] += 1;
        for j in i + 1..m {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

fn check_xi_exhaustive() -> Check {
    let loss = QuadraticLoss::new();
    let mut worst: f64 = 0.0;
    for n in 2..=12usize {
        let feats: Vec<f64> = (0..n)
            .map(|i| ((i * 29 + 7) % 23) as f64 / 23.0 - 0.5)
            .collect();
        let data = Dataset::unlabeled(feats, 1, 1.0).map_err(|e| e.to_string())?;
        let theta_star = vec![0.17];
        let mut g = vec![0.0];
        for m in 1..=n {
            let exact = xi_squared(&data, &loss, &theta_star, m).map_err(|e| e.to_string())?;
            let mut total = 0.0;
            let mut batches = 0usize;
            combinations(n, m, |idx| {
                let mut acc = 0.0;
                for &i in idx {
                    loss.example_grad(&theta_star, &data, i, &mut g).unwrap();
                    acc += g[0];
                }
                acc /= m as f64;
                total += acc * acc;
                batches += 1;
            });
            let brute = total / batches as f64;
            let gap = (exact - brute).abs() / brute.max(1.0);
            worst = worst.max(gap);
            if gap > 1e-12 {
                return Err(format!(
                    "n = {n}, m = {m}: identity {exact} vs enumeration {brute} (gap {gap})"
                ));
            }
        }
    }
    Ok(format!(
        "identity matches enumeration for n <= 12, all m; worst gap {worst:.3e}"
    ))
}

fn check_privacy_oracle_grid() -> Check {
    let mut max_ratio: f64 = 0.0;
    let mut checked = 0usize;
    for n in [50usize, 100, 500] {
        for sigma2 in [0.25, 0.5, 1.0] {
            for eta in [0.1, 0.4, 0.9] {
                let radius = oracle_required_radius(eta, sigma2, 1000);
                let ball = L2Ball::new(radius).map_err(|e| e.to_string())?;
                let report =
                    privacy_oracle_check(n, eta, sigma2, 1000, &[2.0, 4.0, 8.0], &ball)
                        .map_err(|e| e.to_string())?;
                if !report.holds {
                    return Err(format!(
                        "oracle divergence exceeded the bound at n = {n}, sigma2 = {sigma2}, eta = {eta} (ratio {})",
                        report.max_ratio
                    ));
                }
                max_ratio = max_ratio.max(report.max_ratio);
                checked += 1;
            }
        }
    }
    Ok(format!(
        "{checked} grid points hold for alpha in {{2, 4, 8}}, k <= 1000; max oracle/bound ratio {max_ratio:.3e}"
    ))
}

fn mc_fixture() -> (Dataset, QuadraticLoss, LossConstants, L2Ball) {
    let n = 100;
    let feats: Vec<f64> = (0..n)
        .map(|i| -1.0 + 2.0 * i as f64 / (n - 1) as f64)
        .collect();
    let data = Dataset::unlabeled(feats, 1, 1.0).unwrap();
    let loss = QuadraticLoss::new();
    let ball = L2Ball::new(50.0).unwrap();
    let constants = loss.constants(&data, &ball).unwrap();
    (data, loss, constants, ball)
}

fn check_excess_risk(seeds: usize) -> Check {
    let (data, loss, constants, ball) = mc_fixture();
    let config = TrainConfig {
        batch_size: 10,
        iterations: 200,
        sigma2: 0.1,
        schedule: StepSchedule::constant(0.25).unwrap(),
        ball,
        seed: RunSeed(90_000),
        mode: Mode::Utility,
        snapshot_stride: 0,
        record_loss: false,
    };
    let report =
        excess_risk_mc(&config, &data, &loss, &constants, seeds).map_err(|e| e.to_string())?;
    report.verify().map_err(|e| e.to_string())?;
    Ok(format!(
        "MC mean {:.5e} <= bound {:.5e} (envelope {:.5e}); slack x{:.2} over {} seeds",
        report.mc_mean,
        report.bound_mc,
        report.bound_envelope,
        report.slack(),
        report.seeds
    ))
}

fn check_avg_risk(seeds: usize) -> Check {
    let (data, loss, constants, ball) = mc_fixture();
    let config = TrainConfig {
        batch_size: 10,
        iterations: 200,
        sigma2: 0.1,
        schedule: StepSchedule::decreasing(constants.beta, constants.lambda).unwrap(),
        ball,
        seed: RunSeed(91_000),
        mode: Mode::Utility,
        snapshot_stride: 0,
        record_loss: false,
    };
    let report =
        avg_risk_mc(&config, &data, &loss, &constants, seeds).map_err(|e| e.to_string())?;
    report.verify().map_err(|e| e.to_string())?;
    Ok(format!(
        "MC mean {:.5e} <= bound {:.5e} (envelope {:.5e}); slack x{:.2} over {} seeds",
        report.mc_mean,
        report.bound_mc,
        report.bound_envelope,
        report.slack(),
        report.seeds
    ))
}

pub fn cmd_verify(suite: Suite, utility_seeds: usize, out: Option<&Path>) -> Result<Verdict> {
    let mut assertions = Vec::new();
    let identities = matches!(suite, Suite::Identities | Suite::All);
    let privacy = matches!(suite, Suite::Privacy | Suite::All);
    let utility = matches!(suite, Suite::Utility | Suite::All);

    if identities {
        run_check(&mut assertions, "identities", "recursion_vs_general", check_recursion_vs_general);
        run_check(&mut assertions, "identities", "clsi_vs_general", check_clsi_vs_general);
        run_check(&mut assertions, "identities", "constant_bitwise", check_constant_bitwise);
        run_check(&mut assertions, "identities", "decreasing_corollary", check_decreasing_corollary);
        run_check(&mut assertions, "identities", "regime_factor_two", check_regime_factor_two);
        run_check(&mut assertions, "identities", "asymptote_limit", check_asymptote_limit);
        run_check(&mut assertions, "identities", "calibration_round_trip", check_calibration_round_trip);
        run_check(&mut assertions, "identities", "calibration_hypothesis", check_calibration_hypothesis);
        run_check(&mut assertions, "identities", "xi_exhaustive", check_xi_exhaustive);
    }
    if privacy {
        run_check(&mut assertions, "privacy", "oracle_grid", check_privacy_oracle_grid);
    }
    if utility {
        run_check(&mut assertions, "utility", "excess_risk_fixed_step", || {
            check_excess_risk(utility_seeds)
        });
        run_check(&mut assertions, "utility", "avg_risk_decreasing_step", || {
            check_avg_risk(utility_seeds)
        });
    }

    let verdict = Verdict {
        pass: assertions.iter().all(|a| a.pass),
        assertions,
    };
    let json = serde_json::to_string_pretty(&verdict)?;
    println!("{json}");
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("verify.json"), json + "\n")?;
    }
    Ok(verdict)
}
