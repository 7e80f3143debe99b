//! `account`: tabulate the privacy bounds against the iteration count.

use std::path::Path;

use serde::Serialize;
use sgld_core::accountant::{
    composition_baseline, default_alpha_grid, optimize_alpha, rdp_constant, rdp_decreasing,
    rdp_general, to_dp, PrivacyParams,
};
use sgld_core::losses::LossModel;

use crate::config::ResolvedRun;
use crate::error::Result;
use crate::report::{write_epsilon_curve, EpsilonCurveRow};

#[derive(Debug, Serialize)]
pub struct AccountOutput {
    pub alpha: f64,
    pub delta: f64,
    pub sigma2: f64,
    pub n: usize,
    pub dim: usize,
    /// 4αL²/(λn²σ²) at the table's α.
    pub asymptote: f64,
    pub rows: Vec<EpsilonCurveRow>,
}

/// ε-versus-K rows for the run's parameters at a fixed Rényi order. The
/// constant-step and baseline columns use the half-smoothness step 1/(2β);
/// the general column uses the run's own schedule.
pub fn build_epsilon_curve(
    run: &ResolvedRun,
    alpha: f64,
    k_max: usize,
    points: usize,
) -> Result<Vec<EpsilonCurveRow>> {
    let constants = run.data.constants;
    let n = run.data.train.n();
    let dim = run.data.loss.dim(&run.data.train);
    let p = PrivacyParams::new(alpha, constants, n, run.sigma2, dim)?;
    let half_step = 1.0 / (2.0 * constants.beta);

    let mut ks: Vec<usize> = Vec::new();
    let step = (k_max / points.max(1).saturating_sub(1).max(1)).max(1);
    let mut k = 0;
    while k < k_max {
        ks.push(k);
        k += step;
    }
    ks.push(k_max);
    ks.dedup();

    let mut rows = Vec::with_capacity(ks.len());
    for &k in &ks {
        let eps_rdp = rdp_general(&p, &run.schedule, k)?;
        rows.push(EpsilonCurveRow {
            k,
            eps_rdp,
            eps_rdp_constant: rdp_constant(&p, half_step, k)?,
            eps_rdp_decreasing: rdp_decreasing(&p, k),
            eps_baseline: composition_baseline(alpha, constants.l, n, run.sigma2, half_step, k),
            eps_dp: to_dp(eps_rdp, alpha, run.delta)?,
        });
    }
    Ok(rows)
}

pub fn cmd_account(
    run: &ResolvedRun,
    k_max: usize,
    points: usize,
    alpha_override: Option<f64>,
    out: Option<&Path>,
) -> Result<AccountOutput> {
    let constants = run.data.constants;
    let n = run.data.train.n();
    let dim = run.data.loss.dim(&run.data.train);
    let alpha = match (alpha_override, run.alpha_hint) {
        (Some(a), _) => a,
        (None, Some(a)) => a,
        (None, None) => {
            let grid = default_alpha_grid();
            optimize_alpha(
                &constants,
                n,
                run.sigma2,
                dim,
                &run.schedule,
                k_max,
                run.delta,
                &grid,
            )?
            .0
        }
    };
    let rows = build_epsilon_curve(run, alpha, k_max, points)?;
    let output = AccountOutput {
        alpha,
        delta: run.delta,
        sigma2: run.sigma2,
        n,
        dim,
        asymptote: PrivacyParams::new(alpha, constants, n, run.sigma2, dim)?.asymptote(),
        rows,
    };
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        write_epsilon_curve(&dir.join("epsilon_curve.csv"), &output.rows)?;
        std::fs::write(
            dir.join("account.json"),
            serde_json::to_string_pretty(&output)? + "\n",
        )?;
    }
    Ok(output)
}
