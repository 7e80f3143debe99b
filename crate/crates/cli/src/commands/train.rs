//! `train`: run one method on the configured dataset and emit the report
//! bundle (report.json, metrics.csv, epsilon_curve.csv).

use std::path::Path;

use sgld_core::accountant::{default_alpha_grid, privacy_report, to_dp};
use sgld_core::sgld::{dp_sgd_train, dp_sgld_train, sgd_train, Mode, Trajectory, TrainConfig};
use sgld_core::types::RunSeed;

use crate::commands::account::build_epsilon_curve;
use crate::commands::Method;
use crate::config::ResolvedRun;
use crate::error::{CliError, Result};
use crate::report::{
    accuracy, config_hash, empirical_risk, write_epsilon_curve, ConstantsEcho, MetricRow,
    PrivacySection, ReportBundle, TrainEcho,
};

pub fn train_config(run: &ResolvedRun, seed: u64) -> TrainConfig {
    TrainConfig {
        batch_size: run.data.config.batch_size,
        iterations: run.iterations,
        sigma2: run.sigma2,
        schedule: run.schedule.clone(),
        ball: run.data.ball,
        seed: RunSeed(seed),
        mode: Mode::Privacy,
        snapshot_stride: run.data.config.snapshot_stride,
        record_loss: false,
    }
}

/// Runs the selected method with an explicit seed.
pub fn run_method(run: &ResolvedRun, method: Method, seed: u64) -> Result<Trajectory> {
    let cfg = train_config(run, seed);
    let data = &run.data.train;
    let loss = &run.data.loss;
    let constants = &run.data.constants;
    let traj = match method {
        Method::Sgld => dp_sgld_train(&cfg, data, loss, constants)?,
        Method::SgdDp => {
            let clip = run.data.config.clip_norm.unwrap_or(constants.l);
            dp_sgd_train(&cfg, data, loss, constants, clip)?
        }
        Method::Sgd => sgd_train(&cfg, data, loss, constants)?,
    };
    Ok(traj)
}

/// Privacy section for the method, or None for non-private runs.
pub fn privacy_for(run: &ResolvedRun, method: Method) -> Result<Option<PrivacySection>> {
    if run.sigma2 <= 0.0 || method == Method::Sgd {
        return Ok(None);
    }
    let constants = &run.data.constants;
    let n = run.data.train.n();
    let dim = sgld_core::losses::LossModel::dim(&run.data.loss, &run.data.train);
    let mut grid = default_alpha_grid();
    if let Some(alpha) = run.alpha_hint {
        grid.push(alpha);
    }
    match method {
        Method::Sgld => {
            let report = privacy_report(
                constants,
                n,
                run.sigma2,
                dim,
                &run.schedule,
                run.iterations,
                run.delta,
                &grid,
            )?;
            Ok(Some(PrivacySection::from_langevin(&report)))
        }
        Method::SgdDp => {
            // the clipped baseline is accounted with the per-step
            // composition estimate, not the Langevin bound
            let clip = run.data.config.clip_norm.unwrap_or(constants.l);
            let sum = run.schedule.sum(run.iterations)?;
            let nf = n as f64;
            let mut curve = Vec::with_capacity(grid.len());
            let mut best: Option<(f64, f64, f64)> = None;
            for &alpha in &grid {
                let eps_rdp = alpha * clip * clip * sum / (nf * nf * run.sigma2);
                let eps_dp = to_dp(eps_rdp, alpha, run.delta)?;
                curve.push((alpha, eps_rdp));
                match best {
                    Some((_, _, cur)) if eps_dp >= cur => {}
                    _ => best = Some((alpha, eps_rdp, eps_dp)),
                }
            }
            let (alpha, eps_rdp, eps_dp) = best.expect("grid is nonempty");
            let asymptote = 4.0 * alpha * constants.l * constants.l
                / (constants.lambda * nf * nf * run.sigma2);
            Ok(Some(PrivacySection {
                accounting: "composition".to_string(),
                alpha,
                eps_rdp,
                eps_dp,
                delta: run.delta,
                baseline: eps_rdp,
                asymptote,
                rdp_curve: curve,
            }))
        }
        Method::Sgd => unreachable!(),
    }
}

pub fn cmd_train(run: &ResolvedRun, method: Method, out: Option<&Path>) -> Result<ReportBundle> {
    let traj = run_method(run, method, run.data.config.seed)?;
    let loss = &run.data.loss;

    let mut metrics = vec![MetricRow {
        split: "train".to_string(),
        accuracy: accuracy(loss, &traj.final_theta, &run.data.train),
        empirical_risk: empirical_risk(loss, &traj.final_theta, &run.data.train)?,
    }];
    if let Some(test) = &run.data.test {
        metrics.push(MetricRow {
            split: "test".to_string(),
            accuracy: accuracy(loss, &traj.final_theta, test),
            empirical_risk: empirical_risk(loss, &traj.final_theta, test)?,
        });
    }

    let privacy = privacy_for(run, method)?;
    if let (Some(p), Some((eps_target, _))) = (&privacy, run.target) {
        if method == Method::Sgld && p.eps_dp > eps_target {
            return Err(CliError::Runtime(format!(
                "calibrated run reports eps_dp = {} above the target {eps_target}",
                p.eps_dp
            )));
        }
    }

    let bundle = ReportBundle {
        schema_version: crate::report::REPORT_SCHEMA_VERSION,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        config_hash: config_hash(&run.data.config)?,
        seed: run.data.config.seed,
        constants: ConstantsEcho::new(&run.data.constants, run.data.ball.radius(), run.sigma2),
        train: TrainEcho {
            method: method.name().to_string(),
            batch_size: run.data.config.batch_size,
            iterations: run.iterations,
            epochs_equivalent: run.epochs_equivalent(),
            sigma2: run.sigma2,
            schedule: format!("{:?}", run.schedule),
            snapshot_stride: run.data.config.snapshot_stride,
            n_train: run.data.train.n(),
            n_test: run.data.test.as_ref().map(|t| t.n()).unwrap_or(0),
            p: run.data.train.p(),
            classes: run.data.train.class_count(),
            rescaled_rows_train: run.data.rescaled_train,
            rescaled_rows_test: run.data.rescaled_test,
            dataset: run.data.dataset_name.clone(),
            loss: loss.describe(),
        },
        metrics,
        privacy,
        final_theta: traj.final_theta,
    };

    if let Some(dir) = out {
        bundle.write(dir)?;
        if run.sigma2 > 0.0 {
            let alpha = bundle
                .privacy
                .as_ref()
                .map(|p| p.alpha)
                .unwrap_or(2.0);
            let rows = build_epsilon_curve(run, alpha, run.iterations, 101)?;
            write_epsilon_curve(&dir.join("epsilon_curve.csv"), &rows)?;
        } else {
            // no privacy guarantee to tabulate; keep the contract of always
            // emitting the file
            write_epsilon_curve(&dir.join("epsilon_curve.csv"), &[])?;
        }
    }
    Ok(bundle)
}
