//! `bench`: method-by-method comparison table over the configured datasets,
//! Table-style columns (method, dataset, model, epochs, epsilon, accuracy).

use std::path::Path;

use serde::Serialize;

use crate::commands::train::{privacy_for, run_method};
use crate::commands::Method;
use crate::config::ResolvedRun;
use crate::error::Result;
use crate::report::{accuracy, empirical_risk, fmt_f64};

#[derive(Debug, Serialize)]
pub struct BenchRow {
    pub method: String,
    pub dataset: String,
    pub model: String,
    pub schedule: String,
    pub epochs: f64,
    /// Reported (ε, δ) guarantee; empty for the non-private baseline.
    pub epsilon: Option<f64>,
    pub delta: Option<f64>,
    pub accuracy_mean: Option<f64>,
    pub accuracy_stderr: Option<f64>,
    pub risk_mean: f64,
    pub seeds: usize,
}

const METHODS: [Method; 3] = [Method::Sgld, Method::SgdDp, Method::Sgd];

pub fn cmd_bench(runs: &[ResolvedRun], n_seeds: usize, out: Option<&Path>) -> Result<Vec<BenchRow>> {
    if n_seeds == 0 {
        return Err(crate::error::CliError::Config(
            "bench needs at least one seed".into(),
        ));
    }
    let mut rows = Vec::new();
    for run in runs {
        let eval_data = run.data.test.as_ref().unwrap_or(&run.data.train);
        for method in METHODS {
            let privacy = privacy_for(run, method)?;
            let mut accs = Vec::with_capacity(n_seeds);
            let mut risks = Vec::with_capacity(n_seeds);
            for i in 0..n_seeds {
                let seed = run.data.config.seed.wrapping_add(i as u64);
                let traj = run_method(run, method, seed)?;
                if let Some(a) = accuracy(&run.data.loss, &traj.final_theta, eval_data) {
                    accs.push(a);
                }
                risks.push(empirical_risk(&run.data.loss, &traj.final_theta, eval_data)?);
            }
            let (acc_mean, acc_se) = if accs.is_empty() {
                (None, None)
            } else {
                let nf = accs.len() as f64;
                let mean = accs.iter().sum::<f64>() / nf;
                let se = if accs.len() > 1 {
                    let var =
                        accs.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / (nf - 1.0);
                    Some((var / nf).sqrt())
                } else {
                    Some(0.0)
                };
                (Some(mean), se)
            };
            rows.push(BenchRow {
                method: method.name().to_string(),
                dataset: run.data.dataset_name.clone(),
                model: run.data.loss.describe(),
                schedule: format!("{:?}", run.schedule),
                epochs: run.epochs_equivalent(),
                epsilon: privacy.as_ref().map(|p| p.eps_dp),
                delta: privacy.as_ref().map(|p| p.delta),
                accuracy_mean: acc_mean,
                accuracy_stderr: acc_se,
                risk_mean: risks.iter().sum::<f64>() / risks.len() as f64,
                seeds: n_seeds,
            });
        }
    }

    let mut csv = String::from(
        "method,dataset,model,schedule,epochs,epsilon,delta,accuracy_mean,accuracy_stderr,risk_mean,seeds\n",
    );
    for r in &rows {
        csv.push_str(&format!(
            "{},\"{}\",\"{}\",\"{}\",{},{},{},{},{},{},{}\n",
            r.method,
            r.dataset,
            r.model,
            r.schedule,
            fmt_f64(r.epochs),
            r.epsilon.map(fmt_f64).unwrap_or_default(),
            r.delta.map(fmt_f64).unwrap_or_default(),
            r.accuracy_mean.map(fmt_f64).unwrap_or_default(),
            r.accuracy_stderr.map(fmt_f64).unwrap_or_default(),
            fmt_f64(r.risk_mean),
            r.seeds
        ));
    }
    print!("{csv}");
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("bench.csv"), csv)?;
        std::fs::write(
            dir.join("bench.json"),
            serde_json::to_string_pretty(&rows)? + "\n",
        )?;
    }
    Ok(rows)
}
