//! Report bundle: metrics, privacy summary, constants echo and provenance.
//! Everything written here is deterministic for a given config and seed; no
//! wall-clock fields, so identical runs produce byte-identical files.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use sgld_core::accountant::PrivacyReport;
use sgld_core::losses::{LossConstants, LossModel};
use sgld_core::types::Dataset;

use crate::config::{LossKind, RunConfigFile};
use crate::error::Result;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Hex SHA-256 of the normalized (parsed, overrides applied) config.
pub fn config_hash(config: &RunConfigFile) -> Result<String> {
    let bytes = serde_json::to_vec(config)?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    Ok(hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect())
}

/// 17 significant digits: enough to round-trip any f64 exactly.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConstantsEcho {
    pub l: f64,
    pub lambda: f64,
    pub beta: f64,
    pub radius: f64,
    /// LSI constant λ/(2σ²) of the run, when σ² > 0.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lsi_c: Option<f64>,
}

impl ConstantsEcho {
    pub fn new(constants: &LossConstants, radius: f64, sigma2: f64) -> Self {
        ConstantsEcho {
            l: constants.l,
            lambda: constants.lambda,
            beta: constants.beta,
            radius,
            lsi_c: (sigma2 > 0.0).then(|| constants.lambda / (2.0 * sigma2)),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricRow {
    pub split: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub accuracy: Option<f64>,
    pub empirical_risk: f64,
}

/// Privacy section of a report. `accounting` distinguishes the Langevin
/// bound (for the noisy trainer) from the per-step composition estimate used
/// for the clipped baseline.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PrivacySection {
    pub accounting: String,
    pub alpha: f64,
    pub eps_rdp: f64,
    pub eps_dp: f64,
    pub delta: f64,
    pub baseline: f64,
    pub asymptote: f64,
    pub rdp_curve: Vec<(f64, f64)>,
}

impl PrivacySection {
    pub fn from_langevin(report: &PrivacyReport) -> Self {
        PrivacySection {
            accounting: "langevin".to_string(),
            alpha: report.alpha,
            eps_rdp: report.eps_rdp,
            eps_dp: report.eps_dp,
            delta: report.delta,
            baseline: report.baseline,
            asymptote: report.asymptote,
            rdp_curve: report
                .rdp_curve
                .iter()
                .map(|pt| (pt.alpha, pt.eps_rdp))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainEcho {
    pub method: String,
    pub batch_size: usize,
    pub iterations: usize,
    pub epochs_equivalent: f64,
    pub sigma2: f64,
    pub schedule: String,
    pub snapshot_stride: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub p: usize,
    pub classes: usize,
    pub rescaled_rows_train: usize,
    pub rescaled_rows_test: usize,
    pub dataset: String,
    pub loss: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportBundle {
    pub schema_version: u32,
    pub tool_version: String,
    pub config_hash: String,
    pub seed: u64,
    pub constants: ConstantsEcho,
    pub train: TrainEcho,
    pub metrics: Vec<MetricRow>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub privacy: Option<PrivacySection>,
    pub final_theta: Vec<f64>,
}

impl ReportBundle {
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let json = serde_json::to_string_pretty(self)?;
        std::fs::write(dir.join("report.json"), json + "\n")?;
        let mut csv = String::from("split,accuracy,empirical_risk\n");
        for row in &self.metrics {
            let acc = row.accuracy.map(fmt_f64).unwrap_or_default();
            csv.push_str(&format!(
                "{},{},{}\n",
                row.split,
                acc,
                fmt_f64(row.empirical_risk)
            ));
        }
        std::fs::write(dir.join("metrics.csv"), csv)?;
        Ok(())
    }
}

/// One row of the ε-versus-K table emitted by the accounting command and
/// alongside training reports.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpsilonCurveRow {
    pub k: usize,
    /// Langevin bound for the run's schedule.
    pub eps_rdp: f64,
    /// Constant-step closed form at η = 1/(2β).
    pub eps_rdp_constant: f64,
    /// Decreasing-schedule closed form.
    pub eps_rdp_decreasing: f64,
    /// Per-step composition estimate at η = 1/(2β).
    pub eps_baseline: f64,
    /// (ε, δ) conversion of `eps_rdp` at the table's α and δ.
    pub eps_dp: f64,
}

pub fn write_epsilon_curve(path: &Path, rows: &[EpsilonCurveRow]) -> Result<()> {
    let mut csv =
        String::from("k,eps_rdp,eps_rdp_constant,eps_rdp_decreasing,eps_baseline,eps_dp\n");
    for r in rows {
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.k,
            fmt_f64(r.eps_rdp),
            fmt_f64(r.eps_rdp_constant),
            fmt_f64(r.eps_rdp_decreasing),
            fmt_f64(r.eps_baseline),
            fmt_f64(r.eps_dp)
        ));
    }
    std::fs::write(path, csv)?;
    Ok(())
}

/// Fraction of rows whose argmax score matches the label (ties to the
/// smaller class id). Only defined for the logistic loss.
pub fn accuracy(loss: &LossKind, theta: &[f64], data: &Dataset) -> Option<f64> {
    match loss {
        LossKind::Quadratic(_) => None,
        LossKind::Logistic(_) => {
            let c = data.class_count();
            let p = data.p();
            let mut correct = 0usize;
            for i in 0..data.n() {
                let x = data.row(i);
                let mut best = 0usize;
                let mut best_score = f64::NEG_INFINITY;
                for cls in 0..c {
                    let score: f64 = theta[cls * p..(cls + 1) * p]
                        .iter()
                        .zip(x)
                        .map(|(w, v)| w * v)
                        .sum();
                    if score > best_score {
                        best_score = score;
                        best = cls;
                    }
                }
                if best == data.label(i) {
                    correct += 1;
                }
            }
            Some(correct as f64 / data.n() as f64)
        }
    }
}

/// Risk (mean loss) on a split.
pub fn empirical_risk(loss: &LossKind, theta: &[f64], data: &Dataset) -> Result<f64> {
    Ok(loss.value_all(theta, data)?)
}

/// Largest class frequency; the baseline a useful classifier must beat.
pub fn majority_class_rate(data: &Dataset) -> f64 {
    let mut counts = vec![0usize; data.class_count().max(1)];
    for &y in data.labels() {
        counts[y] += 1;
    }
    counts.into_iter().max().unwrap_or(0) as f64 / data.n() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn f64_formatting_round_trips() {
        for &x in &[
            0.1,
            1.0 / 3.0,
            7.99997e-4,
            f64::MIN_POSITIVE,
            std::f64::consts::PI * 1e8,
            -0.0,
        ] {
            let s = fmt_f64(x);
            let back: f64 = s.parse().unwrap();
            assert_eq!(back.to_bits(), x.to_bits(), "{s}");
        }
    }

    #[test]
    fn majority_rate_counts_the_top_class() {
        let data = Dataset::labeled(
            vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6],
            vec![1, 1, 0],
            2,
            2,
            1.0,
        )
        .unwrap();
        assert!((majority_class_rate(&data) - 2.0 / 3.0).abs() < 1e-15);
    }
}
