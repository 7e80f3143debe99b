//! Run configuration: a single JSON document, schema-validated before any
//! computation, then resolved into datasets, certified constants and
//! training parameters.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sgld_core::accountant::{calibrate_decreasing, calibrate_dp, closed_form_alpha};
use sgld_core::losses::{LogisticLoss, LossConstants, LossModel, QuadraticLoss};
use sgld_core::synthetic::gaussian_blobs;
use sgld_core::types::{Dataset, L2Ball, RunSeed, StepSchedule};

use crate::data::load_csv;
use crate::error::{CliError, Result};

pub const CONFIG_SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_DELTA: f64 = 1e-5;

fn default_label_column() -> String {
    "label".to_string()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum DatasetSpec {
    Csv {
        path: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        test_path: Option<String>,
        #[serde(default = "default_label_column")]
        label_column: String,
    },
    Blobs {
        train_n: usize,
        test_n: usize,
        features: usize,
        classes: usize,
        separation: f64,
        seed: u64,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum LossSpec {
    Logistic { lambda_reg: f64 },
    Quadratic,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ScheduleSpec {
    /// Constant step size; omitted eta means 1/(2β) from the certified
    /// constants.
    Constant {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        eta: Option<f64>,
    },
    /// η_k = 1/(2β + λk/2) built from the certified constants.
    Decreasing,
    Explicit { etas: Vec<f64> },
}

/// Exactly one of a direct noise variance or an (ε, δ) target; the schema
/// rejects documents carrying both or neither.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "NoiseSpecRaw", into = "NoiseSpecRaw")]
pub enum NoiseSpec {
    Sigma2 { sigma2: f64 },
    Target { epsilon: f64, delta: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NoiseSpecRaw {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sigma2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    delta: Option<f64>,
}

impl TryFrom<NoiseSpecRaw> for NoiseSpec {
    type Error = String;

    fn try_from(raw: NoiseSpecRaw) -> std::result::Result<Self, String> {
        match (raw.sigma2, raw.epsilon, raw.delta) {
            (Some(sigma2), None, None) => Ok(NoiseSpec::Sigma2 { sigma2 }),
            (None, Some(epsilon), Some(delta)) => Ok(NoiseSpec::Target { epsilon, delta }),
            _ => Err(
                "noise must be exactly one of {\"sigma2\": ...} or {\"epsilon\": ..., \"delta\": ...}"
                    .to_string(),
            ),
        }
    }
}

impl From<NoiseSpec> for NoiseSpecRaw {
    fn from(spec: NoiseSpec) -> Self {
        match spec {
            NoiseSpec::Sigma2 { sigma2 } => NoiseSpecRaw {
                sigma2: Some(sigma2),
                epsilon: None,
                delta: None,
            },
            NoiseSpec::Target { epsilon, delta } => NoiseSpecRaw {
                sigma2: None,
                epsilon: Some(epsilon),
                delta: Some(delta),
            },
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfigFile {
    pub schema_version: u32,
    pub dataset: DatasetSpec,
    pub loss: LossSpec,
    pub norm_bound: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius_override: Option<f64>,
    pub batch_size: usize,
    pub schedule: ScheduleSpec,
    pub noise: NoiseSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epochs: Option<usize>,
    pub seed: u64,
    #[serde(default)]
    pub snapshot_stride: usize,
    /// δ used when converting reports to (ε, δ) for runs that specify σ²
    /// directly; targets carry their own δ.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    /// Per-example clip norm for the sgd-dp baseline; defaults to the
    /// certified L (clipping inactive).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clip_norm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<String>,
}

impl RunConfigFile {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let config: RunConfigFile = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        if config.schema_version != CONFIG_SCHEMA_VERSION {
            return Err(CliError::Config(format!(
                "unsupported schema_version {} (expected {CONFIG_SCHEMA_VERSION})",
                config.schema_version
            )));
        }
        Ok(config)
    }
}

/// Either loss behind one dispatch point, so command code stays generic.
#[derive(Debug, Clone, Copy)]
pub enum LossKind {
    Logistic(LogisticLoss),
    Quadratic(QuadraticLoss),
}

impl LossKind {
    pub fn describe(&self) -> String {
        match self {
            LossKind::Logistic(l) => format!("logistic(lambda_reg={})", l.lambda_reg()),
            LossKind::Quadratic(_) => "quadratic".to_string(),
        }
    }
}

impl LossModel for LossKind {
    fn dim(&self, data: &Dataset) -> usize {
        match self {
            LossKind::Logistic(l) => l.dim(data),
            LossKind::Quadratic(q) => q.dim(data),
        }
    }

    fn example_value(&self, theta: &[f64], data: &Dataset, i: usize) -> sgld_core::Result<f64> {
        match self {
            LossKind::Logistic(l) => l.example_value(theta, data, i),
            LossKind::Quadratic(q) => q.example_value(theta, data, i),
        }
    }

    fn example_grad(
        &self,
        theta: &[f64],
        data: &Dataset,
        i: usize,
        out: &mut [f64],
    ) -> sgld_core::Result<()> {
        match self {
            LossKind::Logistic(l) => l.example_grad(theta, data, i, out),
            LossKind::Quadratic(q) => q.example_grad(theta, data, i, out),
        }
    }

    fn constants(&self, data: &Dataset, ball: &L2Ball) -> sgld_core::Result<LossConstants> {
        match self {
            LossKind::Logistic(l) => l.constants(data, ball),
            LossKind::Quadratic(q) => q.constants(data, ball),
        }
    }
}

/// Datasets, loss and certified constants resolved from a config; enough for
/// calibration and accounting.
pub struct ResolvedData {
    pub config: RunConfigFile,
    pub train: Dataset,
    pub test: Option<Dataset>,
    pub rescaled_train: usize,
    pub rescaled_test: usize,
    pub loss: LossKind,
    pub ball: L2Ball,
    pub constants: LossConstants,
    pub dataset_name: String,
}

impl ResolvedData {
    pub fn load(config: RunConfigFile) -> Result<Self> {
        if !(config.norm_bound.is_finite() && config.norm_bound > 0.0) {
            return Err(CliError::Config(format!(
                "norm_bound must be finite and positive, got {}",
                config.norm_bound
            )));
        }
        let (train, test, rescaled_train, rescaled_test, dataset_name) = match &config.dataset {
            DatasetSpec::Csv {
                path,
                test_path,
                label_column,
            } => {
                let loaded = load_csv(Path::new(path), label_column, config.norm_bound)?;
                let (test, rescaled_test) = match test_path {
                    Some(tp) => {
                        let t = load_csv(Path::new(tp), label_column, config.norm_bound)?;
                        (Some(t.dataset), t.rescaled_rows)
                    }
                    None => (None, 0),
                };
                (
                    loaded.dataset,
                    test,
                    loaded.rescaled_rows,
                    rescaled_test,
                    path.clone(),
                )
            }
            DatasetSpec::Blobs {
                train_n,
                test_n,
                features,
                classes,
                separation,
                seed,
            } => {
                let (train, rescaled_train) = gaussian_blobs(
                    *train_n,
                    *features,
                    *classes,
                    *separation,
                    config.norm_bound,
                    RunSeed(*seed),
                )?;
                let (test, rescaled_test) = if *test_n > 0 {
                    let (t, r) = gaussian_blobs(
                        *test_n,
                        *features,
                        *classes,
                        *separation,
                        config.norm_bound,
                        RunSeed(seed.wrapping_add(1)),
                    )?;
                    (Some(t), r)
                } else {
                    (None, 0)
                };
                let name = format!(
                    "blobs(n={train_n},p={features},c={classes},sep={separation})"
                );
                (train, test, rescaled_train, rescaled_test, name)
            }
        };

        let loss = match &config.loss {
            LossSpec::Logistic { lambda_reg } => LossKind::Logistic(LogisticLoss::new(*lambda_reg)?),
            LossSpec::Quadratic => LossKind::Quadratic(QuadraticLoss::new()),
        };
        let radius = match (config.radius_override, &loss) {
            (Some(r), _) => r,
            (None, LossKind::Logistic(l)) => l.default_radius(train.class_count())?,
            (None, LossKind::Quadratic(_)) => {
                return Err(CliError::Config(
                    "quadratic loss needs an explicit radius_override".into(),
                ))
            }
        };
        let ball = L2Ball::new(radius)?;
        let constants = loss.constants(&train, &ball)?;
        Ok(ResolvedData {
            config,
            train,
            test,
            rescaled_train,
            rescaled_test,
            loss,
            ball,
            constants,
            dataset_name,
        })
    }
}

/// Fully resolved training parameters: schedule, σ², K, and the reporting δ.
pub struct ResolvedRun {
    pub data: ResolvedData,
    pub schedule: StepSchedule,
    pub sigma2: f64,
    pub iterations: usize,
    pub delta: f64,
    /// Present when (σ², K) came from an (ε, δ) target.
    pub target: Option<(f64, f64)>,
    /// Closed-form α of the calibration, when present.
    pub alpha_hint: Option<f64>,
}

impl ResolvedRun {
    pub fn resolve(data: ResolvedData) -> Result<Self> {
        let constants = data.constants;
        let config = &data.config;
        if config.batch_size == 0 || config.batch_size > data.train.n() {
            return Err(CliError::Config(format!(
                "batch_size must satisfy 1 <= m <= n = {}, got {}",
                data.train.n(),
                config.batch_size
            )));
        }
        let half_step = 1.0 / (2.0 * constants.beta);
        match config.noise.clone() {
            NoiseSpec::Target { epsilon, delta } => {
                if config.iterations.is_some() || config.epochs.is_some() {
                    return Err(CliError::Config(
                        "iterations/epochs cannot be set together with an (epsilon, delta) target; the calibrator chooses K".into(),
                    ));
                }
                let (schedule, cal) = match &config.schedule {
                    ScheduleSpec::Constant { eta: Some(_) } => {
                        return Err(CliError::Config(
                            "eta cannot be set together with an (epsilon, delta) target; the calibrated step size is 1/(2 beta)".into(),
                        ))
                    }
                    ScheduleSpec::Constant { eta: None } => (
                        StepSchedule::constant(half_step)?,
                        calibrate_dp(epsilon, delta, &constants, data.train.n(), data.loss.dim(&data.train))?,
                    ),
                    ScheduleSpec::Decreasing => {
                        let alpha = closed_form_alpha(epsilon, delta)?;
                        let cal = calibrate_decreasing(
                            epsilon / 2.0,
                            alpha,
                            &constants,
                            data.train.n(),
                            data.loss.dim(&data.train),
                        )?;
                        (
                            StepSchedule::decreasing(constants.beta, constants.lambda)?,
                            cal,
                        )
                    }
                    ScheduleSpec::Explicit { .. } => {
                        return Err(CliError::Config(
                            "explicit schedules cannot be calibrated to an (epsilon, delta) target".into(),
                        ))
                    }
                };
                Ok(ResolvedRun {
                    schedule,
                    sigma2: cal.sigma2,
                    iterations: cal.iterations,
                    delta,
                    target: Some((epsilon, delta)),
                    alpha_hint: Some(cal.alpha),
                    data,
                })
            }
            NoiseSpec::Sigma2 { sigma2 } => {
                let schedule = match &config.schedule {
                    ScheduleSpec::Constant { eta } => {
                        StepSchedule::constant(eta.unwrap_or(half_step))?
                    }
                    ScheduleSpec::Decreasing => {
                        StepSchedule::decreasing(constants.beta, constants.lambda)?
                    }
                    ScheduleSpec::Explicit { etas } => StepSchedule::explicit(etas.clone())?,
                };
                let iterations = match (config.iterations, config.epochs) {
                    (Some(k), None) => k,
                    (None, Some(e)) => sgld_core::sgld::iterations_for_epochs(
                        e,
                        data.train.n(),
                        config.batch_size,
                    ),
                    (Some(_), Some(_)) => {
                        return Err(CliError::Config(
                            "set either iterations or epochs, not both".into(),
                        ))
                    }
                    (None, None) => {
                        return Err(CliError::Config(
                            "either iterations or epochs is required when sigma2 is given".into(),
                        ))
                    }
                };
                let delta = config.delta.unwrap_or(DEFAULT_DELTA);
                if !delta.is_finite() || delta <= 0.0 || delta >= 1.0 {
                    return Err(CliError::Config(format!(
                        "delta must lie in (0, 1), got {delta}"
                    )));
                }
                Ok(ResolvedRun {
                    schedule,
                    sigma2,
                    iterations,
                    delta,
                    target: None,
                    alpha_hint: None,
                    data,
                })
            }
        }
    }

    pub fn load(config: RunConfigFile) -> Result<Self> {
        Self::resolve(ResolvedData::load(config)?)
    }

    /// Iterations per epoch for the echo in reports.
    pub fn epochs_equivalent(&self) -> f64 {
        let per_epoch = self.data.train.n().div_ceil(self.data.config.batch_size);
        self.iterations as f64 / per_epoch as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blob_config(noise: NoiseSpec) -> RunConfigFile {
        RunConfigFile {
            schema_version: 1,
            dataset: DatasetSpec::Blobs {
                train_n: 100,
                test_n: 20,
                features: 4,
                classes: 2,
                separation: 2.0,
                seed: 3,
            },
            loss: LossSpec::Logistic { lambda_reg: 0.05 },
            norm_bound: 1.0,
            radius_override: None,
            batch_size: 10,
            schedule: ScheduleSpec::Constant { eta: None },
            noise,
            iterations: Some(50),
            epochs: None,
            seed: 7,
            snapshot_stride: 0,
            delta: None,
            clip_norm: None,
            output_dir: None,
        }
    }

    #[test]
    fn noise_spec_rejects_both_forms() {
        let json = r#"{"sigma2": 0.1, "epsilon": 1.0, "delta": 1e-5}"#;
        assert!(serde_json::from_str::<NoiseSpec>(json).is_err());
        let sigma: NoiseSpec = serde_json::from_str(r#"{"sigma2": 0.1}"#).unwrap();
        assert!(matches!(sigma, NoiseSpec::Sigma2 { .. }));
        let target: NoiseSpec =
            serde_json::from_str(r#"{"epsilon": 1.0, "delta": 1e-5}"#).unwrap();
        assert!(matches!(target, NoiseSpec::Target { .. }));
    }

    #[test]
    fn sigma2_run_resolves_defaults() {
        let run = ResolvedRun::load(blob_config(NoiseSpec::Sigma2 { sigma2: 0.05 })).unwrap();
        assert_eq!(run.iterations, 50);
        assert_eq!(run.delta, DEFAULT_DELTA);
        // default constant step is 1/(2 beta)
        match run.schedule {
            StepSchedule::Constant(eta) => {
                assert!((eta - 1.0 / (2.0 * run.data.constants.beta)).abs() < 1e-15)
            }
            _ => panic!("expected constant schedule"),
        }
        // logistic default radius: sqrt(2 log C / lambda)
        let want = (2.0 * 2.0f64.ln() / run.data.constants.lambda).sqrt();
        assert!((run.data.ball.radius() - want).abs() < 1e-12);
    }

    #[test]
    fn target_run_calibrates_and_rejects_conflicts() {
        let mut cfg = blob_config(NoiseSpec::Target {
            epsilon: 1.0,
            delta: 1e-5,
        });
        cfg.iterations = None;
        let run = ResolvedRun::load(cfg.clone()).unwrap();
        assert!(run.sigma2 > 0.0);
        assert!(run.iterations > 0);
        assert_eq!(run.target, Some((1.0, 1e-5)));

        // iterations together with a target is ambiguous
        cfg.iterations = Some(10);
        assert!(matches!(
            ResolvedRun::load(cfg.clone()),
            Err(CliError::Config(_))
        ));

        // explicit eta together with a target is ambiguous
        cfg.iterations = None;
        cfg.schedule = ScheduleSpec::Constant { eta: Some(0.1) };
        assert!(matches!(ResolvedRun::load(cfg), Err(CliError::Config(_))));
    }

    #[test]
    fn quadratic_requires_radius_override() {
        let mut cfg = blob_config(NoiseSpec::Sigma2 { sigma2: 0.05 });
        cfg.loss = LossSpec::Quadratic;
        assert!(matches!(
            ResolvedRun::load(cfg.clone()),
            Err(CliError::Config(_))
        ));
        cfg.radius_override = Some(3.0);
        assert!(ResolvedRun::load(cfg).is_ok());
    }
}
