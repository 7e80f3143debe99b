//! Shared domain types: datasets, projection balls, step schedules, seeds.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative slack allowed when re-checking row norms that a loader already
/// rescaled to the bound.
const NORM_CHECK_SLACK: f64 = 1e-9;

/// A dense feature matrix with optional integer class labels and a certified
/// per-row L2 norm bound.
///
/// Rows are stored contiguously (row-major). The norm bound is an invariant,
/// not a request: construction fails if any row exceeds it. Rescaling rows to
/// meet the bound is the loader's job.
#[derive(Debug, Clone)]
pub struct Dataset {
    features: Vec<f64>,
    labels: Vec<usize>,
    n: usize,
    p: usize,
    class_count: usize,
    norm_bound: f64,
}

impl Dataset {
    /// Builds a labeled classification dataset. Labels must lie in
    /// `[0, class_count)` and `class_count >= 2`.
    pub fn labeled(
        features: Vec<f64>,
        labels: Vec<usize>,
        p: usize,
        class_count: usize,
        norm_bound: f64,
    ) -> Result<Self> {
        if class_count < 2 {
            return Err(Error::InvalidInput(format!(
                "classification needs at least 2 classes, got {class_count}"
            )));
        }
        let ds = Self::build(features, labels, p, class_count, norm_bound)?;
        if ds.labels.len() != ds.n {
            return Err(Error::InvalidInput(format!(
                "label count {} does not match row count {}",
                ds.labels.len(),
                ds.n
            )));
        }
        if let Some(&bad) = ds.labels.iter().find(|&&y| y >= class_count) {
            return Err(Error::InvalidInput(format!(
                "label {bad} out of range for {class_count} classes"
            )));
        }
        Ok(ds)
    }

    /// Builds an unlabeled dataset (used by the quadratic mean-estimation
    /// loss, which ignores classes).
    pub fn unlabeled(features: Vec<f64>, p: usize, norm_bound: f64) -> Result<Self> {
        Self::build(features, Vec::new(), p, 0, norm_bound)
    }

    fn build(
        features: Vec<f64>,
        labels: Vec<usize>,
        p: usize,
        class_count: usize,
        norm_bound: f64,
    ) -> Result<Self> {
        if p == 0 {
            return Err(Error::InvalidInput("feature dimension must be >= 1".into()));
        }
        if !features.len().is_multiple_of(p) {
            return Err(Error::InvalidInput(format!(
                "feature buffer length {} is not a multiple of p = {p}",
                features.len()
            )));
        }
        let n = features.len() / p;
        if n < 2 {
            return Err(Error::InvalidInput(format!(
                "dataset needs at least 2 rows, got {n}"
            )));
        }
        if !norm_bound.is_finite() || norm_bound < 0.0 {
            return Err(Error::InvalidInput(format!(
                "norm bound must be finite and nonnegative, got {norm_bound}"
            )));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite feature value".into()));
        }
        let ds = Self {
            features,
            labels,
            n,
            p,
            class_count,
            norm_bound,
        };
        let limit = norm_bound * (1.0 + NORM_CHECK_SLACK);
        for i in 0..n {
            let norm = l2_norm(ds.row(i));
            if norm > limit {
                return Err(Error::InvalidInput(format!(
                    "row {i} has norm {norm} exceeding the certified bound {norm_bound}"
                )));
            }
        }
        Ok(ds)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// Number of classes; 0 for unlabeled data.
    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn norm_bound(&self) -> f64 {
        self.norm_bound
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.p..(i + 1) * self.p]
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// Per-coordinate mean of all rows.
    pub fn mean_row(&self) -> Vec<f64> {
        let mut mean = vec![0.0; self.p];
        for i in 0..self.n {
            for (m, v) in mean.iter_mut().zip(self.row(i)) {
                *m += v;
            }
        }
        let inv = 1.0 / self.n as f64;
        for m in &mut mean {
            *m *= inv;
        }
        mean
    }
}

/// Closed L2 ball of radius `R` centered at the origin; the convex set the
/// iterates are projected onto.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct L2Ball {
    radius: f64,
}

impl L2Ball {
    pub fn new(radius: f64) -> Result<Self> {
        if !radius.is_finite() || radius <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "ball radius must be finite and positive, got {radius}"
            )));
        }
        Ok(Self { radius })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Orthogonal projection onto the ball: identity inside, radial rescale
    /// outside.
    pub fn project(&self, point: &[f64]) -> Result<Vec<f64>> {
        let mut out = point.to_vec();
        self.project_in_place(&mut out)?;
        Ok(out)
    }

    /// In-place variant used by the training loop.
    pub fn project_in_place(&self, point: &mut [f64]) -> Result<()> {
        let norm = l2_norm(point);
        if !norm.is_finite() {
            return Err(Error::InvalidInput(
                "cannot project a non-finite point".into(),
            ));
        }
        if norm > self.radius {
            let scale = self.radius / norm;
            for v in point.iter_mut() {
                *v *= scale;
            }
        }
        Ok(())
    }

    pub fn contains(&self, point: &[f64]) -> bool {
        l2_norm(point) <= self.radius * (1.0 + NORM_CHECK_SLACK)
    }
}

/// Step-size schedule η_k, k = 0, 1, 2, …
///
/// The decreasing kind produces η_k = 1/(2β + λk/2); η_0 = 1/(2β) is the
/// largest step it ever takes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum StepSchedule {
    Constant(f64),
    Decreasing { beta: f64, lambda: f64 },
    Explicit(Vec<f64>),
}

impl StepSchedule {
    pub fn constant(eta: f64) -> Result<Self> {
        if !eta.is_finite() || eta <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "constant step size must be finite and positive, got {eta}"
            )));
        }
        Ok(Self::Constant(eta))
    }

    pub fn decreasing(beta: f64, lambda: f64) -> Result<Self> {
        if !beta.is_finite() || beta <= 0.0 || !lambda.is_finite() || lambda <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "decreasing schedule needs beta > 0 and lambda > 0, got beta = {beta}, lambda = {lambda}"
            )));
        }
        Ok(Self::Decreasing { beta, lambda })
    }

    pub fn explicit(etas: Vec<f64>) -> Result<Self> {
        if etas.is_empty() {
            return Err(Error::InvalidInput("explicit schedule is empty".into()));
        }
        if let Some(&bad) = etas.iter().find(|e| !e.is_finite() || **e <= 0.0) {
            return Err(Error::InvalidInput(format!(
                "explicit schedule contains a non-positive step size {bad}"
            )));
        }
        Ok(Self::Explicit(etas))
    }

    /// η_k for the update producing θ_{k+1}; k starts at 0.
    pub fn eta(&self, k: usize) -> Result<f64> {
        match self {
            Self::Constant(eta) => Ok(*eta),
            Self::Decreasing { beta, lambda } => Ok(1.0 / (2.0 * beta + 0.5 * lambda * k as f64)),
            Self::Explicit(etas) => etas
                .get(k)
                .copied()
                .ok_or(Error::ScheduleExhausted {
                    index: k,
                    len: etas.len(),
                }),
        }
    }

    /// Sum of the first `k_count` step sizes, Σ_{k=0}^{K-1} η_k (0 when K = 0).
    ///
    /// Computed by direct summation, except for the constant kind where the
    /// product is the exact sum.
    pub fn sum(&self, k_count: usize) -> Result<f64> {
        match self {
            Self::Constant(eta) => Ok(eta * k_count as f64),
            _ => {
                let mut total = 0.0;
                for k in 0..k_count {
                    total += self.eta(k)?;
                }
                Ok(total)
            }
        }
    }

    /// Largest step size the schedule ever produces over the first `k_count`
    /// iterations; used for the η caps of the privacy and utility theorems.
    pub fn max_eta(&self, k_count: usize) -> Result<f64> {
        match self {
            Self::Constant(eta) => Ok(*eta),
            // strictly decreasing in k
            Self::Decreasing { .. } => self.eta(0),
            Self::Explicit(etas) => {
                if k_count > etas.len() {
                    return Err(Error::ScheduleExhausted {
                        index: k_count - 1,
                        len: etas.len(),
                    });
                }
                Ok(etas[..k_count]
                    .iter()
                    .copied()
                    .fold(f64::NEG_INFINITY, f64::max))
            }
        }
    }
}

/// Seed for one training run. Same seed + same config gives a bit-identical
/// trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RunSeed(pub u64);

impl RunSeed {
    /// Seed for the `index`-th run of a Monte-Carlo sweep rooted at `self`.
    pub fn offset(&self, index: u64) -> RunSeed {
        RunSeed(self.0.wrapping_add(index))
    }
}

pub fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn l2_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn project_keeps_interior_and_boundary_points() {
        let p = [3.0, 4.0];
        let big = L2Ball::new(10.0).unwrap();
        assert_eq!(big.project(&p).unwrap(), vec![3.0, 4.0]);
        let exact = L2Ball::new(5.0).unwrap();
        assert_eq!(exact.project(&p).unwrap(), vec![3.0, 4.0]);
    }

    #[test]
    fn project_rescales_exterior_point() {
        let ball = L2Ball::new(1.0).unwrap();
        let out = ball.project(&[3.0, 4.0]).unwrap();
        assert!((out[0] - 0.6).abs() < 1e-15);
        assert!((out[1] - 0.8).abs() < 1e-15);
        assert!((l2_norm(&out) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn project_rejects_non_finite_input() {
        let ball = L2Ball::new(1.0).unwrap();
        assert!(ball.project(&[f64::NAN, 0.0]).is_err());
        assert!(ball.project(&[f64::INFINITY, 0.0]).is_err());
    }

    #[test]
    fn ball_requires_positive_finite_radius() {
        assert!(L2Ball::new(0.0).is_err());
        assert!(L2Ball::new(-1.0).is_err());
        assert!(L2Ball::new(f64::INFINITY).is_err());
    }

    #[test]
    fn decreasing_schedule_matches_formula() {
        let s = StepSchedule::decreasing(1.0, 1.0).unwrap();
        assert!((s.eta(0).unwrap() - 0.5).abs() < 1e-15);
        assert!((s.eta(2).unwrap() - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn constant_schedule_is_constant() {
        let s = StepSchedule::constant(0.01).unwrap();
        assert_eq!(s.eta(99).unwrap(), 0.01);
    }

    #[test]
    fn explicit_schedule_errors_when_exhausted() {
        let s = StepSchedule::explicit(vec![0.1, 0.2]).unwrap();
        assert_eq!(s.eta(1).unwrap(), 0.2);
        assert!(matches!(
            s.eta(2),
            Err(Error::ScheduleExhausted { index: 2, len: 2 })
        ));
    }

    #[test]
    fn schedule_sum_basics() {
        let c = StepSchedule::constant(0.1).unwrap();
        assert!((c.sum(10).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(c.sum(0).unwrap(), 0.0);
        let d = StepSchedule::decreasing(1.0, 1.0).unwrap();
        assert_eq!(d.sum(0).unwrap(), 0.0);
        // first two steps: 1/2 + 1/(2 + 1/2)
        assert!((d.sum(2).unwrap() - 0.9).abs() < 1e-15);
    }

    #[test]
    fn dataset_checks_row_norms() {
        let err = Dataset::unlabeled(vec![3.0, 4.0, 0.0, 0.0], 2, 1.0);
        assert!(err.is_err());
        let ok = Dataset::unlabeled(vec![0.3, 0.4, 0.0, 0.0], 2, 1.0).unwrap();
        assert_eq!(ok.n(), 2);
        assert_eq!(ok.p(), 2);
    }

    #[test]
    fn dataset_checks_labels() {
        let feats = vec![0.1, 0.2, 0.3, 0.4];
        assert!(Dataset::labeled(feats.clone(), vec![0, 2], 2, 2, 1.0).is_err());
        assert!(Dataset::labeled(feats.clone(), vec![0], 2, 2, 1.0).is_err());
        assert!(Dataset::labeled(feats.clone(), vec![0, 1], 2, 1, 1.0).is_err());
        assert!(Dataset::labeled(feats, vec![0, 1], 2, 2, 1.0).is_ok());
    }

    #[test]
    fn dataset_requires_two_rows() {
        assert!(Dataset::unlabeled(vec![0.1, 0.2], 2, 1.0).is_err());
    }

    #[test]
    fn mean_row_averages() {
        let ds = Dataset::unlabeled(vec![1.0, 0.0, 0.0, 1.0], 2, 1.0).unwrap();
        assert_eq!(ds.mean_row(), vec![0.5, 0.5]);
    }
}
