//! Loss models with certified Lipschitz / strong-convexity / smoothness
//! constants.
//!
//! Two losses are provided. Regularized multinomial logistic regression is
//! the training workload; its constants come from the closed-form Hessian
//! bound of the data Gram matrix. The quadratic mean-estimation loss
//! `½‖θ − x‖²` exists for the verification oracles: neighboring datasets
//! shift only the constant term of its gradient, so the noisy iterates stay
//! exactly Gaussian and every bound can be checked against a closed form.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{l2_norm, Dataset, L2Ball};

/// Certified constants of a loss over a projection ball: `l` bounds the
/// per-example gradient norm, `lambda` the strong-convexity modulus, `beta`
/// the smoothness modulus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossConstants {
    pub l: f64,
    pub lambda: f64,
    pub beta: f64,
}

impl LossConstants {
    pub fn new(l: f64, lambda: f64, beta: f64) -> Result<Self> {
        if !(l.is_finite() && lambda.is_finite() && beta.is_finite()) {
            return Err(Error::InvalidInput("loss constants must be finite".into()));
        }
        if l <= 0.0 || lambda <= 0.0 || lambda > beta {
            return Err(Error::InvalidInput(format!(
                "loss constants need L > 0 and 0 < lambda <= beta, got L = {l}, lambda = {lambda}, beta = {beta}"
            )));
        }
        Ok(Self { l, lambda, beta })
    }
}

/// A per-example loss with value, gradient, and certified constants.
///
/// `batch_grad` averages per-example gradients in index order; the clipped
/// baseline reuses `example_grad` with the same accumulation so that an
/// inactive clip reproduces the unclipped update bit for bit.
pub trait LossModel {
    /// Parameter dimension for this loss on this dataset.
    fn dim(&self, data: &Dataset) -> usize;

    fn example_value(&self, theta: &[f64], data: &Dataset, i: usize) -> Result<f64>;

    fn example_grad(&self, theta: &[f64], data: &Dataset, i: usize, out: &mut [f64])
        -> Result<()>;

    fn constants(&self, data: &Dataset, ball: &L2Ball) -> Result<LossConstants>;

    /// Mean loss over the rows selected by `idx`.
    fn value(&self, theta: &[f64], data: &Dataset, idx: &[usize]) -> Result<f64> {
        if idx.is_empty() {
            return Err(Error::InvalidInput("empty batch".into()));
        }
        let mut total = 0.0;
        for &i in idx {
            total += self.example_value(theta, data, i)?;
        }
        Ok(total / idx.len() as f64)
    }

    /// Mean loss over the whole dataset.
    fn value_all(&self, theta: &[f64], data: &Dataset) -> Result<f64> {
        let mut total = 0.0;
        for i in 0..data.n() {
            total += self.example_value(theta, data, i)?;
        }
        Ok(total / data.n() as f64)
    }

    /// Mean gradient over the rows selected by `idx`, written into `out`.
    /// `scratch` must have the same length as `out`.
    fn batch_grad(
        &self,
        theta: &[f64],
        data: &Dataset,
        idx: &[usize],
        out: &mut [f64],
        scratch: &mut [f64],
    ) -> Result<()> {
        if idx.is_empty() {
            return Err(Error::InvalidInput("empty batch".into()));
        }
        out.fill(0.0);
        for &i in idx {
            self.example_grad(theta, data, i, scratch)?;
            for (o, s) in out.iter_mut().zip(scratch.iter()) {
                *o += s;
            }
        }
        let inv = 1.0 / idx.len() as f64;
        for o in out.iter_mut() {
            *o *= inv;
        }
        Ok(())
    }
}

/// Multinomial logistic regression with an `lambda_reg · ‖W‖²` ridge term.
///
/// The parameter vector is the C×p weight matrix flattened row by row. The
/// per-example loss is the negative log softmax of the true class plus the
/// ridge term; its gradient adds `2·lambda_reg·W`.
#[derive(Debug, Clone, Copy)]
pub struct LogisticLoss {
    lambda_reg: f64,
}

impl LogisticLoss {
    pub fn new(lambda_reg: f64) -> Result<Self> {
        if !lambda_reg.is_finite() || lambda_reg <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "ridge coefficient must be finite and positive, got {lambda_reg}"
            )));
        }
        Ok(Self { lambda_reg })
    }

    pub fn lambda_reg(&self) -> f64 {
        self.lambda_reg
    }

    /// Certified strong-convexity modulus: the ridge Hessian is
    /// `2·lambda_reg·I` and the cross-entropy Hessian is positive
    /// semidefinite.
    pub fn lambda_cert(&self) -> f64 {
        2.0 * self.lambda_reg
    }

    /// Ball radius `√(2·L_D(0)/λ)` with `L_D(0) = log C`, the loss of the
    /// zero weight matrix. Large enough that the unconstrained ridge optimum
    /// is interior.
    pub fn default_radius(&self, class_count: usize) -> Result<f64> {
        if class_count < 2 {
            return Err(Error::InvalidInput(
                "default radius needs at least 2 classes".into(),
            ));
        }
        Ok((2.0 * (class_count as f64).ln() / self.lambda_cert()).sqrt())
    }

    fn check(&self, theta: &[f64], data: &Dataset) -> Result<(usize, usize)> {
        let c = data.class_count();
        if c < 2 {
            return Err(Error::InvalidInput(
                "logistic loss needs a labeled dataset with at least 2 classes".into(),
            ));
        }
        if theta.len() != c * data.p() {
            return Err(Error::InvalidInput(format!(
                "parameter length {} does not match C*p = {}",
                theta.len(),
                c * data.p()
            )));
        }
        Ok((c, data.p()))
    }

    /// Class scores z = Wx.
    fn scores(&self, theta: &[f64], x: &[f64], c: usize, p: usize, z: &mut Vec<f64>) {
        z.clear();
        for cls in 0..c {
            let row = &theta[cls * p..(cls + 1) * p];
            z.push(row.iter().zip(x).map(|(w, v)| w * v).sum());
        }
    }
}

impl LossModel for LogisticLoss {
    fn dim(&self, data: &Dataset) -> usize {
        data.class_count() * data.p()
    }

    fn example_value(&self, theta: &[f64], data: &Dataset, i: usize) -> Result<f64> {
        let (c, p) = self.check(theta, data)?;
        let mut z = Vec::with_capacity(c);
        self.scores(theta, data.row(i), c, p, &mut z);
        let y = data.label(i);
        let zmax = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = zmax + z.iter().map(|v| (v - zmax).exp()).sum::<f64>().ln();
        let reg = self.lambda_reg * theta.iter().map(|w| w * w).sum::<f64>();
        Ok(lse - z[y] + reg)
    }

    fn example_grad(
        &self,
        theta: &[f64],
        data: &Dataset,
        i: usize,
        out: &mut [f64],
    ) -> Result<()> {
        let (c, p) = self.check(theta, data)?;
        if out.len() != theta.len() {
            return Err(Error::InvalidInput("gradient buffer length mismatch".into()));
        }
        let x = data.row(i);
        let mut z = Vec::with_capacity(c);
        self.scores(theta, x, c, p, &mut z);
        let zmax = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let denom: f64 = z.iter().map(|v| (v - zmax).exp()).sum();
        let y = data.label(i);
        let two_reg = 2.0 * self.lambda_reg;
        for cls in 0..c {
            let mut coeff = (z[cls] - zmax).exp() / denom;
            if cls == y {
                coeff -= 1.0;
            }
            let row = &mut out[cls * p..(cls + 1) * p];
            let w_row = &theta[cls * p..(cls + 1) * p];
            for ((o, &v), &w) in row.iter_mut().zip(x).zip(w_row) {
                *o = coeff * v + two_reg * w;
            }
        }
        Ok(())
    }

    /// Constants over the ball:
    /// `beta = ½·λ_max((1/n)Σ xᵢxᵢᵀ) + λ`, `lambda = 2·lambda_reg`,
    /// `L = √2·B + 2·lambda_reg·R` (softmax-minus-onehot has norm at most √2).
    fn constants(&self, data: &Dataset, ball: &L2Ball) -> Result<LossConstants> {
        let lambda = self.lambda_cert();
        let gram_top = gram_top_eigenvalue(data)?;
        let beta = 0.5 * gram_top + lambda;
        let l = std::f64::consts::SQRT_2 * data.norm_bound() + lambda * ball.radius();
        LossConstants::new(l, lambda, beta)
    }
}

/// Mean-estimation loss `ℓ(θ, x) = ½‖θ − x‖²` with λ = β = 1 and
/// `L = R + B` on a ball of radius R.
#[derive(Debug, Clone, Copy, Default)]
pub struct QuadraticLoss;

impl QuadraticLoss {
    pub fn new() -> Self {
        Self
    }
}

impl LossModel for QuadraticLoss {
    fn dim(&self, data: &Dataset) -> usize {
        data.p()
    }

    fn example_value(&self, theta: &[f64], data: &Dataset, i: usize) -> Result<f64> {
        if theta.len() != data.p() {
            return Err(Error::InvalidInput(format!(
                "parameter length {} does not match p = {}",
                theta.len(),
                data.p()
            )));
        }
        let x = data.row(i);
        Ok(0.5 * theta.iter().zip(x).map(|(t, v)| (t - v) * (t - v)).sum::<f64>())
    }

    fn example_grad(
        &self,
        theta: &[f64],
        data: &Dataset,
        i: usize,
        out: &mut [f64],
    ) -> Result<()> {
        if theta.len() != data.p() || out.len() != data.p() {
            return Err(Error::InvalidInput("dimension mismatch".into()));
        }
        for ((o, t), v) in out.iter_mut().zip(theta).zip(data.row(i)) {
            *o = t - v;
        }
        Ok(())
    }

    fn constants(&self, data: &Dataset, ball: &L2Ball) -> Result<LossConstants> {
        LossConstants::new(ball.radius() + data.norm_bound(), 1.0, 1.0)
    }
}

const POWER_ITER_TOL: f64 = 1e-9;
const POWER_ITER_MAX: usize = 10_000;

/// Largest eigenvalue of the Gram matrix `(1/n) Σ xᵢxᵢᵀ` by power iteration
/// with Rayleigh-quotient estimates. The matrix is never materialized; each
/// iteration applies `v ↦ (1/n)·Xᵀ(Xv)`.
pub fn gram_top_eigenvalue(data: &Dataset) -> Result<f64> {
    let p = data.p();
    let n = data.n() as f64;
    let mut rng = ChaCha12Rng::seed_from_u64(0x9E37_79B9_7F4A_7C15);
    let mut v: Vec<f64> = (0..p).map(|_| StandardNormal.sample(&mut rng)).collect();
    let norm = l2_norm(&v);
    for x in &mut v {
        *x /= norm;
    }
    let mut w = vec![0.0; p];
    let mut prev = f64::INFINITY;
    for _ in 0..POWER_ITER_MAX {
        w.fill(0.0);
        for i in 0..data.n() {
            let row = data.row(i);
            let dot: f64 = row.iter().zip(&v).map(|(a, b)| a * b).sum();
            for (wi, &ri) in w.iter_mut().zip(row) {
                *wi += dot * ri;
            }
        }
        for wi in &mut w {
            *wi /= n;
        }
        // Rayleigh quotient with unit v
        let est: f64 = v.iter().zip(&w).map(|(a, b)| a * b).sum();
        if !est.is_finite() {
            return Err(Error::Numeric("power iteration produced non-finite value".into()));
        }
        let wnorm = l2_norm(&w);
        if wnorm == 0.0 {
            return Ok(0.0);
        }
        if (est - prev).abs() <= POWER_ITER_TOL * est.abs().max(1.0) {
            return Ok(est);
        }
        prev = est;
        for (vi, &wi) in v.iter_mut().zip(&w) {
            *vi = wi / wnorm;
        }
    }
    Err(Error::Numeric(format!(
        "power iteration did not converge within {POWER_ITER_MAX} iterations"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_point_dataset() -> Dataset {
        Dataset::labeled(vec![1.0, 0.0, 0.0, 1.0], vec![0, 1], 2, 2, 1.0).unwrap()
    }

    #[test]
    fn logistic_value_at_zero_is_log_class_count() {
        let data = two_point_dataset();
        let loss = LogisticLoss::new(0.01).unwrap();
        let theta = vec![0.0; 4];
        let v = loss.value_all(&theta, &data).unwrap();
        assert!((v - 2f64.ln()).abs() < 1e-12, "{v}");

        let feats = vec![0.1; 30];
        let labels: Vec<usize> = (0..10).collect();
        let data10 = Dataset::labeled(feats, labels, 3, 10, 1.0).unwrap();
        let v10 = loss.value_all(&vec![0.0; 30], &data10).unwrap();
        assert!((v10 - 10f64.ln()).abs() < 1e-12, "{v10}");
    }

    #[test]
    fn logistic_value_saturates_to_ridge_term() {
        // one sample dominated by the true class: cross-entropy vanishes
        let data = Dataset::labeled(vec![1.0, 0.0, 1.0, 0.0], vec![0, 0], 2, 2, 1.0).unwrap();
        let loss = LogisticLoss::new(0.01).unwrap();
        let theta = vec![40.0, 0.0, -40.0, 0.0];
        let v = loss.example_value(&theta, &data, 0).unwrap();
        let reg = 0.01 * (40.0f64 * 40.0 + 40.0 * 40.0);
        assert!((v - reg).abs() < 1e-12, "v = {v}, reg = {reg}");
    }

    #[test]
    fn logistic_grad_at_zero_matches_hand_expansion() {
        let data = two_point_dataset();
        let loss = LogisticLoss::new(0.5).unwrap();
        let theta = vec![0.0; 4];
        let mut g = vec![0.0; 4];
        loss.example_grad(&theta, &data, 0, &mut g).unwrap();
        // sample x = (1, 0), y = 0: rows (1/2 - 1{i=y})·x, ridge contributes 0
        assert_eq!(g, vec![-0.5, 0.0, 0.5, 0.0]);
    }

    #[test]
    fn logistic_grad_matches_central_differences() {
        let data = two_point_dataset();
        let loss = LogisticLoss::new(0.05).unwrap();
        let theta = vec![0.3, -0.2, 0.1, 0.4];
        let mut g = vec![0.0; 4];
        loss.example_grad(&theta, &data, 1, &mut g).unwrap();
        let h = 1e-5;
        for j in 0..4 {
            let mut tp = theta.clone();
            let mut tm = theta.clone();
            tp[j] += h;
            tm[j] -= h;
            let fd = (loss.example_value(&tp, &data, 1).unwrap()
                - loss.example_value(&tm, &data, 1).unwrap())
                / (2.0 * h);
            assert!((fd - g[j]).abs() <= 1e-8, "coord {j}: fd {fd} vs {}", g[j]);
        }
    }

    #[test]
    fn logistic_constants_from_identity_gram() {
        // rows (1,0) and (0,1): Gram = I/2, top eigenvalue 1/2
        let data = two_point_dataset();
        let loss = LogisticLoss::new(0.01).unwrap();
        let ball = L2Ball::new(2.0).unwrap();
        let c = loss.constants(&data, &ball).unwrap();
        // beta = 0.5 * 0.5 + 2*0.01; the full ridge Hessian is 2*lambda_reg*I
        assert!((c.beta - 0.27).abs() < 1e-9, "{}", c.beta);
        assert!((c.lambda - 0.02).abs() < 1e-15);
    }

    #[test]
    fn logistic_constants_zero_gram() {
        let data = Dataset::labeled(vec![0.0; 4], vec![0, 1], 2, 2, 0.0).unwrap();
        let loss = LogisticLoss::new(0.01).unwrap();
        let ball = L2Ball::new(1.0).unwrap();
        let c = loss.constants(&data, &ball).unwrap();
        assert!((c.beta - loss.lambda_cert()).abs() < 1e-15);
    }

    #[test]
    fn logistic_lipschitz_formula() {
        let data = two_point_dataset();
        let loss = LogisticLoss::new(0.1).unwrap();
        let ball = L2Ball::new(2.0).unwrap();
        let c = loss.constants(&data, &ball).unwrap();
        // L = sqrt(2)*B + 2*lambda_reg*R = sqrt(2) + 0.4
        assert!((c.l - (std::f64::consts::SQRT_2 + 0.4)).abs() < 1e-12);
        assert!((c.l - 1.81421).abs() < 1e-5);
    }

    #[test]
    fn quadratic_grad_and_value() {
        let data = Dataset::unlabeled(vec![0.0, 1.0], 1, 1.0).unwrap();
        let loss = QuadraticLoss::new();
        let mean = data.mean_row();
        let mut g = vec![0.0; 1];
        let mut scratch = vec![0.0; 1];
        loss.batch_grad(&mean, &data, &[0, 1], &mut g, &mut scratch)
            .unwrap();
        assert_eq!(g, vec![0.0]);

        loss.batch_grad(&[0.0], &data, &[0, 1], &mut g, &mut scratch)
            .unwrap();
        assert_eq!(g, vec![-0.5]);

        // value at the batch mean is half the within-batch variance
        let v = loss.value(&mean, &data, &[0, 1]).unwrap();
        let var = 0.5 * ((0.0f64 - 0.5).powi(2) + (1.0f64 - 0.5).powi(2));
        assert!((v - 0.5 * var).abs() < 1e-15);
    }

    #[test]
    fn quadratic_constants() {
        let data = Dataset::unlabeled(vec![0.0, 1.0], 1, 1.0).unwrap();
        let c = QuadraticLoss::new()
            .constants(&data, &L2Ball::new(2.0).unwrap())
            .unwrap();
        assert_eq!((c.l, c.lambda, c.beta), (3.0, 1.0, 1.0));

        let zeros = Dataset::unlabeled(vec![0.0, 0.0], 1, 0.0).unwrap();
        let c0 = QuadraticLoss::new()
            .constants(&zeros, &L2Ball::new(2.0).unwrap())
            .unwrap();
        assert_eq!(c0.l, 2.0);
    }

    #[test]
    fn quadratic_dimension_mismatch_is_rejected() {
        let data = Dataset::unlabeled(vec![0.0, 1.0], 1, 1.0).unwrap();
        let loss = QuadraticLoss::new();
        assert!(loss.example_value(&[0.0, 0.0], &data, 0).is_err());
    }

    #[test]
    fn gram_eigenvalue_of_rank_one_data() {
        // all rows equal x: Gram = x xᵀ, top eigenvalue ‖x‖²
        let data = Dataset::unlabeled(vec![0.6, 0.8, 0.6, 0.8], 2, 1.0).unwrap();
        let top = gram_top_eigenvalue(&data).unwrap();
        assert!((top - 1.0).abs() < 1e-9, "{top}");
    }

    #[test]
    fn logistic_rejects_unlabeled_data() {
        let data = Dataset::unlabeled(vec![0.0, 1.0], 1, 1.0).unwrap();
        let loss = LogisticLoss::new(0.1).unwrap();
        assert!(loss.example_value(&[0.0], &data, 0).is_err());
    }
}
