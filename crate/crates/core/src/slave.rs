//! A single LinUCB learner ("slave model").
//!
//! The model keeps the ridge-regression state `A = λI + Σ x xᵀ`, its inverse,
//! `b = Σ x r` and `θ̂ = A⁻¹ b`. Arms are scored by `xᵀθ̂ + B(x)` where
//!
//! ```text
//! B(x) = α ‖x‖_{A⁻¹},   α = σ² sqrt(d ln(1 + n / (λ δ₁))) + sqrt(λ)
//! ```
//!
//! and `n` is the number of observations absorbed by this model. The same
//! bound plus a noise allowance `ε` decides whether a new observation counts as
//! a prediction error.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erf_inv;

use crate::arm::{Arm, ArmId};
use crate::error::{invalid, Error, Result};
use crate::linalg::{
    mahalanobis_norm, rank_one_inverse_update_in_place, solve_estimate, SquareMatrix, Vector,
};
use crate::master::BadnessWindow;

/// Re-symmetrize `A⁻¹` after this many absorbed observations.
const SYMMETRIZE_EVERY: u64 = 1000;

/// Default sliding-window capacity for a standalone model.
pub const DEFAULT_WINDOW: usize = 200;

/// High-probability bound `ε` on `|η|` for `η ~ N(0, σ²)`: `P(|η| ≤ ε) = 1 − δ₁`.
pub fn noise_threshold(sigma: f64, delta1: f64) -> Result<f64> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(invalid(format!("sigma must be >= 0, got {sigma}")));
    }
    if !(delta1 > 0.0 && delta1 < 1.0) {
        return Err(invalid(format!("delta1 must lie in (0, 1), got {delta1}")));
    }
    Ok(std::f64::consts::SQRT_2 * sigma * erf_inv(1.0 - delta1))
}

/// Reward-noise scale known to the learner and the derived error allowance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    sigma: f64,
    delta1: f64,
    epsilon: f64,
}

impl NoiseSpec {
    pub fn new(sigma: f64, delta1: f64) -> Result<Self> {
        let epsilon = noise_threshold(sigma, delta1)?;
        Ok(Self {
            sigma,
            delta1,
            epsilon,
        })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn delta1(&self) -> f64 {
        self.delta1
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlaveModel {
    id: u64,
    dim: usize,
    lambda: f64,
    a: SquareMatrix,
    a_inv: SquareMatrix,
    b: Vector,
    theta_hat: Vector,
    obs_count: u64,
    created_at: u64,
    pub(crate) badness: BadnessWindow,
}

impl SlaveModel {
    /// Fresh model: `A = λI`, `b = 0`, `θ̂ = 0`, created at round `t`.
    pub fn new(dim: usize, lambda: f64, t: u64) -> Result<Self> {
        let a = SquareMatrix::identity_scaled(dim, lambda)?;
        let a_inv = SquareMatrix::identity_scaled(dim, 1.0 / lambda)?;
        Ok(Self {
            id: 0,
            dim,
            lambda,
            a,
            a_inv,
            b: Vector::zeros(dim),
            theta_hat: Vector::zeros(dim),
            obs_count: 0,
            created_at: t,
            badness: BadnessWindow::new(DEFAULT_WINDOW, t)?,
        })
    }

    pub(crate) fn with_id(mut self, id: u64) -> Self {
        self.id = id;
        self
    }

    pub(crate) fn with_window(mut self, capacity: usize) -> Result<Self> {
        self.badness = BadnessWindow::new(capacity, self.created_at)?;
        Ok(self)
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn design_matrix(&self) -> &SquareMatrix {
        &self.a
    }

    pub fn inverse(&self) -> &SquareMatrix {
        &self.a_inv
    }

    pub fn reward_vector(&self) -> &Vector {
        &self.b
    }

    pub fn theta_hat(&self) -> &Vector {
        &self.theta_hat
    }

    pub fn obs_count(&self) -> u64 {
        self.obs_count
    }

    pub fn created_at(&self) -> u64 {
        self.created_at
    }

    pub fn badness(&self) -> &BadnessWindow {
        &self.badness
    }

    pub fn predict(&self, x: &Vector) -> Result<f64> {
        self.theta_hat.dot(x)
    }

    /// Exploration coefficient `α` for the current observation count.
    pub fn alpha(&self, noise: &NoiseSpec) -> f64 {
        let n = self.obs_count as f64;
        let log_term = (1.0 + n / (self.lambda * noise.delta1())).ln();
        noise.sigma().powi(2) * (self.dim as f64 * log_term).sqrt() + self.lambda.sqrt()
    }

    pub fn confidence_bound(&self, x: &Vector, noise: &NoiseSpec) -> Result<f64> {
        Ok(self.alpha(noise) * mahalanobis_norm(&self.a_inv, x)?)
    }

    pub fn ucb_score(&self, x: &Vector, noise: &NoiseSpec) -> Result<f64> {
        Ok(self.predict(x)? + self.confidence_bound(x, noise)?)
    }

    /// UCB arm choice; ties go to the lowest arm id.
    pub fn select_arm(&self, pool: &[Arm], noise: &NoiseSpec) -> Result<ArmId> {
        let mut best: Option<(ArmId, f64)> = None;
        for arm in pool {
            let score = self.ucb_score(&arm.features, noise)?;
            best = match best {
                Some((id, s)) if s > score || (s == score && id < arm.id) => Some((id, s)),
                _ => Some((arm.id, score)),
            };
        }
        best.map(|(id, _)| id).ok_or(Error::EmptyPool)
    }

    /// `true` when `|x ᵀθ̂ − r| > B(x) + ε`, evaluated on the current state.
    pub fn error_indicator(&self, x: &Vector, r: f64, noise: &NoiseSpec) -> Result<bool> {
        let residual = (self.predict(x)? - r).abs();
        Ok(residual > self.confidence_bound(x, noise)? + noise.epsilon())
    }

    /// Add the observation `(x, r)` to the ridge state.
    pub fn absorb(&mut self, x: &Vector, r: f64) -> Result<()> {
        x.check_dim(self.dim)?;
        if !r.is_finite() {
            return Err(Error::NonFinite("reward"));
        }
        rank_one_inverse_update_in_place(&mut self.a_inv, x)?;
        self.a.add_outer(x)?;
        self.b.add_scaled(r, x)?;
        self.obs_count += 1;
        if self.obs_count.is_multiple_of(SYMMETRIZE_EVERY) {
            self.a_inv.symmetrize();
        }
        self.theta_hat = solve_estimate(&self.a_inv, &self.b)?;
        Ok(())
    }

    /// Largest entry-wise gap between the incremental `A⁻¹` and a fresh
    /// inversion of `A`.
    pub fn inverse_drift(&self) -> Result<f64> {
        Ok(self.a.spd_inverse()?.max_abs_diff(&self.a_inv))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&SlaveSnapshot::from(self))?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str::<SlaveSnapshot>(s)?.try_into()
    }
}

/// Checkpoint document for a [`SlaveModel`].
#[derive(Debug, Serialize, Deserialize)]
struct SlaveSnapshot {
    id: u64,
    dim: usize,
    lambda: f64,
    #[serde(rename = "A_inv")]
    a_inv: Vec<f64>,
    #[serde(rename = "A")]
    a: Vec<f64>,
    b: Vec<f64>,
    obs_count: u64,
    created_at: u64,
    badness: BadnessWindow,
}

impl From<&SlaveModel> for SlaveSnapshot {
    fn from(m: &SlaveModel) -> Self {
        Self {
            id: m.id,
            dim: m.dim,
            lambda: m.lambda,
            a_inv: m.a_inv.row_major().to_vec(),
            a: m.a.row_major().to_vec(),
            b: m.b.as_slice().to_vec(),
            obs_count: m.obs_count,
            created_at: m.created_at,
            badness: m.badness.clone(),
        }
    }
}

impl TryFrom<SlaveSnapshot> for SlaveModel {
    type Error = Error;

    fn try_from(s: SlaveSnapshot) -> Result<Self> {
        if s.dim == 0 || !(s.lambda > 0.0) {
            return Err(invalid("snapshot has invalid dim or lambda"));
        }
        let a_inv = SquareMatrix::from_row_major(s.dim, s.a_inv)?;
        let a = SquareMatrix::from_row_major(s.dim, s.a)?;
        let b = Vector::new(s.b)?;
        b.check_dim(s.dim)?;
        let theta_hat = solve_estimate(&a_inv, &b)?;
        Ok(Self {
            id: s.id,
            dim: s.dim,
            lambda: s.lambda,
            a,
            a_inv,
            b,
            theta_hat,
            obs_count: s.obs_count,
            created_at: s.created_at,
            badness: s.badness,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(xs: &[f64]) -> Vector {
        Vector::new(xs.to_vec()).unwrap()
    }

    fn arm(id: ArmId, xs: &[f64]) -> Arm {
        Arm::new(id, v(xs))
    }

    fn noise() -> NoiseSpec {
        NoiseSpec::new(0.05, 0.1).unwrap()
    }

    #[test]
    fn new_slave_state() {
        let m = SlaveModel::new(2, 0.1, 0).unwrap();
        assert!(
            m.inverse()
                .max_abs_diff(&SquareMatrix::identity_scaled(2, 10.0).unwrap())
                < 1e-12
        );
        assert_eq!(m.theta_hat(), &Vector::zeros(2));
        assert_eq!(m.predict(&v(&[0.3, -2.0])).unwrap(), 0.0);
        let m = SlaveModel::new(1, 1.0, 5).unwrap();
        assert_eq!((m.created_at(), m.obs_count()), (5, 0));
        assert!(SlaveModel::new(0, 1.0, 0).is_err());
        assert!(SlaveModel::new(2, 0.0, 0).is_err());
    }

    #[test]
    fn predict_inner_products() {
        let mut m = SlaveModel::new(2, 1.0, 0).unwrap();
        m.theta_hat = v(&[0.5, 0.0]);
        assert_eq!(m.predict(&v(&[1.0, 0.0])).unwrap(), 0.5);
        m.theta_hat = v(&[0.3, 0.4]);
        assert!((m.predict(&v(&[0.6, 0.8])).unwrap() - 0.50).abs() < 1e-15);
        assert!(m.predict(&v(&[1.0])).is_err());
    }

    #[test]
    fn confidence_bound_fresh_is_norm() {
        let m = SlaveModel::new(2, 0.1, 0).unwrap();
        let b = m.confidence_bound(&v(&[0.6, 0.8]), &noise()).unwrap();
        assert!((b - 1.0).abs() < 1e-12);
        assert_eq!(
            m.confidence_bound(&Vector::zeros(2), &noise()).unwrap(),
            0.0
        );
    }

    #[test]
    fn confidence_bound_with_observations() {
        let mut m = SlaveModel::new(2, 0.1, 0).unwrap();
        // pretend 10 observations were absorbed without touching A⁻¹
        m.obs_count = 10;
        let got = m.confidence_bound(&v(&[1.0, 0.0]), &noise()).unwrap();
        // independent scalar evaluation: 0.05² · sqrt(2 · ln(1 + 10/(0.1·0.1))) + sqrt(0.1)
        let alpha = 0.0025 * (2.0 * 1001f64.ln()).sqrt() + 0.1f64.sqrt();
        assert!((got - alpha * 10f64.sqrt()).abs() < 1e-12);
        assert!((alpha - 0.325_520_74).abs() < 1e-8);
    }

    #[test]
    fn noise_threshold_values() {
        assert_eq!(noise_threshold(0.0, 0.1).unwrap(), 0.0);
        let eps = noise_threshold(0.05, 0.1).unwrap();
        assert!((eps - 0.082_242_68).abs() < 1e-7, "{eps}");
        assert!(noise_threshold(0.05, 1.0 - 1e-12).unwrap() < 1e-9);
        assert!(noise_threshold(0.05, 0.0).is_err());
        assert!(noise_threshold(0.05, 1.0).is_err());
        assert!(noise_threshold(-0.1, 0.5).is_err());
    }

    #[test]
    fn select_arm_tie_breaks_and_singletons() {
        let m = SlaveModel::new(2, 0.1, 0).unwrap();
        let pool = vec![
            arm(4, &[0.0, 1.0]),
            arm(2, &[1.0, 0.0]),
            arm(9, &[0.6, 0.8]),
        ];
        assert_eq!(m.select_arm(&pool, &noise()).unwrap(), 2);
        assert_eq!(m.select_arm(&pool[..1], &noise()).unwrap(), 4);
        assert!(matches!(m.select_arm(&[], &noise()), Err(Error::EmptyPool)));
    }

    #[test]
    fn error_indicator_cases() {
        let n = noise();
        let fresh = SlaveModel::new(2, 0.1, 0).unwrap();
        let x = v(&[0.6, 0.8]);
        assert!(!fresh.error_indicator(&x, 1.0, &n).unwrap());
        assert!(!fresh.error_indicator(&x, -1.0, &n).unwrap());

        let mut m = SlaveModel::new(2, 0.1, 0).unwrap();
        for i in 0..30 {
            let xi = if i % 2 == 0 {
                v(&[1.0, 0.0])
            } else {
                v(&[0.0, 1.0])
            };
            m.absorb(&xi, 0.4).unwrap();
        }
        let pred = m.predict(&x).unwrap();
        assert!(!m.error_indicator(&x, pred, &n).unwrap());
        let thr = m.confidence_bound(&x, &n).unwrap() + n.epsilon();
        assert!(m.error_indicator(&x, pred + thr + 0.01, &n).unwrap());
        assert!(!m.error_indicator(&x, pred + thr - 0.01, &n).unwrap());
    }

    #[test]
    fn absorb_diagonal_case() {
        let mut m = SlaveModel::new(2, 1.0, 0).unwrap();
        m.absorb(&v(&[1.0, 0.0]), 1.0).unwrap();
        assert_eq!(m.design_matrix().row_major(), &[2.0, 0.0, 0.0, 1.0]);
        assert_eq!(m.theta_hat(), &v(&[0.5, 0.0]));
        let before = m.theta_hat().clone();
        m.absorb(&Vector::zeros(2), 123.0).unwrap();
        assert_eq!(m.theta_hat(), &before);
        assert_eq!(m.obs_count(), 2);
        assert!(m.absorb(&v(&[1.0, 0.0]), f64::NAN).is_err());
        assert!(m.absorb(&v(&[1.0]), 1.0).is_err());
    }

    #[test]
    fn json_roundtrip_is_exact() {
        let mut m = SlaveModel::new(3, 0.1, 7).unwrap().with_id(4);
        m.absorb(&v(&[0.1, 0.2, 0.3]), 0.123_456_789_012_345_6)
            .unwrap();
        m.absorb(&v(&[1.0 / 3.0, 0.0, 2.0 / 7.0]), -0.5).unwrap();
        m.badness.push(true);
        let back = SlaveModel::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(back, m);
    }
}
