//! Piecewise-stationary linear reward simulator.
//!
//! Rewards follow `r = xᵀθ* + η`, `η ~ N(0, σ²)`. Every `S` rounds the
//! ground-truth parameter is redrawn by rejection sampling until at least
//! `⌈ρK⌉` arms move their expected reward by more than `Δ`.
//!
//! Randomness is split into independent ChaCha streams (arms, candidates,
//! noise, changes) derived from one seed, so agents never perturb the
//! environment trajectory.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::arm::{Arm, ArmId};
use crate::error::{invalid, Error, Result};
use crate::linalg::Vector;

/// Candidate parameters tried per change before giving up.
pub const REJECTION_BUDGET: usize = 10_000;

const STREAM_ARMS: u64 = 0;
const STREAM_CANDIDATES: u64 = 1;
const STREAM_NOISE: u64 = 2;
const STREAM_CHANGES: u64 = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnvConfig {
    #[serde(rename = "K")]
    pub num_arms: usize,
    pub d: usize,
    pub pool_per_round: usize,
    pub sigma: f64,
    #[serde(rename = "S")]
    pub period: u64,
    pub delta: f64,
    pub rho: f64,
    pub horizon: u64,
    pub seed: u64,
    /// Optional per-change magnitudes; change `j` uses entry `j` when present.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta_overrides: Option<Vec<f64>>,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            num_arms: 1000,
            d: 10,
            pool_per_round: 10,
            sigma: 0.05,
            period: 800,
            delta: 0.9,
            rho: 1.0,
            horizon: 5000,
            seed: 0,
            delta_overrides: None,
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_arms == 0 || self.d == 0 {
            return Err(invalid("K and d must be >= 1"));
        }
        if self.pool_per_round == 0 || self.pool_per_round > self.num_arms {
            return Err(invalid(format!(
                "pool_per_round must lie in [1, K={}], got {}",
                self.num_arms, self.pool_per_round
            )));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(invalid(format!("sigma must be >= 0, got {}", self.sigma)));
        }
        if self.period == 0 {
            return Err(invalid("S must be >= 1"));
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(invalid(format!("delta must be > 0, got {}", self.delta)));
        }
        if !(0.0..=1.0).contains(&self.rho) {
            return Err(invalid(format!("rho must lie in [0, 1], got {}", self.rho)));
        }
        if let Some(ds) = &self.delta_overrides {
            if ds.iter().any(|d| !(*d > 0.0 && d.is_finite())) {
                return Err(invalid("delta_overrides entries must be > 0"));
            }
        }
        Ok(())
    }

    /// Rounds at which θ* is redrawn: positive multiples of `S` below the horizon.
    pub fn change_rounds(&self) -> Vec<u64> {
        if self.rho <= 0.0 || self.horizon == 0 {
            return Vec::new();
        }
        (1..)
            .map(|j| j * self.period)
            .take_while(|&t| t < self.horizon)
            .collect()
    }

    fn delta_for_change(&self, j: usize) -> f64 {
        self.delta_overrides
            .as_ref()
            .and_then(|ds| ds.get(j).copied())
            .unwrap_or(self.delta)
    }

    /// Short stable fingerprint of the configuration (including the seed).
    pub fn fingerprint(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex_prefix(&Sha256::digest(&json), 16)
    }
}

pub(crate) fn hex_prefix(bytes: &[u8], n: usize) -> String {
    bytes
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect::<String>()
        .chars()
        .take(n)
        .collect()
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

fn draw_unit_box<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vec<f64> {
    let mut v: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let scale = norm.max(1.0);
    v.iter_mut().for_each(|x| *x /= scale);
    v
}

/// `K` arm feature vectors with entries `U(0,1)`, rescaled so `‖x‖₂ ≤ 1`.
pub fn gen_arms<R: Rng + ?Sized>(k: usize, d: usize, rng: &mut R) -> Result<Vec<Vector>> {
    if k == 0 || d == 0 {
        return Err(invalid("K and d must be >= 1"));
    }
    (0..k).map(|_| Vector::new(draw_unit_box(d, rng))).collect()
}

/// A ground-truth parameter: magnitudes `U(0,1)` rescaled to `‖θ‖₂ ≤ 1`,
/// with a uniformly random global sign.
pub fn draw_theta<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vector {
    let mut v = Vector::new(draw_unit_box(d, rng)).expect("finite draws");
    if rng.random_bool(0.5) {
        v.scale(-1.0);
    }
    v
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaChange {
    pub round: u64,
    pub theta: Vector,
}

/// Exported ground truth of one environment run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvTrajectory {
    pub seed: u64,
    pub config_hash: String,
    pub config: EnvConfig,
    pub theta_history: Vec<ThetaChange>,
    pub change_rounds: Vec<u64>,
}

impl EnvTrajectory {
    /// Parameter in force at round `t`.
    pub fn theta_at(&self, t: u64) -> Option<&Vector> {
        self.theta_history
            .iter()
            .take_while(|c| c.round <= t)
            .last()
            .map(|c| &c.theta)
    }

    /// Index of the stationary segment containing round `t`.
    pub fn regime_at(&self, t: u64) -> usize {
        self.theta_history
            .iter()
            .take_while(|c| c.round <= t)
            .count()
            .saturating_sub(1)
    }
}

#[derive(Debug, Clone)]
pub struct Environment {
    config: EnvConfig,
    arms: Vec<Arm>,
    theta_star: Vector,
    theta_history: Vec<ThetaChange>,
    round: u64,
    changes: usize,
    candidate_rng: ChaCha8Rng,
    noise_rng: ChaCha8Rng,
    change_rng: ChaCha8Rng,
}

impl Environment {
    pub fn new(config: EnvConfig) -> Result<Self> {
        config.validate()?;
        let mut arm_rng = stream(config.seed, STREAM_ARMS);
        let arms = gen_arms(config.num_arms, config.d, &mut arm_rng)?
            .into_iter()
            .enumerate()
            .map(|(id, x)| Arm::new(id, x))
            .collect();
        let mut change_rng = stream(config.seed, STREAM_CHANGES);
        let theta_star = draw_theta(config.d, &mut change_rng);
        Ok(Self {
            candidate_rng: stream(config.seed, STREAM_CANDIDATES),
            noise_rng: stream(config.seed, STREAM_NOISE),
            change_rng,
            theta_history: vec![ThetaChange {
                round: 0,
                theta: theta_star.clone(),
            }],
            theta_star,
            arms,
            config,
            round: 0,
            changes: 0,
        })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn arms(&self) -> &[Arm] {
        &self.arms
    }

    pub fn theta_star(&self) -> &Vector {
        &self.theta_star
    }

    pub fn theta_history(&self) -> &[ThetaChange] {
        &self.theta_history
    }

    pub fn round(&self) -> u64 {
        self.round
    }

    /// Test hook: install an arbitrary ground truth (still recorded in the history).
    pub fn set_theta(&mut self, theta: Vector) -> Result<()> {
        theta.check_dim(self.config.d)?;
        self.theta_history.push(ThetaChange {
            round: self.round,
            theta: theta.clone(),
        });
        self.theta_star = theta;
        Ok(())
    }

    /// `n` distinct arms drawn uniformly without replacement from the pool.
    pub fn sample_candidates(&mut self, n: usize) -> Result<Vec<Arm>> {
        sample_candidates_from(&self.arms, n, &mut self.candidate_rng)
    }

    pub fn expected_reward(&self, x: &Vector) -> Result<f64> {
        x.dot(&self.theta_star)
    }

    /// `xᵀθ* + η` with `η` drawn from `rng`.
    pub fn reward<R: Rng + ?Sized>(&self, x: &Vector, rng: &mut R) -> Result<f64> {
        let eta: f64 = StandardNormal.sample(rng);
        Ok(self.expected_reward(x)? + self.config.sigma * eta)
    }

    /// `n` noise draws `η ~ N(0, σ²)` from the environment's own noise stream.
    pub fn draw_noise(&mut self, n: usize) -> Vec<f64> {
        let sigma = self.config.sigma;
        (0..n)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut self.noise_rng);
                sigma * z
            })
            .collect()
    }

    /// Redraw θ* until at least `⌈ρK⌉` arms move by more than `delta`.
    /// Returns the number of candidates tried.
    pub fn apply_change(&mut self, delta: f64, rho: f64) -> Result<usize> {
        if !(delta > 0.0) {
            return Err(invalid(format!("delta must be > 0, got {delta}")));
        }
        if !(0.0..=1.0).contains(&rho) {
            return Err(invalid(format!("rho must lie in [0, 1], got {rho}")));
        }
        let required = (rho * self.arms.len() as f64).ceil() as usize;
        let current: Vec<f64> = self
            .arms
            .iter()
            .map(|a| a.features.dot(&self.theta_star))
            .collect::<Result<_>>()?;
        for attempt in 1..=REJECTION_BUDGET {
            let cand = draw_theta(self.config.d, &mut self.change_rng);
            let moved = count_moved(&self.arms, &current, &cand, delta)?;
            if moved >= required {
                self.theta_history.push(ThetaChange {
                    round: self.round,
                    theta: cand.clone(),
                });
                self.theta_star = cand;
                return Ok(attempt);
            }
        }
        Err(Error::InfeasibleChange {
            delta,
            required,
            budget: REJECTION_BUDGET,
        })
    }

    /// Number of arms whose expected reward differs by more than `delta`
    /// between two parameters.
    pub fn arms_moved(&self, before: &Vector, after: &Vector, delta: f64) -> Result<usize> {
        let current: Vec<f64> = self
            .arms
            .iter()
            .map(|a| a.features.dot(before))
            .collect::<Result<_>>()?;
        count_moved(&self.arms, &current, after, delta)
    }

    /// Best candidate by expected reward; ties go to the lowest arm id.
    pub fn best_expected(&self, candidates: &[Arm]) -> Result<(ArmId, f64)> {
        let mut best: Option<(ArmId, f64)> = None;
        for arm in candidates {
            let v = self.expected_reward(&arm.features)?;
            best = match best {
                Some((id, b)) if b > v || (b == v && id < arm.id) => Some((id, b)),
                _ => Some((arm.id, v)),
            };
        }
        best.ok_or(Error::EmptyPool)
    }

    /// Advance the clock by one round, applying a scheduled change when the
    /// new round is a positive multiple of `S`. Returns whether θ* changed.
    pub fn step_clock(&mut self) -> Result<bool> {
        self.round += 1;
        if self.round.is_multiple_of(self.config.period) && self.config.rho > 0.0 {
            let delta = self.config.delta_for_change(self.changes);
            self.apply_change(delta, self.config.rho)?;
            self.changes += 1;
            return Ok(true);
        }
        Ok(false)
    }

    pub fn trajectory(&self) -> EnvTrajectory {
        EnvTrajectory {
            seed: self.config.seed,
            config_hash: self.config.fingerprint(),
            config: self.config.clone(),
            theta_history: self.theta_history.clone(),
            change_rounds: self.theta_history.iter().skip(1).map(|c| c.round).collect(),
        }
    }
}

fn count_moved(arms: &[Arm], current: &[f64], cand: &Vector, delta: f64) -> Result<usize> {
    let mut moved = 0;
    for (arm, &before) in arms.iter().zip(current) {
        if (arm.features.dot(cand)? - before).abs() > delta {
            moved += 1;
        }
    }
    Ok(moved)
}

/// Uniform sample of `n` distinct arms from `pool`.
pub fn sample_candidates_from<R: Rng + ?Sized>(
    pool: &[Arm],
    n: usize,
    rng: &mut R,
) -> Result<Vec<Arm>> {
    if n > pool.len() {
        return Err(invalid(format!(
            "cannot sample {n} candidates from a pool of {}",
            pool.len()
        )));
    }
    Ok(index::sample(rng, pool.len(), n)
        .into_iter()
        .map(|i| pool[i].clone())
        .collect())
}

#[cfg(test)]
mod tests {
    use std::collections::HashSet;

    use super::*;

    fn small(seed: u64) -> EnvConfig {
        EnvConfig {
            num_arms: 50,
            d: 5,
            pool_per_round: 10,
            period: 10,
            delta: 0.1,
            rho: 0.5,
            horizon: 100,
            seed,
            ..Default::default()
        }
    }

    #[test]
    fn arms_have_bounded_norm_and_are_reproducible() {
        let mut r1 = ChaCha8Rng::seed_from_u64(3);
        let mut r2 = ChaCha8Rng::seed_from_u64(3);
        let a = gen_arms(200, 10, &mut r1).unwrap();
        assert!(a.iter().all(|x| x.norm() <= 1.0 + 1e-12));
        assert_eq!(a, gen_arms(200, 10, &mut r2).unwrap());
        assert_eq!(gen_arms(1, 3, &mut r1).unwrap().len(), 1);
        assert!(gen_arms(0, 3, &mut r1).is_err());
    }

    #[test]
    fn candidates_distinct_and_exhaustive() {
        let mut env = Environment::new(small(1)).unwrap();
        let c = env.sample_candidates(10).unwrap();
        let ids: HashSet<_> = c.iter().map(|a| a.id).collect();
        assert_eq!(ids.len(), 10);
        let all: HashSet<_> = env
            .sample_candidates(50)
            .unwrap()
            .iter()
            .map(|a| a.id)
            .collect();
        assert_eq!(all, (0..50).collect());
        assert!(env.sample_candidates(51).is_err());
    }

    #[test]
    fn candidate_stream_is_deterministic() {
        let mut a = Environment::new(small(9)).unwrap();
        let mut b = Environment::new(small(9)).unwrap();
        for _ in 0..20 {
            assert_eq!(
                a.sample_candidates(10).unwrap(),
                b.sample_candidates(10).unwrap()
            );
        }
    }

    #[test]
    fn noiseless_reward_is_expected_value() {
        let env = Environment::new(EnvConfig {
            sigma: 0.0,
            ..small(2)
        })
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let x = env.arms()[3].features.clone();
        assert_eq!(
            env.reward(&x, &mut rng).unwrap(),
            env.expected_reward(&x).unwrap()
        );
        assert!(env.reward(&Vector::zeros(2), &mut rng).is_err());
    }

    #[test]
    fn reward_mean_concentrates() {
        let env = Environment::new(EnvConfig {
            sigma: 0.05,
            ..small(4)
        })
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x = env.arms()[0].features.clone();
        let n = 100_000;
        let mean = (0..n)
            .map(|_| env.reward(&x, &mut rng).unwrap())
            .sum::<f64>()
            / n as f64;
        let truth = env.expected_reward(&x).unwrap();
        assert!((mean - truth).abs() < 4.0 * 0.05 / (n as f64).sqrt());
    }

    #[test]
    fn zero_rho_accepts_first_candidate() {
        let mut env = Environment::new(small(5)).unwrap();
        assert_eq!(env.apply_change(0.5, 0.0).unwrap(), 1);
        assert_eq!(env.theta_history().len(), 2);
    }

    #[test]
    fn change_postcondition_recount() {
        let mut env = Environment::new(small(6)).unwrap();
        let before = env.theta_star().clone();
        env.apply_change(0.1, 0.5).unwrap();
        let moved = env.arms_moved(&before, env.theta_star(), 0.1).unwrap();
        assert!(moved >= 25);
        assert!(env.theta_star().norm() <= 1.0 + 1e-12);
    }

    #[test]
    fn infeasible_change_reports_budget() {
        let mut env = Environment::new(small(7)).unwrap();
        let err = env.apply_change(5.0, 1.0).unwrap_err();
        assert!(matches!(
            err,
            Error::InfeasibleChange {
                budget: REJECTION_BUDGET,
                ..
            }
        ));
        assert!(err.to_string().contains("10000"));
    }

    #[test]
    fn best_expected_cases() {
        let mut env = Environment::new(small(8)).unwrap();
        let c = env.sample_candidates(10).unwrap();
        let (id, v) = env.best_expected(&c[..1]).unwrap();
        assert_eq!(id, c[0].id);
        assert_eq!(v, env.expected_reward(&c[0].features).unwrap());
        env.set_theta(Vector::zeros(5)).unwrap();
        let lowest = c.iter().map(|a| a.id).min().unwrap();
        assert_eq!(env.best_expected(&c).unwrap(), (lowest, 0.0));
        assert!(env.best_expected(&[]).is_err());
    }

    #[test]
    fn clock_schedule() {
        let mut env = Environment::new(small(10)).unwrap();
        let theta0 = env.theta_star().clone();
        for _ in 1..10 {
            assert!(!env.step_clock().unwrap());
        }
        assert_eq!(env.theta_star(), &theta0);
        assert!(env.step_clock().unwrap());
        assert_eq!(env.round(), 10);
        assert_eq!(env.theta_history().len(), 2);
    }

    #[test]
    fn default_change_rounds() {
        let cfg = EnvConfig::default();
        assert_eq!(cfg.change_rounds(), vec![800, 1600, 2400, 3200, 4000, 4800]);
        assert!(EnvConfig {
            rho: 0.0,
            ..cfg.clone()
        }
        .change_rounds()
        .is_empty());
        assert!(EnvConfig { horizon: 0, ..cfg }.change_rounds().is_empty());
    }

    #[test]
    fn config_validation() {
        assert!(EnvConfig {
            pool_per_round: 2000,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(EnvConfig {
            rho: 1.5,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(EnvConfig {
            period: 0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(EnvConfig {
            delta: 0.0,
            ..Default::default()
        }
        .validate()
        .is_err());
    }
}
