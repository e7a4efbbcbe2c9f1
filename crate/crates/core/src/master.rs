//! The dLinUCB master: keeps a set of LinUCB slave models, tracks each one's
//! recent error rate ("badness") over a sliding window, picks the slave with
//! the lowest lower confidence bound on badness, and creates or discards
//! slaves when the badness statistics say the environment has moved.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::arm::{Arm, ArmId};
use crate::error::{invalid, Error, Result};
use crate::linalg::Vector;
use crate::slave::{NoiseSpec, SlaveModel};

/// Fixed-capacity FIFO of per-round error flags for one slave.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BadnessWindow {
    capacity: usize,
    flags: VecDeque<bool>,
    created_at: u64,
}

impl BadnessWindow {
    pub fn new(capacity: usize, created_at: u64) -> Result<Self> {
        if capacity == 0 {
            return Err(invalid("badness window capacity must be >= 1"));
        }
        Ok(Self {
            capacity,
            flags: VecDeque::with_capacity(capacity),
            created_at,
        })
    }

    pub fn push(&mut self, flag: bool) {
        if self.flags.len() == self.capacity {
            self.flags.pop_front();
        }
        self.flags.push_back(flag);
    }

    pub fn len(&self) -> usize {
        self.flags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.flags.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn created_at(&self) -> u64 {
        self.created_at
    }

    pub fn error_count(&self) -> usize {
        self.flags.iter().filter(|&&f| f).count()
    }

    pub fn flags(&self) -> impl Iterator<Item = bool> + '_ {
        self.flags.iter().copied()
    }

    /// Empirical badness and its Hoeffding width. An empty window reports
    /// zeros, matching the initialization of a freshly created slave.
    pub fn stats(&self, delta2: f64) -> Result<BadnessStats> {
        if !(delta2 > 0.0 && delta2 < 1.0) {
            return Err(invalid(format!("delta2 must lie in (0, 1), got {delta2}")));
        }
        let n = self.len();
        if n == 0 {
            return Ok(BadnessStats {
                e_hat: 0.0,
                d_t: 0.0,
                window_len: 0,
            });
        }
        Ok(BadnessStats {
            e_hat: self.error_count() as f64 / n as f64,
            d_t: ((1.0 / delta2).ln() / (2.0 * n as f64)).sqrt(),
            window_len: n,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BadnessStats {
    pub e_hat: f64,
    pub d_t: f64,
    pub window_len: usize,
}

impl BadnessStats {
    /// `ê − sqrt(ln τ)·d`
    pub fn lower_bound(&self, tau: usize) -> f64 {
        self.e_hat - (tau as f64).ln().sqrt() * self.d_t
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Hyperparams {
    pub delta1: f64,
    pub delta1_tilde: f64,
    pub delta2: f64,
    pub tau: usize,
    pub lambda: f64,
    pub sigma: f64,
    pub dim: usize,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            delta1: 0.1,
            delta1_tilde: 0.05,
            delta2: 0.1,
            tau: 200,
            lambda: 0.1,
            sigma: 0.05,
            dim: 10,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta1 > 0.0 && self.delta1 < 1.0) {
            return Err(invalid(format!(
                "delta1 must lie in (0, 1), got {}",
                self.delta1
            )));
        }
        if !(self.delta1_tilde >= 0.0 && self.delta1_tilde <= self.delta1) {
            return Err(invalid(format!(
                "delta1_tilde must lie in [0, delta1], got {}",
                self.delta1_tilde
            )));
        }
        if !(self.delta2 > 0.0 && self.delta2 < 1.0) {
            return Err(invalid(format!(
                "delta2 must lie in (0, 1), got {}",
                self.delta2
            )));
        }
        if self.tau == 0 {
            return Err(invalid("tau must be >= 1"));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(invalid(format!("lambda must be > 0, got {}", self.lambda)));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(invalid(format!("sigma must be >= 0, got {}", self.sigma)));
        }
        if self.dim == 0 {
            return Err(invalid("dim must be >= 1"));
        }
        Ok(())
    }

    pub fn noise(&self) -> Result<NoiseSpec> {
        NoiseSpec::new(self.sigma, self.delta1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlaveFlag {
    pub slave: u64,
    pub e: u8,
}

/// What happened during one `observe` call.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepEvents {
    pub round: u64,
    pub chosen_slave: Option<u64>,
    pub chosen_arm: Option<ArmId>,
    pub reward: f64,
    pub e_flags: Vec<SlaveFlag>,
    pub discarded: Vec<u64>,
    pub created: bool,
    pub n_slaves: usize,
}

impl StepEvents {
    pub fn to_json_line(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn flag_of(&self, slave: u64) -> Option<bool> {
        self.e_flags
            .iter()
            .find(|f| f.slave == slave)
            .map(|f| f.e == 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Choice {
    pub arm: ArmId,
    pub slave: u64,
}

#[derive(Debug, Clone)]
pub struct MasterState {
    hyper: Hyperparams,
    noise: NoiseSpec,
    slaves: Vec<SlaveModel>,
    round: u64,
    next_id: u64,
}

impl MasterState {
    /// One fresh slave, with the clock at `t0`.
    pub fn new(hyper: Hyperparams, t0: u64) -> Result<Self> {
        hyper.validate()?;
        let noise = hyper.noise()?;
        let mut st = Self {
            hyper,
            noise,
            slaves: Vec::new(),
            round: t0,
            next_id: 0,
        };
        st.spawn(t0)?;
        Ok(st)
    }

    fn spawn(&mut self, t: u64) -> Result<()> {
        let slave = SlaveModel::new(self.hyper.dim, self.hyper.lambda, t)?
            .with_window(self.hyper.tau)?
            .with_id(self.next_id);
        self.next_id += 1;
        self.slaves.push(slave);
        Ok(())
    }

    pub fn hyper(&self) -> &Hyperparams {
        &self.hyper
    }

    pub fn noise(&self) -> &NoiseSpec {
        &self.noise
    }

    pub fn round(&self) -> u64 {
        self.round
    }

    /// Active slaves in creation order.
    pub fn slaves(&self) -> &[SlaveModel] {
        &self.slaves
    }

    pub fn slave(&self, id: u64) -> Option<&SlaveModel> {
        self.slaves.iter().find(|s| s.id() == id)
    }

    pub fn stats(&self, slave: &SlaveModel) -> BadnessStats {
        // delta2 was validated at construction
        slave
            .badness()
            .stats(self.hyper.delta2)
            .expect("validated delta2")
    }

    /// Slave with the smallest badness LCB; ties go to the oldest.
    pub fn select_slave(&self) -> Result<&SlaveModel> {
        let mut best: Option<(&SlaveModel, f64)> = None;
        for s in &self.slaves {
            let lcb = self.stats(s).lower_bound(self.hyper.tau);
            if best.is_none_or(|(_, b)| lcb < b) {
                best = Some((s, lcb));
            }
        }
        best.map(|(s, _)| s).ok_or(Error::EmptySlaveSet)
    }

    pub fn choose_arm(&self, pool: &[Arm]) -> Result<Choice> {
        if pool.is_empty() {
            return Err(Error::EmptyPool);
        }
        let slave = self.select_slave()?;
        Ok(Choice {
            arm: slave.select_arm(pool, &self.noise)?,
            slave: slave.id(),
        })
    }

    /// Route the feedback `(x, r)` of the played arm to every active slave,
    /// then discard out-of-date slaves and create a new one if needed.
    pub fn observe(&mut self, x: &Vector, r: f64) -> Result<StepEvents> {
        x.check_dim(self.hyper.dim)?;
        if !r.is_finite() {
            return Err(Error::NonFinite("reward"));
        }
        let t = self.round;
        let flags = self
            .slaves
            .iter()
            .map(|s| s.error_indicator(x, r, &self.noise))
            .collect::<Result<Vec<_>>>()?;

        let Hyperparams {
            delta1,
            delta1_tilde,
            delta2,
            ..
        } = self.hyper;
        let mut create = true;
        let mut discarded = Vec::new();
        let mut e_flags = Vec::with_capacity(flags.len());
        for (slave, &e) in self.slaves.iter_mut().zip(&flags) {
            if !e {
                slave.absorb(x, r)?;
            }
            slave.badness.push(e);
            e_flags.push(SlaveFlag {
                slave: slave.id(),
                e: e as u8,
            });
            let st = slave.badness.stats(delta2)?;
            if st.window_len == 0 {
                continue;
            }
            if st.e_hat < delta1_tilde + st.d_t {
                create = false;
            } else if st.e_hat >= delta1 + st.d_t {
                discarded.push(slave.id());
            }
        }
        self.slaves.retain(|s| !discarded.contains(&s.id()));
        let created = create || self.slaves.is_empty();
        if created {
            self.spawn(t)?;
        }
        self.round += 1;
        Ok(StepEvents {
            round: t,
            chosen_slave: None,
            chosen_arm: None,
            reward: r,
            e_flags,
            discarded,
            created,
            n_slaves: self.slaves.len(),
        })
    }
}
