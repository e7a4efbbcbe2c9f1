//! Policies that share one harness interface: dLinUCB itself, stationary
//! LinUCB, the restart-at-known-change-points OracleLinUCB, and uniform random.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::arm::{Arm, ArmId};
use crate::error::{invalid, Error, Result};
use crate::linalg::Vector;
use crate::master::{Choice, Hyperparams, MasterState, StepEvents};
use crate::slave::{NoiseSpec, SlaveModel};

pub trait Agent: Send {
    fn name(&self) -> &str;

    /// Pick one of `candidates` at round `t`.
    fn choose(&mut self, t: u64, candidates: &[Arm]) -> Result<ArmId>;

    /// Feed back the played context and reward. dLinUCB reports its events.
    fn learn(&mut self, t: u64, x: &Vector, r: f64) -> Result<Option<StepEvents>>;

    /// Number of live models (slaves for dLinUCB).
    fn n_models(&self) -> usize {
        1
    }
}

pub struct DLinUcbAgent {
    master: MasterState,
    last: Option<Choice>,
}

impl DLinUcbAgent {
    pub fn new(hyper: Hyperparams) -> Result<Self> {
        Ok(Self {
            master: MasterState::new(hyper, 0)?,
            last: None,
        })
    }

    pub fn master(&self) -> &MasterState {
        &self.master
    }
}

impl Agent for DLinUcbAgent {
    fn name(&self) -> &str {
        "dlinucb"
    }

    fn choose(&mut self, _t: u64, candidates: &[Arm]) -> Result<ArmId> {
        let c = self.master.choose_arm(candidates)?;
        self.last = Some(c);
        Ok(c.arm)
    }

    fn learn(&mut self, _t: u64, x: &Vector, r: f64) -> Result<Option<StepEvents>> {
        let mut ev = self.master.observe(x, r)?;
        if let Some(c) = self.last.take() {
            ev.chosen_arm = Some(c.arm);
            ev.chosen_slave = Some(c.slave);
        }
        Ok(Some(ev))
    }

    fn n_models(&self) -> usize {
        self.master.slaves().len()
    }
}

/// Stationary LinUCB: one model that absorbs every observation.
pub struct LinUcbAgent {
    model: SlaveModel,
    noise: NoiseSpec,
}

impl LinUcbAgent {
    pub fn new(dim: usize, lambda: f64, delta1: f64, sigma: f64) -> Result<Self> {
        Ok(Self {
            model: SlaveModel::new(dim, lambda, 0)?,
            noise: NoiseSpec::new(sigma, delta1)?,
        })
    }

    pub fn model(&self) -> &SlaveModel {
        &self.model
    }

    fn reset(&mut self, t: u64) -> Result<()> {
        self.model = SlaveModel::new(self.model.dim(), self.model.lambda(), t)?;
        Ok(())
    }
}

impl Agent for LinUcbAgent {
    fn name(&self) -> &str {
        "linucb"
    }

    fn choose(&mut self, _t: u64, candidates: &[Arm]) -> Result<ArmId> {
        self.model.select_arm(candidates, &self.noise)
    }

    fn learn(&mut self, _t: u64, x: &Vector, r: f64) -> Result<Option<StepEvents>> {
        self.model.absorb(x, r)?;
        Ok(None)
    }
}

/// LinUCB that is told the true change rounds and restarts at each one.
pub struct OracleLinUcbAgent {
    inner: LinUcbAgent,
    change_rounds: Vec<u64>,
    next_change: usize,
}

impl OracleLinUcbAgent {
    pub fn new(
        dim: usize,
        lambda: f64,
        delta1: f64,
        sigma: f64,
        change_rounds: Vec<u64>,
    ) -> Result<Self> {
        if change_rounds.windows(2).any(|w| w[0] > w[1]) {
            return Err(invalid("change rounds must be sorted ascending"));
        }
        Ok(Self {
            inner: LinUcbAgent::new(dim, lambda, delta1, sigma)?,
            change_rounds,
            next_change: 0,
        })
    }

    pub fn model(&self) -> &SlaveModel {
        self.inner.model()
    }

    fn catch_up(&mut self, t: u64) -> Result<()> {
        while self
            .change_rounds
            .get(self.next_change)
            .is_some_and(|&c| c <= t)
        {
            self.inner.reset(t)?;
            self.next_change += 1;
        }
        Ok(())
    }
}

impl Agent for OracleLinUcbAgent {
    fn name(&self) -> &str {
        "oracle-linucb"
    }

    fn choose(&mut self, t: u64, candidates: &[Arm]) -> Result<ArmId> {
        self.catch_up(t)?;
        self.inner.choose(t, candidates)
    }

    fn learn(&mut self, t: u64, x: &Vector, r: f64) -> Result<Option<StepEvents>> {
        self.catch_up(t)?;
        self.inner.learn(t, x, r)
    }
}

pub struct RandomAgent {
    rng: ChaCha8Rng,
}

impl RandomAgent {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl Agent for RandomAgent {
    fn name(&self) -> &str {
        "random"
    }

    fn choose(&mut self, _t: u64, candidates: &[Arm]) -> Result<ArmId> {
        if candidates.is_empty() {
            return Err(Error::EmptyPool);
        }
        Ok(candidates[self.rng.random_range(0..candidates.len())].id)
    }

    fn learn(&mut self, _t: u64, _x: &Vector, _r: f64) -> Result<Option<StepEvents>> {
        Ok(None)
    }

    fn n_models(&self) -> usize {
        0
    }
}

/// Names accepted by [`AgentSpec::build`].
pub const AGENT_NAMES: [&str; 4] = ["dlinucb", "linucb", "oracle-linucb", "random"];

/// Agent selection plus optional hyperparameter overrides, as found in a
/// run configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentSpec {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta1_tilde: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<usize>,
}

impl AgentSpec {
    pub fn named(name: &str) -> Self {
        Self {
            name: name.to_string(),
            lambda: None,
            delta1: None,
            delta1_tilde: None,
            delta2: None,
            tau: None,
        }
    }

    /// Hyperparameters after applying overrides to the defaults, for a
    /// problem of dimension `dim` and noise scale `sigma`.
    pub fn hyperparams(&self, dim: usize, sigma: f64) -> Hyperparams {
        let d = Hyperparams::default();
        Hyperparams {
            delta1: self.delta1.unwrap_or(d.delta1),
            delta1_tilde: self.delta1_tilde.unwrap_or(d.delta1_tilde),
            delta2: self.delta2.unwrap_or(d.delta2),
            tau: self.tau.unwrap_or(d.tau),
            lambda: self.lambda.unwrap_or(d.lambda),
            sigma,
            dim,
        }
    }

    /// Instantiate the agent. `change_rounds` is only used by OracleLinUCB;
    /// `seed` only by the random policy.
    pub fn build(
        &self,
        dim: usize,
        sigma: f64,
        change_rounds: &[u64],
        seed: u64,
    ) -> Result<Box<dyn Agent>> {
        let h = self.hyperparams(dim, sigma);
        Ok(match self.name.as_str() {
            "dlinucb" => Box::new(DLinUcbAgent::new(h)?),
            "linucb" => Box::new(LinUcbAgent::new(dim, h.lambda, h.delta1, sigma)?),
            "oracle-linucb" => Box::new(OracleLinUcbAgent::new(
                dim,
                h.lambda,
                h.delta1,
                sigma,
                change_rounds.to_vec(),
            )?),
            "random" => Box::new(RandomAgent::new(seed)),
            other => {
                return Err(invalid(format!(
                    "unknown agent '{other}', expected one of {AGENT_NAMES:?}"
                )))
            }
        })
    }
}
