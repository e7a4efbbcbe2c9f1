//! Simulator-side diagnostic: how much of a slave's training data came from a
//! different stationary segment than the one in force now, and how far that
//! widens its confidence coefficient.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::env::EnvTrajectory;
use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::master::StepEvents;
use crate::slave::{NoiseSpec, SlaveModel};

/// Observations absorbed by each slave, keyed by slave id.
#[derive(Debug, Clone, Default)]
pub struct AssignmentLog {
    entries: BTreeMap<u64, Vec<(u64, Vector)>>,
}

impl AssignmentLog {
    /// Record the observation of round `round` for every slave whose error
    /// flag was 0 (those are the ones that absorbed it).
    pub fn record(&mut self, round: u64, x: &Vector, events: &StepEvents) {
        for f in events.e_flags.iter().filter(|f| f.e == 0) {
            self.entries
                .entry(f.slave)
                .or_default()
                .push((round, x.clone()));
        }
    }

    pub fn for_slave(&self, id: u64) -> &[(u64, Vector)] {
        self.entries.get(&id).map_or(&[], Vec::as_slice)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContaminationReport {
    /// `Σ_{contaminated i} xᵢᵀ(θ*ᵢ − θ*_now)`
    pub c_t: f64,
    pub alpha: f64,
    pub alpha_tilde: f64,
    pub contaminated: usize,
}

/// Contamination of `slave` at round `at_round`, given the rounds and contexts
/// it absorbed.
pub fn contamination_diagnostic(
    traj: &EnvTrajectory,
    slave: &SlaveModel,
    assignments: &[(u64, Vector)],
    at_round: u64,
    noise: &NoiseSpec,
) -> Result<ContaminationReport> {
    if assignments.len() as u64 != slave.obs_count() {
        return Err(Error::Inconsistent(format!(
            "assignment log has {} entries but slave {} absorbed {}",
            assignments.len(),
            slave.id(),
            slave.obs_count()
        )));
    }
    let current = traj.regime_at(at_round);
    let theta_now = traj
        .theta_at(at_round)
        .ok_or_else(|| Error::Inconsistent("no ground truth at evaluation round".into()))?;
    let mut c_t = 0.0;
    let mut contaminated = 0;
    for (round, x) in assignments {
        if traj.regime_at(*round) == current {
            continue;
        }
        let theta_then = traj
            .theta_at(*round)
            .ok_or_else(|| Error::Inconsistent(format!("no ground truth at round {round}")))?;
        c_t += x.dot(theta_then)? - x.dot(theta_now)?;
        contaminated += 1;
    }
    let alpha = slave.alpha(noise);
    Ok(ContaminationReport {
        c_t,
        alpha,
        alpha_tilde: alpha + c_t,
        contaminated,
    })
}
