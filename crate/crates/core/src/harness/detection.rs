//! Change-detection scoring: match true change rounds against slave-creation
//! rounds.

use serde::{Deserialize, Serialize};

use crate::env::EnvTrajectory;
use crate::error::{Error, Result};

/// Slave-creation rounds of one dLinUCB run, tagged with the environment it
/// was run against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CreationLog {
    pub seed: u64,
    pub config_hash: String,
    pub creation_rounds: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub seed: u64,
    pub horizon: u64,
    pub change_rounds: Vec<u64>,
    pub detections: Vec<u64>,
    /// Per true change: rounds until the matched creation, `None` when the
    /// change was never detected before the next change or the horizon.
    pub latencies: Vec<Option<u64>>,
    pub false_alarms: usize,
}

impl DetectionReport {
    pub fn matched(&self) -> usize {
        self.latencies.iter().flatten().count()
    }

    pub fn matched_latencies(&self) -> Vec<u64> {
        self.latencies.iter().flatten().copied().collect()
    }
}

/// Each change `c_j` is matched to the first creation in `[c_j, c_{j+1})`;
/// creations left unmatched count as false alarms.
pub fn detection_report(traj: &EnvTrajectory, log: &CreationLog) -> Result<DetectionReport> {
    if traj.seed != log.seed || traj.config_hash != log.config_hash {
        return Err(Error::Inconsistent(format!(
            "trajectory (seed {}, config {}) does not match event log (seed {}, config {})",
            traj.seed, traj.config_hash, log.seed, log.config_hash
        )));
    }
    let mut creations = log.creation_rounds.clone();
    creations.sort_unstable();
    let changes = &traj.change_rounds;
    let mut used = vec![false; creations.len()];
    let mut latencies = Vec::with_capacity(changes.len());
    for (j, &c) in changes.iter().enumerate() {
        let end = changes.get(j + 1).copied().unwrap_or(u64::MAX);
        let hit = creations
            .iter()
            .enumerate()
            .find(|(i, &r)| !used[*i] && r >= c && r < end);
        latencies.push(hit.map(|(i, &r)| {
            used[i] = true;
            r - c
        }));
    }
    Ok(DetectionReport {
        seed: log.seed,
        horizon: traj.config.horizon,
        change_rounds: changes.clone(),
        detections: creations,
        latencies,
        false_alarms: used.iter().filter(|u| !**u).count(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{EnvConfig, Environment};

    fn traj() -> EnvTrajectory {
        let mut env = Environment::new(EnvConfig {
            num_arms: 20,
            d: 3,
            pool_per_round: 3,
            period: 10,
            delta: 0.05,
            rho: 0.2,
            horizon: 35,
            seed: 4,
            ..Default::default()
        })
        .unwrap();
        for _ in 1..35 {
            env.step_clock().unwrap();
        }
        env.trajectory()
    }

    fn log(t: &EnvTrajectory, rounds: Vec<u64>) -> CreationLog {
        CreationLog {
            seed: t.seed,
            config_hash: t.config_hash.clone(),
            creation_rounds: rounds,
        }
    }

    #[test]
    fn exact_detection() {
        let t = traj();
        assert_eq!(t.change_rounds, vec![10, 20, 30]);
        let r = detection_report(&t, &log(&t, vec![10, 20, 30])).unwrap();
        assert_eq!(r.latencies, vec![Some(0); 3]);
        assert_eq!(r.false_alarms, 0);
    }

    #[test]
    fn no_creations_are_censored() {
        let t = traj();
        let r = detection_report(&t, &log(&t, vec![])).unwrap();
        assert_eq!(r.latencies, vec![None; 3]);
        assert_eq!(r.matched(), 0);
    }

    #[test]
    fn scripted_latency_and_false_alarms() {
        let t = traj();
        let r = detection_report(&t, &log(&t, vec![15])).unwrap();
        assert_eq!(r.latencies, vec![Some(5), None, None]);
        assert_eq!(r.matched_latencies(), vec![5]);
        assert_eq!(r.false_alarms, 0);

        let r = detection_report(&t, &log(&t, vec![3, 12, 14, 25])).unwrap();
        assert_eq!(r.latencies, vec![Some(2), Some(5), None]);
        assert_eq!(r.false_alarms, 2);
    }

    #[test]
    fn mismatched_seed_is_rejected() {
        let t = traj();
        let mut l = log(&t, vec![]);
        l.seed += 1;
        assert!(matches!(
            detection_report(&t, &l),
            Err(Error::Inconsistent(_))
        ));
        let mut l = log(&t, vec![]);
        l.config_hash = "deadbeef".into();
        assert!(detection_report(&t, &l).is_err());
    }
}
