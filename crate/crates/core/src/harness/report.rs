//! Summaries recomputed from the files a simulation run wrote to disk.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::env::EnvTrajectory;
use crate::error::{Error, Result};
use crate::harness::detection::{detection_report, CreationLog, DetectionReport};
use crate::harness::experiment::{read_trace_csv, trajectory_path, AgentSummary};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirReport {
    pub seeds: Vec<u64>,
    pub regret: Vec<AgentSummary>,
    pub detection: Vec<(String, DetectionReport)>,
}

fn trace_seed(name: &str) -> Option<u64> {
    name.strip_prefix("trace_seed")?
        .strip_suffix(".csv")?
        .parse()
        .ok()
}

/// Regret table and detection reports from `trace_seed*.csv` and
/// `env_seed*.json` files under `dir`.
pub fn report_dir(dir: &Path) -> Result<DirReport> {
    let mut seeds: Vec<u64> = fs::read_dir(dir)?
        .filter_map(|e| e.ok())
        .filter_map(|e| trace_seed(&e.file_name().to_string_lossy()))
        .collect();
    seeds.sort_unstable();
    if seeds.is_empty() {
        return Err(Error::Inconsistent(format!(
            "no trace_seed*.csv files under {}",
            dir.display()
        )));
    }
    let mut finals: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut order: Vec<String> = Vec::new();
    let mut detection = Vec::new();
    for &seed in &seeds {
        let records = read_trace_csv(&dir.join(format!("trace_seed{seed}.csv")))?;
        let traj: EnvTrajectory =
            serde_json::from_str(&fs::read_to_string(trajectory_path(dir, seed))?)?;
        let mut by_agent: BTreeMap<&str, Vec<_>> = BTreeMap::new();
        for r in &records {
            if r.seed != seed {
                return Err(Error::Inconsistent(format!(
                    "trace for seed {seed} contains a row for seed {}",
                    r.seed
                )));
            }
            if !order.iter().any(|a| a == &r.agent) {
                order.push(r.agent.clone());
            }
            by_agent.entry(&r.agent).or_default().push(r);
        }
        for (agent, rows) in by_agent {
            finals
                .entry(agent.to_string())
                .or_default()
                .push(rows.last().map_or(0.0, |r| r.regret_cum));
            if agent.starts_with("dlinucb") {
                let log = CreationLog {
                    seed,
                    config_hash: traj.config_hash.clone(),
                    creation_rounds: rows.iter().filter(|r| r.created).map(|r| r.round).collect(),
                };
                detection.push((agent.to_string(), detection_report(&traj, &log)?));
            }
        }
    }
    let regret = order
        .iter()
        .map(|a| AgentSummary::from_finals(a, finals.remove(a).unwrap_or_default()))
        .collect();
    Ok(DirReport {
        seeds,
        regret,
        detection,
    })
}
