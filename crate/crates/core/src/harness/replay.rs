//! Offline replay evaluation on logged bandit feedback.
//!
//! A row counts only when the evaluated policy picks the same arm as the
//! logger; the policy then sees the logged reward and may learn from it.
//! With a uniformly random logger this gives an unbiased estimate of the
//! policy's online click-through rate.
//!
//! File format: CSV with header
//! `round,logged_arm,reward,c0_id,c0_x0,..,c0_x{d-1},c1_id,...`, i.e. a fixed
//! number of candidates per row, each flattened as its id plus `d` features.

use std::io::{Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::agents::Agent;
use crate::arm::{position, Arm, ArmId};
use crate::env::{EnvConfig, Environment};
use crate::error::{invalid, Error, Result};
use crate::harness::experiment::fmt_f64;
use crate::linalg::Vector;

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayRow {
    pub round: u64,
    pub candidates: Vec<Arm>,
    pub logged_arm: ArmId,
    pub reward: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayLog {
    pub dim: usize,
    pub n_candidates: usize,
    pub rows: Vec<ReplayRow>,
}

impl ReplayLog {
    pub fn new(dim: usize, n_candidates: usize, rows: Vec<ReplayRow>) -> Result<Self> {
        if dim == 0 || n_candidates == 0 {
            return Err(invalid(
                "replay log needs d >= 1 and at least one candidate",
            ));
        }
        for r in &rows {
            if r.candidates.len() != n_candidates {
                return Err(Error::MalformedLog(format!(
                    "round {}: expected {n_candidates} candidates, found {}",
                    r.round,
                    r.candidates.len()
                )));
            }
            for c in &r.candidates {
                c.features.check_dim(dim)?;
            }
            if position(&r.candidates, r.logged_arm).is_none() {
                return Err(Error::MalformedLog(format!(
                    "round {}: logged arm {} is not a candidate",
                    r.round, r.logged_arm
                )));
            }
            if !r.reward.is_finite() {
                return Err(Error::NonFinite("logged reward"));
            }
        }
        Ok(Self {
            dim,
            n_candidates,
            rows,
        })
    }

    fn header(&self) -> Vec<String> {
        let mut h = vec!["round".into(), "logged_arm".into(), "reward".into()];
        for c in 0..self.n_candidates {
            h.push(format!("c{c}_id"));
            h.extend((0..self.dim).map(|k| format!("c{c}_x{k}")));
        }
        h
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(self.header())?;
        for r in &self.rows {
            let mut rec = vec![
                r.round.to_string(),
                r.logged_arm.to_string(),
                fmt_f64(r.reward),
            ];
            for c in &r.candidates {
                rec.push(c.id.to_string());
                rec.extend(c.features.as_slice().iter().map(|v| fmt_f64(*v)));
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(input);
        let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        let n = header.iter().filter(|h| h.ends_with("_id")).count();
        if n == 0 || header.len() < 3 || !(header.len() - 3).is_multiple_of(n) {
            return Err(Error::MalformedLog(format!(
                "unrecognized header {header:?}"
            )));
        }
        let d = (header.len() - 3) / n - 1;
        let shell = ReplayLog {
            dim: d.max(1),
            n_candidates: n,
            rows: Vec::new(),
        };
        if d == 0 || shell.header() != header {
            return Err(Error::MalformedLog(format!(
                "unrecognized header {header:?}"
            )));
        }
        let num = |s: &str, what: &str| -> Result<f64> {
            s.parse::<f64>()
                .map_err(|_| Error::MalformedLog(format!("cannot parse {what} '{s}'")))
        };
        let int = |s: &str, what: &str| -> Result<u64> {
            s.parse::<u64>()
                .map_err(|_| Error::MalformedLog(format!("cannot parse {what} '{s}'")))
        };
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let f: Vec<&str> = rec.iter().collect();
            let mut candidates = Vec::with_capacity(n);
            for c in 0..n {
                let base = 3 + c * (d + 1);
                let feats = f[base + 1..base + 1 + d]
                    .iter()
                    .map(|s| num(s, "feature"))
                    .collect::<Result<Vec<_>>>()?;
                candidates.push(Arm::new(
                    int(f[base], "candidate id")? as ArmId,
                    Vector::new(feats)?,
                ));
            }
            rows.push(ReplayRow {
                round: int(f[0], "round")?,
                logged_arm: int(f[1], "logged arm")? as ArmId,
                reward: num(f[2], "reward")?,
                candidates,
            });
        }
        ReplayLog::new(d, n, rows)
    }

    pub fn read_path(path: &Path) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReplayResult {
    /// Mean logged reward over matched rows; `None` when nothing matched.
    pub ctr: Option<f64>,
    pub matched: usize,
    pub rows: usize,
}

pub fn replay_evaluate(log: &ReplayLog, agent: &mut dyn Agent) -> Result<ReplayResult> {
    let mut matched = 0usize;
    let mut total = 0.0;
    for row in &log.rows {
        let choice = agent.choose(row.round, &row.candidates)?;
        if choice != row.logged_arm {
            continue;
        }
        let pos = position(&row.candidates, choice).ok_or(Error::NotACandidate(choice))?;
        agent.learn(row.round, &row.candidates[pos].features, row.reward)?;
        matched += 1;
        total += row.reward;
    }
    Ok(ReplayResult {
        ctr: (matched > 0).then(|| total / matched as f64),
        matched,
        rows: log.rows.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum LogReward {
    /// Click with probability `(1 + xᵀθ*) / 2`.
    #[default]
    Bernoulli,
    /// The simulator's Gaussian reward `xᵀθ* + η`.
    Linear,
}

#[derive(Debug, Clone)]
pub struct GeneratedLog {
    pub log: ReplayLog,
    /// Expected per-row reward of a uniformly random policy, averaged over
    /// the rows (the quantity replaying a random policy should recover).
    pub random_policy_value: f64,
}

/// Synthesize a uniformly-random-logger log of `rows` rounds from the simulator.
pub fn gen_log(config: &EnvConfig, rows: u64, reward: LogReward) -> Result<GeneratedLog> {
    let mut env = Environment::new(EnvConfig {
        horizon: rows,
        ..config.clone()
    })?;
    let mut logger = ChaCha8Rng::seed_from_u64(config.seed);
    logger.set_stream(7);
    let mut out = Vec::with_capacity(rows as usize);
    let mut value = 0.0;
    for t in 0..rows {
        if t > 0 {
            env.step_clock()?;
        }
        let candidates = env.sample_candidates(config.pool_per_round)?;
        let means = candidates
            .iter()
            .map(|c| {
                let m = env.expected_reward(&c.features)?;
                Ok(match reward {
                    LogReward::Bernoulli => ((1.0 + m) / 2.0).clamp(0.0, 1.0),
                    LogReward::Linear => m,
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        value += means.iter().sum::<f64>() / means.len() as f64;
        let pick = logger.random_range(0..candidates.len());
        let r = match reward {
            LogReward::Bernoulli => f64::from(logger.random_bool(means[pick]) as u8),
            LogReward::Linear => means[pick] + env.draw_noise(1)[0],
        };
        out.push(ReplayRow {
            round: t,
            logged_arm: candidates[pick].id,
            reward: r,
            candidates,
        });
    }
    Ok(GeneratedLog {
        log: ReplayLog::new(config.d, config.pool_per_round, out)?,
        random_policy_value: if rows == 0 { 0.0 } else { value / rows as f64 },
    })
}
