//! Multi-seed, multi-agent simulation runs with cumulative pseudo-regret.
//!
//! All agents of a run play against the same environment in lockstep: each
//! round they see the same candidate set and the same per-candidate noise
//! draws, and regret is measured against the best expected reward among the
//! presented candidates.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::agents::{Agent, AgentSpec};
use crate::arm::{position, Arm, ArmId};
use crate::env::{hex_prefix, EnvConfig, EnvTrajectory, Environment};
use crate::error::{invalid, Error, Result};
use crate::harness::detection::{detection_report, CreationLog, DetectionReport};
use crate::master::StepEvents;

/// Environment variable capping the number of seeds run in parallel.
pub const THREADS_ENV: &str = "DLINUCB_THREADS";

/// Name of the built-in policy that always plays the best expected arm.
pub const BEST_ARM_AGENT: &str = "best";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunAgent {
    #[serde(flatten)]
    pub spec: AgentSpec,
    /// Column label in outputs; defaults to the agent name.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

impl RunAgent {
    pub fn named(name: &str) -> Self {
        Self {
            spec: AgentSpec::named(name),
            label: None,
        }
    }

    pub fn label(&self) -> &str {
        self.label.as_deref().unwrap_or(&self.spec.name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(default)]
    pub env: EnvConfig,
    pub agents: Vec<RunAgent>,
    #[serde(default = "one")]
    pub n_seeds: usize,
    #[serde(default = "default_out")]
    pub output_dir: PathBuf,
    #[serde(default = "yes")]
    pub emit_per_round: bool,
}

fn one() -> usize {
    1
}

fn yes() -> bool {
    true
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

impl RunConfig {
    pub fn new(env: EnvConfig, agents: &[&str], n_seeds: usize) -> Self {
        Self {
            env,
            agents: agents.iter().map(|n| RunAgent::named(n)).collect(),
            n_seeds,
            output_dir: default_out(),
            emit_per_round: true,
        }
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let cfg: Self = serde_json::from_str(&fs::read_to_string(path)?)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.agents.is_empty() {
            return Err(invalid("at least one agent is required"));
        }
        if self.n_seeds == 0 {
            return Err(invalid("n_seeds must be >= 1"));
        }
        self.env.validate()
    }

    /// Seeds used by this run: `env.seed, env.seed + 1, ...`.
    pub fn seeds(&self) -> Vec<u64> {
        (0..self.n_seeds as u64)
            .map(|i| self.env.seed + i)
            .collect()
    }
}

/// One row of the per-round trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: u64,
    pub agent: String,
    pub seed: u64,
    pub arm: ArmId,
    pub reward: f64,
    pub regret_inc: f64,
    pub regret_cum: f64,
    pub n_slaves: usize,
    pub created: bool,
    pub discarded: Vec<u64>,
}

#[derive(Debug, Clone)]
pub struct AgentRun {
    pub label: String,
    pub records: Vec<RoundRecord>,
    /// dLinUCB step events (empty for other agents).
    pub events: Vec<StepEvents>,
    pub candidate_hash: String,
}

impl AgentRun {
    pub fn final_regret(&self) -> f64 {
        self.records.last().map_or(0.0, |r| r.regret_cum)
    }

    pub fn creation_rounds(&self) -> Vec<u64> {
        self.records
            .iter()
            .filter(|r| r.created)
            .map(|r| r.round)
            .collect()
    }

    /// Mean per-round regret over rounds `[from, to)`.
    pub fn mean_regret(&self, from: u64, to: u64) -> f64 {
        let xs: Vec<f64> = self
            .records
            .iter()
            .filter(|r| r.round >= from && r.round < to)
            .map(|r| r.regret_inc)
            .collect();
        if xs.is_empty() {
            return 0.0;
        }
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

#[derive(Debug, Clone)]
pub struct SeedResult {
    pub seed: u64,
    pub trajectory: EnvTrajectory,
    pub agents: Vec<AgentRun>,
    /// Detection reports for every agent that can create models.
    pub detection: Vec<(String, DetectionReport)>,
}

impl SeedResult {
    pub fn agent(&self, label: &str) -> Option<&AgentRun> {
        self.agents.iter().find(|a| a.label == label)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentSummary {
    pub agent: String,
    pub mean: f64,
    pub std: f64,
    pub final_regret: Vec<f64>,
}

impl AgentSummary {
    pub fn from_finals(agent: &str, finals: Vec<f64>) -> Self {
        let (mean, std) = mean_std(&finals);
        Self {
            agent: agent.to_string(),
            mean,
            std,
            final_regret: finals,
        }
    }
}

/// One row of the accumulated-regret table: a `(σ, Δ, S)` setting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub sigma: f64,
    pub delta: f64,
    #[serde(rename = "S")]
    pub period: u64,
    pub rho: f64,
    pub horizon: u64,
    pub n_seeds: usize,
    pub agents: Vec<AgentSummary>,
}

impl Summary {
    pub fn agent(&self, label: &str) -> Option<&AgentSummary> {
        self.agents.iter().find(|a| a.agent == label)
    }

    pub fn table(&self) -> String {
        let mut s = format!(
            "(sigma, delta, S) = ({}, {}, {})  rho={} T={} seeds={}\n",
            self.sigma, self.delta, self.period, self.rho, self.horizon, self.n_seeds
        );
        for a in &self.agents {
            s.push_str(&format!(
                "{:<16} {:>10.2} ± {:.2}\n",
                a.agent, a.mean, a.std
            ));
        }
        s
    }
}

/// Mean and sample standard deviation (zero for fewer than two values).
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub config: RunConfig,
    pub seeds: Vec<SeedResult>,
    pub summary: Summary,
}

/// `max_{a ∈ candidates} xₐᵀθ* − x_chosenᵀθ*`.
pub fn regret_increment(env: &Environment, candidates: &[Arm], chosen: ArmId) -> Result<f64> {
    let pos = position(candidates, chosen).ok_or(Error::NotACandidate(chosen))?;
    let (_, best) = env.best_expected(candidates)?;
    let got = env.expected_reward(&candidates[pos].features)?;
    Ok((best - got).max(0.0))
}

enum Player {
    Learner(Box<dyn Agent>),
    Best,
}

fn agent_seed(seed: u64, index: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (index as u64 + 1)
}

/// Run every agent of `cfg` on the environment seeded with `seed`.
pub fn run_seed(cfg: &RunConfig, seed: u64) -> Result<SeedResult> {
    let env_cfg = EnvConfig {
        seed,
        ..cfg.env.clone()
    };
    let mut env = Environment::new(env_cfg.clone())?;
    let change_rounds = env_cfg.change_rounds();

    let mut players = Vec::with_capacity(cfg.agents.len());
    for (i, a) in cfg.agents.iter().enumerate() {
        players.push(if a.spec.name == BEST_ARM_AGENT {
            Player::Best
        } else {
            Player::Learner(a.spec.build(
                env_cfg.d,
                env_cfg.sigma,
                &change_rounds,
                agent_seed(seed, i),
            )?)
        });
    }
    let mut runs: Vec<AgentRun> = cfg
        .agents
        .iter()
        .map(|a| AgentRun {
            label: a.label().to_string(),
            records: Vec::with_capacity(env_cfg.horizon as usize),
            events: Vec::new(),
            candidate_hash: String::new(),
        })
        .collect();
    let mut hashers: Vec<Sha256> = players.iter().map(|_| Sha256::new()).collect();

    for t in 0..env_cfg.horizon {
        if t > 0 {
            env.step_clock()?;
        }
        let candidates = env.sample_candidates(env_cfg.pool_per_round)?;
        let noise = env.draw_noise(candidates.len());
        let (best_id, best_val) = env.best_expected(&candidates)?;

        for ((player, run), hasher) in players.iter_mut().zip(&mut runs).zip(&mut hashers) {
            for c in &candidates {
                hasher.update((c.id as u64).to_le_bytes());
            }
            let chosen = match player {
                Player::Learner(agent) => agent.choose(t, &candidates)?,
                Player::Best => best_id,
            };
            let pos = position(&candidates, chosen).ok_or(Error::NotACandidate(chosen))?;
            let x = &candidates[pos].features;
            let expected = env.expected_reward(x)?;
            let reward = expected + noise[pos];
            let regret_inc = (best_val - expected).max(0.0);

            let (events, n_slaves) = match player {
                Player::Learner(agent) => (agent.learn(t, x, reward)?, agent.n_models()),
                Player::Best => (None, 0),
            };
            let prev = run.records.last().map_or(0.0, |r| r.regret_cum);
            run.records.push(RoundRecord {
                round: t,
                agent: run.label.clone(),
                seed,
                arm: chosen,
                reward,
                regret_inc,
                regret_cum: prev + regret_inc,
                n_slaves,
                created: events.as_ref().is_some_and(|e| e.created),
                discarded: events
                    .as_ref()
                    .map(|e| e.discarded.clone())
                    .unwrap_or_default(),
            });
            if let Some(ev) = events {
                run.events.push(ev);
            }
        }
    }
    for (run, hasher) in runs.iter_mut().zip(hashers) {
        run.candidate_hash = hex_prefix(&hasher.finalize(), 16);
    }

    let trajectory = env.trajectory();
    let mut detection = Vec::new();
    for (run, a) in runs.iter().zip(&cfg.agents) {
        if a.spec.name == "dlinucb" {
            let log = CreationLog {
                seed,
                config_hash: trajectory.config_hash.clone(),
                creation_rounds: run.creation_rounds(),
            };
            detection.push((run.label.clone(), detection_report(&trajectory, &log)?));
        }
    }
    Ok(SeedResult {
        seed,
        trajectory,
        agents: runs,
        detection,
    })
}

fn thread_cap() -> Option<usize> {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
}

/// Run all seeds (in parallel, capped by `DLINUCB_THREADS`) and summarize.
pub fn run_experiment(cfg: &RunConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let seeds = cfg.seeds();
    let work =
        || -> Result<Vec<SeedResult>> { seeds.par_iter().map(|&s| run_seed(cfg, s)).collect() };
    let results = match thread_cap() {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| invalid(format!("thread pool: {e}")))?
            .install(work)?,
        None => work()?,
    };
    let summary = summarize(cfg, &results);
    Ok(ExperimentOutput {
        config: cfg.clone(),
        seeds: results,
        summary,
    })
}

pub fn summarize(cfg: &RunConfig, results: &[SeedResult]) -> Summary {
    let agents = cfg
        .agents
        .iter()
        .map(|a| {
            let finals = results
                .iter()
                .filter_map(|r| r.agent(a.label()))
                .map(AgentRun::final_regret)
                .collect();
            AgentSummary::from_finals(a.label(), finals)
        })
        .collect();
    Summary {
        sigma: cfg.env.sigma,
        delta: cfg.env.delta,
        period: cfg.env.period,
        rho: cfg.env.rho,
        horizon: cfg.env.horizon,
        n_seeds: results.len(),
        agents,
    }
}

/// Lossless 17-significant-digit rendering used in every CSV output.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub const TRACE_HEADER: [&str; 10] = [
    "round",
    "agent",
    "seed",
    "arm",
    "reward",
    "regret_inc",
    "regret_cum",
    "n_slaves",
    "created",
    "discarded",
];

pub fn write_trace_csv<W: Write>(out: W, records: &[RoundRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRACE_HEADER)?;
    for r in records {
        let discarded = r
            .discarded
            .iter()
            .map(u64::to_string)
            .collect::<Vec<_>>()
            .join(";");
        w.write_record([
            r.round.to_string(),
            r.agent.clone(),
            r.seed.to_string(),
            r.arm.to_string(),
            fmt_f64(r.reward),
            fmt_f64(r.regret_inc),
            fmt_f64(r.regret_cum),
            r.n_slaves.to_string(),
            (r.created as u8).to_string(),
            discarded,
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn parse<T: std::str::FromStr>(field: Option<&str>, what: &str) -> Result<T> {
    field
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::Inconsistent(format!("bad or missing trace field '{what}'")))
}

pub fn read_trace_csv(path: &Path) -> Result<Vec<RoundRecord>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header != TRACE_HEADER {
        return Err(Error::Inconsistent(format!(
            "{}: unexpected trace header {header:?}",
            path.display()
        )));
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let discarded = match rec.get(9) {
            Some("") | None => Vec::new(),
            Some(s) => s
                .split(';')
                .map(|v| parse(Some(v), "discarded"))
                .collect::<Result<_>>()?,
        };
        out.push(RoundRecord {
            round: parse(rec.get(0), "round")?,
            agent: rec.get(1).unwrap_or_default().to_string(),
            seed: parse(rec.get(2), "seed")?,
            arm: parse(rec.get(3), "arm")?,
            reward: parse(rec.get(4), "reward")?,
            regret_inc: parse(rec.get(5), "regret_inc")?,
            regret_cum: parse(rec.get(6), "regret_cum")?,
            n_slaves: parse(rec.get(7), "n_slaves")?,
            created: parse::<u8>(rec.get(8), "created")? == 1,
            discarded,
        });
    }
    Ok(out)
}

pub fn trace_path(dir: &Path, seed: u64) -> PathBuf {
    dir.join(format!("trace_seed{seed}.csv"))
}

pub fn trajectory_path(dir: &Path, seed: u64) -> PathBuf {
    dir.join(format!("env_seed{seed}.json"))
}

/// Write per-seed traces, step events, environment trajectories, the
/// summary and detection reports under `dir`.
pub fn write_outputs(output: &ExperimentOutput, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut detection = Vec::new();
    for s in &output.seeds {
        fs::write(
            trajectory_path(dir, s.seed),
            serde_json::to_string_pretty(&s.trajectory)?,
        )?;
        if output.config.emit_per_round {
            let rows: Vec<RoundRecord> = s
                .agents
                .iter()
                .flat_map(|a| a.records.iter().cloned())
                .collect();
            write_trace_csv(fs::File::create(trace_path(dir, s.seed))?, &rows)?;
            for a in s.agents.iter().filter(|a| !a.events.is_empty()) {
                let mut f = std::io::BufWriter::new(fs::File::create(
                    dir.join(format!("events_{}_seed{}.jsonl", a.label, s.seed)),
                )?);
                for ev in &a.events {
                    writeln!(f, "{}", ev.to_json_line()?)?;
                }
            }
        }
        for (label, rep) in &s.detection {
            detection.push(serde_json::json!({ "agent": label, "report": rep }));
        }
    }
    fs::write(
        dir.join("summary.json"),
        serde_json::to_string_pretty(&output.summary)?,
    )?;
    fs::write(
        dir.join("detection.json"),
        serde_json::to_string_pretty(&detection)?,
    )?;
    Ok(())
}
