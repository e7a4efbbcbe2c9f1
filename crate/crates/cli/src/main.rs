use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use dlinucb::harness::{
    gen_log, replay_evaluate, report_dir, run_experiment, write_outputs, LogReward, ReplayLog,
    RunConfig,
};
use dlinucb::AgentSpec;

#[derive(Parser)]
#[command(
    name = "dlinucb",
    version,
    about = "Dynamic linear UCB simulator and evaluator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a simulation described by a JSON config and write traces.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `n_seeds` from the config.
        #[arg(long)]
        seeds: Option<usize>,
        /// Overrides `output_dir` from the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate an agent offline on a logged CSV.
    Replay {
        #[arg(long)]
        log: PathBuf,
        #[arg(long, default_value = "dlinucb")]
        agent: String,
        /// Noise scale used by the agent's confidence bounds.
        #[arg(long, default_value_t = 0.05)]
        sigma: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Recompute regret and detection summaries from a simulation directory.
    Report {
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a uniformly-random-logger log from the simulator.
    GenLog {
        /// JSON run config; only its `env` block is used. Defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 10_000)]
        rows: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = RewardArg::Bernoulli)]
        reward: RewardArg,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum RewardArg {
    Bernoulli,
    Linear,
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Simulate { config, seeds, out } => {
            let mut cfg = RunConfig::from_json_file(&config)
                .with_context(|| format!("loading config {}", config.display()))?;
            if let Some(n) = seeds {
                cfg.n_seeds = n;
            }
            if let Some(dir) = out {
                cfg.output_dir = dir;
            }
            cfg.validate()?;
            let output = run_experiment(&cfg)?;
            write_outputs(&output, &cfg.output_dir)
                .with_context(|| format!("writing to {}", cfg.output_dir.display()))?;
            print!("{}", output.summary.table());
        }
        Command::Replay {
            log,
            agent,
            sigma,
            seed,
        } => {
            let log = ReplayLog::read_path(&log)
                .with_context(|| format!("reading log {}", log.display()))?;
            let mut a = AgentSpec::named(&agent).build(log.dim, sigma, &[], seed)?;
            let res = replay_evaluate(&log, a.as_mut())?;
            match res.ctr {
                Some(ctr) => println!("ctr={ctr:.6} matched={} rows={}", res.matched, res.rows),
                None => println!("ctr=undefined matched=0 rows={}", res.rows),
            }
        }
        Command::Report { out } => {
            let rep = report_dir(&out)?;
            println!("seeds: {}", rep.seeds.len());
            for a in &rep.regret {
                println!("{:<16} {:>12.4} +/- {:.4}", a.agent, a.mean, a.std);
            }
            for (agent, d) in &rep.detection {
                let lat: Vec<String> = d
                    .latencies
                    .iter()
                    .map(|l| l.map_or("-".into(), |v| v.to_string()))
                    .collect();
                println!(
                    "{agent} seed {}: latencies [{}] false_alarms {}",
                    d.seed,
                    lat.join(", "),
                    d.false_alarms
                );
            }
            fs::write(out.join("report.json"), serde_json::to_string_pretty(&rep)?)?;
        }
        Command::GenLog {
            config,
            rows,
            out,
            reward,
        } => {
            let env = match config {
                Some(p) => RunConfig::from_json_file(&p)?.env,
                None => Default::default(),
            };
            if rows == 0 {
                bail!("--rows must be positive");
            }
            let reward = match reward {
                RewardArg::Bernoulli => LogReward::Bernoulli,
                RewardArg::Linear => LogReward::Linear,
            };
            let g = gen_log(&env, rows, reward)?;
            g.log.write_csv(fs::File::create(&out)?)?;
            println!(
                "wrote {rows} rows to {}; random policy value {:.6}",
                out.display(),
                g.random_policy_value
            );
        }
    }
    Ok(())
}
