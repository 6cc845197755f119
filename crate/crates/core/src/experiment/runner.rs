//! Replicated runs and their on-disk layout.
//!
//! ```text
//! <out>/<variant>/config.txt           effective configuration
//! <out>/<variant>/episodes_all.csv     all replications, replicate column first
//! <out>/<variant>/rep<k>/decisions.csv
//! <out>/<variant>/rep<k>/episodes.csv
//! <out>/<variant>/rep<k>/queues.csv
//! <out>/<variant>/rep<k>/agent1.bin    rate agent (eatsc only)
//! <out>/<variant>/rep<k>/agent2.bin    green-length agent
//! ```
//!
//! Replication `k` (0-based) runs with seed `seed + k`. Replications run in
//! parallel, each writing its own directory; the merged file is written
//! afterwards in replication order.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use crate::agent::AgentPair;
use crate::baselines::{run_baseline, ControllerPolicy};
use crate::error::{Error, Result};
use crate::log::{write_csv_file, EpisodeSummary, RunLog};
use crate::nn::DuelingNet;
use crate::training::run_training;

#[derive(Debug, Clone)]
pub struct Replication {
    pub index: u32,
    pub seed: u64,
    pub log: RunLog,
    pub agents: Option<AgentPair>,
}

/// Row of `episodes_all.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergedEpisodeRow {
    pub replicate: u32,
    pub episode: u32,
    pub non_failure_time: u64,
    pub mean_reward: f64,
    pub mean_queue_size: f64,
    pub mean_waiting_time: f64,
    pub failed: bool,
    pub seed: u64,
}

impl MergedEpisodeRow {
    fn new(replicate: u32, e: &EpisodeSummary) -> Self {
        Self {
            replicate,
            episode: e.episode,
            non_failure_time: e.non_failure_time,
            mean_reward: e.mean_reward,
            mean_queue_size: e.mean_queue_size,
            mean_waiting_time: e.mean_waiting_time,
            failed: e.failed,
            seed: e.seed,
        }
    }
}

pub fn replication_seed(base: u64, index: u32) -> u64 {
    base.wrapping_add(u64::from(index))
}

/// Runs one replication of `policy` under `config`.
pub fn run_one(config: &RunConfig, policy: ControllerPolicy, index: u32) -> Result<Replication> {
    let seed = replication_seed(config.seed, index);
    let (log, agents) = match policy {
        ControllerPolicy::Learned | ControllerPolicy::LearnedNull => {
            let run = run_training(
                &config.agent,
                config.max_episode,
                &config.scenario,
                policy == ControllerPolicy::Learned,
                seed,
            )?;
            (run.log, Some(run.agents))
        }
        _ => (run_baseline(policy, &config.scenario, config.max_episode, seed)?, None),
    };
    Ok(Replication {
        index,
        seed,
        log,
        agents,
    })
}

/// All replications of `policy`, in index order.
pub fn run_replications(config: &RunConfig, policy: ControllerPolicy) -> Result<Vec<Replication>> {
    config.validate()?;
    (0..config.replications)
        .into_par_iter()
        .map(|k| run_one(config, policy, k))
        .collect()
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn write_net(path: &Path, net: &DuelingNet) -> Result<()> {
    fs::write(path, net.to_snapshot_bytes()).map_err(|e| Error::io(path, e))
}

fn header(tag: &str, rep: &Replication, base_seed: u64) -> String {
    format!(
        "seed={} variant={} replicate={} base_seed={}",
        rep.seed, tag, rep.index, base_seed
    )
}

/// Writes every artifact of a finished set of replications; returns the
/// variant directory.
pub fn write_outputs(config: &RunConfig, policy: ControllerPolicy, reps: &[Replication]) -> Result<PathBuf> {
    let tag = policy.tag();
    let dir = config.out_dir.join(tag);
    create_dir(&dir)?;
    let cfg_path = dir.join("config.txt");
    fs::write(&cfg_path, config.to_kv_string()).map_err(|e| Error::io(&cfg_path, e))?;

    reps.par_iter().try_for_each(|rep| -> Result<()> {
        let rdir = dir.join(format!("rep{}", rep.index));
        create_dir(&rdir)?;
        let h = header(tag, rep, config.seed);
        write_csv_file(&rdir.join("decisions.csv"), &h, &rep.log.decisions)?;
        write_csv_file(&rdir.join("episodes.csv"), &h, &rep.log.episodes)?;
        write_csv_file(&rdir.join("queues.csv"), &h, &rep.log.queues)?;
        if let Some(agents) = &rep.agents {
            if let Some(a) = &agents.rates {
                write_net(&rdir.join("agent1.bin"), &a.main)?;
            }
            write_net(&rdir.join("agent2.bin"), &agents.green.main)?;
        }
        Ok(())
    })?;

    let merged: Vec<MergedEpisodeRow> = reps
        .iter()
        .flat_map(|r| r.log.episodes.iter().map(move |e| MergedEpisodeRow::new(r.index, e)))
        .collect();
    write_csv_file(
        &dir.join("episodes_all.csv"),
        &format!(
            "variant={} base_seed={} replications={}",
            tag, config.seed, config.replications
        ),
        &merged,
    )?;
    Ok(dir)
}

/// The `train` command: learned variants only.
pub fn train(config: &RunConfig) -> Result<(PathBuf, Vec<Replication>)> {
    let policy = config.training_policy()?;
    let reps = run_replications(config, policy)?;
    let dir = write_outputs(config, policy, &reps)?;
    Ok((dir, reps))
}

/// The `baseline` command: fixed-time and zero-rate controllers.
pub fn baseline(config: &RunConfig) -> Result<(PathBuf, Vec<Replication>)> {
    let policy = config.baseline_policy()?;
    let reps = run_replications(config, policy)?;
    let dir = write_outputs(config, policy, &reps)?;
    Ok((dir, reps))
}
