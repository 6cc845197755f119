//! Run logs: per-decision rows, per-episode summaries, per-queue metrics,
//! and their CSV form.
//!
//! Every CSV file starts with one `#` comment line carrying the run's seed
//! and variant tag, followed by a header row.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::domain::QueueId;
use crate::error::{Error, Result};
use crate::sim::{QueueStepStats, StepOutcome};

/// One row of `decisions.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionRow {
    pub episode: u32,
    pub decision_index: u32,
    /// Clock at the decision.
    pub t: u64,
    #[serde(rename = "n_E")]
    pub n_e: u32,
    #[serde(rename = "n_W")]
    pub n_w: u32,
    #[serde(rename = "n_N")]
    pub n_n: u32,
    #[serde(rename = "n_S")]
    pub n_s: u32,
    #[serde(rename = "i_EW")]
    pub i_ew: f64,
    #[serde(rename = "i_NS")]
    pub i_ns: f64,
    pub green_queue: QueueId,
    pub green_len: u32,
    pub reward: i64,
    pub epsilon: f64,
    pub failed: bool,
}

/// One row of `episodes.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSummary {
    pub episode: u32,
    /// Seconds before the first failing tick, or the full run length.
    pub non_failure_time: u64,
    pub mean_reward: f64,
    /// Time-averaged vehicles per queue.
    pub mean_queue_size: f64,
    /// Vehicle-weighted time average of the current wait of queued vehicles.
    pub mean_waiting_time: f64,
    pub failed: bool,
    pub seed: u64,
}

/// One row of `queues.csv`: the same metrics broken out per queue.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueueSummary {
    pub episode: u32,
    pub queue: QueueId,
    pub mean_queue_size: f64,
    pub mean_waiting_time: f64,
    pub arrivals: u64,
    pub passed: u64,
    pub discharged: u64,
}

/// All rows produced by one run (training or baseline).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunLog {
    pub decisions: Vec<DecisionRow>,
    pub episodes: Vec<EpisodeSummary>,
    pub queues: Vec<QueueSummary>,
}

impl RunLog {
    /// Queue rows of a given queue, in episode order.
    pub fn queue_rows(&self, q: QueueId) -> impl Iterator<Item = &QueueSummary> {
        self.queues.iter().filter(move |r| r.queue == q)
    }
}

/// Folds step outcomes into episode metrics.
#[derive(Debug, Clone)]
pub struct EpisodeAccumulator {
    episode: u32,
    seed: u64,
    decisions: u64,
    reward_sum: i64,
    elapsed: u64,
    failed: bool,
    stats: [QueueStepStats; 4],
}

impl EpisodeAccumulator {
    pub fn new(episode: u32, seed: u64) -> Self {
        Self {
            episode,
            seed,
            decisions: 0,
            reward_sum: 0,
            elapsed: 0,
            failed: false,
            stats: Default::default(),
        }
    }

    pub fn add(&mut self, out: &StepOutcome) {
        self.decisions += 1;
        self.reward_sum += out.reward;
        self.elapsed += out.elapsed;
        self.failed |= out.failed;
        for (acc, s) in self.stats.iter_mut().zip(&out.queue_stats) {
            acc.merge(s);
        }
    }

    pub fn decisions(&self) -> u64 {
        self.decisions
    }

    pub fn summary(&self) -> EpisodeSummary {
        let count: u64 = self.stats.iter().map(|s| s.count_seconds).sum();
        let wait: f64 = self.stats.iter().map(|s| s.wait_seconds).sum();
        EpisodeSummary {
            episode: self.episode,
            non_failure_time: if self.failed {
                self.elapsed.saturating_sub(1)
            } else {
                self.elapsed
            },
            mean_reward: ratio(self.reward_sum as f64, self.decisions as f64),
            mean_queue_size: ratio(count as f64, 4.0 * self.elapsed as f64),
            mean_waiting_time: ratio(wait, count as f64),
            failed: self.failed,
            seed: self.seed,
        }
    }

    pub fn queue_summaries(&self) -> Vec<QueueSummary> {
        QueueId::ALL
            .iter()
            .zip(&self.stats)
            .map(|(&queue, s)| QueueSummary {
                episode: self.episode,
                queue,
                mean_queue_size: ratio(s.count_seconds as f64, self.elapsed as f64),
                mean_waiting_time: ratio(s.wait_seconds, s.count_seconds as f64),
                arrivals: s.arrivals,
                passed: s.passed,
                discharged: s.discharged,
            })
            .collect()
    }

    pub fn finish_into(&self, log: &mut RunLog) {
        log.episodes.push(self.summary());
        log.queues.extend(self.queue_summaries());
    }
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

/// Writes `# <comment>`, a header row, then `rows`.
pub fn write_csv<W: Write, T: Serialize>(out: W, comment: &str, rows: &[T]) -> Result<()> {
    let mut out = out;
    writeln!(out, "# {comment}").map_err(|e| Error::io("<csv>", e))?;
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

/// Reads a file written by [`write_csv`]; returns the comment and rows.
pub fn read_csv<R: std::io::Read, T: DeserializeOwned>(input: R) -> Result<(String, Vec<T>)> {
    let mut reader = BufReader::new(input);
    let mut first = String::new();
    reader.read_line(&mut first).map_err(|e| Error::io("<csv>", e))?;
    let comment = first
        .strip_prefix("# ")
        .ok_or_else(|| Error::Parse("csv file must start with a `# ` comment line".into()))?
        .trim_end()
        .to_string();
    let mut r = csv::Reader::from_reader(reader);
    let rows = r.deserialize().collect::<std::result::Result<Vec<T>, _>>()?;
    Ok((comment, rows))
}

pub fn write_csv_file<T: Serialize>(path: &Path, comment: &str, rows: &[T]) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    write_csv(BufWriter::new(f), comment, rows).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

pub fn read_csv_file<T: DeserializeOwned>(path: &Path) -> Result<(String, Vec<T>)> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(f)
}
