//! Comparison controllers: fixed-time cyclic, fixed-time penalty-sequenced,
//! and the zero-rate (longest queue first) model.

use serde::{Deserialize, Serialize};

use crate::domain::{QueueId, QueueState};
use crate::error::Result;
use crate::log::{DecisionRow, EpisodeAccumulator, RunLog};
use crate::penalty::{choose_green, PenaltyReport};
use crate::seeds::episode_seed;
use crate::sim::{Episode, IntersectionState, ScenarioConfig, SignalRule};

pub const DEFAULT_FIXED_GREEN: u32 = 30;
pub const DEFAULT_FIXED_RATES: (f64, f64) = (0.2, 0.2);

/// Which controller drives a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ControllerPolicy {
    /// Two learning agents choose rates and green lengths.
    Learned,
    /// Zero rates; only the green-length agent learns.
    LearnedNull,
    FixedCyclic {
        green: u32,
    },
    FixedPenalty {
        green: u32,
        rates: (f64, f64),
    },
    /// Zero rates with a fixed green.
    Null {
        green: u32,
    },
}

impl ControllerPolicy {
    /// Tag used in output paths and file headers.
    pub fn tag(&self) -> &'static str {
        match self {
            ControllerPolicy::Learned => "eatsc",
            ControllerPolicy::LearnedNull => "null",
            ControllerPolicy::FixedCyclic { .. } => "fixed-cyclic",
            ControllerPolicy::FixedPenalty { .. } => "fixed-penalty",
            ControllerPolicy::Null { .. } => "null",
        }
    }

    pub fn is_learned(&self) -> bool {
        matches!(self, ControllerPolicy::Learned | ControllerPolicy::LearnedNull)
    }
}

/// E, W, N, S round robin.
pub fn fixed_cyclic(phase: usize, green: u32) -> (QueueId, u32) {
    (QueueId::ALL[phase % 4], green)
}

/// Highest-penalty queue under fixed `(i_EW, i_NS)` rates.
pub fn fixed_penalty_sequence(state: &IntersectionState, rates: (f64, f64), green: u32) -> (PenaltyReport, u32) {
    let queues: [QueueState; 4] = state.queues.clone().map(|mut q| {
        q.interest_rate = if q.id.is_east_west() { rates.0 } else { rates.1 };
        q
    });
    (choose_green(&queues, state.clock), green)
}

/// Longest queue first: penalties at zero rate are vehicle counts.
pub fn null_model(state: &IntersectionState, green: u32) -> (PenaltyReport, u32) {
    fixed_penalty_sequence(state, (0.0, 0.0), green)
}

/// Runs `episodes` episodes of a non-learning policy.
///
/// # Panics
/// If called with a learned policy.
pub fn run_baseline(policy: ControllerPolicy, scenario: &ScenarioConfig, episodes: u32, seed: u64) -> Result<RunLog> {
    let mut log = RunLog::default();
    for e in 1..=episodes {
        let ep_seed = episode_seed(seed, e);
        let mut episode = Episode::new(scenario, ep_seed)?;
        let mut acc = EpisodeAccumulator::new(e, ep_seed);
        let mut phase = 0usize;
        while episode.remaining() > 0 {
            let state = episode.state();
            let (queue, rates, green) = match policy {
                ControllerPolicy::FixedCyclic { green } => {
                    let (q, g) = fixed_cyclic(phase, green);
                    (q, (0.0, 0.0), g)
                }
                ControllerPolicy::FixedPenalty { green, rates } => {
                    let (r, g) = fixed_penalty_sequence(state, rates, green);
                    (r.winner, rates, g)
                }
                ControllerPolicy::Null { green } => {
                    let (r, g) = null_model(state, green);
                    (r.winner, (0.0, 0.0), g)
                }
                ControllerPolicy::Learned | ControllerPolicy::LearnedNull => {
                    panic!("learned policies are run by the trainer")
                }
            };
            let green = green.min(episode.remaining() as u32);
            let before = episode.observe();
            let t = episode.clock();
            let out = episode.apply_decision(rates, green, SignalRule::Fixed(queue))?;
            log.decisions.push(DecisionRow {
                episode: e,
                decision_index: phase as u32,
                t,
                n_e: before.0[0],
                n_w: before.0[1],
                n_n: before.0[2],
                n_s: before.0[3],
                i_ew: rates.0,
                i_ns: rates.1,
                green_queue: out.green_queue,
                green_len: green,
                reward: out.reward,
                epsilon: 0.0,
                failed: out.failed,
            });
            acc.add(&out);
            phase += 1;
            if out.failed {
                break;
            }
        }
        acc.finish_into(&mut log);
    }
    Ok(log)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::DEFAULT_CAPACITY;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn state_with(queues: [QueueState; 4], clock: u64) -> IntersectionState {
        IntersectionState {
            clock,
            queues,
            green_queue: QueueId::E,
            green_remaining: 0,
        }
    }

    fn table1_state() -> IntersectionState {
        state_with(
            [
                QueueState::with_waits(QueueId::E, &[10], 10, 0.0),
                QueueState::new(QueueId::W, DEFAULT_CAPACITY),
                QueueState::with_waits(QueueId::N, &[8, 9], 10, 0.0),
                QueueState::new(QueueId::S, DEFAULT_CAPACITY),
            ],
            10,
        )
    }

    #[test]
    fn cyclic_sequence() {
        let seq: String = (0..8).map(|p| fixed_cyclic(p, 30).0.to_string()).collect();
        assert_eq!(seq, "EWNSEWNS");
        assert_eq!(fixed_cyclic(4, 30).0, QueueId::E);
        assert!((0..20).all(|p| fixed_cyclic(p, 25).1 == 25));
    }

    #[test]
    fn penalty_sequence_table1() {
        let s = table1_state();
        assert_eq!(fixed_penalty_sequence(&s, (0.1, 0.1), 30).0.winner, QueueId::N);
        assert_eq!(fixed_penalty_sequence(&s, (0.5, 0.5), 30).0.winner, QueueId::E);
        let empty = state_with(QueueId::ALL.map(|q| QueueState::new(q, DEFAULT_CAPACITY)), 0);
        let (r, g) = fixed_penalty_sequence(&empty, (0.2, 0.2), 30);
        assert_eq!((r.winner, r.tie, g), (QueueId::E, true, 30));
    }

    #[test]
    fn null_model_examples() {
        let (r, _) = null_model(&table1_state(), 30);
        assert_eq!(r.winner, QueueId::N);
        assert_eq!(r.penalty(QueueId::N), 2.0);
        let equal = state_with(QueueId::ALL.map(|q| QueueState::with_waits(q, &[1, 5, 9], 20, 0.3)), 20);
        let (r, _) = null_model(&equal, 30);
        assert_eq!((r.winner, r.tie), (QueueId::E, true));
    }

    #[test]
    fn null_model_is_count_argmax() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..1000 {
            let queues = QueueId::ALL.map(|q| {
                let n = rng.random_range(0..15);
                let waits: Vec<u64> = (0..n).map(|_| rng.random_range(0..100)).collect();
                QueueState::with_waits(q, &waits, 100, rng.random_range(0.0..0.3))
            });
            let counts = queues.each_ref().map(|q| q.len());
            let max = *counts.iter().max().unwrap();
            let expect = counts.iter().position(|&c| c == max).unwrap();
            let (r, _) = null_model(&state_with(queues, 100), 30);
            assert_eq!(r.winner.index(), expect);
        }
    }

    #[test]
    fn cyclic_run_has_period_four() {
        let scenario = ScenarioConfig {
            max_sim_time: 600,
            failure_enabled: false,
            ..Default::default()
        };
        let log = run_baseline(ControllerPolicy::FixedCyclic { green: 30 }, &scenario, 1, 5).unwrap();
        assert_eq!(log.decisions.len(), 20);
        for (k, row) in log.decisions.iter().enumerate() {
            assert_eq!(row.green_queue, QueueId::ALL[k % 4]);
        }
        assert_eq!(log.episodes.len(), 1);
        assert_eq!(log.episodes[0].non_failure_time, 600);
    }
}
