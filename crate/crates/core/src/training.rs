//! The two-agent training loop.
//!
//! At every decision point both agents act on the same observation, the
//! simulator applies the rate pair (penalty argmax picks the green queue)
//! for the chosen green length, the transition goes into both memories with
//! each agent's own action, and each agent trains once its memory passes
//! the gate. ε falls linearly with the number of decisions; β rises
//! linearly with the episode index and is 1 in the final episode.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::agent::{epsilon_after, select_action, AgentConfig, AgentPair};
use crate::domain::{decode_action1, decode_action2, DecisionRecord};
use crate::error::Result;
use crate::log::{DecisionRow, EpisodeAccumulator, RunLog};
use crate::seeds::{derive, episode_seed};
use crate::sim::{Episode, ScenarioConfig, SignalRule};

#[derive(Debug, Clone)]
pub struct TrainingRun {
    pub agents: AgentPair,
    pub log: RunLog,
    pub decisions: u64,
    pub final_epsilon: f64,
}

/// β used throughout episode `episode` (1-based) of `max_episode`.
pub fn beta_for_episode(beta0: f64, episode: u32, max_episode: u32) -> f64 {
    if max_episode <= 1 {
        return 1.0;
    }
    let progress = f64::from(episode.saturating_sub(1)) / f64::from(max_episode - 1);
    beta0 + (1.0 - beta0) * progress.min(1.0)
}

/// Trains an agent pair for `max_episode` episodes. With
/// `with_rate_agent = false` all rates are zero and only the green-length
/// agent learns.
pub fn run_training(
    config: &AgentConfig,
    max_episode: u32,
    scenario: &ScenarioConfig,
    with_rate_agent: bool,
    seed: u64,
) -> Result<TrainingRun> {
    let mut agents = AgentPair::new(config, with_rate_agent, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(derive(seed, 3));
    let mut log = RunLog::default();
    let mut decisions = 0u64;

    for e in 1..=max_episode {
        let ep_seed = episode_seed(seed, e);
        let mut episode = Episode::new(scenario, ep_seed)?;
        let mut acc = EpisodeAccumulator::new(e, ep_seed);
        let beta = beta_for_episode(config.beta0, e, max_episode);
        let mut index = 0u32;

        while episode.remaining() > 0 {
            let epsilon = epsilon_after(decisions, config.epsilon_decrement, config.epsilon_min);
            let observed = episode.observe();
            let state = observed.normalized(scenario.capacity);

            let rate_action = agents
                .rates
                .as_ref()
                .map(|a| select_action(&a.main, &state, epsilon, &mut rng));
            let green_action = select_action(&agents.green.main, &state, epsilon, &mut rng);
            let rates = match rate_action {
                Some(a) => decode_action1(a)?,
                None => (0.0, 0.0),
            };
            let green = decode_action2(green_action)?.min(episode.remaining() as u32);

            let t = episode.clock();
            let out = episode.apply_decision(rates, green, SignalRule::Penalty)?;
            let next_state = out.next_state.normalized(scenario.capacity);
            let record = DecisionRecord {
                state,
                action: green_action,
                reward: out.reward as f64,
                next_state,
                terminal: out.failed,
            };
            if let (Some(agent), Some(a)) = (agents.rates.as_mut(), rate_action) {
                agent.memory.push(DecisionRecord {
                    action: a,
                    ..record.clone()
                });
            }
            agents.green.memory.push(record);
            agents.train_step(config, beta, &mut rng)?;
            decisions += 1;

            log.decisions.push(DecisionRow {
                episode: e,
                decision_index: index,
                t,
                n_e: observed.0[0],
                n_w: observed.0[1],
                n_n: observed.0[2],
                n_s: observed.0[3],
                i_ew: rates.0,
                i_ns: rates.1,
                green_queue: out.green_queue,
                green_len: green,
                reward: out.reward,
                epsilon,
                failed: out.failed,
            });
            acc.add(&out);
            index += 1;
            if out.failed {
                break;
            }
        }
        acc.finish_into(&mut log);
    }

    Ok(TrainingRun {
        agents,
        log,
        decisions,
        final_epsilon: epsilon_after(decisions, config.epsilon_decrement, config.epsilon_min),
    })
}
