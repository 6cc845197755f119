//! Double dueling DQN learners.
//!
//! Agent1 picks the `(i_EW, i_NS)` rate pair, Agent2 the green length. Both
//! see the same state and the same reward; each keeps its own networks and
//! replay memory because their actions live in different spaces.

use rand::Rng;

use crate::domain::{DecisionRecord, GREEN_ACTIONS, RATE_ACTIONS};
use crate::error::Result;
use crate::nn::{Architecture, DuelingNet, Gradients, Optimizer, OptimizerKind, STATE_WIDTH};
use crate::replay::PrioritizedMemory;

/// Learner hyperparameters; defaults are the published training table.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentConfig {
    pub hidden: usize,
    pub memory_size: usize,
    pub batch_size: usize,
    /// Train only once memory holds this many records.
    pub train_gate: usize,
    /// Training iterations between target-network refreshes.
    pub target_update: u64,
    pub gamma: f64,
    pub learning_rate: f64,
    pub alpha: f64,
    pub beta0: f64,
    pub epsilon_decrement: f64,
    pub epsilon_min: f64,
    pub optimizer: OptimizerKind,
    /// Rescale the batch gradient to at most this L2 norm.
    pub grad_clip: Option<f64>,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            hidden: crate::nn::DEFAULT_HIDDEN,
            memory_size: 500,
            batch_size: 32,
            train_gate: 500,
            target_update: 40,
            gamma: 0.95,
            learning_rate: 0.005,
            alpha: 0.6,
            beta0: 0.4,
            epsilon_decrement: 0.008,
            epsilon_min: 0.02,
            optimizer: OptimizerKind::Sgd,
            grad_clip: None,
        }
    }
}

/// ε after `decisions` signal switches: `max(1 - δ n, ε_min)`.
pub fn epsilon_after(decisions: u64, decrement: f64, min: f64) -> f64 {
    (1.0 - decrement * decisions as f64).max(min)
}

/// One decrement step from the current ε.
pub fn decay_epsilon(epsilon: f64, decrement: f64, min: f64) -> f64 {
    (epsilon - decrement).max(min)
}

/// Index of the largest value; the first one on ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// ε-greedy choice. Always consumes one uniform draw, plus one more when
/// exploring.
pub fn select_action<R: Rng + ?Sized>(net: &DuelingNet, state: &[f64], epsilon: f64, rng: &mut R) -> usize {
    assert!((0.0..=1.0).contains(&epsilon), "epsilon must lie in [0, 1]");
    let u: f64 = rng.random();
    if u < epsilon {
        rng.random_range(0..net.architecture().actions)
    } else {
        argmax(&net.forward(state))
    }
}

/// Double-DQN target: the main net picks the next action, the target net
/// values it. Terminal records bootstrap nothing.
pub fn compute_target(record: &DecisionRecord, main: &DuelingNet, target: &DuelingNet, gamma: f64) -> f64 {
    if record.terminal {
        return record.reward;
    }
    let next = argmax(&main.forward(&record.next_state));
    record.reward + gamma * target.forward(&record.next_state)[next]
}

/// One learner: main and target nets, memory, optimizer.
#[derive(Debug, Clone)]
pub struct Agent {
    pub main: DuelingNet,
    pub target: DuelingNet,
    pub memory: PrioritizedMemory,
    optimizer: Optimizer,
    iterations: u64,
}

/// Result of one training iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainStats {
    /// Importance-weighted mean squared TD error before the update.
    pub loss: f64,
    pub iteration: u64,
    pub target_refreshed: bool,
}

impl Agent {
    pub fn new(actions: usize, config: &AgentConfig, seed: u64) -> Self {
        let arch = Architecture::new(STATE_WIDTH, config.hidden, actions);
        let main = DuelingNet::new(arch, seed);
        let target = main.clone();
        Self {
            main,
            target,
            memory: PrioritizedMemory::new(config.memory_size, config.alpha),
            optimizer: Optimizer::new(config.optimizer, config.learning_rate),
            iterations: 0,
        }
    }

    pub fn actions(&self) -> usize {
        self.main.architecture().actions
    }

    pub fn iterations(&self) -> u64 {
        self.iterations
    }

    pub fn ready(&self, config: &AgentConfig) -> bool {
        self.memory.len() >= config.train_gate.max(config.batch_size)
    }

    /// Sample, fit the main net on the weighted batch, refresh sampled
    /// priorities from the updated net, and copy to the target every
    /// `target_update` iterations. `None` if memory is too small to sample.
    pub fn train<R: Rng + ?Sized>(
        &mut self,
        config: &AgentConfig,
        beta: f64,
        rng: &mut R,
    ) -> Result<Option<TrainStats>> {
        let Some(batch) = self.memory.sample(config.batch_size, beta, rng) else {
            return Ok(None);
        };
        let n = batch.records.len() as f64;
        let mut grads = Gradients::zeros(self.main.architecture());
        let mut loss = 0.0;
        for (record, &w) in batch.records.iter().zip(&batch.weights) {
            let y = compute_target(record, &self.main, &self.target, config.gamma);
            let (g, q) = self.main.backward(&record.state, record.action, y, w);
            loss += w * (y - q) * (y - q);
            grads.add_assign(&g);
        }
        grads.scale(1.0 / n);
        if let Some(max_norm) = config.grad_clip {
            let norm = grads.norm();
            if norm > max_norm {
                grads.scale(max_norm / norm);
            }
        }
        self.optimizer.apply(&mut self.main, &grads)?;

        let tds: Vec<f64> = batch
            .records
            .iter()
            .map(|r| {
                let y = compute_target(r, &self.main, &self.target, config.gamma);
                (y - self.main.forward(&r.state)[r.action]).abs()
            })
            .collect();
        self.memory.update_priorities(&batch.ids, &tds);

        self.iterations += 1;
        let refresh = config.target_update > 0 && self.iterations.is_multiple_of(config.target_update);
        if refresh {
            self.main.copy_into(&mut self.target)?;
        }
        Ok(Some(TrainStats {
            loss: loss / n,
            iteration: self.iterations,
            target_refreshed: refresh,
        }))
    }
}

/// The rate agent (absent for the zero-rate comparison model) and the
/// green-length agent.
#[derive(Debug, Clone)]
pub struct AgentPair {
    pub rates: Option<Agent>,
    pub green: Agent,
}

impl AgentPair {
    pub fn new(config: &AgentConfig, with_rate_agent: bool, seed: u64) -> Self {
        Self {
            rates: with_rate_agent.then(|| Agent::new(RATE_ACTIONS, config, crate::seeds::derive(seed, 1))),
            green: Agent::new(GREEN_ACTIONS, config, crate::seeds::derive(seed, 2)),
        }
    }

    /// Trains every agent whose memory passed the gate. Losses are reported
    /// as `(rate agent, green agent)`.
    pub fn train_step<R: Rng + ?Sized>(
        &mut self,
        config: &AgentConfig,
        beta: f64,
        rng: &mut R,
    ) -> Result<(Option<f64>, Option<f64>)> {
        let mut l1 = None;
        if let Some(a) = self.rates.as_mut() {
            if a.ready(config) {
                l1 = a.train(config, beta, rng)?.map(|s| s.loss);
            }
        }
        let mut l2 = None;
        if self.green.ready(config) {
            l2 = self.green.train(config, beta, rng)?.map(|s| s.loss);
        }
        Ok((l1, l2))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn record(reward: f64, terminal: bool) -> DecisionRecord {
        DecisionRecord {
            state: [0.2, 0.1, 0.4, 0.3],
            action: 1,
            reward,
            next_state: [0.1, 0.1, 0.2, 0.2],
            terminal,
        }
    }

    /// Net whose Q-values equal the given constants for every input.
    fn constant_net(q: &[f64]) -> DuelingNet {
        let arch = Architecture::new(STATE_WIDTH, 1, q.len());
        let mut params = vec![0.0; arch.param_count()];
        // hidden unit, value head and advantage weights stay zero;
        // advantage biases carry the values, value bias restores the mean.
        let mean = q.iter().sum::<f64>() / q.len() as f64;
        let n = params.len();
        params[n - q.len()..].copy_from_slice(q);
        params[STATE_WIDTH + 1 + 1] = mean;
        DuelingNet::from_params(arch, params).unwrap()
    }

    #[test]
    fn constant_net_helper() {
        let net = constant_net(&[1.0, -2.0, 5.0]);
        let q = net.forward(&[0.3; 4]);
        for (a, b) in q.iter().zip([1.0, -2.0, 5.0]) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn epsilon_schedule() {
        assert_eq!(epsilon_after(0, 0.008, 0.02), 1.0);
        assert!((epsilon_after(50, 0.008, 0.02) - 0.6).abs() < 1e-12);
        assert_eq!(epsilon_after(200, 0.008, 0.02), 0.02);
        assert_eq!(decay_epsilon(0.025, 0.008, 0.02), 0.02);
        assert!((decay_epsilon(1.0, 0.008, 0.02) - 0.992).abs() < 1e-15);
    }

    #[test]
    fn greedy_picks_argmax() {
        let net = constant_net(&[0.0, 1.0, 3.0, 2.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..100 {
            assert_eq!(select_action(&net, &[0.0; 4], 0.0, &mut rng), 2);
        }
    }

    #[test]
    fn full_exploration_is_uniform() {
        let net = constant_net(&[0.0; 6]);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let draws = 100_000;
        let mut counts = [0u32; 6];
        for _ in 0..draws {
            counts[select_action(&net, &[0.0; 4], 1.0, &mut rng)] += 1;
        }
        let p = 1.0 / 6.0;
        let sigma = (draws as f64 * p * (1.0 - p)).sqrt();
        for c in counts {
            assert!((f64::from(c) - draws as f64 * p).abs() < 3.0 * sigma, "{counts:?}");
        }
    }

    #[test]
    fn target_examples() {
        let main = constant_net(&[0.0, 1.0, 9.0]);
        let target = constant_net(&[5.0, 4.0, 3.0]);
        let r = record(1.0, false);
        assert!((compute_target(&r, &main, &target, 0.95) - 3.85).abs() < 1e-12);
        assert_eq!(compute_target(&r, &main, &target, 0.0), 1.0);
        assert_eq!(compute_target(&record(-4.0, true), &main, &target, 0.95), -4.0);
    }

    #[test]
    fn double_dqn_uses_main_argmax_target_value() {
        // main prefers action 0, target prefers action 1
        let main = constant_net(&[2.0, 1.0]);
        let target = constant_net(&[10.0, 20.0]);
        let r = record(0.0, false);
        let y = compute_target(&r, &main, &target, 1.0);
        assert!((y - 10.0).abs() < 1e-12);
        // vanilla DQN would give max target = 20
        assert!((y - 20.0).abs() > 1.0);
    }

    fn fitted_memory(net: &DuelingNet, config: &AgentConfig, n: usize) -> PrioritizedMemory {
        let mut m = PrioritizedMemory::new(config.memory_size, config.alpha);
        for k in 0..n {
            let s = [0.1 * k as f64 % 1.0, 0.2, 0.3, 0.05 * k as f64 % 1.0];
            let a = k % net.architecture().actions;
            m.push(DecisionRecord {
                state: s,
                action: a,
                reward: net.forward(&s)[a],
                next_state: [0.0; 4],
                terminal: true,
            });
        }
        m
    }

    #[test]
    fn zero_residual_batch_changes_nothing() {
        let config = AgentConfig {
            memory_size: 40,
            train_gate: 40,
            ..Default::default()
        };
        let mut agent = Agent::new(6, &config, 3);
        agent.memory = fitted_memory(&agent.main, &config, 40);
        let before = agent.main.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let stats = agent.train(&config, 0.4, &mut rng).unwrap().unwrap();
        assert_eq!(stats.loss, 0.0);
        assert_eq!(agent.main, before);
    }

    #[test]
    fn target_refresh_after_forty_iterations() {
        let config = AgentConfig {
            memory_size: 64,
            train_gate: 32,
            ..Default::default()
        };
        let mut agent = Agent::new(9, &config, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for k in 0..64 {
            agent.memory.push(DecisionRecord {
                state: [k as f64 / 64.0, 0.5, 0.1, 0.2],
                action: k % 9,
                reward: (k % 7) as f64 - 3.0,
                next_state: [0.3, 0.2, (k % 5) as f64 / 5.0, 0.1],
                terminal: k % 11 == 0,
            });
        }
        let initial_target = agent.target.clone();
        for i in 1..=40 {
            let s = agent.train(&config, 0.4, &mut rng).unwrap().unwrap();
            assert_eq!(s.target_refreshed, i == 40);
            if i < 40 {
                assert_eq!(agent.target, initial_target);
                assert_ne!(agent.main, agent.target);
            }
        }
        assert_eq!(agent.target, agent.main);
    }

    #[test]
    fn priorities_refreshed_from_updated_net() {
        let config = AgentConfig {
            memory_size: 50,
            train_gate: 32,
            ..Default::default()
        };
        let mut agent = Agent::new(6, &config, 8);
        for k in 0..50 {
            agent.memory.push(DecisionRecord {
                state: [(k % 10) as f64 / 10.0, 0.2, 0.3, 0.4],
                action: k % 6,
                reward: (k % 4) as f64,
                next_state: [0.5, 0.1, 0.0, (k % 3) as f64 / 3.0],
                terminal: false,
            });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut probe = rng.clone();
        let batch = agent.memory.sample(config.batch_size, 0.4, &mut probe).unwrap();
        agent.train(&config, 0.4, &mut rng).unwrap().unwrap();
        for (id, r) in batch.ids.iter().zip(&batch.records) {
            let y = compute_target(r, &agent.main, &agent.target, config.gamma);
            let td = (y - agent.main.forward(&r.state)[r.action]).abs();
            assert_eq!(agent.memory.priority(*id), Some(td));
        }
    }

    #[test]
    fn single_record_td_shrinks() {
        let config = AgentConfig {
            memory_size: 1,
            batch_size: 1,
            train_gate: 1,
            ..Default::default()
        };
        let mut agent = Agent::new(6, &config, 21);
        let id = agent.memory.push(DecisionRecord {
            state: [0.3, 0.6, 0.2, 0.9],
            action: 4,
            reward: 5.0,
            next_state: [0.0; 4],
            terminal: true,
        });
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut tds = Vec::new();
        for _ in 0..200 {
            agent.train(&config, 1.0, &mut rng).unwrap();
            tds.push(agent.memory.priority(id).unwrap());
        }
        assert!(tds.windows(2).all(|w| w[1] <= w[0]), "TD must not grow");
        assert!(tds[199] < 0.05 * tds[0]);
    }

    #[test]
    fn pair_respects_gate() {
        let config = AgentConfig {
            memory_size: 40,
            batch_size: 8,
            train_gate: 40,
            ..Default::default()
        };
        let mut pair = AgentPair::new(&config, true, 9);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let rec = record(1.0, false);
        for _ in 0..39 {
            pair.rates.as_mut().unwrap().memory.push(rec.clone());
            pair.green.memory.push(rec.clone());
        }
        assert_eq!(pair.train_step(&config, 0.4, &mut rng).unwrap(), (None, None));
        pair.rates.as_mut().unwrap().memory.push(rec.clone());
        pair.green.memory.push(rec);
        let (a, b) = pair.train_step(&config, 0.4, &mut rng).unwrap();
        assert!(a.is_some() && b.is_some());
    }
}
