//! One-second tick simulation of a four-group signalized intersection.
//!
//! Each episode draws one hourly volume per queue from its normal flow
//! distribution, then every tick each queue receives an arrival with
//! probability `volume / 3600`. The green queue discharges one vehicle per
//! saturation headway. Four uniforms are drawn per tick regardless of the
//! signal state, so two controllers fed the same seed see identical arrivals.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::domain::{QueueId, QueueState, StateVector, Vehicle, DEFAULT_CAPACITY};
use crate::error::{Error, Result};
use crate::penalty::{choose_green, update_wait, PenaltyReport};

/// Hourly volume distribution for one queue.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowDist {
    pub mean: f64,
    pub std: f64,
}

impl FlowDist {
    pub const fn new(mean: f64, std: f64) -> Self {
        Self { mean, std }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    /// Indexed by [`QueueId::index`].
    pub flows: [FlowDist; 4],
    pub capacity: usize,
    /// Seconds of green per discharged vehicle.
    pub saturation_headway: f64,
    /// Seconds at the start of a switched green during which nothing moves.
    pub lost_time: u32,
    pub max_sim_time: u64,
    /// End the episode as soon as a queue reaches capacity.
    pub failure_enabled: bool,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self::unbalanced(300.0, 600.0)
    }
}

impl ScenarioConfig {
    /// E/W share one mean, N/S another; std is 10 % of the mean.
    pub fn unbalanced(ew_mean: f64, ns_mean: f64) -> Self {
        let ew = FlowDist::new(ew_mean, ew_mean / 10.0);
        let ns = FlowDist::new(ns_mean, ns_mean / 10.0);
        Self {
            flows: [ew, ew, ns, ns],
            capacity: DEFAULT_CAPACITY,
            saturation_headway: 2.0,
            lost_time: 0,
            max_sim_time: 10_000,
            failure_enabled: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (q, f) in QueueId::ALL.iter().zip(&self.flows) {
            if !(f.mean > 0.0 && f.mean.is_finite()) {
                return Err(Error::Config(format!("flow mean for {q} must be positive")));
            }
            if !(f.std >= 0.0 && f.std.is_finite()) {
                return Err(Error::Config(format!("flow std for {q} must be nonnegative")));
            }
        }
        if !(self.saturation_headway > 0.0 && self.saturation_headway.is_finite()) {
            return Err(Error::Config("saturation headway must be positive".into()));
        }
        if self.capacity == 0 {
            return Err(Error::Config("capacity must be positive".into()));
        }
        if self.max_sim_time == 0 {
            return Err(Error::Config("max simulation time must be positive".into()));
        }
        Ok(())
    }
}

/// Snapshot of the whole intersection.
#[derive(Debug, Clone, PartialEq)]
pub struct IntersectionState {
    pub clock: u64,
    pub queues: [QueueState; 4],
    pub green_queue: QueueId,
    pub green_remaining: u32,
}

/// How the next green queue is picked.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SignalRule {
    /// Highest penalty under the rates just applied.
    Penalty,
    /// A controller-chosen queue.
    Fixed(QueueId),
}

/// Per-queue bookkeeping for one decision step.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct QueueStepStats {
    /// Vehicles that joined the queue.
    pub arrivals: u64,
    /// Vehicles that met an empty green queue and never stopped.
    pub passed: u64,
    pub discharged: u64,
    /// Sum over ticks of the queue length.
    pub count_seconds: u64,
    /// Sum over ticks of the total wait of queued vehicles.
    pub wait_seconds: f64,
}

impl QueueStepStats {
    pub fn merge(&mut self, other: &Self) {
        self.arrivals += other.arrivals;
        self.passed += other.passed;
        self.discharged += other.discharged;
        self.count_seconds += other.count_seconds;
        self.wait_seconds += other.wait_seconds;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub green_queue: QueueId,
    /// Present when the penalty rule picked the queue.
    pub report: Option<PenaltyReport>,
    pub next_state: StateVector,
    /// Vehicles removed from the queues, net of arrivals.
    pub reward: i64,
    pub failed: bool,
    /// Seconds actually simulated; shorter than the green on failure.
    pub elapsed: u64,
    pub queue_stats: [QueueStepStats; 4],
}

/// A running episode: state plus its private arrival generator.
#[derive(Debug, Clone)]
pub struct Episode {
    config: ScenarioConfig,
    state: IntersectionState,
    rng: ChaCha8Rng,
    volumes: [f64; 4],
    failed: bool,
}

impl Episode {
    /// Empty intersection at t = 0, green on E with nothing left to run.
    pub fn new(config: &ScenarioConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut volumes = [0.0; 4];
        for (v, f) in volumes.iter_mut().zip(&config.flows) {
            let normal = Normal::new(f.mean, f.std).map_err(|e| Error::Config(e.to_string()))?;
            *v = normal.sample(&mut rng).max(0.0);
        }
        let queues = QueueId::ALL.map(|q| QueueState::new(q, config.capacity));
        Ok(Self {
            config: config.clone(),
            state: IntersectionState {
                clock: 0,
                queues,
                green_queue: QueueId::E,
                green_remaining: 0,
            },
            rng,
            volumes,
            failed: false,
        })
    }

    pub fn state(&self) -> &IntersectionState {
        &self.state
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.config
    }

    pub fn clock(&self) -> u64 {
        self.state.clock
    }

    pub fn failed(&self) -> bool {
        self.failed
    }

    /// Hourly volumes drawn for this episode.
    pub fn volumes(&self) -> [f64; 4] {
        self.volumes
    }

    /// Seconds left before `max_sim_time`.
    pub fn remaining(&self) -> u64 {
        self.config.max_sim_time.saturating_sub(self.state.clock)
    }

    pub fn observe(&self) -> StateVector {
        StateVector(self.state.queues.each_ref().map(|q| q.len() as u32))
    }

    pub fn observe_normalized(&self) -> [f64; 4] {
        self.observe().normalized(self.config.capacity)
    }

    /// Places a vehicle directly into a queue; for scripted scenarios.
    pub fn inject(&mut self, queue: QueueId, vehicle: Vehicle) {
        self.state.queues[queue.index()].vehicles.push_back(vehicle);
    }

    /// Sets `(i_EW, i_NS)`, picks the green queue and runs it for `green` seconds.
    ///
    /// # Panics
    /// If `green` is zero.
    pub fn apply_decision(&mut self, rates: (f64, f64), green: u32, rule: SignalRule) -> Result<StepOutcome> {
        if self.failed {
            return Err(Error::EpisodeFailed);
        }
        assert!(green > 0, "green duration must be positive");

        for q in self.state.queues.iter_mut() {
            q.interest_rate = if q.id.is_east_west() { rates.0 } else { rates.1 };
        }
        let (winner, report) = match rule {
            SignalRule::Penalty => {
                let r = choose_green(&self.state.queues, self.state.clock);
                (r.winner, Some(r))
            }
            SignalRule::Fixed(q) => (q, None),
        };

        let switched = winner != self.state.green_queue;
        if switched {
            self.end_green(self.state.green_queue);
            self.state.green_queue = winner;
        }
        let lost = if switched { self.config.lost_time } else { 0 };

        let before = self.observe();
        let arrival_p = self.volumes.map(|v| (v / 3600.0).min(1.0));
        let headway = self.config.saturation_headway;
        let mut stats = [QueueStepStats::default(); 4];
        let mut credit = 0.0_f64;
        let mut elapsed = 0;
        self.state.green_remaining = green;

        for tick in 0..green {
            self.state.clock += 1;
            self.state.green_remaining -= 1;
            elapsed += 1;
            let now = self.state.clock;
            let moving = tick >= lost;

            for q in QueueId::ALL {
                let u: f64 = self.rng.random();
                if u < arrival_p[q.index()] {
                    let queue = &mut self.state.queues[q.index()];
                    if q == winner && moving && queue.is_empty() {
                        stats[q.index()].passed += 1;
                    } else {
                        queue.vehicles.push_back(Vehicle::new(now));
                        stats[q.index()].arrivals += 1;
                    }
                }
            }

            if moving {
                credit += 1.0;
                let queue = &mut self.state.queues[winner.index()];
                if queue.is_empty() {
                    credit = credit.min(headway);
                } else if credit >= headway {
                    queue.vehicles.pop_front();
                    credit -= headway;
                    stats[winner.index()].discharged += 1;
                }
            }

            let mut reached_capacity = false;
            for (q, s) in self.state.queues.iter().zip(stats.iter_mut()) {
                s.count_seconds += q.len() as u64;
                s.wait_seconds += q
                    .vehicles
                    .iter()
                    .map(|v| update_wait(v, now, q.cycle_start))
                    .sum::<f64>();
                reached_capacity |= q.len() >= q.capacity;
            }
            if self.config.failure_enabled && reached_capacity {
                self.failed = true;
                break;
            }
        }

        let after = self.observe();
        let reward = before
            .0
            .iter()
            .zip(after.0.iter())
            .map(|(&b, &a)| i64::from(b) - i64::from(a))
            .sum();
        Ok(StepOutcome {
            green_queue: winner,
            report,
            next_state: after,
            reward,
            failed: self.failed,
            elapsed,
            queue_stats: stats,
        })
    }

    /// Red begins for `queue`: fold each vehicle's wait into its carried
    /// wait and open a new cycle.
    fn end_green(&mut self, queue: QueueId) {
        let now = self.state.clock;
        let q = &mut self.state.queues[queue.index()];
        let start = q.cycle_start;
        for v in q.vehicles.iter_mut() {
            v.carried_wait = update_wait(v, now, start);
        }
        q.cycle_start = now;
    }
}
