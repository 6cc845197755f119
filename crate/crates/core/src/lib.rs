//! Interest-rate driven adaptive traffic signal control.
//!
//! Waiting vehicles accrue a continuously compounded penalty; the queue owed
//! the most gets the next green. Two double dueling DQN agents learn the
//! interest rates and green lengths on a native one-second queue simulator.

pub mod agent;
pub mod baselines;
pub mod domain;
pub mod error;
pub mod experiment;
pub mod log;
pub mod nn;
pub mod penalty;
pub mod replay;
pub mod seeds;
pub mod sim;
pub mod training;

pub use domain::{decode_action1, decode_action2, DecisionRecord, QueueId, QueueState, StateVector, Vehicle};
pub use error::{Error, Result};
pub use penalty::{
    boundary_rate, choose_green, penalty_difference, queue_penalty, update_wait, vehicle_penalty, PenaltyReport,
};
pub use sim::{Episode, ScenarioConfig, SignalRule, StepOutcome};
