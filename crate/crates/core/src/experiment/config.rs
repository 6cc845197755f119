//! Flat `key = value` run configuration.
//!
//! Blank lines and lines starting with `#` are ignored. Keys follow the
//! training-table names; see [`RunConfig::KEYS`] for the full list.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::agent::AgentConfig;
use crate::baselines::{ControllerPolicy, DEFAULT_FIXED_GREEN, DEFAULT_FIXED_RATES};
use crate::domain::QueueId;
use crate::error::{Error, Result};
use crate::nn::OptimizerKind;
use crate::sim::ScenarioConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    Eatsc,
    Null,
    FixedCyclic,
    FixedPenalty,
}

impl Variant {
    pub fn tag(self) -> &'static str {
        match self {
            Variant::Eatsc => "eatsc",
            Variant::Null => "null",
            Variant::FixedCyclic => "fixed-cyclic",
            Variant::FixedPenalty => "fixed-penalty",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "eatsc" => Ok(Variant::Eatsc),
            "null" => Ok(Variant::Null),
            "fixed-cyclic" => Ok(Variant::FixedCyclic),
            "fixed-penalty" => Ok(Variant::FixedPenalty),
            other => Err(Error::Config(format!(
                "unknown variant `{other}` (expected eatsc, null, fixed-cyclic or fixed-penalty)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub scenario: ScenarioConfig,
    pub agent: AgentConfig,
    pub max_episode: u32,
    pub variant: Variant,
    pub fixed_green: u32,
    pub fixed_rates: (f64, f64),
    pub replications: u32,
    pub seed: u64,
    pub out_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            scenario: ScenarioConfig::default(),
            agent: AgentConfig::default(),
            max_episode: 150,
            variant: Variant::Eatsc,
            fixed_green: DEFAULT_FIXED_GREEN,
            fixed_rates: DEFAULT_FIXED_RATES,
            replications: 1,
            seed: 0,
            out_dir: PathBuf::from("out"),
        }
    }
}

fn num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("`{key}`: cannot parse `{value}`")))
}

fn flag(key: &str, value: &str) -> Result<bool> {
    match value.trim() {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(Error::Config(format!("`{key}`: expected true or false, got `{value}`"))),
    }
}

fn optimizer(value: &str) -> Result<OptimizerKind> {
    match value.trim() {
        "sgd" => Ok(OptimizerKind::Sgd),
        "momentum" => Ok(OptimizerKind::Momentum { beta: 0.9 }),
        "adam" => Ok(OptimizerKind::adam()),
        other => Err(Error::Config(format!(
            "unknown optimizer `{other}` (sgd, momentum, adam)"
        ))),
    }
}

fn optimizer_name(kind: OptimizerKind) -> &'static str {
    match kind {
        OptimizerKind::Sgd => "sgd",
        OptimizerKind::Momentum { .. } => "momentum",
        OptimizerKind::Adam { .. } => "adam",
    }
}

impl RunConfig {
    pub const KEYS: &'static [&'static str] = &[
        "max_episode",
        "max_simulation_seconds",
        "memory_size",
        "minibatch_size",
        "target_update_frequency",
        "greedy_decrement",
        "min_greedy",
        "reward_decay",
        "learning_rate",
        "prioritization_alpha",
        "prioritization_beta",
        "hidden_units",
        "training_gate",
        "optimizer",
        "gradient_clip",
        "flow_e_mean",
        "flow_e_std",
        "flow_w_mean",
        "flow_w_std",
        "flow_n_mean",
        "flow_n_std",
        "flow_s_mean",
        "flow_s_std",
        "flow_ew_mean",
        "flow_ew_std",
        "flow_ns_mean",
        "flow_ns_std",
        "capacity",
        "saturation_headway",
        "lost_time",
        "failure",
        "fixed_green",
        "fixed_rate_ew",
        "fixed_rate_ns",
        "replications",
        "seed",
        "variant",
        "out",
    ];

    /// Applies one setting. `training_gate` tracks `memory_size` unless set
    /// explicitly; callers parsing whole files should use [`RunConfig::parse`].
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let a = &mut self.agent;
        let s = &mut self.scenario;
        let flow = |q: QueueId| q.index();
        match key.trim() {
            "max_episode" => self.max_episode = num(key, value)?,
            "max_simulation_seconds" => s.max_sim_time = num(key, value)?,
            "memory_size" => a.memory_size = num(key, value)?,
            "minibatch_size" => a.batch_size = num(key, value)?,
            "target_update_frequency" | "main_net_update_frequency" => a.target_update = num(key, value)?,
            "greedy_decrement" => a.epsilon_decrement = num(key, value)?,
            "min_greedy" => a.epsilon_min = num(key, value)?,
            "reward_decay" => a.gamma = num(key, value)?,
            "learning_rate" => a.learning_rate = num(key, value)?,
            "prioritization_alpha" => a.alpha = num(key, value)?,
            "prioritization_beta" => a.beta0 = num(key, value)?,
            "hidden_units" => a.hidden = num(key, value)?,
            "training_gate" => a.train_gate = num(key, value)?,
            "optimizer" => a.optimizer = optimizer(value)?,
            "gradient_clip" => {
                let c: f64 = num(key, value)?;
                a.grad_clip = (c > 0.0).then_some(c);
            }
            "flow_e_mean" => s.flows[flow(QueueId::E)].mean = num(key, value)?,
            "flow_e_std" => s.flows[flow(QueueId::E)].std = num(key, value)?,
            "flow_w_mean" => s.flows[flow(QueueId::W)].mean = num(key, value)?,
            "flow_w_std" => s.flows[flow(QueueId::W)].std = num(key, value)?,
            "flow_n_mean" => s.flows[flow(QueueId::N)].mean = num(key, value)?,
            "flow_n_std" => s.flows[flow(QueueId::N)].std = num(key, value)?,
            "flow_s_mean" => s.flows[flow(QueueId::S)].mean = num(key, value)?,
            "flow_s_std" => s.flows[flow(QueueId::S)].std = num(key, value)?,
            "flow_ew_mean" => {
                let v = num(key, value)?;
                s.flows[0].mean = v;
                s.flows[1].mean = v;
            }
            "flow_ew_std" => {
                let v = num(key, value)?;
                s.flows[0].std = v;
                s.flows[1].std = v;
            }
            "flow_ns_mean" => {
                let v = num(key, value)?;
                s.flows[2].mean = v;
                s.flows[3].mean = v;
            }
            "flow_ns_std" => {
                let v = num(key, value)?;
                s.flows[2].std = v;
                s.flows[3].std = v;
            }
            "capacity" => s.capacity = num(key, value)?,
            "saturation_headway" => s.saturation_headway = num(key, value)?,
            "lost_time" => s.lost_time = num(key, value)?,
            "failure" => s.failure_enabled = flag(key, value)?,
            "fixed_green" => self.fixed_green = num(key, value)?,
            "fixed_rate_ew" => self.fixed_rates.0 = num(key, value)?,
            "fixed_rate_ns" => self.fixed_rates.1 = num(key, value)?,
            "replications" => self.replications = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "variant" => self.variant = value.parse()?,
            "out" => self.out_dir = PathBuf::from(value.trim()),
            other => return Err(Error::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    /// Parses a whole config text on top of the defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut gate_set = false;
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", n + 1)))?;
            cfg.set(key, value)
                .map_err(|e| Error::Config(format!("line {}: {e}", n + 1)))?;
            gate_set |= key.trim() == "training_gate";
        }
        if !gate_set {
            cfg.agent.train_gate = cfg.agent.memory_size;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        let a = &self.agent;
        let check = |ok: bool, msg: &str| if ok { Ok(()) } else { Err(Error::Config(msg.into())) };
        check(self.replications >= 1, "replications must be at least 1")?;
        check(self.max_episode >= 1, "max_episode must be at least 1")?;
        check(self.fixed_green >= 1, "fixed_green must be positive")?;
        check(
            self.fixed_rates.0 >= 0.0 && self.fixed_rates.1 >= 0.0,
            "fixed rates must be nonnegative",
        )?;
        check(a.memory_size >= 1, "memory_size must be positive")?;
        check(a.batch_size >= 1, "minibatch_size must be positive")?;
        check(
            a.batch_size <= a.memory_size,
            "minibatch_size cannot exceed memory_size",
        )?;
        check(a.train_gate <= a.memory_size, "training_gate cannot exceed memory_size")?;
        check(a.hidden >= 1, "hidden_units must be positive")?;
        check((0.0..=1.0).contains(&a.gamma), "reward_decay must lie in [0, 1]")?;
        check(a.learning_rate > 0.0, "learning_rate must be positive")?;
        check(a.alpha >= 0.0, "prioritization_alpha must be nonnegative")?;
        check((0.0..=1.0).contains(&a.beta0), "prioritization_beta must lie in [0, 1]")?;
        check(a.epsilon_decrement >= 0.0, "greedy_decrement must be nonnegative")?;
        check((0.0..=1.0).contains(&a.epsilon_min), "min_greedy must lie in [0, 1]")?;
        Ok(())
    }

    /// Controller for the `train` command.
    pub fn training_policy(&self) -> Result<ControllerPolicy> {
        match self.variant {
            Variant::Eatsc => Ok(ControllerPolicy::Learned),
            Variant::Null => Ok(ControllerPolicy::LearnedNull),
            v => Err(Error::Config(format!(
                "variant `{v}` does not learn; use the baseline command"
            ))),
        }
    }

    /// Controller for the `baseline` command.
    pub fn baseline_policy(&self) -> Result<ControllerPolicy> {
        match self.variant {
            Variant::FixedCyclic => Ok(ControllerPolicy::FixedCyclic {
                green: self.fixed_green,
            }),
            Variant::FixedPenalty => Ok(ControllerPolicy::FixedPenalty {
                green: self.fixed_green,
                rates: self.fixed_rates,
            }),
            Variant::Null => Ok(ControllerPolicy::Null {
                green: self.fixed_green,
            }),
            Variant::Eatsc => Err(Error::Config(
                "variant `eatsc` must be trained; use the train command".into(),
            )),
        }
    }

    /// The effective configuration in the same `key = value` form.
    pub fn to_kv_string(&self) -> String {
        let s = &self.scenario;
        let a = &self.agent;
        let mut lines = vec![
            format!("max_episode = {}", self.max_episode),
            format!("max_simulation_seconds = {}", s.max_sim_time),
            format!("memory_size = {}", a.memory_size),
            format!("minibatch_size = {}", a.batch_size),
            format!("target_update_frequency = {}", a.target_update),
            format!("greedy_decrement = {:?}", a.epsilon_decrement),
            format!("min_greedy = {:?}", a.epsilon_min),
            format!("reward_decay = {:?}", a.gamma),
            format!("learning_rate = {:?}", a.learning_rate),
            format!("prioritization_alpha = {:?}", a.alpha),
            format!("prioritization_beta = {:?}", a.beta0),
            format!("hidden_units = {}", a.hidden),
            format!("training_gate = {}", a.train_gate),
            format!("optimizer = {}", optimizer_name(a.optimizer)),
            format!("gradient_clip = {:?}", a.grad_clip.unwrap_or(0.0)),
        ];
        for q in QueueId::ALL {
            let f = s.flows[q.index()];
            let name = q.to_string().to_lowercase();
            lines.push(format!("flow_{name}_mean = {:?}", f.mean));
            lines.push(format!("flow_{name}_std = {:?}", f.std));
        }
        lines.extend([
            format!("capacity = {}", s.capacity),
            format!("saturation_headway = {:?}", s.saturation_headway),
            format!("lost_time = {}", s.lost_time),
            format!("failure = {}", s.failure_enabled),
            format!("fixed_green = {}", self.fixed_green),
            format!("fixed_rate_ew = {:?}", self.fixed_rates.0),
            format!("fixed_rate_ns = {:?}", self.fixed_rates.1),
            format!("replications = {}", self.replications),
            format!("seed = {}", self.seed),
            format!("variant = {}", self.variant),
            format!("out = {}", self.out_dir.display()),
        ]);
        lines.join("\n") + "\n"
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_training_table() {
        let c = RunConfig::parse("").unwrap();
        assert_eq!(c.max_episode, 150);
        assert_eq!(c.scenario.max_sim_time, 10_000);
        assert_eq!(c.agent.memory_size, 500);
        assert_eq!(c.agent.batch_size, 32);
        assert_eq!(c.agent.target_update, 40);
        assert_eq!(c.agent.epsilon_decrement, 0.008);
        assert_eq!(c.agent.epsilon_min, 0.02);
        assert_eq!(c.agent.gamma, 0.95);
        assert_eq!(c.agent.learning_rate, 0.005);
        assert_eq!(c.agent.alpha, 0.6);
        assert_eq!(c.agent.beta0, 0.4);
        assert_eq!(c.agent.hidden, 20);
        assert_eq!(c.agent.train_gate, 500);
        assert_eq!(c.scenario.capacity, 110);
    }

    #[test]
    fn parses_overrides_and_comments() {
        let text = "# shortened\nmax_episode = 120\nmax_simulation_seconds=6000\n\nflow_ew_mean = 350\nflow_ns_mean = 700\nvariant = null\nmemory_size = 200\n";
        let c = RunConfig::parse(text).unwrap();
        assert_eq!(c.max_episode, 120);
        assert_eq!(c.scenario.max_sim_time, 6000);
        assert_eq!(c.scenario.flows[1].mean, 350.0);
        assert_eq!(c.scenario.flows[3].mean, 700.0);
        assert_eq!(c.variant, Variant::Null);
        assert_eq!(c.agent.train_gate, 200);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(RunConfig::parse("bogus = 1").is_err());
        assert!(RunConfig::parse("max_episode").is_err());
        assert!(RunConfig::parse("max_episode = ten").is_err());
        assert!(RunConfig::parse("replications = 0").is_err());
        assert!(RunConfig::parse("flow_e_mean = -5").is_err());
        assert!(RunConfig::parse("variant = adaptive").is_err());
        assert!(RunConfig::parse("saturation_headway = 0").is_err());
    }

    #[test]
    fn effective_config_reparses() {
        let mut c =
            RunConfig::parse("flow_n_std = 12.5\noptimizer = adam\ngradient_clip = 10\nfailure = false").unwrap();
        c.seed = 991;
        let back = RunConfig::parse(&c.to_kv_string()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn policies_by_command() {
        let mut c = RunConfig::default();
        assert_eq!(c.training_policy().unwrap(), ControllerPolicy::Learned);
        assert!(c.baseline_policy().is_err());
        c.variant = Variant::FixedCyclic;
        assert!(c.training_policy().is_err());
        assert_eq!(
            c.baseline_policy().unwrap(),
            ControllerPolicy::FixedCyclic { green: 30 }
        );
        c.variant = Variant::Null;
        assert_eq!(c.training_policy().unwrap(), ControllerPolicy::LearnedNull);
        assert_eq!(c.baseline_policy().unwrap(), ControllerPolicy::Null { green: 30 });
    }
}
