//! Dueling Q-network: one ReLU hidden layer feeding a scalar value head and
//! an advantage head, combined as `Q = V + A - mean(A)`.
//!
//! Parameters live in one flat vector so that gradient steps, target copies
//! and snapshots are plain slice operations. Layout, in order:
//! hidden weights (`hidden x inputs`, row per unit), hidden biases, value
//! weights, value bias, advantage weights (`actions x hidden`, row per
//! action), advantage biases.

use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub const STATE_WIDTH: usize = 4;
pub const DEFAULT_HIDDEN: usize = 20;

/// Snapshot file magic.
pub const SNAPSHOT_MAGIC: [u8; 8] = *b"EATSCNN\0";
pub const SNAPSHOT_VERSION: u32 = 1;
/// Bytes before the first parameter.
pub const SNAPSHOT_HEADER_LEN: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Architecture {
    pub inputs: usize,
    pub hidden: usize,
    pub actions: usize,
}

impl Architecture {
    pub fn new(inputs: usize, hidden: usize, actions: usize) -> Self {
        assert!(inputs > 0 && hidden > 0 && actions > 0, "all widths must be positive");
        Self {
            inputs,
            hidden,
            actions,
        }
    }

    pub fn param_count(&self) -> usize {
        let Self {
            inputs,
            hidden,
            actions,
        } = *self;
        hidden * inputs + hidden + hidden + 1 + actions * hidden + actions
    }

    fn offsets(&self) -> Offsets {
        let Self {
            inputs,
            hidden,
            actions,
        } = *self;
        let w1 = 0;
        let b1 = w1 + hidden * inputs;
        let wv = b1 + hidden;
        let bv = wv + hidden;
        let wa = bv + 1;
        let ba = wa + actions * hidden;
        Offsets {
            w1,
            b1,
            wv,
            bv,
            wa,
            ba,
            end: ba + actions,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Offsets {
    w1: usize,
    b1: usize,
    wv: usize,
    bv: usize,
    wa: usize,
    ba: usize,
    end: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DuelingNet {
    arch: Architecture,
    seed: u64,
    params: Vec<f64>,
}

/// Same shape as a net's parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients(pub Vec<f64>);

impl Gradients {
    pub fn zeros(arch: Architecture) -> Self {
        Gradients(vec![0.0; arch.param_count()])
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        assert_eq!(self.0.len(), other.0.len(), "gradient shape mismatch");
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a += b;
        }
    }

    pub fn scale(&mut self, c: f64) {
        self.0.iter_mut().for_each(|g| *g *= c);
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|g| g * g).sum::<f64>().sqrt()
    }
}

/// Intermediate values of one forward pass.
struct Activations {
    pre: Vec<f64>,
    hidden: Vec<f64>,
    q: Vec<f64>,
}

impl DuelingNet {
    /// Seeded init: every layer uniform in `±1/sqrt(fan_in)`.
    pub fn new(arch: Architecture, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let o = arch.offsets();
        let mut params = vec![0.0; o.end];
        let hidden_bound = 1.0 / (arch.inputs as f64).sqrt();
        let head_bound = 1.0 / (arch.hidden as f64).sqrt();
        for (i, p) in params.iter_mut().enumerate() {
            let bound = if i < o.wv { hidden_bound } else { head_bound };
            *p = rng.random_range(-bound..=bound);
        }
        Self { arch, seed, params }
    }

    pub fn zeros(arch: Architecture) -> Self {
        Self {
            arch,
            seed: 0,
            params: vec![0.0; arch.param_count()],
        }
    }

    /// Builds a net from an explicit parameter vector in the documented layout.
    pub fn from_params(arch: Architecture, params: Vec<f64>) -> Result<Self> {
        if params.len() != arch.param_count() {
            return Err(Error::Shape(format!(
                "expected {} parameters, got {}",
                arch.param_count(),
                params.len()
            )));
        }
        Ok(Self { arch, seed: 0, params })
    }

    pub fn architecture(&self) -> Architecture {
        self.arch
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn is_finite(&self) -> bool {
        self.params.iter().all(|p| p.is_finite())
    }

    fn activations(&self, state: &[f64]) -> Activations {
        assert_eq!(
            state.len(),
            self.arch.inputs,
            "state width {} does not match network input width {}",
            state.len(),
            self.arch.inputs
        );
        let Architecture {
            inputs,
            hidden,
            actions,
        } = self.arch;
        let o = self.arch.offsets();
        let p = &self.params;

        let pre: Vec<f64> = (0..hidden)
            .map(|h| {
                let row = &p[o.w1 + h * inputs..o.w1 + (h + 1) * inputs];
                p[o.b1 + h] + row.iter().zip(state).map(|(w, x)| w * x).sum::<f64>()
            })
            .collect();
        let act: Vec<f64> = pre.iter().map(|&z| z.max(0.0)).collect();

        let value = p[o.bv] + p[o.wv..o.wv + hidden].iter().zip(&act).map(|(w, h)| w * h).sum::<f64>();
        let adv: Vec<f64> = (0..actions)
            .map(|a| {
                let row = &p[o.wa + a * hidden..o.wa + (a + 1) * hidden];
                p[o.ba + a] + row.iter().zip(&act).map(|(w, h)| w * h).sum::<f64>()
            })
            .collect();
        let mean = adv.iter().sum::<f64>() / actions as f64;
        let q = adv.iter().map(|a| value + a - mean).collect();
        Activations { pre, hidden: act, q }
    }

    /// Q-values for every action.
    ///
    /// # Panics
    /// If `state` does not match the input width.
    pub fn forward(&self, state: &[f64]) -> Vec<f64> {
        self.activations(state).q
    }

    /// Gradient of `weight * (target - Q(state, action))^2` with respect to
    /// every parameter, plus the current `Q(state, action)`.
    pub fn backward(&self, state: &[f64], action: usize, target: f64, weight: f64) -> (Gradients, f64) {
        let Architecture {
            inputs,
            hidden,
            actions,
        } = self.arch;
        assert!(action < actions, "action {action} out of range for {actions} actions");
        assert!(weight >= 0.0, "importance weight must be nonnegative");
        let o = self.arch.offsets();
        let p = &self.params;
        let act = self.activations(state);
        let q = act.q[action];

        let mut g = vec![0.0; o.end];
        // dL/dQ
        let dq = -2.0 * weight * (target - q);
        if dq == 0.0 {
            return (Gradients(g), q);
        }
        let inv_k = 1.0 / actions as f64;

        g[o.bv] = dq;
        for h in 0..hidden {
            g[o.wv + h] = dq * act.hidden[h];
        }
        for a in 0..actions {
            let da = dq * (if a == action { 1.0 } else { 0.0 } - inv_k);
            g[o.ba + a] = da;
            for h in 0..hidden {
                g[o.wa + a * hidden + h] = da * act.hidden[h];
            }
        }
        for h in 0..hidden {
            if act.pre[h] <= 0.0 {
                continue;
            }
            let mean_wa = (0..actions).map(|a| p[o.wa + a * hidden + h]).sum::<f64>() * inv_k;
            let dh = dq * (p[o.wv + h] + p[o.wa + action * hidden + h] - mean_wa);
            g[o.b1 + h] = dh;
            for i in 0..inputs {
                g[o.w1 + h * inputs + i] = dh * state[i];
            }
        }
        (Gradients(g), q)
    }

    /// Overwrites `target` with this net's parameters.
    pub fn copy_into(&self, target: &mut DuelingNet) -> Result<()> {
        if self.arch != target.arch {
            return Err(Error::Shape(format!(
                "cannot copy {:?} into {:?}",
                self.arch, target.arch
            )));
        }
        target.params.copy_from_slice(&self.params);
        target.seed = self.seed;
        Ok(())
    }

    pub fn write_snapshot<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(&SNAPSHOT_MAGIC)?;
        w.write_all(&SNAPSHOT_VERSION.to_le_bytes())?;
        for width in [self.arch.inputs, self.arch.hidden, self.arch.actions] {
            w.write_all(&(width as u32).to_le_bytes())?;
        }
        w.write_all(&self.seed.to_le_bytes())?;
        w.write_all(&(self.params.len() as u64).to_le_bytes())?;
        for p in &self.params {
            w.write_all(&p.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn to_snapshot_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::with_capacity(SNAPSHOT_HEADER_LEN + 8 * self.params.len());
        self.write_snapshot(&mut buf).expect("writing to a Vec cannot fail");
        buf
    }

    pub fn read_snapshot<R: Read>(mut r: R) -> Result<Self> {
        let bad = |m: &str| Error::Parse(format!("weight snapshot: {m}"));
        let mut header = [0u8; SNAPSHOT_HEADER_LEN];
        r.read_exact(&mut header).map_err(|_| bad("truncated header"))?;
        if header[..8] != SNAPSHOT_MAGIC {
            return Err(bad("bad magic"));
        }
        let u32_at = |at: usize| u32::from_le_bytes(header[at..at + 4].try_into().unwrap());
        let u64_at = |at: usize| u64::from_le_bytes(header[at..at + 8].try_into().unwrap());
        if u32_at(8) != SNAPSHOT_VERSION {
            return Err(bad("unsupported version"));
        }
        let (inputs, hidden, actions) = (u32_at(12) as usize, u32_at(16) as usize, u32_at(20) as usize);
        if inputs == 0 || hidden == 0 || actions == 0 {
            return Err(bad("zero width"));
        }
        let arch = Architecture {
            inputs,
            hidden,
            actions,
        };
        let seed = u64_at(24);
        let count = u64_at(32) as usize;
        if count != arch.param_count() {
            return Err(bad("parameter count does not match widths"));
        }
        let mut params = Vec::with_capacity(count);
        let mut word = [0u8; 8];
        for _ in 0..count {
            r.read_exact(&mut word).map_err(|_| bad("truncated parameters"))?;
            params.push(f64::from_le_bytes(word));
        }
        Ok(Self { arch, seed, params })
    }
}

/// `params -= lr * grads`.
pub fn step(net: &mut DuelingNet, grads: &Gradients, learning_rate: f64) -> Result<()> {
    if grads.0.len() != net.params.len() {
        return Err(Error::Shape(format!(
            "{} gradients for {} parameters",
            grads.0.len(),
            net.params.len()
        )));
    }
    for (p, g) in net.params.iter_mut().zip(&grads.0) {
        *p -= learning_rate * g;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OptimizerKind {
    Sgd,
    Momentum { beta: f64 },
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl OptimizerKind {
    pub fn adam() -> Self {
        OptimizerKind::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Update rule with whatever state it needs.
#[derive(Debug, Clone)]
pub struct Optimizer {
    kind: OptimizerKind,
    learning_rate: f64,
    first: Vec<f64>,
    second: Vec<f64>,
    steps: u64,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, learning_rate: f64) -> Self {
        Self {
            kind,
            learning_rate,
            first: Vec::new(),
            second: Vec::new(),
            steps: 0,
        }
    }

    pub fn kind(&self) -> OptimizerKind {
        self.kind
    }

    pub fn apply(&mut self, net: &mut DuelingNet, grads: &Gradients) -> Result<()> {
        let lr = self.learning_rate;
        match self.kind {
            OptimizerKind::Sgd => step(net, grads, lr),
            OptimizerKind::Momentum { beta } => {
                self.ensure_state(grads.0.len(), net.params.len())?;
                for ((p, v), g) in net.params.iter_mut().zip(&mut self.first).zip(&grads.0) {
                    *v = beta * *v + g;
                    *p -= lr * *v;
                }
                Ok(())
            }
            OptimizerKind::Adam { beta1, beta2, eps } => {
                self.ensure_state(grads.0.len(), net.params.len())?;
                self.steps += 1;
                let t = self.steps as i32;
                let c1 = 1.0 - beta1.powi(t);
                let c2 = 1.0 - beta2.powi(t);
                for (((p, m), v), g) in net
                    .params
                    .iter_mut()
                    .zip(&mut self.first)
                    .zip(&mut self.second)
                    .zip(&grads.0)
                {
                    *m = beta1 * *m + (1.0 - beta1) * g;
                    *v = beta2 * *v + (1.0 - beta2) * g * g;
                    *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
                }
                Ok(())
            }
        }
    }

    fn ensure_state(&mut self, grads: usize, params: usize) -> Result<()> {
        if grads != params {
            return Err(Error::Shape(format!("{grads} gradients for {params} parameters")));
        }
        if self.first.len() != params {
            self.first = vec![0.0; params];
            self.second = vec![0.0; params];
        }
        Ok(())
    }
}
