//! Rank-based prioritized replay.
//!
//! Records are ranked by descending stored |TD| (ties share the best rank),
//! sampled with probability `(1/rank)^alpha / sum_k (1/rank_k)^alpha`, and
//! reweighted by `(1 / (M * P))^beta`, normalized by the batch maximum.

use std::collections::VecDeque;

use rand::Rng;

use crate::domain::DecisionRecord;

#[derive(Debug, Clone)]
struct Entry {
    id: u64,
    record: DecisionRecord,
    priority: f64,
}

/// Bounded FIFO of decision records with |TD| priorities.
#[derive(Debug, Clone)]
pub struct PrioritizedMemory {
    capacity: usize,
    alpha: f64,
    entries: VecDeque<Entry>,
    next_id: u64,
}

/// A minibatch drawn from [`PrioritizedMemory::sample`].
#[derive(Debug, Clone, PartialEq)]
pub struct SampledBatch {
    /// Stable record ids, usable with [`PrioritizedMemory::update_priorities`].
    pub ids: Vec<u64>,
    pub records: Vec<DecisionRecord>,
    pub probabilities: Vec<f64>,
    /// Importance weights divided by the largest one in the batch.
    pub weights: Vec<f64>,
}

impl PrioritizedMemory {
    pub fn new(capacity: usize, alpha: f64) -> Self {
        assert!(capacity > 0, "memory capacity must be positive");
        assert!(alpha >= 0.0, "alpha must be nonnegative");
        Self {
            capacity,
            alpha,
            entries: VecDeque::with_capacity(capacity),
            next_id: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn is_full(&self) -> bool {
        self.entries.len() == self.capacity
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Stores a record at the current maximum priority (1 when empty),
    /// evicting the oldest record when full. Returns the record's id.
    pub fn push(&mut self, record: DecisionRecord) -> u64 {
        let priority = self.max_priority().unwrap_or(1.0);
        self.push_with_priority(record, priority)
    }

    pub fn push_with_priority(&mut self, record: DecisionRecord, priority: f64) -> u64 {
        assert!(
            priority >= 0.0 && priority.is_finite(),
            "priority must be finite and nonnegative"
        );
        if self.entries.len() == self.capacity {
            self.entries.pop_front();
        }
        let id = self.next_id;
        self.next_id += 1;
        self.entries.push_back(Entry { id, record, priority });
        id
    }

    pub fn max_priority(&self) -> Option<f64> {
        self.entries.iter().map(|e| e.priority).reduce(f64::max)
    }

    fn position(&self, id: u64) -> Option<usize> {
        let front = self.entries.front()?.id;
        let pos = id.checked_sub(front)? as usize;
        (pos < self.entries.len()).then_some(pos)
    }

    pub fn priority(&self, id: u64) -> Option<f64> {
        self.position(id).map(|p| self.entries[p].priority)
    }

    pub fn record(&self, id: u64) -> Option<&DecisionRecord> {
        self.position(id).map(|p| &self.entries[p].record)
    }

    /// Ids oldest first.
    pub fn ids(&self) -> impl Iterator<Item = u64> + '_ {
        self.entries.iter().map(|e| e.id)
    }

    /// Sampling probability of each stored record, oldest first.
    pub fn probabilities(&self) -> Vec<f64> {
        let priorities: Vec<f64> = self.entries.iter().map(|e| e.priority).collect();
        rank_probabilities(&priorities, self.alpha)
    }

    /// Draws `batch` records with replacement; `None` while fewer than
    /// `batch` records are stored.
    pub fn sample<R: Rng + ?Sized>(&self, batch: usize, beta: f64, rng: &mut R) -> Option<SampledBatch> {
        if batch == 0 || self.entries.len() < batch {
            return None;
        }
        let probs = self.probabilities();
        let mut cumulative = Vec::with_capacity(probs.len());
        let mut acc = 0.0;
        for p in &probs {
            acc += p;
            cumulative.push(acc);
        }
        let m = self.entries.len();
        let mut out = SampledBatch {
            ids: Vec::with_capacity(batch),
            records: Vec::with_capacity(batch),
            probabilities: Vec::with_capacity(batch),
            weights: Vec::with_capacity(batch),
        };
        for _ in 0..batch {
            let u = rng.random::<f64>() * acc;
            let pos = cumulative.partition_point(|&c| c <= u).min(m - 1);
            let e = &self.entries[pos];
            out.ids.push(e.id);
            out.records.push(e.record.clone());
            out.probabilities.push(probs[pos]);
            out.weights.push(importance_weight(probs[pos], m, beta));
        }
        let max_w = out.weights.iter().copied().fold(0.0, f64::max);
        if max_w > 0.0 {
            out.weights.iter_mut().for_each(|w| *w /= max_w);
        }
        Some(out)
    }

    /// Replaces stored priorities; ids no longer in memory are ignored.
    pub fn update_priorities(&mut self, ids: &[u64], td_errors: &[f64]) {
        assert_eq!(ids.len(), td_errors.len(), "one TD error per id");
        for (&id, &td) in ids.iter().zip(td_errors) {
            if let Some(pos) = self.position(id) {
                self.entries[pos].priority = td.abs();
            }
        }
    }
}

/// Rank of each priority under descending order; equal priorities share
/// the smallest rank of their group (1-based).
pub fn ranks_descending(priorities: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..priorities.len()).collect();
    order.sort_by(|&a, &b| priorities[b].total_cmp(&priorities[a]));
    let mut ranks = vec![0; priorities.len()];
    for (k, &idx) in order.iter().enumerate() {
        ranks[idx] = if k > 0 && priorities[order[k - 1]] == priorities[idx] {
            ranks[order[k - 1]]
        } else {
            k + 1
        };
    }
    ranks
}

/// `P_s = (1/rank_s)^alpha / sum_k (1/rank_k)^alpha`.
pub fn rank_probabilities(priorities: &[f64], alpha: f64) -> Vec<f64> {
    let scores: Vec<f64> = ranks_descending(priorities)
        .into_iter()
        .map(|r| (1.0 / r as f64).powf(alpha))
        .collect();
    let total: f64 = scores.iter().sum();
    scores.into_iter().map(|s| s / total).collect()
}

/// Unnormalized importance weight `(1 / (M * P))^beta`.
pub fn importance_weight(probability: f64, memory_len: usize, beta: f64) -> f64 {
    (1.0 / (memory_len as f64 * probability)).powf(beta)
}
