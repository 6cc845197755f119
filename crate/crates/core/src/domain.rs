//! Types shared by the penalty model, the simulator and the learners.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Interest rates Agent1 may assign to a queue pair.
pub const RATE_LEVELS: [f64; 3] = [0.1, 0.2, 0.3];
/// Number of Agent1 actions: one per (i_EW, i_NS) pair.
pub const RATE_ACTIONS: usize = RATE_LEVELS.len() * RATE_LEVELS.len();
/// Number of Agent2 actions: green lengths 10 s .. 60 s.
pub const GREEN_ACTIONS: usize = 6;
/// Step between consecutive green lengths, seconds.
pub const GREEN_STEP: u32 = 10;
pub const DEFAULT_CAPACITY: usize = 110;

/// A stopped vehicle: the creditor of one virtual transaction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Vehicle {
    pub principal: f64,
    /// Seconds since episode start.
    pub arrival_time: u64,
    /// Wait accumulated up to the start of the queue's current cycle.
    pub carried_wait: f64,
}

impl Vehicle {
    pub fn new(arrival_time: u64) -> Self {
        Self::with_principal(arrival_time, 1.0)
    }

    pub fn with_principal(arrival_time: u64, principal: f64) -> Self {
        assert!(principal > 0.0, "principal must be positive, got {principal}");
        Self {
            principal,
            arrival_time,
            carried_wait: 0.0,
        }
    }
}

/// The four non-conflicting approach groups.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum QueueId {
    E,
    W,
    N,
    S,
}

impl QueueId {
    /// Fixed order; also the tie-break priority (earlier wins).
    pub const ALL: [QueueId; 4] = [QueueId::E, QueueId::W, QueueId::N, QueueId::S];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Self> {
        Self::ALL.get(index).copied()
    }

    /// Lane directions (d1..d12) released together by this group's green.
    pub fn directions(self) -> [u8; 3] {
        match self {
            QueueId::E => [1, 2, 3],
            QueueId::N => [4, 5, 6],
            QueueId::W => [7, 8, 9],
            QueueId::S => [10, 11, 12],
        }
    }

    /// True for the lighter east/west pair that shares `i_EW`.
    pub fn is_east_west(self) -> bool {
        matches!(self, QueueId::E | QueueId::W)
    }
}

impl fmt::Display for QueueId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            QueueId::E => "E",
            QueueId::W => "W",
            QueueId::N => "N",
            QueueId::S => "S",
        };
        f.write_str(s)
    }
}

impl FromStr for QueueId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "E" | "e" => Ok(QueueId::E),
            "W" | "w" => Ok(QueueId::W),
            "N" | "n" => Ok(QueueId::N),
            "S" | "s" => Ok(QueueId::S),
            other => Err(Error::Parse(format!("unknown queue id `{other}`"))),
        }
    }
}

/// One approach group: FIFO list of stopped vehicles sharing an interest rate.
#[derive(Debug, Clone, PartialEq)]
pub struct QueueState {
    pub id: QueueId,
    pub vehicles: std::collections::VecDeque<Vehicle>,
    pub capacity: usize,
    /// Per-second interest rate.
    pub interest_rate: f64,
    /// Start of the current cycle (`r_m`): when this queue's green last ended.
    pub cycle_start: u64,
}

impl QueueState {
    pub fn new(id: QueueId, capacity: usize) -> Self {
        Self {
            id,
            vehicles: Default::default(),
            capacity,
            interest_rate: 0.0,
            cycle_start: 0,
        }
    }

    /// Builds a queue whose vehicles have the given waits at time `now`.
    ///
    /// Each vehicle arrives `now - wait` seconds into the current cycle, which
    /// starts at 0; useful for worked examples.
    pub fn with_waits(id: QueueId, waits: &[u64], now: u64, rate: f64) -> Self {
        let mut q = Self::new(id, DEFAULT_CAPACITY);
        q.interest_rate = rate;
        let mut arrivals: Vec<u64> = waits
            .iter()
            .map(|&w| {
                assert!(w <= now, "wait {w} exceeds clock {now}");
                now - w
            })
            .collect();
        arrivals.sort_unstable();
        q.vehicles.extend(arrivals.into_iter().map(Vehicle::new));
        q
    }

    pub fn len(&self) -> usize {
        self.vehicles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vehicles.is_empty()
    }
}

/// Per-queue vehicle counts, ordered E, W, N, S.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct StateVector(pub [u32; 4]);

impl StateVector {
    pub fn total(&self) -> u64 {
        self.0.iter().map(|&n| u64::from(n)).sum()
    }

    pub fn get(&self, q: QueueId) -> u32 {
        self.0[q.index()]
    }

    /// Counts divided by queue capacity; the network input.
    pub fn normalized(&self, capacity: usize) -> [f64; 4] {
        let c = capacity as f64;
        self.0.map(|n| f64::from(n) / c)
    }
}

/// One decision point as stored in replay memory.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionRecord {
    pub state: [f64; 4],
    pub action: usize,
    pub reward: f64,
    pub next_state: [f64; 4],
    pub terminal: bool,
}

/// Agent1 action index to `(i_EW, i_NS)`, row-major with `i_EW` major.
pub fn decode_action1(index: usize) -> Result<(f64, f64), Error> {
    if index >= RATE_ACTIONS {
        return Err(Error::ActionOutOfRange {
            index,
            width: RATE_ACTIONS,
        });
    }
    let n = RATE_LEVELS.len();
    Ok((RATE_LEVELS[index / n], RATE_LEVELS[index % n]))
}

/// Agent2 action index to a green length in seconds.
pub fn decode_action2(index: usize) -> Result<u32, Error> {
    if index >= GREEN_ACTIONS {
        return Err(Error::ActionOutOfRange {
            index,
            width: GREEN_ACTIONS,
        });
    }
    Ok(GREEN_STEP * (index as u32 + 1))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn action1_examples() {
        assert_eq!(decode_action1(0).unwrap(), (0.1, 0.1));
        assert_eq!(decode_action1(8).unwrap(), (0.3, 0.3));
        // row-major table: row 0 = i_EW 0.1, row 1 = 0.2 ...
        let table: Vec<(f64, f64)> = RATE_LEVELS
            .iter()
            .flat_map(|&a| RATE_LEVELS.iter().map(move |&b| (a, b)))
            .collect();
        assert_eq!(table[5], (0.2, 0.3));
        assert_eq!(decode_action1(5).unwrap(), table[5]);
    }

    #[test]
    fn action1_is_bijection() {
        let decoded: Vec<_> = (0..RATE_ACTIONS).map(|i| decode_action1(i).unwrap()).collect();
        for (i, a) in decoded.iter().enumerate() {
            for b in &decoded[i + 1..] {
                assert_ne!(a, b);
            }
        }
        assert!(decode_action1(9).is_err());
    }

    #[test]
    fn action2_examples() {
        assert_eq!(decode_action2(0).unwrap(), 10);
        assert_eq!(decode_action2(5).unwrap(), 60);
        assert_eq!(decode_action2(3).unwrap(), 40);
        assert!(decode_action2(6).is_err());
        let d: Vec<u32> = (0..GREEN_ACTIONS).map(|i| decode_action2(i).unwrap()).collect();
        assert!(d.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn directions_partition_all_lanes() {
        let mut lanes: Vec<u8> = QueueId::ALL.iter().flat_map(|q| q.directions()).collect();
        lanes.sort_unstable();
        assert_eq!(lanes, (1..=12).collect::<Vec<u8>>());
    }

    #[test]
    fn normalized_state() {
        let s = StateVector([110, 0, 0, 0]);
        assert_eq!(s.normalized(110), [1.0, 0.0, 0.0, 0.0]);
        assert_eq!(s.total(), 110);
    }

    #[test]
    fn queue_id_round_trip() {
        for q in QueueId::ALL {
            assert_eq!(q.to_string().parse::<QueueId>().unwrap(), q);
            assert_eq!(QueueId::from_index(q.index()), Some(q));
        }
    }

    #[test]
    #[should_panic]
    fn zero_principal_rejected() {
        let _ = Vehicle::with_principal(0, 0.0);
    }
}
