//! Compounding-interest penalties and the green-assignment rule.
//!
//! Every stopped vehicle lends its principal `P` to the intersection; after
//! waiting `W` seconds at per-second rate `i` the intersection owes
//! `P * exp(W * i)`. The queue owed the most receives the next green.

use crate::domain::{QueueId, QueueState, Vehicle};

/// Default upper end of the bisection bracket for [`boundary_rate`].
pub const DEFAULT_MAX_RATE: f64 = 2.0;
/// Bisection stops once `|D(i)|` falls below this.
pub const BOUNDARY_TOLERANCE: f64 = 1e-9;

/// Penalty owed to a single vehicle.
///
/// # Panics
/// If `principal <= 0`, `wait < 0` or `rate < 0`.
pub fn vehicle_penalty(principal: f64, wait: f64, rate: f64) -> f64 {
    assert!(principal > 0.0, "principal must be positive, got {principal}");
    assert!(wait >= 0.0, "wait must be nonnegative, got {wait}");
    assert!(rate >= 0.0, "rate must be nonnegative, got {rate}");
    principal * (wait * rate).exp()
}

/// Total wait of `vehicle` at `now` given its queue's cycle start `r_m`.
///
/// Vehicles left over from an earlier cycle carry their previous wait and
/// keep accruing from the cycle start; newcomers accrue from arrival.
///
/// # Panics
/// If `now` precedes the vehicle's arrival.
pub fn update_wait(vehicle: &Vehicle, now: u64, cycle_start: u64) -> f64 {
    assert!(
        now >= vehicle.arrival_time,
        "clock {now} precedes arrival {}",
        vehicle.arrival_time
    );
    if vehicle.arrival_time < cycle_start {
        vehicle.carried_wait + (now - cycle_start) as f64
    } else {
        (now - vehicle.arrival_time) as f64
    }
}

/// Sum of vehicle penalties in `queue` at `now`; zero for an empty queue.
pub fn queue_penalty(queue: &QueueState, now: u64) -> f64 {
    queue
        .vehicles
        .iter()
        .map(|v| vehicle_penalty(v.principal, update_wait(v, now, queue.cycle_start), queue.interest_rate))
        .sum()
}

/// Natural log of [`queue_penalty`], computed without overflow.
/// Empty queues give negative infinity.
pub fn queue_log_penalty(queue: &QueueState, now: u64) -> f64 {
    let exponents: Vec<f64> = queue
        .vehicles
        .iter()
        .map(|v| v.principal.ln() + update_wait(v, now, queue.cycle_start) * queue.interest_rate)
        .collect();
    let max = exponents.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + exponents.iter().map(|e| (e - max).exp()).sum::<f64>().ln()
}

/// Outcome of comparing the four queue penalties.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenaltyReport {
    /// Penalty per queue, indexed by [`QueueId::index`]. May be infinite when
    /// waits are extreme; the winner is then picked in log space.
    pub per_queue: [f64; 4],
    pub winner: QueueId,
    /// More than one queue attained the maximum; `winner` is the first in
    /// E, W, N, S order.
    pub tie: bool,
}

impl PenaltyReport {
    pub fn penalty(&self, q: QueueId) -> f64 {
        self.per_queue[q.index()]
    }
}

/// Green goes to the queue with the highest penalty at `now`.
pub fn choose_green(queues: &[QueueState; 4], now: u64) -> PenaltyReport {
    let per_queue = queues.each_ref().map(|q| queue_penalty(q, now));
    let keys = if per_queue.iter().all(|p| p.is_finite()) {
        per_queue
    } else {
        queues.each_ref().map(|q| queue_log_penalty(q, now))
    };
    let (winner, tie) = argmax_with_tie(&keys);
    PenaltyReport {
        per_queue,
        winner: QueueId::ALL[winner],
        tie,
    }
}

/// First index of the maximum, and whether another index matches it.
pub(crate) fn argmax_with_tie(values: &[f64; 4]) -> (usize, bool) {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    let ties = values.iter().filter(|&&v| v == values[best]).count();
    (best, ties > 1)
}

/// `D = penalty(q1) - penalty(q2)`; positive means `q1` would win.
pub fn penalty_difference(q1: &QueueState, q2: &QueueState, now: u64) -> f64 {
    queue_penalty(q1, now) - queue_penalty(q2, now)
}

/// Where the two queues' penalties cross as a common rate varies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Boundary {
    pub rate: f64,
    /// Both queues hold the same multiset of waits, so `D` vanishes for every
    /// rate; `rate` is reported as 0.
    pub degenerate: bool,
}

/// `D(i)` for unit-principal queues with the given waits at common rate `i`.
pub fn difference_at_rate(waits_q1: &[f64], waits_q2: &[f64], rate: f64) -> f64 {
    let sum = |ws: &[f64]| ws.iter().map(|&w| vehicle_penalty(1.0, w, rate)).sum::<f64>();
    sum(waits_q1) - sum(waits_q2)
}

/// Interest rate in `[0, max_rate]` at which both queues owe the same.
///
/// Returns `None` when `D` keeps one sign over the whole bracket.
///
/// # Panics
/// If either wait list is empty or `max_rate` is not positive.
pub fn boundary_rate(waits_q1: &[f64], waits_q2: &[f64], max_rate: f64) -> Option<Boundary> {
    assert!(
        !waits_q1.is_empty() && !waits_q2.is_empty(),
        "both queues need at least one vehicle"
    );
    assert!(max_rate > 0.0, "rate bracket must be positive");

    let mut a = waits_q1.to_vec();
    let mut b = waits_q2.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    if a == b {
        return Some(Boundary {
            rate: 0.0,
            degenerate: true,
        });
    }

    let d = |i: f64| difference_at_rate(waits_q1, waits_q2, i);
    let (mut lo, mut hi) = (0.0_f64, max_rate);
    let (d_lo, d_hi) = (d(lo), d(hi));
    if d_lo == 0.0 {
        return Some(Boundary {
            rate: lo,
            degenerate: false,
        });
    }
    if d_hi == 0.0 {
        return Some(Boundary {
            rate: hi,
            degenerate: false,
        });
    }
    if d_lo.signum() == d_hi.signum() {
        return None;
    }

    let lo_sign = d_lo.signum();
    let mut mid = 0.5 * (lo + hi);
    for _ in 0..200 {
        mid = 0.5 * (lo + hi);
        let dm = d(mid);
        if dm.abs() < BOUNDARY_TOLERANCE || mid <= lo || mid >= hi {
            break;
        }
        if dm.signum() == lo_sign {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(Boundary {
        rate: mid,
        degenerate: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::DEFAULT_CAPACITY;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    fn empty(id: QueueId) -> QueueState {
        QueueState::new(id, DEFAULT_CAPACITY)
    }

    #[test]
    fn vehicle_penalty_examples() {
        assert!(close(vehicle_penalty(1.0, 10.0, 0.1), 2.72, 0.005));
        assert!(close(vehicle_penalty(1.0, 10.0, 0.5), 148.41, 0.005));
        for w in [0.0, 3.0, 1e4] {
            assert_eq!(vehicle_penalty(1.0, w, 0.0), 1.0);
        }
    }

    #[test]
    #[should_panic]
    fn negative_wait_panics() {
        vehicle_penalty(1.0, -1.0, 0.1);
    }

    #[test]
    #[should_panic]
    fn negative_rate_panics() {
        vehicle_penalty(1.0, 1.0, -0.1);
    }

    #[test]
    fn update_wait_examples() {
        let v = Vehicle::new(5);
        assert_eq!(update_wait(&v, 12, 0), 7.0);
        let mut old = Vehicle::new(2);
        old.carried_wait = 3.0;
        assert_eq!(update_wait(&old, 15, 10), 8.0);
        let fresh = Vehicle::new(10);
        assert_eq!(update_wait(&fresh, 10, 10), 0.0);
    }

    #[test]
    #[should_panic]
    fn update_wait_before_arrival_panics() {
        update_wait(&Vehicle::new(10), 9, 0);
    }

    #[test]
    fn queue_penalty_examples() {
        let q = QueueState::with_waits(QueueId::N, &[8, 9], 10, 0.1);
        assert!(close(queue_penalty(&q, 10), 4.68, 0.01));
        let q = QueueState::with_waits(QueueId::N, &[8, 9], 10, 0.5);
        assert!(close(queue_penalty(&q, 10), 144.62, 0.005));
        assert_eq!(queue_penalty(&empty(QueueId::E), 50), 0.0);
    }

    fn table1_queues(rate: f64) -> [QueueState; 4] {
        [
            QueueState::with_waits(QueueId::E, &[10], 10, rate),
            empty(QueueId::W),
            QueueState::with_waits(QueueId::N, &[8, 9], 10, rate),
            empty(QueueId::S),
        ]
    }

    #[test]
    fn choose_green_table1_cases() {
        let r = choose_green(&table1_queues(0.1), 10);
        assert_eq!(r.winner, QueueId::N);
        assert!(!r.tie);
        let r = choose_green(&table1_queues(0.5), 10);
        assert_eq!(r.winner, QueueId::E);
        let r = choose_green(&table1_queues(0.0), 10);
        assert_eq!(r.winner, QueueId::N);
        assert_eq!(r.penalty(QueueId::E), 1.0);
        assert_eq!(r.penalty(QueueId::N), 2.0);
    }

    #[test]
    fn penalty_difference_examples() {
        let [e, _, n, _] = table1_queues(0.1);
        // exact value is e^1 - e^0.8 - e^0.9; the table shows rounded terms
        let d = penalty_difference(&e, &n, 10);
        assert!(close(d, 1f64.exp() - 0.8f64.exp() - 0.9f64.exp(), 1e-12));
        assert!(close(d, -1.96, 0.01));
        let [e, _, n, _] = table1_queues(0.5);
        assert!(close(penalty_difference(&e, &n, 10), 3.79, 0.01));
        assert_eq!(penalty_difference(&n, &n.clone(), 10), 0.0);
    }

    #[test]
    fn empty_intersection_ties_to_east() {
        let qs = QueueId::ALL.map(empty);
        let r = choose_green(&qs, 0);
        assert_eq!(r.winner, QueueId::E);
        assert!(r.tie);
    }

    #[test]
    fn overflowing_penalties_fall_back_to_log_space() {
        // 2000 s at 0.5/s overflows f64; more vehicles must still win.
        let mut qs = QueueId::ALL.map(empty);
        qs[0] = QueueState::with_waits(QueueId::E, &[2000], 2000, 0.5);
        qs[3] = QueueState::with_waits(QueueId::S, &[2000, 2000], 2000, 0.5);
        let r = choose_green(&qs, 2000);
        assert!(r.per_queue[0].is_infinite());
        assert_eq!(r.winner, QueueId::S);
        assert!(!r.tie);
    }

    #[test]
    fn boundary_golden_ratio() {
        let b = boundary_rate(&[10.0], &[8.0, 9.0], DEFAULT_MAX_RATE).unwrap();
        let golden = (1.0 + 5f64.sqrt()) / 2.0;
        assert!(close(b.rate, golden.ln(), 1e-9));
        assert!(close(b.rate, 0.4812, 0.0005));
        assert!(difference_at_rate(&[10.0], &[8.0, 9.0], b.rate).abs() < 1e-6);
        assert!(!b.degenerate);
    }

    #[test]
    fn boundary_none_when_one_queue_dominates() {
        // brute-force sweep: D(i) = e^{10i} - 2e^{10i} < 0 everywhere
        for k in 0..=2000 {
            let i = k as f64 * 0.001;
            assert!(difference_at_rate(&[10.0], &[10.0, 10.0], i) < 0.0);
        }
        assert_eq!(boundary_rate(&[10.0], &[10.0, 10.0], DEFAULT_MAX_RATE), None);
    }

    #[test]
    fn boundary_identical_lists_is_degenerate() {
        let b = boundary_rate(&[3.0, 7.0], &[7.0, 3.0], DEFAULT_MAX_RATE).unwrap();
        assert_eq!(b.rate, 0.0);
        assert!(b.degenerate);
    }

    fn arb_queue(id: QueueId) -> impl Strategy<Value = QueueState> {
        (prop::collection::vec(0u64..60, 0..12), 0.0f64..0.3)
            .prop_map(move |(waits, rate)| QueueState::with_waits(id, &waits, 60, rate))
    }

    proptest! {
        #[test]
        fn null_model_counts_vehicles(waits in prop::collection::vec(0u64..500, 0..40)) {
            let q = QueueState::with_waits(QueueId::W, &waits, 500, 0.0);
            prop_assert_eq!(queue_penalty(&q, 500), waits.len() as f64);
        }

        #[test]
        fn penalty_monotone_in_rate(
            waits in prop::collection::vec(0u64..60, 1..10),
            r1 in 0.0f64..0.3,
            r2 in 0.0f64..0.3,
        ) {
            let (lo, hi) = if r1 <= r2 { (r1, r2) } else { (r2, r1) };
            let a = QueueState::with_waits(QueueId::E, &waits, 60, lo);
            let b = QueueState::with_waits(QueueId::E, &waits, 60, hi);
            prop_assert!(queue_penalty(&a, 60) <= queue_penalty(&b, 60));
        }

        #[test]
        fn penalty_strictly_increasing_in_wait(w in 0.0f64..50.0, dw in 0.5f64..10.0, i in 0.01f64..0.3) {
            prop_assert!(vehicle_penalty(1.0, w, i) < vehicle_penalty(1.0, w + dw, i));
        }

        #[test]
        fn penalty_linear_in_principal(p in 0.1f64..10.0, c in 0.1f64..10.0, w in 0.0f64..60.0, i in 0.0f64..0.3) {
            let lhs = vehicle_penalty(c * p, w, i);
            let rhs = c * vehicle_penalty(p, w, i);
            prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.abs());
        }

        #[test]
        fn argmax_invariant_under_principal_scaling(
            e in arb_queue(QueueId::E),
            w in arb_queue(QueueId::W),
            n in arb_queue(QueueId::N),
            s in arb_queue(QueueId::S),
            exp in -4i32..4,
        ) {
            let qs = [e, w, n, s];
            let base = choose_green(&qs, 60);
            let c = 2f64.powi(exp);
            let scaled = qs.map(|mut q| {
                for v in q.vehicles.iter_mut() {
                    v.principal *= c;
                }
                q
            });
            let r = choose_green(&scaled, 60);
            prop_assert_eq!(r.winner, base.winner);
            prop_assert_eq!(r.tie, base.tie);
        }

        #[test]
        fn log_penalty_matches_direct(q in arb_queue(QueueId::N)) {
            let direct = queue_penalty(&q, 60);
            let log = queue_log_penalty(&q, 60);
            if q.is_empty() {
                prop_assert_eq!(log, f64::NEG_INFINITY);
            } else {
                prop_assert!((log.exp() - direct).abs() <= 1e-9 * direct);
            }
        }
    }
}
