//! The two-queue worked example (one vehicle waiting 10 s against two
//! waiting 8 s and 9 s) and the decision-boundary sweep.

use std::fmt::Write as _;

use crate::domain::{QueueId, QueueState, DEFAULT_CAPACITY};
use crate::penalty::{boundary_rate, choose_green, difference_at_rate, queue_penalty, Boundary};

/// Published values for one case: penalties of Q_E and Q_N, their
/// difference, and the queue that gets green.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PublishedCase {
    pub rate: f64,
    pub penalty_e: f64,
    pub penalty_n: f64,
    pub difference: f64,
    pub decision: QueueId,
}

pub const PUBLISHED_CASES: [PublishedCase; 3] = [
    PublishedCase {
        rate: 0.1,
        penalty_e: 2.72,
        penalty_n: 4.68,
        difference: -1.96,
        decision: QueueId::N,
    },
    PublishedCase {
        rate: 0.5,
        penalty_e: 148.41,
        penalty_n: 144.62,
        difference: 3.79,
        decision: QueueId::E,
    },
    PublishedCase {
        rate: 0.0,
        penalty_e: 1.0,
        penalty_n: 2.0,
        difference: -1.0,
        decision: QueueId::N,
    },
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CaseResult {
    pub case: usize,
    pub rate: f64,
    pub penalty_e: f64,
    pub penalty_n: f64,
    pub difference: f64,
    pub decision: QueueId,
    pub published: PublishedCase,
}

/// Evaluates the three published cases with the penalty engine.
pub fn table1() -> Vec<CaseResult> {
    const NOW: u64 = 10;
    PUBLISHED_CASES
        .iter()
        .enumerate()
        .map(|(k, published)| {
            let rate = published.rate;
            let queues = [
                QueueState::with_waits(QueueId::E, &[10], NOW, rate),
                QueueState::new(QueueId::W, DEFAULT_CAPACITY),
                QueueState::with_waits(QueueId::N, &[8, 9], NOW, rate),
                QueueState::new(QueueId::S, DEFAULT_CAPACITY),
            ];
            let penalty_e = queue_penalty(&queues[0], NOW);
            let penalty_n = queue_penalty(&queues[2], NOW);
            CaseResult {
                case: k + 1,
                rate,
                penalty_e,
                penalty_n,
                difference: penalty_e - penalty_n,
                decision: choose_green(&queues, NOW).winner,
                published: *published,
            }
        })
        .collect()
}

pub fn format_table1(cases: &[CaseResult]) -> String {
    let mut s = String::new();
    writeln!(
        s,
        "{:<5} {:>5} {:>10} {:>10} {:>9} {:>8} | {:>10} {:>10} {:>9} {:>8}",
        "case", "i", "pen_E", "pen_N", "D", "green", "ref_pen_E", "ref_pen_N", "ref_D", "ref"
    )
    .unwrap();
    for c in cases {
        let p = c.published;
        writeln!(
            s,
            "{:<5} {:>5.1} {:>10.4} {:>10.4} {:>9.4} {:>8} | {:>10.2} {:>10.2} {:>9.2} {:>8}",
            c.case,
            c.rate,
            c.penalty_e,
            c.penalty_n,
            c.difference,
            format!("Q_{}", c.decision),
            p.penalty_e,
            p.penalty_n,
            p.difference,
            format!("Q_{}", p.decision),
        )
        .unwrap();
    }
    s
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryReport {
    pub waits_q1: Vec<f64>,
    pub waits_q2: Vec<f64>,
    pub max_rate: f64,
    pub boundary: Option<Boundary>,
    /// `(i, D(i))` on an even grid over `[0, max_rate]`.
    pub curve: Vec<(f64, f64)>,
}

pub fn boundary_report(waits_q1: &[f64], waits_q2: &[f64], max_rate: f64, samples: usize) -> BoundaryReport {
    let samples = samples.max(2);
    let curve = (0..samples)
        .map(|k| {
            let i = max_rate * k as f64 / (samples - 1) as f64;
            (i, difference_at_rate(waits_q1, waits_q2, i))
        })
        .collect();
    BoundaryReport {
        waits_q1: waits_q1.to_vec(),
        waits_q2: waits_q2.to_vec(),
        max_rate,
        boundary: boundary_rate(waits_q1, waits_q2, max_rate),
        curve,
    }
}

impl BoundaryReport {
    /// Headline: the boundary rate, `none`, or a tie note.
    pub fn headline(&self) -> String {
        match self.boundary {
            Some(b) if b.degenerate => "0 (tie: identical queues, D(i) = 0 for every rate)".to_string(),
            Some(b) => format!("{:.4}", b.rate),
            None => format!("none (D keeps one sign on [0, {}])", self.max_rate),
        }
    }

    pub fn curve_csv(&self) -> String {
        let mut s = String::from("i,D\n");
        for (i, d) in &self.curve {
            writeln!(s, "{i},{d}").unwrap();
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn published_cases_reproduced() {
        let cases = table1();
        for c in &cases {
            let p = c.published;
            assert!((c.penalty_e - p.penalty_e).abs() <= 0.005, "{c:?}");
            assert!((c.penalty_n - p.penalty_n).abs() <= 0.006, "{c:?}");
            assert!((c.difference - p.difference).abs() <= 0.01, "{c:?}");
            assert_eq!(c.decision, p.decision);
        }
        // e - e^0.8 - e^0.9 and e^5 - e^4 - e^4.5
        assert!((cases[0].difference + 1.966_862_211).abs() < 1e-9);
        assert!((cases[1].difference - 3.797_877_769).abs() < 1e-8);
        assert_eq!(cases[2].difference, -1.0);
    }

    #[test]
    fn boundary_headlines() {
        assert_eq!(boundary_report(&[10.0], &[8.0, 9.0], 2.0, 11).headline(), "0.4812");
        assert!(boundary_report(&[10.0], &[10.0, 10.0], 2.0, 11)
            .headline()
            .starts_with("none"));
        assert!(boundary_report(&[4.0], &[4.0], 2.0, 11).headline().contains("tie"));
        let r = boundary_report(&[10.0], &[8.0, 9.0], 2.0, 5);
        assert_eq!(r.curve.len(), 5);
        assert_eq!(r.curve[4].0, 2.0);
        assert!(r.curve_csv().starts_with("i,D\n0,-1\n"));
    }
}
