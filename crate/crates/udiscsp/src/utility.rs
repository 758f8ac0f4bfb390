//! The utilitarian layer: futility-risk learning, expected privacy-cost
//! estimation, and the continue/interrupt decision that turns SyncBT and
//! ABT into their utility-guarded variants.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{LoadError, PrivacyLedger};

/// Counters over observed solver traffic: how many Ok?/Nogood messages
/// were sent, and how many of them terminated a run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FutilityStats {
    pub count: u64,
    #[serde(rename = "terminationCount")]
    pub termination_count: u64,
}

impl FutilityStats {
    /// One Ok? or Nogood message left an agent.
    pub fn record_send(&mut self) {
        self.count += 1;
    }

    /// A run ended in agreement or proven no-solution. The message that
    /// ended it gets the credit, so runs that never sent anything leave
    /// the counters untouched.
    pub fn record_termination(&mut self, messages_in_run: u64) {
        if messages_in_run > 0 {
            self.termination_count += 1;
        }
    }

    pub fn merge(&mut self, other: &FutilityStats) {
        self.count += other.count;
        self.termination_count += other.termination_count;
    }
}

/// Probability that a sent message does not lead to termination:
/// `1 - terminationCount / count`, defaulting to 0.5 before any
/// observation exists.
pub fn futility_risk(stats: &FutilityStats) -> f64 {
    if stats.count == 0 {
        0.5
    } else {
        1.0 - stats.termination_count as f64 / stats.count as f64
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum UtilityError {
    #[error("cost list must be nonempty")]
    EmptyCosts,
    #[error("probability {0} outside [0, 1]")]
    BadProbability(f64),
}

/// Expected cost of continuing to reveal the given marginal costs, in
/// order, when each revelation has probability `risk` of not settling
/// the search.
///
/// Recursion: a single value costs `head * prob_d`; otherwise the head
/// is charged at `prob_d` and the tail is evaluated at `risk * prob_d`.
/// Equivalently the closed form `sum_k m(v_k) * prob_d * risk^(k-1)`.
pub fn calculate_cost(risk: f64, costs: &[f64], prob_d: f64) -> Result<f64, UtilityError> {
    if costs.is_empty() {
        return Err(UtilityError::EmptyCosts);
    }
    for &p in &[risk, prob_d] {
        if !(0.0..=1.0).contains(&p) {
            return Err(UtilityError::BadProbability(p));
        }
    }
    Ok(cost_recursion(risk, costs, prob_d))
}

fn cost_recursion(risk: f64, costs: &[f64], prob_d: f64) -> f64 {
    match costs {
        [single] => single * prob_d,
        [head, tail @ ..] => head * prob_d + cost_recursion(risk, tail, risk * prob_d),
        [] => unreachable!("guarded by calculate_cost"),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Continue,
    Interrupt,
}

/// Outcome of a continue/interrupt deliberation, carrying the computed
/// estimate so callers can surface it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Deliberation {
    pub decision: Decision,
    pub estimated_cost: f64,
}

/// The interruption test an agent runs before any send that would reveal
/// a new value: estimated cost is the sunk loss already on the ledger
/// plus the expected cost of the remaining revelations; the agent
/// interrupts when that estimate meets or exceeds its reward.
///
/// `unrevealed` are the marginal costs at stake, ordered with the values
/// the pending send reveals first.
pub fn decide_continue(
    ledger: &PrivacyLedger,
    risk: f64,
    unrevealed: &[f64],
    reward: u64,
    agent: usize,
) -> Deliberation {
    let sunk = ledger.loss(agent) as f64;
    let future = if unrevealed.is_empty() {
        // Nothing new at stake; by precondition this is not reached from
        // the solvers, but a free send can always continue.
        0.0
    } else {
        calculate_cost(risk, unrevealed, 1.0).expect("nonempty costs, risk validated upstream")
    };
    let estimated_cost = sunk + future;
    let decision = if estimated_cost >= reward as f64 {
        Decision::Interrupt
    } else {
        Decision::Continue
    };
    Deliberation {
        decision,
        estimated_cost,
    }
}

/// Whether risk is frozen at run start or refreshed as the run sends.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RiskMode {
    /// Risk derives from persisted stats once, at run start.
    Offline,
    /// Every Ok?/Nogood send counts as one more observed message with no
    /// termination credit yet, so risk drifts upward within the run.
    Online,
}

impl RiskMode {
    pub fn name(self) -> &'static str {
        match self {
            RiskMode::Offline => "offline",
            RiskMode::Online => "online",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "offline" => Some(RiskMode::Offline),
            "online" => Some(RiskMode::Online),
            _ => None,
        }
    }
}

/// Persisted futility statistics: global counters, plus optional
/// per-density buckets for callers that condition risk on instance
/// parameters.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StatsFile {
    #[serde(flatten)]
    pub global: FutilityStats,
    #[serde(
        rename = "byDensity",
        default,
        skip_serializing_if = "BTreeMap::is_empty"
    )]
    pub by_density: BTreeMap<String, FutilityStats>,
}

impl StatsFile {
    /// Canonical key for a density bucket.
    pub fn density_key(density: f64) -> String {
        format!("{density:.3}")
    }
}

pub fn load_stats(path: &Path) -> Result<StatsFile, LoadError> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

pub fn save_stats(stats: &StatsFile, path: &Path) -> Result<(), LoadError> {
    let mut text = serde_json::to_string_pretty(stats)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn closed_form(risk: f64, costs: &[f64], prob_d: f64) -> f64 {
        costs
            .iter()
            .enumerate()
            .map(|(k, c)| c * prob_d * risk.powi(k as i32))
            .sum()
    }

    #[test]
    fn risk_follows_termination_ratio() {
        assert_eq!(
            futility_risk(&FutilityStats {
                count: 10,
                termination_count: 5
            }),
            0.5
        );
        assert_eq!(
            futility_risk(&FutilityStats {
                count: 4,
                termination_count: 4
            }),
            0.0
        );
        // Cold start: no observations defaults to an even chance.
        assert_eq!(futility_risk(&FutilityStats::default()), 0.5);
    }

    #[test]
    fn send_and_termination_accounting() {
        let mut stats = FutilityStats::default();
        for _ in 0..10 {
            stats.record_send();
        }
        stats.record_termination(10);
        assert_eq!(futility_risk(&stats), 0.9);

        // A run with zero traffic earns no credit.
        stats.record_termination(0);
        assert_eq!(stats.termination_count, 1);

        // Three further runs: two terminated, one abandoned.
        for (sends, terminated) in [(5u64, true), (7, true), (8, false)] {
            for _ in 0..sends {
                stats.record_send();
            }
            if terminated {
                stats.record_termination(sends);
            }
        }
        assert_eq!(
            stats,
            FutilityStats {
                count: 30,
                termination_count: 3
            }
        );
        assert_eq!(futility_risk(&stats), 0.9);
    }

    #[test]
    fn cost_recursion_matches_worked_examples() {
        // Half-risk over costs (1, 2, 4): 1 + 2/2 + 4/4 = 3.
        assert_eq!(calculate_cost(0.5, &[1.0, 2.0, 4.0], 1.0), Ok(3.0));
        // Certain continuation reveals everything: 1 + 2 + 4 = 7.
        assert_eq!(calculate_cost(1.0, &[1.0, 2.0, 4.0], 1.0), Ok(7.0));
        // Base case with scaled entry probability.
        assert_eq!(calculate_cost(0.3, &[6.0], 0.25), Ok(1.5));
        // Tail of the demo ledger: 4 + 2/2 = 5.
        assert_eq!(calculate_cost(0.5, &[4.0, 2.0], 1.0), Ok(5.0));
    }

    #[test]
    fn cost_recursion_rejects_bad_input() {
        assert_eq!(calculate_cost(0.5, &[], 1.0), Err(UtilityError::EmptyCosts));
        assert_eq!(
            calculate_cost(1.5, &[1.0], 1.0),
            Err(UtilityError::BadProbability(1.5))
        );
        assert_eq!(
            calculate_cost(0.5, &[1.0], -0.1),
            Err(UtilityError::BadProbability(-0.1))
        );
    }

    #[test]
    fn interrupt_threshold_is_inclusive() {
        let inst = crate::model::tests::meeting3();
        let mut ledger = PrivacyLedger::new(3);

        // Fresh first agent: estimate 3 < reward 5, keep going.
        let d = decide_continue(&ledger, 0.5, &[1.0, 2.0, 4.0], 5, 0);
        assert_eq!(d.decision, Decision::Continue);
        assert_eq!(d.estimated_cost, 3.0);

        // Second agent has sunk its first slot; next send stakes (4, 2):
        // 1 + 4 + 2/2 = 6 >= 5 interrupts.
        ledger.charge(&inst, 1, 0).unwrap();
        let d = decide_continue(&ledger, 0.5, &[4.0, 2.0], 5, 1);
        assert_eq!(d.decision, Decision::Interrupt);
        assert_eq!(d.estimated_cost, 6.0);

        // Exact equality interrupts too.
        let d = decide_continue(&ledger, 0.5, &[2.0, 4.0], 5, 1);
        assert_eq!(d.estimated_cost, 5.0);
        assert_eq!(d.decision, Decision::Interrupt);

        // All-zero costs never interrupt under a positive reward.
        let d = decide_continue(&ledger, 0.9, &[0.0, 0.0, 0.0], 1, 2);
        assert_eq!(d.decision, Decision::Continue);
    }

    #[test]
    fn stats_file_round_trip_and_shape() {
        let mut stats = StatsFile {
            global: FutilityStats {
                count: 20,
                termination_count: 2,
            },
            by_density: BTreeMap::new(),
        };
        stats.by_density.insert(
            StatsFile::density_key(0.3),
            FutilityStats {
                count: 5,
                termination_count: 1,
            },
        );

        let text = serde_json::to_string(&stats).unwrap();
        // Global counters live at the top level of the document.
        assert!(text.contains("\"count\":20"));
        assert!(text.contains("\"terminationCount\":2"));
        assert!(text.contains("\"0.300\""));
        assert_eq!(serde_json::from_str::<StatsFile>(&text).unwrap(), stats);

        // Buckets are optional on disk.
        let flat: StatsFile = serde_json::from_str(r#"{"count":4,"terminationCount":4}"#).unwrap();
        assert_eq!(futility_risk(&flat.global), 0.0);
        assert!(flat.by_density.is_empty());
    }

    proptest! {
        #[test]
        fn recursion_equals_closed_form(
            risk in 0.0f64..=1.0,
            prob_d in 0.0f64..=1.0,
            costs in proptest::collection::vec(0.0f64..100.0, 1..=8),
        ) {
            let got = calculate_cost(risk, &costs, prob_d).unwrap();
            prop_assert!((got - closed_form(risk, &costs, prob_d)).abs() <= 1e-12);
        }

        #[test]
        fn cost_is_monotone_and_bounded(
            risk in 0.0f64..=1.0,
            bump in 0.0f64..0.5,
            prob_d in 0.0f64..=1.0,
            costs in proptest::collection::vec(0.0f64..100.0, 1..=8),
            raise_idx in 0usize..8,
        ) {
            let base = calculate_cost(risk, &costs, prob_d).unwrap();

            // Nondecreasing in risk and in the entry probability.
            let higher_risk = (risk + bump).min(1.0);
            prop_assert!(calculate_cost(higher_risk, &costs, prob_d).unwrap() >= base - 1e-12);
            let higher_prob = (prob_d + bump).min(1.0);
            prop_assert!(calculate_cost(risk, &costs, higher_prob).unwrap() >= base - 1e-12);

            // Nondecreasing in each marginal cost.
            let mut raised = costs.clone();
            let idx = raise_idx % raised.len();
            raised[idx] += 1.0;
            prop_assert!(calculate_cost(risk, &raised, prob_d).unwrap() >= base - 1e-12);

            // Bounds: at least the certain head, at most everything.
            let total: f64 = costs.iter().sum();
            prop_assert!(base >= prob_d * costs[0] - 1e-12);
            prop_assert!(base <= prob_d * total + 1e-12);
        }

        #[test]
        fn bounds_are_tight_at_risk_extremes(
            prob_d in 0.0f64..=1.0,
            costs in proptest::collection::vec(0.0f64..100.0, 1..=8),
        ) {
            let at_zero = calculate_cost(0.0, &costs, prob_d).unwrap();
            prop_assert!((at_zero - prob_d * costs[0]).abs() <= 1e-12);
            let at_one = calculate_cost(1.0, &costs, prob_d).unwrap();
            let total: f64 = costs.iter().sum();
            prop_assert!((at_one - prob_d * total).abs() <= 1e-9);
        }

        #[test]
        fn interrupt_is_monotone_in_reward(
            risk in 0.0f64..=1.0,
            costs in proptest::collection::vec(0.0f64..20.0, 1..=6),
            reward in 0u64..100,
            extra in 1u64..50,
        ) {
            let ledger = PrivacyLedger::new(1);
            let low = decide_continue(&ledger, risk, &costs, reward, 0);
            let high = decide_continue(&ledger, risk, &costs, reward + extra, 0);
            // Raising the reward can only move Interrupt toward Continue.
            if low.decision == Decision::Continue {
                prop_assert_eq!(high.decision, Decision::Continue);
            }
        }
    }
}
