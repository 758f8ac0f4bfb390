//! Problem instances, assignments, and privacy-loss accounting.
//!
//! An instance describes `n` agents that must agree on one of `d` values
//! (identifiers `1..=d` externally, `0..d` internally). Each agent has a
//! private availability row, a per-value revelation cost, and a reward it
//! collects if the agents reach an agreement. The single interagent
//! constraint is "all values equal"; it is treated as pairwise equality
//! between every pair of agents, directed from higher priority (lower
//! index) to lower priority.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// On-disk shape of an instance, prior to validation.
///
/// Costs and rewards are signed here so that documents with negative
/// entries can be read and reported as violations instead of failing
/// opaquely during deserialization.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RawInstance {
    pub n: usize,
    pub d: usize,
    pub availability: Vec<Vec<bool>>,
    pub costs: Vec<Vec<i64>>,
    pub rewards: Vec<i64>,
}

/// A single validation failure, naming the offending field.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub field: &'static str,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

impl RawInstance {
    /// Checks every structural invariant and returns all failures.
    pub fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let mut push = |field, message: String| out.push(Violation { field, message });

        if self.n == 0 {
            push("n", "agent count must be positive".into());
        }
        if self.d == 0 {
            push("d", "domain size must be positive".into());
        }
        if self.availability.len() != self.n {
            push(
                "availability",
                format!(
                    "expected {} rows, found {}",
                    self.n,
                    self.availability.len()
                ),
            );
        }
        for (i, row) in self.availability.iter().enumerate() {
            if row.len() != self.d {
                push(
                    "availability",
                    format!("row {} has {} entries, expected {}", i, row.len(), self.d),
                );
            }
        }
        if self.costs.len() != self.n {
            push(
                "costs",
                format!("expected {} rows, found {}", self.n, self.costs.len()),
            );
        }
        for (i, row) in self.costs.iter().enumerate() {
            if row.len() != self.d {
                push(
                    "costs",
                    format!("row {} has {} entries, expected {}", i, row.len(), self.d),
                );
            }
            if let Some(c) = row.iter().find(|&&c| c < 0) {
                push("costs", format!("row {} contains negative cost {}", i, c));
            }
        }
        if self.rewards.len() != self.n {
            push(
                "rewards",
                format!("expected {} entries, found {}", self.n, self.rewards.len()),
            );
        }
        if let Some(r) = self.rewards.iter().find(|&&r| r < 0) {
            push("rewards", format!("negative reward {}", r));
        }
        out
    }
}

/// Raised when a raw document fails validation.
#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("invalid instance: {}", .violations.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
pub struct InvalidInstance {
    pub violations: Vec<Violation>,
}

/// A validated problem instance.
///
/// Invariants (upheld by construction via [`RawInstance`] validation):
/// all matrices are exactly `n` by `d` and costs/rewards are nonnegative.
/// An agent with an all-false availability row is legal input; the
/// instance is then unsolvable.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawInstance", into = "RawInstance")]
pub struct Instance {
    pub n: usize,
    pub d: usize,
    pub availability: Vec<Vec<bool>>,
    pub costs: Vec<Vec<u64>>,
    pub rewards: Vec<u64>,
}

impl TryFrom<RawInstance> for Instance {
    type Error = InvalidInstance;

    fn try_from(raw: RawInstance) -> Result<Self, Self::Error> {
        let violations = raw.violations();
        if !violations.is_empty() {
            return Err(InvalidInstance { violations });
        }
        Ok(Instance {
            n: raw.n,
            d: raw.d,
            availability: raw.availability,
            costs: raw
                .costs
                .into_iter()
                .map(|r| r.into_iter().map(|c| c as u64).collect())
                .collect(),
            rewards: raw.rewards.into_iter().map(|r| r as u64).collect(),
        })
    }
}

impl From<Instance> for RawInstance {
    fn from(inst: Instance) -> Self {
        RawInstance {
            n: inst.n,
            d: inst.d,
            availability: inst.availability,
            costs: inst
                .costs
                .into_iter()
                .map(|r| r.into_iter().map(|c| c as i64).collect())
                .collect(),
            rewards: inst.rewards.into_iter().map(|r| r as i64).collect(),
        }
    }
}

impl Instance {
    /// True iff `value` is in agent `agent`'s private domain.
    pub fn is_available(&self, agent: usize, value: usize) -> bool {
        self.availability[agent][value]
    }

    /// Agent's available values in ascending order.
    pub fn domain(&self, agent: usize) -> Vec<usize> {
        (0..self.d)
            .filter(|&v| self.availability[agent][v])
            .collect()
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ModelError {
    #[error("agent index {0} out of range")]
    AgentOutOfRange(usize),
    #[error("value index {0} out of range")]
    ValueOutOfRange(usize),
    #[error("assignment has {got} entries, instance has {expected} agents")]
    LengthMismatch { got: usize, expected: usize },
    #[error("agent {0} is unassigned")]
    Unassigned(usize),
}

/// A (possibly partial) assignment of one value per agent, 0-based.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    pub values: Vec<Option<usize>>,
}

impl Assignment {
    pub fn unassigned(n: usize) -> Self {
        Assignment {
            values: vec![None; n],
        }
    }

    pub fn from_values(values: Vec<usize>) -> Self {
        Assignment {
            values: values.into_iter().map(Some).collect(),
        }
    }
}

/// True iff the assignment is an agreement: fully assigned, all values
/// equal some `k`, and `k` is available to every agent. Partially
/// assigned input is rejected.
pub fn is_agreement(instance: &Instance, assignment: &Assignment) -> Result<bool, ModelError> {
    if assignment.values.len() != instance.n {
        return Err(ModelError::LengthMismatch {
            got: assignment.values.len(),
            expected: instance.n,
        });
    }
    let mut common = None;
    for (i, entry) in assignment.values.iter().enumerate() {
        let v = entry.ok_or(ModelError::Unassigned(i))?;
        if v >= instance.d {
            return Err(ModelError::ValueOutOfRange(v));
        }
        if *common.get_or_insert(v) != v || !instance.is_available(i, v) {
            // Keep scanning: out-of-range or unassigned entries later in
            // the vector must still surface as errors, not `false`.
            common = Some(usize::MAX);
        }
    }
    Ok(common.map_or(instance.n == 0, |k| k != usize::MAX))
}

/// Record of which availability facts each agent has revealed, and the
/// cost charged for each. A fact is charged at most once: revelation
/// makes it public, so repeating it is free.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrivacyLedger {
    revealed: BTreeSet<(usize, usize)>,
    loss_per_agent: Vec<u64>,
}

impl PrivacyLedger {
    pub fn new(n: usize) -> Self {
        PrivacyLedger {
            revealed: BTreeSet::new(),
            loss_per_agent: vec![0; n],
        }
    }

    pub fn is_revealed(&self, agent: usize, value: usize) -> bool {
        self.revealed.contains(&(agent, value))
    }

    /// Cost the agent would incur by revealing `(agent, value)` now:
    /// the matrix entry if unrevealed, else zero.
    pub fn marginal_cost(
        &self,
        instance: &Instance,
        agent: usize,
        value: usize,
    ) -> Result<u64, ModelError> {
        check_indices(instance, agent, value)?;
        if self.is_revealed(agent, value) {
            Ok(0)
        } else {
            Ok(instance.costs[agent][value])
        }
    }

    /// Marks `(agent, value)` revealed and charges its marginal cost.
    /// Returns the amount charged (zero on repeat charges).
    pub fn charge(
        &mut self,
        instance: &Instance,
        agent: usize,
        value: usize,
    ) -> Result<u64, ModelError> {
        let marginal = self.marginal_cost(instance, agent, value)?;
        self.revealed.insert((agent, value));
        self.loss_per_agent[agent] += marginal;
        Ok(marginal)
    }

    pub fn loss(&self, agent: usize) -> u64 {
        self.loss_per_agent[agent]
    }

    pub fn loss_per_agent(&self) -> &[u64] {
        &self.loss_per_agent
    }

    pub fn total_loss(&self) -> u64 {
        self.loss_per_agent.iter().sum()
    }

    pub fn revealed_pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.revealed.iter().copied()
    }

    /// Agent's values not yet revealed, ascending. This is the candidate
    /// list for future-revelation cost estimates.
    pub fn unrevealed_values(&self, instance: &Instance, agent: usize) -> Vec<usize> {
        (0..instance.d)
            .filter(|&v| !self.is_revealed(agent, v))
            .collect()
    }
}

fn check_indices(instance: &Instance, agent: usize, value: usize) -> Result<(), ModelError> {
    if agent >= instance.n {
        return Err(ModelError::AgentOutOfRange(agent));
    }
    if value >= instance.d {
        return Err(ModelError::ValueOutOfRange(value));
    }
    Ok(())
}

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse: {0}")]
    Parse(#[from] serde_json::Error),
    #[error(transparent)]
    Invalid(#[from] InvalidInstance),
}

/// Reads and validates an instance document.
pub fn load_instance(path: &Path) -> Result<Instance, LoadError> {
    let text = std::fs::read_to_string(path)?;
    let raw: RawInstance = serde_json::from_str(&text)?;
    Ok(Instance::try_from(raw)?)
}

/// Writes an instance as a pretty-printed, round-trip-stable document.
pub fn save_instance(instance: &Instance, path: &Path) -> Result<(), LoadError> {
    let raw = RawInstance::from(instance.clone());
    let mut text = serde_json::to_string_pretty(&raw)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}
