//! Utilitarian distributed constraint satisfaction.
//!
//! Agents with private availabilities pick a common value by message
//! passing. Four solvers are provided: synchronous and asynchronous
//! backtracking (`syncbt`, `abt`), and utilitarian variants (`syncbtu`,
//! `abtu`) that weigh the expected privacy cost of continuing against
//! the reward for agreeing and interrupt the search when it stops being
//! worth it. A deterministic simulated network makes every run, trace,
//! and benchmark reproducible from its seeds.
//!
//! Typical flow: [`generator::generate`] an instance (or load one with
//! [`model::load_instance`]), run [`solvers::solve`], inspect the
//! [`runtime::Outcome`] for status, message trace, and per-agent
//! privacy loss. [`bench::run_batch`] wires the same pieces into
//! paired-seed sweeps across a density grid.

pub mod bench;
pub mod generator;
pub mod model;
pub mod runtime;
pub mod solvers;
pub mod utility;

pub use model::{Assignment, Instance, PrivacyLedger};
pub use runtime::{Outcome, RiskSettings, SchedulerPolicy, Status};
pub use solvers::{solve, Algo};
