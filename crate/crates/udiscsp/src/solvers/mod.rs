//! The four agent policies and a one-call entry point for running them.
//!
//! `syncbt` and `abt` search for the all-equal agreement without regard
//! to privacy. Their utilitarian counterparts `syncbtu` and `abtu` run
//! the same search but test, before any Ok? or Nogood that would reveal
//! a new value, whether the expected remaining revelation cost still
//! fits under the agent's reward, and interrupt the run when it does
//! not.

mod abt;
mod syncbt;

pub use abt::AbtAgent;
pub use syncbt::SyncBtAgent;

use std::fmt;

use crate::model::Instance;
use crate::runtime::{
    default_step_limit, AgentBehavior, Ctx, Outcome, RiskSettings, SchedulerPolicy, World,
};
use crate::utility::{decide_continue, Decision};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algo {
    SyncBt,
    Abt,
    SyncBtU,
    AbtU,
}

impl Algo {
    pub const ALL: [Algo; 4] = [Algo::SyncBt, Algo::Abt, Algo::SyncBtU, Algo::AbtU];

    pub fn name(self) -> &'static str {
        match self {
            Algo::SyncBt => "syncbt",
            Algo::Abt => "abt",
            Algo::SyncBtU => "syncbtu",
            Algo::AbtU => "abtu",
        }
    }

    pub fn from_name(name: &str) -> Option<Algo> {
        match name.to_ascii_lowercase().as_str() {
            "syncbt" => Some(Algo::SyncBt),
            "abt" => Some(Algo::Abt),
            "syncbtu" => Some(Algo::SyncBtU),
            "abtu" => Some(Algo::AbtU),
            _ => None,
        }
    }

    /// Whether sends are guarded by the interruption test.
    pub fn utilitarian(self) -> bool {
        matches!(self, Algo::SyncBtU | Algo::AbtU)
    }

    /// The unguarded algorithm this one searches like.
    pub fn base(self) -> Algo {
        match self {
            Algo::SyncBtU => Algo::SyncBt,
            Algo::AbtU => Algo::Abt,
            other => other,
        }
    }
}

impl fmt::Display for Algo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

pub fn build_agents(instance: &Instance, algo: Algo) -> Vec<Box<dyn AgentBehavior>> {
    (0..instance.n)
        .map(|i| match algo.base() {
            Algo::SyncBt => Box::new(SyncBtAgent::new(instance, i, algo.utilitarian()))
                as Box<dyn AgentBehavior>,
            Algo::Abt => Box::new(AbtAgent::new(instance, i, algo.utilitarian())),
            _ => unreachable!("base() returns an unguarded algorithm"),
        })
        .collect()
}

/// Runs one algorithm on one instance to completion.
pub fn solve(
    instance: &Instance,
    algo: Algo,
    policy: SchedulerPolicy,
    risk: RiskSettings,
    step_limit: Option<u64>,
) -> Outcome {
    let agents = build_agents(instance, algo);
    let world = World::new(instance, agents, policy, risk);
    world.run_to_completion(step_limit.unwrap_or_else(|| default_step_limit(instance.n)))
}

/// Interruption test for a send that would newly reveal `revealing`
/// (ascending value order). A send that reveals nothing is never
/// interrupted. At stake are first the values this send publicizes,
/// then the agent's other still-hidden values, each discounted by one
/// more factor of the futility risk.
pub(crate) fn utility_guard(ctx: &mut Ctx<'_>, revealing: &[usize]) -> Decision {
    if revealing.is_empty() {
        return Decision::Continue;
    }
    let mut stake: Vec<f64> = Vec::with_capacity(ctx.instance.d);
    for &v in revealing {
        stake.push(ctx.marginal_cost(v) as f64);
    }
    for v in 0..ctx.instance.d {
        if !ctx.is_revealed(v) && !revealing.contains(&v) {
            stake.push(ctx.marginal_cost(v) as f64);
        }
    }
    let outcome = decide_continue(
        ctx.ledger(),
        ctx.current_risk(),
        &stake,
        ctx.reward(),
        ctx.agent,
    );
    if outcome.decision == Decision::Interrupt {
        ctx.interrupt(outcome.estimated_cost);
    }
    outcome.decision
}

/// Values whose unavailability a backtrack or halt newly publicizes:
/// outside the agent's domain, not already revealed, and not publicly
/// deducible (`blocked`) from assignments or nogoods others have seen.
pub(crate) fn exhaustion_reveals(ctx: &Ctx<'_>, blocked: impl Fn(usize) -> bool) -> Vec<usize> {
    (0..ctx.instance.d)
        .filter(|&v| !ctx.instance.is_available(ctx.agent, v) && !ctx.is_revealed(v) && !blocked(v))
        .collect()
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::model::tests::meeting3;
    use crate::model::{Instance, RawInstance};
    use crate::runtime::Status;
    use crate::utility::RiskMode;

    fn run(instance: &Instance, algo: Algo) -> Outcome {
        solve(
            instance,
            algo,
            SchedulerPolicy::PriorityOrder,
            RiskSettings::default(),
            None,
        )
    }

    #[test]
    fn algo_names_round_trip() {
        for algo in Algo::ALL {
            assert_eq!(Algo::from_name(algo.name()), Some(algo));
            assert!(!algo.base().utilitarian());
        }
        assert_eq!(Algo::from_name("ABTU"), Some(Algo::AbtU));
        assert_eq!(Algo::from_name("bogus"), None);
    }

    #[test]
    fn syncbt_demo_trace_is_pinned() {
        let inst = meeting3();
        let outcome = run(&inst, Algo::SyncBt);
        assert_eq!(outcome.status, Status::NoSolution);
        assert_eq!(outcome.stopped_by, Some(0));
        assert_eq!(
            outcome.trace,
            vec![
                "M1 (OK?(x1=1)) 1→2",
                "M2 (OK?(x2=1)) 2→3",
                "M3 (BT(x2=1)) 3→2",
                "M4 (BT(x1=1)) 2→1",
                "M5 (OK?(x1=2)) 1→2",
                "M6 (BT(x1=2)) 2→1",
            ]
        );
        assert_eq!(outcome.messages, 6);
        assert_eq!(outcome.ledger.loss_per_agent(), &[7, 3, 1]);
    }

    #[test]
    fn abt_demo_trace_is_pinned() {
        let inst = meeting3();
        let outcome = run(&inst, Algo::Abt);
        assert_eq!(outcome.status, Status::NoSolution);
        assert_eq!(outcome.stopped_by, Some(0));
        assert_eq!(
            outcome.trace,
            vec![
                "M1 (OK?(x1=1)) 1→2",
                "M2 (OK?(x2=1)) 2→3",
                "M3 (OK?(x1=1)) 1→3",
                "M4 (BT(x2=1)) 3→2",
                "M5 (BT(x1=1)) 2→1",
                "M6 (OK?(x2=3)) 2→3",
                "M7 (OK?(x1=2)) 1→2",
                "M8 (OK?(x1=2)) 1→3",
                "M9 (BT(x1=2)) 2→1",
            ]
        );
        assert_eq!(outcome.messages, 9);
        assert_eq!(outcome.ledger.loss_per_agent(), &[7, 7, 1]);
    }

    #[test]
    fn syncbtu_interrupts_at_second_proposal() {
        let inst = meeting3();
        let outcome = run(&inst, Algo::SyncBtU);
        assert_eq!(outcome.status, Status::Interrupted);
        assert_eq!(outcome.stopped_by, Some(0));
        // Sunk 1 plus 2 now plus 4 at even odds meets the reward of 5.
        assert_eq!(outcome.interrupt_estimate, Some(5.0));
        assert_eq!(outcome.messages, 4);
        assert_eq!(outcome.ledger.loss_per_agent(), &[1, 1, 1]);
    }

    #[test]
    fn abtu_interrupts_before_second_announcement() {
        let inst = meeting3();
        let outcome = run(&inst, Algo::AbtU);
        assert_eq!(outcome.status, Status::Interrupted);
        assert_eq!(outcome.stopped_by, Some(1));
        // Sunk 1 plus 4 now plus 2 at even odds exceeds the reward of 5.
        assert_eq!(outcome.interrupt_estimate, Some(6.0));
        assert_eq!(outcome.ledger.loss_per_agent(), &[1, 1, 1]);
        assert_eq!(outcome.ledger.loss(1), inst.costs[1][0]);
    }

    #[test]
    fn generous_reward_lets_the_guarded_run_finish() {
        let mut raw = RawInstance::from(meeting3());
        raw.rewards = vec![100; 3];
        let inst = Instance::try_from(raw).unwrap();
        for algo in [Algo::SyncBtU, Algo::AbtU] {
            let outcome = run(&inst, algo);
            let base = run(&inst, algo.base());
            assert_eq!(outcome.status, Status::NoSolution);
            assert_eq!(outcome.trace, base.trace);
            assert_eq!(
                outcome.ledger.loss_per_agent(),
                base.ledger.loss_per_agent()
            );
        }
    }

    #[test]
    fn online_risk_uses_run_sends() {
        // Same instance, online mode with empty stats: the risk starts
        // at the default and rises as this run's messages accumulate,
        // which can only make interruption earlier, never later.
        let inst = meeting3();
        let risk = RiskSettings {
            mode: RiskMode::Online,
            default_risk: 0.5,
            stats: None,
        };
        let outcome = solve(
            &inst,
            Algo::AbtU,
            SchedulerPolicy::PriorityOrder,
            risk,
            None,
        );
        assert_eq!(outcome.status, Status::Interrupted);
    }

    fn arbitrary_instance(
        max_n: usize,
        max_d: usize,
        max_cost: i64,
        reward: i64,
    ) -> impl Strategy<Value = Instance> {
        (1..=max_n, 1..=max_d).prop_flat_map(move |(n, d)| {
            (
                proptest::collection::vec(proptest::collection::vec(any::<bool>(), d), n),
                proptest::collection::vec(proptest::collection::vec(0..=max_cost, d), n),
            )
                .prop_map(move |(availability, costs)| {
                    Instance::try_from(RawInstance {
                        n,
                        d,
                        availability,
                        costs,
                        rewards: vec![reward; n],
                    })
                    .unwrap()
                })
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        // Both searches are sound and complete on small instances, under
        // both scheduling policies.
        #[test]
        fn searches_match_brute_force(
            inst in arbitrary_instance(4, 3, 5, 1_000),
            seed in any::<u64>(),
            algo_idx in 0usize..2,
        ) {
            let algo = [Algo::SyncBt, Algo::Abt][algo_idx];
            for policy in [
                SchedulerPolicy::PriorityOrder,
                SchedulerPolicy::SeededRandom { seed },
            ] {
                let outcome = solve(&inst, algo, policy, RiskSettings::default(), None);
                let expected = crate::generator::brute_force_solve(&inst);
                match expected {
                    Some(_) => {
                        prop_assert_eq!(outcome.status, Status::Agreement);
                        let values = outcome.final_assignment.unwrap().values;
                        let v0 = values[0].unwrap();
                        prop_assert!(values.iter().all(|&v| v == Some(v0)));
                        prop_assert!(inst.availability.iter().all(|row| row[v0]));
                    }
                    None => prop_assert_eq!(outcome.status, Status::NoSolution),
                }
            }
        }

        // With nothing to lose, the guard never fires: guarded runs are
        // outcome-identical to their base algorithm.
        #[test]
        fn zero_cost_guarded_runs_match_base(
            inst in arbitrary_instance(4, 3, 0, 7),
            seed in any::<u64>(),
        ) {
            for (u, base) in [(Algo::SyncBtU, Algo::SyncBt), (Algo::AbtU, Algo::Abt)] {
                let policy = SchedulerPolicy::SeededRandom { seed };
                let guarded = solve(&inst, u, policy, RiskSettings::default(), None);
                let plain = solve(&inst, base, policy, RiskSettings::default(), None);
                prop_assert_eq!(guarded.status, plain.status);
                prop_assert_eq!(
                    guarded.final_assignment.map(|a| a.values),
                    plain.final_assignment.map(|a| a.values)
                );
                prop_assert_eq!(guarded.trace, plain.trace);
            }
        }
    }
}
