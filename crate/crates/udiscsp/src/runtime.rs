//! Deterministic simulated message-passing substrate: mailboxes,
//! scheduling, quiescence detection, and trace recording for any solver.
//!
//! The world drives agents through two kinds of steps. A delivery step
//! pops one message and hands it to the recipient, which only updates
//! its local state. A react step lets one agent act on everything it has
//! absorbed: choose values, charge revelations, and send. Deliveries
//! always preempt reacts, so an agent reacts to its full pending mail
//! rather than to one message at a time. At startup every agent reacts
//! once, in priority order, before any delivery.
//!
//! Under the priority-order policy a delivery goes to the lowest-index
//! agent with mail, taking the channel whose sender is nearest to the
//! recipient (ties toward the lower sender index) and FIFO within the
//! channel; reacts go to the lowest-index pending agent. The
//! seeded-random policy draws both choices from a ChaCha8 stream.

use std::collections::VecDeque;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::{Assignment, Instance, PrivacyLedger};
use crate::utility::{futility_risk, FutilityStats, RiskMode};

/// How the world picks the next delivery and the next react.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchedulerPolicy {
    /// Deterministic priority order; the default for trace reproduction.
    PriorityOrder,
    /// Seeded shuffle of deliveries and reacts; the default for benches.
    SeededRandom { seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    /// An agent judged further revelation not worth its reward.
    Interrupted,
    /// An agent proved no agreement exists.
    Exhausted,
}

/// Protocol vocabulary. Indices are 0-based internally and rendered
/// 1-based in traces.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MessageBody {
    /// Proposal: the sender's variable takes this value.
    Ok { var: usize, value: usize },
    /// The listed assignments cannot all hold. Sorted by agent index;
    /// the recipient's own pair is last.
    Nogood { pairs: Vec<(usize, usize)> },
    /// Request to open a link from the recipient to the sender's var.
    AddLink { var: usize },
    /// Halt signal. Never queued or traced: the run stops immediately.
    Stop { reason: StopReason },
}

impl fmt::Display for MessageBody {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MessageBody::Ok { var, value } => write!(f, "OK?(x{}={})", var + 1, value + 1),
            MessageBody::Nogood { pairs } => {
                write!(f, "BT(")?;
                for (k, (var, value)) in pairs.iter().enumerate() {
                    if k > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "x{}={}", var + 1, value + 1)?;
                }
                write!(f, ")")
            }
            MessageBody::AddLink { var } => write!(f, "AddLink(x{})", var + 1),
            MessageBody::Stop { reason } => match reason {
                StopReason::Interrupted => write!(f, "STOP(interrupted)"),
                StopReason::Exhausted => write!(f, "STOP(exhausted)"),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Message {
    pub sender: usize,
    pub recipient: usize,
    pub body: MessageBody,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Agreement,
    NoSolution,
    Interrupted,
    StepLimit,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Status::Agreement => "agreement",
            Status::NoSolution => "no-solution",
            Status::Interrupted => "interrupted",
            Status::StepLimit => "step-limit",
        };
        f.write_str(name)
    }
}

/// Result of a complete run.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub status: Status,
    /// Present exactly when the run ended in agreement.
    pub final_assignment: Option<Assignment>,
    pub ledger: PrivacyLedger,
    /// Messages delivered; equals the number of trace lines.
    pub messages: u64,
    /// Scheduler steps taken (deliveries plus reacts, including boot).
    pub steps: u64,
    /// Messages enqueued, delivered or not.
    pub sends: u64,
    /// Ok?/Nogood subset of `sends`; the quantity futility statistics
    /// are learned from.
    pub protocol_sends: u64,
    /// Agent that emitted Stop, for interrupted/no-solution runs.
    pub stopped_by: Option<usize>,
    /// The estimated cost that triggered an interruption.
    pub interrupt_estimate: Option<f64>,
    pub trace: Vec<String>,
}

impl Outcome {
    /// The rendered trace, one line per delivered message.
    pub fn trace_text(&self) -> String {
        self.trace.join("\n")
    }
}

/// Risk inputs for utility-guarded solvers. Plain SyncBT/ABT ignore it.
#[derive(Debug, Clone, Copy)]
pub struct RiskSettings {
    pub mode: RiskMode,
    /// Risk used when no statistics are available (cold start).
    pub default_risk: f64,
    /// Persisted statistics from earlier runs, if any.
    pub stats: Option<FutilityStats>,
}

impl Default for RiskSettings {
    fn default() -> Self {
        RiskSettings {
            mode: RiskMode::Offline,
            default_risk: 0.5,
            stats: None,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Halt {
    agent: usize,
    reason: StopReason,
    estimate: Option<f64>,
}

/// What a solver plugs into the world. `on_message` only absorbs state;
/// all sends, charges, and stop decisions happen in `react`.
pub trait AgentBehavior {
    fn on_message(&mut self, sender: usize, body: &MessageBody);
    fn react(&mut self, ctx: &mut Ctx<'_>);
    /// Locally consistent and holding a value; quiescence with every
    /// agent consistent is an agreement.
    fn is_consistent(&self) -> bool;
    fn current_value(&self) -> Option<usize>;
}

/// An agent's window onto the world during a react step.
pub struct Ctx<'a> {
    pub agent: usize,
    pub instance: &'a Instance,
    ledger: &'a mut PrivacyLedger,
    channels: &'a mut Vec<Vec<VecDeque<MessageBody>>>,
    halt: &'a mut Option<Halt>,
    sends: &'a mut u64,
    risk: &'a mut RiskState,
}

impl Ctx<'_> {
    /// Enqueues a protocol message. Stop is not sendable; use
    /// [`Ctx::stop_exhausted`] or [`Ctx::interrupt`].
    pub fn send(&mut self, recipient: usize, body: MessageBody) {
        assert!(
            recipient != self.agent && recipient < self.instance.n,
            "bad recipient"
        );
        match &body {
            MessageBody::Stop { .. } => panic!("stop is a halt signal, not a queued message"),
            MessageBody::Ok { value, .. } => {
                debug_assert!(*value < self.instance.d);
                self.risk.run_protocol_sends += 1;
            }
            MessageBody::Nogood { .. } => self.risk.run_protocol_sends += 1,
            MessageBody::AddLink { .. } => {}
        }
        *self.sends += 1;
        self.channels[recipient][self.agent].push_back(body);
    }

    /// Marks one of the agent's own values revealed and charges it.
    pub fn charge(&mut self, value: usize) -> u64 {
        self.ledger
            .charge(self.instance, self.agent, value)
            .expect("indices in range")
    }

    pub fn is_revealed(&self, value: usize) -> bool {
        self.ledger.is_revealed(self.agent, value)
    }

    pub fn marginal_cost(&self, value: usize) -> u64 {
        self.ledger
            .marginal_cost(self.instance, self.agent, value)
            .expect("indices in range")
    }

    /// Privacy loss already charged to this agent.
    pub fn sunk_loss(&self) -> u64 {
        self.ledger.loss(self.agent)
    }

    pub fn ledger(&self) -> &PrivacyLedger {
        self.ledger
    }

    pub fn reward(&self) -> u64 {
        self.instance.rewards[self.agent]
    }

    /// Futility risk as of now: frozen at run start in offline mode, or
    /// refreshed with this run's sends in online mode.
    pub fn current_risk(&self) -> f64 {
        self.risk.current()
    }

    /// Announce that no agreement exists. Halts the run.
    pub fn stop_exhausted(&mut self) {
        debug_assert!(self.halt.is_none(), "second stop after halt");
        *self.halt = Some(Halt {
            agent: self.agent,
            reason: StopReason::Exhausted,
            estimate: None,
        });
    }

    /// Abandon the search as not worth its cost. Halts the run.
    pub fn interrupt(&mut self, estimated_cost: f64) {
        debug_assert!(self.halt.is_none(), "second stop after halt");
        *self.halt = Some(Halt {
            agent: self.agent,
            reason: StopReason::Interrupted,
            estimate: Some(estimated_cost),
        });
    }

    /// True once this react (or an earlier one) requested a halt;
    /// further work in the react is pointless.
    pub fn halted(&self) -> bool {
        self.halt.is_some()
    }
}

#[derive(Debug, Clone, Copy)]
struct RiskState {
    mode: RiskMode,
    default_risk: f64,
    /// Risk snapshot taken at run start (offline mode uses it as-is).
    frozen: f64,
    /// Counters carried in from persisted stats.
    base: FutilityStats,
    run_protocol_sends: u64,
}

impl RiskState {
    fn new(settings: RiskSettings) -> Self {
        let base = settings.stats.unwrap_or_default();
        let frozen = if base.count == 0 {
            settings.default_risk
        } else {
            futility_risk(&base)
        };
        RiskState {
            mode: settings.mode,
            default_risk: settings.default_risk,
            frozen,
            base,
            run_protocol_sends: 0,
        }
    }

    fn current(&self) -> f64 {
        match self.mode {
            RiskMode::Offline => self.frozen,
            RiskMode::Online => {
                // Each send so far is one more observed message that has
                // not (yet) terminated anything.
                let live = FutilityStats {
                    count: self.base.count + self.run_protocol_sends,
                    termination_count: self.base.termination_count,
                };
                if live.count == 0 {
                    self.default_risk
                } else {
                    futility_risk(&live)
                }
            }
        }
    }
}

/// Step limit used when callers do not override it.
pub fn default_step_limit(n: usize) -> u64 {
    10_000 * n as u64
}

pub struct World<'a> {
    instance: &'a Instance,
    agents: Vec<Box<dyn AgentBehavior>>,
    /// channels[recipient][sender], FIFO per ordered pair.
    channels: Vec<Vec<VecDeque<MessageBody>>>,
    needs_react: Vec<bool>,
    ledger: PrivacyLedger,
    halt: Option<Halt>,
    rng: Option<ChaCha8Rng>,
    risk: RiskState,
    delivered: u64,
    sends: u64,
    steps: u64,
    trace: Vec<String>,
}

impl<'a> World<'a> {
    /// Builds the world and boots it: every agent reacts once, highest
    /// priority first, so initial proposals are queued before the first
    /// delivery.
    pub fn new(
        instance: &'a Instance,
        agents: Vec<Box<dyn AgentBehavior>>,
        policy: SchedulerPolicy,
        risk: RiskSettings,
    ) -> Self {
        assert_eq!(agents.len(), instance.n, "one agent per variable");
        let n = instance.n;
        let mut world = World {
            instance,
            agents,
            channels: vec![vec![VecDeque::new(); n]; n],
            needs_react: vec![false; n],
            ledger: PrivacyLedger::new(n),
            halt: None,
            rng: match policy {
                SchedulerPolicy::PriorityOrder => None,
                SchedulerPolicy::SeededRandom { seed } => Some(ChaCha8Rng::seed_from_u64(seed)),
            },
            risk: RiskState::new(risk),
            delivered: 0,
            sends: 0,
            steps: 0,
            trace: Vec::new(),
        };
        for i in 0..n {
            if world.halt.is_some() {
                break;
            }
            world.run_react(i);
        }
        world
    }

    fn run_react(&mut self, i: usize) {
        self.steps += 1;
        self.needs_react[i] = false;
        let mut ctx = Ctx {
            agent: i,
            instance: self.instance,
            ledger: &mut self.ledger,
            channels: &mut self.channels,
            halt: &mut self.halt,
            sends: &mut self.sends,
            risk: &mut self.risk,
        };
        self.agents[i].react(&mut ctx);
    }

    /// Next (recipient, sender) channel to deliver from, if any mail is
    /// pending.
    fn pick_delivery(&mut self) -> Option<(usize, usize)> {
        let n = self.instance.n;
        if self.rng.is_none() {
            // Lowest-index recipient; nearest sender breaks the tie
            // between that recipient's channels.
            for recipient in 0..n {
                let best = (0..n)
                    .filter(|&s| !self.channels[recipient][s].is_empty())
                    .min_by_key(|&s| (s.abs_diff(recipient), s));
                if let Some(sender) = best {
                    return Some((recipient, sender));
                }
            }
            return None;
        }
        let pending: Vec<(usize, usize)> = (0..n)
            .flat_map(|r| (0..n).map(move |s| (r, s)))
            .filter(|&(r, s)| !self.channels[r][s].is_empty())
            .collect();
        if pending.is_empty() {
            return None;
        }
        let rng = self.rng.as_mut().expect("random policy");
        Some(pending[rng.gen_range(0..pending.len())])
    }

    fn pick_react(&mut self) -> Option<usize> {
        let flagged: Vec<usize> = (0..self.instance.n)
            .filter(|&i| self.needs_react[i])
            .collect();
        if flagged.is_empty() {
            return None;
        }
        Some(match &mut self.rng {
            None => flagged[0],
            Some(rng) => flagged[rng.gen_range(0..flagged.len())],
        })
    }

    fn deliver(&mut self, recipient: usize, sender: usize) {
        let body = self.channels[recipient][sender]
            .pop_front()
            .expect("picked nonempty channel");
        self.delivered += 1;
        self.steps += 1;
        self.trace.push(format!(
            "M{} ({}) {}\u{2192}{}",
            self.delivered,
            body,
            sender + 1,
            recipient + 1
        ));
        self.agents[recipient].on_message(sender, &body);
        self.needs_react[recipient] = true;
    }

    /// Drives the world until a halt, quiescence, or the delivery
    /// budget runs out.
    ///
    /// The budget is checked first, so a limit of zero always reports
    /// step-limit regardless of other state.
    pub fn run_to_completion(mut self, step_limit: u64) -> Outcome {
        loop {
            if self.delivered >= step_limit {
                return self.finish(Status::StepLimit);
            }
            if let Some(halt) = self.halt {
                let status = match halt.reason {
                    StopReason::Interrupted => Status::Interrupted,
                    StopReason::Exhausted => Status::NoSolution,
                };
                return self.finish(status);
            }
            if let Some((recipient, sender)) = self.pick_delivery() {
                self.deliver(recipient, sender);
                continue;
            }
            if let Some(i) = self.pick_react() {
                self.run_react(i);
                continue;
            }
            // Quiescent: nothing queued, nobody pending.
            assert!(
                self.agents.iter().all(|a| a.is_consistent()),
                "quiescent world with an inconsistent agent; protocol broke its liveness rule"
            );
            return self.finish(Status::Agreement);
        }
    }

    fn finish(self, status: Status) -> Outcome {
        let final_assignment = match status {
            Status::Agreement => Some(Assignment {
                values: self.agents.iter().map(|a| a.current_value()).collect(),
            }),
            _ => None,
        };
        Outcome {
            status,
            final_assignment,
            ledger: self.ledger,
            messages: self.delivered,
            steps: self.steps,
            sends: self.sends,
            protocol_sends: self.risk.run_protocol_sends,
            stopped_by: self.halt.map(|h| h.agent),
            interrupt_estimate: self.halt.and_then(|h| h.estimate),
            trace: self.trace,
        }
    }
}
