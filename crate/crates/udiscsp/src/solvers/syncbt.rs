//! Synchronous backtracking over the agent priority chain.
//!
//! Exactly one token moves through the system: the highest-priority
//! agent proposes a value to its successor, each successor either
//! extends the partial solution with an equal value or bounces a nogood
//! back to its predecessor. The predecessor retries its next value;
//! when the top agent runs dry it declares the problem unsolvable. The
//! utilitarian variant consults the interruption test before any send
//! that would reveal a new value.

use crate::model::Instance;
use crate::runtime::{AgentBehavior, Ctx, MessageBody};
use crate::utility::Decision;

use super::{exhaustion_reveals, utility_guard};

pub struct SyncBtAgent {
    id: usize,
    n: usize,
    domain: Vec<usize>,
    utilitarian: bool,
    /// Predecessor's value from the latest Ok?; the all-equal
    /// constraint makes it the only extendable choice.
    context: Option<usize>,
    /// Values bounced by the successor under the current context.
    rejected: Vec<bool>,
    current: Option<usize>,
    booted: bool,
    dirty: bool,
}

impl SyncBtAgent {
    pub fn new(instance: &Instance, id: usize, utilitarian: bool) -> Self {
        SyncBtAgent {
            id,
            n: instance.n,
            domain: instance.domain(id),
            utilitarian,
            context: None,
            rejected: vec![false; instance.d],
            current: None,
            booted: false,
            dirty: false,
        }
    }

    /// Smallest untried value consistent with the context.
    fn candidate(&self) -> Option<usize> {
        self.domain
            .iter()
            .copied()
            .find(|&v| !self.rejected[v] && self.context.is_none_or(|c| c == v))
    }

    fn advance(&mut self, ctx: &mut Ctx<'_>) {
        match self.candidate() {
            Some(v) => {
                self.current = Some(v);
                if self.id + 1 < self.n {
                    if self.utilitarian {
                        let revealing: Vec<usize> = if ctx.is_revealed(v) {
                            Vec::new()
                        } else {
                            vec![v]
                        };
                        if utility_guard(ctx, &revealing) == Decision::Interrupt {
                            return;
                        }
                    }
                    ctx.charge(v);
                    ctx.send(
                        self.id + 1,
                        MessageBody::Ok {
                            var: self.id,
                            value: v,
                        },
                    );
                }
                // The last agent extends silently; quiescence with every
                // agent consistent is the agreement.
            }
            None => self.backtrack(ctx),
        }
    }

    fn backtrack(&mut self, ctx: &mut Ctx<'_>) {
        self.current = None;
        // A context value publicly rules out every other value, so the
        // only unavailability a backtrack can newly reveal is the
        // context value itself.
        let context = self.context;
        let reveals = exhaustion_reveals(ctx, |v| context.is_some_and(|c| c != v));

        if self.id == 0 {
            // Top of the chain: nothing left anywhere. The halt is not
            // an Ok?/Nogood send, so it is not guarded, but it still
            // publicizes the remaining gaps.
            for v in reveals {
                ctx.charge(v);
            }
            ctx.stop_exhausted();
            return;
        }

        if self.utilitarian && utility_guard(ctx, &reveals) == Decision::Interrupt {
            return;
        }
        for &v in &reveals {
            ctx.charge(v);
        }
        let culprit = self
            .context
            .take()
            .expect("backtrack below the top implies a context");
        ctx.send(
            self.id - 1,
            MessageBody::Nogood {
                pairs: vec![(self.id - 1, culprit)],
            },
        );
    }
}

impl AgentBehavior for SyncBtAgent {
    fn on_message(&mut self, _sender: usize, body: &MessageBody) {
        match body {
            MessageBody::Ok { value, .. } => {
                self.context = Some(*value);
                self.rejected = vec![false; self.rejected.len()];
                self.current = None;
                self.dirty = true;
            }
            MessageBody::Nogood { pairs } => {
                for &(agent, value) in pairs {
                    if agent == self.id {
                        self.rejected[value] = true;
                    }
                }
                self.current = None;
                self.dirty = true;
            }
            // Not part of the synchronous protocol.
            MessageBody::AddLink { .. } | MessageBody::Stop { .. } => {}
        }
    }

    fn react(&mut self, ctx: &mut Ctx<'_>) {
        let boot_turn = !self.booted;
        self.booted = true;
        // Only the top agent acts unprompted; everyone else waits for
        // the token.
        if !(self.dirty || (boot_turn && self.id == 0)) {
            return;
        }
        self.dirty = false;
        self.advance(ctx);
    }

    fn is_consistent(&self) -> bool {
        match self.current {
            None => false,
            Some(v) => self.context.is_none_or(|c| c == v),
        }
    }

    fn current_value(&self) -> Option<usize> {
        self.current
    }
}
