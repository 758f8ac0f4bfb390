//! Asynchronous backtracking on the complete equality graph.
//!
//! Every agent holds a value concurrently. Higher-priority neighbors
//! announce their values with Ok?; when an agent cannot pick any value
//! compatible with its view and its stored nogoods, it derives a new
//! nogood, sends it to the lowest-priority agent named in it, forgets
//! that agent's value, and tries once to reassign. The top agent
//! deriving the empty nogood proves unsolvability. The utilitarian
//! variant consults the interruption test before any send that would
//! reveal a new value.

use std::collections::{BTreeMap, BTreeSet};
use std::mem;

use crate::model::Instance;
use crate::runtime::{AgentBehavior, Ctx, MessageBody};
use crate::utility::Decision;

use super::{exhaustion_reveals, utility_guard};

/// A received combination of higher-priority assignments under which
/// `value` is unusable. An empty context eliminates the value for good.
#[derive(Debug, Clone, PartialEq, Eq)]
struct StoredNogood {
    context: BTreeMap<usize, usize>,
    value: usize,
}

pub struct AbtAgent {
    id: usize,
    utilitarian: bool,
    domain: Vec<usize>,
    /// Last known values of higher-priority neighbors.
    view: BTreeMap<usize, usize>,
    store: Vec<StoredNogood>,
    current: Option<usize>,
    /// Agents owed our Ok? announcements.
    outgoing: BTreeSet<usize>,
    /// Agents whose Ok? announcements we receive.
    incoming: BTreeSet<usize>,
    /// Senders of obsolete nogoods against our unchanged value; they
    /// get a fresh Ok? so the disagreement resolves.
    renotify: BTreeSet<usize>,
    /// AddLink requests we owe (nogood named an unconnected agent).
    addlink_requests: Vec<usize>,
    /// Senders of received AddLinks awaiting an Ok? reply.
    addlink_pending: Vec<usize>,
    booted: bool,
    dirty: bool,
}

impl AbtAgent {
    pub fn new(instance: &Instance, id: usize, utilitarian: bool) -> Self {
        AbtAgent {
            id,
            utilitarian,
            domain: instance.domain(id),
            view: BTreeMap::new(),
            store: Vec::new(),
            current: None,
            outgoing: (id + 1..instance.n).collect(),
            incoming: (0..id).collect(),
            renotify: BTreeSet::new(),
            addlink_requests: Vec::new(),
            addlink_pending: Vec::new(),
            booted: false,
            dirty: false,
        }
    }

    /// Test hook: a partially linked agent, as if links had been added
    /// at runtime. The default topology already connects everyone.
    #[cfg(test)]
    pub(crate) fn with_links(
        instance: &Instance,
        id: usize,
        utilitarian: bool,
        incoming: &[usize],
        outgoing: &[usize],
    ) -> Self {
        let mut agent = AbtAgent::new(instance, id, utilitarian);
        agent.incoming = incoming.iter().copied().collect();
        agent.outgoing = outgoing.iter().copied().collect();
        agent
    }

    fn entailed(view: &BTreeMap<usize, usize>, context: &BTreeMap<usize, usize>) -> bool {
        context.iter().all(|(a, w)| view.get(a) == Some(w))
    }

    /// Drop stored nogoods whose context contradicts the view. Contexts
    /// mentioning agents absent from the view stay, dormant.
    fn prune_store(&mut self) {
        let view = &self.view;
        self.store.retain(|ng| {
            ng.context
                .iter()
                .all(|(a, w)| view.get(a).is_none_or(|x| x == w))
        });
    }

    fn eliminated(&self, v: usize) -> bool {
        self.store
            .iter()
            .any(|ng| ng.value == v && Self::entailed(&self.view, &ng.context))
    }

    fn view_consistent(&self, v: usize) -> bool {
        self.view.values().all(|&w| w == v)
    }

    fn locally_consistent(&self) -> bool {
        match self.current {
            None => false,
            Some(v) => self.view_consistent(v) && !self.eliminated(v),
        }
    }

    fn select_value(&self) -> Option<usize> {
        self.domain
            .iter()
            .copied()
            .find(|&v| self.view_consistent(v) && !self.eliminated(v))
    }

    /// One blocker per domain value, unioned: for a view conflict, the
    /// lowest-priority conflicting assignment; otherwise the context of
    /// an eliminating nogood. Keeping nogoods this small is what lets
    /// the culprit alone be forgotten and retried.
    fn derive_nogood(&self) -> BTreeMap<usize, usize> {
        let mut nogood = BTreeMap::new();
        for &v in &self.domain {
            let view_blocker = self
                .view
                .iter()
                .rev()
                .find(|(_, w)| **w != v)
                .map(|(a, w)| (*a, *w));
            if let Some((a, w)) = view_blocker {
                nogood.insert(a, w);
            } else if let Some(ng) = self
                .store
                .iter()
                .find(|ng| ng.value == v && Self::entailed(&self.view, &ng.context))
            {
                for (&a, &w) in &ng.context {
                    nogood.insert(a, w);
                }
            } else {
                unreachable!("value with no blocker would have been selected");
            }
        }
        nogood
    }

    /// No usable value: derive a nogood, publicize what that admits,
    /// ship it, forget the culprit's value, and try one reassignment.
    fn backtrack(&mut self, ctx: &mut Ctx<'_>) {
        let nogood = self.derive_nogood();
        let reveals = exhaustion_reveals(ctx, |v| {
            self.view.values().any(|&w| w != v) || self.eliminated(v)
        });

        if nogood.is_empty() {
            // Unconditionally unsolvable. The halt is not an Ok?/Nogood
            // send, so it is not guarded.
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

        let recipient = *nogood.keys().next_back().expect("nonempty nogood");
        let pairs: Vec<(usize, usize)> = nogood.into_iter().collect();
        ctx.send(recipient, MessageBody::Nogood { pairs });
        self.view.remove(&recipient);
        self.current = self.select_value();
    }
}

impl AgentBehavior for AbtAgent {
    fn on_message(&mut self, sender: usize, body: &MessageBody) {
        match body {
            MessageBody::Ok { var, value } => {
                self.view.insert(*var, *value);
                self.dirty = true;
            }
            MessageBody::Nogood { pairs } => {
                let mut context = BTreeMap::new();
                let mut culprit = None;
                for &(a, v) in pairs {
                    if a == self.id {
                        culprit = Some(v);
                    } else {
                        context.insert(a, v);
                    }
                }
                let Some(culprit) = culprit else { return };
                // Contexts may name higher-priority agents we are not
                // linked with yet: adopt their values and request links.
                for (&a, &w) in &context {
                    if a < self.id && !self.incoming.contains(&a) {
                        self.incoming.insert(a);
                        self.view.insert(a, w);
                        self.addlink_requests.push(a);
                    }
                }
                let compatible = context
                    .iter()
                    .all(|(a, w)| self.view.get(a).is_none_or(|x| x == w));
                if compatible {
                    let ng = StoredNogood {
                        context,
                        value: culprit,
                    };
                    if !self.store.contains(&ng) {
                        self.store.push(ng);
                    }
                } else if self.current == Some(culprit) {
                    // Obsolete, but the sender genuinely objects to our
                    // value: refresh it so the sender re-evaluates.
                    self.renotify.insert(sender);
                }
                self.dirty = true;
            }
            MessageBody::AddLink { .. } => {
                self.addlink_pending.push(sender);
                self.dirty = true;
            }
            MessageBody::Stop { .. } => {}
        }
    }

    fn react(&mut self, ctx: &mut Ctx<'_>) {
        let boot_turn = !self.booted;
        self.booted = true;
        if !(self.dirty || boot_turn) {
            return;
        }
        self.dirty = false;

        for target in mem::take(&mut self.addlink_requests) {
            ctx.send(target, MessageBody::AddLink { var: self.id });
        }
        let new_links = mem::take(&mut self.addlink_pending);
        for &s in &new_links {
            self.outgoing.insert(s);
        }

        self.prune_store();

        let old = self.current;
        if !self.locally_consistent() {
            self.current = self.select_value();
            if self.current.is_none() {
                self.backtrack(ctx);
                if ctx.halted() {
                    return;
                }
            }
        }

        let renotify = mem::take(&mut self.renotify);
        let value = match self.current {
            Some(v) => v,
            None => return,
        };
        let mut targets: BTreeSet<usize> = if self.current == old {
            BTreeSet::new()
        } else {
            self.outgoing.clone()
        };
        targets.extend(renotify);
        targets.extend(new_links);
        if targets.is_empty() {
            return;
        }
        if self.utilitarian
            && !ctx.is_revealed(value)
            && utility_guard(ctx, &[value]) == Decision::Interrupt
        {
            return;
        }
        ctx.charge(value);
        for t in targets {
            ctx.send(
                t,
                MessageBody::Ok {
                    var: self.id,
                    value,
                },
            );
        }
    }

    fn is_consistent(&self) -> bool {
        self.locally_consistent()
    }

    fn current_value(&self) -> Option<usize> {
        self.current
    }
}
