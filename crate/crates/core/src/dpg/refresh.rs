//! Incremental re-annotation: only nodes and candidates near touched
//! elements are revisited.

use std::collections::BTreeSet;

use super::{Ann, CandKey, Dpg, DpgNode, Env, Origin};
use crate::graph::{ElemId, Element, Side};
use crate::operational::Mark;
use crate::pattern::{Matcher, Operand, PKind};

impl Dpg {
    /// Brings annotations, the unpropagated set and candidates up to date
    /// after the host changed at `touched` (ids of added, removed or
    /// attribute-changed elements).
    pub fn refresh(&mut self, env: Env<'_>, touched: impl IntoIterator<Item = ElemId>) {
        self.refresh_with_ends(env, touched, BTreeSet::new());
    }

    /// Like [`Dpg::refresh`], with `ends` naming endpoints of edges that
    /// vanished without a trace in the host or the change log. Only the
    /// creators of an endpoint and rules with NACs at context nodes can
    /// notice an edge there.
    pub fn refresh_with_ends(&mut self, env: Env<'_>, touched: impl IntoIterator<Item = ElemId>, mut ends: BTreeSet<ElemId>) {
        let mut s: BTreeSet<ElemId> = BTreeSet::new();
        for t in touched {
            // edge endpoints matter for NACs of the nodes they attach to
            let edge = match env.host.get(&t) {
                Some(Element::Edge(e)) => Some((e.from.clone(), e.to.clone())),
                Some(_) => None,
                None => match env.log.deleted.get(&t) {
                    Some(Element::Edge(e)) => Some((e.from.clone(), e.to.clone())),
                    _ => None,
                },
            };
            if let Some((a, b)) = edge {
                ends.insert(a);
                ends.insert(b);
            }
            s.insert(t);
        }

        // base nodes near the touched elements
        let near_end = |i: &usize| env.ops.context_nacs[self.nodes[*i].rule];
        let affected: BTreeSet<usize> = s
            .iter()
            .flat_map(|e| self.creators_of(e).iter().chain(self.users_of(e)).copied())
            .chain(ends.iter().flat_map(|e| self.creators_of(e).iter().copied().chain(self.users_of(e).iter().copied().filter(near_end))))
            .filter(|i| !self.nodes[*i].is_candidate())
            .collect();
        s.extend(ends);
        let mut s2 = s.clone();
        for i in affected {
            let was = self.is_broken(i);
            let (src, trg) = annotate_base(env, &self.nodes[i]);
            self.nodes[i].src = src;
            self.nodes[i].trg = trg;
            if src.is_empty() && trg.is_empty() {
                self.flagged.remove(&i);
            } else {
                self.flagged.insert(i);
            }
            if was != self.is_broken(i) {
                s2.extend(self.nodes[i].created(env.tgg).cloned());
            }
        }

        for e in &s2 {
            if self.compute_unprop(env, e) {
                self.unprop.insert(e.clone());
            } else {
                self.unprop.remove(e);
            }
        }

        // candidates near changed elements are re-derived
        let mut stale: BTreeSet<usize> = BTreeSet::new();
        let mut anchors: BTreeSet<ElemId> = s2.clone();
        for e in &s2 {
            for &c in self.creators_of(e).iter().chain(self.users_of(e)) {
                if self.nodes[c].is_candidate() && stale.insert(c) {
                    anchors.extend(self.nodes[c].created(env.tgg).cloned());
                }
            }
        }
        anchors.retain(|e| self.unprop.contains(e));
        for a in &anchors {
            for (key, ann) in self.enumerate(env, a) {
                match self.cands.get(&key) {
                    Some(&c) => {
                        stale.remove(&c);
                        self.set_cand_ann(c, ann);
                    }
                    None => {
                        let id = self.cand_name(env.tgg, &key);
                        let (rule, origin, bindings) = key.clone();
                        let mut n = DpgNode { id, rule, origin, bindings, src: Ann::EMPTY, trg: Ann::EMPTY, alive: true };
                        set_ann(&mut n, ann);
                        let c = self.push(env.tgg, n);
                        self.cands.insert(key, c);
                    }
                }
            }
        }
        for c in stale {
            self.remove(env.tgg, c);
        }
    }

    fn set_cand_ann(&mut self, c: usize, ann: Ann) {
        set_ann(&mut self.nodes[c], ann);
    }

    /// Present elements that no intact rule application accounts for.
    fn compute_unprop(&self, env: Env<'_>, e: &ElemId) -> bool {
        if !env.host.contains(e) {
            return false;
        }
        let mut bases = self.creators_of(e).iter().filter(|i| !self.nodes[**i].is_candidate()).peekable();
        bases.peek().is_none() || bases.all(|i| self.is_broken(*i))
    }

    /// Side-pattern matches binding `anchor` to a created slot whose
    /// created elements are all unpropagated.
    fn enumerate(&self, env: Env<'_>, anchor: &ElemId) -> Vec<(CandKey, Ann)> {
        let mut out = Vec::new();
        let Some(el) = env.host.get(anchor) else { return out };
        let side = el.side();
        let origin = match side {
            Side::Source => Origin::Src,
            Side::Target => Origin::Trg,
            Side::Corr => return out,
        };
        let types = &env.tgg.types;
        for (ri, r) in env.tgg.rules.iter().enumerate() {
            let op = env.ops.pattern(side, ri);
            let filter = |pi: usize, id: &ElemId| op.marks[pi] != Mark::Translates || self.unprop.contains(id);
            let matcher = Matcher::new(env.host, types).filter(&filter);
            for i in r.created_on(side) {
                let fits = match (&r.pattern.elems[i].kind, el) {
                    (PKind::Node { ty, .. }, Element::Node(n)) => types.is_subtype(&n.ty, ty),
                    (PKind::Edge { ty, .. }, Element::Edge(e)) => *ty == e.ty,
                    _ => false,
                };
                if !fits {
                    continue;
                }
                let pi = op.map[i].expect("side element");
                let mut seed = vec![None; op.pattern.len()];
                seed[pi] = Some(anchor.clone());
                let Ok(ms) = matcher.find_all(&op.pattern, &seed) else { continue };
                for m in ms {
                    let bindings: Vec<Option<ElemId>> = op.map.iter().map(|p| p.map(|p| m.bindings[p].clone())).collect();
                    let reused = r.created_on(side).any(|j| bindings[j].as_ref().is_some_and(|b| self.base_creator(b).is_some()));
                    let ann = if reused { Ann::STAR } else { Ann::PLUS };
                    out.push(((ri, origin, bindings), ann));
                }
            }
        }
        out
    }
}

fn set_ann(n: &mut DpgNode, ann: Ann) {
    if n.origin == Origin::Src {
        n.src = ann;
        n.trg = Ann::U;
    } else {
        n.src = Ann::U;
        n.trg = ann;
    }
}

/// Source and target annotation of a base node against the current host.
pub(super) fn annotate_base(env: Env<'_>, n: &DpgNode) -> (Ann, Ann) {
    let r = &env.tgg.rules[n.rule];
    let host = env.host;
    let here: Vec<bool> = n.bindings.iter().map(|b| b.as_ref().is_some_and(|b| host.contains(b))).collect();
    let present = |i: usize| here[i];
    let corr_missing = (0..r.pattern.len()).any(|i| r.side_of(i) == Side::Corr && !present(i));
    let all_present = (0..r.pattern.len()).all(present);
    let mut out = [Ann::EMPTY; 2];
    for (k, side) in [Side::Source, Side::Target].into_iter().enumerate() {
        let mut a = Ann::EMPTY;
        let created: Vec<usize> = r.created_on(side).collect();
        let absent = created.iter().filter(|i| !present(**i)).count();
        let ctx_missing = r.context().any(|i| r.side_of(i) == side && !present(i));
        if !created.is_empty() && absent == created.len() {
            a |= Ann::MINUS;
        } else if absent > 0 || ctx_missing || corr_missing {
            a |= Ann::SLASH;
        }
        for c in &r.pattern.conds {
            if !c.elems().all(present) || c.holds(host, &n.bindings) {
                continue;
            }
            let changed_here = [&c.lhs, &c.rhs].into_iter().any(|o| match o {
                Operand::Slot { elem, attr } => {
                    r.side_of(*elem) == side && env.log.attr_changed(host, n.bindings[*elem].as_ref().unwrap(), attr)
                }
                Operand::Const(_) => false,
            });
            if changed_here {
                a |= Ann::HASH;
            }
        }
        if all_present {
            let b = n.full_bindings().expect("complete");
            let op = env.ops.directed(side, n.rule);
            if !op.pattern.nacs.iter().any(|x| x.side == side) {
                out[k] = a;
                continue;
            }
            let nacs = op.side_nacs(side);
            if Matcher::new(host, &env.tgg.types).nac_violated(&nacs, &b) {
                a |= Ann::N;
            }
        }
        out[k] = a;
    }
    (out[0], out[1])
}
