//! Conflict resolution: ordering, strategies and reverting user edits.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use super::{facts, Orchestration, Pending, Scope, Step, Strategy, SyncState};
use crate::conflict::Kind;
use crate::delta::{undo_op, Applied as Done, ChangeLog, Op};
use crate::error::Result;
use crate::graph::{ElemId, Element, Side};

/// How one conflict was resolved.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Resolution {
    pub kind: Kind,
    pub anchor: String,
    pub strategy: Strategy,
    /// user operations undone, e.g. `setAttr E8.name`
    pub reverted: Vec<String>,
}

fn describe(op: &Op) -> String {
    match op {
        Op::AddNode { id, .. } => format!("addNode {id}"),
        Op::AddEdge { id, .. } => format!("addEdge {id}"),
        Op::DeleteNode { id } => format!("deleteNode {id}"),
        Op::DeleteEdge { id } => format!("deleteEdge {id}"),
        Op::SetAttr { node, attr, .. } => format!("setAttr {node}.{attr}"),
    }
}

fn edge_ends(a: &Done) -> Option<(ElemId, ElemId)> {
    match (&a.op, &a.removed) {
        (Op::AddEdge { from, to, .. }, _) => Some((from.clone(), to.clone())),
        (Op::DeleteEdge { .. }, Some(Element::Edge(e))) => Some((e.from.clone(), e.to.clone())),
        _ => None,
    }
}

/// Operations that must be undone together with `sel` so that undoing
/// them in reverse order is possible.
fn closure(log: &ChangeLog, mut sel: BTreeSet<usize>) -> BTreeSet<usize> {
    let applied = &log.applied;
    let mut todo: Vec<usize> = sel.iter().copied().collect();
    while let Some(k) = todo.pop() {
        let id = applied[k].op.target();
        let more: Vec<usize> = match &applied[k].op {
            Op::AddNode { .. } => log
                .touching(id)
                .filter(|&j| {
                    j > k
                        && match &applied[j].op {
                            Op::AddEdge { from, to, .. } => from == id || to == id,
                            Op::SetAttr { node, .. } => node == id,
                            Op::DeleteNode { id: d } => d == id,
                            _ => false,
                        }
                })
                .collect(),
            Op::AddEdge { .. } => log.touching(id).filter(|&j| j > k && matches!(&applied[j].op, Op::DeleteEdge { id: d } if d == id)).collect(),
            Op::DeleteEdge { .. } => {
                let (a, b) = edge_ends(&applied[k]).expect("edge record");
                [a, b].iter().flat_map(|n| log.touching(n).filter(move |&j| matches!(&applied[j].op, Op::DeleteNode { id } if id == n))).collect()
            }
            Op::DeleteNode { .. } => Vec::new(),
            Op::SetAttr { node, attr, .. } => log
                .touching(node)
                .filter(|&j| {
                    j > k
                        && match &applied[j].op {
                            Op::SetAttr { node: n, attr: a, .. } => n == node && a == attr,
                            Op::DeleteNode { id } => id == node,
                            _ => false,
                        }
                })
                .collect(),
        };
        for j in more {
            if sel.insert(j) {
                todo.push(j);
            }
        }
    }
    sel
}

impl SyncState<'_> {
    /// Resolves pending conflicts in dependency order with the plans of
    /// `orch`; conflicts without a plan stay pending.
    pub(crate) fn resolve_all(&mut self, orch: &Orchestration) -> Result<()> {
        for p in self.conflict_order() {
            // facts only matter to evaluators
            let plan = if orch.evaluators.is_empty() { orch.resolve.get(&p.conflict.kind) } else { orch.plan_for(p.conflict.kind, &facts(self, &p)) };
            let Some(plan) = plan.cloned() else { continue };
            let Some(k) = self.pending.iter().position(|q| q.conflict.anchor == p.conflict.anchor && q.conflict.kind == p.conflict.kind) else { continue };
            self.unpend(k);
            let scope = Scope { only: Some(p.elems.clone()), respect_pending: true };
            for _ in &plan.pre {
                self.repair(&scope);
            }
            let reverted = self.apply_strategy(&p, plan.strategy);
            for s in &plan.post {
                match s {
                    Step::Translate => self.translate(&scope),
                    _ => self.propagate(&scope),
                }
            }
            self.report.resolutions.push(Resolution { kind: p.conflict.kind, anchor: p.conflict.anchor.clone(), strategy: plan.strategy, reverted });
        }
        Ok(())
    }

    /// Pending conflicts such that a conflict whose scope an anchor depends
    /// on comes first; ties and mutual dependencies by anchor and kind.
    fn conflict_order(&self) -> Vec<Pending> {
        let n = self.pending.len();
        let mut rank: Vec<usize> = (0..n).collect();
        rank.sort_by(|&a, &b| {
            let (x, y) = (&self.pending[a].conflict, &self.pending[b].conflict);
            (&x.anchor, x.kind).cmp(&(&y.anchor, y.kind))
        });
        let mut pos = vec![0; n];
        for (r, &k) in rank.iter().enumerate() {
            pos[k] = r;
        }
        // which conflicts have each DPG node in scope
        let mut in_scope: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (k, p) in self.pending.iter().enumerate() {
            for i in p.conflict.scope.iter().filter_map(|id| self.dpg.index_of(id)) {
                in_scope.entry(i).or_default().push(k);
            }
        }
        let mut before: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
        for (b, p) in self.pending.iter().enumerate() {
            let mut seen = BTreeSet::new();
            let mut todo: Vec<usize> = self.dpg.index_of(&p.conflict.anchor).into_iter().collect();
            while let Some(i) = todo.pop() {
                for d in self.dpg.deps(self.tgg, i) {
                    if seen.insert(d) {
                        todo.push(d);
                    }
                }
            }
            for a in seen.iter().flat_map(|i| in_scope.get(i).into_iter().flatten()) {
                if *a != b {
                    before[b].insert(*a);
                }
            }
        }
        let mut indeg = vec![0usize; n];
        let mut after: Vec<Vec<usize>> = vec![Vec::new(); n];
        for b in 0..n {
            for &a in &before[b] {
                if !before[a].contains(&b) {
                    indeg[b] += 1;
                    after[a].push(b);
                }
            }
        }
        let mut ready: BTreeSet<usize> = (0..n).filter(|k| indeg[*k] == 0).map(|k| pos[k]).collect();
        let mut out = Vec::with_capacity(n);
        let mut placed = vec![false; n];
        while let Some(r) = ready.pop_first() {
            let k = rank[r];
            placed[k] = true;
            out.push(self.pending[k].clone());
            for &b in &after[k] {
                indeg[b] -= 1;
                if indeg[b] == 0 {
                    ready.insert(pos[b]);
                }
            }
        }
        out.extend(rank.iter().filter(|k| !placed[**k]).map(|k| self.pending[*k].clone()));
        out
    }

    fn apply_strategy(&mut self, p: &Pending, strategy: Strategy) -> Vec<String> {
        let log = &self.log;
        let pick = |ids: &mut dyn Iterator<Item = &ElemId>, ok: &dyn Fn(&Done) -> bool| -> BTreeSet<usize> {
            ids.flat_map(|e| log.touching(e).filter(move |k| log.applied[*k].op.target() == e)).filter(|k| ok(&log.applied[*k])).collect()
        };
        let sel: BTreeSet<usize> = match strategy {
            Strategy::TakeSource | Strategy::TakeTarget => {
                let side = if strategy == Strategy::TakeSource { Side::Target } else { Side::Source };
                pick(&mut p.elems.iter(), &|a| a.side == side)
            }
            Strategy::Preserve if p.conflict.kind == Kind::PreserveDelete => {
                let bound: Vec<ElemId> = self.dpg.node(&p.conflict.anchor).map(|n| n.bindings.iter().flatten().cloned().collect()).unwrap_or_default();
                pick(&mut bound.iter(), &|a| matches!(a.op, Op::DeleteNode { .. } | Op::DeleteEdge { .. }))
            }
            Strategy::Preserve => {
                self.report.warnings.push(format!("STRATEGY-NO-EFFECT: preserve does not apply to {} at {}", p.conflict.kind.key(), p.conflict.anchor));
                BTreeSet::new()
            }
        };
        if sel.is_empty() {
            return Vec::new();
        }
        self.revert(sel)
    }

    /// Undoes the selected user operations and everything depending on them.
    fn revert(&mut self, sel: BTreeSet<usize>) -> Vec<String> {
        let sel = closure(&self.log, sel);
        let mut touched = BTreeSet::new();
        let mut names = Vec::new();
        for &k in sel.iter().rev() {
            let a = self.log.applied[k].clone();
            if let Some((x, y)) = edge_ends(&a) {
                self.ends.insert(x);
                self.ends.insert(y);
            }
            let res = match &a.op {
                // synchronization may have attached edges to an added node
                Op::AddNode { id, .. } => {
                    touched.extend(self.remove_elems([id.clone()]));
                    Ok(())
                }
                _ => undo_op(&mut self.host, &a),
            };
            match res {
                Ok(()) => names.push(describe(&a.op)),
                Err(e) => self.report.warnings.push(format!("could not revert {}: {e}", describe(&a.op))),
            }
            self.log.revert(k);
            touched.insert(a.op.target().clone());
        }
        names.reverse();
        self.refresh(touched);
        names
    }
}
