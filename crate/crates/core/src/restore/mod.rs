//! Consistency restoration: synchronization fragments, conflict
//! resolution strategies and the orchestration interpreter.

mod fragments;
mod orch;
mod repair;
mod resolve;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write;

use serde::Serialize;

pub use orch::{Condition, Evaluator, Facts, Orchestration, Plan, Step, Strategy, FACT_NAMES};
pub use resolve::Resolution;

use crate::conflict::{detect_all, Conflict};
use crate::delta::{apply_delta, ChangeLog, Delta};
use crate::dpg::{Dpg, Env};
use crate::error::{Error, Result};
use crate::grammar::Tgg;
use crate::graph::{ElemId, Element, Side, TripleGraph};
use crate::operational::OpRules;
use crate::precedence::PrecedenceGraph;
use crate::rewrite::ValueSource;

/// One rule application performed by a fragment.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Applied {
    pub fragment: String,
    pub rule: String,
    /// node ids replaced or retired by the application
    pub replaced: Vec<String>,
    /// resulting node id, if a rule application remains
    pub node: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Report {
    pub conflicts: Vec<Conflict>,
    pub resolutions: Vec<Resolution>,
    pub applied: Vec<Applied>,
    /// elements deleted by clean-up
    pub removed: Vec<ElemId>,
    pub warnings: Vec<String>,
    /// conflicts left without a plan
    pub unresolved: Vec<Conflict>,
}

impl Report {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable")
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "conflicts: {}", self.conflicts.len());
        s.push_str(&crate::conflict::render(&self.conflicts));
        for r in &self.resolutions {
            let _ = writeln!(s, "resolved {:?} at {} by {:?} (reverted {})", r.kind, r.anchor, r.strategy, r.reverted.len());
        }
        let _ = writeln!(s, "rule applications: {}", self.applied.len());
        for a in &self.applied {
            let _ = writeln!(s, "  {:<12} {:<16} {} -> {}", a.fragment, a.rule, a.replaced.join(","), a.node.as_deref().unwrap_or("-"));
        }
        if !self.removed.is_empty() {
            let _ = writeln!(s, "removed by clean-up: {}", self.removed.iter().map(|e| e.as_str()).collect::<Vec<_>>().join(","));
        }
        for w in &self.warnings {
            let _ = writeln!(s, "warning: {w}");
        }
        for c in &self.unresolved {
            let _ = writeln!(s, "unresolved {:?} at {}", c.kind, c.anchor);
        }
        s
    }
}

/// Which nodes a fragment may touch.
#[derive(Clone, Debug, Default)]
pub struct Scope {
    /// restrict to applications creating one of these elements
    only: Option<BTreeSet<ElemId>>,
    /// keep away from applications in the scope of a pending conflict
    respect_pending: bool,
}

impl Scope {
    /// No restriction at all.
    pub fn unrestricted() -> Scope {
        Scope::default()
    }
}

/// A conflict awaiting resolution with the elements its scope covers.
#[derive(Clone, Debug)]
pub(crate) struct Pending {
    conflict: Conflict,
    elems: BTreeSet<ElemId>,
}

/// Host, change history and annotated graph during synchronization.
pub struct SyncState<'a> {
    pub tgg: &'a Tgg,
    pub ops: &'a OpRules,
    pub host: TripleGraph,
    pub log: ChangeLog,
    pub dpg: Dpg,
    pending: Vec<Pending>,
    /// how many pending conflicts cover each element
    blocked: BTreeMap<ElemId, usize>,
    /// endpoints of edges removed since the last refresh
    ends: BTreeSet<ElemId>,
    pub report: Report,
}

/// Values for created attributes nothing constrains.
struct Unconstrained;

impl ValueSource for Unconstrained {
    fn fresh(&mut self, kind: crate::graph::AttrKind) -> crate::graph::Value {
        kind.default_value()
    }
}

impl<'a> SyncState<'a> {
    /// Applies the deltas, annotates and detects conflicts.
    pub fn new(tgg: &'a Tgg, ops: &'a OpRules, mut host: TripleGraph, pg: &PrecedenceGraph, ds: &Delta, dt: &Delta) -> Result<Self> {
        let log = apply_delta(&mut host, ds, dt)?;
        let dpg = Dpg::annotate(Env { tgg, ops, host: &host, log: &log }, pg);
        let mut st = SyncState { tgg, ops, host, log, dpg, pending: Vec::new(), blocked: BTreeMap::new(), ends: BTreeSet::new(), report: Report::default() };
        st.detect();
        Ok(st)
    }

    pub fn env(&self) -> Env<'_> {
        Env { tgg: self.tgg, ops: self.ops, host: &self.host, log: &self.log }
    }

    /// Re-detects conflicts; they become the pending set.
    pub fn detect(&mut self) -> Vec<Conflict> {
        let cs = detect_all(self.env(), &self.dpg);
        self.pending = cs.iter().map(|c| Pending { conflict: c.clone(), elems: self.scope_elems(&c.scope) }).collect();
        self.blocked.clear();
        for e in self.pending.iter().flat_map(|p| p.elems.iter()) {
            *self.blocked.entry(e.clone()).or_default() += 1;
        }
        self.report.conflicts = cs.clone();
        cs
    }

    pub fn pending(&self) -> Vec<&Conflict> {
        self.pending.iter().map(|p| &p.conflict).collect()
    }

    fn scope_elems(&self, scope: &[String]) -> BTreeSet<ElemId> {
        scope.iter().filter_map(|id| self.dpg.node(id)).flat_map(|n| n.created(self.tgg).cloned()).collect()
    }

    /// Scope for fragments outside conflict resolution.
    pub fn free_scope(&self) -> Scope {
        Scope { only: None, respect_pending: true }
    }

    /// Drops a pending conflict, unblocking its elements.
    pub(crate) fn unpend(&mut self, k: usize) -> Pending {
        let p = self.pending.remove(k);
        for e in &p.elems {
            if let Some(n) = self.blocked.get_mut(e) {
                *n -= 1;
                if *n == 0 {
                    self.blocked.remove(e);
                }
            }
        }
        p
    }

    /// Whether `scope` admits processing DPG node `i`.
    pub(crate) fn allows(&self, scope: &Scope, i: usize) -> bool {
        let created: Vec<&ElemId> = self.dpg.nodes[i].created(self.tgg).collect();
        let inside = |e: &ElemId| scope.only.as_ref().is_some_and(|o| o.contains(e));
        if scope.respect_pending && created.iter().any(|e| self.blocked.contains_key(*e) && !inside(e)) {
            return false;
        }
        scope.only.is_none() || created.iter().any(|e| inside(e))
    }

    /// Alive candidates (or flagged base nodes) a fragment in `scope` may
    /// visit, by id.
    pub(crate) fn visit(&self, scope: &Scope, candidates: bool) -> Vec<usize> {
        let mut v: Vec<usize> = match &scope.only {
            None if candidates => self.dpg.candidates(),
            None => self.dpg.flagged().iter().copied().collect(),
            Some(o) => {
                let set: BTreeSet<usize> = o
                    .iter()
                    .flat_map(|e| self.dpg.creators_of(e).iter().copied())
                    .filter(|i| {
                        let n = &self.dpg.nodes[*i];
                        n.alive && n.is_candidate() == candidates && (candidates || self.dpg.flagged().contains(i))
                    })
                    .collect();
                set.into_iter().collect()
            }
        };
        v.retain(|i| self.allows(scope, *i));
        v.sort_by(|a, b| self.dpg.nodes[*a].id.cmp(&self.dpg.nodes[*b].id));
        v
    }

    pub(crate) fn refresh(&mut self, touched: BTreeSet<ElemId>) {
        let ends = std::mem::take(&mut self.ends);
        let env = Env { tgg: self.tgg, ops: self.ops, host: &self.host, log: &self.log };
        self.dpg.refresh_with_ends(env, touched, ends);
    }

    /// Removes elements (edges and corrs before nodes), also removing edges
    /// left dangling; returns every removed id. Endpoints of removed edges
    /// are remembered for the next refresh.
    pub(crate) fn remove_elems(&mut self, ids: impl IntoIterator<Item = ElemId>) -> BTreeSet<ElemId> {
        let mut todo: BTreeSet<ElemId> = ids.into_iter().filter(|e| self.host.contains(e)).collect();
        for e in todo.clone() {
            if self.host.node(&e).is_some() {
                todo.extend(self.host.incident_edges(&e).iter().cloned());
            }
        }
        let mut touched = BTreeSet::new();
        let rank = |h: &TripleGraph, e: &ElemId| match h.get(e) {
            Some(Element::Corr(_)) => 0,
            Some(Element::Edge(_)) => 1,
            _ => 2,
        };
        let mut order: Vec<ElemId> = todo.into_iter().collect();
        order.sort_by_key(|e| rank(&self.host, e));
        for e in order {
            if let Some(Element::Edge(x)) = self.host.get(&e) {
                self.ends.insert(x.from.clone());
                self.ends.insert(x.to.clone());
            }
            if self.host.remove(&e).is_ok() {
                touched.insert(e);
            }
        }
        touched
    }

    /// Runs every step of an orchestration.
    pub fn run(&mut self, orch: &Orchestration) -> Result<()> {
        orch.check()?;
        for step in &orch.steps {
            match step {
                Step::LocalCc => self.local_cc(&self.free_scope()),
                Step::Translate => self.translate(&self.free_scope()),
                Step::Repair => self.repair(&self.free_scope()),
                Step::Rollback => self.rollback(&self.free_scope()),
                Step::Propagate => self.propagate(&self.free_scope()),
                Step::ResolveConflict => self.resolve_all(orch)?,
                Step::CleanUp => self.cleanup(),
            }
        }
        if !self.pending.is_empty() && !orch.has(Step::CleanUp) {
            let p = &self.pending[0].conflict;
            return Err(Error::UnresolvedConflict { anchor: p.anchor.clone(), kind: p.kind.key().to_string() });
        }
        Ok(())
    }

    /// Repair, then rollback, then translate.
    pub fn propagate(&mut self, scope: &Scope) {
        self.repair(scope);
        self.rollback(scope);
        self.translate(scope);
    }

    /// Split of the host into the two models and the correspondence graph.
    pub fn result(&self) -> &TripleGraph {
        &self.host
    }
}

/// Outputs of a full synchronization.
pub struct Outcome {
    pub host: TripleGraph,
    pub pg: PrecedenceGraph,
    pub report: Report,
}

/// Applies deltas, detects conflicts and restores consistency.
pub fn run(tgg: &Tgg, host: TripleGraph, pg: &PrecedenceGraph, ds: &Delta, dt: &Delta, orch: &Orchestration) -> Result<Outcome> {
    orch.check()?;
    let ops = OpRules::new(tgg)?;
    let mut st = SyncState::new(tgg, &ops, host, pg, ds, dt)?;
    st.run(orch)?;
    let pg = st.dpg.base_pg();
    Ok(Outcome { host: st.host, pg, report: st.report })
}

/// Counts used by evaluator conditions.
pub(crate) fn facts(st: &SyncState<'_>, p: &Pending) -> Facts {
    let mut vars = BTreeMap::new();
    let sides: Vec<(&ElemId, Option<Side>)> =
        p.elems.iter().map(|e| (e, st.host.get(e).map(|x| x.side()).or_else(|| st.log.deleted.get(e).map(|x| x.side())))).collect();
    let mut count = |name: &str, side: Side, pred: &dyn Fn(&ElemId) -> bool| {
        let n = sides.iter().filter(|(e, s)| *s == Some(side) && pred(e)).count();
        vars.insert(name.to_string(), n as i64);
    };
    count("deletedSrc", Side::Source, &|e| st.log.is_deleted(e));
    count("deletedTrg", Side::Target, &|e| st.log.is_deleted(e));
    count("addedSrc", Side::Source, &|e| st.log.is_added(e));
    count("addedTrg", Side::Target, &|e| st.log.is_added(e));
    count("changedSrc", Side::Source, &|e| st.log.changed_attrs(&st.host, e).next().is_some());
    count("changedTrg", Side::Target, &|e| st.log.changed_attrs(&st.host, e).next().is_some());
    vars.insert("scope".into(), p.conflict.scope.len() as i64);
    Facts { kind: p.conflict.kind.key().to_string(), vars }
}
