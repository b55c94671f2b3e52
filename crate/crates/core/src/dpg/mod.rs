//! Delta precedence graphs: a precedence graph annotated with how concurrent
//! deltas affected each rule application, plus candidate applications for
//! elements that are no longer accounted for.

mod ann;
mod refresh;

use std::collections::{BTreeMap, BTreeSet, HashMap};

pub use ann::Ann;

use crate::delta::ChangeLog;
use crate::grammar::Tgg;
use crate::graph::{ElemId, Side, TripleGraph};
use crate::operational::OpRules;
use crate::pattern::PKind;
use crate::precedence::{node_name, unique_name, NodeDoc, PgDoc, PrecedenceGraph};

/// Where a node comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Origin {
    /// a rule application of the precedence graph
    Base,
    /// a match of a source pattern
    Src,
    /// a match of a target pattern
    Trg,
}

impl Origin {
    pub fn side(self) -> Option<Side> {
        match self {
            Origin::Base => None,
            Origin::Src => Some(Side::Source),
            Origin::Trg => Some(Side::Target),
        }
    }

    fn label(self) -> &'static str {
        match self {
            Origin::Base => "base",
            Origin::Src => "src-pattern",
            Origin::Trg => "trg-pattern",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DpgNode {
    pub id: String,
    pub rule: usize,
    pub origin: Origin,
    /// indexed like the rule's pattern; candidates bind only their side
    pub bindings: Vec<Option<ElemId>>,
    pub src: Ann,
    pub trg: Ann,
    pub alive: bool,
}

impl DpgNode {
    pub fn is_candidate(&self) -> bool {
        self.origin != Origin::Base
    }

    pub fn ann(&self, side: Side) -> Ann {
        if side == Side::Source { self.src } else { self.trg }
    }

    /// Bound created elements (all sides).
    pub fn created<'a>(&'a self, tgg: &'a Tgg) -> impl Iterator<Item = &'a ElemId> + 'a {
        tgg.rules[self.rule].created().filter_map(move |i| self.bindings[i].as_ref())
    }

    pub fn created_on<'a>(&'a self, tgg: &'a Tgg, side: Side) -> impl Iterator<Item = &'a ElemId> + 'a {
        tgg.rules[self.rule].created_on(side).filter_map(move |i| self.bindings[i].as_ref())
    }

    pub fn context<'a>(&'a self, tgg: &'a Tgg) -> impl Iterator<Item = &'a ElemId> + 'a {
        tgg.rules[self.rule].context().filter_map(move |i| self.bindings[i].as_ref())
    }

    /// Complete bindings (base nodes only).
    pub fn full_bindings(&self) -> Option<Vec<ElemId>> {
        self.bindings.iter().cloned().collect()
    }
}

/// Read-only inputs needed to (re)annotate.
#[derive(Clone, Copy)]
pub struct Env<'a> {
    pub tgg: &'a Tgg,
    pub ops: &'a OpRules,
    pub host: &'a TripleGraph,
    pub log: &'a ChangeLog,
}

type CandKey = (usize, Origin, Vec<Option<ElemId>>);

#[derive(Clone, Debug, Default)]
pub struct Dpg {
    pub nodes: Vec<DpgNode>,
    ids: HashMap<String, usize>,
    /// element -> alive nodes creating it
    creators: HashMap<ElemId, Vec<usize>>,
    /// element -> alive nodes using it as context
    users: HashMap<ElemId, Vec<usize>>,
    cands: HashMap<CandKey, usize>,
    /// names handed out to candidates, reused when a candidate is re-found
    cand_names: HashMap<CandKey, String>,
    unprop: BTreeSet<ElemId>,
    /// alive base nodes with a non-empty annotation
    flagged: BTreeSet<usize>,
    names: BTreeSet<String>,
}

impl Dpg {
    /// Embeds a precedence graph with empty annotations.
    pub fn from_pg(tgg: &Tgg, pg: &PrecedenceGraph) -> Dpg {
        let mut d = Dpg::default();
        for n in &pg.nodes {
            d.names.insert(n.id.clone());
            d.push(tgg, DpgNode {
                id: n.id.clone(),
                rule: n.rule,
                origin: Origin::Base,
                bindings: n.bindings.iter().cloned().map(Some).collect(),
                src: Ann::EMPTY,
                trg: Ann::EMPTY,
                alive: true,
            });
        }
        d
    }

    /// Builds the annotated graph for a host the deltas were applied to.
    pub fn annotate(env: Env<'_>, pg: &PrecedenceGraph) -> Dpg {
        let mut d = Dpg::from_pg(env.tgg, pg);
        let mut touched = env.log.touched();
        touched.extend(env.log.deleted.keys().cloned());
        d.refresh(env, touched);
        d
    }

    fn push(&mut self, tgg: &Tgg, n: DpgNode) -> usize {
        let i = self.nodes.len();
        let r = &tgg.rules[n.rule];
        for (j, b) in n.bindings.iter().enumerate() {
            let Some(b) = b else { continue };
            let map = if r.create[j] { &mut self.creators } else { &mut self.users };
            map.entry(b.clone()).or_default().push(i);
        }
        self.ids.insert(n.id.clone(), i);
        self.nodes.push(n);
        i
    }

    /// Records a new rule application and returns its index.
    pub fn add_base(&mut self, tgg: &Tgg, rule: usize, bindings: Vec<ElemId>) -> usize {
        let id = node_name(tgg, rule, &bindings, &mut self.names);
        self.push(tgg, DpgNode {
            id,
            rule,
            origin: Origin::Base,
            bindings: bindings.into_iter().map(Some).collect(),
            src: Ann::EMPTY,
            trg: Ann::EMPTY,
            alive: true,
        })
    }

    /// Retires a node; its id stays reserved.
    pub fn remove(&mut self, tgg: &Tgg, i: usize) {
        let n = &mut self.nodes[i];
        if !n.alive {
            return;
        }
        n.alive = false;
        self.ids.remove(&n.id);
        self.flagged.remove(&i);
        let r = &tgg.rules[n.rule];
        for (j, b) in n.bindings.iter().enumerate() {
            let Some(b) = b else { continue };
            let map = if r.create[j] { &mut self.creators } else { &mut self.users };
            if let Some(v) = map.get_mut(b) {
                v.retain(|x| *x != i);
                if v.is_empty() {
                    map.remove(b);
                }
            }
        }
        if n.is_candidate() {
            self.cands.remove(&(n.rule, n.origin, n.bindings.clone()));
        }
    }

    pub fn alive(&self) -> impl Iterator<Item = (usize, &DpgNode)> + '_ {
        self.nodes.iter().enumerate().filter(|(_, n)| n.alive)
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.ids.get(id).copied()
    }

    pub fn node(&self, id: &str) -> Option<&DpgNode> {
        self.index_of(id).map(|i| &self.nodes[i])
    }

    /// Alive base nodes carrying some annotation.
    pub fn flagged(&self) -> &BTreeSet<usize> {
        &self.flagged
    }

    /// Alive candidate nodes, sorted by id.
    pub fn candidates(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.cands.values().copied().collect();
        v.sort_by(|a, b| self.nodes[*a].id.cmp(&self.nodes[*b].id));
        v
    }

    pub fn unpropagated(&self) -> &BTreeSet<ElemId> {
        &self.unprop
    }

    pub fn is_unpropagated(&self, e: &str) -> bool {
        self.unprop.contains(e)
    }

    /// Alive nodes creating `e`, in index order.
    pub fn creators_of(&self, e: &str) -> &[usize] {
        self.creators.get(e).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn users_of(&self, e: &str) -> &[usize] {
        self.users.get(e).map(Vec::as_slice).unwrap_or(&[])
    }

    /// The alive rule application that created `e`.
    pub fn base_creator(&self, e: &str) -> Option<usize> {
        self.creators_of(e).iter().copied().find(|i| !self.nodes[*i].is_candidate())
    }

    /// The alive candidate with exactly these side bindings.
    pub fn find_candidate(&self, rule: usize, origin: Origin, bindings: &[Option<ElemId>]) -> Option<usize> {
        self.cands.get(&(rule, origin, bindings.to_vec())).copied().filter(|c| self.nodes[*c].alive)
    }

    /// Whether a base node's match is broken by deletion or a NAC.
    pub fn is_broken(&self, i: usize) -> bool {
        let n = &self.nodes[i];
        let bad = Ann::MINUS | Ann::SLASH | Ann::N;
        !n.is_candidate() && (n.src.intersects(bad) || n.trg.intersects(bad))
    }

    /// Nodes `i` depends on: creators of its context.
    pub fn deps(&self, tgg: &Tgg, i: usize) -> BTreeSet<usize> {
        self.nodes[i].context(tgg).flat_map(|c| self.creators_of(c).iter().copied()).filter(|j| *j != i).collect()
    }

    /// Nodes depending on `i`.
    pub fn dependents(&self, tgg: &Tgg, i: usize) -> BTreeSet<usize> {
        self.nodes[i].created(tgg).flat_map(|c| self.users_of(c).iter().copied()).filter(|j| *j != i).collect()
    }

    /// `i` and everything transitively depending on it.
    pub fn dependent_closure(&self, tgg: &Tgg, i: usize) -> BTreeSet<usize> {
        let mut seen = BTreeSet::from([i]);
        let mut todo = vec![i];
        while let Some(x) = todo.pop() {
            for y in self.dependents(tgg, x) {
                if seen.insert(y) {
                    todo.push(y);
                }
            }
        }
        seen
    }

    /// Dependency edges between alive nodes, `(a, b)` meaning `a` depends on `b`.
    pub fn edges(&self, tgg: &Tgg) -> Vec<(usize, usize)> {
        let mut out = BTreeSet::new();
        for (a, _) in self.alive() {
            for b in self.deps(tgg, a) {
                out.insert((a, b));
            }
        }
        out.into_iter().collect()
    }

    /// Alive base nodes as a plain precedence graph.
    pub fn base_pg(&self) -> PrecedenceGraph {
        let mut nodes: Vec<_> = self
            .alive()
            .filter(|(_, n)| !n.is_candidate())
            .map(|(_, n)| crate::precedence::PgNode { id: n.id.clone(), rule: n.rule, bindings: n.full_bindings().expect("base node is complete") })
            .collect();
        nodes.sort_by(|a, b| a.id.cmp(&b.id));
        PrecedenceGraph { nodes }
    }

    /// Alive node indices sorted by id.
    pub fn sorted(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.alive().map(|(i, _)| i).collect();
        v.sort_by(|a, b| self.nodes[*a].id.cmp(&self.nodes[*b].id));
        v
    }

    pub fn to_doc(&self, tgg: &Tgg) -> PgDoc {
        let nodes = self
            .sorted()
            .into_iter()
            .map(|i| {
                let n = &self.nodes[i];
                let r = &tgg.rules[n.rule];
                let bindings: BTreeMap<String, ElemId> =
                    r.pattern.elems.iter().zip(&n.bindings).filter_map(|(e, b)| b.clone().map(|b| (e.name.clone(), b))).collect();
                NodeDoc {
                    id: n.id.clone(),
                    rule: r.name.clone(),
                    bindings,
                    created: n.created(tgg).cloned().collect(),
                    context: n.context(tgg).cloned().collect(),
                    src_ann: Some(n.src.symbols()),
                    trg_ann: Some(n.trg.symbols()),
                    origin: Some(n.origin.label().to_string()),
                }
            })
            .collect();
        let mut edges: Vec<(String, String)> =
            self.edges(tgg).into_iter().map(|(a, b)| (self.nodes[a].id.clone(), self.nodes[b].id.clone())).collect();
        edges.sort();
        PgDoc { nodes, edges }
    }

    pub fn to_json(&self, tgg: &Tgg) -> String {
        serde_json::to_string_pretty(&self.to_doc(tgg)).expect("serializable")
    }

    /// Candidate name: rule, digits of the first created node, and a prime
    /// per side (`'` source, `''` target).
    fn cand_name(&mut self, tgg: &Tgg, key: &CandKey) -> String {
        if let Some(n) = self.cand_names.get(key) {
            return n.clone();
        }
        let (rule, origin, b) = key;
        let r = &tgg.rules[*rule];
        let digits = r
            .created()
            .filter(|i| b[*i].is_some())
            .find_map(|i| match &r.pattern.elems[i].kind {
                PKind::Node { .. } => b[i].as_ref().map(|x| x.digits().to_string()),
                _ => None,
            })
            .or_else(|| {
                r.created().filter(|i| b[*i].is_some()).find_map(|i| match &r.pattern.elems[i].kind {
                    PKind::Edge { from, .. } => b[*from].as_ref().map(|x| x.digits().to_string()),
                    _ => None,
                })
            })
            .unwrap_or_default();
        let prime = if *origin == Origin::Src { "'" } else { "''" };
        let name = unique_name(format!("{}{digits}{prime}", r.name), &mut self.names);
        self.cand_names.insert(key.clone(), name.clone());
        name
    }
}

#[cfg(test)]
pub(crate) mod tests;

