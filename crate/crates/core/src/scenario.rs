//! Synthetic synchronization scenarios over the class/documentation
//! grammar: a consistent base model plus paired source and target edits,
//! a chosen share of which induce exactly one conflict each.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::delta::{Delta, Op};
use crate::error::{Error, Result};
use crate::grammar::{derive_random, Application, Tgg};
use crate::graph::{AttrKind, ElemId, Element, Side, TripleGraph, Value};
use crate::precedence::{pg_from_trace, PrecedenceGraph};
use crate::rewrite::{apply, Role, ValueSource};

/// How the base model is obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Base {
    /// class hierarchies with members and glossary links, sized to order
    Structured,
    /// a random derivation of the grammar
    Derived,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Scenario {
    pub base: Base,
    /// node count of a structured base model, source plus target; number
    /// of derivation steps for a derived one
    pub size: usize,
    pub changes: usize,
    /// share of conflict-inducing changes
    pub ratio: f64,
    pub seed: u64,
}

impl Scenario {
    pub fn structured(size: usize, changes: usize, ratio: f64, seed: u64) -> Scenario {
        Scenario { base: Base::Structured, size, changes, ratio, seed }
    }

    pub fn derived(size: usize, changes: usize, ratio: f64, seed: u64) -> Scenario {
        Scenario { base: Base::Derived, size, changes, ratio, seed }
    }

    /// Number of conflict-inducing changes.
    pub fn conflicts(&self) -> usize {
        ((self.ratio * self.changes as f64) - 1e-9).ceil().max(0.0) as usize
    }
}

/// Kinds of injected edits.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Template {
    /// delete a method on one side, link its entry on the other
    DeleteVsLink,
    /// move a field and its entry to unrelated containers
    MoveVsMove,
    /// rename a method and its entry differently
    DivergentRename,
    AddField,
    RenameEntry,
    AddLink,
}

impl Template {
    pub const CONFLICTING: [Template; 3] = [Template::DeleteVsLink, Template::MoveVsMove, Template::DivergentRename];
    pub const BENIGN: [Template; 3] = [Template::AddField, Template::RenameEntry, Template::AddLink];
}

/// Observable effect a benign change must leave in the synchronized host.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "expect", rename_all = "kebab-case")]
pub enum Expect {
    Edge { from: ElemId, ty: String, to: ElemId },
    Attr { node: ElemId, attr: String, value: Value },
    /// the node has a correspondence to a present node with the same name
    Translated { node: ElemId },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Change {
    pub template: Template,
    /// class whose members the change edits
    pub owner: ElemId,
    pub expect: Vec<Expect>,
}

impl Change {
    pub fn conflicting(&self) -> bool {
        Template::CONFLICTING.contains(&self.template)
    }
}

pub struct Generated {
    pub host: TripleGraph,
    /// precedence graph of the construction (parsing yields an equivalent one)
    pub pg: PrecedenceGraph,
    pub ds: Delta,
    pub dt: Delta,
    pub changes: Vec<Change>,
}

impl Generated {
    pub fn conflicts(&self) -> usize {
        self.changes.iter().filter(|c| c.conflicting()).count()
    }

    /// Benign effects missing from `out`, one line each.
    pub fn missing_benign(&self, out: &TripleGraph) -> Vec<String> {
        let mut miss = Vec::new();
        for c in self.changes.iter().filter(|c| !c.conflicting()) {
            for e in &c.expect {
                if !holds(out, e) {
                    miss.push(format!("{:?} by {:?}", e, c.template));
                }
            }
        }
        miss
    }
}

fn holds(h: &TripleGraph, e: &Expect) -> bool {
    match e {
        Expect::Edge { from, ty, to } => h.out_edges(from).filter_map(|x| h.edge(x)).any(|x| &x.ty == ty && &x.to == to),
        Expect::Attr { node, attr, value } => h.attr(node, attr) == Some(value),
        Expect::Translated { node } => {
            let name = h.attr(node, "name");
            h.corrs_of(node).filter_map(|c| h.corr(c)).any(|c| {
                let other = if c.src.as_ref() == Some(node) { &c.trg } else { &c.src };
                other.as_ref().is_some_and(|o| h.contains(o) && h.attr(o, "name") == name)
            })
        }
    }
}

/// Sequential names for string attributes, zero for integers.
struct Names(usize);

impl ValueSource for Names {
    fn fresh(&mut self, kind: AttrKind) -> Value {
        match kind {
            AttrKind::String => {
                self.0 += 1;
                Value::Str(format!("n{}", self.0))
            }
            AttrKind::Integer => Value::Int(0),
        }
    }
}

struct Builder<'a> {
    tgg: &'a Tgg,
    host: TripleGraph,
    trace: Vec<Application>,
    names: Names,
}

impl Builder<'_> {
    /// Applies `rule` with the named context elements; returns a lookup of
    /// the whole binding by element name.
    fn app(&mut self, rule: &str, ctx: &[(&str, &ElemId)]) -> BTreeMap<String, ElemId> {
        let r = self.tgg.rule(rule).expect("grammar rule");
        let mut lhs = vec![None; r.pattern.len()];
        for (n, id) in ctx {
            lhs[r.pattern.index_of(n).expect("rule element")] = Some((*id).clone());
        }
        let roles: Vec<Role> = r.create.iter().map(|c| if *c { Role::Create } else { Role::Preserve }).collect();
        let prefixes: Vec<String> = r
            .pattern
            .elems
            .iter()
            .map(|e| match e.side() {
                _ if e.is_node() => e.ty().chars().filter(|c| c.is_ascii_uppercase()).collect(),
                Side::Corr => "x".into(),
                _ => "e".into(),
            })
            .collect();
        let b = apply(&mut self.host, &self.tgg.types, &r.pattern, &roles, &lhs, &mut |h, i| h.fresh_id(&prefixes[i]), &mut self.names)
            .expect("structured construction applies");
        let out = r.pattern.elems.iter().map(|e| e.name.clone()).zip(b.iter().cloned()).collect();
        self.trace.push(Application { rule: rule.into(), bindings: b });
        out
    }
}

/// Class hierarchies of depth four, two methods (one with a parameter) and
/// two glossary-linked fields per class; about `size` nodes in total.
pub fn build_structured(tgg: &Tgg, size: usize, seed: u64) -> Result<(TripleGraph, PrecedenceGraph)> {
    for r in ["CD", "ICD", "ME", "FE", "P", "G", "GE", "GL"] {
        if tgg.rule(r).is_none() {
            return Err(Error::Unknown { what: "rule", name: r.into() });
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut b = Builder { tgg, host: TripleGraph::new(), trace: Vec::new(), names: Names(0) };
    let classes = (size.saturating_sub(1) * 10 / 111).max(4);
    let g = b.app("G", &[])["g"].clone();
    let mut ges: Vec<ElemId> = Vec::new();
    let mut prev: Option<(ElemId, ElemId, ElemId)> = None;
    for i in 0..classes {
        if i % 10 == 0 {
            ges.push(b.app("GE", &[("g", &g)])["ge"].clone());
        }
        let cls = match (&prev, i % 4) {
            (Some((sc, sd, scd)), 1..) => b.app("ICD", &[("sc", sc), ("sd", sd), ("scd", scd)]),
            _ => b.app("CD", &[]),
        };
        let (c, d, cd) = (cls["c"].clone(), cls["d"].clone(), cls["cd"].clone());
        for k in 0..2 {
            let me = b.app("ME", &[("c", &c), ("d", &d), ("cd", &cd)]);
            if k == 0 {
                b.app("P", &[("m", &me["m"]), ("e", &me["e"]), ("me", &me["me"])]);
            }
        }
        for _ in 0..2 {
            let fe = b.app("FE", &[("c", &c), ("d", &d), ("cd", &cd)]);
            let ge = ges[rng.gen_range(0..ges.len())].clone();
            b.app("GL", &[("e", &fe["e"]), ("ge", &ge)]);
        }
        prev = Some((c, d, cd));
    }
    let pg = pg_from_trace(tgg, &b.trace)?;
    Ok((b.host, pg))
}

/// A method or field with its entry.
#[derive(Clone, Debug)]
struct Member {
    method: bool,
    node: ElemId,
    /// containment edge from the class
    edge: ElemId,
    entry: ElemId,
    entry_edge: ElemId,
    doc: ElemId,
}

#[derive(Default)]
struct Index {
    classes: Vec<ElemId>,
    doc_of: BTreeMap<ElemId, ElemId>,
    members: BTreeMap<ElemId, Vec<Member>>,
    params: BTreeMap<ElemId, Vec<(ElemId, ElemId)>>,
    ges: Vec<ElemId>,
    links: BTreeSet<(ElemId, ElemId)>,
}

impl Index {
    fn new(h: &TripleGraph) -> Index {
        let mut ix = Index::default();
        let partner = |n: &ElemId| h.corrs_of(n).filter_map(|c| h.corr(c)).find(|c| c.src.as_ref() == Some(n)).and_then(|c| c.trg.clone());
        for el in h.elements() {
            match el {
                Element::Node(n) if n.ty == "Class" => {
                    if let Some(d) = partner(&n.id) {
                        ix.classes.push(n.id.clone());
                        ix.doc_of.insert(n.id.clone(), d);
                    }
                }
                Element::Node(n) if n.ty == "GlossaryEntry" => ix.ges.push(n.id.clone()),
                Element::Edge(e) if e.ty == "link" => {
                    ix.links.insert((e.from.clone(), e.to.clone()));
                }
                Element::Edge(e) if e.ty == "params" => ix.params.entry(e.from.clone()).or_default().push((e.id.clone(), e.to.clone())),
                _ => {}
            }
        }
        for el in h.elements() {
            let Element::Edge(e) = el else { continue };
            if e.ty != "methods" && e.ty != "fields" {
                continue;
            }
            let Some(entry) = partner(&e.to) else { continue };
            let Some(de) = h.in_edges(&entry).filter_map(|x| h.edge(x)).find(|x| x.ty == "entries") else { continue };
            ix.members.entry(e.from.clone()).or_default().push(Member {
                method: e.ty == "methods",
                node: e.to.clone(),
                edge: e.id.clone(),
                entry,
                entry_edge: de.id.clone(),
                doc: de.from.clone(),
            });
        }
        ix
    }

    fn unlinked_ge(&self, entry: &ElemId, rng: &mut ChaCha8Rng) -> Option<ElemId> {
        let free: Vec<&ElemId> = self.ges.iter().filter(|g| !self.links.contains(&(entry.clone(), (*g).clone()))).collect();
        free.choose(rng).map(|g| (*g).clone())
    }
}

struct Injector<'a> {
    host: &'a TripleGraph,
    ix: Index,
    rng: ChaCha8Rng,
    src: Vec<Op>,
    trg: Vec<Op>,
}

impl Injector<'_> {
    fn member(&self, class: &ElemId, method: Option<bool>) -> Option<Member> {
        self.ix.members.get(class)?.iter().find(|m| method.is_none_or(|k| m.method == k)).cloned()
    }

    fn name(&self, n: &ElemId) -> Option<Value> {
        self.host.attr(n, "name").cloned()
    }

    /// Emits the edit pair of `t` on class `c`, or `None` if it does not fit.
    fn inject(&mut self, t: Template, c: &ElemId, k: usize) -> Option<Change> {
        let add_edge = |id: String, ty: &str, from: &ElemId, to: &ElemId| Op::AddEdge { id: ElemId::new(id), ty: ty.into(), from: from.clone(), to: to.clone() };
        let expect = match t {
            Template::DeleteVsLink => {
                let m = self.member(c, Some(true))?;
                let ge = self.ix.unlinked_ge(&m.entry, &mut self.rng)?;
                let params = self.ix.params.get(&m.node).cloned().unwrap_or_default();
                self.src.extend(params.iter().map(|(e, _)| Op::DeleteEdge { id: e.clone() }));
                self.src.extend(params.iter().map(|(_, p)| Op::DeleteNode { id: p.clone() }));
                self.src.push(Op::DeleteEdge { id: m.edge.clone() });
                self.src.push(Op::DeleteNode { id: m.node.clone() });
                self.trg.push(add_edge(format!("new-l{k}"), "link", &m.entry, &ge));
                Vec::new()
            }
            Template::MoveVsMove => {
                let f = self.member(c, Some(false))?;
                let others: Vec<&ElemId> = self.ix.classes.iter().filter(|x| *x != c).collect();
                let c2 = (*others.choose(&mut self.rng)?).clone();
                let d2 = self.ix.doc_of[&c2].clone();
                let docs: Vec<ElemId> = self.ix.classes.iter().map(|x| self.ix.doc_of[x].clone()).filter(|d| *d != f.doc && *d != d2).collect();
                let d3 = docs.choose(&mut self.rng)?.clone();
                self.src.push(Op::DeleteEdge { id: f.edge.clone() });
                self.src.push(add_edge(format!("new-f{k}"), "fields", &c2, &f.node));
                self.trg.push(Op::DeleteEdge { id: f.entry_edge.clone() });
                self.trg.push(add_edge(format!("new-e{k}"), "entries", &d3, &f.entry));
                Vec::new()
            }
            Template::DivergentRename => {
                let m = self.member(c, Some(true)).or_else(|| self.member(c, None))?;
                let (a, b) = (self.name(&m.node), self.name(&m.entry));
                self.src.push(Op::SetAttr { node: m.node, attr: "name".into(), old: a, new: Value::Str(format!("s{k}")) });
                self.trg.push(Op::SetAttr { node: m.entry, attr: "name".into(), old: b, new: Value::Str(format!("t{k}")) });
                Vec::new()
            }
            Template::AddField => {
                let id = ElemId::new(format!("new-F{k}"));
                let attrs = BTreeMap::from([("name".to_string(), Value::Str(format!("nf{k}")))]);
                self.src.push(Op::AddNode { id: id.clone(), ty: "Field".into(), attrs });
                self.src.push(add_edge(format!("new-cf{k}"), "fields", c, &id));
                vec![Expect::Edge { from: c.clone(), ty: "fields".into(), to: id.clone() }, Expect::Translated { node: id }]
            }
            Template::RenameEntry => {
                let f = self.member(c, Some(false)).or_else(|| self.member(c, None))?;
                let v = Value::Str(format!("r{k}"));
                self.trg.push(Op::SetAttr { node: f.entry.clone(), attr: "name".into(), old: self.name(&f.entry), new: v.clone() });
                vec![Expect::Attr { node: f.entry, attr: "name".into(), value: v.clone() }, Expect::Attr { node: f.node, attr: "name".into(), value: v }]
            }
            Template::AddLink => {
                let members = self.ix.members.get(c)?.clone();
                let (m, ge) = members.iter().find_map(|m| self.ix.unlinked_ge(&m.entry, &mut self.rng).map(|g| (m.clone(), g)))?;
                self.trg.push(add_edge(format!("new-l{k}"), "link", &m.entry, &ge));
                self.ix.links.insert((m.entry.clone(), ge.clone()));
                vec![Expect::Edge { from: m.entry, ty: "link".into(), to: ge }]
            }
        };
        Some(Change { template: t, owner: c.clone(), expect })
    }
}

/// The base model of a scenario with its construction precedence graph.
pub fn base_model(tgg: &Tgg, s: &Scenario) -> Result<(TripleGraph, PrecedenceGraph)> {
    match s.base {
        Base::Structured => build_structured(tgg, s.size, s.seed),
        Base::Derived => {
            let d = derive_random(tgg, s.size.max(1), s.seed)?;
            let pg = pg_from_trace(tgg, &d.steps)?;
            Ok((d.graph, pg))
        }
    }
}

/// Generates the base model and the two deltas of a scenario.
pub fn gen_scenario(tgg: &Tgg, s: &Scenario) -> Result<Generated> {
    let (host, pg) = base_model(tgg, s)?;
    inject(host, pg, s)
}

/// Injects the edits of `s` into a given base model.
pub fn inject(host: TripleGraph, pg: PrecedenceGraph, s: &Scenario) -> Result<Generated> {
    let mut rng = ChaCha8Rng::seed_from_u64(s.seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(1));
    let mut owners = Index::new(&host).classes;
    owners.shuffle(&mut rng);
    let mut inj = Injector { host: &host, ix: Index::new(&host), rng, src: Vec::new(), trg: Vec::new() };
    let n_conf = s.conflicts().min(s.changes);
    let mut changes = Vec::new();
    let mut next_owner = 0;
    for k in 0..s.changes {
        let group = if k < n_conf { Template::CONFLICTING } else { Template::BENIGN };
        let first = inj.rng.gen_range(0..group.len());
        let mut made = None;
        'owners: while next_owner < owners.len() {
            let c = owners[next_owner].clone();
            next_owner += 1;
            for j in 0..group.len() {
                if let Some(ch) = inj.inject(group[(first + j) % group.len()], &c, k) {
                    made = Some(ch);
                    break 'owners;
                }
            }
        }
        match made {
            Some(ch) => changes.push(ch),
            None => return Err(Error::Format(format!("base model too small for {} changes ({} placed)", s.changes, changes.len()))),
        }
    }
    let (ds, dt) = (Delta { side: Side::Source, ops: inj.src }, Delta { side: Side::Target, ops: inj.trg });
    Ok(Generated { host, pg, ds, dt, changes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conflict::detect_all;
    use crate::delta::apply_delta;
    use crate::dpg::{Dpg, Env};
    use crate::fixtures;
    use crate::operational::OpRules;
    use crate::precedence::verify_pg;

    fn conflicts(tgg: &Tgg, g: &Generated) -> usize {
        let ops = OpRules::new(tgg).unwrap();
        let mut host = g.host.clone();
        let log = apply_delta(&mut host, &g.ds, &g.dt).unwrap();
        let env = Env { tgg, ops: &ops, host: &host, log: &log };
        detect_all(env, &Dpg::annotate(env, &g.pg)).len()
    }

    #[test]
    fn structured_model_is_consistent() {
        let tgg = fixtures::grammar();
        let (h, pg) = build_structured(&tgg, 300, 1).unwrap();
        assert!(verify_pg(&tgg, &h, &pg).is_empty());
        let nodes = h.elements().filter(|e| e.as_node().is_some()).count();
        assert!((250..=330).contains(&nodes), "{nodes}");
    }

    #[test]
    fn detector_counts_match_requested_conflicts() {
        let tgg = fixtures::grammar();
        for (size, changes, ratio, seed) in [(1000, 40, 1.0, 7), (1000, 40, 0.5, 8), (600, 12, 0.25, 9), (400, 0, 1.0, 1)] {
            let g = gen_scenario(&tgg, &Scenario::structured(size, changes, ratio, seed)).unwrap();
            assert_eq!(g.changes.len(), changes);
            assert_eq!(g.conflicts(), Scenario::structured(size, changes, ratio, seed).conflicts());
            assert_eq!(conflicts(&tgg, &g), g.conflicts(), "size {size} changes {changes} ratio {ratio}");
        }
    }

    #[test]
    fn generation_is_reproducible() {
        let tgg = fixtures::grammar();
        let a = gen_scenario(&tgg, &Scenario::structured(500, 10, 0.5, 3)).unwrap();
        let b = gen_scenario(&tgg, &Scenario::structured(500, 10, 0.5, 3)).unwrap();
        assert_eq!((a.host, a.ds, a.dt, a.changes), (b.host, b.ds, b.dt, b.changes));
    }

    fn sync(tgg: &Tgg, g: &Generated) -> crate::restore::Outcome {
        let o = crate::restore::Orchestration::from_json(fixtures::ORCHESTRATION).unwrap();
        crate::restore::run(tgg, g.host.clone(), &g.pg, &g.ds, &g.dt, &o).unwrap()
    }

    #[test]
    fn synchronization_keeps_benign_changes() {
        let tgg = fixtures::grammar();
        for seed in 0..6 {
            for s in [Scenario::structured(400, 16, 0.5, seed), Scenario::derived(40, 3, 0.34, seed)] {
                let Ok(g) = gen_scenario(&tgg, &s) else { continue };
                let out = sync(&tgg, &g);
                let diags = verify_pg(&tgg, &out.host, &out.pg);
                assert!(diags.is_empty(), "{s:?}: {diags:?}\n{}", out.report.render());
                assert_eq!(g.missing_benign(&out.host), Vec::<String>::new(), "{s:?}\n{}", out.report.render());
                assert_eq!(out.report.resolutions.len(), g.conflicts(), "{s:?}");
            }
        }
    }
}
