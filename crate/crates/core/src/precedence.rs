//! Precedence graphs: covers of a triple graph by consistency matches.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grammar::{Application, Tgg};
use crate::graph::{ElemId, TripleGraph};
use crate::operational::{compute_filter_nacs, OpRules};
use crate::pattern::{Matcher, Pattern, PatternMatch};

/// One consistency match: a rule's right-hand side embedded in the host.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PgNode {
    pub id: String,
    pub rule: usize,
    pub bindings: Vec<ElemId>,
}

impl PgNode {
    pub fn created<'a>(&'a self, tgg: &'a Tgg) -> impl Iterator<Item = &'a ElemId> + 'a {
        tgg.rules[self.rule].created().map(move |i| &self.bindings[i])
    }

    pub fn context<'a>(&'a self, tgg: &'a Tgg) -> impl Iterator<Item = &'a ElemId> + 'a {
        tgg.rules[self.rule].context().map(move |i| &self.bindings[i])
    }
}

/// Readable node name: rule name plus the digits of the first created node
/// (or of the first created edge's source), made unique with `.k`.
pub fn node_name(tgg: &Tgg, rule: usize, bindings: &[ElemId], used: &mut BTreeSet<String>) -> String {
    let r = &tgg.rules[rule];
    let digits = r
        .created()
        .find(|i| r.pattern.elems[*i].is_node())
        .map(|i| bindings[i].digits().to_string())
        .or_else(|| {
            r.created().find_map(|i| match &r.pattern.elems[i].kind {
                crate::pattern::PKind::Edge { from, .. } => Some(bindings[*from].digits().to_string()),
                _ => None,
            })
        })
        .unwrap_or_default();
    unique_name(format!("{}{digits}", r.name), used)
}

pub fn unique_name(base: String, used: &mut BTreeSet<String>) -> String {
    let mut name = base.clone();
    let mut k = 0;
    while used.contains(&name) {
        k += 1;
        name = format!("{base}.{k}");
    }
    used.insert(name.clone());
    name
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PrecedenceGraph {
    pub nodes: Vec<PgNode>,
}

impl PrecedenceGraph {
    /// Dependency edges `(a, b)`: `a` uses as context something `b` created.
    pub fn edges(&self, tgg: &Tgg) -> Vec<(usize, usize)> {
        let creator = self.creators(tgg);
        let mut out = BTreeSet::new();
        for (a, n) in self.nodes.iter().enumerate() {
            for c in n.context(tgg) {
                if let Some(b) = creator.get(c) {
                    out.insert((a, *b));
                }
            }
        }
        out.into_iter().collect()
    }

    pub fn creators(&self, tgg: &Tgg) -> HashMap<ElemId, usize> {
        let mut m = HashMap::new();
        for (i, n) in self.nodes.iter().enumerate() {
            for c in n.created(tgg) {
                m.insert(c.clone(), i);
            }
        }
        m
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n.id == id)
    }

    pub fn to_doc(&self, tgg: &Tgg) -> PgDoc {
        let nodes = self.nodes.iter().map(|n| NodeDoc::new(tgg, n)).collect();
        let edges = self.edges(tgg).into_iter().map(|(a, b)| (self.nodes[a].id.clone(), self.nodes[b].id.clone())).collect();
        PgDoc { nodes, edges }
    }

    pub fn from_doc(tgg: &Tgg, doc: &PgDoc) -> Result<Self> {
        let mut nodes = Vec::new();
        for d in &doc.nodes {
            let rule = tgg.rule_index(&d.rule).ok_or_else(|| Error::Unknown { what: "rule", name: d.rule.clone() })?;
            let r = &tgg.rules[rule];
            let mut bindings = Vec::new();
            for e in &r.pattern.elems {
                let id = d.bindings.get(&e.name).ok_or_else(|| Error::Format(format!("node `{}` lacks binding `{}`", d.id, e.name)))?;
                bindings.push(id.clone());
            }
            nodes.push(PgNode { id: d.id.clone(), rule, bindings });
        }
        Ok(PrecedenceGraph { nodes })
    }

    pub fn to_json(&self, tgg: &Tgg) -> String {
        serde_json::to_string_pretty(&self.to_doc(tgg)).expect("serializable")
    }

    pub fn from_json(tgg: &Tgg, text: &str) -> Result<Self> {
        Self::from_doc(tgg, &serde_json::from_str(text)?)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeDoc {
    pub id: String,
    pub rule: String,
    pub bindings: BTreeMap<String, ElemId>,
    #[serde(default)]
    pub created: Vec<ElemId>,
    #[serde(default)]
    pub context: Vec<ElemId>,
    #[serde(rename = "srcAnn", default, skip_serializing_if = "Option::is_none")]
    pub src_ann: Option<Vec<String>>,
    #[serde(rename = "trgAnn", default, skip_serializing_if = "Option::is_none")]
    pub trg_ann: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub origin: Option<String>,
}

impl NodeDoc {
    pub fn new(tgg: &Tgg, n: &PgNode) -> Self {
        let r = &tgg.rules[n.rule];
        NodeDoc {
            id: n.id.clone(),
            rule: r.name.clone(),
            bindings: r.pattern.elems.iter().zip(&n.bindings).map(|(e, b)| (e.name.clone(), b.clone())).collect(),
            created: n.created(tgg).cloned().collect(),
            context: n.context(tgg).cloned().collect(),
            src_ann: None,
            trg_ann: None,
            origin: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PgDoc {
    pub nodes: Vec<NodeDoc>,
    pub edges: Vec<(String, String)>,
}

/// One node per application of a derivation trace.
pub fn pg_from_trace(tgg: &Tgg, trace: &[Application]) -> Result<PrecedenceGraph> {
    let mut used = BTreeSet::new();
    let mut nodes = Vec::new();
    for a in trace {
        let rule = tgg.rule_index(&a.rule).ok_or_else(|| Error::Unknown { what: "rule", name: a.rule.clone() })?;
        let id = node_name(tgg, rule, &a.bindings, &mut used);
        nodes.push(PgNode { id, rule, bindings: a.bindings.clone() });
    }
    Ok(PrecedenceGraph { nodes })
}

/// Candidate covering matches of one rule with `x` bound to a created slot.
struct Frame {
    options: Vec<(usize, PatternMatch)>,
    next: usize,
}

/// Finds a covering, acyclic set of consistency matches by backtracking
/// search. `budget` bounds the number of undone choices (default: ten per
/// host element).
pub fn parse_pg(tgg: &Tgg, host: &TripleGraph, budget: Option<usize>) -> Result<PrecedenceGraph> {
    let budget = budget.unwrap_or(10 * host.len().max(1));
    let (fnacs, bnacs) = compute_filter_nacs(tgg);
    // consistency patterns carrying both directions' filter NACs for pruning
    let pats: Vec<Pattern> = tgg
        .rules
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let mut p = r.pattern.clone();
            p.nacs.extend(fnacs[i].iter().chain(&bnacs[i]).cloned());
            p
        })
        .collect();
    let mut unmarked: BTreeSet<ElemId> = host.ids().cloned().collect();
    let mut chosen: Vec<(usize, PatternMatch)> = Vec::new();
    let mut stack: Vec<Frame> = Vec::new();
    let mut backtracks = 0usize;
    let options = |unmarked: &BTreeSet<ElemId>, x: &ElemId| -> Result<Vec<(usize, PatternMatch)>> {
        let mut out = Vec::new();
        for (ri, r) in tgg.rules.iter().enumerate() {
            let filter = |i: usize, id: &ElemId| !r.create[i] || unmarked.contains(id);
            for slot in r.created() {
                let mut seed = vec![None; r.pattern.len()];
                seed[slot] = Some(x.clone());
                let m = Matcher::new(host, &tgg.types).filter(&filter);
                let found = match m.find_all(&pats[ri], &seed) {
                    Ok(f) => f,
                    Err(Error::IncompatibleSeed(_)) => continue,
                    Err(e) => return Err(e),
                };
                out.extend(found.into_iter().map(|pm| (ri, pm)));
            }
        }
        Ok(out)
    };
    loop {
        match unmarked.iter().next().cloned() {
            Some(x) => stack.push(Frame { options: options(&unmarked, &x)?, next: 0 }),
            None if acyclic(tgg, &chosen) => break,
            None => {}
        }
        if !advance(tgg, &mut stack, &mut chosen, &mut unmarked, &mut backtracks) {
            return Err(Error::NoCover);
        }
        if backtracks > budget {
            return Err(Error::BudgetExhausted(budget));
        }
    }
    let mut used = BTreeSet::new();
    let mut nodes: Vec<PgNode> = chosen
        .into_iter()
        .map(|(rule, pm)| {
            let id = node_name(tgg, rule, &pm.bindings, &mut used);
            PgNode { id, rule, bindings: pm.bindings }
        })
        .collect();
    nodes.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(PrecedenceGraph { nodes })
}

/// Takes the next untried option, undoing choices of exhausted frames.
/// Frame `i` owns `chosen[i]` once it has picked an option.
fn advance(
    tgg: &Tgg,
    stack: &mut Vec<Frame>,
    chosen: &mut Vec<(usize, PatternMatch)>,
    unmarked: &mut BTreeSet<ElemId>,
    backtracks: &mut usize,
) -> bool {
    while !stack.is_empty() {
        if chosen.len() == stack.len() {
            let (ri, pm) = chosen.pop().expect("owned choice");
            for i in tgg.rules[ri].created() {
                unmarked.insert(pm.bindings[i].clone());
            }
            *backtracks += 1;
        }
        let top = stack.last_mut().expect("non-empty");
        if top.next < top.options.len() {
            let (ri, pm) = top.options[top.next].clone();
            top.next += 1;
            for i in tgg.rules[ri].created() {
                unmarked.remove(&pm.bindings[i]);
            }
            chosen.push((ri, pm));
            return true;
        }
        stack.pop();
    }
    false
}

fn acyclic(tgg: &Tgg, chosen: &[(usize, PatternMatch)]) -> bool {
    let nodes: Vec<PgNode> =
        chosen.iter().enumerate().map(|(i, (rule, pm))| PgNode { id: i.to_string(), rule: *rule, bindings: pm.bindings.clone() }).collect();
    let pg = PrecedenceGraph { nodes };
    topo_order(pg.nodes.len(), &pg.edges(tgg)).is_some()
}

/// Topological order (dependencies first) or `None` on a cycle.
pub fn topo_order(n: usize, edges: &[(usize, usize)]) -> Option<Vec<usize>> {
    let mut indeg = vec![0usize; n];
    let mut users: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (a, b) in edges {
        if a == b {
            return None;
        }
        indeg[*a] += 1;
        users[*b].push(*a);
    }
    let mut ready: BTreeSet<usize> = (0..n).filter(|i| indeg[*i] == 0).collect();
    let mut out = Vec::with_capacity(n);
    while let Some(i) = ready.pop_first() {
        out.push(i);
        for u in &users[i] {
            indeg[*u] -= 1;
            if indeg[*u] == 0 {
                ready.insert(*u);
            }
        }
    }
    (out.len() == n).then_some(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING-KEBAB-CASE")]
pub enum PgDiagKind {
    Coverage,
    Acyclicity,
    Match,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PgDiagnostic {
    pub kind: PgDiagKind,
    pub nodes: Vec<String>,
    pub elements: Vec<ElemId>,
    pub message: String,
}

/// Language-membership certificate check: every node is a valid match,
/// every element is created exactly once and dependencies are acyclic.
pub fn verify_pg(tgg: &Tgg, host: &TripleGraph, pg: &PrecedenceGraph) -> Vec<PgDiagnostic> {
    let mut out = Vec::new();
    let m = Matcher::new(host, &tgg.types).ignore_nacs();
    for n in &pg.nodes {
        let r = &tgg.rules[n.rule];
        let seed: Vec<Option<ElemId>> = n.bindings.iter().cloned().map(Some).collect();
        if !matches!(m.exists(&r.pattern, &seed), Ok(true)) {
            out.push(PgDiagnostic {
                kind: PgDiagKind::Match,
                nodes: vec![n.id.clone()],
                elements: n.bindings.clone(),
                message: format!("`{}` is not a valid match of `{}`", n.id, r.name),
            });
        }
    }
    let mut count: BTreeMap<&ElemId, Vec<&str>> = host.ids().map(|id| (id, Vec::new())).collect();
    let mut stray = Vec::new();
    for n in &pg.nodes {
        for c in n.created(tgg) {
            match count.get_mut(c) {
                Some(v) => v.push(&n.id),
                None => stray.push(c.clone()),
            }
        }
    }
    let orphans: Vec<ElemId> = count.iter().filter(|(_, v)| v.is_empty()).map(|(k, _)| (*k).clone()).collect();
    if !orphans.is_empty() {
        out.push(PgDiagnostic { kind: PgDiagKind::Coverage, nodes: vec![], elements: orphans, message: "elements not created by any node".into() });
    }
    for (e, v) in &count {
        if v.len() > 1 {
            out.push(PgDiagnostic {
                kind: PgDiagKind::Coverage,
                nodes: v.iter().map(|s| s.to_string()).collect(),
                elements: vec![(*e).clone()],
                message: format!("`{e}` created {} times", v.len()),
            });
        }
    }
    if !stray.is_empty() {
        out.push(PgDiagnostic { kind: PgDiagKind::Coverage, nodes: vec![], elements: stray, message: "created elements missing from host".into() });
    }
    if topo_order(pg.nodes.len(), &pg.edges(tgg)).is_none() {
        out.push(PgDiagnostic { kind: PgDiagKind::Acyclicity, nodes: pg.nodes.iter().map(|n| n.id.clone()).collect(), elements: vec![], message: "dependency cycle".into() });
    }
    out
}

/// Convenience wrapper bundling a grammar with its operationalization.
pub fn op_rules(tgg: &Tgg) -> Result<OpRules> {
    OpRules::new(tgg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::grammar::{derive, Selector};
    use crate::graph::{Node, Side};
    use crate::rewrite::Defaults;

    #[test]
    fn running_model_parses() {
        let g = fixtures::grammar();
        let m = fixtures::model();
        let pg = parse_pg(&g, &m, None).unwrap();
        let ids: Vec<&str> = pg.nodes.iter().map(|n| n.id.as_str()).collect();
        assert_eq!(ids, ["CD1", "CD2", "FE5", "FE7", "G14", "GE12", "GE13", "GL7", "GL8", "ME6", "ME8", "P10", "P11", "P9"]);
        assert!(verify_pg(&g, &m, &pg).is_empty());
        let back = PrecedenceGraph::from_json(&g, &pg.to_json(&g)).unwrap();
        assert_eq!(back, pg);
    }

    #[test]
    fn orphan_node_has_no_cover() {
        let g = fixtures::grammar();
        let mut m = fixtures::model();
        m.add_node(Node { id: "X1".into(), side: Side::Source, ty: "Field".into(), attrs: Default::default() }).unwrap();
        assert_eq!(parse_pg(&g, &m, None).unwrap_err(), Error::NoCover);
        assert!(parse_pg(&g, &TripleGraph::new(), None).unwrap().nodes.is_empty());
    }

    #[test]
    fn trace_chain() {
        let g = fixtures::grammar();
        let steps: Vec<(String, Selector)> = ["CD", "ICD", "ME", "P"].iter().map(|r| (r.to_string(), Selector::Index(0))).collect();
        let d = derive(&g, TripleGraph::new(), &steps, &mut Defaults).unwrap();
        let pg = pg_from_trace(&g, &d.steps).unwrap();
        assert_eq!(pg.edges(&g), vec![(1, 0), (2, 0), (3, 2)]);
        assert!(verify_pg(&g, &d.graph, &pg).is_empty());
        let two = derive(&g, TripleGraph::new(), &[("CD".into(), Selector::Index(0)), ("CD".into(), Selector::Index(0))], &mut Defaults).unwrap();
        assert!(pg_from_trace(&g, &two.steps).unwrap().edges(&g).is_empty());
    }

    #[test]
    fn broken_pgs_are_diagnosed() {
        let g = fixtures::grammar();
        let m = fixtures::model();
        let mut pg = parse_pg(&g, &m, None).unwrap();
        let mut missing = pg.clone();
        missing.nodes.retain(|n| n.id != "P9");
        let d = verify_pg(&g, &m, &missing);
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].kind, PgDiagKind::Coverage);
        assert!(topo_order(2, &[(0, 1), (1, 0)]).is_none());
        // swap a binding to a wrong element
        let i = pg.index_of("FE5").unwrap();
        pg.nodes[i].bindings[0] = "C2".into();
        assert!(verify_pg(&g, &m, &pg).iter().any(|d| d.kind == PgDiagKind::Match));
    }
}
