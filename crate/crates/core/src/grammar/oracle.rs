//! Exhaustive membership test by enumerating derivations from the empty
//! graph. Deliberately shares no matching code with the rest of the crate.

use std::collections::BTreeMap;

use super::{Tgg, TggRule};
use crate::graph::{Element, Side, TripleGraph, TypeTriple, Value};
use crate::pattern::{Operand, PElem, PKind};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Membership {
    pub member: bool,
    /// Rule names of one witnessing derivation.
    pub witness: Option<Vec<String>>,
    /// Number of abstract states visited.
    pub explored: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum AKind {
    Node { side: Side, ty: String },
    Edge { side: Side, ty: String, from: usize, to: usize },
    Corr { ty: String, src: usize, trg: usize },
}

impl AKind {
    fn key(&self) -> (u8, Side, &str) {
        match self {
            AKind::Node { side, ty } => (0, *side, ty),
            AKind::Edge { side, ty, .. } => (1, *side, ty),
            AKind::Corr { ty, .. } => (2, Side::Corr, ty),
        }
    }
}

/// Abstract graph whose attribute values are variables.
#[derive(Clone, Debug, Default)]
struct State {
    elems: Vec<AKind>,
    vars: BTreeMap<(usize, String), usize>,
    parent: Vec<usize>,
    konst: Vec<Option<Value>>,
}

impl State {
    fn var(&mut self, node: usize, attr: &str) -> usize {
        if let Some(v) = self.vars.get(&(node, attr.to_string())) {
            return *v;
        }
        let v = self.parent.len();
        self.parent.push(v);
        self.konst.push(None);
        self.vars.insert((node, attr.to_string()), v);
        v
    }

    fn root(&self, mut v: usize) -> usize {
        while self.parent[v] != v {
            v = self.parent[v];
        }
        v
    }

    fn pin(&mut self, v: usize, c: &Value) -> bool {
        let r = self.root(v);
        match &self.konst[r] {
            Some(k) => k == c,
            None => {
                self.konst[r] = Some(c.clone());
                true
            }
        }
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.root(a), self.root(b));
        if ra == rb {
            return true;
        }
        match (self.konst[ra].clone(), self.konst[rb].clone()) {
            (Some(x), Some(y)) if x != y => return false,
            (Some(x), None) => self.konst[rb] = Some(x),
            _ => {}
        }
        self.parent[ra] = rb;
        true
    }
}

struct Ctx<'a> {
    types: &'a TypeTriple,
    rules: &'a [TggRule],
    target: BTreeMap<(u8, Side, String), usize>,
    host: &'a TripleGraph,
    host_len: usize,
    explored: usize,
    limit: usize,
}

/// Decides whether `host` is derivable in `tgg` by brute force. `limit`
/// caps the number of visited states; `None` is returned when it is hit.
pub fn member_bruteforce(tgg: &Tgg, host: &TripleGraph, limit: usize) -> Option<Membership> {
    let mut target = BTreeMap::new();
    for e in host.elements() {
        let k = match e {
            Element::Node(n) => (0, n.side, n.ty.clone()),
            Element::Edge(e) => (1, e.side, e.ty.clone()),
            Element::Corr(c) => (2, Side::Corr, c.ty.clone()),
        };
        *target.entry(k).or_insert(0) += 1;
    }
    if !host.is_total() {
        return Some(Membership { member: false, witness: None, explored: 0 });
    }
    let mut cx = Ctx { types: &tgg.types, rules: &tgg.rules, target, host, host_len: host.len(), explored: 0, limit };
    let mut trail = Vec::new();
    let found = dfs(&mut cx, &State::default(), &mut trail)?;
    Some(Membership { member: found, witness: found.then_some(trail), explored: cx.explored })
}

fn dfs(cx: &mut Ctx<'_>, st: &State, trail: &mut Vec<String>) -> Option<bool> {
    cx.explored += 1;
    if cx.explored > cx.limit {
        return None;
    }
    if st.elems.len() == cx.host_len {
        return Some(isomorphic(cx, st));
    }
    for r in cx.rules {
        for ctx in context_matches(cx.types, r, st) {
            let Some(next) = apply(cx.types, r, st, &ctx) else { continue };
            if !within_counts(cx, &next) {
                continue;
            }
            trail.push(r.name.clone());
            if dfs(cx, &next, trail)? {
                return Some(true);
            }
            trail.pop();
        }
    }
    Some(false)
}

fn within_counts(cx: &Ctx<'_>, st: &State) -> bool {
    if st.elems.len() > cx.host_len {
        return false;
    }
    let mut counts: BTreeMap<(u8, Side, &str), usize> = BTreeMap::new();
    for e in &st.elems {
        *counts.entry(e.key()).or_insert(0) += 1;
    }
    counts.iter().all(|((k, s, t), n)| cx.target.get(&(*k, *s, t.to_string())).is_some_and(|m| n <= m))
}

fn fits(types: &TypeTriple, p: &PElem, a: &AKind, b: &[Option<usize>]) -> bool {
    match (&p.kind, a) {
        (PKind::Node { side, ty }, AKind::Node { side: s, ty: t }) => side == s && types.is_subtype(t, ty),
        (PKind::Edge { side, ty, from, to }, AKind::Edge { side: s, ty: t, from: f, to: o }) => {
            side == s && ty == t && b[*from] == Some(*f) && b[*to] == Some(*o)
        }
        (PKind::Corr { ty, src, trg }, AKind::Corr { ty: t, src: s, trg: g }) => ty == t && b[*src] == Some(*s) && b[*trg] == Some(*g),
        _ => false,
    }
}

/// All injective bindings of the listed pattern elements (in order; every
/// reference points to an earlier one or is pre-bound).
fn bind_all(types: &TypeTriple, elems: &[PElem], order: &[usize], st: &State, b: &mut Vec<Option<usize>>, out: &mut Vec<Vec<Option<usize>>>, first: bool) {
    if first && !out.is_empty() {
        return;
    }
    let Some((&i, rest)) = order.split_first() else {
        out.push(b.clone());
        return;
    };
    for (k, a) in st.elems.iter().enumerate() {
        if b.contains(&Some(k)) || !fits(types, &elems[i], a, b) {
            continue;
        }
        b[i] = Some(k);
        bind_all(types, elems, rest, st, b, out, first);
        b[i] = None;
    }
}

fn context_matches(types: &TypeTriple, r: &TggRule, st: &State) -> Vec<Vec<Option<usize>>> {
    let elems = &r.pattern.elems;
    let order: Vec<usize> = r.context().collect();
    let mut out = Vec::new();
    let mut b = vec![None; elems.len()];
    bind_all(types, elems, &order, st, &mut b, &mut out, false);
    let base = elems.len();
    out.retain(|m| {
        r.pattern.nacs.iter().all(|nac| {
            if nac.elems.iter().flat_map(PElem::refs).any(|x| x < base && r.create[x]) {
                return true;
            }
            let mut all = elems.clone();
            all.extend(nac.elems.iter().cloned());
            let mut nb = m.clone();
            nb.resize(all.len(), None);
            let order: Vec<usize> = (base..all.len()).collect();
            let mut found = Vec::new();
            bind_all(types, &all, &order, st, &mut nb, &mut found, true);
            found.is_empty()
        })
    });
    out
}

fn apply(types: &TypeTriple, r: &TggRule, st: &State, ctx: &[Option<usize>]) -> Option<State> {
    let mut s = st.clone();
    let mut b = ctx.to_vec();
    for i in r.created() {
        let k = s.elems.len();
        let kind = match &r.pattern.elems[i].kind {
            PKind::Node { side, ty } => AKind::Node { side: *side, ty: ty.clone() },
            PKind::Edge { side, ty, from, to } => AKind::Edge { side: *side, ty: ty.clone(), from: b[*from]?, to: b[*to]? },
            PKind::Corr { ty, src, trg } => AKind::Corr { ty: ty.clone(), src: b[*src]?, trg: b[*trg]? },
        };
        if let AKind::Node { ty, .. } = &kind {
            for a in types.attrs_of(ty).keys() {
                s.var(k, a);
            }
        }
        s.elems.push(kind);
        b[i] = Some(k);
    }
    for c in &r.pattern.conds {
        let side = |o: &Operand, s: &mut State| match o {
            Operand::Slot { elem, attr } => Ok(s.var(b[*elem].expect("bound"), attr)),
            Operand::Const(v) => Err(v.clone()),
        };
        let ok = match (side(&c.lhs, &mut s), side(&c.rhs, &mut s)) {
            (Ok(x), Ok(y)) => s.union(x, y),
            (Ok(x), Err(v)) | (Err(v), Ok(x)) => s.pin(x, &v),
            (Err(v), Err(w)) => v == w,
        };
        if !ok {
            return None;
        }
    }
    Some(s)
}

fn isomorphic(cx: &Ctx<'_>, st: &State) -> bool {
    let mut counts: BTreeMap<(u8, Side, String), usize> = BTreeMap::new();
    for e in &st.elems {
        let (k, s, t) = e.key();
        *counts.entry((k, s, t.to_string())).or_insert(0) += 1;
    }
    if counts != cx.target {
        return false;
    }
    let host: Vec<&Element> = cx.host.elements().collect();
    let hindex: BTreeMap<&str, usize> = host.iter().enumerate().map(|(i, e)| (e.id().as_str(), i)).collect();
    let mut map = vec![None; st.elems.len()];
    let mut used = vec![false; host.len()];
    iso(cx, st, &host, &hindex, 0, &mut map, &mut used)
}

fn iso(
    cx: &Ctx<'_>,
    st: &State,
    host: &[&Element],
    hindex: &BTreeMap<&str, usize>,
    i: usize,
    map: &mut Vec<Option<usize>>,
    used: &mut Vec<bool>,
) -> bool {
    if i == st.elems.len() {
        return attrs_consistent(st, host, map);
    }
    // elements are created after what they reference, so references are mapped
    for (h, he) in host.iter().enumerate() {
        if used[h] {
            continue;
        }
        let ok = match (&st.elems[i], he) {
            (AKind::Node { side, ty }, Element::Node(n)) => n.side == *side && n.ty == *ty,
            (AKind::Edge { side, ty, from, to }, Element::Edge(e)) => {
                e.side == *side && e.ty == *ty && map[*from] == hindex.get(e.from.as_str()).copied() && map[*to] == hindex.get(e.to.as_str()).copied()
            }
            (AKind::Corr { ty, src, trg }, Element::Corr(c)) => {
                let look = |r: &Option<crate::graph::ElemId>| r.as_ref().and_then(|id| hindex.get(id.as_str()).copied());
                c.ty == *ty && map[*src] == look(&c.src) && map[*trg] == look(&c.trg)
            }
            _ => false,
        };
        if !ok {
            continue;
        }
        map[i] = Some(h);
        used[h] = true;
        if iso(cx, st, host, hindex, i + 1, map, used) {
            return true;
        }
        map[i] = None;
        used[h] = false;
    }
    false
}

fn attrs_consistent(st: &State, host: &[&Element], map: &[Option<usize>]) -> bool {
    let mut class: BTreeMap<usize, Option<&Value>> = BTreeMap::new();
    for ((node, attr), v) in &st.vars {
        let Element::Node(n) = host[map[*node].expect("complete")] else { return false };
        let val = n.attrs.get(attr);
        let r = st.root(*v);
        if let Some(k) = &st.konst[r] {
            if val != Some(k) {
                return false;
            }
        }
        match class.get(&r) {
            Some(prev) if *prev != val => return false,
            _ => {
                class.insert(r, val);
            }
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::super::{derive_random, parse_grammar};
    use super::*;

    const G: &str = r#"
types { src A { n: string } trg X { n: string } src edge e: A -> A corr AX: A <-> X }
rule R { ++src a: A; ++trg x: X; ++corr ax: AX(a, x); eq a.n == x.n }
rule S { src a: A; trg x: X; corr ax: AX(a, x); ++src b: A; ++src ab: a -e-> b; ++trg y: X; ++corr by: AX(b, y); eq b.n == y.n }
"#;

    #[test]
    fn derived_graphs_are_members() {
        let g = parse_grammar(G).unwrap();
        for seed in 0..5 {
            let d = derive_random(&g, 3, seed).unwrap();
            let m = member_bruteforce(&g, &d.graph, 100_000).unwrap();
            assert!(m.member, "seed {seed}");
            assert_eq!(m.witness.unwrap().len(), d.steps.len());
        }
    }

    #[test]
    fn attribute_mismatch_is_not_member() {
        let g = parse_grammar(G).unwrap();
        let mut d = derive_random(&g, 1, 0).unwrap();
        let x = d.graph.side_ids(Side::Target).next().unwrap().clone();
        d.graph.set_attr(&x, "n", Value::from("other")).unwrap();
        assert!(!member_bruteforce(&g, &d.graph, 100_000).unwrap().member);
    }

    #[test]
    fn empty_graph_is_member() {
        let g = parse_grammar(G).unwrap();
        assert!(member_bruteforce(&g, &TripleGraph::new(), 10).unwrap().member);
    }
}
