//! Graph patterns and injective typed matching with NACs and attribute
//! equations.

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::graph::{ElemId, Element, Side, TripleGraph, TypeTriple, Value};

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum PKind {
    Node { side: Side, ty: String },
    Edge { side: Side, ty: String, from: usize, to: usize },
    Corr { ty: String, src: usize, trg: usize },
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PElem {
    pub name: String,
    pub kind: PKind,
}

impl PElem {
    pub fn side(&self) -> Side {
        match &self.kind {
            PKind::Node { side, .. } | PKind::Edge { side, .. } => *side,
            PKind::Corr { .. } => Side::Corr,
        }
    }

    pub fn ty(&self) -> &str {
        match &self.kind {
            PKind::Node { ty, .. } | PKind::Edge { ty, .. } | PKind::Corr { ty, .. } => ty,
        }
    }

    pub fn is_node(&self) -> bool {
        matches!(self.kind, PKind::Node { .. })
    }

    /// Indices of pattern elements this element references.
    pub fn refs(&self) -> Vec<usize> {
        match &self.kind {
            PKind::Node { .. } => vec![],
            PKind::Edge { from, to, .. } => vec![*from, *to],
            PKind::Corr { src, trg, .. } => vec![*src, *trg],
        }
    }

    fn remap(&self, f: impl Fn(usize) -> usize) -> PElem {
        let kind = match &self.kind {
            PKind::Node { .. } => self.kind.clone(),
            PKind::Edge { side, ty, from, to } => PKind::Edge { side: *side, ty: ty.clone(), from: f(*from), to: f(*to) },
            PKind::Corr { ty, src, trg } => PKind::Corr { ty: ty.clone(), src: f(*src), trg: f(*trg) },
        };
        PElem { name: self.name.clone(), kind }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Operand {
    Slot { elem: usize, attr: String },
    Const(Value),
}

impl Operand {
    pub fn elem(&self) -> Option<usize> {
        match self {
            Operand::Slot { elem, .. } => Some(*elem),
            Operand::Const(_) => None,
        }
    }

    fn value<'h>(&'h self, host: &'h TripleGraph, b: &[Option<ElemId>]) -> Option<&'h Value> {
        match self {
            Operand::Slot { elem, attr } => b[*elem].as_ref().and_then(|id| host.attr(id, attr)),
            Operand::Const(v) => Some(v),
        }
    }
}

/// Equality between two attribute slots or a slot and a constant.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct AttrCond {
    pub lhs: Operand,
    pub rhs: Operand,
}

impl AttrCond {
    pub fn elems(&self) -> impl Iterator<Item = usize> + '_ {
        self.lhs.elem().into_iter().chain(self.rhs.elem())
    }

    pub fn holds(&self, host: &TripleGraph, b: &[Option<ElemId>]) -> bool {
        self.lhs.value(host, b) == self.rhs.value(host, b)
    }
}

/// A negative application condition: extra elements whose presence forbids
/// the match. Element references `< base_len` point into the host pattern,
/// the rest into `elems` (offset by the base length).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Nac {
    pub side: Side,
    pub elems: Vec<PElem>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Pattern {
    pub elems: Vec<PElem>,
    pub conds: Vec<AttrCond>,
    pub nacs: Vec<Nac>,
}

impl Pattern {
    pub fn len(&self) -> usize {
        self.elems.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elems.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.elems.iter().position(|e| e.name == name)
    }

    /// Sub-pattern induced by `keep` (which must be closed under references).
    /// Returns the pattern and the old-index -> new-index map.
    pub fn restrict(&self, keep: &[bool]) -> (Pattern, Vec<Option<usize>>) {
        let mut map = vec![None; self.elems.len()];
        let mut n = 0;
        for (i, k) in keep.iter().enumerate() {
            if *k {
                map[i] = Some(n);
                n += 1;
            }
        }
        let elems = self
            .elems
            .iter()
            .enumerate()
            .filter(|(i, _)| keep[*i])
            .map(|(_, e)| e.remap(|j| map[j].expect("restriction must be reference-closed")))
            .collect();
        let conds = self
            .conds
            .iter()
            .filter(|c| c.elems().all(|e| keep[e]))
            .map(|c| AttrCond { lhs: remap_operand(&c.lhs, &map), rhs: remap_operand(&c.rhs, &map) })
            .collect();
        let base = self.elems.len();
        let nacs = self
            .nacs
            .iter()
            .filter(|nac| nac.elems.iter().flat_map(PElem::refs).all(|r| r >= base || keep[r]))
            .map(|nac| Nac {
                side: nac.side,
                elems: nac.elems.iter().map(|e| e.remap(|j| if j < base { map[j].unwrap() } else { j - base + n })).collect(),
            })
            .collect();
        (Pattern { elems, conds, nacs }, map)
    }
}

fn remap_operand(o: &Operand, map: &[Option<usize>]) -> Operand {
    match o {
        Operand::Slot { elem, attr } => Operand::Slot { elem: map[*elem].unwrap(), attr: attr.clone() },
        Operand::Const(v) => Operand::Const(v.clone()),
    }
}

/// An injective, type- and incidence-preserving binding of a pattern.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PatternMatch {
    pub bindings: Vec<ElemId>,
}

impl PatternMatch {
    pub fn get(&self, idx: usize) -> &ElemId {
        &self.bindings[idx]
    }

    fn canonical_key(&self) -> Vec<&ElemId> {
        let mut k: Vec<&ElemId> = self.bindings.iter().collect();
        k.sort();
        k
    }
}

/// Canonical match order: lexicographic on sorted bound ids, then on the
/// binding vector.
pub fn canonical_cmp(a: &PatternMatch, b: &PatternMatch) -> Ordering {
    a.canonical_key().cmp(&b.canonical_key()).then_with(|| a.bindings.cmp(&b.bindings))
}

pub type ElemFilter<'a> = &'a dyn Fn(usize, &ElemId) -> bool;

/// Configurable matcher over one host.
pub struct Matcher<'a> {
    host: &'a TripleGraph,
    types: &'a TypeTriple,
    filter: Option<ElemFilter<'a>>,
    conds: bool,
    nacs: bool,
}

impl<'a> Matcher<'a> {
    pub fn new(host: &'a TripleGraph, types: &'a TypeTriple) -> Self {
        Matcher { host, types, filter: None, conds: true, nacs: true }
    }

    /// Extra per-element admissibility check (pattern index, host id).
    pub fn filter(mut self, f: ElemFilter<'a>) -> Self {
        self.filter = Some(f);
        self
    }

    pub fn ignore_conds(mut self) -> Self {
        self.conds = false;
        self
    }

    pub fn ignore_nacs(mut self) -> Self {
        self.nacs = false;
        self
    }

    /// All matches extending `seed`, in canonical order.
    pub fn find_all(&self, pat: &Pattern, seed: &[Option<ElemId>]) -> Result<Vec<PatternMatch>> {
        let mut out = Vec::new();
        self.run(pat, seed, &mut |m| {
            out.push(m);
            true
        })?;
        out.sort_by(canonical_cmp);
        Ok(out)
    }

    /// First match in search order (deterministic, not canonical).
    pub fn find_first(&self, pat: &Pattern, seed: &[Option<ElemId>]) -> Result<Option<PatternMatch>> {
        let mut out = None;
        self.run(pat, seed, &mut |m| {
            out = Some(m);
            false
        })?;
        Ok(out)
    }

    pub fn exists(&self, pat: &Pattern, seed: &[Option<ElemId>]) -> Result<bool> {
        Ok(self.find_first(pat, seed)?.is_some())
    }

    /// Whether some NAC of `pat` has an extension of the complete `binding`.
    pub fn nac_violated(&self, pat: &Pattern, binding: &[ElemId]) -> bool {
        self.violating_nac(pat, binding).is_some()
    }

    /// Index of the first NAC with an extension of `binding`.
    pub fn violating_nac(&self, pat: &Pattern, binding: &[ElemId]) -> Option<usize> {
        let b: Vec<Option<ElemId>> = binding.iter().cloned().map(Some).collect();
        pat.nacs.iter().position(|nac| self.nac_extends(pat, nac, &b))
    }

    fn nac_extends(&self, pat: &Pattern, nac: &Nac, b: &[Option<ElemId>]) -> bool {
        let mut elems = pat.elems.clone();
        elems.extend(nac.elems.iter().cloned());
        let mut binding = b.to_vec();
        binding.resize(elems.len(), None);
        let s = Search { m: self, elems: &elems, conds: &[], filter_limit: 0 };
        let mut found = false;
        s.go(&mut binding, &mut |_| {
            found = true;
            false
        });
        found
    }

    fn run(&self, pat: &Pattern, seed: &[Option<ElemId>], sink: &mut dyn FnMut(PatternMatch) -> bool) -> Result<()> {
        let mut binding: Vec<Option<ElemId>> = seed.to_vec();
        binding.resize(pat.elems.len(), None);
        let s = Search { m: self, elems: &pat.elems, conds: if self.conds { &pat.conds } else { &[] }, filter_limit: pat.elems.len() };
        s.check_seed(&binding)?;
        let nacs = self.nacs && !pat.nacs.is_empty();
        s.go(&mut binding, &mut |b| {
            if nacs && pat.nacs.iter().any(|nac| self.nac_extends(pat, nac, b)) {
                return true;
            }
            sink(PatternMatch { bindings: b.iter().map(|x| x.clone().expect("complete")).collect() })
        });
        Ok(())
    }
}

struct Search<'s, 'a> {
    m: &'s Matcher<'a>,
    elems: &'s [PElem],
    conds: &'s [AttrCond],
    /// the element filter applies to indices below this bound only
    filter_limit: usize,
}

enum Step {
    Fixed(usize, ElemId),
    Edges(usize, Vec<ElemId>),
    Any(usize, Vec<ElemId>),
}

impl Search<'_, '_> {
    fn check_seed(&self, b: &[Option<ElemId>]) -> Result<()> {
        for (i, id) in b.iter().enumerate() {
            let Some(id) = id else { continue };
            if !self.compatible(i, id, b) {
                return Err(Error::IncompatibleSeed(format!("`{}` cannot bind `{id}`", self.elems[i].name)));
            }
            if b.iter().enumerate().any(|(j, o)| j != i && o.as_ref() == Some(id)) {
                return Err(Error::IncompatibleSeed(format!("`{id}` bound twice")));
            }
        }
        for c in self.conds {
            if c.elems().all(|e| b[e].is_some()) && !c.holds(self.m.host, b) {
                return Err(Error::IncompatibleSeed("seed violates an attribute condition".into()));
            }
        }
        Ok(())
    }

    /// Host element `id` may bind pattern element `i` given current bindings.
    fn compatible(&self, i: usize, id: &ElemId, b: &[Option<ElemId>]) -> bool {
        let host = self.m.host;
        let Some(el) = host.get(id) else { return false };
        let ok = match (&self.elems[i].kind, el) {
            (PKind::Node { side, ty }, Element::Node(n)) => n.side == *side && self.m.types.is_subtype(&n.ty, ty),
            (PKind::Edge { side, ty, from, to }, Element::Edge(e)) => {
                e.side == *side
                    && e.ty == *ty
                    && b[*from].as_ref().is_none_or(|f| *f == e.from)
                    && b[*to].as_ref().is_none_or(|t| *t == e.to)
            }
            (PKind::Corr { ty, src, trg }, Element::Corr(c)) => {
                c.ty == *ty
                    && !host.corr_dangles(c)
                    && b[*src].as_ref().is_none_or(|s| c.src.as_ref() == Some(s))
                    && b[*trg].as_ref().is_none_or(|t| c.trg.as_ref() == Some(t))
            }
            _ => false,
        };
        if !ok {
            return false;
        }
        // a node may already be bound by edges/corrs referencing it; make sure
        // every bound referencing element agrees
        if let PKind::Node { .. } = self.elems[i].kind {
            for (j, e) in self.elems.iter().enumerate() {
                let Some(bj) = &b[j] else { continue };
                match &e.kind {
                    PKind::Edge { from, to, .. } => {
                        let edge = host.edge(bj).expect("bound edge");
                        if (*from == i && edge.from != *id) || (*to == i && edge.to != *id) {
                            return false;
                        }
                    }
                    PKind::Corr { src, trg, .. } => {
                        let corr = host.corr(bj).expect("bound corr");
                        if (*src == i && corr.src.as_ref() != Some(id)) || (*trg == i && corr.trg.as_ref() != Some(id)) {
                            return false;
                        }
                    }
                    PKind::Node { .. } => {}
                }
            }
        }
        match self.m.filter {
            Some(f) if i < self.filter_limit => f(i, id),
            _ => true,
        }
    }

    fn next_step(&self, b: &[Option<ElemId>]) -> Option<Step> {
        let host = self.m.host;
        let mut edge_step: Option<Step> = None;
        let mut any_node: Option<usize> = None;
        for (i, e) in self.elems.iter().enumerate() {
            if b[i].is_some() {
                continue;
            }
            match &e.kind {
                PKind::Node { .. } => {
                    // endpoint of a bound edge or corr
                    for (j, o) in self.elems.iter().enumerate() {
                        let Some(bj) = &b[j] else { continue };
                        match &o.kind {
                            PKind::Edge { from, to, .. } if *from == i || *to == i => {
                                let edge = host.edge(bj).expect("bound edge");
                                let id = if *from == i { &edge.from } else { &edge.to };
                                return Some(Step::Fixed(i, id.clone()));
                            }
                            PKind::Corr { src, trg, .. } if *src == i || *trg == i => {
                                let corr = host.corr(bj).expect("bound corr");
                                let r = if *src == i { &corr.src } else { &corr.trg };
                                return match r {
                                    Some(id) => Some(Step::Fixed(i, id.clone())),
                                    None => Some(Step::Edges(i, vec![])),
                                };
                            }
                            _ => {}
                        }
                    }
                    if any_node.is_none() {
                        any_node = Some(i);
                    }
                }
                PKind::Edge { from, to, .. } if edge_step.is_none() => {
                    if let Some(f) = &b[*from] {
                        edge_step = Some(Step::Edges(i, host.out_edges(f).cloned().collect()));
                    } else if let Some(t) = &b[*to] {
                        edge_step = Some(Step::Edges(i, host.in_edges(t).cloned().collect()));
                    }
                }
                PKind::Corr { src, trg, .. } if edge_step.is_none() => {
                    if let Some(s) = &b[*src] {
                        edge_step = Some(Step::Edges(i, host.corrs_of(s).cloned().collect()));
                    } else if let Some(t) = &b[*trg] {
                        edge_step = Some(Step::Edges(i, host.corrs_of(t).cloned().collect()));
                    }
                }
                _ => {}
            }
        }
        if edge_step.is_some() {
            return edge_step;
        }
        let i = any_node?;
        let PKind::Node { ty, .. } = &self.elems[i].kind else { unreachable!() };
        let mut cands: Vec<ElemId> = Vec::new();
        for sub in self.m.types.subtypes(ty) {
            cands.extend(host.nodes_of_exact_type(sub).cloned());
        }
        if self.m.types.subtypes(ty).len() > 1 {
            cands.sort();
        }
        Some(Step::Any(i, cands))
    }

    fn go(&self, b: &mut Vec<Option<ElemId>>, sink: &mut dyn FnMut(&[Option<ElemId>]) -> bool) -> bool {
        let Some(step) = self.next_step(b) else {
            return sink(b);
        };
        let (i, cands) = match step {
            Step::Fixed(i, id) => (i, vec![id]),
            Step::Edges(i, c) | Step::Any(i, c) => (i, c),
        };
        for id in cands {
            if b.iter().any(|x| x.as_ref() == Some(&id)) || !self.compatible(i, &id, b) {
                continue;
            }
            b[i] = Some(id);
            let conds_ok = self
                .conds
                .iter()
                .filter(|c| c.elems().any(|e| e == i) && c.elems().all(|e| b[e].is_some()))
                .all(|c| c.holds(self.m.host, b));
            if conds_ok && !self.go(b, sink) {
                b[i] = None;
                return false;
            }
            b[i] = None;
        }
        true
    }
}

/// Convenience: all canonical matches of `pat` in `host`.
pub fn find_matches(
    pat: &Pattern,
    host: &TripleGraph,
    types: &TypeTriple,
    seed: &[Option<ElemId>],
) -> Result<Vec<PatternMatch>> {
    Matcher::new(host, types).find_all(pat, seed)
}
