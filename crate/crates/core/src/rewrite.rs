//! Applying a rule at a match: deletion, creation and attribute solving.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::graph::{AttrKind, Corr, Edge, ElemId, Element, Node, TripleGraph, TypeTriple, Value};
use crate::pattern::{Operand, PKind, Pattern};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Role {
    Preserve,
    Create,
    Delete,
}

/// How values for created attributes not fixed by a condition are chosen.
pub trait ValueSource {
    fn fresh(&mut self, kind: AttrKind) -> Value;
}

/// Unconstrained attributes get the kind's default value.
pub struct Defaults;

impl ValueSource for Defaults {
    fn fresh(&mut self, kind: AttrKind) -> Value {
        kind.default_value()
    }
}

/// Applies `pat` with per-element `roles`. `lhs` binds every non-created
/// element. Returns the complete binding (deleted elements included).
///
/// `ids` chooses the id of each created element.
pub fn apply(
    host: &mut TripleGraph,
    types: &TypeTriple,
    pat: &Pattern,
    roles: &[Role],
    lhs: &[Option<ElemId>],
    ids: &mut dyn FnMut(&mut TripleGraph, usize) -> ElemId,
    values: &mut dyn ValueSource,
) -> Result<Vec<ElemId>> {
    let n = pat.elems.len();
    let attrs = solve_attrs(host, types, pat, roles, lhs, values)?;
    // deletion: edges and corrs before nodes, dangling check against the rest
    let mut deleted: Vec<usize> = (0..n).filter(|i| roles[*i] == Role::Delete).collect();
    deleted.sort_by_key(|i| pat.elems[*i].is_node());
    let gone: Vec<&ElemId> = deleted.iter().map(|i| lhs[*i].as_ref().expect("deleted element bound")).collect();
    for i in &deleted {
        let id = lhs[*i].as_ref().unwrap();
        if pat.elems[*i].is_node() {
            if let Some(e) = host.incident_edges(id).into_iter().find(|e| !gone.contains(&e)) {
                return Err(Error::DanglingEdge { node: id.clone(), edge: e });
            }
        }
    }
    for i in &deleted {
        host.remove(lhs[*i].as_ref().unwrap())?;
    }
    let mut b: Vec<Option<ElemId>> = lhs.to_vec();
    b.resize(n, None);
    let mut order: Vec<usize> = (0..n).filter(|i| roles[*i] == Role::Create).collect();
    order.sort_by_key(|i| match pat.elems[*i].kind {
        PKind::Node { .. } => 0,
        PKind::Edge { .. } => 1,
        PKind::Corr { .. } => 2,
    });
    for i in order {
        let id = ids(host, i);
        let e = &pat.elems[i];
        let el = match &e.kind {
            PKind::Node { side, ty } => Node {
                id: id.clone(),
                side: *side,
                ty: ty.clone(),
                attrs: attrs.get(&i).cloned().unwrap_or_default(),
            }
            .into(),
            PKind::Edge { side, ty, from, to } => Edge {
                id: id.clone(),
                side: *side,
                ty: ty.clone(),
                from: b[*from].clone().expect("endpoint bound"),
                to: b[*to].clone().expect("endpoint bound"),
            }
            .into(),
            PKind::Corr { ty, src, trg } => {
                Corr { id: id.clone(), ty: ty.clone(), src: b[*src].clone(), trg: b[*trg].clone() }.into()
            }
        };
        host.add(el)?;
        b[i] = Some(id);
    }
    // conditions may also bind attributes of preserved nodes left unset
    for (i, vals) in &attrs {
        if roles[*i] == Role::Preserve {
            let id = b[*i].as_ref().unwrap();
            for (a, v) in vals {
                if host.attr(id, a).is_none() {
                    host.set_attr(id, a, v.clone())?;
                }
            }
        }
    }
    Ok(b.into_iter().map(|x| x.expect("complete binding")).collect())
}

impl From<Node> for Element {
    fn from(n: Node) -> Self {
        Element::Node(n)
    }
}

impl From<Edge> for Element {
    fn from(e: Edge) -> Self {
        Element::Edge(e)
    }
}

impl From<Corr> for Element {
    fn from(c: Corr) -> Self {
        Element::Corr(c)
    }
}

type Slot = (usize, String);

/// Attribute values for created nodes (and unset preserved slots) so that all
/// conditions hold. Slots are grouped by equality; each group takes the
/// unique known value or a fresh one.
fn solve_attrs(
    host: &TripleGraph,
    types: &TypeTriple,
    pat: &Pattern,
    roles: &[Role],
    lhs: &[Option<ElemId>],
    values: &mut dyn ValueSource,
) -> Result<BTreeMap<usize, BTreeMap<String, Value>>> {
    let mut slots: Vec<Slot> = Vec::new();
    let mut index = BTreeMap::new();
    let mut slot = |s: Slot, slots: &mut Vec<Slot>| -> usize {
        *index.entry(s.clone()).or_insert_with(|| {
            slots.push(s);
            slots.len() - 1
        })
    };
    // all attributes of created nodes take part, so unconstrained ones are filled too
    for (i, e) in pat.elems.iter().enumerate() {
        if let (Role::Create, PKind::Node { ty, .. }) = (roles[i], &e.kind) {
            for a in types.attrs_of(ty).keys() {
                slot((i, a.clone()), &mut slots);
            }
        }
    }
    let mut pairs = Vec::new();
    let mut consts = Vec::new();
    for c in &pat.conds {
        match (&c.lhs, &c.rhs) {
            (Operand::Slot { elem: a, attr: x }, Operand::Slot { elem: b, attr: y }) => {
                let (p, q) = (slot((*a, x.clone()), &mut slots), slot((*b, y.clone()), &mut slots));
                pairs.push((p, q));
            }
            (Operand::Slot { elem, attr }, Operand::Const(v)) | (Operand::Const(v), Operand::Slot { elem, attr }) => {
                consts.push((slot((*elem, attr.clone()), &mut slots), v.clone()));
            }
            _ => {}
        }
    }
    let mut uf: Vec<usize> = (0..slots.len()).collect();
    fn find(uf: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while uf[r] != r {
            r = uf[r];
        }
        uf[x] = r;
        r
    }
    for (p, q) in pairs {
        let (a, b) = (find(&mut uf, p), find(&mut uf, q));
        uf[a] = b;
    }
    let mut known: BTreeMap<usize, Value> = BTreeMap::new();
    let mut fix = |uf: &mut [usize], s: usize, v: Value| -> Result<()> {
        let r = find(uf, s);
        match known.get(&r) {
            Some(w) if *w != v => Err(Error::AttrUnsolvable(format!("`{}.{}` needs both {w} and {v}", pat.elems[slots[s].0].name, slots[s].1))),
            _ => {
                known.insert(r, v);
                Ok(())
            }
        }
    };
    for (s, v) in consts {
        fix(&mut uf, s, v)?;
    }
    for s in 0..slots.len() {
        let (i, a) = &slots[s];
        if roles[*i] == Role::Create {
            continue;
        }
        let id = lhs[*i].as_ref().expect("context bound");
        if let Some(v) = host.attr(id, a) {
            fix(&mut uf, s, v.clone())?;
        }
    }
    let mut out: BTreeMap<usize, BTreeMap<String, Value>> = BTreeMap::new();
    for s in 0..slots.len() {
        let (i, a) = slots[s].clone();
        let preserved_set = roles[i] != Role::Create && host.attr(lhs[i].as_ref().unwrap(), &a).is_some();
        if preserved_set {
            continue;
        }
        let r = find(&mut uf, s);
        let v = match known.get(&r) {
            Some(v) => v.clone(),
            None => {
                let PKind::Node { ty, .. } = &pat.elems[i].kind else {
                    return Err(Error::AttrUnsolvable(format!("`{}` is not a node", pat.elems[i].name)));
                };
                let kind = types.attrs_of(ty).get(&a).copied().unwrap_or(AttrKind::String);
                let v = values.fresh(kind);
                known.insert(r, v.clone());
                v
            }
        };
        out.entry(i).or_default().insert(a, v);
    }
    Ok(out)
}
