//! Per-side edit scripts and their application with undo information.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Edge, ElemId, Element, Node, Side, TripleGraph, Value};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "camelCase")]
pub enum Op {
    AddNode {
        id: ElemId,
        #[serde(rename = "type")]
        ty: String,
        #[serde(default)]
        attrs: BTreeMap<String, Value>,
    },
    AddEdge {
        id: ElemId,
        #[serde(rename = "type")]
        ty: String,
        from: ElemId,
        to: ElemId,
    },
    DeleteNode {
        id: ElemId,
    },
    DeleteEdge {
        id: ElemId,
    },
    SetAttr {
        node: ElemId,
        attr: String,
        old: Option<Value>,
        new: Value,
    },
}

impl Op {
    /// The element the operation acts on.
    pub fn target(&self) -> &ElemId {
        match self {
            Op::AddNode { id, .. } | Op::AddEdge { id, .. } | Op::DeleteNode { id } | Op::DeleteEdge { id } => id,
            Op::SetAttr { node, .. } => node,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Delta {
    pub side: Side,
    pub ops: Vec<Op>,
}

impl Delta {
    pub fn empty(side: Side) -> Self {
        Delta { side, ops: Vec::new() }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let d: Delta = serde_json::from_str(text)?;
        if d.side == Side::Corr {
            return Err(Error::Format("deltas edit the source or target side".into()));
        }
        Ok(d)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable")
    }
}

/// An applied operation with what is needed to invert it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Applied {
    pub side: Side,
    pub op: Op,
    /// the removed element for deletions
    pub removed: Option<Element>,
}

/// Everything the deltas changed, in application order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ChangeLog {
    pub applied: Vec<Applied>,
    /// present elements that did not exist before
    pub added: BTreeSet<ElemId>,
    /// original elements no longer present
    pub deleted: BTreeMap<ElemId, Element>,
    /// original value of every changed attribute slot
    pub attr_old: BTreeMap<(ElemId, String), Option<Value>>,
    /// positions in `applied` undone since
    pub reverted: BTreeSet<usize>,
    /// positions of operations on each element or edge endpoint
    touching: BTreeMap<ElemId, Vec<usize>>,
}

impl ChangeLog {
    pub fn is_added(&self, id: &str) -> bool {
        self.added.contains(id)
    }

    pub fn is_deleted(&self, id: &str) -> bool {
        self.deleted.contains_key(id)
    }

    /// Whether the slot's current value differs from the original one.
    pub fn attr_changed(&self, host: &TripleGraph, node: &ElemId, attr: &str) -> bool {
        self.attr_old.get(&(node.clone(), attr.to_string())).is_some_and(|old| host.attr(node, attr) != old.as_ref())
    }

    /// Attribute slots changed on a node.
    pub fn changed_attrs<'a>(&'a self, host: &'a TripleGraph, node: &'a ElemId) -> impl Iterator<Item = &'a str> + 'a {
        self.attr_old
            .range((node.clone(), String::new())..)
            .take_while(move |((n, _), _)| n == node)
            .filter(move |((n, a), _)| self.attr_changed(host, n, a))
            .map(|((_, a), _)| a.as_str())
    }

    /// Elements touched by any applied operation.
    pub fn touched(&self) -> BTreeSet<ElemId> {
        self.applied.iter().enumerate().filter(|(k, _)| !self.reverted.contains(k)).map(|(_, a)| a.op.target().clone()).collect()
    }

    pub fn is_live(&self, k: usize) -> bool {
        k < self.applied.len() && !self.reverted.contains(&k)
    }

    /// Live operations targeting `id` or having it as an edge endpoint.
    pub fn touching(&self, id: &str) -> impl Iterator<Item = usize> + '_ {
        self.touching.get(id).into_iter().flatten().copied().filter(|k| !self.reverted.contains(k))
    }

    /// Forgets operation `k` after it was undone on the host. Operations
    /// depending on it must be forgotten first.
    pub fn revert(&mut self, k: usize) {
        if !self.reverted.insert(k) {
            return;
        }
        let a = self.applied[k].clone();
        let id = a.op.target().clone();
        let earlier: Vec<usize> = self.touching(&id).filter(|j| *j < k).collect();
        match &a.op {
            Op::AddNode { .. } | Op::AddEdge { .. } => {
                if !self.added.remove(&id) {
                    // a re-addition: the original is deleted again
                    let del = earlier.iter().rev().find_map(|j| self.applied[*j].removed.clone());
                    if let Some(e) = del {
                        self.deleted.insert(id, e);
                    }
                }
            }
            Op::DeleteNode { .. } | Op::DeleteEdge { .. } => {
                let was_added = earlier.iter().any(|j| matches!(self.applied[*j].op, Op::AddNode { .. } | Op::AddEdge { .. }));
                if self.deleted.remove(&id).is_none() && was_added {
                    self.added.insert(id);
                }
            }
            Op::SetAttr { node, attr, .. } => {
                let other = self.touching(node).any(|j| matches!(&self.applied[j].op, Op::SetAttr { node: n, attr: x, .. } if n == node && x == attr));
                if !other {
                    self.attr_old.remove(&(node.clone(), attr.clone()));
                }
            }
        }
    }

    fn record(&mut self, a: Applied) {
        match &a.op {
            Op::AddNode { id, .. } | Op::AddEdge { id, .. } => {
                if self.deleted.remove(id).is_none() {
                    self.added.insert(id.clone());
                }
            }
            Op::DeleteNode { id } | Op::DeleteEdge { id } => {
                if !self.added.remove(id) {
                    self.deleted.insert(id.clone(), a.removed.clone().expect("removed element"));
                }
            }
            Op::SetAttr { node, attr, old, .. } => {
                self.attr_old.entry((node.clone(), attr.clone())).or_insert_with(|| old.clone());
            }
        }
        let k = self.applied.len();
        let mut keys = vec![a.op.target().clone()];
        match (&a.op, &a.removed) {
            (Op::AddEdge { from, to, .. }, _) => keys.extend([from.clone(), to.clone()]),
            (Op::DeleteEdge { .. }, Some(Element::Edge(e))) => keys.extend([e.from.clone(), e.to.clone()]),
            _ => {}
        }
        keys.dedup();
        for id in keys {
            self.touching.entry(id).or_default().push(k);
        }
        self.applied.push(a);
    }
}

fn stale(msg: String) -> Error {
    Error::StaleDelta(msg)
}

/// Applies one operation, returning the undo record.
pub fn apply_op(host: &mut TripleGraph, side: Side, op: &Op) -> Result<Applied> {
    let check_side = |id: &ElemId, host: &TripleGraph| -> Result<()> {
        match host.get(id) {
            Some(e) if e.side() == side => Ok(()),
            Some(_) => Err(stale(format!("`{id}` is not on the {side} side"))),
            None => Err(stale(format!("`{id}` does not exist"))),
        }
    };
    let removed = match op {
        Op::AddNode { id, ty, attrs } => {
            if host.contains(id) {
                return Err(stale(format!("`{id}` already exists")));
            }
            host.add_node(Node { id: id.clone(), side, ty: ty.clone(), attrs: attrs.clone() })?;
            None
        }
        Op::AddEdge { id, ty, from, to } => {
            if host.contains(id) {
                return Err(stale(format!("`{id}` already exists")));
            }
            check_side(from, host)?;
            check_side(to, host)?;
            host.add_edge(Edge { id: id.clone(), side, ty: ty.clone(), from: from.clone(), to: to.clone() })?;
            None
        }
        Op::DeleteNode { id } => {
            check_side(id, host)?;
            if host.node(id).is_none() {
                return Err(stale(format!("`{id}` is not a node")));
            }
            if let Some(e) = host.incident_edges(id).first() {
                return Err(stale(format!("deleting `{id}` leaves edge `{e}` dangling")));
            }
            Some(host.remove(id)?)
        }
        Op::DeleteEdge { id } => {
            check_side(id, host)?;
            if host.edge(id).is_none() {
                return Err(stale(format!("`{id}` is not an edge")));
            }
            Some(host.remove(id)?)
        }
        Op::SetAttr { node, attr, old, new } => {
            check_side(node, host)?;
            if host.attr(node, attr) != old.as_ref() {
                return Err(stale(format!("`{node}.{attr}` is not {old:?}")));
            }
            host.set_attr(node, attr, new.clone())?;
            None
        }
    };
    Ok(Applied { side, op: op.clone(), removed })
}

/// Inverts an applied operation.
pub fn undo_op(host: &mut TripleGraph, a: &Applied) -> Result<()> {
    match &a.op {
        Op::AddNode { id, .. } | Op::AddEdge { id, .. } => {
            host.remove(id)?;
        }
        Op::DeleteNode { .. } | Op::DeleteEdge { .. } => host.add(a.removed.clone().expect("removed element"))?,
        Op::SetAttr { node, attr, old, .. } => match old {
            Some(v) => {
                host.set_attr(node, attr, v.clone())?;
            }
            None => {
                // the slot did not exist before
                if let Some(Element::Node(n)) = host.get(node).cloned() {
                    let mut n = n;
                    n.attrs.remove(attr);
                    let edges: Vec<Element> = host.incident_edges(node).iter().map(|e| host.get(e).unwrap().clone()).collect();
                    for e in &edges {
                        host.remove(e.id())?;
                    }
                    host.remove(node)?;
                    host.add_node(n)?;
                    for e in edges {
                        host.add(e)?;
                    }
                }
            }
        },
    }
    Ok(())
}

/// Applies both deltas in place. On error every applied operation is undone
/// and the host is left unchanged.
pub fn apply_delta(host: &mut TripleGraph, ds: &Delta, dt: &Delta) -> Result<ChangeLog> {
    let mut log = ChangeLog::default();
    for (d, want) in [(ds, Side::Source), (dt, Side::Target)] {
        if d.side != want {
            return Err(stale(format!("expected a {want} delta, got {}", d.side)));
        }
    }
    for d in [ds, dt] {
        for op in &d.ops {
            match apply_op(host, d.side, op) {
                Ok(a) => log.record(a),
                Err(e) => {
                    for a in log.applied.iter().rev() {
                        undo_op(host, a).expect("undo of applied op");
                    }
                    return Err(e);
                }
            }
        }
    }
    Ok(log)
}

/// Identity-based diff of one side: a normalized delta turning `old` into `new`.
pub fn diff(old: &TripleGraph, new: &TripleGraph, side: Side) -> Delta {
    let mut ops = Vec::new();
    let ids = |g: &TripleGraph| g.side_ids(side).cloned().collect::<BTreeSet<_>>();
    let (a, b) = (ids(old), ids(new));
    let changed_kind = |id: &ElemId| match (old.get(id), new.get(id)) {
        (Some(Element::Edge(x)), Some(Element::Edge(y))) => x != y,
        (Some(Element::Node(x)), Some(Element::Node(y))) => x.ty != y.ty,
        _ => true,
    };
    let removed: Vec<&ElemId> = a.iter().filter(|id| !b.contains(*id) || changed_kind(id)).collect();
    let added: Vec<&ElemId> = b.iter().filter(|id| !a.contains(*id) || changed_kind(id)).collect();
    for id in removed.iter().filter(|id| old.edge(id).is_some()) {
        ops.push(Op::DeleteEdge { id: (*id).clone() });
    }
    for id in removed.iter().filter(|id| old.node(id).is_some()) {
        ops.push(Op::DeleteNode { id: (*id).clone() });
    }
    for id in &added {
        if let Some(n) = new.node(id) {
            ops.push(Op::AddNode { id: n.id.clone(), ty: n.ty.clone(), attrs: n.attrs.clone() });
        }
    }
    for id in &added {
        if let Some(e) = new.edge(id) {
            ops.push(Op::AddEdge { id: e.id.clone(), ty: e.ty.clone(), from: e.from.clone(), to: e.to.clone() });
        }
    }
    for id in a.intersection(&b) {
        if let (Some(x), Some(y)) = (old.node(id), new.node(id)) {
            if x.ty != y.ty {
                continue;
            }
            for (k, v) in &y.attrs {
                if x.attrs.get(k) != Some(v) {
                    ops.push(Op::SetAttr { node: id.clone(), attr: k.clone(), old: x.attrs.get(k).cloned(), new: v.clone() });
                }
            }
        }
    }
    Delta { side, ops }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn running_deltas_apply() {
        let mut m = fixtures::model();
        let (ds, dt) = (Delta::from_json(fixtures::DELTA_SRC).unwrap(), Delta::from_json(fixtures::DELTA_TRG).unwrap());
        let log = apply_delta(&mut m, &ds, &dt).unwrap();
        assert!(!m.contains("M6") && !m.contains("P9"));
        assert!(m.contains("M6-E6"), "corr is kept, dangling");
        assert!(!m.is_total());
        assert!(log.is_added("C3") && log.is_deleted("M6"));
        assert!(log.attr_changed(&m, &"M8".into(), "name"));
        assert_eq!(log.changed_attrs(&m, &"E8".into()).collect::<Vec<_>>(), ["name"]);
    }

    #[test]
    fn empty_deltas_change_nothing() {
        let mut m = fixtures::model();
        let log = apply_delta(&mut m, &Delta::empty(Side::Source), &Delta::empty(Side::Target)).unwrap();
        assert_eq!(m, fixtures::model());
        assert!(log.applied.is_empty());
    }

    #[test]
    fn unnormalized_delete_is_stale_and_atomic() {
        let mut m = fixtures::model();
        let ds = Delta {
            side: Side::Source,
            ops: vec![Op::SetAttr { node: "C1".into(), attr: "name".into(), old: Some("c1".into()), new: "x".into() }, Op::DeleteNode { id: "M6".into() }],
        };
        let err = apply_delta(&mut m, &ds, &Delta::empty(Side::Target)).unwrap_err();
        assert_eq!(err.kind(), "STALE-DELTA");
        assert_eq!(m, fixtures::model());
    }

    #[test]
    fn wrong_old_value_is_stale() {
        let mut m = fixtures::model();
        let ds = Delta { side: Side::Source, ops: vec![Op::SetAttr { node: "C1".into(), attr: "name".into(), old: Some("zz".into()), new: "x".into() }] };
        assert_eq!(apply_delta(&mut m, &ds, &Delta::empty(Side::Target)).unwrap_err().kind(), "STALE-DELTA");
    }

    #[test]
    fn diff_reproduces_edit() {
        let old = fixtures::model();
        let mut new = old.clone();
        let (ds, dt) = (Delta::from_json(fixtures::DELTA_SRC).unwrap(), Delta::from_json(fixtures::DELTA_TRG).unwrap());
        apply_delta(&mut new, &ds, &dt).unwrap();
        let (d1, d2) = (diff(&old, &new, Side::Source), diff(&old, &new, Side::Target));
        let mut again = old.clone();
        apply_delta(&mut again, &d1, &d2).unwrap();
        assert_eq!(again, new);
    }
}
