//! Typed, attributed triple graphs.
//!
//! A [`TripleGraph`] holds source and target nodes/edges plus correspondence
//! nodes that reference one source and one target node each. References may
//! dangle after deletions, which makes the graph *partial*.

use std::borrow::Borrow;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Stable, engine-wide element identifier.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ElemId(Arc<str>);

impl ElemId {
    pub fn new(s: impl AsRef<str>) -> Self {
        ElemId(Arc::from(s.as_ref()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// Trailing decimal digits of the id, used for readable node names.
    pub fn digits(&self) -> &str {
        let s = self.as_str();
        let start = s
            .char_indices()
            .rev()
            .take_while(|(_, c)| c.is_ascii_digit())
            .last()
            .map(|(i, _)| i)
            .unwrap_or(s.len());
        &s[start..]
    }
}

impl Borrow<str> for ElemId {
    fn borrow(&self) -> &str {
        &self.0
    }
}

impl std::ops::Deref for ElemId {
    type Target = str;

    fn deref(&self) -> &str {
        &self.0
    }
}

impl fmt::Debug for ElemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for ElemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for ElemId {
    fn from(s: &str) -> Self {
        ElemId::new(s)
    }
}

impl Serialize for ElemId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for ElemId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Ok(ElemId::new(s))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    #[serde(alias = "src")]
    Source,
    Corr,
    #[serde(alias = "trg")]
    Target,
}

impl Side {
    pub fn opposite(self) -> Side {
        match self {
            Side::Source => Side::Target,
            Side::Target => Side::Source,
            Side::Corr => Side::Corr,
        }
    }

    pub fn keyword(self) -> &'static str {
        match self {
            Side::Source => "src",
            Side::Target => "trg",
            Side::Corr => "corr",
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.keyword())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttrKind {
    String,
    Integer,
}

impl AttrKind {
    pub fn default_value(self) -> Value {
        match self {
            AttrKind::String => Value::Str(String::new()),
            AttrKind::Integer => Value::Int(0),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Int(i64),
    Str(String),
}

impl Value {
    pub fn kind(&self) -> AttrKind {
        match self {
            Value::Int(_) => AttrKind::Integer,
            Value::Str(_) => AttrKind::String,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(i) => write!(f, "{i}"),
            Value::Str(s) => write!(f, "{s:?}"),
        }
    }
}

impl From<&str> for Value {
    fn from(s: &str) -> Self {
        Value::Str(s.to_string())
    }
}

impl From<i64> for Value {
    fn from(i: i64) -> Self {
        Value::Int(i)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NodeType {
    pub name: String,
    pub side: Side,
    pub attrs: BTreeMap<String, AttrKind>,
    pub parents: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EdgeType {
    pub name: String,
    pub side: Side,
    pub from: String,
    pub to: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CorrType {
    pub name: String,
    pub src: String,
    pub trg: String,
}

/// The triple type graph: node, edge and correspondence types per side.
///
/// Node type names are unique across both sides; edge type names are unique
/// per side.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TypeTriple {
    node_types: BTreeMap<String, NodeType>,
    edge_types: BTreeMap<(Side, String), EdgeType>,
    corr_types: BTreeMap<String, CorrType>,
    /// type -> all supertypes including itself
    ancestors: BTreeMap<String, BTreeSet<String>>,
    /// type -> all subtypes including itself
    descendants: BTreeMap<String, Vec<String>>,
}

impl TypeTriple {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_node_type(&mut self, t: NodeType) -> Result<()> {
        if t.side == Side::Corr {
            return Err(type_err(&t.name, "node types live on src or trg"));
        }
        if self.node_types.contains_key(&t.name) || self.corr_types.contains_key(&t.name) {
            return Err(type_err(&t.name, "duplicate type name"));
        }
        self.node_types.insert(t.name.clone(), t);
        self.recompute();
        Ok(())
    }

    pub fn add_edge_type(&mut self, t: EdgeType) -> Result<()> {
        let key = (t.side, t.name.clone());
        if self.edge_types.contains_key(&key) {
            return Err(type_err(&t.name, "duplicate edge type"));
        }
        for end in [&t.from, &t.to] {
            match self.node_types.get(end) {
                Some(n) if n.side == t.side => {}
                _ => return Err(type_err(&t.name, &format!("unknown {} node type `{end}`", t.side))),
            }
        }
        self.edge_types.insert(key, t);
        Ok(())
    }

    pub fn add_corr_type(&mut self, t: CorrType) -> Result<()> {
        if self.corr_types.contains_key(&t.name) || self.node_types.contains_key(&t.name) {
            return Err(type_err(&t.name, "duplicate type name"));
        }
        match self.node_types.get(&t.src) {
            Some(n) if n.side == Side::Source => {}
            _ => return Err(type_err(&t.name, &format!("unknown source node type `{}`", t.src))),
        }
        match self.node_types.get(&t.trg) {
            Some(n) if n.side == Side::Target => {}
            _ => return Err(type_err(&t.name, &format!("unknown target node type `{}`", t.trg))),
        }
        self.corr_types.insert(t.name.clone(), t);
        Ok(())
    }

    /// Checks inheritance references and acyclicity.
    pub fn check(&self) -> Result<()> {
        for t in self.node_types.values() {
            for p in &t.parents {
                match self.node_types.get(p) {
                    Some(pt) if pt.side == t.side => {}
                    _ => return Err(type_err(&t.name, &format!("unknown parent type `{p}`"))),
                }
            }
        }
        // a cycle shows up as a type reachable from one of its parents
        for t in self.node_types.values() {
            for p in &t.parents {
                if self.ancestors.get(p).is_some_and(|a| a.contains(&t.name)) {
                    return Err(type_err(&t.name, "inheritance cycle"));
                }
            }
        }
        Ok(())
    }

    fn recompute(&mut self) {
        self.ancestors.clear();
        for name in self.node_types.keys() {
            let mut seen = BTreeSet::new();
            let mut stack = vec![name.clone()];
            while let Some(n) = stack.pop() {
                if !seen.insert(n.clone()) {
                    continue;
                }
                if let Some(t) = self.node_types.get(&n) {
                    stack.extend(t.parents.iter().cloned());
                }
            }
            self.ancestors.insert(name.clone(), seen);
        }
        self.descendants.clear();
        for (name, anc) in &self.ancestors {
            for a in anc {
                self.descendants.entry(a.clone()).or_default().push(name.clone());
            }
        }
    }

    pub fn node_type(&self, name: &str) -> Option<&NodeType> {
        self.node_types.get(name)
    }

    pub fn edge_type(&self, side: Side, name: &str) -> Option<&EdgeType> {
        self.edge_types.get(&(side, name.to_string()))
    }

    pub fn corr_type(&self, name: &str) -> Option<&CorrType> {
        self.corr_types.get(name)
    }

    pub fn node_types(&self) -> impl Iterator<Item = &NodeType> {
        self.node_types.values()
    }

    pub fn edge_types(&self) -> impl Iterator<Item = &EdgeType> {
        self.edge_types.values()
    }

    pub fn corr_types(&self) -> impl Iterator<Item = &CorrType> {
        self.corr_types.values()
    }

    pub fn is_subtype(&self, sub: &str, sup: &str) -> bool {
        sub == sup || self.ancestors.get(sub).is_some_and(|a| a.contains(sup))
    }

    /// All subtypes of `sup`, including itself, in name order.
    pub fn subtypes(&self, sup: &str) -> &[String] {
        self.descendants.get(sup).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Declared attributes of a node type including inherited ones.
    pub fn attrs_of(&self, ty: &str) -> BTreeMap<String, AttrKind> {
        let mut out = BTreeMap::new();
        if let Some(anc) = self.ancestors.get(ty) {
            for a in anc {
                if let Some(t) = self.node_types.get(a) {
                    out.extend(t.attrs.iter().map(|(k, v)| (k.clone(), *v)));
                }
            }
        }
        out
    }
}

fn type_err(name: &str, msg: &str) -> Error {
    Error::Type { rule: format!("type {name}"), msg: msg.to_string() }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Node {
    pub id: ElemId,
    pub side: Side,
    pub ty: String,
    pub attrs: BTreeMap<String, Value>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Edge {
    pub id: ElemId,
    pub side: Side,
    pub ty: String,
    pub from: ElemId,
    pub to: ElemId,
}

/// A correspondence node. `None` references were loaded as dangling; a
/// `Some` reference dangles when the referenced node is absent.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Corr {
    pub id: ElemId,
    pub ty: String,
    pub src: Option<ElemId>,
    pub trg: Option<ElemId>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Element {
    Node(Node),
    Edge(Edge),
    Corr(Corr),
}

impl Element {
    pub fn id(&self) -> &ElemId {
        match self {
            Element::Node(n) => &n.id,
            Element::Edge(e) => &e.id,
            Element::Corr(c) => &c.id,
        }
    }

    pub fn side(&self) -> Side {
        match self {
            Element::Node(n) => n.side,
            Element::Edge(e) => e.side,
            Element::Corr(_) => Side::Corr,
        }
    }

    pub fn ty(&self) -> &str {
        match self {
            Element::Node(n) => &n.ty,
            Element::Edge(e) => &e.ty,
            Element::Corr(c) => &c.ty,
        }
    }

    pub fn as_node(&self) -> Option<&Node> {
        match self {
            Element::Node(n) => Some(n),
            _ => None,
        }
    }

    pub fn as_edge(&self) -> Option<&Edge> {
        match self {
            Element::Edge(e) => Some(e),
            _ => None,
        }
    }

    pub fn as_corr(&self) -> Option<&Corr> {
        match self {
            Element::Corr(c) => Some(c),
            _ => None,
        }
    }
}

/// A (possibly partial) triple graph with adjacency indexes.
#[derive(Clone, Debug, Default)]
pub struct TripleGraph {
    elems: BTreeMap<ElemId, Element>,
    out_edges: HashMap<ElemId, BTreeSet<ElemId>>,
    in_edges: HashMap<ElemId, BTreeSet<ElemId>>,
    corr_refs: HashMap<ElemId, BTreeSet<ElemId>>,
    by_type: HashMap<String, BTreeSet<ElemId>>,
    fresh: u64,
}

impl PartialEq for TripleGraph {
    fn eq(&self, other: &Self) -> bool {
        self.elems == other.elems
    }
}

impl Eq for TripleGraph {}

impl TripleGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.elems.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elems.is_empty()
    }

    pub fn node_count(&self) -> usize {
        self.elems.values().filter(|e| matches!(e, Element::Node(_))).count()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.elems.contains_key(id)
    }

    pub fn get(&self, id: &str) -> Option<&Element> {
        self.elems.get(id)
    }

    pub fn node(&self, id: &str) -> Option<&Node> {
        self.elems.get(id).and_then(Element::as_node)
    }

    pub fn edge(&self, id: &str) -> Option<&Edge> {
        self.elems.get(id).and_then(Element::as_edge)
    }

    pub fn corr(&self, id: &str) -> Option<&Corr> {
        self.elems.get(id).and_then(Element::as_corr)
    }

    /// All elements in id order.
    pub fn elements(&self) -> impl Iterator<Item = &Element> {
        self.elems.values()
    }

    pub fn ids(&self) -> impl Iterator<Item = &ElemId> {
        self.elems.keys()
    }

    pub fn out_edges(&self, node: &str) -> impl Iterator<Item = &ElemId> {
        self.out_edges.get(node).into_iter().flatten()
    }

    pub fn in_edges(&self, node: &str) -> impl Iterator<Item = &ElemId> {
        self.in_edges.get(node).into_iter().flatten()
    }

    /// Present correspondence nodes referencing `node` from either end.
    pub fn corrs_of(&self, node: &str) -> impl Iterator<Item = &ElemId> {
        self.corr_refs.get(node).into_iter().flatten().filter(|c| self.elems.contains_key(c.as_str()))
    }

    /// Incident present edges of a node (out then in).
    pub fn incident_edges(&self, node: &str) -> Vec<ElemId> {
        self.out_edges(node).chain(self.in_edges(node)).cloned().collect()
    }

    /// Nodes whose exact type is `ty`.
    pub fn nodes_of_exact_type(&self, ty: &str) -> impl Iterator<Item = &ElemId> {
        self.by_type.get(ty).into_iter().flatten()
    }

    /// True iff no correspondence reference dangles.
    pub fn is_total(&self) -> bool {
        self.elems.values().all(|e| match e {
            Element::Corr(c) => !self.corr_dangles(c),
            _ => true,
        })
    }

    pub fn corr_dangles(&self, c: &Corr) -> bool {
        let ok = |r: &Option<ElemId>| r.as_ref().is_some_and(|id| self.node(id).is_some());
        !(ok(&c.src) && ok(&c.trg))
    }

    /// A fresh id not used by any present element.
    pub fn fresh_id(&mut self, prefix: &str) -> ElemId {
        loop {
            self.fresh += 1;
            let id = ElemId::new(format!("{prefix}{}", self.fresh));
            if !self.elems.contains_key(&id) {
                return id;
            }
        }
    }

    pub fn add_node(&mut self, node: Node) -> Result<()> {
        if node.side == Side::Corr {
            return Err(Error::Format(format!("node `{}` on corr side", node.id)));
        }
        self.check_fresh(&node.id)?;
        self.by_type.entry(node.ty.clone()).or_default().insert(node.id.clone());
        self.elems.insert(node.id.clone(), Element::Node(node));
        Ok(())
    }

    pub fn add_edge(&mut self, edge: Edge) -> Result<()> {
        self.check_fresh(&edge.id)?;
        for end in [&edge.from, &edge.to] {
            match self.node(end) {
                Some(n) if n.side == edge.side => {}
                Some(_) => return Err(Error::Format(format!("edge `{}` crosses sides", edge.id))),
                None => return Err(Error::Format(format!("edge `{}` endpoint `{end}` missing", edge.id))),
            }
        }
        self.out_edges.entry(edge.from.clone()).or_default().insert(edge.id.clone());
        self.in_edges.entry(edge.to.clone()).or_default().insert(edge.id.clone());
        self.elems.insert(edge.id.clone(), Element::Edge(edge));
        Ok(())
    }

    pub fn add_corr(&mut self, corr: Corr) -> Result<()> {
        self.check_fresh(&corr.id)?;
        for r in corr.src.iter().chain(corr.trg.iter()) {
            self.corr_refs.entry(r.clone()).or_default().insert(corr.id.clone());
        }
        self.elems.insert(corr.id.clone(), Element::Corr(corr));
        Ok(())
    }

    pub fn add(&mut self, e: Element) -> Result<()> {
        match e {
            Element::Node(n) => self.add_node(n),
            Element::Edge(e) => self.add_edge(e),
            Element::Corr(c) => self.add_corr(c),
        }
    }

    fn check_fresh(&self, id: &ElemId) -> Result<()> {
        if self.elems.contains_key(id) {
            Err(Error::Format(format!("duplicate element id `{id}`")))
        } else {
            Ok(())
        }
    }

    /// Removes an element. Removing a node with present incident edges is
    /// rejected; correspondence references to it are left dangling.
    pub fn remove(&mut self, id: &str) -> Result<Element> {
        let Some(e) = self.elems.get(id) else {
            return Err(Error::Unknown { what: "element", name: id.to_string() });
        };
        if let Element::Node(_) = e {
            if let Some(edge) = self.out_edges(id).chain(self.in_edges(id)).next() {
                return Err(Error::DanglingEdge { node: ElemId::new(id), edge: edge.clone() });
            }
        }
        let e = self.elems.remove(id).expect("checked above");
        match &e {
            Element::Node(n) => {
                if let Some(s) = self.by_type.get_mut(&n.ty) {
                    s.remove(id);
                }
            }
            Element::Edge(ed) => {
                if let Some(s) = self.out_edges.get_mut(&ed.from) {
                    s.remove(id);
                }
                if let Some(s) = self.in_edges.get_mut(&ed.to) {
                    s.remove(id);
                }
            }
            Element::Corr(c) => {
                for r in c.src.iter().chain(c.trg.iter()) {
                    if let Some(s) = self.corr_refs.get_mut(r) {
                        s.remove(id);
                    }
                }
            }
        }
        Ok(e)
    }

    pub fn set_attr(&mut self, node: &str, attr: &str, value: Value) -> Result<Option<Value>> {
        match self.elems.get_mut(node) {
            Some(Element::Node(n)) => Ok(n.attrs.insert(attr.to_string(), value)),
            _ => Err(Error::Unknown { what: "node", name: node.to_string() }),
        }
    }

    pub fn attr(&self, node: &str, attr: &str) -> Option<&Value> {
        self.node(node).and_then(|n| n.attrs.get(attr))
    }

    /// Restricts the graph to one side (corr side yields the corr nodes).
    pub fn side_ids(&self, side: Side) -> impl Iterator<Item = &ElemId> {
        self.elems.values().filter(move |e| e.side() == side).map(Element::id)
    }
}

/// Violation kinds reported by [`validate`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING-KEBAB-CASE")]
pub enum DiagKind {
    UnknownType,
    SideMismatch,
    BadEndpoint,
    DanglingRef,
    UnknownAttr,
    AttrKind,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub kind: DiagKind,
    pub element: ElemId,
    /// Set for dangling references: the graph is partial rather than invalid.
    pub partial: bool,
    pub message: String,
}

/// Checks every element against the type triple.
pub fn validate(host: &TripleGraph, types: &TypeTriple) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let mut diag = |kind, id: &ElemId, msg: String| {
        out.push(Diagnostic { kind, element: id.clone(), partial: kind == DiagKind::DanglingRef, message: msg })
    };
    for e in host.elements() {
        match e {
            Element::Node(n) => {
                let Some(t) = types.node_type(&n.ty) else {
                    diag(DiagKind::UnknownType, &n.id, format!("unknown node type `{}`", n.ty));
                    continue;
                };
                if t.side != n.side {
                    diag(DiagKind::SideMismatch, &n.id, format!("`{}` is a {} type", n.ty, t.side));
                }
                let declared = types.attrs_of(&n.ty);
                for (k, v) in &n.attrs {
                    match declared.get(k) {
                        None => diag(DiagKind::UnknownAttr, &n.id, format!("undeclared attribute `{k}`")),
                        Some(kind) if *kind != v.kind() => {
                            diag(DiagKind::AttrKind, &n.id, format!("attribute `{k}` expects {kind:?}"))
                        }
                        _ => {}
                    }
                }
            }
            Element::Edge(ed) => {
                let Some(t) = types.edge_type(ed.side, &ed.ty) else {
                    diag(DiagKind::UnknownType, &ed.id, format!("unknown {} edge type `{}`", ed.side, ed.ty));
                    continue;
                };
                let from_ok = host.node(&ed.from).is_some_and(|n| types.is_subtype(&n.ty, &t.from));
                let to_ok = host.node(&ed.to).is_some_and(|n| types.is_subtype(&n.ty, &t.to));
                if !from_ok || !to_ok {
                    diag(DiagKind::BadEndpoint, &ed.id, format!("endpoints incompatible with `{}`", ed.ty));
                }
            }
            Element::Corr(c) => {
                let Some(t) = types.corr_type(&c.ty) else {
                    diag(DiagKind::UnknownType, &c.id, format!("unknown corr type `{}`", c.ty));
                    continue;
                };
                for (r, want, side) in [(&c.src, &t.src, Side::Source), (&c.trg, &t.trg, Side::Target)] {
                    match r.as_ref().and_then(|id| host.node(id)) {
                        None => diag(DiagKind::DanglingRef, &c.id, format!("{side} reference dangles")),
                        Some(n) if n.side != side || !types.is_subtype(&n.ty, want) => {
                            diag(DiagKind::BadEndpoint, &c.id, format!("{side} reference is not a `{want}`"))
                        }
                        _ => {}
                    }
                }
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// JSON document format

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct GraphDoc {
    #[serde(default)]
    pub source: SideDoc,
    #[serde(default)]
    pub target: SideDoc,
    #[serde(default)]
    pub corr: Vec<CorrDoc>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct SideDoc {
    #[serde(default)]
    pub nodes: Vec<NodeDoc>,
    #[serde(default)]
    pub edges: Vec<EdgeDoc>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NodeDoc {
    pub id: ElemId,
    #[serde(rename = "type")]
    pub ty: String,
    #[serde(default)]
    pub attrs: BTreeMap<String, Value>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EdgeDoc {
    pub id: ElemId,
    #[serde(rename = "type")]
    pub ty: String,
    pub from: ElemId,
    pub to: ElemId,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CorrDoc {
    pub id: ElemId,
    #[serde(rename = "type")]
    pub ty: String,
    pub src: Option<ElemId>,
    pub trg: Option<ElemId>,
}

impl TripleGraph {
    pub fn from_doc(doc: &GraphDoc) -> Result<Self> {
        let mut g = TripleGraph::new();
        for (side, sd) in [(Side::Source, &doc.source), (Side::Target, &doc.target)] {
            for n in &sd.nodes {
                g.add_node(Node { id: n.id.clone(), side, ty: n.ty.clone(), attrs: n.attrs.clone() })?;
            }
        }
        for (side, sd) in [(Side::Source, &doc.source), (Side::Target, &doc.target)] {
            for e in &sd.edges {
                g.add_edge(Edge { id: e.id.clone(), side, ty: e.ty.clone(), from: e.from.clone(), to: e.to.clone() })?;
            }
        }
        for c in &doc.corr {
            g.add_corr(Corr { id: c.id.clone(), ty: c.ty.clone(), src: c.src.clone(), trg: c.trg.clone() })?;
        }
        Ok(g)
    }

    pub fn to_doc(&self) -> GraphDoc {
        let mut doc = GraphDoc::default();
        for e in self.elements() {
            match e {
                Element::Node(n) => {
                    let sd = if n.side == Side::Source { &mut doc.source } else { &mut doc.target };
                    sd.nodes.push(NodeDoc { id: n.id.clone(), ty: n.ty.clone(), attrs: n.attrs.clone() });
                }
                Element::Edge(ed) => {
                    let sd = if ed.side == Side::Source { &mut doc.source } else { &mut doc.target };
                    sd.edges.push(EdgeDoc { id: ed.id.clone(), ty: ed.ty.clone(), from: ed.from.clone(), to: ed.to.clone() });
                }
                Element::Corr(c) => {
                    let live = |r: &Option<ElemId>| r.clone().filter(|id| self.node(id).is_some());
                    doc.corr.push(CorrDoc { id: c.id.clone(), ty: c.ty.clone(), src: live(&c.src), trg: live(&c.trg) });
                }
            }
        }
        doc
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: GraphDoc = serde_json::from_str(text)?;
        Self::from_doc(&doc)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_doc()).expect("graph documents always serialize")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn types() -> TypeTriple {
        let mut t = TypeTriple::new();
        let attrs = BTreeMap::from([("name".to_string(), AttrKind::String)]);
        t.add_node_type(NodeType { name: "A".into(), side: Side::Source, attrs: attrs.clone(), parents: vec![] }).unwrap();
        t.add_node_type(NodeType { name: "B".into(), side: Side::Source, attrs: BTreeMap::new(), parents: vec!["A".into()] })
            .unwrap();
        t.add_node_type(NodeType { name: "X".into(), side: Side::Target, attrs, parents: vec![] }).unwrap();
        t.add_edge_type(EdgeType { name: "r".into(), side: Side::Source, from: "A".into(), to: "A".into() }).unwrap();
        t.add_corr_type(CorrType { name: "A2X".into(), src: "A".into(), trg: "X".into() }).unwrap();
        t.check().unwrap();
        t
    }

    fn node(id: &str, side: Side, ty: &str) -> Node {
        Node { id: id.into(), side, ty: ty.into(), attrs: BTreeMap::new() }
    }

    #[test]
    fn inheritance_is_reflexive_and_transitive() {
        let t = types();
        assert!(t.is_subtype("B", "A"));
        assert!(t.is_subtype("A", "A"));
        assert!(!t.is_subtype("A", "B"));
        assert_eq!(t.subtypes("A"), &["A".to_string(), "B".to_string()]);
        assert!(t.attrs_of("B").contains_key("name"));
    }

    #[test]
    fn inheritance_cycle_rejected() {
        let mut t = TypeTriple::new();
        t.add_node_type(NodeType { name: "P".into(), side: Side::Source, attrs: BTreeMap::new(), parents: vec!["Q".into()] })
            .unwrap();
        t.add_node_type(NodeType { name: "Q".into(), side: Side::Source, attrs: BTreeMap::new(), parents: vec!["P".into()] })
            .unwrap();
        assert!(t.check().is_err());
    }

    #[test]
    fn edge_type_needs_same_side_endpoints() {
        let mut t = types();
        let err = t.add_edge_type(EdgeType { name: "bad".into(), side: Side::Source, from: "A".into(), to: "X".into() });
        assert!(err.is_err());
    }

    #[test]
    fn empty_graph_validates() {
        assert!(validate(&TripleGraph::new(), &types()).is_empty());
    }

    #[test]
    fn removing_node_with_edge_is_rejected() {
        let mut g = TripleGraph::new();
        g.add_node(node("a", Side::Source, "A")).unwrap();
        g.add_node(node("b", Side::Source, "B")).unwrap();
        g.add_edge(Edge { id: "e".into(), side: Side::Source, ty: "r".into(), from: "a".into(), to: "b".into() }).unwrap();
        assert_eq!(g.remove("b").unwrap_err().kind(), "DANGLING-EDGE");
        g.remove("e").unwrap();
        g.remove("b").unwrap();
        assert!(validate(&g, &types()).is_empty());
    }

    #[test]
    fn dangling_corr_is_partial_not_invalid() {
        let mut g = TripleGraph::new();
        g.add_node(node("a", Side::Source, "A")).unwrap();
        g.add_node(node("x", Side::Target, "X")).unwrap();
        g.add_corr(Corr { id: "c".into(), ty: "A2X".into(), src: Some("a".into()), trg: Some("x".into()) }).unwrap();
        assert!(g.is_total());
        g.remove("a").unwrap();
        assert!(!g.is_total());
        let d = validate(&g, &types());
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].kind, DiagKind::DanglingRef);
        assert!(d[0].partial);
        // re-adding the node re-attaches the reference
        g.add_node(node("a", Side::Source, "A")).unwrap();
        assert!(g.is_total());
    }

    #[test]
    fn json_round_trip_keeps_dangling_as_null() {
        let mut g = TripleGraph::new();
        g.add_node(node("x", Side::Target, "X")).unwrap();
        g.add_corr(Corr { id: "c".into(), ty: "A2X".into(), src: Some("gone".into()), trg: Some("x".into()) }).unwrap();
        let text = g.to_json();
        assert!(text.contains("\"src\": null"));
        let back = TripleGraph::from_json(&text).unwrap();
        assert_eq!(back.corr("c").unwrap().src, None);
    }

    #[test]
    fn digits_suffix() {
        assert_eq!(ElemId::new("GE12").digits(), "12");
        assert_eq!(ElemId::new("abc").digits(), "");
        assert_eq!(ElemId::new("7").digits(), "7");
    }
}
