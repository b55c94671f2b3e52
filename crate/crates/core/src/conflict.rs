//! Conflict classification from annotations, confirmation, and scopes.

use std::collections::BTreeSet;
use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::dpg::{Ann, Dpg, Env};
use crate::graph::{ElemId, Element, Side};
use crate::pattern::{Matcher, Operand, PKind};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING-KEBAB-CASE")]
pub enum Kind {
    PreserveDelete,
    CorrespondencePreservation,
    AttributeChange,
}

impl Kind {
    pub const ALL: [Kind; 3] = [Kind::PreserveDelete, Kind::CorrespondencePreservation, Kind::AttributeChange];

    /// Key used in orchestration files.
    pub fn key(self) -> &'static str {
        match self {
            Kind::PreserveDelete => "preserve-delete",
            Kind::CorrespondencePreservation => "correspondence-preservation",
            Kind::AttributeChange => "attribute-change",
        }
    }

    pub fn from_key(s: &str) -> Option<Kind> {
        Kind::ALL.into_iter().find(|k| k.key() == s)
    }

    pub fn short(self) -> &'static str {
        match self {
            Kind::PreserveDelete => "pdc",
            Kind::CorrespondencePreservation => "cpc",
            Kind::AttributeChange => "acc",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Conflict {
    pub kind: Kind,
    pub anchor: String,
    /// node ids, sorted
    pub scope: Vec<String>,
    /// element ids and attribute slots justifying the conflict
    pub evidence: Vec<String>,
}

const PDC: u8 = 1;
const CPC: u8 = 2;
const ACC: u8 = 4;

/// Potential conflicts per pair of single annotations; rows are the
/// source symbol, columns the target symbol, in the order `{} - / # n`.
const TABLE: [[u8; 5]; 5] = [
    [0, PDC, PDC | CPC, 0, CPC],
    [PDC, 0, PDC | CPC, PDC, PDC | CPC],
    [PDC | CPC, PDC | CPC, PDC | CPC, PDC | CPC, PDC | CPC],
    [0, PDC, PDC | CPC, ACC, CPC],
    [CPC, PDC | CPC, PDC | CPC, CPC, CPC],
];

fn columns(a: Ann) -> Vec<usize> {
    let v: Vec<usize> = [(Ann::MINUS, 1), (Ann::SLASH, 2), (Ann::HASH, 3), (Ann::N, 4)]
        .into_iter()
        .filter(|(s, _)| a.contains(*s))
        .map(|(_, i)| i)
        .collect();
    if v.is_empty() { vec![0] } else { v }
}

/// Kinds a node with these annotations may be involved in.
pub fn potential(src: Ann, trg: Ann) -> BTreeSet<Kind> {
    let mut bits = 0;
    for r in columns(src) {
        for c in columns(trg) {
            bits |= TABLE[r][c];
        }
    }
    [(PDC, Kind::PreserveDelete), (CPC, Kind::CorrespondencePreservation), (ACC, Kind::AttributeChange)]
        .into_iter()
        .filter(|(b, _)| bits & b != 0)
        .map(|(_, k)| k)
        .collect()
}

/// Alive base nodes with a non-empty potential set, sorted by id.
pub fn potential_conflicts(dpg: &Dpg) -> Vec<(String, BTreeSet<Kind>)> {
    dpg.sorted()
        .into_iter()
        .map(|i| &dpg.nodes[i])
        .filter(|n| !n.is_candidate())
        .map(|n| (n.id.clone(), potential(n.src, n.trg)))
        .filter(|(_, k)| !k.is_empty())
        .collect()
}

/// Checks one potential conflict at node index `i`.
pub fn confirm(env: Env<'_>, dpg: &Dpg, i: usize, kind: Kind) -> Option<Conflict> {
    match kind {
        Kind::PreserveDelete => confirm_pdc(env, dpg, i),
        Kind::CorrespondencePreservation => confirm_cpc(env, dpg, i),
        Kind::AttributeChange => confirm_acc(env, dpg, i),
    }
}

/// All confirmed conflicts, ordered by anchor id and kind.
pub fn detect_all(env: Env<'_>, dpg: &Dpg) -> Vec<Conflict> {
    let mut out = Vec::new();
    for (id, kinds) in potential_conflicts(dpg) {
        let i = dpg.index_of(&id).expect("alive");
        out.extend(kinds.into_iter().filter_map(|k| confirm(env, dpg, i, k)));
    }
    out.sort_by(|a, b| (&a.anchor, a.kind).cmp(&(&b.anchor, b.kind)));
    out
}

fn ids(dpg: &Dpg, nodes: impl IntoIterator<Item = usize>) -> Vec<String> {
    let mut v: Vec<String> = nodes.into_iter().map(|i| dpg.nodes[i].id.clone()).collect();
    v.sort();
    v.dedup();
    v
}

fn user_touched(env: Env<'_>, e: &ElemId) -> bool {
    env.log.is_added(e) || env.log.changed_attrs(env.host, e).next().is_some()
}

/// Would propagating one side's deletion to the other side remove every
/// pattern able to account for a user-added or user-changed element there?
fn confirm_pdc(env: Env<'_>, dpg: &Dpg, i: usize) -> Option<Conflict> {
    let n = &dpg.nodes[i];
    if n.src == Ann::MINUS && n.trg == Ann::MINUS {
        return None;
    }
    let tgg = env.tgg;
    let r = &tgg.rules[n.rule];
    let host = env.host;
    for x in [Side::Source, Side::Target] {
        let ax = n.ann(x);
        if !ax.intersects(Ann::MINUS | Ann::SLASH) {
            continue;
        }
        let y = x.opposite();
        let bound = |j: usize| n.bindings[j].as_ref().filter(|b| host.contains(b));
        let mut doomed: Vec<ElemId> = Vec::new();
        if ax.contains(Ann::MINUS) {
            doomed.extend(r.created_on(y).filter_map(bound).cloned());
        } else {
            // a partial deletion keeps surviving nodes; only links and the
            // partners of deleted nodes go
            for j in r.created_on(y) {
                if !r.pattern.elems[j].is_node() {
                    doomed.extend(bound(j).cloned());
                }
            }
            for j in r.created() {
                if let PKind::Corr { src, trg, .. } = &r.pattern.elems[j].kind {
                    let (xs, ys) = if x == Side::Source { (*src, *trg) } else { (*trg, *src) };
                    if r.create[xs] && bound(xs).is_none() {
                        doomed.extend(bound(ys).cloned());
                    }
                }
            }
        }
        let vanished = cascade(env, dpg, i, y, doomed);
        let mut hit: Vec<String> = vanished
            .elems
            .iter()
            .filter(|e| host.get(e).is_some_and(|el| el.side() == y) && user_touched(env, e))
            .map(|e| e.to_string())
            .collect();
        // elements whose every accounting pattern died
        for &d in &vanished.nodes {
            for e in dpg.nodes[d].created_on(tgg, y) {
                if host.contains(e) && user_touched(env, e) && dpg.creators_of(e).iter().all(|c| vanished.nodes.contains(c)) {
                    hit.push(e.to_string());
                }
            }
        }
        if hit.is_empty() {
            continue;
        }
        let mut evidence: Vec<String> = n.bindings.iter().flatten().filter(|b| env.log.is_deleted(b)).map(|b| b.to_string()).collect();
        evidence.extend(hit);
        evidence.sort();
        evidence.dedup();
        return Some(Conflict {
            kind: Kind::PreserveDelete,
            anchor: n.id.clone(),
            scope: ids(dpg, dpg.dependent_closure(tgg, i)),
            evidence,
        });
    }
    None
}

struct Vanished {
    elems: BTreeSet<ElemId>,
    nodes: BTreeSet<usize>,
}

/// Hypothetical removal of `start` on side `y`: dangling edges and corrs
/// go too, nodes binding a vanished element die, and dead rule
/// applications take their `y`-side creations with them.
fn cascade(env: Env<'_>, dpg: &Dpg, anchor: usize, y: Side, start: Vec<ElemId>) -> Vanished {
    let host = env.host;
    let tgg = env.tgg;
    let mut v = Vanished { elems: BTreeSet::new(), nodes: BTreeSet::from([anchor]) };
    let mut todo = start;
    while let Some(e) = todo.pop() {
        if !v.elems.insert(e.clone()) {
            continue;
        }
        if let Some(Element::Node(_)) = host.get(&e) {
            todo.extend(host.incident_edges(&e).iter().cloned());
            todo.extend(host.corrs_of(&e).cloned());
        }
        for &d in dpg.creators_of(&e).iter().chain(dpg.users_of(&e)) {
            if v.nodes.insert(d) && !dpg.nodes[d].is_candidate() {
                let dn = &dpg.nodes[d];
                let r = &tgg.rules[dn.rule];
                for j in r.created() {
                    if r.side_of(j) == y || r.side_of(j) == Side::Corr {
                        todo.extend(dn.bindings[j].iter().filter(|b| host.contains(b)).cloned());
                    }
                }
            }
        }
    }
    v
}

/// Both sides broken and no pair of candidates re-relates the elements.
fn confirm_cpc(env: Env<'_>, dpg: &Dpg, i: usize) -> Option<Conflict> {
    let n = &dpg.nodes[i];
    let broken = Ann::SLASH | Ann::N;
    if !(n.src.intersects(broken) && n.trg.intersects(broken)) {
        return None;
    }
    let tgg = env.tgg;
    let mut stars: BTreeSet<usize> = BTreeSet::new();
    for e in n.created(tgg) {
        for &c in dpg.creators_of(e) {
            let cn = &dpg.nodes[c];
            if cn.is_candidate() && (cn.src.contains(Ann::STAR) || cn.trg.contains(Ann::STAR)) {
                stars.insert(c);
            }
        }
    }
    let matcher = Matcher::new(env.host, &tgg.types);
    for &s in &stars {
        for &t in &stars {
            let (sn, tn) = (&dpg.nodes[s], &dpg.nodes[t]);
            if sn.origin.side() != Some(Side::Source) || tn.origin.side() != Some(Side::Target) || sn.rule != tn.rule {
                continue;
            }
            let (lhs, map) = env.ops.cc[sn.rule].lhs();
            let mut seed = vec![None; lhs.len()];
            for (j, m) in map.iter().enumerate() {
                if let Some(m) = m {
                    seed[*m] = sn.bindings[j].clone().or_else(|| tn.bindings[j].clone());
                }
            }
            if matcher.exists(&lhs, &seed).unwrap_or(false) {
                return None;
            }
        }
    }
    let evidence: BTreeSet<String> = n.created(tgg).filter(|e| dpg.is_unpropagated(e)).map(|e| e.to_string()).collect();
    Some(Conflict {
        kind: Kind::CorrespondencePreservation,
        anchor: n.id.clone(),
        scope: ids(dpg, stars.into_iter().chain([i])),
        evidence: evidence.into_iter().collect(),
    })
}

/// An attribute condition fails and both of its sides were changed.
fn confirm_acc(env: Env<'_>, dpg: &Dpg, i: usize) -> Option<Conflict> {
    let n = &dpg.nodes[i];
    if !(n.src.contains(Ann::HASH) && n.trg.contains(Ann::HASH)) {
        return None;
    }
    let r = &env.tgg.rules[n.rule];
    let host = env.host;
    let mut evidence = BTreeSet::new();
    for c in &r.pattern.conds {
        if c.elems().any(|e| n.bindings[e].as_ref().is_none_or(|b| !host.contains(b))) || c.holds(host, &n.bindings) {
            continue;
        }
        let mut changed = [Vec::new(), Vec::new()];
        for o in [&c.lhs, &c.rhs] {
            if let Operand::Slot { elem, attr } = o {
                let b = n.bindings[*elem].as_ref().unwrap();
                let k = match r.side_of(*elem) {
                    Side::Source => 0,
                    Side::Target => 1,
                    Side::Corr => continue,
                };
                if env.log.attr_changed(host, b, attr) {
                    changed[k].push(format!("{b}.{attr}"));
                }
            }
        }
        if !changed[0].is_empty() && !changed[1].is_empty() {
            evidence.extend(changed.into_iter().flatten());
        }
    }
    if evidence.is_empty() {
        return None;
    }
    Some(Conflict { kind: Kind::AttributeChange, anchor: n.id.clone(), scope: vec![n.id.clone()], evidence: evidence.into_iter().collect() })
}

/// Plain-text table of conflicts.
pub fn render(conflicts: &[Conflict]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:<28} {:<8} {:<40} evidence", "kind", "anchor", "scope");
    for c in conflicts {
        let _ = writeln!(s, "{:<28} {:<8} {:<40} {}", format!("{:?}", c.kind), c.anchor, c.scope.join(","), c.evidence.join(","));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dpg::tests::running;

    #[test]
    fn table_rows() {
        let a = |s: &str| Ann::parse(s).unwrap();
        let k = |src: &str, trg: &str| potential(a(src), a(trg)).into_iter().map(Kind::short).collect::<Vec<_>>();
        assert_eq!(k("-", ""), ["pdc"]);
        assert_eq!(k("#", "#"), ["acc"]);
        assert!(k("", "").is_empty());
        assert!(k("-", "-").is_empty());
        assert_eq!(k("/", "#"), ["pdc", "cpc"]);
        assert_eq!(k("n", "n"), ["cpc"]);
        assert_eq!(k("-/", ""), ["pdc", "cpc"]);
    }

    #[test]
    fn running_conflicts() {
        let r = running();
        let d = Dpg::annotate(r.env(), &r.pg);
        let cs = detect_all(r.env(), &d);
        let got: Vec<(Kind, &str)> = cs.iter().map(|c| (c.kind, c.anchor.as_str())).collect();
        assert_eq!(got, [(Kind::CorrespondencePreservation, "FE7"), (Kind::PreserveDelete, "ME6"), (Kind::AttributeChange, "ME8")]);
        assert_eq!(cs[1].scope, ["GL6''", "ME6", "P10", "P9"]);
        assert_eq!(cs[1].evidence, ["C1-methods-M6", "E6-link-GE12", "M6"]);
        assert!(cs[0].scope.contains(&"FE7'".to_string()) && cs[0].scope.contains(&"FE7''".to_string()));
        assert_eq!(cs[2].scope, ["ME8"]);
        assert_eq!(cs[2].evidence, ["E8.name", "M8.name"]);
    }
}
