//! Local CC, translate, rollback and clean-up.

use std::collections::{BTreeMap, BTreeSet};

use super::{Applied, Scope, SyncState, Unconstrained};
use crate::dpg::{Ann, Dpg, Origin};
use crate::grammar::Tgg;
use crate::graph::{ElemId, Side};
use crate::operational::{Mark, OperationalRule};
use crate::pattern::{Matcher, PKind, Pattern, PatternMatch};
use crate::rewrite::{self, Role};

/// `nodes` ordered so that dependencies come first, ties by id.
pub(crate) fn topo(dpg: &Dpg, tgg: &Tgg, nodes: &[usize]) -> Vec<usize> {
    let set: BTreeSet<usize> = nodes.iter().copied().collect();
    let mut indeg: BTreeMap<usize, usize> = set.iter().map(|i| (*i, 0)).collect();
    let mut out_edges: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for &a in &set {
        for b in dpg.deps(tgg, a) {
            if set.contains(&b) {
                *indeg.get_mut(&a).unwrap() += 1;
                out_edges.entry(b).or_default().push(a);
            }
        }
    }
    let key = |i: &usize| dpg.nodes[*i].id.clone();
    let mut ready: BTreeSet<(String, usize)> = indeg.iter().filter(|(_, d)| **d == 0).map(|(i, _)| (key(i), *i)).collect();
    let mut order = Vec::new();
    while let Some((k, i)) = ready.iter().next().cloned() {
        ready.remove(&(k, i));
        order.push(i);
        for &j in out_edges.get(&i).map(Vec::as_slice).unwrap_or(&[]) {
            let d = indeg.get_mut(&j).unwrap();
            *d -= 1;
            if *d == 0 {
                ready.insert((key(&j), j));
            }
        }
    }
    // cycles cannot arise from well-formed inputs; keep leftovers in id order
    let placed: BTreeSet<usize> = order.iter().copied().collect();
    let mut rest: Vec<usize> = set.into_iter().filter(|i| !placed.contains(i)).collect();
    rest.sort_by_key(key);
    order.extend(rest);
    order
}

impl SyncState<'_> {
    /// Matches an operational rule's left-hand side around `seed` (rule
    /// indices) honoring markings against the unpropagated set.
    pub(crate) fn match_op(&self, op: &OperationalRule, seed: &[Option<ElemId>]) -> Vec<Vec<Option<ElemId>>> {
        let (lhs, map) = op.lhs();
        let mut marks = vec![Mark::None; lhs.len()];
        let mut s = vec![None; lhs.len()];
        for (j, m) in map.iter().enumerate() {
            if let Some(m) = m {
                marks[*m] = op.marks[j];
                s[*m] = seed.get(j).cloned().flatten();
            }
        }
        let unprop = self.dpg.unpropagated();
        let filter = |pi: usize, id: &ElemId| match marks[pi] {
            Mark::Translates => unprop.contains(id),
            _ => !unprop.contains(id),
        };
        let found: Vec<PatternMatch> = Matcher::new(&self.host, &self.tgg.types).filter(&filter).find_all(&lhs, &s).unwrap_or_default();
        found.into_iter().map(|m| map.iter().map(|p| p.map(|p| m.bindings[p].clone())).collect()).collect()
    }

    /// Applies `op` over rule `rule` at a full left-hand-side binding and
    /// records the resulting application.
    pub(crate) fn apply_op(&mut self, fragment: &str, rule: usize, op: &OperationalRule, lhs: &[Option<ElemId>], replaced: Vec<usize>) -> Option<usize> {
        self.apply_pattern(fragment, &op.name, rule, &op.pattern, &op.roles, lhs, replaced)
    }

    /// Rewrites the host with `pattern` and replaces the `replaced` nodes by
    /// one base node of `rule`.
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn apply_pattern(&mut self, fragment: &str, name: &str, rule: usize, pattern: &Pattern, roles: &[Role], lhs: &[Option<ElemId>], replaced: Vec<usize>) -> Option<usize> {
        let prefixes: Vec<String> = pattern
            .elems
            .iter()
            .map(|e| match &e.kind {
                PKind::Node { ty, .. } => ty.chars().next().unwrap_or('n').to_ascii_uppercase().to_string(),
                PKind::Edge { .. } => "e".to_string(),
                PKind::Corr { .. } => "c".to_string(),
            })
            .collect();
        // preserved nodes only change if the rewrite fills unset attributes
        let before: Vec<Option<usize>> = (0..pattern.len())
            .map(|i| if roles[i] == Role::Preserve { lhs[i].as_ref().and_then(|e| self.host.node(e)).map(|n| n.attrs.len()) } else { None })
            .collect();
        let deleted = &self.log.deleted;
        let res = rewrite::apply(
            &mut self.host,
            &self.tgg.types,
            pattern,
            roles,
            lhs,
            &mut |h, i| loop {
                let id = h.fresh_id(&prefixes[i]);
                if !deleted.contains_key(&id) {
                    break id;
                }
            },
            &mut Unconstrained,
        );
        let bindings = match res {
            Ok(b) => b,
            Err(e) => {
                self.report.warnings.push(format!("{name} not applied: {e}"));
                return None;
            }
        };
        // what changed in the host plus what the new node now accounts for
        let host = &self.host;
        let created = &self.tgg.rules[rule].create;
        let mut touched: BTreeSet<ElemId> = bindings
            .iter()
            .enumerate()
            .filter(|(i, e)| {
                roles[*i] != Role::Preserve || created.get(*i) == Some(&true) || before[*i].is_some_and(|k| host.node(e).is_some_and(|n| n.attrs.len() != k))
            })
            .map(|(_, e)| e.clone())
            .collect();
        let mut old_ids = Vec::new();
        for &i in &replaced {
            touched.extend(self.dpg.nodes[i].created(self.tgg).cloned());
            old_ids.push(self.dpg.nodes[i].id.clone());
            if !self.dpg.nodes[i].is_candidate() {
                self.dpg.remove(self.tgg, i);
            }
        }
        let rb = bindings[..self.tgg.rules[rule].pattern.len()].to_vec();
        let n = self.dpg.add_base(self.tgg, rule, rb);
        self.refresh(touched);
        self.report.applied.push(Applied { fragment: fragment.into(), rule: name.to_string(), replaced: old_ids, node: Some(self.dpg.nodes[n].id.clone()) });
        Some(n)
    }

    /// Correlates new source and target elements via CC rules.
    pub fn local_cc(&mut self, scope: &Scope) {
        loop {
            let mut progress = false;
            for s in self.visit(scope, true) {
                let n = &self.dpg.nodes[s];
                if !n.alive || n.origin != Origin::Src || !n.src.contains(Ann::PLUS) {
                    continue;
                }
                let rule = n.rule;
                let op = &self.ops.cc[rule];
                let r = &self.tgg.rules[rule];
                let mut hit = None;
                for b in self.match_op(op, &n.bindings) {
                    let trg: Vec<Option<ElemId>> = (0..r.pattern.len()).map(|j| if r.side_of(j) == Side::Target { b[j].clone() } else { None }).collect();
                    let Some(t) = self.dpg.find_candidate(rule, Origin::Trg, &trg) else { continue };
                    let tn = &self.dpg.nodes[t];
                    if tn.trg.contains(Ann::PLUS) && self.allows(scope, t) {
                        hit = Some((b, t));
                        break;
                    }
                }
                if let Some((b, t)) = hit {
                    let op = op.clone();
                    if self.apply_op("local-cc", rule, &op, &b, vec![s, t]).is_some() {
                        progress = true;
                    }
                }
            }
            if !progress {
                break;
            }
        }
    }

    /// Translates new elements with forward and backward rules.
    pub fn translate(&mut self, scope: &Scope) {
        loop {
            let mut progress = false;
            for c in self.visit(scope, true) {
                let n = &self.dpg.nodes[c];
                let Some(side) = n.origin.side() else { continue };
                if !n.alive || !n.ann(side).contains(Ann::PLUS) {
                    continue;
                }
                let rule = n.rule;
                let op = self.ops.directed(side, rule);
                if let Some(b) = self.match_op(op, &n.bindings).into_iter().next() {
                    let op = op.clone();
                    if self.apply_op("translate", rule, &op, &b, vec![c]).is_some() {
                        progress = true;
                    }
                }
            }
            if !progress {
                break;
            }
        }
    }

    /// Revokes applications whose created elements were deleted entirely on
    /// one or both sides.
    pub fn rollback(&mut self, scope: &Scope) {
        let solely = |a: Ann| a.is_empty() || a == Ann::MINUS;
        let sel: Vec<usize> = self
            .visit(scope, false)
            .into_iter()
            .filter(|&i| {
                let n = &self.dpg.nodes[i];
                solely(n.src) && solely(n.trg)
            })
            .collect();
        let mut order = topo(&self.dpg, self.tgg, &sel);
        order.reverse();
        for i in order {
            let n = &self.dpg.nodes[i];
            if !n.alive || !(solely(n.src) && solely(n.trg)) || (n.src.is_empty() && n.trg.is_empty()) {
                continue;
            }
            let created: Vec<ElemId> = n.created(self.tgg).cloned().collect();
            let (id, name) = (n.id.clone(), self.tgg.rules[n.rule].name.clone());
            let mut touched = self.remove_elems(created.clone());
            touched.extend(created);
            self.dpg.remove(self.tgg, i);
            self.refresh(touched);
            self.report.applied.push(Applied { fragment: "rollback".into(), rule: name, replaced: vec![id], node: None });
        }
    }

    /// Deletes everything no intact rule application accounts for.
    pub fn cleanup(&mut self) {
        let tgg = self.tgg;
        let mut nodes: BTreeSet<usize> = self.dpg.flagged().clone();
        let mut elems: BTreeSet<ElemId> = self.dpg.unpropagated().clone();
        let mut node_todo: Vec<usize> = nodes.iter().copied().collect();
        let mut elem_todo: Vec<ElemId> = elems.iter().cloned().collect();
        while !node_todo.is_empty() || !elem_todo.is_empty() {
            while let Some(i) = node_todo.pop() {
                for e in self.dpg.nodes[i].created(tgg) {
                    if self.host.contains(e) && elems.insert(e.clone()) {
                        elem_todo.push(e.clone());
                    }
                }
            }
            while let Some(e) = elem_todo.pop() {
                let mut more: Vec<ElemId> = Vec::new();
                if self.host.node(&e).is_some() {
                    more.extend(self.host.incident_edges(&e).iter().cloned());
                    more.extend(self.host.corrs_of(&e).cloned());
                }
                for m in more {
                    if elems.insert(m.clone()) {
                        elem_todo.push(m);
                    }
                }
                for &d in self.dpg.creators_of(&e).iter().chain(self.dpg.users_of(&e)) {
                    if !self.dpg.nodes[d].is_candidate() && nodes.insert(d) {
                        node_todo.push(d);
                    }
                }
            }
        }
        let mut touched = BTreeSet::new();
        for &i in &nodes {
            touched.extend(self.dpg.nodes[i].bindings.iter().flatten().cloned());
            let (id, name) = (self.dpg.nodes[i].id.clone(), tgg.rules[self.dpg.nodes[i].rule].name.clone());
            self.dpg.remove(tgg, i);
            self.report.applied.push(Applied { fragment: "clean-up".into(), rule: name, replaced: vec![id], node: None });
        }
        touched.extend(self.remove_elems(elems.iter().cloned()));
        self.report.removed.extend(elems.iter().cloned());
        touched.extend(elems);
        self.refresh(touched);
        self.report.unresolved.extend(self.pending.drain(..).map(|p| p.conflict));
        self.blocked.clear();
    }
}
