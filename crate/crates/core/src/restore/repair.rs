//! Short-cut repair of broken applications and attribute repair.

use std::collections::BTreeSet;

use super::fragments::topo;
use super::{Applied, Scope, SyncState};
use crate::dpg::Ann;
use crate::graph::{ElemId, Side};
use crate::operational::Shortcut;
use crate::pattern::{Matcher, Operand};
use crate::rewrite::Role;

/// Which sides of a broken application already show the new situation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Mode {
    Fwd,
    Bwd,
    Cc,
}

impl Mode {
    fn done(self, side: Side) -> bool {
        match self {
            Mode::Fwd => side == Side::Source,
            Mode::Bwd => side == Side::Target,
            Mode::Cc => side != Side::Corr,
        }
    }

    fn suffix(self) -> &'static str {
        match self {
            Mode::Fwd => "FWD",
            Mode::Bwd => "BWD",
            Mode::Cc => "CC",
        }
    }
}

impl SyncState<'_> {
    /// Replaces broken applications by applications of a related rule,
    /// preserving shared elements, and aligns one-sided attribute edits.
    pub fn repair(&mut self, scope: &Scope) {
        // every success retires a flagged node, so passes are few; the cap
        // guards against rule sets whose short-cuts undo each other
        for _ in 0..64 {
            let flagged = self.visit(scope, false);
            let mut progress = false;
            for i in topo(&self.dpg, self.tgg, &flagged) {
                let n = &self.dpg.nodes[i];
                if !n.alive || !self.allows(scope, i) {
                    continue;
                }
                let (s, t) = (n.src, n.trg);
                let structural = Ann::SLASH | Ann::N;
                let done = if s.intersects(structural) || t.intersects(structural) {
                    self.shortcut_repair(i)
                } else {
                    self.attr_repair(i)
                };
                progress |= done;
            }
            if !progress {
                break;
            }
        }
    }

    fn shortcut_repair(&mut self, i: usize) -> bool {
        let name = &self.tgg.rules[self.dpg.nodes[i].rule].name;
        for sc in self.ops.shortcuts.iter().filter(|sc| &sc.replaced == name) {
            for mode in [Mode::Fwd, Mode::Bwd, Mode::Cc] {
                if self.try_shortcut(i, sc, mode) {
                    return true;
                }
            }
        }
        false
    }

    fn try_shortcut(&mut self, i: usize, sc: &Shortcut, mode: Mode) -> bool {
        let tgg = self.tgg;
        let (Some(i1), Some(i2)) = (tgg.rule_index(&sc.replaced), tgg.rule_index(&sc.replacing)) else { return false };
        let (r1, r2) = (&tgg.rules[i1], &tgg.rules[i2]);
        let n = &self.dpg.nodes[i];
        let host = &self.host;
        let present = |e: &Option<ElemId>| e.as_ref().is_some_and(|e| host.contains(e));

        let old_only: Vec<usize> = sc.old_only().collect();
        let new_only: Vec<usize> = sc.new_only().collect();
        // the change must be visible on a done side
        let evidence = new_only.iter().any(|&j| r2.create[j] && mode.done(r2.side_of(j)))
            || old_only.iter().any(|&a| r1.create[a] && mode.done(r1.side_of(a)));
        if !evidence {
            return false;
        }
        // replaced-only elements: gone on done sides, still there elsewhere
        let mut doomed = Vec::new();
        for &a in &old_only {
            if !r1.create[a] {
                continue;
            }
            let side = r1.side_of(a);
            let here = present(&n.bindings[a]);
            if mode.done(side) {
                if here {
                    return false;
                }
            } else if side == Side::Corr {
                if here {
                    doomed.push(n.bindings[a].clone().unwrap());
                }
            } else if !here {
                return false;
            } else {
                doomed.push(n.bindings[a].clone().unwrap());
            }
        }

        let to_create: Vec<bool> = (0..r2.pattern.len()).map(|j| new_only.contains(&j) && r2.create[j] && !mode.done(r2.side_of(j))).collect();
        let base = match mode {
            Mode::Fwd => &self.ops.directed(Side::Source, i2).pattern,
            Mode::Bwd => &self.ops.directed(Side::Target, i2).pattern,
            Mode::Cc => &self.ops.cc[i2].pattern,
        };
        let keep: Vec<bool> = to_create.iter().map(|c| !c).collect();
        let (pat, map) = base.restrict(&keep);
        let mut seed = vec![None; pat.len()];
        for &(a, b) in &sc.overlap {
            if let Some(p) = map[b] {
                match &n.bindings[a] {
                    Some(e) if host.contains(e) => seed[p] = Some(e.clone()),
                    _ => return false,
                }
            }
        }
        let mut kind = vec![0u8; pat.len()];
        for (j, p) in map.iter().enumerate() {
            if let Some(p) = p {
                kind[*p] = if sc.overlap.iter().any(|(_, b)| *b == j) {
                    0
                } else if r2.create[j] {
                    1
                } else {
                    2
                };
            }
        }
        let unprop = self.dpg.unpropagated();
        let filter = |p: usize, id: &ElemId| match kind[p] {
            0 => true,
            1 => unprop.contains(id),
            _ => !unprop.contains(id),
        };
        let Ok(Some(m)) = Matcher::new(host, &tgg.types).filter(&filter).find_first(&pat, &seed) else { return false };
        let lhs: Vec<Option<ElemId>> = map.iter().map(|p| p.map(|p| m.bindings[p].clone())).collect();
        let roles: Vec<Role> = to_create.iter().map(|c| if *c { Role::Create } else { Role::Preserve }).collect();

        self.remove_elems(doomed);
        let rule_name = format!("{}_{}", sc.rule.name, mode.suffix());
        self.apply_pattern("repair", &rule_name, i2, &r2.pattern, &roles, &lhs, vec![i]).is_some()
    }

    /// Copies an edited attribute to the side that was not edited.
    fn attr_repair(&mut self, i: usize) -> bool {
        let n = &self.dpg.nodes[i];
        let (from, to) = match (n.src, n.trg) {
            (Ann::HASH, Ann::EMPTY) => (Side::Source, Side::Target),
            (Ann::EMPTY, Ann::HASH) => (Side::Target, Side::Source),
            _ => return false,
        };
        let r = &self.tgg.rules[n.rule];
        let mut sets = Vec::new();
        for c in &r.pattern.conds {
            if c.holds(&self.host, &n.bindings) {
                continue;
            }
            let (Operand::Slot { elem: a, attr: aa }, Operand::Slot { elem: b, attr: ba }) = (&c.lhs, &c.rhs) else { continue };
            let ((x, xa), (y, ya)) = if r.side_of(*a) == from && r.side_of(*b) == to {
                ((*a, aa), (*b, ba))
            } else if r.side_of(*b) == from && r.side_of(*a) == to {
                ((*b, ba), (*a, aa))
            } else {
                continue;
            };
            let (Some(xe), Some(ye)) = (&n.bindings[x], &n.bindings[y]) else { continue };
            if let Some(v) = self.host.attr(xe, xa) {
                sets.push((ye.clone(), ya.clone(), v.clone()));
            }
        }
        if sets.is_empty() {
            return false;
        }
        let (id, name) = (n.id.clone(), format!("{}_{}", r.name, if from == Side::Source { "FWD" } else { "BWD" }));
        let mut touched = BTreeSet::new();
        for (e, attr, v) in sets {
            if self.host.set_attr(&e, &attr, v).is_ok() {
                touched.insert(e);
            }
        }
        if touched.is_empty() {
            return false;
        }
        self.refresh(touched);
        self.report.applied.push(Applied { fragment: "repair".into(), rule: name, replaced: vec![id.clone()], node: Some(id) });
        true
    }
}
