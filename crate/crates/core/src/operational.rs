//! Operationalized rules derived from a grammar: forward, backward,
//! consistency-check, side patterns, short-cuts and their repair rules.

use std::collections::BTreeSet;
use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grammar::{ShortcutDecl, Tgg, TggRule};
use crate::graph::{Side, TypeTriple};
use crate::pattern::{AttrCond, Nac, Operand, PElem, PKind, Pattern};
use crate::rewrite::Role;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING-KEBAB-CASE")]
pub enum OpKind {
    Fwd,
    Bwd,
    Cc,
    SrcPattern,
    TrgPattern,
    ShortCut,
    RepairFwd,
    RepairBwd,
    ScCc,
}

impl OpKind {
    fn suffix(self) -> &'static str {
        match self {
            OpKind::Fwd | OpKind::RepairFwd => "FWD",
            OpKind::Bwd | OpKind::RepairBwd => "BWD",
            OpKind::Cc | OpKind::ScCc => "CC",
            OpKind::SrcPattern => "SRC",
            OpKind::TrgPattern => "TRG",
            OpKind::ShortCut => "",
        }
    }
}

/// Marking requirement of one element.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Mark {
    None,
    /// must be untranslated; the application marks it translated
    Translates,
    /// must already be translated
    RequiresTranslated,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OperationalRule {
    pub kind: OpKind,
    pub name: String,
    pub base: Vec<String>,
    pub pattern: Pattern,
    pub roles: Vec<Role>,
    pub marks: Vec<Mark>,
    /// base rule element index -> pattern index (the replacing rule for short-cuts)
    pub map: Vec<Option<usize>>,
}

impl OperationalRule {
    /// Elements that must be present for a match: everything not created.
    pub fn lhs(&self) -> (Pattern, Vec<Option<usize>>) {
        let keep: Vec<bool> = self.roles.iter().map(|r| *r != Role::Create).collect();
        self.pattern.restrict(&keep)
    }

    pub fn translates(&self) -> impl Iterator<Item = usize> + '_ {
        self.marks.iter().enumerate().filter(|(_, m)| **m == Mark::Translates).map(|(i, _)| i)
    }

    pub fn with_role(&self, role: Role) -> impl Iterator<Item = usize> + '_ {
        self.roles.iter().enumerate().filter(move |(_, r)| **r == role).map(|(i, _)| i)
    }

    /// NACs constraining one side.
    pub fn side_nacs(&self, side: Side) -> Pattern {
        Pattern {
            elems: self.pattern.elems.clone(),
            conds: Vec::new(),
            nacs: self.pattern.nacs.iter().filter(|n| n.side == side).cloned().collect(),
        }
    }
}

fn op_name(base: &str, kind: OpKind) -> String {
    match kind {
        OpKind::ShortCut => base.to_string(),
        k => format!("{base}_{}", k.suffix()),
    }
}

/// Forward (`side` = source) or backward (`side` = target) rule.
pub fn directed_rule(r: &TggRule, side: Side, filter: &[Nac]) -> OperationalRule {
    let kind = if side == Side::Source { OpKind::Fwd } else { OpKind::Bwd };
    let n = r.pattern.len();
    let mut roles = vec![Role::Preserve; n];
    let mut marks = vec![Mark::None; n];
    for i in 0..n {
        let on_side = r.side_of(i) == side;
        match (r.create[i], on_side) {
            (true, true) => marks[i] = Mark::Translates,
            (true, false) => roles[i] = Role::Create,
            (false, true) => marks[i] = Mark::RequiresTranslated,
            (false, false) => {}
        }
    }
    let mut pattern = r.pattern.clone();
    pattern.nacs.extend(filter.iter().cloned());
    OperationalRule { kind, name: op_name(&r.name, kind), base: vec![r.name.clone()], pattern, roles, marks, map: (0..n).map(Some).collect() }
}

pub fn forward_rule(r: &TggRule, filter: &[Nac]) -> OperationalRule {
    directed_rule(r, Side::Source, filter)
}

pub fn backward_rule(r: &TggRule, filter: &[Nac]) -> OperationalRule {
    directed_rule(r, Side::Target, filter)
}

/// Consistency-check rule: only correspondence elements are created.
pub fn cc_rule(r: &TggRule) -> OperationalRule {
    let n = r.pattern.len();
    let mut roles = vec![Role::Preserve; n];
    let mut marks = vec![Mark::None; n];
    for i in 0..n {
        match (r.create[i], r.side_of(i)) {
            (true, Side::Corr) => roles[i] = Role::Create,
            (true, _) => marks[i] = Mark::Translates,
            (false, Side::Corr) => {}
            (false, _) => marks[i] = Mark::RequiresTranslated,
        }
    }
    OperationalRule {
        kind: OpKind::Cc,
        name: op_name(&r.name, OpKind::Cc),
        base: vec![r.name.clone()],
        pattern: r.pattern.clone(),
        roles,
        marks,
        map: (0..n).map(Some).collect(),
    }
}

/// One-side projection of the CC rule, carrying that direction's NACs.
pub fn side_pattern(r: &TggRule, side: Side, filter: &[Nac]) -> OperationalRule {
    let kind = if side == Side::Source { OpKind::SrcPattern } else { OpKind::TrgPattern };
    let keep: Vec<bool> = (0..r.pattern.len()).map(|i| r.side_of(i) == side).collect();
    let mut full = r.pattern.clone();
    full.nacs.retain(|n| n.side == side);
    full.nacs.extend(filter.iter().cloned());
    let (pattern, map) = full.restrict(&keep);
    let mut marks = vec![Mark::None; pattern.len()];
    for (i, m) in map.iter().enumerate() {
        if let Some(j) = m {
            marks[*j] = if r.create[i] { Mark::Translates } else { Mark::RequiresTranslated };
        }
    }
    let roles = vec![Role::Preserve; pattern.len()];
    OperationalRule { kind, name: op_name(&r.name, kind), base: vec![r.name.clone()], pattern, roles, marks, map }
}

pub fn side_patterns(r: &TggRule, src_filter: &[Nac], trg_filter: &[Nac]) -> (OperationalRule, OperationalRule) {
    (side_pattern(r, Side::Source, src_filter), side_pattern(r, Side::Target, trg_filter))
}

/// Filter NACs per rule for one translation direction: a translated node
/// must not carry an edge that no rule could ever translate afterwards.
pub fn filter_nacs(g: &Tgg, side: Side) -> Vec<Vec<Nac>> {
    let types = &g.types;
    g.rules.iter().map(|r| rule_filter_nacs(g, types, r, side)).collect()
}

/// Both directions: `(forward, backward)` NAC sets indexed like `g.rules`.
pub fn compute_filter_nacs(g: &Tgg) -> (Vec<Vec<Nac>>, Vec<Vec<Nac>>) {
    (filter_nacs(g, Side::Source), filter_nacs(g, Side::Target))
}

fn related(types: &TypeTriple, a: &str, b: &str) -> bool {
    types.is_subtype(a, b) || types.is_subtype(b, a)
}

fn rule_filter_nacs(g: &Tgg, types: &TypeTriple, r: &TggRule, side: Side) -> Vec<Nac> {
    let mut out = Vec::new();
    let base = r.pattern.len();
    for n in r.created_on(side) {
        let PKind::Node { ty, .. } = &r.pattern.elems[n].kind else { continue };
        for et in types.edge_types().filter(|e| e.side == side) {
            for outgoing in [true, false] {
                let (near, far) = if outgoing { (&et.from, &et.to) } else { (&et.to, &et.from) };
                if !types.is_subtype(ty, near) {
                    continue;
                }
                let creates_here = r.created().any(|i| match &r.pattern.elems[i].kind {
                    PKind::Edge { side: s, ty: t, from, to } => *s == side && *t == et.name && (if outgoing { *from } else { *to }) == n,
                    _ => false,
                });
                if creates_here {
                    continue;
                }
                let translatable_later = g.rules.iter().any(|q| {
                    q.created().any(|i| match &q.pattern.elems[i].kind {
                        PKind::Edge { side: s, ty: t, from, to } if *s == side && *t == et.name => {
                            let end = if outgoing { *from } else { *to };
                            !q.create[end] && related(types, q.pattern.elems[end].ty(), ty)
                        }
                        _ => false,
                    })
                });
                if translatable_later {
                    continue;
                }
                let other = PElem { name: format!("nac_{}", et.name), kind: PKind::Node { side, ty: far.clone() } };
                let (from, to) = if outgoing { (n, base) } else { (base, n) };
                let edge = PElem { name: format!("nac_{}_edge", et.name), kind: PKind::Edge { side, ty: et.name.clone(), from, to } };
                out.push(Nac { side, elems: vec![other, edge] });
            }
        }
    }
    out
}

/// A synthesized short-cut with index maps from both rules.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Shortcut {
    pub rule: OperationalRule,
    pub replaced: String,
    pub replacing: String,
    /// replaced-rule index -> short-cut index
    pub old: Vec<Option<usize>>,
    /// replacing-rule index -> short-cut index
    pub new: Vec<Option<usize>>,
    /// (replaced index, replacing index)
    pub overlap: Vec<(usize, usize)>,
}

impl Shortcut {
    /// Replaced-rule elements not shared with the replacing rule.
    pub fn old_only(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.old.len()).filter(|i| !self.overlap.iter().any(|(a, _)| a == i))
    }

    /// Replacing-rule elements not shared with the replaced rule.
    pub fn new_only(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.new.len()).filter(|i| !self.overlap.iter().any(|(_, b)| b == i))
    }
}

/// Builds the short-cut replacing an application of `r1` by one of `r2`.
pub fn shortcut_rule(r1: &TggRule, r2: &TggRule, overlap: &[(String, String)], name: &str) -> Result<Shortcut> {
    let ill = |m: String| Error::OverlapIllTyped(format!("{name}: {m}"));
    let mut pairs = Vec::new();
    for (a, b) in overlap {
        let i = r1.pattern.index_of(a).ok_or_else(|| ill(format!("`{a}` not in {}", r1.name)))?;
        let j = r2.pattern.index_of(b).ok_or_else(|| ill(format!("`{b}` not in {}", r2.name)))?;
        let (e1, e2) = (&r1.pattern.elems[i], &r2.pattern.elems[j]);
        let same_kind = std::mem::discriminant(&e1.kind) == std::mem::discriminant(&e2.kind);
        if !same_kind || e1.side() != e2.side() || e1.ty() != e2.ty() || r1.create[i] != r2.create[j] {
            return Err(ill(format!("`{a}` and `{b}` differ in kind, type or creation")));
        }
        if pairs.iter().any(|(x, y)| *x == i || *y == j) {
            return Err(ill(format!("`{a}` = `{b}` overlaps twice")));
        }
        pairs.push((i, j));
    }
    // references of overlapped edges/corrs must themselves be overlapped pairwise
    for (i, j) in &pairs {
        for (x, y) in r1.pattern.elems[*i].refs().into_iter().zip(r2.pattern.elems[*j].refs()) {
            if !pairs.contains(&(x, y)) {
                return Err(ill(format!("endpoints of `{}` are not overlapped", r1.pattern.elems[*i].name)));
            }
        }
    }
    let mut elems: Vec<PElem> = Vec::new();
    let mut roles = Vec::new();
    let mut new = vec![None; r2.pattern.len()];
    let mut old = vec![None; r1.pattern.len()];
    let names2: BTreeSet<&str> = r2.pattern.elems.iter().map(|e| e.name.as_str()).collect();
    // replacing rule first, in its own order, so references resolve
    for (j, e) in r2.pattern.elems.iter().enumerate() {
        new[j] = Some(elems.len());
        let shared = pairs.iter().any(|(_, b)| *b == j);
        roles.push(if r2.create[j] && !shared { Role::Create } else { Role::Preserve });
        elems.push(e.clone());
    }
    for (i, _) in r1.pattern.elems.iter().enumerate() {
        if let Some((_, j)) = pairs.iter().find(|(a, _)| *a == i) {
            old[i] = new[*j];
        }
    }
    for (i, e) in r1.pattern.elems.iter().enumerate() {
        if old[i].is_some() {
            continue;
        }
        let mut e = e.clone();
        if names2.contains(e.name.as_str()) {
            e.name = format!("{}_old", e.name);
        }
        old[i] = Some(elems.len());
        roles.push(if r1.create[i] { Role::Delete } else { Role::Preserve });
        elems.push(remap_refs(&e, &old));
    }
    let pattern = Pattern {
        elems,
        conds: r2.pattern.conds.iter().map(|c| remap_cond(c, &new)).collect(),
        nacs: Vec::new(),
    };
    let marks = vec![Mark::None; pattern.len()];
    let rule = OperationalRule {
        kind: OpKind::ShortCut,
        name: name.to_string(),
        base: vec![r1.name.clone(), r2.name.clone()],
        pattern,
        roles,
        marks,
        map: new.clone(),
    };
    Ok(Shortcut { rule, replaced: r1.name.clone(), replacing: r2.name.clone(), old, new, overlap: pairs })
}

fn remap_refs(e: &PElem, map: &[Option<usize>]) -> PElem {
    let m = |i: usize| map[i].expect("references precede");
    let kind = match &e.kind {
        PKind::Node { .. } => e.kind.clone(),
        PKind::Edge { side, ty, from, to } => PKind::Edge { side: *side, ty: ty.clone(), from: m(*from), to: m(*to) },
        PKind::Corr { ty, src, trg } => PKind::Corr { ty: ty.clone(), src: m(*src), trg: m(*trg) },
    };
    PElem { name: e.name.clone(), kind }
}

fn remap_cond(c: &AttrCond, map: &[Option<usize>]) -> AttrCond {
    let f = |o: &Operand| match o {
        Operand::Slot { elem, attr } => Operand::Slot { elem: map[*elem].unwrap(), attr: attr.clone() },
        o => o.clone(),
    };
    AttrCond { lhs: f(&c.lhs), rhs: f(&c.rhs) }
}

/// Repair rules of a short-cut: the effect on one side (or both, for SC-CC)
/// has already happened and is only checked.
pub fn repair_rules(sc: &Shortcut) -> (OperationalRule, OperationalRule, OperationalRule) {
    let derive = |kind: OpKind, done: &[Side]| {
        let r = &sc.rule;
        let mut roles = r.roles.clone();
        let mut marks = vec![Mark::None; roles.len()];
        for (i, e) in r.pattern.elems.iter().enumerate() {
            if !done.contains(&e.side()) {
                continue;
            }
            match r.roles[i] {
                // already created by the user edit: matched and marked
                Role::Create => {
                    roles[i] = Role::Preserve;
                    marks[i] = Mark::Translates;
                }
                // already deleted: checked for absence, not matched
                Role::Delete => roles[i] = Role::Delete,
                Role::Preserve => marks[i] = Mark::RequiresTranslated,
            }
        }
        OperationalRule {
            kind,
            name: op_name(&r.name, kind),
            base: r.base.clone(),
            pattern: r.pattern.clone(),
            roles,
            marks,
            map: r.map.clone(),
        }
    };
    (
        derive(OpKind::RepairFwd, &[Side::Source]),
        derive(OpKind::RepairBwd, &[Side::Target]),
        derive(OpKind::ScCc, &[Side::Source, Side::Target]),
    )
}

/// All operationalized rules of a grammar, indexed like `Tgg::rules`.
#[derive(Clone, Debug)]
pub struct OpRules {
    pub fwd: Vec<OperationalRule>,
    pub bwd: Vec<OperationalRule>,
    pub cc: Vec<OperationalRule>,
    pub src: Vec<OperationalRule>,
    pub trg: Vec<OperationalRule>,
    pub shortcuts: Vec<Shortcut>,
    /// per rule: some directed NAC refers to a context element, so edges
    /// at context nodes can change the rule's annotations
    pub context_nacs: Vec<bool>,
}

impl OpRules {
    pub fn new(g: &Tgg) -> Result<OpRules> {
        let (fnacs, bnacs) = compute_filter_nacs(g);
        let mut shortcuts = Vec::new();
        for ShortcutDecl { name, replaced, replacing, overlap } in &g.shortcuts {
            let unknown = |n: &String| Error::Unknown { what: "rule", name: n.clone() };
            let r1 = g.rule(replaced).ok_or_else(|| unknown(replaced))?;
            let r2 = g.rule(replacing).ok_or_else(|| unknown(replacing))?;
            shortcuts.push(shortcut_rule(r1, r2, overlap, name)?);
        }
        let fwd: Vec<OperationalRule> = g.rules.iter().zip(&fnacs).map(|(r, n)| forward_rule(r, n)).collect();
        let bwd: Vec<OperationalRule> = g.rules.iter().zip(&bnacs).map(|(r, n)| backward_rule(r, n)).collect();
        let context_nacs = g
            .rules
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let n = r.pattern.len();
                fwd[i].pattern.nacs.iter().chain(&bwd[i].pattern.nacs).flat_map(|nac| &nac.elems).flat_map(PElem::refs).any(|x| x < n && !r.create[x])
            })
            .collect();
        Ok(OpRules {
            fwd,
            bwd,
            cc: g.rules.iter().map(cc_rule).collect(),
            src: g.rules.iter().zip(&fnacs).map(|(r, n)| side_pattern(r, Side::Source, n)).collect(),
            trg: g.rules.iter().zip(&bnacs).map(|(r, n)| side_pattern(r, Side::Target, n)).collect(),
            shortcuts,
            context_nacs,
        })
    }

    /// Directed rule for translating from `side`.
    pub fn directed(&self, side: Side, rule: usize) -> &OperationalRule {
        if side == Side::Source { &self.fwd[rule] } else { &self.bwd[rule] }
    }

    pub fn pattern(&self, side: Side, rule: usize) -> &OperationalRule {
        if side == Side::Source { &self.src[rule] } else { &self.trg[rule] }
    }
}

/// Renders an operational rule in the grammar syntax with marking
/// annotations `[mark]` (translates) and `[marked]` (requires translated).
pub fn print_op_rule(r: &OperationalRule) -> String {
    let p = &r.pattern;
    let mut s = format!("rule {} {{\n", r.name);
    let name = |j: usize| p.elems[j].name.as_str();
    for (i, e) in p.elems.iter().enumerate() {
        let role = match r.roles[i] {
            Role::Create => "++",
            Role::Delete => "--",
            Role::Preserve => "  ",
        };
        let body = match &e.kind {
            PKind::Node { ty, .. } => format!("{}: {ty}", e.name),
            PKind::Edge { ty, from, to, .. } => format!("{}: {} -{ty}-> {}", e.name, name(*from), name(*to)),
            PKind::Corr { ty, src, trg } => format!("{}: {ty}({}, {})", e.name, name(*src), name(*trg)),
        };
        let mark = match r.marks[i] {
            Mark::None => "",
            Mark::Translates => " [mark]",
            Mark::RequiresTranslated => " [marked]",
        };
        let _ = writeln!(s, "  {role}{} {body}{mark}", e.side());
    }
    for c in &p.conds {
        let op = |o: &Operand| match o {
            Operand::Slot { elem, attr } => format!("{}.{attr}", name(*elem)),
            Operand::Const(v) => format!("{v:?}"),
        };
        let _ = writeln!(s, "    eq {} == {}", op(&c.lhs), op(&c.rhs));
    }
    let base = p.elems.len();
    for nac in &p.nacs {
        let _ = writeln!(s, "    nac {} {{", nac.side);
        for e in &nac.elems {
            let nm = |j: usize| if j < base { p.elems[j].name.as_str() } else { nac.elems[j - base].name.as_str() };
            let body = match &e.kind {
                PKind::Node { ty, .. } => format!("{}: {ty}", e.name),
                PKind::Edge { ty, from, to, .. } => format!("{}: {} -{ty}-> {}", e.name, nm(*from), nm(*to)),
                PKind::Corr { ty, src, trg } => format!("{}: {ty}({}, {})", e.name, nm(*src), nm(*trg)),
            };
            let _ = writeln!(s, "      {body}");
        }
        s.push_str("    }\n");
    }
    s.push_str("}\n");
    s
}
