//! Triple graph grammars: rule representation, text format, derivation and
//! a brute-force membership oracle.

mod derive;
mod oracle;
mod parse;
mod print;

use crate::error::{Error, Result};
use crate::graph::{Side, TypeTriple};
use crate::pattern::{PKind, Pattern};

pub use derive::{derive, derive_random, Application, Derivation, RandomValues, Selector};
pub use oracle::{member_bruteforce, Membership};
pub use parse::parse_grammar;
pub use print::{print_grammar, print_rule};

/// A non-deleting triple rule. `pattern` is the right-hand side; `create[i]`
/// marks the elements outside the left-hand side.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct TggRule {
    pub name: String,
    pub pattern: Pattern,
    pub create: Vec<bool>,
}

impl TggRule {
    pub fn created(&self) -> impl Iterator<Item = usize> + '_ {
        self.create.iter().enumerate().filter(|(_, c)| **c).map(|(i, _)| i)
    }

    pub fn context(&self) -> impl Iterator<Item = usize> + '_ {
        self.create.iter().enumerate().filter(|(_, c)| !**c).map(|(i, _)| i)
    }

    pub fn side_of(&self, i: usize) -> Side {
        self.pattern.elems[i].side()
    }

    pub fn created_on(&self, side: Side) -> impl Iterator<Item = usize> + '_ {
        self.created().filter(move |i| self.side_of(*i) == side)
    }

    /// Checks L ⊆ R: no context element references a created one.
    pub fn check(&self, types: &TypeTriple) -> Result<()> {
        let err = |msg: String| Error::Type { rule: self.name.clone(), msg };
        let p = &self.pattern;
        if self.create.len() != p.elems.len() {
            return Err(err("create mask length mismatch".into()));
        }
        for (i, e) in p.elems.iter().enumerate() {
            match &e.kind {
                PKind::Node { side, ty } => match types.node_type(ty) {
                    Some(t) if t.side == *side => {}
                    _ => return Err(err(format!("`{}`: unknown {side} node type `{ty}`", e.name))),
                },
                PKind::Edge { side, ty, from, to } => {
                    let Some(t) = types.edge_type(*side, ty) else {
                        return Err(err(format!("`{}`: unknown {side} edge type `{ty}`", e.name)));
                    };
                    for (end, want) in [(*from, &t.from), (*to, &t.to)] {
                        match &p.elems[end].kind {
                            PKind::Node { side: s, ty: nt } if s == side && types.is_subtype(nt, want) => {}
                            _ => return Err(err(format!("`{}`: endpoint `{}` is not a {want}", e.name, p.elems[end].name))),
                        }
                    }
                }
                PKind::Corr { ty, src, trg } => {
                    let Some(t) = types.corr_type(ty) else {
                        return Err(err(format!("`{}`: unknown corr type `{ty}`", e.name)));
                    };
                    for (end, want, side) in [(*src, &t.src, Side::Source), (*trg, &t.trg, Side::Target)] {
                        match &p.elems[end].kind {
                            PKind::Node { side: s, ty: nt } if *s == side && types.is_subtype(nt, want) => {}
                            _ => return Err(err(format!("`{}`: reference `{}` is not a {want}", e.name, p.elems[end].name))),
                        }
                    }
                }
            }
            if !self.create[i] && e.refs().iter().any(|r| self.create[*r]) {
                return Err(err(format!("context element `{}` references a created element", e.name)));
            }
        }
        for c in &p.conds {
            for o in [&c.lhs, &c.rhs] {
                if let crate::pattern::Operand::Slot { elem, attr } = o {
                    let e = &p.elems[*elem];
                    let PKind::Node { ty, .. } = &e.kind else {
                        return Err(err(format!("attribute condition on non-node `{}`", e.name)));
                    };
                    if !types.attrs_of(ty).contains_key(attr) {
                        return Err(err(format!("`{}` has no attribute `{attr}`", e.name)));
                    }
                }
            }
        }
        Ok(())
    }
}

/// A declared short-cut: replace an application of `replaced` by one of
/// `replacing`, preserving the `overlap` pairs (replaced name, replacing name).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ShortcutDecl {
    pub name: String,
    pub replaced: String,
    pub replacing: String,
    pub overlap: Vec<(String, String)>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Tgg {
    pub types: TypeTriple,
    pub rules: Vec<TggRule>,
    pub shortcuts: Vec<ShortcutDecl>,
}

impl Tgg {
    pub fn rule(&self, name: &str) -> Option<&TggRule> {
        self.rules.iter().find(|r| r.name == name)
    }

    pub fn rule_index(&self, name: &str) -> Option<usize> {
        self.rules.iter().position(|r| r.name == name)
    }

    /// The same grammar without the named rule (shortcuts over it dropped).
    pub fn without_rule(&self, name: &str) -> Tgg {
        Tgg {
            types: self.types.clone(),
            rules: self.rules.iter().filter(|r| r.name != name).cloned().collect(),
            shortcuts: self.shortcuts.iter().filter(|s| s.replaced != name && s.replacing != name).cloned().collect(),
        }
    }
}
