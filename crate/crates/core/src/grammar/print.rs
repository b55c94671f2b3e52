use std::fmt::Write;

use super::{Tgg, TggRule};
use crate::graph::{AttrKind, Value};
use crate::pattern::{Operand, PElem, PKind};

/// Renders a grammar in the text format accepted by `parse_grammar`.
pub fn print_grammar(tgg: &Tgg) -> String {
    let mut s = String::from("types {\n");
    for t in tgg.types.node_types() {
        let _ = write!(s, "  {} {}", t.side, t.name);
        if !t.parents.is_empty() {
            let _ = write!(s, " extends {}", t.parents.join(", "));
        }
        if !t.attrs.is_empty() {
            let attrs: Vec<String> = t
                .attrs
                .iter()
                .map(|(a, k)| format!("{a}: {}", if *k == AttrKind::Integer { "int" } else { "string" }))
                .collect();
            let _ = write!(s, " {{ {} }}", attrs.join(", "));
        }
        s.push('\n');
    }
    for e in tgg.types.edge_types() {
        let _ = writeln!(s, "  {} edge {}: {} -> {}", e.side, e.name, e.from, e.to);
    }
    for c in tgg.types.corr_types() {
        let _ = writeln!(s, "  corr {}: {} <-> {}", c.name, c.src, c.trg);
    }
    s.push_str("}\n");
    for r in &tgg.rules {
        s.push('\n');
        s.push_str(&print_rule(r));
    }
    if !tgg.shortcuts.is_empty() {
        s.push('\n');
    }
    for sc in &tgg.shortcuts {
        let pairs: Vec<String> = sc.overlap.iter().map(|(a, b)| format!("{a} = {b}")).collect();
        let _ = writeln!(
            s,
            "shortcut {} -> {} overlap {{ {} }} as \"{}\"",
            sc.replaced,
            sc.replacing,
            pairs.join(", "),
            escape(&sc.name)
        );
    }
    s
}

pub fn print_rule(r: &TggRule) -> String {
    let p = &r.pattern;
    let mut s = format!("rule {} {{\n", r.name);
    for (i, e) in p.elems.iter().enumerate() {
        let mark = if r.create[i] { "++" } else { "  " };
        let _ = writeln!(s, "  {mark}{}", elem_decl(e, |j| &p.elems[j].name));
    }
    for c in &p.conds {
        let _ = writeln!(s, "    eq {} == {}", operand(&c.lhs, r), operand(&c.rhs, r));
    }
    let base = p.elems.len();
    for nac in &p.nacs {
        let _ = writeln!(s, "    nac {} {{", nac.side);
        for e in &nac.elems {
            let name = |j: usize| if j < base { &p.elems[j].name } else { &nac.elems[j - base].name };
            let _ = writeln!(s, "      {}", elem_decl_bare(e, name));
        }
        s.push_str("    }\n");
    }
    s.push_str("}\n");
    s
}

fn elem_decl<'a>(e: &PElem, name: impl Fn(usize) -> &'a String) -> String {
    format!("{} {}", e.side(), elem_decl_bare(e, name))
}

fn elem_decl_bare<'a>(e: &PElem, name: impl Fn(usize) -> &'a String) -> String {
    match &e.kind {
        PKind::Node { ty, .. } => format!("{}: {ty}", e.name),
        PKind::Edge { ty, from, to, .. } => format!("{}: {} -{ty}-> {}", e.name, name(*from), name(*to)),
        PKind::Corr { ty, src, trg } => format!("{}: {ty}({}, {})", e.name, name(*src), name(*trg)),
    }
}

fn operand(o: &Operand, r: &TggRule) -> String {
    match o {
        Operand::Slot { elem, attr } => format!("{}.{attr}", r.pattern.elems[*elem].name),
        Operand::Const(Value::Int(i)) => i.to_string(),
        Operand::Const(Value::Str(v)) => format!("\"{}\"", escape(v)),
    }
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

#[cfg(test)]
mod tests {
    use super::super::parse_grammar;
    use super::*;

    const G: &str = r#"
types {
  src A { n: string, k: int }
  src B extends A
  src edge e: A -> A
  trg X { n: string }
  corr AX: A <-> X
}
rule R {
  ++src a: A
  ++trg x: X
  ++corr ax: AX(a, x)
  eq a.n == x.n
  eq a.k == 4
}
rule S {
  src a: A
  ++src b: B
  ++src ab: a -e-> b
  eq b.n == "q\"uote"
  nac src { c: A; ac: a -e-> c }
}
shortcut R -> R overlap { a = a }
"#;

    #[test]
    fn print_parse_round_trip() {
        let g = parse_grammar(G).unwrap();
        let printed = print_grammar(&g);
        let again = parse_grammar(&printed).unwrap();
        assert_eq!(g, again);
        assert_eq!(printed, print_grammar(&again));
    }
}
