use std::collections::{BTreeMap, HashMap};

use super::{ShortcutDecl, Tgg, TggRule};
use crate::error::{Error, Result};
use crate::graph::{AttrKind, CorrType, EdgeType, NodeType, Side, TypeTriple, Value};
use crate::pattern::{AttrCond, Nac, Operand, PElem, PKind, Pattern};

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    Str(String),
    Int(i64),
    Sym(&'static str),
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

const SYMS: [&str; 14] = ["<->", "++", "->", "==", "{", "}", "(", ")", ";", ",", ":", "-", ".", "="];

fn lex(text: &str) -> Result<Vec<Token>> {
    let mut out = Vec::new();
    let chars: Vec<char> = text.chars().collect();
    let (mut i, mut line, mut col) = (0, 1, 1);
    while i < chars.len() {
        let c = chars[i];
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '#' || (c == '/' && chars.get(i + 1) == Some(&'/')) {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let (l0, c0) = (line, col);
        if c.is_alphabetic() || c == '_' {
            let s: String = chars[i..].iter().take_while(|c| c.is_alphanumeric() || **c == '_').collect();
            i += s.chars().count();
            col += s.chars().count();
            out.push(Token { tok: Tok::Ident(s), line: l0, col: c0 });
            continue;
        }
        if c.is_ascii_digit() || (c == '-' && chars.get(i + 1).is_some_and(char::is_ascii_digit) && prev_is_eq(&out)) {
            let mut s = String::from(c);
            i += 1;
            col += 1;
            while i < chars.len() && chars[i].is_ascii_digit() {
                s.push(chars[i]);
                i += 1;
                col += 1;
            }
            let v = s.parse().map_err(|_| Error::Parse { line: l0, col: c0, msg: format!("bad integer `{s}`") })?;
            out.push(Token { tok: Tok::Int(v), line: l0, col: c0 });
            continue;
        }
        if c == '"' {
            let mut s = String::new();
            i += 1;
            col += 1;
            loop {
                match chars.get(i) {
                    None | Some('\n') => return Err(Error::Parse { line: l0, col: c0, msg: "unterminated string".into() }),
                    Some('"') => {
                        i += 1;
                        col += 1;
                        break;
                    }
                    Some('\\') if chars.get(i + 1).is_some() => {
                        s.push(chars[i + 1]);
                        i += 2;
                        col += 2;
                    }
                    Some(ch) => {
                        s.push(*ch);
                        i += 1;
                        col += 1;
                    }
                }
            }
            out.push(Token { tok: Tok::Str(s), line: l0, col: c0 });
            continue;
        }
        let rest: String = chars[i..chars.len().min(i + 3)].iter().collect();
        match SYMS.iter().find(|s| rest.starts_with(**s)) {
            Some(s) => {
                i += s.len();
                col += s.len();
                out.push(Token { tok: Tok::Sym(s), line: l0, col: c0 });
            }
            None => return Err(Error::Parse { line, col, msg: format!("unexpected character `{c}`") }),
        }
    }
    Ok(out)
}

fn prev_is_eq(out: &[Token]) -> bool {
    matches!(out.last(), Some(Token { tok: Tok::Sym("=="), .. }))
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    end: (usize, usize),
}

impl Parser {
    fn err<T>(&self, msg: impl Into<String>) -> Result<T> {
        let (line, col) = self.toks.get(self.pos).map(|t| (t.line, t.col)).unwrap_or(self.end);
        Err(Error::Parse { line, col, msg: msg.into() })
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.tok)
    }

    fn peek_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Some(Tok::Sym(x)) if *x == s)
    }

    fn peek_kw(&self, s: &str) -> bool {
        matches!(self.peek(), Some(Tok::Ident(x)) if x == s)
    }

    fn eat_sym(&mut self, s: &str) -> bool {
        if self.peek_sym(s) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn eat_kw(&mut self, s: &str) -> bool {
        if self.peek_kw(s) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn sym(&mut self, s: &str) -> Result<()> {
        if self.eat_sym(s) {
            Ok(())
        } else {
            self.err(format!("expected `{s}`"))
        }
    }

    fn ident(&mut self) -> Result<String> {
        match self.peek() {
            Some(Tok::Ident(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => self.err("expected identifier"),
        }
    }

    fn side(&mut self) -> Result<Side> {
        match self.ident()?.as_str() {
            "src" => Ok(Side::Source),
            "trg" => Ok(Side::Target),
            "corr" => Ok(Side::Corr),
            other => {
                self.pos -= 1;
                self.err(format!("expected side `src`, `trg` or `corr`, found `{other}`"))
            }
        }
    }
}

/// Parses the grammar text format into a validated [`Tgg`].
pub fn parse_grammar(text: &str) -> Result<Tgg> {
    let toks = lex(text)?;
    let end = text.lines().count().max(1);
    let mut p = Parser { toks, pos: 0, end: (end, 1) };
    let mut types = TypeTriple::new();
    let mut rules: Vec<TggRule> = Vec::new();
    let mut shortcuts = Vec::new();
    while p.peek().is_some() {
        if p.eat_kw("types") {
            parse_types(&mut p, &mut types)?;
        } else if p.eat_kw("rule") {
            let rule = parse_rule(&mut p, &types)?;
            if rules.iter().any(|r| r.name == rule.name) {
                return Err(Error::Type { rule: rule.name, msg: "duplicate rule name".into() });
            }
            rules.push(rule);
        } else if p.eat_kw("shortcut") {
            shortcuts.push(parse_shortcut(&mut p)?);
        } else {
            return p.err("expected `types`, `rule` or `shortcut`");
        }
    }
    types.check()?;
    for s in &shortcuts {
        for r in [&s.replaced, &s.replacing] {
            if !rules.iter().any(|x| &x.name == r) {
                return Err(Error::Type { rule: s.name.clone(), msg: format!("unknown rule `{r}`") });
            }
        }
    }
    Ok(Tgg { types, rules, shortcuts })
}

fn parse_types(p: &mut Parser, types: &mut TypeTriple) -> Result<()> {
    p.sym("{")?;
    while !p.eat_sym("}") {
        let side = p.side()?;
        if side == Side::Corr {
            let name = p.ident()?;
            p.sym(":")?;
            let src = p.ident()?;
            p.sym("<->")?;
            let trg = p.ident()?;
            types.add_corr_type(CorrType { name, src, trg })?;
        } else if p.eat_kw("edge") {
            let name = p.ident()?;
            p.sym(":")?;
            let from = p.ident()?;
            p.sym("->")?;
            let to = p.ident()?;
            types.add_edge_type(EdgeType { name, side, from, to })?;
        } else {
            let name = p.ident()?;
            let mut parents = Vec::new();
            if p.eat_kw("extends") {
                parents.push(p.ident()?);
                while p.eat_sym(",") {
                    parents.push(p.ident()?);
                }
            }
            let mut attrs = BTreeMap::new();
            if p.eat_sym("{") {
                while !p.eat_sym("}") {
                    let a = p.ident()?;
                    p.sym(":")?;
                    let kind = match p.ident()?.as_str() {
                        "string" => AttrKind::String,
                        "int" | "integer" => AttrKind::Integer,
                        k => {
                            p.pos -= 1;
                            return p.err(format!("unknown attribute kind `{k}`"));
                        }
                    };
                    attrs.insert(a, kind);
                    if !p.eat_sym(",") && !p.eat_sym(";") && !p.peek_sym("}") {
                        return p.err("expected `,` or `}`");
                    }
                }
            }
            types.add_node_type(NodeType { name, side, attrs, parents })?;
        }
        p.eat_sym(";");
    }
    Ok(())
}

fn parse_rule(p: &mut Parser, types: &TypeTriple) -> Result<TggRule> {
    let name = p.ident()?;
    let mut b = Builder { rule: name.clone(), types, elems: Vec::new(), names: HashMap::new() };
    let mut create = Vec::new();
    let mut conds = Vec::new();
    let mut nac_stmts = Vec::new();
    p.sym("{")?;
    while !p.eat_sym("}") {
        if p.eat_kw("eq") {
            conds.push(parse_cond(p, &b)?);
        } else if p.eat_kw("nac") {
            let side = p.side()?;
            if side == Side::Corr {
                return b.err("NACs constrain src or trg only");
            }
            let start = p.pos;
            // parsed after the rule body so NACs may mention any rule element
            skip_block(p)?;
            nac_stmts.push((side, start));
        } else {
            let created = p.eat_sym("++");
            let side = p.side()?;
            let elem = parse_elem(p, &b, side)?;
            if !created && elem.refs().iter().any(|r| create[*r]) {
                return b.err(format!("context element `{}` references a created element", elem.name));
            }
            b.push(elem)?;
            create.push(created);
        }
        p.eat_sym(";");
    }
    let base_len = b.elems.len();
    let mut nacs = Vec::new();
    for (side, start) in nac_stmts {
        let save = p.pos;
        p.pos = start;
        let mut nb = Builder { rule: name.clone(), types, elems: b.elems.clone(), names: b.names.clone() };
        p.sym("{")?;
        while !p.eat_sym("}") {
            let elem = parse_elem(p, &nb, side)?;
            nb.push(elem)?;
            p.eat_sym(";");
        }
        p.pos = save;
        nacs.push(Nac { side, elems: nb.elems.split_off(base_len) });
    }
    let rule = TggRule { name, pattern: Pattern { elems: b.elems, conds, nacs }, create };
    rule.check(types)?;
    Ok(rule)
}

fn skip_block(p: &mut Parser) -> Result<()> {
    p.sym("{")?;
    let mut depth = 1;
    while depth > 0 {
        match p.peek() {
            None => return p.err("unterminated block"),
            Some(Tok::Sym("{")) => depth += 1,
            Some(Tok::Sym("}")) => depth -= 1,
            _ => {}
        }
        p.pos += 1;
    }
    Ok(())
}

struct Builder<'t> {
    rule: String,
    types: &'t TypeTriple,
    elems: Vec<PElem>,
    names: HashMap<String, usize>,
}

impl Builder<'_> {
    fn err<T>(&self, msg: impl Into<String>) -> Result<T> {
        Err(Error::Type { rule: self.rule.clone(), msg: msg.into() })
    }

    fn lookup(&self, name: &str) -> Result<usize> {
        match self.names.get(name) {
            Some(i) => Ok(*i),
            None => self.err(format!("undeclared element `{name}`")),
        }
    }

    fn node(&self, name: &str, side: Side) -> Result<usize> {
        let i = self.lookup(name)?;
        match &self.elems[i].kind {
            PKind::Node { side: s, .. } if *s == side => Ok(i),
            _ => self.err(format!("`{name}` is not a {side} node")),
        }
    }

    fn push(&mut self, e: PElem) -> Result<()> {
        if self.names.contains_key(&e.name) {
            return self.err(format!("duplicate element `{}`", e.name));
        }
        self.names.insert(e.name.clone(), self.elems.len());
        self.elems.push(e);
        Ok(())
    }
}

fn parse_elem(p: &mut Parser, b: &Builder<'_>, side: Side) -> Result<PElem> {
    let name = p.ident()?;
    p.sym(":")?;
    if side == Side::Corr {
        let ty = p.ident()?;
        p.sym("(")?;
        let s = p.ident()?;
        p.sym(",")?;
        let t = p.ident()?;
        p.sym(")")?;
        if b.types.corr_type(&ty).is_none() {
            return b.err(format!("`{name}`: unknown corr type `{ty}`"));
        }
        let (src, trg) = (b.node(&s, Side::Source)?, b.node(&t, Side::Target)?);
        return Ok(PElem { name, kind: PKind::Corr { ty, src, trg } });
    }
    let first = p.ident()?;
    if p.eat_sym("-") {
        let ty = p.ident()?;
        p.sym("->")?;
        let to = p.ident()?;
        if b.types.edge_type(side, &ty).is_none() {
            return b.err(format!("`{name}`: unknown {side} edge type `{ty}`"));
        }
        let (from, to) = (b.node(&first, side)?, b.node(&to, side)?);
        Ok(PElem { name, kind: PKind::Edge { side, ty, from, to } })
    } else {
        match b.types.node_type(&first) {
            Some(t) if t.side == side => Ok(PElem { name, kind: PKind::Node { side, ty: first } }),
            _ => b.err(format!("`{name}`: unknown {side} node type `{first}`")),
        }
    }
}

fn parse_cond(p: &mut Parser, b: &Builder<'_>) -> Result<AttrCond> {
    let lhs = parse_operand(p, b)?;
    p.sym("==")?;
    let rhs = parse_operand(p, b)?;
    if lhs.elem().is_none() && rhs.elem().is_none() {
        return b.err("condition compares two constants");
    }
    // keep slots on the left
    Ok(if lhs.elem().is_none() { AttrCond { lhs: rhs, rhs: lhs } } else { AttrCond { lhs, rhs } })
}

fn parse_operand(p: &mut Parser, b: &Builder<'_>) -> Result<Operand> {
    match p.peek().cloned() {
        Some(Tok::Str(s)) => {
            p.pos += 1;
            Ok(Operand::Const(Value::Str(s)))
        }
        Some(Tok::Int(i)) => {
            p.pos += 1;
            Ok(Operand::Const(Value::Int(i)))
        }
        _ => {
            let n = p.ident()?;
            p.sym(".")?;
            let attr = p.ident()?;
            Ok(Operand::Slot { elem: b.lookup(&n)?, attr })
        }
    }
}

fn parse_shortcut(p: &mut Parser) -> Result<ShortcutDecl> {
    let replaced = p.ident()?;
    p.sym("->")?;
    let replacing = p.ident()?;
    let mut overlap = Vec::new();
    if p.eat_kw("overlap") {
        p.sym("{")?;
        while !p.eat_sym("}") {
            let a = p.ident()?;
            p.sym("=")?;
            let b = p.ident()?;
            overlap.push((a, b));
            if !p.eat_sym(",") && !p.peek_sym("}") {
                return p.err("expected `,` or `}`");
            }
        }
    }
    let name = if p.eat_kw("as") {
        match p.peek().cloned() {
            Some(Tok::Str(s)) | Some(Tok::Ident(s)) => {
                p.pos += 1;
                s
            }
            _ => return p.err("expected short-cut name"),
        }
    } else {
        format!("{replaced}-To-{replacing}")
    };
    p.eat_sym(";");
    Ok(ShortcutDecl { name, replaced, replacing, overlap })
}
