//! Orchestration files: the fragment sequence and per-conflict plans.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::conflict::Kind;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Step {
    LocalCc,
    Translate,
    Repair,
    Rollback,
    Propagate,
    ResolveConflict,
    CleanUp,
}

impl Step {
    pub fn parse(s: &str) -> Option<Step> {
        let k = s.trim().to_ascii_lowercase().replace(['_', ' '], "-");
        Some(match k.as_str() {
            "local-cc" | "localcc" => Step::LocalCc,
            "translate" => Step::Translate,
            "repair" => Step::Repair,
            "rollback" => Step::Rollback,
            "propagate" => Step::Propagate,
            "resolve-conflict" | "resolve" => Step::ResolveConflict,
            "clean-up" | "cleanup" => Step::CleanUp,
            _ => return None,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    TakeSource,
    TakeTarget,
    Preserve,
}

impl Strategy {
    pub fn parse(s: &str) -> Option<Strategy> {
        match s.trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "take-source" => Some(Strategy::TakeSource),
            "take-target" => Some(Strategy::TakeTarget),
            "preserve" => Some(Strategy::Preserve),
            _ => None,
        }
    }
}

/// What to do with one conflict.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Plan {
    /// fragments run inside the scope before the strategy (only REPAIR is meaningful)
    pub pre: Vec<Step>,
    pub strategy: Strategy,
    /// fragments run inside the scope afterwards (TRANSLATE and/or PROPAGATE)
    pub post: Vec<Step>,
}

/// Comparison operand of an evaluator condition.
#[derive(Clone, Debug, PartialEq, Eq)]
enum Term {
    Var(String),
    Int(i64),
    Str(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
struct Cmp {
    lhs: Term,
    op: String,
    rhs: Term,
}

/// `when` predicate over conflict facts, e.g. `deletedSrc > deletedTrg`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Condition {
    text: String,
    all: Vec<Cmp>,
}

/// Numbers and the kind of a conflict, as seen by conditions.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Facts {
    pub kind: String,
    pub vars: BTreeMap<String, i64>,
}

pub const FACT_NAMES: [&str; 7] = ["deletedSrc", "deletedTrg", "addedSrc", "addedTrg", "changedSrc", "changedTrg", "scope"];

impl Condition {
    /// Parses comparisons joined by `&&` or `and`.
    pub fn parse(text: &str) -> Result<Condition> {
        let bad = |m: &str| Error::OrchInvalid(format!("condition `{text}`: {m}"));
        let mut all = Vec::new();
        for part in text.split("&&").flat_map(|p| p.split(" and ")) {
            let part = part.trim();
            let op = ["==", "!=", ">=", "<=", ">", "<"].into_iter().find(|o| part.contains(o)).ok_or_else(|| bad("no comparison"))?;
            let (l, r) = part.split_once(op).unwrap();
            let term = |s: &str| -> Result<Term> {
                let s = s.trim();
                if let Ok(i) = s.parse() {
                    return Ok(Term::Int(i));
                }
                if let Some(q) = s.strip_prefix('"').and_then(|x| x.strip_suffix('"')) {
                    return Ok(Term::Str(q.to_string()));
                }
                if s == "kind" || FACT_NAMES.contains(&s) {
                    return Ok(Term::Var(s.to_string()));
                }
                if Kind::from_key(s).is_some() {
                    return Ok(Term::Str(s.to_string()));
                }
                Err(bad(&format!("unknown term `{s}`")))
            };
            all.push(Cmp { lhs: term(l)?, op: op.to_string(), rhs: term(r)? });
        }
        Ok(Condition { text: text.to_string(), all })
    }

    pub fn eval(&self, f: &Facts) -> bool {
        #[derive(PartialEq, PartialOrd)]
        enum V {
            I(i64),
            S(String),
        }
        let val = |t: &Term| match t {
            Term::Int(i) => V::I(*i),
            Term::Str(s) => V::S(s.clone()),
            Term::Var(v) if v == "kind" => V::S(f.kind.clone()),
            Term::Var(v) => V::I(f.vars.get(v).copied().unwrap_or(0)),
        };
        self.all.iter().all(|c| {
            let (a, b) = (val(&c.lhs), val(&c.rhs));
            match c.op.as_str() {
                "==" => a == b,
                "!=" => a != b,
                ">=" => a >= b,
                "<=" => a <= b,
                ">" => a > b,
                _ => a < b,
            }
        })
    }

    pub fn text(&self) -> &str {
        &self.text
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Evaluator {
    pub when: Condition,
    pub plan: Plan,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Orchestration {
    pub steps: Vec<Step>,
    pub resolve: BTreeMap<Kind, Plan>,
    pub evaluators: Vec<Evaluator>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum OneOrMany {
    One(String),
    Many(Vec<String>),
}

impl OneOrMany {
    fn list(self) -> Vec<String> {
        match self {
            OneOrMany::One(s) => vec![s],
            OneOrMany::Many(v) => v,
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PlanDoc {
    pre: Option<OneOrMany>,
    strategy: String,
    post: Option<OneOrMany>,
    when: Option<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct OrchDoc {
    steps: Vec<String>,
    #[serde(default)]
    resolve: BTreeMap<String, PlanDoc>,
    #[serde(default)]
    evaluators: Vec<PlanDoc>,
}

fn steps(names: Vec<String>) -> Result<Vec<Step>> {
    names.iter().map(|s| Step::parse(s).ok_or_else(|| Error::OrchInvalid(format!("unknown fragment `{s}`")))).collect()
}

fn plan(d: PlanDoc) -> Result<Plan> {
    let strategy = Strategy::parse(&d.strategy).ok_or_else(|| Error::OrchInvalid(format!("unknown strategy `{}`", d.strategy)))?;
    let pre = steps(d.pre.map(OneOrMany::list).unwrap_or_default())?;
    let post = steps(d.post.map(OneOrMany::list).unwrap_or_default())?;
    if pre.iter().any(|s| *s != Step::Repair) {
        return Err(Error::OrchInvalid("only repair may run before a strategy".into()));
    }
    if post.iter().any(|s| !matches!(s, Step::Translate | Step::Propagate)) {
        return Err(Error::OrchInvalid("only translate and propagate may run after a strategy".into()));
    }
    Ok(Plan { pre, strategy, post })
}

impl Orchestration {
    pub fn from_json(text: &str) -> Result<Orchestration> {
        let doc: OrchDoc = serde_json::from_str(text).map_err(|e| Error::OrchInvalid(e.to_string()))?;
        let mut resolve = BTreeMap::new();
        for (k, p) in doc.resolve {
            let kind = Kind::from_key(&k).ok_or_else(|| Error::OrchInvalid(format!("unknown conflict kind `{k}`")))?;
            resolve.insert(kind, plan(p)?);
        }
        let mut evaluators = Vec::new();
        for mut p in doc.evaluators {
            let when = p.when.take().ok_or_else(|| Error::OrchInvalid("evaluator without `when`".into()))?;
            evaluators.push(Evaluator { when: Condition::parse(&when)?, plan: plan(p)? });
        }
        let o = Orchestration { steps: steps(doc.steps)?, resolve, evaluators };
        o.check()?;
        Ok(o)
    }

    /// Ordering constraints: local CC before any translate, clean-up last.
    pub fn check(&self) -> Result<()> {
        if let (Some(cc), Some(tr)) = (self.steps.iter().position(|s| *s == Step::LocalCc), self.steps.iter().position(|s| *s == Step::Translate)) {
            if cc > tr {
                return Err(Error::OrchInvalid("local-cc must precede translate".into()));
            }
        }
        if let Some(c) = self.steps.iter().position(|s| *s == Step::CleanUp) {
            if c + 1 != self.steps.len() {
                return Err(Error::OrchInvalid("clean-up must be the last step".into()));
            }
        }
        Ok(())
    }

    /// The plan for a conflict: the first matching evaluator, else the
    /// per-kind entry.
    pub fn plan_for(&self, kind: Kind, facts: &Facts) -> Option<&Plan> {
        self.evaluators.iter().find(|e| e.when.eval(facts)).map(|e| &e.plan).or_else(|| self.resolve.get(&kind))
    }

    pub fn has(&self, step: Step) -> bool {
        self.steps.contains(&step)
    }
}
