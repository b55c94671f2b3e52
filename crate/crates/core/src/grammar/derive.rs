use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Tgg, TggRule};
use crate::error::{Error, Result};
use crate::graph::{AttrKind, ElemId, TripleGraph, Value};
use crate::pattern::{Matcher, Pattern, PatternMatch};
use crate::rewrite::{apply, Role, ValueSource};

/// One rule application: the rule and the binding of its whole right-hand side.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Application {
    pub rule: String,
    pub bindings: Vec<ElemId>,
}

#[derive(Clone, Debug, Default)]
pub struct Derivation {
    pub graph: TripleGraph,
    pub steps: Vec<Application>,
}

/// Chooses the context match of a step.
#[derive(Clone, Debug)]
pub enum Selector {
    /// Position in the canonical match order.
    Index(usize),
    /// Context element name -> host id; the first canonical extension is used.
    Bind(Vec<(String, ElemId)>),
}

impl TggRule {
    /// The left-hand side with the old-to-new index map.
    pub fn lhs(&self) -> (Pattern, Vec<Option<usize>>) {
        let keep: Vec<bool> = self.create.iter().map(|c| !c).collect();
        self.pattern.restrict(&keep)
    }

    /// Canonically ordered context matches in `host`, lifted to RHS indices.
    pub fn context_matches(&self, tgg: &Tgg, host: &TripleGraph, seed: &[Option<ElemId>]) -> Result<Vec<Vec<Option<ElemId>>>> {
        let (lhs, map) = self.lhs();
        let mut s = vec![None; lhs.len()];
        for (i, m) in map.iter().enumerate() {
            if let (Some(j), Some(Some(id))) = (m, seed.get(i)) {
                s[*j] = Some(id.clone());
            }
        }
        let found = Matcher::new(host, &tgg.types).find_all(&lhs, &s)?;
        Ok(found.iter().map(|m| lift(m, &map)).collect())
    }

    /// Applies the rule with context binding `ctx` (indexed like the RHS).
    pub fn apply_at(
        &self,
        tgg: &Tgg,
        host: &mut TripleGraph,
        ctx: &[Option<ElemId>],
        values: &mut dyn ValueSource,
    ) -> Result<Vec<ElemId>> {
        let roles: Vec<Role> = self.create.iter().map(|c| if *c { Role::Create } else { Role::Preserve }).collect();
        let names: Vec<String> = self.pattern.elems.iter().map(|e| e.name.clone()).collect();
        apply(host, &tgg.types, &self.pattern, &roles, ctx, &mut |h, i| h.fresh_id(&names[i]), values)
    }
}

fn lift(m: &PatternMatch, map: &[Option<usize>]) -> Vec<Option<ElemId>> {
    map.iter().map(|j| j.map(|j| m.bindings[j].clone())).collect()
}

/// Replays a derivation from `start` step by step.
pub fn derive(
    tgg: &Tgg,
    start: TripleGraph,
    steps: &[(String, Selector)],
    values: &mut dyn ValueSource,
) -> Result<Derivation> {
    let mut d = Derivation { graph: start, steps: Vec::new() };
    for (k, (name, sel)) in steps.iter().enumerate() {
        let rule = tgg.rule(name).ok_or_else(|| Error::Unknown { what: "rule", name: name.clone() })?;
        let not_applicable = || Error::NotApplicable { step: k, rule: name.clone() };
        let ctx = match sel {
            Selector::Index(i) => rule.context_matches(tgg, &d.graph, &[])?.into_iter().nth(*i).ok_or_else(not_applicable)?,
            Selector::Bind(pairs) => {
                let mut seed = vec![None; rule.pattern.len()];
                for (n, id) in pairs {
                    let i = rule.pattern.index_of(n).ok_or_else(|| Error::Unknown { what: "rule element", name: n.clone() })?;
                    if rule.create[i] {
                        return Err(Error::IncompatibleSeed(format!("`{n}` is created by `{name}`")));
                    }
                    seed[i] = Some(id.clone());
                }
                rule.context_matches(tgg, &d.graph, &seed)?.into_iter().next().ok_or_else(not_applicable)?
            }
        };
        let bindings = rule.apply_at(tgg, &mut d.graph, &ctx, values)?;
        d.steps.push(Application { rule: name.clone(), bindings });
    }
    Ok(d)
}

/// Seeded values drawn from a small pool so that equalities can collide.
pub struct RandomValues {
    rng: ChaCha8Rng,
    pool: u32,
}

impl RandomValues {
    pub fn new(seed: u64, pool: u32) -> Self {
        RandomValues { rng: ChaCha8Rng::seed_from_u64(seed), pool: pool.max(1) }
    }
}

impl ValueSource for RandomValues {
    fn fresh(&mut self, kind: AttrKind) -> Value {
        let k = self.rng.gen_range(0..self.pool);
        match kind {
            AttrKind::String => Value::Str(format!("v{k}")),
            AttrKind::Integer => Value::Int(k as i64),
        }
    }
}

/// A random derivation of at most `steps` applications: each step picks a
/// rule uniformly among the applicable ones and one of its matches.
pub fn derive_random(tgg: &Tgg, steps: usize, seed: u64) -> Result<Derivation> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = RandomValues::new(seed ^ 0x5eed, 4);
    let mut d = Derivation::default();
    for _ in 0..steps {
        let mut options = Vec::new();
        for r in &tgg.rules {
            let ms = r.context_matches(tgg, &d.graph, &[])?;
            if !ms.is_empty() {
                options.push((r, ms));
            }
        }
        let Some((rule, ms)) = options.choose(&mut rng) else { break };
        let ctx = ms.choose(&mut rng).expect("non-empty");
        let bindings = rule.apply_at(tgg, &mut d.graph, ctx, &mut values)?;
        d.steps.push(Application { rule: rule.name.clone(), bindings });
    }
    Ok(d)
}
