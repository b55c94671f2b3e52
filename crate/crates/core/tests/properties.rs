//! Randomized invariants over small derived graphs and generated scenarios.

use std::collections::BTreeSet;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tggsync::conflict::detect_all;
use tggsync::delta::{apply_delta, undo_op};
use tggsync::dpg::Dpg;
use tggsync::fixtures;
use tggsync::grammar::{derive_random, member_bruteforce, Tgg};
use tggsync::graph::{validate, ElemId, Element, Side, TripleGraph, TypeTriple, Value};
use tggsync::operational::OpRules;
use tggsync::pattern::{find_matches, PElem, PKind, Pattern};
use tggsync::precedence::{parse_pg, topo_order, verify_pg};
use tggsync::restore::SyncState;
use tggsync::rewrite::{self, Defaults, Role};
use tggsync::scenario::{gen_scenario, Scenario};

/// A derived graph of at most `max` elements, optionally perturbed.
fn small_host(tgg: &Tgg, steps: usize, seed: u64, perturb: bool, max: usize) -> TripleGraph {
    let mut k = steps;
    let mut h = derive_random(tgg, k, seed).unwrap().graph;
    while h.len() > max && k > 0 {
        k -= 1;
        h = derive_random(tgg, k, seed).unwrap().graph;
    }
    if perturb {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xbeef);
        let ids: Vec<Element> = h.elements().cloned().collect();
        if let Some(e) = ids.get(rng.gen_range(0..ids.len().max(1))) {
            match e {
                Element::Node(n) if n.attrs.contains_key("name") && rng.gen_bool(0.5) => {
                    let _ = h.set_attr(&n.id, "name", Value::from("other"));
                }
                Element::Node(_) => {}
                _ => {
                    let _ = h.remove(e.id().as_str());
                }
            }
        }
    }
    h
}

fn fits(h: &TripleGraph, types: &TypeTriple, p: &PElem, cand: &Element, b: &[Option<ElemId>]) -> bool {
    let at = |i: usize| b[i].as_ref();
    match (&p.kind, cand) {
        (PKind::Node { side, ty }, Element::Node(n)) => n.side == *side && types.is_subtype(&n.ty, ty),
        (PKind::Edge { side, ty, from, to }, Element::Edge(e)) => {
            e.side == *side && e.ty == *ty && at(*from).is_none_or(|x| *x == e.from) && at(*to).is_none_or(|x| *x == e.to)
        }
        (PKind::Corr { ty, src, trg }, Element::Corr(c)) => {
            let live = |r: &Option<ElemId>| r.clone().filter(|id| h.node(id).is_some());
            c.ty == *ty && live(&c.src).is_some_and(|s| at(*src).is_none_or(|x| *x == s)) && live(&c.trg).is_some_and(|t| at(*trg).is_none_or(|x| *x == t))
        }
        _ => false,
    }
}

/// Whether every reference among assigned elements is consistent.
fn consistent(h: &TripleGraph, types: &TypeTriple, elems: &[PElem], b: &[Option<ElemId>]) -> bool {
    elems.iter().enumerate().all(|(i, p)| match &b[i] {
        Some(id) => fits(h, types, p, h.get(id).unwrap(), b),
        None => true,
    })
}

/// Every injective assignment of `elems` into the host extending `b`, in
/// index order, checking references once both ends are assigned.
fn assignments(h: &TripleGraph, types: &TypeTriple, elems: &[PElem], b: &mut Vec<Option<ElemId>>, i: usize, out: &mut Vec<Vec<ElemId>>) {
    if i == elems.len() {
        out.push(b.iter().map(|x| x.clone().unwrap()).collect());
        return;
    }
    if b[i].is_some() {
        return assignments(h, types, elems, b, i + 1, out);
    }
    for id in h.ids() {
        if b.iter().any(|x| x.as_ref() == Some(id)) {
            continue;
        }
        b[i] = Some(id.clone());
        if consistent(h, types, elems, b) {
            assignments(h, types, elems, b, i + 1, out);
        }
        b[i] = None;
    }
}

fn brute_matches(h: &TripleGraph, types: &TypeTriple, pat: &Pattern) -> BTreeSet<Vec<ElemId>> {
    let mut all = Vec::new();
    assignments(h, types, &pat.elems, &mut vec![None; pat.len()], 0, &mut all);
    all.into_iter()
        .filter(|m| {
            let b: Vec<Option<ElemId>> = m.iter().cloned().map(Some).collect();
            pat.conds.iter().all(|c| c.holds(h, &b))
        })
        .filter(|m| {
            !pat.nacs.iter().any(|nac| {
                let mut elems = pat.elems.clone();
                elems.extend(nac.elems.iter().cloned());
                let mut b: Vec<Option<ElemId>> = m.iter().cloned().map(Some).collect();
                b.resize(elems.len(), None);
                let mut ext = Vec::new();
                assignments(h, types, &elems, &mut b, 0, &mut ext);
                !ext.is_empty()
            })
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, ..ProptestConfig::default() })]

    #[test]
    fn matching_equals_bruteforce(steps in 1usize..5, seed in any::<u64>(), perturb in any::<bool>()) {
        let tgg = fixtures::grammar();
        let ops = OpRules::new(&tgg).unwrap();
        let h = small_host(&tgg, steps, seed, perturb, 12);
        let pats = tgg.rules.iter().map(|r| &r.pattern).chain(ops.fwd.iter().chain(&ops.bwd).map(|o| &o.pattern));
        for pat in pats {
            let got = find_matches(pat, &h, &tgg.types, &[]).unwrap();
            let again = find_matches(pat, &h, &tgg.types, &[]).unwrap();
            prop_assert_eq!(&got, &again);
            let set: BTreeSet<Vec<ElemId>> = got.iter().map(|m| m.bindings.clone()).collect();
            prop_assert_eq!(set.len(), got.len());
            prop_assert_eq!(set, brute_matches(&h, &tgg.types, pat));
        }
    }

    #[test]
    fn rule_application_only_adds(steps in 0usize..6, seed in any::<u64>(), pick in any::<prop::sample::Index>()) {
        let tgg = fixtures::grammar();
        let mut h = derive_random(&tgg, steps, seed).unwrap().graph;
        let before_ids: BTreeSet<ElemId> = h.ids().cloned().collect();
        let before_diags = validate(&h, &tgg.types).len();
        let r = &tgg.rules[pick.index(tgg.rules.len())];
        let keep: Vec<bool> = r.create.iter().map(|c| !c).collect();
        let (ctx, map) = r.pattern.restrict(&keep);
        let Some(m) = find_matches(&ctx, &h, &tgg.types, &[]).unwrap().into_iter().next() else { return Ok(()) };
        let lhs: Vec<Option<ElemId>> = map.iter().map(|p| p.map(|p| m.bindings[p].clone())).collect();
        let roles: Vec<Role> = r.create.iter().map(|c| if *c { Role::Create } else { Role::Preserve }).collect();
        let mut fresh = |g: &mut TripleGraph, _| g.fresh_id("n");
        let Ok(_) = rewrite::apply(&mut h, &tgg.types, &r.pattern, &roles, &lhs, &mut fresh, &mut Defaults) else { return Ok(()) };
        let after: BTreeSet<ElemId> = h.ids().cloned().collect();
        prop_assert!(after.is_superset(&before_ids));
        prop_assert_eq!(after.len() - before_ids.len(), r.created().count());
        prop_assert!(validate(&h, &tgg.types).len() <= before_diags);
    }

    #[test]
    fn parsed_graphs_verify_and_are_acyclic(steps in 1usize..5, seed in any::<u64>(), perturb in any::<bool>()) {
        let tgg = fixtures::grammar();
        let h = small_host(&tgg, steps, seed, perturb, 12);
        let parsed = parse_pg(&tgg, &h, None);
        let oracle = member_bruteforce(&tgg, &h, 5_000_000).unwrap();
        prop_assert_eq!(parsed.is_ok(), oracle.member);
        if let Ok(pg) = parsed {
            prop_assert!(verify_pg(&tgg, &h, &pg).is_empty());
            prop_assert!(topo_order(pg.nodes.len(), &pg.edges(&tgg)).is_some());
        }
    }

    #[test]
    fn removing_a_rule_never_adds_members(steps in 1usize..4, seed in any::<u64>(), perturb in any::<bool>(), pick in any::<prop::sample::Index>()) {
        let tgg = fixtures::grammar();
        let h = small_host(&tgg, steps, seed, perturb, 10);
        let smaller = tgg.without_rule(&tgg.rules[pick.index(tgg.rules.len())].name.clone());
        let full = member_bruteforce(&tgg, &h, 5_000_000).unwrap().member;
        let less = member_bruteforce(&smaller, &h, 5_000_000).unwrap().member;
        prop_assert!(!less || full);
    }
}

fn scenario(seed: u64, ratio: f64, derived: bool) -> Scenario {
    if derived {
        Scenario::derived(80, 4, ratio, seed)
    } else {
        Scenario::structured(300, 8, ratio, seed)
    }
}

/// Generated scenario, skipping derived bases too small for the changes.
fn generate(tgg: &Tgg, s: &Scenario) -> Option<tggsync::scenario::Generated> {
    match gen_scenario(tgg, s) {
        Ok(g) => Some(g),
        Err(tggsync::Error::Format(m)) if m.contains("too small") => None,
        Err(e) => panic!("{s:?}: {e}"),
    }
}

fn ratio() -> impl Strategy<Value = f64> {
    prop::sample::select(vec![0.0, 0.25, 0.5, 0.75, 1.0])
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 16, ..ProptestConfig::default() })]

    #[test]
    fn generation_is_reproducible_and_counts_match(seed in any::<u64>(), ratio in ratio(), derived in any::<bool>()) {
        let tgg = fixtures::grammar();
        let s = scenario(seed, ratio, derived);
        let Some(a) = generate(&tgg, &s) else { return Ok(()) };
        let b = gen_scenario(&tgg, &s).unwrap();
        prop_assert_eq!(a.host.to_json(), b.host.to_json());
        prop_assert_eq!(a.ds.to_json(), b.ds.to_json());
        prop_assert_eq!(a.dt.to_json(), b.dt.to_json());
        let ops = OpRules::new(&tgg).unwrap();
        let st = SyncState::new(&tgg, &ops, a.host.clone(), &a.pg, &a.ds, &a.dt).unwrap();
        prop_assert_eq!(detect_all(st.env(), &st.dpg).len(), s.conflicts());
        prop_assert_eq!(a.conflicts(), s.conflicts());
    }

    #[test]
    fn undoing_deltas_restores_the_model(seed in any::<u64>(), ratio in ratio(), derived in any::<bool>()) {
        let tgg = fixtures::grammar();
        let Some(g) = generate(&tgg, &scenario(seed, ratio, derived)) else { return Ok(()) };
        let mut h = g.host.clone();
        let log = apply_delta(&mut h, &g.ds, &g.dt).unwrap();
        for a in log.applied.iter().rev() {
            undo_op(&mut h, a).unwrap();
        }
        prop_assert_eq!(h.to_json(), g.host.to_json());
    }

    #[test]
    fn empty_deltas_embed_the_graph(seed in any::<u64>(), derived in any::<bool>()) {
        let tgg = fixtures::grammar();
        let Some(g) = generate(&tgg, &scenario(seed, 0.0, derived)) else { return Ok(()) };
        let ops = OpRules::new(&tgg).unwrap();
        let empty = |side| tggsync::delta::Delta::empty(side);
        let st = SyncState::new(&tgg, &ops, g.host.clone(), &g.pg, &empty(Side::Source), &empty(Side::Target)).unwrap();
        prop_assert!(st.dpg.flagged().is_empty());
        prop_assert!(st.dpg.candidates().is_empty());
        prop_assert!(st.dpg.unpropagated().is_empty());
        prop_assert_eq!(st.dpg.base_pg(), Dpg::from_pg(&tgg, &g.pg).base_pg());
    }

    #[test]
    fn fragments_are_idempotent(seed in any::<u64>(), ratio in ratio(), derived in any::<bool>(), which in 0usize..4) {
        let tgg = fixtures::grammar();
        let Some(g) = generate(&tgg, &scenario(seed, ratio, derived)) else { return Ok(()) };
        let ops = OpRules::new(&tgg).unwrap();
        let mut st = SyncState::new(&tgg, &ops, g.host.clone(), &g.pg, &g.ds, &g.dt).unwrap();
        let scope = st.free_scope();
        let step = |st: &mut SyncState<'_>| match which {
            0 => st.local_cc(&scope),
            1 => st.translate(&scope),
            2 => st.repair(&scope),
            _ => st.rollback(&scope),
        };
        step(&mut st);
        let once = (st.result().to_json(), st.dpg.to_json(&tgg));
        step(&mut st);
        prop_assert_eq!(once, (st.result().to_json(), st.dpg.to_json(&tgg)));
    }

    #[test]
    fn propagation_without_conflicts_clears_annotations(seed in any::<u64>(), derived in any::<bool>()) {
        let tgg = fixtures::grammar();
        let Some(g) = generate(&tgg, &scenario(seed, 0.0, derived)) else { return Ok(()) };
        let ops = OpRules::new(&tgg).unwrap();
        let mut st = SyncState::new(&tgg, &ops, g.host.clone(), &g.pg, &g.ds, &g.dt).unwrap();
        prop_assert!(st.pending().is_empty());
        let scope = st.free_scope();
        st.local_cc(&scope);
        st.propagate(&scope);
        prop_assert!(st.dpg.flagged().is_empty(), "flagged: {:?}", st.dpg.flagged());
        prop_assert!(st.dpg.unpropagated().is_empty(), "unpropagated: {:?}", st.dpg.unpropagated());
        prop_assert!(verify_pg(&tgg, st.result(), &st.dpg.base_pg()).is_empty());
        prop_assert!(g.missing_benign(st.result()).is_empty());
    }
}
