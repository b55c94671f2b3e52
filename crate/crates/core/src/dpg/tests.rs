use super::*;
use crate::delta::{apply_delta, Delta};
use crate::fixtures;
use crate::precedence::parse_pg;

pub(crate) struct Running {
    pub tgg: Tgg,
    pub ops: OpRules,
    pub host: TripleGraph,
    pub log: ChangeLog,
    pub pg: PrecedenceGraph,
}

impl Running {
    pub fn env(&self) -> Env<'_> {
        Env { tgg: &self.tgg, ops: &self.ops, host: &self.host, log: &self.log }
    }
}

pub(crate) fn running() -> Running {
    let tgg = fixtures::grammar();
    let ops = OpRules::new(&tgg).unwrap();
    let mut host = fixtures::model();
    let pg = parse_pg(&tgg, &host, None).unwrap();
    let log = apply_delta(&mut host, &Delta::from_json(fixtures::DELTA_SRC).unwrap(), &Delta::from_json(fixtures::DELTA_TRG).unwrap()).unwrap();
    Running { tgg, ops, host, log, pg }
}

fn anns(d: &Dpg) -> Vec<String> {
    d.sorted()
        .into_iter()
        .map(|i| &d.nodes[i])
        .filter(|n| !n.src.is_empty() || !n.trg.is_empty())
        .map(|n| format!("{} ({}|{})", n.id, n.src, n.trg))
        .collect()
}

#[test]
fn running_base_annotations() {
    let r = running();
    let d = Dpg::annotate(r.env(), &r.pg);
    let base: Vec<String> = anns(&d).into_iter().filter(|s| !s.contains('\'')).collect();
    assert_eq!(base, ["CD2 (n|{})", "FE7 (/|/)", "ME6 (-|{})", "ME8 (#|#)", "P10 (/|{})", "P9 (-|{})"]);
}

#[test]
fn running_unpropagated_and_candidates() {
    let r = running();
    let d = Dpg::annotate(r.env(), &r.pg);
    for e in ["C3", "C3-subClass-C2", "F4", "E4", "E6-link-GE12", "C2", "D2", "F7", "E7", "E6", "P10"] {
        assert!(d.is_unpropagated(e), "{e}");
    }
    for e in ["M8", "E8", "C1", "D1", "E5"] {
        assert!(!d.is_unpropagated(e), "{e}");
    }
    let c = anns(&d).into_iter().filter(|s| s.contains('\'')).collect::<Vec<_>>();
    for want in ["CD3' (+|u)", "FE4' (+|u)", "FE7' (*|u)", "FE7'' (u|*)", "ICD2' (*|u)", "P10' (*|u)", "FE4'' (u|+)", "GL6'' (u|+)", "CD2'' (u|*)"] {
        assert!(c.iter().any(|s| s == want), "missing {want} in {c:?}");
    }
    // every unpropagated element on a side is claimed by a candidate unless it is a corr
    for e in d.unpropagated() {
        if r.host.get(e).unwrap().side() != Side::Corr {
            assert!(d.creators_of(e).iter().any(|i| d.nodes[*i].is_candidate()), "{e} unclaimed");
        }
    }
}

#[test]
fn dependencies_reach_candidates() {
    let r = running();
    let d = Dpg::annotate(r.env(), &r.pg);
    let me6 = d.index_of("ME6").unwrap();
    let scope: BTreeSet<&str> = d.dependent_closure(&r.tgg, me6).into_iter().map(|i| d.nodes[i].id.as_str()).collect();
    assert_eq!(scope, BTreeSet::from(["ME6", "P9", "P10", "GL6''"]));
}

#[test]
fn empty_deltas_embed_pg() {
    let tgg = fixtures::grammar();
    let ops = OpRules::new(&tgg).unwrap();
    let host = fixtures::model();
    let pg = parse_pg(&tgg, &host, None).unwrap();
    let log = ChangeLog::default();
    let d = Dpg::annotate(Env { tgg: &tgg, ops: &ops, host: &host, log: &log }, &pg);
    assert!(anns(&d).is_empty());
    assert_eq!(d.base_pg(), pg);
    assert!(d.unpropagated().is_empty());
}

#[test]
fn incremental_equals_full() {
    let r = running();
    let inc = Dpg::annotate(r.env(), &r.pg);
    let mut full = Dpg::from_pg(&r.tgg, &r.pg);
    let mut all: BTreeSet<ElemId> = r.host.ids().cloned().collect();
    all.extend(r.log.deleted.keys().cloned());
    full.refresh(r.env(), all);
    assert_eq!(inc.to_json(&r.tgg), full.to_json(&r.tgg));
}
