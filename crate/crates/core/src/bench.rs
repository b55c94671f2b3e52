//! Timing harness over generated scenarios.
//!
//! Initialization is the time to parse the base model into a precedence
//! graph from scratch; there is no incremental matcher whose warm-up could
//! be measured instead, so these numbers are not comparable one to one with
//! tools that keep matches between runs.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grammar::Tgg;
use crate::operational::OpRules;
use crate::precedence::parse_pg;
use crate::restore::{Orchestration, SyncState};
use crate::scenario::{base_model, inject, Generated, Scenario};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub scenario: String,
    pub size: usize,
    pub changes: usize,
    pub ratio: f64,
    /// repetition index, or the repetition count for averaged rows
    pub run: usize,
    pub init_ms: f64,
    pub detect_ms: f64,
    pub resolve_ms: f64,
}

fn ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

/// One timed repetition on a fresh copy of `g`.
pub fn measure(tgg: &Tgg, ops: &OpRules, g: &Generated, orch: &Orchestration, parse: bool) -> Result<(f64, f64, f64)> {
    let host = g.host.clone();
    let t = Instant::now();
    let pg = if parse { parse_pg(tgg, &host, None)? } else { g.pg.clone() };
    let init = if parse { ms(t) } else { f64::NAN };
    let t = Instant::now();
    let mut st = SyncState::new(tgg, ops, host, &pg, &g.ds, &g.dt)?;
    let detect = ms(t);
    let t = Instant::now();
    st.run(orch)?;
    Ok((init, detect, ms(t)))
}

/// A sweep: each point is generated once per distinct base model and
/// measured `reps` times.
pub struct Sweep {
    pub name: String,
    pub points: Vec<Scenario>,
    pub reps: usize,
    /// time parsing as initialization; otherwise the construction graph is
    /// reused and `init_ms` is NaN
    pub parse: bool,
}

/// Runs a sweep, returning one row per repetition.
pub fn run_sweep(tgg: &Tgg, orch: &Orchestration, sw: &Sweep) -> Result<Vec<Row>> {
    let ops = OpRules::new(tgg)?;
    let mut rows = Vec::new();
    let mut cached: Option<(Scenario, crate::graph::TripleGraph, crate::precedence::PrecedenceGraph)> = None;
    for s in &sw.points {
        let same_base = cached.as_ref().is_some_and(|(c, _, _)| c.base == s.base && c.size == s.size && c.seed == s.seed);
        if !same_base {
            let (h, pg) = base_model(tgg, s)?;
            cached = Some((s.clone(), h, pg));
        }
        let (_, h, pg) = cached.as_ref().expect("cached base");
        let g = inject(h.clone(), pg.clone(), s)?;
        for run in 0..sw.reps {
            let (init_ms, detect_ms, resolve_ms) = measure(tgg, &ops, &g, orch, sw.parse)?;
            rows.push(Row { scenario: sw.name.clone(), size: s.size, changes: s.changes, ratio: s.ratio, run, init_ms, detect_ms, resolve_ms });
        }
    }
    Ok(rows)
}

/// Means per (scenario, size, changes, ratio), in first-seen order.
pub fn average(rows: &[Row]) -> Vec<Row> {
    let mut out: Vec<(Row, usize)> = Vec::new();
    for r in rows {
        let key = |x: &Row| (x.scenario.clone(), x.size, x.changes, x.ratio.to_bits());
        match out.iter_mut().find(|(a, _)| key(a) == key(r)) {
            Some((a, n)) => {
                a.init_ms += r.init_ms;
                a.detect_ms += r.detect_ms;
                a.resolve_ms += r.resolve_ms;
                *n += 1;
            }
            None => out.push((r.clone(), 1)),
        }
    }
    out.into_iter()
        .map(|(mut a, n)| {
            let k = n as f64;
            a.init_ms /= k;
            a.detect_ms /= k;
            a.resolve_ms /= k;
            a.run = n;
            a
        })
        .collect()
}

pub fn to_csv(rows: &[Row]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| Error::Format(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Format(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Format(e.to_string()))
}

/// Least-squares line through the points: (slope, intercept, r squared).
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (slope, my - slope * mx, r2)
}

/// Sizes 5k to 50k with a fixed number of conflicts.
pub fn fixed_conflicts(conflicts: usize, reps: usize, seed: u64) -> Sweep {
    let points = [5_000, 10_000, 20_000, 30_000, 40_000, 50_000].into_iter().map(|n| Scenario::structured(n, conflicts, 1.0, seed)).collect();
    Sweep { name: "fixed-conflicts".into(), points, reps, parse: true }
}

/// A fixed model with growing change counts at each conflict ratio.
pub fn fixed_model(size: usize, changes: &[usize], ratios: &[f64], reps: usize, seed: u64) -> Sweep {
    let points = ratios.iter().flat_map(|r| changes.iter().map(move |c| Scenario::structured(size, *c, *r, seed))).collect();
    Sweep { name: "fixed-model".into(), points, reps, parse: false }
}
