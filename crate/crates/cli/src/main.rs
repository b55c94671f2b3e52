//! Command-line front end: checking, annotating, detecting, synchronizing,
//! generating scenarios and timing sweeps.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use tggsync::bench::{self, Sweep};
use tggsync::delta::Delta;
use tggsync::fixtures;
use tggsync::grammar::{parse_grammar, Tgg};
use tggsync::graph::{validate, GraphDoc, TripleGraph};
use tggsync::operational::OpRules;
use tggsync::precedence::{parse_pg, verify_pg, PrecedenceGraph};
use tggsync::restore::{Orchestration, SyncState};
use tggsync::scenario::{gen_scenario, Scenario};
use tggsync::{Error, Result};

#[derive(Parser)]
#[command(name = "tggsync", version, about = "Concurrent model synchronization with triple graph grammars")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

/// Model and deltas shared by the synchronization commands.
#[derive(clap::Args)]
struct Inputs {
    grammar: PathBuf,
    model: PathBuf,
    source_delta: PathBuf,
    target_delta: PathBuf,
    /// precedence graph of the model; parsed from the model when absent
    #[arg(long)]
    pg: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Parse a model into a precedence graph and verify it
    Check {
        grammar: PathBuf,
        model: PathBuf,
        /// backtracking budget for parsing
        #[arg(long)]
        budget: Option<usize>,
    },
    /// Apply both deltas and print the annotated precedence graph
    Annotate(Inputs),
    /// Apply both deltas and print the detected conflicts
    Detect {
        #[command(flatten)]
        inputs: Inputs,
        /// print a table instead of JSON
        #[arg(long)]
        text: bool,
    },
    /// Synchronize and write m1.out, m2.out, triple.out and report.json
    Sync {
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long)]
        orch: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Generate a scenario over the bundled grammar
    Gen {
        #[arg(long)]
        size: usize,
        #[arg(long)]
        changes: usize,
        #[arg(long)]
        ratio: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = BaseArg::Structured)]
        base: BaseArg,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Time a scenario sweep and print CSV
    Bench {
        #[arg(long, value_enum, default_value_t = SweepArg::Point)]
        sweep: SweepArg,
        #[arg(long, default_value_t = 20)]
        reps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// model size of a single point or the fixed-model sweep
        #[arg(long, default_value_t = 5_000)]
        size: usize,
        /// change count of a single point, conflict count of fixed-conflicts
        #[arg(long, default_value_t = 100)]
        changes: usize,
        #[arg(long, default_value_t = 1.0)]
        ratio: f64,
        /// one row per repetition instead of means
        #[arg(long)]
        raw: bool,
        /// orchestration; the bundled one when absent
        #[arg(long)]
        orch: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum BaseArg {
    Structured,
    Derived,
}

#[derive(Clone, Copy, ValueEnum)]
enum SweepArg {
    /// one scenario
    Point,
    /// sizes 5k to 50k with a fixed number of conflicts
    FixedConflicts,
    /// a fixed model, 100 to 1000 changes at each conflict ratio
    FixedModel,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn write(dir: &Path, name: &str, text: &str) -> Result<()> {
    fs::create_dir_all(dir)?;
    let p = dir.join(name);
    fs::write(&p, text).map_err(|e| Error::Io(format!("{}: {e}", p.display())))
}

fn pretty(v: &impl serde::Serialize) -> String {
    serde_json::to_string_pretty(v).expect("serializable")
}

/// SYNC_SEED takes precedence over seed flags.
fn seed(flag: u64) -> Result<u64> {
    match std::env::var("SYNC_SEED") {
        Ok(s) => s.trim().parse().map_err(|_| Error::Format(format!("SYNC_SEED is not an unsigned integer: {s}"))),
        Err(_) => Ok(flag),
    }
}

struct Loaded {
    tgg: Tgg,
    host: TripleGraph,
    pg: PrecedenceGraph,
    ds: Delta,
    dt: Delta,
}

fn load(i: &Inputs) -> Result<Loaded> {
    let tgg = parse_grammar(&read(&i.grammar)?)?;
    let host = TripleGraph::from_json(&read(&i.model)?)?;
    let pg = match &i.pg {
        Some(p) => PrecedenceGraph::from_json(&tgg, &read(p)?)?,
        None => parse_pg(&tgg, &host, None)?,
    };
    let ds = Delta::from_json(&read(&i.source_delta)?)?;
    let dt = Delta::from_json(&read(&i.target_delta)?)?;
    Ok(Loaded { tgg, host, pg, ds, dt })
}

/// One side of a triple graph as a document of its own.
fn side_doc(h: &TripleGraph, source: bool) -> GraphDoc {
    let mut doc = h.to_doc();
    doc.corr.clear();
    if source {
        doc.target = Default::default();
    } else {
        doc.source = Default::default();
    }
    doc
}

fn run(cli: Cli) -> Result<()> {
    match cli.cmd {
        Cmd::Check { grammar, model, budget } => {
            let tgg = parse_grammar(&read(&grammar)?)?;
            let host = TripleGraph::from_json(&read(&model)?)?;
            let diagnostics = validate(&host, &tgg.types);
            let pg = parse_pg(&tgg, &host, budget)?;
            let pg_diagnostics = verify_pg(&tgg, &host, &pg);
            let ok = diagnostics.iter().all(|d| d.partial) && pg_diagnostics.is_empty();
            let pg_doc: serde_json::Value = serde_json::from_str(&pg.to_json(&tgg))?;
            println!("{}", pretty(&json!({ "ok": ok, "diagnostics": diagnostics, "pg_diagnostics": pg_diagnostics, "pg": pg_doc })));
            if !ok {
                return Err(Error::Format("model failed verification".into()));
            }
        }
        Cmd::Annotate(i) => {
            let l = load(&i)?;
            let ops = OpRules::new(&l.tgg)?;
            let st = SyncState::new(&l.tgg, &ops, l.host, &l.pg, &l.ds, &l.dt)?;
            println!("{}", st.dpg.to_json(&l.tgg));
        }
        Cmd::Detect { inputs, text } => {
            let l = load(&inputs)?;
            let ops = OpRules::new(&l.tgg)?;
            let st = SyncState::new(&l.tgg, &ops, l.host, &l.pg, &l.ds, &l.dt)?;
            if text {
                print!("{}", tggsync::conflict::render(&st.report.conflicts));
            } else {
                println!("{}", pretty(&json!({ "conflicts": st.report.conflicts })));
            }
        }
        Cmd::Sync { inputs, orch, out } => {
            let l = load(&inputs)?;
            let orch = Orchestration::from_json(&read(&orch)?)?;
            let res = tggsync::restore::run(&l.tgg, l.host, &l.pg, &l.ds, &l.dt, &orch)?;
            write(&out, "m1.out", &pretty(&side_doc(&res.host, true)))?;
            write(&out, "m2.out", &pretty(&side_doc(&res.host, false)))?;
            write(&out, "triple.out", &res.host.to_json())?;
            write(&out, "report.json", &res.report.to_json())?;
            println!("{}", pretty(&json!({ "conflicts": res.report.conflicts.len(), "resolutions": res.report.resolutions.len(), "unresolved": res.report.unresolved.len(), "out": out })));
        }
        Cmd::Gen { size, changes, ratio, seed: s, base, out } => {
            let tgg = fixtures::grammar();
            let seed = seed(s)?;
            let sc = match base {
                BaseArg::Structured => Scenario::structured(size, changes, ratio, seed),
                BaseArg::Derived => Scenario::derived(size, changes, ratio, seed),
            };
            let g = gen_scenario(&tgg, &sc)?;
            write(&out, "model.json", &g.host.to_json())?;
            write(&out, "pg.json", &g.pg.to_json(&tgg))?;
            write(&out, "delta_src.json", &g.ds.to_json())?;
            write(&out, "delta_trg.json", &g.dt.to_json())?;
            write(&out, "grammar.tgg", fixtures::GRAMMAR)?;
            write(&out, "changes.json", &pretty(&g.changes))?;
            println!("{}", pretty(&json!({ "scenario": sc, "nodes": g.host.node_count(), "conflicts": g.conflicts(), "out": out })));
        }
        Cmd::Bench { sweep, reps, seed: s, size, changes, ratio, raw, orch } => {
            let tgg = fixtures::grammar();
            let orch = Orchestration::from_json(&match orch {
                Some(p) => read(&p)?,
                None => fixtures::ORCHESTRATION.to_string(),
            })?;
            let seed = seed(s)?;
            let sw = match sweep {
                SweepArg::Point => Sweep { name: "point".into(), points: vec![Scenario::structured(size, changes, ratio, seed)], reps, parse: true },
                SweepArg::FixedConflicts => bench::fixed_conflicts(changes, reps, seed),
                SweepArg::FixedModel => bench::fixed_model(size, &[100, 400, 700, 1000], &[0.25, 0.5, 0.75, 1.0], reps, seed),
            };
            let rows = bench::run_sweep(&tgg, &orch, &sw)?;
            print!("{}", bench::to_csv(&if raw { rows } else { bench::average(&rows) })?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", json!({ "error": e.kind(), "message": e.to_string() }));
            ExitCode::FAILURE
        }
    }
}
