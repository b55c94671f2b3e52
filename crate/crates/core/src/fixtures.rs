//! The bundled running example: class diagrams synchronized with
//! documentation.

use crate::grammar::{parse_grammar, Tgg};
use crate::graph::TripleGraph;

pub const GRAMMAR: &str = include_str!("../fixtures/running.tgg");
pub const MODEL: &str = include_str!("../fixtures/running_model.json");
pub const DELTA_SRC: &str = include_str!("../fixtures/running_delta_src.json");
pub const DELTA_TRG: &str = include_str!("../fixtures/running_delta_trg.json");
pub const ORCHESTRATION: &str = include_str!("../fixtures/running_orchestration.json");

pub fn grammar() -> Tgg {
    parse_grammar(GRAMMAR).expect("bundled grammar parses")
}

pub fn model() -> TripleGraph {
    TripleGraph::from_json(MODEL).expect("bundled model loads")
}
