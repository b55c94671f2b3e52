//! Browser demo: detect conflicts, annotate and synchronize models pasted
//! into a static page. Every export takes and returns JSON text.

use serde_json::json;
use wasm_bindgen::prelude::*;

use tggsync::delta::Delta;
use tggsync::fixtures;
use tggsync::grammar::parse_grammar;
use tggsync::graph::TripleGraph;
use tggsync::operational::OpRules;
use tggsync::precedence::parse_pg;
use tggsync::restore::{Orchestration, SyncState};
use tggsync::Result;

fn fail(e: tggsync::Error) -> JsValue {
    JsValue::from_str(&json!({ "error": e.kind(), "message": e.to_string() }).to_string())
}

/// The bundled running example as `{grammar, model, source_delta, target_delta, orchestration}`.
#[wasm_bindgen]
pub fn running_example() -> String {
    json!({
        "grammar": fixtures::GRAMMAR,
        "model": fixtures::MODEL,
        "source_delta": fixtures::DELTA_SRC,
        "target_delta": fixtures::DELTA_TRG,
        "orchestration": fixtures::ORCHESTRATION,
    })
    .to_string()
}

/// What the demo page needs from a state right after detection.
pub fn detect_json(grammar: &str, model: &str, source_delta: &str, target_delta: &str) -> Result<String> {
    let tgg = parse_grammar(grammar)?;
    let host = TripleGraph::from_json(model)?;
    let pg = parse_pg(&tgg, &host, None)?;
    let ops = OpRules::new(&tgg)?;
    let st = SyncState::new(&tgg, &ops, host, &pg, &Delta::from_json(source_delta)?, &Delta::from_json(target_delta)?)?;
    let dpg: serde_json::Value = serde_json::from_str(&st.dpg.to_json(&tgg))?;
    Ok(json!({ "conflicts": st.report.conflicts, "table": tggsync::conflict::render(&st.report.conflicts), "dpg": dpg }).to_string())
}

pub fn sync_json(grammar: &str, model: &str, source_delta: &str, target_delta: &str, orchestration: &str) -> Result<String> {
    let tgg = parse_grammar(grammar)?;
    let host = TripleGraph::from_json(model)?;
    let pg = parse_pg(&tgg, &host, None)?;
    let orch = Orchestration::from_json(orchestration)?;
    let out = tggsync::restore::run(&tgg, host, &pg, &Delta::from_json(source_delta)?, &Delta::from_json(target_delta)?, &orch)?;
    let model: serde_json::Value = serde_json::from_str(&out.host.to_json())?;
    Ok(json!({ "model": model, "report": out.report, "log": out.report.render() }).to_string())
}

/// Conflicts, their table rendering and the annotated precedence graph.
#[wasm_bindgen]
pub fn detect(grammar: &str, model: &str, source_delta: &str, target_delta: &str) -> std::result::Result<String, JsValue> {
    detect_json(grammar, model, source_delta, target_delta).map_err(fail)
}

/// The synchronized model and the report of a full run.
#[wasm_bindgen]
pub fn sync(grammar: &str, model: &str, source_delta: &str, target_delta: &str, orchestration: &str) -> std::result::Result<String, JsValue> {
    sync_json(grammar, model, source_delta, target_delta, orchestration).map_err(fail)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example() -> serde_json::Value {
        serde_json::from_str(&running_example()).unwrap()
    }

    #[test]
    fn detect_finds_the_three_conflicts() {
        let e = example();
        let s = |k: &str| e[k].as_str().unwrap().to_string();
        let out: serde_json::Value = serde_json::from_str(&detect_json(&s("grammar"), &s("model"), &s("source_delta"), &s("target_delta")).unwrap()).unwrap();
        assert_eq!(out["conflicts"].as_array().unwrap().len(), 3);
        assert!(out["table"].as_str().unwrap().contains("ME6"));
    }

    #[test]
    fn sync_resolves_everything() {
        let e = example();
        let s = |k: &str| e[k].as_str().unwrap().to_string();
        let out: serde_json::Value = serde_json::from_str(&sync_json(&s("grammar"), &s("model"), &s("source_delta"), &s("target_delta"), &s("orchestration")).unwrap()).unwrap();
        assert_eq!(out["report"]["resolutions"].as_array().unwrap().len(), 3);
        assert!(out["report"]["unresolved"].as_array().unwrap().is_empty());
    }

    #[test]
    fn bad_input_reports_its_kind() {
        let e = detect_json("types {", "{}", "{}", "{}").unwrap_err();
        assert_eq!(e.kind(), "PARSE-ERROR");
    }
}
