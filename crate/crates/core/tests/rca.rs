//! Root-cause classification over the labelled fixture table, VCD round
//! trips, and evidence extraction against the trace evaluator.

use std::path::PathBuf;

use forge_core::domain::{load_design, DesignModel, Trace, TraceSignal, VerdictStatus};
use forge_core::engine::{check, emit_vcd, BoundProperty, CheckOptions};
use forge_core::rca::{analyze, extract_window, parse_vcd, RcaContext, RcaError, RootCauseClass};
use forge_core::specgram::{parse_structured_spec, LearningCache, RuleSet};
use forge_core::svapars::parse_property;
use proptest::prelude::*;

const DEPTH: usize = 8;

fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

fn design(file: &str) -> DesignModel {
    load_design(&std::fs::read_to_string(root().join("fixtures").join(file)).unwrap()).unwrap()
}

fn read(rel: &str) -> String {
    std::fs::read_to_string(root().join(rel)).unwrap_or_else(|e| panic!("{rel}: {e}"))
}

struct Case {
    name: String,
    design: String,
    spec: String,
    class: RootCauseClass,
    property: String,
}

fn cases() -> Vec<Case> {
    read("tests/rca/cases.txt")
        .lines()
        .filter(|l| !l.trim().is_empty() && !l.starts_with('#'))
        .map(|l| {
            let f: Vec<&str> = l.splitn(5, " | ").collect();
            Case {
                name: f[0].into(),
                design: f[1].into(),
                spec: f[2].into(),
                class: serde_json::from_str(&format!("\"{}\"", f[3])).unwrap(),
                property: f[4].into(),
            }
        })
        .collect()
}

fn run_case(c: &Case, round: u32) -> Result<forge_core::rca::RcaReport, RcaError> {
    let d = design(&c.design);
    let spec = parse_structured_spec(&read(&format!("tests/rca/{}", c.spec))).unwrap();
    let ast = parse_property(&c.property).unwrap();
    let v = check(&BoundProperty::bind(&ast, &d).unwrap(), CheckOptions::depth(DEPTH)).unwrap();
    assert_eq!(v.status, VerdictStatus::Failed, "{} must fail", c.name);
    let rules = RuleSet::seeded();
    let cache = LearningCache::seeded();
    let ctx = RcaContext::new(&rules, DEPTH).with_cache(&cache);
    analyze(&v, &ast, Some(&spec), &d, round, &ctx)
}

#[test]
fn labelled_fixtures_classify_correctly() {
    let all = cases();
    assert!(all.len() >= 8);
    for class in [
        RootCauseClass::SpecMisread,
        RootCauseClass::AssertionDefect,
        RootCauseClass::DesignDefect,
        RootCauseClass::BindingDefect,
    ] {
        assert!(all.iter().any(|c| c.class == class), "{class:?} not covered");
    }
    for c in &all {
        let r = run_case(c, 1).unwrap();
        assert_eq!(r.root_cause_class, c.class, "{}: {r:#?}", c.name);
        let patched = matches!(r.root_cause_class, RootCauseClass::AssertionDefect | RootCauseClass::BindingDefect);
        assert_eq!(r.proposed_patch.is_some(), patched, "{}", c.name);
        if let (true, Some(p)) = (r.consistency, &r.proposed_patch) {
            let d = design(&c.design);
            let ast = parse_property(p).unwrap();
            let v = check(&BoundProperty::bind(&ast, &d).unwrap(), CheckOptions::depth(DEPTH)).unwrap();
            assert_eq!(v.status, VerdictStatus::Proven, "{}: patch {p}", c.name);
        }
    }
}

#[test]
fn window_defect_is_patched_with_the_cached_correction() {
    let c = cases().into_iter().find(|c| c.name == "negedge_and_window").unwrap();
    let r = run_case(&c, 1).unwrap();
    assert!(r.consistency, "{r:#?}");
    assert_eq!(r.proposed_patch.as_deref(), Some(read("tests/golden/fig1_corrected.sva").as_str()));
}

#[test]
fn delayed_ack_implicates_the_pipeline() {
    let c = cases().into_iter().find(|c| c.name == "slow_ack").unwrap();
    let r = run_case(&c, 2).unwrap();
    let rtl = r.rtl_finding.as_ref().unwrap();
    assert!(rtl.implicated.iter().any(|a| a == "next ack_q = d2"), "{:?}", rtl.implicated);
    assert!(r.consistency);
    assert_eq!(r.round, 2);
    let json = r.to_json() + "\n";
    let path = root().join("tests/golden/slow_ack_rca.json");
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::write(&path, &json).unwrap();
    }
    assert_eq!(json, std::fs::read_to_string(path).unwrap());
}

#[test]
fn rounds_beyond_three_are_rejected() {
    let c = &cases()[0];
    assert!(matches!(run_case(c, 4), Err(RcaError::BoundViolation(4))));
    assert!(run_case(c, 3).is_ok());
}

#[test]
fn full_window_matches_trace_values() {
    let d = design("handshake_slow_ack.dsn");
    let ast = parse_property("@(posedge clk) req |-> ##[1:2] ack").unwrap();
    let v = check(&BoundProperty::bind(&ast, &d).unwrap(), CheckOptions::depth(6)).unwrap();
    let trace = v.cex.unwrap().trace;
    let doc = parse_vcd(&emit_vcd(&trace)).unwrap();
    let names = d.signal_names();
    let refs: Vec<&str> = names.iter().map(String::as_str).collect();
    let table = extract_window(&doc, &refs, 0, trace.length as u64 - 1).unwrap();
    for (t, row) in table.rows.iter().enumerate() {
        assert_eq!(row.values, trace.row(t));
    }
}

fn arb_trace() -> impl Strategy<Value = Trace> {
    (prop::collection::vec(1u32..=12, 1..6), 0usize..20).prop_flat_map(|(widths, len)| {
        let cols: Vec<_> = widths.iter().map(|&w| prop::collection::vec(0u64..(1u64 << w), len)).collect();
        (Just(widths), cols).prop_map(|(widths, values)| {
            let signals =
                widths.iter().enumerate().map(|(i, &w)| TraceSignal { name: format!("s{i}"), width: w }).collect();
            Trace::new("top", signals, values).unwrap()
        })
    })
}

proptest! {
    #[test]
    fn vcd_round_trip(t in arb_trace()) {
        prop_assert_eq!(parse_vcd(&emit_vcd(&t)).unwrap().to_trace(), t);
    }
}
