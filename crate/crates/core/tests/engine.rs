//! Proof engine behaviour on the fixtures, cross-checked against the naive
//! trace evaluator and exhaustive enumeration.

use std::path::PathBuf;

use forge_core::domain::{load_design, DesignModel, VerdictStatus};
use forge_core::engine::{
    check, compute_coverage, emit_vcd, evaluate_on_trace, BoundProperty, CheckOptions, EngineError,
};
use forge_core::svapars::parse_property;
use forge_core::testkit::brute_force;

const REQ_ACK: &str = "@(posedge clk) req |-> (error or ##[1:2] ack)";
const REQ_ACK_RESET: &str = "@(posedge clk) disable iff (!rst_n) req |-> (error or ##[1:2] ack)";

fn design(file: &str) -> DesignModel {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(file);
    load_design(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn golden(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)
}

fn check_golden(name: &str, actual: &str) {
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::write(golden(name), actual).unwrap();
    }
    assert_eq!(actual, std::fs::read_to_string(golden(name)).unwrap(), "golden mismatch for {name}");
}

#[test]
fn req_ack_is_proven_on_handshake() {
    let d = design("handshake.dsn");
    for text in [REQ_ACK, REQ_ACK_RESET] {
        let ast = parse_property(text).unwrap();
        let v = check(&BoundProperty::bind(&ast, &d).unwrap(), CheckOptions::depth(8)).unwrap();
        assert_eq!(v.status, VerdictStatus::Proven, "{text}");
        assert!(v.antecedent_ever_true);
        assert_eq!(brute_force(&d, &ast, 8).status, VerdictStatus::Proven);
    }
}

#[test]
fn slow_ack_fails_with_minimal_replayable_cex() {
    let d = design("handshake_slow_ack.dsn");
    let ast = parse_property(REQ_ACK).unwrap();
    let v = check(&BoundProperty::bind(&ast, &d).unwrap(), CheckOptions::depth(8)).unwrap();
    assert_eq!(v.status, VerdictStatus::Failed);
    let cex = v.cex.as_ref().unwrap();
    // req at cycle 0 with no error; ack is still low two cycles later
    assert_eq!(cex.inputs, vec![vec![1, 0], vec![0, 0], vec![0, 0]]);
    assert_eq!(cex.violated_at, 2);
    let replay = evaluate_on_trace(&ast, &cex.trace);
    assert_eq!(replay.violated_at, Some(cex.violated_at));

    let brute = brute_force(&d, &ast, 8);
    assert_eq!(brute.status, VerdictStatus::Failed);
    assert_eq!(brute.cex, Some((cex.inputs.clone(), cex.violated_at)));
    check_golden("slow_ack_cex.vcd", &emit_vcd(&cex.trace));
}

#[test]
fn contradictory_antecedent_is_vacuous() {
    let d = design("handshake.dsn");
    let ast = parse_property("@(posedge clk) req && !req |-> ack").unwrap();
    let v = check(&BoundProperty::bind(&ast, &d).unwrap(), CheckOptions::depth(8)).unwrap();
    assert_eq!(v.status, VerdictStatus::Vacuous);
    assert!(!v.antecedent_ever_true);
}

#[test]
fn binding_and_depth_errors() {
    let d = design("handshake.dsn");
    let ast = parse_property("@(posedge clk) req |-> grant").unwrap();
    assert_eq!(BoundProperty::bind(&ast, &d).unwrap_err(), EngineError::UnboundName("grant".into()));
    let ast = parse_property("@(posedge clk) req |-> ##4 ack").unwrap();
    let p = BoundProperty::bind(&ast, &d).unwrap();
    assert_eq!(check(&p, CheckOptions::depth(3)).unwrap_err(), EngineError::DepthTooSmall { depth: 3, span: 4 });
    assert!(check(&p, CheckOptions::depth(0)).is_err());
}

#[test]
fn tiny_budget_is_inconclusive() {
    let d = design("counter.dsn");
    let ast = parse_property("@(posedge clk) en |=> 1").unwrap();
    let p = BoundProperty::bind(&ast, &d).unwrap();
    let v = check(&p, CheckOptions { depth: 12, budget: 3 }).unwrap();
    assert_eq!(v.status, VerdictStatus::Inconclusive);
    assert_eq!(check(&p, CheckOptions::depth(12)).unwrap().status, VerdictStatus::Proven);
}

#[test]
fn checks_are_deterministic() {
    let d = design("handshake_slow_ack.dsn");
    let ast = parse_property(REQ_ACK).unwrap();
    let p = BoundProperty::bind(&ast, &d).unwrap();
    let a = check(&p, CheckOptions::depth(8)).unwrap();
    let b = check(&p, CheckOptions::depth(8)).unwrap();
    assert_eq!(a, b);
    assert_eq!(emit_vcd(&a.cex.unwrap().trace), emit_vcd(&b.cex.unwrap().trace));
}

#[test]
fn coverage_counts_bound_signals_of_proven_properties() {
    let d = design("handshake.dsn");
    let ast = parse_property(REQ_ACK_RESET).unwrap();
    let p = BoundProperty::bind(&ast, &d).unwrap();
    let v = check(&p, CheckOptions::depth(8)).unwrap();
    let r = compute_coverage(&d, &[(&p, &v)]);
    assert_eq!(r.covered_signals, ["clk", "rst_n", "req", "error", "ack"]);
    assert_eq!(r.total_signals, 7);
    // 5/7 = 71.428..., truncated
    assert_eq!(r.percent, "71.42");
    let holes: Vec<(&str, &str)> = r.holes.iter().map(|h| (h.signal.as_str(), h.locus.as_str())).collect();
    assert_eq!(holes, [("ack_q", "next ack_q = req & !error"), ("busy", "next busy = req & !ack_q")]);

    let vac = parse_property("@(posedge clk) req && !req |-> busy").unwrap();
    let vp = BoundProperty::bind(&vac, &d).unwrap();
    let vv = check(&vp, CheckOptions::depth(8)).unwrap();
    let r = compute_coverage(&d, &[(&vp, &vv)]);
    assert_eq!(r.percent, "0.00");
    assert_eq!(r.holes.len(), 7);
    assert_eq!(r.holes[2].locus, "input port");
}

/// Properties exercising each operator of the subset.
const PROPERTIES: &[&str] = &[
    REQ_ACK,
    REQ_ACK_RESET,
    "@(posedge clk) req |=> ack",
    "@(posedge clk) req ##1 !error |-> ack",
    "@(posedge clk) $rose(req) |-> ##[0:2] ack",
    "@(posedge clk) ack |-> $past(req, 1)",
    "@(posedge clk) $fell(ack) |-> !$past(req)",
    "@(posedge clk) $stable(req) |=> $stable(ack) or error",
    "@(posedge clk) disable iff (error) req ##[1:2] req |-> ##1 ack",
    "@(posedge clk) ##1 req |-> ack != req",
    "@(posedge clk) i_start |=> !o_done",
    "@(posedge clk) disable iff (!rst_async_n) (i_start && !enc_done) |=> !o_done",
    "@(posedge clk) enc_done && !i_start |=> o_done",
    "@(posedge clk) en |-> ##[1:3] wrap",
    "@(posedge clk) wrap |=> count == 0",
    "@(posedge clk) count == 6 && en |=> wrap",
];

#[test]
fn engine_matches_exhaustive_enumeration_on_fixtures() {
    let designs: Vec<DesignModel> =
        ["handshake.dsn", "handshake_slow_ack.dsn", "encoder.dsn", "counter.dsn"].map(design).to_vec();
    let mut compared = 0;
    for text in PROPERTIES {
        let ast = parse_property(text).unwrap();
        for d in &designs {
            let Ok(p) = BoundProperty::bind(&ast, d) else { continue };
            for depth in [ast.span().max(1), 5, 8] {
                let v = check(&p, CheckOptions::depth(depth)).unwrap();
                let b = brute_force(d, &ast, depth);
                assert_eq!(v.status, b.status, "{} on {} at depth {depth}", text, d.name);
                let cex = v.cex.as_ref().map(|c| (c.inputs.clone(), c.violated_at));
                assert_eq!(cex, b.cex, "{} on {} at depth {depth}", text, d.name);
                if let Some(c) = &v.cex {
                    assert_eq!(evaluate_on_trace(&ast, &c.trace).violated_at, Some(c.violated_at));
                }
                compared += 1;
            }
        }
    }
    assert!(compared >= 40, "{compared}");
}
