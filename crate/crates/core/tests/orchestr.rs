//! Scripted end-to-end runs, escalation paths, materialize, and caps over
//! randomized schedules.

use std::path::PathBuf;
use std::time::Instant;

use forge_core::domain::{load_design, DesignModel, Event, RunLedger};
use forge_core::orchestr::{
    materialize, run, AgentBackend, AgentRequest, BackendError, HilDecision, HilHandler, HilItem, HilKind, HilMode,
    HilResolution, HilStatus, Phase, Pipeline, PropertyStatus, Role, RunConfig, RunStatus, Scenario, ScriptedBackend,
    Session, WorkspaceError,
};
use forge_core::specgram::{LearningCache, RuleSet};
use forge_core::testkit::{ledger_violations, random_schedule};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

fn read(rel: &str) -> String {
    std::fs::read_to_string(root().join(rel)).unwrap_or_else(|e| panic!("{rel}: {e}"))
}

fn design(file: &str) -> DesignModel {
    load_design(&read(&format!("fixtures/{file}"))).unwrap()
}

fn scenario(file: &str) -> Scenario {
    Scenario::from_json(&read(&format!("scenarios/{file}"))).unwrap()
}

fn config(mode: HilMode) -> RunConfig {
    RunConfig { hil_mode: mode, ..RunConfig::default() }
}

fn events<'l>(l: &'l RunLedger, kind: &str) -> Vec<&'l Event> {
    l.entries().iter().map(|e| &e.event).filter(|e| e.kind_name() == kind).collect()
}

fn assert_legal(phases: &[Phase]) {
    for w in phases.windows(2) {
        assert!(w[0].successors().contains(&w[1]), "{:?} -> {:?}", w[0], w[1]);
    }
}

#[test]
fn handshake_scenario_end_to_end() {
    let started = Instant::now();
    let d = design("handshake.dsn");
    let spec = read("scenarios/handshake_spec.rb");
    let cfg = config(HilMode::AutoDecline);
    let out = run(&d, &spec, &cfg, &mut ScriptedBackend::new(scenario("handshake_fig1.json"))).unwrap();

    assert_eq!(out.status, RunStatus::Done);
    assert!(out.kpis.proven >= 1);
    assert!(!out.kpis.first_generation);
    let fixes = events(&out.ledger, "FixAttempt");
    assert!(fixes.iter().any(|e| matches!(e, Event::FixAttempt { via, .. } if via.starts_with("cache:"))));
    let rounds = events(&out.ledger, "CoverageRound");
    assert!(!rounds.is_empty());
    assert!(rounds.iter().any(
        |e| matches!(e, Event::CoverageRound { covered_before, covered_after, .. } if covered_after > covered_before)
    ));
    assert_eq!(out.coverage.as_ref().unwrap().percent, "100.00");
    assert_legal(&out.phases);
    assert_eq!(out.phases.last(), Some(&Phase::Done));
    assert!(ledger_violations(&out.ledger, &cfg).is_empty());

    let replay = run(&d, &spec, &cfg, &mut ScriptedBackend::new(scenario("handshake_fig1.json"))).unwrap();
    assert_eq!(replay.ledger.to_jsonl(), out.ledger.to_jsonl());
    assert_eq!(RunLedger::from_jsonl(&out.ledger.to_jsonl()).unwrap(), out.ledger);
    assert!(started.elapsed().as_secs() < 60);
}

/// Backend that answers every call with the same raw text.
struct Broken;

impl AgentBackend for Broken {
    fn call(&mut self, _role: Role, _req: &AgentRequest) -> Result<String, BackendError> {
        Ok("{\"properties\": [".into())
    }
}

#[test]
fn malformed_reply_retries_once_then_escalates() {
    let d = design("handshake.dsn");
    let out = run(&d, &read("scenarios/handshake_spec.rb"), &config(HilMode::Interactive), &mut Broken).unwrap();
    let errs = events(&out.ledger, "BackendProtocolError");
    assert!(matches!(errs[0], Event::BackendProtocolError { retry: true, .. }));
    assert!(matches!(errs[1], Event::BackendProtocolError { retry: false, .. }));
    let kinds: Vec<&str> = out.ledger.entries().iter().map(|e| e.event.kind_name()).collect();
    let first_hil = kinds.iter().position(|k| *k == "HilRequested").unwrap();
    assert_eq!(first_hil, 3);
    assert_eq!(out.status, RunStatus::HilPending);
    assert!(out.pending_hil().count() >= 1);
}

#[test]
fn auto_accept_keeps_an_unfixable_property() {
    let d = design("encoder.dsn");
    let cfg = config(HilMode::AutoAccept);
    let out =
        run(&d, &read("scenarios/encoder_spec.rb"), &cfg, &mut ScriptedBackend::new(scenario("encoder_fig2.json")))
            .unwrap();
    let p1 = &out.properties[0];
    assert_eq!(p1.fix_attempts, 5);
    assert_eq!(p1.status, PropertyStatus::HumanAccepted);
    assert!(events(&out.ledger, "HilResolved")
        .iter()
        .any(|e| matches!(e, Event::HilResolved { decision, .. } if decision == "accepted")));
    assert_eq!(out.status, RunStatus::Done);
    assert!(ledger_violations(&out.ledger, &cfg).is_empty());
}

#[test]
fn critic_that_never_approves_escalates_at_the_cap() {
    let d = design("handshake.dsn");
    let sc = Scenario::from_json(
        r#"{"name":"nag","generate_properties":[{"properties":["@(posedge clk) disable iff (!rst_n) req |-> (error or ##[1:2] ack)"]}],
            "critique":[{"critique":{"verdict":"revise","notes":"a"}},{"critique":{"verdict":"approve","notes":"b"}},
                        {"critique":{"verdict":"revise","notes":"c"}},{"critique":{"verdict":"approve","notes":"d"}}]}"#,
    )
    .unwrap();
    let cfg = config(HilMode::AutoAccept);
    let out = run(&d, &read("scenarios/handshake_spec.rb"), &cfg, &mut ScriptedBackend::new(sc)).unwrap();
    assert_eq!(events(&out.ledger, "CriticRound").len(), 4);
    let hil = events(&out.ledger, "HilRequested");
    assert!(matches!(hil[0], Event::HilRequested { hil_kind, .. } if hil_kind == "UnconvergedCritic"));
    assert!(out.kpis.proven >= 1);
    assert!(ledger_violations(&out.ledger, &cfg).is_empty());
}

#[test]
fn failing_property_is_triaged() {
    let d = design("handshake_slow_ack.dsn");
    let sc = Scenario::from_json(
        r#"{"name":"slow","generate_properties":[{"properties":["@(posedge clk) disable iff (!rst_n) req |-> (error or ##[1:2] ack)"]}]}"#,
    )
    .unwrap();
    let cfg = config(HilMode::AutoDecline);
    let out = run(&d, &read("scenarios/handshake_spec.rb"), &cfg, &mut ScriptedBackend::new(sc)).unwrap();
    let rca = events(&out.ledger, "RcaRound");
    assert!(!rca.is_empty());
    assert!(matches!(rca[0], Event::RcaRound { class, cex, .. } if class == "DesignDefect" && cex.starts_with("p1@")));
    assert!(ledger_violations(&out.ledger, &cfg).is_empty());
    assert_legal(&out.phases);
}

#[test]
fn coverage_round_targets_the_uncovered_input() {
    let d = design("handshake.dsn");
    let sc = Scenario::from_json(
        r#"{"name":"cov","generate_properties":[{"properties":[
              "@(posedge clk) disable iff (!rst_n) req && !ack |=> busy",
              "@(posedge clk) disable iff (!rst_n) ack_q |-> ack"]}]}"#,
    )
    .unwrap();
    let (rules, cache, cfg) = (RuleSet::seeded(), LearningCache::seeded(), config(HilMode::AutoDecline));
    let pipe = Pipeline { design: &d, rules: &rules, cache: &cache, config: &cfg };
    let mut backend = ScriptedBackend::new(sc);
    let mut hil = forge_core::orchestr::ModeHandler(HilMode::AutoDecline);
    let spec = read("scenarios/handshake_spec.rb");
    let calls = {
        let mut s = Session::start(pipe, &spec, &mut backend, &mut hil).unwrap();
        s.generate().unwrap();
        s.critic_loop().unwrap();
        s.prove_all().unwrap();
        let holes: Vec<String> = s.coverage_report().holes.into_iter().map(|h| h.signal).collect();
        assert_eq!(holes, ["error"]);
        let (before, after) = s.coverage_round().unwrap();
        assert_eq!((before, after, s.coverage_rounds()), (6, 6, 1));
        s.finish().unwrap();
        backend.calls().to_vec()
    };
    let (role, req) = calls.last().unwrap();
    assert_eq!(*role, Role::ProposeCoverageProperty);
    assert_eq!(req.signal.as_deref(), Some("error"));
    assert_eq!(req.locus.as_deref(), Some("input port"));
    assert!(req.prompt.contains("uncovered signal `error`"));
}

#[test]
fn no_holes_means_no_coverage_round() {
    let d = design("handshake.dsn");
    let sc = Scenario::from_json(
        r#"{"name":"full","generate_properties":[{"properties":[
              "@(posedge clk) disable iff (!rst_n) req |-> (error or ##[1:2] ack)",
              "@(posedge clk) disable iff (!rst_n) req && !error |=> ack_q",
              "@(posedge clk) disable iff (!rst_n) req && !ack |=> busy"]}]}"#,
    )
    .unwrap();
    let out =
        run(&d, &read("scenarios/handshake_spec.rb"), &config(HilMode::AutoDecline), &mut ScriptedBackend::new(sc))
            .unwrap();
    assert!(events(&out.ledger, "CoverageRound").is_empty());
    assert_eq!(out.phases[out.phases.len() - 2..], [Phase::CoverageLoop, Phase::Done]);
}

#[test]
fn coverage_loop_stops_at_the_round_cap() {
    // each round covers one more signal, so only the cap ends the loop
    let d = design("handshake.dsn");
    let sc = Scenario::from_json(
        r#"{"name":"drip","generate_properties":[{"properties":["@(posedge clk) disable iff (!rst_n) req |-> (error or ##[1:2] ack)"]}],
            "propose_coverage_property":[{"properties":["@(posedge clk) disable iff (!rst_n) req && !error |=> ack_q"]}]}"#,
    )
    .unwrap();
    let cfg = RunConfig { max_coverage_rounds: 1, ..config(HilMode::AutoDecline) };
    let out = run(&d, &read("scenarios/handshake_spec.rb"), &cfg, &mut ScriptedBackend::new(sc)).unwrap();
    assert_eq!(events(&out.ledger, "CoverageRound").len(), 1);
    assert_eq!(out.coverage.unwrap().holes.len(), 1);
}

#[test]
fn materialize_is_idempotent_and_detects_conflicts() {
    let d = design("encoder.dsn");
    let sc = Scenario::from_json(&format!(
        r#"{{"name":"fig2","generate_properties":[{{"properties":[{}]}}]}}"#,
        serde_json::to_string(&read("tests/golden/fig2_incorrect.sva")).unwrap()
    ))
    .unwrap();
    let out = run(&d, &read("scenarios/encoder_spec.rb"), &config(HilMode::AutoDecline), &mut ScriptedBackend::new(sc))
        .unwrap();
    let tmp = tempfile::tempdir().unwrap();
    let dir = materialize(&out, &d, tmp.path()).unwrap();
    let p1 = std::fs::read_to_string(dir.join("properties/p1.sva")).unwrap();
    assert!(p1.contains("disable iff (!rst_async_n)"), "{p1}");
    assert_eq!(p1, read("tests/golden/fig2_corrected.sva"));
    assert!(dir.join("bind_manifest.json").exists());
    assert_eq!(std::fs::read_to_string(dir.join("ledger.jsonl")).unwrap(), out.ledger.to_jsonl());
    assert_eq!(materialize(&out, &d, tmp.path()).unwrap(), dir);

    std::fs::write(dir.join("properties/p1.sva"), "tampered\n").unwrap();
    assert!(matches!(materialize(&out, &d, tmp.path()), Err(WorkspaceError::WorkspaceConflict { .. })));
}

/// Answers every escalation with a fixed correction.
struct Corrector(String);

impl HilHandler for Corrector {
    fn escalate(&mut self, item: &HilItem) -> HilResolution {
        assert_eq!(item.kind, HilKind::UnfixableProperty);
        assert_eq!(item.status, HilStatus::Pending);
        HilDecision::Corrected(self.0.clone()).into()
    }
}

#[test]
fn in_run_correction_revalidates() {
    let d = design("encoder.dsn");
    let (rules, cache, cfg) = (RuleSet::seeded(), LearningCache::seeded(), config(HilMode::Interactive));
    let pipe = Pipeline { design: &d, rules: &rules, cache: &cache, config: &cfg };
    let mut hil = Corrector(read("tests/golden/fig2_corrected.sva"));
    let out = pipe
        .run(&read("scenarios/encoder_spec.rb"), &mut ScriptedBackend::new(scenario("encoder_fig2.json")), &mut hil)
        .unwrap();
    assert_eq!(out.properties[0].status, PropertyStatus::Validated);
    assert_eq!(out.status, RunStatus::Done);
    assert_eq!(out.hil_items[0].status, HilStatus::Corrected);
}

#[test]
fn randomized_schedules_respect_caps() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut kinds = std::collections::BTreeMap::new();
    for n in 0..200 {
        let s = random_schedule(&mut rng);
        let d = load_design(&s.design).unwrap();
        let out = run(&d, &s.spec, &s.config, &mut ScriptedBackend::new(s.scenario.clone())).unwrap();
        let v = ledger_violations(&out.ledger, &s.config);
        assert!(v.is_empty(), "schedule {n}: {v:?}\n{}", out.ledger.to_jsonl());
        assert_legal(&out.phases);
        for e in events(&out.ledger, "HilRequested") {
            if let Event::HilRequested { hil_kind, .. } = e {
                *kinds.entry(hil_kind.clone()).or_insert(0) += 1;
            }
        }
    }
    // the schedules reach every escalation path
    assert_eq!(kinds.len(), 3, "{kinds:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn replay_is_byte_identical(seed in any::<u64>()) {
        let s = random_schedule(&mut ChaCha8Rng::seed_from_u64(seed));
        let d = load_design(&s.design).unwrap();
        let a = run(&d, &s.spec, &s.config, &mut ScriptedBackend::new(s.scenario.clone())).unwrap();
        let b = run(&d, &s.spec, &s.config, &mut ScriptedBackend::new(s.scenario.clone())).unwrap();
        prop_assert_eq!(a.ledger.to_jsonl(), b.ledger.to_jsonl());
    }
}
