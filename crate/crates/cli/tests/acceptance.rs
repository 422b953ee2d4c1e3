//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any failure.
//!
//! Runs without the test harness so the lines always reach the console.

use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use forge_core::domain::{
    load_design, Event, RunLedger, Trace, TraceSignal, VerdictStatus, MAX_FIX_ATTEMPTS, MAX_RCA_ROUNDS,
};
use forge_core::engine::{check, emit_vcd, evaluate_on_trace, BoundProperty, CheckOptions};
use forge_core::kgraph::{answer_context, axi_seed, retrieve_subgraph, DEFAULT_HOPS, DEFAULT_NODE_BUDGET};
use forge_core::orchestr::{
    run, HilDecision, HilMode, ModeHandler, Pipeline, RunConfig, RunOutcome, RunStatus, Scenario, ScriptedBackend,
};
use forge_core::rca::parse_vcd;
use forge_core::specgram::{parse_structured_spec, LearningCache, RuleSet, RuleTrigger};
use forge_core::svapars::{
    analyze, apply_canonical_rewrites, diagnostic_tags, diagnostics_signature, parse_property, LintCode,
};
use forge_core::testkit::{brute_force, ledger_violations, random_design, random_property, random_schedule};
use forge_hil::{compute_kpis, synthesize_ledger, DatasetLog, HilQueue, KpiOptions};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn core(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core").join(rel)
}

fn read(rel: &str) -> String {
    std::fs::read_to_string(core(rel)).unwrap_or_else(|e| panic!("{rel}: {e}"))
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn engine_oracle() -> Outcome {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut cases, mut mismatches, mut max_bits) = (0, 0, 0);
    while cases < 240 {
        let text = random_design(&mut rng, "rnd", 10);
        let d = load_design(&text).map_err(|e| format!("{e}\n{text}"))?;
        let p = random_property(&mut rng, &d);
        let ast = parse_property(&p).map_err(|e| e.to_string())?;
        let lo = ast.span().max(1);
        if lo > 8 {
            continue;
        }
        let depth = rng.gen_range(lo..=(lo + 3).min(8));
        max_bits = max_bits.max(d.state_bits());
        let bound = BoundProperty::bind(&ast, &d).map_err(|e| e.to_string())?;
        let v = check(&bound, CheckOptions::depth(depth)).map_err(|e| e.to_string())?;
        let b = brute_force(&d, &ast, depth);
        let cex = v.cex.as_ref().map(|c| (c.inputs.clone(), c.violated_at));
        let replay_ok =
            v.cex.as_ref().is_none_or(|c| evaluate_on_trace(&ast, &c.trace).violated_at == Some(c.violated_at));
        if v.status != b.status || cex != b.cex || !replay_ok {
            mismatches += 1;
        }
        cases += 1;
    }
    let secs = started.elapsed().as_secs_f64();
    ensure(max_bits <= 10, || format!("design with {max_bits} state bits"))?;
    ensure(mismatches == 0, || format!("{mismatches} of {cases} cases disagree"))?;
    ensure(secs < 120.0, || format!("took {secs:.1}s"))?;
    Ok(format!("{cases} cases, 0 mismatches, depth <= 8, <= {max_bits} state bits, {secs:.1}s"))
}

fn figure_goldens() -> Outcome {
    let mut rules = RuleSet::seeded();
    rules.rules.retain(|r| r.trigger != RuleTrigger::ResetWithoutDisable);
    let hs = load_design(&read("fixtures/handshake.dsn")).unwrap();
    let s1 = parse_structured_spec(&read("tests/golden/fig1_spec.rb")).map_err(|e| e.to_string())?;
    let a = analyze(&read("tests/golden/fig1_incorrect.sva"), &hs, Some(&s1), &rules);
    let codes: Vec<LintCode> = a.diagnostics.iter().map(|d| d.code).collect();
    ensure(codes == [LintCode::ClockEdgeMismatch, LintCode::DelayWindowMismatch, LintCode::SemanticMismatch], || {
        format!("figure 1 codes {codes:?}")
    })?;
    let msgs: Vec<&str> = a.diagnostics.iter().map(|d| d.message.as_str()).collect();
    ensure(msgs[0].contains("negedge") && msgs[1].contains("##[1:3]") && msgs[2].contains("unless"), || {
        format!("figure 1 messages {msgs:?}")
    })?;
    let json = serde_json::to_string_pretty(&a.diagnostics).unwrap() + "\n";
    ensure(json == read("tests/golden/fig1_diagnostics.json"), || "figure 1 diagnostics differ from golden".into())?;
    let cache = LearningCache::seeded();
    let hit = cache.lookup(&diagnostics_signature(&a.diagnostics), &diagnostic_tags(&a.diagnostics));
    let fixed1 = analyze(&hit[0].corrected_snippet, &hs, Some(&s1), &rules);
    let rendered1 = fixed1.ast.as_ref().map(|x| x.render()).unwrap_or_default();
    ensure(fixed1.is_clean() && rendered1 == read("tests/golden/fig1_corrected.sva"), || {
        "figure 1 correction differs from golden".into()
    })?;

    let enc = load_design(&read("fixtures/encoder.dsn")).unwrap();
    let s2 = parse_structured_spec(&read("tests/golden/fig2_spec.rb")).map_err(|e| e.to_string())?;
    let seeded = RuleSet::seeded();
    let b = analyze(&read("tests/golden/fig2_incorrect.sva"), &enc, Some(&s2), &seeded);
    let codes: Vec<LintCode> = b.diagnostics.iter().map(|d| d.code).collect();
    ensure(codes == [LintCode::MissingResetDisable], || format!("figure 2 codes {codes:?}"))?;
    let json = serde_json::to_string_pretty(&b.diagnostics).unwrap() + "\n";
    ensure(json == read("tests/golden/fig2_diagnostics.json"), || "figure 2 diagnostics differ from golden".into())?;
    let fixed2 =
        apply_canonical_rewrites(b.ast.as_ref().unwrap(), &b.diagnostics).map_err(|e| format!("{e:?}"))?.render();
    ensure(fixed2.contains("disable iff (!rst_async_n)") && fixed2 == read("tests/golden/fig2_corrected.sva"), || {
        format!("figure 2 correction differs from golden:\n{fixed2}")
    })?;
    Ok("figure 1: negedge, ##[1:3] vs 2 cycles, unless; figure 2: disable iff (!rst_async_n); 6 goldens byte-exact"
        .into())
}

fn kpi_recomputation() -> Outcome {
    let mut cells = Vec::new();
    for (n, proven, want) in [(28, 25, 89.28), (58, 49, 84.48), (16, 10, 62.50)] {
        let row = compute_kpis(&synthesize_ledger("synthetic", n, proven, 0, 0), &KpiOptions::default())
            .map_err(|e| e.to_string())?;
        let got = row.pct_proven.as_f64();
        ensure((got - want).abs() <= 0.01 + 1e-9, || format!("({n}, {proven}) gave {got}, expected {want}"))?;
        cells.push(row.pct_proven.to_string());
    }
    Ok(format!("(28,25) (58,49) (16,10) -> {}", cells.join(" / ")))
}

fn bound_enforcement() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(500);
    let (mut runs, mut cap_hits, mut violations) = (0, 0, Vec::new());
    while runs < 520 {
        let s = random_schedule(&mut rng);
        let d = load_design(&s.design).map_err(|e| e.to_string())?;
        let out =
            run(&d, &s.spec, &s.config, &mut ScriptedBackend::new(s.scenario.clone())).map_err(|e| e.to_string())?;
        let mut fixes = std::collections::HashMap::<&str, u32>::new();
        let mut rcas = std::collections::HashMap::<&str, u32>::new();
        for e in out.ledger.entries() {
            match &e.event {
                Event::FixAttempt { property, .. } => *fixes.entry(property).or_default() += 1,
                Event::RcaRound { cex, .. } => *rcas.entry(cex).or_default() += 1,
                _ => {}
            }
        }
        if fixes.values().any(|&n| n > MAX_FIX_ATTEMPTS) || rcas.values().any(|&n| n > MAX_RCA_ROUNDS) {
            violations.push(format!("run {runs}: cap exceeded"));
        }
        cap_hits += fixes.values().filter(|&&n| n == s.config.max_fix_attempts).count();
        cap_hits += rcas.values().filter(|&&n| n == s.config.max_rca_rounds).count();
        // checks that every cap hit is followed by the matching HilRequested
        violations.extend(ledger_violations(&out.ledger, &s.config).into_iter().map(|v| format!("run {runs}: {v}")));
        runs += 1;
    }
    ensure(violations.is_empty(), || format!("{} violations, first: {}", violations.len(), violations[0]))?;
    ensure(cap_hits > 0, || "no schedule reached a cap".into())?;
    Ok(format!("{runs} randomized schedules, {cap_hits} cap hits, 0 violations"))
}

fn handshake_run() -> Result<RunOutcome, String> {
    let d = load_design(&read("fixtures/handshake.dsn")).unwrap();
    let sc = Scenario::from_json(&read("scenarios/handshake_fig1.json")).map_err(|e| e.to_string())?;
    let cfg = RunConfig { hil_mode: HilMode::AutoDecline, ..RunConfig::default() };
    run(&d, &read("scenarios/handshake_spec.rb"), &cfg, &mut ScriptedBackend::new(sc)).map_err(|e| e.to_string())
}

fn end_to_end() -> Outcome {
    let started = Instant::now();
    let out = handshake_run()?;
    ensure(out.status == RunStatus::Done, || format!("status {:?}", out.status))?;
    let proven = out
        .ledger
        .entries()
        .iter()
        .filter(|e| matches!(&e.event, Event::EngineVerdict { status: VerdictStatus::Proven, .. }))
        .count();
    ensure(proven >= 1, || "nothing proven".into())?;
    let increases: Vec<(usize, usize)> = out
        .ledger
        .entries()
        .iter()
        .filter_map(|e| match &e.event {
            Event::CoverageRound { covered_before, covered_after, .. } => Some((*covered_before, *covered_after)),
            _ => None,
        })
        .collect();
    ensure(increases.iter().any(|(b, a)| a > b), || format!("coverage rounds {increases:?}"))?;
    let again = handshake_run()?;
    ensure(again.ledger.to_jsonl() == out.ledger.to_jsonl(), || "replay differs".into())?;
    let secs = started.elapsed().as_secs_f64();
    ensure(secs < 60.0, || format!("took {secs:.1}s"))?;
    let (b, a) = increases[0];
    Ok(format!("done, {proven} proven, coverage {b} -> {a} signals, replay byte-identical, {secs:.2}s"))
}

fn vcd_round_trip() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(100);
    for n in 0..100 {
        let widths: Vec<u32> = (0..rng.gen_range(1..6)).map(|_| rng.gen_range(1..=12)).collect();
        let len = rng.gen_range(0..20);
        let values: Vec<Vec<u64>> =
            widths.iter().map(|w| (0..len).map(|_| rng.gen_range(0..(1u64 << w))).collect()).collect();
        let signals =
            widths.iter().enumerate().map(|(i, &w)| TraceSignal { name: format!("s{i}"), width: w }).collect();
        let t = Trace::new("top", signals, values).map_err(|e| e.to_string())?;
        let back = parse_vcd(&emit_vcd(&t)).map_err(|e| format!("trace {n}: {e}"))?.to_trace();
        ensure(back == t, || format!("trace {n} differs after round trip"))?;
    }
    let d = load_design(&read("fixtures/handshake_slow_ack.dsn")).unwrap();
    let ast = parse_property("@(posedge clk) req |-> (error or ##[1:2] ack)").map_err(|e| e.to_string())?;
    let v = check(&BoundProperty::bind(&ast, &d).map_err(|e| e.to_string())?, CheckOptions::depth(8))
        .map_err(|e| e.to_string())?;
    let cex = v.cex.ok_or("slow-ack property did not fail")?;
    ensure(emit_vcd(&cex.trace) == read("tests/golden/slow_ack_cex.vcd"), || {
        "slow-ack VCD differs from golden".into()
    })?;
    Ok("100 randomized traces round-trip, slow-ack VCD matches golden bytes".into())
}

fn graphrag_axi() -> Outcome {
    let g = axi_seed().snapshot();
    let sub =
        retrieve_subgraph(&g, "check that AXI WLAST matches the AWLEN burst length", DEFAULT_HOPS, DEFAULT_NODE_BUDGET);
    for id in ["sig_awlen", "sig_wlast", "rule_burst_length"] {
        ensure(sub.contains(id), || format!("{id} not retrieved"))?;
    }
    let ctx = answer_context(&sub);
    ensure(ctx.contains("WLAST = 1 on (AWLEN + 1)-th beat"), || "rule text missing from context".into())?;
    ensure(ctx.lines().all(|l| l.contains("[node:")), || "a context line lacks a citation".into())?;
    Ok(format!("{} nodes retrieved, {} cited context lines", sub.nodes.len(), ctx.lines().count()))
}

fn hil_learning() -> Outcome {
    let d = load_design(&read("fixtures/encoder.dsn")).unwrap();
    let spec = read("scenarios/encoder_spec.rb");
    let cache = Arc::new(LearningCache::seeded());
    let rules = RuleSet::seeded();
    let cfg = RunConfig::default();
    let pass = |cache: &LearningCache| {
        let pipe = Pipeline { design: &d, rules: &rules, cache, config: &cfg };
        let sc = Scenario::from_json(&read("scenarios/encoder_fig2.json")).unwrap();
        pipe.run(&spec, &mut ScriptedBackend::new(sc), &mut ModeHandler(HilMode::Interactive))
            .map_err(|e| e.to_string())
    };
    let fixes = |l: &RunLedger| l.entries().iter().filter(|e| matches!(e.event, Event::FixAttempt { .. })).count();

    let first = pass(&cache)?;
    let q = HilQueue::new(cache.clone(), Arc::new(DatasetLog::in_memory()));
    q.register(&first, &d, None, None);
    let item = q.pending().first().cloned().ok_or("first run escalated nothing")?;
    let done = q
        .resolve(&item.item_id, HilDecision::Corrected(read("tests/golden/fig2_corrected.sva")), chrono::Utc::now())
        .map_err(|e| e.to_string())?;
    let entry = done.cache_entry.ok_or("no cache entry recorded")?;

    let second = pass(&cache)?;
    let used = second
        .ledger
        .entries()
        .iter()
        .any(|e| matches!(&e.event, Event::FixAttempt { via, .. } if *via == format!("cache:{entry}")));
    ensure(used, || "rerun did not consume the new cache entry".into())?;
    let (a, b) = (fixes(&first.ledger), fixes(&second.ledger));
    ensure(b < a, || format!("fix attempts {a} -> {b}"))?;
    ensure(second.status == RunStatus::Done, || format!("rerun status {:?}", second.status))?;
    Ok(format!("fix attempts {a} -> {b} via cache entry {entry}"))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("engine-oracle equivalence", engine_oracle),
        ("figure-golden suite", figure_goldens),
        ("KPI recomputation", kpi_recomputation),
        ("bound enforcement", bound_enforcement),
        ("end-to-end scripted run", end_to_end),
        ("VCD round-trip", vcd_round_trip),
        ("GraphRAG AXI scenario", graphrag_axi),
        ("HIL-learning loop", hil_learning),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        let result = std::panic::catch_unwind(f).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or(p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default())
        });
        match result {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL {name}: {why}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
