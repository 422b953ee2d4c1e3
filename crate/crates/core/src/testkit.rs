//! Seeded generators for small designs and properties, plus the brute-force
//! reference checker. Shared by property tests, the acceptance suite and the
//! randomized scripted runs.

use std::collections::{HashMap, HashSet};

use rand::seq::SliceRandom;
use rand::Rng;

use crate::domain::{DesignModel, Event, RunLedger, Trace, VerdictStatus, MAX_FIX_ATTEMPTS, MAX_RCA_ROUNDS};
use crate::engine::evaluate_on_trace;
use crate::orchestr::{AgentReply, Critique, CritiqueVerdict, HilMode, Role, RunConfig, Scenario, ScriptedReply};
use crate::svapars::PropertyAst;

/// Text of a random design with one clock, an optional reset, `1..=2` one-bit
/// free inputs and at most `max_state_bits` bits of state.
pub fn random_design(rng: &mut impl Rng, name: &str, max_state_bits: u32) -> String {
    let n_in = rng.gen_range(1..=2);
    let inputs: Vec<String> = (0..n_in).map(|i| format!("in{i}")).collect();
    let reset = match rng.gen_range(0..3) {
        0 => None,
        1 => Some(("rst_n", "active_low async")),
        _ => Some(("rst", "active_high sync")),
    };
    let mut states = Vec::new();
    let mut bits = 0;
    let n_state = rng.gen_range(1..=3);
    for i in 0..n_state {
        let room = max_state_bits.saturating_sub(bits);
        if room == 0 {
            break;
        }
        let w = rng.gen_range(1..=room.min(3));
        bits += w;
        let init = rng.gen_range(0..(1u64 << w));
        states.push((format!("s{i}"), w, init));
    }
    let mut operands: Vec<String> = inputs.clone();
    operands.extend(states.iter().map(|s| s.0.clone()));

    let mut text = format!("design {name}\nports:\n  clk: input 1\n");
    if let Some((r, _)) = reset {
        text += &format!("  {r}: input 1\n");
    }
    for i in &inputs {
        text += &format!("  {i}: input 1\n");
    }
    text += "  o0: output 1\nstate:\n";
    for (s, w, init) in &states {
        text += &format!("  {s}: {w} = {init}\n");
    }
    text += "clock: clk\n";
    if let Some((r, kind)) = reset {
        text += &format!("reset: {r} {kind}\n");
    }
    text += "next:\n";
    for (s, _, _) in &states {
        text += &format!("  {s} = {}\n", random_expr(rng, &operands, 2));
    }
    text += &format!("out:\n  o0 = {}\n", random_expr(rng, &operands, 2));
    text
}

fn random_expr(rng: &mut impl Rng, ops: &[String], depth: u32) -> String {
    if depth == 0 || rng.gen_bool(0.3) {
        return if rng.gen_bool(0.85) { ops.choose(rng).unwrap().clone() } else { rng.gen_range(0..2).to_string() };
    }
    let a = random_expr(rng, ops, depth - 1);
    match rng.gen_range(0..7) {
        0 => format!("!{a}"),
        1 => format!("~{a}"),
        2 => format!("({a} + 1)"),
        3 => format!("({a} ? {} : {})", random_expr(rng, ops, depth - 1), random_expr(rng, ops, depth - 1)),
        k => {
            let op = ["&", "|", "^", "!="][k as usize - 3];
            format!("({a} {op} {})", random_expr(rng, ops, depth - 1))
        }
    }
}

fn random_bool(rng: &mut impl Rng, sigs: &[String], depth: u32) -> String {
    if depth == 0 || rng.gen_bool(0.4) {
        let s = sigs.choose(rng).unwrap().clone();
        return match rng.gen_range(0..10) {
            0 => format!("$rose({s})"),
            1 => format!("$fell({s})"),
            2 => format!("$stable({s})"),
            3 => format!("$past({s}, {})", rng.gen_range(1..=2)),
            4 => format!("{s} == {}", rng.gen_range(0..2)),
            _ => s,
        };
    }
    let a = random_bool(rng, sigs, depth - 1);
    match rng.gen_range(0..3) {
        0 => format!("!({a})"),
        1 => format!("({a} && {})", random_bool(rng, sigs, depth - 1)),
        _ => format!("({a} || {})", random_bool(rng, sigs, depth - 1)),
    }
}

fn random_seq(rng: &mut impl Rng, sigs: &[String], depth: u32) -> String {
    if depth == 0 || rng.gen_bool(0.5) {
        return random_bool(rng, sigs, 1);
    }
    let a = random_seq(rng, sigs, depth - 1);
    let b = random_seq(rng, sigs, depth - 1);
    match rng.gen_range(0..3) {
        0 => format!("{a} ##{} {b}", rng.gen_range(0..=2)),
        1 => {
            let lo = rng.gen_range(0..=1);
            format!("{a} ##[{lo}:{}] {b}", lo + rng.gen_range(1..=2))
        }
        _ => format!("(({a}) or ({b}))"),
    }
}

/// A random property over the design's non-clock signals, rendered as text.
pub fn random_property(rng: &mut impl Rng, design: &DesignModel) -> String {
    let sigs: Vec<String> = design.signals().iter().map(|s| s.name.clone()).filter(|n| *n != design.clock).collect();
    let imp = if rng.gen_bool(0.5) { "|->" } else { "|=>" };
    let disable = match (&design.reset, rng.gen_bool(0.5)) {
        (Some(r), true) => format!("disable iff ({}) ", r.active_expr()),
        _ if rng.gen_bool(0.15) => format!("disable iff ({}) ", random_bool(rng, &sigs, 0)),
        _ => String::new(),
    };
    format!("@(posedge clk) {disable}{} {imp} {}", random_seq(rng, &sigs, 1), random_seq(rng, &sigs, 2))
}

/// Outcome of the naive reference checker.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BruteVerdict {
    pub status: VerdictStatus,
    /// For `Failed`: the lexicographically smallest shortest violating input
    /// sequence and its violation cycle.
    pub cex: Option<(Vec<Vec<u64>>, usize)>,
}

/// Decode input combination `combo` with the first free input most significant.
pub fn decode_inputs(design: &DesignModel, mut combo: u64) -> Vec<u64> {
    let widths: Vec<u32> = design.free_inputs().iter().map(|&i| design.signals()[i].width).collect();
    let mut v = vec![0; widths.len()];
    for (i, w) in widths.iter().enumerate().rev() {
        v[i] = combo & ((1u64 << w) - 1);
        combo >>= w;
    }
    v
}

fn sequences(design: &DesignModel, len: usize) -> impl Iterator<Item = Vec<Vec<u64>>> + '_ {
    let bits: u32 = design.free_inputs().iter().map(|&i| design.signals()[i].width).sum();
    let combos = 1u64 << bits;
    let total = combos.pow(len as u32);
    (0..total).map(move |mut n| {
        let mut seq = vec![Vec::new(); len];
        for t in (0..len).rev() {
            seq[t] = decode_inputs(design, n % combos);
            n /= combos;
        }
        seq
    })
}

fn run(design: &DesignModel, inputs: &[Vec<u64>]) -> Trace {
    let reset: Vec<bool> = (0..inputs.len()).map(|t| t == 0).collect();
    design.simulate(inputs, &reset)
}

/// Enumerate every input sequence of length `depth` from reset and evaluate
/// `p` on each resulting trace. Exponential; meant for tiny designs only.
pub fn brute_force(design: &DesignModel, p: &PropertyAst, depth: usize) -> BruteVerdict {
    let mut min_violation: Option<usize> = None;
    let mut hit = false;
    for seq in sequences(design, depth) {
        let e = evaluate_on_trace(p, &run(design, &seq));
        hit |= e.antecedent_hits > 0;
        if let Some(v) = e.violated_at {
            min_violation = Some(min_violation.map_or(v, |m| m.min(v)));
        }
    }
    let Some(v) = min_violation else {
        let status = if hit { VerdictStatus::Proven } else { VerdictStatus::Vacuous };
        return BruteVerdict { status, cex: None };
    };
    let cex = sequences(design, v + 1)
        .find(|seq| evaluate_on_trace(p, &run(design, seq)).violated_at == Some(v))
        .expect("a prefix of the violating sequence violates");
    BruteVerdict { status: VerdictStatus::Failed, cex: Some((cex, v)) }
}

/// A randomized scripted run: design, spec, backend script and config.
#[derive(Debug, Clone)]
pub struct Schedule {
    pub design: String,
    pub spec: String,
    pub scenario: Scenario,
    pub config: RunConfig,
}

const HANDSHAKE_SPEC: &str = "Signals: [clk, req, ack, error]\nProperty: [assert, concurrent, positive edge of clk]\n\
                              Condition: [if req is high, then ack must be high within 2 cycles unless error is high]\n";
const ENCODER_SPEC: &str =
    "Signals: [clk, i_start, enc_done, o_done]\nProperty: [assert, concurrent, positive edge of clk]\n\
                            Condition: [if i_start is high and enc_done is low, o_done must be low in next cycle]\n";

const HANDSHAKE_POOL: &[&str] = &[
    "@(posedge clk) disable iff (!rst_n) req |-> (error or ##[1:2] ack)",
    "property start_done_within_3_cycles_unless_reset;\n@(negedge clk) start |-> ##[1:3] done unless reset;\nendproperty\n",
    "@(negedge clk) req |-> ##[1:3] ack",
    "@(posedge clk) disable iff (!rst_n) req |-> ##1 ack",
    "@(posedge clk) req |-> ack",
    "@(posedge clk) disable iff (!rst_n) req |-> ##[1:2] ack",
    "@(posedge clk) disable iff (!rst_n) req && !error |=> ack_q",
    "@(posedge clk) disable iff (!rst_n) busy |-> ack",
    "@(posedge clk) req |-> (ack",
    "@(posedge clk) disable iff (!rst_n) reqq |-> ##1 ackk",
];

const ENCODER_POOL: &[&str] = &[
    "property done_signal_validity;\n@(posedge clk)(i_start && !enc_done) |=> (!o_done);\nendproperty\n",
    "@(posedge clk) disable iff (!rst_async_n) (i_start && !enc_done) |=> !o_done",
    "@(posedge clk) disable iff (!rst_async_n) enc_done && !i_start |=> o_done",
    "@(posedge clk) i_start |=> o_done",
    "@(posedge clk) disable iff (!rst_async_n) (i_start && !enc_done |=> !o_done",
    "@(negedge clk) i_start |-> ##[1:3] o_done unless enc_done",
    "@(posedge clk) disable iff (!rst_async_n) busy |-> ##[1:2] o_done",
];

const GARBAGE: &[&str] = &["not json", "{\"properties\": 3}", "{\"critique\": {\"verdict\": \"maybe\"}}", ""];

fn random_reply(rng: &mut impl Rng, pool: &[&str], role: Role) -> ScriptedReply {
    if rng.gen_bool(0.15) {
        return ScriptedReply::Raw(GARBAGE.choose(rng).unwrap().to_string());
    }
    let n = rng.gen_range(0..=if role == Role::Critique { 2 } else { 3 });
    let properties: Vec<String> = (0..n).map(|_| pool.choose(rng).unwrap().to_string()).collect();
    let critique = (role == Role::Critique).then(|| Critique {
        verdict: if rng.gen_bool(0.6) { CritiqueVerdict::Approve } else { CritiqueVerdict::Revise },
        notes: "scripted".into(),
    });
    ScriptedReply::Reply(AgentReply { properties, critique })
}

/// Random design family, backend script, caps and HIL mode.
pub fn random_schedule(rng: &mut impl Rng) -> Schedule {
    let (design, spec, pool) = match rng.gen_range(0..4) {
        0 => (include_str!("../fixtures/handshake.dsn"), HANDSHAKE_SPEC, HANDSHAKE_POOL),
        1 => (include_str!("../fixtures/handshake_slow_ack.dsn"), HANDSHAKE_SPEC, HANDSHAKE_POOL),
        2 => (include_str!("../fixtures/encoder.dsn"), ENCODER_SPEC, ENCODER_POOL),
        _ => (include_str!("../fixtures/encoder_bad.dsn"), ENCODER_SPEC, ENCODER_POOL),
    };
    let queue = |rng: &mut _, role, max: usize| -> Vec<ScriptedReply> {
        let n = rng_range(rng, max);
        (0..n).map(|_| random_reply(rng, pool, role)).collect()
    };
    let scenario = Scenario {
        name: "random".into(),
        generate_properties: queue(rng, Role::GenerateProperties, 2),
        refine_property: queue(rng, Role::RefineProperty, 8),
        critique: queue(rng, Role::Critique, 5),
        propose_coverage_property: queue(rng, Role::ProposeCoverageProperty, 4),
        coverage_templates: Default::default(),
    };
    let config = RunConfig {
        max_fix_attempts: rng.gen_range(1..=MAX_FIX_ATTEMPTS),
        max_critic_rounds: rng.gen_range(1..=4),
        max_rca_rounds: rng.gen_range(1..=MAX_RCA_ROUNDS),
        max_coverage_rounds: rng.gen_range(1..=3),
        proof_depth: rng.gen_range(6..=10),
        hil_mode: *[HilMode::Interactive, HilMode::AutoAccept, HilMode::AutoDecline].choose(rng).unwrap(),
        ..RunConfig::default()
    };
    Schedule { design: design.into(), spec: spec.into(), scenario, config }
}

fn rng_range(rng: &mut impl Rng, max: usize) -> usize {
    rng.gen_range(0..=max)
}

/// Cap, escalation and sequencing violations in a finished run's ledger.
pub fn ledger_violations(ledger: &RunLedger, config: &RunConfig) -> Vec<String> {
    let mut out = Vec::new();
    let mut fixes: HashMap<&str, u32> = HashMap::new();
    let mut rcas: HashMap<&str, u32> = HashMap::new();
    let mut last_lint: HashMap<&str, (usize, bool)> = HashMap::new();
    let mut first_verdict: HashMap<&str, usize> = HashMap::new();
    let mut critic_rounds = Vec::new();
    let mut hil: Vec<(usize, &str, &str)> = Vec::new();
    let mut first_proof = None;
    // human-accepted properties are proven without a clean validation
    let mut accepted: HashSet<&str> = HashSet::new();
    let mut item_property: HashMap<&str, &str> = HashMap::new();
    for (i, e) in ledger.entries().iter().enumerate() {
        match &e.event {
            Event::FixAttempt { property, .. } => *fixes.entry(property).or_default() += 1,
            Event::RcaRound { cex, .. } => *rcas.entry(cex).or_default() += 1,
            Event::LintRound { property, clean, .. } => {
                if *clean && first_verdict.contains_key(property.as_str()) {
                    out.push(format!("{property}: validated again after its verdict"));
                }
                last_lint.insert(property, (i, *clean));
            }
            Event::EngineVerdict { property, .. } => {
                first_proof.get_or_insert(i);
                let accepted = accepted.contains(property.as_str());
                if !accepted && !last_lint.get(property.as_str()).is_some_and(|l| l.1) {
                    out.push(format!("{property}: verdict without a clean validation"));
                }
                first_verdict.entry(property).or_insert(i);
            }
            Event::CriticRound { verdict, clean, .. } => critic_rounds.push(verdict == "approve" && *clean),
            Event::HilRequested { item, hil_kind, property, .. } => {
                hil.push((i, hil_kind, property));
                item_property.insert(item, property);
            }
            Event::HilResolved { item, decision, .. } if decision == "accepted" => {
                if let Some(p) = item_property.get(item.as_str()) {
                    accepted.insert(*p);
                }
            }
            Event::CoverageRound { .. }
                if first_proof.is_none()
                    && ledger.entries().iter().any(|x| matches!(x.event, Event::EngineVerdict { .. })) =>
            {
                out.push("coverage round before the first proof".into());
            }
            _ => {}
        }
    }
    for (p, n) in &fixes {
        if *n > config.max_fix_attempts {
            out.push(format!("{p}: {n} fix attempts"));
        }
        let unclean = last_lint.get(p).is_some_and(|l| !l.1);
        if *n == config.max_fix_attempts && unclean && !hil.iter().any(|h| h.1 == "UnfixableProperty" && h.2 == *p) {
            out.push(format!("{p}: fix cap hit without escalation"));
        }
    }
    for (c, n) in &rcas {
        if *n > config.max_rca_rounds {
            out.push(format!("{c}: {n} RCA rounds"));
        }
    }
    for e in ledger.entries() {
        if let Event::RcaRound { property, round, consistency: false, .. } = &e.event {
            if *round == config.max_rca_rounds
                && !hil.iter().any(|h| h.0 > e.seq as usize && h.1 == "UnresolvedRca" && h.2 == property)
            {
                out.push(format!("{property}: RCA cap hit without escalation"));
            }
        }
    }
    if critic_rounds.len() > config.max_critic_rounds as usize {
        out.push(format!("{} critic rounds", critic_rounds.len()));
    }
    let need = config.convergence_approvals as usize;
    let converged = critic_rounds.len() >= need && critic_rounds[critic_rounds.len() - need..].iter().all(|&ok| ok);
    if critic_rounds.len() == config.max_critic_rounds as usize
        && !converged
        && !hil.iter().any(|h| h.1 == "UnconvergedCritic")
    {
        out.push("critic cap hit without escalation".into());
    }
    out
}
