//! The sequential pipeline: intake, generation, syntax loop, critic loop,
//! proving with counterexample triage, and coverage closure.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::backend::{parse_reply, AgentBackend, AgentReply, AgentRequest, CritiqueVerdict, Role};
use super::config::{ConfigError, RunConfig};
use super::hil::{HilDecision, HilHandler, HilItem, HilKind, HilStatus, ModeHandler};
use crate::domain::{DesignModel, Event, LedgerError, RunLedger, Verdict, VerdictStatus};
use crate::engine::{
    check, compute_coverage, BoundProperty, CheckOptions, CoverageReport, EngineError, DEFAULT_BUDGET,
};
use crate::rca::{self, RcaContext, RcaError, RcaReport};
use crate::specgram::{
    parse_structured_spec, render_prompt_context, validate_against_design, CacheEntry, LearningCache, PromptContext,
    PromptOptions, RuleSet, SpecDiagnostic, SpecError, SpecGrammar, DEFAULT_TOP_K,
};
use crate::svapars::{
    analyze, apply_canonical_rewrites, diagnostic_tags, diagnostics_signature, parse_recovering, Analysis, LintCode,
    PropertyAst,
};
use crate::{format_hundredths, truncated_hundredths};

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("spec: {0}")]
    Spec(#[from] SpecError),
    /// The pipeline tried to write an event the ledger refuses; always a bug.
    #[error("ledger: {0}")]
    Ledger(#[from] LedgerError),
    #[error("rca: {0}")]
    Rca(#[from] RcaError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Phase {
    SpecIntake,
    Generation,
    SyntaxLoop,
    CriticLoop,
    Proving,
    CoverageLoop,
    Rca,
    Hil,
    Done,
}

impl Phase {
    /// Phases that may directly follow this one.
    pub fn successors(self) -> &'static [Phase] {
        use Phase::*;
        match self {
            SpecIntake => &[Generation],
            Generation => &[SyntaxLoop, Hil],
            SyntaxLoop => &[CriticLoop, Proving, Hil],
            CriticLoop => &[SyntaxLoop, Proving, Hil],
            Proving => &[Rca, CoverageLoop, Done],
            Rca => &[Proving, CoverageLoop, Hil],
            CoverageLoop => &[SyntaxLoop, Proving, Hil, Done],
            // back to whichever phase escalated
            Hil => &[Generation, SyntaxLoop, CriticLoop, Proving, Rca, CoverageLoop, Done],
            Done => &[],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PropertyStatus {
    /// Not yet through the syntax loop.
    Pending,
    Validated,
    /// Still has diagnostics; kept on a human's word.
    HumanAccepted,
    /// Replaced by a critic revision, an RCA patch or a human correction.
    Superseded,
    Dropped,
    /// Waiting on a human decision.
    Parked,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrackedProperty {
    pub id: String,
    pub text: String,
    /// generation, critic, coverage, rca, or hil.
    pub source: String,
    pub status: PropertyStatus,
    pub fix_attempts: u32,
    pub verdict: Option<Verdict>,
}

impl TrackedProperty {
    /// Counts toward the final assertion set.
    pub fn is_active(&self) -> bool {
        matches!(self.status, PropertyStatus::Validated | PropertyStatus::HumanAccepted)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Done,
    /// Finished, but some human decisions are still open.
    HilPending,
}

impl RunStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            RunStatus::Done => "done",
            RunStatus::HilPending => "hil_pending",
        }
    }
}

/// Headline numbers, finalized when the run reaches Done.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunKpis {
    pub n_assertions: usize,
    pub proven: usize,
    pub first_generation: bool,
    /// Largest per-property fix attempt count.
    pub fix_attempts: u32,
    pub pct_proven: String,
    pub pct_coverage: String,
}

/// Everything a finished run produced.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub run_id: String,
    pub status: RunStatus,
    pub ledger: RunLedger,
    pub properties: Vec<TrackedProperty>,
    pub coverage: Option<CoverageReport>,
    pub hil_items: Vec<HilItem>,
    /// Every phase entered, in order.
    pub phases: Vec<Phase>,
    pub kpis: RunKpis,
}

impl RunOutcome {
    pub fn active(&self) -> impl Iterator<Item = &TrackedProperty> {
        self.properties.iter().filter(|p| p.is_active())
    }

    pub fn pending_hil(&self) -> impl Iterator<Item = &HilItem> {
        self.hil_items.iter().filter(|i| i.status == HilStatus::Pending)
    }
}

/// Inputs shared by every phase of a run.
#[derive(Clone, Copy)]
pub struct Pipeline<'a> {
    pub design: &'a DesignModel,
    pub rules: &'a RuleSet,
    pub cache: &'a LearningCache,
    pub config: &'a RunConfig,
}

/// Run id from the inputs, so identical runs share an id. The cache counts as
/// an input: a rerun after a human correction gets a fresh id.
pub fn derive_run_id(
    design: &DesignModel,
    spec_text: &str,
    config: &RunConfig,
    backend_label: &str,
    cache: &LearningCache,
) -> String {
    let mut h = Sha256::new();
    let config = serde_json::to_string(config).expect("config serializes");
    let cache = serde_json::to_string(&cache.entries()).expect("cache serializes");
    for part in [design.source(), spec_text, &config, backend_label, &cache] {
        h.update((part.len() as u64).to_le_bytes());
        h.update(part.as_bytes());
    }
    let digest = h.finalize();
    let hex: String = digest.iter().take(6).map(|b| format!("{b:02x}")).collect();
    format!("run-{}-{hex}", design.name)
}

/// Run the whole pipeline with the shipped rulebook, a fresh seeded cache, and
/// the config's HIL mode.
pub fn run(
    design: &DesignModel,
    spec_text: &str,
    config: &RunConfig,
    backend: &mut dyn AgentBackend,
) -> Result<RunOutcome, RunError> {
    let rules = RuleSet::seeded();
    let cache = LearningCache::seeded();
    let pipe = Pipeline { design, rules: &rules, cache: &cache, config };
    let mut hil = ModeHandler(config.hil_mode);
    pipe.run(spec_text, backend, &mut hil)
}

impl<'a> Pipeline<'a> {
    pub fn run(
        &self,
        spec_text: &str,
        backend: &mut dyn AgentBackend,
        hil: &mut dyn HilHandler,
    ) -> Result<RunOutcome, RunError> {
        let mut s = Session::start(*self, spec_text, backend, hil)?;
        s.generate()?;
        s.critic_loop()?;
        s.prove_all()?;
        s.coverage_loop()?;
        s.finish()
    }
}

/// A run in progress. [`Pipeline::run`] drives it end to end; the phase
/// methods are public so single steps can be exercised on their own.
pub struct Session<'a, 'b> {
    pipe: Pipeline<'a>,
    backend: &'b mut dyn AgentBackend,
    hil: &'b mut dyn HilHandler,
    spec: SpecGrammar,
    run_id: String,
    ledger: RunLedger,
    clock: u64,
    phase: Phase,
    phases: Vec<Phase>,
    properties: Vec<TrackedProperty>,
    hil_items: Vec<HilItem>,
    coverage_rounds: u32,
    coverage: Option<CoverageReport>,
}

impl<'a, 'b> Session<'a, 'b> {
    /// Spec intake: parse the spec, check it against the design, open the ledger.
    pub fn start(
        pipe: Pipeline<'a>,
        spec_text: &str,
        backend: &'b mut dyn AgentBackend,
        hil: &'b mut dyn HilHandler,
    ) -> Result<Self, RunError> {
        pipe.config.validate()?;
        let spec = parse_structured_spec(spec_text)?;
        let run_id = pipe
            .config
            .run_id
            .clone()
            .unwrap_or_else(|| derive_run_id(pipe.design, spec_text, pipe.config, &backend.label(), pipe.cache));
        let ledger = RunLedger::new(run_id.clone(), pipe.design.name.clone());
        let mut s = Session {
            pipe,
            backend,
            hil,
            spec,
            run_id,
            ledger,
            clock: 0,
            phase: Phase::SpecIntake,
            phases: vec![Phase::SpecIntake],
            properties: Vec::new(),
            hil_items: Vec::new(),
            coverage_rounds: 0,
            coverage: None,
        };
        let diagnostics = validate_against_design(&s.spec, pipe.design)
            .into_iter()
            .map(|d| match d {
                SpecDiagnostic::UnknownSignal(n) => format!("unknown signal `{n}`"),
            })
            .collect();
        s.emit(Event::SpecParsed { signals: s.spec.signals.clone(), edge: s.spec.edge().to_string(), diagnostics })?;
        Ok(s)
    }

    pub fn run_id(&self) -> &str {
        &self.run_id
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn ledger(&self) -> &RunLedger {
        &self.ledger
    }

    pub fn properties(&self) -> &[TrackedProperty] {
        &self.properties
    }

    pub fn coverage_rounds(&self) -> u32 {
        self.coverage_rounds
    }

    fn enter(&mut self, next: Phase) {
        if next == self.phase {
            return;
        }
        debug_assert!(self.phase.successors().contains(&next), "illegal transition {:?} -> {next:?}", self.phase);
        self.phase = next;
        self.phases.push(next);
    }

    /// Logical clock: one tick per event, so replays are byte-identical.
    fn emit(&mut self, event: Event) -> Result<(), RunError> {
        let ts = self.clock;
        self.clock += 1;
        self.ledger.append(ts, event)?;
        Ok(())
    }

    fn prompt(&self, signature: &str, tags: &[String], sections: &[(&str, String)]) -> PromptContext {
        let entries = self.pipe.cache.lookup(signature, tags);
        let opts = PromptOptions {
            top_k: DEFAULT_TOP_K,
            budget: self.pipe.config.prompt_budget,
            design: Some(self.pipe.design),
        };
        let mut ctx = render_prompt_context(&self.spec, &entries, self.pipe.rules, &opts);
        for (title, body) in sections {
            ctx = ctx.with_section(title, body, self.pipe.config.prompt_budget);
        }
        if ctx.truncated {
            tracing::info!(run = %self.run_id, budget = self.pipe.config.prompt_budget, "prompt context truncated");
        }
        ctx
    }

    /// One call with a single retry on a transport or protocol failure.
    fn ask(&mut self, role: Role, request: &AgentRequest) -> Result<Option<AgentReply>, RunError> {
        for retry in [true, false] {
            match self.backend.call(role, request).and_then(|raw| parse_reply(role, &raw)) {
                Ok(r) => return Ok(Some(r)),
                Err(e) => self.emit(Event::BackendProtocolError {
                    role: role.as_str().into(),
                    message: e.to_string(),
                    retry,
                })?,
            }
        }
        Ok(None)
    }

    fn add_property(&mut self, text: String, source: &str) -> Result<usize, RunError> {
        let id = format!("p{}", self.properties.len() + 1);
        self.emit(Event::PropertyGenerated { property: id.clone(), source: source.into(), text: text.clone() })?;
        self.properties.push(TrackedProperty {
            id,
            text,
            source: source.into(),
            status: PropertyStatus::Pending,
            fix_attempts: 0,
            verdict: None,
        });
        Ok(self.properties.len() - 1)
    }

    fn lint(&self, text: &str) -> Analysis {
        analyze(text, self.pipe.design, Some(&self.spec), self.pipe.rules)
    }

    /// Lint and log the outcome.
    fn lint_round(&mut self, idx: usize) -> Result<Analysis, RunError> {
        let a = self.lint(&self.properties[idx].text);
        let codes = code_names(&a);
        self.emit(Event::LintRound { property: self.properties[idx].id.clone(), codes, clean: a.is_clean() })?;
        Ok(a)
    }

    #[allow(clippy::too_many_arguments)]
    fn escalate(
        &mut self,
        kind: HilKind,
        property_id: &str,
        text: &str,
        diagnostics: Vec<String>,
        error_signature: String,
        prompt: String,
        reason: &str,
        report: Option<RcaReport>,
    ) -> Result<HilDecision, RunError> {
        let prompt = if prompt.is_empty() {
            let mut sections = vec![("escalation", reason.to_string())];
            if !text.is_empty() {
                sections.push(("property", text.to_string()));
            }
            if !diagnostics.is_empty() {
                sections.push(("diagnostics", diagnostics.join("\n")));
            }
            self.prompt(&error_signature, &[], &sections).text
        } else {
            prompt
        };
        let back = self.phase;
        self.enter(Phase::Hil);
        let mut item = HilItem {
            item_id: format!("{}-h{}", self.run_id, self.hil_items.len() + 1),
            run_id: self.run_id.clone(),
            kind,
            property_id: property_id.into(),
            text: text.into(),
            diagnostics,
            error_signature,
            prompt,
            reason: reason.into(),
            report,
            status: HilStatus::Pending,
            correction: None,
        };
        self.emit(Event::HilRequested {
            item: item.item_id.clone(),
            hil_kind: kind.as_str().into(),
            property: property_id.into(),
            reason: reason.into(),
        })?;
        let res = self.hil.escalate(&item);
        let decision = match item.transition(&res.decision) {
            Ok(()) => res.decision,
            // a handler answering `pending` with a correction is treated as pending
            Err(_) => HilDecision::Pending,
        };
        if decision != HilDecision::Pending {
            let correction = match &decision {
                HilDecision::Corrected(t) => Some(t.clone()),
                _ => None,
            };
            self.emit(Event::HilResolved {
                item: item.item_id.clone(),
                decision: decision.as_str().into(),
                correction,
            })?;
            if let Some(record) = res.record {
                self.emit(Event::DatasetRecordEmitted { item: item.item_id.clone(), record })?;
            }
        }
        self.hil_items.push(item);
        self.enter(back);
        Ok(decision)
    }

    /// Generation: ask for the initial batch and push each through the syntax loop.
    pub fn generate(&mut self) -> Result<(), RunError> {
        self.enter(Phase::Generation);
        let tags = self.spec.tags();
        let ctx = self.prompt("", &tags, &[("task", "Write one SVA property per condition.".into())]);
        let req = AgentRequest { prompt: ctx.text.clone(), ..Default::default() };
        let mut new = Vec::new();
        match self.ask(Role::GenerateProperties, &req)? {
            Some(reply) => {
                for t in reply.properties {
                    new.push(self.add_property(t, "generation")?);
                }
            }
            None => {
                let d = self.escalate(
                    HilKind::UnfixableProperty,
                    "",
                    "",
                    vec![],
                    String::new(),
                    ctx.text,
                    "backend protocol error during generation",
                    None,
                )?;
                if let HilDecision::Corrected(t) = d {
                    new.push(self.add_property(t, "hil")?);
                }
            }
        }
        self.enter(Phase::SyntaxLoop);
        for i in new {
            self.syntax_loop(i)?;
        }
        Ok(())
    }

    /// Cache entry whose correction binds to this design and needs at most
    /// mechanical fixes.
    fn cache_candidate(
        &self,
        signature: &str,
        tags: &[String],
        current: &str,
        tried: &mut BTreeSet<u64>,
    ) -> Option<CacheEntry> {
        for e in self.pipe.cache.lookup(signature, tags) {
            if !tried.insert(e.id) || e.corrected_snippet.trim() == current.trim() {
                continue;
            }
            let a = self.lint(&e.corrected_snippet);
            let usable =
                a.ast.is_some() && a.diagnostics.iter().all(|d| d.fix.is_some() && d.code != LintCode::UnknownSignal);
            if usable {
                return Some(e);
            }
        }
        None
    }

    /// Lint, then fix until clean or out of attempts. Each attempt uses the
    /// canonical rewrite when every diagnostic has one, else a usable cache
    /// correction, else the refine agent.
    pub fn syntax_loop(&mut self, idx: usize) -> Result<(), RunError> {
        self.enter(Phase::SyntaxLoop);
        let mut tried = BTreeSet::new();
        let mut last_prompt = String::new();
        loop {
            let a = self.lint_round(idx)?;
            if a.is_clean() {
                self.properties[idx].status = PropertyStatus::Validated;
                return Ok(());
            }
            let signature = diagnostics_signature(&a.diagnostics);
            let tags = diagnostic_tags(&a.diagnostics);
            let messages: Vec<String> =
                a.diagnostics.iter().map(|d| format!("{}: {}", d.code.as_str(), d.message)).collect();
            let text = self.properties[idx].text.clone();
            if self.properties[idx].fix_attempts >= self.pipe.config.max_fix_attempts {
                let reason = format!("still failing after {} fix attempts", self.properties[idx].fix_attempts);
                return self.unfixable(idx, messages, signature, last_prompt, &reason);
            }

            let canonical = a
                .ast
                .as_ref()
                .filter(|_| a.diagnostics.iter().all(|d| d.fix.is_some()))
                .and_then(|ast| apply_canonical_rewrites(ast, &a.diagnostics).ok());
            let (via, next) = if let Some(fixed) = canonical {
                ("canonical".to_string(), fixed.render())
            } else if let Some(e) = self.cache_candidate(&signature, &tags, &text, &mut tried) {
                (format!("cache:{}", e.id), e.corrected_snippet)
            } else {
                let ctx =
                    self.prompt(&signature, &tags, &[("property", text.clone()), ("diagnostics", messages.join("\n"))]);
                last_prompt = ctx.text.clone();
                let req = AgentRequest {
                    prompt: ctx.text,
                    properties: vec![text.clone()],
                    diagnostics: messages.clone(),
                    ..Default::default()
                };
                match self.ask(Role::RefineProperty, &req)? {
                    Some(reply) => ("agent".to_string(), reply.properties.into_iter().next().unwrap_or(text.clone())),
                    None => {
                        return self.unfixable(
                            idx,
                            messages,
                            signature,
                            last_prompt,
                            "backend protocol error during refinement",
                        )
                    }
                }
            };
            let p = &mut self.properties[idx];
            p.fix_attempts += 1;
            p.text = next.clone();
            let event = Event::FixAttempt {
                property: p.id.clone(),
                attempt: p.fix_attempts,
                codes: code_names(&a),
                via,
                text: next,
            };
            self.emit(event)?;
        }
    }

    fn unfixable(
        &mut self,
        idx: usize,
        messages: Vec<String>,
        signature: String,
        prompt: String,
        reason: &str,
    ) -> Result<(), RunError> {
        let (id, text) = (self.properties[idx].id.clone(), self.properties[idx].text.clone());
        let d = self.escalate(HilKind::UnfixableProperty, &id, &text, messages, signature, prompt, reason, None)?;
        self.properties[idx].status = match d {
            HilDecision::Pending => PropertyStatus::Parked,
            HilDecision::Accepted => PropertyStatus::HumanAccepted,
            HilDecision::Declined => PropertyStatus::Dropped,
            HilDecision::Corrected(t) => {
                self.properties[idx].text = t;
                let a = self.lint_round(idx)?;
                if a.is_clean() {
                    PropertyStatus::Validated
                } else {
                    PropertyStatus::Dropped
                }
            }
        };
        Ok(())
    }

    fn batch(&self) -> Vec<usize> {
        (0..self.properties.len()).filter(|&i| self.properties[i].is_active()).collect()
    }

    /// Critic loop: stop after the configured number of consecutive approvals
    /// with a diagnostic-free batch; escalate at the round cap.
    pub fn critic_loop(&mut self) -> Result<(), RunError> {
        if self.batch().is_empty() {
            return Ok(());
        }
        self.enter(Phase::CriticLoop);
        let mut streak = 0;
        let mut last_notes = String::new();
        let mut last_prompt = String::new();
        for round in 1..=self.pipe.config.max_critic_rounds {
            let batch = self.batch();
            let texts: Vec<String> = batch.iter().map(|&i| self.properties[i].text.clone()).collect();
            let ctx = self.prompt("", &self.spec.tags(), &[("properties", texts.join("\n"))]);
            last_prompt = ctx.text.clone();
            let req = AgentRequest { prompt: ctx.text, properties: texts.clone(), ..Default::default() };
            let Some(reply) = self.ask(Role::Critique, &req)? else {
                return self.unconverged(&texts, last_prompt, "backend protocol error during critique");
            };
            let critique = reply.critique.expect("checked by parse_reply");
            let clean = batch.iter().all(|&i| self.lint(&self.properties[i].text).is_clean());
            self.emit(Event::CriticRound {
                round,
                verdict: match critique.verdict {
                    CritiqueVerdict::Approve => "approve".into(),
                    CritiqueVerdict::Revise => "revise".into(),
                },
                notes: critique.notes.clone(),
                clean,
            })?;
            last_notes = critique.notes;
            if critique.verdict == CritiqueVerdict::Approve && clean {
                streak += 1;
                if streak >= self.pipe.config.convergence_approvals {
                    return Ok(());
                }
                continue;
            }
            streak = 0;
            if critique.verdict == CritiqueVerdict::Revise && !reply.properties.is_empty() {
                for &i in &batch {
                    self.properties[i].status = PropertyStatus::Superseded;
                }
                let mut new = Vec::new();
                for t in reply.properties {
                    new.push(self.add_property(t, "critic")?);
                }
                self.enter(Phase::SyntaxLoop);
                for i in new {
                    self.syntax_loop(i)?;
                }
                if self.batch().is_empty() {
                    return Ok(());
                }
                self.enter(Phase::CriticLoop);
            }
        }
        let texts: Vec<String> = self.batch().iter().map(|&i| self.properties[i].text.clone()).collect();
        let reason = format!("no convergence after {} critic rounds: {last_notes}", self.pipe.config.max_critic_rounds);
        self.unconverged(&texts, last_prompt, &reason)
    }

    fn unconverged(&mut self, texts: &[String], prompt: String, reason: &str) -> Result<(), RunError> {
        let d = self.escalate(
            HilKind::UnconvergedCritic,
            "",
            &texts.join("\n"),
            vec![],
            String::new(),
            prompt,
            reason,
            None,
        )?;
        match d {
            HilDecision::Pending | HilDecision::Accepted => {}
            HilDecision::Declined => {
                for i in self.batch() {
                    self.properties[i].status = PropertyStatus::Dropped;
                }
            }
            HilDecision::Corrected(t) => {
                for i in self.batch() {
                    self.properties[i].status = PropertyStatus::Superseded;
                }
                let i = self.add_property(t, "hil")?;
                let a = self.lint_round(i)?;
                self.properties[i].status =
                    if a.is_clean() { PropertyStatus::Validated } else { PropertyStatus::Dropped };
            }
        }
        Ok(())
    }

    fn ast_of(&self, idx: usize) -> Option<PropertyAst> {
        parse_recovering(&self.properties[idx].text).ok().map(|p| p.ast)
    }

    /// Check one property and log the verdict. Properties that do not bind get none.
    fn prove(&mut self, idx: usize) -> Result<Option<VerdictStatus>, RunError> {
        self.enter(Phase::Proving);
        let Some(ast) = self.ast_of(idx) else { return Ok(None) };
        let Ok(bound) = BoundProperty::bind(&ast, self.pipe.design) else { return Ok(None) };
        let id = self.properties[idx].id.clone();
        let depth = self.pipe.config.proof_depth;
        let mut v = match check(&bound, CheckOptions { depth, budget: DEFAULT_BUDGET }) {
            Ok(v) => v,
            Err(EngineError::DepthTooSmall { .. }) => Verdict::inconclusive(&id, depth, false, 0),
            Err(EngineError::UnboundName(_)) => return Ok(None),
        };
        v.property_id = id.clone();
        let status = v.status;
        self.emit(Event::EngineVerdict {
            property: id.clone(),
            status,
            depth: v.depth,
            explored: v.explored,
            cex: v.cex.as_ref().map(|c| format!("{id}@{}", c.violated_at)),
            signals: bound.bound_signals(),
        })?;
        self.properties[idx].verdict = Some(v);
        Ok(Some(status))
    }

    /// Prove every active property that has no verdict yet; triage failures.
    pub fn prove_all(&mut self) -> Result<(), RunError> {
        self.enter(Phase::Proving);
        for i in 0..self.properties.len() {
            if self.properties[i].is_active()
                && self.properties[i].verdict.is_none()
                && self.prove(i)? == Some(VerdictStatus::Failed)
            {
                self.triage(i)?;
            }
        }
        Ok(())
    }

    /// Root-cause rounds for a failed property. A consistent report with a
    /// patch replaces the property; one without a patch confirms a design bug.
    fn triage(&mut self, start: usize) -> Result<(), RunError> {
        let mut cur = start;
        let mut round = 1;
        let mut last: Option<RcaReport> = None;
        while round <= self.pipe.config.max_rca_rounds {
            self.enter(Phase::Rca);
            let ast = self.ast_of(cur).expect("proven properties parse");
            let verdict = self.properties[cur].verdict.clone().expect("failed verdict present");
            let ctx = RcaContext::new(self.pipe.rules, self.pipe.config.proof_depth).with_cache(self.pipe.cache);
            let report = rca::analyze(&verdict, &ast, Some(&self.spec), self.pipe.design, round, &ctx)?;
            self.emit(Event::RcaRound {
                cex: report.cex_id.clone(),
                property: self.properties[cur].id.clone(),
                round,
                class: format!("{:?}", report.root_cause_class),
                consistency: report.consistency,
                patch: report.proposed_patch.clone(),
            })?;
            round += 1;
            if report.resolved() {
                let Some(patch) = report.proposed_patch.clone() else { return Ok(()) };
                let next = self.add_property(patch, "rca")?;
                if self.lint_round(next)?.is_clean() {
                    self.properties[next].status = PropertyStatus::Validated;
                    self.properties[cur].status = PropertyStatus::Superseded;
                    match self.prove(next)? {
                        Some(VerdictStatus::Failed) => cur = next,
                        _ => return Ok(()),
                    }
                } else {
                    self.properties[next].status = PropertyStatus::Dropped;
                }
            }
            last = Some(report);
        }
        self.enter(Phase::Rca);
        let (id, text) = (self.properties[cur].id.clone(), self.properties[cur].text.clone());
        let reason = format!("unresolved after {} RCA rounds", self.pipe.config.max_rca_rounds);
        let d =
            self.escalate(HilKind::UnresolvedRca, &id, &text, vec![], String::new(), String::new(), &reason, last)?;
        match d {
            HilDecision::Pending | HilDecision::Accepted => {}
            HilDecision::Declined => self.properties[cur].status = PropertyStatus::Dropped,
            HilDecision::Corrected(t) => {
                self.properties[cur].status = PropertyStatus::Superseded;
                let i = self.add_property(t, "hil")?;
                if self.lint_round(i)?.is_clean() {
                    self.properties[i].status = PropertyStatus::Validated;
                    self.prove(i)?;
                } else {
                    self.properties[i].status = PropertyStatus::Dropped;
                }
            }
        }
        Ok(())
    }

    /// Coverage over the active properties' verdicts.
    pub fn coverage_report(&self) -> CoverageReport {
        let mut bound = Vec::new();
        for (i, p) in self.properties.iter().enumerate() {
            if let (true, Some(v)) = (p.is_active(), &p.verdict) {
                if let Some(b) = self.ast_of(i).and_then(|ast| BoundProperty::bind(&ast, self.pipe.design).ok()) {
                    bound.push((b, v));
                }
            }
        }
        let pairs: Vec<(&BoundProperty<'_>, &Verdict)> = bound.iter().map(|(b, v)| (b, *v)).collect();
        compute_coverage(self.pipe.design, &pairs)
    }

    /// Repeat coverage rounds until no holes remain, coverage stops
    /// improving, or the round cap is reached.
    pub fn coverage_loop(&mut self) -> Result<(), RunError> {
        self.enter(Phase::CoverageLoop);
        while self.coverage_rounds < self.pipe.config.max_coverage_rounds {
            if self.coverage_report().holes.is_empty() {
                break;
            }
            let (before, after) = self.coverage_round()?;
            if after <= before {
                break;
            }
        }
        self.coverage = Some(self.coverage_report());
        Ok(())
    }

    /// One round: each hole's driving expression goes to the agent, the
    /// replies go through the syntax loop and are proven. Returns covered
    /// counts before and after.
    pub fn coverage_round(&mut self) -> Result<(usize, usize), RunError> {
        self.enter(Phase::CoverageLoop);
        self.coverage_rounds += 1;
        let before = self.coverage_report();
        let mut requested = Vec::new();
        let mut new = Vec::new();
        for hole in &before.holes {
            let body = format!("uncovered signal `{}` driven by `{}`", hole.signal, hole.locus);
            let ctx = self.prompt("", &self.spec.tags(), &[("coverage hole", body)]);
            let req = AgentRequest {
                prompt: ctx.text.clone(),
                signal: Some(hole.signal.clone()),
                locus: Some(hole.locus.clone()),
                ..Default::default()
            };
            requested.push(hole.signal.clone());
            match self.ask(Role::ProposeCoverageProperty, &req)? {
                Some(reply) => {
                    for t in reply.properties {
                        new.push(self.add_property(t, "coverage")?);
                    }
                }
                None => {
                    let reason = format!("backend protocol error proposing a property for `{}`", hole.signal);
                    let d = self.escalate(
                        HilKind::UnfixableProperty,
                        "",
                        "",
                        vec![],
                        String::new(),
                        ctx.text,
                        &reason,
                        None,
                    )?;
                    if let HilDecision::Corrected(t) = d {
                        new.push(self.add_property(t, "hil")?);
                    }
                }
            }
        }
        if !new.is_empty() {
            self.enter(Phase::SyntaxLoop);
            for &i in &new {
                self.syntax_loop(i)?;
            }
            self.prove_all()?;
        }
        self.enter(Phase::CoverageLoop);
        let after = self.coverage_report();
        self.emit(Event::CoverageRound {
            round: self.coverage_rounds,
            covered_before: before.covered_count(),
            covered_after: after.covered_count(),
            total: after.total_signals,
            holes: before.holes.iter().map(|h| h.signal.clone()).collect(),
            requested,
        })?;
        let counts = (before.covered_count(), after.covered_count());
        self.coverage = Some(after);
        Ok(counts)
    }

    /// Close the ledger and finalize the KPIs.
    pub fn finish(mut self) -> Result<RunOutcome, RunError> {
        self.enter(Phase::Done);
        let coverage = self.coverage.take().unwrap_or_else(|| self.coverage_report());
        let with_verdict: Vec<&TrackedProperty> =
            self.properties.iter().filter(|p| p.is_active() && p.verdict.is_some()).collect();
        let n = with_verdict.len();
        let proven = with_verdict.iter().filter(|p| p.verdict.as_ref().is_some_and(Verdict::is_proven)).count();
        let status = if self.hil_items.iter().any(|i| i.status == HilStatus::Pending) {
            RunStatus::HilPending
        } else {
            RunStatus::Done
        };
        self.emit(Event::RunCompleted {
            status: status.as_str().into(),
            n_assertions: n,
            proven,
            covered: coverage.covered_count(),
            total_signals: coverage.total_signals,
        })?;
        let kpis = RunKpis {
            n_assertions: n,
            proven,
            first_generation: self.properties.iter().all(|p| p.fix_attempts == 0),
            fix_attempts: self.properties.iter().map(|p| p.fix_attempts).max().unwrap_or(0),
            pct_proven: format_hundredths(truncated_hundredths(proven as u64, n as u64)),
            pct_coverage: coverage.percent.clone(),
        };
        Ok(RunOutcome {
            run_id: self.run_id,
            status,
            ledger: self.ledger,
            properties: self.properties,
            coverage: Some(coverage),
            hil_items: self.hil_items,
            phases: self.phases,
            kpis,
        })
    }
}

/// Distinct diagnostic codes in first-seen order.
fn code_names(a: &Analysis) -> Vec<String> {
    let mut codes: Vec<String> = Vec::new();
    for d in &a.diagnostics {
        if !codes.iter().any(|c| c == d.code.as_str()) {
            codes.push(d.code.as_str().into());
        }
    }
    codes
}
