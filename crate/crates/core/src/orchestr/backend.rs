//! Agent backends and the reply wire contract.
//!
//! Every call sends a role and a request context and gets back a JSON object
//! `{"properties": [text, ...], "critique": {"verdict": "approve"|"revise", "notes": text}}`.
//! Both fields are optional; unknown fields are rejected.

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    GenerateProperties,
    RefineProperty,
    Critique,
    ProposeCoverageProperty,
}

impl Role {
    pub const ALL: [Role; 4] =
        [Role::GenerateProperties, Role::RefineProperty, Role::Critique, Role::ProposeCoverageProperty];

    pub fn as_str(self) -> &'static str {
        match self {
            Role::GenerateProperties => "generate_properties",
            Role::RefineProperty => "refine_property",
            Role::Critique => "critique",
            Role::ProposeCoverageProperty => "propose_coverage_property",
        }
    }
}

/// Context sent with a call. Fields that do not apply to a role are empty.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentRequest {
    /// Spec, rules and cache entries rendered for the agent.
    pub prompt: String,
    /// Property under repair, or the batch under critique (one per line).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub properties: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub diagnostics: Vec<String>,
    /// Coverage hole being targeted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub signal: Option<String>,
    /// Design expression driving the hole.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub locus: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CritiqueVerdict {
    Approve,
    Revise,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Critique {
    pub verdict: CritiqueVerdict,
    #[serde(default)]
    pub notes: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentReply {
    #[serde(default)]
    pub properties: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub critique: Option<Critique>,
}

impl AgentReply {
    pub fn properties(texts: impl IntoIterator<Item = impl Into<String>>) -> Self {
        AgentReply { properties: texts.into_iter().map(Into::into).collect(), critique: None }
    }

    pub fn critique(verdict: CritiqueVerdict, notes: impl Into<String>) -> Self {
        AgentReply { properties: vec![], critique: Some(Critique { verdict, notes: notes.into() }) }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BackendError {
    /// The reply did not match the wire contract.
    #[error("malformed {role} reply: {message}")]
    Protocol { role: &'static str, message: String },
    #[error("backend transport: {0}")]
    Transport(String),
}

/// Decode a raw reply, checking the fields the role needs.
pub fn parse_reply(role: Role, raw: &str) -> Result<AgentReply, BackendError> {
    let bad = |message: String| BackendError::Protocol { role: role.as_str(), message };
    let reply: AgentReply = serde_json::from_str(raw).map_err(|e| bad(e.to_string()))?;
    if role == Role::Critique && reply.critique.is_none() {
        return Err(bad("critique reply without a `critique` object".into()));
    }
    if reply.properties.iter().any(|p| p.trim().is_empty()) {
        return Err(bad("empty property text".into()));
    }
    Ok(reply)
}

pub trait AgentBackend {
    /// One raw reply for `role`. The orchestrator decodes it with [`parse_reply`].
    fn call(&mut self, role: Role, request: &AgentRequest) -> Result<String, BackendError>;

    /// Label used in KPI rows.
    fn label(&self) -> String {
        "agent".into()
    }
}

/// A scripted reply: a structured reply, or raw wire text sent verbatim.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScriptedReply {
    Raw(String),
    Reply(AgentReply),
}

impl ScriptedReply {
    fn wire(&self) -> String {
        match self {
            ScriptedReply::Raw(s) => s.clone(),
            ScriptedReply::Reply(r) => serde_json::to_string(r).expect("reply serializes"),
        }
    }
}

/// Replies per role, consumed in order.
///
/// Once a role's queue is exhausted the backend answers with an empty
/// property list, or an approval for critiques. Coverage requests for a
/// signal listed in `coverage_templates` are answered from that table
/// without touching the queue.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub generate_properties: Vec<ScriptedReply>,
    pub refine_property: Vec<ScriptedReply>,
    pub critique: Vec<ScriptedReply>,
    pub propose_coverage_property: Vec<ScriptedReply>,
    pub coverage_templates: BTreeMap<String, String>,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    fn queue(&self, role: Role) -> &[ScriptedReply] {
        match role {
            Role::GenerateProperties => &self.generate_properties,
            Role::RefineProperty => &self.refine_property,
            Role::Critique => &self.critique,
            Role::ProposeCoverageProperty => &self.propose_coverage_property,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ScriptedBackend {
    scenario: Scenario,
    queues: BTreeMap<Role, VecDeque<ScriptedReply>>,
    calls: Vec<(Role, AgentRequest)>,
}

impl ScriptedBackend {
    pub fn new(scenario: Scenario) -> Self {
        let queues = Role::ALL.iter().map(|&r| (r, scenario.queue(r).iter().cloned().collect())).collect();
        ScriptedBackend { scenario, queues, calls: Vec::new() }
    }

    /// Every request received so far.
    pub fn calls(&self) -> &[(Role, AgentRequest)] {
        &self.calls
    }
}

impl AgentBackend for ScriptedBackend {
    fn call(&mut self, role: Role, request: &AgentRequest) -> Result<String, BackendError> {
        self.calls.push((role, request.clone()));
        if role == Role::ProposeCoverageProperty {
            if let Some(t) = request.signal.as_ref().and_then(|s| self.scenario.coverage_templates.get(s)) {
                return Ok(ScriptedReply::Reply(AgentReply::properties([t.clone()])).wire());
            }
        }
        let next = self.queues.get_mut(&role).and_then(VecDeque::pop_front);
        Ok(match next {
            Some(r) => r.wire(),
            None if role == Role::Critique => {
                ScriptedReply::Reply(AgentReply::critique(CritiqueVerdict::Approve, "no further remarks")).wire()
            }
            None => ScriptedReply::Reply(AgentReply::default()).wire(),
        })
    }

    fn label(&self) -> String {
        format!("scripted:{}", self.scenario.name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wire_contract() {
        let r = parse_reply(Role::Critique, r#"{"critique":{"verdict":"revise","notes":"n"}}"#).unwrap();
        assert_eq!(r.critique.unwrap().verdict, CritiqueVerdict::Revise);
        assert!(parse_reply(Role::Critique, r#"{"properties":[]}"#).is_err());
        assert!(parse_reply(Role::GenerateProperties, "not json").is_err());
        assert!(parse_reply(Role::GenerateProperties, r#"{"props":[]}"#).is_err());
        assert!(parse_reply(Role::GenerateProperties, r#"{"properties":[""]}"#).is_err());
        let r = parse_reply(Role::GenerateProperties, r#"{"properties":["a |-> b"]}"#).unwrap();
        assert_eq!(r.properties, ["a |-> b"]);
    }

    #[test]
    fn scripted_queue_then_defaults() {
        let s = Scenario::from_json(
            r#"{"name":"t","generate_properties":[{"properties":["p"]},"garbage"],
                "coverage_templates":{"busy":"q"}}"#,
        )
        .unwrap();
        let mut b = ScriptedBackend::new(s);
        let req = AgentRequest::default();
        assert_eq!(b.call(Role::GenerateProperties, &req).unwrap(), r#"{"properties":["p"]}"#);
        assert_eq!(b.call(Role::GenerateProperties, &req).unwrap(), "garbage");
        assert_eq!(b.call(Role::GenerateProperties, &req).unwrap(), r#"{"properties":[]}"#);
        let c = parse_reply(Role::Critique, &b.call(Role::Critique, &req).unwrap()).unwrap();
        assert_eq!(c.critique.unwrap().verdict, CritiqueVerdict::Approve);
        let cov = AgentRequest { signal: Some("busy".into()), ..Default::default() };
        assert_eq!(b.call(Role::ProposeCoverageProperty, &cov).unwrap(), r#"{"properties":["q"]}"#);
        assert_eq!(b.calls().len(), 5);
        assert_eq!(b.label(), "scripted:t");
    }
}
