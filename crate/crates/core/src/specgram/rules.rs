use serde::{Deserialize, Serialize};

use crate::domain::DesignModel;
use crate::svapars::PropertyAst;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RuleScope {
    DesignAgnostic,
    DesignSpecific,
}

/// Structural predicates decidable from the property AST and the design alone.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleTrigger {
    /// Design declares a reset, property has no `disable iff` and is not marked post-reset.
    ResetWithoutDisable,
    /// Property samples a signal other than the design clock.
    ForeignClock,
}

impl RuleTrigger {
    pub fn fires(&self, ast: &PropertyAst, design: &DesignModel) -> bool {
        match self {
            RuleTrigger::ResetWithoutDisable => design.reset.is_some() && ast.disable.is_none() && !ast.post_reset,
            RuleTrigger::ForeignClock => ast.clock.signal != design.clock,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rule {
    pub id: String,
    pub trigger: RuleTrigger,
    /// Diagnostic template; `{reset}` and `{clock}` are substituted from the design.
    pub action: String,
    pub scope: RuleScope,
}

impl Rule {
    pub fn render_action(&self, design: &DesignModel) -> String {
        let reset = design.reset.as_ref().map(|r| r.active_expr()).unwrap_or_default();
        self.action.replace("{reset}", &reset).replace("{clock}", &design.clock)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleSet {
    pub rules: Vec<Rule>,
}

impl RuleSet {
    pub fn empty() -> Self {
        RuleSet::default()
    }

    /// The shipped rulebook: the design-agnostic reset rule and the clock rule.
    pub fn seeded() -> Self {
        RuleSet {
            rules: vec![
                Rule {
                    id: "R1".into(),
                    trigger: RuleTrigger::ResetWithoutDisable,
                    action: "add 'disable iff ({reset})' so the property is not checked while reset is asserted".into(),
                    scope: RuleScope::DesignAgnostic,
                },
                Rule {
                    id: "R2".into(),
                    trigger: RuleTrigger::ForeignClock,
                    action: "sample on the design clock '{clock}'".into(),
                    scope: RuleScope::DesignAgnostic,
                },
            ],
        }
    }

    pub fn get(&self, trigger: &RuleTrigger) -> Option<&Rule> {
        self.rules.iter().find(|r| &r.trigger == trigger)
    }

    pub fn push(&mut self, rule: Rule) {
        self.rules.push(rule);
    }
}
