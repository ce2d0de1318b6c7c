use std::collections::BTreeMap;
use std::sync::Arc;

use serde::Deserialize;

use super::{Agent, AgentError, AgentRequest, Completion, Phase};
use crate::deal::Deal;
use crate::deal_space::enumerate_deals;
use crate::game::{GameConfig, Score};

/// Everything a scripted policy may look at.
#[derive(Debug, Clone, Copy)]
pub struct PolicyContext<'a> {
    pub config: &'a GameConfig,
    pub party: usize,
    pub system: &'a str,
    pub prompt: &'a str,
    pub seed: u64,
    pub params: &'a serde_json::Value,
    pub phase: Phase,
}

/// A deterministic reply generator. Identical contexts must give identical
/// replies.
pub trait ScriptedPolicy: Send + Sync {
    fn respond(&self, ctx: &PolicyContext<'_>) -> Result<String, AgentError>;
}

impl<F> ScriptedPolicy for F
where
    F: Fn(&PolicyContext<'_>) -> Result<String, AgentError> + Send + Sync,
{
    fn respond(&self, ctx: &PolicyContext<'_>) -> Result<String, AgentError> {
        self(ctx)
    }
}

pub const BUILTIN_POLICIES: [&str; 5] = [
    "echo-initial-deal",
    "oracle-negotiator",
    "stubborn",
    "malformed",
    "failing",
];

#[derive(Default)]
pub struct PolicyRegistry {
    policies: BTreeMap<String, Arc<dyn ScriptedPolicy>>,
}

impl PolicyRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_builtins() -> Self {
        let mut registry = Self::new();
        registry.register("echo-initial-deal", EchoInitialDeal).unwrap();
        registry.register("oracle-negotiator", OracleNegotiator).unwrap();
        registry.register("stubborn", Stubborn).unwrap();
        registry.register("malformed", Malformed).unwrap();
        registry.register("failing", Failing).unwrap();
        registry
    }

    pub fn register(&mut self, id: impl Into<String>, policy: impl ScriptedPolicy + 'static) -> Result<(), AgentError> {
        let id = id.into();
        if self.policies.contains_key(&id) {
            return Err(AgentError::DuplicatePolicy(id));
        }
        self.policies.insert(id, Arc::new(policy));
        Ok(())
    }

    pub fn resolve(&self, id: &str) -> Result<Arc<dyn ScriptedPolicy>, AgentError> {
        self.policies
            .get(id)
            .cloned()
            .ok_or_else(|| AgentError::UnknownPolicy(id.to_string()))
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.policies.keys().map(String::as_str)
    }
}

pub struct ScriptedAgent {
    id: String,
    policy: Arc<dyn ScriptedPolicy>,
    params: serde_json::Value,
}

impl ScriptedAgent {
    pub fn new(id: String, policy: Arc<dyn ScriptedPolicy>, params: serde_json::Value) -> Self {
        Self { id, policy, params }
    }

    pub fn id(&self) -> &str {
        &self.id
    }
}

impl Agent for ScriptedAgent {
    fn complete(&self, request: &AgentRequest<'_>) -> Result<Completion, AgentError> {
        let ctx = PolicyContext {
            config: request.config,
            party: request.party,
            system: request.system,
            prompt: request.prompt,
            seed: request.seed,
            params: &self.params,
            phase: request.phase,
        };
        let text = self.policy.respond(&ctx)?;
        if text.trim().is_empty() {
            return Err(AgentError::EmptyCompletion);
        }
        Ok(Completion::text(text))
    }
}

fn policy_error(policy: &str, err: impl std::fmt::Display) -> AgentError {
    AgentError::Policy {
        policy: policy.to_string(),
        message: err.to_string(),
    }
}

/// The deal maximizing the party's own score; ties go to the first deal in
/// enumeration order.
pub fn own_best_deal(config: &GameConfig, party: usize) -> Result<Deal, AgentError> {
    best_by(config, |deal| {
        let own = config.deal_score_unchecked(deal, party);
        Some(own)
    })
}

/// The deal with the highest collective score among those acceptable to the
/// party; ties go to the first deal in enumeration order. Falls back to the
/// party's own best deal when nothing is acceptable to it.
pub fn oracle_deal(config: &GameConfig, party: usize) -> Result<Deal, AgentError> {
    let threshold = config.parties[party].threshold;
    let found = best_by(config, |deal| {
        (config.deal_score_unchecked(deal, party) >= threshold).then(|| {
            (0..config.n_parties())
                .map(|p| config.deal_score_unchecked(deal, p))
                .sum()
        })
    });
    match found {
        Err(AgentError::Policy { .. }) => own_best_deal(config, party),
        other => other,
    }
}

fn best_by(config: &GameConfig, key: impl Fn(&Deal) -> Option<Score>) -> Result<Deal, AgentError> {
    let deals = enumerate_deals(config).map_err(|e| policy_error("deal search", e))?;
    let mut best: Option<(Score, Deal)> = None;
    for deal in deals {
        if let Some(k) = key(&deal) {
            if best.as_ref().is_none_or(|(b, _)| k > *b) {
                best = Some((k, deal));
            }
        }
    }
    best.map(|(_, d)| d)
        .ok_or_else(|| policy_error("deal search", "no deal qualifies"))
}

/// A reply that follows the tag contract.
fn compliant_reply(ctx: &PolicyContext<'_>, deal: &Deal, stance: &str) -> String {
    let config = ctx.config;
    let me = &config.parties[ctx.party];
    let notation = deal.notation();
    let own = config.deal_score_unchecked(deal, ctx.party);
    let plan = match ctx.phase {
        Phase::SingleStep { step, total } => format!("Step {step} of {total}: keep {notation}."),
        Phase::Final => format!("Final proposal made: {notation}."),
        _ => format!("Keep {notation} on the table."),
    };
    format!(
        "<SCRATCHPAD>{notation} gives me {own}; my minimum is {}.</SCRATCHPAD>\n\
         <ANSWER>{} {stance} <DEAL>{notation}</DEAL></ANSWER>\n\
         <PLAN>{plan}</PLAN>",
        me.threshold, me.name
    )
}

/// Proposes the initial deal every turn.
struct EchoInitialDeal;

impl ScriptedPolicy for EchoInitialDeal {
    fn respond(&self, ctx: &PolicyContext<'_>) -> Result<String, AgentError> {
        Ok(compliant_reply(ctx, &ctx.config.initial_deal, "proposes"))
    }
}

/// Opens with the initial deal when it is p1's opening turn, then proposes the
/// best collective deal it can accept.
struct OracleNegotiator;

impl ScriptedPolicy for OracleNegotiator {
    fn respond(&self, ctx: &PolicyContext<'_>) -> Result<String, AgentError> {
        if ctx.phase == Phase::Opening {
            return Ok(compliant_reply(ctx, &ctx.config.initial_deal, "opens with"));
        }
        let deal = oracle_deal(ctx.config, ctx.party)?;
        Ok(compliant_reply(ctx, &deal, "proposes"))
    }
}

/// Always proposes the deal best for itself.
struct Stubborn;

impl ScriptedPolicy for Stubborn {
    fn respond(&self, ctx: &PolicyContext<'_>) -> Result<String, AgentError> {
        let deal = own_best_deal(ctx.config, ctx.party)?;
        Ok(compliant_reply(ctx, &deal, "insists on"))
    }
}

/// Markdown headings instead of tags, no deal and no option tokens.
struct Malformed;

impl ScriptedPolicy for Malformed {
    fn respond(&self, ctx: &PolicyContext<'_>) -> Result<String, AgentError> {
        let me = &ctx.config.parties[ctx.party];
        Ok(format!(
            "**SCRATCHPAD** My minimum is {} and I should not reveal it.\n\
             **ANSWER** {} wants to keep talking before settling anything.\n\
             **PLAN** Ask the others what they need.",
            me.threshold, me.name
        ))
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FailingParams {
    #[serde(default)]
    seeds: Vec<u64>,
}

/// Errors on the seeds listed in `params.seeds` (every seed when the list is
/// absent or empty); otherwise behaves like `oracle-negotiator`.
struct Failing;

impl ScriptedPolicy for Failing {
    fn respond(&self, ctx: &PolicyContext<'_>) -> Result<String, AgentError> {
        let params: FailingParams = if ctx.params.is_null() {
            FailingParams { seeds: Vec::new() }
        } else {
            serde_json::from_value(ctx.params.clone()).map_err(|e| AgentError::PolicyParams {
                policy: "failing".into(),
                message: e.to_string(),
            })?
        };
        if params.seeds.is_empty() || params.seeds.contains(&ctx.seed) {
            return Err(policy_error(
                "failing",
                format!("scripted failure on seed {}", ctx.seed),
            ));
        }
        OracleNegotiator.respond(ctx)
    }
}
