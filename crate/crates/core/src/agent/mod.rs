//! Agents: deterministic scripted policies and a remote chat-completions client.

mod remote;
mod scripted;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::game::GameConfig;

pub use remote::{RemoteAgent, RemoteEndpoint, RetryPolicy};
pub use scripted::{
    oracle_deal, own_best_deal, PolicyContext, PolicyRegistry, ScriptedAgent, ScriptedPolicy, BUILTIN_POLICIES,
};

pub const DEFAULT_MAX_TOKENS: u32 = 1024;

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("scripted policy {0:?} is already registered")]
    DuplicatePolicy(String),
    #[error("no scripted policy named {0:?}")]
    UnknownPolicy(String),
    #[error("invalid parameters for policy {policy:?}: {message}")]
    PolicyParams { policy: String, message: String },
    #[error("policy {policy:?} failed: {message}")]
    Policy { policy: String, message: String },
    #[error("credential variable {0} is not set")]
    MissingCredential(String),
    #[error("authentication rejected (HTTP {0})")]
    Auth(u16),
    #[error("HTTP {status}: {message}")]
    Status { status: u16, message: String },
    #[error("transport failure after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("malformed response: {0}")]
    Response(String),
    #[error("empty completion")]
    EmptyCompletion,
}

/// Decoding settings sent with every remote request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerationParams {
    pub model: String,
    #[serde(default)]
    pub temperature: f64,
    /// Fixed decoding seed; when absent the session seed is sent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default = "default_max_tokens")]
    pub max_tokens: u32,
}

fn default_max_tokens() -> u32 {
    DEFAULT_MAX_TOKENS
}

impl GenerationParams {
    pub fn new(model: impl Into<String>) -> Self {
        Self {
            model: model.into(),
            temperature: 0.0,
            seed: None,
            max_tokens: DEFAULT_MAX_TOKENS,
        }
    }
}

/// Where a party's replies come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AgentEndpoint {
    Scripted {
        policy: String,
        #[serde(default, skip_serializing_if = "serde_json::Value::is_null")]
        params: serde_json::Value,
    },
    Remote(RemoteEndpoint),
}

impl AgentEndpoint {
    pub fn scripted(policy: impl Into<String>) -> Self {
        AgentEndpoint::Scripted {
            policy: policy.into(),
            params: serde_json::Value::Null,
        }
    }
}

/// Which kind of turn a request belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Phase {
    /// p1's first turn, presenting the initial deal.
    Opening,
    Negotiation,
    /// p1's final proposal.
    Final,
    /// One self-prompt of the single-agent baseline (1-based step).
    SingleStep {
        step: u32,
        total: u32,
    },
}

impl Phase {
    /// Whether the reply to this turn carries the session's final deal.
    pub fn is_final(self) -> bool {
        match self {
            Phase::Final => true,
            Phase::SingleStep { step, total } => step >= total,
            _ => false,
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Phase::Opening => f.write_str("opening"),
            Phase::Negotiation => f.write_str("negotiation"),
            Phase::Final => f.write_str("final"),
            Phase::SingleStep { step, total } => write!(f, "step {step}/{total}"),
        }
    }
}

/// One turn's request.
#[derive(Debug, Clone, Copy)]
pub struct AgentRequest<'a> {
    pub config: &'a GameConfig,
    /// Zero-based party position.
    pub party: usize,
    /// The party's global context.
    pub system: &'a str,
    pub prompt: &'a str,
    pub seed: u64,
    pub phase: Phase,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub total_tokens: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Completion {
    pub text: String,
    pub usage: Option<Usage>,
}

impl Completion {
    pub fn text(text: impl Into<String>) -> Self {
        Self {
            text: text.into(),
            usage: None,
        }
    }
}

pub trait Agent: Send + Sync {
    fn complete(&self, request: &AgentRequest<'_>) -> Result<Completion, AgentError>;
}

/// Turns endpoint descriptions into agents.
#[derive(Clone)]
pub struct AgentRuntime {
    registry: Arc<PolicyRegistry>,
}

impl Default for AgentRuntime {
    fn default() -> Self {
        Self::new(PolicyRegistry::with_builtins())
    }
}

impl AgentRuntime {
    pub fn new(registry: PolicyRegistry) -> Self {
        Self {
            registry: Arc::new(registry),
        }
    }

    pub fn registry(&self) -> &PolicyRegistry {
        &self.registry
    }

    pub fn connect(&self, endpoint: &AgentEndpoint) -> Result<Box<dyn Agent>, AgentError> {
        match endpoint {
            AgentEndpoint::Scripted { policy, params } => {
                let resolved = self.registry.resolve(policy)?;
                Ok(Box::new(ScriptedAgent::new(policy.clone(), resolved, params.clone())))
            }
            AgentEndpoint::Remote(remote) => Ok(Box::new(RemoteAgent::new(remote.clone())?)),
        }
    }
}

/// Completes one request against an endpoint.
pub fn complete(
    runtime: &AgentRuntime,
    endpoint: &AgentEndpoint,
    request: &AgentRequest<'_>,
) -> Result<Completion, AgentError> {
    runtime.connect(endpoint)?.complete(request)
}
