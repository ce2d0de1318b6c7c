//! Engine, agent runtime and evaluation harness for scorable multi-party
//! negotiation games.
//!
//! A game is a set of parties scoring one option per issue; a deal passes when
//! enough parties (including every veto holder) reach their thresholds. The
//! crate enumerates and analyzes deal spaces, renders agent prompts, runs
//! seeded negotiation sessions against scripted or remote agents, and scores
//! the resulting transcripts.

pub mod agent;
pub mod deal;
pub mod deal_space;
pub mod experiment;
pub mod game;
pub mod leakage;
pub mod legacy;
pub mod metrics;
pub mod orchestrator;
pub mod parser;
pub mod prompt;
pub mod schedule;
pub mod synthetic;
pub mod transcript;

pub use deal::{deal_notation, parse_notation, Deal, DealError, IssueId};
pub use game::{ConfigError, GameConfig, Incentive, IssueSpec, PartySpec, Score};
