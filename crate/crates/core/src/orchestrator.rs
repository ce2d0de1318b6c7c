//! Negotiation sessions: the multi-agent game loop and the single-agent
//! baselines.
//!
//! Multi-agent sessions run `rounds` rounds. In round 1, p1 speaks first and
//! presents the initial deal, then the other parties speak in a seeded random
//! order. Every later round is a seeded random order of all parties (see
//! [`crate::schedule`]). After the last round, p1 makes the final proposal,
//! recorded as round `rounds + 1`, and the session ends.
//!
//! Every extracted deal is voted on automatically: a party accepts when the
//! deal meets its threshold.

use std::io;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::{Agent, AgentRequest, Phase};
use crate::deal::Deal;
use crate::deal_space::{outcome_vector, success_from_votes, OutcomePolicy, OutcomeVector};
use crate::game::GameConfig;
use crate::leakage::leakage_of;
use crate::metrics::ExperimentRecord;
use crate::parser::{extract_deal, extract_sections, DealPick, ParsedAnswer};
use crate::prompt::{CotConfig, HistoryWindow, PromptError, SingleAgentMode, TemplateSet, DEFAULT_WINDOW};
use crate::schedule::speaking_orders;
use crate::transcript::{
    ContextEvent, ErrorEvent, EventSink, OutcomeEvent, SessionEvent, Transcript, TranscriptError, TranscriptEvent,
    TurnEvent,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionMode {
    #[default]
    Multi,
    /// p1 alone, one call.
    #[serde(alias = "single-1")]
    Single1,
    /// p1 alone, six iterative self-calls.
    #[serde(alias = "single-6")]
    Single6,
}

impl SessionMode {
    pub fn single(self) -> Option<SingleAgentMode> {
        match self {
            SessionMode::Multi => None,
            SessionMode::Single1 => Some(SingleAgentMode::OneCall),
            SessionMode::Single6 => Some(SingleAgentMode::SixCalls),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionSettings {
    pub mode: SessionMode,
    pub cot: CotConfig,
    /// Overrides the config's round count.
    pub rounds: Option<u32>,
    pub window: usize,
    pub policy: OutcomePolicy,
    pub deal_pick: DealPick,
}

impl Default for SessionSettings {
    fn default() -> Self {
        Self {
            mode: SessionMode::Multi,
            cot: CotConfig::default(),
            rounds: None,
            window: DEFAULT_WINDOW,
            policy: OutcomePolicy::default(),
            deal_pick: DealPick::default(),
        }
    }
}

impl SessionSettings {
    pub fn rounds_for(&self, config: &GameConfig) -> u32 {
        self.rounds.unwrap_or(config.rounds)
    }
}

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("expected {expected} agent(s), got {got}")]
    AgentCount { expected: usize, got: usize },
    #[error("round count must be at least 1")]
    Rounds,
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error("writing transcript: {0}")]
    Io(#[from] io::Error),
    #[error(transparent)]
    Transcript(#[from] TranscriptError),
}

/// Forwards events to the caller's sink and keeps a copy for the record.
struct Recorder<'a> {
    sink: &'a mut dyn EventSink,
    events: Vec<TranscriptEvent>,
}

impl Recorder<'_> {
    fn emit(&mut self, event: TranscriptEvent) -> io::Result<()> {
        self.sink.record(&event)?;
        self.events.push(event);
        Ok(())
    }

    fn finish(self) -> Result<ExperimentRecord, SessionError> {
        Ok(Transcript::new(self.events).to_record()?)
    }
}

struct TurnInput<'a> {
    round: u32,
    party: usize,
    phase: Phase,
    system: &'a str,
    prompt: String,
}

struct Session<'a> {
    config: &'a GameConfig,
    seed: u64,
    settings: SessionSettings,
    recorder: Recorder<'a>,
}

impl<'a> Session<'a> {
    fn start(
        config: &'a GameConfig,
        templates: &TemplateSet,
        seed: u64,
        settings: SessionSettings,
        rounds: u32,
        speakers: &[usize],
        sink: &'a mut dyn EventSink,
    ) -> Result<(Self, Vec<String>), SessionError> {
        let mut recorder = Recorder {
            sink,
            events: Vec::new(),
        };
        recorder.emit(TranscriptEvent::Session(SessionEvent {
            seed,
            mode: settings.mode,
            cot: settings.cot,
            rounds,
            window: settings.window,
            policy: settings.policy,
            parties: config.parties.iter().map(|p| p.name.clone()).collect(),
            config: config.clone(),
        }))?;
        let mut systems = vec![String::new(); config.n_parties()];
        for &party in speakers {
            let system = templates.render_global_context(config, party)?;
            recorder.emit(TranscriptEvent::Context(ContextEvent {
                speaker: party + 1,
                name: config.parties[party].name.clone(),
                system: system.clone(),
            }))?;
            systems[party] = system;
        }
        Ok((
            Self {
                config,
                seed,
                settings,
                recorder,
            },
            systems,
        ))
    }

    /// Runs one turn. `Ok(None)` means the agent failed and the session has
    /// been closed as failed.
    fn turn(&mut self, agent: &dyn Agent, input: TurnInput<'_>) -> Result<Option<TurnEvent>, SessionError> {
        let config = self.config;
        let request = AgentRequest {
            config,
            party: input.party,
            system: input.system,
            prompt: &input.prompt,
            seed: self.seed,
            phase: input.phase,
        };
        let completion = match agent.complete(&request) {
            Ok(c) => c,
            Err(err) => {
                let message = err.to_string();
                tracing::warn!(seed = self.seed, round = input.round, party = input.party + 1, %message, "agent failed");
                self.recorder.emit(TranscriptEvent::Error(ErrorEvent {
                    round: input.round,
                    speaker: input.party + 1,
                    message: message.clone(),
                }))?;
                self.close(None, Some(message))?;
                return Ok(None);
            }
        };
        let parsed = extract_sections(&completion.text);
        let extraction = extract_deal(&parsed, config, self.settings.deal_pick);
        let leak = leakage_of(&parsed);
        let votes = extraction
            .deal
            .as_ref()
            .map(|deal| config.votes(deal).expect("extracted deals are valid"));
        let own_score = extraction
            .deal
            .as_ref()
            .map(|deal| config.deal_score(deal, input.party).expect("extracted deals are valid"));
        let turn = TurnEvent {
            round: input.round,
            speaker: input.party + 1,
            name: config.parties[input.party].name.clone(),
            phase: input.phase,
            prompt: input.prompt,
            reply: completion.text,
            parsed,
            deal: extraction.deal,
            deal_source: extraction.source,
            partial: extraction.partial,
            accept_count: votes.as_ref().map(|v| v.iter().filter(|a| **a).count()),
            success: votes.as_ref().map(|v| success_from_votes(config, v)),
            votes,
            own_score,
            leak,
            usage: completion.usage,
        };
        self.recorder.emit(TranscriptEvent::Turn(turn.clone()))?;
        Ok(Some(turn))
    }

    fn close(&mut self, deal: Option<Deal>, reason: Option<String>) -> Result<(), SessionError> {
        let config = self.config;
        let event = match deal {
            Some(deal) => {
                let votes = config.votes(&deal).expect("extracted deals are valid");
                let outcome = outcome_vector(config, &deal, self.settings.policy).expect("extracted deals are valid");
                OutcomeEvent {
                    accept_count: votes.iter().filter(|v| **v).count(),
                    success: outcome.success,
                    deal: Some(deal),
                    failed: false,
                    reason,
                    votes,
                    outcome,
                }
            }
            None => OutcomeEvent {
                deal: None,
                failed: true,
                reason: Some(reason.unwrap_or_else(|| "no final deal could be extracted".into())),
                votes: Vec::new(),
                accept_count: 0,
                success: false,
                outcome: OutcomeVector::failure(config),
            },
        };
        self.recorder.emit(TranscriptEvent::Outcome(event))?;
        Ok(())
    }
}

/// Text of a reply that the next self-prompt embeds: scratchpad and plan, or
/// the broadcast text when neither was extracted.
fn prior_reasoning(parsed: &ParsedAnswer) -> String {
    let parts: Vec<&str> = [parsed.scratchpad.as_deref(), parsed.plan.as_deref()]
        .into_iter()
        .flatten()
        .collect();
    if parts.is_empty() {
        parsed.broadcast_text().to_string()
    } else {
        parts.join("\n")
    }
}

/// Runs one multi-agent session. `agents[i]` speaks for party `i`.
///
/// Agent failures end the session with a failed outcome rather than an error;
/// errors are reserved for template and I/O problems.
pub fn run_multi_agent(
    config: &GameConfig,
    templates: &TemplateSet,
    agents: &[&dyn Agent],
    seed: u64,
    settings: &SessionSettings,
    sink: &mut dyn EventSink,
) -> Result<ExperimentRecord, SessionError> {
    let n = config.n_parties();
    if agents.len() != n {
        return Err(SessionError::AgentCount {
            expected: n,
            got: agents.len(),
        });
    }
    let rounds = settings.rounds_for(config);
    if rounds == 0 {
        return Err(SessionError::Rounds);
    }
    // fail on an unusable flag combination before any agent is called
    settings.cot.variation()?;
    let p1 = config.p1();
    let everyone: Vec<usize> = (0..n).collect();
    let (mut session, systems) = Session::start(
        config,
        templates,
        seed,
        SessionSettings {
            mode: SessionMode::Multi,
            ..*settings
        },
        rounds,
        &everyone,
        sink,
    )?;

    let mut window = HistoryWindow::new(settings.window);
    let mut plans: Vec<Option<String>> = vec![None; n];
    let cot = settings.cot;

    for (i, order) in speaking_orders(n, p1, rounds, seed).into_iter().enumerate() {
        let round = i as u32 + 1;
        for party in order {
            let incentive = &config.parties[party].incentive;
            let mut prompt =
                templates.render_round_prompt(config, &window, plans[party].as_deref(), &cot, incentive)?;
            let phase = if round == 1 && party == p1 {
                prompt.push('\n');
                prompt.push_str(&templates.render_opening_note(config)?);
                Phase::Opening
            } else {
                Phase::Negotiation
            };
            let input = TurnInput {
                round,
                party,
                phase,
                system: &systems[party],
                prompt,
            };
            let Some(turn) = session.turn(agents[party], input)? else {
                return session.recorder.finish();
            };
            window.push(config.parties[party].name.clone(), turn.parsed.broadcast_text());
            if turn.parsed.plan.is_some() {
                plans[party] = turn.parsed.plan;
            }
        }
    }

    let mut prompt = templates.render_round_prompt(
        config,
        &window,
        plans[p1].as_deref(),
        &cot,
        &config.parties[p1].incentive,
    )?;
    prompt.push('\n');
    prompt.push_str(&templates.render_final_note()?);
    let input = TurnInput {
        round: rounds + 1,
        party: p1,
        phase: Phase::Final,
        system: &systems[p1],
        prompt,
    };
    if let Some(turn) = session.turn(agents[p1], input)? {
        session.close(turn.deal, None)?;
    }
    session.recorder.finish()
}

/// Runs the single-agent baseline: p1 negotiates with itself.
pub fn run_single_agent(
    config: &GameConfig,
    templates: &TemplateSet,
    agent: &dyn Agent,
    mode: SingleAgentMode,
    seed: u64,
    settings: &SessionSettings,
    sink: &mut dyn EventSink,
) -> Result<ExperimentRecord, SessionError> {
    let p1 = config.p1();
    let total = mode.steps();
    let session_mode = match mode {
        SingleAgentMode::OneCall => SessionMode::Single1,
        SingleAgentMode::SixCalls => SessionMode::Single6,
    };
    let (mut session, systems) = Session::start(
        config,
        templates,
        seed,
        SessionSettings {
            mode: session_mode,
            ..*settings
        },
        total,
        &[p1],
        sink,
    )?;

    let mut prior: Option<String> = None;
    let mut last: Option<TurnEvent> = None;
    for step in 1..=total {
        let prompt = templates.render_single_agent_prompt(config, mode, step, prior.as_deref())?;
        let input = TurnInput {
            round: step,
            party: p1,
            phase: Phase::SingleStep { step, total },
            system: &systems[p1],
            prompt,
        };
        let Some(turn) = session.turn(agent, input)? else {
            return session.recorder.finish();
        };
        prior = Some(prior_reasoning(&turn.parsed));
        last = Some(turn);
    }
    session.close(last.and_then(|t| t.deal), None)?;
    session.recorder.finish()
}

/// Runs a session in the mode named by `settings`. Multi-agent sessions need
/// one agent per party; single-agent sessions use `agents[p1]`.
pub fn run_session(
    config: &GameConfig,
    templates: &TemplateSet,
    agents: &[&dyn Agent],
    seed: u64,
    settings: &SessionSettings,
    sink: &mut dyn EventSink,
) -> Result<ExperimentRecord, SessionError> {
    match settings.mode.single() {
        None => run_multi_agent(config, templates, agents, seed, settings, sink),
        Some(mode) => {
            let agent = agents.get(config.p1()).ok_or(SessionError::AgentCount {
                expected: config.n_parties(),
                got: agents.len(),
            })?;
            run_single_agent(config, templates, *agent, mode, seed, settings, sink)
        }
    }
}
