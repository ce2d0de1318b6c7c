//! Prompt rendering from external template files.
//!
//! Placeholders are square-bracketed uppercase tokens such as `[HISTORY]`,
//! `[WINDOW SIZE]` and `[LAST PLAN]`. Substitution is a single pass, so
//! substituted text is never rescanned for placeholders.
//!
//! Template directory layout:
//!
//! ```text
//! global_context.txt
//! round/variation-{1..6}.txt          one per chain-of-thought variation
//! incentive/<variant>.txt             guideline block, fills [GUIDELINES]
//! incentive/<variant>_context.txt     incentive sentence of the global context
//! turn/{p1_role,party_role,opening,final}.txt
//! single/{one_call,six_calls,last_step}.txt
//! ```
//!
//! `<variant>` is one of `cooperative`, `greedy`, `adversarial_targeted`,
//! `adversarial_untargeted`.

use std::collections::{HashMap, VecDeque};
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::game::{GameConfig, Incentive};

#[derive(Debug, Error)]
pub enum PromptError {
    #[error("failed to read template {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("template {template}: no value for placeholder [{placeholder}]")]
    Unresolved { template: String, placeholder: String },
    #[error("no template for chain-of-thought flags {0:?}")]
    NoTemplate(CotConfig),
    #[error("chain-of-thought row {0} does not exist (rows are 1..=6)")]
    UnknownRow(u8),
    #[error("party {0} does not exist")]
    UnknownParty(usize),
}

/// Chain-of-thought steps toggled in the round prompt.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CotConfig {
    pub prev_deals_calc: bool,
    pub others_prefs: bool,
    pub candidates: bool,
    pub selection: bool,
    pub planning: bool,
}

impl CotConfig {
    pub const fn new(
        prev_deals_calc: bool,
        others_prefs: bool,
        candidates: bool,
        selection: bool,
        planning: bool,
    ) -> Self {
        Self {
            prev_deals_calc,
            others_prefs,
            candidates,
            selection,
            planning,
        }
    }

    /// The six ablation rows; row `n` renders variation `n`.
    pub fn row(n: u8) -> Result<Self, PromptError> {
        Ok(match n {
            1 => Self::new(false, false, false, false, false),
            2 => Self::new(true, true, true, true, true),
            3 => Self::new(true, true, false, true, true),
            4 => Self::new(true, true, false, true, false),
            5 => Self::new(false, true, false, true, true),
            6 => Self::new(false, false, false, true, true),
            _ => return Err(PromptError::UnknownRow(n)),
        })
    }

    /// The variation template these flags select. `selection` only matters
    /// together with `candidates`, which requires it.
    pub fn variation(&self) -> Result<u8, PromptError> {
        if self.candidates && !self.selection {
            return Err(PromptError::NoTemplate(*self));
        }
        let key = (self.prev_deals_calc, self.others_prefs, self.candidates, self.planning);
        Ok(match key {
            (false, false, false, false) => 1,
            (true, true, true, true) => 2,
            (true, true, false, true) => 3,
            (true, true, false, false) => 4,
            (false, true, false, true) => 5,
            (false, false, false, true) => 6,
            _ => return Err(PromptError::NoTemplate(*self)),
        })
    }
}

impl Default for CotConfig {
    /// Row 5, the best-performing configuration.
    fn default() -> Self {
        Self::new(false, true, false, true, true)
    }
}

/// The most recent public messages, oldest first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HistoryWindow {
    size: usize,
    entries: VecDeque<(String, String)>,
}

pub const DEFAULT_WINDOW: usize = 6;

impl HistoryWindow {
    pub fn new(size: usize) -> Self {
        Self {
            size: size.max(1),
            entries: VecDeque::new(),
        }
    }

    pub fn push(&mut self, speaker: impl Into<String>, text: impl Into<String>) {
        self.entries.push_back((speaker.into(), text.into()));
        while self.entries.len() > self.size {
            self.entries.pop_front();
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(s, t)| (s.as_str(), t.as_str()))
    }

    /// One `speaker: text` line per entry.
    pub fn render(&self) -> String {
        self.entries
            .iter()
            .map(|(speaker, text)| format!("{speaker}: {text}"))
            .collect::<Vec<_>>()
            .join("\n")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SingleAgentMode {
    OneCall,
    SixCalls,
}

impl SingleAgentMode {
    pub fn steps(self) -> u32 {
        match self {
            SingleAgentMode::OneCall => 1,
            SingleAgentMode::SixCalls => 6,
        }
    }
}

#[derive(Debug, Clone)]
struct Template {
    name: String,
    text: String,
}

impl Template {
    fn fill(&self, values: &[(&str, &str)]) -> Result<String, PromptError> {
        fill(&self.name, &self.text, values)
    }
}

fn placeholder_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\[([A-Z][A-Z0-9]*(?: [A-Z][A-Z0-9]*)*)\]").unwrap())
}

fn fill(name: &str, text: &str, values: &[(&str, &str)]) -> Result<String, PromptError> {
    let mut out = String::with_capacity(text.len() + 256);
    let mut last = 0;
    for caps in placeholder_regex().captures_iter(text) {
        let whole = caps.get(0).unwrap();
        let key = &caps[1];
        let value = values
            .iter()
            .find(|(k, _)| *k == key)
            .map(|(_, v)| *v)
            .ok_or_else(|| PromptError::Unresolved {
                template: name.to_string(),
                placeholder: key.to_string(),
            })?;
        out.push_str(&text[last..whole.start()]);
        out.push_str(value);
        last = whole.end();
    }
    out.push_str(&text[last..]);
    Ok(out)
}

/// All templates, loaded once and immutable afterwards.
#[derive(Debug, Clone)]
pub struct TemplateSet {
    variations: Vec<Template>,
    guidelines: HashMap<&'static str, Template>,
    incentive_context: HashMap<&'static str, Template>,
    global_context: Template,
    p1_role: Template,
    party_role: Template,
    opening: Template,
    final_turn: Template,
    one_call: Template,
    six_calls: Template,
    last_step: Template,
}

const VARIANTS: [&str; 4] = [
    "cooperative",
    "greedy",
    "adversarial_targeted",
    "adversarial_untargeted",
];

fn variant_key(incentive: &Incentive) -> &'static str {
    match incentive {
        Incentive::Cooperative => "cooperative",
        Incentive::Greedy => "greedy",
        Incentive::AdversarialTargeted { .. } => "adversarial_targeted",
        Incentive::AdversarialUntargeted => "adversarial_untargeted",
    }
}

/// `templates/` at the repository root.
pub fn default_template_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../templates")
}

impl TemplateSet {
    pub fn load(dir: impl AsRef<Path>) -> Result<Self, PromptError> {
        let dir = dir.as_ref();
        let read = |rel: &str| -> Result<Template, PromptError> {
            let path = dir.join(rel);
            let mut text = std::fs::read_to_string(&path).map_err(|source| PromptError::Io {
                path: path.display().to_string(),
                source,
            })?;
            // files end with a newline; the template itself does not
            if text.ends_with('\n') {
                text.pop();
                if text.ends_with('\r') {
                    text.pop();
                }
            }
            Ok(Template {
                name: rel.to_string(),
                text,
            })
        };
        let variations = (1..=6)
            .map(|n| read(&format!("round/variation-{n}.txt")))
            .collect::<Result<Vec<_>, _>>()?;
        let mut guidelines = HashMap::new();
        let mut incentive_context = HashMap::new();
        for variant in VARIANTS {
            guidelines.insert(variant, read(&format!("incentive/{variant}.txt"))?);
            incentive_context.insert(variant, read(&format!("incentive/{variant}_context.txt"))?);
        }
        Ok(Self {
            variations,
            guidelines,
            incentive_context,
            global_context: read("global_context.txt")?,
            p1_role: read("turn/p1_role.txt")?,
            party_role: read("turn/party_role.txt")?,
            opening: read("turn/opening.txt")?,
            final_turn: read("turn/final.txt")?,
            one_call: read("single/one_call.txt")?,
            six_calls: read("single/six_calls.txt")?,
            last_step: read("single/last_step.txt")?,
        })
    }

    pub fn load_default() -> Result<Self, PromptError> {
        Self::load(default_template_dir())
    }

    fn target_name<'a>(config: &'a GameConfig, incentive: &Incentive) -> &'a str {
        match incentive {
            Incentive::AdversarialTargeted { target } => config
                .parties
                .get(target.wrapping_sub(1))
                .map(|p| p.name.as_str())
                .unwrap_or(""),
            _ => "",
        }
    }

    fn guidelines(&self, config: &GameConfig, incentive: &Incentive) -> Result<String, PromptError> {
        let target = Self::target_name(config, incentive);
        self.guidelines[variant_key(incentive)].fill(&[("TARGET", target)])
    }

    /// The confidential system context for one party.
    pub fn render_global_context(&self, config: &GameConfig, party: usize) -> Result<String, PromptError> {
        let me = config.parties.get(party).ok_or(PromptError::UnknownParty(party))?;
        let p1 = &config.parties[config.p1()];

        let party_list = config
            .parties
            .iter()
            .map(|p| {
                let mut line = format!("- {}", p.name);
                if p.is_p1 {
                    line.push_str(" (main negotiator, holds a veto)");
                } else if p.veto {
                    line.push_str(" (holds a veto)");
                }
                if !p.role.is_empty() {
                    line.push_str(": ");
                    line.push_str(&p.role);
                }
                line
            })
            .collect::<Vec<_>>()
            .join("\n");

        let issues = config
            .issues
            .iter()
            .map(|issue| {
                let mut block = format!("Issue {} ({}):", issue.id, issue.label);
                if let Some(context) = config.issue_context.get(&issue.id) {
                    block.push(' ');
                    block.push_str(context);
                }
                for option in 1..=issue.option_count {
                    block.push_str(&format!("\n  {}{}", issue.id, option));
                    if let Some(label) = issue.option_label(option) {
                        block.push_str(": ");
                        block.push_str(label);
                    }
                }
                block
            })
            .collect::<Vec<_>>()
            .join("\n");

        let scores = config
            .issues
            .iter()
            .zip(&me.score_table)
            .map(|(issue, row)| {
                let options = row
                    .iter()
                    .enumerate()
                    .map(|(i, s)| format!("{}{} ({})", issue.id, i + 1, s))
                    .collect::<Vec<_>>()
                    .join(", ");
                format!("Issue {} ({}): {}", issue.id, issue.label, options)
            })
            .collect::<Vec<_>>()
            .join("\n");

        let quorum = config.quorum().to_string();
        let initial = config.initial_deal.notation();
        let bonus = config.p1_bonus.to_string();
        let role_instructions = if me.is_p1 {
            self.p1_role
                .fill(&[("INITIAL DEAL", &initial), ("BONUS", &bonus), ("QUORUM", &quorum)])?
        } else {
            self.party_role.fill(&[("P1 NAME", &p1.name), ("QUORUM", &quorum)])?
        };
        let target = Self::target_name(config, &me.incentive);
        let incentive_context = self.incentive_context[variant_key(&me.incentive)].fill(&[("TARGET", target)])?;

        self.global_context.fill(&[
            ("GAME DESCRIPTION", &config.description),
            ("PARTY LIST", &party_list),
            ("ISSUES", &issues),
            ("PARTY NAME", &me.name),
            ("PARTY ROLE", &me.role),
            ("SCORES", &scores),
            ("THRESHOLD", &me.threshold.to_string()),
            ("BATNA", &me.batna().to_string()),
            ("ROLE INSTRUCTIONS", &role_instructions),
            ("INCENTIVE CONTEXT", &incentive_context),
        ])
    }

    /// The per-turn prompt: the variation selected by `cot`, with the
    /// incentive's guideline block. `prev_plan` is ignored unless planning is on.
    pub fn render_round_prompt(
        &self,
        config: &GameConfig,
        window: &HistoryWindow,
        prev_plan: Option<&str>,
        cot: &CotConfig,
        incentive: &Incentive,
    ) -> Result<String, PromptError> {
        let variation = cot.variation()?;
        let guidelines = self.guidelines(config, incentive)?;
        let window_size = window.size().to_string();
        let history = window.render();
        let plan = if cot.planning { prev_plan.unwrap_or("") } else { "" };
        self.variations[usize::from(variation) - 1].fill(&[
            ("WINDOW SIZE", &window_size),
            ("HISTORY", &history),
            ("LAST PLAN", plan),
            ("GUIDELINES", &guidelines),
        ])
    }

    /// Note appended to p1's opening turn.
    pub fn render_opening_note(&self, config: &GameConfig) -> Result<String, PromptError> {
        self.opening.fill(&[("INITIAL DEAL", &config.initial_deal.notation())])
    }

    /// Note appended to p1's final-proposal turn.
    pub fn render_final_note(&self) -> Result<String, PromptError> {
        self.final_turn.fill(&[])
    }

    /// User prompt for p1 negotiating alone. `step` is 1-based;
    /// `prior_reasoning` is the previous step's reasoning (six-call mode).
    pub fn render_single_agent_prompt(
        &self,
        config: &GameConfig,
        mode: SingleAgentMode,
        step: u32,
        prior_reasoning: Option<&str>,
    ) -> Result<String, PromptError> {
        let p1 = &config.parties[config.p1()];
        let initial = config.initial_deal.notation();
        let quorum = config.quorum().to_string();
        let guidelines = self.guidelines(config, &p1.incentive)?;
        match mode {
            SingleAgentMode::OneCall => self.one_call.fill(&[
                ("PARTY NAME", &p1.name),
                ("INITIAL DEAL", &initial),
                ("QUORUM", &quorum),
                ("GUIDELINES", &guidelines),
            ]),
            SingleAgentMode::SixCalls => {
                let total = mode.steps();
                let note = if step >= total {
                    self.last_step.fill(&[])?
                } else {
                    String::new()
                };
                self.six_calls.fill(&[
                    ("STEP", &step.to_string()),
                    ("TOTAL STEPS", &total.to_string()),
                    ("INITIAL DEAL", &initial),
                    ("HISTORY", prior_reasoning.unwrap_or("")),
                    ("QUORUM", &quorum),
                    ("STEP NOTE", &note),
                    ("GUIDELINES", &guidelines),
                ])
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::synthetic_game;

    #[test]
    fn rows_map_to_their_variation() {
        for n in 1..=6 {
            assert_eq!(CotConfig::row(n).unwrap().variation().unwrap(), n);
        }
        assert!(matches!(CotConfig::row(7), Err(PromptError::UnknownRow(7))));
    }

    #[test]
    fn candidates_without_selection_has_no_template() {
        let cot = CotConfig::new(true, true, true, false, true);
        assert!(matches!(cot.variation(), Err(PromptError::NoTemplate(_))));
        let orphan = CotConfig::new(true, false, false, false, false);
        assert!(matches!(orphan.variation(), Err(PromptError::NoTemplate(_))));
    }

    #[test]
    fn fill_is_single_pass() {
        let out = fill("t", "a [X] b", &[("X", "[X]")]).unwrap();
        assert_eq!(out, "a [X] b");
        assert!(matches!(
            fill("t", "[MISSING]", &[]),
            Err(PromptError::Unresolved { .. })
        ));
        // lowercase brackets are not placeholders
        assert_eq!(fill("t", "[x] [a b]", &[]).unwrap(), "[x] [a b]");
    }

    #[test]
    fn window_keeps_most_recent() {
        let mut w = HistoryWindow::new(2);
        w.push("a", "1");
        w.push("b", "2");
        w.push("c", "3");
        assert_eq!(w.render(), "b: 2\nc: 3");
    }

    #[test]
    fn global_context_lists_every_party_and_own_scores() {
        let t = TemplateSet::load_default().unwrap();
        let config = synthetic_game();
        let text = t.render_global_context(&config, 0).unwrap();
        for party in &config.parties {
            assert!(text.contains(&party.name));
        }
        assert!(text.contains("A1 (10), A2 (7), A3 (4), A4 (1), A5 (0)"));
        assert!(text.contains("The initial deal is A1, B1, C1, D1, E1."));
        assert!(text.contains("minimum acceptable score is 53"));
        let other = t.render_global_context(&config, 1).unwrap();
        assert!(!other.contains("The initial deal is"));
        assert!(other.contains("Harbor Arena Consortium is the main negotiator"));
    }

    #[test]
    fn targeted_incentive_names_target() {
        let t = TemplateSet::load_default().unwrap();
        let mut config = synthetic_game();
        config.parties[3].incentive = Incentive::AdversarialTargeted { target: 2 };
        let ctx = t.render_global_context(&config, 3).unwrap();
        assert!(ctx.contains("sabotage the negotiation for City Council"));
        let prompt = t
            .render_round_prompt(
                &config,
                &HistoryWindow::new(6),
                None,
                &CotConfig::row(5).unwrap(),
                &config.parties[3].incentive,
            )
            .unwrap();
        assert!(prompt.contains("sabotage the deal for City Council"));
        assert!(!prompt.contains("Aim for a balanced agreement"));
    }
}
