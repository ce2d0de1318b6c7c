//! Splits raw agent replies into the tag-delimited sections of the reply
//! contract (`<SCRATCHPAD>`, `<ANSWER>`, `<PLAN>`, `<DEAL>`) and extracts the
//! proposed deal.
//!
//! Malformed output is data, never an error: every input yields a
//! [`ParsedAnswer`] whose flags describe what went wrong.

use std::ops::Range;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::deal::{parse_notation, Deal, DealError, IssueId};
use crate::game::GameConfig;

pub const ANSWER: &str = "ANSWER";
pub const SCRATCHPAD: &str = "SCRATCHPAD";
pub const PLAN: &str = "PLAN";
pub const DEAL: &str = "DEAL";

const KNOWN_TAGS: [&str; 4] = [ANSWER, SCRATCHPAD, PLAN, DEAL];

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseFlags {
    pub missing_answer_tags: bool,
    /// Uppercase tags outside the reply contract, first occurrence order.
    pub hallucinated_tags: Vec<String>,
    /// Unmatched, crossed or nested tags.
    pub tag_mismatch: bool,
    pub deal_outside_answer: bool,
}

impl ParseFlags {
    pub fn is_clean(&self) -> bool {
        !self.missing_answer_tags
            && self.hallucinated_tags.is_empty()
            && !self.tag_mismatch
            && !self.deal_outside_answer
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DealBlock {
    pub text: String,
    pub in_answer: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedAnswer {
    /// The raw reply. Not serialized: transcripts store it as `reply`.
    #[serde(skip)]
    pub full_text: String,
    /// Trimmed content of the first well-formed `<ANSWER>` block.
    pub public_text: Option<String>,
    pub scratchpad: Option<String>,
    pub plan: Option<String>,
    /// Every well-formed `<DEAL>` block, in order.
    pub deals: Vec<DealBlock>,
    pub flags: ParseFlags,
}

impl ParsedAnswer {
    /// What the other parties get to see: the public answer, or the whole
    /// reply when no answer block could be extracted.
    pub fn broadcast_text(&self) -> &str {
        self.public_text.as_deref().unwrap_or(&self.full_text)
    }

    pub fn deal_texts(&self) -> impl Iterator<Item = &str> {
        self.deals.iter().map(|d| d.text.as_str())
    }
}

fn tag_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"<(/?)([A-Z][A-Z0-9_]*(?: [A-Z][A-Z0-9_]*)*)>").unwrap())
}

struct Open {
    name: &'static str,
    /// Byte offset right after the opening tag.
    content_start: usize,
    tag_start: usize,
}

struct Block {
    name: &'static str,
    content: Range<usize>,
    outer: Range<usize>,
}

pub fn extract_sections(full_text: &str) -> ParsedAnswer {
    let mut flags = ParseFlags::default();
    let mut stack: Vec<Open> = Vec::new();
    let mut blocks: Vec<Block> = Vec::new();

    for caps in tag_regex().captures_iter(full_text) {
        let whole = caps.get(0).unwrap();
        let closing = !caps[1].is_empty();
        let raw_name = &caps[2];
        let Some(name) = KNOWN_TAGS.iter().copied().find(|t| *t == raw_name) else {
            if !flags.hallucinated_tags.iter().any(|t| t == raw_name) {
                flags.hallucinated_tags.push(raw_name.to_string());
            }
            continue;
        };

        if !closing {
            let nested = stack.iter().any(|o| o.name == name)
                || stack.last().is_some_and(|o| o.name == DEAL)
                || (name != DEAL && stack.iter().any(|o| o.name != DEAL));
            if nested {
                flags.tag_mismatch = true;
            }
            stack.push(Open {
                name,
                content_start: whole.end(),
                tag_start: whole.start(),
            });
            continue;
        }

        match stack.iter().rposition(|o| o.name == name) {
            Some(pos) if pos == stack.len() - 1 => {
                let open = stack.pop().unwrap();
                blocks.push(Block {
                    name,
                    content: open.content_start..whole.start(),
                    outer: open.tag_start..whole.end(),
                });
            }
            Some(pos) => {
                // crossed: the close skips over still-open tags
                flags.tag_mismatch = true;
                stack.truncate(pos);
            }
            None => flags.tag_mismatch = true,
        }
    }
    if !stack.is_empty() {
        flags.tag_mismatch = true;
    }

    let first = |name: &str| blocks.iter().filter(|b| b.name == name).min_by_key(|b| b.outer.start);
    let text_of = |b: &Block| full_text[b.content.clone()].trim().to_string();

    let answer = first(ANSWER);
    let mut deal_blocks: Vec<&Block> = blocks.iter().filter(|b| b.name == DEAL).collect();
    deal_blocks.sort_by_key(|b| b.outer.start);
    let deals: Vec<DealBlock> = deal_blocks
        .iter()
        .map(|b| DealBlock {
            text: text_of(b),
            in_answer: answer.is_some_and(|a| a.content.start <= b.outer.start && b.outer.end <= a.content.end),
        })
        .collect();

    flags.missing_answer_tags = answer.is_none();
    flags.deal_outside_answer = deals.iter().any(|d| !d.in_answer);

    ParsedAnswer {
        full_text: full_text.to_string(),
        public_text: answer.map(text_of),
        scratchpad: first(SCRATCHPAD).map(text_of),
        plan: first(PLAN).map(text_of),
        deals,
        flags,
    }
}

/// Which route produced an extracted deal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DealSource {
    DealTag,
    Scan,
    None,
}

/// Which `<DEAL>` block wins when several parse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DealPick {
    #[default]
    Last,
    First,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DealExtraction {
    pub deal: Option<Deal>,
    pub source: DealSource,
    /// Some candidate named only part of the issues.
    pub partial: bool,
}

/// Tries, in order: the `<DEAL>` blocks (those inside the public answer
/// first), then a scan of the broadcast text for option tokens.
pub fn extract_deal(parsed: &ParsedAnswer, config: &GameConfig, pick: DealPick) -> DealExtraction {
    let mut partial = false;

    let in_answer: Vec<&DealBlock> = parsed.deals.iter().filter(|d| d.in_answer).collect();
    let mut candidates: Vec<&DealBlock> = if in_answer.is_empty() {
        parsed.deals.iter().collect()
    } else {
        in_answer
    };
    if pick == DealPick::Last {
        candidates.reverse();
    }
    for block in candidates {
        match parse_notation(&block.text, config) {
            Ok(deal) => {
                return DealExtraction {
                    deal: Some(deal),
                    source: DealSource::DealTag,
                    partial,
                }
            }
            Err(DealError::MissingIssues { .. }) => partial = true,
            Err(_) => {}
        }
    }

    match scan_for_deal(parsed.broadcast_text(), config) {
        ScanResult::Full(deal) => DealExtraction {
            deal: Some(deal),
            source: DealSource::Scan,
            partial,
        },
        ScanResult::Partial => DealExtraction {
            deal: None,
            source: DealSource::None,
            partial: true,
        },
        ScanResult::Nothing => DealExtraction {
            deal: None,
            source: DealSource::None,
            partial,
        },
    }
}

#[derive(Debug, PartialEq, Eq)]
pub enum ScanResult {
    Full(Deal),
    Partial,
    Nothing,
}

fn token_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\b([A-Za-z])([0-9]{1,2})\b").unwrap())
}

/// Finds the last run of consecutive option tokens that names every issue
/// exactly once. Tokens for unknown issues or out-of-range options are ignored.
pub fn scan_for_deal(text: &str, config: &GameConfig) -> ScanResult {
    let tokens: Vec<(IssueId, u8)> = token_regex()
        .captures_iter(text)
        .filter_map(|caps| {
            let letter = caps[1].chars().next()?.to_ascii_uppercase();
            let id = IssueId::new(letter)?;
            let option: u8 = caps[2].parse().ok()?;
            let issue = &config.issues[config.issue_position(id)?];
            (1..=issue.option_count).contains(&option).then_some((id, option))
        })
        .collect();
    if tokens.is_empty() {
        return ScanResult::Nothing;
    }
    let n = config.issues.len();
    for end in (0..tokens.len()).rev() {
        let mut window: Vec<(IssueId, u8)> = Vec::with_capacity(n);
        for &(id, option) in tokens[..=end].iter().rev() {
            if window.iter().any(|(seen, _)| *seen == id) {
                break;
            }
            window.push((id, option));
            if window.len() == n {
                return ScanResult::Full(Deal::from_pairs(window));
            }
        }
    }
    ScanResult::Partial
}
