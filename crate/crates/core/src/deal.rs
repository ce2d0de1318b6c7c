//! Deals and their short option notation (`"A1, B3, C2, D4, E3"`).

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::game::GameConfig;

/// Issue identifier: a single uppercase ASCII letter.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct IssueId(char);

impl IssueId {
    pub fn new(c: char) -> Option<Self> {
        c.is_ascii_uppercase().then_some(Self(c))
    }

    pub fn as_char(self) -> char {
        self.0
    }
}

impl fmt::Display for IssueId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl TryFrom<String> for IssueId {
    type Error = String;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        let mut chars = value.chars();
        match (chars.next(), chars.next()) {
            (Some(c), None) => IssueId::new(c).ok_or_else(|| format!("issue id {value:?} is not an uppercase letter")),
            _ => Err(format!("issue id {value:?} must be a single letter")),
        }
    }
}

impl From<IssueId> for String {
    fn from(id: IssueId) -> Self {
        id.0.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DealError {
    #[error("empty deal")]
    Empty,
    #[error("unexpected text {0:?} in deal notation")]
    Syntax(String),
    #[error("unknown issue {0}")]
    UnknownIssue(IssueId),
    #[error("option {issue}{option} out of range (issue {issue} has {max} options)")]
    OptionOutOfRange { issue: IssueId, option: u32, max: u8 },
    #[error("issue {0} mentioned more than once")]
    DuplicateIssue(IssueId),
    #[error("partial deal {partial}: missing issues {}", join_ids(.missing))]
    MissingIssues { missing: Vec<IssueId>, partial: Deal },
}

fn join_ids(ids: &[IssueId]) -> String {
    ids.iter().map(ToString::to_string).collect::<Vec<_>>().join(", ")
}

/// One chosen option (1-based) per issue.
///
/// Serialized as its notation string. Whether the deal is complete and in
/// range is a property of a particular game; see [`GameConfig::check_deal`].
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Deal {
    choices: BTreeMap<IssueId, u8>,
}

impl Deal {
    pub fn from_pairs(pairs: impl IntoIterator<Item = (IssueId, u8)>) -> Self {
        Self {
            choices: pairs.into_iter().collect(),
        }
    }

    pub fn option(&self, issue: IssueId) -> Option<u8> {
        self.choices.get(&issue).copied()
    }

    pub fn set(&mut self, issue: IssueId, option: u8) {
        self.choices.insert(issue, option);
    }

    pub fn len(&self) -> usize {
        self.choices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.choices.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (IssueId, u8)> + '_ {
        self.choices.iter().map(|(id, option)| (*id, *option))
    }

    /// Canonical notation, issues in letter order: `"A1, B3, C2"`.
    pub fn notation(&self) -> String {
        self.iter()
            .map(|(id, option)| format!("{id}{option}"))
            .collect::<Vec<_>>()
            .join(", ")
    }

    /// Parses notation without reference to a game: tokens are a letter
    /// followed by an option number, separated by commas, semicolons or
    /// whitespace. Case-insensitive.
    pub fn parse_syntax(text: &str) -> Result<Self, DealError> {
        let mut deal = Deal::default();
        let bytes = text.as_bytes();
        let mut i = 0;
        while i < bytes.len() {
            let b = bytes[i];
            if b.is_ascii_whitespace() || b == b',' || b == b';' {
                i += 1;
                continue;
            }
            if !b.is_ascii_alphabetic() {
                return Err(DealError::Syntax(rest_token(text, i)));
            }
            let id = IssueId(char::from(b.to_ascii_uppercase()));
            let mut j = i + 1;
            while j < bytes.len() && bytes[j].is_ascii_whitespace() {
                j += 1;
            }
            let digits_start = j;
            while j < bytes.len() && bytes[j].is_ascii_digit() {
                j += 1;
            }
            if digits_start == j || (j < bytes.len() && bytes[j].is_ascii_alphabetic()) {
                return Err(DealError::Syntax(rest_token(text, i)));
            }
            let option: u32 = text[digits_start..j].parse().unwrap_or(u32::MAX);
            if option == 0 || option > 9 {
                return Err(DealError::OptionOutOfRange {
                    issue: id,
                    option,
                    max: 9,
                });
            }
            if deal.choices.insert(id, option as u8).is_some() {
                return Err(DealError::DuplicateIssue(id));
            }
            i = j;
        }
        if deal.is_empty() {
            return Err(DealError::Empty);
        }
        Ok(deal)
    }
}

fn rest_token(text: &str, start: usize) -> String {
    text[start..]
        .split(|c: char| c.is_whitespace() || c == ',' || c == ';')
        .next()
        .unwrap_or_default()
        .to_string()
}

impl fmt::Display for Deal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.notation())
    }
}

impl TryFrom<String> for Deal {
    type Error = DealError;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        Deal::parse_syntax(&value)
    }
}

impl From<Deal> for String {
    fn from(deal: Deal) -> Self {
        deal.notation()
    }
}

pub fn deal_notation(deal: &Deal) -> String {
    deal.notation()
}

/// Parses notation and checks it is a complete, in-range deal for `config`.
pub fn parse_notation(text: &str, config: &GameConfig) -> Result<Deal, DealError> {
    let deal = Deal::parse_syntax(text)?;
    config.check_deal(&deal)?;
    Ok(deal)
}
