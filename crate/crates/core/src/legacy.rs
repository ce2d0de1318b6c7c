//! Loader for the original benchmark's plain-text game directories.
//!
//! Expected layout (best-effort; only the parts needed to score deals):
//!
//! ```text
//! config.txt               one party per line: name, scores-file stem, role, incentive
//! scores_files/<stem>.txt  one line per issue of comma-separated option scores,
//!                          then a final line holding the threshold
//! initial_deal.txt         the initial deal, e.g. "A1, B1, C1, D1, E1"
//! global_instructions.txt  optional game description
//! ```
//!
//! Roles `p1` and `p2` hold vetoes; any other role is a plain party. Incentives
//! are `cooperative`, `greedy`, `untargeted` (or `adversarial`), and
//! `targeted:<party number>`.

use std::collections::BTreeMap;
use std::path::Path;

use crate::deal::{parse_notation, Deal, IssueId};
use crate::game::{ConfigError, GameConfig, Incentive, IssueSpec, PartySpec, Score, DEFAULT_P1_BONUS, DEFAULT_ROUNDS};

fn read(dir: &Path, rel: &str) -> Result<String, ConfigError> {
    let path = dir.join(rel);
    std::fs::read_to_string(&path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn parse_error(file: &str, line: usize, message: impl std::fmt::Display) -> ConfigError {
    ConfigError::Legacy(format!("{file}:{line}: {message}"))
}

fn parse_incentive(text: &str, file: &str, line: usize) -> Result<Incentive, ConfigError> {
    let lower = text.trim().to_ascii_lowercase();
    let (kind, arg) = match lower.split_once(':') {
        Some((k, a)) => (k.trim().to_string(), Some(a.trim().to_string())),
        None => (lower.clone(), None),
    };
    Ok(match kind.as_str() {
        "" | "cooperative" | "coop" => Incentive::Cooperative,
        "greedy" => Incentive::Greedy,
        "untargeted" | "adversarial" | "adversarial_untargeted" => Incentive::AdversarialUntargeted,
        "targeted" | "adversarial_targeted" => {
            let target = arg
                .and_then(|a| a.parse::<usize>().ok())
                .ok_or_else(|| parse_error(file, line, "targeted incentive needs a party number"))?;
            Incentive::AdversarialTargeted { target }
        }
        other => return Err(parse_error(file, line, format!("unknown incentive {other:?}"))),
    })
}

fn parse_scores(text: &str, file: &str) -> Result<(Vec<Vec<Score>>, Score), ConfigError> {
    let lines: Vec<(usize, &str)> = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty())
        .collect();
    let Some(((threshold_line, threshold_text), rows)) = lines.split_last() else {
        return Err(parse_error(file, 1, "empty scores file"));
    };
    let threshold: Score = threshold_text
        .trim_end_matches(',')
        .trim()
        .parse()
        .map_err(|e| parse_error(file, *threshold_line, e))?;
    let table = rows
        .iter()
        .map(|(n, line)| {
            line.split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|s| s.parse::<Score>().map_err(|e| parse_error(file, *n, e)))
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok((table, threshold))
}

/// Loads and validates a game directory in the original plain-text format.
pub fn load_legacy_game(dir: impl AsRef<Path>) -> Result<GameConfig, ConfigError> {
    let dir = dir.as_ref();
    let config_text = read(dir, "config.txt")?;
    let mut parties = Vec::new();
    for (n, line) in config_text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() < 3 {
            return Err(parse_error(
                "config.txt",
                n + 1,
                "expected: name, scores file, role[, incentive]",
            ));
        }
        let stem = fields[1].trim_end_matches(".txt");
        let file = format!("scores_files/{stem}.txt");
        let (score_table, threshold) = parse_scores(&read(dir, &file)?, &file)?;
        let role = fields[2].to_ascii_lowercase();
        let incentive = parse_incentive(fields.get(3).copied().unwrap_or(""), "config.txt", n + 1)?;
        parties.push(PartySpec {
            name: fields[0].to_string(),
            index: parties.len() + 1,
            role: String::new(),
            score_table,
            threshold,
            batna: None,
            veto: role == "p1" || role == "p2",
            is_p1: role == "p1",
            incentive,
        });
    }
    let issue_count = parties.first().map_or(0, |p| p.score_table.len());
    let issues = (0..issue_count)
        .map(|i| {
            let id = IssueId::new((b'A' + i as u8) as char)
                .ok_or_else(|| ConfigError::Legacy(format!("too many issues ({issue_count})")))?;
            let option_count = parties[0].score_table[i].len();
            Ok(IssueSpec {
                id,
                label: format!("Issue {id}"),
                option_count: u8::try_from(option_count).unwrap_or(u8::MAX),
                option_labels: None,
            })
        })
        .collect::<Result<Vec<_>, ConfigError>>()?;
    let description = match std::fs::read_to_string(dir.join("global_instructions.txt")) {
        Ok(text) => text.trim().to_string(),
        Err(_) => String::new(),
    };
    let name = dir
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "legacy game".into());

    // validation needs a deal to check, so parse the initial deal afterwards
    let mut config = GameConfig {
        name,
        description,
        parties,
        issues,
        issue_context: BTreeMap::new(),
        initial_deal: Deal::default(),
        rounds: DEFAULT_ROUNDS,
        p1_bonus: DEFAULT_P1_BONUS,
        success_quorum: None,
    };
    let initial = read(dir, "initial_deal.txt")?;
    config.initial_deal = parse_notation(initial.trim(), &config).map_err(ConfigError::InitialDeal)?;
    config.validate()
}
