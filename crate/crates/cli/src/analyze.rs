use std::fmt::Write as _;
use std::path::Path;

use anyhow::{Context, Result};
use negotiation_core::deal_notation;
use negotiation_core::deal_space::{DealRow, GameAnalysis, Stats};
use negotiation_core::game::GameConfig;

fn stats(s: &Option<Stats>, precision: usize) -> String {
    match s {
        Some(s) => format!("{:.p$}/{:.p$}/{:.p$}", s.min, s.avg, s.max, p = precision),
        None => "-".into(),
    }
}

pub fn render(analysis: &GameAnalysis, no_batna: bool) -> String {
    let a = analysis;
    let mut out = String::new();
    let _ = writeln!(out, "game                      {}", a.game);
    let _ = writeln!(out, "deals                     {}", a.total_deals);
    let _ = writeln!(
        out,
        "acceptable                {}/{}",
        a.acceptable_count, a.total_deals
    );
    let _ = writeln!(out, "unanimous                 {}/{}", a.unanimous_count, a.total_deals);
    let _ = writeln!(
        out,
        "pareto front              {}/{}",
        a.pareto_front_size, a.acceptable_count
    );
    let _ = writeln!(
        out,
        "front over all outcomes   {}/{} ({} acceptable, {} failing)",
        a.pareto_front_size_all, a.total_deals, a.acceptable_in_front_all, a.failing_in_front_all
    );
    if no_batna {
        let _ = writeln!(
            out,
            "front without batna       {}/{}",
            a.pareto_front_size_no_batna, a.total_deals
        );
    }
    let _ = writeln!(out, "score min/avg/max         {}", stats(&a.score, 1));
    let _ = writeln!(out, "gini min/avg/max          {}", stats(&a.inequality, 2));
    for range in &a.party_ranges {
        let _ = writeln!(out, "  {:<28} {}..{}", range.party, range.min, range.max);
    }
    out
}

/// Per-deal table, tab-separated, one column per party for raw and outcome scores.
pub fn dump_deals(path: &Path, config: &GameConfig, rows: &[DealRow]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .delimiter(b'\t')
        .from_path(path)
        .with_context(|| format!("writing {}", path.display()))?;
    let mut header = vec![
        "deal".to_string(),
        "accept_count".into(),
        "success".into(),
        "unanimous".into(),
        "in_front".into(),
        "in_front_no_batna".into(),
    ];
    header.extend(config.parties.iter().map(|p| format!("score:{}", p.name)));
    header.extend(config.parties.iter().map(|p| format!("outcome:{}", p.name)));
    w.write_record(&header)?;
    for row in rows {
        let mut record = vec![
            deal_notation(&row.deal),
            row.accept_count.to_string(),
            row.success.to_string(),
            row.unanimous.to_string(),
            row.in_front.to_string(),
            row.in_front_no_batna.to_string(),
        ];
        record.extend(row.raw_scores.iter().map(|s| s.to_string()));
        record.extend(row.outcome.scores.iter().map(|s| s.to_string()));
        w.write_record(&record)?;
    }
    w.flush().with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}
