//! Plot data from transcripts: p1's deal progression and per-seed inequality.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use negotiation_core::experiment::transcripts_dir;
use negotiation_core::transcript::{load_records, LoadedTranscript};

/// The transcripts directory of a run directory, or `dir` itself.
pub fn resolve_transcripts(dir: &Path) -> PathBuf {
    let nested = transcripts_dir(dir);
    if nested.is_dir() {
        nested
    } else {
        dir.to_path_buf()
    }
}

pub struct Loaded {
    pub transcripts: Vec<LoadedTranscript>,
}

/// Loads complete transcripts, warning about incomplete ones.
pub fn load(dir: &Path) -> Result<Loaded> {
    anyhow::ensure!(dir.is_dir(), "{} is not a directory", dir.display());
    let source = resolve_transcripts(dir);
    let (transcripts, incomplete) = load_records(&source)?;
    for path in incomplete {
        tracing::warn!(path = %path.display(), "skipping incomplete transcript");
        eprintln!("warning: skipping incomplete transcript {}", path.display());
    }
    anyhow::ensure!(
        !transcripts.is_empty(),
        "no complete transcripts in {}",
        source.display()
    );
    Ok(Loaded { transcripts })
}

fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    csv::WriterBuilder::new()
        .delimiter(b'\t')
        .from_path(path)
        .with_context(|| format!("writing {}", path.display()))
}

/// Writes `progression.tsv` and `gini.tsv` into `out`; returns their paths.
pub fn write_plot_data(loaded: &Loaded, out: &Path) -> Result<[PathBuf; 2]> {
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;

    let progression = out.join("progression.tsv");
    let mut w = writer(&progression)?;
    w.write_record(["seed", "round", "p1_score", "collective_score"])?;
    for (_, transcript, _) in &loaded.transcripts {
        for p in transcript.progression() {
            w.write_record([
                p.seed.to_string(),
                p.round.to_string(),
                p.p1_score.to_string(),
                p.collective_score.to_string(),
            ])?;
        }
    }
    w.flush()?;

    let gini = out.join("gini.tsv");
    let mut w = writer(&gini)?;
    w.write_record(["seed", "success", "gini"])?;
    for (_, transcript, record) in &loaded.transcripts {
        let value = transcript.final_gini().map(|g| format!("{g:.6}")).unwrap_or_default();
        w.write_record([record.seed.to_string(), record.final_success.to_string(), value])?;
    }
    w.flush()?;
    Ok([progression, gini])
}
