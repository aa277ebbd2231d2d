//! Line-delimited JSON corpus files.

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use agora_core::corpus::{Corpus, CorpusEntry, CorpusError};

#[derive(Debug, thiserror::Error)]
pub enum CorpusFileError {
    #[error("cannot read corpus {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Invalid(#[from] CorpusError),
}

/// Parse one entry per non-blank line. Line numbers in errors are 1-based.
pub fn read_corpus(reader: impl Read) -> Result<Corpus, CorpusFileError> {
    let mut entries = Vec::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line = line.map_err(|e| CorpusFileError::Parse { line: i + 1, message: e.to_string() })?;
        if line.trim().is_empty() {
            continue;
        }
        let entry: CorpusEntry = serde_json::from_str(&line)
            .map_err(|e| CorpusFileError::Parse { line: i + 1, message: e.to_string() })?;
        entries.push(entry);
    }
    Ok(Corpus::new(entries)?)
}

pub fn load_corpus(path: &Path) -> Result<Corpus, CorpusFileError> {
    let file = fs::File::open(path)
        .map_err(|source| CorpusFileError::Io { path: path.display().to_string(), source })?;
    let corpus = read_corpus(file)?;
    log::info!(
        "loaded {} corpus entries from {} ({} pro, {} con)",
        corpus.len(),
        path.display(),
        corpus.count(agora_core::Stance::Pro),
        corpus.count(agora_core::Stance::Con)
    );
    Ok(corpus)
}

pub fn write_corpus(entries: &[CorpusEntry], mut out: impl Write) -> std::io::Result<()> {
    for e in entries {
        serde_json::to_writer(&mut out, e)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}
