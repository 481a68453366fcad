//! Corpus, vocabulary, and split-manifest files.
//!
//! Corpus files are UTF-8 JSON records, one per line, with fields `id`,
//! `question`, `answer`, `accepted`. Vocabulary files are one token per
//! line (line number = id) and round-trip byte-exactly. Split manifests
//! record the ids plus the seed so a split can be reconstructed.

use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::Path;

use pairscore_core::corpus::{preprocess_pair, CorpusSplit, PreprocessConfig, QAPair};
use pairscore_core::vocab::Vocabulary;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {reason}")]
    Malformed { path: String, reason: String },
}

impl FormatError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        FormatError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    fn malformed(path: &Path, reason: impl Into<String>) -> Self {
        FormatError::Malformed {
            path: path.display().to_string(),
            reason: reason.into(),
        }
    }
}

/// Writes `bytes` to `path` atomically (temp file + rename).
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), FormatError> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    fs::create_dir_all(dir).map_err(|e| FormatError::io(dir, e))?;
    let tmp = dir.join(format!(
        ".tmp-{}-{}",
        std::process::id(),
        path.file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| "file".into())
    ));
    {
        let mut f = fs::File::create(&tmp).map_err(|e| FormatError::io(&tmp, e))?;
        f.write_all(bytes).map_err(|e| FormatError::io(&tmp, e))?;
        f.sync_all().map_err(|e| FormatError::io(&tmp, e))?;
    }
    fs::rename(&tmp, path).map_err(|e| FormatError::io(path, e))
}

#[derive(Debug, Serialize, Deserialize)]
struct RawRecord {
    id: String,
    question: String,
    answer: String,
    accepted: bool,
}

/// A record that failed to parse or validate, with its 1-based line number.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecordError {
    pub line: usize,
    pub message: String,
}

/// Result of loading a corpus file: preprocessed pairs plus located errors.
#[derive(Debug)]
pub struct CorpusLoad {
    pub pairs: Vec<QAPair>,
    pub record_errors: Vec<RecordError>,
}

/// Reads a newline-delimited corpus file and preprocesses every record.
/// Invalid records are reported with their line numbers, never silently
/// dropped.
pub fn load_corpus(path: &Path, config: &PreprocessConfig) -> Result<CorpusLoad, FormatError> {
    let text = fs::read_to_string(path).map_err(|e| FormatError::io(path, e))?;
    let mut pairs = Vec::new();
    let mut record_errors = Vec::new();
    let mut seen_ids: BTreeSet<String> = BTreeSet::new();
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawRecord = match serde_json::from_str(line) {
            Ok(r) => r,
            Err(e) => {
                record_errors.push(RecordError {
                    line: lineno,
                    message: format!("parse error: {e}"),
                });
                continue;
            }
        };
        if !seen_ids.insert(raw.id.clone()) {
            record_errors.push(RecordError {
                line: lineno,
                message: format!("duplicate id `{}`", raw.id),
            });
            continue;
        }
        let pair = QAPair {
            id: raw.id,
            question: raw.question,
            answer: raw.answer,
            accepted: raw.accepted,
        };
        match preprocess_pair(&pair, config) {
            Ok(clean) => pairs.push(clean),
            Err(e) => record_errors.push(RecordError {
                line: lineno,
                message: e.to_string(),
            }),
        }
    }
    Ok(CorpusLoad {
        pairs,
        record_errors,
    })
}

/// Writes pairs as one JSON record per line.
pub fn save_corpus(path: &Path, pairs: &[QAPair]) -> Result<(), FormatError> {
    let mut out = String::new();
    for p in pairs {
        let raw = RawRecord {
            id: p.id.clone(),
            question: p.question.clone(),
            answer: p.answer.clone(),
            accepted: p.accepted,
        };
        out.push_str(&serde_json::to_string(&raw).expect("serializable record"));
        out.push('\n');
    }
    write_atomic(path, out.as_bytes())
}

/// Saves a vocabulary, one token per line; the line number is the id.
pub fn save_vocab(path: &Path, vocab: &Vocabulary) -> Result<(), FormatError> {
    let mut out = String::new();
    for tok in vocab.tokens() {
        out.push_str(tok);
        out.push('\n');
    }
    write_atomic(path, out.as_bytes())
}

/// Loads a vocabulary file written by [`save_vocab`].
pub fn load_vocab(path: &Path) -> Result<Vocabulary, FormatError> {
    let text = fs::read_to_string(path).map_err(|e| FormatError::io(path, e))?;
    let tokens: Vec<String> = text.lines().map(|l| l.to_owned()).collect();
    Vocabulary::from_tokens(tokens).map_err(|e| FormatError::malformed(path, e.to_string()))
}

/// Ids and seed of a stratified split, enough to reconstruct it.
#[derive(Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct SplitManifest {
    pub seed: u64,
    pub train_ratio: (usize, usize),
    pub test_ratio: (usize, usize),
    pub train_ids: Vec<String>,
    pub test_ids: Vec<String>,
}

impl SplitManifest {
    pub fn from_split(split: &CorpusSplit, seed: u64) -> Self {
        SplitManifest {
            seed,
            train_ratio: split.train_ratio,
            test_ratio: split.test_ratio,
            train_ids: split.train.iter().map(|p| p.id.clone()).collect(),
            test_ids: split.test.iter().map(|p| p.id.clone()).collect(),
        }
    }

    /// Rebuilds the split by id lookup against a loaded corpus.
    pub fn resolve(&self, pairs: &[QAPair]) -> Result<CorpusSplit, String> {
        let by_id: std::collections::BTreeMap<&str, &QAPair> =
            pairs.iter().map(|p| (p.id.as_str(), p)).collect();
        let lookup = |ids: &[String]| -> Result<Vec<QAPair>, String> {
            ids.iter()
                .map(|id| {
                    by_id
                        .get(id.as_str())
                        .map(|p| (*p).clone())
                        .ok_or_else(|| format!("id `{id}` not present in corpus"))
                })
                .collect()
        };
        Ok(CorpusSplit {
            train: lookup(&self.train_ids)?,
            test: lookup(&self.test_ids)?,
            train_ratio: self.train_ratio,
            test_ratio: self.test_ratio,
        })
    }
}

pub fn save_split(path: &Path, manifest: &SplitManifest) -> Result<(), FormatError> {
    let json = serde_json::to_vec_pretty(manifest).expect("serializable manifest");
    write_atomic(path, &json)
}

pub fn load_split(path: &Path) -> Result<SplitManifest, FormatError> {
    let text = fs::read_to_string(path).map_err(|e| FormatError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| FormatError::malformed(path, e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use pairscore_core::corpus::{make_split, synthesize_corpus};
    use pairscore_core::vocab::build_vocab;

    #[test]
    fn corpus_roundtrip_with_located_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("corpus.jsonl");
        let mut lines = Vec::new();
        for i in 0..6 {
            lines.push(format!(
                "{{\"id\":\"p{i}\",\"question\":\"why does the cache stall with nodemap?\",\"answer\":\"restart buffer rotate cache.\",\"accepted\":{}}}",
                i % 2 == 0
            ));
        }
        lines.insert(2, "{not json".to_string());
        lines.insert(5, "{\"id\":\"bad\",\"question\":\"the a an\",\"answer\":\"x.\",\"accepted\":true}".to_string());
        fs::write(&path, lines.join("\n")).unwrap();

        let load = load_corpus(&path, &PreprocessConfig::default()).unwrap();
        assert_eq!(load.pairs.len(), 6);
        assert_eq!(load.record_errors.len(), 2);
        assert_eq!(load.record_errors[0].line, 3);
        assert!(load.record_errors[0].message.contains("parse error"));
        assert_eq!(load.record_errors[1].line, 6);
        assert!(load.record_errors[1].message.contains("question is empty"));
    }

    #[test]
    fn duplicate_ids_are_reported() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.jsonl");
        let rec = "{\"id\":\"same\",\"question\":\"why does the cache stall?\",\"answer\":\"restart buffer.\",\"accepted\":true}";
        fs::write(&path, format!("{rec}\n{rec}\n")).unwrap();
        let load = load_corpus(&path, &PreprocessConfig::default()).unwrap();
        assert_eq!(load.pairs.len(), 1);
        assert_eq!(load.record_errors.len(), 1);
        assert!(load.record_errors[0].message.contains("duplicate id"));
    }

    #[test]
    fn synthesized_corpus_roundtrips_through_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("synth.jsonl");
        let pairs = synthesize_corpus(3, 20, 20, 0.9);
        save_corpus(&path, &pairs).unwrap();
        let no_preprocess = PreprocessConfig {
            stopwords: Default::default(),
            strip_patterns: vec![],
            lowercase: false,
        };
        let load = load_corpus(&path, &no_preprocess).unwrap();
        assert!(load.record_errors.is_empty());
        assert_eq!(load.pairs, pairs);
    }

    #[test]
    fn vocab_file_roundtrips_byte_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.vocab");
        let vocab = build_vocab(&["alpha beta gamma alpha"], 64, 1).unwrap();
        save_vocab(&path, &vocab).unwrap();
        let bytes1 = fs::read(&path).unwrap();
        let loaded = load_vocab(&path).unwrap();
        assert_eq!(loaded, vocab);
        save_vocab(&path, &loaded).unwrap();
        let bytes2 = fs::read(&path).unwrap();
        assert_eq!(bytes1, bytes2);
    }

    #[test]
    fn split_manifest_reconstructs_the_split() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("split.json");
        let pairs = synthesize_corpus(5, 40, 40, 0.9);
        let split = make_split(&pairs, (20, 20), (10, 10), 13).unwrap();
        let manifest = SplitManifest::from_split(&split, 13);
        save_split(&path, &manifest).unwrap();
        let loaded = load_split(&path).unwrap();
        assert_eq!(loaded, manifest);
        let resolved = loaded.resolve(&pairs).unwrap();
        assert_eq!(resolved.train, split.train);
        assert_eq!(resolved.test, split.test);
    }
}
