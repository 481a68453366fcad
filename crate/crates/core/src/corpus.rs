//! Labeled Q&A pairs: preprocessing, synthesis, and stratified splits.
//!
//! The synthesizer generates a planted-signal corpus: accepted answers carry
//! one of a fixed set of marker bigrams with probability `signal_strength`,
//! unaccepted answers with probability `1 - signal_strength`. The marker
//! constituents also appear individually (never adjacently) in both classes,
//! so the bigram is invisible to bag-of-words models, plus a weaker
//! unigram-level hint channel that context-naive baselines can pick up.

use alloc::borrow::ToOwned;
use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::rng;
use crate::vocab::tokenize_words;

/// One labeled question-answer pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QAPair {
    pub id: String,
    pub question: String,
    pub answer: String,
    pub accepted: bool,
}

/// Stratified train/test partition with the realized per-class counts.
#[derive(Debug, Clone)]
pub struct CorpusSplit {
    pub train: Vec<QAPair>,
    pub test: Vec<QAPair>,
    /// (accepted, unaccepted) counts in `train`.
    pub train_ratio: (usize, usize),
    /// (accepted, unaccepted) counts in `test`.
    pub test_ratio: (usize, usize),
}

/// Structural removals applied before tokenization.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StripPattern {
    /// Remove every occurrence of this literal substring.
    Literal(String),
    /// Remove fenced code blocks (``` ... ```; an unterminated fence is
    /// removed to the end of the text).
    CodeFences,
    /// Remove angle-bracket markup tags (`<...>`).
    Markup,
}

#[derive(Debug, Clone)]
pub struct PreprocessConfig {
    pub stopwords: BTreeSet<String>,
    pub strip_patterns: Vec<StripPattern>,
    pub lowercase: bool,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            stopwords: default_stopwords(),
            strip_patterns: vec![StripPattern::CodeFences, StripPattern::Markup],
            lowercase: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CorpusError {
    /// A field was empty after preprocessing.
    EmptyField { id: String, field: &'static str },
    /// A split requested more pairs of one class than are available.
    Capacity {
        class: &'static str,
        requested: usize,
        available: usize,
    },
}

impl fmt::Display for CorpusError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CorpusError::EmptyField { id, field } => {
                write!(f, "pair `{id}`: {field} is empty after preprocessing")
            }
            CorpusError::Capacity {
                class,
                requested,
                available,
            } => write!(
                f,
                "requested {requested} {class} pairs but only {available} available (shortfall {})",
                requested - available
            ),
        }
    }
}

impl core::error::Error for CorpusError {}

/// The fixed default stopword list (includes pronouns and common participles).
pub fn default_stopwords() -> BTreeSet<String> {
    DEFAULT_STOPWORDS.iter().map(|s| (*s).to_owned()).collect()
}

const DEFAULT_STOPWORDS: &[&str] = &[
    "a", "about", "after", "again", "all", "also", "am", "an", "and", "any", "are", "as", "at",
    "be", "because", "been", "before", "being", "between", "both", "but", "by", "can", "could",
    "did", "do", "does", "doing", "done", "down", "during", "each", "few", "for", "from", "had",
    "has", "have", "having", "he", "her", "here", "hers", "him", "his", "how", "i", "if", "in",
    "into", "is", "it", "its", "itself", "just", "me", "mine", "more", "most", "my", "myself",
    "no", "nor", "not", "now", "of", "off", "on", "once", "only", "or", "other", "our", "ours",
    "out", "over", "own", "please", "she", "should", "so", "some", "such", "than", "that", "the",
    "their", "theirs", "them", "themselves", "then", "there", "these", "they", "this", "those",
    "through", "to", "too", "under", "until", "up", "us", "very", "was", "we", "were", "what",
    "when", "where", "which", "while", "who", "whom", "why", "will", "with", "would", "you",
    "your", "yours", "yourself",
];

fn apply_strip(text: &str, pattern: &StripPattern) -> String {
    match pattern {
        StripPattern::Literal(lit) => {
            if lit.trim().is_empty() {
                return text.to_owned();
            }
            let mut out = text.to_owned();
            for _ in 0..100 {
                if !out.contains(lit.as_str()) {
                    break;
                }
                out = out.replace(lit.as_str(), " ");
            }
            out
        }
        StripPattern::CodeFences => {
            let mut out = String::with_capacity(text.len());
            let mut rest = text;
            loop {
                match rest.find("```") {
                    None => {
                        out.push_str(rest);
                        break;
                    }
                    Some(start) => {
                        out.push_str(&rest[..start]);
                        out.push(' ');
                        let after = &rest[start + 3..];
                        match after.find("```") {
                            None => break,
                            Some(end) => rest = &after[end + 3..],
                        }
                    }
                }
            }
            out
        }
        StripPattern::Markup => {
            let mut out = String::with_capacity(text.len());
            let mut rest = text;
            loop {
                match rest.find('<') {
                    None => {
                        out.push_str(rest);
                        break;
                    }
                    Some(start) => {
                        let after = &rest[start + 1..];
                        match after.find('>') {
                            None => {
                                // Unmatched opener: leave it verbatim so the
                                // result is stable under reapplication.
                                out.push_str(rest);
                                break;
                            }
                            Some(end) => {
                                out.push_str(&rest[..start]);
                                out.push(' ');
                                rest = &after[end + 1..];
                            }
                        }
                    }
                }
            }
            out
        }
    }
}

fn is_sentence_punct(c: char) -> bool {
    matches!(c, '.' | '?' | '!')
}

/// Applies strip patterns, case folding, and whole-token stopword removal.
///
/// When a stopword token carries sentence-ending punctuation the punctuation
/// is kept as its own token, so sentence boundaries survive removal. The
/// result is idempotent: `preprocess(preprocess(t)) == preprocess(t)`.
pub fn preprocess(text: &str, config: &PreprocessConfig) -> String {
    let mut t = text.to_owned();
    for p in &config.strip_patterns {
        t = apply_strip(&t, p);
    }
    if config.lowercase {
        t = t.to_lowercase();
    }

    let mut out: Vec<String> = Vec::new();
    for token in t.split_whitespace() {
        let core_tok = token.trim_matches(|c: char| !c.is_alphanumeric());
        if core_tok.is_empty() {
            out.push(token.to_owned());
            continue;
        }
        let lowered = core_tok.to_lowercase();
        if config.stopwords.contains(&lowered) {
            let lead: String = token
                .chars()
                .take_while(|c: &char| !c.is_alphanumeric())
                .collect();
            let trail: String = token
                .chars()
                .rev()
                .take_while(|c: &char| !c.is_alphanumeric())
                .collect::<Vec<_>>()
                .into_iter()
                .rev()
                .collect();
            if !lead.is_empty() {
                out.push(lead);
            }
            let enders: String = trail.chars().filter(|&c| is_sentence_punct(c)).collect();
            if !enders.is_empty() {
                out.push(enders);
            }
        } else {
            out.push(token.to_owned());
        }
    }
    out.join(" ")
}

/// Preprocesses both sides of a pair, rejecting pairs that collapse to empty.
pub fn preprocess_pair(pair: &QAPair, config: &PreprocessConfig) -> Result<QAPair, CorpusError> {
    let question = preprocess(&pair.question, config);
    let answer = preprocess(&pair.answer, config);
    let has_word = |s: &str| tokenize_words(s).iter().any(|t| t.chars().any(char::is_alphanumeric));
    if !has_word(&question) {
        return Err(CorpusError::EmptyField {
            id: pair.id.clone(),
            field: "question",
        });
    }
    if !has_word(&answer) {
        return Err(CorpusError::EmptyField {
            id: pair.id.clone(),
            field: "answer",
        });
    }
    Ok(QAPair {
        id: pair.id.clone(),
        question,
        answer,
        accepted: pair.accepted,
    })
}

// ---------------------------------------------------------------------------
// Synthetic corpus
// ---------------------------------------------------------------------------

const TOPICS: &[&str] = &[
    "server", "database", "compiler", "scheduler", "cache", "listener", "socket", "daemon",
    "cluster", "container", "pipeline", "kernel", "driver", "gateway", "proxy", "runtime",
    "debugger", "allocator", "router", "firewall",
];

const FAULTS: &[&str] = &[
    "crashes", "stalls", "restarts", "fails", "loops", "hangs", "freezes", "aborts", "misfires",
    "degrades", "flaps", "chokes",
];

const PHASES: &[&str] = &[
    "startup", "shutdown", "migration", "deployment", "upgrade", "rollback", "failover",
    "indexing", "compaction", "handshake", "replication", "recovery",
];

const ARTIFACTS: &[&str] = &[
    "config", "manifest", "logfile", "snapshot", "registry", "payload", "buffer", "queue",
    "checksum", "header", "certificate", "quota",
];

const REMEDIES: &[&str] = &[
    "restart", "rebuild", "patch", "reinstall", "flush", "resize", "disable", "enable", "rotate",
    "reindex", "remount", "repair",
];

const STATES: &[&str] = &["stable", "empty", "valid", "fresh", "intact", "synced"];

const GOOD_HINTS: &[&str] = &["carefully", "precisely", "thoroughly", "reliably", "cleanly", "exactly"];

const BAD_HINTS: &[&str] = &["maybe", "somehow", "randomly", "roughly", "vaguely", "barely"];

/// Class-neutral filler tokens; the product of these stems and suffixes
/// widens the vocabulary so low-dimensional projections of token counts
/// lose most of their information.
const DISTRACTOR_STEMS: &[&str] = &[
    "node", "disk", "mesh", "grid", "task", "pool", "zone", "path", "link", "port", "page",
    "lane", "ring", "slot", "fork", "tile", "rack", "bay", "hub", "pin",
];
const DISTRACTOR_SUFFIXES: &[&str] = &[
    "map", "set", "log", "key", "tag", "box", "bus", "net", "fmt", "idx", "ref", "ptr", "sum",
    "cap", "gen", "opt", "seq", "ctl", "reg", "dir",
];

/// Quality-marker bigrams planted in accepted answers.
pub const MARKER_NGRAMS: &[(&str, &str)] = &[
    ("verified", "workaround"),
    ("pinned", "dependency"),
];

/// Probability that an accepted answer opens a sentence with a good hint.
const HINT_GOOD_IF_ACCEPTED: f64 = 0.35;
const HINT_BAD_IF_ACCEPTED: f64 = 0.15;
const HINT_GOOD_IF_UNACCEPTED: f64 = 0.15;
const HINT_BAD_IF_UNACCEPTED: f64 = 0.35;

/// Base probability of the non-adjacent marker-word pair in the class that
/// carries the marker more often; the other class gets a compensating rate
/// so per-word presence is identical across classes (see
/// [`single_rates_for`]).
const MARKER_SINGLE_BASE: f64 = 0.2;

/// Per-class rates for inserting a marker pair's two words as non-adjacent
/// singles, chosen so that P(word present) is equal for accepted and
/// unaccepted answers. Bag-of-words statistics of marker words then carry
/// no label information; only adjacency does.
fn single_rates_for(signal_strength: f64) -> (f64, f64) {
    let m = MARKER_NGRAMS.len() as f64;
    let p_acc = signal_strength / m;
    let p_un = (1.0 - signal_strength) / m;
    let p_max = p_acc.max(p_un);
    // presence target shared by both classes
    let survive = (1.0 - p_max) * (1.0 - MARKER_SINGLE_BASE);
    let rate = |p_mark: f64| 1.0 - survive / (1.0 - p_mark);
    (rate(p_acc), rate(p_un))
}

/// True when the token stream of `text` contains a marker bigram adjacently.
pub fn contains_marker(text: &str) -> bool {
    let toks = tokenize_words(text);
    toks.windows(2).any(|w| {
        MARKER_NGRAMS
            .iter()
            .any(|(a, b)| w[0] == *a && w[1] == *b)
    })
}

fn partner(word: &str) -> Option<&'static str> {
    for (a, b) in MARKER_NGRAMS {
        if *a == word {
            return Some(b);
        }
        if *b == word {
            return Some(a);
        }
    }
    None
}

fn pick<'a, R: Rng>(rng: &mut R, pool: &[&'a str]) -> &'a str {
    pool[rng.random_range(0..pool.len())]
}

fn pick_distractor<R: Rng>(rng: &mut R) -> String {
    let stem = pick(rng, DISTRACTOR_STEMS);
    let suffix = pick(rng, DISTRACTOR_SUFFIXES);
    format!("{stem}{suffix}")
}

/// Inserts `word` into `tokens` at a position where no marker adjacency with
/// its partner can arise. Gives up silently if no safe slot exists.
fn insert_single<R: Rng>(rng: &mut R, tokens: &mut Vec<String>, word: &str) {
    let p = partner(word);
    let mut slots: Vec<usize> = (0..=tokens.len()).collect();
    slots.shuffle(rng);
    for idx in slots {
        let left_ok = idx == 0 || p != Some(tokens[idx - 1].as_str());
        let right_ok = idx == tokens.len() || p != Some(tokens[idx].as_str());
        if left_ok && right_ok {
            tokens.insert(idx, word.to_owned());
            return;
        }
    }
}

fn render_sentence<R: Rng>(rng: &mut R, tokens: &[String], terminal: char) -> String {
    const OPENERS: &[&str] = &["", "you should", "then", "also", "please"];
    let opener = pick(rng, OPENERS);
    let mut s = String::new();
    if !opener.is_empty() {
        s.push_str(opener);
        s.push(' ');
    }
    s.push_str(&tokens.join(" "));
    s.push(terminal);
    s
}

fn synth_question<R: Rng>(rng: &mut R, topic: &str) -> String {
    let fault = pick(rng, FAULTS);
    let d1 = pick_distractor(rng);
    let d2 = pick_distractor(rng);
    match rng.random_range(0..4u32) {
        0 => format!(
            "why does the {topic} {fault} during {} with {d1} {d2}?",
            pick(rng, PHASES)
        ),
        1 => format!(
            "what makes the {topic} {fault} after {} in {d1}?",
            pick(rng, PHASES)
        ),
        2 => format!(
            "should the {} change when the {topic} {fault} under {d1} {d2}?",
            pick(rng, ARTIFACTS)
        ),
        _ => format!(
            "which {} explains why the {topic} {fault} near {d1}?",
            pick(rng, ARTIFACTS)
        ),
    }
}

fn synth_answer<R: Rng>(
    rng: &mut R,
    topic: &str,
    accepted: bool,
    with_marker: bool,
    single_rate: f64,
) -> String {
    let (p_good, p_bad) = if accepted {
        (HINT_GOOD_IF_ACCEPTED, HINT_BAD_IF_ACCEPTED)
    } else {
        (HINT_GOOD_IF_UNACCEPTED, HINT_BAD_IF_UNACCEPTED)
    };

    loop {
        let n_sentences = rng.random_range(2..=3usize);
        let mut sentences: Vec<Vec<String>> = Vec::with_capacity(n_sentences);
        for s in 0..n_sentences {
            let own = |w: &str| w.to_owned();
            let mut toks: Vec<String> = match rng.random_range(0..3u32) {
                0 => alloc::vec![
                    own(pick(rng, REMEDIES)),
                    own(pick(rng, ARTIFACTS)),
                    own(pick(rng, REMEDIES)),
                    own(if s == 0 { topic } else { pick(rng, TOPICS) }),
                ],
                1 => alloc::vec![
                    own(pick(rng, REMEDIES)),
                    own(pick(rng, ARTIFACTS)),
                    own(pick(rng, PHASES)),
                    own(if s == 0 { topic } else { pick(rng, TOPICS) }),
                ],
                _ => alloc::vec![
                    own(if s == 0 { topic } else { pick(rng, TOPICS) }),
                    own(pick(rng, FAULTS)),
                    own(pick(rng, ARTIFACTS)),
                    own(pick(rng, STATES)),
                ],
            };
            let roll: f64 = rng.random();
            if roll < p_good {
                toks.insert(0, own(pick(rng, GOOD_HINTS)));
            } else if roll < p_good + p_bad {
                toks.insert(0, own(pick(rng, BAD_HINTS)));
            }
            sentences.push(toks);
        }

        // Class-neutral distractors widen the effective vocabulary.
        for _ in 0..rng.random_range(2..=4usize) {
            let d = pick_distractor(rng);
            let si = rng.random_range(0..sentences.len());
            let at = rng.random_range(0..=sentences[si].len());
            sentences[si].insert(at, d);
        }

        // Background singles: both words of a pair inserted non-adjacently,
        // at the class rate that equalizes presence statistics.
        for (a, b) in MARKER_NGRAMS {
            if rng.random::<f64>() < single_rate {
                for w in [*a, *b] {
                    let si = rng.random_range(0..sentences.len());
                    insert_single(rng, &mut sentences[si], w);
                }
            }
        }

        // Length stays class-neutral: a marker contributes two tokens, so
        // marker-free answers get two filler tokens at the same kind of slot.
        let si = rng.random_range(0..sentences.len());
        let at = rng.random_range(0..=sentences[si].len());
        if with_marker {
            let (a, b) = MARKER_NGRAMS[rng.random_range(0..MARKER_NGRAMS.len())];
            sentences[si].insert(at, (*b).to_owned());
            sentences[si].insert(at, (*a).to_owned());
        } else {
            sentences[si].insert(at, pick_distractor(rng));
            sentences[si].insert(at, pick_distractor(rng));
        }

        let rendered: Vec<String> = sentences
            .iter()
            .map(|toks| render_sentence(rng, toks, '.'))
            .collect();
        let text = rendered.join(" ");
        if contains_marker(&text) == with_marker {
            return text;
        }
        // A background single landed next to its partner across a render
        // boundary; resample.
    }
}

/// Generates a planted-signal corpus; byte-identical for the same arguments.
pub fn synthesize_corpus(
    seed: u64,
    n_accepted: usize,
    n_unaccepted: usize,
    signal_strength: f64,
) -> Vec<QAPair> {
    let mut rng = rng::derive(seed, rng::stream::SYNTH, 0);
    let (single_acc, single_un) = single_rates_for(signal_strength);
    let mut pairs = Vec::with_capacity(n_accepted + n_unaccepted);
    for i in 0..n_accepted + n_unaccepted {
        let accepted = i < n_accepted;
        let topic = pick(&mut rng, TOPICS);
        let (marker_p, single_rate) = if accepted {
            (signal_strength, single_acc)
        } else {
            (1.0 - signal_strength, single_un)
        };
        let with_marker = rng.random::<f64>() < marker_p;
        let question = synth_question(&mut rng, topic);
        let answer = synth_answer(&mut rng, topic, accepted, with_marker, single_rate);
        pairs.push(QAPair {
            id: format!("qa-{i:06}"),
            question,
            answer,
            accepted,
        });
    }
    pairs
}

// ---------------------------------------------------------------------------
// Splitting
// ---------------------------------------------------------------------------

/// Stratified disjoint split with exact per-class counts.
pub fn make_split(
    pairs: &[QAPair],
    train_ratio: (usize, usize),
    test_ratio: (usize, usize),
    seed: u64,
) -> Result<CorpusSplit, CorpusError> {
    let mut accepted: Vec<&QAPair> = pairs.iter().filter(|p| p.accepted).collect();
    let mut unaccepted: Vec<&QAPair> = pairs.iter().filter(|p| !p.accepted).collect();

    let need_acc = train_ratio.0 + test_ratio.0;
    let need_un = train_ratio.1 + test_ratio.1;
    if accepted.len() < need_acc {
        return Err(CorpusError::Capacity {
            class: "accepted",
            requested: need_acc,
            available: accepted.len(),
        });
    }
    if unaccepted.len() < need_un {
        return Err(CorpusError::Capacity {
            class: "unaccepted",
            requested: need_un,
            available: unaccepted.len(),
        });
    }

    accepted.shuffle(&mut rng::derive(seed, rng::stream::SPLIT, 0));
    unaccepted.shuffle(&mut rng::derive(seed, rng::stream::SPLIT, 1));

    let mut train: Vec<QAPair> = accepted[..train_ratio.0]
        .iter()
        .chain(&unaccepted[..train_ratio.1])
        .map(|p| (*p).clone())
        .collect();
    let mut test: Vec<QAPair> = accepted[train_ratio.0..train_ratio.0 + test_ratio.0]
        .iter()
        .chain(&unaccepted[train_ratio.1..train_ratio.1 + test_ratio.1])
        .map(|p| (*p).clone())
        .collect();

    train.shuffle(&mut rng::derive(seed, rng::stream::SPLIT, 2));
    test.shuffle(&mut rng::derive(seed, rng::stream::SPLIT, 3));

    Ok(CorpusSplit {
        train,
        test,
        train_ratio,
        test_ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn preprocess_removes_stopwords_as_whole_tokens() {
        let mut config = PreprocessConfig::default();
        config.stopwords = ["the", "is"].iter().map(|s| s.to_string()).collect();
        assert_eq!(preprocess("The server is down", &config), "server down");
        // "there" must not lose its prefix.
        assert_eq!(preprocess("there server", &config), "there server");
    }

    #[test]
    fn preprocess_empty_input() {
        assert_eq!(preprocess("", &PreprocessConfig::default()), "");
    }

    #[test]
    fn preprocess_keeps_sentence_punctuation_of_dropped_tokens() {
        let config = PreprocessConfig::default();
        let out = preprocess("restart service. verify it. works", &config);
        assert_eq!(out, "restart service. verify . works");
    }

    #[test]
    fn preprocess_strips_fences_and_markup() {
        let config = PreprocessConfig::default();
        let out = preprocess("run ```rm -rf /``` <b>now</b> thanks", &config);
        assert!(!out.contains("rm"));
        assert!(!out.contains('<'));
        assert!(out.contains("thanks"));
    }

    proptest! {
        #[test]
        fn preprocess_is_idempotent(text in "\\PC{0,200}") {
            let config = PreprocessConfig::default();
            let once = preprocess(&text, &config);
            let twice = preprocess(&once, &config);
            prop_assert_eq!(once, twice);
        }
    }

    #[test]
    fn synthesis_is_deterministic() {
        let a = synthesize_corpus(7, 40, 40, 0.9);
        let b = synthesize_corpus(7, 40, 40, 0.9);
        assert_eq!(a, b);
    }

    #[test]
    fn full_signal_separates_classes_exactly() {
        let pairs = synthesize_corpus(3, 120, 120, 1.0);
        for p in &pairs {
            assert_eq!(
                contains_marker(&p.answer),
                p.accepted,
                "pair {} violates signal_strength=1.0",
                p.id
            );
        }
    }

    #[test]
    fn marker_rate_tracks_signal_strength() {
        // Binomial 3-sigma bound: 0.9 +- 3*sqrt(0.9*0.1/2000) ~ 0.9 +- 0.020.
        let pairs = synthesize_corpus(11, 2000, 10, 0.9);
        let hits = pairs
            .iter()
            .filter(|p| p.accepted && contains_marker(&p.answer))
            .count();
        let rate = hits as f64 / 2000.0;
        assert!((0.87..=0.93).contains(&rate), "rate {rate}");
    }

    #[test]
    fn markers_survive_preprocessing() {
        let config = PreprocessConfig::default();
        let pairs = synthesize_corpus(5, 200, 200, 1.0);
        for p in &pairs {
            let clean = preprocess(&p.answer, &config);
            assert_eq!(contains_marker(&clean), p.accepted, "pair {}", p.id);
        }
    }

    #[test]
    fn split_counts_are_exact_and_disjoint() {
        let pairs = synthesize_corpus(1, 400, 400, 0.9);
        let split = make_split(&pairs, (100, 300), (25, 75), 9).unwrap();
        assert_eq!(split.train.len(), 400);
        assert_eq!(split.test.len(), 100);
        assert_eq!(split.test.iter().filter(|p| p.accepted).count(), 25);
        assert_eq!(split.test.iter().filter(|p| !p.accepted).count(), 75);
        assert_eq!(split.train.iter().filter(|p| p.accepted).count(), 100);
        let train_ids: BTreeSet<_> = split.train.iter().map(|p| &p.id).collect();
        assert!(split.test.iter().all(|p| !train_ids.contains(&p.id)));
    }

    #[test]
    fn split_with_empty_test() {
        let pairs = synthesize_corpus(1, 50, 50, 0.9);
        let split = make_split(&pairs, (40, 40), (0, 0), 2).unwrap();
        assert!(split.test.is_empty());
        assert_eq!(split.train.len(), 80);
    }

    #[test]
    fn split_capacity_error_reports_shortfall() {
        let pairs = synthesize_corpus(1, 400, 400, 0.9);
        let err = make_split(&pairs, (300, 500), (0, 0), 2).unwrap_err();
        match err {
            CorpusError::Capacity {
                class,
                requested,
                available,
            } => {
                assert_eq!(class, "unaccepted");
                assert_eq!(requested, 500);
                assert_eq!(available, 400);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn split_is_deterministic_per_seed() {
        let pairs = synthesize_corpus(1, 100, 100, 0.9);
        let a = make_split(&pairs, (50, 50), (20, 20), 4).unwrap();
        let b = make_split(&pairs, (50, 50), (20, 20), 4).unwrap();
        assert_eq!(a.train, b.train);
        assert_eq!(a.test, b.test);
    }

    #[test]
    fn preprocess_pair_rejects_empty_answer() {
        let pair = QAPair {
            id: "x1".into(),
            question: "why does the cache stall?".into(),
            answer: "it is. the.".into(),
            accepted: false,
        };
        let err = preprocess_pair(&pair, &PreprocessConfig::default()).unwrap_err();
        assert_eq!(
            err,
            CorpusError::EmptyField {
                id: "x1".into(),
                field: "answer"
            }
        );
    }
}
