//! Vocabulary construction and question-answer pair encoding.
//!
//! Encoding follows the usual two-segment layout: `[CLS] q [SEP] a [SEP]`
//! padded to a fixed length, with segment ids 0 through the first `[SEP]`
//! and 1 after it. Words are matched greedily against the vocabulary
//! (continuation pieces carry a `##` prefix); a word that cannot be fully
//! segmented falls back to `[UNK]`.

use alloc::borrow::ToOwned;
use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::corpus::QAPair;

pub const PAD_ID: u32 = 0;
pub const UNK_ID: u32 = 1;
pub const CLS_ID: u32 = 2;
pub const SEP_ID: u32 = 3;
pub const MASK_ID: u32 = 4;

pub const RESERVED_TOKENS: [&str; 5] = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"];

/// Number of reserved ids at the front of every vocabulary.
pub const RESERVED_LEN: usize = RESERVED_TOKENS.len();

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum VocabError {
    /// `max_size` must leave room for the reserved tokens.
    MaxSizeTooSmall { max_size: usize },
    /// `max_seq_len` must fit `[CLS] t [SEP] t [SEP]`.
    SeqLenTooSmall { max_seq_len: usize },
    /// Token id outside the vocabulary.
    IdOutOfRange { id: u32, size: usize },
    /// Token list did not start with the reserved tokens or contained duplicates.
    MalformedTokenList { reason: String },
}

impl fmt::Display for VocabError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VocabError::MaxSizeTooSmall { max_size } => {
                write!(f, "max_size {max_size} must exceed the {RESERVED_LEN} reserved tokens")
            }
            VocabError::SeqLenTooSmall { max_seq_len } => {
                write!(f, "max_seq_len {max_seq_len} is below the minimum of 5")
            }
            VocabError::IdOutOfRange { id, size } => {
                write!(f, "token id {id} out of range for vocabulary of {size}")
            }
            VocabError::MalformedTokenList { reason } => write!(f, "malformed token list: {reason}"),
        }
    }
}

impl core::error::Error for VocabError {}

/// Ordered token table; id 0..=4 are the reserved tokens, always.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: BTreeMap<String, u32>,
}

impl Vocabulary {
    /// Builds a vocabulary from a complete token list (reserved tokens first).
    pub fn from_tokens(tokens: Vec<String>) -> Result<Self, VocabError> {
        if tokens.len() < RESERVED_LEN {
            return Err(VocabError::MalformedTokenList {
                reason: "shorter than the reserved prefix".to_owned(),
            });
        }
        for (i, expected) in RESERVED_TOKENS.iter().enumerate() {
            if tokens[i] != *expected {
                return Err(VocabError::MalformedTokenList {
                    reason: alloc::format!("id {i} is `{}`, expected `{expected}`", tokens[i]),
                });
            }
        }
        let mut index = BTreeMap::new();
        for (i, tok) in tokens.iter().enumerate() {
            if index.insert(tok.clone(), i as u32).is_some() {
                return Err(VocabError::MalformedTokenList {
                    reason: alloc::format!("duplicate token `{tok}`"),
                });
            }
        }
        Ok(Vocabulary { tokens, index })
    }

    pub fn size(&self) -> usize {
        self.tokens.len()
    }

    pub fn id_of(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }
}

/// Splits text into word and punctuation tokens.
///
/// Alphanumeric runs (plus `_` and `##` continuation prefixes as written)
/// become word tokens; every other non-whitespace character is its own token.
pub fn tokenize_words(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for chunk in text.split_whitespace() {
        let mut word = String::new();
        for c in chunk.chars() {
            if c.is_alphanumeric() || c == '_' || c == '#' {
                word.push(c);
            } else {
                if !word.is_empty() {
                    out.push(core::mem::take(&mut word));
                }
                out.push(c.to_string());
            }
        }
        if !word.is_empty() {
            out.push(word);
        }
    }
    out
}

/// Induces a vocabulary from raw texts: reserved tokens first, then terms by
/// descending frequency (ties broken lexicographically), capped at `max_size`.
pub fn build_vocab<S: AsRef<str>>(
    texts: &[S],
    max_size: usize,
    min_freq: usize,
) -> Result<Vocabulary, VocabError> {
    if max_size <= RESERVED_LEN {
        return Err(VocabError::MaxSizeTooSmall { max_size });
    }
    let mut freq: BTreeMap<String, usize> = BTreeMap::new();
    for text in texts {
        for tok in tokenize_words(text.as_ref()) {
            *freq.entry(tok).or_insert(0) += 1;
        }
    }
    let mut by_freq: Vec<(String, usize)> = freq
        .into_iter()
        .filter(|(_, n)| *n >= min_freq.max(1))
        .collect();
    by_freq.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));

    let mut tokens: Vec<String> = RESERVED_TOKENS.iter().map(|s| (*s).to_owned()).collect();
    tokens.extend(
        by_freq
            .into_iter()
            .take(max_size - RESERVED_LEN)
            .map(|(t, _)| t),
    );
    Vocabulary::from_tokens(tokens)
}

/// Appends the `k` highest-TF-IDF terms of `corpus` that are not already
/// present. Existing ids never change; new tokens get fresh consecutive ids.
pub fn extend_vocab(vocab: &Vocabulary, corpus: &[QAPair], k: usize) -> Vocabulary {
    if k == 0 {
        return vocab.clone();
    }
    let texts: Vec<String> = corpus
        .iter()
        .map(|p| alloc::format!("{} {}", p.question, p.answer))
        .collect();
    let Ok(model) = crate::baseline::tfidf_fit(&texts) else {
        return vocab.clone();
    };
    let ranked = crate::baseline::tfidf_rank(&model, corpus, usize::MAX);
    let mut tokens = vocab.tokens.clone();
    let mut added = 0;
    for (term, _) in ranked {
        if added == k {
            break;
        }
        if !vocab.contains(&term) {
            tokens.push(term);
            added += 1;
        }
    }
    Vocabulary::from_tokens(tokens).expect("extension preserves the reserved prefix")
}

/// Id sequence with segment and attention masks, padded to a fixed length.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedPair {
    pub ids: Vec<u32>,
    pub segments: Vec<u8>,
    pub mask: Vec<u8>,
    pub label: Option<bool>,
}

impl EncodedPair {
    /// Index one past the last attended position.
    pub fn active_len(&self) -> usize {
        self.mask
            .iter()
            .rposition(|&m| m == 1)
            .map_or(0, |i| i + 1)
    }
}

/// Greedy longest-match segmentation of one word; `None` means fall back to
/// `[UNK]` for the whole word.
fn word_pieces(word: &str, vocab: &Vocabulary) -> Option<Vec<u32>> {
    if let Some(id) = vocab.id_of(word) {
        return Some(vec![id]);
    }
    let chars: Vec<char> = word.chars().collect();
    let mut pieces = Vec::new();
    let mut start = 0;
    while start < chars.len() {
        let mut end = chars.len();
        let mut found = None;
        while end > start {
            let piece: String = chars[start..end].iter().collect();
            let candidate = if start == 0 {
                piece
            } else {
                alloc::format!("##{piece}")
            };
            if let Some(id) = vocab.id_of(&candidate) {
                found = Some((id, end));
                break;
            }
            end -= 1;
        }
        match found {
            Some((id, next)) => {
                pieces.push(id);
                start = next;
            }
            None => return None,
        }
    }
    Some(pieces)
}

fn text_to_ids(text: &str, vocab: &Vocabulary) -> Vec<u32> {
    let mut ids = Vec::new();
    for word in tokenize_words(text) {
        match word_pieces(&word, vocab) {
            Some(pieces) => ids.extend(pieces),
            None => ids.push(UNK_ID),
        }
    }
    ids
}

/// Encodes a question-answer pair as `[CLS] q [SEP] a [SEP]` with padding.
///
/// Over-long pairs are trimmed from the end of whichever side is currently
/// longer (question first on ties) until the pair fits.
pub fn encode_pair(
    question: &str,
    answer: &str,
    vocab: &Vocabulary,
    max_seq_len: usize,
) -> Result<EncodedPair, VocabError> {
    if max_seq_len < 5 {
        return Err(VocabError::SeqLenTooSmall { max_seq_len });
    }
    let mut q_ids = text_to_ids(question, vocab);
    let mut a_ids = text_to_ids(answer, vocab);

    let n_seps = if a_ids.is_empty() && !q_ids.is_empty() {
        1
    } else {
        2
    };
    let budget = max_seq_len - 1 - n_seps;
    while q_ids.len() + a_ids.len() > budget {
        if q_ids.len() >= a_ids.len() {
            q_ids.pop();
        } else {
            a_ids.pop();
        }
    }

    let mut ids = Vec::with_capacity(max_seq_len);
    let mut segments = Vec::with_capacity(max_seq_len);
    ids.push(CLS_ID);
    segments.push(0);
    ids.extend(&q_ids);
    segments.extend(core::iter::repeat(0).take(q_ids.len()));
    ids.push(SEP_ID);
    segments.push(0);
    if n_seps == 2 {
        ids.extend(&a_ids);
        segments.extend(core::iter::repeat(1).take(a_ids.len()));
        ids.push(SEP_ID);
        segments.push(1);
    }

    let real = ids.len();
    let mut mask = vec![1u8; real];
    ids.resize(max_seq_len, PAD_ID);
    segments.resize(max_seq_len, 0);
    mask.resize(max_seq_len, 0);

    debug_assert_eq!(ids.len(), max_seq_len);
    let _ = real;
    Ok(EncodedPair {
        ids,
        segments,
        mask,
        label: None,
    })
}

/// Inverse token lookup; padding positions are omitted.
pub fn decode(ids: &[u32], vocab: &Vocabulary) -> Result<Vec<String>, VocabError> {
    let mut out = Vec::new();
    for &id in ids {
        match vocab.token(id) {
            None => {
                return Err(VocabError::IdOutOfRange {
                    id,
                    size: vocab.size(),
                })
            }
            Some(tok) => {
                if id != PAD_ID {
                    out.push(tok.to_owned());
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn small_vocab() -> Vocabulary {
        // how=5, yes=6 as in the layout example.
        let mut tokens: Vec<String> = RESERVED_TOKENS.iter().map(|s| s.to_string()).collect();
        tokens.extend(["how", "yes", "play", "##ing", "x"].iter().map(|s| s.to_string()));
        Vocabulary::from_tokens(tokens).unwrap()
    }

    #[test]
    fn build_vocab_orders_by_frequency_then_lex() {
        let v = build_vocab(&["a a b"], 8, 1).unwrap();
        assert_eq!(
            v.tokens(),
            &["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]", "a", "b"]
        );
        let tie = build_vocab(&["y x"], 8, 1).unwrap();
        assert_eq!(tie.id_of("x"), Some(5));
        assert_eq!(tie.id_of("y"), Some(6));
    }

    #[test]
    fn build_vocab_empty_texts_gives_reserved_only() {
        let v = build_vocab::<&str>(&[], 10, 1).unwrap();
        assert_eq!(v.size(), RESERVED_LEN);
    }

    #[test]
    fn build_vocab_rejects_tiny_max_size() {
        assert!(matches!(
            build_vocab(&["a"], 5, 1),
            Err(VocabError::MaxSizeTooSmall { .. })
        ));
    }

    #[test]
    fn encode_pair_layout_matches_definition() {
        let v = small_vocab();
        let e = encode_pair("how", "yes", &v, 8).unwrap();
        assert_eq!(e.ids, vec![2, 5, 3, 6, 3, 0, 0, 0]);
        assert_eq!(e.segments, vec![0, 0, 0, 1, 1, 0, 0, 0]);
        assert_eq!(e.mask, vec![1, 1, 1, 1, 1, 0, 0, 0]);
    }

    #[test]
    fn encode_pair_maps_oov_to_unk() {
        let v = small_vocab();
        let e = encode_pair("how unknownword", "yes", &v, 10).unwrap();
        assert_eq!(e.ids[2], UNK_ID);
    }

    #[test]
    fn encode_pair_longest_first_truncation() {
        let v = small_vocab();
        // q = 10 tokens, a = 2; budget is max_seq_len - 3 = 6, so the longer
        // side is trimmed down to 4 while the answer keeps its 2 tokens.
        let q = "how how how how how how how how how how";
        let a = "yes yes";
        let e = encode_pair(q, a, &v, 9).unwrap();
        let q_tokens = e.ids.iter().filter(|&&i| i == 5).count();
        let a_tokens = e.ids.iter().filter(|&&i| i == 6).count();
        assert_eq!(q_tokens, 4);
        assert_eq!(a_tokens, 2);
        assert_eq!(e.ids.len(), 9);
        assert_eq!(e.ids.iter().filter(|&&i| i == SEP_ID).count(), 2);
    }

    #[test]
    fn encode_pair_rejects_tiny_seq_len() {
        let v = small_vocab();
        assert!(matches!(
            encode_pair("how", "yes", &v, 4),
            Err(VocabError::SeqLenTooSmall { .. })
        ));
    }

    #[test]
    fn wordpiece_greedy_longest_match() {
        let v = small_vocab();
        let e = encode_pair("playing", "yes", &v, 10).unwrap();
        let play = v.id_of("play").unwrap();
        let ing = v.id_of("##ing").unwrap();
        assert_eq!(&e.ids[1..3], &[play, ing]);
    }

    #[test]
    fn decode_skips_padding_and_keeps_specials() {
        let v = small_vocab();
        assert_eq!(decode(&[2, 5, 3], &v).unwrap(), vec!["[CLS]", "how", "[SEP]"]);
        assert_eq!(decode(&[0, 0, 0], &v).unwrap(), Vec::<String>::new());
        assert!(matches!(
            decode(&[99], &v),
            Err(VocabError::IdOutOfRange { id: 99, .. })
        ));
    }

    #[test]
    fn extend_vocab_preserves_existing_ids_and_skips_known_terms() {
        let corpus: Vec<QAPair> = (0..3)
            .map(|i| QAPair {
                id: alloc::format!("p{i}"),
                question: "how".into(),
                answer: if i == 0 {
                    "x rare".into()
                } else {
                    "yes common".into()
                },
                accepted: true,
            })
            .collect();
        let base = small_vocab();
        let extended = extend_vocab(&base, &corpus, 2);
        for (i, tok) in base.tokens().iter().enumerate() {
            assert_eq!(extended.id_of(tok), Some(i as u32));
        }
        // "x" is already known, so it must not be re-appended.
        assert_eq!(
            extended
                .tokens()
                .iter()
                .filter(|t| t.as_str() == "x")
                .count(),
            1
        );
        assert_eq!(extended.size(), base.size() + 2);
        let zero = extend_vocab(&base, &corpus, 0);
        assert_eq!(zero, base);
    }

    proptest! {
        #[test]
        fn encode_decode_roundtrip_preserves_invocab_words(
            q_words in proptest::collection::vec(prop_oneof!["how", "yes", "play"], 1..6),
            a_words in proptest::collection::vec(prop_oneof!["how", "yes", "x"], 1..6),
        ) {
            let v = small_vocab();
            let q = q_words.join(" ");
            let a = a_words.join(" ");
            let e = encode_pair(&q, &a, &v, 32).unwrap();
            let toks = decode(&e.ids, &v).unwrap();
            let expected: Vec<String> = core::iter::once("[CLS]".to_string())
                .chain(q_words.iter().map(|w| w.to_string()))
                .chain(core::iter::once("[SEP]".to_string()))
                .chain(a_words.iter().map(|w| w.to_string()))
                .chain(core::iter::once("[SEP]".to_string()))
                .collect();
            prop_assert_eq!(toks, expected);
        }

        #[test]
        fn encoded_length_is_always_max_seq_len(
            q in "[a-z ]{0,40}",
            a in "[a-z ]{1,40}",
            len in 5usize..40,
        ) {
            let v = small_vocab();
            let e = encode_pair(&q, &a, &v, len).unwrap();
            prop_assert_eq!(e.ids.len(), len);
            prop_assert_eq!(e.segments.len(), len);
            prop_assert_eq!(e.mask.len(), len);
            prop_assert_eq!(e.ids[0], CLS_ID);
        }
    }
}
