//! Context-naive comparators: TF-IDF, skip-gram word embeddings, and a
//! softmax linear classifier over fixed feature vectors.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::corpus::QAPair;
use crate::math::{dot, softmax, Matrix};
use crate::num;
use crate::rng;
use crate::vocab::tokenize_words;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BaselineError {
    Fit { reason: String },
    Shape { expected: usize, got: usize },
}

impl fmt::Display for BaselineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BaselineError::Fit { reason } => write!(f, "fit error: {reason}"),
            BaselineError::Shape { expected, got } => {
                write!(f, "feature dimension {got} does not match model dimension {expected}")
            }
        }
    }
}

impl core::error::Error for BaselineError {}

// ---------------------------------------------------------------------------
// TF-IDF
// ---------------------------------------------------------------------------

/// Term index with smoothed inverse document frequencies.
///
/// `tf` is raw count over document length; `idf = ln((1+N)/(1+df)) + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct TfidfModel {
    terms: Vec<String>,
    index: BTreeMap<String, usize>,
    idf: Vec<f64>,
    doc_count: usize,
}

impl TfidfModel {
    /// Rebuilds a model from its serialized parts.
    pub fn from_parts(
        terms: Vec<String>,
        idf: Vec<f64>,
        doc_count: usize,
    ) -> Result<Self, BaselineError> {
        if terms.len() != idf.len() {
            return Err(BaselineError::Shape {
                expected: terms.len(),
                got: idf.len(),
            });
        }
        let index = terms
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Ok(TfidfModel {
            terms,
            index,
            idf,
            doc_count,
        })
    }

    pub fn dim(&self) -> usize {
        self.terms.len()
    }

    pub fn doc_count(&self) -> usize {
        self.doc_count
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn idf(&self) -> &[f64] {
        &self.idf
    }

    pub fn idf_of(&self, term: &str) -> Option<f64> {
        self.index.get(term).map(|&i| self.idf[i])
    }

    /// TF-IDF vector of one document in this model's term space.
    pub fn vector(&self, text: &str) -> Vec<f64> {
        let tokens = tokenize_words(text);
        let mut out = vec![0.0; self.terms.len()];
        if tokens.is_empty() {
            return out;
        }
        let inv_len = 1.0 / tokens.len() as f64;
        for tok in &tokens {
            if let Some(&i) = self.index.get(tok) {
                out[i] += inv_len * self.idf[i];
            }
        }
        out
    }
}

/// Fits term frequencies and smoothed IDFs over the given documents.
pub fn tfidf_fit<S: AsRef<str>>(texts: &[S]) -> Result<TfidfModel, BaselineError> {
    if texts.is_empty() {
        return Err(BaselineError::Fit {
            reason: "no documents".into(),
        });
    }
    let mut df: BTreeMap<String, usize> = BTreeMap::new();
    let mut any_token = false;
    for text in texts {
        let seen: BTreeSet<String> = tokenize_words(text.as_ref()).into_iter().collect();
        for tok in seen {
            any_token = true;
            *df.entry(tok).or_insert(0) += 1;
        }
    }
    if !any_token {
        return Err(BaselineError::Fit {
            reason: "all documents are empty".into(),
        });
    }
    let n = texts.len();
    let mut terms = Vec::with_capacity(df.len());
    let mut idf = Vec::with_capacity(df.len());
    let mut index = BTreeMap::new();
    for (i, (term, d)) in df.into_iter().enumerate() {
        idf.push(num::ln((1.0 + n as f64) / (1.0 + d as f64)) + 1.0);
        index.insert(term.clone(), i);
        terms.push(term);
    }
    Ok(TfidfModel {
        terms,
        index,
        idf,
        doc_count: n,
    })
}

/// Top-`k` terms by corpus-maximum TF-IDF score; ties lexicographic.
pub fn tfidf_rank(model: &TfidfModel, corpus: &[QAPair], k: usize) -> Vec<(String, f64)> {
    let mut best: BTreeMap<&str, f64> = BTreeMap::new();
    for pair in corpus {
        let doc = format!("{} {}", pair.question, pair.answer);
        let tokens = tokenize_words(&doc);
        if tokens.is_empty() {
            continue;
        }
        let inv_len = 1.0 / tokens.len() as f64;
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for tok in &tokens {
            if model.index.contains_key(tok) {
                *counts.entry(tok.as_str()).or_insert(0) += 1;
            }
        }
        for (tok, c) in counts {
            let term_idx = model.index[tok];
            let score = c as f64 * inv_len * model.idf[term_idx];
            let entry = best.entry(model.terms[term_idx].as_str()).or_insert(0.0);
            if score > *entry {
                *entry = score;
            }
        }
    }
    let mut ranked: Vec<(String, f64)> = best
        .into_iter()
        .map(|(t, s)| (t.to_string(), s))
        .collect();
    // Descending score, then lexicographic (BTreeMap iteration pre-sorts by
    // term, and the sort is stable).
    ranked.sort_by(|a, b| b.1.partial_cmp(&a.1).expect("finite scores"));
    ranked.truncate(k.min(ranked.len()));
    ranked
}

// ---------------------------------------------------------------------------
// Skip-gram embeddings
// ---------------------------------------------------------------------------

/// Dense per-term vectors trained with skip-gram negative sampling.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    terms: Vec<String>,
    index: BTreeMap<String, usize>,
    vectors: Matrix,
    dim: usize,
}

impl EmbeddingTable {
    /// Rebuilds a table from its serialized parts.
    pub fn from_parts(terms: Vec<String>, vectors: Matrix) -> Result<Self, BaselineError> {
        if terms.len() != vectors.rows() {
            return Err(BaselineError::Shape {
                expected: terms.len(),
                got: vectors.rows(),
            });
        }
        let index = terms
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        let dim = vectors.cols();
        Ok(EmbeddingTable {
            terms,
            index,
            vectors,
            dim,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vectors(&self) -> &Matrix {
        &self.vectors
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn vector(&self, term: &str) -> Option<&[f64]> {
        self.index.get(term).map(|&i| self.vectors.row(i))
    }

    pub fn cosine(&self, a: &str, b: &str) -> Option<f64> {
        let va = self.vector(a)?;
        let vb = self.vector(b)?;
        let na = num::sqrt(dot(va, va));
        let nb = num::sqrt(dot(vb, vb));
        if na == 0.0 || nb == 0.0 {
            return Some(0.0);
        }
        Some(dot(va, vb) / (na * nb))
    }

    /// Mean vector of the in-vocabulary terms of `text` (zeros if none).
    pub fn mean_vector(&self, text: &str) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        let mut n = 0.0;
        for tok in tokenize_words(text) {
            if let Some(v) = self.vector(&tok) {
                for (o, &x) in out.iter_mut().zip(v) {
                    *o += x;
                }
                n += 1.0;
            }
        }
        if n > 0.0 {
            for o in &mut out {
                *o /= n;
            }
        }
        out
    }
}

const NEGATIVES_PER_PAIR: usize = 5;
const EMBED_BASE_LR: f64 = 0.025;
const EMBED_MIN_LR: f64 = 1e-4;

/// Trains skip-gram with negative sampling over co-occurrence windows.
pub fn embed_fit<S: AsRef<str>>(
    texts: &[S],
    dim: usize,
    window: usize,
    epochs: usize,
    seed: u64,
) -> Result<EmbeddingTable, BaselineError> {
    if dim == 0 {
        return Err(BaselineError::Fit {
            reason: "dimension must be at least 1".into(),
        });
    }
    let docs: Vec<Vec<String>> = texts
        .iter()
        .map(|t| tokenize_words(t.as_ref()))
        .collect();
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for doc in &docs {
        for tok in doc {
            *counts.entry(tok.clone()).or_insert(0) += 1;
        }
    }
    if counts.len() < 2 {
        return Err(BaselineError::Fit {
            reason: format!("need at least 2 distinct terms, found {}", counts.len()),
        });
    }

    let mut terms = Vec::with_capacity(counts.len());
    let mut index = BTreeMap::new();
    let mut cumulative = Vec::with_capacity(counts.len());
    let mut acc = 0.0;
    for (i, (term, c)) in counts.iter().enumerate() {
        index.insert(term.clone(), i);
        terms.push(term.clone());
        acc += num::powf(*c as f64, 0.75);
        cumulative.push(acc);
    }

    let mut r = rng::derive(seed, rng::stream::EMBED, 0);
    let scale = 0.5 / dim as f64;
    let mut input = Matrix::from_fn(terms.len(), dim, |_, _| (r.random::<f64>() - 0.5) * scale);
    let mut output = Matrix::zeros(terms.len(), dim);

    let sample_negative = |r: &mut rand_chacha::ChaCha8Rng| -> usize {
        let x: f64 = r.random::<f64>() * acc;
        cumulative.partition_point(|&c| c < x).min(terms.len() - 1)
    };

    // Deterministic pass order: documents in sequence, shuffled per epoch.
    let total_updates: u64 = {
        let pairs_per_doc: usize = docs
            .iter()
            .map(|d| {
                (0..d.len())
                    .map(|pos| {
                        let lo = pos.saturating_sub(window);
                        let hi = (pos + window + 1).min(d.len());
                        hi - lo - 1
                    })
                    .sum::<usize>()
            })
            .sum();
        (pairs_per_doc.max(1) * epochs.max(1)) as u64
    };
    let mut update: u64 = 0;
    for epoch in 0..epochs {
        let mut doc_order: Vec<usize> = (0..docs.len()).collect();
        doc_order.shuffle(&mut rng::derive(seed, rng::stream::EMBED, 1 + epoch as u64));
        for &di in &doc_order {
            let ids: Vec<usize> = docs[di].iter().map(|t| index[t]).collect();
            for (pos, &center) in ids.iter().enumerate() {
                let lo = pos.saturating_sub(window);
                let hi = (pos + window + 1).min(ids.len());
                for ctx_pos in lo..hi {
                    if ctx_pos == pos {
                        continue;
                    }
                    let lr = (EMBED_BASE_LR
                        * (1.0 - update as f64 / total_updates.max(1) as f64))
                        .max(EMBED_MIN_LR);
                    update += 1;
                    let context = ids[ctx_pos];
                    // one positive + k negatives
                    let mut targets = [(context, 1.0); NEGATIVES_PER_PAIR + 1];
                    for t in targets.iter_mut().skip(1) {
                        let mut neg = sample_negative(&mut r);
                        if neg == context {
                            neg = (neg + 1) % terms.len();
                        }
                        *t = (neg, 0.0);
                    }
                    let mut grad_center = vec![0.0; dim];
                    for &(tgt, label) in &targets {
                        let score = dot(input.row(center), output.row(tgt));
                        let pred = num::sigmoid(score);
                        let g = (pred - label) * lr;
                        for j in 0..dim {
                            grad_center[j] += g * output.get(tgt, j);
                        }
                        for j in 0..dim {
                            let o = output.get(tgt, j) - g * input.get(center, j);
                            output.set(tgt, j, o);
                        }
                    }
                    for j in 0..dim {
                        let v = input.get(center, j) - grad_center[j];
                        input.set(center, j, v);
                    }
                }
            }
        }
    }

    Ok(EmbeddingTable {
        terms,
        index,
        vectors: input,
        dim,
    })
}

// ---------------------------------------------------------------------------
// Softmax linear classifier
// ---------------------------------------------------------------------------

/// Two-class softmax classifier; class 1 is "accepted".
#[derive(Debug, Clone, PartialEq)]
pub struct LinearClassifier {
    pub weights: Matrix,
    pub bias: [f64; 2],
}

impl LinearClassifier {
    pub fn dim(&self) -> usize {
        self.weights.rows()
    }
}

const CLASSIFIER_MAX_EPOCHS: usize = 5000;
const CLASSIFIER_TOL: f64 = 1e-6;

/// Full-batch gradient descent to convergence (loss change below `1e-6` or
/// the epoch cap).
pub fn baseline_train(
    features: &[Vec<f64>],
    labels: &[bool],
) -> Result<LinearClassifier, BaselineError> {
    if features.is_empty() || features.len() != labels.len() {
        return Err(BaselineError::Fit {
            reason: "features and labels must be nonempty and aligned".into(),
        });
    }
    let dim = features[0].len();
    if let Some(bad) = features.iter().find(|f| f.len() != dim) {
        return Err(BaselineError::Shape {
            expected: dim,
            got: bad.len(),
        });
    }

    let n = features.len() as f64;
    let mut clf = LinearClassifier {
        weights: Matrix::zeros(dim, 2),
        bias: [0.0, 0.0],
    };
    let mut lr = 1.0;
    let mut prev_loss = f64::INFINITY;
    for _ in 0..CLASSIFIER_MAX_EPOCHS {
        let mut loss = 0.0;
        let mut grad_w = Matrix::zeros(dim, 2);
        let mut grad_b = [0.0, 0.0];
        for (x, &label) in features.iter().zip(labels) {
            let y = usize::from(label);
            let mut logits = clf.bias;
            for (i, &xi) in x.iter().enumerate() {
                logits[0] += xi * clf.weights.get(i, 0);
                logits[1] += xi * clf.weights.get(i, 1);
            }
            let probs = softmax(&logits);
            loss += -num::ln(probs[y].max(1e-300)) / n;
            let mut d = [probs[0] / n, probs[1] / n];
            d[y] -= 1.0 / n;
            for (i, &xi) in x.iter().enumerate() {
                let row = grad_w.row_mut(i);
                row[0] += xi * d[0];
                row[1] += xi * d[1];
            }
            grad_b[0] += d[0];
            grad_b[1] += d[1];
        }

        if loss > prev_loss {
            lr *= 0.5;
        }
        let converged = (prev_loss - loss).abs() < CLASSIFIER_TOL;
        prev_loss = loss;
        clf.weights.axpy(-lr, &grad_w);
        clf.bias[0] -= lr * grad_b[0];
        clf.bias[1] -= lr * grad_b[1];
        if converged {
            break;
        }
    }
    Ok(clf)
}

/// Accepted-class probability and thresholded label for one feature vector.
pub fn baseline_classify(
    features: &[f64],
    clf: &LinearClassifier,
) -> Result<(f64, bool), BaselineError> {
    if features.len() != clf.dim() {
        return Err(BaselineError::Shape {
            expected: clf.dim(),
            got: features.len(),
        });
    }
    let mut logits = clf.bias;
    for (i, &xi) in features.iter().enumerate() {
        logits[0] += xi * clf.weights.get(i, 0);
        logits[1] += xi * clf.weights.get(i, 1);
    }
    let probs = softmax(&logits);
    Ok((probs[1], probs[1] >= 0.5))
}

// ---------------------------------------------------------------------------
// Pair feature builders
// ---------------------------------------------------------------------------

/// TF-IDF features of the combined question+answer document.
pub fn tfidf_pair_features(model: &TfidfModel, pair: &QAPair) -> Vec<f64> {
    model.vector(&format!("{} {}", pair.question, pair.answer))
}

/// Mean question vector concatenated with mean answer vector (`2 * dim`).
pub fn embedding_pair_features(table: &EmbeddingTable, pair: &QAPair) -> Vec<f64> {
    let mut out = table.mean_vector(&pair.question);
    out.extend(table.mean_vector(&pair.answer));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn idf_of_ubiquitous_term_is_one() {
        let model = tfidf_fit(&["red blue", "red green", "red yellow"]).unwrap();
        let idf = model.idf_of("red").unwrap();
        assert!((idf - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tf_is_count_over_length() {
        let model = tfidf_fit(&["a a b"]).unwrap();
        let v = model.vector("a a b");
        let ia = model.index["a"];
        let ib = model.index["b"];
        // idf is identical for both terms in a single-doc corpus.
        let idf = model.idf[ia];
        assert!((v[ia] - 2.0 / 3.0 * idf).abs() < 1e-12);
        assert!((v[ib] - 1.0 / 3.0 * idf).abs() < 1e-12);
    }

    #[test]
    fn tfidf_matches_hand_computation_on_three_docs() {
        // Docs: "cat cat dog", "dog fish", "fish fish fish".
        // N = 3; df(cat)=1, df(dog)=2, df(fish)=2.
        // idf(cat) = ln(4/2)+1, idf(dog) = idf(fish) = ln(4/3)+1.
        let model = tfidf_fit(&["cat cat dog", "dog fish", "fish fish fish"]).unwrap();
        let idf_cat = (4.0f64 / 2.0).ln() + 1.0;
        let idf_dog = (4.0f64 / 3.0).ln() + 1.0;
        assert!((model.idf_of("cat").unwrap() - idf_cat).abs() < 1e-12);
        assert!((model.idf_of("dog").unwrap() - idf_dog).abs() < 1e-12);

        let corpus: Vec<QAPair> = [
            ("d0", "cat cat dog"),
            ("d1", "dog fish"),
            ("d2", "fish fish fish"),
        ]
        .iter()
        .map(|(id, text)| QAPair {
            id: (*id).into(),
            question: (*text).into(),
            answer: String::new(),
            accepted: true,
        })
        .collect();
        let ranked = tfidf_rank(&model, &corpus, 10);
        // Hand scores (corpus max): cat 2/3*idf_cat = 1.129,
        // fish 3/3*idf_fish = 1.288, dog max(1/3, 1/2)*idf_dog = 0.644.
        assert_eq!(ranked[0].0, "fish");
        assert_eq!(ranked[1].0, "cat");
        assert_eq!(ranked[2].0, "dog");
        assert!((ranked[0].1 - idf_dog).abs() < 1e-12); // tf 1.0 * idf(fish)
    }

    #[test]
    fn tfidf_rank_saturates_and_handles_zero_k() {
        let model = tfidf_fit(&["a b", "b c"]).unwrap();
        let corpus = vec![QAPair {
            id: "p".into(),
            question: "a b".into(),
            answer: "c".into(),
            accepted: true,
        }];
        assert_eq!(tfidf_rank(&model, &corpus, 0).len(), 0);
        assert_eq!(tfidf_rank(&model, &corpus, 99).len(), 3);
    }

    #[test]
    fn uniform_corpus_ranks_lexicographically() {
        let model = tfidf_fit(&["b a c", "b a c"]).unwrap();
        let corpus: Vec<QAPair> = (0..2)
            .map(|i| QAPair {
                id: format!("p{i}"),
                question: "b a c".into(),
                answer: String::new(),
                accepted: true,
            })
            .collect();
        let ranked = tfidf_rank(&model, &corpus, 3);
        let names: Vec<&str> = ranked.iter().map(|(t, _)| t.as_str()).collect();
        assert_eq!(names, ["a", "b", "c"]);
    }

    #[test]
    fn tfidf_fit_rejects_empty_input() {
        assert!(tfidf_fit::<&str>(&[]).is_err());
        assert!(tfidf_fit(&["", "  "]).is_err());
    }

    #[test]
    fn embeddings_are_deterministic_and_self_similar() {
        let texts = ["alpha beta gamma delta", "beta alpha delta gamma"];
        let a = embed_fit(&texts, 8, 2, 3, 42).unwrap();
        let b = embed_fit(&texts, 8, 2, 3, 42).unwrap();
        assert_eq!(a, b);
        assert!((a.cosine("alpha", "alpha").unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn embed_fit_rejects_degenerate_vocab() {
        assert!(embed_fit(&["solo solo solo"], 4, 2, 1, 1).is_err());
        assert!(embed_fit(&["a b"], 0, 2, 1, 1).is_err());
    }

    #[test]
    fn co_occurring_terms_cluster() {
        // Two disjoint co-occurrence clusters; in-cluster similarity must
        // exceed every cross-cluster similarity.
        let mut texts = Vec::new();
        for _ in 0..30 {
            texts.push("north south north south north south");
            texts.push("east west east west east west");
        }
        let table = embed_fit(&texts, 16, 2, 10, 7).unwrap();
        let within = table.cosine("north", "south").unwrap();
        for (a, b) in [
            ("north", "east"),
            ("north", "west"),
            ("south", "east"),
            ("south", "west"),
        ] {
            let cross = table.cosine(a, b).unwrap();
            assert!(
                within > cross,
                "within {within} not above cross {a}-{b} {cross}"
            );
        }
    }

    #[test]
    fn zero_classifier_gives_even_odds() {
        let clf = LinearClassifier {
            weights: Matrix::zeros(3, 2),
            bias: [0.0, 0.0],
        };
        let (p, label) = baseline_classify(&[1.0, -2.0, 0.5], &clf).unwrap();
        assert_eq!(p, 0.5);
        assert!(label);
    }

    #[test]
    fn separable_points_reach_perfect_training_accuracy() {
        let features = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let labels = vec![true, false];
        let clf = baseline_train(&features, &labels).unwrap();
        for (x, &y) in features.iter().zip(&labels) {
            let (_, label) = baseline_classify(x, &clf).unwrap();
            assert_eq!(label, y);
        }
    }

    #[test]
    fn classifier_probabilities_normalize() {
        let features: Vec<Vec<f64>> = (0..10)
            .map(|i| vec![i as f64 * 0.1, (10 - i) as f64 * 0.1])
            .collect();
        let labels: Vec<bool> = (0..10).map(|i| i % 2 == 0).collect();
        let clf = baseline_train(&features, &labels).unwrap();
        for x in &features {
            let (p, _) = baseline_classify(x, &clf).unwrap();
            assert!((0.0..=1.0).contains(&p));
        }
    }

    #[test]
    fn dimension_mismatch_is_a_shape_error() {
        let clf = LinearClassifier {
            weights: Matrix::zeros(3, 2),
            bias: [0.0, 0.0],
        };
        assert!(matches!(
            baseline_classify(&[1.0], &clf),
            Err(BaselineError::Shape {
                expected: 3,
                got: 1
            })
        ));
        assert!(baseline_train(&[vec![1.0], vec![1.0, 2.0]], &[true, false]).is_err());
    }

    #[test]
    fn pair_features_have_declared_dimensions() {
        let model = tfidf_fit(&["a b c", "c d"]).unwrap();
        let table = embed_fit(&["a b c d", "d c b a"], 6, 2, 2, 3).unwrap();
        let pair = QAPair {
            id: "p".into(),
            question: "a b extremely long question with many many words".into(),
            answer: "c".into(),
            accepted: true,
        };
        assert_eq!(tfidf_pair_features(&model, &pair).len(), model.dim());
        assert_eq!(embedding_pair_features(&table, &pair).len(), 2 * table.dim());
    }
}
