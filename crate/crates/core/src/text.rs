//! Smooth-inverse-frequency (SIF) sentence embeddings.
//!
//! A sentence vector is the average of its word vectors, each weighted by
//! `a / (a + p(w))` so that frequent words contribute little. Optionally the
//! projection of every sentence vector onto the first singular direction of the
//! batch is removed afterwards, which strips the component shared by all
//! sentences (mostly syntax and stop-word mass).

use std::collections::HashMap;
use std::path::Path;

use nalgebra::{DMatrix, SVD};

use crate::data::{read_text, FeatureMatrix};
use crate::error::{Error, Result};

/// Pretrained word vectors in GloVe text layout.
#[derive(Debug, Clone)]
pub struct WordVectorTable {
    dimension: usize,
    index: HashMap<String, usize>,
    vectors: Vec<f64>,
}

impl WordVectorTable {
    /// Builds a table from `(word, vector)` entries. Later duplicates are ignored.
    pub fn from_entries<I, S>(entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, Vec<f64>)>,
        S: Into<String>,
    {
        let mut table = Self {
            dimension: 0,
            index: HashMap::new(),
            vectors: Vec::new(),
        };
        for (word, vector) in entries {
            table.insert(word.into(), &vector)?;
        }
        if table.index.is_empty() {
            return Err(Error::EmptyInput("word-vector table has no entries".into()));
        }
        Ok(table)
    }

    fn insert(&mut self, word: String, vector: &[f64]) -> Result<()> {
        if self.index.is_empty() {
            if vector.is_empty() {
                return Err(Error::InvalidArgument(format!(
                    "word '{word}' has no vector"
                )));
            }
            self.dimension = vector.len();
        } else if vector.len() != self.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.dimension,
                found: vector.len(),
            });
        }
        if !self.index.contains_key(&word) {
            self.index.insert(word, self.index.len());
            self.vectors.extend_from_slice(vector);
        }
        Ok(())
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn get(&self, word: &str) -> Option<&[f64]> {
        self.index
            .get(word)
            .map(|&i| &self.vectors[i * self.dimension..(i + 1) * self.dimension])
    }
}

/// Parses `word v1 ... vD` lines.
pub fn parse_word_vectors(text: &str, source: &str) -> Result<WordVectorTable> {
    let mut table = WordVectorTable {
        dimension: 0,
        index: HashMap::new(),
        vectors: Vec::new(),
    };
    let mut buf = Vec::new();
    for (lineno, line) in text.lines().enumerate().map(|(i, l)| (i + 1, l)) {
        let mut fields = line.split_whitespace();
        let Some(word) = fields.next() else {
            continue;
        };
        buf.clear();
        for field in fields {
            let v: f64 = field
                .parse()
                .map_err(|_| Error::parse(source, lineno, format!("'{field}' is not a number")))?;
            buf.push(v);
        }
        table.insert(word.to_string(), &buf).map_err(|e| match e {
            Error::DimensionMismatch { expected, found } => Error::parse(
                source,
                lineno,
                format!("expected {expected} components, found {found}"),
            ),
            other => Error::parse(source, lineno, other.to_string()),
        })?;
    }
    if table.is_empty() {
        return Err(Error::EmptyInput(format!("{source} has no word vectors")));
    }
    Ok(table)
}

pub fn load_word_vectors(path: impl AsRef<Path>) -> Result<WordVectorTable> {
    let path = path.as_ref();
    parse_word_vectors(&read_text(path)?, &path.display().to_string())
}

/// Unigram probabilities `p(w)`.
#[derive(Debug, Clone)]
pub struct FrequencyTable {
    probs: HashMap<String, f64>,
    default_probability: f64,
}

impl FrequencyTable {
    pub fn new(probs: HashMap<String, f64>, default_probability: f64) -> Result<Self> {
        let in_range = |p: f64| p > 0.0 && p <= 1.0;
        if let Some((w, p)) = probs.iter().find(|(_, &p)| !in_range(p)) {
            return Err(Error::InvalidArgument(format!(
                "probability of '{w}' must lie in (0, 1], got {p}"
            )));
        }
        if !in_range(default_probability) {
            return Err(Error::InvalidArgument(format!(
                "default probability must lie in (0, 1], got {default_probability}"
            )));
        }
        Ok(Self {
            probs,
            default_probability,
        })
    }

    pub fn probability(&self, word: &str) -> f64 {
        self.probs
            .get(word)
            .copied()
            .unwrap_or(self.default_probability)
    }

    pub fn default_probability(&self) -> f64 {
        self.default_probability
    }

    pub fn with_default_probability(self, default_probability: f64) -> Result<Self> {
        Self::new(self.probs, default_probability)
    }
}

/// Parses `word value` lines. If any value exceeds 1 the column is read as raw
/// counts and normalized by its total; otherwise values are probabilities.
/// The default probability is the smallest probability in the table.
pub fn parse_frequencies(text: &str, source: &str) -> Result<FrequencyTable> {
    let mut raw: Vec<(String, f64)> = Vec::new();
    for (lineno, line) in text.lines().enumerate().map(|(i, l)| (i + 1, l)) {
        let mut fields = line.split_whitespace();
        let Some(word) = fields.next() else {
            continue;
        };
        let value = fields
            .next()
            .ok_or_else(|| Error::parse(source, lineno, "missing count or probability"))?;
        if fields.next().is_some() {
            return Err(Error::parse(source, lineno, "expected 'word value'"));
        }
        let v: f64 = value
            .parse()
            .map_err(|_| Error::parse(source, lineno, format!("'{value}' is not a number")))?;
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::parse(
                source,
                lineno,
                format!("value must be positive, got {v}"),
            ));
        }
        raw.push((word.to_string(), v));
    }
    if raw.is_empty() {
        return Err(Error::EmptyInput(format!("{source} has no frequencies")));
    }
    let total: f64 = raw.iter().map(|(_, v)| v).sum();
    let counts = raw.iter().any(|(_, v)| *v > 1.0);
    let mut probs = HashMap::with_capacity(raw.len());
    for (word, v) in raw {
        let p = if counts { v / total } else { v };
        probs.entry(word).or_insert(p);
    }
    let default = probs.values().copied().fold(f64::INFINITY, f64::min);
    FrequencyTable::new(probs, default)
}

pub fn load_frequencies(path: impl AsRef<Path>) -> Result<FrequencyTable> {
    let path = path.as_ref();
    parse_frequencies(&read_text(path)?, &path.display().to_string())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SifConfig {
    a: f64,
    remove_pc: bool,
}

impl SifConfig {
    pub const DEFAULT_A: f64 = 1e-3;

    pub fn new(a: f64, remove_pc: bool) -> Result<Self> {
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "SIF parameter a must be > 0, got {a}"
            )));
        }
        Ok(Self { a, remove_pc })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn remove_pc(&self) -> bool {
        self.remove_pc
    }
}

impl Default for SifConfig {
    fn default() -> Self {
        Self {
            a: Self::DEFAULT_A,
            remove_pc: true,
        }
    }
}

pub fn sif_weight(word: &str, freqs: &FrequencyTable, a: f64) -> Result<f64> {
    if a.is_nan() || a <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "SIF parameter a must be > 0, got {a}"
        )));
    }
    Ok(a / (a + freqs.probability(word)))
}

/// Lowercases and splits on whitespace.
pub fn tokenize(sentence: &str) -> Vec<String> {
    sentence.split_whitespace().map(str::to_lowercase).collect()
}

/// Sentence embedding matrix plus the rows that had no known token.
#[derive(Debug, Clone)]
pub struct SentenceEmbeddings {
    pub matrix: FeatureMatrix,
    /// Sentences without any in-vocabulary token; their rows are zero.
    pub empty_rows: Vec<usize>,
}

pub fn embed_sentences<S: AsRef<str>>(
    sentences: &[Vec<S>],
    vectors: &WordVectorTable,
    freqs: &FrequencyTable,
    cfg: &SifConfig,
) -> Result<SentenceEmbeddings> {
    if sentences.is_empty() {
        return Err(Error::EmptyInput("no sentences to embed".into()));
    }
    let dim = vectors.dimension();
    let mut values = vec![0.0; sentences.len() * dim];
    let mut empty_rows = Vec::new();
    for (s, tokens) in sentences.iter().enumerate() {
        let row = &mut values[s * dim..(s + 1) * dim];
        let mut known = 0usize;
        for token in tokens {
            let token = token.as_ref();
            let Some(v) = vectors.get(token) else {
                continue;
            };
            let w = sif_weight(token, freqs, cfg.a)?;
            for (acc, x) in row.iter_mut().zip(v) {
                *acc += w * x;
            }
            known += 1;
        }
        if known == 0 {
            empty_rows.push(s);
        } else {
            let inv = 1.0 / known as f64;
            row.iter_mut().for_each(|x| *x *= inv);
        }
    }
    if empty_rows.len() == sentences.len() {
        return Err(Error::EmptyVocabulary);
    }
    if !empty_rows.is_empty() {
        log::warn!(
            "{} of {} sentences have no in-vocabulary token; emitting zero rows",
            empty_rows.len(),
            sentences.len()
        );
    }
    let mut matrix = FeatureMatrix::new(sentences.len(), dim, values)?;
    if cfg.remove_pc {
        matrix = remove_first_principal_component(&matrix)?;
    }
    Ok(SentenceEmbeddings { matrix, empty_rows })
}

/// Unit vector along the largest singular direction of the row space, with
/// its first nonzero coordinate made positive.
pub fn first_singular_direction(matrix: &FeatureMatrix) -> Result<Vec<f64>> {
    let m: DMatrix<f64> = matrix.to_dmatrix();
    if m.iter().all(|&v| v == 0.0) {
        return Err(Error::DegenerateInput("matrix is all zeros".into()));
    }
    let svd = SVD::new(m, false, true);
    let v_t = svd.v_t.ok_or_else(|| {
        Error::DegenerateInput("SVD did not produce right singular vectors".into())
    })?;
    let top = svd
        .singular_values
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, &s)| {
            if s > best.1 {
                (i, s)
            } else {
                best
            }
        })
        .0;
    let mut u: Vec<f64> = v_t.row(top).iter().copied().collect();
    if let Some(&first) = u.iter().find(|&&x| x != 0.0) {
        if first < 0.0 {
            u.iter_mut().for_each(|x| *x = -*x);
        }
    }
    Ok(u)
}

/// Subtracts from each row its projection onto the first singular direction.
pub fn remove_first_principal_component(matrix: &FeatureMatrix) -> Result<FeatureMatrix> {
    let u = first_singular_direction(matrix)?;
    let mut values = Vec::with_capacity(matrix.values().len());
    for row in matrix.rows() {
        let proj: f64 = row.iter().zip(&u).map(|(x, y)| x * y).sum();
        values.extend(row.iter().zip(&u).map(|(x, y)| x - proj * y));
    }
    FeatureMatrix::new(matrix.nrows(), matrix.ncols(), values)
}
