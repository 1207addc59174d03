//! Core data types, delimited-text ingestion and seeded train/test splitting.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Dense row-major matrix of per-object embeddings for one modality.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl FeatureMatrix {
    /// Builds a matrix from row-major values, checking shape and finiteness.
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::EmptyInput(format!(
                "feature matrix must be at least 1x1, got {rows}x{cols}"
            )));
        }
        if values.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                found: values.len(),
            });
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "non-finite entry at row {}, column {}",
                pos / cols,
                pos % cols
            )));
        }
        Ok(Self { rows, cols, values })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut values = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            let row = row.as_ref();
            if row.len() != cols {
                return Err(Error::DimensionMismatch {
                    expected: cols,
                    found: row.len(),
                });
            }
            values.extend_from_slice(row);
        }
        Self::new(rows.len(), cols, values)
    }

    pub fn from_dmatrix(m: &DMatrix<f64>) -> Result<Self> {
        let mut values = Vec::with_capacity(m.len());
        for i in 0..m.nrows() {
            values.extend(m.row(i).iter().copied());
        }
        Self::new(m.nrows(), m.ncols(), values)
    }

    pub fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.values)
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.cols)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.cols + j]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Keeps only the listed rows, in the given order.
    pub fn select_rows(&self, indices: &[usize]) -> Result<Self> {
        let mut values = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            if i >= self.rows {
                return Err(Error::InvalidArgument(format!(
                    "row index {i} out of range for {} rows",
                    self.rows
                )));
            }
            values.extend_from_slice(self.row(i));
        }
        Self::new(indices.len(), self.cols, values)
    }

    /// Renders the matrix with the given delimiter, one row per line.
    ///
    /// Values use Rust's shortest round-trip formatting, so reloading is exact.
    pub fn to_delimited(&self, delimiter: Delimiter) -> String {
        let sep = delimiter.as_char().to_string();
        let mut out = String::new();
        for row in self.rows() {
            let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            out.push_str(&line.join(&sep));
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        write_text(path.as_ref(), &self.to_delimited(Delimiter::Comma))
    }
}

/// Field separator of a feature file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Delimiter {
    Comma,
    Tab,
}

impl Delimiter {
    pub fn as_char(self) -> char {
        match self {
            Delimiter::Comma => ',',
            Delimiter::Tab => '\t',
        }
    }

    /// `.tsv` files are tab-separated; everything else is read as csv.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("tsv") => Delimiter::Tab,
            _ => Delimiter::Comma,
        }
    }
}

/// Geometry of a modality's feature space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SpaceKind {
    Euclidean,
    Hamming,
}

impl fmt::Display for SpaceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SpaceKind::Euclidean => "euclidean",
            SpaceKind::Hamming => "hamming",
        })
    }
}

impl FromStr for SpaceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "euclidean" => Ok(SpaceKind::Euclidean),
            "hamming" => Ok(SpaceKind::Hamming),
            other => Err(Error::InvalidArgument(format!(
                "unknown space kind '{other}' (expected euclidean or hamming)"
            ))),
        }
    }
}

/// Features, identifiers and class labels for one modality.
#[derive(Debug, Clone)]
pub struct ModalityDataset {
    features: FeatureMatrix,
    ids: Vec<String>,
    labels: Vec<String>,
    space: SpaceKind,
}

impl ModalityDataset {
    pub fn new(
        features: FeatureMatrix,
        ids: Vec<String>,
        labels: Vec<String>,
        space: SpaceKind,
    ) -> Result<Self> {
        let n = features.nrows();
        if ids.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: ids.len(),
            });
        }
        if labels.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: labels.len(),
            });
        }
        let mut seen = HashSet::with_capacity(n);
        for id in &ids {
            if !seen.insert(id.as_str()) {
                return Err(Error::InvalidArgument(format!(
                    "duplicate object id '{id}'"
                )));
            }
        }
        if space == SpaceKind::Hamming {
            if let Some(&v) = features.values().iter().find(|&&v| v != 0.0 && v != 1.0) {
                return Err(Error::NonBinaryInput { value: v });
            }
        }
        Ok(Self {
            features,
            ids,
            labels,
            space,
        })
    }

    /// Dataset whose ids are the row numbers `"0"`, `"1"`, ...
    pub fn with_row_ids(
        features: FeatureMatrix,
        labels: Vec<String>,
        space: SpaceKind,
    ) -> Result<Self> {
        let ids = (0..features.nrows()).map(|i| i.to_string()).collect();
        Self::new(features, ids, labels, space)
    }

    pub fn features(&self) -> &FeatureMatrix {
        &self.features
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn space(&self) -> SpaceKind {
        self.space
    }

    pub fn len(&self) -> usize {
        self.features.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Two modalities plus their ground-truth one-to-one matches.
#[derive(Debug, Clone)]
pub struct PairedCorpus {
    mod_a: ModalityDataset,
    mod_b: ModalityDataset,
    pairs: Vec<(usize, usize)>,
}

impl PairedCorpus {
    pub fn new(
        mod_a: ModalityDataset,
        mod_b: ModalityDataset,
        pairs: Vec<(usize, usize)>,
    ) -> Result<Self> {
        let mut seen_a = HashSet::new();
        let mut seen_b = HashSet::new();
        for &(a, b) in &pairs {
            if a >= mod_a.len() || b >= mod_b.len() {
                return Err(Error::InvalidArgument(format!(
                    "pair ({a},{b}) out of range for modalities of size {} and {}",
                    mod_a.len(),
                    mod_b.len()
                )));
            }
            if !seen_a.insert(a) || !seen_b.insert(b) {
                return Err(Error::InvalidArgument(format!(
                    "pair ({a},{b}) reuses an object that already appears in another pair"
                )));
            }
        }
        Ok(Self {
            mod_a,
            mod_b,
            pairs,
        })
    }

    pub fn mod_a(&self) -> &ModalityDataset {
        &self.mod_a
    }

    pub fn mod_b(&self) -> &ModalityDataset {
        &self.mod_b
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }
}

/// Training pairs and held-out objects of both modalities.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train_pairs: Vec<(usize, usize)>,
    pub test_a: Vec<usize>,
    pub test_b: Vec<usize>,
}

/// Draws `train_size` pairs uniformly without replacement; every object not
/// used by a training pair is held out for testing.
pub fn split_corpus(corpus: &PairedCorpus, train_size: usize, seed: u64) -> Result<Split> {
    let total = corpus.pairs.len();
    if train_size == 0 || train_size > total {
        return Err(Error::InvalidArgument(format!(
            "train_size must be in 1..={total}, got {train_size}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = rand::seq::index::sample(&mut rng, total, train_size).into_vec();
    chosen.sort_unstable();
    let train_pairs: Vec<(usize, usize)> = chosen.iter().map(|&p| corpus.pairs[p]).collect();

    let used_a: HashSet<usize> = train_pairs.iter().map(|p| p.0).collect();
    let used_b: HashSet<usize> = train_pairs.iter().map(|p| p.1).collect();
    let test_a = (0..corpus.mod_a.len())
        .filter(|i| !used_a.contains(i))
        .collect();
    let test_b = (0..corpus.mod_b.len())
        .filter(|i| !used_b.contains(i))
        .collect();
    Ok(Split {
        train_pairs,
        test_a,
        test_b,
    })
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn write_text(path: &Path, contents: &str) -> Result<()> {
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(contents.as_bytes())
        .map_err(|e| Error::io(path, e))
}

/// Parses delimited decimal reals; blank lines are ignored.
pub fn parse_feature_matrix(
    text: &str,
    delimiter: Delimiter,
    source: &str,
) -> Result<FeatureMatrix> {
    let mut cols = None;
    let mut rows = 0;
    let mut values = Vec::new();
    for (lineno, line) in text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())) {
        if line.is_empty() {
            continue;
        }
        let mut count = 0;
        for field in line.split(delimiter.as_char()) {
            let field = field.trim();
            let v: f64 = field
                .parse()
                .map_err(|_| Error::parse(source, lineno, format!("'{field}' is not a number")))?;
            if !v.is_finite() {
                return Err(Error::parse(
                    source,
                    lineno,
                    format!("non-finite value '{field}'"),
                ));
            }
            values.push(v);
            count += 1;
        }
        match cols {
            None => cols = Some(count),
            Some(c) if c != count => {
                return Err(Error::parse(
                    source,
                    lineno,
                    format!("expected {c} fields, found {count}"),
                ))
            }
            Some(_) => {}
        }
        rows += 1;
    }
    let Some(cols) = cols else {
        return Err(Error::EmptyInput(format!("{source} has no data rows")));
    };
    FeatureMatrix::new(rows, cols, values)
}

/// Loads a feature file; the delimiter is taken from the extension when `None`.
pub fn load_feature_matrix(
    path: impl AsRef<Path>,
    delimiter: Option<Delimiter>,
) -> Result<FeatureMatrix> {
    let path = path.as_ref();
    let delimiter = delimiter.unwrap_or_else(|| Delimiter::from_path(path));
    parse_feature_matrix(&read_text(path)?, delimiter, &path.display().to_string())
}

pub fn load_labels(path: impl AsRef<Path>) -> Result<Vec<String>> {
    let path = path.as_ref();
    let text = read_text(path)?;
    let mut labels = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let label = line.trim();
        if label.is_empty() {
            return Err(Error::parse(path.display(), lineno + 1, "empty label"));
        }
        labels.push(label.to_string());
    }
    if labels.is_empty() {
        return Err(Error::EmptyInput(format!(
            "{} has no labels",
            path.display()
        )));
    }
    Ok(labels)
}

/// Parses `indexA,indexB` lines (0-based). `#` starts a comment line.
pub fn parse_pairs(text: &str, source: &str) -> Result<Vec<(usize, usize)>> {
    let mut pairs = Vec::new();
    for (lineno, line) in text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())) {
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (a, b) = line
            .split_once(',')
            .ok_or_else(|| Error::parse(source, lineno, "expected 'indexA,indexB'"))?;
        let a = a
            .trim()
            .parse()
            .map_err(|_| Error::parse(source, lineno, format!("bad index '{a}'")))?;
        let b = b
            .trim()
            .parse()
            .map_err(|_| Error::parse(source, lineno, format!("bad index '{b}'")))?;
        pairs.push((a, b));
    }
    Ok(pairs)
}

pub fn load_pairs(path: impl AsRef<Path>) -> Result<Vec<(usize, usize)>> {
    let path = path.as_ref();
    let pairs = parse_pairs(&read_text(path)?, &path.display().to_string())?;
    if pairs.is_empty() {
        return Err(Error::EmptyInput(format!(
            "{} has no pairs",
            path.display()
        )));
    }
    Ok(pairs)
}

pub fn write_pairs(path: impl AsRef<Path>, pairs: &[(usize, usize)]) -> Result<()> {
    let body: String = pairs.iter().map(|(a, b)| format!("{a},{b}\n")).collect();
    write_text(path.as_ref(), &body)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<FeatureMatrix> {
        parse_feature_matrix(text, Delimiter::Comma, "test")
    }

    fn corpus(n: usize) -> PairedCorpus {
        let rows: Vec<Vec<f64>> = (0..n).map(|i| vec![i as f64]).collect();
        let fm = FeatureMatrix::from_rows(&rows).unwrap();
        let labels = vec!["x".to_string(); n];
        let a = ModalityDataset::with_row_ids(fm.clone(), labels.clone(), SpaceKind::Euclidean)
            .unwrap();
        let b = ModalityDataset::with_row_ids(fm, labels, SpaceKind::Euclidean).unwrap();
        PairedCorpus::new(a, b, (0..n).map(|i| (i, i)).collect()).unwrap()
    }

    #[test]
    fn parses_square_matrix() {
        let m = parse("1.0,2.0\n3.0,4.0").unwrap();
        assert_eq!((m.nrows(), m.ncols()), (2, 2));
        assert_eq!(m.values(), &[1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn parses_single_value() {
        let m = parse("0.5\n").unwrap();
        assert_eq!((m.nrows(), m.ncols()), (1, 1));
        assert_eq!(m.get(0, 0), 0.5);
    }

    #[test]
    fn ragged_row_reports_its_line() {
        match parse("1.0,2.0\n3.0") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn non_numeric_and_empty_inputs() {
        assert!(matches!(
            parse("1.0,abc"),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(matches!(
            parse("1.0\nnan"),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(matches!(parse("\n\n"), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn tab_delimited() {
        let m = parse_feature_matrix("1\t2\n3\t4\n", Delimiter::Tab, "t").unwrap();
        assert_eq!(m.row(1), &[3.0, 4.0]);
        assert_eq!(Delimiter::from_path(Path::new("x.TSV")), Delimiter::Tab);
        assert_eq!(Delimiter::from_path(Path::new("x.txt")), Delimiter::Comma);
    }

    #[test]
    fn missing_file_is_io_error() {
        let err = load_feature_matrix("/nonexistent/features.csv", None).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }

    #[test]
    fn labels_in_file_order() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("labels.txt");
        fs::write(&p, "cat\ndog\ncat\n").unwrap();
        assert_eq!(load_labels(&p).unwrap(), vec!["cat", "dog", "cat"]);
        fs::write(&p, "bird").unwrap();
        assert_eq!(load_labels(&p).unwrap(), vec!["bird"]);
        fs::write(&p, "").unwrap();
        assert!(matches!(load_labels(&p), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn dataset_invariants() {
        let fm = FeatureMatrix::from_rows(&[[0.0, 1.0], [1.0, 0.5]]).unwrap();
        let labels = vec!["a".to_string(), "b".to_string()];
        assert!(matches!(
            ModalityDataset::with_row_ids(fm.clone(), labels.clone(), SpaceKind::Hamming),
            Err(Error::NonBinaryInput { .. })
        ));
        let dup = vec!["x".to_string(), "x".to_string()];
        assert!(
            ModalityDataset::new(fm.clone(), dup, labels.clone(), SpaceKind::Euclidean).is_err()
        );
        assert!(
            ModalityDataset::with_row_ids(fm, labels[..1].to_vec(), SpaceKind::Euclidean).is_err()
        );
    }

    #[test]
    fn corpus_rejects_reused_objects() {
        let c = corpus(3);
        let (a, b) = (c.mod_a().clone(), c.mod_b().clone());
        assert!(PairedCorpus::new(a.clone(), b.clone(), vec![(0, 0), (0, 1)]).is_err());
        assert!(PairedCorpus::new(a, b, vec![(0, 5)]).is_err());
    }

    #[test]
    fn exhaustive_split_leaves_no_test() {
        let split = split_corpus(&corpus(10), 10, 3).unwrap();
        assert_eq!(split.train_pairs.len(), 10);
        assert!(split.test_a.is_empty() && split.test_b.is_empty());
    }

    #[test]
    fn split_is_seed_deterministic() {
        let c = corpus(10);
        let s1 = split_corpus(&c, 6, 7).unwrap();
        let s2 = split_corpus(&c, 6, 7).unwrap();
        assert_eq!(s1, s2);
        assert_eq!(s1.train_pairs.len(), 6);
        assert_eq!(s1.test_a.len(), 4);
    }

    #[test]
    fn split_rejects_out_of_range_sizes() {
        let c = corpus(10);
        assert!(matches!(
            split_corpus(&c, 0, 1),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            split_corpus(&c, 11, 1),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn pairs_file_format() {
        let pairs = parse_pairs("# header\n0,1\n 2 , 3 \n\n", "p").unwrap();
        assert_eq!(pairs, vec![(0, 1), (2, 3)]);
        assert!(parse_pairs("0;1", "p").is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn csv_round_trip(rows in 1usize..6, cols in 1usize..5, seed in proptest::collection::vec(-1e6f64..1e6, 30)) {
                let values: Vec<f64> = (0..rows * cols).map(|i| seed[i % seed.len()] * (1.0 + i as f64 * 1e-7)).collect();
                let m = FeatureMatrix::new(rows, cols, values).unwrap();
                let back = parse_feature_matrix(&m.to_delimited(Delimiter::Comma), Delimiter::Comma, "rt").unwrap();
                for (x, y) in m.values().iter().zip(back.values()) {
                    prop_assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0));
                }
            }

            #[test]
            fn split_sizes_and_disjointness(n in 1usize..40, frac in 0.0f64..1.0, seed in any::<u64>()) {
                let c = corpus(n);
                let t = 1 + ((n - 1) as f64 * frac) as usize;
                let s = split_corpus(&c, t, seed).unwrap();
                prop_assert_eq!(s.train_pairs.len(), t);
                let train_a: HashSet<usize> = s.train_pairs.iter().map(|p| p.0).collect();
                prop_assert!(s.test_a.iter().all(|i| !train_a.contains(i)));
                prop_assert_eq!(s.test_a.len() + t, n);
            }
        }
    }
}
