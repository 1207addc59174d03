//! Retrieval evaluation and the train-size sweep experiment.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;

use crate::calibrate::{
    apply_calibration, fit_calibration, rank_targets, Direction, MatchOutcome, DEFAULT_GAMMA,
};
use crate::data::{
    load_feature_matrix, load_labels, load_pairs, split_corpus, write_text, ModalityDataset,
    PairedCorpus, SpaceKind,
};
use crate::error::{Error, Result};
use crate::refselect::{select_references_bruteforce, select_references_greedy, DEFAULT_LAMBDA};
use crate::structure::{build_structure, StructureMetric};
use crate::synth::{synthetic_corpus, SyntheticConfig};

/// Average precision of one ranked list.
///
/// `ranked_labels` holds the labels of all targets in rank order; a target is
/// relevant when its label equals `query_label`. Precision is accumulated at
/// every relevant rank over the full list and divided by the number of
/// relevant targets. Returns 0 when no target is relevant.
pub fn average_precision<L: PartialEq>(ranked_labels: &[L], query_label: &L) -> f64 {
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (rank, label) in ranked_labels.iter().enumerate() {
        if label == query_label {
            hits += 1;
            sum += hits as f64 / (rank + 1) as f64;
        }
    }
    if hits == 0 {
        0.0
    } else {
        sum / hits as f64
    }
}

pub fn mean_average_precision(aps: &[f64]) -> Result<f64> {
    if aps.is_empty() {
        return Err(Error::EmptyInput("no average-precision values".into()));
    }
    Ok(aps.iter().sum::<f64>() / aps.len() as f64)
}

/// Expected average precision of a uniformly random ranking of `targets`
/// items of which `relevant` are relevant:
/// `(H_N + (L-1)/(N-1) * (N - H_N)) / N` with `H_N` the harmonic number.
pub fn expected_random_ap(targets: usize, relevant: usize) -> f64 {
    if relevant == 0 || targets == 0 {
        return 0.0;
    }
    if targets == 1 {
        return 1.0;
    }
    let n = targets as f64;
    let h: f64 = (1..=targets).map(|k| 1.0 / k as f64).sum();
    (h + (relevant as f64 - 1.0) / (n - 1.0) * (n - h)) / n
}

/// Which side issues the queries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum QueryDirection {
    /// Modality A objects query modality B targets.
    QueryA,
    /// Modality B objects query modality A targets.
    QueryB,
    /// Mean of the two directions.
    Average,
}

impl QueryDirection {
    pub const ALL: [QueryDirection; 3] = [
        QueryDirection::QueryA,
        QueryDirection::QueryB,
        QueryDirection::Average,
    ];
}

impl fmt::Display for QueryDirection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            QueryDirection::QueryA => "query_a",
            QueryDirection::QueryB => "query_b",
            QueryDirection::Average => "average",
        })
    }
}

/// How many references to select from a training set of size `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RefCount {
    /// `round(fraction * t)`.
    Fraction(f64),
    Fixed(usize),
    All,
}

impl RefCount {
    /// Resolved count, clamped to `2..=t`.
    pub fn resolve(&self, t: usize) -> usize {
        let k = match *self {
            RefCount::Fraction(f) => (f * t as f64).round() as usize,
            RefCount::Fixed(k) => k,
            RefCount::All => t,
        };
        k.clamp(2, t.max(2))
    }
}

impl fmt::Display for RefCount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RefCount::Fraction(x) => write!(f, "{x}"),
            RefCount::Fixed(k) => write!(f, "{k}"),
            RefCount::All => f.write_str("all"),
        }
    }
}

impl FromStr for RefCount {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("all") {
            return Ok(RefCount::All);
        }
        if let Ok(k) = s.parse::<usize>() {
            return if k >= 2 {
                Ok(RefCount::Fixed(k))
            } else {
                Err(Error::InvalidArgument(format!(
                    "reference count must be >= 2, got {k}"
                )))
            };
        }
        match s.parse::<f64>() {
            Ok(f) if f > 0.0 && f <= 1.0 => Ok(RefCount::Fraction(f)),
            _ => Err(Error::InvalidArgument(format!(
                "reference count must be 'all', an integer >= 2 or a fraction in (0, 1], got '{s}'"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelectionMethod {
    Greedy,
    Bruteforce,
}

impl FromStr for SelectionMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "greedy" => Ok(SelectionMethod::Greedy),
            "bruteforce" => Ok(SelectionMethod::Bruteforce),
            other => Err(Error::InvalidArgument(format!(
                "unknown selection method '{other}' (expected greedy or bruteforce)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CorpusSource {
    Files {
        features_a: PathBuf,
        features_b: PathBuf,
        labels_a: PathBuf,
        labels_b: PathBuf,
        pairs: PathBuf,
        space_a: SpaceKind,
        space_b: SpaceKind,
    },
    Synthetic(SyntheticConfig),
}

impl CorpusSource {
    pub fn load(&self) -> Result<PairedCorpus> {
        match self {
            CorpusSource::Synthetic(cfg) => synthetic_corpus(cfg),
            CorpusSource::Files {
                features_a,
                features_b,
                labels_a,
                labels_b,
                pairs,
                space_a,
                space_b,
            } => {
                let a = ModalityDataset::with_row_ids(
                    load_feature_matrix(features_a, None)?,
                    load_labels(labels_a)?,
                    *space_a,
                )
                .map_err(|e| e.context("modality A"))?;
                let b = ModalityDataset::with_row_ids(
                    load_feature_matrix(features_b, None)?,
                    load_labels(labels_b)?,
                    *space_b,
                )
                .map_err(|e| e.context("modality B"))?;
                PairedCorpus::new(a, b, load_pairs(pairs)?)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub corpus: CorpusSource,
    pub train_sizes: Vec<usize>,
    pub seeds: Vec<u64>,
    pub lambda: f64,
    pub gamma: f64,
    pub metric: StructureMetric,
    /// Shared space for both query directions: the other side is calibrated into it.
    pub direction: Direction,
    pub ref_count: RefCount,
    pub selection: SelectionMethod,
    pub method: String,
    pub output_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub const DEFAULT_REF_FRACTION: f64 = 0.75;

    pub fn default_train_sizes() -> Vec<usize> {
        (6..=50).step_by(4).collect()
    }

    pub fn new(corpus: CorpusSource) -> Self {
        Self {
            corpus,
            train_sizes: Self::default_train_sizes(),
            seeds: (0..10).collect(),
            lambda: DEFAULT_LAMBDA,
            gamma: DEFAULT_GAMMA,
            metric: StructureMetric::Cosine,
            direction: Direction::BtoA,
            ref_count: RefCount::Fraction(Self::DEFAULT_REF_FRACTION),
            selection: SelectionMethod::Greedy,
            method: "ssm".into(),
            output_dir: None,
        }
    }

    /// Checks everything that does not need the corpus.
    pub fn validate(&self) -> Result<()> {
        if self.train_sizes.is_empty() {
            return Err(Error::InvalidArgument(
                "train_sizes must not be empty".into(),
            ));
        }
        if let Some(t) = self.train_sizes.iter().find(|&&t| t < 2) {
            return Err(Error::InvalidArgument(format!(
                "train_sizes entries must be >= 2, got {t}"
            )));
        }
        if self.seeds.is_empty() {
            return Err(Error::InvalidArgument("seeds must not be empty".into()));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "lambda must be > 0, got {}",
                self.lambda
            )));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "gamma must be >= 0, got {}",
                self.gamma
            )));
        }
        if self.method.contains(',') || self.method.is_empty() {
            return Err(Error::InvalidArgument(
                "method tag must be non-empty and contain no commas".into(),
            ));
        }
        Ok(())
    }

    /// Checks that every train size fits the corpus.
    pub fn validate_against(&self, corpus: &PairedCorpus) -> Result<()> {
        let pairs = corpus.pairs().len();
        if let Some(t) = self.train_sizes.iter().find(|&&t| t > pairs) {
            return Err(Error::InvalidArgument(format!(
                "train_sizes entry {t} exceeds the {pairs} available pairs"
            )));
        }
        Ok(())
    }
}

/// One `(train_size, seed, direction)` result.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub direction: QueryDirection,
    pub train_size: usize,
    pub seed: u64,
    /// `None` when the split left no test objects.
    pub map: Option<f64>,
    /// Expected mAP of a random ranking of the same queries and targets.
    pub random_baseline: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub direction: QueryDirection,
    pub train_size: usize,
    pub map_mean: f64,
    /// Sample standard deviation over seeds (0 for a single seed).
    pub map_std: f64,
    pub baseline_mean: f64,
    pub seeds: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub method: String,
    pub rows: Vec<ReportRow>,
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |v| format!("{v:.6}"))
}

impl ExperimentReport {
    /// Per `(direction, train_size)` aggregates, sorted by direction then size.
    /// Cells without a test set are left out.
    pub fn summary(&self) -> Vec<SummaryRow> {
        let mut keys: Vec<(QueryDirection, usize)> = self
            .rows
            .iter()
            .map(|r| (r.direction, r.train_size))
            .collect();
        keys.sort();
        keys.dedup();
        keys.into_iter()
            .filter_map(|(direction, train_size)| {
                let cell: Vec<&ReportRow> = self
                    .rows
                    .iter()
                    .filter(|r| {
                        r.direction == direction && r.train_size == train_size && r.map.is_some()
                    })
                    .collect();
                if cell.is_empty() {
                    return None;
                }
                let maps: Vec<f64> = cell.iter().filter_map(|r| r.map).collect();
                let n = maps.len() as f64;
                let mean = maps.iter().sum::<f64>() / n;
                let std = if maps.len() > 1 {
                    (maps.iter().map(|m| (m - mean) * (m - mean)).sum::<f64>() / (n - 1.0)).sqrt()
                } else {
                    0.0
                };
                let baseline_mean = cell.iter().filter_map(|r| r.random_baseline).sum::<f64>() / n;
                Some(SummaryRow {
                    direction,
                    train_size,
                    map_mean: mean,
                    map_std: std,
                    baseline_mean,
                    seeds: maps.len(),
                })
            })
            .collect()
    }

    /// `method,direction,train_size,seed,map`; empty-test cells have `map = NA`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("method,direction,train_size,seed,map\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                self.method,
                r.direction,
                r.train_size,
                r.seed,
                fmt_opt(r.map)
            ));
        }
        out
    }

    /// `method,direction,train_size,map_mean,map_std`.
    pub fn summary_csv(&self) -> String {
        let mut out = String::from("method,direction,train_size,map_mean,map_std\n");
        for s in self.summary() {
            out.push_str(&format!(
                "{},{},{},{:.6},{:.6}\n",
                self.method, s.direction, s.train_size, s.map_mean, s.map_std
            ));
        }
        out
    }

    /// `direction,train_size,seed,random_map`.
    pub fn baseline_csv(&self) -> String {
        let mut out = String::from("direction,train_size,seed,random_map\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{}\n",
                r.direction,
                r.train_size,
                r.seed,
                fmt_opt(r.random_baseline)
            ));
        }
        out
    }

    /// Writes `report.csv`, `summary.csv` and `baseline.csv` into `dir`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_text(&dir.join("report.csv"), &self.to_csv())?;
        write_text(&dir.join("summary.csv"), &self.summary_csv())?;
        write_text(&dir.join("baseline.csv"), &self.baseline_csv())
    }
}

/// Loads the configured corpus and runs the sweep; writes the report when an
/// output directory is configured.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let corpus = cfg.corpus.load()?;
    let report = run_on_corpus(&corpus, cfg)?;
    if let Some(dir) = &cfg.output_dir {
        report.write(dir)?;
    }
    Ok(report)
}

/// Runs every `(train_size, seed)` cell on an already loaded corpus. Rows come
/// out ordered by train size, then seed, then direction.
pub fn run_on_corpus(corpus: &PairedCorpus, cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    cfg.validate_against(corpus)?;
    let cells: Vec<(usize, u64)> = cfg
        .train_sizes
        .iter()
        .flat_map(|&t| cfg.seeds.iter().map(move |&s| (t, s)))
        .collect();
    let rows: Vec<Vec<ReportRow>> = cells
        .par_iter()
        .map(|&(t, seed)| {
            run_cell(corpus, cfg, t, seed)
                .map_err(|e| e.context(format!("train_size={t}, seed={seed}")))
        })
        .collect::<Result<_>>()?;
    Ok(ExperimentReport {
        method: cfg.method.clone(),
        rows: rows.into_iter().flatten().collect(),
    })
}

/// Direction-level result of one cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellScores {
    pub map_query_a: f64,
    pub map_query_b: f64,
    pub baseline_query_a: f64,
    pub baseline_query_b: f64,
}

fn score_direction(
    outcome: &MatchOutcome,
    query_labels: &[&String],
    target_labels: &[&String],
) -> Result<(f64, f64)> {
    let mut aps = Vec::with_capacity(outcome.matches.len());
    let mut baselines = Vec::with_capacity(outcome.matches.len());
    let mut without_relevant = 0;
    for m in &outcome.matches {
        let query = query_labels[m.query_index];
        let ranked: Vec<&String> = m.ranked.iter().map(|&(t, _)| target_labels[t]).collect();
        let relevant = target_labels.iter().filter(|&&l| l == query).count();
        if relevant == 0 {
            without_relevant += 1;
        }
        aps.push(average_precision(&ranked, &query));
        baselines.push(expected_random_ap(target_labels.len(), relevant));
    }
    if without_relevant > 0 {
        log::warn!("{without_relevant} queries have no relevant target; their AP is 0");
    }
    Ok((
        mean_average_precision(&aps)?,
        mean_average_precision(&baselines)?,
    ))
}

/// Split, select references, build both structures, calibrate, and score the
/// held-out objects in both query directions. `None` when nothing is held out.
pub fn evaluate_split(
    corpus: &PairedCorpus,
    cfg: &ExperimentConfig,
    train_size: usize,
    seed: u64,
) -> Result<Option<CellScores>> {
    let split = split_corpus(corpus, train_size, seed)?;
    if split.test_a.is_empty() || split.test_b.is_empty() {
        return Ok(None);
    }
    let (a, b) = (corpus.mod_a(), corpus.mod_b());
    let k = cfg
        .ref_count
        .resolve(train_size)
        .min(split.train_pairs.len());
    let refs = match cfg.selection {
        SelectionMethod::Greedy => {
            select_references_greedy(a, b, &split.train_pairs, k, cfg.lambda)?
        }
        SelectionMethod::Bruteforce => {
            select_references_bruteforce(a, b, &split.train_pairs, k, cfg.lambda)?
        }
    };
    let (ref_a, ref_b) = (refs.indices_a(), refs.indices_b());
    let mut struct_a = build_structure(a, &ref_a)?;
    let mut struct_b = build_structure(b, &ref_b)?;

    match cfg.direction {
        Direction::AtoB => {
            let model = fit_calibration(
                &struct_a.select_rows(&ref_a)?,
                &struct_b.select_rows(&ref_b)?,
                cfg.gamma,
                cfg.direction,
            )?;
            struct_a = apply_calibration(&model, &struct_a)?;
        }
        Direction::BtoA => {
            let model = fit_calibration(
                &struct_b.select_rows(&ref_b)?,
                &struct_a.select_rows(&ref_a)?,
                cfg.gamma,
                cfg.direction,
            )?;
            struct_b = apply_calibration(&model, &struct_b)?;
        }
    }

    let rows_a = struct_a.select_rows(&split.test_a)?;
    let rows_b = struct_b.select_rows(&split.test_b)?;
    let labels_a: Vec<&String> = split.test_a.iter().map(|&i| &a.labels()[i]).collect();
    let labels_b: Vec<&String> = split.test_b.iter().map(|&i| &b.labels()[i]).collect();

    let (map_query_a, baseline_query_a) = score_direction(
        &rank_targets(&rows_a, &rows_b, cfg.metric)?,
        &labels_a,
        &labels_b,
    )?;
    let (map_query_b, baseline_query_b) = score_direction(
        &rank_targets(&rows_b, &rows_a, cfg.metric)?,
        &labels_b,
        &labels_a,
    )?;
    Ok(Some(CellScores {
        map_query_a,
        map_query_b,
        baseline_query_a,
        baseline_query_b,
    }))
}

fn run_cell(
    corpus: &PairedCorpus,
    cfg: &ExperimentConfig,
    train_size: usize,
    seed: u64,
) -> Result<Vec<ReportRow>> {
    let scores = evaluate_split(corpus, cfg, train_size, seed)?;
    Ok(QueryDirection::ALL
        .iter()
        .map(|&direction| {
            let (map, random_baseline) = match (&scores, direction) {
                (None, _) => (None, None),
                (Some(s), QueryDirection::QueryA) => {
                    (Some(s.map_query_a), Some(s.baseline_query_a))
                }
                (Some(s), QueryDirection::QueryB) => {
                    (Some(s.map_query_b), Some(s.baseline_query_b))
                }
                (Some(s), QueryDirection::Average) => (
                    Some(0.5 * (s.map_query_a + s.map_query_b)),
                    Some(0.5 * (s.baseline_query_a + s.baseline_query_b)),
                ),
            };
            ReportRow {
                direction,
                train_size,
                seed,
                map,
                random_baseline,
            }
        })
        .collect())
}
