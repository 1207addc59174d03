//! Choosing which matched training pairs serve as references.
//!
//! A reference set scores well when its members are far from each other and
//! when each member's distances to the remaining (non-reference) training
//! objects are spread out:
//!
//! ```text
//! L(R) = [ sum_{i != j in R} d(o_i, o_j) ] * [ sum_{i in R} var_r d(o_i, r) ]^lambda
//! ```
//!
//! with `r` ranging over non-reference training objects and the population
//! variance. Pairs are scored in both modalities; each modality's score is
//! divided by the score of the whole training set (every object as a
//! reference, variances taken against the other training objects) and the two
//! normalized scores are summed.

use std::path::Path;

use itertools::Itertools;

use crate::data::{read_text, write_text, ModalityDataset};
use crate::error::{Error, Result};
use crate::structure::native_distance;

pub const DEFAULT_LAMBDA: f64 = 1.0;

/// Largest training set accepted by exhaustive search.
pub const BRUTEFORCE_LIMIT: usize = 20;

/// Maximum number of swap sweeps in greedy refinement.
pub const MAX_SWEEPS: usize = 100;

const TIE_TOLERANCE: f64 = 1e-12;

/// Selected reference pairs, in training order.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceSet {
    pairs: Vec<(usize, usize)>,
    lambda: f64,
    objective_value: f64,
}

impl ReferenceSet {
    pub fn new(pairs: Vec<(usize, usize)>, lambda: f64, objective_value: f64) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::InvalidArgument(
                "reference set must not be empty".into(),
            ));
        }
        for (i, p) in pairs.iter().enumerate() {
            if pairs[..i].contains(p) {
                return Err(Error::InvalidArgument(format!(
                    "duplicate reference pair {p:?}"
                )));
            }
        }
        check_lambda(lambda)?;
        Ok(Self {
            pairs,
            lambda,
            objective_value,
        })
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn k(&self) -> usize {
        self.pairs.len()
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn objective_value(&self) -> f64 {
        self.objective_value
    }

    pub fn indices_a(&self) -> Vec<usize> {
        self.pairs.iter().map(|p| p.0).collect()
    }

    pub fn indices_b(&self) -> Vec<usize> {
        self.pairs.iter().map(|p| p.1).collect()
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "# k={} lambda={} objective={}\n",
            self.k(),
            self.lambda,
            self.objective_value
        );
        for (a, b) in &self.pairs {
            out.push_str(&format!("{a},{b}\n"));
        }
        out
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        write_text(path.as_ref(), &self.to_text())
    }
}

pub fn parse_reference_set(text: &str, source: &str) -> Result<ReferenceSet> {
    let mut lambda = DEFAULT_LAMBDA;
    let mut objective = f64::NAN;
    if let Some(header) = text.lines().next().and_then(|l| l.trim().strip_prefix('#')) {
        for field in header.split_whitespace() {
            let Some((key, value)) = field.split_once('=') else {
                continue;
            };
            let parsed = || {
                value
                    .parse::<f64>()
                    .map_err(|_| Error::parse(source, 1, format!("bad {key} value '{value}'")))
            };
            match key {
                "lambda" => lambda = parsed()?,
                "objective" => objective = parsed()?,
                _ => {}
            }
        }
    }
    let pairs = crate::data::parse_pairs(text, source)?;
    ReferenceSet::new(pairs, lambda, objective)
}

pub fn load_reference_set(path: impl AsRef<Path>) -> Result<ReferenceSet> {
    let path = path.as_ref();
    parse_reference_set(&read_text(path)?, &path.display().to_string())
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "lambda must be > 0, got {lambda}"
        )));
    }
    Ok(())
}

/// Value of the single-modality selection objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveScore {
    pub value: f64,
    /// Set when the summed variance is zero, which forces the score to zero.
    pub zero_variance: bool,
}

fn population_variance(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let (count, sum) = values
        .clone()
        .fold((0usize, 0.0), |(c, s), v| (c + 1, s + v));
    if count == 0 {
        return 0.0;
    }
    let mean = sum / count as f64;
    values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / count as f64
}

fn combine(pair_sum: f64, variance_sum: f64, lambda: f64) -> ObjectiveScore {
    if variance_sum <= 0.0 {
        ObjectiveScore {
            value: 0.0,
            zero_variance: true,
        }
    } else {
        ObjectiveScore {
            value: pair_sum * variance_sum.powf(lambda),
            zero_variance: false,
        }
    }
}

/// Scores `candidate_refs` as a reference set of `data` with the remaining
/// objects `non_refs`, using the dataset's native distance.
pub fn objective(
    data: &ModalityDataset,
    candidate_refs: &[usize],
    non_refs: &[usize],
    lambda: f64,
) -> Result<ObjectiveScore> {
    check_lambda(lambda)?;
    let n = data.len();
    if candidate_refs.len() < 2 || non_refs.len() < 2 {
        return Err(Error::InvalidArgument(
            "objective needs at least two references and two non-references".into(),
        ));
    }
    for (pos, &i) in candidate_refs.iter().enumerate() {
        if i >= n || candidate_refs[..pos].contains(&i) {
            return Err(Error::InvalidArgument(format!(
                "invalid or duplicate reference {i}"
            )));
        }
    }
    for &r in non_refs {
        if r >= n || candidate_refs.contains(&r) {
            return Err(Error::InvalidArgument(format!(
                "non-reference {r} is out of range or also a reference"
            )));
        }
    }
    let f = data.features();
    let dist = |i: usize, j: usize| native_distance(data.space(), f.row(i), f.row(j));
    let mut pair_sum = 0.0;
    for &i in candidate_refs {
        for &j in candidate_refs {
            if i != j {
                pair_sum += dist(i, j);
            }
        }
    }
    let variance_sum: f64 = candidate_refs
        .iter()
        .map(|&i| population_variance(non_refs.iter().map(|&r| dist(i, r))))
        .sum();
    let score = combine(pair_sum, variance_sum, lambda);
    if score.zero_variance {
        log::warn!("reference objective has zero summed variance; score forced to 0");
    }
    Ok(score)
}

/// Pairwise distances among the training objects of one modality.
struct TrainingSpace {
    t: usize,
    dist: Vec<f64>,
    pair_total: f64,
    normalizer: f64,
}

impl TrainingSpace {
    fn new(data: &ModalityDataset, indices: &[usize], lambda: f64) -> Self {
        let t = indices.len();
        let f = data.features();
        let mut dist = vec![0.0; t * t];
        for i in 0..t {
            for j in i + 1..t {
                let d = native_distance(data.space(), f.row(indices[i]), f.row(indices[j]));
                dist[i * t + j] = d;
                dist[j * t + i] = d;
            }
        }
        let mut space = Self {
            t,
            dist,
            pair_total: 0.0,
            normalizer: 1.0,
        };
        space.pair_total = space.dist.iter().sum::<f64>() / 2.0;
        let all: Vec<usize> = (0..t).collect();
        let full_variance: f64 = (0..t)
            .map(|i| population_variance(all.iter().filter(|&&j| j != i).map(|&j| space.d(i, j))))
            .sum();
        let full = combine(2.0 * space.pair_total, full_variance, lambda).value;
        if full > 0.0 && full.is_finite() {
            space.normalizer = full;
        }
        space
    }

    fn d(&self, i: usize, j: usize) -> f64 {
        self.dist[i * self.t + j]
    }

    fn score(&self, selected: &[usize], in_set: &[bool], lambda: f64) -> f64 {
        let mut pair_sum = 0.0;
        for &i in selected {
            for &j in selected {
                if i != j {
                    pair_sum += self.d(i, j);
                }
            }
        }
        let rest = || (0..self.t).filter(|&r| !in_set[r]);
        let variance_sum: f64 = selected
            .iter()
            .map(|&i| population_variance(rest().map(move |r| self.d(i, r))))
            .sum();
        combine(pair_sum, variance_sum, lambda).value / self.normalizer
    }
}

/// Joint scoring of subsets of the training pairs across both modalities.
struct SelectionProblem<'a> {
    train_pairs: &'a [(usize, usize)],
    a: TrainingSpace,
    b: TrainingSpace,
    lambda: f64,
}

impl<'a> SelectionProblem<'a> {
    fn new(
        mod_a: &ModalityDataset,
        mod_b: &ModalityDataset,
        train_pairs: &'a [(usize, usize)],
        lambda: f64,
    ) -> Result<Self> {
        check_lambda(lambda)?;
        if train_pairs.is_empty() {
            return Err(Error::InvalidArgument(
                "no training pairs to select from".into(),
            ));
        }
        for (pos, &(ia, ib)) in train_pairs.iter().enumerate() {
            if ia >= mod_a.len() || ib >= mod_b.len() {
                return Err(Error::InvalidArgument(format!(
                    "training pair ({ia},{ib}) out of range"
                )));
            }
            if train_pairs[..pos].iter().any(|p| p.0 == ia || p.1 == ib) {
                return Err(Error::InvalidArgument(format!(
                    "training pair ({ia},{ib}) reuses an object"
                )));
            }
        }
        let idx_a: Vec<usize> = train_pairs.iter().map(|p| p.0).collect();
        let idx_b: Vec<usize> = train_pairs.iter().map(|p| p.1).collect();
        Ok(Self {
            train_pairs,
            a: TrainingSpace::new(mod_a, &idx_a, lambda),
            b: TrainingSpace::new(mod_b, &idx_b, lambda),
            lambda,
        })
    }

    fn t(&self) -> usize {
        self.train_pairs.len()
    }

    fn score(&self, selected: &[usize]) -> f64 {
        let mut in_set = vec![false; self.t()];
        for &i in selected {
            in_set[i] = true;
        }
        self.a.score(selected, &in_set, self.lambda) + self.b.score(selected, &in_set, self.lambda)
    }

    fn finish(&self, mut selected: Vec<usize>) -> Result<ReferenceSet> {
        selected.sort_unstable();
        let value = self.score(&selected);
        let pairs = selected.iter().map(|&p| self.train_pairs[p]).collect();
        ReferenceSet::new(pairs, self.lambda, value)
    }
}

fn improves(candidate: f64, incumbent: f64) -> bool {
    candidate > incumbent + TIE_TOLERANCE * incumbent.abs().max(f64::MIN_POSITIVE)
}

/// Normalized two-modality objective of the given training-pair positions.
pub fn combined_objective(
    mod_a: &ModalityDataset,
    mod_b: &ModalityDataset,
    train_pairs: &[(usize, usize)],
    positions: &[usize],
    lambda: f64,
) -> Result<f64> {
    let problem = SelectionProblem::new(mod_a, mod_b, train_pairs, lambda)?;
    if positions.iter().any(|&p| p >= problem.t()) {
        return Err(Error::InvalidArgument(
            "subset position out of range".into(),
        ));
    }
    Ok(problem.score(positions))
}

/// Exhaustive search over all `k`-subsets of the training pairs. Among equal
/// scores the lexicographically smallest position list wins.
pub fn select_references_bruteforce(
    mod_a: &ModalityDataset,
    mod_b: &ModalityDataset,
    train_pairs: &[(usize, usize)],
    k: usize,
    lambda: f64,
) -> Result<ReferenceSet> {
    if train_pairs.len() > BRUTEFORCE_LIMIT {
        return Err(Error::TooLarge {
            size: train_pairs.len(),
            limit: BRUTEFORCE_LIMIT,
        });
    }
    let problem = SelectionProblem::new(mod_a, mod_b, train_pairs, lambda)?;
    if k == 0 || k > problem.t() {
        return Err(Error::InvalidArgument(format!(
            "k must be in 1..={}, got {k}",
            problem.t()
        )));
    }
    let mut best: Option<(f64, Vec<usize>)> = None;
    for subset in (0..problem.t()).combinations(k) {
        let value = problem.score(&subset);
        if best.as_ref().is_none_or(|(b, _)| improves(value, *b)) {
            best = Some((value, subset));
        }
    }
    let (_, subset) = best.expect("at least one subset");
    problem.finish(subset)
}

/// Greedy forward selection followed by best-improvement swap refinement.
///
/// Starts from the two training pairs that are farthest apart (distances of
/// each modality normalized by that modality's total pairwise distance), then
/// adds the pair that most increases the joint objective until `k` pairs are
/// chosen. Refinement swaps one selected pair for one unselected pair while
/// that strictly improves the objective, for at most [`MAX_SWEEPS`] sweeps.
pub fn select_references_greedy(
    mod_a: &ModalityDataset,
    mod_b: &ModalityDataset,
    train_pairs: &[(usize, usize)],
    k: usize,
    lambda: f64,
) -> Result<ReferenceSet> {
    let problem = SelectionProblem::new(mod_a, mod_b, train_pairs, lambda)?;
    let t = problem.t();
    if k < 2 || k > t {
        return Err(Error::InvalidArgument(format!(
            "k must be in 2..={t}, got {k}"
        )));
    }
    if k == t {
        return problem.finish((0..t).collect());
    }

    let scale = |total: f64| if total > 0.0 { total } else { 1.0 };
    let (sa, sb) = (scale(problem.a.pair_total), scale(problem.b.pair_total));
    let mut seed = (0, 1);
    let mut seed_value = f64::NEG_INFINITY;
    for i in 0..t {
        for j in i + 1..t {
            let v = problem.a.d(i, j) / sa + problem.b.d(i, j) / sb;
            if v > seed_value {
                seed_value = v;
                seed = (i, j);
            }
        }
    }
    let mut selected = vec![seed.0, seed.1];
    let mut in_set = vec![false; t];
    in_set[seed.0] = true;
    in_set[seed.1] = true;

    while selected.len() < k {
        let mut best: Option<(f64, usize)> = None;
        for c in (0..t).filter(|&c| !in_set[c]) {
            selected.push(c);
            let value = problem.score(&selected);
            selected.pop();
            if best.is_none_or(|(b, _)| improves(value, b)) {
                best = Some((value, c));
            }
        }
        let (_, c) = best.expect("candidates remain while |selected| < t");
        selected.push(c);
        in_set[c] = true;
    }

    let mut current = problem.score(&selected);
    for _ in 0..MAX_SWEEPS {
        let mut best: Option<(f64, usize, usize)> = None;
        for slot in 0..selected.len() {
            let out = selected[slot];
            for c in (0..t).filter(|&c| !in_set[c]) {
                selected[slot] = c;
                let value = problem.score(&selected);
                selected[slot] = out;
                let incumbent = best.map_or(current, |b| b.0);
                if improves(value, incumbent) {
                    best = Some((value, slot, c));
                }
            }
        }
        let Some((value, slot, c)) = best else {
            break;
        };
        in_set[selected[slot]] = false;
        in_set[c] = true;
        selected[slot] = c;
        current = value;
    }
    problem.finish(selected)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{FeatureMatrix, SpaceKind};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dataset(rows: &[Vec<f64>]) -> ModalityDataset {
        let fm = FeatureMatrix::from_rows(rows).unwrap();
        ModalityDataset::with_row_ids(fm, vec!["l".into(); rows.len()], SpaceKind::Euclidean)
            .unwrap()
    }

    fn random_dataset(rng: &mut ChaCha8Rng, n: usize, d: usize) -> ModalityDataset {
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        dataset(&rows)
    }

    fn identity_pairs(n: usize) -> Vec<(usize, usize)> {
        (0..n).map(|i| (i, i)).collect()
    }

    #[test]
    fn coincident_candidates_score_zero() {
        let data = dataset(&[vec![1.0], vec![1.0], vec![4.0], vec![6.0]]);
        let s = objective(&data, &[0, 1], &[2, 3], 1.0).unwrap();
        assert_eq!(s.value, 0.0);
        assert!(!s.zero_variance);
    }

    #[test]
    fn one_dimensional_hand_case() {
        // refs {0, 10}, non-refs {4, 6}: ordered pair sum 20, variances 1 + 1.
        let data = dataset(&[vec![0.0], vec![10.0], vec![4.0], vec![6.0]]);
        let s = objective(&data, &[0, 1], &[2, 3], 1.0).unwrap();
        assert_eq!(s.value, 40.0);
    }

    #[test]
    fn zero_variance_is_flagged() {
        let data = dataset(&[vec![0.0], vec![10.0], vec![5.0], vec![5.0]]);
        let s = objective(&data, &[0, 1], &[2, 3], 1.0).unwrap();
        assert_eq!(s.value, 0.0);
        assert!(s.zero_variance);
    }

    #[test]
    fn objective_preconditions() {
        let data = dataset(&[vec![0.0], vec![1.0], vec![2.0], vec![3.0]]);
        assert!(objective(&data, &[0], &[2, 3], 1.0).is_err());
        assert!(objective(&data, &[0, 1], &[1, 3], 1.0).is_err());
        assert!(objective(&data, &[0, 1], &[2, 3], 0.0).is_err());
        assert!(objective(&data, &[0, 0], &[2, 3], 1.0).is_err());
    }

    #[test]
    fn argmax_is_scale_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let data = random_dataset(&mut rng, 6, 2);
        let scaled_rows: Vec<Vec<f64>> = data
            .features()
            .rows()
            .map(|r| r.iter().map(|v| 3.0 * v).collect())
            .collect();
        let scaled = dataset(&scaled_rows);
        let argmax = |d: &ModalityDataset| {
            let mut best = (f64::NEG_INFINITY, vec![]);
            for refs in (0..6).combinations(3) {
                let rest: Vec<usize> = (0..6).filter(|i| !refs.contains(i)).collect();
                let v = objective(d, &refs, &rest, 1.0).unwrap().value;
                if v > best.0 {
                    best = (v, refs);
                }
            }
            best
        };
        let (v1, s1) = argmax(&data);
        let (v3, s3) = argmax(&scaled);
        assert_eq!(s1, s3);
        assert!((v3 / v1 - 27.0).abs() < 1e-9);
    }

    #[test]
    fn full_selection_when_k_equals_pool() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = random_dataset(&mut rng, 5, 3);
        let b = random_dataset(&mut rng, 5, 2);
        let pairs = identity_pairs(5);
        let brute = select_references_bruteforce(&a, &b, &pairs, 5, 1.0).unwrap();
        let greedy = select_references_greedy(&a, &b, &pairs, 5, 1.0).unwrap();
        assert_eq!(brute.pairs(), pairs.as_slice());
        assert_eq!(greedy, brute);
    }

    #[test]
    fn bruteforce_guard_and_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_dataset(&mut rng, 21, 2);
        let b = random_dataset(&mut rng, 21, 2);
        assert!(matches!(
            select_references_bruteforce(&a, &b, &identity_pairs(21), 3, 1.0),
            Err(Error::TooLarge { .. })
        ));
        assert!(select_references_greedy(&a, &b, &identity_pairs(6), 1, 1.0).is_err());
        assert!(select_references_greedy(&a, &b, &identity_pairs(6), 7, 1.0).is_err());
    }

    #[test]
    fn ties_prefer_smallest_positions() {
        // Every 2-subset of four identical points scores the same.
        let rows = vec![
            vec![0.0, 0.0],
            vec![1.0, 0.0],
            vec![1.0, 0.0],
            vec![1.0, 0.0],
            vec![0.0, 0.0],
        ];
        let a = dataset(&rows);
        let b = dataset(&rows);
        let pairs = vec![(1, 1), (2, 2), (3, 3), (0, 0), (4, 4)];
        let brute = select_references_bruteforce(&a, &b, &pairs, 2, 1.0).unwrap();
        assert_eq!(brute.pairs(), &[(1, 1), (0, 0)]);
        let r = select_references_bruteforce(&a, &b, &pairs[..3], 2, 1.0).unwrap();
        assert_eq!(r.pairs(), &[(1, 1), (2, 2)]);
    }

    #[test]
    fn greedy_beats_median_random_subset() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random_dataset(&mut rng, 6, 4);
        let b = random_dataset(&mut rng, 6, 3);
        let pairs = identity_pairs(6);
        let greedy = select_references_greedy(&a, &b, &pairs, 3, 1.0).unwrap();
        let mut samples: Vec<f64> = (0..100)
            .map(|_| {
                let subset = rand::seq::index::sample(&mut rng, 6, 3).into_vec();
                combined_objective(&a, &b, &pairs, &subset, 1.0).unwrap()
            })
            .collect();
        samples.sort_by(f64::total_cmp);
        assert!(greedy.objective_value() >= samples[50]);
    }

    #[test]
    fn planted_far_pairs_are_found() {
        // Three well-separated points plus exact duplicates of them: any
        // optimum takes one member of each duplicate group, and ties resolve
        // to the originals, which come first.
        let far = [vec![0.0, 0.0], vec![9.0, 1.0], vec![2.0, 7.0]];
        let rows_a: Vec<Vec<f64>> = far.iter().chain(far.iter()).cloned().collect();
        let rows_b: Vec<Vec<f64>> = rows_a
            .iter()
            .map(|r| vec![2.0 * r[1], -r[0], 1.0])
            .collect();
        let (a, b) = (dataset(&rows_a), dataset(&rows_b));
        let pairs = identity_pairs(6);
        let brute = select_references_bruteforce(&a, &b, &pairs, 3, 1.0).unwrap();
        let greedy = select_references_greedy(&a, &b, &pairs, 3, 1.0).unwrap();
        assert_eq!(brute.pairs(), &[(0, 0), (1, 1), (2, 2)]);
        assert_eq!(greedy.pairs(), brute.pairs());
    }

    #[test]
    fn reference_set_text_round_trip() {
        let r = ReferenceSet::new(vec![(3, 4), (0, 7)], 0.5, 1.25).unwrap();
        let back = parse_reference_set(&r.to_text(), "r").unwrap();
        assert_eq!(back, r);
        assert!(ReferenceSet::new(vec![(1, 1), (1, 1)], 1.0, 0.0).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn instance() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<Vec<f64>>)> {
            (4usize..8).prop_flat_map(|n| {
                (
                    proptest::collection::vec(proptest::collection::vec(-5.0f64..5.0, 2), n),
                    proptest::collection::vec(proptest::collection::vec(-5.0f64..5.0, 3), n),
                )
            })
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn greedy_never_beats_bruteforce((ra, rb) in instance(), k in 2usize..4) {
                let (a, b) = (dataset(&ra), dataset(&rb));
                let pairs = identity_pairs(ra.len());
                let brute = select_references_bruteforce(&a, &b, &pairs, k, 1.0).unwrap();
                let greedy = select_references_greedy(&a, &b, &pairs, k, 1.0).unwrap();
                prop_assert!(greedy.objective_value() <= brute.objective_value() * (1.0 + 1e-12) + 1e-300);
                prop_assert_eq!(&greedy, &select_references_greedy(&a, &b, &pairs, k, 1.0).unwrap());
            }

            #[test]
            fn objective_is_permutation_symmetric_and_nonnegative((ra, _) in instance(), lambda in 0.1f64..3.0) {
                let data = dataset(&ra);
                let n = ra.len();
                let refs: Vec<usize> = (0..n / 2).collect();
                let rest: Vec<usize> = (n / 2..n).collect();
                let mut rev = refs.clone();
                rev.reverse();
                let s1 = objective(&data, &refs, &rest, lambda).unwrap().value;
                let s2 = objective(&data, &rev, &rest, lambda).unwrap().value;
                prop_assert!(s1 >= 0.0);
                prop_assert!((s1 - s2).abs() <= 1e-12 * s1.abs().max(1.0));
            }
        }
    }
}
