//! Library results checked against independently coded reference computations.

use std::collections::HashMap;

use approx::assert_relative_eq;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use spacematch::correlate::{empirical_pearson, gram_pearson, inner_product_similarity};
use spacematch::data::{FeatureMatrix, ModalityDataset, SpaceKind};
use spacematch::structure::build_structure;
use spacematch::text::{
    embed_sentences, first_singular_direction, remove_first_principal_component, FrequencyTable,
    SifConfig, WordVectorTable,
};

fn gaussian(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Vec<Vec<f64>> {
    (0..rows)
        .map(|_| (0..cols).map(|_| StandardNormal.sample(rng)).collect())
        .collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Dominant eigenvector of `A^T A` by power iteration, sign-normalized.
fn power_iteration_direction(rows: &[Vec<f64>]) -> Vec<f64> {
    let d = rows[0].len();
    let mut v: Vec<f64> = (0..d).map(|i| 1.0 + i as f64 * 0.1).collect();
    for _ in 0..5000 {
        let mut next = vec![0.0; d];
        for r in rows {
            let s = dot(r, &v);
            next.iter_mut().zip(r).for_each(|(n, x)| *n += s * x);
        }
        let norm = dot(&next, &next).sqrt();
        v = next.into_iter().map(|x| x / norm).collect();
    }
    if v.iter().find(|&&x| x != 0.0).is_some_and(|&x| x < 0.0) {
        v.iter_mut().for_each(|x| *x = -*x);
    }
    v
}

#[test]
fn singular_direction_matches_power_iteration() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..10 {
        let mut rows = gaussian(&mut rng, 12, 5);
        // A dominant shared component keeps the spectral gap comfortable.
        let shift: Vec<f64> = (0..5).map(|_| rng.random_range(2.0..4.0)).collect();
        rows.iter_mut()
            .for_each(|r| r.iter_mut().zip(&shift).for_each(|(x, s)| *x += s));
        let m = FeatureMatrix::from_rows(&rows).unwrap();
        let u = first_singular_direction(&m).unwrap();
        let oracle = power_iteration_direction(&rows);
        for (a, b) in u.iter().zip(&oracle) {
            assert_relative_eq!(*a, *b, epsilon = 1e-8);
        }
        let cleaned = remove_first_principal_component(&m).unwrap();
        for row in cleaned.rows() {
            let norm = dot(row, row).sqrt();
            assert!(dot(row, &oracle).abs() <= 1e-8 * norm.max(1.0));
        }
    }
}

fn word_table(rng: &mut ChaCha8Rng, words: &[&str], dim: usize) -> WordVectorTable {
    WordVectorTable::from_entries(words.iter().map(|w| (*w, gaussian(rng, 1, dim).remove(0))))
        .unwrap()
}

#[test]
fn sif_rows_follow_weighted_average_then_projection() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let words = ["alpha", "beta", "gamma", "delta", "eps"];
    let table = word_table(&mut rng, &words, 4);
    let probs: HashMap<String, f64> = words
        .iter()
        .enumerate()
        .map(|(i, w)| (w.to_string(), 0.01 * (i + 1) as f64))
        .collect();
    let freqs = FrequencyTable::new(probs.clone(), 0.005).unwrap();
    let sentences = vec![
        vec!["alpha", "beta", "unknown"],
        vec!["gamma"],
        vec!["delta", "eps", "alpha"],
        vec!["beta", "gamma", "delta"],
    ];
    let a = 1e-3;
    let expected: Vec<Vec<f64>> = sentences
        .iter()
        .map(|s| {
            let known: Vec<&&str> = s.iter().filter(|w| table.get(w).is_some()).collect();
            let mut row = vec![0.0; 4];
            for w in &known {
                let weight = a / (a + probs[**w]);
                row.iter_mut()
                    .zip(table.get(w).unwrap())
                    .for_each(|(r, v)| *r += weight * v);
            }
            row.into_iter().map(|x| x / known.len() as f64).collect()
        })
        .collect();

    let raw = embed_sentences(
        &sentences,
        &table,
        &freqs,
        &SifConfig::new(a, false).unwrap(),
    )
    .unwrap();
    for (got, want) in raw.matrix.rows().zip(&expected) {
        for (g, w) in got.iter().zip(want) {
            assert_relative_eq!(*g, *w, max_relative = 1e-12);
        }
    }

    let u = power_iteration_direction(&expected);
    let cleaned = embed_sentences(&sentences, &table, &freqs, &SifConfig::default()).unwrap();
    for (got, want) in cleaned.matrix.rows().zip(&expected) {
        let proj = dot(want, &u);
        for (g, (w, ui)) in got.iter().zip(want.iter().zip(&u)) {
            assert_relative_eq!(*g, w - proj * ui, epsilon = 1e-8);
        }
    }
}

#[test]
fn sif_is_permutation_equivariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let words = ["a", "b", "c", "d"];
    let table = word_table(&mut rng, &words, 3);
    let freqs = FrequencyTable::new(
        HashMap::from([("a".to_string(), 0.2), ("b".to_string(), 0.01)]),
        0.001,
    )
    .unwrap();
    let sentences = vec![
        vec!["a", "b"],
        vec!["c"],
        vec!["d", "a"],
        vec!["b", "c", "d"],
    ];
    let order = [2, 0, 3, 1];
    let permuted: Vec<Vec<&str>> = order.iter().map(|&i| sentences[i].clone()).collect();
    let cfg = SifConfig::default();
    let base = embed_sentences(&sentences, &table, &freqs, &cfg)
        .unwrap()
        .matrix;
    let moved = embed_sentences(&permuted, &table, &freqs, &cfg)
        .unwrap()
        .matrix;
    for (pos, &i) in order.iter().enumerate() {
        for (x, y) in moved.row(pos).iter().zip(base.row(i)) {
            assert_relative_eq!(*x, *y, epsilon = 1e-12);
        }
    }
}

#[test]
fn gram_route_equals_direct_pearson() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for (n, d, e) in [(5, 2, 3), (30, 4, 4), (80, 10, 6)] {
        let x: DMatrix<f64> = DMatrix::from_fn(n, d, |_, _| StandardNormal.sample(&mut rng));
        let m: DMatrix<f64> = DMatrix::from_fn(d, e, |_, _| StandardNormal.sample(&mut rng));
        let y = (&x * m).map(|v: f64| 1.0 / (1.0 + (-v).exp()));
        let sx = inner_product_similarity(&FeatureMatrix::from_dmatrix(&x).unwrap()).unwrap();
        let sy = inner_product_similarity(&FeatureMatrix::from_dmatrix(&y).unwrap()).unwrap();
        let direct = empirical_pearson(&sx, &sy).unwrap();
        let gram = gram_pearson(&x, &y).unwrap();
        assert_relative_eq!(direct, gram, epsilon = 1e-10);
    }
}

#[test]
fn hamming_structure_counts_differing_bits() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let bits: Vec<Vec<f64>> = (0..40)
        .map(|_| {
            (0..16)
                .map(|_| if rng.random_bool(0.5) { 1.0 } else { 0.0 })
                .collect()
        })
        .collect();
    let words: Vec<u32> = bits
        .iter()
        .map(|r| {
            r.iter()
                .enumerate()
                .fold(0u32, |acc, (i, &b)| acc | ((b as u32) << i))
        })
        .collect();
    let data = ModalityDataset::with_row_ids(
        FeatureMatrix::from_rows(&bits).unwrap(),
        vec![String::new(); 40],
        SpaceKind::Hamming,
    )
    .unwrap();
    let refs = [3, 17, 29, 8];
    let s = build_structure(&data, &refs).unwrap();
    for i in 0..40 {
        for (j, &r) in refs.iter().enumerate() {
            assert_eq!(s.get(i, j), (words[i] ^ words[r]).count_ones() as f64);
        }
    }
}

#[test]
fn spanning_references_separate_distinct_points() {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let rows = gaussian(&mut rng, 60, 3);
    let data = ModalityDataset::with_row_ids(
        FeatureMatrix::from_rows(&rows).unwrap(),
        vec![String::new(); 60],
        SpaceKind::Euclidean,
    )
    .unwrap();
    let s = build_structure(&data, &[0, 1, 2, 3]).unwrap();
    for i in 0..60 {
        for j in i + 1..60 {
            let gap: f64 = s
                .row(i)
                .iter()
                .zip(s.row(j))
                .map(|(a, b)| (a - b).abs())
                .sum();
            assert!(gap > 1e-9, "rows {i} and {j} collide");
        }
    }
}

#[test]
fn median_map_grows_with_matched_pairs() {
    use spacematch::evaluate::{run_on_corpus, CorpusSource, ExperimentConfig, QueryDirection};
    use spacematch::synth::{synthetic_corpus, SyntheticConfig};

    let synth = SyntheticConfig::default();
    let corpus = synthetic_corpus(&synth).unwrap();
    let mut cfg = ExperimentConfig::new(CorpusSource::Synthetic(synth));
    cfg.train_sizes = vec![6, 50];
    let report = run_on_corpus(&corpus, &cfg).unwrap();
    let median = |t: usize| {
        let mut maps: Vec<f64> = report
            .rows
            .iter()
            .filter(|r| r.train_size == t && r.direction == QueryDirection::Average)
            .map(|r| r.map.unwrap())
            .collect();
        maps.sort_by(f64::total_cmp);
        0.5 * (maps[maps.len() / 2 - 1] + maps[maps.len() / 2])
    };
    assert!(median(50) >= median(6), "{} < {}", median(50), median(6));
}
