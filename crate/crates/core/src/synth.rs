//! Synthetic paired corpora with a known shared latent structure.
//!
//! Both modalities are generated from one latent matrix `Z ~ N(0,1)^{n x l}`:
//! modality A is the linear image `Z A`, modality B the sigmoid image
//! `sigmoid(Z B)`. Class labels come from k-means clustering of `Z`, and
//! object `i` of A is matched to object `i` of B.

use std::path::Path;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::correlate::sigmoid;
use crate::data::{
    write_pairs, write_text, FeatureMatrix, ModalityDataset, PairedCorpus, SpaceKind,
};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub n: usize,
    pub latent_dim: usize,
    pub dim_a: usize,
    pub dim_b: usize,
    pub classes: usize,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            n: 300,
            latent_dim: 10,
            dim_a: 64,
            dim_b: 32,
            classes: 10,
            seed: 0,
        }
    }
}

fn normal_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Lloyd's algorithm with k-means++ seeding. Returns a cluster id per row.
pub fn kmeans(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng, max_iter: usize) -> Vec<usize> {
    let n = points.len();
    let mut centers: Vec<Vec<f64>> = vec![points[rng.random_range(0..n)].clone()];
    while centers.len() < k {
        let weights: Vec<f64> = points
            .iter()
            .map(|p| {
                centers
                    .iter()
                    .map(|c| sq_dist(p, c))
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        let total: f64 = weights.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random_range(0.0..total);
            weights
                .iter()
                .position(|&w| {
                    target -= w;
                    target < 0.0
                })
                .unwrap_or(n - 1)
        } else {
            rng.random_range(0..n)
        };
        centers.push(points[next].clone());
    }

    let mut assign = vec![usize::MAX; n];
    for _ in 0..max_iter {
        let mut changed = false;
        for (i, p) in points.iter().enumerate() {
            let best = (0..k)
                .min_by(|&a, &b| sq_dist(p, &centers[a]).total_cmp(&sq_dist(p, &centers[b])))
                .expect("k >= 1");
            if assign[i] != best {
                assign[i] = best;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let dim = points[0].len();
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &c) in points.iter().zip(&assign) {
            counts[c] += 1;
            sums[c].iter_mut().zip(p).for_each(|(s, v)| *s += v);
        }
        for c in 0..k {
            if counts[c] > 0 {
                centers[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
    }
    assign
}

pub fn synthetic_corpus(cfg: &SyntheticConfig) -> Result<PairedCorpus> {
    if cfg.n < 2 || cfg.latent_dim == 0 || cfg.dim_a == 0 || cfg.dim_b == 0 {
        return Err(Error::InvalidArgument(format!(
            "invalid synthetic corpus shape {cfg:?}"
        )));
    }
    if cfg.classes == 0 || cfg.classes > cfg.n {
        return Err(Error::InvalidArgument(format!(
            "classes must be in 1..={}, got {}",
            cfg.n, cfg.classes
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let z = normal_matrix(&mut rng, cfg.n, cfg.latent_dim);
    let proj_a = normal_matrix(&mut rng, cfg.latent_dim, cfg.dim_a);
    let proj_b = normal_matrix(&mut rng, cfg.latent_dim, cfg.dim_b);
    let x = &z * proj_a;
    let y = (&z * proj_b).map(sigmoid);

    let latent: Vec<Vec<f64>> = z.row_iter().map(|r| r.iter().copied().collect()).collect();
    let labels: Vec<String> = kmeans(&latent, cfg.classes, &mut rng, 100)
        .into_iter()
        .map(|c| format!("c{c}"))
        .collect();

    let mod_a = ModalityDataset::with_row_ids(
        FeatureMatrix::from_dmatrix(&x)?,
        labels.clone(),
        SpaceKind::Euclidean,
    )?;
    let mod_b = ModalityDataset::with_row_ids(
        FeatureMatrix::from_dmatrix(&y)?,
        labels,
        SpaceKind::Euclidean,
    )?;
    PairedCorpus::new(mod_a, mod_b, (0..cfg.n).map(|i| (i, i)).collect())
}

/// Writes `features_a.csv`, `features_b.csv`, `labels_a.txt`, `labels_b.txt`
/// and `pairs.csv` into `dir`.
pub fn write_corpus(corpus: &PairedCorpus, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    corpus
        .mod_a()
        .features()
        .write_csv(dir.join("features_a.csv"))?;
    corpus
        .mod_b()
        .features()
        .write_csv(dir.join("features_b.csv"))?;
    let labels = |m: &ModalityDataset| {
        m.labels()
            .iter()
            .map(|l| format!("{l}\n"))
            .collect::<String>()
    };
    write_text(&dir.join("labels_a.txt"), &labels(corpus.mod_a()))?;
    write_text(&dir.join("labels_b.txt"), &labels(corpus.mod_b()))?;
    write_pairs(dir.join("pairs.csv"), corpus.pairs())
}
