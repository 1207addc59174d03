//! Correlation between inner-product similarity matrices of two related
//! modalities.
//!
//! If `Y = X M` with i.i.d. standard normal `X`, the off-diagonal similarities
//! `x_i . x_j` and `y_i . y_j` have Pearson correlation
//!
//! ```text
//! rho = tr(M M^T) / sqrt(d * ||M M^T||_F^2)
//! ```
//!
//! which is strictly positive for any nonzero `M`. This module evaluates that
//! value in eigen-decomposed and trace/Frobenius form and estimates it by
//! simulation, for linear and sigmoid relations.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::data::FeatureMatrix;
use crate::error::{Error, Result};

/// Symmetric `n x n` matrix of pairwise inner products.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    n: usize,
    values: Vec<f64>,
}

impl SimilarityMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    /// Entries strictly above the diagonal, row by row.
    pub fn upper_triangle(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).flat_map(move |i| (i + 1..self.n).map(move |j| self.get(i, j)))
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        (0..self.n).all(|i| (0..i).all(|j| (self.get(i, j) - self.get(j, i)).abs() <= tol))
    }
}

pub fn inner_product_similarity(features: &FeatureMatrix) -> Result<SimilarityMatrix> {
    let n = features.nrows();
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "similarity needs at least two objects, got {n}"
        )));
    }
    let mut values = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let s: f64 = features
                .row(i)
                .iter()
                .zip(features.row(j))
                .map(|(a, b)| a * b)
                .sum();
            values[i * n + j] = s;
            values[j * n + i] = s;
        }
    }
    Ok(SimilarityMatrix { n, values })
}

/// Sample Pearson correlation of two equally long samples.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::DimensionMismatch {
            expected: xs.len(),
            found: ys.len(),
        });
    }
    if xs.len() < 2 {
        return Err(Error::DegenerateInput(
            "Pearson needs at least two samples".into(),
        ));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::DegenerateInput("a sample has zero variance".into()));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Pearson correlation over the off-diagonal pairs `i < j`.
pub fn empirical_pearson(sx: &SimilarityMatrix, sy: &SimilarityMatrix) -> Result<f64> {
    if sx.n != sy.n {
        return Err(Error::DimensionMismatch {
            expected: sx.n,
            found: sy.n,
        });
    }
    let xs: Vec<f64> = sx.upper_triangle().collect();
    let ys: Vec<f64> = sy.upper_triangle().collect();
    pearson(&xs, &ys)
}

/// Same quantity as [`empirical_pearson`] on the inner-product similarities of
/// `x` and `y`, computed from Gram-matrix identities in `O(n d e)` without
/// forming the `n x n` similarity matrices:
///
/// ```text
/// sum_{i<j} s_ij        = (||sum_i x_i||^2 - sum_i ||x_i||^2) / 2
/// sum_{i<j} s_ij^2      = (||X^T X||_F^2 - sum_i ||x_i||^4) / 2
/// sum_{i<j} s_ij t_ij   = (||X^T Y||_F^2 - sum_i ||x_i||^2 ||y_i||^2) / 2
/// ```
pub fn gram_pearson(x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<f64> {
    let n = x.nrows();
    if y.nrows() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: y.nrows(),
        });
    }
    if n < 3 {
        return Err(Error::DegenerateInput("need at least three objects".into()));
    }
    let half = |a: f64, b: f64| 0.5 * (a - b);
    let row_sq =
        |m: &DMatrix<f64>| -> Vec<f64> { m.row_iter().map(|r| r.norm_squared()).collect() };
    let (nx, ny) = (row_sq(x), row_sq(y));

    let colsum = |m: &DMatrix<f64>| m.row_sum().norm_squared();
    let sum_x = half(colsum(x), nx.iter().sum());
    let sum_y = half(colsum(y), ny.iter().sum());
    let sum_xx = half(
        (x.transpose() * x).norm_squared(),
        nx.iter().map(|v| v * v).sum(),
    );
    let sum_yy = half(
        (y.transpose() * y).norm_squared(),
        ny.iter().map(|v| v * v).sum(),
    );
    let sum_xy = half(
        (x.transpose() * y).norm_squared(),
        nx.iter().zip(&ny).map(|(a, b)| a * b).sum(),
    );

    let count = (n * (n - 1) / 2) as f64;
    let cov = count * sum_xy - sum_x * sum_y;
    let var_x = count * sum_xx - sum_x * sum_x;
    let var_y = count * sum_yy - sum_y * sum_y;
    if !(var_x > 0.0 && var_y > 0.0) {
        return Err(Error::DegenerateInput(
            "a similarity sample has zero variance".into(),
        ));
    }
    Ok((cov / (var_x.sqrt() * var_y.sqrt())).clamp(-1.0, 1.0))
}

fn check_projection(m: &DMatrix<f64>) -> Result<()> {
    if m.nrows() == 0 || m.ncols() == 0 || m.iter().all(|&v| v == 0.0) {
        return Err(Error::DegenerateInput("projection matrix is zero".into()));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(
            "projection matrix has non-finite entries".into(),
        ));
    }
    Ok(())
}

/// `M M^T` divided by its largest entry. Both rho forms are invariant to
/// this scaling, and it makes `M = cI` evaluate to exactly 1.
fn normalized_gram(m: &DMatrix<f64>) -> DMatrix<f64> {
    let gram = m * m.transpose();
    let scale = gram.amax();
    gram / scale
}

/// Correlation predicted for `Y = X M`, from the eigendecomposition
/// `M M^T = P diag(lambda) P^T`:
///
/// ```text
/// rho = sum_g lambda_g sum_f p_gf^2 / sqrt(d * sum_{u,v} (sum_g lambda_g p_gu p_gv)^2)
/// ```
///
/// The result is checked against [`analytic_rho_closed_form`].
pub fn analytic_rho(m: &DMatrix<f64>) -> Result<f64> {
    check_projection(m)?;
    let d = m.nrows();
    let eig = SymmetricEigen::new(normalized_gram(m));
    let p = &eig.eigenvectors;
    let lambda = &eig.eigenvalues;

    let numerator: f64 = (0..d)
        .map(|g| lambda[g] * p.column(g).iter().map(|v| v * v).sum::<f64>())
        .sum();
    let mut denominator = 0.0;
    for u in 0..d {
        for v in 0..d {
            let entry: f64 = (0..d).map(|g| lambda[g] * p[(u, g)] * p[(v, g)]).sum();
            denominator += entry * entry;
        }
    }
    let rho = numerator / (d as f64 * denominator).sqrt();

    let closed = analytic_rho_closed_form(m)?;
    if (rho - closed).abs() > 1e-9 {
        return Err(Error::DegenerateInput(format!(
            "eigen form {rho} and trace form {closed} disagree"
        )));
    }
    Ok(rho)
}

/// `tr(M M^T) / sqrt(d * ||M M^T||_F^2)`.
pub fn analytic_rho_closed_form(m: &DMatrix<f64>) -> Result<f64> {
    check_projection(m)?;
    let gram = normalized_gram(m);
    Ok(gram.trace() / (m.nrows() as f64 * gram.norm_squared()).sqrt())
}

/// Relation between the two simulated modalities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mapping {
    /// `Y = X M`
    Linear,
    /// `Y = sigmoid(X M + B)` with one bias value per column.
    Sigmoid,
}

impl fmt::Display for Mapping {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mapping::Linear => "linear",
            Mapping::Sigmoid => "sigmoid",
        })
    }
}

impl FromStr for Mapping {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "linear" => Ok(Mapping::Linear),
            "sigmoid" => Ok(Mapping::Sigmoid),
            other => Err(Error::InvalidArgument(format!(
                "unknown mapping '{other}' (expected linear or sigmoid)"
            ))),
        }
    }
}

pub fn sigmoid(t: f64) -> f64 {
    1.0 / (1.0 + (-t).exp())
}

#[derive(Debug, Clone)]
pub struct MonteCarloConfig {
    pub n: usize,
    pub d: usize,
    pub e: usize,
    pub trials: usize,
    pub mapping: Mapping,
    pub seed: u64,
    /// Fixed `d x e` projection; a fresh standard-normal one per trial if `None`.
    pub projection: Option<DMatrix<f64>>,
}

impl MonteCarloConfig {
    pub fn new(n: usize, d: usize, e: usize, trials: usize, mapping: Mapping, seed: u64) -> Self {
        Self {
            n,
            d,
            e,
            trials,
            mapping,
            seed,
            projection: None,
        }
    }

    pub fn with_projection(mut self, projection: DMatrix<f64>) -> Self {
        self.d = projection.nrows();
        self.e = projection.ncols();
        self.projection = Some(projection);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 10 {
            return Err(Error::InvalidArgument(format!(
                "n must be >= 10, got {}",
                self.n
            )));
        }
        if self.trials == 0 {
            return Err(Error::InvalidArgument("trials must be >= 1".into()));
        }
        if self.d == 0 || self.e == 0 {
            return Err(Error::InvalidArgument("d and e must be >= 1".into()));
        }
        if let Some(m) = &self.projection {
            check_projection(m)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationReport {
    pub trials: usize,
    pub mapping: Mapping,
    pub empirical_rho_per_trial: Vec<f64>,
    /// Predicted correlation of each trial's projection (linear mapping only).
    pub analytic_rho_per_trial: Vec<f64>,
    /// Mean predicted correlation over trials (linear mapping only).
    pub analytic_rho: Option<f64>,
    pub fraction_positive: f64,
}

impl CorrelationReport {
    pub fn mean_empirical_rho(&self) -> f64 {
        self.empirical_rho_per_trial.iter().sum::<f64>() / self.trials as f64
    }

    /// `trial,empirical_rho` rows, then `fraction_positive` and (linear only)
    /// `analytic_rho` summary rows in the same two-column layout.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("trial,empirical_rho\n");
        for (t, rho) in self.empirical_rho_per_trial.iter().enumerate() {
            out.push_str(&format!("{t},{rho}\n"));
        }
        out.push_str(&format!("fraction_positive,{}\n", self.fraction_positive));
        if let Some(a) = self.analytic_rho {
            out.push_str(&format!("analytic_rho,{a}\n"));
        }
        out
    }

    pub fn summary_line(&self) -> String {
        match self.analytic_rho {
            Some(a) => format!(
                "fraction_positive={:.6}, analytic_rho={:.6}",
                self.fraction_positive, a
            ),
            None => format!("fraction_positive={:.6}", self.fraction_positive),
        }
    }
}

fn normal_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

/// Per trial: draws `X ~ N(0,1)^{n x d}` and a projection, forms `Y`, and
/// records the off-diagonal similarity correlation. Trial `t` uses seed
/// `seed + t`, so trials are independent of scheduling.
pub fn monte_carlo_verify(cfg: &MonteCarloConfig) -> Result<CorrelationReport> {
    cfg.validate()?;
    let results: Vec<(f64, Option<f64>)> = (0..cfg.trials)
        .into_par_iter()
        .map(|trial| -> Result<(f64, Option<f64>)> {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(trial as u64));
            let x = normal_matrix(&mut rng, cfg.n, cfg.d);
            let m = match &cfg.projection {
                Some(m) => m.clone(),
                None => normal_matrix(&mut rng, cfg.d, cfg.e),
            };
            let mut y = &x * &m;
            let analytic = match cfg.mapping {
                Mapping::Linear => Some(analytic_rho(&m)?),
                Mapping::Sigmoid => {
                    let bias = normal_matrix(&mut rng, 1, cfg.e);
                    for mut row in y.row_iter_mut() {
                        row += &bias;
                        row.apply(|v| *v = sigmoid(*v));
                    }
                    None
                }
            };
            let rho = gram_pearson(&x, &y).map_err(|e| e.context(format!("trial {trial}")))?;
            Ok((rho, analytic))
        })
        .collect::<Result<_>>()?;

    let empirical: Vec<f64> = results.iter().map(|r| r.0).collect();
    let analytic: Vec<f64> = results.iter().filter_map(|r| r.1).collect();
    let positive = empirical.iter().filter(|&&r| r > 0.0).count();
    Ok(CorrelationReport {
        trials: cfg.trials,
        mapping: cfg.mapping,
        fraction_positive: positive as f64 / cfg.trials as f64,
        analytic_rho: (!analytic.is_empty())
            .then(|| analytic.iter().sum::<f64>() / analytic.len() as f64),
        analytic_rho_per_trial: analytic,
        empirical_rho_per_trial: empirical,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::FeatureMatrix;

    #[test]
    fn identity_rows() {
        let s =
            inner_product_similarity(&FeatureMatrix::from_rows(&[[1.0, 0.0], [0.0, 1.0]]).unwrap())
                .unwrap();
        assert_eq!(s.values, vec![1.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn diagonal_holds_squared_norms() {
        let f = FeatureMatrix::from_rows(&[[1.0, 2.0], [-3.0, 0.5], [0.0, 4.0]]).unwrap();
        let s = inner_product_similarity(&f).unwrap();
        assert!(s.is_symmetric(1e-12));
        assert_eq!(s.get(1, 1), 9.25);
        let rep = FeatureMatrix::from_rows(&[[1.0, 2.0], [1.0, 2.0]]).unwrap();
        assert!(inner_product_similarity(&rep)
            .unwrap()
            .values
            .iter()
            .all(|&v| v == 5.0));
        assert!(inner_product_similarity(&FeatureMatrix::from_rows(&[[1.0]]).unwrap()).is_err());
    }

    fn sample_similarity() -> SimilarityMatrix {
        let f =
            FeatureMatrix::from_rows(&[[1.0, 2.0], [-3.0, 0.5], [0.0, 4.0], [2.0, -1.0]]).unwrap();
        inner_product_similarity(&f).unwrap()
    }

    #[test]
    fn pearson_affine_cases() {
        let sx = sample_similarity();
        let map = |f: &dyn Fn(f64) -> f64| SimilarityMatrix {
            n: sx.n,
            values: sx.values.iter().map(|&v| f(v)).collect(),
        };
        assert!((empirical_pearson(&sx, &sx).unwrap() - 1.0).abs() < 1e-15);
        assert!((empirical_pearson(&sx, &map(&|v| -v)).unwrap() + 1.0).abs() < 1e-15);
        assert!((empirical_pearson(&sx, &map(&|v| 3.0 * v + 7.0)).unwrap() - 1.0).abs() < 1e-12);
        assert!(matches!(
            empirical_pearson(&sx, &map(&|_| 1.0)),
            Err(Error::DegenerateInput(_))
        ));
    }

    #[test]
    fn identity_projection_is_perfect() {
        for d in [1, 3, 7] {
            let eye = DMatrix::<f64>::identity(d, d);
            assert_eq!(analytic_rho(&eye).unwrap(), 1.0);
            assert!((analytic_rho(&(eye * -2.5)).unwrap() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_projection_is_degenerate() {
        assert!(matches!(
            analytic_rho(&DMatrix::zeros(2, 3)),
            Err(Error::DegenerateInput(_))
        ));
    }

    #[test]
    fn rank_one_projection() {
        // M M^T = diag(1, 0): tr = 1, ||.||_F = 1, d = 2
        let m = DMatrix::from_row_slice(2, 1, &[1.0, 0.0]);
        assert!((analytic_rho(&m).unwrap() - 1.0 / 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn config_validation() {
        assert!(
            monte_carlo_verify(&MonteCarloConfig::new(5, 2, 2, 1, Mapping::Linear, 0)).is_err()
        );
        assert!(
            monte_carlo_verify(&MonteCarloConfig::new(50, 2, 2, 0, Mapping::Linear, 0)).is_err()
        );
    }

    #[test]
    fn sigmoid_report_has_no_analytic_value() {
        let r =
            monte_carlo_verify(&MonteCarloConfig::new(40, 3, 3, 3, Mapping::Sigmoid, 9)).unwrap();
        assert!(r.analytic_rho.is_none());
        assert!(!r.summary_line().contains("analytic_rho"));
        assert!(r.to_csv().starts_with("trial,empirical_rho\n0,"));
    }
}
