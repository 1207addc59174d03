//! Per-dimension affine calibration between two structure spaces, and
//! ranking of calibrated rows against a target set.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;

use crate::data::{read_text, write_text};
use crate::error::{Error, Result};
use crate::structure::{structure_distance, StructureMatrix, StructureMetric, StructureSpace};

pub const DEFAULT_GAMMA: f64 = 1e-6;

/// Distance assigned to a pair whose cosine distance is undefined.
pub const ZERO_VECTOR_DISTANCE: f64 = 2.0;

/// Which structure space is mapped onto the other.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    /// Modality A is calibrated into B's structure space.
    AtoB,
    /// Modality B is calibrated into A's structure space.
    BtoA,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::AtoB => "a_to_b",
            Direction::BtoA => "b_to_a",
        })
    }
}

impl FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "a_to_b" | "atob" => Ok(Direction::AtoB),
            "b_to_a" | "btoa" => Ok(Direction::BtoA),
            other => Err(Error::InvalidArgument(format!(
                "unknown direction '{other}' (expected a_to_b or b_to_a)"
            ))),
        }
    }
}

/// `scale_j * x + bias_j` applied column by column.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationModel {
    scale: Vec<f64>,
    bias: Vec<f64>,
    gamma: f64,
    direction: Direction,
    degenerate_dims: Vec<usize>,
}

impl CalibrationModel {
    pub fn new(scale: Vec<f64>, bias: Vec<f64>, gamma: f64, direction: Direction) -> Result<Self> {
        if scale.is_empty() {
            return Err(Error::InvalidArgument(
                "calibration needs at least one dimension".into(),
            ));
        }
        if scale.len() != bias.len() {
            return Err(Error::DimensionMismatch {
                expected: scale.len(),
                found: bias.len(),
            });
        }
        if scale.iter().chain(&bias).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(
                "calibration parameters must be finite".into(),
            ));
        }
        check_gamma(gamma)?;
        Ok(Self {
            scale,
            bias,
            gamma,
            direction,
            degenerate_dims: Vec::new(),
        })
    }

    pub fn identity(k: usize, direction: Direction) -> Result<Self> {
        Self::new(vec![1.0; k], vec![0.0; k], 0.0, direction)
    }

    pub fn k(&self) -> usize {
        self.scale.len()
    }

    pub fn scale(&self) -> &[f64] {
        &self.scale
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    /// Dimensions whose source column was constant with `gamma = 0`; their
    /// scale is 0 and bias the target mean.
    pub fn degenerate_dims(&self) -> &[usize] {
        &self.degenerate_dims
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "# k={} gamma={} direction={}\n",
            self.k(),
            self.gamma,
            self.direction
        );
        for (s, b) in self.scale.iter().zip(&self.bias) {
            out.push_str(&format!("{s},{b}\n"));
        }
        out
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        write_text(path.as_ref(), &self.to_text())
    }
}

pub fn parse_calibration_model(text: &str, source: &str) -> Result<CalibrationModel> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    let header = lines
        .next()
        .and_then(|(_, l)| l.strip_prefix('#'))
        .ok_or_else(|| Error::parse(source, 1, "missing '# k=.. gamma=.. direction=..' header"))?;
    let (mut k, mut gamma, mut direction) = (None, None, None);
    for field in header.split_whitespace() {
        let Some((key, value)) = field.split_once('=') else {
            continue;
        };
        let bad = || Error::parse(source, 1, format!("bad {key} value '{value}'"));
        match key {
            "k" => k = Some(value.parse::<usize>().map_err(|_| bad())?),
            "gamma" => gamma = Some(value.parse::<f64>().map_err(|_| bad())?),
            "direction" => direction = Some(value.parse::<Direction>().map_err(|_| bad())?),
            _ => {}
        }
    }
    let missing = |what: &str| Error::parse(source, 1, format!("header lacks {what}"));
    let k = k.ok_or_else(|| missing("k"))?;
    let gamma = gamma.ok_or_else(|| missing("gamma"))?;
    let direction = direction.ok_or_else(|| missing("direction"))?;
    let (mut scale, mut bias) = (Vec::new(), Vec::new());
    for (lineno, line) in lines {
        if line.is_empty() {
            continue;
        }
        let parsed = line
            .split_once(',')
            .and_then(|(s, b)| Some((s.trim().parse::<f64>().ok()?, b.trim().parse::<f64>().ok()?)))
            .ok_or_else(|| Error::parse(source, lineno, "expected 'scale,bias'"))?;
        scale.push(parsed.0);
        bias.push(parsed.1);
    }
    if scale.len() != k {
        return Err(Error::parse(
            source,
            1,
            format!("header says k={k} but {} rows follow", scale.len()),
        ));
    }
    CalibrationModel::new(scale, bias, gamma, direction)
}

pub fn load_calibration_model(path: impl AsRef<Path>) -> Result<CalibrationModel> {
    let path = path.as_ref();
    parse_calibration_model(&read_text(path)?, &path.display().to_string())
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(gamma >= 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "gamma must be >= 0, got {gamma}"
        )));
    }
    Ok(())
}

/// Fits, independently for every column `j`,
/// `min_{s,b} sum_i (s * src_ij + b - dst_ij)^2 + gamma * s^2`.
///
/// The rows of `src` and `dst` are the structure rows of the same reference
/// pairs in the two modalities. The closed form is
/// `s = S_xy / (S_xx + gamma)`, `b = mean(dst) - s * mean(src)`.
pub fn fit_calibration(
    src: &StructureMatrix,
    dst: &StructureMatrix,
    gamma: f64,
    direction: Direction,
) -> Result<CalibrationModel> {
    check_gamma(gamma)?;
    if src.nrefs() != dst.nrefs() {
        return Err(Error::DimensionMismatch {
            expected: src.nrefs(),
            found: dst.nrefs(),
        });
    }
    if src.nrows() != dst.nrows() {
        return Err(Error::DimensionMismatch {
            expected: src.nrows(),
            found: dst.nrows(),
        });
    }
    let n = src.nrows();
    if n == 0 {
        return Err(Error::EmptyInput("no reference rows to fit on".into()));
    }
    let k = src.nrefs();
    let mut scale = Vec::with_capacity(k);
    let mut bias = Vec::with_capacity(k);
    let mut degenerate_dims = Vec::new();
    for j in 0..k {
        let mean_x = (0..n).map(|i| src.get(i, j)).sum::<f64>() / n as f64;
        let mean_y = (0..n).map(|i| dst.get(i, j)).sum::<f64>() / n as f64;
        let (mut sxx, mut sxy, mut sq) = (0.0, 0.0, 0.0);
        for i in 0..n {
            let dx = src.get(i, j) - mean_x;
            sxx += dx * dx;
            sxy += dx * (dst.get(i, j) - mean_y);
            sq += src.get(i, j) * src.get(i, j);
        }
        let constant = sxx <= 1e-24 * sq;
        let s = if gamma == 0.0 && constant {
            degenerate_dims.push(j);
            0.0
        } else {
            sxy / (sxx + gamma)
        };
        scale.push(s);
        bias.push(mean_y - s * mean_x);
    }
    if !degenerate_dims.is_empty() {
        log::warn!(
            "calibration columns {degenerate_dims:?} have constant source values; mapped to the target mean"
        );
    }
    let mut model = CalibrationModel::new(scale, bias, gamma, direction)?;
    model.degenerate_dims = degenerate_dims;
    Ok(model)
}

/// Maps every entry `(i, j)` to `scale_j * x + bias_j`.
pub fn apply_calibration(model: &CalibrationModel, s: &StructureMatrix) -> Result<StructureMatrix> {
    if s.nrefs() != model.k() {
        return Err(Error::DimensionMismatch {
            expected: model.k(),
            found: s.nrefs(),
        });
    }
    let values = s
        .rows()
        .flat_map(|row| {
            row.iter()
                .zip(model.scale.iter().zip(&model.bias))
                .map(|(x, (a, b))| a * x + b)
        })
        .collect();
    StructureMatrix::new(
        s.nrows(),
        values,
        StructureSpace::Calibrated,
        s.ref_ids().to_vec(),
    )
}

/// All targets for one query, nearest first.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedMatches {
    pub query_index: usize,
    /// `(target_index, distance)`, ascending by distance then index.
    pub ranked: Vec<(usize, f64)>,
}

/// Rankings plus the number of query/target pairs whose distance was
/// undefined and set to [`ZERO_VECTOR_DISTANCE`].
#[derive(Debug, Clone, PartialEq)]
pub struct MatchOutcome {
    pub matches: Vec<RankedMatches>,
    pub zero_vector_pairs: usize,
}

/// Ranks every target row for every query row; both sets must already live
/// in the same structure space.
pub fn rank_targets(
    queries: &StructureMatrix,
    targets: &StructureMatrix,
    metric: StructureMetric,
) -> Result<MatchOutcome> {
    if queries.nrefs() != targets.nrefs() {
        return Err(Error::DimensionMismatch {
            expected: queries.nrefs(),
            found: targets.nrefs(),
        });
    }
    let per_query: Vec<(RankedMatches, usize)> = (0..queries.nrows())
        .into_par_iter()
        .map(|q| {
            let query = queries.row(q);
            let mut zero = 0;
            let mut ranked: Vec<(usize, f64)> = targets
                .rows()
                .enumerate()
                .map(
                    |(t, target)| match structure_distance(query, target, metric) {
                        Ok(d) => (t, d),
                        Err(_) => {
                            zero += 1;
                            (t, ZERO_VECTOR_DISTANCE)
                        }
                    },
                )
                .collect();
            ranked.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
            (
                RankedMatches {
                    query_index: q,
                    ranked,
                },
                zero,
            )
        })
        .collect();
    let zero_vector_pairs = per_query.iter().map(|(_, z)| z).sum();
    if zero_vector_pairs > 0 {
        log::warn!("{zero_vector_pairs} query/target pairs involved a zero row; distance set to 2");
    }
    Ok(MatchOutcome {
        matches: per_query.into_iter().map(|(m, _)| m).collect(),
        zero_vector_pairs,
    })
}

/// Calibrates the query rows with `model` and ranks all target rows for each.
pub fn match_queries(
    queries: &StructureMatrix,
    targets: &StructureMatrix,
    model: &CalibrationModel,
    metric: StructureMetric,
) -> Result<MatchOutcome> {
    if targets.nrefs() != model.k() {
        return Err(Error::DimensionMismatch {
            expected: model.k(),
            found: targets.nrefs(),
        });
    }
    let calibrated = apply_calibration(model, queries)?;
    rank_targets(&calibrated, targets, metric)
}
