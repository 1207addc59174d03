//! Distance-to-reference ("structure") representation of a modality.
//!
//! Every object is re-described by its distances to `k` reference objects of
//! the same modality: Euclidean distance for real-valued features, XOR count
//! for binary ones. Column `j` of a [`StructureMatrix`] always refers to the
//! `j`-th reference, which is what makes structure rows of two modalities
//! comparable once both use references drawn from the same matched pairs.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::data::{
    parse_feature_matrix, read_text, write_text, Delimiter, ModalityDataset, SpaceKind,
};
use crate::error::{Error, Result};

/// Which space a structure matrix lives in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StructureSpace {
    Euclidean,
    Hamming,
    /// Output of an affine calibration; entries may be negative.
    Calibrated,
}

impl From<SpaceKind> for StructureSpace {
    fn from(kind: SpaceKind) -> Self {
        match kind {
            SpaceKind::Euclidean => StructureSpace::Euclidean,
            SpaceKind::Hamming => StructureSpace::Hamming,
        }
    }
}

/// `n x k` matrix of distances from each object to each reference.
#[derive(Debug, Clone, PartialEq)]
pub struct StructureMatrix {
    rows: usize,
    refs: usize,
    values: Vec<f64>,
    space: StructureSpace,
    ref_ids: Vec<String>,
}

impl StructureMatrix {
    pub fn new(
        rows: usize,
        values: Vec<f64>,
        space: StructureSpace,
        ref_ids: Vec<String>,
    ) -> Result<Self> {
        let refs = ref_ids.len();
        if refs == 0 {
            return Err(Error::InvalidArgument(
                "structure needs at least one reference".into(),
            ));
        }
        if values.len() != rows * refs {
            return Err(Error::DimensionMismatch {
                expected: rows * refs,
                found: values.len(),
            });
        }
        for &v in &values {
            let ok = match space {
                StructureSpace::Calibrated => v.is_finite(),
                StructureSpace::Euclidean => v.is_finite() && v >= 0.0,
                StructureSpace::Hamming => v.is_finite() && v >= 0.0 && v.fract() == 0.0,
            };
            if !ok {
                return Err(Error::InvalidArgument(format!(
                    "entry {v} is not a valid {space:?} structure distance"
                )));
            }
        }
        Ok(Self {
            rows,
            refs,
            values,
            space,
            ref_ids,
        })
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    /// Number of references, i.e. the number of columns.
    pub fn nrefs(&self) -> usize {
        self.refs
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.refs..(i + 1) * self.refs]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.refs)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.refs + j]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn space(&self) -> StructureSpace {
        self.space
    }

    pub fn ref_ids(&self) -> &[String] {
        &self.ref_ids
    }

    pub fn select_rows(&self, indices: &[usize]) -> Result<Self> {
        let mut values = Vec::with_capacity(indices.len() * self.refs);
        for &i in indices {
            if i >= self.rows {
                return Err(Error::InvalidArgument(format!(
                    "row index {i} out of range for {} rows",
                    self.rows
                )));
            }
            values.extend_from_slice(self.row(i));
        }
        Ok(Self {
            rows: indices.len(),
            refs: self.refs,
            values,
            space: self.space,
            ref_ids: self.ref_ids.clone(),
        })
    }

    /// Header line of reference ids, then one comma-separated row per object.
    pub fn to_csv(&self) -> String {
        let mut out = self.ref_ids.join(",");
        out.push('\n');
        for row in self.rows() {
            let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        write_text(path.as_ref(), &self.to_csv())
    }
}

pub fn parse_structure_csv(
    text: &str,
    space: StructureSpace,
    source: &str,
) -> Result<StructureMatrix> {
    let (header, body) = text.split_once('\n').unwrap_or((text, ""));
    let ref_ids: Vec<String> = header
        .trim()
        .split(',')
        .map(|s| s.trim().to_string())
        .collect();
    if header.trim().is_empty() {
        return Err(Error::parse(source, 1, "missing reference-id header"));
    }
    let m = parse_feature_matrix(body, Delimiter::Comma, source).map_err(|e| match e {
        Error::Parse {
            path,
            line,
            message,
        } => Error::Parse {
            path,
            line: line + 1,
            message,
        },
        other => other,
    })?;
    if m.ncols() != ref_ids.len() {
        return Err(Error::parse(
            source,
            2,
            format!(
                "header names {} references but rows have {} columns",
                ref_ids.len(),
                m.ncols()
            ),
        ));
    }
    StructureMatrix::new(m.nrows(), m.values().to_vec(), space, ref_ids)
}

pub fn load_structure(path: impl AsRef<Path>, space: StructureSpace) -> Result<StructureMatrix> {
    let path = path.as_ref();
    parse_structure_csv(&read_text(path)?, space, &path.display().to_string())
}

/// Distance used to compare two structure rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum StructureMetric {
    Euclidean,
    #[default]
    Cosine,
}

impl fmt::Display for StructureMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StructureMetric::Euclidean => "euclidean",
            StructureMetric::Cosine => "cosine",
        })
    }
}

impl FromStr for StructureMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "euclidean" => Ok(StructureMetric::Euclidean),
            "cosine" => Ok(StructureMetric::Cosine),
            other => Err(Error::InvalidArgument(format!(
                "unknown metric '{other}' (expected euclidean or cosine)"
            ))),
        }
    }
}

fn check_dims(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    Ok(())
}

pub fn euclidean_distance(x: &[f64], o: &[f64]) -> Result<f64> {
    check_dims(x, o)?;
    Ok(euclidean_unchecked(x, o))
}

pub(crate) fn euclidean_unchecked(x: &[f64], o: &[f64]) -> f64 {
    x.iter()
        .zip(o)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

pub fn hamming_distance(y: &[f64], o: &[f64]) -> Result<usize> {
    check_dims(y, o)?;
    if let Some(&v) = y.iter().chain(o).find(|&&v| v != 0.0 && v != 1.0) {
        return Err(Error::NonBinaryInput { value: v });
    }
    Ok(hamming_unchecked(y, o))
}

pub(crate) fn hamming_unchecked(y: &[f64], o: &[f64]) -> usize {
    y.iter().zip(o).filter(|(a, b)| a != b).count()
}

/// Distance in the dataset's own feature space.
pub(crate) fn native_distance(space: SpaceKind, a: &[f64], b: &[f64]) -> f64 {
    match space {
        SpaceKind::Euclidean => euclidean_unchecked(a, b),
        SpaceKind::Hamming => hamming_unchecked(a, b) as f64,
    }
}

/// Builds the `n x k` structure matrix of `data` against the given reference rows.
pub fn build_structure(data: &ModalityDataset, ref_indices: &[usize]) -> Result<StructureMatrix> {
    let n = data.len();
    if ref_indices.is_empty() {
        return Err(Error::InvalidArgument(
            "at least one reference is required".into(),
        ));
    }
    for (pos, &r) in ref_indices.iter().enumerate() {
        if r >= n {
            return Err(Error::InvalidArgument(format!(
                "reference index {r} out of range for {n} objects"
            )));
        }
        if ref_indices[..pos].contains(&r) {
            return Err(Error::InvalidArgument(format!(
                "duplicate reference index {r}"
            )));
        }
    }
    if let Some(c) = reference_conditioning(data, ref_indices) {
        if c.near_colinear {
            log::debug!(
                "reference points are nearly affinely dependent (condition number {:.3e})",
                c.condition_number
            );
        }
    }

    let k = ref_indices.len();
    let features = data.features();
    let space = data.space();
    let mut values = vec![0.0; n * k];
    values.par_chunks_mut(k).enumerate().for_each(|(i, out)| {
        let row = features.row(i);
        for (slot, &r) in out.iter_mut().zip(ref_indices) {
            *slot = native_distance(space, row, features.row(r));
        }
    });
    let ref_ids = ref_indices.iter().map(|&r| data.ids()[r].clone()).collect();
    StructureMatrix::new(n, values, space.into(), ref_ids)
}

/// Conditioning of a Euclidean reference set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceConditioning {
    /// Ratio of extreme singular values of the reference offsets `o_j - o_0`.
    pub condition_number: f64,
    pub near_colinear: bool,
}

/// Above this condition number a reference set is reported as near-colinear.
pub const COLINEARITY_THRESHOLD: f64 = 1e8;

/// `None` for Hamming data or a single reference.
pub fn reference_conditioning(
    data: &ModalityDataset,
    ref_indices: &[usize],
) -> Option<ReferenceConditioning> {
    if data.space() != SpaceKind::Euclidean || ref_indices.len() < 2 {
        return None;
    }
    let f = data.features();
    let origin = f.row(ref_indices[0]);
    let d = f.ncols();
    let offsets = DMatrix::from_fn(ref_indices.len() - 1, d, |i, j| {
        f.get(ref_indices[i + 1], j) - origin[j]
    });
    let sv = offsets.singular_values();
    let max = sv.max();
    let min = sv.min();
    let condition_number = if min > 0.0 { max / min } else { f64::INFINITY };
    Some(ReferenceConditioning {
        condition_number,
        near_colinear: condition_number.is_nan() || condition_number > COLINEARITY_THRESHOLD,
    })
}

/// Compares two structure rows.
pub fn structure_distance(a: &[f64], b: &[f64], metric: StructureMetric) -> Result<f64> {
    check_dims(a, b)?;
    match metric {
        StructureMetric::Euclidean => Ok(euclidean_unchecked(a, b)),
        StructureMetric::Cosine => cosine_distance(a, b),
    }
}

fn cosine_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(Error::ZeroVector);
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    Ok((1.0 - dot / (na * nb)).clamp(0.0, 2.0))
}
