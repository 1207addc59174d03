//! Flat `key = value` experiment configuration files.
//!
//! ```text
//! # comment
//! corpus = synthetic
//! train_sizes = 6, 14, 22
//! seeds = 0, 1, 2
//! output_dir = results
//! ```
//!
//! Relative paths resolve against the directory of the config file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::data::{read_text, SpaceKind};
use crate::error::{Error, Result};
use crate::evaluate::{CorpusSource, ExperimentConfig};
use crate::synth::SyntheticConfig;

pub const KEYS: &[&str] = &[
    "corpus",
    "features_a",
    "features_b",
    "labels_a",
    "labels_b",
    "pairs",
    "space_a",
    "space_b",
    "synthetic_n",
    "synthetic_latent_dim",
    "synthetic_dim_a",
    "synthetic_dim_b",
    "synthetic_classes",
    "synthetic_seed",
    "train_sizes",
    "seeds",
    "lambda",
    "gamma",
    "metric",
    "direction",
    "ref_count",
    "selection",
    "method",
    "output_dir",
];

pub fn parse_key_values(text: &str, source: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (lineno, line) in text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())) {
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::parse(source, lineno, "expected 'key = value'"))?;
        let key = key.trim().to_string();
        if !KEYS.contains(&key.as_str()) {
            return Err(Error::parse(source, lineno, format!("unknown key '{key}'")));
        }
        map.insert(key, value.trim().to_string());
    }
    Ok(map)
}

fn field<T: FromStr>(map: &BTreeMap<String, String>, key: &str) -> Result<Option<T>>
where
    T::Err: std::fmt::Display,
{
    map.get(key)
        .map(|v| {
            v.parse::<T>().map_err(|e| {
                Error::InvalidArgument(format!("field '{key}': cannot parse '{v}': {e}"))
            })
        })
        .transpose()
}

fn list<T: FromStr>(map: &BTreeMap<String, String>, key: &str) -> Result<Option<Vec<T>>>
where
    T::Err: std::fmt::Display,
{
    map.get(key)
        .map(|v| {
            v.split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|s| {
                    s.parse::<T>().map_err(|e| {
                        Error::InvalidArgument(format!("field '{key}': cannot parse '{s}': {e}"))
                    })
                })
                .collect()
        })
        .transpose()
}

/// Builds an experiment configuration; unset keys take their defaults.
pub fn experiment_config_from_map(
    map: &BTreeMap<String, String>,
    base_dir: &Path,
) -> Result<ExperimentConfig> {
    let path = |key: &str| -> Result<PathBuf> {
        let p = map.get(key).ok_or_else(|| {
            Error::InvalidArgument(format!("field '{key}' is required for a file corpus"))
        })?;
        Ok(base_dir.join(p))
    };
    let corpus_kind = map.get("corpus").map_or("synthetic", String::as_str);
    let corpus = match corpus_kind {
        "synthetic" => {
            let d = SyntheticConfig::default();
            CorpusSource::Synthetic(SyntheticConfig {
                n: field(map, "synthetic_n")?.unwrap_or(d.n),
                latent_dim: field(map, "synthetic_latent_dim")?.unwrap_or(d.latent_dim),
                dim_a: field(map, "synthetic_dim_a")?.unwrap_or(d.dim_a),
                dim_b: field(map, "synthetic_dim_b")?.unwrap_or(d.dim_b),
                classes: field(map, "synthetic_classes")?.unwrap_or(d.classes),
                seed: field(map, "synthetic_seed")?.unwrap_or(d.seed),
            })
        }
        "files" => CorpusSource::Files {
            features_a: path("features_a")?,
            features_b: path("features_b")?,
            labels_a: path("labels_a")?,
            labels_b: path("labels_b")?,
            pairs: path("pairs")?,
            space_a: field::<SpaceKind>(map, "space_a")?.unwrap_or(SpaceKind::Euclidean),
            space_b: field::<SpaceKind>(map, "space_b")?.unwrap_or(SpaceKind::Euclidean),
        },
        other => {
            return Err(Error::InvalidArgument(format!(
                "field 'corpus': expected 'synthetic' or 'files', got '{other}'"
            )))
        }
    };

    let mut cfg = ExperimentConfig::new(corpus);
    if let Some(v) = list(map, "train_sizes")? {
        cfg.train_sizes = v;
    }
    if let Some(v) = list(map, "seeds")? {
        cfg.seeds = v;
    }
    if let Some(v) = field(map, "lambda")? {
        cfg.lambda = v;
    }
    if let Some(v) = field(map, "gamma")? {
        cfg.gamma = v;
    }
    if let Some(v) = field(map, "metric")? {
        cfg.metric = v;
    }
    if let Some(v) = field(map, "direction")? {
        cfg.direction = v;
    }
    if let Some(v) = field(map, "ref_count")? {
        cfg.ref_count = v;
    }
    if let Some(v) = field(map, "selection")? {
        cfg.selection = v;
    }
    if let Some(v) = map.get("method") {
        cfg.method = v.clone();
    }
    if let Some(v) = map.get("output_dir") {
        cfg.output_dir = Some(base_dir.join(v));
    }
    cfg.validate().map_err(|e| match e {
        Error::InvalidArgument(msg) => {
            Error::InvalidArgument(format!("invalid configuration: {msg}"))
        }
        other => other,
    })?;
    Ok(cfg)
}

/// Reads a config file and applies `overrides` (later entries win) on top.
pub fn load_experiment_config(
    path: impl AsRef<Path>,
    overrides: &[(String, String)],
) -> Result<ExperimentConfig> {
    let path = path.as_ref();
    let mut map = parse_key_values(&read_text(path)?, &path.display().to_string())?;
    for (k, v) in overrides {
        if !KEYS.contains(&k.as_str()) {
            return Err(Error::InvalidArgument(format!("unknown key '{k}'")));
        }
        map.insert(k.clone(), v.clone());
    }
    let base = path.parent().unwrap_or(Path::new("."));
    experiment_config_from_map(&map, base)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calibrate::Direction;
    use crate::evaluate::RefCount;
    use crate::structure::StructureMetric;

    #[test]
    fn parses_and_applies_defaults() {
        let map = parse_key_values(
            "# sweep\ncorpus = synthetic\ntrain_sizes = 6, 14\nseeds=3\nmetric = euclidean\nref_count = all\n",
            "c",
        )
        .unwrap();
        let cfg = experiment_config_from_map(&map, Path::new("/tmp")).unwrap();
        assert_eq!(cfg.train_sizes, vec![6, 14]);
        assert_eq!(cfg.seeds, vec![3]);
        assert_eq!(cfg.metric, StructureMetric::Euclidean);
        assert_eq!(cfg.ref_count, RefCount::All);
        assert_eq!(cfg.direction, Direction::BtoA);
        assert_eq!(cfg.lambda, 1.0);
    }

    #[test]
    fn file_corpus_paths_are_relative_to_config() {
        let text = "corpus=files\nfeatures_a=a.csv\nfeatures_b=b.csv\nlabels_a=la\nlabels_b=lb\npairs=p.csv\nspace_b=hamming\n";
        let map = parse_key_values(text, "c").unwrap();
        let cfg = experiment_config_from_map(&map, Path::new("/data")).unwrap();
        match cfg.corpus {
            CorpusSource::Files {
                features_a,
                space_b,
                ..
            } => {
                assert_eq!(features_a, PathBuf::from("/data/a.csv"));
                assert_eq!(space_b, SpaceKind::Hamming);
            }
            other => panic!("unexpected corpus {other:?}"),
        }
    }

    #[test]
    fn errors_name_the_field() {
        assert!(parse_key_values("bogus = 1", "c").is_err());
        assert!(parse_key_values("no equals sign", "c").is_err());
        let map = parse_key_values("train_sizes = 6, x", "c").unwrap();
        let err = experiment_config_from_map(&map, Path::new(".")).unwrap_err();
        assert!(err.to_string().contains("train_sizes"));
        let map = parse_key_values("train_sizes = 1", "c").unwrap();
        let err = experiment_config_from_map(&map, Path::new(".")).unwrap_err();
        assert!(err.to_string().contains("train_sizes"));
        let map = parse_key_values("corpus = files", "c").unwrap();
        assert!(experiment_config_from_map(&map, Path::new(".")).is_err());
    }
}
