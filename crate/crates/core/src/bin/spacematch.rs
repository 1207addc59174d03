//! Command-line front end: one subcommand per pipeline stage plus the
//! end-to-end experiment runner and the correlation check.
//!
//! Exit codes: 0 on success, 1 on runtime or data errors, 2 on usage or
//! validation errors.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use spacematch::calibrate::{
    fit_calibration, load_calibration_model, match_queries, Direction, DEFAULT_GAMMA,
};
use spacematch::config::load_experiment_config;
use spacematch::correlate::{monte_carlo_verify, Mapping, MonteCarloConfig};
use spacematch::data::{
    load_feature_matrix, load_pairs, read_text, write_text, FeatureMatrix, ModalityDataset,
    SpaceKind,
};
use spacematch::evaluate::run_on_corpus;
use spacematch::refselect::{
    load_reference_set, select_references_bruteforce, select_references_greedy, DEFAULT_LAMBDA,
};
use spacematch::structure::{
    build_structure, load_structure, reference_conditioning, StructureMetric, StructureSpace,
};
use spacematch::synth::{synthetic_corpus, write_corpus, SyntheticConfig};
use spacematch::text::{embed_sentences, load_frequencies, load_word_vectors, tokenize, SifConfig};
use spacematch::Error;

const AFTER_HELP: &str = "\
File formats:
  features    one object per line, comma- (or tab-, for .tsv) separated reals
  labels      one label per line, aligned with the feature rows
  pairs       'indexA,indexB' per line, 0-based
  vectors     GloVe text: 'word v1 v2 ... vD' per line
  freqs       'word count-or-probability' per line; counts are normalized
  sentences   one sentence per line, whitespace tokenized and lowercased
  refs        '# k=.. lambda=.. objective=..' header, then 'indexA,indexB' lines
  structure   header of reference ids, then one comma-separated row per object
  model       '# k=.. gamma=.. direction=..' header, then 'scale,bias' lines
  config      'key = value' lines (see README for keys); flags override the file";

#[derive(Parser, Debug)]
#[command(name = "spacematch", version, about = "Cross-modal matching through shared reference points", after_help = AFTER_HELP)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Side {
    A,
    B,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Method {
    Greedy,
    Bruteforce,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Embed sentences with smooth-inverse-frequency weighting.
    EmbedText {
        #[arg(long)]
        sentences: PathBuf,
        #[arg(long)]
        vectors: PathBuf,
        #[arg(long)]
        freqs: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Smoothing parameter a in a / (a + p(w)).
        #[arg(long, default_value_t = SifConfig::DEFAULT_A)]
        a: f64,
        /// Keep the first principal component.
        #[arg(long)]
        keep_pc: bool,
    },
    /// Compute distances from every object to the reference objects.
    BuildStructure {
        #[arg(long)]
        features: PathBuf,
        #[arg(long, default_value = "euclidean")]
        space: String,
        /// Reference-set file.
        #[arg(long)]
        refs: PathBuf,
        /// Which column of the reference pairs indexes these features.
        #[arg(long, value_enum)]
        side: Side,
        #[arg(long)]
        out: PathBuf,
    },
    /// Choose reference pairs from matched training pairs.
    SelectRefs {
        #[arg(long)]
        features_a: PathBuf,
        #[arg(long)]
        features_b: PathBuf,
        #[arg(long, default_value = "euclidean")]
        space_a: String,
        #[arg(long, default_value = "euclidean")]
        space_b: String,
        /// Candidate training pairs.
        #[arg(long)]
        pairs: PathBuf,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = DEFAULT_LAMBDA)]
        lambda: f64,
        #[arg(long, value_enum, default_value = "greedy")]
        method: Method,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit the per-dimension affine map between two structure files.
    Calibrate {
        /// Structure of the side being mapped.
        #[arg(long)]
        src: PathBuf,
        /// Structure of the target side.
        #[arg(long)]
        dst: PathBuf,
        #[arg(long)]
        refs: PathBuf,
        /// a_to_b maps A's structure into B's; src must then be A's structure.
        #[arg(long, default_value = "b_to_a")]
        direction: String,
        #[arg(long, default_value_t = DEFAULT_GAMMA)]
        gamma: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Calibrate query rows and rank every target row.
    Match {
        #[arg(long)]
        queries: PathBuf,
        #[arg(long)]
        targets: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value = "cosine")]
        metric: String,
        /// Keep only the best N targets per query (all by default).
        #[arg(long)]
        top: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the train-size sweep described by a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides output_dir.
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Overrides any config key, e.g. --set seeds=0,1,2 (repeatable).
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// Monte Carlo check that similarity matrices of related modalities correlate positively.
    VerifyCorrelation {
        #[arg(long, default_value_t = 200)]
        n: usize,
        #[arg(long, default_value_t = 20)]
        d: usize,
        #[arg(long, default_value_t = 20)]
        e: usize,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value = "linear")]
        mapping: String,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a synthetic paired corpus (features, labels, pairs).
    Synth {
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 300)]
        n: usize,
        #[arg(long, default_value_t = 10)]
        classes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

enum CliError {
    Usage(String),
    Runtime(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Runtime(e)
    }
}

type CliResult = Result<(), CliError>;

fn usage<T>(r: spacematch::Result<T>) -> Result<T, CliError> {
    r.map_err(|e| CliError::Usage(e.to_string()))
}

fn dataset(path: &Path, space: SpaceKind) -> spacematch::Result<ModalityDataset> {
    let features: FeatureMatrix = load_feature_matrix(path, None)?;
    let labels = vec![String::new(); features.nrows()];
    ModalityDataset::with_row_ids(features, labels, space)
        .map_err(|e| e.context(path.display().to_string()))
}

fn cmd_embed_text(
    sentences: &Path,
    vectors: &Path,
    freqs: &Path,
    out: &Path,
    a: f64,
    keep_pc: bool,
) -> CliResult {
    let cfg = usage(SifConfig::new(a, !keep_pc))?;
    let text = read_text(sentences)?;
    let lines: Vec<&str> = text.lines().collect();
    if lines.iter().all(|l| l.trim().is_empty()) {
        return Err(Error::EmptyInput(format!("{} has no sentences", sentences.display())).into());
    }
    let tokens: Vec<Vec<String>> = lines.iter().map(|l| tokenize(l)).collect();
    let vectors = load_word_vectors(vectors)?;
    let freqs = load_frequencies(freqs)?;
    let embedded = embed_sentences(&tokens, &vectors, &freqs, &cfg)?;
    embedded.matrix.write_csv(out)?;
    if !embedded.empty_rows.is_empty() {
        eprintln!(
            "warning: {} sentences had no known token",
            embedded.empty_rows.len()
        );
    }
    println!(
        "rows={} cols={}",
        embedded.matrix.nrows(),
        embedded.matrix.ncols()
    );
    Ok(())
}

fn cmd_build_structure(
    features: &Path,
    space: &str,
    refs: &Path,
    side: Side,
    out: &Path,
) -> CliResult {
    let space: SpaceKind = usage(space.parse())?;
    let data = dataset(features, space)?;
    let refs = load_reference_set(refs)?;
    let indices = match side {
        Side::A => refs.indices_a(),
        Side::B => refs.indices_b(),
    };
    if let Some(c) = reference_conditioning(&data, &indices).filter(|c| c.near_colinear) {
        eprintln!(
            "warning: reference points are nearly affinely dependent (condition number {:.3e}); \
             distinct objects may share a structure row",
            c.condition_number
        );
    }
    let s = build_structure(&data, &indices)?;
    s.write_csv(out)?;
    println!("rows={} refs={}", s.nrows(), s.nrefs());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_select_refs(
    features_a: &Path,
    features_b: &Path,
    space_a: &str,
    space_b: &str,
    pairs: &Path,
    k: usize,
    lambda: f64,
    method: Method,
    out: &Path,
) -> CliResult {
    let (space_a, space_b): (SpaceKind, SpaceKind) =
        (usage(space_a.parse())?, usage(space_b.parse())?);
    if lambda.is_nan() || lambda <= 0.0 {
        return Err(CliError::Usage(format!(
            "--lambda must be > 0, got {lambda}"
        )));
    }
    let a = dataset(features_a, space_a)?;
    let b = dataset(features_b, space_b)?;
    let pairs = load_pairs(pairs)?;
    if k < 2 || k > pairs.len() {
        return Err(CliError::Usage(format!(
            "--k must be in 2..={}, got {k}",
            pairs.len()
        )));
    }
    let refs = match method {
        Method::Greedy => select_references_greedy(&a, &b, &pairs, k, lambda)?,
        Method::Bruteforce => select_references_bruteforce(&a, &b, &pairs, k, lambda)?,
    };
    refs.write(out)?;
    println!("k={} objective={}", refs.k(), refs.objective_value());
    Ok(())
}

fn cmd_calibrate(
    src: &Path,
    dst: &Path,
    refs: &Path,
    direction: &str,
    gamma: f64,
    out: &Path,
) -> CliResult {
    let direction: Direction = usage(direction.parse())?;
    if gamma.is_nan() || gamma < 0.0 {
        return Err(CliError::Usage(format!(
            "--gamma must be >= 0, got {gamma}"
        )));
    }
    let src = load_structure(src, StructureSpace::Calibrated)?;
    let dst = load_structure(dst, StructureSpace::Calibrated)?;
    let refs = load_reference_set(refs)?;
    let (src_rows, dst_rows) = match direction {
        Direction::AtoB => (refs.indices_a(), refs.indices_b()),
        Direction::BtoA => (refs.indices_b(), refs.indices_a()),
    };
    let model = fit_calibration(
        &src.select_rows(&src_rows)?,
        &dst.select_rows(&dst_rows)?,
        gamma,
        direction,
    )?;
    model.write(out)?;
    if !model.degenerate_dims().is_empty() {
        eprintln!(
            "warning: degenerate dimensions {:?}",
            model.degenerate_dims()
        );
    }
    println!("k={} direction={}", model.k(), model.direction());
    Ok(())
}

fn cmd_match(
    queries: &Path,
    targets: &Path,
    model: &Path,
    metric: &str,
    top: Option<usize>,
    out: &Path,
) -> CliResult {
    let metric: StructureMetric = usage(metric.parse())?;
    let queries = load_structure(queries, StructureSpace::Calibrated)?;
    let targets = load_structure(targets, StructureSpace::Calibrated)?;
    let model = load_calibration_model(model)?;
    let outcome = match_queries(&queries, &targets, &model, metric)?;
    let mut body = String::from("query,rank,target,distance\n");
    for m in &outcome.matches {
        let keep = top.unwrap_or(m.ranked.len());
        for (rank, (t, d)) in m.ranked.iter().take(keep).enumerate() {
            body.push_str(&format!("{},{},{},{}\n", m.query_index, rank + 1, t, d));
        }
    }
    write_text(out, &body)?;
    println!("queries={} targets={}", queries.nrows(), targets.nrows());
    Ok(())
}

fn cmd_run(config: &Path, out_dir: Option<PathBuf>, set: &[String]) -> CliResult {
    let mut overrides = Vec::new();
    for item in set {
        let (k, v) = item
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("--set expects KEY=VALUE, got '{item}'")))?;
        overrides.push((k.trim().to_string(), v.trim().to_string()));
    }
    let mut cfg = match load_experiment_config(config, &overrides) {
        Ok(cfg) => cfg,
        Err(e @ Error::Io { .. }) => return Err(e.into()),
        Err(e) => return Err(CliError::Usage(e.to_string())),
    };
    if out_dir.is_some() {
        cfg.output_dir = out_dir;
    }
    let corpus = cfg.corpus.load()?;
    usage(cfg.validate_against(&corpus))?;
    let report = run_on_corpus(&corpus, &cfg)?;
    if let Some(dir) = &cfg.output_dir {
        report.write(dir)?;
    }
    println!("direction,train_size,map_mean,map_std,random_map");
    for s in report.summary() {
        println!(
            "{},{},{:.4},{:.4},{:.4}",
            s.direction, s.train_size, s.map_mean, s.map_std, s.baseline_mean
        );
    }
    Ok(())
}

fn cmd_verify_correlation(
    n: usize,
    d: usize,
    e: usize,
    trials: usize,
    mapping: &str,
    seed: u64,
    out: Option<PathBuf>,
) -> CliResult {
    let mapping: Mapping = usage(mapping.parse())?;
    let cfg = MonteCarloConfig::new(n, d, e, trials, mapping, seed);
    usage(cfg.validate())?;
    let report = monte_carlo_verify(&cfg)?;
    if let Some(out) = out {
        write_text(&out, &report.to_csv())?;
    }
    println!("{}", report.summary_line());
    Ok(())
}

fn cmd_synth(out_dir: &Path, n: usize, classes: usize, seed: u64) -> CliResult {
    let cfg = SyntheticConfig {
        n,
        classes,
        seed,
        ..Default::default()
    };
    let corpus = usage(synthetic_corpus(&cfg))?;
    write_corpus(&corpus, out_dir)?;
    println!("pairs={} dir={}", corpus.pairs().len(), out_dir.display());
    Ok(())
}

fn dispatch(cli: Cli) -> CliResult {
    match cli.command {
        Command::EmbedText {
            sentences,
            vectors,
            freqs,
            out,
            a,
            keep_pc,
        } => cmd_embed_text(&sentences, &vectors, &freqs, &out, a, keep_pc),
        Command::BuildStructure {
            features,
            space,
            refs,
            side,
            out,
        } => cmd_build_structure(&features, &space, &refs, side, &out),
        Command::SelectRefs {
            features_a,
            features_b,
            space_a,
            space_b,
            pairs,
            k,
            lambda,
            method,
            out,
        } => cmd_select_refs(
            &features_a,
            &features_b,
            &space_a,
            &space_b,
            &pairs,
            k,
            lambda,
            method,
            &out,
        ),
        Command::Calibrate {
            src,
            dst,
            refs,
            direction,
            gamma,
            out,
        } => cmd_calibrate(&src, &dst, &refs, &direction, gamma, &out),
        Command::Match {
            queries,
            targets,
            model,
            metric,
            top,
            out,
        } => cmd_match(&queries, &targets, &model, &metric, top, &out),
        Command::Run {
            config,
            out_dir,
            set,
        } => cmd_run(&config, out_dir, &set),
        Command::VerifyCorrelation {
            n,
            d,
            e,
            trials,
            mapping,
            seed,
            out,
        } => cmd_verify_correlation(n, d, e, trials, &mapping, seed, out),
        Command::Synth {
            out_dir,
            n,
            classes,
            seed,
        } => cmd_synth(&out_dir, n, classes, seed),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
