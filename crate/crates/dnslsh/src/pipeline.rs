//! End-to-end orchestration: resolved configuration, and the operations
//! behind each CLI subcommand (ingest → featurize → train → predict /
//! evaluate, plus synthesis, comparison, and the window-size sweep).
//!
//! Every operation returns its human-readable report as a `String` (the
//! binary prints it), and every artifact embeds or sits next to the
//! resolved configuration so later stages can refuse mismatched inputs.

use std::collections::BTreeMap;
use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::features::{
    featurize_window, label_window, make_windows, read_features, write_features, FeatureMetadata,
    FeatureRow,
};
use crate::ingest::{
    group_by_domain, parse_pcap, read_csv, strip_delimiters, write_csv, write_query_pcap,
    Behavior, DnsQueryRecord, SuffixRules, LEGITIMATE,
};
use crate::lsh::{compare, digest_query, HashConfig, ThresholdMode};
use crate::model::{
    assemble_dataset, evaluate, evaluate_two_step, load_model, sample_benign_pool, save_model,
    stratified_split, train_forest, ForestModel, Hyperparams, Task,
};
use crate::synth::{generate, SynthProfile};

/// Window sizes exercised by the sweep flag.
pub const SWEEP_WINDOW_SIZES: [usize; 6] = [5, 10, 20, 30, 40, 50];

/// Fully resolved pipeline configuration (config file merged with flags).
#[derive(Clone, Debug, PartialEq)]
pub struct PipelineConfig {
    /// Queries per window, n ∈ [2, 1000].
    pub window_size: usize,
    /// Subdomain segments k ∈ {1, 2, 3}; `None` takes the task default
    /// (2, or 3 for behavioral tasks).
    pub segments: Option<u8>,
    pub include_global: bool,
    pub threshold_mode: ThresholdMode,
    pub delimiters: BTreeSet<char>,
    pub task: Task,
    pub seed: u64,
    pub forest: Hyperparams,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            window_size: 20,
            segments: None,
            include_global: true,
            threshold_mode: ThresholdMode::Median,
            delimiters: ['.', '-', '_'].into_iter().collect(),
            task: Task::Binary,
            seed: 42,
            forest: Hyperparams::default(),
        }
    }
}

impl PipelineConfig {
    /// The segment count in effect: explicit value, or the task default —
    /// 2 for binary/family, 3 for behavioral tasks.
    pub fn effective_segments(&self) -> u8 {
        self.segments
            .unwrap_or(if self.task.is_behavioral() { 3 } else { 2 })
    }

    pub fn validate(&self) -> Result<()> {
        if !(2..=1000).contains(&self.window_size) {
            return Err(Error::InvalidArgument(format!(
                "window size must be in [2, 1000], got {}",
                self.window_size
            )));
        }
        if let Some(k) = self.segments {
            if !(1..=3).contains(&k) {
                return Err(Error::InvalidArgument(format!(
                    "segments must be 1, 2 or 3, got {k}"
                )));
            }
        }
        self.forest.validate()?;
        self.hash_config().validate()
    }

    /// The hashing configuration this pipeline config implies.
    pub fn hash_config(&self) -> HashConfig {
        HashConfig {
            threshold_mode: self.threshold_mode,
            segments: self.effective_segments(),
            include_global: self.include_global,
            delimiters: self.delimiters.clone(),
            ..HashConfig::default()
        }
    }

    /// Feature metadata for artifacts produced under this config.
    pub fn feature_metadata(&self) -> FeatureMetadata {
        FeatureMetadata::new(self.window_size, &self.hash_config())
    }

    /// Human-readable echo of the resolved configuration, embedded in every
    /// report.
    pub fn echo(&self) -> String {
        let delimiters: String = self.delimiters.iter().collect();
        let max_depth = self
            .forest
            .max_depth
            .map(|d| d.to_string())
            .unwrap_or_else(|| "unlimited".into());
        format!(
            "resolved config:\n\
             \x20 task             {}\n\
             \x20 window size      {}\n\
             \x20 segments         {}{}\n\
             \x20 include global   {}\n\
             \x20 threshold mode   {}\n\
             \x20 delimiters       {delimiters:?}\n\
             \x20 seed             {}\n\
             \x20 forest           {} trees, max depth {max_depth}, min leaf {}, \
             features/split {:?}, bootstrap {}\n",
            self.task,
            self.window_size,
            self.effective_segments(),
            if self.segments.is_none() {
                " (task default)"
            } else {
                ""
            },
            self.include_global,
            self.threshold_mode,
            self.seed,
            self.forest.tree_count,
            self.forest.min_samples_leaf,
            self.forest.split_features,
            self.forest.bootstrap,
        )
    }
}

/// Config-file schema (TOML). Every field optional; flags override.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub window_size: Option<usize>,
    pub segments: Option<u8>,
    pub include_global: Option<bool>,
    pub threshold_mode: Option<String>,
    /// Delimiters as one string, e.g. `".-_"`.
    pub delimiters: Option<String>,
    pub task: Option<String>,
    pub seed: Option<u64>,
    #[serde(default)]
    pub forest: ForestFileConfig,
    #[serde(default)]
    pub paths: PathsConfig,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForestFileConfig {
    pub tree_count: Option<usize>,
    /// Omit for unlimited depth.
    pub max_depth: Option<u32>,
    pub min_samples_leaf: Option<usize>,
    /// `"sqrt"`, `"all"`, or a count.
    pub split_features: Option<String>,
    pub bootstrap: Option<bool>,
}

/// Paths that may come from the config file; flags override.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathsConfig {
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub binary_model: Option<PathBuf>,
    pub suffix_file: Option<PathBuf>,
    pub benign_pool: Option<PathBuf>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<FileConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| {
            Error::InvalidArgument(format!("config file {}: {e}", path.display()))
        })
    }

    /// Fold this file config into `base` (typically the defaults). Flag
    /// values are applied by the caller afterwards, so precedence is
    /// defaults < file < flags.
    pub fn apply(&self, base: &mut PipelineConfig) -> Result<()> {
        if let Some(n) = self.window_size {
            base.window_size = n;
        }
        if let Some(k) = self.segments {
            base.segments = Some(k);
        }
        if let Some(g) = self.include_global {
            base.include_global = g;
        }
        if let Some(mode) = &self.threshold_mode {
            base.threshold_mode = mode.parse()?;
        }
        if let Some(d) = &self.delimiters {
            base.delimiters = d.chars().collect();
        }
        if let Some(task) = &self.task {
            base.task = task.parse()?;
        }
        if let Some(seed) = self.seed {
            base.seed = seed;
        }
        if let Some(t) = self.forest.tree_count {
            base.forest.tree_count = t;
        }
        if let Some(d) = self.forest.max_depth {
            base.forest.max_depth = Some(d);
        }
        if let Some(m) = self.forest.min_samples_leaf {
            base.forest.min_samples_leaf = m;
        }
        if let Some(s) = &self.forest.split_features {
            base.forest.split_features = s.parse()?;
        }
        if let Some(b) = self.forest.bootstrap {
            base.forest.bootstrap = b;
        }
        Ok(())
    }
}

fn load_rules<'a>(
    suffix_file: Option<&Path>,
    owned: &'a mut Option<SuffixRules>,
) -> Result<&'a SuffixRules> {
    match suffix_file {
        Some(path) => {
            *owned = Some(SuffixRules::from_file(path)?);
            Ok(owned.as_ref().unwrap())
        }
        None => Ok(SuffixRules::bundled()),
    }
}

fn is_pcap_path(path: &Path) -> bool {
    matches!(
        path.extension().and_then(|e| e.to_str()),
        Some("pcap") | Some("pcapng") | Some("cap")
    )
}

/// Ingest one or more PCAP/CSV inputs into the canonical query CSV.
/// `family`/`behavior` stamp labels onto records that carry none (PCAP
/// records never do).
pub fn run_ingest(
    inputs: &[PathBuf],
    output: &Path,
    family: Option<&str>,
    behavior: Option<Behavior>,
) -> Result<String> {
    if inputs.is_empty() {
        return Err(Error::InvalidArgument("no input files given".into()));
    }
    if behavior.is_some() {
        match family {
            None => {
                return Err(Error::InvalidArgument(
                    "--behavior requires --family".into(),
                ))
            }
            Some(LEGITIMATE) => {
                return Err(Error::InvalidArgument(
                    "legitimate traffic cannot carry a behavior label".into(),
                ))
            }
            _ => {}
        }
    }

    let mut report = String::new();
    let mut records: Vec<DnsQueryRecord> = Vec::new();
    for input in inputs {
        if is_pcap_path(input) {
            let source = input
                .file_stem()
                .and_then(|s| s.to_str())
                .unwrap_or("capture")
                .to_string();
            let (mut parsed, summary) = parse_pcap(input, &source)?;
            let _ = writeln!(report, "{}: {summary}", input.display());
            records.append(&mut parsed);
        } else {
            let mut parsed = read_csv(input)?;
            let _ = writeln!(report, "{}: {} query rows", input.display(), parsed.len());
            records.append(&mut parsed);
        }
    }

    let mut stamped = 0usize;
    for record in &mut records {
        if record.family_label.is_none() {
            if let Some(f) = family {
                record.family_label = Some(f.to_string());
                record.behavior_label = behavior;
                stamped += 1;
            }
        }
    }
    if stamped > 0 {
        let _ = writeln!(
            report,
            "stamped {stamped} records with family `{}`{}",
            family.unwrap_or_default(),
            behavior.map(|b| format!(", behavior `{b}`")).unwrap_or_default()
        );
    }
    for record in &records {
        record.validate()?;
    }
    write_csv(&records, output)?;
    let _ = writeln!(
        report,
        "wrote {} query records to {}",
        records.len(),
        output.display()
    );
    Ok(report)
}

/// Featurization output: the rows written plus bookkeeping for the report.
struct FeaturizeOutcome {
    rows: Vec<FeatureRow>,
    labeled: bool,
    report: String,
}

fn featurize_records(
    records: Vec<DnsQueryRecord>,
    config: &PipelineConfig,
    rules: &SuffixRules,
    window_size: usize,
) -> Result<FeaturizeOutcome> {
    let hash = config.hash_config();
    let labeled_count = records
        .iter()
        .filter(|r| r.family_label.is_some())
        .count();
    let labeled = match labeled_count {
        0 => false,
        c if c == records.len() => true,
        c => {
            let missing = records
                .iter()
                .find(|r| r.family_label.is_none())
                .expect("mixed labels imply a missing one");
            return Err(Error::Data(format!(
                "{c} of {} records are labeled but `{}` (source {}) has no family label; \
                 label everything (e.g. re-ingest with --family) or nothing",
                records.len(),
                missing.qname,
                missing.source
            )));
        }
    };

    let (streams, group_report) = group_by_domain(records, rules, &config.delimiters);
    let mut report = String::new();
    let _ = writeln!(report, "{group_report}");

    let mut windows = Vec::new();
    let mut discarded_total = 0usize;
    for stream in &streams {
        let (mut w, discarded) = make_windows(stream, window_size, &hash)?;
        discarded_total += discarded;
        let _ = writeln!(
            report,
            "  stream {}: {} queries → {} windows ({} trailing queries discarded)",
            stream.key,
            stream.queries.len(),
            w.len(),
            discarded
        );
        windows.append(&mut w);
    }

    let rows: Vec<FeatureRow> = windows
        .par_iter()
        .map(|window| -> Result<FeatureRow> {
            let fv = featurize_window(window)?;
            let label = if labeled {
                Some(label_window(window)?)
            } else {
                None
            };
            Ok(FeatureRow {
                stream_key: window.key.to_string(),
                window_index: window.index,
                label_binary: label.as_ref().map(|l| l.binary),
                label_family: label.as_ref().map(|l| l.family.clone()),
                label_behavior: label.as_ref().and_then(|l| l.behavior),
                values: fv.values,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let _ = writeln!(
        report,
        "featurized {} windows ({} total trailing queries discarded, {})",
        rows.len(),
        discarded_total,
        if labeled { "labeled" } else { "unlabeled" }
    );
    Ok(FeaturizeOutcome {
        rows,
        labeled,
        report,
    })
}

/// Featurize a canonical query CSV into a feature file + metadata sidecar.
pub fn run_featurize(
    config: &PipelineConfig,
    input: &Path,
    output: &Path,
    suffix_file: Option<&Path>,
) -> Result<String> {
    config.validate()?;
    let mut owned = None;
    let rules = load_rules(suffix_file, &mut owned)?;
    let records = read_csv(input)?;
    let outcome = featurize_records(records, config, rules, config.window_size)?;
    let meta = config.feature_metadata();
    write_features(&outcome.rows, &meta, output)?;
    let mut report = config.echo();
    report.push_str(&outcome.report);
    let _ = writeln!(
        report,
        "wrote {} rows × {} features to {} (sidecar {})",
        outcome.rows.len(),
        meta.feature_count,
        output.display(),
        FeatureMetadata::sidecar_path(output).display()
    );
    Ok(report)
}

/// Train a forest on a feature file. With `train_fraction < 1`, a seeded
/// stratified split is taken first and the held-out rows can be written to
/// `holdout_out` for later evaluation.
pub fn run_train(
    config: &PipelineConfig,
    features: &Path,
    model_out: &Path,
    train_fraction: f64,
    holdout_out: Option<&Path>,
) -> Result<String> {
    config.validate()?;
    if !(train_fraction > 0.0 && train_fraction <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "train fraction must be in (0, 1], got {train_fraction}"
        )));
    }
    let (rows, meta) = read_features(features)?;
    config.feature_metadata().ensure_compatible(&meta)?;
    let (dataset, excluded) = assemble_dataset(&rows, config.task)?;

    let mut report = config.echo();
    if excluded > 0 {
        let _ = writeln!(
            report,
            "excluded {excluded} handshake windows (task {})",
            config.task
        );
    }

    let (train_set, holdout) = if train_fraction < 1.0 {
        let (tr, te) = stratified_split(&dataset, train_fraction, config.seed)?;
        (tr, Some(te))
    } else {
        (dataset, None)
    };

    let counts = train_set.class_counts();
    let _ = writeln!(report, "training on {} windows:", train_set.len());
    for (class, count) in train_set.classes.iter().zip(&counts) {
        let _ = writeln!(report, "  {class}: {count}");
    }

    let model = train_forest(&train_set, &config.forest, config.seed, &meta)?;
    save_model(&model, model_out)?;
    let _ = writeln!(report, "wrote model to {}", model_out.display());

    if let Some(holdout_set) = &holdout {
        let _ = writeln!(report, "held out {} windows", holdout_set.len());
        if let Some(path) = holdout_out {
            let kept: BTreeSet<(String, usize)> = holdout_set.refs.iter().cloned().collect();
            let held_rows: Vec<FeatureRow> = rows
                .iter()
                .filter(|r| kept.contains(&(r.stream_key.clone(), r.window_index)))
                .cloned()
                .collect();
            write_features(&held_rows, &meta, path)?;
            let _ = writeln!(
                report,
                "wrote {} held-out rows to {}",
                held_rows.len(),
                path.display()
            );
        }
    }
    Ok(report)
}

/// Apply a model to a feature file; writes
/// `stream_key,window_index,predicted,probability_max` plus a metadata
/// sidecar echoing the model's configuration.
pub fn run_predict(model_path: &Path, features: &Path, output: &Path) -> Result<String> {
    let model = load_model(model_path)?;
    let (rows, meta) = read_features(features)?;
    model.feature_metadata.ensure_compatible(&meta)?;

    let mut writer =
        csv::Writer::from_path(output).map_err(|e| Error::Data(format!("{}: {e}", output.display())))?;
    writer
        .write_record(["stream_key", "window_index", "predicted", "probability_max"])
        .map_err(|e| Error::Data(e.to_string()))?;
    for row in &rows {
        let p = model.predict(&row.values)?;
        writer
            .write_record([
                row.stream_key.as_str(),
                &row.window_index.to_string(),
                model.class_name(&p),
                &p.probabilities[p.class_index].to_string(),
            ])
            .map_err(|e| Error::Data(e.to_string()))?;
    }
    writer.flush().map_err(|e| Error::io(output, e))?;

    let sidecar = FeatureMetadata::sidecar_path(output);
    let echo = serde_json::json!({
        "model": model_path.display().to_string(),
        "task": model.task,
        "classes": model.classes,
        "seed": model.seed,
        "hyperparams": model.hyperparams,
        "feature_metadata": model.feature_metadata,
    });
    std::fs::write(&sidecar, serde_json::to_string_pretty(&echo).unwrap() + "\n")
        .map_err(|e| Error::io(&sidecar, e))?;

    Ok(format!(
        "predicted {} windows with the {} model ({} classes) → {}\n",
        rows.len(),
        model.task,
        model.classes.len(),
        output.display()
    ))
}

/// Evaluation mode for [`run_evaluate`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EvalMode {
    Direct,
    TwoStep,
    PerFile,
}

impl std::str::FromStr for EvalMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<EvalMode> {
        match s {
            "direct" => Ok(EvalMode::Direct),
            "two-step" | "two_step" => Ok(EvalMode::TwoStep),
            "per-file" | "per_file" => Ok(EvalMode::PerFile),
            other => Err(Error::InvalidArgument(format!(
                "unknown evaluation mode `{other}` (expected direct, two-step or per-file)"
            ))),
        }
    }
}

fn model_echo(model: &ForestModel, path: &Path) -> String {
    let meta = &model.feature_metadata;
    format!(
        "model {} — task {}, {} classes, {} trees, seed {}, \
         window {}, k {}, global {}, mode {}\n",
        path.display(),
        model.task,
        model.classes.len(),
        model.trees.len(),
        model.seed,
        meta.window_size,
        meta.hash.segments,
        meta.hash.include_global,
        meta.hash.threshold_mode,
    )
}

/// Evaluate model(s) on a labeled feature file.
pub fn run_evaluate(
    model_path: &Path,
    binary_model_path: Option<&Path>,
    features: &Path,
    mode: EvalMode,
    benign_pool: Option<&Path>,
    seed: u64,
) -> Result<String> {
    let model = load_model(model_path)?;
    let (mut rows, meta) = read_features(features)?;
    model.feature_metadata.ensure_compatible(&meta)?;

    let mut report = model_echo(&model, model_path);

    if let Some(pool_path) = benign_pool {
        let (pool_rows, pool_meta) = read_features(pool_path)?;
        meta.ensure_compatible(&pool_meta)?;
        let malicious = rows
            .iter()
            .filter(|r| r.label_family.as_deref().is_some_and(|f| f != LEGITIMATE))
            .count();
        let legitimate = rows.len() - malicious;
        if malicious > legitimate {
            let need = malicious - legitimate;
            let sample = sample_benign_pool(&pool_rows, need, seed)?;
            let _ = writeln!(
                report,
                "supplemented {need} legitimate windows from {} (seed {seed})",
                pool_path.display()
            );
            rows.extend(sample);
        }
    }

    match mode {
        EvalMode::Direct => {
            let metrics = evaluate(&model, &rows)?;
            report.push('\n');
            report.push_str(&metrics.to_string());
        }
        EvalMode::TwoStep => {
            let binary_path = binary_model_path.ok_or_else(|| {
                Error::InvalidArgument(
                    "two-step evaluation needs --binary-model for the first stage".into(),
                )
            })?;
            let binary = load_model(binary_path)?;
            binary.feature_metadata.ensure_compatible(&meta)?;
            report.push_str(&model_echo(&binary, binary_path));
            let metrics = evaluate_two_step(&binary, &model, &rows)?;
            report.push('\n');
            report.push_str(&metrics.to_string());
        }
        EvalMode::PerFile => {
            // Stream keys are `source|registered_domain`; a "file" is a
            // source.
            let mut by_source: BTreeMap<&str, Vec<FeatureRow>> = BTreeMap::new();
            for row in &rows {
                let source = row.stream_key.split('|').next().unwrap_or("");
                by_source.entry(source).or_default().push(row.clone());
            }
            let _ = writeln!(report, "\nper-file breakdown ({} sources):", by_source.len());
            let _ = writeln!(
                report,
                "  {:<28} {:>8} {:>9} {:>13} {:>8}",
                "source", "windows", "accuracy", "aggregate F1", "FPR"
            );
            for (source, subset) in &by_source {
                let metrics = evaluate(&model, subset)?;
                let fpr = metrics
                    .fpr
                    .map(|f| format!("{f:.4}"))
                    .unwrap_or_else(|| "n/a".into());
                let _ = writeln!(
                    report,
                    "  {:<28} {:>8} {:>9.4} {:>13.4} {:>8}",
                    source, metrics.total, metrics.accuracy, metrics.aggregate_f1, fpr
                );
            }
            let pooled = evaluate(&model, &rows)?;
            let _ = writeln!(report, "\npooled over all sources:");
            report.push_str(&pooled.to_string());
        }
    }
    Ok(report)
}

/// Generate synthetic traffic to CSV (and optionally a PCAP of the same
/// queries).
pub fn run_synth(
    profile: &SynthProfile,
    output: &Path,
    pcap_out: Option<&Path>,
) -> Result<String> {
    let records = generate(profile)?;
    write_csv(&records, output)?;
    let mut report = format!(
        "generated {} {} queries for {} (seed {}) → {}\n",
        records.len(),
        profile.kind,
        profile.domain,
        profile.seed,
        output.display()
    );
    if let Some(pcap) = pcap_out {
        let written = write_query_pcap(pcap, &records)?;
        let _ = writeln!(report, "wrote {written} query packets to {}", pcap.display());
    }
    Ok(report)
}

/// Debug comparison of two strings under the resolved hashing config:
/// per-slot digests and scores, with the global (or first) slot as the
/// headline score.
pub fn run_compare(config: &PipelineConfig, a: &str, b: &str) -> Result<(String, i32)> {
    config.validate()?;
    let hash = config.hash_config();
    let clean_a = strip_delimiters(a, &config.delimiters);
    let clean_b = strip_delimiters(b, &config.delimiters);
    let da = digest_query(&clean_a, &hash);
    let db = digest_query(&clean_b, &hash);
    let names = hash.slot_names();
    let mut out = config.echo();
    let mut headline = 0;
    for (slot, name) in names.iter().enumerate() {
        let score = compare(&da.slots[slot], &db.slots[slot]);
        if slot == 0 {
            headline = score;
        }
        let _ = writeln!(out, "slot {name}:");
        let _ = writeln!(out, "  a: {}", da.slots[slot]);
        let _ = writeln!(out, "  b: {}", db.slots[slot]);
        let _ = writeln!(out, "  score: {score}");
    }
    let _ = writeln!(out, "score: {headline}");
    Ok((out, headline))
}

/// One row of the sweep output.
struct SweepRow {
    window_size: usize,
    windows: usize,
    train_windows: usize,
    test_windows: usize,
    accuracy: f64,
    weighted_f1: f64,
    macro_f1: f64,
    aggregate_f1: f64,
    fpr: Option<f64>,
}

/// Window-size sweep: featurize → stratified 70/30 split → train →
/// evaluate for each n in [`SWEEP_WINDOW_SIZES`], writing one CSV row per
/// window size.
pub fn run_sweep(
    config: &PipelineConfig,
    input: &Path,
    output: &Path,
    suffix_file: Option<&Path>,
) -> Result<String> {
    config.validate()?;
    let mut owned = None;
    let rules = load_rules(suffix_file, &mut owned)?;
    let records = read_csv(input)?;

    let mut sweep_rows = Vec::new();
    for &n in &SWEEP_WINDOW_SIZES {
        let outcome = featurize_records(records.clone(), config, rules, n)?;
        if !outcome.labeled {
            return Err(Error::Data(
                "sweep needs labeled queries (family column)".into(),
            ));
        }
        let (dataset, _excluded) = assemble_dataset(&outcome.rows, config.task)?;
        if dataset.is_empty() {
            return Err(Error::Data(format!(
                "window size {n} leaves no usable windows"
            )));
        }
        let (train_set, test_set) = stratified_split(&dataset, 0.7, config.seed)?;
        let meta = FeatureMetadata::new(n, &config.hash_config());
        let model = train_forest(&train_set, &config.forest, config.seed, &meta)?;
        let mut true_labels = Vec::with_capacity(test_set.len());
        let mut predicted = Vec::with_capacity(test_set.len());
        for (x, &t) in test_set.features.iter().zip(&test_set.labels) {
            let p = model.predict(x)?;
            true_labels.push(t);
            predicted.push(p.class_index as u32);
        }
        let metrics = crate::model::compute_metrics(
            &test_set.classes,
            &true_labels,
            &predicted,
            config.task == Task::Binary,
        )?;
        sweep_rows.push(SweepRow {
            window_size: n,
            windows: dataset.len(),
            train_windows: train_set.len(),
            test_windows: test_set.len(),
            accuracy: metrics.accuracy,
            weighted_f1: metrics.weighted_f1,
            macro_f1: metrics.macro_f1,
            aggregate_f1: metrics.aggregate_f1,
            fpr: metrics.fpr,
        });
    }

    let mut writer =
        csv::Writer::from_path(output).map_err(|e| Error::Data(format!("{}: {e}", output.display())))?;
    writer
        .write_record([
            "window_size",
            "windows",
            "train_windows",
            "test_windows",
            "accuracy",
            "weighted_f1",
            "macro_f1",
            "aggregate_f1",
            "fpr",
        ])
        .map_err(|e| Error::Data(e.to_string()))?;
    for row in &sweep_rows {
        writer
            .write_record([
                row.window_size.to_string(),
                row.windows.to_string(),
                row.train_windows.to_string(),
                row.test_windows.to_string(),
                row.accuracy.to_string(),
                row.weighted_f1.to_string(),
                row.macro_f1.to_string(),
                row.aggregate_f1.to_string(),
                row.fpr.map(|f| f.to_string()).unwrap_or_default(),
            ])
            .map_err(|e| Error::Data(e.to_string()))?;
    }
    writer.flush().map_err(|e| Error::io(output, e))?;

    let mut report = config.echo();
    let _ = writeln!(
        report,
        "swept window sizes {:?} over {} queries → {}",
        SWEEP_WINDOW_SIZES,
        records.len(),
        output.display()
    );
    for row in &sweep_rows {
        let _ = writeln!(
            report,
            "  n={:<3} windows={:<5} aggregate F1={:.4} FPR={}",
            row.window_size,
            row.windows,
            row.aggregate_f1,
            row.fpr.map(|f| format!("{f:.4}")).unwrap_or_else(|| "n/a".into())
        );
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_documented_operating_point() {
        let config = PipelineConfig::default();
        assert_eq!(config.window_size, 20);
        assert_eq!(config.effective_segments(), 2);
        assert_eq!(config.seed, 42);
        assert!(config.include_global);
        assert_eq!(config.threshold_mode, ThresholdMode::Median);
        assert_eq!(config.forest.tree_count, 100);
        config.validate().unwrap();
    }

    #[test]
    fn task_dependent_segment_default() {
        let mut config = PipelineConfig::default();
        config.task = Task::BehaviorCompound;
        assert_eq!(config.effective_segments(), 3, "behavioral default is 3");
        config.task = Task::Family;
        assert_eq!(config.effective_segments(), 2);
        // Explicit k wins over the task default.
        config.segments = Some(1);
        config.task = Task::BehaviorAction;
        assert_eq!(config.effective_segments(), 1);
    }

    #[test]
    fn validation_bounds() {
        let mut config = PipelineConfig::default();
        config.window_size = 1;
        assert!(config.validate().is_err());
        config.window_size = 1001;
        assert!(config.validate().is_err());
        config.window_size = 1000;
        config.validate().unwrap();
        config.segments = Some(4);
        assert!(config.validate().is_err());
        config.segments = Some(3);
        config.validate().unwrap();
    }

    #[test]
    fn file_config_merges_under_flags() {
        let file: FileConfig = toml::from_str(
            r#"
            window_size = 30
            task = "behavior-compound"
            seed = 7
            delimiters = ".-"

            [forest]
            tree_count = 10
            split_features = "all"

            [paths]
            input = "queries.csv"
            "#,
        )
        .unwrap();
        let mut config = PipelineConfig::default();
        file.apply(&mut config).unwrap();
        assert_eq!(config.window_size, 30);
        assert_eq!(config.task, Task::BehaviorCompound);
        assert_eq!(config.seed, 7);
        assert_eq!(config.effective_segments(), 3);
        assert_eq!(config.delimiters, ['.', '-'].into_iter().collect());
        assert_eq!(config.forest.tree_count, 10);
        assert_eq!(file.paths.input.as_deref(), Some(Path::new("queries.csv")));
        // Simulated flag override after the file.
        config.seed = 99;
        assert_eq!(config.seed, 99);
    }

    #[test]
    fn file_config_rejects_unknown_keys_and_bad_values() {
        assert!(toml::from_str::<FileConfig>("windowsize = 3").is_err());
        let file: FileConfig = toml::from_str("task = \"coarse\"").unwrap();
        let mut config = PipelineConfig::default();
        assert!(file.apply(&mut config).is_err());
    }

    #[test]
    fn echo_mentions_every_knob() {
        let config = PipelineConfig::default();
        let echo = config.echo();
        for needle in [
            "task", "window size", "segments", "include global", "threshold mode",
            "delimiters", "seed", "forest", "task default",
        ] {
            assert!(echo.contains(needle), "echo missing {needle}: {echo}");
        }
    }

    #[test]
    fn eval_mode_parsing() {
        assert_eq!("direct".parse::<EvalMode>().unwrap(), EvalMode::Direct);
        assert_eq!("two-step".parse::<EvalMode>().unwrap(), EvalMode::TwoStep);
        assert_eq!("per-file".parse::<EvalMode>().unwrap(), EvalMode::PerFile);
        assert!("triangulate".parse::<EvalMode>().is_err());
    }

    #[test]
    fn compare_identical_strings_scores_128() {
        let config = PipelineConfig::default();
        let (report, score) = run_compare(&config, "abcdef", "abcdef").unwrap();
        assert_eq!(score, 128);
        assert!(report.contains("score: 128"));
        assert!(report.contains("global"));
    }
}
