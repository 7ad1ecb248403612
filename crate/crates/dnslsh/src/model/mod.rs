//! Classification: label taxonomy, dataset assembly, stratified splitting,
//! Random Forest training/prediction (see [`forest`]), evaluation metrics,
//! and the two-step detect-then-identify pipeline.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{BinaryLabel, FeatureRow};
use crate::ingest::{Behavior, LEGITIMATE};

pub mod forest;

pub use forest::{
    load_model, save_model, train_forest, ForestModel, Hyperparams, Prediction, SplitFeatures,
    Tree, MODEL_FORMAT_VERSION,
};

/// Known malware families, in lexicographic order. Dataset assembly accepts
/// any family string (synthetic corpora introduce their own), so this list
/// is documentation plus the source of display spellings.
pub const FAMILIES: [&str; 7] = [
    "dnscat2",
    "iodine",
    "roguerobin-net",
    "roguerobin-ps",
    "saitama",
    "symbiote",
    "symbiote-dnscat2",
];

/// Canonical display spelling of a family label, used in compound class
/// names such as `Iodine_Download`.
pub fn display_family(family: &str) -> String {
    match family {
        "dnscat2" => "DNSCat2".into(),
        "iodine" => "Iodine".into(),
        "roguerobin-net" => "RogueRobin-NET".into(),
        "roguerobin-ps" => "RogueRobin-PS".into(),
        "saitama" => "Saitama".into(),
        "symbiote" => "Symbiote".into(),
        "symbiote-dnscat2" => "Symbiote-DNSCat2".into(),
        "synthetic" => "Synthetic".into(),
        LEGITIMATE => "Legitimate".into(),
        other => {
            // Fallback for unlisted families: capitalize the first letter.
            let mut chars = other.chars();
            match chars.next() {
                Some(c) => c.to_uppercase().chain(chars).collect(),
                None => String::new(),
            }
        }
    }
}

/// Classification task.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    /// legitimate vs malicious.
    Binary,
    /// Malware family (or legitimate).
    Family,
    /// `Family_Behavior` compound classes plus legitimate; handshake
    /// windows are excluded.
    BehaviorCompound,
    /// Action only: upload / download / idle / legitimate; handshake
    /// windows are excluded.
    BehaviorAction,
}

impl Task {
    pub fn as_str(&self) -> &'static str {
        match self {
            Task::Binary => "binary",
            Task::Family => "family",
            Task::BehaviorCompound => "behavior-compound",
            Task::BehaviorAction => "behavior-action",
        }
    }

    /// Behavioral tasks drop handshake windows and default to 3 segments.
    pub fn is_behavioral(&self) -> bool {
        matches!(self, Task::BehaviorCompound | Task::BehaviorAction)
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Task> {
        match s {
            "binary" => Ok(Task::Binary),
            "family" => Ok(Task::Family),
            "behavior-compound" | "behavior_compound" => Ok(Task::BehaviorCompound),
            "behavior-action" | "behavior_action" => Ok(Task::BehaviorAction),
            other => Err(Error::InvalidArgument(format!(
                "unknown task `{other}` (expected binary, family, behavior-compound \
                 or behavior-action)"
            ))),
        }
    }
}

/// Sort class names lexicographically, keeping `legitimate` last so that
/// malicious classes win argmax ties against it.
pub fn sort_classes(mut classes: Vec<String>) -> Vec<String> {
    classes.sort();
    classes.dedup();
    if let Some(pos) = classes.iter().position(|c| c == LEGITIMATE) {
        let legit = classes.remove(pos);
        classes.push(legit);
    }
    classes
}

/// A labeled feature matrix ready for training or evaluation.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub task: Task,
    /// Row-major feature matrix; all rows the same length.
    pub features: Vec<Vec<f64>>,
    /// Per row: index into `classes`.
    pub labels: Vec<u32>,
    /// Class names, lexicographic with `legitimate` last.
    pub classes: Vec<String>,
    /// Per row: (stream key, window index), for per-file breakdowns.
    pub refs: Vec<(String, usize)>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn feature_count(&self) -> usize {
        self.features.first().map(|r| r.len()).unwrap_or(0)
    }

    /// Number of samples per class, indexed like `classes`.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.classes.len()];
        for &l in &self.labels {
            counts[l as usize] += 1;
        }
        counts
    }
}

/// The class a labeled feature row belongs to under `task`, or `None` when
/// the row is excluded from the task (handshake windows on behavioral
/// tasks). Errors when a required label is missing.
pub fn task_label(row: &FeatureRow, task: Task) -> Result<Option<String>> {
    let whereabouts = || format!("window {}#{}", row.stream_key, row.window_index);
    let family = || {
        row.label_family
            .clone()
            .ok_or_else(|| Error::Data(format!("{} has no family label", whereabouts())))
    };
    match task {
        Task::Binary => {
            let b = row
                .label_binary
                .ok_or_else(|| Error::Data(format!("{} has no binary label", whereabouts())))?;
            Ok(Some(b.as_str().to_string()))
        }
        Task::Family => Ok(Some(family()?)),
        Task::BehaviorCompound | Task::BehaviorAction => {
            let family = family()?;
            if family == LEGITIMATE {
                return Ok(Some(LEGITIMATE.to_string()));
            }
            let behavior = row.label_behavior.ok_or_else(|| {
                Error::Data(format!(
                    "{} is malicious but has no behavior label (required for {task})",
                    whereabouts()
                ))
            })?;
            if behavior == Behavior::Handshake {
                return Ok(None);
            }
            Ok(Some(match task {
                Task::BehaviorCompound => {
                    format!("{}_{}", display_family(&family), behavior.display_name())
                }
                _ => behavior.as_str().to_string(),
            }))
        }
    }
}

/// Build a [`Dataset`] for `task` from labeled feature rows. Returns the
/// dataset and the number of rows excluded by the task (handshake windows).
pub fn assemble_dataset(rows: &[FeatureRow], task: Task) -> Result<(Dataset, usize)> {
    let mut kept: Vec<(&FeatureRow, String)> = Vec::with_capacity(rows.len());
    let mut excluded = 0usize;
    for row in rows {
        match task_label(row, task)? {
            Some(label) => kept.push((row, label)),
            None => excluded += 1,
        }
    }
    let width = kept.first().map(|(r, _)| r.values.len()).unwrap_or(0);
    let classes = sort_classes(kept.iter().map(|(_, l)| l.clone()).collect());
    let index: BTreeMap<&str, u32> = classes
        .iter()
        .enumerate()
        .map(|(i, c)| (c.as_str(), i as u32))
        .collect();

    let mut features = Vec::with_capacity(kept.len());
    let mut labels = Vec::with_capacity(kept.len());
    let mut refs = Vec::with_capacity(kept.len());
    for (row, label) in kept {
        if row.values.len() != width {
            return Err(Error::Data(format!(
                "window {}#{} has {} features, expected {width}",
                row.stream_key,
                row.window_index,
                row.values.len()
            )));
        }
        if let Some(bad) = row.values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Data(format!(
                "window {}#{} has a non-finite feature value {bad}",
                row.stream_key, row.window_index
            )));
        }
        features.push(row.values.clone());
        labels.push(index[label.as_str()]);
        refs.push((row.stream_key.clone(), row.window_index));
    }
    Ok((
        Dataset {
            task,
            features,
            labels,
            classes,
            refs,
        },
        excluded,
    ))
}

fn domain_rng(seed: u64, tag: u8) -> ChaCha8Rng {
    let mut bytes = [0u8; 32];
    bytes[..8].copy_from_slice(&seed.to_le_bytes());
    bytes[8] = tag;
    ChaCha8Rng::from_seed(bytes)
}

/// Split a dataset into train/test preserving per-class proportions.
/// Deterministic under a fixed seed: per class, sample order is shuffled
/// with a seeded generator and the first `round(fraction × count)` rows go
/// to the training set.
pub fn stratified_split(
    dataset: &Dataset,
    train_fraction: f64,
    seed: u64,
) -> Result<(Dataset, Dataset)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "train fraction must be in (0, 1), got {train_fraction}"
        )));
    }
    let counts = dataset.class_counts();
    if let Some(empty) = counts.iter().position(|&c| c == 0) {
        return Err(Error::Data(format!(
            "class `{}` has no samples; cannot split",
            dataset.classes[empty]
        )));
    }

    let mut rng = domain_rng(seed, b's');
    let mut train_rows: Vec<usize> = Vec::new();
    let mut test_rows: Vec<usize> = Vec::new();
    for class in 0..dataset.classes.len() {
        let mut members: Vec<usize> = (0..dataset.len())
            .filter(|&i| dataset.labels[i] as usize == class)
            .collect();
        members.shuffle(&mut rng);
        let take = (train_fraction * members.len() as f64 + 0.5).floor() as usize;
        let take = take.clamp(1, members.len());
        train_rows.extend(&members[..take]);
        test_rows.extend(&members[take..]);
    }
    // Keep original dataset order within each side so output is stable and
    // independent of class layout.
    train_rows.sort_unstable();
    test_rows.sort_unstable();

    let subset = |rows: &[usize]| Dataset {
        task: dataset.task,
        features: rows.iter().map(|&i| dataset.features[i].clone()).collect(),
        labels: rows.iter().map(|&i| dataset.labels[i]).collect(),
        classes: dataset.classes.clone(),
        refs: rows.iter().map(|&i| dataset.refs[i].clone()).collect(),
    };
    Ok((subset(&train_rows), subset(&test_rows)))
}

/// Draw `count` legitimate rows from a benign pool (seeded, without
/// replacement) to supplement a malicious-only evaluation set.
pub fn sample_benign_pool(
    pool: &[FeatureRow],
    count: usize,
    seed: u64,
) -> Result<Vec<FeatureRow>> {
    let mut benign: Vec<&FeatureRow> = pool
        .iter()
        .filter(|r| r.label_binary == Some(BinaryLabel::Legitimate))
        .collect();
    if benign.len() < count {
        return Err(Error::Data(format!(
            "benign pool holds {} legitimate windows, need {count}",
            benign.len()
        )));
    }
    let mut rng = domain_rng(seed, b'b');
    benign.shuffle(&mut rng);
    let mut sample: Vec<FeatureRow> = benign[..count].iter().map(|&r| r.clone()).collect();
    // Stable output order regardless of shuffle internals.
    sample.sort_by(|a, b| {
        (&a.stream_key, a.window_index).cmp(&(&b.stream_key, b.window_index))
    });
    Ok(sample)
}

/// Per-class precision/recall/F1 with support.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

/// Evaluation results: confusion matrix and derived scores.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Metrics {
    pub classes: Vec<String>,
    /// confusion[true][predicted].
    pub confusion: Vec<Vec<u64>>,
    pub per_class: Vec<ClassMetrics>,
    pub total: u64,
    pub accuracy: f64,
    pub weighted_f1: f64,
    /// Mean F1 over classes with nonzero support.
    pub macro_f1: f64,
    /// Headline score: malicious-positive F1 for the binary task,
    /// support-weighted F1 otherwise.
    pub aggregate_f1: f64,
    /// FP / (FP + TN) over true-legitimate rows; `None` when the evaluation
    /// set has no legitimate rows.
    pub fpr: Option<f64>,
}

/// Compute metrics from parallel true/predicted class-index slices.
pub fn compute_metrics(
    classes: &[String],
    true_labels: &[u32],
    predicted: &[u32],
    binary_headline: bool,
) -> Result<Metrics> {
    if true_labels.len() != predicted.len() {
        return Err(Error::InvalidArgument(format!(
            "{} true labels vs {} predictions",
            true_labels.len(),
            predicted.len()
        )));
    }
    if true_labels.is_empty() {
        return Err(Error::Data("cannot evaluate an empty set".into()));
    }
    let k = classes.len();
    let mut confusion = vec![vec![0u64; k]; k];
    for (&t, &p) in true_labels.iter().zip(predicted) {
        if t as usize >= k || p as usize >= k {
            return Err(Error::InvalidArgument(format!(
                "label index out of range: true {t}, predicted {p}, {k} classes"
            )));
        }
        confusion[t as usize][p as usize] += 1;
    }
    let total = true_labels.len() as u64;

    let mut per_class = Vec::with_capacity(k);
    for c in 0..k {
        let tp = confusion[c][c];
        let support: u64 = confusion[c].iter().sum();
        let predicted_c: u64 = (0..k).map(|t| confusion[t][c]).sum();
        let precision = if predicted_c == 0 {
            0.0
        } else {
            tp as f64 / predicted_c as f64
        };
        let recall = if support == 0 {
            0.0
        } else {
            tp as f64 / support as f64
        };
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        per_class.push(ClassMetrics {
            class: classes[c].clone(),
            precision,
            recall,
            f1,
            support,
        });
    }

    let trace: u64 = (0..k).map(|c| confusion[c][c]).sum();
    let accuracy = trace as f64 / total as f64;
    let weighted_f1 = per_class
        .iter()
        .map(|m| m.f1 * m.support as f64)
        .sum::<f64>()
        / total as f64;
    let supported = per_class.iter().filter(|m| m.support > 0).count();
    let macro_f1 = per_class
        .iter()
        .filter(|m| m.support > 0)
        .map(|m| m.f1)
        .sum::<f64>()
        / supported as f64;

    let aggregate_f1 = if binary_headline {
        per_class
            .iter()
            .find(|m| m.class == "malicious")
            .map(|m| m.f1)
            .unwrap_or(weighted_f1)
    } else {
        weighted_f1
    };

    let fpr = classes.iter().position(|c| c == LEGITIMATE).and_then(|l| {
        let legit_total: u64 = confusion[l].iter().sum();
        if legit_total == 0 {
            None
        } else {
            let fp = legit_total - confusion[l][l];
            Some(fp as f64 / legit_total as f64)
        }
    });

    Ok(Metrics {
        classes: classes.to_vec(),
        confusion,
        per_class,
        total,
        accuracy,
        weighted_f1,
        macro_f1,
        aggregate_f1,
        fpr,
    })
}

/// Evaluate a model on labeled feature rows under its own task. The metric
/// class list is the union of the model's classes and the labels observed
/// in the data, so families absent from training still show up as rows of
/// the confusion matrix.
pub fn evaluate(model: &ForestModel, rows: &[FeatureRow]) -> Result<Metrics> {
    let (dataset, _excluded) = assemble_dataset(rows, model.task)?;
    if dataset.is_empty() {
        return Err(Error::Data(
            "no evaluable windows (all rows excluded by the task)".into(),
        ));
    }
    let mut union: Vec<String> = model.classes.clone();
    union.extend(dataset.classes.iter().cloned());
    let union = sort_classes(union);
    let to_union: BTreeMap<&str, u32> = union
        .iter()
        .enumerate()
        .map(|(i, c)| (c.as_str(), i as u32))
        .collect();

    let mut true_labels = Vec::with_capacity(dataset.len());
    let mut predicted = Vec::with_capacity(dataset.len());
    for (x, &t) in dataset.features.iter().zip(&dataset.labels) {
        let p = model.predict(x)?;
        true_labels.push(to_union[dataset.classes[t as usize].as_str()]);
        predicted.push(to_union[model.classes[p.class_index].as_str()]);
    }
    compute_metrics(
        &union,
        &true_labels,
        &predicted,
        model.task == Task::Binary,
    )
}

/// Two-step classification of one feature vector: the family-stage model is
/// consulted only when the binary stage predicts malicious.
pub fn two_step_classify(
    binary_model: &ForestModel,
    family_model: &ForestModel,
    x: &[f64],
) -> Result<String> {
    if binary_model.task != Task::Binary {
        return Err(Error::InvalidArgument(format!(
            "first-stage model must be a binary model, got task {}",
            binary_model.task
        )));
    }
    let first = binary_model.predict(x)?;
    if binary_model.classes[first.class_index] == LEGITIMATE {
        return Ok(LEGITIMATE.to_string());
    }
    let second = family_model.predict(x)?;
    Ok(family_model.classes[second.class_index].clone())
}

/// Evaluate the two-step pipeline on labeled rows. Ground truth follows the
/// second-stage model's task (legitimate windows keep the `legitimate`
/// class).
pub fn evaluate_two_step(
    binary_model: &ForestModel,
    family_model: &ForestModel,
    rows: &[FeatureRow],
) -> Result<Metrics> {
    if binary_model.task != Task::Binary {
        return Err(Error::InvalidArgument(format!(
            "first-stage model must be a binary model, got task {}",
            binary_model.task
        )));
    }
    binary_model
        .feature_metadata
        .ensure_compatible(&family_model.feature_metadata)?;
    let (dataset, _excluded) = assemble_dataset(rows, family_model.task)?;
    if dataset.is_empty() {
        return Err(Error::Data(
            "no evaluable windows (all rows excluded by the task)".into(),
        ));
    }
    let mut union: Vec<String> = family_model.classes.clone();
    union.push(LEGITIMATE.to_string());
    union.extend(dataset.classes.iter().cloned());
    let union = sort_classes(union);
    let to_union: BTreeMap<&str, u32> = union
        .iter()
        .enumerate()
        .map(|(i, c)| (c.as_str(), i as u32))
        .collect();

    let mut true_labels = Vec::with_capacity(dataset.len());
    let mut predicted = Vec::with_capacity(dataset.len());
    for (x, &t) in dataset.features.iter().zip(&dataset.labels) {
        let label = two_step_classify(binary_model, family_model, x)?;
        true_labels.push(to_union[dataset.classes[t as usize].as_str()]);
        predicted.push(to_union[label.as_str()]);
    }
    compute_metrics(&union, &true_labels, &predicted, false)
}

impl fmt::Display for Metrics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "windows evaluated: {}", self.total)?;
        writeln!(f, "accuracy:          {:.4}", self.accuracy)?;
        writeln!(f, "weighted F1:       {:.4}", self.weighted_f1)?;
        writeln!(f, "macro F1:          {:.4}", self.macro_f1)?;
        writeln!(f, "aggregate F1:      {:.4}", self.aggregate_f1)?;
        match self.fpr {
            Some(fpr) => writeln!(f, "false positive rate: {fpr:.4}")?,
            None => writeln!(f, "false positive rate: n/a (no legitimate windows)")?,
        }

        let name_width = self
            .classes
            .iter()
            .map(|c| c.len())
            .max()
            .unwrap_or(5)
            .max(5);
        let cell = |v: u64| format!("{v:>8}");
        writeln!(f)?;
        writeln!(f, "confusion matrix (rows = true, columns = predicted):")?;
        write!(f, "  {:name_width$}", "")?;
        for c in &self.classes {
            let short: String = c.chars().take(8).collect();
            write!(f, "{short:>9}")?;
        }
        writeln!(f)?;
        for (i, c) in self.classes.iter().enumerate() {
            write!(f, "  {c:name_width$}")?;
            for v in &self.confusion[i] {
                write!(f, " {}", cell(*v))?;
            }
            writeln!(f)?;
        }

        writeln!(f)?;
        writeln!(
            f,
            "  {:name_width$}  precision  recall    f1        support",
            "class"
        )?;
        for m in &self.per_class {
            writeln!(
                f,
                "  {:name_width$}  {:<9.4}  {:<8.4}  {:<8.4}  {}",
                m.class, m.precision, m.recall, m.f1, m.support
            )?;
        }
        Ok(())
    }
}
