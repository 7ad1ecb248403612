//! Random Forest, implemented from first principles.
//!
//! Each tree is grown on a bootstrap resample; each split minimizes weighted
//! Gini impurity over a random subset of ⌈√D⌉ features (configurable).
//! Per-tree randomness derives only from `(training seed, tree index)`, and
//! trees are collected in index order, so training is deterministic at any
//! worker count. Trees store nodes in a flat arena (children always after
//! their parent), are built iteratively with an explicit stack, and keep
//! full class counts in their leaves so the forest can average leaf class
//! frequencies into probabilities.

use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureMetadata;
use crate::model::{Dataset, Task};

/// Current model file format version.
pub const MODEL_FORMAT_VERSION: u32 = 1;

/// How many candidate features each split draws.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplitFeatures {
    /// ⌈√D⌉ features per split (the usual Random Forest rule).
    Sqrt,
    /// All features (bagged trees).
    All,
    /// A fixed count, clamped to [1, D].
    Fixed(usize),
}

impl SplitFeatures {
    pub fn resolve(&self, feature_count: usize) -> usize {
        let raw = match self {
            SplitFeatures::Sqrt => (feature_count as f64).sqrt().ceil() as usize,
            SplitFeatures::All => feature_count,
            SplitFeatures::Fixed(m) => *m,
        };
        raw.clamp(1, feature_count.max(1))
    }
}

impl std::str::FromStr for SplitFeatures {
    type Err = Error;

    fn from_str(s: &str) -> Result<SplitFeatures> {
        match s {
            "sqrt" => Ok(SplitFeatures::Sqrt),
            "all" => Ok(SplitFeatures::All),
            other => other
                .parse::<usize>()
                .map(SplitFeatures::Fixed)
                .map_err(|_| {
                    Error::InvalidArgument(format!(
                        "bad features-per-split `{other}` (expected sqrt, all, or a count)"
                    ))
                }),
        }
    }
}

/// Forest hyperparameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub tree_count: usize,
    /// `None` = grow until pure or too small.
    pub max_depth: Option<u32>,
    pub min_samples_leaf: usize,
    pub split_features: SplitFeatures,
    pub bootstrap: bool,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            tree_count: 100,
            max_depth: None,
            min_samples_leaf: 1,
            split_features: SplitFeatures::Sqrt,
            bootstrap: true,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        if self.tree_count == 0 {
            return Err(Error::InvalidArgument("tree count must be ≥ 1".into()));
        }
        if self.min_samples_leaf == 0 {
            return Err(Error::InvalidArgument(
                "min samples per leaf must be ≥ 1".into(),
            ));
        }
        if self.split_features == SplitFeatures::Fixed(0) {
            return Err(Error::InvalidArgument(
                "features per split must be ≥ 1".into(),
            ));
        }
        Ok(())
    }
}

/// One tree node. Children always have larger arena indices than their
/// parent, which makes loaded trees trivially acyclic.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Node {
    Split {
        feature: u32,
        /// Samples with `x[feature] <= threshold` go left.
        threshold: f64,
        left: u32,
        right: u32,
    },
    Leaf {
        /// Training-sample count per class (bootstrap multiplicity counted).
        counts: Vec<u32>,
    },
}

/// A decision tree as a flat node arena, root at index 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    /// Walk the tree and return the reached leaf's class counts.
    fn leaf_counts<'a>(&'a self, x: &[f64]) -> &'a [u32] {
        let mut index = 0usize;
        loop {
            match &self.nodes[index] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    index = if x[*feature as usize] <= *threshold {
                        *left as usize
                    } else {
                        *right as usize
                    };
                }
                Node::Leaf { counts } => return counts,
            }
        }
    }
}

/// A trained Random Forest together with everything needed to apply it
/// safely: task, class list, hyperparameters, featurization metadata, seed.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ForestModel {
    pub task: Task,
    pub classes: Vec<String>,
    pub hyperparams: Hyperparams,
    pub feature_metadata: FeatureMetadata,
    pub seed: u64,
    pub trees: Vec<Tree>,
}

/// Result of classifying one feature vector.
#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    /// Index into the model's class list.
    pub class_index: usize,
    /// Mean of per-tree leaf class frequencies; sums to 1.
    pub probabilities: Vec<f64>,
}

impl ForestModel {
    pub fn feature_count(&self) -> usize {
        self.feature_metadata.feature_count
    }

    /// Name of the predicted class.
    pub fn class_name(&self, prediction: &Prediction) -> &str {
        &self.classes[prediction.class_index]
    }

    /// Classify one feature vector. Probabilities are the mean of per-tree
    /// leaf class frequencies; the class is the argmax, ties broken by
    /// class-list order.
    pub fn predict(&self, x: &[f64]) -> Result<Prediction> {
        if x.len() != self.feature_count() {
            return Err(Error::InvalidArgument(format!(
                "feature vector has {} values, model expects {}",
                x.len(),
                self.feature_count()
            )));
        }
        let k = self.classes.len();
        let mut probabilities = vec![0f64; k];
        for tree in &self.trees {
            let counts = tree.leaf_counts(x);
            let total: u64 = counts.iter().map(|&c| c as u64).sum();
            for (p, &c) in probabilities.iter_mut().zip(counts) {
                *p += c as f64 / total as f64;
            }
        }
        let trees = self.trees.len() as f64;
        for p in &mut probabilities {
            *p /= trees;
        }
        let mut class_index = 0usize;
        for (i, &p) in probabilities.iter().enumerate() {
            if p > probabilities[class_index] {
                class_index = i;
            }
        }
        Ok(Prediction {
            class_index,
            probabilities,
        })
    }

    /// Structural sanity of every tree against this model's dimensions.
    fn validate(&self) -> std::result::Result<(), String> {
        let d = self.feature_count();
        let k = self.classes.len();
        if k == 0 {
            return Err("empty class list".into());
        }
        if self.trees.is_empty() {
            return Err("no trees".into());
        }
        for (t, tree) in self.trees.iter().enumerate() {
            if tree.nodes.is_empty() {
                return Err(format!("tree {t} has no nodes"));
            }
            for (i, node) in tree.nodes.iter().enumerate() {
                match node {
                    Node::Split {
                        feature,
                        threshold,
                        left,
                        right,
                    } => {
                        if *feature as usize >= d {
                            return Err(format!(
                                "tree {t} node {i}: feature {feature} out of range (D={d})"
                            ));
                        }
                        if !threshold.is_finite() {
                            return Err(format!("tree {t} node {i}: non-finite threshold"));
                        }
                        for child in [left, right] {
                            if *child as usize <= i || *child as usize >= tree.nodes.len() {
                                return Err(format!(
                                    "tree {t} node {i}: child {child} out of order or range"
                                ));
                            }
                        }
                    }
                    Node::Leaf { counts } => {
                        if counts.len() != k {
                            return Err(format!(
                                "tree {t} node {i}: leaf has {} counts, {k} classes",
                                counts.len()
                            ));
                        }
                        if counts.iter().all(|&c| c == 0) {
                            return Err(format!("tree {t} node {i}: empty leaf"));
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

fn tree_rng(seed: u64, tree_index: u64) -> ChaCha8Rng {
    let mut bytes = [0u8; 32];
    bytes[..8].copy_from_slice(&seed.to_le_bytes());
    bytes[8..16].copy_from_slice(&tree_index.to_le_bytes());
    bytes[16] = b't';
    ChaCha8Rng::from_seed(bytes)
}

fn gini(counts: &[u64], n: usize) -> f64 {
    let n = n as f64;
    1.0 - counts
        .iter()
        .map(|&c| {
            let f = c as f64 / n;
            f * f
        })
        .sum::<f64>()
}

struct NodeJob {
    node: usize,
    samples: Vec<u32>,
    depth: u32,
}

fn build_tree(dataset: &Dataset, hp: &Hyperparams, mtry: usize, mut rng: ChaCha8Rng) -> Tree {
    let m = dataset.len();
    let d = dataset.feature_count();
    let k = dataset.classes.len();

    let root_samples: Vec<u32> = if hp.bootstrap {
        (0..m).map(|_| rng.random_range(0..m) as u32).collect()
    } else {
        (0..m as u32).collect()
    };

    let mut nodes: Vec<Node> = vec![Node::Leaf { counts: vec![] }];
    let mut stack = vec![NodeJob {
        node: 0,
        samples: root_samples,
        depth: 0,
    }];
    let mut feature_pool: Vec<u32> = (0..d as u32).collect();
    let mut pairs: Vec<(f64, u32)> = Vec::with_capacity(m);

    while let Some(job) = stack.pop() {
        let samples = job.samples;
        let node_m = samples.len();
        let mut counts = vec![0u64; k];
        for &s in &samples {
            counts[dataset.labels[s as usize] as usize] += 1;
        }
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        let depth_capped = hp.max_depth.is_some_and(|d| job.depth >= d);
        let too_small = node_m < 2 * hp.min_samples_leaf;

        let mut best: Option<(f64, u32, f64)> = None; // (impurity, feature, threshold)
        if !(pure || depth_capped || too_small) {
            // Draw `mtry` distinct features by partial Fisher–Yates; the
            // drawn order is part of the deterministic tie-break (first
            // strictly better split wins).
            for (i, v) in feature_pool.iter_mut().enumerate() {
                *v = i as u32;
            }
            for i in 0..mtry {
                let j = rng.random_range(i..d);
                feature_pool.swap(i, j);
            }
            let mut left_counts = vec![0u64; k];
            for &feature in feature_pool.iter().take(mtry) {
                pairs.clear();
                pairs.extend(samples.iter().map(|&s| {
                    (
                        dataset.features[s as usize][feature as usize],
                        dataset.labels[s as usize],
                    )
                }));
                pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite features"));
                left_counts.fill(0);
                let mut left_n = 0usize;
                for i in 0..node_m - 1 {
                    left_counts[pairs[i].1 as usize] += 1;
                    left_n += 1;
                    if pairs[i].0 == pairs[i + 1].0 {
                        continue;
                    }
                    let right_n = node_m - left_n;
                    if left_n < hp.min_samples_leaf || right_n < hp.min_samples_leaf {
                        continue;
                    }
                    let gini_left = gini(&left_counts, left_n);
                    let right_counts: Vec<u64> = counts
                        .iter()
                        .zip(&left_counts)
                        .map(|(&t, &l)| t - l)
                        .collect();
                    let gini_right = gini(&right_counts, right_n);
                    let weighted = (left_n as f64 * gini_left + right_n as f64 * gini_right)
                        / node_m as f64;
                    if best.map_or(true, |(b, _, _)| weighted < b) {
                        best = Some((weighted, feature, pairs[i].0));
                    }
                }
            }
        }

        match best {
            None => {
                // Leaf: pure, at a stop condition, or no usable split among
                // the drawn features (e.g. all constant).
                nodes[job.node] = Node::Leaf {
                    counts: counts.iter().map(|&c| c as u32).collect(),
                };
            }
            Some((_, feature, threshold)) => {
                let mut left_samples = Vec::with_capacity(node_m);
                let mut right_samples = Vec::with_capacity(node_m);
                for &s in &samples {
                    if dataset.features[s as usize][feature as usize] <= threshold {
                        left_samples.push(s);
                    } else {
                        right_samples.push(s);
                    }
                }
                let left = nodes.len() as u32;
                nodes.push(Node::Leaf { counts: vec![] });
                let right = nodes.len() as u32;
                nodes.push(Node::Leaf { counts: vec![] });
                nodes[job.node] = Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                };
                // Push right first so the left child is processed next:
                // depth-first, left-to-right, fully deterministic.
                stack.push(NodeJob {
                    node: right as usize,
                    samples: right_samples,
                    depth: job.depth + 1,
                });
                stack.push(NodeJob {
                    node: left as usize,
                    samples: left_samples,
                    depth: job.depth + 1,
                });
            }
        }
    }
    Tree { nodes }
}

/// Train a Random Forest on an assembled dataset. Deterministic for fixed
/// `(dataset, hyperparams, seed)` regardless of how many threads rayon
/// uses, because each tree's randomness depends only on `(seed, index)`.
pub fn train_forest(
    dataset: &Dataset,
    hyperparams: &Hyperparams,
    seed: u64,
    metadata: &FeatureMetadata,
) -> Result<ForestModel> {
    hyperparams.validate()?;
    if dataset.is_empty() {
        return Err(Error::Data("cannot train on an empty dataset".into()));
    }
    let d = dataset.feature_count();
    if d != metadata.feature_count {
        return Err(Error::ConfigMismatch(format!(
            "dataset has {d} features, metadata declares {}",
            metadata.feature_count
        )));
    }
    let distinct = {
        let mut seen = vec![false; dataset.classes.len()];
        for &l in &dataset.labels {
            seen[l as usize] = true;
        }
        seen.iter().filter(|&&s| s).count()
    };
    if distinct < 2 {
        return Err(Error::Data(format!(
            "training data contains {distinct} class(es); need at least 2"
        )));
    }

    let mtry = hyperparams.split_features.resolve(d);
    let trees: Vec<Tree> = (0..hyperparams.tree_count)
        .into_par_iter()
        .map(|t| build_tree(dataset, hyperparams, mtry, tree_rng(seed, t as u64)))
        .collect();

    Ok(ForestModel {
        task: dataset.task,
        classes: dataset.classes.clone(),
        hyperparams: hyperparams.clone(),
        feature_metadata: metadata.clone(),
        seed,
        trees,
    })
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    #[serde(flatten)]
    model: ForestModel,
}

/// Serialize a model to its versioned JSON file. Identical models produce
/// identical bytes.
pub fn save_model(model: &ForestModel, path: &Path) -> Result<()> {
    let file = ModelFile {
        format_version: MODEL_FORMAT_VERSION,
        model: model.clone(),
    };
    let mut text = serde_json::to_string(&file)
        .map_err(|e| Error::Data(format!("model serialization failed: {e}")))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Load and validate a model file.
pub fn load_model(path: &Path) -> Result<ForestModel> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let corrupt = |message: String| Error::CorruptModel {
        path: path.to_path_buf(),
        message,
    };
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| corrupt(format!("not valid JSON: {e}")))?;
    let found = value
        .get("format_version")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| corrupt("missing format_version".into()))?;
    if found != MODEL_FORMAT_VERSION as u64 {
        return Err(Error::ModelVersion {
            found: found.min(u32::MAX as u64) as u32,
            supported: MODEL_FORMAT_VERSION,
        });
    }
    let file: ModelFile =
        serde_json::from_value(value).map_err(|e| corrupt(format!("bad structure: {e}")))?;
    file.model.validate().map_err(corrupt)?;
    Ok(file.model)
}
