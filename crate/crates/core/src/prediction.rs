//! Success prediction from early tie-strength subvectors: a from-scratch
//! random forest (Gini, axis-aligned splits), a frequency-weighted random
//! baseline, repeated stratified cross-validation, and P/R/F1 scoring.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{PipelineError, Result};
use crate::stats::{paired_t_test, PairedTResult};
use crate::trajectories::{InnovationRecord, Label};

/// Deterministic sub-seed derivation (splitmix64 step).
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master
        .wrapping_add(0x9e3779b97f4a7c15u64.wrapping_mul(index.wrapping_add(1)));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

#[derive(Debug, Clone)]
pub struct DatasetItem {
    pub term: String,
    pub features: Vec<f64>,
    /// true = successful.
    pub label: bool,
}

#[derive(Debug, Clone)]
pub struct PredictionDataset {
    pub items: Vec<DatasetItem>,
    pub k: usize,
    /// Successful / unsuccessful records dropped for trajectories shorter
    /// than k months.
    pub dropped_short: usize,
}

impl PredictionDataset {
    pub fn n_positive(&self) -> usize {
        self.items.iter().filter(|i| i.label).count()
    }
}

/// Features are the first `k` entries of the tie-strength trajectory;
/// excluded-middle records are dropped, short trajectories are dropped
/// and counted.
pub fn build_dataset(records: &[InnovationRecord], k: usize) -> Result<PredictionDataset> {
    build_dataset_from_rows(
        records
            .iter()
            .map(|r| (r.candidate.term.clone(), r.tie_trajectory.clone(), r.label)),
        k,
    )
}

/// Same construction from bare `(term, tie trajectory, label)` rows, e.g.
/// read back from stage artifacts.
pub fn build_dataset_from_rows(
    rows: impl IntoIterator<Item = (String, Vec<f64>, Label)>,
    k: usize,
) -> Result<PredictionDataset> {
    assert!(k >= 1);
    let mut items = Vec::new();
    let mut dropped_short = 0usize;
    for (term, trajectory, label) in rows {
        let label = match label {
            Label::Successful => true,
            Label::Unsuccessful => false,
            Label::ExcludedMiddle => continue,
        };
        if trajectory.len() < k {
            dropped_short += 1;
            continue;
        }
        items.push(DatasetItem {
            term,
            features: trajectory[..k].to_vec(),
            label,
        });
    }
    if items.len() < 20 {
        return Err(PipelineError::SmallData {
            got: items.len(),
            required: 20,
        });
    }
    Ok(PredictionDataset {
        items,
        k,
        dropped_short,
    })
}

#[derive(Debug, Clone)]
pub struct ForestParams {
    pub n_trees: usize,
    /// Features considered per split; defaults to ceil(sqrt(k)).
    pub max_features: Option<usize>,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 100,
            max_features: None,
        }
    }
}

#[derive(Debug, Clone)]
enum Node {
    Leaf { class: bool },
    Split { feature: usize, threshold: f64, left: Box<Node>, right: Box<Node> },
}

#[derive(Debug, Clone)]
pub struct ForestModel {
    trees: Vec<Node>,
    /// Vote ties break toward the class more frequent in training.
    majority_class: bool,
    pub degenerate_single_class: bool,
}

fn gini(pos: usize, total: usize) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let p = pos as f64 / total as f64;
    1.0 - p * p - (1.0 - p) * (1.0 - p)
}

struct TreeBuilder<'a> {
    x: &'a [Vec<f64>],
    y: &'a [bool],
    n_features: usize,
    max_features: usize,
    majority_class: bool,
}

impl<'a> TreeBuilder<'a> {
    fn leaf_class(&self, idx: &[usize]) -> bool {
        let pos = idx.iter().filter(|&&i| self.y[i]).count();
        let neg = idx.len() - pos;
        match pos.cmp(&neg) {
            std::cmp::Ordering::Greater => true,
            std::cmp::Ordering::Less => false,
            std::cmp::Ordering::Equal => self.majority_class,
        }
    }

    /// Best (weighted child impurity, feature, threshold) over a random
    /// feature subset; ties broken by lowest feature index, then lowest
    /// threshold. `None` when every candidate feature is constant.
    fn best_split(&self, idx: &[usize], rng: &mut ChaCha8Rng) -> Option<(usize, f64)> {
        let mut feats: Vec<usize> = sample(rng, self.n_features, self.max_features)
            .into_iter()
            .collect();
        feats.sort_unstable();

        let n = idx.len();
        let total_pos = idx.iter().filter(|&&i| self.y[i]).count();
        let mut best: Option<(f64, usize, f64)> = None;
        let mut sorted: Vec<(f64, bool)> = Vec::with_capacity(n);
        for &f in &feats {
            sorted.clear();
            sorted.extend(idx.iter().map(|&i| (self.x[i][f], self.y[i])));
            sorted.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("no NaN features"));

            let mut pos_left = 0usize;
            for s in 1..n {
                if sorted[s - 1].1 {
                    pos_left += 1;
                }
                if sorted[s].0 == sorted[s - 1].0 {
                    continue;
                }
                // Midpoint between consecutive distinct sorted values.
                let thr = 0.5 * (sorted[s - 1].0 + sorted[s].0);
                let left_n = s;
                let right_n = n - s;
                let impurity = (left_n as f64 * gini(pos_left, left_n)
                    + right_n as f64 * gini(total_pos - pos_left, right_n))
                    / n as f64;
                let candidate = (impurity, f, thr);
                let better = match best {
                    None => true,
                    Some((bi, bf, bt)) => {
                        impurity < bi - 1e-12
                            || ((impurity - bi).abs() <= 1e-12 && (f, thr) < (bf, bt))
                    }
                };
                if better {
                    best = Some(candidate);
                }
            }
        }
        best.map(|(_, f, t)| (f, t))
    }

    fn build(&self, idx: &[usize], rng: &mut ChaCha8Rng) -> Node {
        let pos = idx.iter().filter(|&&i| self.y[i]).count();
        if pos == 0 || pos == idx.len() {
            return Node::Leaf {
                class: self.y[idx[0]],
            };
        }
        let Some((feature, threshold)) = self.best_split(idx, rng) else {
            return Node::Leaf {
                class: self.leaf_class(idx),
            };
        };
        let (left_idx, right_idx): (Vec<usize>, Vec<usize>) =
            idx.iter().partition(|&&i| self.x[i][feature] <= threshold);
        if left_idx.is_empty() || right_idx.is_empty() {
            return Node::Leaf {
                class: self.leaf_class(idx),
            };
        }
        Node::Split {
            feature,
            threshold,
            left: Box::new(self.build(&left_idx, rng)),
            right: Box::new(self.build(&right_idx, rng)),
        }
    }
}

fn predict_tree(node: &Node, features: &[f64]) -> bool {
    match node {
        Node::Leaf { class } => *class,
        Node::Split { feature, threshold, left, right } => {
            if features[*feature] <= *threshold {
                predict_tree(left, features)
            } else {
                predict_tree(right, features)
            }
        }
    }
}

/// Train a forest of Gini trees on bootstrap samples; deterministic per
/// seed regardless of thread count.
pub fn train_forest(
    x: &[Vec<f64>],
    y: &[bool],
    params: &ForestParams,
    seed: u64,
) -> Result<ForestModel> {
    if x.is_empty() || x.len() != y.len() {
        return Err(PipelineError::invalid("training set empty or misaligned"));
    }
    let n_features = x[0].len();
    let pos = y.iter().filter(|&&l| l).count();
    let majority_class = pos * 2 >= y.len();
    let degenerate = pos == 0 || pos == y.len();
    let max_features = params
        .max_features
        .unwrap_or_else(|| (n_features as f64).sqrt().ceil() as usize)
        .clamp(1, n_features);
    let builder = TreeBuilder {
        x,
        y,
        n_features,
        max_features,
        majority_class,
    };
    let n = x.len();
    let trees: Vec<Node> = (0..params.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, t as u64));
            let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            builder.build(&idx, &mut rng)
        })
        .collect();
    Ok(ForestModel {
        trees,
        majority_class,
        degenerate_single_class: degenerate,
    })
}

impl ForestModel {
    pub fn predict_one(&self, features: &[f64]) -> bool {
        let pos = self
            .trees
            .iter()
            .filter(|t| predict_tree(t, features))
            .count();
        let neg = self.trees.len() - pos;
        match pos.cmp(&neg) {
            std::cmp::Ordering::Greater => true,
            std::cmp::Ordering::Less => false,
            std::cmp::Ordering::Equal => self.majority_class,
        }
    }

    pub fn predict(&self, x: &[Vec<f64>]) -> Vec<bool> {
        x.iter().map(|f| self.predict_one(f)).collect()
    }
}

/// Assign each test item "successful" with the training frequency of the
/// successful class.
pub fn weighted_baseline(train_labels: &[bool], n_test: usize, seed: u64) -> Vec<bool> {
    let p = if train_labels.is_empty() {
        0.5
    } else {
        train_labels.iter().filter(|&&l| l).count() as f64 / train_labels.len() as f64
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n_test).map(|_| rng.random::<f64>() < p).collect()
}

/// Precision, recall and F1 for the positive class; 0 on empty
/// denominators.
pub fn prf1(predictions: &[bool], gold: &[bool]) -> (f64, f64, f64) {
    assert_eq!(predictions.len(), gold.len());
    let (mut tp, mut fp, mut fne) = (0usize, 0usize, 0usize);
    for (&p, &g) in predictions.iter().zip(gold.iter()) {
        match (p, g) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fne += 1,
            (false, false) => {}
        }
    }
    let precision = if tp + fp == 0 { 0.0 } else { tp as f64 / (tp + fp) as f64 };
    let recall = if tp + fne == 0 { 0.0 } else { tp as f64 / (tp + fne) as f64 };
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    (precision, recall, f1)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunScores {
    pub model: Scores,
    pub baseline: Scores,
}

#[derive(Debug, Clone)]
pub struct CVReport {
    pub k: usize,
    pub runs: Vec<RunScores>,
    pub mean_model: Scores,
    pub mean_baseline: Scores,
    /// Paired t over per-run F1; `None` when differences have zero
    /// variance.
    pub paired_t: Option<PairedTResult>,
    pub redraws: usize,
}

fn mean_scores(runs: &[RunScores], pick: impl Fn(&RunScores) -> Scores) -> Scores {
    let n = runs.len() as f64;
    let mut acc = Scores { precision: 0.0, recall: 0.0, f1: 0.0 };
    for r in runs {
        let s = pick(r);
        acc.precision += s.precision;
        acc.recall += s.recall;
        acc.f1 += s.f1;
    }
    Scores {
        precision: acc.precision / n,
        recall: acc.recall / n,
        f1: acc.f1 / n,
    }
}

/// Stratified train/test split of item indices.
fn stratified_split(
    labels: &[bool],
    train_fraction: f64,
    rng: &mut ChaCha8Rng,
) -> (Vec<usize>, Vec<usize>) {
    let mut train = Vec::new();
    let mut test = Vec::new();
    for class in [true, false] {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        // Fisher-Yates with the run rng.
        for i in (1..members.len()).rev() {
            let j = rng.random_range(0..=i);
            members.swap(i, j);
        }
        let n_train = (train_fraction * members.len() as f64).round() as usize;
        let n_train = n_train.min(members.len());
        train.extend_from_slice(&members[..n_train]);
        test.extend_from_slice(&members[n_train..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    (train, test)
}

const MAX_REDRAWS: usize = 20;

/// Repeated stratified cross-validation: each run draws a fresh split
/// from a run-specific seed, trains the forest, and scores model and
/// baseline on the same test set. Deterministic per master seed and
/// independent of worker count.
pub fn cross_validate(
    dataset: &PredictionDataset,
    params: &ForestParams,
    runs: usize,
    train_fraction: f64,
    master_seed: u64,
) -> Result<CVReport> {
    if !(0.0..1.0).contains(&train_fraction) || train_fraction <= 0.0 {
        return Err(PipelineError::invalid("train_fraction must be in (0, 1)"));
    }
    let labels: Vec<bool> = dataset.items.iter().map(|i| i.label).collect();
    let x: Vec<Vec<f64>> = dataset.items.iter().map(|i| i.features.clone()).collect();

    let results: Vec<Result<(RunScores, usize)>> = (0..runs)
        .into_par_iter()
        .map(|run| {
            let run_seed = derive_seed(master_seed, run as u64);
            let mut redraws = 0usize;
            let (train_idx, test_idx) = loop {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(run_seed, redraws as u64));
                let (train, test) = stratified_split(&labels, train_fraction, &mut rng);
                let ok = !test.is_empty() && test.iter().any(|&i| labels[i]);
                if ok {
                    break (train, test);
                }
                redraws += 1;
                if redraws > MAX_REDRAWS {
                    return Err(PipelineError::invalid(
                        "could not draw a test split containing the positive class",
                    ));
                }
            };
            let train_x: Vec<Vec<f64>> = train_idx.iter().map(|&i| x[i].clone()).collect();
            let train_y: Vec<bool> = train_idx.iter().map(|&i| labels[i]).collect();
            let test_x: Vec<Vec<f64>> = test_idx.iter().map(|&i| x[i].clone()).collect();
            let test_y: Vec<bool> = test_idx.iter().map(|&i| labels[i]).collect();

            let forest = train_forest(&train_x, &train_y, params, derive_seed(run_seed, 1_000_003))?;
            let model_pred = forest.predict(&test_x);
            let base_pred =
                weighted_baseline(&train_y, test_y.len(), derive_seed(run_seed, 2_000_003));

            let (mp, mr, mf) = prf1(&model_pred, &test_y);
            let (bp, br, bf) = prf1(&base_pred, &test_y);
            Ok((
                RunScores {
                    model: Scores { precision: mp, recall: mr, f1: mf },
                    baseline: Scores { precision: bp, recall: br, f1: bf },
                },
                redraws,
            ))
        })
        .collect();

    let mut run_scores = Vec::with_capacity(runs);
    let mut redraws = 0usize;
    for r in results {
        let (s, rd) = r?;
        run_scores.push(s);
        redraws += rd;
    }

    let model_f1: Vec<f64> = run_scores.iter().map(|r| r.model.f1).collect();
    let base_f1: Vec<f64> = run_scores.iter().map(|r| r.baseline.f1).collect();
    let paired = if run_scores.len() >= 2 {
        paired_t_test(&model_f1, &base_f1)?
    } else {
        None
    };

    Ok(CVReport {
        k: dataset.k,
        mean_model: mean_scores(&run_scores, |r| r.model),
        mean_baseline: mean_scores(&run_scores, |r| r.baseline),
        paired_t: paired,
        runs: run_scores,
        redraws,
    })
}
