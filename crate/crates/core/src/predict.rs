//! Inference: beam search over tree models, top-k ranking for flat models,
//! and precision@k evaluation.

use rayon::prelude::*;

use crate::data::SparseVector;
use crate::error::{Error, Result};
use crate::model::{Model, OvrModel, TreeModel};
use crate::scalar::Scalar;

/// Ranked labels with scores, best first. Ties rank the lower label first.
#[derive(Clone, Debug, PartialEq)]
pub struct Prediction<S> {
    labels: Vec<u32>,
    scores: Vec<S>,
}

impl<S: Scalar> Prediction<S> {
    fn from_ranked(mut pairs: Vec<(u32, S)>, k: usize) -> Self {
        pairs.sort_unstable_by(|a, b| {
            b.1.partial_cmp(&a.1)
                .expect("scores are finite")
                .then(a.0.cmp(&b.0))
        });
        pairs.truncate(k);
        Prediction {
            labels: pairs.iter().map(|&(l, _)| l).collect(),
            scores: pairs.iter().map(|&(_, s)| s).collect(),
        }
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn scores(&self) -> &[S] {
        &self.scores
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, S)> + '_ {
        self.labels.iter().copied().zip(self.scores.iter().copied())
    }
}

/// `ln(sigmoid(z))`, computed without overflow.
fn log_sigmoid<S: Scalar>(z: S) -> S {
    if z >= S::zero() {
        -(-z).exp().ln_1p()
    } else {
        z - z.exp().ln_1p()
    }
}

/// Breadth-first beam search. A path's score is the sum of `ln(sigmoid)`
/// of the edge decision values from the root; the `beam_width` best nodes
/// survive per depth (leaves ride along), and the best `k` leaves found
/// are returned. With `beam_width` at least the node count this is an
/// exhaustive search over all root-to-leaf paths.
pub fn predict_tree<S: Scalar>(
    model: &TreeModel<S>,
    x: &SparseVector<S>,
    beam_width: usize,
    k: usize,
) -> Prediction<S> {
    assert!(beam_width >= 1, "beam width must be at least 1");
    let tree = &model.tree;
    let mut frontier: Vec<(u32, S)> = vec![(0, S::zero())];
    let mut next: Vec<(u32, S)> = Vec::new();

    while frontier.iter().any(|&(id, _)| !tree.node(id).is_leaf()) {
        next.clear();
        for &(id, score) in &frontier {
            let node = tree.node(id);
            if node.is_leaf() {
                next.push((id, score));
                continue;
            }
            let classifiers = &model.node_classifiers[id as usize];
            for (ordinal, &child) in node.children.iter().enumerate() {
                let edge = log_sigmoid(classifiers[ordinal].dot(x));
                next.push((child, score + edge));
            }
        }
        next.sort_unstable_by(|a, b| {
            b.1.partial_cmp(&a.1)
                .expect("scores are finite")
                .then(a.0.cmp(&b.0))
        });
        next.truncate(beam_width);
        std::mem::swap(&mut frontier, &mut next);
    }

    let leaves: Vec<(u32, S)> = frontier
        .iter()
        .map(|&(id, score)| (tree.node(id).labels[0], score))
        .collect();
    Prediction::from_ranked(leaves, k.min(model.n_labels as usize))
}

/// Ranks labels by raw decision value `w_j . x`.
pub fn predict_ovr<S: Scalar>(model: &OvrModel<S>, x: &SparseVector<S>, k: usize) -> Prediction<S> {
    let scored: Vec<(u32, S)> = model
        .classifiers
        .iter()
        .enumerate()
        .map(|(label, w)| (label as u32, w.dot(x)))
        .collect();
    Prediction::from_ranked(scored, k.min(model.n_labels as usize))
}

/// Dispatches on the model kind.
pub fn predict<S: Scalar>(
    model: &Model<S>,
    x: &SparseVector<S>,
    beam_width: usize,
    k: usize,
) -> Prediction<S> {
    match model {
        Model::Ovr(m) => predict_ovr(m, x, k),
        Model::Tree(m) => predict_tree(m, x, beam_width, k),
    }
}

/// Batch prediction, parallel over instances with per-instance determinism.
pub fn predict_batch<S: Scalar>(
    model: &Model<S>,
    rows: &[SparseVector<S>],
    beam_width: usize,
    k: usize,
) -> Vec<Prediction<S>> {
    rows.par_iter()
        .map(|x| predict(model, x, beam_width, k))
        .collect()
}

/// Mean precision@k over a test set, as a percentage: for one instance,
/// the fraction of its top-k predictions that are true labels.
pub fn precision_at_k<S: Scalar>(
    predictions: &[Prediction<S>],
    true_labels: &[Vec<u32>],
    k_values: &[usize],
) -> Result<Vec<(usize, f64)>> {
    if predictions.is_empty() {
        return Err(Error::Data("empty test set".into()));
    }
    if predictions.len() != true_labels.len() {
        return Err(Error::Data(format!(
            "{} predictions for {} label sets",
            predictions.len(),
            true_labels.len()
        )));
    }
    let mut out = Vec::with_capacity(k_values.len());
    for &k in k_values {
        if k == 0 {
            return Err(Error::InvalidParam("k must be positive".into()));
        }
        let total: f64 = predictions
            .iter()
            .zip(true_labels)
            .map(|(pred, truth)| {
                let mut sorted = truth.clone();
                sorted.sort_unstable();
                let hits = pred
                    .labels()
                    .iter()
                    .take(k)
                    .filter(|l| sorted.binary_search(l).is_ok())
                    .count();
                hits as f64 / k as f64
            })
            .sum();
        out.push((k, 100.0 * total / predictions.len() as f64));
    }
    Ok(out)
}

/// `1 / (1 + exp(-z))`, exposed for score post-processing.
pub fn sigmoid<S: Scalar>(z: S) -> S {
    let one = S::one();
    if z >= S::zero() {
        one / (one + (-z).exp())
    } else {
        let e = z.exp();
        e / (one + e)
    }
}
