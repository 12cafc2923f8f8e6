//! L2-regularized binary linear classifiers trained by dual coordinate
//! descent, for both flat one-vs-rest models and per-node tree models.
//!
//! The solver starts from `w = 0` and only ever applies updates of the
//! form `w <- w + delta * y_i * x_i`, so weight components of features
//! absent from a problem's instances are never touched: node classifiers
//! come out with exact zeros for every feature the node never sees, while
//! all weight vectors keep the full input dimension.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::MultiLabelDataset;
use crate::error::{Error, Result};
use crate::model::{OvrModel, TreeModel, WeightVector};
use crate::rng::{mix_seed, SplitMix64};
use crate::scalar::{cast, Scalar};
use crate::tree::LabelTree;

/// Loss function of the binary subproblems.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LossKind {
    SquaredHinge,
    Logistic,
}

impl LossKind {
    pub const fn id(self) -> u8 {
        match self {
            LossKind::SquaredHinge => 0,
            LossKind::Logistic => 1,
        }
    }

    pub const fn from_id(id: u8) -> Option<Self> {
        match id {
            0 => Some(LossKind::SquaredHinge),
            1 => Some(LossKind::Logistic),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            LossKind::SquaredHinge => "squared_hinge",
            LossKind::Logistic => "logistic",
        }
    }
}

impl std::str::FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "squared_hinge" | "squared-hinge" | "l2" => Ok(LossKind::SquaredHinge),
            "logistic" | "log" => Ok(LossKind::Logistic),
            other => Err(Error::InvalidParam(format!("unknown loss `{other}`"))),
        }
    }
}

/// Loss plus the L2 regularization weight: the objective per problem is
/// `sum_i xi(y_i w.x_i) + (lambda/2) ||w||^2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossSpec {
    pub kind: LossKind,
    pub lambda: f64,
}

impl Default for LossSpec {
    fn default() -> Self {
        LossSpec {
            kind: LossKind::SquaredHinge,
            lambda: 1.0,
        }
    }
}

impl LossSpec {
    pub fn new(kind: LossKind, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0) {
            return Err(Error::InvalidParam(format!("lambda must be positive, got {lambda}")));
        }
        Ok(LossSpec { kind, lambda })
    }
}

/// Everything a training run needs besides the data and the tree.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainConfig {
    pub loss: LossSpec,
    /// Stop when the largest projected-gradient violation of an epoch
    /// falls below this.
    pub eps: f64,
    /// Epoch cap per binary problem.
    pub max_iter: u32,
    /// Base seed; each problem derives its own stream from
    /// `(seed, node id, child ordinal)`.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            loss: LossSpec::default(),
            eps: 0.1,
            max_iter: 1000,
            seed: 0,
        }
    }
}

/// One binary subproblem: signed instances of the owning node.
#[derive(Clone, Debug)]
pub struct BinaryProblem {
    pub node_id: u32,
    pub child_ordinal: u32,
    /// Row indices into the dataset, ascending.
    pub instances: Vec<u32>,
    /// `+1` / `-1`, aligned with `instances`.
    pub signs: Vec<i8>,
    pub has_positive: bool,
}

impl BinaryProblem {
    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }
}

/// Builds one binary problem per child of an internal node. The instance
/// set contains every row whose labels intersect the node's subset; the
/// sign for a child is `+1` iff the row carries at least one label of the
/// child's subset.
pub fn build_node_problems<S: Scalar>(
    tree: &LabelTree,
    node_id: u32,
    ds: &MultiLabelDataset<S>,
) -> Result<Vec<BinaryProblem>> {
    let node = tree.node(node_id);
    if node.is_leaf() {
        return Err(Error::InvalidParam(format!("node {node_id} is a leaf")));
    }
    let instances = ds.instances_with_labels(&node.labels);
    let problems = node
        .children
        .iter()
        .enumerate()
        .map(|(ordinal, &child)| {
            let child_labels = &tree.node(child).labels;
            let mut signs = Vec::with_capacity(instances.len());
            let mut has_positive = false;
            for &row in &instances {
                let positive = intersects(ds.labels(row as usize), child_labels);
                has_positive |= positive;
                signs.push(if positive { 1 } else { -1 });
            }
            BinaryProblem {
                node_id,
                child_ordinal: ordinal as u32,
                instances: instances.clone(),
                signs,
                has_positive,
            }
        })
        .collect();
    Ok(problems)
}

fn intersects(sorted_a: &[u32], sorted_b: &[u32]) -> bool {
    let (mut i, mut j) = (0, 0);
    while i < sorted_a.len() && j < sorted_b.len() {
        match sorted_a[i].cmp(&sorted_b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => return true,
        }
    }
    false
}

/// Convergence report for a single binary problem.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SolveStatus {
    pub converged: bool,
    pub epochs: u32,
}

/// Training events worth surfacing: degenerate problems and epoch-capped
/// solves, keyed by `(node id, child ordinal)`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TrainWarnings {
    pub no_positives: Vec<(u32, u32)>,
    pub unconverged: Vec<(u32, u32)>,
}

impl TrainWarnings {
    pub fn is_empty(&self) -> bool {
        self.no_positives.is_empty() && self.unconverged.is_empty()
    }

    fn merge(&mut self, other: TrainWarnings) {
        self.no_positives.extend(other.no_positives);
        self.unconverged.extend(other.unconverged);
    }
}

/// Solves one binary problem, returning the weights stored sparsely over
/// the original feature space.
pub fn solve_binary<S: Scalar>(
    problem: &BinaryProblem,
    ds: &MultiLabelDataset<S>,
    loss: LossSpec,
    eps: f64,
    max_iter: u32,
) -> Result<(WeightVector<S>, SolveStatus)> {
    if problem.is_empty() {
        return Err(Error::InvalidParam("empty binary problem".into()));
    }
    let used = ds.used_features(&problem.instances);
    let mut scratch = vec![S::zero(); ds.n_features() as usize];
    let seed = mix_seed(0, &[problem.node_id as u64, problem.child_ordinal as u64]);
    let status = dcd_solve(problem, ds, loss, eps, max_iter, seed, &mut scratch);
    let weights = extract_weights(&scratch, used.as_slice());
    Ok((weights, status))
}

/// Dual coordinate descent over `w` held in the dense `scratch` buffer.
/// Only positions touched by the problem's instances are written; the
/// caller resets them afterwards.
fn dcd_solve<S: Scalar>(
    problem: &BinaryProblem,
    ds: &MultiLabelDataset<S>,
    loss: LossSpec,
    eps: f64,
    max_iter: u32,
    seed: u64,
    w: &mut [S],
) -> SolveStatus {
    match loss.kind {
        LossKind::SquaredHinge => dcd_squared_hinge(problem, ds, loss.lambda, eps, max_iter, seed, w),
        LossKind::Logistic => dcd_logistic(problem, ds, loss.lambda, eps, max_iter, seed, w),
    }
}

/// Dual of the squared-hinge problem: minimize
/// `0.5 a'Qa - e'a` with `Q_ii = x_i.x_i + lambda/2`, `a >= 0`.
fn dcd_squared_hinge<S: Scalar>(
    problem: &BinaryProblem,
    ds: &MultiLabelDataset<S>,
    lambda: f64,
    eps: f64,
    max_iter: u32,
    seed: u64,
    w: &mut [S],
) -> SolveStatus {
    let ell = problem.len();
    let diag: S = cast(lambda / 2.0);
    let eps: S = cast(eps);
    let mut alpha = vec![S::zero(); ell];
    let qii: Vec<S> = problem
        .instances
        .iter()
        .map(|&r| ds.row(r as usize).squared_norm() + diag)
        .collect();
    let signs: Vec<S> = problem.signs.iter().map(|&s| cast(s as f64)).collect();

    let mut rng = SplitMix64::new(seed);
    let mut order: Vec<u32> = (0..ell as u32).collect();
    let tiny: S = cast(1e-12);

    for epoch in 1..=max_iter {
        rng.shuffle(&mut order);
        let mut max_violation = S::zero();
        for &p in &order {
            let p = p as usize;
            let row = ds.row(problem.instances[p] as usize);
            let y = signs[p];
            let g = y * row.dot_dense(w) - S::one() + diag * alpha[p];
            let pg = if alpha[p] == S::zero() { g.min(S::zero()) } else { g };
            if pg.abs() > max_violation {
                max_violation = pg.abs();
            }
            if pg.abs() > tiny {
                let next = (alpha[p] - g / qii[p]).max(S::zero());
                let delta = (next - alpha[p]) * y;
                alpha[p] = next;
                for &(f, v) in row.entries() {
                    w[f as usize] += delta * v;
                }
            }
        }
        if max_violation < eps {
            return SolveStatus {
                converged: true,
                epochs: epoch,
            };
        }
    }
    SolveStatus {
        converged: false,
        epochs: max_iter,
    }
}

/// Dual of the logistic problem: minimize
/// `0.5 a'Qa + sum_i [a_i ln a_i + (C - a_i) ln(C - a_i)]` over `0 < a < C`
/// with `C = 1/lambda`. Each coordinate subproblem is solved by a
/// safeguarded Newton iteration on its strictly increasing derivative.
fn dcd_logistic<S: Scalar>(
    problem: &BinaryProblem,
    ds: &MultiLabelDataset<S>,
    lambda: f64,
    eps: f64,
    max_iter: u32,
    seed: u64,
    w: &mut [S],
) -> SolveStatus {
    let ell = problem.len();
    let c: S = cast(1.0 / lambda);
    let eps: S = cast(eps);
    let init = (c * cast(1e-3)).min(cast(1e-8));
    let mut alpha = vec![init; ell];
    let qii: Vec<S> = problem
        .instances
        .iter()
        .map(|&r| ds.row(r as usize).squared_norm())
        .collect();
    let signs: Vec<S> = problem.signs.iter().map(|&s| cast(s as f64)).collect();

    // w = sum_i alpha_i y_i x_i for the interior starting point
    for p in 0..ell {
        let row = ds.row(problem.instances[p] as usize);
        let ay = alpha[p] * signs[p];
        for &(f, v) in row.entries() {
            w[f as usize] += ay * v;
        }
    }

    let mut rng = SplitMix64::new(seed);
    let mut order: Vec<u32> = (0..ell as u32).collect();
    let ftol = cast::<S>(1e-10).max(S::epsilon() * cast(100.0));

    for epoch in 1..=max_iter {
        rng.shuffle(&mut order);
        let mut max_violation = S::zero();
        for &p in &order {
            let p = p as usize;
            let row = ds.row(problem.instances[p] as usize);
            let y = signs[p];
            let z = y * row.dot_dense(w);
            let violation = (z + (alpha[p] / (c - alpha[p])).ln()).abs();
            if violation > max_violation {
                max_violation = violation;
            }

            // minimize over a in (0, C):
            //   phi(a) = 0.5 Qii a^2 + b a + a ln a + (C - a) ln(C - a)
            // with b chosen so phi'(alpha_p) equals the dual gradient.
            let b = z - qii[p] * alpha[p];
            let mut lo = S::zero();
            let mut hi = c;
            let mut a = alpha[p];
            for _ in 0..60 {
                let fval = qii[p] * a + b + (a / (c - a)).ln();
                if fval.abs() <= ftol {
                    break;
                }
                if fval > S::zero() {
                    hi = a;
                } else {
                    lo = a;
                }
                let fpp = qii[p] + c / (a * (c - a));
                let mut next = a - fval / fpp;
                if !(next > lo && next < hi) {
                    next = (lo + hi) / cast(2.0);
                }
                if next == a {
                    break;
                }
                a = next;
            }

            let delta = (a - alpha[p]) * y;
            if delta != S::zero() {
                alpha[p] = a;
                for &(f, v) in row.entries() {
                    w[f as usize] += delta * v;
                }
            }
        }
        if max_violation < eps {
            return SolveStatus {
                converged: true,
                epochs: epoch,
            };
        }
    }
    SolveStatus {
        converged: false,
        epochs: max_iter,
    }
}

/// Collects the nonzero weights over the problem's used features and
/// resets those scratch positions to zero for the next solve.
fn extract_weights<S: Scalar>(scratch: &[S], used: &[u32]) -> WeightVector<S> {
    WeightVector::from_sorted(
        used.iter()
            .filter_map(|&f| {
                let v = scratch[f as usize];
                (v != S::zero()).then_some((f, v))
            })
            .collect(),
    )
}

fn reset_scratch<S: Scalar>(scratch: &mut [S], used: &[u32]) {
    for &f in used {
        scratch[f as usize] = S::zero();
    }
}

/// Primal objective `sum_i xi(y_i w.x_i) + (lambda/2) ||w||^2`.
pub fn primal_objective<S: Scalar>(
    problem: &BinaryProblem,
    ds: &MultiLabelDataset<S>,
    loss: LossSpec,
    weights: &WeightVector<S>,
) -> f64 {
    let lambda = loss.lambda;
    let mut total = 0.0;
    for (p, &r) in problem.instances.iter().enumerate() {
        let z = problem.signs[p] as f64
            * weights.dot(ds.row(r as usize)).to_f64().unwrap();
        total += match loss.kind {
            LossKind::SquaredHinge => {
                let m = (1.0 - z).max(0.0);
                m * m
            }
            LossKind::Logistic => {
                // ln(1 + exp(-z)) without overflow
                if z > 0.0 {
                    (-z).exp().ln_1p()
                } else {
                    -z + z.exp().ln_1p()
                }
            }
        };
    }
    let norm2: f64 = weights
        .entries()
        .iter()
        .map(|&(_, v)| {
            let v = v.to_f64().unwrap();
            v * v
        })
        .sum();
    total + lambda / 2.0 * norm2
}

/// Trains one classifier per label on the full instance set: the sign for
/// label `j` is `+1` iff the row carries `j`. Rows with empty label sets
/// participate as negatives.
pub fn train_ovr<S: Scalar>(
    ds: &MultiLabelDataset<S>,
    cfg: &TrainConfig,
) -> Result<(OvrModel<S>, TrainWarnings)> {
    let ell = ds.n_instances();
    if ell == 0 {
        return Err(Error::Data("cannot train on an empty dataset".into()));
    }
    let instances: Vec<u32> = (0..ell as u32).collect();
    let used = ds.used_features(&instances);

    let results: Vec<(WeightVector<S>, BinaryProblem, SolveStatus)> = (0..ds.n_labels())
        .into_par_iter()
        .map_init(
            || vec![S::zero(); ds.n_features() as usize],
            |scratch, label| {
                let mut signs = vec![-1i8; ell];
                for &r in ds.instances_with_label(label) {
                    signs[r as usize] = 1;
                }
                let problem = BinaryProblem {
                    node_id: 0,
                    child_ordinal: label,
                    instances: instances.clone(),
                    signs,
                    has_positive: !ds.instances_with_label(label).is_empty(),
                };
                let seed = mix_seed(cfg.seed, &[0, label as u64]);
                let status = dcd_solve(&problem, ds, cfg.loss, cfg.eps, cfg.max_iter, seed, scratch);
                let weights = extract_weights(scratch, used.as_slice());
                reset_scratch(scratch, used.as_slice());
                (weights, problem, status)
            },
        )
        .collect();

    let mut warnings = TrainWarnings::default();
    let mut classifiers = Vec::with_capacity(results.len());
    for (weights, problem, status) in results {
        if !problem.has_positive {
            warnings.no_positives.push((0, problem.child_ordinal));
        }
        if !status.converged {
            warnings.unconverged.push((0, problem.child_ordinal));
        }
        classifiers.push(weights);
    }

    Ok((
        OvrModel {
            n_features: ds.n_features(),
            n_labels: ds.n_labels(),
            loss: cfg.loss,
            classifiers,
        },
        warnings,
    ))
}

/// Trains the per-node classifiers of a label tree. Nodes are independent
/// and solved in parallel; the result is identical to a sequential run.
pub fn train_tree<S: Scalar>(
    ds: &MultiLabelDataset<S>,
    tree: &LabelTree,
    cfg: &TrainConfig,
) -> Result<(TreeModel<S>, TrainWarnings)> {
    if ds.n_labels() != tree.n_labels {
        return Err(Error::Data(format!(
            "tree built for {} labels, dataset has {}",
            tree.n_labels,
            ds.n_labels()
        )));
    }
    let internal: Vec<u32> = tree.internal_nodes().map(|n| n.id).collect();
    let per_node: Vec<(u32, Vec<WeightVector<S>>, TrainWarnings)> = internal
        .par_iter()
        .map_init(
            || vec![S::zero(); ds.n_features() as usize],
            |scratch, &node_id| {
                let problems = build_node_problems(tree, node_id, ds).expect("internal node");
                let node = tree.node(node_id);
                let rows = ds.instances_with_labels(&node.labels);
                let used = ds.used_features(&rows);
                let mut warnings = TrainWarnings::default();
                let mut weights = Vec::with_capacity(problems.len());
                for problem in &problems {
                    if problem.is_empty() {
                        // node with no training rows: zero classifiers
                        weights.push(WeightVector::from_sorted(Vec::new()));
                        warnings.no_positives.push((node_id, problem.child_ordinal));
                        continue;
                    }
                    if !problem.has_positive {
                        warnings.no_positives.push((node_id, problem.child_ordinal));
                    }
                    let seed = mix_seed(cfg.seed, &[node_id as u64, problem.child_ordinal as u64]);
                    let status =
                        dcd_solve(problem, ds, cfg.loss, cfg.eps, cfg.max_iter, seed, scratch);
                    if !status.converged {
                        warnings.unconverged.push((node_id, problem.child_ordinal));
                    }
                    weights.push(extract_weights(scratch, used.as_slice()));
                    reset_scratch(scratch, used.as_slice());
                }
                (node_id, weights, warnings)
            },
        )
        .collect();

    let mut warnings = TrainWarnings::default();
    let mut node_classifiers = vec![Vec::new(); tree.n_nodes()];
    for (node_id, weights, w) in per_node {
        node_classifiers[node_id as usize] = weights;
        warnings.merge(w);
    }

    Ok((
        TreeModel {
            n_features: ds.n_features(),
            n_labels: ds.n_labels(),
            loss: cfg.loss,
            tree: tree.clone(),
            node_classifiers,
        },
        warnings,
    ))
}
