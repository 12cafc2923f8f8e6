//! Executable size and cost analysis: balanced-tree non-zero counts, the
//! depth/ratio theorems, maximum feasible depth, training-cost estimates,
//! pre-training empirical size estimation, and feature-reduction statistics.
//!
//! The balanced-tree model assumes a K-ary tree of depth `d` where every
//! K-way label division multiplies the used-feature count by a ratio
//! `alpha` in `(0, 1]`. Depth `i < d-1` holds `K^i` nodes with `K`
//! children over `alpha^i * n` features; depth `d-1` holds `K^(d-1)` nodes
//! with `L / K^(d-1)` children each.

use rayon::prelude::*;
use serde::Serialize;

use crate::data::MultiLabelDataset;
use crate::error::{Error, Result};
use crate::model::{DENSE_WEIGHT_BYTES, SPARSE_ENTRY_BYTES};
use crate::scalar::Scalar;
use crate::tree::LabelTree;

/// Index-plus-value storage costs 12 bytes per entry against 8 for a plain
/// value, so empirical size ratios carry this factor.
pub const SPARSE_OVERHEAD_FACTOR: f64 = 1.5;

/// Window around `K*alpha = 1` inside which the geometric series switches
/// to its limit form.
const KALPHA_ONE_WINDOW: f64 = 1e-12;

/// Largest feasible depth of a balanced K-ary label tree over `l` labels:
/// the greatest `D` with `l >= 2 * k^(D-1)` (every deepest internal node
/// must keep at least two labels). Computed by integer search; the
/// floating closed form `floor(1 + log_k(l/2))` is exposed separately for
/// cross-checking and loses on boundary disagreements.
pub fn max_depth(l: u64, k: u64) -> Result<u32> {
    if l < 2 {
        return Err(Error::InvalidParam(format!("need at least 2 labels, got {l}")));
    }
    if k < 2 {
        return Err(Error::InvalidParam(format!("need k >= 2, got {k}")));
    }
    let l = l as u128;
    let k = k as u128;
    let mut depth = 1u32;
    let mut power = 1u128; // k^(depth-1)
    loop {
        match power.checked_mul(k) {
            Some(next) if 2 * next <= l => {
                power = next;
                depth += 1;
            }
            _ => return Ok(depth),
        }
    }
}

/// Closed form `floor(1 + log_k(l/2))`; may disagree with [`max_depth`] by
/// one step on floating boundaries.
pub fn max_depth_closed_form(l: u64, k: u64) -> u32 {
    (1.0 + (l as f64 / 2.0).ln() / (k as f64).ln()).floor() as u32
}

/// Parameters of the idealized balanced tree.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BalancedTreeParams {
    pub l: u64,
    pub k: u64,
    pub d: u32,
    pub alpha: f64,
    pub n: f64,
}

impl BalancedTreeParams {
    /// Validates `k >= 2`, `2 <= d <= D(l, k)` and `alpha` in `(0, 1]`.
    /// `alpha < 1/k` is inconsistent with a uniform balanced tree but only
    /// warned about (see [`theorem3_check`]), not rejected.
    pub fn new(l: u64, k: u64, d: u32, alpha: f64, n: f64) -> Result<Self> {
        let cap = max_depth(l, k)?;
        if d < 2 || d > cap {
            return Err(Error::InvalidParam(format!(
                "depth {d} outside [2, {cap}] for L={l}, K={k}"
            )));
        }
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::InvalidParam(format!("alpha must be in (0, 1], got {alpha}")));
        }
        if !(n > 0.0) {
            return Err(Error::InvalidParam(format!("n must be positive, got {n}")));
        }
        Ok(BalancedTreeParams { l, k, d, alpha, n })
    }

    /// Whether the feature-reduction ratio is achievable (`alpha >= 1/k`).
    pub fn theorem3_consistent(&self) -> bool {
        theorem3_check(self.alpha, self.k)
    }
}

/// Geometric series `sum_{i=0}^{m-1} q^i`, stable for `q` near 1.
fn geometric_series(m: u32, q: f64) -> f64 {
    let u = q - 1.0;
    if u.abs() <= KALPHA_ONE_WINDOW {
        m as f64
    } else {
        f64::exp_m1(m as f64 * f64::ln_1p(u)) / u
    }
}

/// Number of non-zero weights of the balanced tree:
/// `K n ((K a)^(d-1) - 1) / (K a - 1) + L a^(d-1) n`,
/// with the limit branch `(d-1) K n + L a^(d-1) n` when `K a = 1`.
pub fn balanced_tree_nnz(params: &BalancedTreeParams) -> f64 {
    let k = params.k as f64;
    let l = params.l as f64;
    let alpha = params.alpha;
    let series = geometric_series(params.d - 1, k * alpha);
    k * params.n * series + l * alpha.powi(params.d as i32 - 1) * params.n
}

/// Tree-to-flat ratio of non-zero weight counts:
/// `K ((K a)^(d-1) - 1) / (L (K a - 1)) + a^(d-1)`.
pub fn balanced_ratio(params: &BalancedTreeParams) -> f64 {
    let k = params.k as f64;
    let l = params.l as f64;
    let alpha = params.alpha;
    let series = geometric_series(params.d - 1, k * alpha);
    k * series / l + alpha.powi(params.d as i32 - 1)
}

/// Largest `alpha` below which the balanced ratio is guaranteed smaller
/// than one for a depth-`d` tree, given the maximum feasible depth `cap`:
///
/// * `d = 2`: `1 - 1/(2 K^(cap-2))`.
/// * `d > 2` (requires `k >= 4`): `max(2/K, alpha*)` where `alpha*` is the
///   unique root in `(0, 1)` of `a^(d-2) (K^(d-cap) + a) = 1`, found by
///   bisection to 1e-9.
pub fn theorem1_alpha_bound(k: u64, d: u32, cap: u32) -> Result<f64> {
    if k < 2 {
        return Err(Error::InvalidParam(format!("need k >= 2, got {k}")));
    }
    if d < 2 || d > cap {
        return Err(Error::InvalidParam(format!("depth {d} outside [2, {cap}]")));
    }
    let kf = k as f64;
    if d == 2 {
        return Ok(1.0 - 1.0 / (2.0 * kf.powi(cap as i32 - 2)));
    }
    if k < 4 {
        return Err(Error::Numeric(format!(
            "the depth-{d} bound requires k >= 4, got {k}"
        )));
    }
    let shift = kf.powi(d as i32 - cap as i32);
    let f = |a: f64| a.powi(d as i32 - 2) * (shift + a) - 1.0;
    debug_assert!(f(0.0) < 0.0 && f(1.0) > 0.0);
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while hi - lo > 1e-9 {
        let mid = (lo + hi) / 2.0;
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let alpha_star = (lo + hi) / 2.0;
    Ok(alpha_star.max(2.0 / kf))
}

/// Hypothesis and scope of the depth-monotonicity guarantee.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Theorem2Outcome {
    /// The ratio decreases in depth whenever `alpha` is below this.
    pub alpha_threshold: f64,
    /// Inclusive depth range `[2, D-2]` the guarantee covers; `None` when
    /// `D < 4` leaves no room.
    pub d_range: Option<(u32, u32)>,
}

/// Threshold `1 - 1/(2K)` and the depth range over which the balanced
/// ratio is guaranteed strictly decreasing.
pub fn theorem2_check(k: u64, l: u64) -> Result<Theorem2Outcome> {
    if k < 2 {
        return Err(Error::InvalidParam(format!("need k >= 2, got {k}")));
    }
    let cap = max_depth(l, k)?;
    Ok(Theorem2Outcome {
        alpha_threshold: 1.0 - 1.0 / (2.0 * k as f64),
        d_range: (cap >= 4).then(|| (2, cap - 2)),
    })
}

/// Companion predicate: verifies `ratio(d) > ratio(d+1)` for every `d` in
/// the guaranteed range, for a given `alpha` and unit `n`. Returns `None`
/// when the hypothesis does not hold or the range is empty (the guarantee
/// is silent there).
pub fn theorem2_monotone(k: u64, l: u64, alpha: f64) -> Result<Option<bool>> {
    let outcome = theorem2_check(k, l)?;
    if alpha >= outcome.alpha_threshold {
        return Ok(None);
    }
    let Some((lo, hi)) = outcome.d_range else {
        return Ok(None);
    };
    for d in lo..=hi {
        let here = balanced_ratio(&BalancedTreeParams::new(l, k, d, alpha, 1.0)?);
        let next = balanced_ratio(&BalancedTreeParams::new(l, k, d + 1, alpha, 1.0)?);
        if !(here > next) {
            return Ok(Some(false));
        }
    }
    Ok(Some(true))
}

/// A uniform balanced tree cannot shrink the used-feature set by more than
/// the branching factor: `alpha >= 1/K`.
pub fn theorem3_check(alpha: f64, k: u64) -> bool {
    alpha >= 1.0 / k as f64
}

/// Cost-model inputs, in feature-value touches with unit constants.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CostParams {
    /// Training instance count.
    pub ell: f64,
    /// Average non-zeros per instance.
    pub nbar: f64,
    /// Labels-per-instance constant: each instance carries at most
    /// `c * ln(L)` labels on average.
    pub c: f64,
    /// K-means iterations per clustering run.
    pub kmeans_iters: f64,
}

impl CostParams {
    pub fn new(ell: f64, nbar: f64, c: f64, kmeans_iters: f64) -> Result<Self> {
        for (name, v) in [("ell", ell), ("nbar", nbar), ("c", c), ("kmeans_iters", kmeans_iters)] {
            if !(v > 0.0) {
                return Err(Error::InvalidParam(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(CostParams {
            ell,
            nbar,
            c,
            kmeans_iters,
        })
    }
}

/// Training-cost breakdown, in feature-value touches.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TrainingCostEstimate {
    /// Flat baseline `L * ell * nbar`.
    pub ovr_cost: f64,
    /// Root layer: `K * ell * nbar` (every instance trains in each of the
    /// root's K problems).
    pub tree_root: f64,
    /// One middle layer: `K * ell * c * ln(L) * nbar`; there are
    /// `middle_layers = d - 2` of them.
    pub tree_middle: f64,
    pub middle_layers: u32,
    /// Deepest layer: `(L / K^(d-1)) * ell * c * ln(L) * nbar`.
    pub tree_last: f64,
    /// Label clustering: `nnz(V) * K * iters * d`, with `nnz(V)` bounded
    /// by `ell * nbar * c * ln(L)`.
    pub kmeans_cost: f64,
    /// `K (d-1) + L / K^(d-1)`, the depth-summed problem multiplier.
    pub inner_term: f64,
    /// Closed-form classifier-training total
    /// `ell * nbar * c * ln(L) * inner_term`.
    pub tree_total: f64,
}

/// Evaluates the cost model for a balanced tree of depth `d`.
pub fn training_cost_estimate(
    l: u64,
    k: u64,
    d: u32,
    cost: &CostParams,
) -> Result<TrainingCostEstimate> {
    if l < 2 || k < 2 {
        return Err(Error::InvalidParam(format!("need L >= 2 and K >= 2, got L={l}, K={k}")));
    }
    if d < 2 {
        return Err(Error::InvalidParam(format!("need d >= 2, got {d}")));
    }
    let lf = l as f64;
    let kf = k as f64;
    let log_l = lf.ln();
    let leaf_layer_children = lf / kf.powi(d as i32 - 1);
    let inner_term = kf * (d as f64 - 1.0) + leaf_layer_children;
    let nnz_v_bound = cost.ell * cost.nbar * cost.c * log_l;
    Ok(TrainingCostEstimate {
        ovr_cost: lf * cost.ell * cost.nbar,
        tree_root: kf * cost.ell * cost.nbar,
        tree_middle: kf * cost.ell * cost.c * log_l * cost.nbar,
        middle_layers: d - 2,
        tree_last: leaf_layer_children * cost.ell * cost.c * log_l * cost.nbar,
        kmeans_cost: nnz_v_bound * kf * cost.kmeans_iters * d as f64,
        inner_term,
        tree_total: cost.ell * cost.nbar * cost.c * log_l * inner_term,
    })
}

/// Per-node contribution to the pre-training size estimate.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct NodeSizeRow {
    pub node_id: u32,
    pub depth: u32,
    pub children: u32,
    pub used_features: u64,
}

/// Pre-training size estimate of a tree model over a concrete dataset.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SizeEstimate {
    /// Internal nodes in id order.
    pub per_node: Vec<NodeSizeRow>,
    /// `sum over internal nodes of (children * used features)`: an upper
    /// bound on the trained non-zero count.
    pub tree_nnz_bound: u64,
    /// `12 * tree_nnz_bound`.
    pub tree_bytes: u64,
    /// `8 * n * L`.
    pub ovr_bytes: u64,
    /// `1.5 * tree_nnz_bound / (n * L)`: sparse storage versus a dense
    /// flat model.
    pub ratio: f64,
}

impl SizeEstimate {
    /// `tree_nnz_bound / (n * L)` without the 1.5 index overhead, for
    /// comparison against the analytic (storage-free) ratio curves.
    pub fn raw_nnz_ratio(&self) -> f64 {
        self.ratio / SPARSE_OVERHEAD_FACTOR
    }
}

/// Walks the tree once, before any training, and bounds the model size by
/// each node's used-feature count times its child count.
pub fn estimate_tree_size<S: Scalar>(ds: &MultiLabelDataset<S>, tree: &LabelTree) -> Result<SizeEstimate> {
    if ds.n_labels() != tree.n_labels {
        return Err(Error::Data(format!(
            "tree built for {} labels, dataset has {}",
            tree.n_labels,
            ds.n_labels()
        )));
    }
    let internal: Vec<u32> = tree.internal_nodes().map(|n| n.id).collect();
    let per_node: Vec<NodeSizeRow> = internal
        .par_iter()
        .map(|&id| {
            let node = tree.node(id);
            let rows = ds.instances_with_labels(&node.labels);
            NodeSizeRow {
                node_id: id,
                depth: node.depth,
                children: node.children.len() as u32,
                used_features: ds.used_features(&rows).count() as u64,
            }
        })
        .collect();
    let tree_nnz_bound: u64 = per_node
        .iter()
        .map(|row| row.children as u64 * row.used_features)
        .sum();
    let dense = ds.n_features() as u64 * ds.n_labels() as u64;
    Ok(SizeEstimate {
        tree_bytes: SPARSE_ENTRY_BYTES * tree_nnz_bound,
        ovr_bytes: DENSE_WEIGHT_BYTES * dense,
        ratio: SPARSE_OVERHEAD_FACTOR * tree_nnz_bound as f64 / dense as f64,
        per_node,
        tree_nnz_bound,
    })
}

/// Feature-reduction ratio of one non-root internal node.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NodeAlpha {
    pub node_id: u32,
    pub depth: u32,
    /// Used features of the node over used features of its parent.
    pub alpha: f64,
}

/// Histogram bin width for per-depth alpha distributions.
pub const ALPHA_BIN_WIDTH: f64 = 0.05;
pub const ALPHA_BINS: usize = 20;

/// Per-depth aggregate of node alphas.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DepthAlpha {
    pub depth: u32,
    /// Average of node alphas weighted by child count: with `ch(u)`
    /// children per node, `sum(alpha_u * ch(u)) / sum(ch(u))` — the mean
    /// reduction seen by a weight vector trained at this depth.
    pub weighted_avg: f64,
    pub total_children: u64,
    /// Counts per alpha bin of width 0.05 over [0, 1].
    pub bins: Vec<u32>,
}

/// Feature-reduction statistics over a built tree.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AlphaStats {
    /// Non-root internal nodes in id order.
    pub per_node: Vec<NodeAlpha>,
    /// Depths holding at least one measured node, ascending.
    pub per_depth: Vec<DepthAlpha>,
    /// Nodes skipped because the parent uses no features.
    pub skipped: Vec<u32>,
}

/// Computes used-feature ratios against each node's parent and aggregates
/// them per depth. Internal nodes only; a child's instances are a subset
/// of its parent's, so every alpha is in [0, 1].
pub fn alpha_stats<S: Scalar>(ds: &MultiLabelDataset<S>, tree: &LabelTree) -> Result<AlphaStats> {
    if ds.n_labels() != tree.n_labels {
        return Err(Error::Data(format!(
            "tree built for {} labels, dataset has {}",
            tree.n_labels,
            ds.n_labels()
        )));
    }
    let internal: Vec<u32> = tree.internal_nodes().map(|n| n.id).collect();
    let used_counts: Vec<(u32, u64)> = internal
        .par_iter()
        .map(|&id| {
            let rows = ds.instances_with_labels(&tree.node(id).labels);
            (id, ds.used_features(&rows).count() as u64)
        })
        .collect();
    let mut used = vec![0u64; tree.n_nodes()];
    for (id, count) in used_counts {
        used[id as usize] = count;
    }

    let parents = tree.parents();
    let mut per_node = Vec::new();
    let mut skipped = Vec::new();
    for &id in &internal {
        if id == 0 {
            continue;
        }
        let parent_used = used[parents[id as usize] as usize];
        if parent_used == 0 {
            skipped.push(id);
            continue;
        }
        per_node.push(NodeAlpha {
            node_id: id,
            depth: tree.node(id).depth,
            alpha: used[id as usize] as f64 / parent_used as f64,
        });
    }

    let max_depth = per_node.iter().map(|a| a.depth).max();
    let mut per_depth = Vec::new();
    if let Some(max_depth) = max_depth {
        for depth in 1..=max_depth {
            let mut weighted_sum = 0.0;
            let mut total_children = 0u64;
            let mut bins = vec![0u32; ALPHA_BINS];
            for a in per_node.iter().filter(|a| a.depth == depth) {
                let children = tree.node(a.node_id).children.len() as u64;
                weighted_sum += a.alpha * children as f64;
                total_children += children;
                let bin = ((a.alpha / ALPHA_BIN_WIDTH) as usize).min(ALPHA_BINS - 1);
                bins[bin] += 1;
            }
            if total_children > 0 {
                per_depth.push(DepthAlpha {
                    depth,
                    weighted_avg: weighted_sum / total_children as f64,
                    total_children,
                    bins,
                });
            }
        }
    }

    Ok(AlphaStats {
        per_node,
        per_depth,
        skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::dataset_from_rows;
    use crate::tree::{LabelTree, TreeNode};

    /// Oracle: the depth-wise sum the closed form collapses.
    fn nnz_by_summation(p: &BalancedTreeParams) -> f64 {
        let k = p.k as f64;
        let l = p.l as f64;
        let mut total = 0.0;
        let mut k_pow = 1.0; // K^i
        let mut a_pow = 1.0; // alpha^i
        for _ in 0..=(p.d - 2) {
            total += k_pow * k * a_pow * p.n;
            k_pow *= k;
            a_pow *= p.alpha;
        }
        total + l * a_pow * p.n // a_pow is now alpha^(d-1)
    }

    #[test]
    fn max_depth_known_values() {
        assert_eq!(max_depth(200_000_000, 100).unwrap(), 5);
        assert_eq!(max_depth(9, 3).unwrap(), 2);
        assert_eq!(max_depth(2, 2).unwrap(), 1);
        assert!(max_depth(1, 2).is_err());
        assert!(max_depth(10, 1).is_err());
    }

    #[test]
    fn max_depth_boundary_is_exact() {
        // L = 2 k^(t-1) reaches depth exactly t
        for (k, t) in [(2u64, 5u32), (3, 4), (7, 4), (100, 3)] {
            let l = 2 * k.pow(t - 1);
            assert_eq!(max_depth(l, k).unwrap(), t);
            assert_eq!(max_depth(l - 1, k).unwrap(), t - 1);
        }
    }

    #[test]
    fn max_depth_satisfies_defining_inequalities() {
        for k in 2..10u64 {
            for l in (2..2000u64).step_by(7) {
                let d = max_depth(l, k).unwrap();
                assert!(2 * k.pow(d - 1) <= l);
                assert!(2u128 * (k as u128).pow(d) > l as u128);
                let closed = max_depth_closed_form(l, k);
                assert!(closed.abs_diff(d) <= 1, "l={l} k={k}: {closed} vs {d}");
            }
        }
    }

    #[test]
    fn dense_alpha_collapses_to_full_tree_size() {
        // alpha = 1: every classifier stores all n weights
        let p = BalancedTreeParams::new(10_000, 10, 3, 1.0, 100.0).unwrap();
        let n_meta = (10f64.powi(3) - 10.0) / 9.0; // (K^d - K)/(K - 1)
        let expected = (10_000.0 + n_meta) * 100.0;
        assert!((balanced_tree_nnz(&p) - expected).abs() / expected < 1e-12);
        // and the ratio exceeds one
        assert!(balanced_ratio(&p) > 1.0);
    }

    #[test]
    fn unit_kalpha_uses_limit_branch() {
        // K alpha = 1 exactly: (d-1) K n + L alpha^(d-1) n.
        // d = 3 exceeds D(10^4, 100) = 2, so this is a raw formula
        // evaluation rather than a feasible balanced tree.
        let p = BalancedTreeParams {
            l: 10_000,
            k: 100,
            d: 3,
            alpha: 0.01,
            n: 1e6,
        };
        let expected = (2.0 * 100.0 + 1e4 * 1e-4) * 1e6;
        let got = balanced_tree_nnz(&p);
        assert!((got - expected).abs() / expected < 1e-12, "{got} vs {expected}");
        assert!((got - 2.01e8).abs() / 2.01e8 < 1e-12);
        assert_eq!(got, nnz_by_summation(&p));

        // a feasible unit-K*alpha case agrees with the summation too
        let p = BalancedTreeParams::new(2_000_000, 100, 3, 0.01, 1e5).unwrap();
        let rel = (balanced_tree_nnz(&p) - nnz_by_summation(&p)).abs() / nnz_by_summation(&p);
        assert!(rel < 1e-12);
    }

    #[test]
    fn closed_form_matches_summation() {
        let mut rng = crate::rng::SplitMix64::new(17);
        for _ in 0..300 {
            let k = 2 + rng.below(500);
            let max_d = 2 + rng.below(6) as u32;
            let l = 2 * k.pow(max_d - 1) + rng.below(1_000_000);
            let d = 2 + rng.below(max_d as u64 - 1) as u32;
            let alpha = if rng.below(4) == 0 {
                // stress the near-unit K*alpha region
                (1.0 + (rng.next_f64() - 0.5) * 2e-6) / k as f64
            } else {
                (rng.next_f64()).max(1e-6)
            };
            let n = 10f64.powf(1.0 + 5.0 * rng.next_f64());
            let p = BalancedTreeParams::new(l, k, d, alpha.min(1.0), n).unwrap();
            let closed = balanced_tree_nnz(&p);
            let summed = nnz_by_summation(&p);
            let rel = (closed - summed).abs() / summed.abs();
            assert!(rel < 1e-12, "params {p:?}: rel {rel:e}");

            let ratio = balanced_ratio(&p);
            let via_nnz = closed / (p.l as f64 * p.n);
            assert!((ratio - via_nnz).abs() / via_nnz.abs() < 1e-12);
        }
    }

    #[test]
    fn depth_two_ratio_is_k_over_l_plus_alpha() {
        let p = BalancedTreeParams::new(200_000_000, 100, 2, 0.3, 1.0).unwrap();
        let ratio = balanced_ratio(&p);
        assert!((ratio - 0.3000005).abs() < 1e-12);
    }

    #[test]
    fn deep_trees_can_regress_at_the_depth_cap() {
        // at alpha = 0.6 the deepest feasible tree is slightly larger than
        // the one a step shallower
        let at = |d| {
            balanced_ratio(&BalancedTreeParams::new(200_000_000, 100, d, 0.6, 1.0).unwrap())
        };
        assert!((at(4) - 0.21783).abs() < 1e-4);
        assert!((at(5) - 0.23943).abs() < 1e-4);
        assert!(at(5) > at(4));
        // while the early depths keep shrinking
        assert!(at(2) > at(3) && at(3) > at(4));
    }

    #[test]
    fn theorem1_bounds_match_known_values() {
        let d2 = theorem1_alpha_bound(100, 2, 5).unwrap();
        assert!((d2 - (1.0 - 1.0 / 2e6)).abs() < 1e-12);

        let d4 = theorem1_alpha_bound(100, 4, 5).unwrap();
        assert!((d4 - 0.9967).abs() < 1e-3);
        // the bound satisfies its defining equation
        let residual = d4.powi(2) * (100f64.powi(-1) + d4) - 1.0;
        assert!(residual.abs() < 1e-7);

        let d5 = theorem1_alpha_bound(100, 5, 5).unwrap();
        assert!((d5 - 0.8192).abs() < 1e-3);

        assert!(theorem1_alpha_bound(3, 3, 4).is_err());
        assert!(theorem1_alpha_bound(3, 2, 4).is_ok());
    }

    #[test]
    fn theorem2_threshold_and_range() {
        let out = theorem2_check(100, 200_000_000).unwrap();
        assert!((out.alpha_threshold - 0.995).abs() < 1e-12);
        assert_eq!(out.d_range, Some((2, 3)));

        // small D leaves no guaranteed range
        let out = theorem2_check(100, 300).unwrap();
        assert_eq!(out.d_range, None);
        assert_eq!(theorem2_monotone(100, 300, 0.5).unwrap(), None);

        // hypothesis gate: alpha above the threshold asserts nothing
        assert_eq!(theorem2_monotone(100, 200_000_000, 0.999).unwrap(), None);
        // alpha below it: strictly decreasing over the range
        assert_eq!(theorem2_monotone(100, 200_000_000, 0.5).unwrap(), Some(true));
    }

    #[test]
    fn theorem3_boundary() {
        assert!(theorem3_check(0.01, 100));
        assert!(!theorem3_check(0.009, 100));
        assert!(theorem3_check(1.0, 2));
    }

    #[test]
    fn cost_estimate_inner_term() {
        let cost = CostParams::new(1e5, 100.0, 1.0, 50.0).unwrap();
        let est = training_cost_estimate(1_000_000, 100, 2, &cost).unwrap();
        assert!((est.inner_term - 10_100.0).abs() < 1e-9);
        assert!((est.ovr_cost - 1e13).abs() / 1e13 < 1e-12);
    }

    #[test]
    fn tree_training_beats_flat_training() {
        let cost = CostParams::new(1e5, 100.0, 1.0, 50.0).unwrap();
        let est = training_cost_estimate(1_000_000, 100, 3, &cost).unwrap();
        assert!(est.tree_total < est.ovr_cost);
    }

    #[test]
    fn cost_reduces_to_square_log_form_at_balanced_depth() {
        // L = K^d: the inner term collapses to K * d
        let cost = CostParams::new(1e4, 50.0, 1.0, 20.0).unwrap();
        let (l, k, d) = (1_000_000u64, 10u64, 6u32);
        assert_eq!((k as f64).powi(d as i32) as u64, l);
        let est = training_cost_estimate(l, k, d, &cost).unwrap();
        assert!((est.inner_term - (k * d as u64) as f64).abs() < 1e-9);
        let expected = cost.ell * cost.nbar * cost.c * (l as f64).ln() * (k * d as u64) as f64;
        assert!((est.tree_total - expected).abs() / expected < 1e-12);
    }

    use crate::synth::worked_alpha_example as worked_example;

    #[test]
    fn worked_example_realizes_intended_counts() {
        let (ds, tree) = worked_example();
        let est = estimate_tree_size(&ds, &tree).unwrap();
        let by_id: std::collections::HashMap<u32, &NodeSizeRow> =
            est.per_node.iter().map(|r| (r.node_id, r)).collect();
        assert_eq!(by_id[&0].used_features, 100);
        assert_eq!(by_id[&1].used_features, 10);
        assert_eq!(by_id[&2].used_features, 30);
        assert_eq!(by_id[&3].used_features, 80);

        // depth-1 contribution: 10*2 + 30*2 + 80*6
        let depth1: u64 = est
            .per_node
            .iter()
            .filter(|r| r.depth == 1)
            .map(|r| r.children as u64 * r.used_features)
            .sum();
        assert_eq!(depth1, 560);
        assert_eq!(est.tree_nnz_bound, 100 * 3 + 560);
        assert_eq!(est.tree_bytes, 12 * est.tree_nnz_bound);
        assert_eq!(est.ovr_bytes, 8 * 100 * 10);
    }

    #[test]
    fn worked_example_weighted_alpha_is_exact() {
        let (ds, tree) = worked_example();
        let stats = alpha_stats(&ds, &tree).unwrap();
        assert_eq!(stats.per_node.len(), 3);
        assert_eq!(stats.per_node[0].alpha, 0.1);
        assert_eq!(stats.per_node[1].alpha, 0.3);
        assert_eq!(stats.per_node[2].alpha, 0.8);
        let depth1 = &stats.per_depth[0];
        assert_eq!(depth1.depth, 1);
        assert_eq!(depth1.total_children, 10);
        assert_eq!(depth1.weighted_avg, 0.56);
        // histogram: bins of width 0.05 (30/100 rounds just below 0.3)
        assert_eq!(depth1.bins.iter().sum::<u32>(), 3);
        assert_eq!(depth1.bins[2], 1);
        assert_eq!(depth1.bins[5] + depth1.bins[6], 1);
        assert_eq!(depth1.bins[16], 1);
    }

    #[test]
    fn alpha_of_full_coverage_child_is_one() {
        // one child inherits every parent feature
        let rows = vec![
            (vec![(0, 1.0), (1, 1.0)], vec![0]),
            (vec![(0, 1.0), (1, 1.0)], vec![1]),
            (vec![(0, 1.0)], vec![2]),
        ];
        let ds = dataset_from_rows::<f64>(rows, 2, 3).unwrap();
        let nodes = vec![
            TreeNode {
                id: 0,
                depth: 0,
                children: vec![1, 2],
                labels: vec![0, 1, 2],
            },
            TreeNode {
                id: 1,
                depth: 1,
                children: vec![3, 4],
                labels: vec![0, 1],
            },
            TreeNode {
                id: 2,
                depth: 1,
                children: vec![],
                labels: vec![2],
            },
            TreeNode {
                id: 3,
                depth: 2,
                children: vec![],
                labels: vec![0],
            },
            TreeNode {
                id: 4,
                depth: 2,
                children: vec![],
                labels: vec![1],
            },
        ];
        let tree = LabelTree::from_parts(2, 4, 3, nodes).unwrap();
        let stats = alpha_stats(&ds, &tree).unwrap();
        assert_eq!(stats.per_node.len(), 1);
        assert_eq!(stats.per_node[0].alpha, 1.0);
        assert!(stats.per_node.iter().all(|a| a.alpha <= 1.0));
    }

    #[test]
    fn dense_data_defeats_the_estimate() {
        // every feature in every instance: bound = classifier_count * n
        let rows: Vec<(Vec<(u32, f64)>, Vec<u32>)> = (0..6u32)
            .map(|l| ((0..4).map(|f| (f, 1.0 + f as f64)).collect(), vec![l]))
            .collect();
        let ds = dataset_from_rows::<f64>(rows, 4, 6).unwrap();
        let tree = crate::tree::build_label_tree(&ds, 2, 4, 9).unwrap();
        let est = estimate_tree_size(&ds, &tree).unwrap();
        assert_eq!(
            est.tree_nnz_bound,
            tree.classifier_count() as u64 * ds.n_features() as u64
        );
        let expected = SPARSE_OVERHEAD_FACTOR * tree.classifier_count() as f64 / ds.n_labels() as f64;
        assert!((est.ratio - expected).abs() < 1e-12);
        assert!(est.ratio > 1.0);
    }

    #[test]
    fn flat_tree_estimate_is_pure_index_overhead() {
        let rows: Vec<(Vec<(u32, f64)>, Vec<u32>)> = (0..5u32)
            .map(|l| (vec![(l, 1.0)], vec![l]))
            .collect();
        let ds = dataset_from_rows::<f64>(rows, 5, 5).unwrap();
        let tree = crate::tree::build_label_tree(&ds, 10, 6, 1).unwrap();
        assert_eq!(tree.depth, 1);
        let est = estimate_tree_size(&ds, &tree).unwrap();
        assert_eq!(est.tree_nnz_bound, 5 * 5);
        assert!((est.ratio - 1.5).abs() < 1e-12);
        assert!((est.raw_nnz_ratio() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn union_coverage_bounds_alpha_sum() {
        // empirical analogue of the 1/K lower bound: children's used
        // features cover the parent's, so the counts sum to at least it
        let (ds, tree) = worked_example();
        for node in tree.internal_nodes() {
            let parent_used = ds
                .used_features(&ds.instances_with_labels(&node.labels))
                .count();
            let child_sum: usize = node
                .children
                .iter()
                .map(|&c| {
                    ds.used_features(&ds.instances_with_labels(&tree.node(c).labels))
                        .count()
                })
                .sum();
            assert!(child_sum >= parent_used);
        }
    }
}
