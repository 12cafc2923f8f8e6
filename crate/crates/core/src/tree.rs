//! Label-tree construction: label representations, spherical k-means, and
//! the recursive K-way partition of the label set.

use std::collections::VecDeque;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{MultiLabelDataset, SparseVector};
use crate::error::{Error, Result};
use crate::rng::{mix_seed, SplitMix64};
use crate::scalar::Scalar;

/// One unit-norm sparse row per label, built by summing the feature vectors
/// of the label's positive instances and normalizing.
#[derive(Clone, Debug)]
pub struct LabelRepresentations<S> {
    rows: Vec<SparseVector<S>>,
    n_features: u32,
    /// Labels with no positive instances; their rows are all-zero.
    zero_labels: Vec<u32>,
}

impl<S: Scalar> LabelRepresentations<S> {
    pub fn n_labels(&self) -> u32 {
        self.rows.len() as u32
    }

    pub fn n_features(&self) -> u32 {
        self.n_features
    }

    pub fn row(&self, label: u32) -> &SparseVector<S> {
        &self.rows[label as usize]
    }

    pub fn zero_labels(&self) -> &[u32] {
        &self.zero_labels
    }
}

/// Sums the positive instances of each label and normalizes to unit L2 norm.
/// A label with no positive instances yields an all-zero row and is flagged.
pub fn label_representations<S: Scalar>(ds: &MultiLabelDataset<S>) -> LabelRepresentations<S> {
    let rows: Vec<SparseVector<S>> = (0..ds.n_labels())
        .into_par_iter()
        .map(|label| {
            let mut acc: std::collections::BTreeMap<u32, S> = std::collections::BTreeMap::new();
            for &i in ds.instances_with_label(label) {
                for &(f, v) in ds.row(i as usize).entries() {
                    *acc.entry(f).or_insert_with(S::zero) += v;
                }
            }
            let norm = acc.values().map(|&v| v * v).sum::<S>().sqrt();
            if norm == S::zero() {
                return SparseVector::empty();
            }
            SparseVector::from_sorted_nonzero(
                acc.into_iter()
                    .filter(|&(_, v)| v != S::zero())
                    .map(|(f, v)| (f, v / norm))
                    .collect(),
            )
        })
        .collect();
    let zero_labels = rows
        .iter()
        .enumerate()
        .filter(|(_, r)| r.is_empty())
        .map(|(l, _)| l as u32)
        .collect();
    LabelRepresentations {
        rows,
        n_features: ds.n_features(),
        zero_labels,
    }
}

/// Outcome of a spherical k-means run over a subset of representation rows.
#[derive(Clone, Debug)]
pub struct KmeansOutcome {
    /// Cluster in `[0, k)` for each position of the input subset.
    pub assignment: Vec<u32>,
    /// Sum of cosine distances to the assigned centroids, one entry per
    /// iteration (non-increasing).
    pub objective_trace: Vec<f64>,
    /// Round-robin fallback was taken because the subset had fewer distinct
    /// rows than clusters.
    pub fallback: bool,
}

fn cmp_rows<S: Scalar>(a: &SparseVector<S>, b: &SparseVector<S>) -> std::cmp::Ordering {
    let by_len = a.nnz().cmp(&b.nnz());
    if by_len != std::cmp::Ordering::Equal {
        return by_len;
    }
    for (&(ia, va), &(ib, vb)) in a.entries().iter().zip(b.entries()) {
        let by_idx = ia.cmp(&ib);
        if by_idx != std::cmp::Ordering::Equal {
            return by_idx;
        }
        // representation values are finite, never NaN
        let by_val = va.partial_cmp(&vb).expect("finite values");
        if by_val != std::cmp::Ordering::Equal {
            return by_val;
        }
    }
    std::cmp::Ordering::Equal
}

/// Spherical k-means (cosine distance, unit-norm centroids) with
/// k-means++ seeding, deterministic given `seed`.
///
/// All-zero rows are held out of the iterations and assigned to the
/// smallest cluster afterwards. If the subset has fewer distinct nonzero
/// rows than `k`, the run falls back to assigning position `i` to cluster
/// `i % k` and flags the outcome.
pub fn spherical_kmeans<S: Scalar>(
    reps: &LabelRepresentations<S>,
    row_subset: &[u32],
    k: u32,
    seed: u64,
    max_iter: u32,
    tol: f64,
) -> KmeansOutcome {
    assert!(k >= 2, "k must be at least 2");
    assert!(row_subset.len() > k as usize, "subset must exceed k");
    let k = k as usize;

    let nonzero: Vec<usize> = (0..row_subset.len())
        .filter(|&p| !reps.row(row_subset[p]).is_empty())
        .collect();

    // distinct nonzero rows
    let mut sorted: Vec<usize> = nonzero.clone();
    sorted.sort_by(|&a, &b| cmp_rows(reps.row(row_subset[a]), reps.row(row_subset[b])));
    sorted.dedup_by(|a, b| {
        cmp_rows(reps.row(row_subset[*a]), reps.row(row_subset[*b])) == std::cmp::Ordering::Equal
    });
    if sorted.len() < k {
        let assignment = (0..row_subset.len()).map(|p| (p % k) as u32).collect();
        return KmeansOutcome {
            assignment,
            objective_trace: Vec::new(),
            fallback: true,
        };
    }

    let mut rng = SplitMix64::new(seed);
    let n = reps.n_features() as usize;
    let row = |p: usize| reps.row(row_subset[p]);

    // k-means++ seeding on the nonzero rows
    let mut centroids: Vec<Vec<S>> = Vec::with_capacity(k);
    let mut chosen: Vec<usize> = Vec::with_capacity(k);
    let first = nonzero[rng.below(nonzero.len() as u64) as usize];
    chosen.push(first);
    let mut dist: Vec<f64> = nonzero
        .iter()
        .map(|&p| 1.0 - row(p).dot_sparse(row(first)).to_f64().unwrap())
        .collect();
    while chosen.len() < k {
        let total: f64 = dist.iter().map(|d| d * d).sum();
        let next = if total > 0.0 {
            let target = rng.next_f64() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, d) in dist.iter().enumerate() {
                acc += d * d;
                if acc > target {
                    pick = Some(nonzero[i]);
                    break;
                }
            }
            pick.unwrap_or_else(|| *nonzero.last().unwrap())
        } else {
            // all remaining rows coincide with a chosen centroid; take the
            // first distinct row not yet chosen (one exists: distinct >= k)
            *sorted
                .iter()
                .find(|&&p| {
                    chosen
                        .iter()
                        .all(|&c| cmp_rows(row(p), row(c)) != std::cmp::Ordering::Equal)
                })
                .expect("enough distinct rows")
        };
        chosen.push(next);
        for (i, &p) in nonzero.iter().enumerate() {
            let d = 1.0 - row(p).dot_sparse(row(next)).to_f64().unwrap();
            if d < dist[i] {
                dist[i] = d;
            }
        }
    }
    for &c in &chosen {
        let mut dense = vec![S::zero(); n];
        for &(f, v) in row(c).entries() {
            dense[f as usize] = v;
        }
        centroids.push(dense);
    }

    let mut assignment = vec![0u32; row_subset.len()];
    let mut trace = Vec::new();
    let mut prev_obj = f64::INFINITY;
    for _ in 0..max_iter {
        // assignment step: nearest centroid by cosine distance, ties to the
        // lowest cluster index
        for &p in &nonzero {
            let mut best = 0usize;
            let mut best_sim = S::neg_infinity();
            for (c, centroid) in centroids.iter().enumerate() {
                let sim = row(p).dot_dense(centroid);
                if sim > best_sim {
                    best_sim = sim;
                    best = c;
                }
            }
            assignment[p] = best as u32;
        }

        // an emptied cluster steals the worst-fitting row of the largest one
        loop {
            let mut sizes = vec![0usize; k];
            for &p in &nonzero {
                sizes[assignment[p] as usize] += 1;
            }
            let Some(empty) = sizes.iter().position(|&s| s == 0) else {
                break;
            };
            let donor = sizes
                .iter()
                .enumerate()
                .max_by_key(|&(c, &s)| (s, std::cmp::Reverse(c)))
                .map(|(c, _)| c)
                .unwrap();
            let victim = nonzero
                .iter()
                .copied()
                .filter(|&p| assignment[p] as usize == donor)
                .min_by(|&a, &b| {
                    let da = row(a).dot_dense(&centroids[donor]);
                    let db = row(b).dot_dense(&centroids[donor]);
                    da.partial_cmp(&db).unwrap().then(a.cmp(&b))
                })
                .expect("donor cluster is nonempty");
            assignment[victim] = empty as u32;
            for f in centroids[empty].iter_mut() {
                *f = S::zero();
            }
            for &(f, v) in row(victim).entries() {
                centroids[empty][f as usize] = v;
            }
        }

        let objective: f64 = nonzero
            .iter()
            .map(|&p| 1.0 - row(p).dot_dense(&centroids[assignment[p] as usize]).to_f64().unwrap())
            .sum();
        trace.push(objective);
        if (prev_obj - objective).abs() <= tol {
            break;
        }
        prev_obj = objective;

        // update step: normalized mean directions
        for centroid in centroids.iter_mut() {
            for f in centroid.iter_mut() {
                *f = S::zero();
            }
        }
        for &p in &nonzero {
            let c = assignment[p] as usize;
            for &(f, v) in row(p).entries() {
                centroids[c][f as usize] += v;
            }
        }
        for centroid in centroids.iter_mut() {
            let norm = centroid.iter().map(|&v| v * v).sum::<S>().sqrt();
            if norm > S::zero() {
                for f in centroid.iter_mut() {
                    *f = *f / norm;
                }
            }
        }
    }

    // all-zero rows go to the smallest cluster, ties to the lowest index
    let mut sizes = vec![0usize; k];
    for &p in &nonzero {
        sizes[assignment[p] as usize] += 1;
    }
    for p in 0..row_subset.len() {
        if reps.row(row_subset[p]).is_empty() {
            let smallest = (0..k).min_by_key(|&c| (sizes[c], c)).unwrap();
            assignment[p] = smallest as u32;
            sizes[smallest] += 1;
        }
    }

    KmeansOutcome {
        assignment,
        objective_trace: trace,
        fallback: false,
    }
}

/// A node of the label tree. Leaves hold exactly one label and have no
/// children; internal nodes hold the union of their children's labels.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeNode {
    pub id: u32,
    pub depth: u32,
    pub children: Vec<u32>,
    pub labels: Vec<u32>,
}

impl TreeNode {
    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }
}

/// K-ary label tree. Node 0 is the root; ids are assigned breadth-first.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelTree {
    pub k: u32,
    pub d_max: u32,
    pub depth: u32,
    pub n_labels: u32,
    pub nodes: Vec<TreeNode>,
}

/// Per-depth aggregate used by [`LabelTree::summary`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DepthSummary {
    pub depth: u32,
    pub nodes: u32,
    pub internal: u32,
    pub leaves: u32,
    /// Total child count over nodes at this depth.
    pub children: u64,
    /// Total label-subset size over nodes at this depth.
    pub labels: u64,
}

impl LabelTree {
    /// Builds a tree from parts, validating every structural invariant.
    /// This is the path a deserialized tree takes.
    pub fn from_parts(
        k: u32,
        d_max: u32,
        n_labels: u32,
        nodes: Vec<TreeNode>,
    ) -> Result<Self> {
        let depth = nodes.iter().map(|n| n.depth).max().unwrap_or(0);
        let tree = LabelTree {
            k,
            d_max,
            depth,
            n_labels,
            nodes,
        };
        tree.validate()?;
        Ok(tree)
    }

    fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Data(format!("label tree: {msg}")));
        if self.k < 2 {
            return fail("k must be at least 2".into());
        }
        if self.nodes.is_empty() {
            return fail("no nodes".into());
        }
        for (i, node) in self.nodes.iter().enumerate() {
            if node.id as usize != i {
                return fail(format!("node {i} has id {}", node.id));
            }
            if !node.labels.windows(2).all(|w| w[0] < w[1]) {
                return fail(format!("node {i} labels not sorted"));
            }
            if node.labels.is_empty() {
                return fail(format!("node {i} has no labels"));
            }
            if let Some(&max) = node.labels.last() {
                if max >= self.n_labels {
                    return fail(format!("node {i} holds label {max} >= L"));
                }
            }
            if node.is_leaf() && node.labels.len() != 1 {
                return fail(format!("leaf {i} holds {} labels", node.labels.len()));
            }
            if !node.is_leaf() {
                let mut union: Vec<u32> = Vec::new();
                for &c in &node.children {
                    let child = self
                        .nodes
                        .get(c as usize)
                        .ok_or_else(|| Error::Data(format!("label tree: missing child {c}")))?;
                    if child.depth != node.depth + 1 {
                        return fail(format!("child {c} depth mismatch"));
                    }
                    union.extend_from_slice(&child.labels);
                }
                let mut sorted = union.clone();
                sorted.sort_unstable();
                sorted.dedup();
                if sorted.len() != union.len() {
                    return fail(format!("children of node {i} overlap"));
                }
                if sorted != node.labels {
                    return fail(format!("children of node {i} do not partition it"));
                }
            }
        }
        if self.nodes[0].depth != 0 {
            return fail("root must have depth 0".into());
        }
        if self.nodes[0].labels.len() != self.n_labels as usize {
            return fail("root must hold every label".into());
        }
        if self.depth != self.nodes.iter().map(|n| n.depth).max().unwrap() {
            return fail("depth field mismatch".into());
        }
        if self.depth > self.d_max {
            return fail("depth exceeds d_max".into());
        }
        Ok(())
    }

    pub fn root(&self) -> &TreeNode {
        &self.nodes[0]
    }

    pub fn node(&self, id: u32) -> &TreeNode {
        &self.nodes[id as usize]
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    /// Internal (non-leaf) nodes in id order.
    pub fn internal_nodes(&self) -> impl Iterator<Item = &TreeNode> {
        self.nodes.iter().filter(|n| !n.is_leaf())
    }

    /// Non-root internal nodes, i.e. the meta-labels.
    pub fn n_meta_labels(&self) -> u32 {
        self.nodes
            .iter()
            .filter(|n| !n.is_leaf() && n.id != 0)
            .count() as u32
    }

    /// Total classifier count: one per (node, child) edge, which equals
    /// `n_nodes - 1` and `L + n_meta_labels`.
    pub fn classifier_count(&self) -> u32 {
        (self.nodes.len() - 1) as u32
    }

    /// Parent id for every node (root maps to itself).
    pub fn parents(&self) -> Vec<u32> {
        let mut parent = vec![0u32; self.nodes.len()];
        for node in &self.nodes {
            for &c in &node.children {
                parent[c as usize] = node.id;
            }
        }
        parent
    }

    /// Per-depth table of node, child, and label counts.
    pub fn summary(&self) -> Vec<DepthSummary> {
        let mut table: Vec<DepthSummary> = (0..=self.depth)
            .map(|depth| DepthSummary {
                depth,
                nodes: 0,
                internal: 0,
                leaves: 0,
                children: 0,
                labels: 0,
            })
            .collect();
        for node in &self.nodes {
            let row = &mut table[node.depth as usize];
            row.nodes += 1;
            if node.is_leaf() {
                row.leaves += 1;
            } else {
                row.internal += 1;
            }
            row.children += node.children.len() as u64;
            row.labels += node.labels.len() as u64;
        }
        table
    }

    /// Serializes the tree as a JSON document with stable field order.
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("tree serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: LabelTree = serde_json::from_str(text)
            .map_err(|e| Error::Data(format!("label tree JSON: {e}")))?;
        LabelTree::from_parts(raw.k, raw.d_max, raw.n_labels, raw.nodes)
    }
}

/// Recursively partitions the label set into a K-ary tree.
///
/// A node stops partitioning when its subset has at most `k` labels or it
/// sits at depth `d_max - 1`; a stopped node gets one leaf child per label.
/// Clustering runs on the label representations with a per-node sub-seed,
/// so sibling nodes can be processed concurrently without affecting the
/// result.
pub fn build_label_tree<S: Scalar>(
    ds: &MultiLabelDataset<S>,
    k: u32,
    d_max: u32,
    seed: u64,
) -> Result<LabelTree> {
    if k < 2 {
        return Err(Error::InvalidParam(format!("k must be at least 2, got {k}")));
    }
    if d_max < 1 {
        return Err(Error::InvalidParam("d_max must be at least 1".into()));
    }
    if ds.n_labels() < 1 {
        return Err(Error::InvalidParam("dataset has no labels".into()));
    }
    let reps = label_representations(ds);
    let splitter = |subset: &[u32], node_id: u32| -> Vec<Vec<u32>> {
        let outcome = spherical_kmeans(
            &reps,
            subset,
            k,
            mix_seed(seed, &[node_id as u64]),
            DEFAULT_KMEANS_MAX_ITER,
            DEFAULT_KMEANS_TOL,
        );
        let mut clusters = vec![Vec::new(); k as usize];
        for (pos, &label) in subset.iter().enumerate() {
            clusters[outcome.assignment[pos] as usize].push(label);
        }
        clusters
    };
    build_with_splitter(ds.n_labels(), k, d_max, splitter)
}

pub(crate) const DEFAULT_KMEANS_MAX_ITER: u32 = 300;
pub(crate) const DEFAULT_KMEANS_TOL: f64 = 1e-4;

/// Tree construction over an arbitrary splitter, breadth-first so that node
/// ids depend only on the split outcomes. The splitter returns the child
/// label subsets of an oversized node; empty subsets are dropped.
fn build_with_splitter<F>(n_labels: u32, k: u32, d_max: u32, splitter: F) -> Result<LabelTree>
where
    F: Fn(&[u32], u32) -> Vec<Vec<u32>> + Sync,
{
    let mut nodes = vec![TreeNode {
        id: 0,
        depth: 0,
        children: Vec::new(),
        labels: (0..n_labels).collect(),
    }];
    let mut frontier: VecDeque<u32> = VecDeque::from([0u32]);

    while !frontier.is_empty() {
        let level: Vec<u32> = frontier.drain(..).collect();

        // cluster every oversized node of this level (parallel; sub-seeds
        // depend only on node ids, so the outcome matches a sequential run)
        let splits: Vec<Option<Vec<Vec<u32>>>> = level
            .par_iter()
            .map(|&id| {
                let node = &nodes[id as usize];
                let oversized = node.labels.len() > k as usize;
                let at_cap = node.depth == d_max - 1;
                if oversized && !at_cap {
                    Some(splitter(&node.labels, id))
                } else {
                    None
                }
            })
            .collect();

        for (&id, split) in level.iter().zip(splits) {
            let depth = nodes[id as usize].depth + 1;
            match split {
                Some(clusters) => {
                    for cluster in clusters {
                        if cluster.is_empty() {
                            continue;
                        }
                        let mut labels = cluster;
                        labels.sort_unstable();
                        let child_id = nodes.len() as u32;
                        nodes[id as usize].children.push(child_id);
                        if labels.len() > 1 {
                            frontier.push_back(child_id);
                        }
                        nodes.push(TreeNode {
                            id: child_id,
                            depth,
                            children: Vec::new(),
                            labels,
                        });
                    }
                }
                None => {
                    // stopped node: one leaf child per label
                    let labels = nodes[id as usize].labels.clone();
                    for label in labels {
                        let child_id = nodes.len() as u32;
                        nodes[id as usize].children.push(child_id);
                        nodes.push(TreeNode {
                            id: child_id,
                            depth,
                            children: Vec::new(),
                            labels: vec![label],
                        });
                    }
                }
            }
        }
    }

    let depth = nodes.iter().map(|n| n.depth).max().unwrap();
    let tree = LabelTree {
        k,
        d_max,
        depth,
        n_labels,
        nodes,
    };
    debug_assert!(tree.validate().is_ok());
    Ok(tree)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::dataset_from_rows;

    fn reps_from_rows(rows: Vec<Vec<(u32, f64)>>) -> LabelRepresentations<f64> {
        // one label per row, one instance per label
        let ds = dataset_from_rows::<f64>(
            rows.into_iter()
                .enumerate()
                .map(|(i, entries)| (entries, vec![i as u32]))
                .collect(),
            0,
            0,
        )
        .unwrap();
        label_representations(&ds)
    }

    #[test]
    fn representation_of_single_instance_is_normalized() {
        let ds = dataset_from_rows::<f64>(vec![(vec![(0, 3.0), (1, 4.0)], vec![0])], 0, 0).unwrap();
        let reps = label_representations(&ds);
        let row = reps.row(0);
        assert_eq!(row.entries(), &[(0, 0.6), (1, 0.8)]);
        assert!((row.norm() - 1.0).abs() < 1e-9);
    }

    #[test]
    #[allow(clippy::approx_constant)] // 0.7071 is a frozen expected value
    fn representation_sums_then_normalizes() {
        let ds = dataset_from_rows::<f64>(
            vec![
                (vec![(0, 3.0)], vec![0]),
                (vec![(0, 1.0), (1, 4.0)], vec![0]),
            ],
            0,
            0,
        )
        .unwrap();
        let reps = label_representations(&ds);
        let row = reps.row(0);
        // summed vector (4, 4), normalized
        let expected = 1.0 / 2f64.sqrt();
        assert_eq!(row.entries().len(), 2);
        assert!((row.entries()[0].1 - expected).abs() < 1e-12);
        assert!((row.entries()[1].1 - expected).abs() < 1e-12);
        assert!((row.entries()[0].1 - 0.7071).abs() < 1e-4);
    }

    #[test]
    fn label_without_positives_is_flagged() {
        let ds = dataset_from_rows::<f64>(vec![(vec![(0, 1.0)], vec![0])], 0, 3).unwrap();
        let reps = label_representations(&ds);
        assert_eq!(reps.zero_labels(), &[1, 2]);
        assert!(reps.row(1).is_empty());
    }

    #[test]
    fn kmeans_separates_orthogonal_directions() {
        // three copies of three orthogonal unit vectors
        let mut rows = Vec::new();
        for _ in 0..3 {
            for f in 0..3u32 {
                rows.push(vec![(f, 1.0)]);
            }
        }
        let reps = reps_from_rows(rows);
        let subset: Vec<u32> = (0..9).collect();
        let out = spherical_kmeans(&reps, &subset, 3, 7, 300, 1e-4);
        assert!(!out.fallback);
        assert!(out.objective_trace.last().unwrap().abs() < 1e-12);
        // rows with the same direction share a cluster
        for group in 0..3usize {
            let c = out.assignment[group];
            assert_eq!(out.assignment[group + 3], c);
            assert_eq!(out.assignment[group + 6], c);
        }
    }

    #[test]
    fn kmeans_is_deterministic() {
        let rows = (0..8u32).map(|i| vec![(i % 4, 1.0), (4 + i, 0.3)]).collect();
        let reps = reps_from_rows(rows);
        let subset: Vec<u32> = (0..8).collect();
        let a = spherical_kmeans(&reps, &subset, 3, 99, 300, 1e-4);
        let b = spherical_kmeans(&reps, &subset, 3, 99, 300, 1e-4);
        assert_eq!(a.assignment, b.assignment);
    }

    #[test]
    fn kmeans_objective_is_non_increasing() {
        let rows = (0..12u32)
            .map(|i| vec![(i % 5, 1.0), (5 + (i % 3), 0.5), (20 + i, 0.1)])
            .collect();
        let reps = reps_from_rows(rows);
        let subset: Vec<u32> = (0..12).collect();
        let out = spherical_kmeans(&reps, &subset, 4, 3, 300, 0.0);
        for w in out.objective_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "objective rose: {w:?}");
        }
    }

    #[test]
    fn kmeans_groups_near_antipodal_pairs() {
        // two tight pairs of directions; the best 2-clustering keeps pairs together
        let rows = vec![
            vec![(0, 1.0)],
            vec![(0, 0.9806), (1, 0.1961)],
            vec![(2, 1.0)],
            vec![(2, 0.9806), (1, 0.1961)],
        ];
        let reps = reps_from_rows(rows.clone());
        let subset: Vec<u32> = (0..4).collect();
        let out = spherical_kmeans(&reps, &subset, 2, 11, 300, 1e-9);

        // exhaustive oracle over all bipartitions
        let cosine = |a: u32, b: u32| reps.row(a).dot_sparse(reps.row(b));
        let mut best_obj = f64::INFINITY;
        let mut best_mask = 0u32;
        for mask in 1..(1u32 << 4) - 1 {
            let mut obj = 0.0;
            for cluster in 0..2u32 {
                let members: Vec<u32> = (0..4)
                    .filter(|&i| ((mask >> i) & 1) == cluster)
                    .collect();
                if members.is_empty() {
                    obj = f64::INFINITY;
                    break;
                }
                // centroid = normalized mean of members
                let mut dense = [0.0; 3];
                for &m in &members {
                    for &(f, v) in reps.row(m).entries() {
                        dense[f as usize] += v;
                    }
                }
                let norm = dense.iter().map(|v| v * v).sum::<f64>().sqrt();
                for &m in &members {
                    let sim: f64 = reps.row(m).entries().iter().map(|&(f, v)| v * dense[f as usize] / norm).sum();
                    obj += 1.0 - sim;
                }
            }
            if obj < best_obj {
                best_obj = obj;
                best_mask = mask;
            }
            let _ = cosine;
        }
        // the oracle's best partition pairs (0,1) and (2,3)
        let oracle: Vec<u32> = (0..4).map(|i| (best_mask >> i) & 1).collect();
        assert_eq!(oracle[0], oracle[1]);
        assert_eq!(oracle[2], oracle[3]);
        assert_ne!(oracle[0], oracle[2]);

        assert_eq!(out.assignment[0], out.assignment[1]);
        assert_eq!(out.assignment[2], out.assignment[3]);
        assert_ne!(out.assignment[0], out.assignment[2]);
        let kmeans_obj = out.objective_trace.last().unwrap();
        assert!((kmeans_obj - best_obj).abs() < 1e-9);
    }

    #[test]
    fn kmeans_fallback_on_too_few_distinct_rows() {
        let rows = (0..5).map(|_| vec![(0u32, 1.0)]).collect();
        let reps = reps_from_rows(rows);
        let subset: Vec<u32> = (0..5).collect();
        let out = spherical_kmeans(&reps, &subset, 2, 1, 300, 1e-4);
        assert!(out.fallback);
        assert_eq!(out.assignment, vec![0, 1, 0, 1, 0]);
    }

    #[test]
    fn zero_rows_go_to_smallest_cluster() {
        let mut rows: Vec<Vec<(u32, f64)>> = vec![
            vec![(0, 1.0)],
            vec![(0, 0.99), (1, 0.141)],
            vec![(2, 1.0)],
        ];
        rows.push(vec![]); // label with no positives
        let reps = reps_from_rows(rows);
        let subset: Vec<u32> = (0..4).collect();
        let out = spherical_kmeans(&reps, &subset, 2, 5, 300, 1e-4);
        // the zero row lands in the cluster with one member (the {2} side)
        let zero_cluster = out.assignment[3];
        assert_eq!(out.assignment[2], zero_cluster);
        assert_ne!(out.assignment[0], zero_cluster);
    }

    /// Block-structured dataset that clusters like the nine-label example
    /// tree: root splits {0,1,2} | {3,4} | {5,6,7,8}, and the last subset
    /// splits again into {5,6} | {7} | {8}.
    fn nine_label_dataset() -> MultiLabelDataset<f64> {
        let mut rows = Vec::new();
        // labels 0..3 share features 0..3
        for l in 0..3u32 {
            rows.push((vec![(0, 1.0), (1 + l, 2.0)], vec![l]));
        }
        // labels 3,4 share features 10..12
        for l in 3..5u32 {
            rows.push((vec![(10, 1.0), (11 + (l - 3), 2.0)], vec![l]));
        }
        // labels 5,6 are nearly parallel on features 20,21
        rows.push((vec![(20, 1.0), (21, 0.1)], vec![5]));
        rows.push((vec![(20, 1.0), (21, 0.12)], vec![6]));
        // labels 7 and 8 sit on their own directions inside the 20.. block
        rows.push((vec![(20, 0.05), (25, 1.0)], vec![7]));
        rows.push((vec![(20, 0.05), (26, 1.0)], vec![8]));
        dataset_from_rows(rows, 0, 9).unwrap()
    }

    #[test]
    fn builds_nine_label_tree() {
        let ds = nine_label_dataset();
        let tree = build_label_tree(&ds, 3, 10, 42).unwrap();
        tree.validate().unwrap();

        assert_eq!(tree.n_labels, 9);
        assert_eq!(tree.n_meta_labels(), 4);
        assert_eq!(tree.n_nodes(), 14);
        assert_eq!(tree.classifier_count(), 13);
        assert_eq!(tree.depth, 3);

        let root = tree.root();
        assert_eq!(root.children.len(), 3);
        let mut subsets: Vec<Vec<u32>> = root
            .children
            .iter()
            .map(|&c| tree.node(c).labels.clone())
            .collect();
        subsets.sort();
        assert_eq!(subsets, vec![vec![0, 1, 2], vec![3, 4], vec![5, 6, 7, 8]]);

        // the {5,6,7,8} node splits into {5,6}, {7}, {8}
        let big = root
            .children
            .iter()
            .map(|&c| tree.node(c))
            .find(|n| n.labels == vec![5, 6, 7, 8])
            .unwrap();
        let mut sub: Vec<Vec<u32>> = big
            .children
            .iter()
            .map(|&c| tree.node(c).labels.clone())
            .collect();
        sub.sort();
        assert_eq!(sub, vec![vec![5, 6], vec![7], vec![8]]);

        // depth table: 1 node with 3 children, then 3 nodes, then the leaf
        // layer holding one more internal node, then its two leaves
        let summary = tree.summary();
        assert_eq!((summary[0].nodes, summary[0].children), (1, 3));
        assert_eq!(summary[1].nodes, 3);
        assert_eq!(summary[1].internal, 3);
        assert_eq!(summary[2].internal, 1);
        assert_eq!(summary[2].leaves + summary[3].leaves + 1, 10);
        assert_eq!(summary[3].nodes, 2);
    }

    #[test]
    fn small_label_count_degenerates_to_flat_tree() {
        let ds = dataset_from_rows::<f64>(
            (0..3u32).map(|l| (vec![(l, 1.0)], vec![l])).collect(),
            0,
            0,
        )
        .unwrap();
        let tree = build_label_tree(&ds, 5, 10, 1).unwrap();
        assert_eq!(tree.n_meta_labels(), 0);
        assert_eq!(tree.classifier_count(), 3);
        assert_eq!(tree.depth, 1);
        assert_eq!(tree.root().children.len(), 3);
        for &c in &tree.root().children {
            assert!(tree.node(c).is_leaf());
        }
    }

    #[test]
    fn depth_cap_of_one_attaches_all_leaves_to_root() {
        let ds = dataset_from_rows::<f64>(
            (0..7u32).map(|l| (vec![(l, 1.0)], vec![l])).collect(),
            0,
            0,
        )
        .unwrap();
        let tree = build_label_tree(&ds, 2, 1, 1).unwrap();
        assert_eq!(tree.depth, 1);
        assert_eq!(tree.root().children.len(), 7);
        assert_eq!(tree.n_meta_labels(), 0);
    }

    #[test]
    fn single_label_tree_has_one_internal_node_and_one_leaf() {
        let ds = dataset_from_rows::<f64>(vec![(vec![(0, 1.0)], vec![0])], 0, 0).unwrap();
        let tree = build_label_tree(&ds, 2, 5, 1).unwrap();
        assert_eq!(tree.n_nodes(), 2);
        assert_eq!(tree.classifier_count(), 1);
        let summary = tree.summary();
        assert_eq!(summary[0].nodes, 1);
        assert_eq!(summary[0].children, 1);
        assert_eq!(summary[1].leaves, 1);
    }

    #[test]
    fn balanced_tree_from_even_splitter() {
        // L = 27 labels, K = 3, even splits: depth i holds 3^i nodes
        let splitter = |subset: &[u32], _id: u32| -> Vec<Vec<u32>> {
            let size = subset.len() / 3;
            subset.chunks(size).map(|c| c.to_vec()).collect()
        };
        let tree = build_with_splitter(27, 3, 10, splitter).unwrap();
        tree.validate().unwrap();
        let summary = tree.summary();
        assert_eq!(tree.depth, 3);
        for (i, row) in summary.iter().enumerate().take(3) {
            assert_eq!(row.nodes, 3u32.pow(i as u32));
        }
        assert_eq!(summary[3].nodes, 27);
        assert_eq!(summary[3].leaves, 27);
    }

    #[test]
    fn classifier_accounting_holds() {
        let ds = nine_label_dataset();
        for (k, d_max) in [(3, 10), (2, 2), (4, 3), (9, 1)] {
            let tree = build_label_tree(&ds, k, d_max, 5).unwrap();
            let total_children: usize = tree.nodes.iter().map(|n| n.children.len()).sum();
            assert_eq!(total_children, tree.n_nodes() - 1);
            assert_eq!(
                tree.classifier_count(),
                tree.n_labels + tree.n_meta_labels()
            );
            assert!(tree.depth <= d_max);
        }
    }

    #[test]
    fn feature_coverage_union_equals_parent() {
        let ds = nine_label_dataset();
        let tree = build_label_tree(&ds, 3, 10, 42).unwrap();
        for node in tree.internal_nodes() {
            let parent_used = ds.used_features(&ds.instances_with_labels(&node.labels));
            let child_usages: Vec<_> = node
                .children
                .iter()
                .map(|&c| ds.used_features(&ds.instances_with_labels(&tree.node(c).labels)))
                .collect();
            let union = crate::data::FeatureUsage::union(child_usages.iter());
            assert_eq!(union, parent_used);
        }
    }

    #[test]
    fn json_roundtrip_and_validation() {
        let ds = nine_label_dataset();
        let tree = build_label_tree(&ds, 3, 10, 42).unwrap();
        let json = tree.to_json();
        let back = LabelTree::from_json(&json).unwrap();
        assert_eq!(back, tree);

        // tamper: a leaf with two labels must be rejected
        let mut broken = tree.clone();
        let leaf_id = broken
            .nodes
            .iter()
            .find(|n| n.is_leaf())
            .map(|n| n.id)
            .unwrap();
        broken.nodes[leaf_id as usize].labels = vec![0, 1];
        let text = serde_json::to_string(&broken).unwrap();
        assert!(LabelTree::from_json(&text).is_err());
    }

    #[test]
    fn rejects_bad_parameters() {
        let ds = nine_label_dataset();
        assert!(build_label_tree(&ds, 1, 3, 0).is_err());
        assert!(build_label_tree(&ds, 2, 0, 0).is_err());
    }
}
