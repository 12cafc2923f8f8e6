//! Deterministic synthetic datasets for tests, demos, and benchmarks.

use crate::data::{dataset_from_rows, MultiLabelDataset};
use crate::rng::{mix_seed, SplitMix64};
use crate::tree::{LabelTree, TreeNode};

/// Block-structured sparse dataset: labels come in blocks, and each block's
/// instances draw their features from a block-private range plus a small
/// shared range. This mimics the clustered sparsity that makes tree models
/// small.
#[derive(Clone, Copy, Debug)]
pub struct BlockSpec {
    pub instances: usize,
    pub features: u32,
    pub labels: u32,
    pub blocks: u32,
    /// Features at the top of the index range seen by every block.
    pub shared_features: u32,
    /// Non-zeros drawn from the instance's block range.
    pub block_nnz: u32,
    /// Non-zeros drawn from the shared range.
    pub shared_nnz: u32,
    /// Each instance carries 1..=this many labels from its block.
    pub max_labels: u32,
}

impl Default for BlockSpec {
    fn default() -> Self {
        BlockSpec {
            instances: 2_000,
            features: 5_000,
            labels: 200,
            blocks: 20,
            shared_features: 200,
            block_nnz: 15,
            shared_nnz: 5,
            max_labels: 3,
        }
    }
}

impl BlockSpec {
    pub fn generate(&self, seed: u64) -> MultiLabelDataset<f64> {
        assert!(self.blocks > 0 && self.labels.is_multiple_of(self.blocks));
        assert!(self.features > self.shared_features);
        let block_width = (self.features - self.shared_features) / self.blocks;
        let labels_per_block = self.labels / self.blocks;
        let shared_start = self.features - self.shared_features;

        let rows = (0..self.instances)
            .map(|i| {
                let mut rng = SplitMix64::new(mix_seed(seed, &[i as u64]));
                let block = (i as u32) % self.blocks;

                // primary label cycles through the block so every label
                // receives instances
                let primary = block * labels_per_block
                    + ((i as u32) / self.blocks) % labels_per_block;
                let mut labels = vec![primary];
                for _ in 1..=rng.below(self.max_labels as u64) {
                    labels.push(block * labels_per_block + rng.below(labels_per_block as u64) as u32);
                }

                let block_start = block * block_width;
                let mut entries: Vec<(u32, f64)> = Vec::new();
                for _ in 0..self.block_nnz {
                    let f = block_start + rng.below(block_width as u64) as u32;
                    entries.push((f, 0.25 + 1.75 * rng.next_f64()));
                }
                for _ in 0..self.shared_nnz {
                    let f = shared_start + rng.below(self.shared_features as u64) as u32;
                    entries.push((f, 0.25 + 1.75 * rng.next_f64()));
                }
                (entries, labels)
            })
            .collect();

        dataset_from_rows(rows, self.features, self.labels)
            .expect("generated rows are in range")
    }
}

/// Tiny separable dataset: label `j`'s instances carry only feature `j`.
/// A trained model of any kind ranks label `j` first for feature `j`.
pub fn one_feature_per_label(n_labels: u32, instances_per_label: usize) -> MultiLabelDataset<f64> {
    let rows = (0..n_labels)
        .flat_map(|label| {
            (0..instances_per_label)
                .map(move |i| (vec![(label, 1.0 + 0.1 * i as f64)], vec![label]))
        })
        .collect();
    dataset_from_rows(rows, n_labels, n_labels).expect("rows are in range")
}

/// The worked ten-label feature-reduction example: a root over three
/// internal nodes holding 2, 2 and 6 labels, whose instance subsets use
/// 10, 30 and 80 of the root's 100 features.
pub fn worked_alpha_example() -> (MultiLabelDataset<f64>, LabelTree) {
    let mut rows: Vec<(Vec<(u32, f64)>, Vec<u32>)> = Vec::new();
    // first group: labels 0,1 over features 0..10
    for (label, range) in [(0u32, 0..5u32), (1, 5..10)] {
        rows.push((range.map(|f| (f, 1.0)).collect(), vec![label]));
    }
    // second group: labels 2,3 over features 5..35
    for (label, range) in [(2u32, 5..20u32), (3, 20..35)] {
        rows.push((range.map(|f| (f, 1.0)).collect(), vec![label]));
    }
    // third group: labels 4..10 over features 20..100
    for label in 4..10u32 {
        let start = 20 + (label - 4) * 14;
        let end = if label == 9 { 100 } else { start + 14 };
        rows.push(((start..end).map(|f| (f, 1.0)).collect(), vec![label]));
    }
    let ds = dataset_from_rows(rows, 100, 10).expect("rows are in range");

    let groups: [&[u32]; 3] = [&[0, 1], &[2, 3], &[4, 5, 6, 7, 8, 9]];
    let mut nodes = vec![TreeNode {
        id: 0,
        depth: 0,
        children: vec![1, 2, 3],
        labels: (0..10).collect(),
    }];
    let mut next_id = 4u32;
    for (i, group) in groups.iter().enumerate() {
        let children: Vec<u32> = (0..group.len()).map(|j| next_id + j as u32).collect();
        next_id += group.len() as u32;
        nodes.push(TreeNode {
            id: 1 + i as u32,
            depth: 1,
            children,
            labels: group.to_vec(),
        });
    }
    for (i, group) in groups.iter().enumerate() {
        for (j, &label) in group.iter().enumerate() {
            nodes.push(TreeNode {
                id: nodes[1 + i].children[j],
                depth: 2,
                children: vec![],
                labels: vec![label],
            });
        }
    }
    nodes.sort_by_key(|n| n.id);
    let tree = LabelTree::from_parts(3, 5, 10, nodes).expect("hand-built tree is valid");
    (ds, tree)
}
