//! Sparse data ingestion and feature-usage bookkeeping.
//!
//! Datasets are immutable once constructed and safe to share across
//! threads. The on-disk format is the multi-label LIBSVM text format:
//! one instance per line, `lab1,lab2,... idx:val idx:val ...`, with
//! 1-based indices on disk and 0-based indices in memory.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Sparse vector with strictly increasing feature indices and no explicit
/// zero values.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct SparseVector<S> {
    entries: Vec<(u32, S)>,
}

impl<S: Scalar> SparseVector<S> {
    /// Validates ordering and nonzero values.
    pub fn new(entries: Vec<(u32, S)>) -> Result<Self> {
        for window in entries.windows(2) {
            if window[1].0 <= window[0].0 {
                return Err(Error::Data(format!(
                    "feature indices not strictly increasing: {} then {}",
                    window[0].0, window[1].0
                )));
            }
        }
        if let Some((idx, _)) = entries.iter().find(|(_, v)| *v == S::zero()) {
            return Err(Error::Data(format!("explicit zero value at feature {idx}")));
        }
        Ok(SparseVector { entries })
    }

    /// Caller guarantees the invariants hold.
    pub(crate) fn from_sorted_nonzero(entries: Vec<(u32, S)>) -> Self {
        debug_assert!(entries.windows(2).all(|w| w[0].0 < w[1].0));
        debug_assert!(entries.iter().all(|(_, v)| *v != S::zero()));
        SparseVector { entries }
    }

    pub fn empty() -> Self {
        SparseVector {
            entries: Vec::new(),
        }
    }

    pub fn entries(&self) -> &[(u32, S)] {
        &self.entries
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn max_index(&self) -> Option<u32> {
        self.entries.last().map(|(i, _)| *i)
    }

    pub fn squared_norm(&self) -> S {
        self.entries.iter().map(|&(_, v)| v * v).sum()
    }

    pub fn norm(&self) -> S {
        self.squared_norm().sqrt()
    }

    /// Dot product against a dense vector indexed by feature.
    pub fn dot_dense(&self, dense: &[S]) -> S {
        self.entries
            .iter()
            .map(|&(i, v)| dense[i as usize] * v)
            .sum()
    }

    /// Dot product against another sparse vector (index merge).
    pub fn dot_sparse(&self, other: &SparseVector<S>) -> S {
        let (mut a, mut b) = (self.entries.iter().peekable(), other.entries.iter().peekable());
        let mut acc = S::zero();
        while let (Some(&&(ia, va)), Some(&&(ib, vb))) = (a.peek(), b.peek()) {
            match ia.cmp(&ib) {
                std::cmp::Ordering::Less => {
                    a.next();
                }
                std::cmp::Ordering::Greater => {
                    b.next();
                }
                std::cmp::Ordering::Equal => {
                    acc += va * vb;
                    a.next();
                    b.next();
                }
            }
        }
        acc
    }
}

/// Compressed sparse rows over a fixed feature count.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseRowMatrix<S> {
    rows: Vec<SparseVector<S>>,
    n_features: u32,
}

impl<S: Scalar> SparseRowMatrix<S> {
    pub fn new(rows: Vec<SparseVector<S>>, n_features: u32) -> Result<Self> {
        for (r, row) in rows.iter().enumerate() {
            if let Some(max) = row.max_index() {
                if max >= n_features {
                    return Err(Error::Data(format!(
                        "row {r} uses feature {max} but n_features is {n_features}"
                    )));
                }
            }
        }
        Ok(SparseRowMatrix { rows, n_features })
    }

    pub fn rows(&self) -> &[SparseVector<S>] {
        &self.rows
    }

    pub fn row(&self, i: usize) -> &SparseVector<S> {
        &self.rows[i]
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_features(&self) -> u32 {
        self.n_features
    }
}

/// The set of features that carry a value in some selection of instances.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct FeatureUsage {
    used: Vec<u32>,
}

impl FeatureUsage {
    pub fn count(&self) -> usize {
        self.used.len()
    }

    /// Sorted feature indices.
    pub fn as_slice(&self) -> &[u32] {
        &self.used
    }

    pub fn contains(&self, feature: u32) -> bool {
        self.used.binary_search(&feature).is_ok()
    }

    /// Union of several usage sets.
    pub fn union<'a>(sets: impl IntoIterator<Item = &'a FeatureUsage>) -> FeatureUsage {
        let mut all: Vec<u32> = sets.into_iter().flat_map(|s| s.used.iter().copied()).collect();
        all.sort_unstable();
        all.dedup();
        FeatureUsage { used: all }
    }
}

/// Multi-label dataset: sparse features plus one label set per instance.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiLabelDataset<S> {
    features: SparseRowMatrix<S>,
    labels: Vec<Vec<u32>>,
    n_labels: u32,
    /// label -> ascending list of instances carrying it
    label_index: Vec<Vec<u32>>,
}

impl<S: Scalar> MultiLabelDataset<S> {
    /// `labels[i]` is the label set of row `i`; it is sorted and deduplicated
    /// here. Every label must be `< n_labels`.
    pub fn new(
        features: SparseRowMatrix<S>,
        labels: Vec<Vec<u32>>,
        n_labels: u32,
    ) -> Result<Self> {
        if labels.len() != features.n_rows() {
            return Err(Error::Data(format!(
                "{} label sets for {} rows",
                labels.len(),
                features.n_rows()
            )));
        }
        let mut labels = labels;
        for (r, set) in labels.iter_mut().enumerate() {
            set.sort_unstable();
            set.dedup();
            if let Some(&max) = set.last() {
                if max >= n_labels {
                    return Err(Error::Data(format!(
                        "row {r} has label {max} but n_labels is {n_labels}"
                    )));
                }
            }
        }
        let mut label_index = vec![Vec::new(); n_labels as usize];
        for (r, set) in labels.iter().enumerate() {
            for &l in set {
                label_index[l as usize].push(r as u32);
            }
        }
        Ok(MultiLabelDataset {
            features,
            labels,
            n_labels,
            label_index,
        })
    }

    pub fn n_instances(&self) -> usize {
        self.features.n_rows()
    }

    pub fn n_features(&self) -> u32 {
        self.features.n_features()
    }

    pub fn n_labels(&self) -> u32 {
        self.n_labels
    }

    pub fn features(&self) -> &SparseRowMatrix<S> {
        &self.features
    }

    pub fn row(&self, i: usize) -> &SparseVector<S> {
        self.features.row(i)
    }

    /// Sorted label set of row `i`.
    pub fn labels(&self, i: usize) -> &[u32] {
        &self.labels[i]
    }

    /// Ascending instances that carry `label`.
    pub fn instances_with_label(&self, label: u32) -> &[u32] {
        &self.label_index[label as usize]
    }

    /// Instances whose label set intersects `label_subset`, ascending.
    pub fn instances_with_labels(&self, label_subset: &[u32]) -> Vec<u32> {
        let mut out: Vec<u32> = label_subset
            .iter()
            .flat_map(|&l| self.label_index[l as usize].iter().copied())
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Union of feature indices over the selected rows.
    pub fn used_features(&self, instances: &[u32]) -> FeatureUsage {
        let mut used: Vec<u32> = instances
            .iter()
            .flat_map(|&r| self.features.row(r as usize).entries().iter().map(|&(i, _)| i))
            .collect();
        used.sort_unstable();
        used.dedup();
        FeatureUsage { used }
    }

    /// Drops globally unused feature columns, renumbering the survivors.
    pub fn compact_features(&self) -> (Self, FeatureRemap) {
        let all: Vec<u32> = (0..self.n_instances() as u32).collect();
        let remap = FeatureRemap {
            new_to_old: self.used_features(&all).used,
        };
        let rows = self
            .features
            .rows()
            .iter()
            .map(|row| {
                SparseVector::from_sorted_nonzero(
                    row.entries()
                        .iter()
                        .map(|&(i, v)| (remap.old_to_new(i).expect("used feature"), v))
                        .collect(),
                )
            })
            .collect();
        let features = SparseRowMatrix {
            rows,
            n_features: remap.len() as u32,
        };
        let compacted = MultiLabelDataset {
            features,
            labels: self.labels.clone(),
            n_labels: self.n_labels,
            label_index: self.label_index.clone(),
        };
        (compacted, remap)
    }

    /// Writes the dataset in LIBSVM multi-label text format. `zero_based`
    /// selects the on-disk index base (the conventional format is 1-based).
    ///
    /// An instance with no labels and no features serializes to an empty
    /// line, which a reparse skips: such rows are not representable.
    pub fn write_libsvm<W: Write>(&self, mut w: W, zero_based: bool) -> Result<()> {
        let off = if zero_based { 0 } else { 1 };
        for i in 0..self.n_instances() {
            let labels: Vec<String> = self.labels[i].iter().map(|l| (l + off).to_string()).collect();
            write!(w, "{}", labels.join(","))?;
            for &(idx, v) in self.features.row(i).entries() {
                write!(w, " {}:{}", idx + off, v)?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Injective old-to-new feature renumbering produced by
/// [`MultiLabelDataset::compact_features`].
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureRemap {
    new_to_old: Vec<u32>,
}

impl FeatureRemap {
    pub fn old_to_new(&self, old: u32) -> Option<u32> {
        self.new_to_old.binary_search(&old).ok().map(|i| i as u32)
    }

    pub fn new_to_old(&self, new: u32) -> Option<u32> {
        self.new_to_old.get(new as usize).copied()
    }

    pub fn len(&self) -> usize {
        self.new_to_old.len()
    }

    pub fn is_empty(&self) -> bool {
        self.new_to_old.is_empty()
    }
}

/// Options for [`parse_libsvm_multilabel`].
#[derive(Clone, Debug, Default)]
pub struct ParseOptions {
    /// Declared feature count; must cover every index seen.
    pub n_features: Option<u32>,
    /// Declared label count; must cover every label seen.
    pub n_labels: Option<u32>,
    /// When set, parsing fails unless exactly this many instances are read.
    pub expected_instances: Option<usize>,
    /// Treat on-disk indices (labels and features) as 0-based.
    pub zero_based: bool,
}

/// Sidecar metadata: a plain-text line of `n=<int> L=<int>` tokens.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SidecarMeta {
    pub n_features: Option<u32>,
    pub n_labels: Option<u32>,
}

pub fn parse_sidecar(text: &str) -> Result<SidecarMeta> {
    let mut meta = SidecarMeta::default();
    for (lineno, line) in text.lines().enumerate() {
        for token in line.split_whitespace() {
            let (key, value) = token
                .split_once('=')
                .ok_or_else(|| Error::parse(lineno + 1, format!("bad sidecar token `{token}`")))?;
            let value: u32 = value
                .parse()
                .map_err(|_| Error::parse(lineno + 1, format!("bad sidecar value `{token}`")))?;
            match key {
                "n" => meta.n_features = Some(value),
                "L" => meta.n_labels = Some(value),
                _ => return Err(Error::parse(lineno + 1, format!("unknown sidecar key `{key}`"))),
            }
        }
    }
    Ok(meta)
}

/// Parses the LIBSVM multi-label text format.
///
/// Each nonempty line is `lab1,lab2,... idx:val idx:val ...`. The label
/// list may be empty (the line then starts at the first `idx:val` pair).
/// Lines are whitespace-tolerant. Feature indices must be strictly
/// increasing within a line; explicit zero values are dropped. In the
/// default 1-based mode an index of 0 is an error.
pub fn parse_libsvm_multilabel<S: Scalar, R: BufRead>(
    reader: R,
    opts: &ParseOptions,
) -> Result<MultiLabelDataset<S>> {
    let offset: u32 = if opts.zero_based { 0 } else { 1 };
    let parse_index = |raw: &str, what: &str, lineno: usize| -> Result<u32> {
        let idx: u32 = raw
            .parse()
            .map_err(|_| Error::parse(lineno, format!("non-numeric {what} `{raw}`")))?;
        if idx < offset {
            return Err(Error::parse(lineno, format!("{what} 0 in 1-based mode")));
        }
        Ok(idx - offset)
    };

    let mut rows: Vec<SparseVector<S>> = Vec::new();
    let mut labels: Vec<Vec<u32>> = Vec::new();
    let mut max_feature: Option<u32> = None;
    let mut max_label: Option<u32> = None;

    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line?;
        let mut tokens = line.split_whitespace().peekable();
        if tokens.peek().is_none() {
            continue;
        }

        let mut row_labels = Vec::new();
        if let Some(first) = tokens.peek() {
            if !first.contains(':') {
                let list = tokens.next().unwrap();
                for raw in list.split(',') {
                    let label = parse_index(raw, "label", lineno)?;
                    max_label = Some(max_label.map_or(label, |m: u32| m.max(label)));
                    row_labels.push(label);
                }
            }
        }

        let mut entries: Vec<(u32, S)> = Vec::new();
        let mut prev: Option<u32> = None;
        for token in tokens {
            let (raw_idx, raw_val) = token
                .split_once(':')
                .ok_or_else(|| Error::parse(lineno, format!("malformed pair `{token}` (missing colon)")))?;
            let idx = parse_index(raw_idx, "feature index", lineno)?;
            let value: f64 = raw_val
                .parse()
                .map_err(|_| Error::parse(lineno, format!("non-numeric value `{raw_val}`")))?;
            if !value.is_finite() {
                return Err(Error::parse(lineno, format!("non-finite value `{raw_val}`")));
            }
            match prev {
                Some(p) if idx == p => {
                    return Err(Error::parse(lineno, format!("duplicate feature index {}", idx + offset)));
                }
                Some(p) if idx < p => {
                    return Err(Error::parse(lineno, format!("non-increasing feature index {}", idx + offset)));
                }
                _ => {}
            }
            prev = Some(idx);
            max_feature = Some(max_feature.map_or(idx, |m: u32| m.max(idx)));
            if value != 0.0 {
                entries.push((idx, crate::scalar::cast(value)));
            }
        }

        rows.push(SparseVector::from_sorted_nonzero(entries));
        labels.push(row_labels);
    }

    if let Some(expected) = opts.expected_instances {
        if rows.len() != expected {
            return Err(Error::Data(format!(
                "expected {expected} instances, found {}",
                rows.len()
            )));
        }
    }

    let seen_n = max_feature.map_or(0, |m| m + 1);
    let n_features = match opts.n_features {
        Some(declared) if declared < seen_n => {
            return Err(Error::Data(format!(
                "declared n={declared} but the data uses {seen_n} features"
            )));
        }
        Some(declared) => declared,
        None => seen_n,
    };
    let seen_l = max_label.map_or(0, |m| m + 1);
    let n_labels = match opts.n_labels {
        Some(declared) if declared < seen_l => {
            return Err(Error::Data(format!(
                "declared L={declared} but the data uses {seen_l} labels"
            )));
        }
        Some(declared) => declared,
        None => seen_l,
    };

    let features = SparseRowMatrix::new(rows, n_features)?;
    MultiLabelDataset::new(features, labels, n_labels)
}

/// Convenience constructor used by tests and generators: builds a dataset
/// from `(entries, labels)` per row, inferring dimensions when larger than
/// the provided minimums.
pub fn dataset_from_rows<S: Scalar>(
    rows: Vec<(Vec<(u32, f64)>, Vec<u32>)>,
    min_features: u32,
    min_labels: u32,
) -> Result<MultiLabelDataset<S>> {
    let mut n = min_features;
    let mut l = min_labels;
    let mut vectors = Vec::with_capacity(rows.len());
    let mut label_sets = Vec::with_capacity(rows.len());
    for (entries, labels) in rows {
        let mut map = BTreeMap::new();
        for (i, v) in entries {
            map.insert(i, v);
        }
        let entries: Vec<(u32, S)> = map
            .into_iter()
            .filter(|&(_, v)| v != 0.0)
            .map(|(i, v)| (i, crate::scalar::cast(v)))
            .collect();
        if let Some(&(i, _)) = entries.last() {
            n = n.max(i + 1);
        }
        if let Some(&m) = labels.iter().max() {
            l = l.max(m + 1);
        }
        vectors.push(SparseVector::from_sorted_nonzero(entries));
        label_sets.push(labels);
    }
    MultiLabelDataset::new(SparseRowMatrix::new(vectors, n)?, label_sets, l)
}
