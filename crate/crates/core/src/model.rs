//! Model containers, pruning, size accounting, and the binary model file.
//!
//! File layout (little-endian):
//!
//! ```text
//! magic "XMLM" | version u32 | kind u8 | loss u8 | n u32 | L u32 | lambda f64
//! [tree kind only: tree_json_len u64 | tree_json bytes]
//! classifier_count u32
//! per classifier: entry_count u32 | (index u32, value f64) * entry_count
//! ```
//!
//! Every weight entry occupies exactly 12 bytes (4-byte index + 8-byte
//! value), so the weight payload is `12 * nnz` bytes. A dense flat model
//! would need `8 * n * L` bytes, which is what [`OvrModel::size_bytes`]
//! reports.

use std::io::{Read, Write};

use crate::data::SparseVector;
use crate::error::{Error, Result};
use crate::scalar::{cast, Scalar};
use crate::solver::{LossKind, LossSpec};
use crate::tree::LabelTree;

pub const MODEL_MAGIC: [u8; 4] = *b"XMLM";
pub const MODEL_VERSION: u32 = 1;

/// Bytes per stored weight entry: 4-byte index plus 8-byte value.
pub const SPARSE_ENTRY_BYTES: u64 = 12;
/// Bytes per weight of a dense model.
pub const DENSE_WEIGHT_BYTES: u64 = 8;

/// Sparse weight vector over the original feature space.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct WeightVector<S> {
    entries: Vec<(u32, S)>,
}

impl<S: Scalar> WeightVector<S> {
    pub(crate) fn from_sorted(entries: Vec<(u32, S)>) -> Self {
        debug_assert!(entries.windows(2).all(|w| w[0].0 < w[1].0));
        debug_assert!(entries.iter().all(|&(_, v)| v != S::zero()));
        WeightVector { entries }
    }

    pub fn new(entries: Vec<(u32, S)>) -> Result<Self> {
        for w in entries.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(Error::Data("weight indices not strictly increasing".into()));
            }
        }
        if entries.iter().any(|&(_, v)| v == S::zero()) {
            return Err(Error::Data("explicit zero weight".into()));
        }
        Ok(WeightVector { entries })
    }

    pub fn entries(&self) -> &[(u32, S)] {
        &self.entries
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn get(&self, feature: u32) -> Option<S> {
        self.entries
            .binary_search_by_key(&feature, |&(f, _)| f)
            .ok()
            .map(|i| self.entries[i].1)
    }

    /// Decision value `w . x` (sorted-index merge).
    pub fn dot(&self, x: &SparseVector<S>) -> S {
        let (mut i, mut j) = (0, 0);
        let xs = x.entries();
        let mut acc = S::zero();
        while i < self.entries.len() && j < xs.len() {
            match self.entries[i].0.cmp(&xs[j].0) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    acc += self.entries[i].1 * xs[j].1;
                    i += 1;
                    j += 1;
                }
            }
        }
        acc
    }

    /// Drops entries with `|value| <= tau`; survivors are untouched.
    pub fn pruned(&self, tau: f64) -> Self {
        let tau: S = cast(tau);
        WeightVector {
            entries: self
                .entries
                .iter()
                .copied()
                .filter(|&(_, v)| v.abs() > tau)
                .collect(),
        }
    }
}

/// Flat one-vs-rest model: one classifier per label.
#[derive(Clone, Debug, PartialEq)]
pub struct OvrModel<S> {
    pub n_features: u32,
    pub n_labels: u32,
    pub loss: LossSpec,
    pub classifiers: Vec<WeightVector<S>>,
}

/// Tree model: one classifier per (internal node, child) edge, indexed by
/// node id and child ordinal.
#[derive(Clone, Debug, PartialEq)]
pub struct TreeModel<S> {
    pub n_features: u32,
    pub n_labels: u32,
    pub loss: LossSpec,
    pub tree: LabelTree,
    /// `node_classifiers[node id][child ordinal]`; empty for leaves.
    pub node_classifiers: Vec<Vec<WeightVector<S>>>,
}

impl<S: Scalar> OvrModel<S> {
    pub fn nnz(&self) -> usize {
        self.classifiers.iter().map(|c| c.nnz()).sum()
    }

    /// Dense accounting: a flat model stores every weight value.
    pub fn size_bytes(&self) -> u64 {
        DENSE_WEIGHT_BYTES * self.n_features as u64 * self.n_labels as u64
    }

    pub fn pruned(&self, tau: f64) -> Self {
        OvrModel {
            n_features: self.n_features,
            n_labels: self.n_labels,
            loss: self.loss,
            classifiers: self.classifiers.iter().map(|c| c.pruned(tau)).collect(),
        }
    }
}

impl<S: Scalar> TreeModel<S> {
    pub fn nnz(&self) -> usize {
        self.node_classifiers
            .iter()
            .flat_map(|per_node| per_node.iter())
            .map(|c| c.nnz())
            .sum()
    }

    /// Sparse accounting: index + value per stored weight.
    pub fn size_bytes(&self) -> u64 {
        SPARSE_ENTRY_BYTES * self.nnz() as u64
    }

    pub fn pruned(&self, tau: f64) -> Self {
        TreeModel {
            n_features: self.n_features,
            n_labels: self.n_labels,
            loss: self.loss,
            tree: self.tree.clone(),
            node_classifiers: self
                .node_classifiers
                .iter()
                .map(|per_node| per_node.iter().map(|c| c.pruned(tau)).collect())
                .collect(),
        }
    }

    /// Classifiers flattened in (node id, child ordinal) order.
    pub fn classifiers(&self) -> impl Iterator<Item = &WeightVector<S>> {
        self.node_classifiers.iter().flat_map(|per_node| per_node.iter())
    }
}

/// Either kind of trained model, as stored in a model file.
#[derive(Clone, Debug, PartialEq)]
pub enum Model<S> {
    Ovr(OvrModel<S>),
    Tree(TreeModel<S>),
}

impl<S: Scalar> Model<S> {
    pub fn nnz(&self) -> usize {
        match self {
            Model::Ovr(m) => m.nnz(),
            Model::Tree(m) => m.nnz(),
        }
    }

    pub fn size_bytes(&self) -> u64 {
        match self {
            Model::Ovr(m) => m.size_bytes(),
            Model::Tree(m) => m.size_bytes(),
        }
    }

    pub fn pruned(&self, tau: f64) -> Self {
        match self {
            Model::Ovr(m) => Model::Ovr(m.pruned(tau)),
            Model::Tree(m) => Model::Tree(m.pruned(tau)),
        }
    }

    pub fn n_features(&self) -> u32 {
        match self {
            Model::Ovr(m) => m.n_features,
            Model::Tree(m) => m.n_features,
        }
    }

    pub fn n_labels(&self) -> u32 {
        match self {
            Model::Ovr(m) => m.n_labels,
            Model::Tree(m) => m.n_labels,
        }
    }

    pub fn loss(&self) -> LossSpec {
        match self {
            Model::Ovr(m) => m.loss,
            Model::Tree(m) => m.loss,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Model::Ovr(_) => "ovr",
            Model::Tree(_) => "tree",
        }
    }
}

/// Removes every weight with `|value| <= tau` from the model.
pub fn prune_weights<S: Scalar>(model: &Model<S>, tau: f64) -> Result<Model<S>> {
    if !(tau >= 0.0) {
        return Err(Error::InvalidParam(format!("tau must be non-negative, got {tau}")));
    }
    Ok(model.pruned(tau))
}

// ---------------------------------------------------------------------------
// binary model file (f64 weights on disk)
// ---------------------------------------------------------------------------

struct ByteWriter<W: Write> {
    inner: W,
    written: u64,
}

impl<W: Write> ByteWriter<W> {
    fn u8(&mut self, v: u8) -> Result<()> {
        self.written += 1;
        Ok(self.inner.write_all(&[v])?)
    }
    fn u32(&mut self, v: u32) -> Result<()> {
        self.written += 4;
        Ok(self.inner.write_all(&v.to_le_bytes())?)
    }
    fn u64(&mut self, v: u64) -> Result<()> {
        self.written += 8;
        Ok(self.inner.write_all(&v.to_le_bytes())?)
    }
    fn f64(&mut self, v: f64) -> Result<()> {
        self.written += 8;
        Ok(self.inner.write_all(&v.to_le_bytes())?)
    }
    fn bytes(&mut self, v: &[u8]) -> Result<()> {
        self.written += v.len() as u64;
        Ok(self.inner.write_all(v)?)
    }
}

struct ByteReader<R: Read> {
    inner: R,
}

impl<R: Read> ByteReader<R> {
    fn u8(&mut self) -> Result<u8> {
        let mut buf = [0u8; 1];
        self.inner.read_exact(&mut buf)?;
        Ok(buf[0])
    }
    fn u32(&mut self) -> Result<u32> {
        let mut buf = [0u8; 4];
        self.inner.read_exact(&mut buf)?;
        Ok(u32::from_le_bytes(buf))
    }
    fn u64(&mut self) -> Result<u64> {
        let mut buf = [0u8; 8];
        self.inner.read_exact(&mut buf)?;
        Ok(u64::from_le_bytes(buf))
    }
    fn f64(&mut self) -> Result<f64> {
        let mut buf = [0u8; 8];
        self.inner.read_exact(&mut buf)?;
        Ok(f64::from_le_bytes(buf))
    }
    fn bytes(&mut self, len: usize) -> Result<Vec<u8>> {
        let mut buf = vec![0u8; len];
        self.inner.read_exact(&mut buf)?;
        Ok(buf)
    }
}

impl Model<f64> {
    /// Writes the model; returns the number of bytes written.
    pub fn save<W: Write>(&self, writer: W) -> Result<u64> {
        let mut w = ByteWriter {
            inner: writer,
            written: 0,
        };
        w.bytes(&MODEL_MAGIC)?;
        w.u32(MODEL_VERSION)?;
        let kind = match self {
            Model::Ovr(_) => 0u8,
            Model::Tree(_) => 1u8,
        };
        w.u8(kind)?;
        w.u8(self.loss().kind.id())?;
        w.u32(self.n_features())?;
        w.u32(self.n_labels())?;
        w.f64(self.loss().lambda)?;

        let classifiers: Vec<&WeightVector<f64>> = match self {
            Model::Ovr(m) => m.classifiers.iter().collect(),
            Model::Tree(m) => {
                let json = m.tree.to_json();
                w.u64(json.len() as u64)?;
                w.bytes(json.as_bytes())?;
                m.classifiers().collect()
            }
        };
        w.u32(classifiers.len() as u32)?;
        for classifier in classifiers {
            w.u32(classifier.nnz() as u32)?;
            for &(idx, value) in classifier.entries() {
                w.u32(idx)?;
                w.f64(value)?;
            }
        }
        Ok(w.written)
    }

    pub fn save_to_path(&self, path: impl AsRef<std::path::Path>) -> Result<u64> {
        let file = std::fs::File::create(path)?;
        let mut buf = std::io::BufWriter::new(file);
        let written = self.save(&mut buf)?;
        buf.flush()?;
        Ok(written)
    }

    pub fn load<R: Read>(reader: R) -> Result<Self> {
        let mut r = ByteReader { inner: reader };
        let magic = r.bytes(4)?;
        if magic != MODEL_MAGIC {
            return Err(Error::ModelFormat("bad magic".into()));
        }
        let version = r.u32()?;
        if version != MODEL_VERSION {
            return Err(Error::ModelFormat(format!("unsupported version {version}")));
        }
        let kind = r.u8()?;
        let loss_kind = LossKind::from_id(r.u8()?)
            .ok_or_else(|| Error::ModelFormat("unknown loss id".into()))?;
        let n_features = r.u32()?;
        let n_labels = r.u32()?;
        let lambda = r.f64()?;
        let loss = LossSpec::new(loss_kind, lambda)
            .map_err(|e| Error::ModelFormat(e.to_string()))?;

        let tree = match kind {
            0 => None,
            1 => {
                let len = r.u64()?;
                if len > (1 << 30) {
                    return Err(Error::ModelFormat(format!("tree blob of {len} bytes")));
                }
                let json = r.bytes(len as usize)?;
                let text = std::str::from_utf8(&json)
                    .map_err(|_| Error::ModelFormat("tree JSON is not UTF-8".into()))?;
                Some(LabelTree::from_json(text)?)
            }
            other => return Err(Error::ModelFormat(format!("unknown model kind {other}"))),
        };

        let count = r.u32()? as usize;
        // capacity hints are capped: the lengths come from the file
        let mut classifiers = Vec::with_capacity(count.min(1 << 20));
        for _ in 0..count {
            let nnz = r.u32()? as usize;
            let mut entries = Vec::with_capacity(nnz.min(1 << 20));
            for _ in 0..nnz {
                let idx = r.u32()?;
                let value = r.f64()?;
                if idx >= n_features {
                    return Err(Error::ModelFormat(format!(
                        "weight index {idx} out of range"
                    )));
                }
                entries.push((idx, value));
            }
            classifiers.push(
                WeightVector::new(entries).map_err(|e| Error::ModelFormat(e.to_string()))?,
            );
        }

        match tree {
            None => {
                if classifiers.len() != n_labels as usize {
                    return Err(Error::ModelFormat(format!(
                        "flat model expects {n_labels} classifiers, found {}",
                        classifiers.len()
                    )));
                }
                Ok(Model::Ovr(OvrModel {
                    n_features,
                    n_labels,
                    loss,
                    classifiers,
                }))
            }
            Some(tree) => {
                if tree.n_labels != n_labels {
                    return Err(Error::ModelFormat("tree/header label count mismatch".into()));
                }
                if classifiers.len() != tree.classifier_count() as usize {
                    return Err(Error::ModelFormat(format!(
                        "tree model expects {} classifiers, found {}",
                        tree.classifier_count(),
                        classifiers.len()
                    )));
                }
                let mut iter = classifiers.into_iter();
                let mut node_classifiers = Vec::with_capacity(tree.n_nodes());
                for node in &tree.nodes {
                    node_classifiers.push(
                        (0..node.children.len())
                            .map(|_| iter.next().expect("count checked"))
                            .collect(),
                    );
                }
                Ok(Model::Tree(TreeModel {
                    n_features,
                    n_labels,
                    loss,
                    tree,
                    node_classifiers,
                }))
            }
        }
    }

    pub fn load_from_path(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Model::load(std::io::BufReader::new(file))
    }

    /// Size in bytes of the weight-entry payload: exactly `12 * nnz`.
    pub fn weight_payload_bytes(&self) -> u64 {
        SPARSE_ENTRY_BYTES * self.nnz() as u64
    }

    /// Size in bytes of everything that is not a weight entry: header,
    /// optional tree blob, and per-classifier entry counts.
    pub fn overhead_bytes(&self) -> u64 {
        let header = 4 + 4 + 1 + 1 + 4 + 4 + 8;
        let tree = match self {
            Model::Ovr(_) => 0,
            Model::Tree(m) => 8 + m.tree.to_json().len() as u64,
        };
        let counts = 4 + 4 * match self {
            Model::Ovr(m) => m.classifiers.len() as u64,
            Model::Tree(m) => m.tree.classifier_count() as u64,
        };
        header + tree + counts
    }
}
