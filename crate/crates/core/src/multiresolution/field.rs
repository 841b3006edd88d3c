use std::collections::BTreeMap;

use crate::error::{MrError, Result};
use crate::mesh::{CellIndex, MeshGeometry, MeshTree};

/// Per-population cell averages on the complete leaves of a tree.
///
/// Values are stored cell-major: the `q` populations of leaf `i` live at
/// `values[i * q..(i + 1) * q]`, leaves ordered left to right.
#[derive(Debug, Clone, PartialEq)]
pub struct LeafField {
    tree: MeshTree,
    leaves: Vec<CellIndex>,
    q: usize,
    values: Vec<f64>,
}

impl LeafField {
    pub fn new(tree: MeshTree, q: usize, values: Vec<f64>) -> Result<Self> {
        let leaves = tree.complete_leaves();
        if values.len() != leaves.len() * q {
            return Err(MrError::LengthMismatch { left: values.len(), right: leaves.len() * q });
        }
        Ok(Self { tree, leaves, q, values })
    }

    /// Field sampled leaf by leaf.
    pub fn from_fn<F>(tree: MeshTree, q: usize, mut f: F) -> Self
    where
        F: FnMut(CellIndex, &mut [f64]),
    {
        let leaves = tree.complete_leaves();
        let mut values = vec![0.0; leaves.len() * q];
        for (leaf, chunk) in leaves.iter().zip(values.chunks_exact_mut(q)) {
            f(*leaf, chunk);
        }
        Self { tree, leaves, q, values }
    }

    /// Field on the full tree, i.e. on every finest cell.
    pub fn on_full_tree(geometry: MeshGeometry, q: usize, finest: Vec<f64>) -> Result<Self> {
        Self::new(MeshTree::full(geometry), q, finest)
    }

    pub fn tree(&self) -> &MeshTree {
        &self.tree
    }

    pub fn geometry(&self) -> &MeshGeometry {
        self.tree.geometry()
    }

    pub fn leaves(&self) -> &[CellIndex] {
        &self.leaves
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn len(&self) -> usize {
        self.leaves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.leaves.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn leaf_values(&self, i: usize) -> &[f64] {
        &self.values[i * self.q..(i + 1) * self.q]
    }

    pub fn iter(&self) -> impl Iterator<Item = (CellIndex, &[f64])> {
        self.leaves.iter().copied().zip(self.values.chunks_exact(self.q))
    }

    /// Position of `c` among the complete leaves.
    pub fn find(&self, c: CellIndex) -> Option<usize> {
        let max = self.tree.max_level();
        if c.level > max {
            return None;
        }
        let key = c.pos << (max - c.level);
        let i = self.leaves.binary_search_by_key(&key, |l| l.pos << (max - l.level)).ok()?;
        (self.leaves[i] == c).then_some(i)
    }

    pub fn get(&self, c: CellIndex) -> Option<&[f64]> {
        self.find(c).map(|i| self.leaf_values(i))
    }

    /// `Σ_leaves width · value[h]`, the discrete integral of population `h`.
    pub fn integral(&self, h: usize) -> f64 {
        let g = self.tree.geometry();
        self.iter().map(|(c, v)| g.cell_width(c.level) * v[h]).sum()
    }
}

/// Details `d_{j,k}` on `Λ \ ∇_{J_}`, one value per population, stored only
/// on the even brother.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DetailField {
    q: usize,
    values: BTreeMap<CellIndex, Vec<f64>>,
}

impl DetailField {
    pub fn new(q: usize) -> Self {
        Self { q, values: BTreeMap::new() }
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn insert(&mut self, c: CellIndex, d: Vec<f64>) {
        debug_assert_eq!(c.pos % 2, 0, "details live on even indices");
        debug_assert_eq!(d.len(), self.q);
        self.values.insert(c, d);
    }

    pub fn get(&self, c: CellIndex) -> Option<&[f64]> {
        self.values.get(&c).map(Vec::as_slice)
    }

    /// `max_h |d^h_{j,k}|`, zero when the detail is not stored.
    pub fn max_abs(&self, c: CellIndex) -> f64 {
        self.values.get(&c).map_or(0.0, |d| d.iter().fold(0.0, |m, v| m.max(v.abs())))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (CellIndex, &[f64])> {
        self.values.iter().map(|(c, d)| (*c, d.as_slice()))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (CellIndex, &mut Vec<f64>)> {
        self.values.iter_mut().map(|(c, d)| (*c, d))
    }

    /// Largest `|d|` over one level and all populations.
    pub fn level_max(&self, level: u32) -> f64 {
        self.iter().filter(|(c, _)| c.level == level).fold(0.0, |m, (c, _)| m.max(self.max_abs(c)))
    }
}
