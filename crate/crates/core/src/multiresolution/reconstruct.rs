use std::collections::HashMap;

use super::{project, LeafField, PredictionSpec};
use crate::mesh::{BoundaryMode, CellIndex, MeshTree};

/// Cell averages on every level of the complete tree, extended on demand to
/// any other cell by detail-free recursive prediction.
///
/// Averages of the complete tree come from projecting the complete leaves.
/// Other cells are predicted from their father's level and memoized, so a
/// batch of finest-level queries costs `O(L)` per cell.
pub struct Reconstructor<'a> {
    tree: &'a MeshTree,
    prediction: &'a PredictionSpec,
    boundary: BoundaryMode,
    q: usize,
    slots: Vec<HashMap<u64, usize>>,
    data: Vec<f64>,
}

impl<'a> Reconstructor<'a> {
    pub fn new(field: &'a LeafField, prediction: &'a PredictionSpec, boundary: BoundaryMode) -> Self {
        let tree = field.tree();
        let depth = (tree.max_level() - tree.min_level() + 1) as usize;
        let q = field.q();
        let mut rec = Self {
            tree,
            prediction,
            boundary,
            q,
            slots: vec![HashMap::new(); depth],
            data: Vec::with_capacity(2 * field.values().len()),
        };
        for (leaf, v) in field.iter() {
            rec.push(leaf, v.iter().copied());
        }
        let mut buf = vec![0.0; q];
        for level in (tree.min_level()..tree.max_level()).rev() {
            for &k2 in tree.level_positions(level + 1) {
                let even = rec.slot_of(CellIndex::new(level + 1, k2)).expect("complete tree child");
                let odd = rec.slot_of(CellIndex::new(level + 1, k2 + 1)).expect("complete tree child");
                for (h, b) in buf.iter_mut().enumerate() {
                    *b = project(rec.data[even + h], rec.data[odd + h]);
                }
                rec.push(CellIndex::new(level, k2 / 2), buf.iter().copied());
            }
        }
        rec
    }

    pub fn tree(&self) -> &MeshTree {
        self.tree
    }

    pub fn q(&self) -> usize {
        self.q
    }

    fn push(&mut self, c: CellIndex, values: impl Iterator<Item = f64>) -> usize {
        let slot = self.data.len();
        self.data.extend(values);
        self.slots[(c.level - self.tree.min_level()) as usize].insert(c.pos, slot);
        slot
    }

    fn slot_of(&self, c: CellIndex) -> Option<usize> {
        self.slots[(c.level - self.tree.min_level()) as usize].get(&c.pos).copied()
    }

    /// Whether `c` already has a value (either an average of the complete
    /// tree or a memoized prediction).
    pub fn is_known(&self, c: CellIndex) -> bool {
        self.slot_of(c).is_some()
    }

    fn window_slots(&mut self, father: CellIndex) -> [usize; 7] {
        let g = self.prediction.gamma() as i64;
        let n = self.tree.geometry().cells_at(father.level);
        let mut out = [0usize; 7];
        for (i, d) in (-g..=g).enumerate() {
            let pos = self.boundary.map(father.pos as i64 + d, n);
            out[i] = self.ensure(CellIndex::new(father.level, pos));
        }
        out
    }

    fn ensure(&mut self, c: CellIndex) -> usize {
        if let Some(slot) = self.slot_of(c) {
            return slot;
        }
        debug_assert!(c.level > self.tree.min_level(), "coarsest level is always known");
        let father = c.parent();
        let window = self.window_slots(father);
        let wl = self.prediction.window_len();
        let q = self.q;
        let mut even = vec![0.0; q];
        let mut odd = vec![0.0; q];
        let mut w = [0.0; 7];
        for h in 0..q {
            for (i, s) in window[..wl].iter().enumerate() {
                w[i] = self.data[s + h];
            }
            let (e, o) = self.prediction.predict(&w[..wl]);
            even[h] = e;
            odd[h] = o;
        }
        let [ce, co] = father.children();
        let se = self.push(ce, even.into_iter());
        let so = self.push(co, odd.into_iter());
        if c == ce {
            se
        } else {
            so
        }
    }

    /// Value at any cell of the hierarchy.
    pub fn value(&mut self, c: CellIndex) -> &[f64] {
        let s = self.ensure(c);
        &self.data[s..s + self.q]
    }

    /// Value at a finest-level position already mapped into range.
    pub fn finest(&mut self, pos: u64) -> &[f64] {
        let level = self.tree.max_level();
        self.value(CellIndex::new(level, pos))
    }

    /// Prediction of the even child of `father` from the father's window,
    /// ignoring whatever is stored for the child itself.
    pub fn predicted_even_child(&mut self, father: CellIndex) -> Vec<f64> {
        let window = self.window_slots(father);
        let wl = self.prediction.window_len();
        let mut w = [0.0; 7];
        (0..self.q)
            .map(|h| {
                for (i, s) in window[..wl].iter().enumerate() {
                    w[i] = self.data[s + h];
                }
                self.prediction.predict(&w[..wl]).0
            })
            .collect()
    }

    /// Reconstructed values on every finest cell, cell-major.
    pub fn finest_field(&mut self) -> Vec<f64> {
        let n = self.tree.geometry().finest_cells() as u64;
        let q = self.q;
        let mut out = Vec::with_capacity(n as usize * q);
        for k in 0..n {
            out.extend_from_slice(self.finest(k));
        }
        out
    }
}

/// Reconstruction at one finest-level cell (the "double hat" value).
pub fn reconstruct(
    field: &LeafField,
    target: CellIndex,
    prediction: &PredictionSpec,
    boundary: BoundaryMode,
) -> Vec<f64> {
    debug_assert_eq!(target.level, field.tree().max_level());
    Reconstructor::new(field, prediction, boundary).value(target).to_vec()
}

/// Reconstruction on the whole finest lattice, cell-major.
pub fn reconstruct_finest(field: &LeafField, prediction: &PredictionSpec, boundary: BoundaryMode) -> Vec<f64> {
    Reconstructor::new(field, prediction, boundary).finest_field()
}
