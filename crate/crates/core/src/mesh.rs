//! Nested dyadic lattices and the trees of cell indices living on them.
//!
//! A [`MeshTree`] stores the index set Λ with the detail redundancy removed:
//! above the coarsest level only the even member of each pair of brothers is
//! kept, and it stands for both. The complete tree, leaves and complete
//! leaves are derived on demand.

use std::collections::BTreeSet;

use crate::error::{MrError, Result};

/// Deepest level accepted by [`MeshGeometry`].
pub const MAX_LEVEL: u32 = 24;

/// Upper bound on the number of finest cells of a geometry.
pub const MAX_FINEST_CELLS: u64 = 1 << 26;

/// Level–position pair addressing one dyadic cell.
#[derive(Debug, Copy, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CellIndex {
    pub level: u32,
    pub pos: u64,
}

impl CellIndex {
    pub const fn new(level: u32, pos: u64) -> Self {
        Self { level, pos }
    }

    pub fn parent(self) -> CellIndex {
        debug_assert!(self.level > 0);
        CellIndex::new(self.level - 1, self.pos / 2)
    }

    pub fn children(self) -> [CellIndex; 2] {
        [CellIndex::new(self.level + 1, 2 * self.pos), CellIndex::new(self.level + 1, 2 * self.pos + 1)]
    }

    pub fn brother(self) -> CellIndex {
        CellIndex::new(self.level, self.pos ^ 1)
    }

    /// The even member of the brother pair, i.e. the index that represents
    /// this cell in a de-redundified tree.
    pub fn even_representative(self) -> CellIndex {
        CellIndex::new(self.level, self.pos & !1)
    }

    /// Finest-level positions covered by this cell.
    pub fn finest_range(self, max_level: u32) -> std::ops::Range<u64> {
        let shift = max_level - self.level;
        (self.pos << shift)..((self.pos + 1) << shift)
    }
}

/// Treatment of stencil indices falling outside `[0, 2^j - 1]`.
#[derive(Debug, Copy, Clone, PartialEq, Eq, Hash, Default)]
pub enum BoundaryMode {
    /// Clamp into range: ghost cells replicate the boundary cell.
    #[default]
    Copy,
    /// Wrap modulo the number of cells.
    Periodic,
}

impl BoundaryMode {
    /// Maps a possibly out-of-range position onto a lattice of `n` cells.
    #[inline]
    pub fn map(self, pos: i64, n: u64) -> u64 {
        let n = n as i64;
        match self {
            BoundaryMode::Copy => pos.clamp(0, n - 1) as u64,
            BoundaryMode::Periodic => pos.rem_euclid(n) as u64,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            BoundaryMode::Copy => "copy",
            BoundaryMode::Periodic => "periodic",
        }
    }
}

impl std::str::FromStr for BoundaryMode {
    type Err = MrError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "copy" => Ok(BoundaryMode::Copy),
            "periodic" => Ok(BoundaryMode::Periodic),
            other => Err(MrError::Config(format!("unknown boundary mode '{other}'"))),
        }
    }
}

/// Domain `[a, b]` with the range of admissible levels. Level `j` holds
/// `roots · 2^{j − J_}` cells of equal width.
#[derive(Debug, Copy, Clone, PartialEq)]
pub struct MeshGeometry {
    a: f64,
    b: f64,
    min_level: u32,
    max_level: u32,
    roots: u64,
}

impl MeshGeometry {
    /// `2^j` cells on level `j`, so `Δx = (b − a) 2^{−J̄}`.
    pub fn new(a: f64, b: f64, min_level: u32, max_level: u32) -> Result<Self> {
        Self::with_roots(a, b, min_level, max_level, 1u64 << min_level.min(MAX_LEVEL))
    }

    /// Cells of width `2^{−j}` on level `j`; `(b − a) 2^{J_}` must be a
    /// positive integer.
    pub fn with_unit_cells(a: f64, b: f64, min_level: u32, max_level: u32) -> Result<Self> {
        let roots = (b - a) * (1u64 << min_level.min(MAX_LEVEL)) as f64;
        if !(roots >= 1.0 && roots.fract() == 0.0 && roots <= MAX_FINEST_CELLS as f64) {
            return Err(MrError::Geometry(format!(
                "[{a}, {b}] is not a whole number of cells of width 2^-{min_level}"
            )));
        }
        Self::with_roots(a, b, min_level, max_level, roots as u64)
    }

    pub fn with_roots(a: f64, b: f64, min_level: u32, max_level: u32, roots: u64) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(MrError::Geometry(format!("need finite a < b, got [{a}, {b}]")));
        }
        if min_level > max_level {
            return Err(MrError::Geometry(format!("min level {min_level} exceeds max level {max_level}")));
        }
        if max_level > MAX_LEVEL {
            return Err(MrError::Geometry(format!("max level {max_level} exceeds the supported {MAX_LEVEL}")));
        }
        if roots == 0 || roots > MAX_FINEST_CELLS >> (max_level - min_level) {
            return Err(MrError::Geometry(format!("{roots} root cells refined to level {max_level} is too many")));
        }
        Ok(Self { a, b, min_level, max_level, roots })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn min_level(&self) -> u32 {
        self.min_level
    }

    pub fn max_level(&self) -> u32 {
        self.max_level
    }

    pub fn length(&self) -> f64 {
        self.b - self.a
    }

    /// Number of cells on the coarsest level.
    pub fn roots(&self) -> u64 {
        self.roots
    }

    /// `N_j`; levels below `J_` are counted as if refined from a virtual root.
    pub fn cells_at(&self, level: u32) -> u64 {
        if level >= self.min_level {
            self.roots << (level - self.min_level)
        } else {
            (self.roots >> (self.min_level - level)).max(1)
        }
    }

    pub fn finest_cells(&self) -> usize {
        self.cells_at(self.max_level) as usize
    }

    pub fn cell_width(&self, level: u32) -> f64 {
        self.length() / self.cells_at(level) as f64
    }

    /// Δx at the finest level.
    pub fn dx(&self) -> f64 {
        self.cell_width(self.max_level)
    }

    pub fn cell_bounds(&self, c: CellIndex) -> (f64, f64) {
        let w = self.cell_width(c.level);
        (self.a + w * c.pos as f64, self.a + w * (c.pos + 1) as f64)
    }

    pub fn cell_center(&self, c: CellIndex) -> f64 {
        let (l, r) = self.cell_bounds(c);
        0.5 * (l + r)
    }

    pub fn contains(&self, c: CellIndex) -> bool {
        c.level >= self.min_level && c.level <= self.max_level && c.pos < self.cells_at(c.level)
    }

    fn check(&self, c: CellIndex) -> Result<()> {
        if self.contains(c) {
            Ok(())
        } else {
            Err(MrError::CellOutOfRange(c))
        }
    }
}

/// Tree Λ ⊂ ∇ stored as level-indexed sorted position sets.
#[derive(Debug, Clone, PartialEq)]
pub struct MeshTree {
    geometry: MeshGeometry,
    // levels[j - min_level]; only even positions above the coarsest level
    levels: Vec<BTreeSet<u64>>,
}

impl MeshTree {
    /// Only the coarsest level ∇_{J_}.
    pub fn coarsest(geometry: MeshGeometry) -> Self {
        let depth = (geometry.max_level - geometry.min_level + 1) as usize;
        let mut levels = vec![BTreeSet::new(); depth];
        levels[0] = (0..geometry.cells_at(geometry.min_level)).collect();
        Self { geometry, levels }
    }

    /// The maximal tree ∇ containing every admissible index.
    pub fn full(geometry: MeshGeometry) -> Self {
        let mut tree = Self::coarsest(geometry);
        for level in geometry.min_level + 1..=geometry.max_level {
            tree.levels[(level - geometry.min_level) as usize] = (0..geometry.cells_at(level)).step_by(2).collect();
        }
        tree
    }

    /// Builds a tree from explicit indices; the coarsest level is always added.
    /// Fails when an index is odd above the coarsest level, out of range, or
    /// orphaned.
    pub fn from_indices<I: IntoIterator<Item = CellIndex>>(geometry: MeshGeometry, indices: I) -> Result<Self> {
        let mut tree = Self::coarsest(geometry);
        for c in indices {
            geometry.check(c)?;
            if c.level > geometry.min_level && c.pos % 2 == 1 {
                return Err(MrError::NotATree(format!("odd index {c:?} above the coarsest level")));
            }
            let slot = tree.slot(c.level);
            tree.levels[slot].insert(c.pos);
        }
        for c in tree.iter() {
            if c.level > geometry.min_level && !tree.in_complete_tree(c.parent()) {
                return Err(MrError::NotATree(format!("orphan cell {c:?}")));
            }
        }
        Ok(tree)
    }

    pub fn geometry(&self) -> &MeshGeometry {
        &self.geometry
    }

    pub fn min_level(&self) -> u32 {
        self.geometry.min_level
    }

    pub fn max_level(&self) -> u32 {
        self.geometry.max_level
    }

    #[inline]
    fn slot(&self, level: u32) -> usize {
        (level - self.geometry.min_level) as usize
    }

    pub fn level_positions(&self, level: u32) -> &BTreeSet<u64> {
        &self.levels[self.slot(level)]
    }

    /// Membership in Λ itself.
    pub fn contains(&self, c: CellIndex) -> bool {
        if c.level < self.min_level() || c.level > self.max_level() {
            return false;
        }
        self.levels[self.slot(c.level)].contains(&c.pos)
    }

    /// Membership in the complete tree R(Λ).
    pub fn in_complete_tree(&self, c: CellIndex) -> bool {
        if !self.geometry.contains(c) {
            return false;
        }
        if c.level == self.min_level() {
            return true;
        }
        self.levels[self.slot(c.level)].contains(&(c.pos & !1))
    }

    /// Whether the children of `c` belong to the complete tree.
    pub fn is_refined(&self, c: CellIndex) -> bool {
        c.level < self.max_level() && self.contains(CellIndex::new(c.level + 1, 2 * c.pos))
    }

    pub fn len(&self) -> usize {
        self.levels.iter().map(BTreeSet::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Indices of Λ, coarse to fine, positions ascending.
    pub fn iter(&self) -> impl Iterator<Item = CellIndex> + '_ {
        let min = self.min_level();
        self.levels
            .iter()
            .enumerate()
            .flat_map(move |(i, set)| set.iter().map(move |&k| CellIndex::new(min + i as u32, k)))
    }

    pub fn is_subset(&self, other: &MeshTree) -> bool {
        self.levels.iter().zip(&other.levels).all(|(a, b)| a.is_subset(b))
    }

    /// Adds `c` (an even index above the coarsest level) and whatever
    /// ancestors are needed for the tree property.
    fn insert_with_ancestors(&mut self, mut c: CellIndex) {
        let min = self.min_level();
        while c.level > min {
            let slot = self.slot(c.level);
            if !self.levels[slot].insert(c.pos) {
                return;
            }
            c = c.parent().even_representative();
        }
    }

    /// Makes `c` part of the complete tree.
    pub fn add_to_complete_tree(&mut self, c: CellIndex) {
        debug_assert!(self.geometry.contains(c));
        if c.level > self.min_level() {
            self.insert_with_ancestors(c.even_representative());
        }
    }

    /// R(Λ): the coarsest level plus both brothers of every finer index.
    pub fn complete_tree(&self) -> BTreeSet<CellIndex> {
        let min = self.min_level();
        let mut out = BTreeSet::new();
        for c in self.iter() {
            out.insert(c);
            if c.level > min {
                out.insert(c.brother());
            }
        }
        out
    }

    /// L(Λ): indices of Λ without a son in Λ.
    pub fn leaves(&self) -> Vec<CellIndex> {
        let min = self.min_level();
        self.iter()
            .filter(|&c| {
                if c.level == min {
                    !self.is_refined(c)
                } else {
                    !self.is_refined(c) && !self.is_refined(c.brother())
                }
            })
            .collect()
    }

    /// S(Λ): cells of the complete tree without children, ordered left to
    /// right. They form a multi-level partition of the domain.
    pub fn complete_leaves(&self) -> Vec<CellIndex> {
        let mut out = Vec::new();
        let mut stack = Vec::new();
        for k in (0..self.geometry.cells_at(self.min_level())).rev() {
            stack.push(CellIndex::new(self.min_level(), k));
        }
        while let Some(c) = stack.pop() {
            if self.is_refined(c) {
                let [l, r] = c.children();
                stack.push(r);
                stack.push(l);
            } else {
                out.push(c);
            }
        }
        out
    }

    /// Positions (at level `c.level - 1`) of the prediction stencil of `c`.
    pub fn prediction_stencil(
        &self,
        c: CellIndex,
        gamma: usize,
        boundary: BoundaryMode,
    ) -> impl Iterator<Item = CellIndex> {
        let father = c.parent();
        let n = self.geometry.cells_at(father.level);
        let g = gamma as i64;
        (-g..=g).map(move |d| CellIndex::new(father.level, boundary.map(father.pos as i64 + d, n)))
    }

    /// Whether every prediction stencil of Λ \ ∇_{J_} lies in R(Λ).
    pub fn is_graded(&self, gamma: usize, boundary: BoundaryMode) -> bool {
        self.first_ungraded(gamma, boundary).is_none()
    }

    pub(crate) fn first_ungraded(&self, gamma: usize, boundary: BoundaryMode) -> Option<CellIndex> {
        let min = self.min_level();
        self.iter()
            .filter(|c| c.level > min)
            .find(|&c| self.prediction_stencil(c, gamma, boundary).any(|s| !self.in_complete_tree(s)))
    }

    /// G(Λ): the smallest graded tree containing Λ.
    pub fn grade(&self, gamma: usize, boundary: BoundaryMode) -> MeshTree {
        let mut out = self.clone();
        // Additions only ever land on coarser levels, so one fine-to-coarse
        // sweep reaches the fixed point.
        for level in (self.min_level() + 1..=self.max_level()).rev() {
            let positions: Vec<u64> = out.level_positions(level).iter().copied().collect();
            for k in positions {
                let c = CellIndex::new(level, k);
                for s in self.prediction_stencil(c, gamma, boundary) {
                    out.add_to_complete_tree(s);
                }
            }
        }
        out
    }

    /// Union of two trees on the same geometry.
    pub fn union(&self, other: &MeshTree) -> MeshTree {
        let mut out = self.clone();
        for (a, b) in out.levels.iter_mut().zip(&other.levels) {
            a.extend(b.iter().copied());
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn geom(min: u32, max: u32) -> MeshGeometry {
        MeshGeometry::new(-3.0, 3.0, min, max).unwrap()
    }

    fn c(level: u32, pos: u64) -> CellIndex {
        CellIndex::new(level, pos)
    }

    #[test]
    fn full_tree_small_cases() {
        let t = MeshTree::full(geom(0, 1));
        assert_eq!(t.iter().collect::<Vec<_>>(), vec![c(0, 0), c(1, 0)]);

        let t = MeshTree::full(geom(2, 2));
        assert_eq!(t.iter().collect::<Vec<_>>(), (0..4).map(|k| c(2, k)).collect::<Vec<_>>());
    }

    #[test]
    fn unit_cell_geometry() {
        let g = MeshGeometry::with_unit_cells(-3.0, 3.0, 2, 9).unwrap();
        assert_eq!(g.roots(), 24);
        assert_eq!(g.cells_at(2), 24);
        assert_eq!(g.finest_cells(), 3072);
        assert_eq!(g.dx(), 1.0 / 512.0);
        assert_eq!(g.cell_bounds(c(9, 1536)), (0.0, 1.0 / 512.0));
        let t = MeshTree::full(g);
        let expected: u64 = 24 + (3..=9u32).map(|j| g.cells_at(j) / 2).sum::<u64>();
        assert_eq!(t.len() as u64, expected);
        assert_eq!(t.complete_leaves().len(), 3072);
        assert!(MeshGeometry::with_unit_cells(0.0, 0.3, 2, 9).is_err());
        assert_eq!(MeshGeometry::new(-3.0, 3.0, 2, 9).unwrap().roots(), 4);
        assert!(MeshGeometry::with_roots(0.0, 1.0, 0, 20, 1 << 10).is_err());
    }

    #[test]
    fn full_tree_count_matches_enumeration() {
        let g = geom(2, 9);
        let mut expected = 0;
        for j in 2..=9u32 {
            for k in 0..(1u64 << j) {
                if j == 2 || k % 2 == 0 {
                    expected += 1;
                }
            }
        }
        assert_eq!(expected, 512);
        assert_eq!(MeshTree::full(g).len(), expected);
    }

    #[test]
    fn complete_tree_examples() {
        let g = geom(2, 3);
        let t = MeshTree::from_indices(g, [c(3, 4)]).unwrap();
        let r = t.complete_tree();
        assert!(r.contains(&c(3, 5)));
        assert_eq!(r.len(), 6);

        let t = MeshTree::coarsest(g);
        assert_eq!(t.complete_tree().len(), 4);

        assert_eq!(MeshTree::full(g).complete_tree().len(), 12);
    }

    #[test]
    fn complete_leaves_examples() {
        let g = geom(2, 3);
        let t = MeshTree::coarsest(g);
        assert_eq!(t.complete_leaves(), (0..4).map(|k| c(2, k)).collect::<Vec<_>>());

        let t = MeshTree::full(geom(2, 5));
        assert_eq!(t.complete_leaves(), (0..32).map(|k| c(5, k)).collect::<Vec<_>>());

        let t = MeshTree::from_indices(g, [c(3, 0)]).unwrap();
        assert_eq!(t.complete_leaves(), vec![c(3, 0), c(3, 1), c(2, 1), c(2, 2), c(2, 3)]);
        assert_eq!(t.leaves(), vec![c(2, 1), c(2, 2), c(2, 3), c(3, 0)]);
    }

    #[test]
    fn rejects_malformed_index_sets() {
        let g = geom(2, 4);
        assert!(matches!(MeshTree::from_indices(g, [c(3, 1)]), Err(MrError::NotATree(_))));
        assert!(matches!(MeshTree::from_indices(g, [c(4, 0)]), Err(MrError::NotATree(_))));
        assert!(matches!(MeshTree::from_indices(g, [c(5, 0)]), Err(MrError::CellOutOfRange(_))));
        // parent (3,1) is in the complete tree through (3,0)
        assert!(MeshTree::from_indices(g, [c(3, 0), c(4, 2)]).is_ok());
    }

    #[test]
    fn grading_forces_missing_stencil_father() {
        let g = geom(2, 4);
        let t = MeshTree::from_indices(g, [c(3, 2), c(4, 4)]).unwrap();
        assert!(!t.is_graded(1, BoundaryMode::Copy));
        let graded = t.grade(1, BoundaryMode::Copy);
        assert!(graded.contains(c(3, 0)));
        assert!(graded.is_graded(1, BoundaryMode::Copy));
        let expected = MeshTree::from_indices(g, [c(3, 0), c(3, 2), c(4, 4)]).unwrap();
        assert_eq!(graded, expected);
    }

    #[test]
    fn full_tree_is_graded_fixed_point() {
        for boundary in [BoundaryMode::Copy, BoundaryMode::Periodic] {
            let t = MeshTree::full(geom(2, 7));
            assert_eq!(t.grade(3, boundary), t);
        }
    }

    #[test]
    fn boundary_mapping() {
        assert_eq!(BoundaryMode::Copy.map(-2, 8), 0);
        assert_eq!(BoundaryMode::Copy.map(9, 8), 7);
        assert_eq!(BoundaryMode::Periodic.map(-1, 8), 7);
        assert_eq!(BoundaryMode::Periodic.map(8, 8), 0);
    }

    #[test]
    fn geometry_widths_are_exact() {
        let g = geom(2, 9);
        assert_eq!(g.dx(), 6.0 / 512.0);
        assert_eq!(g.cell_bounds(c(9, 0)).0, -3.0);
        assert_eq!(g.cell_bounds(c(2, 3)).1, 3.0);
        assert!(MeshGeometry::new(1.0, 1.0, 0, 2).is_err());
        assert!(MeshGeometry::new(0.0, 1.0, 3, 2).is_err());
    }

    fn arb_tree() -> impl Strategy<Value = MeshTree> {
        (1u32..3, 2u32..5, proptest::collection::vec((0u32..8, 0u64..1024), 0..12)).prop_map(|(min, extra, picks)| {
            let g = MeshGeometry::new(-1.0, 2.0, min, min + extra).unwrap();
            let mut t = MeshTree::coarsest(g);
            for (dl, p) in picks {
                let level = min + 1 + dl % extra;
                let pos = p % (1u64 << level);
                t.add_to_complete_tree(CellIndex::new(level, pos));
            }
            t
        })
    }

    proptest! {
        #[test]
        fn complete_leaves_tile_domain(t in arb_tree()) {
            let g = *t.geometry();
            let leaves = t.complete_leaves();
            let mut cursor = g.a();
            let mut total = 0.0;
            for leaf in &leaves {
                let (l, r) = g.cell_bounds(*leaf);
                prop_assert_eq!(l, cursor);
                cursor = r;
                total += g.cell_width(leaf.level);
            }
            prop_assert_eq!(cursor, g.b());
            prop_assert_eq!(total, g.length());
            let r = t.complete_tree();
            prop_assert!(t.iter().all(|c| r.contains(&c)));
            prop_assert!(r.len() > t.len() || t.len() == t.iter().filter(|c| c.level == g.min_level()).count());
        }

        #[test]
        fn grading_is_extensive_idempotent_monotone(t in arb_tree(), gamma in 1usize..4, periodic in any::<bool>()) {
            let boundary = if periodic { BoundaryMode::Periodic } else { BoundaryMode::Copy };
            let g1 = t.grade(gamma, boundary);
            prop_assert!(t.is_subset(&g1));
            prop_assert!(g1.is_graded(gamma, boundary));
            prop_assert_eq!(g1.grade(gamma, boundary), g1.clone());
            let bigger = t.union(&MeshTree::from_indices(*t.geometry(), [CellIndex::new(t.min_level() + 1, 0)]).unwrap());
            prop_assert!(g1.is_subset(&bigger.grade(gamma, boundary)));
        }

        #[test]
        fn parent_children_round_trip(level in 0u32..20, pos in 0u64..1_000_000) {
            let cell = CellIndex::new(level, pos);
            for child in cell.children() {
                prop_assert_eq!(child.parent(), cell);
            }
            prop_assert_eq!(cell.brother().brother(), cell);
        }
    }
}
