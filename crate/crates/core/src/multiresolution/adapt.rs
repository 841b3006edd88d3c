use super::transform::details_from;
use super::{DetailField, LeafField, PredictionSpec, Reconstructor};
use crate::error::{MrError, Result};
use crate::mesh::{BoundaryMode, CellIndex, MeshTree};

/// Thresholding parameters: base tolerance ε and the regularity guess μ̄
/// used by the refinement rule (`f64::INFINITY` for smooth data).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdPolicy {
    pub epsilon: f64,
    pub mu_bar: f64,
}

impl ThresholdPolicy {
    pub fn new(epsilon: f64, mu_bar: f64) -> Result<Self> {
        if !(epsilon >= 0.0 && epsilon.is_finite()) {
            return Err(MrError::Parameter(format!("epsilon must be finite and >= 0, got {epsilon}")));
        }
        if mu_bar.is_nan() || mu_bar < 0.0 {
            return Err(MrError::Parameter(format!("mu_bar must be >= 0, got {mu_bar}")));
        }
        Ok(Self { epsilon, mu_bar })
    }

    /// `ε_j = 2^{j − J̄} ε`.
    pub fn level_threshold(&self, level: u32, max_level: u32) -> f64 {
        self.epsilon * 2f64.powi(level as i32 - max_level as i32)
    }

    /// `2^{min(μ̄, μ) + 1}`.
    pub fn refinement_factor(&self, order: u32) -> f64 {
        2f64.powf(self.mu_bar.min(order as f64) + 1.0)
    }
}

/// T_ε: keeps the coarsest level and every index whose details reach the
/// level threshold, together with their ancestors.
pub fn threshold(tree: &MeshTree, details: &DetailField, policy: &ThresholdPolicy) -> MeshTree {
    let max = tree.max_level();
    let mut out = MeshTree::coarsest(*tree.geometry());
    for c in tree.iter().filter(|c| c.level > tree.min_level()) {
        if details.max_abs(c) >= policy.level_threshold(c.level, max) {
            out.add_to_complete_tree(c);
        }
    }
    out
}

/// H_ε: lateral enlargement by `sigma` cells on every level of the complete
/// tree, plus one extra level where details are large compared to the
/// expected decay.
pub fn enlarge(
    tree: &MeshTree,
    details: &DetailField,
    policy: &ThresholdPolicy,
    prediction: &PredictionSpec,
    sigma: usize,
    boundary: BoundaryMode,
) -> MeshTree {
    let mut out = tree.clone();
    let (min, max) = (tree.min_level(), tree.max_level());
    let s = sigma as i64;
    for c in tree.complete_tree() {
        if c.level == min {
            continue;
        }
        let n = tree.geometry().cells_at(c.level);
        for d in -s..=s {
            out.add_to_complete_tree(CellIndex::new(c.level, boundary.map(c.pos as i64 + d, n)));
        }
    }
    let factor = policy.refinement_factor(prediction.order());
    for c in tree.iter().filter(|c| c.level > min && c.level < max) {
        if details.max_abs(c) >= factor * policy.level_threshold(c.level, max) {
            out.add_to_complete_tree(CellIndex::new(c.level + 1, 2 * c.pos));
            out.add_to_complete_tree(CellIndex::new(c.level + 1, 2 * c.pos + 2));
        }
    }
    out
}

/// Result of one mesh adaptation: the remapped field and the details of the
/// input field that drove it.
#[derive(Debug, Clone)]
pub struct Adaptation {
    pub field: LeafField,
    pub details: DetailField,
}

/// `Λ^{n+1} = G(H_ε(T_ε(Λ^n)))`, with values moved onto the new complete
/// leaves by projection where the old tree knows them and by prediction
/// elsewhere.
pub fn adapt_mesh(
    field: &LeafField,
    policy: &ThresholdPolicy,
    prediction: &PredictionSpec,
    sigma: usize,
    boundary: BoundaryMode,
) -> Result<Adaptation> {
    if let Some(c) = field.tree().first_ungraded(prediction.gamma(), boundary) {
        return Err(MrError::NotGraded(c));
    }
    let mut rec = Reconstructor::new(field, prediction, boundary);
    let details = details_from(&mut rec);
    let kept = threshold(field.tree(), &details, policy);
    let tree = enlarge(&kept, &details, policy, prediction, sigma, boundary).grade(prediction.gamma(), boundary);
    let q = field.q();
    let leaves = tree.complete_leaves();
    let mut values = Vec::with_capacity(leaves.len() * q);
    for leaf in &leaves {
        values.extend_from_slice(rec.value(*leaf));
    }
    let field = LeafField::new(tree, q, values)?;
    Ok(Adaptation { field, details })
}
