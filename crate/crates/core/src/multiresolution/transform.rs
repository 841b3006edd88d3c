use std::collections::HashMap;

use super::{DetailField, LeafField, PredictionSpec, Reconstructor};
use crate::error::{MrError, Result};
use crate::mesh::{BoundaryMode, CellIndex, MeshTree};

fn require_graded(tree: &MeshTree, prediction: &PredictionSpec, boundary: BoundaryMode) -> Result<()> {
    match tree.first_ungraded(prediction.gamma(), boundary) {
        Some(c) => Err(MrError::NotGraded(c)),
        None => Ok(()),
    }
}

/// Details `d_{j,k} = f_{j,k} − f̂_{j,k}` on every even index of `Λ \ ∇_{J_}`.
pub fn compute_details(field: &LeafField, prediction: &PredictionSpec, boundary: BoundaryMode) -> Result<DetailField> {
    require_graded(field.tree(), prediction, boundary)?;
    let mut rec = Reconstructor::new(field, prediction, boundary);
    Ok(details_from(&mut rec))
}

/// Details of the complete tree held by `rec`; the tree must be graded.
pub(crate) fn details_from(rec: &mut Reconstructor<'_>) -> DetailField {
    let tree = rec.tree();
    let min = tree.min_level();
    let cells: Vec<CellIndex> = tree.iter().filter(|c| c.level > min).collect();
    let mut out = DetailField::new(rec.q());
    for c in cells {
        let predicted = rec.predicted_even_child(c.parent());
        let actual = rec.value(c);
        let d = actual.iter().zip(&predicted).map(|(f, p)| f - p).collect();
        out.insert(c, d);
    }
    out
}

/// Multiresolution encoding: coarsest-level averages (cell-major) plus the
/// details of the graded tree.
pub fn encode(
    field: &LeafField,
    prediction: &PredictionSpec,
    boundary: BoundaryMode,
) -> Result<(Vec<f64>, DetailField)> {
    require_graded(field.tree(), prediction, boundary)?;
    let mut rec = Reconstructor::new(field, prediction, boundary);
    let details = details_from(&mut rec);
    let min = field.tree().min_level();
    let mut coarse = Vec::with_capacity(field.geometry().cells_at(min) as usize * field.q());
    for k in 0..field.geometry().cells_at(min) {
        coarse.extend_from_slice(rec.value(CellIndex::new(min, k)));
    }
    Ok((coarse, details))
}

/// Inverse of [`encode`]: rebuilds the complete-leaf averages level by level.
/// Missing details are taken as zero.
pub fn decode(
    tree: &MeshTree,
    coarse: &[f64],
    details: &DetailField,
    prediction: &PredictionSpec,
    boundary: BoundaryMode,
) -> Result<LeafField> {
    require_graded(tree, prediction, boundary)?;
    let q = details.q().max(1);
    let g = tree.geometry();
    let min = tree.min_level();
    let n0 = g.cells_at(min) as usize;
    if coarse.len() != n0 * q {
        return Err(MrError::LengthMismatch { left: coarse.len(), right: n0 * q });
    }
    let mut levels: Vec<HashMap<u64, Vec<f64>>> = vec![HashMap::new(); (tree.max_level() - min + 1) as usize];
    for (k, chunk) in coarse.chunks_exact(q).enumerate() {
        levels[0].insert(k as u64, chunk.to_vec());
    }
    let wl = prediction.window_len();
    let gamma = prediction.gamma() as i64;
    let mut w = [0.0; 7];
    for level in min..tree.max_level() {
        let n = g.cells_at(level);
        let (coarser, finer) = levels.split_at_mut((level - min + 1) as usize);
        let here = &coarser[(level - min) as usize];
        let next = &mut finer[0];
        for &k2 in tree.level_positions(level + 1) {
            let father = k2 / 2;
            let child = CellIndex::new(level + 1, k2);
            let mut even = vec![0.0; q];
            let mut odd = vec![0.0; q];
            for h in 0..q {
                for (i, d) in (-gamma..=gamma).enumerate() {
                    let pos = boundary.map(father as i64 + d, n);
                    let v = here.get(&pos).ok_or(MrError::NotGraded(child))?;
                    w[i] = v[h];
                }
                let (pe, po) = prediction.predict(&w[..wl]);
                let d = details.get(child).map_or(0.0, |d| d[h]);
                even[h] = pe + d;
                odd[h] = po - d;
            }
            next.insert(k2, even);
            next.insert(k2 + 1, odd);
        }
    }
    let leaves = tree.complete_leaves();
    let mut values = Vec::with_capacity(leaves.len() * q);
    for leaf in &leaves {
        values.extend_from_slice(&levels[(leaf.level - min) as usize][&leaf.pos]);
    }
    LeafField::new(tree.clone(), q, values)
}
