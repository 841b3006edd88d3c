//! The adaptive operator: mesh adaptation, collision on the complete leaves
//! and the conservative multi-level stream.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{MrError, Result};
use crate::lbm::{SchemeSpec, MAX_Q};
use crate::mesh::{BoundaryMode, CellIndex};
use crate::multiresolution::{adapt_mesh, LeafField, PredictionSpec, Reconstructor, ThresholdPolicy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum CollisionMode {
    /// Equilibrium evaluated at the leaf moments.
    #[default]
    Leaves,
    /// Equilibrium averaged over the reconstructed finest subcells.
    Reconstructed,
}

impl CollisionMode {
    pub fn name(self) -> &'static str {
        match self {
            CollisionMode::Leaves => "leaves",
            CollisionMode::Reconstructed => "reconstructed",
        }
    }
}

impl fmt::Display for CollisionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CollisionMode {
    type Err = MrError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "leaves" => Ok(CollisionMode::Leaves),
            "reconstructed" => Ok(CollisionMode::Reconstructed),
            other => Err(MrError::Config(format!("unknown collision mode '{other}'"))),
        }
    }
}

/// Collision evaluated directly on each complete leaf.
pub fn collide_leaves(field: &mut LeafField, spec: &SchemeSpec) -> Result<()> {
    crate::lbm::collide_cells(spec, field.values_mut())
}

/// Collision whose equilibrium part is the mean over the finest subcells of
/// the equilibria of the reconstructed solution.
pub fn collide_reconstructed(
    field: &mut LeafField,
    spec: &SchemeSpec,
    prediction: &PredictionSpec,
    boundary: BoundaryMode,
) -> Result<()> {
    let q = spec.q();
    let qc = spec.q_cons();
    let max = field.tree().max_level();
    let finest = Reconstructor::new(field, prediction, boundary).finest_field();
    let leaves = field.leaves().to_vec();
    field.values_mut().par_chunks_mut(q).zip(leaves.par_iter()).try_for_each(|(f, leaf)| {
        if leaf.level == max {
            return spec.collide_cell(f);
        }
        let range = leaf.finest_range(max);
        let count = (range.end - range.start) as f64;
        let mut mean = [0.0; MAX_Q];
        let mut m = [0.0; MAX_Q];
        let mut eq = [0.0; MAX_Q];
        for k in range {
            let cell = &finest[k as usize * q..(k as usize + 1) * q];
            spec.conserved(cell, &mut m[..qc]);
            spec.equilibrium(&m[..qc], &mut eq[..q - qc])?;
            for (a, e) in mean.iter_mut().zip(&eq[..q - qc]) {
                *a += e;
            }
        }
        for a in &mut mean[..q - qc] {
            *a /= count;
        }
        spec.moments(f, &mut m[..q]);
        spec.relax(&mut m[..q], &mean[..q - qc]);
        spec.populations(&m[..q], f);
        Ok(())
    })
}

/// `η(w, δ) = (1/2 − δ) sign(w) − 1/2`, offsets of the finest cells whose
/// reconstructed values cross a leaf edge during the stream.
pub fn eta(w: i64, delta: i64) -> i64 {
    debug_assert!(w != 0 && (1..=w.abs()).contains(&delta));
    if w > 0 {
        -delta
    } else {
        delta - 1
    }
}

/// Stream on the complete leaves: each leaf exchanges with its neighbours
/// the reconstructed finest-level populations crossing its edges. Reduces
/// to the uniform stream on the full tree.
pub fn adaptive_stream(
    field: &LeafField,
    spec: &SchemeSpec,
    prediction: &PredictionSpec,
    boundary: BoundaryMode,
) -> LeafField {
    let q = spec.q();
    let max = field.tree().max_level();
    let n_finest = field.geometry().finest_cells() as u64;
    let mut rec = Reconstructor::new(field, prediction, boundary);
    let mut out = field.clone();
    let at = |rec: &mut Reconstructor<'_>, pos: i64, h: usize| rec.finest(boundary.map(pos, n_finest))[h];
    for (i, leaf) in field.leaves().iter().enumerate() {
        let f = &mut out.values_mut()[i * q..(i + 1) * q];
        if leaf.level == max {
            for (h, w) in spec.velocities().iter().enumerate() {
                if *w != 0 {
                    f[h] = at(&mut rec, leaf.pos as i64 - w, h);
                }
            }
            continue;
        }
        let n = 1i64 << (max - leaf.level);
        let left = leaf.pos as i64 * n;
        let right = left + n;
        for (h, w) in spec.velocities().iter().enumerate() {
            if *w == 0 {
                continue;
            }
            let mut flux = 0.0;
            for delta in 1..=w.abs() {
                let e = eta(*w, delta);
                flux += at(&mut rec, left + e, h) - at(&mut rec, right + e, h);
            }
            f[h] += w.signum() as f64 * flux / n as f64;
        }
    }
    out
}

/// Everything that evolves in one adaptive simulation.
#[derive(Debug, Clone)]
pub struct AdaptiveState {
    pub field: LeafField,
    pub step: usize,
    pub policy: ThresholdPolicy,
    pub spec: Arc<SchemeSpec>,
    pub prediction: PredictionSpec,
    pub collision: CollisionMode,
    pub boundary: BoundaryMode,
}

impl AdaptiveState {
    pub fn tree_leaf_count(&self) -> usize {
        self.field.len()
    }

    /// Reconstructed populations on every finest cell.
    pub fn finest_populations(&self) -> Vec<f64> {
        crate::multiresolution::reconstruct_finest(&self.field, &self.prediction, self.boundary)
    }

    /// Leaf containing the finest position `k`.
    pub fn leaf_of(&self, k: u64) -> Option<CellIndex> {
        let max = self.field.tree().max_level();
        self.field.leaves().iter().copied().find(|l| l.finest_range(max).contains(&k))
    }
}

/// One time step: adapt the mesh with the details at `t^n`, collide, stream.
pub fn adaptive_step(state: &mut AdaptiveState) -> Result<()> {
    let adapted = adapt_mesh(&state.field, &state.policy, &state.prediction, state.spec.sigma(), state.boundary)?;
    let mut field = adapted.field;
    match state.collision {
        CollisionMode::Leaves => collide_leaves(&mut field, &state.spec)?,
        CollisionMode::Reconstructed => {
            collide_reconstructed(&mut field, &state.spec, &state.prediction, state.boundary)?
        }
    }
    state.field = adaptive_stream(&field, &state.spec, &state.prediction, state.boundary);
    state.step += 1;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lbm::{step_uniform, UniformState};
    use crate::mesh::{MeshGeometry, MeshTree};
    use crate::models::{build_d1q2, build_d1q3_sw, build_d1q5_sw, InitialDatum, ScalarFlux};

    fn geom() -> MeshGeometry {
        MeshGeometry::new(-3.0, 3.0, 2, 7).unwrap()
    }

    #[test]
    fn eta_examples() {
        assert_eq!(eta(1, 1), -1);
        assert_eq!(eta(-1, 1), 0);
        assert_eq!(eta(2, 1), -1);
        assert_eq!(eta(2, 2), -2);
        assert_eq!(eta(-2, 2), 1);
    }

    #[test]
    fn collision_mode_parsing() {
        assert_eq!("leaves".parse::<CollisionMode>().unwrap(), CollisionMode::Leaves);
        assert_eq!("Reconstructed".parse::<CollisionMode>().unwrap(), CollisionMode::Reconstructed);
        assert!("both".parse::<CollisionMode>().is_err());
    }

    #[test]
    fn full_tree_stream_is_uniform_stream() {
        let g = geom();
        let p = PredictionSpec::new(1).unwrap();
        let spec = build_d1q5_sw(1.0, 2.0, 1.0, 1.0, [1.2, 1.0, 1.0]).unwrap();
        let n = g.finest_cells();
        let v: Vec<f64> = (0..n * 5).map(|i| ((i * 37) % 11) as f64 * 0.1 + 1.0).collect();
        for b in [BoundaryMode::Copy, BoundaryMode::Periodic] {
            let field = LeafField::on_full_tree(g, 5, v.clone()).unwrap();
            let streamed = adaptive_stream(&field, &spec, &p, b);
            let mut uni = UniformState::new(g, 5, v.clone()).unwrap();
            crate::lbm::stream_uniform(&mut uni, &spec, b);
            assert_eq!(streamed.values(), uni.values());
        }
    }

    #[test]
    fn stream_on_coarse_leaf_is_projected_finest_stream() {
        let g = geom();
        let p = PredictionSpec::new(1).unwrap();
        let spec = build_d1q5_sw(1.0, 2.0, 1.0, 1.0, [1.2, 1.0, 1.0]).unwrap();
        let tree = MeshTree::from_indices(g, [CellIndex::new(3, 4), CellIndex::new(4, 8)])
            .unwrap()
            .grade(1, BoundaryMode::Copy);
        let field = LeafField::from_fn(tree, 5, |c, f| {
            let x = g.cell_center(c);
            for (h, v) in f.iter_mut().enumerate() {
                *v = (x * (h + 1) as f64).sin() + 2.0;
            }
        });
        let streamed = adaptive_stream(&field, &spec, &p, BoundaryMode::Copy);
        let finest = crate::multiresolution::reconstruct_finest(&field, &p, BoundaryMode::Copy);
        let mut uni = UniformState::new(g, 5, finest).unwrap();
        crate::lbm::stream_uniform(&mut uni, &spec, BoundaryMode::Copy);
        for (leaf, v) in streamed.iter() {
            let r = leaf.finest_range(7);
            let len = (r.end - r.start) as f64;
            for h in 0..5 {
                let mean: f64 = r.clone().map(|k| uni.values()[k as usize * 5 + h]).sum::<f64>() / len;
                assert!((mean - v[h]).abs() < 1e-13, "{leaf:?} h={h}");
            }
        }
    }

    fn degeneracy(spec: SchemeSpec, datum: InitialDatum, mode: CollisionMode, boundary: BoundaryMode) {
        let g = MeshGeometry::new(-1.0, 1.0, 2, 6).unwrap();
        let spec = Arc::new(spec);
        let conserved = datum.finest_averages(&g);
        let mut reference = UniformState::at_equilibrium(g, &spec, &conserved).unwrap();
        let field = LeafField::on_full_tree(g, spec.q(), reference.values().to_vec()).unwrap();
        let mut state = AdaptiveState {
            field,
            step: 0,
            policy: ThresholdPolicy::new(0.0, f64::INFINITY).unwrap(),
            spec: spec.clone(),
            prediction: PredictionSpec::new(1).unwrap(),
            collision: mode,
            boundary,
        };
        for _ in 0..40 {
            adaptive_step(&mut state).unwrap();
            step_uniform(&mut reference, &spec, boundary).unwrap();
            assert_eq!(state.field.values(), reference.values());
        }
    }

    #[test]
    fn zero_threshold_reproduces_reference() {
        for mode in [CollisionMode::Leaves, CollisionMode::Reconstructed] {
            degeneracy(build_d1q2(ScalarFlux::Burgers, 1.0, 1.5).unwrap(), InitialDatum::Hat, mode, BoundaryMode::Copy);
            degeneracy(
                build_d1q3_sw(1.0, 2.0, 1.3).unwrap(),
                InitialDatum::shallow_water_riemann(),
                mode,
                BoundaryMode::Periodic,
            );
        }
    }

    #[test]
    fn constant_datum_collapses_mesh() {
        let g = geom();
        let spec = Arc::new(build_d1q2(ScalarFlux::Burgers, 1.0, 1.0).unwrap());
        let conserved = vec![0.3; g.finest_cells()];
        let reference = UniformState::at_equilibrium(g, &spec, &conserved).unwrap();
        let mut state = AdaptiveState {
            field: LeafField::on_full_tree(g, 2, reference.values().to_vec()).unwrap(),
            step: 0,
            policy: ThresholdPolicy::new(1e-4, 0.0).unwrap(),
            spec,
            prediction: PredictionSpec::new(1).unwrap(),
            collision: CollisionMode::Leaves,
            boundary: BoundaryMode::Copy,
        };
        for _ in 0..5 {
            adaptive_step(&mut state).unwrap();
        }
        assert_eq!(state.field.len(), 4);
        for (_, v) in state.field.iter() {
            assert!((v[0] + v[1] - 0.3).abs() < 1e-15);
        }
    }

    #[test]
    fn linear_kernel_modes_agree() {
        let g = geom();
        let spec = build_d1q2(ScalarFlux::Advection(0.75), 1.0, 1.4).unwrap();
        let p = PredictionSpec::new(1).unwrap();
        let mut tree = MeshTree::coarsest(g);
        tree.add_to_complete_tree(CellIndex::new(7, 50));
        let tree = tree.grade(1, BoundaryMode::Copy);
        let field = LeafField::from_fn(tree, 2, |c, f| {
            let x = g.cell_center(c);
            f[0] = (-x * x).exp();
            f[1] = 0.3 * x.cos();
        });
        let mut a = field.clone();
        let mut b = field;
        collide_leaves(&mut a, &spec).unwrap();
        collide_reconstructed(&mut b, &spec, &p, BoundaryMode::Copy).unwrap();
        for (x, y) in a.values().iter().zip(b.values()) {
            assert!((x - y).abs() <= 1e-13);
        }
    }
}
