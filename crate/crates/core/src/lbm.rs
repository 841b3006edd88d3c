//! Lattice Boltzmann schemes in d'Humières form and the uniform reference
//! solver on the finest lattice.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{MrError, Result};
use crate::mesh::{BoundaryMode, MeshGeometry};

/// Maps the `q_cons` conserved moments to the `q − q_cons` equilibrium
/// values of the remaining moments.
pub type Equilibrium = Arc<dyn Fn(&[f64], &mut [f64]) -> Result<()> + Send + Sync>;

/// Largest population count handled by the stack buffers of the kernels.
pub const MAX_Q: usize = 8;

#[derive(Clone)]
pub struct SchemeSpec {
    name: String,
    q: usize,
    q_cons: usize,
    velocities: Vec<i64>,
    lambda: f64,
    m: Vec<f64>,
    m_inv: Vec<f64>,
    equilibrium: Equilibrium,
    rates: Vec<f64>,
    linear: bool,
}

impl fmt::Debug for SchemeSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SchemeSpec")
            .field("name", &self.name)
            .field("q", &self.q)
            .field("q_cons", &self.q_cons)
            .field("velocities", &self.velocities)
            .field("lambda", &self.lambda)
            .field("rates", &self.rates)
            .field("linear", &self.linear)
            .finish()
    }
}

/// Builder input for [`SchemeSpec::new`].
pub struct SchemeParts {
    pub name: String,
    pub velocities: Vec<i64>,
    pub lambda: f64,
    /// Row-major `q × q` moment matrix, conserved moments first.
    pub matrix: Vec<f64>,
    pub q_cons: usize,
    pub rates: Vec<f64>,
    pub equilibrium: Equilibrium,
    /// Whether the equilibrium is linear in the conserved moments.
    pub linear: bool,
}

impl SchemeSpec {
    pub fn new(parts: SchemeParts) -> Result<Self> {
        let q = parts.velocities.len();
        if q == 0 || q > MAX_Q {
            return Err(MrError::Scheme(format!("population count {q} not in 1..={MAX_Q}")));
        }
        if parts.q_cons == 0 || parts.q_cons >= q {
            return Err(MrError::Scheme(format!("q_cons = {} must lie in 1..{q}", parts.q_cons)));
        }
        if !(parts.lambda > 0.0 && parts.lambda.is_finite()) {
            return Err(MrError::Scheme(format!("lattice velocity must be positive, got {}", parts.lambda)));
        }
        if parts.matrix.len() != q * q {
            return Err(MrError::LengthMismatch { left: parts.matrix.len(), right: q * q });
        }
        if parts.rates.len() != q - parts.q_cons {
            return Err(MrError::LengthMismatch { left: parts.rates.len(), right: q - parts.q_cons });
        }
        if let Some(s) = parts.rates.iter().find(|s| !(**s > 0.0 && **s <= 2.0)) {
            return Err(MrError::Scheme(format!("relaxation rate {s} outside (0, 2]")));
        }
        let m = DMatrix::from_row_slice(q, q, &parts.matrix);
        let svd = m.clone().svd(false, false);
        let (smax, smin) = (svd.singular_values.max(), svd.singular_values.min());
        if !(smin > 1e-12 * smax) {
            return Err(MrError::Scheme("moment matrix is singular".into()));
        }
        let inv = m.try_inverse().ok_or_else(|| MrError::Scheme("moment matrix is singular".into()))?;
        let m_inv = (0..q).flat_map(|r| (0..q).map(move |c| (r, c))).map(|(r, c)| inv[(r, c)]).collect();
        Ok(Self {
            name: parts.name,
            q,
            q_cons: parts.q_cons,
            velocities: parts.velocities,
            lambda: parts.lambda,
            m: parts.matrix,
            m_inv,
            equilibrium: parts.equilibrium,
            rates: parts.rates,
            linear: parts.linear,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn q_cons(&self) -> usize {
        self.q_cons
    }

    pub fn velocities(&self) -> &[i64] {
        &self.velocities
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    pub fn is_linear(&self) -> bool {
        self.linear
    }

    /// σ = max_h |w^h|.
    pub fn sigma(&self) -> usize {
        self.velocities.iter().map(|w| w.unsigned_abs() as usize).max().unwrap_or(0)
    }

    /// Row-major moment matrix.
    pub fn matrix(&self) -> &[f64] {
        &self.m
    }

    /// `Δt = Δx_{J̄} / λ`.
    pub fn time_step(&self, geometry: &MeshGeometry) -> f64 {
        geometry.dx() / self.lambda
    }

    fn apply(mat: &[f64], q: usize, x: &[f64], y: &mut [f64]) {
        for (r, out) in y.iter_mut().enumerate().take(q) {
            *out = mat[r * q..(r + 1) * q].iter().zip(x).map(|(a, b)| a * b).sum();
        }
    }

    /// `m = M f`.
    pub fn moments(&self, f: &[f64], m: &mut [f64]) {
        Self::apply(&self.m, self.q, f, m);
    }

    /// `f = M⁻¹ m`.
    pub fn populations(&self, m: &[f64], f: &mut [f64]) {
        Self::apply(&self.m_inv, self.q, m, f);
    }

    /// Equilibrium values of the non-conserved moments.
    pub fn equilibrium(&self, conserved: &[f64], out: &mut [f64]) -> Result<()> {
        (self.equilibrium)(conserved, out)
    }

    /// `m^h ← (1 − s^h) m^h + s^h m^{h,eq}` for the non-conserved moments.
    #[inline]
    pub fn relax(&self, m: &mut [f64], m_eq: &[f64]) {
        for ((mh, eq), s) in m[self.q_cons..].iter_mut().zip(m_eq).zip(&self.rates) {
            *mh = (1.0 - s) * *mh + s * eq;
        }
    }

    /// Local collision of the populations of one cell.
    pub fn collide_cell(&self, f: &mut [f64]) -> Result<()> {
        let q = self.q;
        let mut m = [0.0; MAX_Q];
        let mut eq = [0.0; MAX_Q];
        self.moments(f, &mut m[..q]);
        self.equilibrium(&m[..self.q_cons], &mut eq[..q - self.q_cons])?;
        self.relax(&mut m[..q], &eq[..q - self.q_cons]);
        self.populations(&m[..q], f);
        Ok(())
    }

    /// Populations at equilibrium for the given conserved moments.
    pub fn equilibrium_populations(&self, conserved: &[f64], f: &mut [f64]) -> Result<()> {
        let q = self.q;
        let mut m = [0.0; MAX_Q];
        m[..self.q_cons].copy_from_slice(conserved);
        self.equilibrium(conserved, &mut m[self.q_cons..q])?;
        self.populations(&m[..q], f);
        Ok(())
    }

    /// Conserved moments of one cell.
    pub fn conserved(&self, f: &[f64], out: &mut [f64]) {
        let q = self.q;
        for (r, o) in out.iter_mut().enumerate().take(self.q_cons) {
            *o = self.m[r * q..(r + 1) * q].iter().zip(f).map(|(a, b)| a * b).sum();
        }
    }
}

/// Populations on the whole finest lattice, cell-major.
#[derive(Debug, Clone, PartialEq)]
pub struct UniformState {
    geometry: MeshGeometry,
    q: usize,
    values: Vec<f64>,
}

impl UniformState {
    pub fn new(geometry: MeshGeometry, q: usize, values: Vec<f64>) -> Result<Self> {
        let expected = geometry.finest_cells() * q;
        if values.len() != expected {
            return Err(MrError::LengthMismatch { left: values.len(), right: expected });
        }
        Ok(Self { geometry, q, values })
    }

    /// Equilibrium initialization from conserved-moment cell averages
    /// (cell-major, `q_cons` per cell).
    pub fn at_equilibrium(geometry: MeshGeometry, spec: &SchemeSpec, conserved: &[f64]) -> Result<Self> {
        let n = geometry.finest_cells();
        let qc = spec.q_cons();
        if conserved.len() != n * qc {
            return Err(MrError::LengthMismatch { left: conserved.len(), right: n * qc });
        }
        let q = spec.q();
        let mut values = vec![0.0; n * q];
        for (f, c) in values.chunks_exact_mut(q).zip(conserved.chunks_exact(qc)) {
            spec.equilibrium_populations(c, f)?;
        }
        Ok(Self { geometry, q, values })
    }

    pub fn geometry(&self) -> &MeshGeometry {
        &self.geometry
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Conserved moments on every finest cell, cell-major.
    pub fn conserved_moments(&self, spec: &SchemeSpec) -> Vec<f64> {
        conserved_moments(spec, &self.values)
    }
}

/// Conserved moments of a cell-major population array.
pub fn conserved_moments(spec: &SchemeSpec, populations: &[f64]) -> Vec<f64> {
    let qc = spec.q_cons();
    let mut out = vec![0.0; populations.len() / spec.q() * qc];
    for (f, m) in populations.chunks_exact(spec.q()).zip(out.chunks_exact_mut(qc)) {
        spec.conserved(f, m);
    }
    out
}

/// Collision on every cell of a cell-major population array.
pub fn collide_cells(spec: &SchemeSpec, values: &mut [f64]) -> Result<()> {
    values.par_chunks_mut(spec.q()).try_for_each(|f| spec.collide_cell(f))
}

pub fn collide_uniform(state: &mut UniformState, spec: &SchemeSpec) -> Result<()> {
    collide_cells(spec, &mut state.values)
}

/// `F^h_k ← F^h_{k − w^h}` with ghosts given by the boundary mode.
pub fn stream_uniform(state: &mut UniformState, spec: &SchemeSpec, boundary: BoundaryMode) {
    let q = state.q;
    let n = state.geometry.finest_cells() as u64;
    let old = state.values.clone();
    for (k, f) in state.values.chunks_exact_mut(q).enumerate() {
        for (h, w) in spec.velocities().iter().enumerate() {
            let src = boundary.map(k as i64 - w, n) as usize;
            f[h] = old[src * q + h];
        }
    }
}

/// The reference operator `L = stream ∘ collide`.
pub fn step_uniform(state: &mut UniformState, spec: &SchemeSpec, boundary: BoundaryMode) -> Result<()> {
    collide_uniform(state, spec)?;
    stream_uniform(state, spec, boundary);
    Ok(())
}

/// Optimal continuity constant of the D1Q2 advection scheme:
/// `1` when `s ≤ 2/(1 + c/λ)`, `s(1 + c/λ) − 1` otherwise.
pub fn continuity_constant_advection(c: f64, lambda: f64, s: f64) -> Result<f64> {
    if !(c > 0.0 && c <= lambda) {
        return Err(MrError::Parameter(format!("advection speed {c} must lie in (0, λ = {lambda}]")));
    }
    let r = 1.0 + c / lambda;
    Ok(if s <= 2.0 / r { 1.0 } else { s * r - 1.0 })
}
