//! Error norms, compression, detail decay, ε-sweeps and fits.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::adaptive::CollisionMode;
use crate::config::RunConfig;
use crate::error::{MrError, Result};
use crate::mesh::{BoundaryMode, MeshGeometry, MeshTree};
use crate::multiresolution::{project, PredictionSpec};
use crate::quadrature::cell_average;
use crate::simulation::{run, RunOptions, RunResult};

/// `(Δx Σ_k |u_k − v_k|^p)^{1/p}`.
pub fn weighted_lp(u: &[f64], v: &[f64], dx: f64, p: f64) -> Result<f64> {
    if u.len() != v.len() {
        return Err(MrError::LengthMismatch { left: u.len(), right: v.len() });
    }
    if p == 1.0 {
        return Ok(dx * u.iter().zip(v).map(|(a, b)| (a - b).abs()).sum::<f64>());
    }
    Ok((dx * u.iter().zip(v).map(|(a, b)| (a - b).abs().powf(p)).sum::<f64>()).powf(1.0 / p))
}

/// `Δx Σ_k |u_k − v_k|`.
pub fn weighted_l1(u: &[f64], v: &[f64], dx: f64) -> Result<f64> {
    weighted_lp(u, v, dx, 1.0)
}

/// Per-component weighted norms of two cell-major arrays with `stride`
/// components per cell.
pub fn component_errors(u: &[f64], v: &[f64], stride: usize, dx: f64, p: f64) -> Result<Vec<f64>> {
    if u.len() != v.len() {
        return Err(MrError::LengthMismatch { left: u.len(), right: v.len() });
    }
    (0..stride)
        .map(|h| {
            let a: Vec<f64> = u.iter().skip(h).step_by(stride).copied().collect();
            let b: Vec<f64> = v.iter().skip(h).step_by(stride).copied().collect();
            weighted_lp(&a, &b, dx, p)
        })
        .collect()
}

/// `100 (1 − |S(Λ)| / 2^{J̄})`.
pub fn compression_factor(tree: &MeshTree) -> f64 {
    let leaves = tree.complete_leaves().len() as f64;
    100.0 * (1.0 - leaves / tree.geometry().finest_cells() as f64)
}

/// Least-squares line `y ≈ slope x + intercept`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

impl LinearFit {
    pub fn eval(&self, x: f64) -> f64 {
        self.slope * x + self.intercept
    }
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    if x.len() != y.len() {
        return Err(MrError::LengthMismatch { left: x.len(), right: y.len() });
    }
    if x.len() < 2 {
        return Err(MrError::Parameter("a fit needs at least two points".into()));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    if sxx == 0.0 {
        return Err(MrError::Parameter("abscissae are all equal".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let ss_res: f64 = x.iter().zip(y).map(|(a, b)| (b - slope * a - intercept).powi(2)).sum();
    let r2 = if ss_tot == 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot };
    Ok(LinearFit { slope, intercept, r2 })
}

/// Fit of `log10 y` against `log10 x`.
pub fn loglog_fit(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    if x.iter().chain(y).any(|v| !(*v > 0.0)) {
        return Err(MrError::Parameter("log-log fit needs positive data".into()));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.log10()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.log10()).collect();
    linear_fit(&lx, &ly)
}

/// Accumulated-error bound `C_MR ε (n + 1)` when `C̃ = 0`, otherwise
/// `C_MR ε (1 + (e^{C̃ n} − 1)/C̃)`.
pub fn accumulation_bound(c_mr: f64, epsilon: f64, c_tilde: f64, n: usize) -> f64 {
    let n = n as f64;
    if c_tilde == 0.0 {
        c_mr * epsilon * (n + 1.0)
    } else {
        c_mr * epsilon * (1.0 + ((c_tilde * n).exp() - 1.0) / c_tilde)
    }
}

/// Fields of the detail-decay study, of decreasing regularity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecayField {
    /// `e^{−20x²}`.
    Gaussian,
    /// Hat with kinks at −1, 0, 1.
    Hat,
    /// `√x` on `[0, 1]`, `3/2 − x/2` on `[1, 3]`.
    SquareRoot,
    /// `(1 + x)/2` on `[−1, 1]`.
    Jump,
}

impl DecayField {
    pub const ALL: [DecayField; 4] = [DecayField::Gaussian, DecayField::Hat, DecayField::SquareRoot, DecayField::Jump];

    pub fn from_index(i: usize) -> Result<Self> {
        Self::ALL.get(i).copied().ok_or_else(|| MrError::Parameter(format!("decay field {i} not in 0..=3")))
    }

    pub fn index(self) -> usize {
        Self::ALL.iter().position(|f| *f == self).expect("listed")
    }

    /// Expected asymptotic ratio `2^{min(ν, μ)}` for `γ = 1`.
    pub fn theoretical_ratio(self) -> f64 {
        match self {
            DecayField::Gaussian => 8.0,
            DecayField::Hat => 2.0,
            DecayField::SquareRoot => 2f64.sqrt(),
            DecayField::Jump => 1.0,
        }
    }

    fn antiderivative(self, x: f64) -> f64 {
        match self {
            DecayField::Gaussian => unreachable!("no closed form used"),
            DecayField::Hat => {
                if x <= -1.0 {
                    0.0
                } else if x <= 0.0 {
                    0.5 * (1.0 + x).powi(2)
                } else if x <= 1.0 {
                    0.5 + x - 0.5 * x * x
                } else {
                    1.0
                }
            }
            DecayField::SquareRoot => {
                if x <= 0.0 {
                    0.0
                } else if x <= 1.0 {
                    2.0 / 3.0 * x.powf(1.5)
                } else {
                    let y = x.min(3.0);
                    2.0 / 3.0 + 1.5 * y - 0.25 * y * y - 1.25
                }
            }
            DecayField::Jump => {
                if x <= -1.0 {
                    0.0
                } else if x <= 1.0 {
                    0.25 * (1.0 + x).powi(2)
                } else {
                    1.0
                }
            }
        }
    }

    /// Exact averages on every finest cell.
    pub fn finest_averages(self, geometry: &MeshGeometry) -> Vec<f64> {
        let dx = geometry.dx();
        (0..geometry.finest_cells())
            .map(|k| {
                let l = geometry.a() + k as f64 * dx;
                let r = l + dx;
                match self {
                    DecayField::Gaussian => {
                        let f = |x: f64| (-20.0 * x * x).exp();
                        cell_average(&f, l, r, &[], 2)
                    }
                    _ => (self.antiderivative(r) - self.antiderivative(l)) / dx,
                }
            })
            .collect()
    }
}

impl FromStr for DecayField {
    type Err = MrError;

    fn from_str(s: &str) -> Result<Self> {
        let i: usize = s.trim().parse().map_err(|_| MrError::Parameter(format!("bad decay field '{s}'")))?;
        Self::from_index(i)
    }
}

impl fmt::Display for DecayField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.index())
    }
}

/// One level of the detail-decay table: `d_j = max_k |d_{j,k}|` and
/// `d_j / d_{j+1}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayRow {
    pub level: u32,
    pub detail: f64,
    pub ratio: Option<f64>,
}

/// Largest detail on each level `min+1..=max` of the full tree built from
/// finest averages.
pub fn full_tree_level_details(
    finest: &[f64],
    geometry: &MeshGeometry,
    prediction: &PredictionSpec,
    boundary: BoundaryMode,
) -> Vec<f64> {
    let (min, max) = (geometry.min_level(), geometry.max_level());
    let mut levels: Vec<Vec<f64>> = vec![finest.to_vec()];
    for _ in min..max {
        let fine = levels.last().expect("nonempty");
        levels.push(fine.chunks_exact(2).map(|c| project(c[0], c[1])).collect());
    }
    levels.reverse();
    let g = prediction.gamma() as i64;
    let mut window = vec![0.0; prediction.window_len()];
    (1..levels.len())
        .map(|i| {
            let (coarse, fine) = (&levels[i - 1], &levels[i]);
            let n = coarse.len() as u64;
            (0..coarse.len())
                .map(|k| {
                    for (w, d) in window.iter_mut().zip(-g..=g) {
                        *w = coarse[boundary.map(k as i64 + d, n) as usize];
                    }
                    (fine[2 * k] - prediction.predict(&window).0).abs()
                })
                .fold(0.0, f64::max)
        })
        .collect()
}

/// Detail decay with `γ = 1` on `[−3, 3]` with cells of width `2^{−j}` on
/// level `j`, for `first ≤ j ≤ finest`.
pub fn detail_decay_study(field: DecayField, first: u32, finest: u32) -> Result<Vec<DecayRow>> {
    if first == 0 || first > finest {
        return Err(MrError::Parameter(format!("bad decay level range {first}..={finest}")));
    }
    let geometry = MeshGeometry::with_unit_cells(-3.0, 3.0, 0, finest)?;
    let prediction = PredictionSpec::new(1)?;
    let finest_values = field.finest_averages(&geometry);
    // entry i holds the details of level i + 1
    let details = full_tree_level_details(&finest_values, &geometry, &prediction, BoundaryMode::Copy);
    Ok((first..=finest)
        .map(|j| {
            let i = (j - 1) as usize;
            DecayRow { level: j, detail: details[i], ratio: details.get(i + 1).map(|next| details[i] / next) }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub epsilon: f64,
    /// `e^{h,N}` per conserved moment.
    pub error: Vec<f64>,
    pub compression: f64,
    pub leaves: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub rows: Vec<SweepRow>,
    /// Log-log fit of `e^{h,N}` against ε, per conserved moment; `None` when
    /// some error vanishes.
    pub fits: Vec<Option<LinearFit>>,
}

/// One adaptive run per ε against a single shared reference trajectory.
pub fn epsilon_sweep(config: &RunConfig, epsilons: &[f64]) -> Result<Sweep> {
    let runs: Vec<RunResult> = epsilons
        .par_iter()
        .map(|eps| {
            let mut c = config.clone();
            c.epsilon = *eps;
            run(&c, RunOptions { reference: true, injection: false })
        })
        .collect::<Result<_>>()?;
    let rows: Vec<SweepRow> = runs
        .iter()
        .zip(epsilons)
        .map(|(r, eps)| SweepRow {
            epsilon: *eps,
            error: r.last().error.clone(),
            compression: r.last().compression,
            leaves: r.last().leaves,
        })
        .collect();
    let qc = rows.first().map_or(0, |r| r.error.len());
    let fits = (0..qc)
        .map(|h| {
            let e: Vec<f64> = rows.iter().map(|r| r.error[h]).collect();
            loglog_fit(epsilons, &e).ok()
        })
        .collect();
    Ok(Sweep { rows, fits })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CollisionComparison {
    pub leaves: Sweep,
    pub reconstructed: Sweep,
}

/// The same ε-sweep with both collision variants.
pub fn compare_collision(config: &RunConfig, epsilons: &[f64]) -> Result<CollisionComparison> {
    let mut c = config.clone();
    c.collision = CollisionMode::Leaves;
    let leaves = epsilon_sweep(&c, epsilons)?;
    c.collision = CollisionMode::Reconstructed;
    let reconstructed = epsilon_sweep(&c, epsilons)?;
    Ok(CollisionComparison { leaves, reconstructed })
}
