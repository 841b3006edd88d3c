//! Concrete schemes, initial data and exact solutions of the test problems.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{MrError, Result};
use crate::lbm::{SchemeParts, SchemeSpec};
use crate::mesh::MeshGeometry;
use crate::quadrature::cell_average;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScalarFlux {
    /// `φ(u) = c u`.
    Advection(f64),
    /// `φ(u) = u²/2`.
    Burgers,
}

impl ScalarFlux {
    pub fn phi(self, u: f64) -> f64 {
        match self {
            ScalarFlux::Advection(c) => c * u,
            ScalarFlux::Burgers => 0.5 * u * u,
        }
    }

    pub fn dphi(self, u: f64) -> f64 {
        match self {
            ScalarFlux::Advection(c) => c,
            ScalarFlux::Burgers => u,
        }
    }
}

fn check_rate(s: f64) -> Result<()> {
    if s > 0.0 && s <= 2.0 {
        Ok(())
    } else {
        Err(MrError::Parameter(format!("relaxation rate {s} outside (0, 2]")))
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(MrError::Parameter(format!("lattice velocity must be positive, got {lambda}")))
    }
}

fn depth(h: f64) -> Result<f64> {
    if h > 0.0 {
        Ok(h)
    } else {
        Err(MrError::Vacuum(h))
    }
}

/// D1Q2 for `∂_t u + ∂_x φ(u) = 0`: `M = [[1, 1], [λ, −λ]]`, `m¹_eq = φ(m⁰)`.
pub fn build_d1q2(flux: ScalarFlux, lambda: f64, s: f64) -> Result<SchemeSpec> {
    check_lambda(lambda)?;
    check_rate(s)?;
    let name = match flux {
        ScalarFlux::Advection(_) => "d1q2-advection",
        ScalarFlux::Burgers => "d1q2-burgers",
    };
    SchemeSpec::new(SchemeParts {
        name: name.into(),
        velocities: vec![1, -1],
        lambda,
        matrix: vec![1.0, 1.0, lambda, -lambda],
        q_cons: 1,
        rates: vec![s],
        equilibrium: Arc::new(move |m, out| {
            out[0] = flux.phi(m[0]);
            Ok(())
        }),
        linear: matches!(flux, ScalarFlux::Advection(_)),
    })
}

/// D1Q3 for shallow water, conserved `(h, hu)`.
pub fn build_d1q3_sw(g: f64, lambda: f64, s2: f64) -> Result<SchemeSpec> {
    check_lambda(lambda)?;
    check_rate(s2)?;
    let l2 = lambda * lambda;
    SchemeSpec::new(SchemeParts {
        name: "d1q3-shallow-water".into(),
        velocities: vec![0, 1, -1],
        lambda,
        matrix: vec![1.0, 1.0, 1.0, 0.0, lambda, -lambda, 0.0, l2, l2],
        q_cons: 2,
        rates: vec![s2],
        equilibrium: Arc::new(move |m, out| {
            let h = depth(m[0])?;
            out[0] = m[1] * m[1] / h + 0.5 * g * h * h;
            Ok(())
        }),
        linear: false,
    })
}

/// D1Q5 for shallow water with velocities `0, ±λ, ±2λ`.
pub fn build_d1q5_sw(g: f64, lambda: f64, alpha: f64, beta: f64, rates: [f64; 3]) -> Result<SchemeSpec> {
    check_lambda(lambda)?;
    for s in rates {
        check_rate(s)?;
    }
    let l = lambda;
    let mut matrix = Vec::with_capacity(25);
    for p in 0..5 {
        for w in [0.0, 1.0, -1.0, 2.0, -2.0f64] {
            matrix.push((w * l).powi(p));
        }
    }
    let l2 = l * l;
    SchemeSpec::new(SchemeParts {
        name: "d1q5-shallow-water".into(),
        velocities: vec![0, 1, -1, 2, -2],
        lambda,
        matrix,
        q_cons: 2,
        rates: rates.to_vec(),
        equilibrium: Arc::new(move |m, out| {
            let h = depth(m[0])?;
            let m2 = m[1] * m[1] / h + 0.5 * g * h * h;
            out[0] = m2;
            out[1] = alpha * l2 * m[1];
            out[2] = beta * l2 * m2;
            Ok(())
        }),
        linear: false,
    })
}

/// Positions, in the internal ordering `(ρ, ρu, E, ρ-flux, ρu-flux, E-flux)`,
/// of the moments `M⁰..M⁵` numbered as `(ρ, ρ-flux, ρu, ρu-flux, E, E-flux)`.
pub const EULER_MOMENT_SLOTS: [usize; 6] = [0, 3, 1, 4, 2, 5];

/// Three coupled D1Q2 schemes for the Euler system, conserved `(ρ, ρu, E)`.
pub fn build_euler_vectorial(gamma_gas: f64, lambda: f64, s: f64) -> Result<SchemeSpec> {
    check_lambda(lambda)?;
    check_rate(s)?;
    if !(gamma_gas > 1.0) {
        return Err(MrError::Parameter(format!("gas constant γ must exceed 1, got {gamma_gas}")));
    }
    let mut matrix = vec![0.0; 36];
    for field in 0..3 {
        matrix[field * 6 + 2 * field] = 1.0;
        matrix[field * 6 + 2 * field + 1] = 1.0;
        matrix[(field + 3) * 6 + 2 * field] = lambda;
        matrix[(field + 3) * 6 + 2 * field + 1] = -lambda;
    }
    let g = gamma_gas;
    SchemeSpec::new(SchemeParts {
        name: "euler-vectorial".into(),
        velocities: vec![1, -1, 1, -1, 1, -1],
        lambda,
        matrix,
        q_cons: 3,
        rates: vec![s; 3],
        equilibrium: Arc::new(move |m, out| {
            let rho = m[0];
            if !(rho > 0.0) {
                return Err(MrError::Vacuum(rho));
            }
            let (q, e) = (m[1], m[2]);
            out[0] = q;
            out[1] = (1.5 - 0.5 * g) * q * q / rho + (g - 1.0) * e;
            out[2] = g * e * q / rho + 0.5 * (1.0 - g) * q * q * q / (rho * rho);
            Ok(())
        }),
        linear: false,
    })
}

/// Initial data, evaluated pointwise and as exact cell averages of the
/// conserved variables.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialDatum {
    /// `e^{−20x²}`.
    Gaussian,
    /// `χ_{|x| ≤ 1/2}`.
    Box,
    /// `(1 + tanh(100x))/2`.
    Tanh,
    /// `(1 − |x|)` on `[−1, 1]`, zero elsewhere.
    Hat,
    /// Constant conserved states left and right of `x = 0`.
    Riemann {
        left: Vec<f64>,
        right: Vec<f64>,
    },
    Constant(Vec<f64>),
}

impl InitialDatum {
    /// Shallow water `(h, u) = (2, 0) | (1, 0)`.
    pub fn shallow_water_riemann() -> Self {
        InitialDatum::Riemann { left: vec![2.0, 0.0], right: vec![1.0, 0.0] }
    }

    /// Sod `(ρ, u, E) = (1, 0, 2.5) | (0.125, 0, 0.25)`.
    pub fn sod() -> Self {
        InitialDatum::Riemann { left: vec![1.0, 0.0, 2.5], right: vec![0.125, 0.0, 0.25] }
    }

    pub fn components(&self) -> usize {
        match self {
            InitialDatum::Riemann { left, .. } => left.len(),
            InitialDatum::Constant(v) => v.len(),
            _ => 1,
        }
    }

    /// Scalar value; the first component for vector data.
    pub fn scalar(&self, x: f64) -> f64 {
        match self {
            InitialDatum::Gaussian => (-20.0 * x * x).exp(),
            InitialDatum::Box => {
                if x.abs() <= 0.5 {
                    1.0
                } else {
                    0.0
                }
            }
            InitialDatum::Tanh => 0.5 * (1.0 + (100.0 * x).tanh()),
            InitialDatum::Hat => (1.0 - x.abs()).max(0.0),
            InitialDatum::Riemann { left, right } => {
                if x < 0.0 {
                    left[0]
                } else {
                    right[0]
                }
            }
            InitialDatum::Constant(v) => v[0],
        }
    }

    fn breakpoints(&self) -> &'static [f64] {
        match self {
            InitialDatum::Box => &[-0.5, 0.5],
            InitialDatum::Hat => &[-1.0, 0.0, 1.0],
            _ => &[],
        }
    }

    /// Exact (or quadrature-converged) average over `[l, r]`.
    pub fn cell_average(&self, l: f64, r: f64, out: &mut [f64]) {
        match self {
            InitialDatum::Riemann { left, right } => {
                let theta = ((0.0 - l) / (r - l)).clamp(0.0, 1.0);
                for ((o, a), b) in out.iter_mut().zip(left).zip(right) {
                    *o = theta * a + (1.0 - theta) * b;
                }
            }
            InitialDatum::Constant(v) => out.copy_from_slice(v),
            InitialDatum::Box => {
                out[0] = (r.min(0.5) - l.max(-0.5)).max(0.0) / (r - l);
            }
            _ => {
                let f = |x: f64| self.scalar(x);
                out[0] = cell_average(&f, l, r, self.breakpoints(), 8);
            }
        }
    }

    /// Averages on every finest cell, cell-major.
    pub fn finest_averages(&self, geometry: &MeshGeometry) -> Vec<f64> {
        let n = geometry.finest_cells();
        let qc = self.components();
        let dx = geometry.dx();
        let mut out = vec![0.0; n * qc];
        for (k, chunk) in out.chunks_exact_mut(qc).enumerate() {
            let l = geometry.a() + k as f64 * dx;
            self.cell_average(l, l + dx, chunk);
        }
        out
    }
}

/// The five scalar test problems.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScalarTest {
    I,
    II,
    III,
    IV,
    V,
}

impl ScalarTest {
    pub const ALL: [ScalarTest; 5] = [ScalarTest::I, ScalarTest::II, ScalarTest::III, ScalarTest::IV, ScalarTest::V];

    pub fn flux(self) -> ScalarFlux {
        match self {
            ScalarTest::I | ScalarTest::II => ScalarFlux::Advection(0.75),
            _ => ScalarFlux::Burgers,
        }
    }

    pub fn datum(self) -> InitialDatum {
        match self {
            ScalarTest::I => InitialDatum::Gaussian,
            ScalarTest::II | ScalarTest::IV => InitialDatum::Box,
            ScalarTest::III => InitialDatum::Tanh,
            ScalarTest::V => InitialDatum::Hat,
        }
    }

    pub fn mu_bar(self) -> f64 {
        match self {
            ScalarTest::I | ScalarTest::III => f64::INFINITY,
            _ => 0.0,
        }
    }

    pub fn final_time(self) -> f64 {
        match self {
            ScalarTest::IV => 0.7,
            ScalarTest::V => 1.3,
            _ => 0.4,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ScalarTest::I => "I",
            ScalarTest::II => "II",
            ScalarTest::III => "III",
            ScalarTest::IV => "IV",
            ScalarTest::V => "V",
        }
    }

    /// Points where the exact solution at time `t` fails to be smooth.
    pub fn kinks(self, t: f64) -> Vec<f64> {
        let c = 0.75 * t;
        match self {
            ScalarTest::I | ScalarTest::III => vec![],
            ScalarTest::II => vec![-0.5 + c, 0.5 + c],
            ScalarTest::IV => vec![-0.5, -0.5 + t, 0.5 + 0.5 * t],
            ScalarTest::V => {
                if t < 1.0 {
                    vec![-1.0, t, 1.0]
                } else {
                    vec![-1.0, hat_shock_position(t)]
                }
            }
        }
    }

    /// Entropy solution at `(t, x)`.
    pub fn exact(self, t: f64, x: f64) -> Result<f64> {
        if t < 0.0 {
            return Err(MrError::NoExactSolution(format!("test {} at negative time {t}", self.name())));
        }
        match self {
            ScalarTest::I => Ok(InitialDatum::Gaussian.scalar(x - 0.75 * t)),
            ScalarTest::II => Ok(InitialDatum::Box.scalar(x - 0.75 * t)),
            ScalarTest::III => Ok(burgers_characteristics(t, x)),
            ScalarTest::IV => {
                if t >= 2.0 {
                    return Err(MrError::NoExactSolution(format!("test IV after the wave interaction (t = {t})")));
                }
                Ok(double_riemann(t, x))
            }
            ScalarTest::V => Ok(hat_solution(t, x)),
        }
    }

    /// Exact averages on every finest cell at time `t`.
    pub fn exact_finest_averages(self, t: f64, geometry: &MeshGeometry) -> Result<Vec<f64>> {
        self.exact(t, 0.0)?;
        let kinks = self.kinks(t);
        let dx = geometry.dx();
        let pieces = if self == ScalarTest::III { 8 } else { 2 };
        Ok((0..geometry.finest_cells())
            .map(|k| {
                let l = geometry.a() + k as f64 * dx;
                let f = |x: f64| self.exact(t, x).expect("validated time");
                cell_average(&f, l, l + dx, &kinks, pieces)
            })
            .collect())
    }
}

impl fmt::Display for ScalarTest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScalarTest {
    type Err = MrError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "I" | "1" => Ok(ScalarTest::I),
            "II" | "2" => Ok(ScalarTest::II),
            "III" | "3" => Ok(ScalarTest::III),
            "IV" | "4" => Ok(ScalarTest::IV),
            "V" | "5" => Ok(ScalarTest::V),
            other => Err(MrError::Config(format!("unknown scalar test '{other}'"))),
        }
    }
}

/// Strong Burgers solution from the increasing tanh datum by bisection on
/// `x = ξ + u₀(ξ) t`.
fn burgers_characteristics(t: f64, x: f64) -> f64 {
    let u0 = |xi: f64| InitialDatum::Tanh.scalar(xi);
    let (mut lo, mut hi) = (x - t, x);
    while hi - lo > 1e-13 {
        let mid = 0.5 * (lo + hi);
        if mid + u0(mid) * t - x > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    u0(0.5 * (lo + hi))
}

/// Burgers with the box datum: rarefaction from `−1/2`, shock from `1/2`.
fn double_riemann(t: f64, x: f64) -> f64 {
    let shock = 0.5 + 0.5 * t;
    if x < -0.5 || x > shock {
        0.0
    } else if x < -0.5 + t {
        (x + 0.5) / t
    } else {
        1.0
    }
}

/// Shock position of the hat datum after the gradient catastrophe at `t = 1`.
pub fn hat_shock_position(t: f64) -> f64 {
    (2.0 * (1.0 + t)).sqrt() - 1.0
}

fn hat_solution(t: f64, x: f64) -> f64 {
    if x < -1.0 {
        return 0.0;
    }
    if t < 1.0 {
        if x <= t {
            (1.0 + x) / (1.0 + t)
        } else if x <= 1.0 {
            (1.0 - x) / (1.0 - t)
        } else {
            0.0
        }
    } else if x <= hat_shock_position(t) {
        (1.0 + x) / (1.0 + t)
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::gauss5;
    use proptest::prelude::*;

    #[test]
    fn d1q2_equilibria() {
        let adv = build_d1q2(ScalarFlux::Advection(0.75), 1.0, 1.0).unwrap();
        let burg = build_d1q2(ScalarFlux::Burgers, 1.0, 1.0).unwrap();
        let mut eq = [0.0];
        adv.equilibrium(&[2.0], &mut eq).unwrap();
        assert_eq!(eq[0], 1.5);
        burg.equilibrium(&[2.0], &mut eq).unwrap();
        assert_eq!(eq[0], 2.0);
        for s in [&adv, &burg] {
            s.equilibrium(&[0.0], &mut eq).unwrap();
            assert_eq!(eq[0], 0.0);
            assert_eq!(s.sigma(), 1);
            assert_eq!(s.velocities(), &[1, -1]);
        }
        assert!(adv.is_linear() && !burg.is_linear());
    }

    #[test]
    fn burgers_leaf_relaxation_example() {
        let s = build_d1q2(ScalarFlux::Burgers, 1.0, 1.0).unwrap();
        let mut m = [1.0, 0.0];
        let mut eq = [0.0];
        s.equilibrium(&m[..1], &mut eq).unwrap();
        s.relax(&mut m, &eq);
        assert_eq!(m[1], 0.5);
    }

    #[test]
    fn shallow_water_equilibria() {
        let s3 = build_d1q3_sw(9.81, 2.0, 1.0).unwrap();
        let mut eq = [0.0];
        s3.equilibrium(&[2.0, 0.0], &mut eq).unwrap();
        assert!((eq[0] - 19.62).abs() < 1e-12);
        let s3g1 = build_d1q3_sw(1.0, 2.0, 1.0).unwrap();
        s3g1.equilibrium(&[1.0, 0.0], &mut eq).unwrap();
        assert_eq!(eq[0], 0.5);
        s3g1.equilibrium(&[1.0, -0.0], &mut eq).unwrap();
        assert_eq!(eq[0], 0.5);
        assert_eq!(s3.equilibrium(&[0.0, 1.0], &mut eq), Err(MrError::Vacuum(0.0)));

        let s5 = build_d1q5_sw(9.81, 2.0, 1.0, 1.0, [1.0, 1.0, 1.0]).unwrap();
        let mut eq5 = [0.0; 3];
        s5.equilibrium(&[2.0, 0.0], &mut eq5).unwrap();
        assert_eq!(eq5[1], 0.0);
        assert!((eq5[2] - 78.48).abs() < 1e-12);
        assert_eq!(s5.sigma(), 2);
        assert_eq!(s5.time_step(&MeshGeometry::new(-1.0, 1.0, 2, 9).unwrap()), 2.0 / 512.0 / 2.0);
    }

    #[test]
    fn euler_equilibria_at_rest() {
        let s = build_euler_vectorial(1.4, 3.0, 1.75).unwrap();
        let mut eq = [0.0; 3];
        s.equilibrium(&[1.0, 0.0, 2.5], &mut eq).unwrap();
        assert_eq!(eq[0], 0.0);
        assert!((eq[1] - 1.0).abs() < 1e-15);
        assert_eq!(eq[2], 0.0);
        s.equilibrium(&[0.125, 0.0, 0.25], &mut eq).unwrap();
        assert!((eq[1] - 0.1).abs() < 1e-15);
        assert!(matches!(s.equilibrium(&[-1.0, 0.0, 1.0], &mut eq), Err(MrError::Vacuum(_))));
        assert!(build_euler_vectorial(1.0, 3.0, 1.0).is_err());
    }

    #[test]
    fn euler_moment_layout() {
        let s = build_euler_vectorial(1.4, 3.0, 1.0).unwrap();
        let f = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let mut m = [0.0; 6];
        s.moments(&f, &mut m);
        // (ρ, ρ-flux, ρu, ρu-flux, E, E-flux)
        let expected = [3.0, -3.0, 7.0, -3.0, 11.0, -3.0];
        for (i, slot) in EULER_MOMENT_SLOTS.iter().enumerate() {
            assert_eq!(m[*slot], expected[i]);
        }
    }

    #[test]
    fn exact_solution_examples() {
        assert!((ScalarTest::I.exact(0.4, 0.3).unwrap() - 1.0).abs() < 1e-15);
        let k = ScalarTest::IV.kinks(0.7);
        assert!((k[2] - 0.85).abs() < 1e-15);
        assert!((k[1] - 0.2).abs() < 1e-15);
        assert_eq!(ScalarTest::IV.exact(0.7, 0.5).unwrap(), 1.0);
        assert_eq!(ScalarTest::IV.exact(0.7, 0.9).unwrap(), 0.0);
        assert!((ScalarTest::IV.exact(0.7, -0.15).unwrap() - 0.5).abs() < 1e-15);
        assert!(ScalarTest::IV.exact(2.5, 0.0).is_err());
        assert!((hat_shock_position(1.3) - 1.144_761_058_952_721_6).abs() < 1e-12);
        assert!((ScalarTest::V.exact(0.5, 0.5).unwrap() - 1.0).abs() < 1e-15);
        assert!((ScalarTest::V.exact(1.3, 1.0).unwrap() - 2.0 / 2.3).abs() < 1e-15);
        assert_eq!(ScalarTest::V.exact(1.3, 1.2).unwrap(), 0.0);
    }

    #[test]
    fn characteristic_solution_is_consistent() {
        for x in [-0.5, -0.01, 0.0, 0.1, 0.3] {
            let u = burgers_characteristics(0.4, x);
            let xi = x - u * 0.4;
            assert!((InitialDatum::Tanh.scalar(xi) - u).abs() < 1e-10);
        }
    }

    #[test]
    fn riemann_and_box_averages() {
        let mut out = [0.0; 3];
        InitialDatum::sod().cell_average(-0.25, 0.75, &mut out);
        assert!((out[0] - (0.25 + 0.75 * 0.125)).abs() < 1e-15);
        let mut b = [0.0];
        InitialDatum::Box.cell_average(0.25, 0.75, &mut b);
        assert_eq!(b[0], 0.5);
        InitialDatum::Hat.cell_average(-1.0, 1.0, &mut b);
        assert!((b[0] - 0.5).abs() < 1e-15);
    }

    /// Space-time integral of the conservation law over a rectangle.
    fn flux_balance(test: ScalarTest, a: f64, b: f64, t1: f64, t2: f64) -> f64 {
        let flux = test.flux();
        let integral_at = |t: f64| {
            let f = |x: f64| test.exact(t, x).unwrap();
            cell_average(&f, a, b, &test.kinks(t), 64) * (b - a)
        };
        let boundary_flux = |x: f64| {
            let g = |t: f64| flux.phi(test.exact(t, x).unwrap());
            // the solution crosses a kink at most a few times; fine pieces
            let n = 400;
            let h = (t2 - t1) / n as f64;
            (0..n).map(|i| gauss5(&g, t1 + i as f64 * h, t1 + (i + 1) as f64 * h)).sum::<f64>()
        };
        integral_at(t2) - integral_at(t1) + boundary_flux(b) - boundary_flux(a)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn exact_solutions_balance_fluxes(
            which in 0usize..4,
            a in -2.5f64..0.0,
            w in 0.2f64..2.0,
            t1 in 0.0f64..0.3,
            dt in 0.05f64..0.3,
        ) {
            let test = [ScalarTest::I, ScalarTest::III, ScalarTest::IV, ScalarTest::V][which];
            let (k1, k2) = (test.kinks(t1), test.kinks(t1 + dt));
            // lateral sides must not be crossed by a discontinuity
            let crossed = |x: f64| k1.iter().zip(&k2).any(|(p, q)| (p - x) * (q - x) <= 0.0);
            prop_assume!(k1.len() == k2.len() && !crossed(a) && !crossed(a + w));
            let bal = flux_balance(test, a, a + w, t1, t1 + dt);
            prop_assert!(bal.abs() <= 1e-6, "{test:?} balance {bal}");
        }

        #[test]
        fn d1q2_equilibrium_is_flux(m0 in -10.0f64..10.0) {
            let s = build_d1q2(ScalarFlux::Burgers, 1.0, 1.0).unwrap();
            let mut eq = [0.0];
            s.equilibrium(&[m0], &mut eq).unwrap();
            prop_assert_eq!(eq[0], 0.5 * m0 * m0);
        }

        #[test]
        fn euler_equilibria_at_rest_are_pressure(rho in 0.01f64..10.0, e in 0.01f64..10.0) {
            let s = build_euler_vectorial(1.4, 3.0, 1.0).unwrap();
            let mut eq = [0.0; 3];
            s.equilibrium(&[rho, 0.0, e], &mut eq).unwrap();
            prop_assert_eq!(eq[0], 0.0);
            prop_assert!((eq[1] - 0.4 * e).abs() <= 1e-15 * e);
            prop_assert_eq!(eq[2], 0.0);
        }
    }
}
