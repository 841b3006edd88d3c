use crate::error::{MrError, Result};

/// Centered polynomial prediction of children averages from `2γ + 1`
/// averages on the father's level. Exact on averages of polynomials of
/// degree `≤ 2γ`.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionSpec {
    gamma: usize,
    coefficients: Vec<f64>,
}

impl PredictionSpec {
    pub fn new(gamma: usize) -> Result<Self> {
        let coefficients = match gamma {
            1 => vec![-1.0 / 8.0],
            2 => vec![-22.0 / 128.0, 3.0 / 128.0],
            3 => vec![-201.0 / 1024.0, 11.0 / 256.0, -5.0 / 1024.0],
            other => return Err(MrError::UnsupportedStencil(other)),
        };
        Ok(Self { gamma, coefficients })
    }

    pub fn gamma(&self) -> usize {
        self.gamma
    }

    /// Order μ = 2γ + 1.
    pub fn order(&self) -> u32 {
        2 * self.gamma as u32 + 1
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn window_len(&self) -> usize {
        2 * self.gamma + 1
    }

    /// The odd-symmetric correction `Σ c_α (f_{k+α} − f_{k−α})`.
    #[inline]
    pub fn correction(&self, window: &[f64]) -> f64 {
        debug_assert_eq!(window.len(), self.window_len());
        let g = self.gamma;
        self.coefficients.iter().enumerate().map(|(i, c)| c * (window[g + i + 1] - window[g - i - 1])).sum()
    }

    /// Predicted `(even child, odd child)` averages.
    #[inline]
    pub fn predict(&self, window: &[f64]) -> (f64, f64) {
        let center = window[self.gamma];
        let s = self.correction(window);
        (center + s, center - s)
    }
}

/// Mean of the two children averages.
#[inline]
pub fn project(child_even: f64, child_odd: f64) -> f64 {
    0.5 * (child_even + child_odd)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    /// Exact average of x^d over [l, r].
    fn monomial_average(d: i32, l: f64, r: f64) -> f64 {
        (r.powi(d + 1) - l.powi(d + 1)) / ((d + 1) as f64 * (r - l))
    }

    fn poly_average(coeffs: &[f64], l: f64, r: f64) -> f64 {
        coeffs.iter().enumerate().map(|(d, c)| c * monomial_average(d as i32, l, r)).sum()
    }

    #[test]
    fn projection_examples() {
        assert_eq!(project(1.0, 3.0), 2.0);
        assert_eq!(project(-4.25, -4.25), -4.25);
        assert_eq!(project(0.75, 1.25), 1.0);
    }

    #[test]
    fn prediction_examples() {
        let p = PredictionSpec::new(1).unwrap();
        assert_eq!(p.predict(&[0.0, 1.0, 2.0]), (0.75, 1.25));
        assert_eq!(p.predict(&[3.5, 3.5, 3.5]), (3.5, 3.5));
        let w = [13.0 / 12.0, 1.0 / 12.0, 13.0 / 12.0];
        let (e, o) = p.predict(&w);
        // exact averages of x^2 on [-1/2, 0] and [0, 1/2]
        assert_relative_eq!(e, monomial_average(2, -0.5, 0.0), max_relative = 1e-15);
        assert_relative_eq!(o, monomial_average(2, 0.0, 0.5), max_relative = 1e-15);
    }

    #[test]
    fn unsupported_stencil() {
        assert_eq!(PredictionSpec::new(0), Err(MrError::UnsupportedStencil(0)));
        assert_eq!(PredictionSpec::new(4), Err(MrError::UnsupportedStencil(4)));
        assert_eq!(PredictionSpec::new(3).unwrap().order(), 7);
    }

    #[test]
    fn polynomial_exactness_all_degrees() {
        for gamma in 1..=3usize {
            let p = PredictionSpec::new(gamma).unwrap();
            for degree in 0..=2 * gamma {
                let mut coeffs = vec![0.0; degree + 1];
                coeffs[degree] = 1.0;
                coeffs[0] = 0.3;
                let h = 0.37;
                let x0 = 0.21;
                let window: Vec<f64> = (-(gamma as i64)..=gamma as i64)
                    .map(|a| {
                        let l = x0 + (a as f64 - 0.5) * h;
                        poly_average(&coeffs, l, l + h)
                    })
                    .collect();
                let (e, o) = p.predict(&window);
                let mid = x0;
                let ex_e = poly_average(&coeffs, mid - 0.5 * h, mid);
                let ex_o = poly_average(&coeffs, mid, mid + 0.5 * h);
                assert!((e - ex_e).abs() <= 1e-13 * ex_e.abs().max(1.0), "γ={gamma} d={degree}");
                assert!((o - ex_o).abs() <= 1e-13 * ex_o.abs().max(1.0), "γ={gamma} d={degree}");
            }
        }
    }

    #[test]
    fn not_exact_beyond_degree_two_gamma() {
        let p = PredictionSpec::new(1).unwrap();
        let window: Vec<f64> = (-1..=1).map(|a| monomial_average(3, a as f64 - 0.5, a as f64 + 0.5)).collect();
        let (e, _) = p.predict(&window);
        assert!((e - monomial_average(3, -0.5, 0.0)).abs() > 1e-3);
    }

    proptest! {
        #[test]
        fn prediction_consistent_with_projection(
            gamma in 1usize..4,
            window in proptest::collection::vec(-1e3f64..1e3, 7),
        ) {
            let p = PredictionSpec::new(gamma).unwrap();
            let w = &window[..p.window_len()];
            let (e, o) = p.predict(w);
            let center = w[gamma];
            prop_assert!((project(e, o) - center).abs() <= 1e-14 * center.abs().max(1.0) * 4.0);
        }
    }
}
