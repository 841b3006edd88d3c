//! Composite Gauss–Legendre cell averages.

const NODES: [f64; 5] =
    [-0.906_179_845_938_664, -0.538_469_310_105_683, 0.0, 0.538_469_310_105_683, 0.906_179_845_938_664];
const WEIGHTS: [f64; 5] = [
    0.236_926_885_056_189_1,
    0.478_628_670_499_366_5,
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_5,
    0.236_926_885_056_189_1,
];

/// Five-point Gauss–Legendre integral over `[l, r]`.
pub fn gauss5<F: Fn(f64) -> f64>(f: &F, l: f64, r: f64) -> f64 {
    let half = 0.5 * (r - l);
    let mid = 0.5 * (r + l);
    NODES.iter().zip(WEIGHTS).map(|(x, w)| w * f(mid + half * x)).sum::<f64>() * half
}

/// Mean of `f` over `[l, r]`. The interval is first cut at every breakpoint
/// strictly inside it, then each piece into `pieces` equal parts; exact for
/// piecewise polynomials of degree ≤ 9 with kinks at the breakpoints.
pub fn cell_average<F: Fn(f64) -> f64>(f: &F, l: f64, r: f64, breakpoints: &[f64], pieces: usize) -> f64 {
    debug_assert!(r > l);
    let mut cuts: Vec<f64> = breakpoints.iter().copied().filter(|b| *b > l && *b < r).collect();
    cuts.sort_by(f64::total_cmp);
    let mut total = 0.0;
    let mut a = l;
    for b in cuts.into_iter().chain(std::iter::once(r)) {
        let h = (b - a) / pieces as f64;
        for i in 0..pieces {
            let lo = a + i as f64 * h;
            let hi = if i + 1 == pieces { b } else { lo + h };
            total += gauss5(f, lo, hi);
        }
        a = b;
    }
    total / (r - l)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_on_degree_nine() {
        let f = |x: f64| x.powi(9) - 2.0 * x.powi(4) + 1.0;
        let exact = |x: f64| x.powi(10) / 10.0 - 2.0 * x.powi(5) / 5.0 + x;
        let (l, r) = (-0.3, 1.7);
        let avg = cell_average(&f, l, r, &[], 1);
        assert!((avg - (exact(r) - exact(l)) / (r - l)).abs() < 1e-13);
    }

    #[test]
    fn splits_at_kinks() {
        let f = |x: f64| if x < 0.2 { 0.0 } else { 1.0 };
        assert!((cell_average(&f, 0.0, 1.0, &[0.2], 1) - 0.8).abs() < 1e-15);
        let hat = |x: f64| 1.0 - x.abs();
        assert!((cell_average(&hat, -1.0, 1.0, &[0.0], 2) - 0.5).abs() < 1e-15);
    }
}
