//! One-dimensional search helpers: scanning grids, golden-section refinement
//! and bisection.

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section search for a minimum of a unimodal `f` on `[lo, hi]`,
/// stopping once the bracket is narrower than `tol`. Returns `(x, f(x))`.
pub fn golden_section<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64) {
    if hi < lo {
        std::mem::swap(&mut lo, &mut hi);
    }
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    let mut iter = 0;
    while hi - lo > tol && iter < 400 {
        iter += 1;
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        }
    }
    let mid = 0.5 * (lo + hi);
    let fm = f(mid);
    // never return something worse than a probed point
    [(mid, fm), (x1, f1), (x2, f2)]
        .into_iter()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap()
}

/// `n` evenly spaced points on `[lo, hi]`, endpoints included.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|i| {
                if i == n - 1 {
                    hi
                } else {
                    lo + (hi - lo) * i as f64 / (n - 1) as f64
                }
            })
            .collect(),
    }
}

/// Scans `points` (sorted ascending) and returns the index of the smallest
/// value; ties go to the point with the smallest `tie_key`.
pub fn argmin_by_key(values: &[f64], tie_key: impl Fn(usize) -> f64) -> usize {
    let mut best = 0;
    for i in 1..values.len() {
        if values[i] < values[best] || (values[i] == values[best] && tie_key(i) < tie_key(best)) {
            best = i;
        }
    }
    best
}

/// Grid scan over `points` followed by golden-section refinement inside the
/// neighbouring grid cells of the best point.
pub fn grid_then_golden<F: Fn(f64) -> f64>(f: &F, points: &[f64], tol: f64) -> (f64, f64) {
    let values: Vec<f64> = points.iter().map(|&x| f(x)).collect();
    let best = argmin_by_key(&values, |i| points[i].abs());
    let lo = points[best.saturating_sub(1)];
    let hi = points[(best + 1).min(points.len() - 1)];
    let (x, fx) = golden_section(f, lo, hi, tol);
    if fx < values[best] || (fx == values[best] && x.abs() < points[best].abs()) {
        (x, fx)
    } else {
        (points[best], values[best])
    }
}

/// Sorted, deduplicated union of a grid and extra candidate points.
pub fn augmented_grid(lo: f64, hi: f64, n: usize, extra: &[f64]) -> Vec<f64> {
    let mut pts = linspace(lo, hi, n);
    pts.extend(extra.iter().copied().filter(|v| v.is_finite()));
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts
}

/// Root of a monotone `g` on `[lo, hi]` with `g(lo)` and `g(hi)` of
/// opposite sign, to machine precision.
pub fn bisect<F: Fn(f64) -> f64>(g: F, mut lo: f64, mut hi: f64) -> f64 {
    let mut g_lo = g(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let gm = g(mid);
        if gm == 0.0 {
            return mid;
        }
        if (gm < 0.0) == (g_lo < 0.0) {
            lo = mid;
            g_lo = gm;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_finds_parabola_minimum() {
        let (x, fx) = golden_section(|x| (x - 1.3).powi(2) + 2.0, -10.0, 10.0, 1e-10);
        // function values resolve x only to about sqrt(machine epsilon)
        assert!((x - 1.3).abs() < 1e-7);
        assert!((fx - 2.0).abs() < 1e-15);
    }

    #[test]
    fn linspace_endpoints() {
        let g = linspace(0.0, 1.0, 10);
        assert_eq!(g.len(), 10);
        assert_eq!(g[0], 0.0);
        assert_eq!(g[9], 1.0);
        assert_eq!(linspace(2.0, 3.0, 1), vec![2.0]);
    }

    #[test]
    fn argmin_tie_breaks_on_key() {
        let pts: [f64; 4] = [-2.0, -1.0, 1.0, 2.0];
        let v = [0.0, 1.0, 1.0, 0.0];
        assert_eq!(argmin_by_key(&v, |i| pts[i].abs()), 0);
        let v = [1.0, 0.0, 0.0, 1.0];
        assert_eq!(argmin_by_key(&v, |i| pts[i].abs()), 1);
    }

    #[test]
    fn bisect_root() {
        let r = bisect(|x| x * x * x - 2.0, 0.0, 2.0);
        assert!((r - 2f64.cbrt()).abs() < 1e-15);
    }
}
