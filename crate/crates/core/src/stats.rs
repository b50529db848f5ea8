//! Small statistics helpers shared by the fitting, band and flexion code.

/// Lower and upper order statistics bracketing the central `level` mass of
/// `sorted` (ascending). Endpoints are always members of the sample set:
/// the lower index is `floor(q_lo (n-1))`, the upper `ceil(q_hi (n-1))`.
pub fn central_interval(sorted: &[f64], level: f64) -> (f64, f64) {
    assert!(!sorted.is_empty(), "interval of an empty sample");
    let n = sorted.len();
    let tail = 0.5 * (1.0 - level);
    let lo = ((tail * (n - 1) as f64) + 1e-9).floor() as usize;
    let hi = (((1.0 - tail) * (n - 1) as f64) - 1e-9).ceil() as usize;
    (sorted[lo.min(n - 1)], sorted[hi.min(n - 1)])
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Median of an ascending slice.
pub fn median_sorted(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Pearson correlation; `None` when either series has zero variance.
pub fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    assert_eq!(a.len(), b.len());
    let ma = mean(a);
    let mb = mean(b);
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for (x, y) in a.iter().zip(b) {
        let dx = x - ma;
        let dy = y - mb;
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa <= 0.0 || sbb <= 0.0 {
        return None;
    }
    Some((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

/// Sum that does not depend on the order of `xs`.
pub fn order_independent_sum(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    xs.iter().sum()
}
