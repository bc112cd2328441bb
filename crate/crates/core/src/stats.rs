//! Small descriptive statistics shared across modules.

pub fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.iter().sum::<f64>() / v.len() as f64
}

/// Sample variance (divides by `n - 1`); zero for fewer than two values.
pub fn sample_variance(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = mean(v);
    v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64
}

pub fn sample_std(v: &[f64]) -> f64 {
    sample_variance(v).sqrt()
}

/// Pearson correlation; zero when either side has no variance.
pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let (ma, mb) = (mean(a), mean(b));
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa <= 0.0 || sbb <= 0.0 {
        return 0.0;
    }
    (sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0)
}

/// `1 - SSE / SST`, with SST measured about `baseline`.
pub fn r_squared(pred: &[f64], actual: &[f64], baseline: f64) -> f64 {
    let sse: f64 = pred.iter().zip(actual).map(|(p, a)| (a - p).powi(2)).sum();
    let sst: f64 = actual.iter().map(|a| (a - baseline).powi(2)).sum();
    if sst <= 0.0 {
        return if sse <= 0.0 { 1.0 } else { f64::NEG_INFINITY };
    }
    1.0 - sse / sst
}
