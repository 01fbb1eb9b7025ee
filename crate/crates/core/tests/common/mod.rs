#![allow(dead_code)]

use metasub::rng::RngStream;
use rand_chacha::ChaCha20Rng;

pub fn rng(seed: u64) -> ChaCha20Rng {
    RngStream::new(seed).child(&[99]).rng()
}

/// Composite Simpson rule on [a, b] with n (even) panels.
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}

/// Total-variation distance between the histogram of `xs` over equal bins of
/// [lo, hi] and an unnormalized density integrated bin by bin. Samples
/// outside the range fall in an overflow cell whose reference mass is
/// whatever the density leaves over after normalizing on `norm_range`.
pub fn tv_histogram<F: Fn(f64) -> f64>(
    xs: &[f64],
    lo: f64,
    hi: f64,
    bins: usize,
    density: F,
    norm: f64,
) -> f64 {
    let w = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins + 1];
    for &x in xs {
        if x >= lo && x < hi {
            counts[((x - lo) / w) as usize] += 1;
        } else {
            counts[bins] += 1;
        }
    }
    let n = xs.len() as f64;
    let mut inside = 0.0;
    let mut tv = 0.0;
    for b in 0..bins {
        let q = simpson(&density, lo + b as f64 * w, lo + (b + 1) as f64 * w, 64) / norm;
        inside += q;
        tv += (counts[b] as f64 / n - q).abs();
    }
    tv += (counts[bins] as f64 / n - (1.0 - inside).max(0.0)).abs();
    0.5 * tv
}

/// Mean and batch-means standard error (robust to autocorrelation).
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    let m = xs.iter().sum::<f64>() / n as f64;
    let batches = 50.min(n);
    let size = n / batches;
    let bm: Vec<f64> = (0..batches)
        .map(|b| xs[b * size..(b + 1) * size].iter().sum::<f64>() / size as f64)
        .collect();
    let var = bm.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (batches - 1) as f64;
    (m, (var / batches as f64).sqrt())
}

pub fn within_3se(xs: &[f64], target: f64) -> bool {
    let (m, se) = mean_se(xs);
    (m - target).abs() <= 3.0 * se.max(1e-15)
}
