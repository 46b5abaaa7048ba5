//! Composite quadrature on uniformly spaced samples.

use num_complex::Complex64;

/// Composite Simpson weights for `n` uniformly spaced samples with spacing `h`.
///
/// An odd number of intervals is handled by closing the last three intervals
/// with the Simpson 3/8 rule, so the order stays four for every `n >= 4`.
pub fn simpson_weights(n: usize, h: f64) -> Vec<f64> {
    assert!(n >= 2, "need at least two samples");
    let mut w = vec![0.0; n];
    let intervals = n - 1;
    if intervals == 1 {
        w[0] = 0.5 * h;
        w[1] = 0.5 * h;
        return w;
    }
    if intervals == 2 {
        w[0] = h / 3.0;
        w[1] = 4.0 * h / 3.0;
        w[2] = h / 3.0;
        return w;
    }
    let (simpson_end, tail) = if intervals % 2 == 0 {
        (intervals, false)
    } else {
        (intervals - 3, true)
    };
    for i in (0..simpson_end).step_by(2) {
        w[i] += h / 3.0;
        w[i + 1] += 4.0 * h / 3.0;
        w[i + 2] += h / 3.0;
    }
    if tail {
        let s = simpson_end;
        let c = 3.0 * h / 8.0;
        w[s] += c;
        w[s + 1] += 3.0 * c;
        w[s + 2] += 3.0 * c;
        w[s + 3] += c;
    }
    w
}

pub fn integrate(values: &[Complex64], h: f64) -> Complex64 {
    let w = simpson_weights(values.len(), h);
    values.iter().zip(&w).map(|(v, w)| v * w).sum()
}

pub fn integrate_with(weights: &[f64], values: &[Complex64]) -> Complex64 {
    debug_assert_eq!(weights.len(), values.len());
    values.iter().zip(weights).map(|(v, w)| v * w).sum()
}

/// `∫ conj(a) b` with precomputed weights.
pub fn inner(weights: &[f64], a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter()
        .zip(b)
        .zip(weights)
        .map(|((a, b), w)| a.conj() * b * w)
        .sum()
}

pub fn l2_norm(weights: &[f64], a: &[Complex64]) -> f64 {
    a.iter()
        .zip(weights)
        .map(|(a, w)| a.norm_sqr() * w)
        .sum::<f64>()
        .max(0.0)
        .sqrt()
}

pub fn l2_distance(weights: &[f64], a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter()
        .zip(b)
        .zip(weights)
        .map(|((a, b), w)| (a - b).norm_sqr() * w)
        .sum::<f64>()
        .max(0.0)
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simpson_is_exact_for_cubics() {
        for n in [3usize, 4, 5, 8, 11] {
            let h = 2.0 / (n - 1) as f64;
            let vals: Vec<Complex64> = (0..n)
                .map(|i| {
                    let x = i as f64 * h;
                    Complex64::new(x * x * x - x, 2.0 * x * x)
                })
                .collect();
            let got = integrate(&vals, h);
            assert!((got - Complex64::new(2.0, 16.0 / 3.0)).norm() < 1e-12, "n = {n}: {got}");
        }
    }

    #[test]
    fn fourth_order_on_smooth_integrand() {
        let err = |n: usize| {
            let h = std::f64::consts::PI / (n - 1) as f64;
            let vals: Vec<Complex64> = (0..n)
                .map(|i| Complex64::new((i as f64 * h).exp(), 0.0))
                .collect();
            (integrate(&vals, h).re - (std::f64::consts::PI.exp() - 1.0)).abs()
        };
        let ratio = err(33) / err(65);
        assert!(ratio > 14.0 && ratio < 18.0, "ratio {ratio}");
    }
}
