//! Thin wrappers around rustfft used by the spectral ring machinery and the
//! fringe analysis.

use num_complex::Complex64;
use rustfft::FftPlanner;

/// In-place forward DFT, unnormalized (rustfft convention).
pub(crate) fn forward(data: &mut [Complex64]) {
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(data.len()).process(data);
}

/// In-place inverse DFT, normalized by 1/N so `inverse(forward(x)) == x`.
pub(crate) fn inverse(data: &mut [Complex64]) {
    let n = data.len();
    let mut planner = FftPlanner::new();
    planner.plan_fft_inverse(n).process(data);
    let scale = 1.0 / n as f64;
    for v in data.iter_mut() {
        *v *= scale;
    }
}

/// Derivative of a smooth periodic function sampled uniformly over one period.
///
/// The Nyquist bin of an even-length grid is zeroed, the standard choice for
/// real signals.
pub(crate) fn periodic_derivative(values: &[f64], period: f64) -> Vec<f64> {
    let n = values.len();
    let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    forward(&mut buf);
    let factor = 2.0 * std::f64::consts::PI / period;
    for (k, v) in buf.iter_mut().enumerate() {
        let bin = if k < n / 2 {
            k as i64
        } else if k == n / 2 {
            0 // Nyquist
        } else {
            k as i64 - n as i64
        };
        *v *= Complex64::new(0.0, bin as f64 * factor);
    }
    inverse(&mut buf);
    buf.into_iter().map(|v| v.re).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivative_of_sin_is_cos() {
        let n = 64;
        let xs: Vec<f64> = (0..n)
            .map(|k| 2.0 * std::f64::consts::PI * k as f64 / n as f64)
            .collect();
        let f: Vec<f64> = xs.iter().map(|x| x.sin()).collect();
        let df = periodic_derivative(&f, 2.0 * std::f64::consts::PI);
        for (x, d) in xs.iter().zip(&df) {
            assert!((d - x.cos()).abs() < 1e-12, "at x={x}: {d} vs {}", x.cos());
        }
    }

    #[test]
    fn round_trip_is_identity() {
        let mut data: Vec<Complex64> = (0..32)
            .map(|k| Complex64::new((k as f64).sin(), (k as f64 * 0.7).cos()))
            .collect();
        let original = data.clone();
        forward(&mut data);
        inverse(&mut data);
        for (a, b) in data.iter().zip(&original) {
            assert!((a - b).norm() < 1e-12);
        }
    }
}
