//! Separable 2-D FFT over square row-major arrays.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::par;

fn transpose(src: &[Complex64], n: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); n * n];
    par::for_each_row(&mut out, n, |j, row| {
        for (i, v) in row.iter_mut().enumerate() {
            *v = src[i * n + j];
        }
    });
    out
}

fn rows(data: &mut [Complex64], n: usize, plan: &Arc<dyn Fft<f64>>) {
    par::for_each_row(data, n, |_, row| {
        let mut scratch = vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
        plan.process_with_scratch(row, &mut scratch);
    });
}

fn fft2(data: &[Complex64], n: usize, inverse: bool) -> Vec<Complex64> {
    let mut planner = FftPlanner::new();
    let plan = if inverse { planner.plan_fft_inverse(n) } else { planner.plan_fft_forward(n) };
    let mut a = data.to_vec();
    rows(&mut a, n, &plan);
    let mut t = transpose(&a, n);
    rows(&mut t, n, &plan);
    let mut out = transpose(&t, n);
    if inverse {
        let s = 1.0 / (n * n) as f64;
        out.iter_mut().for_each(|v| *v *= s);
    }
    out
}

/// Unnormalized forward transform.
pub fn forward(data: &[Complex64], n: usize) -> Vec<Complex64> {
    fft2(data, n, false)
}

/// Inverse transform scaled by 1/n², so `inverse(forward(a)) == a`.
pub fn inverse(data: &[Complex64], n: usize) -> Vec<Complex64> {
    fft2(data, n, true)
}

/// Spatial frequency of FFT bin `k` on a grid of extent `extent` (cycles per unit).
pub fn freq(k: usize, n: usize, extent: f64) -> f64 {
    let k = if k < n / 2 { k as f64 } else { k as f64 - n as f64 };
    k / extent
}

/// Unnormalized 1-D forward DFT of each row of `data` (row length `width`).
pub fn rows_forward(data: &mut [Complex64], width: usize) {
    let plan = FftPlanner::new().plan_fft_forward(width);
    rows(data, width, &plan);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let n = 16;
        let a: Vec<Complex64> = (0..n * n).map(|k| Complex64::new((k as f64).sin(), (k as f64 * 0.3).cos())).collect();
        let b = inverse(&forward(&a, n), n);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).norm() < 1e-12);
        }
    }

    #[test]
    fn single_mode_lands_in_one_bin() {
        let n = 16;
        let a: Vec<Complex64> = (0..n * n)
            .map(|k| {
                let (i, j) = (k % n, k / n);
                Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * (3.0 * i as f64 - 2.0 * j as f64) / n as f64)
            })
            .collect();
        let s = forward(&a, n);
        let peak = (n - 2) * n + 3;
        assert!((s[peak].norm() - (n * n) as f64).abs() < 1e-9);
        assert!(s.iter().enumerate().filter(|(k, _)| *k != peak).all(|(_, v)| v.norm() < 1e-9));
        assert_eq!(freq(3, 16, 2.0), 1.5);
        assert_eq!(freq(14, 16, 2.0), -1.0);
    }
}
