//! Small image filters shared by the analyzers.

use crate::par;

fn reflect(k: i64, n: i64) -> usize {
    // half-sample symmetric: d c b a | a b c d | d c b a
    let p = 2 * n;
    let k = k.rem_euclid(p);
    (if k < n { k } else { p - 1 - k }) as usize
}

fn box_rows(src: &[f64], n: usize, size: usize) -> Vec<f64> {
    let h = (size / 2) as i64;
    let mut out = vec![0.0; n * n];
    par::for_each_row(&mut out, n, |j, row| {
        let s = &src[j * n..(j + 1) * n];
        for (i, v) in row.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in (i as i64 - h)..(i as i64 - h + size as i64) {
                acc += s[reflect(k, n as i64)];
            }
            *v = acc / size as f64;
        }
    });
    out
}

fn transpose(src: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * n];
    par::for_each_row(&mut out, n, |j, row| {
        for (i, v) in row.iter_mut().enumerate() {
            *v = src[i * n + j];
        }
    });
    out
}

/// Separable `size`×`size` mean filter with mirrored edges.
pub fn box_filter(src: &[f64], n: usize, size: usize) -> Vec<f64> {
    let a = box_rows(src, n, size);
    let t = box_rows(&transpose(&a, n), n, size);
    transpose(&t, n)
}

pub fn median(vals: &[f64]) -> f64 {
    let mut v = vals.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Unwraps a phase sequence so successive steps stay within (-pi, pi].
pub fn unwrap(ph: &[f64]) -> Vec<f64> {
    use std::f64::consts::TAU;
    let mut out = Vec::with_capacity(ph.len());
    let mut off = 0.0;
    for (k, &p) in ph.iter().enumerate() {
        if k > 0 {
            let d = p - ph[k - 1];
            off -= TAU * ((d + std::f64::consts::PI) / TAU).floor();
        }
        out.push(p + off);
    }
    out
}

/// Slope of the weighted least-squares line through (x, y).
pub fn weighted_slope(x: &[f64], y: &[f64], w: &[f64]) -> f64 {
    let (mut sw, mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for ((&xi, &yi), &wi) in x.iter().zip(y).zip(w) {
        let w2 = wi * wi;
        sw += w2;
        sx += w2 * xi;
        sy += w2 * yi;
        sxx += w2 * xi * xi;
        sxy += w2 * xi * yi;
    }
    let det = sw * sxx - sx * sx;
    if det == 0.0 {
        0.0
    } else {
        (sw * sxy - sx * sy) / det
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn box_keeps_constants_and_mirrors() {
        let n = 16;
        let a = vec![2.0; n * n];
        assert!(box_filter(&a, n, 5).iter().all(|v| (v - 2.0).abs() < 1e-14));
        assert_eq!(reflect(-1, 4), 0);
        assert_eq!(reflect(-2, 4), 1);
        assert_eq!(reflect(4, 4), 3);
        assert_eq!(reflect(5, 4), 2);
    }

    #[test]
    fn unwrap_removes_jumps() {
        let u = unwrap(&[3.0, -3.0, -2.5]);
        assert!((u[1] - (std::f64::consts::TAU - 3.0)).abs() < 1e-12);
        assert!(u.windows(2).all(|w| (w[1] - w[0]).abs() < std::f64::consts::PI));
    }

    #[test]
    fn slope_of_line() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 - 0.5 * v).collect();
        assert!((weighted_slope(&x, &y, &[1.0, 2.0, 1.0, 3.0]) + 0.5).abs() < 1e-12);
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}
