//! Grids, complex fields and intensity images.
//!
//! Storage is row-major with the row index running along +y (row 0 is the
//! most negative y) and the column index along +x. Sample (i, j) sits at
//! `((i - n/2 + 0.5) * pitch, (j - n/2 + 0.5) * pitch)`, so no sample lands
//! on the optical axis.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::par;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    n: usize,
    extent_mm: f64,
}

impl GridSpec {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn extent_mm(&self) -> f64 {
        self.extent_mm
    }

    pub fn pitch_mm(&self) -> f64 {
        self.extent_mm / self.n as f64
    }

    /// Physical coordinate of column or row index `k`, in mm.
    pub fn coord(&self, k: usize) -> f64 {
        (k as f64 - self.n as f64 / 2.0 + 0.5) * self.pitch_mm()
    }

    /// Fractional index of coordinate `x_mm` (inverse of `coord`).
    pub fn index_of(&self, x_mm: f64) -> f64 {
        x_mm / self.pitch_mm() + self.n as f64 / 2.0 - 0.5
    }

    /// Same sample count, different physical extent.
    pub fn with_extent(&self, extent_mm: f64) -> Result<GridSpec> {
        make_grid(self.n, extent_mm)
    }

    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

pub fn make_grid(n: usize, extent_mm: f64) -> Result<GridSpec> {
    if n < 16 || n % 2 != 0 {
        return Err(Error::invalid(format!("grid size must be even and at least 16, got {n}")));
    }
    if !(extent_mm > 0.0 && extent_mm.is_finite()) {
        return Err(Error::invalid(format!("grid extent must be positive, got {extent_mm}")));
    }
    Ok(GridSpec { n, extent_mm })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    grid: GridSpec,
    wavelength_nm: f64,
    amp: Vec<Complex64>,
}

impl ComplexField {
    pub fn new(grid: GridSpec, wavelength_nm: f64, amp: Vec<Complex64>) -> Result<Self> {
        if !(wavelength_nm > 0.0 && wavelength_nm.is_finite()) {
            return Err(Error::invalid(format!("wavelength must be positive, got {wavelength_nm}")));
        }
        if amp.len() != grid.len() {
            return Err(Error::invalid(format!(
                "expected {} samples, got {}",
                grid.len(),
                amp.len()
            )));
        }
        if let Some(k) = amp.iter().position(|a| !(a.re.is_finite() && a.im.is_finite())) {
            return Err(Error::invalid(format!("non-finite amplitude at sample {k}")));
        }
        Ok(ComplexField { grid, wavelength_nm, amp })
    }

    pub fn zeros(grid: GridSpec, wavelength_nm: f64) -> Result<Self> {
        Self::new(grid, wavelength_nm, vec![Complex64::new(0.0, 0.0); grid.len()])
    }

    /// Samples `f(x_mm, y_mm)` on every grid point.
    pub fn from_fn<F>(grid: GridSpec, wavelength_nm: f64, f: F) -> Result<Self>
    where
        F: Fn(f64, f64) -> Complex64 + Send + Sync,
    {
        let n = grid.n;
        let mut amp = vec![Complex64::new(0.0, 0.0); grid.len()];
        par::for_each_row(&mut amp, n, |j, row| {
            let y = grid.coord(j);
            for (i, a) in row.iter_mut().enumerate() {
                *a = f(grid.coord(i), y);
            }
        });
        Self::new(grid, wavelength_nm, amp)
    }

    /// Pointwise map `f(x_mm, y_mm, a)`; results must stay finite.
    pub(crate) fn map_xy<F>(&self, f: F) -> ComplexField
    where
        F: Fn(f64, f64, Complex64) -> Complex64 + Send + Sync,
    {
        let grid = self.grid;
        let n = grid.n;
        let mut amp = self.amp.clone();
        par::for_each_row(&mut amp, n, |j, row| {
            let y = grid.coord(j);
            for (i, a) in row.iter_mut().enumerate() {
                *a = f(grid.coord(i), y, *a);
            }
        });
        ComplexField { grid, wavelength_nm: self.wavelength_nm, amp }
    }

    pub(crate) fn with_amp(&self, amp: Vec<Complex64>) -> ComplexField {
        debug_assert_eq!(amp.len(), self.amp.len());
        ComplexField { grid: self.grid, wavelength_nm: self.wavelength_nm, amp }
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn wavelength_nm(&self) -> f64 {
        self.wavelength_nm
    }

    pub fn wavelength_mm(&self) -> f64 {
        self.wavelength_nm * 1e-6
    }

    pub fn amp(&self) -> &[Complex64] {
        &self.amp
    }

    /// Amplitude at column `i`, row `j`.
    pub fn at(&self, i: usize, j: usize) -> Complex64 {
        self.amp[j * self.grid.n + i]
    }

    /// Same samples on a grid with a new extent; the amplitude is rescaled so power is kept.
    pub fn rescaled(&self, extent_mm: f64) -> Result<ComplexField> {
        let grid = self.grid.with_extent(extent_mm)?;
        let s = self.grid.extent_mm / extent_mm;
        Ok(ComplexField {
            grid,
            wavelength_nm: self.wavelength_nm,
            amp: self.amp.iter().map(|a| a * s).collect(),
        })
    }

    pub fn with_wavelength(&self, wavelength_nm: f64) -> Result<ComplexField> {
        ComplexField::new(self.grid, wavelength_nm, self.amp.clone())
    }

    pub fn scale(&self, k: Complex64) -> ComplexField {
        self.with_amp(self.amp.iter().map(|a| a * k).collect())
    }

    /// Centred in a zero border on an `n`-sample grid of the same pitch.
    pub fn padded(&self, n: usize) -> Result<ComplexField> {
        let m = self.grid.n;
        if n < m {
            return Err(Error::invalid(format!("cannot pad {m} samples down to {n}")));
        }
        let grid = make_grid(n, self.grid.pitch_mm() * n as f64)?;
        let o = (n - m) / 2;
        let mut amp = vec![Complex64::new(0.0, 0.0); n * n];
        for j in 0..m {
            amp[(j + o) * n + o..(j + o) * n + o + m].copy_from_slice(&self.amp[j * m..(j + 1) * m]);
        }
        ComplexField::new(grid, self.wavelength_nm, amp)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntensityImage {
    grid: GridSpec,
    vals: Vec<f64>,
}

impl IntensityImage {
    pub fn new(grid: GridSpec, vals: Vec<f64>) -> Result<Self> {
        if vals.len() != grid.len() {
            return Err(Error::invalid(format!("expected {} pixels, got {}", grid.len(), vals.len())));
        }
        if let Some(k) = vals.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::invalid(format!("pixel {k} is negative or non-finite")));
        }
        Ok(IntensityImage { grid, vals })
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn vals(&self) -> &[f64] {
        &self.vals
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.vals[j * self.grid.n + i]
    }

    /// Central `n`-sample window at the same pitch.
    pub fn cropped(&self, n: usize) -> Result<IntensityImage> {
        let m = self.grid.n;
        if n > m {
            return Err(Error::invalid(format!("cannot crop {m} samples up to {n}")));
        }
        let grid = make_grid(n, self.grid.pitch_mm() * n as f64)?;
        let o = (m - n) / 2;
        let vals = (0..n).flat_map(|j| self.vals[(j + o) * m + o..(j + o) * m + o + n].iter().copied()).collect();
        IntensityImage::new(grid, vals)
    }

    pub fn max(&self) -> f64 {
        self.vals.iter().cloned().fold(0.0, f64::max)
    }

    pub fn total(&self) -> f64 {
        par::row_sum(&self.vals, self.grid.n, |_, r| r.iter().sum())
    }
}

/// Σ|a|²·pitch².
pub fn power(f: &ComplexField) -> f64 {
    let p = f.grid.pitch_mm();
    par::row_sum(&f.amp, f.grid.n, |_, r| r.iter().map(|a| a.norm_sqr()).sum()) * p * p
}

pub fn normalize_power(f: &ComplexField, target: f64) -> Result<ComplexField> {
    if !(target >= 0.0 && target.is_finite()) {
        return Err(Error::invalid(format!("target power must be non-negative, got {target}")));
    }
    let p = power(f);
    if p == 0.0 {
        if target == 0.0 {
            return Ok(f.clone());
        }
        return Err(Error::DegenerateField("cannot normalize a zero field".into()));
    }
    let s = (target / p).sqrt();
    Ok(f.with_amp(f.amp.iter().map(|a| a * s).collect()))
}

/// Σ conj(f)·g·pitch².
pub fn overlap(f: &ComplexField, g: &ComplexField) -> Result<Complex64> {
    if f.grid != g.grid {
        return Err(Error::GridMismatch(format!("{:?} vs {:?}", f.grid, g.grid)));
    }
    if f.wavelength_nm != g.wavelength_nm {
        return Err(Error::GridMismatch(format!(
            "wavelengths {} nm vs {} nm",
            f.wavelength_nm, g.wavelength_nm
        )));
    }
    let n = f.grid.n;
    let rows = par::map_indices(n, |j| {
        let a = &f.amp[j * n..(j + 1) * n];
        let b = &g.amp[j * n..(j + 1) * n];
        a.iter().zip(b).map(|(x, y)| x.conj() * y).sum::<Complex64>()
    });
    let p = f.grid.pitch_mm();
    Ok(rows.iter().sum::<Complex64>() * p * p)
}

pub fn to_intensity(f: &ComplexField) -> IntensityImage {
    IntensityImage { grid: f.grid, vals: f.amp.iter().map(|a| a.norm_sqr()).collect() }
}

/// Intensity-weighted first and central second moments: (cx, cy, σx², σy², σxy), mm.
pub fn moments(grid: GridSpec, vals: &[f64]) -> Option<[f64; 5]> {
    let n = grid.n;
    let rows = par::map_indices(n, |j| {
        let y = grid.coord(j);
        let (mut s, mut sx, mut sy) = (0.0, 0.0, 0.0);
        for (i, v) in vals[j * n..(j + 1) * n].iter().enumerate() {
            s += v;
            sx += v * grid.coord(i);
            sy += v * y;
        }
        (s, sx, sy)
    });
    let tot: f64 = rows.iter().map(|r| r.0).sum();
    if tot <= 0.0 {
        return None;
    }
    let cx = rows.iter().map(|r| r.1).sum::<f64>() / tot;
    let cy = rows.iter().map(|r| r.2).sum::<f64>() / tot;
    let rows = par::map_indices(n, |j| {
        let y = grid.coord(j) - cy;
        let (mut xx, mut yy, mut xy) = (0.0, 0.0, 0.0);
        for (i, v) in vals[j * n..(j + 1) * n].iter().enumerate() {
            let x = grid.coord(i) - cx;
            xx += v * x * x;
            yy += v * y * y;
            xy += v * x * y;
        }
        (xx, yy, xy)
    });
    let xx = rows.iter().map(|r| r.0).sum::<f64>() / tot;
    let yy = rows.iter().map(|r| r.1).sum::<f64>() / tot;
    let xy = rows.iter().map(|r| r.2).sum::<f64>() / tot;
    Some([cx, cy, xx, yy, xy])
}

/// Second-moment (1/e² intensity) radius `w = sqrt(2(σx²+σy²))` of a field, mm.
pub fn second_moment_radius(f: &ComplexField) -> f64 {
    let img = to_intensity(f);
    match moments(img.grid, &img.vals) {
        Some(m) => (2.0 * (m[2] + m[3])).sqrt(),
        None => 0.0,
    }
}

/// Bilinear sample at fractional indices; zero outside the grid.
pub(crate) fn bilinear<T>(data: &[T], n: usize, fi: f64, fj: f64) -> T
where
    T: Copy + Default + std::ops::Mul<f64, Output = T> + std::ops::Add<Output = T>,
{
    let i0 = fi.floor();
    let j0 = fj.floor();
    let (tx, ty) = (fi - i0, fj - j0);
    let (i0, j0) = (i0 as i64, j0 as i64);
    let get = |i: i64, j: i64| -> T {
        if i < 0 || j < 0 || i >= n as i64 || j >= n as i64 {
            T::default()
        } else {
            data[j as usize * n + i as usize]
        }
    };
    get(i0, j0) * ((1.0 - tx) * (1.0 - ty))
        + get(i0 + 1, j0) * (tx * (1.0 - ty))
        + get(i0, j0 + 1) * ((1.0 - tx) * ty)
        + get(i0 + 1, j0 + 1) * (tx * ty)
}
