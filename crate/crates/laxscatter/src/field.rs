//! Uniform spatial grids, sampled complex fields and their discrete Fourier data.
//!
//! The grid covers `[-L, L)` with `n` equispaced nodes, `x_j = -L + j*dx`.
//! The dual grid carries frequencies `xi_m = 2*pi*m/(n*dx)` (fft order) with
//! spacing `dxi = pi/L`. Spectra are stored in the discrete unitary
//! normalization: `sum_m |c_m|^2 = int |f|^2 dx`, so a pure grid mode
//! `e^{i xi_m x}` transforms to a single coefficient of modulus `sqrt(2L)`.
//! The continuum unitary transform (kernel `e^{-i xi x}`) is recovered as
//! `q_hat(xi_m) = c_m / sqrt(dxi)`.

use crate::error::{Error, Result};
use num_complex::Complex64;
use rustfft::FftPlanner;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

pub type C64 = Complex64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub half_width: f64,
    pub n_points: usize,
}

impl GridSpec {
    pub fn dx(&self) -> f64 {
        2.0 * self.half_width / self.n_points as f64
    }

    pub fn dxi(&self) -> f64 {
        PI / self.half_width
    }

    pub fn x(&self, j: usize) -> f64 {
        -self.half_width + j as f64 * self.dx()
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.n_points).map(|j| self.x(j)).collect()
    }

    /// Frequencies in fft order: 0, dxi, ..., -dxi.
    pub fn xi(&self, m: usize) -> f64 {
        let n = self.n_points as i64;
        let m = m as i64;
        let signed = if m <= n / 2 - 1 { m } else { m - n };
        signed as f64 * self.dxi()
    }

    pub fn xis(&self) -> Vec<f64> {
        (0..self.n_points).map(|m| self.xi(m)).collect()
    }

    /// Index of the grid node nearest to `x`.
    pub fn index_of(&self, x: f64) -> usize {
        let j = ((x + self.half_width) / self.dx()).round() as i64;
        j.clamp(0, self.n_points as i64 - 1) as usize
    }
}

pub fn make_grid(half_width: f64, n: usize) -> Result<GridSpec> {
    if !(half_width > 0.0) {
        return Err(Error::BadGridHalfWidth(half_width));
    }
    if n < 16 || !n.is_power_of_two() {
        return Err(Error::BadGridSize(n));
    }
    Ok(GridSpec {
        half_width,
        n_points: n,
    })
}

#[derive(Debug, Clone)]
pub struct SampledField {
    pub grid: GridSpec,
    pub values: Vec<C64>,
    pub label: String,
}

#[derive(Debug, Clone)]
pub struct SpectrumField {
    pub grid: GridSpec,
    pub coefficients: Vec<C64>,
}

impl SampledField {
    pub fn new(grid: GridSpec, values: Vec<C64>, label: impl Into<String>) -> Result<Self> {
        if values.len() != grid.n_points {
            return Err(Error::GridMismatch("value count differs from grid size"));
        }
        let f = Self {
            grid,
            values,
            label: label.into(),
        };
        f.check_finite()?;
        Ok(f)
    }

    pub fn zero(grid: GridSpec, label: impl Into<String>) -> Self {
        Self {
            grid,
            values: vec![C64::new(0.0, 0.0); grid.n_points],
            label: label.into(),
        }
    }

    pub fn check_finite(&self) -> Result<()> {
        if self.values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::NonFiniteField("sampled values"));
        }
        Ok(())
    }

    /// `int |f|^2 dx` by the trapezoidal rule on the periodic grid.
    pub fn l2_norm_sq(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.grid.dx()
    }

    pub fn l2_norm(&self) -> f64 {
        self.l2_norm_sq().sqrt()
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn conj(&self) -> SampledField {
        SampledField {
            grid: self.grid,
            values: self.values.iter().map(|v| v.conj()).collect(),
            label: format!("conj({})", self.label),
        }
    }

    /// Index range `[lo, hi]` of nonzero samples, if any.
    pub fn support_bounds(&self) -> Option<(usize, usize)> {
        let lo = self.values.iter().position(|v| v.norm_sqr() > 0.0)?;
        let hi = self.values.iter().rposition(|v| v.norm_sqr() > 0.0)?;
        Some((lo, hi))
    }

    pub fn to_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::from("x,re,im\n");
        for (j, v) in self.values.iter().enumerate() {
            writeln!(out, "{:.16e},{:.16e},{:.16e}", self.grid.x(j), v.re, v.im).unwrap();
        }
        std::fs::write(path, out)?;
        Ok(())
    }

    pub fn from_csv(grid: GridSpec, path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut values = Vec::with_capacity(grid.n_points);
        for line in text.lines().skip(1) {
            let mut parts = line.split(',');
            let _x = parts.next();
            let re: f64 = parts
                .next()
                .and_then(|s| s.trim().parse().ok())
                .ok_or(Error::NonFiniteField("csv parse"))?;
            let im: f64 = parts
                .next()
                .and_then(|s| s.trim().parse().ok())
                .ok_or(Error::NonFiniteField("csv parse"))?;
            values.push(C64::new(re, im));
        }
        SampledField::new(grid, values, path.display().to_string())
    }
}

impl SpectrumField {
    /// Continuum-unitary transform samples `q_hat(xi_m) = c_m / sqrt(dxi)`.
    pub fn unitary_hat(&self) -> Vec<C64> {
        let s = 1.0 / self.grid.dxi().sqrt();
        self.coefficients.iter().map(|c| c * s).collect()
    }

    pub fn l2_norm_sq(&self) -> f64 {
        self.coefficients.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn to_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::from("xi,re,im\n");
        for (m, c) in self.coefficients.iter().enumerate() {
            writeln!(out, "{:.16e},{:.16e},{:.16e}", self.grid.xi(m), c.re, c.im).unwrap();
        }
        std::fs::write(path, out)?;
        Ok(())
    }
}

fn fft_into(values: &mut [C64], inverse: bool) {
    let mut planner = FftPlanner::new();
    let fft: Arc<dyn rustfft::Fft<f64>> = if inverse {
        planner.plan_fft_inverse(values.len())
    } else {
        planner.plan_fft_forward(values.len())
    };
    fft.process(values);
}

/// Raw forward DFT, `F[m] = sum_j f[j] e^{-2 pi i j m / n}`.
pub fn dft(values: &[C64]) -> Vec<C64> {
    let mut v = values.to_vec();
    fft_into(&mut v, false);
    v
}

/// Raw inverse DFT including the 1/n factor.
pub fn idft(values: &[C64]) -> Vec<C64> {
    let mut v = values.to_vec();
    fft_into(&mut v, true);
    let n = v.len() as f64;
    for c in &mut v {
        *c /= n;
    }
    v
}

pub fn transform(f: &SampledField) -> SpectrumField {
    let grid = f.grid;
    let n = grid.n_points;
    let scale = (grid.dx() / n as f64).sqrt();
    let mut coeff = dft(&f.values);
    for (m, c) in coeff.iter_mut().enumerate() {
        // phase factor shifts the DFT origin from index 0 to x = -L
        let phase = C64::from_polar(1.0, grid.xi(m) * grid.half_width);
        *c *= scale * phase;
    }
    SpectrumField {
        grid,
        coefficients: coeff,
    }
}

pub fn inverse_transform(spectrum: &SpectrumField) -> Result<SampledField> {
    let grid = spectrum.grid;
    let n = grid.n_points;
    let scale = (n as f64 / grid.dx()).sqrt() / n as f64;
    let mut v: Vec<C64> = spectrum
        .coefficients
        .iter()
        .enumerate()
        .map(|(m, c)| c * C64::from_polar(1.0, -grid.xi(m) * grid.half_width))
        .collect();
    fft_into(&mut v, true);
    for c in &mut v {
        *c *= scale;
    }
    SampledField::new(grid, v, "inverse transform")
}

/// `|  ||f||^2 - ||f_hat||^2 |` relative to `||f||^2`; Parseval residual.
pub fn parseval_residual(f: &SampledField) -> f64 {
    let a = f.l2_norm_sq();
    if a == 0.0 {
        return 0.0;
    }
    let b = transform(f).l2_norm_sq();
    (a - b).abs() / a
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PotentialKind {
    Gaussian,
    Sech,
    Bump,
}

/// Pointwise evaluation used by the samplers; exact compact support for `Bump`.
pub fn potential_value(kind: PotentialKind, amplitude: C64, width: f64, center: f64, x: f64) -> C64 {
    let t = (x - center) / width;
    match kind {
        PotentialKind::Gaussian => amplitude * (-t * t).exp(),
        PotentialKind::Sech => amplitude * (1.0 / t.cosh()),
        PotentialKind::Bump => {
            if t.abs() < 1.0 {
                // scaled so the peak value is exactly `amplitude`
                amplitude * (1.0 - 1.0 / (1.0 - t * t)).exp()
            } else {
                C64::new(0.0, 0.0)
            }
        }
    }
}

pub fn standard_potential(
    kind: PotentialKind,
    amplitude: C64,
    width: f64,
    center: f64,
    grid: GridSpec,
) -> Result<SampledField> {
    if !(width > 0.0) {
        return Err(Error::BadPotentialWidth(width));
    }
    let values = (0..grid.n_points)
        .map(|j| potential_value(kind, amplitude, width, center, grid.x(j)))
        .collect();
    let label = format!("{kind:?}(a={amplitude}, w={width}, c={center})");
    SampledField::new(grid, values, label)
}

/// C-infinity transition equal to 0 for t <= 0 and 1 for t >= 1.
fn smoothstep(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        let f = (-1.0 / t).exp();
        let g = (-1.0 / (1.0 - t)).exp();
        f / (f + g)
    }
}

/// Smooth window equal to 1 on `[-inner, inner]`, exactly 0 outside `[-outer, outer]`.
pub fn plateau_window(grid: GridSpec, inner: f64, outer: f64) -> SampledField {
    let values = (0..grid.n_points)
        .map(|j| {
            let x = grid.x(j).abs();
            C64::new(smoothstep((outer - x) / (outer - inner)), 0.0)
        })
        .collect();
    SampledField::new(grid, values, "plateau window").unwrap()
}

/// Band-limited refinement by an integer factor (zero-padded FFT).
/// Exact on trigonometric polynomials resolved by the coarse grid.
pub fn refine(f: &SampledField, factor: usize) -> SampledField {
    assert!(factor.is_power_of_two());
    if factor == 1 {
        return f.clone();
    }
    let n = f.grid.n_points;
    let m = n * factor;
    let hat = dft(&f.values);
    let mut padded = vec![C64::new(0.0, 0.0); m];
    for i in 0..n / 2 {
        padded[i] = hat[i];
    }
    for i in 1..n / 2 {
        padded[m - i] = hat[n - i];
    }
    // split the Nyquist coefficient symmetrically
    padded[n / 2] = 0.5 * hat[n / 2];
    padded[m - n / 2] += 0.5 * hat[n / 2];
    let mut v = idft(&padded);
    for c in &mut v {
        *c *= factor as f64;
    }
    SampledField {
        grid: GridSpec {
            half_width: f.grid.half_width,
            n_points: m,
        },
        values: v,
        label: f.label.clone(),
    }
}

/// Pointwise product field (used for mollification before scattering probes).
pub fn pointwise_mul(f: &SampledField, g: &SampledField) -> Result<SampledField> {
    if f.grid != g.grid {
        return Err(Error::GridMismatch("pointwise product"));
    }
    let values = f
        .values
        .iter()
        .zip(&g.values)
        .map(|(a, b)| a * b)
        .collect();
    SampledField::new(f.grid, values, format!("{}*{}", f.label, g.label))
}
