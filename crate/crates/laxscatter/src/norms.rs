//! Standard Sobolev norms and modulation-space norms `M_{2,p}`, `M_{r,p}`
//! with the unit frequency-box decomposition.
//!
//! `M_{2,p}` uses sharp unit intervals on the frequency side; `M_{r,p}` for
//! `r != 2` uses a smooth raised-cosine partition of unity.

use crate::error::{Error, Result};
use crate::field::{dft, idft, transform, GridSpec, SampledField, C64};
use crate::volterra::cum_integral;

/// Smooth unit-sized Fourier partition of unity (raised-cosine profile):
/// `profile(t) = cos^2(pi t / 2)` on `|t| <= 1`, so neighbouring boxes sum
/// to one exactly.
#[derive(Debug, Clone)]
pub struct BoxDecomposition {
    pub grid: GridSpec,
    /// Integer band indices covering the frequency grid.
    pub bands: Vec<i64>,
}

impl BoxDecomposition {
    pub fn new(grid: GridSpec) -> Self {
        let xi_max = std::f64::consts::PI / grid.dx();
        let lo = (-xi_max).floor() as i64 - 1;
        let hi = xi_max.ceil() as i64 + 1;
        BoxDecomposition {
            grid,
            bands: (lo..=hi).collect(),
        }
    }

    pub fn profile(band: i64, xi: f64) -> f64 {
        let t = xi - band as f64;
        if t.abs() >= 1.0 {
            0.0
        } else {
            let c = (std::f64::consts::PI * t / 2.0).cos();
            c * c
        }
    }

    /// `max_xi | sum_n profile_n(xi) - 1 |` over the frequency grid.
    pub fn partition_residual(&self) -> f64 {
        (0..self.grid.n_points)
            .map(|m| {
                let xi = self.grid.xi(m);
                let s: f64 = self.bands.iter().map(|&n| Self::profile(n, xi)).sum();
                (s - 1.0).abs()
            })
            .fold(0.0, f64::max)
    }

    /// The band-restricted field `box_n q` via the Fourier multiplier.
    pub fn apply(&self, q: &SampledField, band: i64) -> Vec<C64> {
        let hat = dft(&q.values);
        let filtered: Vec<C64> = hat
            .iter()
            .enumerate()
            .map(|(m, c)| c * Self::profile(band, self.grid.xi(m)))
            .collect();
        idft(&filtered)
    }
}

/// Standard Sobolev norm with weight `(1 + xi^2)^{s/2}`.
pub fn sobolev_norm(q: &SampledField, s: f64) -> f64 {
    let grid = q.grid;
    let hat = transform(q).unitary_hat();
    let v: f64 = (0..grid.n_points)
        .map(|m| {
            let xi = grid.xi(m);
            hat[m].norm_sqr() * (1.0 + xi * xi).powf(s)
        })
        .sum::<f64>()
        * grid.dxi();
    v.sqrt()
}

/// Sharp-interval box energies: `int_n^{n+1} |q_hat(xi)|^2 d xi` for every
/// integer band, by trapezoid with linear interpolation at the box edges.
fn sharp_box_energies(q: &SampledField) -> Vec<(i64, f64)> {
    let grid = q.grid;
    let n = grid.n_points;
    let hat = transform(q).unitary_hat();
    // sorted frequency sweep (fftshift order)
    let mut pts: Vec<(f64, f64)> = (0..n)
        .map(|m| (grid.xi(m), hat[m].norm_sqr()))
        .collect();
    pts.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let mut acc: std::collections::BTreeMap<i64, f64> = std::collections::BTreeMap::new();
    for w in pts.windows(2) {
        let (x0, f0) = w[0];
        let (x1, f1) = w[1];
        // split the cell [x0, x1] at integer boundaries
        let mut a = x0;
        let lerp = |x: f64| f0 + (f1 - f0) * (x - x0) / (x1 - x0);
        while a < x1 {
            let next_int = a.floor() + 1.0;
            let b = next_int.min(x1);
            let band = a.floor() as i64;
            let seg = 0.5 * (lerp(a) + lerp(b)) * (b - a);
            *acc.entry(band).or_insert(0.0) += seg;
            a = b;
        }
    }
    acc.into_iter().collect()
}

/// Modulation norm. `r_index = 2` uses the displayed sharp-interval form
/// `( sum_n ( int_n^{n+1} |q_hat|^2 )^{p/2} )^{1/p}`; `r_index` in `{1, inf}`
/// uses the smooth box decomposition. `p = f64::INFINITY` takes the sup.
pub fn modulation_norm(q: &SampledField, r_index: f64, p: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::LaxInvariant("modulation exponent p must be >= 1".into()));
    }
    let lp = |terms: &[f64]| -> f64 {
        if p.is_infinite() {
            terms.iter().copied().fold(0.0, f64::max)
        } else {
            terms
                .iter()
                .map(|t| t.powf(p))
                .sum::<f64>()
                .powf(1.0 / p)
        }
    };
    if (r_index - 2.0).abs() < 1e-12 {
        let boxes = sharp_box_energies(q);
        let terms: Vec<f64> = boxes.iter().map(|(_, e)| e.max(0.0).sqrt()).collect();
        return Ok(lp(&terms));
    }
    let grid = q.grid;
    let dx = grid.dx();
    let boxes = BoxDecomposition::new(grid);
    let mut terms = Vec::with_capacity(boxes.bands.len());
    for &band in &boxes.bands {
        let piece = boxes.apply(q, band);
        let norm = if r_index.is_infinite() {
            piece.iter().map(|v| v.norm()).fold(0.0, f64::max)
        } else if (r_index - 1.0).abs() < 1e-12 {
            piece.iter().map(|v| v.norm()).sum::<f64>() * dx
        } else if (r_index - 2.0).abs() < 1e-12 {
            (piece.iter().map(|v| v.norm_sqr()).sum::<f64>() * dx).sqrt()
        } else {
            return Err(Error::UnsupportedModulationExponent(r_index));
        };
        terms.push(norm);
    }
    Ok(lp(&terms))
}

#[derive(Debug, Clone)]
pub struct IntegrationBoundReport {
    /// `|| int_{-inf}^x f ||_{M_{inf,1}}`.
    pub lhs: f64,
    /// `|| f ||_{M_{1,p}}`.
    pub rhs: f64,
    pub ratio: f64,
    /// Set when `int f != 0`, so the primitive does not decay.
    pub nonzero_mean: bool,
}

/// Checks `|| int_{-inf}^x f ||_{M_{inf,1}} <~ || f ||_{M_{1,p}}`.
pub fn integration_bound_check(f: &SampledField, p: f64) -> Result<IntegrationBoundReport> {
    let grid = f.grid;
    let primitive_vals = cum_integral(&f.values, grid.dx(), 6);
    let total: C64 = *primitive_vals.last().unwrap();
    let nonzero_mean =
        total.norm() > 1e-6 * f.values.iter().map(|v| v.norm()).sum::<f64>() * grid.dx();
    let primitive = SampledField::new(grid, primitive_vals, "primitive")?;
    let lhs = modulation_norm(&primitive, f64::INFINITY, 1.0)?;
    let rhs = modulation_norm(f, 1.0, p)?;
    Ok(IntegrationBoundReport {
        lhs,
        rhs,
        ratio: lhs / rhs.max(1e-300),
        nonzero_mean,
    })
}

/// Measured operator norm proxy `||R f||_{M_{2,1}} / ||f||_{M_{2,p}}` for
/// `R = (d - k(w^2 - 1))^{-1}`, swept over `k` and fitted as a power of `k`.
/// The test family saturates the bound: flat spectrum of width `~k` centered
/// on the resolvent's resonance frequency `xi* = -sqrt(3) k / 2`.
pub fn resolvent_modulation_sweep(
    grid: GridSpec,
    p: f64,
    ks: &[f64],
) -> Result<(f64, Vec<f64>)> {
    let w = crate::lax::omega();
    let mut ratios = Vec::with_capacity(ks.len());
    for &k in ks {
        let eta = k * (w.conj() - 1.0);
        let xi_star = -3.0f64.sqrt() / 2.0 * k;
        let coeffs: Vec<C64> = (0..grid.n_points)
            .map(|m| {
                let xi = grid.xi(m);
                if (xi - xi_star).abs() <= 0.5 * k {
                    C64::new(1.0, 0.0)
                } else {
                    C64::new(0.0, 0.0)
                }
            })
            .collect();
        let spectrum = crate::field::SpectrumField {
            grid,
            coefficients: coeffs,
        };
        let f = crate::field::inverse_transform(&spectrum)?;
        let hat = dft(&f.values);
        let filtered: Vec<C64> = hat
            .iter()
            .enumerate()
            .map(|(m, c)| c / (C64::new(0.0, grid.xi(m)) - eta))
            .collect();
        let rf = SampledField::new(grid, idft(&filtered), "Rf")?;
        let num = modulation_norm(&rf, 2.0, 1.0)?;
        let den = modulation_norm(&f, 2.0, p)?;
        ratios.push(num / den.max(1e-300));
    }
    // least-squares slope of log ratio vs log k
    let n = ks.len() as f64;
    let sx: f64 = ks.iter().map(|k| k.ln()).sum();
    let sy: f64 = ratios.iter().map(|r| r.ln()).sum();
    let sxx: f64 = ks.iter().map(|k| k.ln().powi(2)).sum();
    let sxy: f64 = ks.iter().zip(&ratios).map(|(k, r)| k.ln() * r.ln()).sum();
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    Ok((slope, ratios))
}
