//! Time integration of the quadratic dNLS equation
//! `i q_t + (1/sqrt 3) q_xx + 2 i conj(q) conj(q)_x = 0`
//! by an integrating-factor RK4 in Fourier space: the stiff linear phase is
//! applied exactly, the nonlinearity `N(q) = -2 conj(q) conj(q)_x` is
//! evaluated pseudospectrally with 2/3 dealiasing.

use crate::error::{Error, Result};
use crate::field::{dft, idft, GridSpec, SampledField, C64};

#[derive(Debug, Clone)]
pub struct EvolutionConfig {
    pub dt: f64,
    pub t_end: f64,
    /// 2/3-rule dealiasing of the quadratic nonlinearity.
    pub dealias: bool,
    /// Keep every `snapshot_stride`-th step (plus the initial state).
    pub snapshot_stride: usize,
    /// Drop the nonlinearity (free Schroedinger flow) for diagnostics.
    pub linear_only: bool,
}

impl EvolutionConfig {
    pub fn new(dt: f64, t_end: f64) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::BadTimeStep(dt));
        }
        Ok(EvolutionConfig {
            dt,
            t_end,
            dealias: true,
            snapshot_stride: 100,
            linear_only: false,
        })
    }

    /// Stiffness guard `dt <= dx^2 sqrt(3) / pi^2` (recorded, not enforced:
    /// the linear phase is integrated exactly).
    pub fn cfl_satisfied(&self, grid: GridSpec) -> bool {
        self.dt <= grid.dx() * grid.dx() * 3.0f64.sqrt() / (std::f64::consts::PI.powi(2))
    }
}

#[derive(Debug, Clone)]
pub struct TrajectoryRecord {
    pub snapshots: Vec<(f64, SampledField)>,
    pub mass_series: Vec<f64>,
    pub hamiltonian_series: Vec<f64>,
    pub cfl_satisfied: bool,
}

impl TrajectoryRecord {
    pub fn terminal(&self) -> &SampledField {
        &self.snapshots.last().unwrap().1
    }

    pub fn max_relative_drift(series: &[f64]) -> f64 {
        let base = series[0];
        let scale = base.abs().max(1e-300);
        series
            .iter()
            .map(|v| (v - base).abs() / scale)
            .fold(0.0, f64::max)
    }
}

/// `int |q|^2 dx`.
pub fn mass(q: &SampledField) -> f64 {
    q.l2_norm_sq()
}

/// `H = int (i/(2 sqrt 3))(q' r - q r') - (1/3)(r^3 + q^3) dx` with
/// `r = conj q`; the imaginary part vanishes structurally and is checked.
pub fn hamiltonian(q: &SampledField) -> f64 {
    let grid = q.grid;
    let qhat = dft(&q.values);
    let qx_hat: Vec<C64> = qhat
        .iter()
        .enumerate()
        .map(|(m, c)| C64::new(0.0, grid.xi(m)) * c)
        .collect();
    let qx = idft(&qx_hat);
    let s3 = 3.0f64.sqrt();
    let mut h = C64::new(0.0, 0.0);
    for (v, d) in q.values.iter().zip(&qx) {
        let r = v.conj();
        let rx = d.conj();
        let kinetic = C64::new(0.0, 1.0 / (2.0 * s3)) * (d * r - v * rx);
        let cubic = (r * r * r + v * v * v) / 3.0;
        h += kinetic - cubic;
    }
    let h = h * grid.dx();
    debug_assert!(
        h.im.abs() < 1e-10 * h.re.abs().max(1.0),
        "Hamiltonian acquired an imaginary part: {h}"
    );
    h.re
}

/// Integrating-factor RK4 evolution of the quadratic dNLS flow.
pub fn evolve_qdnls(q0: &SampledField, config: &EvolutionConfig) -> Result<TrajectoryRecord> {
    let grid = q0.grid;
    let n = grid.n_points;
    let edge = q0.values[0].norm().max(q0.values[n - 1].norm());
    if edge > 1e-12 {
        return Err(Error::LaxInvariant(format!(
            "initial data not decayed at the grid edges: |q| = {edge:.3e}"
        )));
    }
    let dt = config.dt;
    let steps = (config.t_end / dt).round() as usize;
    let s3 = 3.0f64.sqrt();

    // linear symbol L = -i xi^2 / sqrt 3; E = exp(L dt/2), E2 = E^2
    let e_half: Vec<C64> = (0..n)
        .map(|m| {
            let xi = grid.xi(m);
            C64::new(0.0, -xi * xi / s3 * dt / 2.0).exp()
        })
        .collect();
    let e_full: Vec<C64> = e_half.iter().map(|e| e * e).collect();

    // 2/3 dealiasing mask
    let xi_max = std::f64::consts::PI / grid.dx();
    let mask: Vec<f64> = (0..n)
        .map(|m| {
            if config.dealias && grid.xi(m).abs() > 2.0 / 3.0 * xi_max {
                0.0
            } else {
                1.0
            }
        })
        .collect();

    let nonlinear = |vhat: &[C64]| -> Vec<C64> {
        if config.linear_only {
            return vec![C64::new(0.0, 0.0); n];
        }
        let q = idft(vhat);
        let qx_hat: Vec<C64> = vhat
            .iter()
            .enumerate()
            .map(|(m, c)| C64::new(0.0, grid.xi(m)) * c)
            .collect();
        let qx = idft(&qx_hat);
        let nl: Vec<C64> = q
            .iter()
            .zip(&qx)
            .map(|(v, d)| -2.0 * v.conj() * d.conj())
            .collect();
        let mut nhat = dft(&nl);
        for (m, c) in nhat.iter_mut().enumerate() {
            *c *= mask[m];
        }
        nhat
    };

    let mut vhat = dft(&q0.values);
    let mut snapshots = Vec::new();
    let mut mass_series = Vec::new();
    let mut hamiltonian_series = Vec::new();

    let record = |vhat: &[C64],
                  t: f64,
                  snapshots: &mut Vec<(f64, SampledField)>,
                  mass_series: &mut Vec<f64>,
                  ham_series: &mut Vec<f64>|
     -> Result<()> {
        let vals = idft(vhat);
        if vals.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::EvolutionNaN(t));
        }
        let f = SampledField::new(grid, vals, format!("q(t={t})"))?;
        let sup = f.sup_norm();
        if sup > 1e6 {
            return Err(Error::BlowUp { t, max_abs: sup });
        }
        mass_series.push(mass(&f));
        ham_series.push(hamiltonian(&f));
        snapshots.push((t, f));
        Ok(())
    };

    record(&vhat, 0.0, &mut snapshots, &mut mass_series, &mut hamiltonian_series)?;

    for step in 0..steps {
        // classical IF-RK4 (exact linear propagation between stages)
        let k1 = nonlinear(&vhat);
        let stage2: Vec<C64> = (0..n)
            .map(|m| e_half[m] * (vhat[m] + dt / 2.0 * k1[m]))
            .collect();
        let k2 = nonlinear(&stage2);
        let stage3: Vec<C64> = (0..n)
            .map(|m| e_half[m] * vhat[m] + dt / 2.0 * k2[m])
            .collect();
        let k3 = nonlinear(&stage3);
        let stage4: Vec<C64> = (0..n)
            .map(|m| e_full[m] * vhat[m] + dt * e_half[m] * k3[m])
            .collect();
        let k4 = nonlinear(&stage4);
        vhat = (0..n)
            .map(|m| {
                e_full[m] * (vhat[m] + dt / 6.0 * k1[m])
                    + dt / 3.0 * e_half[m] * (k2[m] + k3[m])
                    + dt / 6.0 * k4[m]
            })
            .collect();
        let t = (step + 1) as f64 * dt;
        if (step + 1) % config.snapshot_stride == 0 || step + 1 == steps {
            record(&vhat, t, &mut snapshots, &mut mass_series, &mut hamiltonian_series)?;
        }
    }

    Ok(TrajectoryRecord {
        snapshots,
        mass_series,
        hamiltonian_series,
        cfl_satisfied: config.cfl_satisfied(grid),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{make_grid, standard_potential, PotentialKind};
    use approx::assert_abs_diff_eq;

    fn gaussian_data(a: f64) -> SampledField {
        let g = make_grid(16.0, 1024).unwrap();
        standard_potential(PotentialKind::Gaussian, C64::new(a, 0.0), 1.0, 0.0, g).unwrap()
    }

    #[test]
    fn zero_data_is_a_fixed_point() {
        let g = make_grid(16.0, 256).unwrap();
        let z = SampledField::zero(g, "0");
        let cfg = EvolutionConfig::new(1e-3, 0.05).unwrap();
        let traj = evolve_qdnls(&z, &cfg).unwrap();
        assert!(traj.terminal().sup_norm() == 0.0);
    }

    #[test]
    fn linear_flow_is_an_isometry() {
        let q0 = gaussian_data(0.5);
        let mut cfg = EvolutionConfig::new(1e-3, 0.2).unwrap();
        cfg.linear_only = true;
        let traj = evolve_qdnls(&q0, &cfg).unwrap();
        let drift = TrajectoryRecord::max_relative_drift(&traj.mass_series);
        assert!(drift < 1e-12, "linear mass drift {drift}");
    }

    #[test]
    fn hamiltonian_of_real_data_is_cubic_only_in_potential_part() {
        // for real q the kinetic term vanishes and H = -(2/3) int q^3
        let q = gaussian_data(0.4);
        let h = hamiltonian(&q);
        let cubic: f64 = q.values.iter().map(|v| v.re.powi(3)).sum::<f64>() * q.grid.dx();
        assert_abs_diff_eq!(h, -(2.0 / 3.0) * cubic, epsilon = 1e-12);
    }

    #[test]
    fn mass_of_unit_gaussian() {
        let q = gaussian_data(1.0);
        assert_abs_diff_eq!(mass(&q), (std::f64::consts::PI / 2.0).sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn invariants_drift_within_integrator_tolerance() {
        let q0 = gaussian_data(0.15);
        let mut cfg = EvolutionConfig::new(1e-3, 0.5).unwrap();
        cfg.snapshot_stride = 100;
        let traj = evolve_qdnls(&q0, &cfg).unwrap();
        let mass_drift = TrajectoryRecord::max_relative_drift(&traj.mass_series);
        let ham_drift = TrajectoryRecord::max_relative_drift(&traj.hamiltonian_series);
        assert!(mass_drift < 1e-9, "mass drift {mass_drift}");
        assert!(ham_drift < 1e-8, "hamiltonian drift {ham_drift}");
    }

    #[test]
    fn fourth_order_temporal_convergence() {
        let q0 = gaussian_data(0.4);
        let terminal = |dt: f64| -> Vec<C64> {
            let mut cfg = EvolutionConfig::new(dt, 0.25).unwrap();
            cfg.snapshot_stride = usize::MAX;
            evolve_qdnls(&q0, &cfg).unwrap().terminal().values.clone()
        };
        let reference = terminal(0.25 / 512.0);
        let err = |dt: f64| -> f64 {
            terminal(dt)
                .iter()
                .zip(&reference)
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max)
        };
        let e1 = err(0.25 / 32.0);
        let e2 = err(0.25 / 64.0);
        let ratio = e1 / e2;
        assert!(
            (10.0..24.0).contains(&ratio),
            "dt-halving ratio {ratio} (e1={e1:.3e}, e2={e2:.3e})"
        );
    }

    #[test]
    fn rejects_undecayed_data_and_bad_dt() {
        let g = make_grid(16.0, 256).unwrap();
        let ones = SampledField::new(g, vec![C64::new(1.0, 0.0); 256], "1").unwrap();
        let cfg = EvolutionConfig::new(1e-3, 0.1).unwrap();
        assert!(evolve_qdnls(&ones, &cfg).is_err());
        assert!(EvolutionConfig::new(0.0, 1.0).is_err());
    }
}
