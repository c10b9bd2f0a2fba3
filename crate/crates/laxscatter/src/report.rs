//! Batch pipelines and the serializable full report (schema `laxscatter/1`).
//! Everything is deterministic for a fixed seed; worker pools only parallelize
//! over independent entries and results are folded in index order.

use crate::conserved::{
    apriori_multi, coercivity_middle_integral, coercivity_ratio, energy_es, energy_nodes,
    ENERGY_KMAX_FACTOR,
};
use crate::error::Result;
use crate::evolve::{evolve_qdnls, EvolutionConfig, TrajectoryRecord};
use crate::field::{
    make_grid, plateau_window, pointwise_mul, standard_potential, GridSpec, PotentialKind,
    SampledField, C64,
};
use crate::fredholm::{trace2_closed_form, trace34_closed_form, verify_equality};
use crate::greens::{
    fd_oracle, functional_derivative_logdet, functional_derivative_t, greens_diagonal_jost,
    greens_diagonal_operator, greens_jump_check, pair_with_direction, Functional, GreensEvaluator,
};
use crate::jost::{solve_jost_set, solve_left_jost_volterra};
use crate::lax::{build_qdnls_spec, random_general_spec, LaxSpec};
use crate::norms::{
    integration_bound_check, modulation_norm, resolvent_modulation_sweep, BoxDecomposition,
};
use crate::scattering::conservation_probe;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

pub const SCHEMA: &str = "laxscatter/1";

fn c(z: C64) -> (f64, f64) {
    (z.re, z.im)
}

/// The qdNLS potential suite: bump and mollified-Gaussian pairs, all inside
/// the smallness window `||Lambda||_2 < 0.5` for `k >= 2`.
pub fn qdnls_suite(grid: GridSpec) -> Vec<(String, SampledField, SampledField)> {
    let bump = |a: C64, w: f64, cx: f64| {
        standard_potential(PotentialKind::Bump, a, w, cx, grid).unwrap()
    };
    let moll = plateau_window(grid, 4.0, 6.5);
    let mgauss = |a: C64, w: f64, cx: f64| {
        let g = standard_potential(PotentialKind::Gaussian, a, w, cx, grid).unwrap();
        pointwise_mul(&g, &moll).unwrap()
    };
    let mut suite = Vec::new();
    let conj_pair = |name: &str, q: SampledField| {
        let r = q.conj();
        (name.to_string(), q, r)
    };
    suite.push(conj_pair("bump-narrow", bump(C64::new(0.10, 0.0), 1.5, 0.0)));
    suite.push(conj_pair("bump-wide", bump(C64::new(0.08, 0.02), 3.0, -0.5)));
    suite.push(conj_pair("bump-offset", bump(C64::new(0.06, -0.04), 2.0, 1.2)));
    suite.push(conj_pair("mgauss-unit", mgauss(C64::new(0.09, 0.0), 1.0, 0.0)));
    suite.push(conj_pair("mgauss-phase", mgauss(C64::new(0.05, 0.06), 1.4, 0.7)));
    suite.push((
        "bump-asym".into(),
        bump(C64::new(0.10, 0.03), 2.0, -0.7),
        bump(C64::new(0.07, -0.02), 1.7, 0.6),
    ));
    suite.push((
        "bump-imag".into(),
        bump(C64::new(0.0, 0.09), 2.2, 0.3),
        bump(C64::new(0.05, 0.0), 2.6, -0.4),
    ));
    suite.push((
        "mgauss-asym".into(),
        mgauss(C64::new(0.08, 0.0), 1.2, -0.8),
        mgauss(C64::new(0.0, -0.06), 0.9, 0.5),
    ));
    suite.push((
        "mixed".into(),
        bump(C64::new(0.09, -0.03), 1.8, 0.0),
        mgauss(C64::new(0.06, 0.02), 1.1, -0.3),
    ));
    suite.push((
        "bump-tiny".into(),
        bump(C64::new(0.04, 0.01), 2.4, 0.9),
        bump(C64::new(0.03, -0.05), 2.0, -0.9),
    ));
    suite
}

#[derive(Debug, Clone, Serialize)]
pub struct EqualityEntry {
    pub name: String,
    pub k: f64,
    pub hs_norm: f64,
    pub log_t_inv: (f64, f64),
    pub log_det2_matrix: (f64, f64),
    pub log_det2_series: (f64, f64),
    pub deviation: f64,
    pub series_vs_matrix: f64,
    pub series_tail_bound: f64,
    pub wronskian_span: f64,
    pub t2: (f64, f64),
}

pub fn equality_suite(grid: GridSpec, ks: &[f64]) -> Result<Vec<EqualityEntry>> {
    let suite = qdnls_suite(grid);
    let mut jobs = Vec::new();
    for (name, q, r) in &suite {
        for &k in ks {
            jobs.push((name.clone(), q.clone(), r.clone(), k));
        }
    }
    jobs.par_iter()
        .map(|(name, q, r, k)| {
            let spec = build_qdnls_spec(q.clone(), r.clone(), *k)?;
            let rep = verify_equality(&spec)?;
            Ok(EqualityEntry {
                name: name.clone(),
                k: *k,
                hs_norm: rep.hs_norm,
                log_t_inv: c(rep.log_t_inv_wronskian),
                log_det2_matrix: c(rep.log_det2_matrix),
                log_det2_series: c(rep.log_det2_series),
                deviation: rep.deviation,
                series_vs_matrix: rep.series_vs_matrix,
                series_tail_bound: rep.series_tail_bound,
                wronskian_span: rep.wronskian_span,
                t2: c(rep.traces[0]),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct GeneralEqualityEntry {
    pub dim: usize,
    pub index: usize,
    pub k: f64,
    pub hs_norm: f64,
    pub deviation: f64,
}

pub fn general_equality_suite(
    grid: GridSpec,
    seed: u64,
    count: usize,
    k: f64,
) -> Result<Vec<GeneralEqualityEntry>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut specs: Vec<(usize, usize, LaxSpec)> = Vec::new();
    for dim in [2usize, 4] {
        for index in 0..count {
            specs.push((dim, index, random_general_spec(&mut rng, dim, grid, k)?));
        }
    }
    specs
        .par_iter()
        .map(|(dim, index, spec)| {
            let rep = verify_equality(spec)?;
            Ok(GeneralEqualityEntry {
                dim: *dim,
                index: *index,
                k,
                hs_norm: rep.hs_norm,
                deviation: rep.deviation,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct TraceEntry {
    pub name: String,
    pub k: f64,
    pub t2_rel: f64,
    pub t3_rel: f64,
    pub t4_rel: f64,
}

pub fn trace_suite(grid: GridSpec, ks: &[f64]) -> Result<Vec<TraceEntry>> {
    let suite = qdnls_suite(grid);
    let mut out = Vec::new();
    for (name, q, r) in &suite {
        for &k in ks {
            let spec = build_qdnls_spec(q.clone(), r.clone(), k)?;
            let pipe = crate::fredholm::det_pipeline(&spec)?;
            let t2 = pipe.trace_power_extrapolated(2)?;
            let t3 = pipe.base.trace_power(3)?;
            let t4 = pipe.base.trace_power(4)?;
            let c2 = trace2_closed_form(q, r, k)?;
            let (c3, c4) = trace34_closed_form(q, r, k)?;
            out.push(TraceEntry {
                name: name.clone(),
                k,
                t2_rel: (t2 - c2).norm() / c2.norm().max(1e-300),
                t3_rel: (t3 - c3).norm() / (1.0 + c3.norm()),
                t4_rel: (t4 - c4).norm() / (1.0 + c4.norm()),
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct GreensSummary {
    pub jump_points: usize,
    pub jump_max_residual: f64,
    pub dual_gtilde_max: f64,
    pub series_vs_solve: f64,
    pub fd_match_logt: f64,
    pub fd_match_logdet: f64,
    pub derivative_fields_match: f64,
}

pub fn greens_summary(grid: GridSpec) -> Result<GreensSummary> {
    let q = standard_potential(PotentialKind::Bump, C64::new(0.10, 0.04), 3.0, -0.5, grid)?;
    let r = standard_potential(PotentialKind::Bump, C64::new(0.08, 0.0), 2.5, 0.6, grid)?;
    let spec = build_qdnls_spec(q, r, 2.0)?;
    let jost = solve_jost_set(&spec)?;
    let ev = GreensEvaluator::new(&jost, &spec)?;
    let (lo, hi) = spec.support_window().unwrap();
    let jump_points = 16;
    let mut jump_max = 0.0f64;
    for i in 0..jump_points {
        let y = lo + (hi - lo) * i / (jump_points - 1);
        jump_max = jump_max.max(greens_jump_check(&ev, y));
    }
    let (gj, _) = greens_diagonal_jost(&spec)?;
    let gop = greens_diagonal_operator(&spec)?;
    let mut dual = 0.0f64;
    for node in gj.window.0..=gj.window.1 {
        for e in 0..9 {
            dual = dual.max((gj.at(node)[e] - gop.at(node)[e]).norm());
        }
    }
    let v = standard_potential(PotentialKind::Bump, C64::new(1.0, 0.0), 1.5, 0.2, grid)?;
    let dt_field = functional_derivative_t(&spec, 0)?;
    let dd_field = functional_derivative_logdet(&spec, 0)?;
    let fields_match = dt_field
        .values
        .iter()
        .zip(&dd_field.values)
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);
    let fd_t = fd_oracle(Functional::LogTInv, &spec, &v, 0)?;
    let fd_d = fd_oracle(Functional::LogDet2, &spec, &v, 0)?;
    let pair_t = pair_with_direction(&dt_field, &v)?;
    let pair_d = pair_with_direction(&dd_field, &v)?;
    Ok(GreensSummary {
        jump_points,
        jump_max_residual: jump_max,
        dual_gtilde_max: dual,
        series_vs_solve: gop.series_vs_solve,
        fd_match_logt: (fd_t - pair_t).norm() / fd_t.norm().max(1e-300),
        fd_match_logdet: (fd_d - pair_d).norm() / fd_d.norm().max(1e-300),
        derivative_fields_match: fields_match,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ConservationSummary {
    pub k: f64,
    pub dt: f64,
    pub t_end: f64,
    pub t_inv_drift: f64,
    pub mass_drift: f64,
    pub hamiltonian_drift: f64,
    pub mollification_error: f64,
    /// Terminal-state errors at dt, dt/2 against a dt/8 reference, and their
    /// ratio (expected ~16 for a fourth-order integrator).
    pub convergence_ratio: f64,
}

pub fn conservation_summary(grid: GridSpec, dt: f64, t_end: f64, k: f64) -> Result<ConservationSummary> {
    let window = plateau_window(grid, 4.0, 6.5);
    let g0 = standard_potential(PotentialKind::Gaussian, C64::new(0.08, 0.03), 1.0, 0.0, grid)?;
    let q0 = pointwise_mul(&g0, &window)?;

    let mut cfg = EvolutionConfig::new(dt, t_end)?;
    cfg.snapshot_stride = ((t_end / dt) as usize / 8).max(1);
    let traj = evolve_qdnls(&q0, &cfg)?;
    let probe = conservation_probe(&traj.snapshots, k)?;
    let mass_drift = TrajectoryRecord::max_relative_drift(&traj.mass_series);
    let ham_drift = TrajectoryRecord::max_relative_drift(&traj.hamiltonian_series);

    // dt^4 convergence of the terminal state on a short horizon
    let horizon = 0.25;
    let term = |dt: f64| -> Result<Vec<C64>> {
        let mut cfg = EvolutionConfig::new(dt, horizon)?;
        cfg.snapshot_stride = usize::MAX;
        Ok(evolve_qdnls(&q0, &cfg)?.terminal().values.clone())
    };
    let reference = term(horizon / 512.0)?;
    let err = |vals: &[C64]| -> f64 {
        vals.iter()
            .zip(&reference)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    };
    let e1 = err(&term(horizon / 32.0)?);
    let e2 = err(&term(horizon / 64.0)?);

    Ok(ConservationSummary {
        k,
        dt,
        t_end,
        t_inv_drift: probe.max_relative_drift,
        mass_drift,
        hamiltonian_drift: ham_drift,
        mollification_error: probe.mollification_error,
        convergence_ratio: e1 / e2,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct EnergyEntry {
    pub s: f64,
    pub k0: f64,
    pub e_s: f64,
    pub e_s2: f64,
    pub tail_deviation: f64,
    pub norm_ratio: f64,
    pub tail_fraction: f64,
    pub drift: f64,
    /// `||q(t)||_{H^s_k0} / ||q(0)||_{H^s_k0}` per snapshot.
    pub norm_ratio_series: Vec<f64>,
    pub norm_ratio_max: f64,
}

pub fn energy_suite(grid: GridSpec, svals: &[f64], k0: f64) -> Result<Vec<EnergyEntry>> {
    let window = plateau_window(grid, 4.0, 6.5);
    let g0 = standard_potential(PotentialKind::Gaussian, C64::new(0.06, 0.0), 1.0, 0.2, grid)?;
    let q0 = pointwise_mul(&g0, &window)?;
    let nodes = energy_nodes(&q0, k0, ENERGY_KMAX_FACTOR * k0, 32)?;

    // drift along a short trajectory (few snapshots, shared nodes count)
    let mut cfg = EvolutionConfig::new(2e-3, 1.0)?;
    cfg.snapshot_stride = 125;
    let traj = evolve_qdnls(&q0, &cfg)?;
    let snaps: Vec<(f64, SampledField)> = traj
        .snapshots
        .iter()
        .step_by(2)
        .map(|(t, f)| (*t, f.clone()))
        .collect();

    let aprioris = apriori_multi(&snaps, svals, k0, 16)?;
    let mut out = Vec::new();
    for (&s, apriori) in svals.iter().zip(&aprioris) {
        let e = energy_es(&nodes, &q0, s);
        let n0 = apriori.microlocal_norms[0];
        let norm_ratio_series: Vec<f64> =
            apriori.microlocal_norms.iter().map(|n| n / n0).collect();
        out.push(EnergyEntry {
            s,
            k0,
            e_s: e.e_s,
            e_s2: e.e_s2,
            tail_deviation: (e.e_s - e.e_s2).abs() / e.e_s2,
            norm_ratio: e.norm_ratio,
            tail_fraction: e.tail_fraction,
            drift: apriori.energy_drift,
            norm_ratio_max: apriori.norm_ratio_max,
            norm_ratio_series,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct CoercivityEntry {
    pub s: f64,
    pub xi: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct NormsSummary {
    pub partition_residual: f64,
    pub m22_vs_l2: f64,
    pub m2p_monotone: bool,
    pub integration_ratio: f64,
    pub resolvent_exponent: f64,
}

pub fn norms_summary(grid: GridSpec) -> Result<NormsSummary> {
    let q = standard_potential(PotentialKind::Gaussian, C64::new(0.7, 0.0), 1.3, 0.0, grid)?;
    let m22 = modulation_norm(&q, 2.0, 2.0)?;
    let mut mono = true;
    let mut prev = f64::INFINITY;
    for p in [1.0, 2.0, 4.0, 8.0] {
        let v = modulation_norm(&q, 2.0, p)?;
        if v > prev * (1.0 + 1e-12) {
            mono = false;
        }
        prev = v;
    }
    let bump = standard_potential(PotentialKind::Bump, C64::new(1.0, 0.0), 2.0, 0.0, grid)?;
    let hat = crate::field::dft(&bump.values);
    let dhat: Vec<C64> = hat
        .iter()
        .enumerate()
        .map(|(m, cc)| C64::new(0.0, grid.xi(m)) * cc)
        .collect();
    let f = SampledField::new(grid, crate::field::idft(&dhat), "bump'")?;
    let ib = integration_bound_check(&f, 2.0)?;
    let (slope, _) = resolvent_modulation_sweep(grid, 2.0, &[4.0, 8.0, 16.0, 32.0])?;
    Ok(NormsSummary {
        partition_residual: BoxDecomposition::new(grid).partition_residual(),
        m22_vs_l2: (m22 - q.l2_norm()).abs() / q.l2_norm(),
        m2p_monotone: mono,
        integration_ratio: ib.ratio,
        resolvent_exponent: slope,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct JostSummary {
    pub dual_method_sup: f64,
    pub contraction_by_k: Vec<(f64, f64)>,
    pub scaled_contraction_spread: f64,
}

pub fn jost_summary(grid: GridSpec) -> Result<JostSummary> {
    // dual-method check inside the smallness window
    let q = standard_potential(PotentialKind::Bump, C64::new(0.05, 0.0), 4.0, 0.0, grid)?;
    let spec = build_qdnls_spec(q.clone(), q.clone(), 4.0)?;
    let set = solve_jost_set(&spec)?;
    let dual = set.volterra_cross_error.unwrap_or(f64::NAN);

    let qc = standard_potential(PotentialKind::Bump, C64::new(0.035, 0.0), 4.0, 0.0, grid)?;
    let mut contraction_by_k = Vec::new();
    let mut scaled: Vec<f64> = Vec::new();
    for k in [2.0, 4.0, 8.0, 16.0] {
        let spec = build_qdnls_spec(qc.clone(), qc.clone(), k)?;
        let sol = solve_left_jost_volterra(&spec)?;
        let contr = sol.contraction.unwrap_or(f64::NAN);
        contraction_by_k.push((k, contr));
        scaled.push(contr * k.sqrt());
    }
    let spread = scaled.iter().cloned().fold(0.0f64, f64::max)
        / scaled.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(JostSummary {
        dual_method_sup: dual,
        contraction_by_k,
        scaled_contraction_spread: spread,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct FullReport {
    pub schema: String,
    pub seed: u64,
    pub grid_half_width: f64,
    pub grid_points: usize,
    pub equality: Vec<EqualityEntry>,
    pub general_equality: Vec<GeneralEqualityEntry>,
    pub traces: Vec<TraceEntry>,
    pub jost: JostSummary,
    pub greens: GreensSummary,
    pub conservation: ConservationSummary,
    pub energy: Vec<EnergyEntry>,
    pub coercivity: Vec<CoercivityEntry>,
    pub coercivity_spot_value: f64,
    pub norms: NormsSummary,
}

pub fn build_full_report(seed: u64, half_width: f64, n: usize) -> Result<FullReport> {
    let grid = make_grid(half_width, n)?;
    let ks = [2.0, 4.0, 8.0];
    let equality = equality_suite(grid, &ks)?;
    let general_equality = general_equality_suite(grid, seed, 5, 2.0)?;
    let traces = trace_suite(grid, &[2.0, 4.0])?;
    let jost = jost_summary(grid)?;
    let greens = greens_summary(grid)?;
    let conservation = conservation_summary(grid, 1e-4, 1.0, 2.0)?;
    let energy = energy_suite(grid, &[-0.1, -0.25, -0.4], 2.0)?;
    let mut coercivity = Vec::new();
    for &s in &[-0.1, -0.25, -0.4] {
        for &xi in &[0.0, 1.0, 10.0, 100.0] {
            coercivity.push(CoercivityEntry {
                s,
                xi,
                ratio: coercivity_ratio(s, 1.0, xi)?.ratio,
            });
        }
    }
    let coercivity_spot_value = coercivity_middle_integral(-0.25, 1.0, 0.0)?;
    let norms = norms_summary(grid)?;
    Ok(FullReport {
        schema: SCHEMA.to_string(),
        seed,
        grid_half_width: half_width,
        grid_points: n,
        equality,
        general_equality,
        traces,
        jost,
        greens,
        conservation,
        energy,
        coercivity,
        coercivity_spot_value,
        norms,
    })
}

pub fn report_to_json(report: &FullReport) -> Result<String> {
    Ok(serde_json::to_string_pretty(report)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_members_stay_in_the_smallness_window() {
        let grid = make_grid(16.0, 1024).unwrap();
        for (name, q, r) in qdnls_suite(grid) {
            let spec = build_qdnls_spec(q, r, 2.0).unwrap();
            let lam = crate::fredholm::assemble_lambda(&spec, false);
            assert!(
                lam.hs_norm() < 0.5,
                "{name}: ||Lambda|| = {} at k=2",
                lam.hs_norm()
            );
            spec.require_compact_support(2.0).unwrap();
        }
    }

    #[test]
    fn sobolev_used_by_smallness_gate_is_finite() {
        let grid = make_grid(16.0, 256).unwrap();
        let q = standard_potential(PotentialKind::Gaussian, C64::new(0.1, 0.0), 1.0, 0.0, grid)
            .unwrap();
        assert!(crate::norms::sobolev_norm(&q, -0.25) > 0.0);
    }
}
