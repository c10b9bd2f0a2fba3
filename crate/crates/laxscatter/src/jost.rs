//! Jost solutions of `L psi = 0` by two independent routes: Picard iteration
//! on the renormalized Volterra system, and RK4 marching from the support
//! edge for compactly supported potentials.
//!
//! Solutions are stored renormalized: `phi(x) = e^{-omega_j k x} Psi_j(x)`.

use crate::error::{Error, Result};
use crate::field::C64;
use crate::lax::{omega, LaxSpec};
use crate::volterra::{apply_resolvent, cum_integral};

pub const SMALLNESS_DELTA: f64 = 0.1;
pub const PICARD_TOL: f64 = 1e-12;
pub const PICARD_MAX_ITER: usize = 200;

/// Margin (in length units) the support must keep from the grid edges.
pub const SUPPORT_MARGIN: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

#[derive(Debug, Clone)]
pub struct JostSolution {
    pub side: Side,
    /// Column index `j` (0-based) of the unit-vector normalization `e_j`.
    pub index: usize,
    pub dim: usize,
    pub k: f64,
    /// Renormalized values, layout `[node * dim + component]`.
    pub values: Vec<C64>,
    pub iterations: usize,
    pub contraction: Option<f64>,
}

impl JostSolution {
    #[inline]
    pub fn at(&self, node: usize) -> &[C64] {
        &self.values[node * self.dim..(node + 1) * self.dim]
    }

    pub fn component(&self, comp: usize) -> Vec<C64> {
        (0..self.values.len() / self.dim)
            .map(|node| self.values[node * self.dim + comp])
            .collect()
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn sup_diff(&self, other: &JostSolution) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone)]
pub struct JostSet {
    pub solutions: Vec<JostSolution>,
    pub split_index: usize,
    /// Sup-norm difference between Volterra and marching left Jost solutions,
    /// when the Volterra route applies (qdNLS, smallness satisfied).
    pub volterra_cross_error: Option<f64>,
}

/// True when the spec uses the qdNLS generator `diag(1, w^2, w)`.
pub fn is_qdnls_generator(spec: &LaxSpec) -> bool {
    if spec.dim() != 3 {
        return false;
    }
    let ws = spec.generator.omegas_c();
    let w = omega();
    (ws[0] - C64::new(1.0, 0.0)).norm() < 1e-12
        && (ws[1] - w.conj()).norm() < 1e-12
        && (ws[2] - w).norm() < 1e-12
}

/// Left Jost solution of the qdNLS system by Picard iteration on
/// `phi = S phi + e_1` built from the cumulative resolvents.
pub fn solve_left_jost_volterra(spec: &LaxSpec) -> Result<JostSolution> {
    if !is_qdnls_generator(spec) {
        return Err(Error::LaxInvariant(
            "Volterra left-Jost solver requires the qdNLS generator".into(),
        ));
    }
    let k = spec.k;
    let q = &spec.fields[0].values;
    let r = &spec.fields[1].values;
    let l2 = spec.fields[0].l2_norm() + spec.fields[1].l2_norm();
    let measured = l2 / k.sqrt();
    if measured > SMALLNESS_DELTA {
        return Err(Error::SmallnessViolated {
            measured,
            delta: SMALLNESS_DELTA,
            required_k: (l2 / SMALLNESS_DELTA).powi(2),
        });
    }

    let grid = spec.grid();
    let n = grid.n_points;
    let h = grid.dx();
    let w = omega();
    let z2 = k * (w.conj() - 1.0);
    let z3 = k * (w - 1.0);

    let mut phi1 = vec![C64::new(1.0, 0.0); n];
    let mut phi2 = vec![C64::new(0.0, 0.0); n];
    let mut phi3 = vec![C64::new(0.0, 0.0); n];
    let mut prev_delta: Option<f64> = None;
    let mut ratios = Vec::new();
    let mut iterations = 0usize;
    let mut converged = false;

    for it in 0..PICARD_MAX_ITER {
        let s1: Vec<C64> = (0..n).map(|j| q[j] * phi2[j] + r[j] * phi3[j]).collect();
        let s2: Vec<C64> = (0..n).map(|j| r[j] * phi1[j] + q[j] * phi3[j]).collect();
        let s3: Vec<C64> = (0..n).map(|j| q[j] * phi1[j] + r[j] * phi2[j]).collect();
        let mut n1 = cum_integral(&s1, h, 6);
        for v in &mut n1 {
            *v += 1.0;
        }
        let n2 = apply_resolvent(z2, &s2, h, 6);
        let n3 = apply_resolvent(z3, &s3, h, 6);
        let delta = n1
            .iter()
            .zip(&phi1)
            .chain(n2.iter().zip(&phi2))
            .chain(n3.iter().zip(&phi3))
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        phi1 = n1;
        phi2 = n2;
        phi3 = n3;
        iterations = it + 1;
        if let Some(p) = prev_delta {
            if p > 0.0 {
                ratios.push(delta / p);
            }
        }
        prev_delta = Some(delta);
        if delta < PICARD_TOL {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::PicardDiverged(PICARD_MAX_ITER));
    }

    let contraction = median(&ratios[1.min(ratios.len())..]);
    let mut values = vec![C64::new(0.0, 0.0); n * 3];
    for node in 0..n {
        values[node * 3] = phi1[node];
        values[node * 3 + 1] = phi2[node];
        values[node * 3 + 2] = phi3[node];
    }
    Ok(JostSolution {
        side: Side::Left,
        index: 0,
        dim: 3,
        k,
        values,
        iterations,
        contraction,
    })
}

fn median(v: &[f64]) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    let mut s = v.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Some(s[s.len() / 2])
}

/// Renormalized Jost solution by classical RK4 marching from the support
/// edge, step `dx`, with half-step potential values from the band-limited
/// 2x refinement. Requires exactly compactly supported potentials.
pub fn solve_jost_march(spec: &LaxSpec, side: Side, index: usize) -> Result<JostSolution> {
    let dim = spec.dim();
    if index >= dim {
        return Err(Error::ComponentOutOfRange(index, dim));
    }
    let l = spec.split_index();
    match side {
        Side::Left if index >= l => {
            return Err(Error::LaxInvariant(format!(
                "column {} is not decaying at -inf (l = {l})",
                index + 1
            )))
        }
        Side::Right if index < l => {
            return Err(Error::LaxInvariant(format!(
                "column {} is not decaying at +inf (l = {l})",
                index + 1
            )))
        }
        _ => {}
    }
    let (lo, hi) = spec.require_compact_support(SUPPORT_MARGIN)?;
    let grid = spec.grid();
    let n = grid.n_points;
    let h = grid.dx();
    let ws = spec.generator.omegas_c();
    let k = spec.k;
    let wj = ws[index];

    // D = k (J - omega_j I)
    let diag: Vec<C64> = ws.iter().map(|w| k * (w - wj)).collect();

    // marching window [a0, a1] with one exactly-zero node on each side
    let a0 = lo - 1;
    let a1 = hi + 1;

    let mut values = vec![C64::new(0.0, 0.0); n * dim];
    let mut phi = vec![C64::new(0.0, 0.0); dim];
    phi[index] = C64::new(1.0, 0.0);

    let step = |phi: &[C64], jf_base: usize, dir: f64| -> Vec<C64> {
        let u0_a = spec.evaluate_u0_fine(jf_base);
        let u0_m = spec.evaluate_u0_fine((jf_base as i64 + dir as i64) as usize);
        let u0_b = spec.evaluate_u0_fine((jf_base as i64 + 2 * dir as i64) as usize);
        let hh = dir * h;
        let apply = |u0: &[C64], v: &[C64]| -> Vec<C64> {
            let mut out = vec![C64::new(0.0, 0.0); dim];
            for i in 0..dim {
                let mut acc = diag[i] * v[i];
                for m in 0..dim {
                    acc += u0[i * dim + m] * v[m];
                }
                out[i] = acc;
            }
            out
        };
        let k1 = apply(&u0_a, phi);
        let p2: Vec<C64> = (0..dim).map(|i| phi[i] + 0.5 * hh * k1[i]).collect();
        let k2 = apply(&u0_m, &p2);
        let p3: Vec<C64> = (0..dim).map(|i| phi[i] + 0.5 * hh * k2[i]).collect();
        let k3 = apply(&u0_m, &p3);
        let p4: Vec<C64> = (0..dim).map(|i| phi[i] + hh * k3[i]).collect();
        let k4 = apply(&u0_b, &p4);
        (0..dim)
            .map(|i| phi[i] + hh / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
            .collect()
    };

    match side {
        Side::Left => {
            for node in 0..=a0 {
                values[node * dim + index] = C64::new(1.0, 0.0);
            }
            for node in a0..a1 {
                phi = step(&phi, 2 * node, 1.0);
                values[(node + 1) * dim..(node + 2) * dim].copy_from_slice(&phi);
            }
            // exact free continuation beyond the support
            for node in (a1 + 1)..n {
                let dxs = (node - a1) as f64 * h;
                for i in 0..dim {
                    values[node * dim + i] = values[a1 * dim + i] * (diag[i] * dxs).exp();
                }
            }
        }
        Side::Right => {
            for node in a1..n {
                values[node * dim + index] = C64::new(1.0, 0.0);
            }
            for node in ((a0 + 1)..=a1).rev() {
                phi = step(&phi, 2 * node, -1.0);
                values[(node - 1) * dim..node * dim].copy_from_slice(&phi);
            }
            for node in (0..a0).rev() {
                let dxs = (node as f64 - a0 as f64) * h;
                for i in 0..dim {
                    values[node * dim + i] = values[a0 * dim + i] * (diag[i] * dxs).exp();
                }
            }
        }
    }

    Ok(JostSolution {
        side,
        index,
        dim,
        k,
        values,
        iterations: 0,
        contraction: None,
    })
}

#[derive(Debug, Clone)]
pub struct AsymptoticsReport {
    pub edge_deviation: f64,
    pub sup_bound: f64,
    pub component_l2: Vec<f64>,
    /// Neumann-series bound `1/(1 - contraction)` for Picard solutions.
    pub neumann_bound: Option<f64>,
}

/// Edge normalization and boundedness diagnostics.
pub fn jost_asymptotics_check(sol: &JostSolution, spec: &LaxSpec) -> AsymptoticsReport {
    let grid = spec.grid();
    let n = grid.n_points;
    let edge_node = match sol.side {
        Side::Left => 0,
        Side::Right => n - 1,
    };
    let phi = sol.at(edge_node);
    let mut dev = 0.0f64;
    for (i, v) in phi.iter().enumerate() {
        let target = if i == sol.index { 1.0 } else { 0.0 };
        dev = dev.max((v - C64::new(target, 0.0)).norm());
    }
    let h = grid.dx();
    let component_l2 = (0..sol.dim)
        .map(|c| {
            (sol.component(c)
                .iter()
                .map(|v| v.norm_sqr())
                .sum::<f64>()
                * h)
                .sqrt()
        })
        .collect();
    AsymptoticsReport {
        edge_deviation: dev,
        sup_bound: sol.sup_norm(),
        component_l2,
        neumann_bound: sol.contraction.map(|c| 1.0 / (1.0 - c)),
    }
}

/// Full ordered Jost set: `l` left solutions then `n - l` right solutions.
/// For qdNLS specs within the smallness regime the left solution is
/// cross-validated against the Volterra route.
pub fn solve_jost_set(spec: &LaxSpec) -> Result<JostSet> {
    let dim = spec.dim();
    let l = spec.split_index();
    let mut solutions = Vec::with_capacity(dim);
    for j in 0..l {
        solutions.push(solve_jost_march(spec, Side::Left, j)?);
    }
    for j in l..dim {
        solutions.push(solve_jost_march(spec, Side::Right, j)?);
    }
    let volterra_cross_error = if is_qdnls_generator(spec) {
        match solve_left_jost_volterra(spec) {
            Ok(v) => Some(v.sup_diff(&solutions[0])),
            Err(_) => None,
        }
    } else {
        None
    };
    Ok(JostSet {
        solutions,
        split_index: l,
        volterra_cross_error,
    })
}

impl JostSet {
    pub fn dim(&self) -> usize {
        self.solutions.len()
    }

    /// Renormalized column matrix at a grid node, row-major `dim x dim`.
    pub fn matrix_at(&self, node: usize) -> Vec<C64> {
        let dim = self.dim();
        let mut m = vec![C64::new(0.0, 0.0); dim * dim];
        for (j, sol) in self.solutions.iter().enumerate() {
            let phi = sol.at(node);
            for i in 0..dim {
                m[i * dim + j] = phi[i];
            }
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{make_grid, standard_potential, PotentialKind, SampledField};
    use crate::lax::build_qdnls_spec;

    fn bump_spec(a: f64, w: f64, k: f64) -> LaxSpec {
        let g = make_grid(16.0, 1024).unwrap();
        let q = standard_potential(PotentialKind::Bump, C64::new(a, 0.0), w, 0.0, g).unwrap();
        build_qdnls_spec(q.clone(), q, k).unwrap()
    }

    #[test]
    fn zero_potential_volterra_is_trivial() {
        let g = make_grid(16.0, 1024).unwrap();
        let z = SampledField::zero(g, "0");
        let spec = build_qdnls_spec(z.clone(), z, 1.0).unwrap();
        let sol = solve_left_jost_volterra(&spec).unwrap();
        assert_eq!(sol.iterations, 1);
        for node in [0usize, 511, 1023] {
            let phi = sol.at(node);
            assert!((phi[0] - C64::new(1.0, 0.0)).norm() < 1e-15);
            assert!(phi[1].norm() < 1e-15);
            assert!(phi[2].norm() < 1e-15);
        }
    }

    #[test]
    fn zero_potential_march_is_unit_vector() {
        let g = make_grid(16.0, 1024).unwrap();
        let z = SampledField::zero(g, "0");
        let spec = build_qdnls_spec(z.clone(), z, 1.0).unwrap();
        for (side, j) in [(Side::Left, 0), (Side::Right, 1), (Side::Right, 2)] {
            let sol = solve_jost_march(&spec, side, j).unwrap();
            for node in (0..1024).step_by(97) {
                let phi = sol.at(node);
                for i in 0..3 {
                    let target = if i == j { 1.0 } else { 0.0 };
                    assert!((phi[i] - C64::new(target, 0.0)).norm() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn dual_method_agreement_on_bump() {
        let spec = bump_spec(0.05, 4.0, 4.0);
        let volt = solve_left_jost_volterra(&spec).unwrap();
        let march = solve_jost_march(&spec, Side::Left, 0).unwrap();
        let d = volt.sup_diff(&march);
        assert!(d < 1e-8, "dual-method sup difference {d}");
    }

    #[test]
    fn smallness_violation_is_refused() {
        let spec = bump_spec(3.0, 4.0, 1.0);
        match solve_left_jost_volterra(&spec) {
            Err(Error::SmallnessViolated { required_k, .. }) => {
                assert!(required_k > 1.0);
            }
            other => panic!("expected smallness refusal, got {other:?}"),
        }
    }

    #[test]
    fn marching_left_solution_is_constant_outside_support() {
        let spec = bump_spec(0.1, 2.0, 2.0);
        let sol = solve_jost_march(&spec, Side::Left, 0).unwrap();
        let g = spec.grid();
        // renormalized first component is flat right of the support and its
        // plateau value is the transmission limit
        let right_start = g.index_of(2.5);
        let v0 = sol.at(right_start)[0];
        for node in (right_start..g.n_points).step_by(53) {
            assert!(
                (sol.at(node)[0] - v0).norm() < 1e-10 * v0.norm(),
                "plateau not flat at node {node}"
            );
        }
        assert!((v0 - C64::new(1.0, 0.0)).norm() < 0.1);
    }

    #[test]
    fn asymptotics_report_zero_deviation_at_init_edge() {
        let spec = bump_spec(0.04, 2.0, 2.0);
        let sol = solve_jost_march(&spec, Side::Left, 0).unwrap();
        let rep = jost_asymptotics_check(&sol, &spec);
        assert!(rep.edge_deviation < 1e-12);
        assert!(rep.sup_bound.is_finite());
        let volt = solve_left_jost_volterra(&spec).unwrap();
        let repv = jost_asymptotics_check(&volt, &spec);
        assert!(repv.edge_deviation < 1e-10);
        let bound = repv.neumann_bound.unwrap();
        assert!(repv.sup_bound <= bound.max(1.0) + 1e-6);
    }

    #[test]
    fn rk4_order_check_by_step_halving() {
        // dx halving must reduce the marching error ~16x (Richardson order 4)
        let mk = |n: usize| {
            let g = make_grid(16.0, n).unwrap();
            let q =
                standard_potential(PotentialKind::Bump, C64::new(0.3, 0.1), 3.0, 0.0, g).unwrap();
            build_qdnls_spec(q.clone(), q, 2.0).unwrap()
        };
        let fine = solve_jost_march(&mk(8192), Side::Left, 0).unwrap();
        let err_at = |n: usize| {
            let s = solve_jost_march(&mk(n), Side::Left, 0).unwrap();
            let stride = 8192 / n;
            (0..n)
                .map(|node| {
                    (0..3)
                        .map(|i| (s.at(node)[i] - fine.at(node * stride)[i]).norm())
                        .fold(0.0, f64::max)
                })
                .fold(0.0, f64::max)
        };
        let e1 = err_at(1024);
        let e2 = err_at(2048);
        let ratio = e1 / e2;
        assert!(
            (8.0..40.0).contains(&ratio),
            "step-halving error ratio {ratio} (e1={e1:.3e}, e2={e2:.3e})"
        );
    }

    #[test]
    fn volterra_requires_qdnls_generator() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let g = make_grid(16.0, 256).unwrap();
        let spec = crate::lax::random_general_spec(&mut rng, 2, g, 2.0).unwrap();
        assert!(solve_left_jost_volterra(&spec).is_err());
    }

    #[test]
    fn jost_set_counts_sides() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let g = make_grid(16.0, 1024).unwrap();
        let spec = crate::lax::random_general_spec(&mut rng, 4, g, 2.0).unwrap();
        let set = solve_jost_set(&spec).unwrap();
        assert_eq!(set.split_index, 2);
        assert_eq!(set.solutions.len(), 4);
        assert!(matches!(set.solutions[0].side, Side::Left));
        assert!(matches!(set.solutions[1].side, Side::Left));
        assert!(matches!(set.solutions[2].side, Side::Right));
        assert!(matches!(set.solutions[3].side, Side::Right));
    }
}
