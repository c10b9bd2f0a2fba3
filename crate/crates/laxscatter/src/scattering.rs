//! Inverse transmission coefficient `T^{-1}` as a Wronskian of the Jost set
//! and as the plateau limit of the left Jost solution, plus conservation
//! probes along trajectories.

use crate::error::{Error, Result};
use crate::field::{plateau_window, pointwise_mul, C64, SampledField};
use crate::jost::{solve_jost_march, solve_jost_set, JostSet, JostSolution, Side};
use crate::lax::{build_qdnls_spec, LaxSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransmissionMethod {
    Wronskian,
    Limit,
}

#[derive(Debug, Clone)]
pub struct TransmissionResult {
    pub k: f64,
    pub t_inv: C64,
    pub method: TransmissionMethod,
    /// Max |W(x) - W(x')| over the sampled evaluation nodes.
    pub x_independence_span: f64,
}

impl TransmissionResult {
    /// Principal-branch logarithm; in the smallness regime `T^{-1}` stays
    /// near 1 so no unwrapping is needed.
    pub fn log_t_inv(&self) -> Result<C64> {
        if self.t_inv.norm() == 0.0 {
            return Err(Error::VanishingTransmission);
        }
        Ok(self.t_inv.ln())
    }
}

/// Determinant of a small row-major `dim x dim` complex matrix.
pub fn det_small(m: &[C64], dim: usize) -> C64 {
    match dim {
        1 => m[0],
        2 => m[0] * m[3] - m[1] * m[2],
        3 => {
            m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6])
                + m[2] * (m[3] * m[7] - m[4] * m[6])
        }
        _ => {
            // Gaussian elimination with partial pivoting
            let mut a = m.to_vec();
            let mut det = C64::new(1.0, 0.0);
            for col in 0..dim {
                let piv = (col..dim)
                    .max_by(|&i, &j| {
                        a[i * dim + col]
                            .norm()
                            .partial_cmp(&a[j * dim + col].norm())
                            .unwrap()
                    })
                    .unwrap();
                if a[piv * dim + col].norm() == 0.0 {
                    return C64::new(0.0, 0.0);
                }
                if piv != col {
                    for j in 0..dim {
                        a.swap(col * dim + j, piv * dim + j);
                    }
                    det = -det;
                }
                let p = a[col * dim + col];
                det *= p;
                for i in (col + 1)..dim {
                    let f = a[i * dim + col] / p;
                    for j in col..dim {
                        let v = a[col * dim + j];
                        a[i * dim + j] -= f * v;
                    }
                }
            }
            det
        }
    }
}

/// Evaluation nodes for the x-independence check: spread across the support
/// window of the spec (where all marched solutions are honest ODE output).
fn sample_nodes(spec: &LaxSpec, count: usize) -> Vec<usize> {
    let grid = spec.grid();
    let (lo, hi) = spec
        .support_window()
        .unwrap_or((grid.n_points / 4, 3 * grid.n_points / 4));
    let lo = lo.saturating_sub(2);
    let hi = (hi + 2).min(grid.n_points - 1);
    (0..count)
        .map(|i| lo + (hi - lo) * i / (count - 1).max(1))
        .collect()
}

/// `T^{-1}` as the determinant of the renormalized Jost column matrix.
/// Since `tr J = 0` the renormalizing exponentials cancel and the
/// renormalized determinant equals the raw Wronskian at every `x`.
pub fn transmission_wronskian(
    jost: &JostSet,
    spec: &LaxSpec,
    at_node: Option<usize>,
) -> Result<TransmissionResult> {
    let dim = jost.dim();
    let nodes = sample_nodes(spec, 8);
    let dets: Vec<C64> = nodes
        .iter()
        .map(|&node| det_small(&jost.matrix_at(node), dim))
        .collect();
    let mut span = 0.0f64;
    for a in &dets {
        for b in &dets {
            span = span.max((a - b).norm());
        }
    }
    let t_inv = match at_node {
        Some(node) => det_small(&jost.matrix_at(node), dim),
        None => dets[dets.len() / 2],
    };
    if t_inv.norm() == 0.0 {
        return Err(Error::SingularJostSet);
    }
    Ok(TransmissionResult {
        k: spec.k,
        t_inv,
        method: TransmissionMethod::Wronskian,
        x_independence_span: span,
    })
}

/// `T^{-1}` as the limit of the renormalized left Jost solution at `+inf`
/// (its first-component plateau to the right of the support). Requires a
/// spec whose first eigenvalue has the largest real part.
pub fn transmission_limit(left: &JostSolution, spec: &LaxSpec) -> Result<TransmissionResult> {
    if left.side != Side::Left || left.index != 0 {
        return Err(Error::LaxInvariant(
            "transmission limit needs the first left Jost solution".into(),
        ));
    }
    let grid = spec.grid();
    let (_, hi) = spec.require_compact_support(crate::jost::SUPPORT_MARGIN)?;
    // plateau nodes strictly right of the support
    let start = hi + 1;
    let n = grid.n_points;
    let count = 8;
    let mut vals = Vec::with_capacity(count);
    for i in 0..count {
        let node = start + (n - 1 - start) * i / (count - 1);
        vals.push(left.at(node)[0]);
    }
    let mut span = 0.0f64;
    for a in &vals {
        for b in &vals {
            span = span.max((a - b).norm());
        }
    }
    let t_inv = vals[count / 2];
    if t_inv.norm() == 0.0 {
        return Err(Error::VanishingTransmission);
    }
    Ok(TransmissionResult {
        k: spec.k,
        t_inv,
        method: TransmissionMethod::Limit,
        x_independence_span: span,
    })
}

#[derive(Debug, Clone)]
pub struct WronskianIdentityReport {
    /// Max residual of the multilinear identity
    /// `sum_i det(..., A v_i, ...) = tr(A) det(v_1|...|v_n)` over random draws.
    pub algebraic_residual: f64,
    /// Max `|dW/dx| / |W|` along the grid by centered differences.
    pub derivative_residual: f64,
}

/// Verifies the determinant-derivative identity behind x-independence, both
/// algebraically on random matrices and numerically on the computed set.
pub fn wronskian_derivative_identity_check(
    jost: &JostSet,
    spec: &LaxSpec,
    seed: u64,
) -> WronskianIdentityReport {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let dim = jost.dim();
    let mut algebraic_residual = 0.0f64;
    for _ in 0..24 {
        let a: Vec<C64> = (0..dim * dim)
            .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let v: Vec<C64> = (0..dim * dim)
            .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let tr_a: C64 = (0..dim).map(|i| a[i * dim + i]).sum();
        let base = det_small(&v, dim);
        let mut lhs = C64::new(0.0, 0.0);
        for col in 0..dim {
            let mut m = v.clone();
            for row in 0..dim {
                let mut acc = C64::new(0.0, 0.0);
                for s in 0..dim {
                    acc += a[row * dim + s] * v[s * dim + col];
                }
                m[row * dim + col] = acc;
            }
            lhs += det_small(&m, dim);
        }
        algebraic_residual = algebraic_residual.max((lhs - tr_a * base).norm());
    }

    // numerical dW/dx on the marched set by centered differences
    let nodes = sample_nodes(spec, 64);
    let grid = spec.grid();
    let mut derivative_residual = 0.0f64;
    for &node in nodes.iter().filter(|&&n| n > 0 && n + 1 < grid.n_points) {
        let wm = det_small(&jost.matrix_at(node - 1), dim);
        let w0 = det_small(&jost.matrix_at(node), dim);
        let wp = det_small(&jost.matrix_at(node + 1), dim);
        let dw = (wp - wm) / (2.0 * grid.dx());
        derivative_residual = derivative_residual.max(dw.norm() / w0.norm().max(1e-300));
    }
    WronskianIdentityReport {
        algebraic_residual,
        derivative_residual,
    }
}

#[derive(Debug, Clone)]
pub struct ConservationProbe {
    pub times: Vec<f64>,
    pub t_inv: Vec<C64>,
    pub max_relative_drift: f64,
    /// Largest tail magnitude removed by the mollifier across snapshots.
    pub mollification_error: f64,
}

/// `T^{-1}(k, q(t))` along a trajectory of snapshots with `r = conj(q)`
/// enforced at evaluation time. Snapshots are mollified to exact compact
/// support before the marching solver runs.
pub fn conservation_probe(snapshots: &[(f64, SampledField)], k: f64) -> Result<ConservationProbe> {
    if snapshots.is_empty() {
        return Err(Error::LaxInvariant("empty trajectory".into()));
    }
    let grid = snapshots[0].1.grid;
    let inner = grid.half_width - 6.0;
    let outer = grid.half_width - 3.0;
    let window = plateau_window(grid, inner, outer);
    let mut times = Vec::new();
    let mut t_inv = Vec::new();
    let mut mollification_error = 0.0f64;
    for (t, q) in snapshots {
        let qm = pointwise_mul(q, &window)?;
        let tail: f64 = q
            .values
            .iter()
            .zip(&qm.values)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        mollification_error = mollification_error.max(tail);
        let spec = build_qdnls_spec(qm.clone(), qm.conj(), k)?;
        let left = solve_jost_march(&spec, Side::Left, 0)?;
        let tr = transmission_limit(&left, &spec)?;
        times.push(*t);
        t_inv.push(tr.t_inv);
    }
    let t0 = t_inv[0];
    let max_relative_drift = t_inv
        .iter()
        .map(|v| (v - t0).norm() / t0.norm().max(1e-300))
        .fold(0.0, f64::max);
    Ok(ConservationProbe {
        times,
        t_inv,
        max_relative_drift,
        mollification_error,
    })
}

/// Convenience: both transmission routes for a spec, with their agreement.
pub struct TransmissionPair {
    pub wronskian: TransmissionResult,
    pub limit: TransmissionResult,
    pub agreement: f64,
    pub jost: JostSet,
}

pub fn transmission_both(spec: &LaxSpec) -> Result<TransmissionPair> {
    let jost = solve_jost_set(spec)?;
    let w = transmission_wronskian(&jost, spec, None)?;
    let lim = transmission_limit(&jost.solutions[0], spec)?;
    let agreement = (w.t_inv - lim.t_inv).norm() / w.t_inv.norm().max(1e-300);
    Ok(TransmissionPair {
        wronskian: w,
        limit: lim,
        agreement,
        jost,
    })
}
