//! Green's function of `L` from Jost solutions, the jump condition, the
//! renormalized diagonal `g~`, and functional derivatives of `log T^{-1}`
//! and `log det_2` with a finite-difference oracle.
//!
//! Sign conventions (fixed once, verified by the oracle tests):
//!   G(x,y) = -T sum_{i<=l} Phi_i^-(x) (x) v_i(y)   for x < y,
//!            +T sum_{i>l}  Phi_i^+(x) (x) v_i(y)   for x > y,
//! with `<v_i(y), w> = det(Phi_1^-|...|w at slot i|...|Phi_n^+)`, and
//!   d/du_i log T^{-1} = d/du_i log det_2(1 - R_0 U_0) = -tr((grad_i U0) g~),
//! where `g~` is the continuous diagonal of the kernel of `R - R_0 =
//! R_0 U_0 (1 - R_0 U_0)^{-1} R_0`.

use crate::error::{Error, Result};
use crate::field::{C64, SampledField};
use crate::fredholm::{det_pipeline, log_t_inv_limit};
use crate::jost::{solve_jost_set, JostSet};
use crate::lax::LaxSpec;
use crate::linalg::CMat;
use crate::scattering::{det_small, transmission_wronskian};
use crate::volterra::{apply_resolvent_split, resolvent_matrix_signed};

/// Evaluates `G(x, y)` from a Jost set through the tensor-product formula.
pub struct GreensEvaluator<'a> {
    pub jost: &'a JostSet,
    pub spec: &'a LaxSpec,
    pub t_inv: C64,
}

impl<'a> GreensEvaluator<'a> {
    pub fn new(jost: &'a JostSet, spec: &'a LaxSpec) -> Result<Self> {
        let t_inv = transmission_wronskian(jost, spec, None)?.t_inv;
        Ok(GreensEvaluator { jost, spec, t_inv })
    }

    /// Cofactor vectors of the renormalized column matrix at `node`:
    /// `vt_i` satisfies `sum_m vt_i[m] w[m] = det(renormalized with column i
    /// replaced by w)`.
    fn cofactors(&self, node: usize) -> Vec<Vec<C64>> {
        let dim = self.jost.dim();
        let m = self.jost.matrix_at(node);
        let mut out = Vec::with_capacity(dim);
        for col in 0..dim {
            let mut v = Vec::with_capacity(dim);
            for row in 0..dim {
                // minor with `row` and `col` deleted
                let mut sub = Vec::with_capacity((dim - 1) * (dim - 1));
                for i in 0..dim {
                    if i == row {
                        continue;
                    }
                    for j in 0..dim {
                        if j == col {
                            continue;
                        }
                        sub.push(m[i * dim + j]);
                    }
                }
                let sign = if (row + col) % 2 == 0 { 1.0 } else { -1.0 };
                v.push(sign * det_small(&sub, dim - 1));
            }
            out.push(v);
        }
        out
    }

    /// `G(x, y)` for `x != y` (grid nodes), row-major `dim x dim`.
    pub fn greens_at(&self, x_node: usize, y_node: usize) -> Result<Vec<C64>> {
        if x_node == y_node {
            return Err(Error::LaxInvariant(
                "G(x,y) at x = y: use the diagonal routine".into(),
            ));
        }
        Ok(self.one_sided(x_node, y_node))
    }

    /// Tensor formula with the branch chosen by `x_node <= y_node` treated as
    /// the `x < y` side (used for one-sided limits with `x_node == y_node`).
    fn branch(&self, x_node: usize, y_node: usize, left_branch: bool) -> Vec<C64> {
        let dim = self.jost.dim();
        let l = self.jost.split_index;
        let grid = self.spec.grid();
        let k = self.spec.k;
        let ws = self.spec.generator.omegas_c();
        let t = self.t_inv.inv();
        let cof = self.cofactors(y_node);
        let phix = self.jost.matrix_at(x_node);
        let dx = grid.x(x_node) - grid.x(y_node);
        let mut g = vec![C64::new(0.0, 0.0); dim * dim];
        let range: Vec<usize> = if left_branch {
            (0..l).collect()
        } else {
            (l..dim).collect()
        };
        let sign = if left_branch { -1.0 } else { 1.0 };
        for i in range {
            // renormalized columns carry e^{omega_i k (x-y)}; the cofactor of
            // the renormalized matrix absorbs the remaining exponentials
            let factor = sign * t * (ws[i] * k * dx).exp();
            for a in 0..dim {
                for b in 0..dim {
                    g[a * dim + b] += factor * phix[a * dim + i] * cof[i][b];
                }
            }
        }
        g
    }

    fn one_sided(&self, x_node: usize, y_node: usize) -> Vec<C64> {
        self.branch(x_node, y_node, x_node <= y_node)
    }

    /// One-sided limits `G(y-, y)` and `G(y+, y)` from the analytic formula.
    pub fn one_sided_limits(&self, y_node: usize) -> (Vec<C64>, Vec<C64>) {
        (
            self.branch(y_node, y_node, true),
            self.branch(y_node, y_node, false),
        )
    }

    /// Renormalized diagonal `g~(y) = lim (G - G_0)(x, y)` as `x -> y`,
    /// evaluated from the Jost products (continuous across the diagonal).
    pub fn diagonal_renormalized(&self, y_node: usize) -> Vec<C64> {
        let dim = self.jost.dim();
        let l = self.jost.split_index;
        let mut g = self.branch(y_node, y_node, true);
        // subtract G_0(y-, y): diagonal blocks, -1 limit for Re omega_i > 0
        for i in 0..l {
            g[i * dim + i] += C64::new(1.0, 0.0);
        }
        g
    }
}

/// `max | G(y+, y) - G(y-, y) - Id |` entrywise, from the analytic formula.
pub fn greens_jump_check(ev: &GreensEvaluator, y_node: usize) -> f64 {
    let dim = ev.jost.dim();
    let (gm, gp) = ev.one_sided_limits(y_node);
    let mut res = 0.0f64;
    for a in 0..dim {
        for b in 0..dim {
            let idm = if a == b { 1.0 } else { 0.0 };
            res = res.max((gp[a * dim + b] - gm[a * dim + b] - idm).norm());
        }
    }
    res
}

/// Jump residual by Richardson extrapolation of grid values toward the
/// diagonal (diagnostic counterpart of the exact formula).
pub fn greens_jump_check_extrapolated(ev: &GreensEvaluator, y_node: usize) -> f64 {
    let dim = ev.jost.dim();
    let g = |xo: i64| -> Vec<C64> {
        ev.one_sided((y_node as i64 + xo) as usize, y_node)
    };
    // one-sided limits: 2 f(h) - f(2h) per side
    let gp1 = g(1);
    let gp2 = g(2);
    let gm1 = g(-1);
    let gm2 = g(-2);
    let mut res = 0.0f64;
    for a in 0..dim {
        for b in 0..dim {
            let e = a * dim + b;
            let plus = 2.0 * gp1[e] - gp2[e];
            let minus = 2.0 * gm1[e] - gm2[e];
            let idm = if a == b { 1.0 } else { 0.0 };
            res = res.max((plus - minus - idm).norm());
        }
    }
    res
}

/// `max_x || d/dx G(., y) - (kJ + U0) G(., y) ||` at sample nodes away from
/// `y` (6th-order finite differences in `x`).
pub fn greens_column_residual(ev: &GreensEvaluator, y_node: usize) -> f64 {
    let dim = ev.jost.dim();
    let grid = ev.spec.grid();
    let h = grid.dx();
    let k = ev.spec.k;
    let ws = ev.spec.generator.omegas_c();
    let (lo, hi) = ev
        .spec
        .support_window()
        .unwrap_or((grid.n_points / 3, 2 * grid.n_points / 3));
    let mut res = 0.0f64;
    let candidates: Vec<usize> = (lo..=hi)
        .step_by(((hi - lo) / 24).max(1))
        .filter(|&x| (x as i64 - y_node as i64).unsigned_abs() as usize > 6 && x > 3 && x + 3 < grid.n_points)
        .collect();
    for x_node in candidates {
        // 6th-order central first derivative
        let gm3 = ev.one_sided(x_node - 3, y_node);
        let gm2 = ev.one_sided(x_node - 2, y_node);
        let gm1 = ev.one_sided(x_node - 1, y_node);
        let gp1 = ev.one_sided(x_node + 1, y_node);
        let gp2 = ev.one_sided(x_node + 2, y_node);
        let gp3 = ev.one_sided(x_node + 3, y_node);
        let g0 = ev.one_sided(x_node, y_node);
        let u0 = ev.spec.evaluate_u0(x_node);
        for a in 0..dim {
            for b in 0..dim {
                let e = a * dim + b;
                let d = (gp3[e] - gm3[e] + 9.0 * (gm2[e] - gp2[e])
                    + 45.0 * (gp1[e] - gm1[e]))
                    / (60.0 * h);
                let mut ug = k * ws[a] * g0[e];
                for m in 0..dim {
                    ug += u0[a * dim + m] * g0[m * dim + b];
                }
                res = res.max((d - ug).norm());
            }
        }
    }
    res
}

/// Diagonal of the kernel of `R - R_0` on the support window.
#[derive(Debug, Clone)]
pub struct GreensDiagonal {
    /// Node window the values live on.
    pub window: (usize, usize),
    /// Row-major `dim x dim` matrix per window node.
    pub values: Vec<Vec<C64>>,
    /// Max entrywise difference between the dense-solve and Neumann-series
    /// evaluations of the same discrete system.
    pub series_vs_solve: f64,
}

impl GreensDiagonal {
    pub fn at(&self, node: usize) -> &[C64] {
        &self.values[node - self.window.0]
    }
}

/// `g~` from the operator path: per column `y`, the data
/// `C(., y) = R_0 U_0 G_0(., y)` is produced by split-kink product
/// integration (the `G_0` column jumps at `y`), then
/// `(1 - R_0 U_0) F = R_0 U_0 C` is solved densely and `g~ = C + F` on the
/// diagonal. A Picard iteration on the same system provides the
/// Neumann-series cross-check.
pub fn greens_diagonal_operator(spec: &LaxSpec) -> Result<GreensDiagonal> {
    let grid = spec.grid();
    let h = grid.dx();
    let dim = spec.dim();
    let k = spec.k;
    let ws = spec.generator.omegas_c();
    let zs: Vec<C64> = ws.iter().map(|w| k * w).collect();
    let (lo, hi) = spec.require_compact_support(crate::jost::SUPPORT_MARGIN)?;
    let ns = hi - lo + 1;

    // smallness gate via the Fredholm pipeline norm
    let lam = crate::fredholm::assemble_lambda(spec, false);
    let hs = lam.hs_norm();
    if hs >= 1.0 {
        return Err(Error::OutsideSmallnessRegime(hs));
    }

    // window-restricted PI4 operator matrices R_i
    let rmats: Vec<CMat> = zs
        .iter()
        .map(|&z| CMat::from_rows(ns, resolvent_matrix_signed(z, ns, h)))
        .collect();

    // pointwise U0 on the window
    let u0: Vec<Vec<C64>> = (lo..=hi).map(|j| spec.evaluate_u0(j)).collect();

    // A = I - R_0 U_0 as a (dim*ns)^2 block matrix
    let mut a = CMat::identity(dim * ns);
    for bi in 0..dim {
        for bj in 0..dim {
            if bi == bj {
                continue;
            }
            for row in 0..ns {
                for col in 0..ns {
                    let u = u0[col][bi * dim + bj];
                    if u.norm_sqr() == 0.0 {
                        continue;
                    }
                    *a.at_mut(bi * ns + row, bj * ns + col) -= rmats[bi].at(row, col) * u;
                }
            }
        }
    }

    // apply R_i (split at `kink`) to a window function
    let apply_split = |i: usize, f: &[C64], kink: usize, fl: C64, fr: C64| -> Vec<C64> {
        apply_resolvent_split(zs[i], f, h, kink, fl, fr)
    };
    let apply_block =
        |i: usize, fs: &[Vec<C64>], kink: usize| -> Vec<C64> {
            // (R_0 U_0 f)_i with f continuous at the kink
            let mut src = vec![C64::new(0.0, 0.0); ns];
            for m in 0..dim {
                if m == i {
                    continue;
                }
                for a_ in 0..ns {
                    src[a_] += u0[a_][i * dim + m] * fs[m][a_];
                }
            }
            let val = src[kink];
            apply_split(i, &src, kink, val, val)
        };

    // G_0 column values on the window for block j, centered at window node yb
    let g0_column = |j: usize, yb: usize| -> (Vec<C64>, C64, C64) {
        let z = zs[j];
        let mut col = vec![C64::new(0.0, 0.0); ns];
        let y = grid.x(lo + yb);
        if z.re > 0.0 {
            for (a_, v) in col.iter_mut().enumerate().take(yb) {
                *v = -(z * (grid.x(lo + a_) - y)).exp();
            }
            (col, C64::new(-1.0, 0.0), C64::new(0.0, 0.0))
        } else {
            for (a_, v) in col.iter_mut().enumerate().skip(yb + 1) {
                *v = (z * (grid.x(lo + a_) - y)).exp();
            }
            (col, C64::new(0.0, 0.0), C64::new(1.0, 0.0))
        }
    };

    // assemble all right-hand sides: for each (yb, j): C-col then B = M C
    let mut c_cols: Vec<Vec<Vec<Vec<C64>>>> = Vec::with_capacity(ns); // [yb][j][i][node]
    let mut b_cols: Vec<Vec<C64>> = Vec::with_capacity(ns * dim);
    for yb in 0..ns {
        let mut per_j = Vec::with_capacity(dim);
        for j in 0..dim {
            let (g0, gl, gr) = g0_column(j, yb);
            // C_i = R_i (U0_{ij} g0_j), kink at yb with one-sided values
            let mut c_blocks: Vec<Vec<C64>> = Vec::with_capacity(dim);
            for i in 0..dim {
                if i == j {
                    c_blocks.push(vec![C64::new(0.0, 0.0); ns]);
                    continue;
                }
                let f: Vec<C64> = (0..ns).map(|a_| u0[a_][i * dim + j] * g0[a_]).collect();
                let uk = u0[yb][i * dim + j];
                c_blocks.push(apply_split(i, &f, yb, uk * gl, uk * gr));
            }
            // B_i = (R_0 U_0 C)_i with C continuous at the kink
            let mut b = vec![C64::new(0.0, 0.0); dim * ns];
            for i in 0..dim {
                let bi = apply_block(i, &c_blocks, yb);
                b[i * ns..(i + 1) * ns].copy_from_slice(&bi);
            }
            b_cols.push(b);
            per_j.push(c_blocks);
        }
        c_cols.push(per_j);
    }

    let f_cols = a.solve_columns(&b_cols);

    // Neumann-series cross-check on a few columns: F = B + (R0 U0) F
    let mut series_vs_solve = 0.0f64;
    let m_apply = |f: &[C64]| -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); dim * ns];
        for bi in 0..dim {
            for bj in 0..dim {
                if bi == bj {
                    continue;
                }
                for row in 0..ns {
                    let mut acc = C64::new(0.0, 0.0);
                    for col in 0..ns {
                        let u = u0[col][bi * dim + bj];
                        if u.norm_sqr() == 0.0 {
                            continue;
                        }
                        acc += rmats[bi].at(row, col) * u * f[bj * ns + col];
                    }
                    out[bi * ns + row] += acc;
                }
            }
        }
        out
    };
    for probe in [0usize, ns / 2, ns.saturating_sub(1)] {
        let idx = probe * dim + dim.min(2) - 1;
        let b = &b_cols[idx];
        let mut f = b.clone();
        for _ in 0..200 {
            let mf = m_apply(&f);
            let next: Vec<C64> = b.iter().zip(&mf).map(|(x, y)| x + y).collect();
            let delta = next
                .iter()
                .zip(&f)
                .map(|(x, y)| (x - y).norm())
                .fold(0.0, f64::max);
            f = next;
            if delta < 1e-13 {
                break;
            }
        }
        let d = f
            .iter()
            .zip(&f_cols[idx])
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max);
        series_vs_solve = series_vs_solve.max(d);
    }

    // g~(y)_{ij} = C_i(y) + F_i(y) for the column (y, j)
    let mut values = Vec::with_capacity(ns);
    for yb in 0..ns {
        let mut g = vec![C64::new(0.0, 0.0); dim * dim];
        for j in 0..dim {
            let fcol = &f_cols[yb * dim + j];
            for i in 0..dim {
                g[i * dim + j] = c_cols[yb][j][i][yb] + fcol[i * ns + yb];
            }
        }
        values.push(g);
    }
    Ok(GreensDiagonal {
        window: (lo, hi),
        values,
        series_vs_solve,
    })
}

/// `g~` from Jost products on the same window (independent construction).
pub fn greens_diagonal_jost(spec: &LaxSpec) -> Result<(GreensDiagonal, JostSet)> {
    let jost = solve_jost_set(spec)?;
    let ev = GreensEvaluator::new(&jost, spec)?;
    let (lo, hi) = spec.require_compact_support(crate::jost::SUPPORT_MARGIN)?;
    let values = (lo..=hi).map(|y| ev.diagonal_renormalized(y)).collect();
    Ok((
        GreensDiagonal {
            window: (lo, hi),
            values,
            series_vs_solve: 0.0,
        },
        jost,
    ))
}

/// Pointwise field `-tr((grad_i U0)(u(x)) g~(x))` on the diagonal window,
/// zero-extended to the grid.
fn trace_pairing_field(
    spec: &LaxSpec,
    gd: &GreensDiagonal,
    component: usize,
    label: &str,
) -> Result<SampledField> {
    let grid = spec.grid();
    let dim = spec.dim();
    let mut values = vec![C64::new(0.0, 0.0); grid.n_points];
    for node in gd.window.0..=gd.window.1 {
        let grad = spec.nabla_u0(component, node)?;
        let g = gd.at(node);
        let mut tr = C64::new(0.0, 0.0);
        for a in 0..dim {
            for b in 0..dim {
                tr += grad[a * dim + b] * g[b * dim + a];
            }
        }
        values[node] = -tr;
    }
    SampledField::new(grid, values, label.to_string())
}

/// `d log T^{-1} / d u_i` through the Jost-product construction of `g~`.
pub fn functional_derivative_t(spec: &LaxSpec, component: usize) -> Result<SampledField> {
    let (gd, _) = greens_diagonal_jost(spec)?;
    trace_pairing_field(spec, &gd, component, "dlogTinv")
}

/// `d log det_2 / d u_i` through the operator construction of `g~`.
pub fn functional_derivative_logdet(spec: &LaxSpec, component: usize) -> Result<SampledField> {
    let gd = greens_diagonal_operator(spec)?;
    trace_pairing_field(spec, &gd, component, "dlogdet2")
}

/// Explicit qdNLS minor products for `d T^{-1} / d q` and `d T^{-1} / d r`
/// (the closed 3x3 formulas; cross-checked against the general trace form).
pub fn qdnls_dtinv_products(jost: &JostSet, component: usize) -> Vec<C64> {
    assert_eq!(jost.dim(), 3);
    let n = jost.solutions[0].values.len() / 3;
    let p1 = &jost.solutions[0];
    let p2 = &jost.solutions[1];
    let p3 = &jost.solutions[2];
    (0..n)
        .map(|node| {
            let a = p1.at(node);
            let b = p2.at(node);
            let c = p3.at(node);
            // minors of the (renormalized) right pair
            let m11 = b[1] * c[2] - b[2] * c[1]; // Phi22 Phi33 - Phi23 Phi32
            let m12 = c[0] * b[2] - b[0] * c[2]; // Phi13 Phi32 - Phi12 Phi33
            let m13 = b[0] * c[1] - c[0] * b[1]; // Phi12 Phi23 - Phi13 Phi22
            if component == 0 {
                a[0] * m13 + a[1] * m11 + a[2] * m12
            } else {
                a[0] * m12 + a[1] * m13 + a[2] * m11
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Functional {
    LogTInv,
    LogDet2,
}

/// Evaluate the functional at a perturbed spec.
fn eval_functional(f: Functional, spec: &LaxSpec) -> Result<C64> {
    match f {
        Functional::LogTInv => log_t_inv_limit_or_wronskian(spec),
        Functional::LogDet2 => det_pipeline(spec)?.log_det2(),
    }
}

fn log_t_inv_limit_or_wronskian(spec: &LaxSpec) -> Result<C64> {
    if crate::jost::is_qdnls_generator(spec) {
        log_t_inv_limit(spec)
    } else {
        let jost = solve_jost_set(spec)?;
        transmission_wronskian(&jost, spec, None)?.log_t_inv()
    }
}

/// Centered finite-difference directional derivative with Richardson over
/// `eps in {1e-3, 1e-4}`:
/// `dF(u)[v e_i] ~ (F(u + eps v e_i) - F(u - eps v e_i)) / (2 eps)`.
pub fn fd_oracle(
    functional: Functional,
    spec: &LaxSpec,
    direction: &SampledField,
    component: usize,
) -> Result<C64> {
    let base = &spec.fields[component];
    let diff = |eps: f64| -> Result<C64> {
        let plus = SampledField::new(
            base.grid,
            base.values
                .iter()
                .zip(&direction.values)
                .map(|(u, v)| u + eps * v)
                .collect(),
            "u+eps v",
        )?;
        let minus = SampledField::new(
            base.grid,
            base.values
                .iter()
                .zip(&direction.values)
                .map(|(u, v)| u - eps * v)
                .collect(),
            "u-eps v",
        )?;
        let fp = eval_functional(functional, &spec.with_component(component, plus)?)?;
        let fm = eval_functional(functional, &spec.with_component(component, minus)?)?;
        Ok((fp - fm) / (2.0 * eps))
    };
    let d1 = diff(1e-3)?;
    let d2 = diff(1e-4)?;
    // centered differences have even error series; step ratio 10
    Ok((100.0 * d2 - d1) / 99.0)
}

/// Pairing `int f(x) v(x) dx` of a derivative field against a direction.
pub fn pair_with_direction(f: &SampledField, v: &SampledField) -> Result<C64> {
    if f.grid != v.grid {
        return Err(Error::GridMismatch("functional pairing"));
    }
    Ok(f
        .values
        .iter()
        .zip(&v.values)
        .map(|(a, b)| a * b)
        .sum::<C64>()
        * f.grid.dx())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{make_grid, standard_potential, GridSpec, PotentialKind};
    use crate::lax::build_qdnls_spec;

    fn grid() -> GridSpec {
        make_grid(16.0, 1024).unwrap()
    }

    fn suite_spec(k: f64) -> LaxSpec {
        let q = standard_potential(PotentialKind::Bump, C64::new(0.10, 0.04), 3.0, -0.5, grid())
            .unwrap();
        let r = standard_potential(PotentialKind::Bump, C64::new(0.08, 0.0), 2.5, 0.6, grid())
            .unwrap();
        build_qdnls_spec(q, r, k).unwrap()
    }

    #[test]
    fn free_greens_matches_resolvent_kernels() {
        let g = grid();
        let z = crate::field::SampledField::zero(g, "0");
        let spec = build_qdnls_spec(z.clone(), z, 2.0).unwrap();
        let jost = solve_jost_set(&spec).unwrap();
        let ev = GreensEvaluator::new(&jost, &spec).unwrap();
        let (xn, yn) = (g.index_of(-1.0), g.index_of(1.0));
        let gm = ev.greens_at(xn, yn).unwrap();
        // x < y: only the (1,1) entry survives: -e^{k(x-y)}
        let expect = -(C64::new(2.0, 0.0) * (g.x(xn) - g.x(yn))).exp();
        assert!((gm[0] - expect).norm() < 1e-12);
        for e in [1usize, 2, 3, 4, 5, 6, 7, 8] {
            assert!(gm[e].norm() < 1e-13);
        }
        let gp = ev.greens_at(yn, xn).unwrap();
        let w = crate::lax::omega();
        let e22 = (2.0 * w.conj() * (g.x(yn) - g.x(xn))).exp();
        let e33 = (2.0 * w * (g.x(yn) - g.x(xn))).exp();
        assert!((gp[4] - e22).norm() < 1e-12);
        assert!((gp[8] - e33).norm() < 1e-12);
        assert!(gp[0].norm() < 1e-13);
        // free jump is exactly the identity
        assert!(greens_jump_check(&ev, g.index_of(0.3)) < 1e-13);
    }

    #[test]
    fn jump_condition_qdnls() {
        let spec = suite_spec(2.0);
        let jost = solve_jost_set(&spec).unwrap();
        let ev = GreensEvaluator::new(&jost, &spec).unwrap();
        let g = spec.grid();
        for y in [-2.5f64, -1.0, 0.0, 0.8, 2.2] {
            let res = greens_jump_check(&ev, g.index_of(y));
            assert!(res < 1e-7, "jump residual {res} at y={y}");
        }
        let res_extrap = greens_jump_check_extrapolated(&ev, g.index_of(0.4));
        assert!(res_extrap < 1e-2, "grid-extrapolated residual {res_extrap}");
    }

    #[test]
    fn jump_condition_random_4x4() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let spec = crate::lax::random_general_spec(&mut rng, 4, grid(), 2.0).unwrap();
        let jost = solve_jost_set(&spec).unwrap();
        let ev = GreensEvaluator::new(&jost, &spec).unwrap();
        let g = spec.grid();
        for y in [-1.0f64, 0.0, 1.0] {
            let res = greens_jump_check(&ev, g.index_of(y));
            assert!(res < 1e-7, "jump residual {res} at y={y}");
        }
    }

    #[test]
    fn greens_columns_solve_the_ode() {
        let spec = suite_spec(2.0);
        let jost = solve_jost_set(&spec).unwrap();
        let ev = GreensEvaluator::new(&jost, &spec).unwrap();
        let y = spec.grid().index_of(0.1);
        let res = greens_column_residual(&ev, y);
        assert!(res < 1e-6, "column residual {res}");
    }

    #[test]
    fn gtilde_dual_construction_agrees() {
        let spec = suite_spec(2.0);
        let (gj, _) = greens_diagonal_jost(&spec).unwrap();
        let gop = greens_diagonal_operator(&spec).unwrap();
        assert_eq!(gj.window, gop.window);
        let mut worst = 0.0f64;
        for node in gj.window.0..=gj.window.1 {
            let a = gj.at(node);
            let b = gop.at(node);
            for e in 0..9 {
                worst = worst.max((a[e] - b[e]).norm());
            }
        }
        assert!(worst < 1e-7, "dual g~ construction differs by {worst}");
        assert!(gop.series_vs_solve < 1e-9, "series vs solve {}", gop.series_vs_solve);
    }

    #[test]
    fn gtilde_vanishes_for_zero_potential() {
        let g = grid();
        let z = crate::field::SampledField::zero(g, "0");
        let spec = build_qdnls_spec(z.clone(), z, 2.0).unwrap();
        let gop = greens_diagonal_operator(&spec).unwrap();
        for v in &gop.values {
            assert!(v.iter().all(|c| c.norm() < 1e-14));
        }
    }

    #[test]
    fn qdnls_explicit_products_match_trace_form() {
        let spec = suite_spec(2.0);
        let (gd, jost) = greens_diagonal_jost(&spec).unwrap();
        let t_inv = transmission_wronskian(&jost, &spec, None).unwrap().t_inv;
        let prods = qdnls_dtinv_products(&jost, 0);
        // d logT^{-1}/dq = T * dT^{-1}/dq must equal -tr(grad_q U0 g~)
        let fld = trace_pairing_field(&spec, &gd, 0, "t").unwrap();
        let mut worst = 0.0f64;
        for node in gd.window.0..=gd.window.1 {
            let lhs = prods[node] / t_inv;
            worst = worst.max((lhs - fld.values[node]).norm());
        }
        assert!(worst < 1e-7, "explicit vs trace-form differ by {worst}");
    }

    #[test]
    fn functional_derivatives_match_fd_oracle() {
        let spec = suite_spec(2.0);
        let v = standard_potential(PotentialKind::Bump, C64::new(1.0, 0.0), 1.5, 0.2, grid())
            .unwrap();
        for component in [0usize, 1] {
            let dt = functional_derivative_t(&spec, component).unwrap();
            let dd = functional_derivative_logdet(&spec, component).unwrap();
            // the two derivative fields agree (the equality theorem's engine)
            let worst = dt
                .values
                .iter()
                .zip(&dd.values)
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max);
            assert!(worst < 1e-6, "component {component}: dT vs ddet {worst}");

            let pair_t = pair_with_direction(&dt, &v).unwrap();
            let fd_t = fd_oracle(Functional::LogTInv, &spec, &v, component).unwrap();
            let rel = (pair_t - fd_t).norm() / fd_t.norm().max(1e-300);
            assert!(rel < 1e-5, "component {component}: logT oracle rel {rel}");

            let pair_d = pair_with_direction(&dd, &v).unwrap();
            let fd_d = fd_oracle(Functional::LogDet2, &spec, &v, component).unwrap();
            let rel = (pair_d - fd_d).norm() / fd_d.norm().max(1e-300);
            assert!(rel < 1e-5, "component {component}: logdet oracle rel {rel}");
        }
    }

    #[test]
    fn fd_oracle_trivials() {
        let g = grid();
        let z = crate::field::SampledField::zero(g, "0");
        let spec = build_qdnls_spec(z.clone(), z.clone(), 2.0).unwrap();
        // v = 0 direction gives 0
        let d = fd_oracle(Functional::LogTInv, &spec, &z, 0).unwrap();
        assert!(d.norm() < 1e-14);
        // quadratic functional at the zero base point: Richardson kills the
        // even error terms, deviation from zero below 1e-9
        let v = standard_potential(PotentialKind::Bump, C64::new(1.0, 0.0), 2.0, 0.0, g).unwrap();
        let d = fd_oracle(Functional::LogDet2, &spec, &v, 0).unwrap();
        assert!(d.norm() < 1e-9, "quadratic base-point FD {d}");
    }
}
