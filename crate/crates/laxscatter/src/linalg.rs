//! Dense complex linear algebra helpers and Gauss-Legendre nodes.

use crate::field::C64;
use faer::linalg::solvers::Solve;
use faer::Mat;

/// Row-major dense complex matrix used for kernel assembly.
#[derive(Debug, Clone)]
pub struct CMat {
    pub n: usize,
    pub data: Vec<C64>,
}

impl CMat {
    pub fn zeros(n: usize) -> Self {
        CMat {
            n,
            data: vec![C64::new(0.0, 0.0); n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = CMat::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_rows(n: usize, data: Vec<C64>) -> Self {
        assert_eq!(data.len(), n * n);
        CMat { n, data }
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> C64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn at_mut(&mut self, i: usize, j: usize) -> &mut C64 {
        &mut self.data[i * self.n + j]
    }

    pub fn trace(&self) -> C64 {
        (0..self.n).map(|i| self.at(i, i)).sum()
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.data.iter().map(|v| v.norm_sqr()).sum()
    }

    pub fn scale_columns(&mut self, d: &[C64]) {
        for i in 0..self.n {
            for j in 0..self.n {
                self.data[i * self.n + j] *= d[j];
            }
        }
    }

    fn to_faer(&self) -> Mat<faer::c64> {
        Mat::from_fn(self.n, self.n, |i, j| {
            let v = self.at(i, j);
            faer::c64::new(v.re, v.im)
        })
    }

    fn from_faer(m: &Mat<faer::c64>) -> Self {
        let n = m.nrows();
        let mut out = CMat::zeros(n);
        for i in 0..n {
            for j in 0..n {
                let v = m[(i, j)];
                *out.at_mut(i, j) = C64::new(v.re, v.im);
            }
        }
        out
    }

    pub fn matmul(&self, other: &CMat) -> CMat {
        assert_eq!(self.n, other.n);
        let prod = self.to_faer() * other.to_faer();
        CMat::from_faer(&prod)
    }

    /// Eigenvalues of the (general complex) matrix.
    pub fn eigenvalues(&self) -> Vec<C64> {
        let ev = self
            .to_faer()
            .eigenvalues()
            .expect("eigenvalue computation failed");
        ev.into_iter().map(|v| C64::new(v.re, v.im)).collect()
    }

    pub fn determinant(&self) -> C64 {
        let d = self.to_faer().determinant();
        C64::new(d.re, d.im)
    }

    /// Solve `self * X = B` for all columns of `B` (LU with partial pivoting).
    pub fn solve_many(&self, b: &CMat) -> CMat {
        let lu = self.to_faer().partial_piv_lu();
        let x = lu.solve(b.to_faer());
        CMat::from_faer(&x)
    }

    /// Factor once, solve for many right-hand sides.
    pub fn solve_columns(&self, cols: &[Vec<C64>]) -> Vec<Vec<C64>> {
        let lu = self.to_faer().partial_piv_lu();
        let rhs = Mat::from_fn(self.n, cols.len(), |i, j| {
            let v = cols[j][i];
            faer::c64::new(v.re, v.im)
        });
        let x = lu.solve(rhs);
        (0..cols.len())
            .map(|j| {
                (0..self.n)
                    .map(|i| {
                        let v = x[(i, j)];
                        C64::new(v.re, v.im)
                    })
                    .collect()
            })
            .collect()
    }

    pub fn solve_vec(&self, b: &[C64]) -> Vec<C64> {
        assert_eq!(b.len(), self.n);
        let rhs = Mat::from_fn(self.n, 1, |i, _| faer::c64::new(b[i].re, b[i].im));
        let lu = self.to_faer().partial_piv_lu();
        let x = lu.solve(rhs);
        (0..self.n)
            .map(|i| {
                let v = x[(i, 0)];
                C64::new(v.re, v.im)
            })
            .collect()
    }
}

/// `log det(I + A)` summed over LU eigen-free route is unstable for phases;
/// here: principal-branch log of each `1 + lambda_i` summed over eigenvalues.
pub fn log_det_one_plus_from_eigs(eigs: &[C64]) -> C64 {
    eigs.iter().map(|l| (C64::new(1.0, 0.0) + l).ln()).sum()
}

/// Gauss-Legendre nodes and weights on `[-1, 1]` by Newton iteration on the
/// Legendre recurrence.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        // Tricomi initial guess
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let pk = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = pk;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn determinant_of_small_matrix() {
        let mut m = CMat::zeros(2);
        *m.at_mut(0, 0) = C64::new(1.0, 0.0);
        *m.at_mut(0, 1) = C64::new(2.0, 1.0);
        *m.at_mut(1, 0) = C64::new(0.0, -1.0);
        *m.at_mut(1, 1) = C64::new(3.0, 0.0);
        // det = 3 - (2+i)(-i) = 3 - (-2i + 1) = 2 + 2i
        let d = m.determinant();
        assert_abs_diff_eq!(d.re, 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(d.im, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn eigenvalue_sum_equals_trace() {
        let n = 40;
        let m = CMat::from_rows(
            n,
            (0..n * n)
                .map(|i| C64::new((i as f64 * 0.37).sin() / 7.0, (i as f64 * 0.13).cos() / 9.0))
                .collect(),
        );
        let ev = m.eigenvalues();
        let s: C64 = ev.iter().sum();
        let t = m.trace();
        assert!((s - t).norm() < 1e-10);
    }

    #[test]
    fn solve_roundtrip() {
        let n = 30;
        let mut a = CMat::identity(n);
        for i in 0..n {
            for j in 0..n {
                *a.at_mut(i, j) += C64::new((i as f64 - j as f64) * 0.01, 0.005 * (i + j) as f64);
            }
        }
        let b: Vec<C64> = (0..n).map(|i| C64::new(i as f64, -(i as f64) / 2.0)).collect();
        let x = a.solve_vec(&b);
        for i in 0..n {
            let mut ax = C64::new(0.0, 0.0);
            for j in 0..n {
                ax += a.at(i, j) * x[j];
            }
            assert!((ax - b[i]).norm() < 1e-10);
        }
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(12);
        // int_{-1}^{1} x^{10} dx = 2/11
        let v: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(10)).sum();
        assert_abs_diff_eq!(v, 2.0 / 11.0, epsilon = 1e-13);
        let s: f64 = w.iter().sum();
        assert_abs_diff_eq!(s, 2.0, epsilon = 1e-13);
    }
}
