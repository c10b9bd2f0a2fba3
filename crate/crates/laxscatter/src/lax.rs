//! Lax operator specifications: `L = d/dx - kJ - U0(u)` with a trace-free
//! diagonal generator `J` and an off-diagonal polynomial potential matrix.

use crate::error::{Error, Result};
use crate::field::{refine, GridSpec, SampledField, C64};

use rand::Rng;
use serde::{Deserialize, Serialize};

/// One monomial `coeff * u_1^{p_1} ... u_m^{p_m}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Monomial {
    pub coeff: (f64, f64),
    pub powers: Vec<u32>,
}

impl Monomial {
    pub fn coeff_c(&self) -> C64 {
        C64::new(self.coeff.0, self.coeff.1)
    }

    pub fn degree(&self) -> u32 {
        self.powers.iter().sum()
    }

    fn eval(&self, u: &[C64]) -> C64 {
        let mut v = self.coeff_c();
        for (ui, &p) in u.iter().zip(&self.powers) {
            for _ in 0..p {
                v *= ui;
            }
        }
        v
    }

    /// Partial derivative with respect to component `i`.
    fn derivative(&self, i: usize) -> Option<Monomial> {
        let p = *self.powers.get(i)?;
        if p == 0 {
            return None;
        }
        let mut powers = self.powers.clone();
        powers[i] = p - 1;
        let c = self.coeff_c() * p as f64;
        Some(Monomial {
            coeff: (c.re, c.im),
            powers,
        })
    }
}

/// Polynomial in the potential components, stored as a monomial list so that
/// gradients are exact.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Poly {
    pub monomials: Vec<Monomial>,
}

impl Poly {
    pub fn zero() -> Self {
        Poly { monomials: vec![] }
    }

    pub fn linear(component: usize, m: usize, coeff: C64) -> Self {
        let mut powers = vec![0u32; m];
        powers[component] = 1;
        Poly {
            monomials: vec![Monomial {
                coeff: (coeff.re, coeff.im),
                powers,
            }],
        }
    }

    pub fn monomial(powers: Vec<u32>, coeff: C64) -> Self {
        Poly {
            monomials: vec![Monomial {
                coeff: (coeff.re, coeff.im),
                powers,
            }],
        }
    }

    pub fn is_zero(&self) -> bool {
        self.monomials.is_empty()
    }

    pub fn has_constant_term(&self) -> bool {
        self.monomials
            .iter()
            .any(|m| m.degree() == 0 && m.coeff_c().norm() > 0.0)
    }

    pub fn eval(&self, u: &[C64]) -> C64 {
        self.monomials.iter().map(|m| m.eval(u)).sum()
    }

    pub fn derivative(&self, i: usize) -> Poly {
        Poly {
            monomials: self
                .monomials
                .iter()
                .filter_map(|m| m.derivative(i))
                .collect(),
        }
    }
}

/// Trace-free diagonal generator with distinct eigenvalues ordered by
/// decreasing real part, all off the imaginary axis.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiagonalGenerator {
    pub omegas: Vec<(f64, f64)>,
}

impl DiagonalGenerator {
    pub fn new(omegas: Vec<C64>) -> Result<Self> {
        let gen = DiagonalGenerator {
            omegas: omegas.iter().map(|w| (w.re, w.im)).collect(),
        };
        gen.validate()?;
        Ok(gen)
    }

    pub fn omegas_c(&self) -> Vec<C64> {
        self.omegas.iter().map(|&(re, im)| C64::new(re, im)).collect()
    }

    pub fn dim(&self) -> usize {
        self.omegas.len()
    }

    pub fn validate(&self) -> Result<()> {
        let ws = self.omegas_c();
        let n = ws.len();
        if n < 2 {
            return Err(Error::LaxInvariant("need at least 2 eigenvalues".into()));
        }
        let max_abs = ws.iter().map(|w| w.norm()).fold(0.0, f64::max);
        let trace: C64 = ws.iter().sum();
        if trace.norm() > 1e-14 * max_abs.max(1.0) {
            return Err(Error::LaxInvariant(format!(
                "J is not trace-free: tr J = {trace}"
            )));
        }
        for i in 0..n {
            if ws[i].re == 0.0 {
                return Err(Error::LaxInvariant(format!(
                    "Re(omega_{}) = 0: eigenvalue on the imaginary axis",
                    i + 1
                )));
            }
            for j in (i + 1)..n {
                if (ws[i] - ws[j]).norm() < 1e-12 * max_abs.max(1.0) {
                    return Err(Error::LaxInvariant("eigenvalues not distinct".into()));
                }
            }
        }
        // ordering: Re w_1 >= ... >= Re w_l > 0 > Re w_{l+1} >= ... >= Re w_n
        // (ties in the real part are allowed up to rounding)
        for w in ws.windows(2) {
            if w[1].re - w[0].re > 1e-12 * max_abs.max(1.0) {
                return Err(Error::LaxInvariant(
                    "eigenvalues not ordered by decreasing real part".into(),
                ));
            }
        }
        Ok(())
    }

    /// Number `l` of eigenvalues with positive real part (left Jost count).
    pub fn split_index(&self) -> usize {
        self.omegas_c().iter().filter(|w| w.re > 0.0).count()
    }
}

/// Off-diagonal matrix of polynomials in the potential components,
/// vanishing at `u = 0`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PotentialMatrix {
    pub dim: usize,
    pub n_components: usize,
    /// Row-major `dim x dim` entries; diagonal entries must be zero polynomials.
    pub entries: Vec<Poly>,
}

impl PotentialMatrix {
    pub fn new(dim: usize, n_components: usize, entries: Vec<Poly>) -> Result<Self> {
        let m = PotentialMatrix {
            dim,
            n_components,
            entries,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn entry(&self, i: usize, j: usize) -> &Poly {
        &self.entries[i * self.dim + j]
    }

    pub fn validate(&self) -> Result<()> {
        if self.entries.len() != self.dim * self.dim {
            return Err(Error::LaxInvariant("entry count != dim^2".into()));
        }
        for i in 0..self.dim {
            if !self.entry(i, i).is_zero() {
                return Err(Error::LaxInvariant(format!(
                    "diagonal entry ({},{}) is not the zero polynomial",
                    i + 1,
                    i + 1
                )));
            }
        }
        for e in &self.entries {
            if e.has_constant_term() {
                return Err(Error::LaxInvariant(
                    "U0 has a zeroth-order term: U0(0) != 0".into(),
                ));
            }
            for m in &e.monomials {
                if m.powers.len() != self.n_components {
                    return Err(Error::LaxInvariant(
                        "monomial power vector length != number of components".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn eval(&self, u: &[C64]) -> Vec<C64> {
        self.entries.iter().map(|p| p.eval(u)).collect()
    }

    /// Matrix of partial derivatives with respect to component `i`.
    pub fn gradient(&self, i: usize) -> PotentialMatrix {
        PotentialMatrix {
            dim: self.dim,
            n_components: self.n_components,
            entries: self.entries.iter().map(|p| p.derivative(i)).collect(),
        }
    }
}

/// A fully validated Lax operator specification.
#[derive(Debug, Clone)]
pub struct LaxSpec {
    pub generator: DiagonalGenerator,
    pub potential: PotentialMatrix,
    pub k: f64,
    pub fields: Vec<SampledField>,
    /// Potential components band-limit-refined 2x, for half-step evaluation.
    fields_fine: Vec<SampledField>,
}

impl LaxSpec {
    pub fn new(
        generator: DiagonalGenerator,
        potential: PotentialMatrix,
        fields: Vec<SampledField>,
        k: f64,
    ) -> Result<Self> {
        if !(k > 0.0) {
            return Err(Error::BadSpectralParameter(k));
        }
        generator.validate()?;
        potential.validate()?;
        if potential.dim != generator.dim() {
            return Err(Error::LaxInvariant("U0 dimension != J dimension".into()));
        }
        if fields.len() != potential.n_components {
            return Err(Error::LaxInvariant(
                "field count != number of potential components".into(),
            ));
        }
        let grid = fields
            .first()
            .ok_or_else(|| Error::LaxInvariant("no potential components".into()))?
            .grid;
        if fields.iter().any(|f| f.grid != grid) {
            return Err(Error::GridMismatch("potential components on different grids"));
        }
        let fields_fine = fields.iter().map(|f| refine(f, 2)).collect();
        Ok(LaxSpec {
            generator,
            potential,
            k,
            fields,
            fields_fine,
        })
    }

    pub fn dim(&self) -> usize {
        self.generator.dim()
    }

    pub fn grid(&self) -> GridSpec {
        self.fields[0].grid
    }

    pub fn split_index(&self) -> usize {
        self.generator.split_index()
    }

    /// Component values at base-grid node `j`.
    pub fn u_at(&self, j: usize) -> Vec<C64> {
        self.fields.iter().map(|f| f.values[j]).collect()
    }

    /// Component values at half-grid node (index on the 2x refined grid).
    pub fn u_at_fine(&self, jf: usize) -> Vec<C64> {
        self.fields_fine.iter().map(|f| f.values[jf]).collect()
    }

    /// Pointwise matrix `U0(u(x_j))`; diagonal exactly zero.
    pub fn evaluate_u0(&self, j: usize) -> Vec<C64> {
        self.potential.eval(&self.u_at(j))
    }

    pub fn evaluate_u0_fine(&self, jf: usize) -> Vec<C64> {
        self.potential.eval(&self.u_at_fine(jf))
    }

    /// Pointwise matrix `(d/du_i) U0` at `u(x_j)`.
    pub fn nabla_u0(&self, i: usize, j: usize) -> Result<Vec<C64>> {
        if i >= self.potential.n_components {
            return Err(Error::ComponentOutOfRange(i, self.potential.n_components));
        }
        Ok(self.potential.gradient(i).eval(&self.u_at(j)))
    }

    /// Bounding index window of all component supports, or None when `u = 0`.
    pub fn support_window(&self) -> Option<(usize, usize)> {
        let mut lo = usize::MAX;
        let mut hi = 0usize;
        let mut any = false;
        for f in &self.fields {
            if let Some((a, b)) = f.support_bounds() {
                lo = lo.min(a);
                hi = hi.max(b);
                any = true;
            }
        }
        any.then_some((lo, hi))
    }

    /// Checks that all supports stay at least `margin` inside the grid.
    pub fn require_compact_support(&self, margin: f64) -> Result<(usize, usize)> {
        let grid = self.grid();
        let (lo, hi) = match self.support_window() {
            Some(w) => w,
            // zero potential: any window works; use the middle node
            None => (grid.n_points / 2, grid.n_points / 2),
        };
        if grid.x(lo) < -grid.half_width + margin || grid.x(hi) > grid.half_width - margin {
            return Err(Error::SupportTouchesEdge);
        }
        Ok((lo, hi))
    }

    /// Rebuild with one component replaced (used by functional-derivative probes).
    pub fn with_component(&self, i: usize, f: SampledField) -> Result<LaxSpec> {
        let mut fields = self.fields.clone();
        if i >= fields.len() {
            return Err(Error::ComponentOutOfRange(i, fields.len()));
        }
        fields[i] = f;
        LaxSpec::new(
            self.generator.clone(),
            self.potential.clone(),
            fields,
            self.k,
        )
    }

    pub fn with_k(&self, k: f64) -> Result<LaxSpec> {
        LaxSpec::new(
            self.generator.clone(),
            self.potential.clone(),
            self.fields.clone(),
            k,
        )
    }

    /// Max over grid nodes of `|tr(kJ + U0(u(x)))|`; vanishes structurally.
    pub fn trace_residual(&self) -> f64 {
        let ws = self.generator.omegas_c();
        let n = self.dim();
        let tr_j: C64 = ws.iter().sum();
        (0..self.grid().n_points)
            .map(|j| {
                let u0 = self.evaluate_u0(j);
                let tr_u0: C64 = (0..n).map(|i| u0[i * n + i]).sum();
                (self.k * tr_j + tr_u0).norm()
            })
            .fold(0.0, f64::max)
    }
}

/// Third root of unity `omega = e^{2 pi i / 3}`.
pub fn omega() -> C64 {
    C64::from_polar(1.0, 2.0 * std::f64::consts::PI / 3.0)
}

/// The 3x3 quadratic-dNLS spec: `J = diag(1, w^2, w)` and the cyclic
/// off-diagonal potential with rows `(0 q r; r 0 q; q r 0)`.
pub fn build_qdnls_spec(q: SampledField, r: SampledField, k: f64) -> Result<LaxSpec> {
    if q.grid != r.grid {
        return Err(Error::GridMismatch("q and r on different grids"));
    }
    let w = omega();
    // w^2 = conj(w) exactly on the unit circle at angle 2 pi / 3
    let generator = DiagonalGenerator::new(vec![C64::new(1.0, 0.0), w.conj(), w])?;
    let one = C64::new(1.0, 0.0);
    let qp = |_: ()| Poly::linear(0, 2, one);
    let rp = |_: ()| Poly::linear(1, 2, one);
    let entries = vec![
        Poly::zero(),
        qp(()),
        rp(()),
        rp(()),
        Poly::zero(),
        qp(()),
        qp(()),
        rp(()),
        Poly::zero(),
    ];
    let potential = PotentialMatrix::new(3, 2, entries)?;
    LaxSpec::new(generator, potential, vec![q, r], k)
}

/// General N x N spec from explicit structural data.
pub fn build_general_spec(
    generator: DiagonalGenerator,
    potential: PotentialMatrix,
    fields: Vec<SampledField>,
    k: f64,
) -> Result<LaxSpec> {
    LaxSpec::new(generator, potential, fields, k)
}

/// Seeded random spec satisfying the structural assumptions, used for the
/// general N x N verification suite. `dim` must be 2 or 4.
pub fn random_general_spec<R: Rng>(
    rng: &mut R,
    dim: usize,
    grid: GridSpec,
    k: f64,
) -> Result<LaxSpec> {
    assert!(dim == 2 || dim == 4, "random specs support dim 2 and 4");
    let omegas: Vec<C64> = if dim == 2 {
        let a = rng.gen_range(0.6..1.1);
        let b = rng.gen_range(-0.4..0.4);
        let w = C64::new(a, b);
        vec![w, -w]
    } else {
        // small gaps between same-sign real parts keep backward marching benign
        loop {
            let a1 = rng.gen_range(0.55..0.75);
            let a2 = rng.gen_range(0.35..0.50);
            let a3 = -rng.gen_range(0.35..0.50);
            let b1 = rng.gen_range(-0.3..0.3);
            let b2 = rng.gen_range(-0.3..0.3);
            let b3 = rng.gen_range(-0.3..0.3);
            let w1 = C64::new(a1, b1);
            let w2 = C64::new(a2, b2);
            let w3 = C64::new(a3, b3);
            let w4 = -(w1 + w2 + w3);
            if w4.re < w3.re - 0.05 && w4.re > -0.85 {
                break vec![w1, w2, w3, w4];
            }
        }
    };
    let generator = DiagonalGenerator::new(omegas)?;

    let m = 2usize; // two potential components
    let mut entries = Vec::with_capacity(dim * dim);
    for i in 0..dim {
        for j in 0..dim {
            if i == j {
                entries.push(Poly::zero());
                continue;
            }
            let mut poly = Poly::zero();
            for comp in 0..m {
                let c = C64::new(rng.gen_range(-0.8..0.8), rng.gen_range(-0.8..0.8));
                poly.monomials
                    .extend(Poly::linear(comp, m, c).monomials);
            }
            // occasional quadratic term exercises the symbolic gradient
            if rng.gen_bool(0.4) {
                let mut powers = vec![0u32; m];
                powers[rng.gen_range(0..m)] = 2;
                let c = C64::new(rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5));
                poly.monomials.extend(Poly::monomial(powers, c).monomials);
            }
            entries.push(poly);
        }
    }
    let potential = PotentialMatrix::new(dim, m, entries)?;

    let fields = (0..m)
        .map(|_| {
            let ampl = C64::new(
                rng.gen_range(-0.06..0.06),
                rng.gen_range(-0.06..0.06),
            );
            let width = rng.gen_range(1.4..2.2);
            let center = rng.gen_range(-1.2..1.2);
            crate::field::standard_potential(
                crate::field::PotentialKind::Bump,
                ampl,
                width,
                center,
                grid,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    LaxSpec::new(generator, potential, fields, k)
}

/// On-disk form of a spec: eigenvalues, polynomial entries, k and field files.
#[derive(Debug, Serialize, Deserialize)]
pub struct SpecFile {
    pub omegas: Vec<(f64, f64)>,
    pub u0: Vec<Poly>,
    pub n_components: usize,
    pub k: f64,
    pub fields: Vec<String>,
}

impl SpecFile {
    pub fn from_spec(spec: &LaxSpec, field_paths: Vec<String>) -> Self {
        SpecFile {
            omegas: spec.generator.omegas.clone(),
            u0: spec.potential.entries.clone(),
            n_components: spec.potential.n_components,
            k: spec.k,
            fields: field_paths,
        }
    }

    pub fn into_spec(self, grid: GridSpec, base: &std::path::Path) -> Result<LaxSpec> {
        let dim = self.omegas.len();
        let generator = DiagonalGenerator::new(
            self.omegas.iter().map(|&(a, b)| C64::new(a, b)).collect(),
        )?;
        let potential = PotentialMatrix::new(dim, self.n_components, self.u0)?;
        let fields = self
            .fields
            .iter()
            .map(|p| SampledField::from_csv(grid, &base.join(p)))
            .collect::<Result<Vec<_>>>()?;
        LaxSpec::new(generator, potential, fields, self.k)
    }
}

pub fn matmul_small(a: &[C64], b: &[C64], n: usize) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); n * n];
    for i in 0..n {
        for l in 0..n {
            let ail = a[i * n + l];
            if ail.norm_sqr() == 0.0 {
                continue;
            }
            for j in 0..n {
                out[i * n + j] += ail * b[l * n + j];
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{make_grid, standard_potential, PotentialKind};
    use approx::assert_abs_diff_eq;

    fn grid() -> GridSpec {
        make_grid(16.0, 64).unwrap()
    }

    fn bump(a: f64, w: f64, c: f64) -> SampledField {
        standard_potential(PotentialKind::Bump, C64::new(a, 0.0), w, c, grid()).unwrap()
    }

    #[test]
    fn qdnls_generator_structure() {
        let spec = build_qdnls_spec(bump(0.1, 2.0, 0.0), bump(0.1, 2.0, 0.0), 1.0).unwrap();
        let ws = spec.generator.omegas_c();
        let tr: C64 = ws.iter().sum();
        assert!(tr.norm() < 1e-15);
        assert_abs_diff_eq!(ws[1].re, -0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(ws[2].re, -0.5, epsilon = 1e-15);
        assert_eq!(spec.split_index(), 1);
    }

    #[test]
    fn zero_potential_evaluates_to_zero_matrix() {
        let z = SampledField::zero(grid(), "0");
        let spec = build_qdnls_spec(z.clone(), z, 1.0).unwrap();
        let u0 = spec.evaluate_u0(10);
        assert!(u0.iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn qdnls_pointwise_matrix() {
        // constant-valued check via direct polynomial evaluation
        let spec = build_qdnls_spec(bump(0.1, 2.0, 0.0), bump(0.1, 2.0, 0.0), 1.0).unwrap();
        let q = C64::new(2.0, 0.0);
        let r = C64::new(0.0, 3.0);
        let m = spec.potential.eval(&[q, r]);
        let expect = [
            C64::new(0.0, 0.0), q, r,
            r, C64::new(0.0, 0.0), q,
            q, r, C64::new(0.0, 0.0),
        ];
        for (a, b) in m.iter().zip(expect.iter()) {
            assert!((a - b).norm() < 1e-15);
        }
    }

    #[test]
    fn nabla_of_linear_entries_is_constant() {
        let spec = build_qdnls_spec(bump(0.1, 2.0, 0.0), bump(0.05, 2.0, 0.0), 1.0).unwrap();
        let g = spec.nabla_u0(0, 30).unwrap();
        let expect = [0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0];
        for (a, b) in g.iter().zip(expect.iter()) {
            assert!((a - C64::new(*b, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn quadratic_entry_derivative() {
        let poly = Poly::monomial(vec![2], C64::new(1.0, 0.0));
        let d = poly.derivative(0);
        let v = d.eval(&[C64::new(2.0, 0.0)]);
        assert_abs_diff_eq!(v.re, 4.0, epsilon = 1e-15);
        let val = poly.eval(&[C64::new(2.0, 0.0)]);
        assert_abs_diff_eq!(val.re, 4.0, epsilon = 1e-15);
    }

    #[test]
    fn rejects_imaginary_axis_eigenvalues() {
        let err = DiagonalGenerator::new(vec![C64::new(0.0, 1.0), C64::new(0.0, -1.0)]);
        match err {
            Err(Error::LaxInvariant(msg)) => assert!(msg.contains("Re(omega")),
            other => panic!("expected LaxInvariant, got {other:?}"),
        }
    }

    #[test]
    fn rejects_repeated_eigenvalues() {
        let err = DiagonalGenerator::new(vec![
            C64::new(1.0, 0.0),
            C64::new(1.0, 0.0),
            C64::new(-2.0, 0.0),
        ]);
        match err {
            Err(Error::LaxInvariant(msg)) => assert!(msg.contains("distinct")),
            other => panic!("expected LaxInvariant, got {other:?}"),
        }
    }

    #[test]
    fn akns_type_2x2_is_valid() {
        let g = DiagonalGenerator::new(vec![C64::new(1.0, 0.0), C64::new(-1.0, 0.0)]).unwrap();
        let one = C64::new(1.0, 0.0);
        let entries = vec![
            Poly::zero(),
            Poly::linear(0, 2, one),
            Poly::linear(1, 2, one),
            Poly::zero(),
        ];
        let pot = PotentialMatrix::new(2, 2, entries).unwrap();
        let spec = build_general_spec(
            g,
            pot,
            vec![bump(0.1, 2.0, 0.0), bump(0.1, 2.0, 0.5)],
            1.0,
        )
        .unwrap();
        assert_eq!(spec.split_index(), 1);
    }

    #[test]
    fn pointwise_trace_free() {
        let spec = build_qdnls_spec(bump(0.1, 2.0, 0.3), bump(0.08, 2.0, -0.4), 2.0).unwrap();
        assert!(spec.trace_residual() < 1e-13);
    }

    #[test]
    fn random_specs_validate_and_split() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let g = make_grid(16.0, 256).unwrap();
        for dim in [2usize, 4] {
            for _ in 0..5 {
                let spec = random_general_spec(&mut rng, dim, g, 2.0).unwrap();
                assert_eq!(spec.dim(), dim);
                assert_eq!(spec.split_index(), dim / 2);
                assert!(spec.trace_residual() < 1e-13);
            }
        }
    }

    #[test]
    fn fd_check_of_symbolic_gradient() {
        // centered finite differences agree with the monomial gradient to O(eps^2)
        let mut entries = Vec::new();
        for i in 0..2 {
            for j in 0..2 {
                if i == j {
                    entries.push(Poly::zero());
                } else {
                    let mut p = Poly::linear(0, 2, C64::new(0.3, -0.2));
                    p.monomials
                        .extend(Poly::monomial(vec![2, 0], C64::new(0.5, 0.1)).monomials);
                    p.monomials
                        .extend(Poly::monomial(vec![1, 1], C64::new(-0.4, 0.0)).monomials);
                    entries.push(p);
                }
            }
        }
        let pot = PotentialMatrix::new(2, 2, entries).unwrap();
        let u = [C64::new(0.4, 0.1), C64::new(-0.2, 0.3)];
        let v = C64::new(0.7, -0.5);
        for i in 0..2 {
            let grad = pot.gradient(i);
            for eps in [1e-4, 1e-5] {
                let mut up = u;
                let mut um = u;
                up[i] += eps * v;
                um[i] -= eps * v;
                let fp = pot.eval(&up);
                let fm = pot.eval(&um);
                let gv = grad.eval(&u);
                for idx in 0..4 {
                    let fd = (fp[idx] - fm[idx]) / (2.0 * eps);
                    let exact = gv[idx] * v;
                    assert!(
                        (fd - exact).norm() < 20.0 * eps,
                        "entry {idx}: fd {fd} vs {exact} at eps={eps}"
                    );
                }
            }
        }
    }
}
