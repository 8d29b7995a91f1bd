//! Balanced solutions gap by gap: transfer matrices, the inhomogeneous gap
//! integrals, path materialization and residual checks.

use crate::error::{Error, Result};
use crate::linalg::{self, exp_and_integral};
use crate::model::{jump_matrices, Location, SystemSpec};
use crate::{CMat, CVec, C64};

/// Fundamental matrix of `J u' + (Q − λ W) u = 0` on one gap, normalized to
/// the identity at the left end.
#[derive(Debug, Clone)]
pub struct GapTransfer {
    pub gap: usize,
    pub lambda: C64,
    /// `A = J⁻¹ (λ W − Q)`.
    pub generator: CMat,
    pub start: f64,
    pub len: f64,
}

impl GapTransfer {
    pub fn new(spec: &SystemSpec, gap: usize, lambda: C64) -> Self {
        let g = &spec.gaps()[gap];
        let generator = spec.j_inv() * (&g.w * lambda - &g.q);
        let (start, end) = spec.gap_bounds(gap);
        GapTransfer {
            gap,
            lambda,
            generator,
            start,
            len: end - start,
        }
    }

    /// `U(x)` for an offset `s = x − x_j` into the gap.
    pub fn at_offset(&self, s: f64) -> CMat {
        (&self.generator * C64::new(s, 0.0)).exp()
    }

    /// Left limit at the right end of the gap.
    pub fn end(&self) -> CMat {
        self.at_offset(self.len)
    }
}

/// `U_j(x, λ)` for `x` in the closed gap `[x_j, x_{j+1}]`.
pub fn transfer_matrix(spec: &SystemSpec, gap: usize, lambda: C64, x: f64) -> Result<CMat> {
    let (lo, hi) = spec.gap_bounds(gap);
    if !(x >= lo && x <= hi) {
        return Err(Error::OutOfDomain { x, a: lo, b: hi });
    }
    Ok(GapTransfer::new(spec, gap, lambda).at_offset(x - lo))
}

/// Piecewise-constant right-hand side: one vector per gap, one per atom.
#[derive(Debug, Clone, PartialEq)]
pub struct RightHandSide {
    pub gaps: Vec<CVec>,
    pub atoms: Vec<CVec>,
}

impl RightHandSide {
    pub fn zeros(spec: &SystemSpec) -> Self {
        let n = spec.n();
        RightHandSide {
            gaps: vec![CVec::zeros(n); spec.num_atoms() + 1],
            atoms: vec![CVec::zeros(n); spec.num_atoms()],
        }
    }

    /// Right-hand side supported at the atoms only.
    pub fn atomic(spec: &SystemSpec, atoms: Vec<CVec>) -> Self {
        RightHandSide {
            gaps: vec![CVec::zeros(spec.n()); spec.num_atoms() + 1],
            atoms,
        }
    }

    pub fn check_shape(&self, spec: &SystemSpec) -> Result<()> {
        let n = spec.n();
        if self.gaps.len() != spec.num_atoms() + 1
            || self.atoms.len() != spec.num_atoms()
            || self.gaps.iter().chain(&self.atoms).any(|v| v.len() != n)
        {
            return Err(Error::Shape("right-hand side does not match the partition".into()));
        }
        Ok(())
    }

    pub fn scale(&self, s: C64) -> Self {
        RightHandSide {
            gaps: self.gaps.iter().map(|v| v * s).collect(),
            atoms: self.atoms.iter().map(|v| v * s).collect(),
        }
    }

    pub fn axpy(&mut self, s: C64, other: &RightHandSide) {
        for (a, b) in self.gaps.iter_mut().zip(&other.gaps) {
            *a += b * s;
        }
        for (a, b) in self.atoms.iter_mut().zip(&other.atoms) {
            *a += b * s;
        }
    }

    pub fn is_zero(&self) -> bool {
        self.gaps.iter().chain(&self.atoms).all(|v| v.iter().all(|z| z.norm() == 0.0))
    }
}

/// Partial gap integral `∫_{(x_j, x_j + s)} U_j(·, λ̄)* W f_j`.
pub fn gap_integral_to(spec: &SystemSpec, gap: usize, lambda: C64, f: &RightHandSide, s: f64) -> CVec {
    let g = &spec.gaps()[gap];
    let wf = &g.w * &f.gaps[gap];
    if wf.iter().all(|z| z.norm() == 0.0) || s == 0.0 {
        return CVec::zeros(spec.n());
    }
    let conj_gen = GapTransfer::new(spec, gap, lambda.conj()).generator.adjoint();
    let (_, phi1) = exp_and_integral(&conj_gen, s);
    phi1 * wf
}

/// `I_j(f, λ) = ∫_{(x_j, x_{j+1})} U_j(·, λ̄)* w f`.
pub fn gap_integral(spec: &SystemSpec, gap: usize, lambda: C64, f: &RightHandSide) -> CVec {
    gap_integral_to(spec, gap, lambda, f, spec.gap_len(gap))
}

/// One-sided and balanced values at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomTriple {
    pub minus: CVec,
    pub mid: CVec,
    pub plus: CVec,
}

impl AtomTriple {
    fn constant(v: CVec) -> Self {
        AtomTriple {
            minus: v.clone(),
            mid: v.clone(),
            plus: v,
        }
    }
}

/// A balanced piecewise solution candidate, determined by the right limits
/// `c_j = u⁺(x_j)` at the left end of every gap.
#[derive(Debug, Clone, PartialEq)]
pub struct BalancedPath {
    pub lambda: C64,
    pub c: Vec<CVec>,
    pub rhs: RightHandSide,
    pub triples: Vec<AtomTriple>,
    /// `u⁻(b)`.
    pub end: CVec,
}

/// Materializes the path through all atoms. No consistency check is done here.
pub fn propagate_path(spec: &SystemSpec, lambda: C64, f: &RightHandSide, c: Vec<CVec>) -> Result<BalancedPath> {
    f.check_shape(spec)?;
    let n = spec.n();
    if c.len() != spec.num_atoms() + 1 || c.iter().any(|v| v.len() != n) {
        return Err(Error::Shape(format!(
            "expected {} initial vectors of length {n}",
            spec.num_atoms() + 1
        )));
    }
    let left_limits: Vec<CVec> = (0..=spec.num_atoms())
        .map(|j| {
            let t = GapTransfer::new(spec, j, lambda);
            let inner = &c[j] + spec.j_inv() * gap_integral(spec, j, lambda, f);
            t.end() * inner
        })
        .collect();
    let triples = (0..spec.num_atoms())
        .map(|k| {
            let minus = left_limits[k].clone();
            let plus = c[k + 1].clone();
            let mid = (&minus + &plus) * C64::new(0.5, 0.0);
            AtomTriple { minus, mid, plus }
        })
        .collect();
    Ok(BalancedPath {
        lambda,
        end: left_limits[spec.num_atoms()].clone(),
        c,
        rhs: f.clone(),
        triples,
    })
}

/// Same as [`propagate_path`] with `ũ = (c_0, …, c_N)` stacked.
pub fn propagate_stacked(spec: &SystemSpec, lambda: C64, f: &RightHandSide, stacked: &CVec) -> Result<BalancedPath> {
    if stacked.len() != spec.n() * (spec.num_atoms() + 1) {
        return Err(Error::Shape("stacked initial vector has the wrong length".into()));
    }
    propagate_path(spec, lambda, f, linalg::split_vector(stacked, spec.n()))
}

impl BalancedPath {
    pub fn zero(spec: &SystemSpec, lambda: C64) -> Self {
        let n = spec.n();
        let z = CVec::zeros(n);
        BalancedPath {
            lambda,
            c: vec![z.clone(); spec.num_atoms() + 1],
            rhs: RightHandSide::zeros(spec),
            triples: vec![AtomTriple::constant(z.clone()); spec.num_atoms()],
            end: z,
        }
    }

    pub fn stacked(&self) -> CVec {
        linalg::stack_vectors(&self.c)
    }

    /// `û = (u(x_1), …, u(x_N))`: balanced values at the atoms.
    pub fn hat(&self) -> CVec {
        let mids: Vec<CVec> = self.triples.iter().map(|t| t.mid.clone()).collect();
        linalg::stack_vectors(&mids)
    }

    /// Value at offset `s` into gap `j`.
    pub fn value_in_gap(&self, spec: &SystemSpec, gap: usize, s: f64) -> CVec {
        let t = GapTransfer::new(spec, gap, self.lambda);
        let inner = &self.c[gap] + spec.j_inv() * gap_integral_to(spec, gap, self.lambda, &self.rhs, s);
        t.at_offset(s) * inner
    }

    /// `(u⁻(x), u#(x), u⁺(x))`; at the endpoints only the one-sided value exists.
    pub fn evaluate(&self, spec: &SystemSpec, x: f64) -> Result<AtomTriple> {
        Ok(match spec.locate(x)? {
            Location::LeftEnd => AtomTriple::constant(self.c[0].clone()),
            Location::RightEnd => AtomTriple::constant(self.end.clone()),
            Location::Atom(k) => self.triples[k].clone(),
            Location::Gap(j) => {
                let (lo, _) = spec.gap_bounds(j);
                AtomTriple::constant(self.value_in_gap(spec, j, x - lo))
            }
        })
    }

    /// `∫` of the path over gap `j`, in closed form.
    pub fn gap_value_integral(&self, spec: &SystemSpec, gap: usize) -> CVec {
        // u(x_j + s) = e^{sA} c + Φ1(s) J⁻¹ W f  (using U(t, λ̄)* = J U(t, λ)⁻¹ J⁻¹)
        let t = GapTransfer::new(spec, gap, self.lambda);
        let vl = linalg::van_loan(&t.generator, t.len);
        let g = &spec.gaps()[gap];
        let forcing = spec.j_inv() * (&g.w * &self.rhs.gaps[gap]);
        &vl.phi1 * &self.c[gap] + &vl.phi2 * forcing
    }

    pub fn scale(&self, s: C64) -> Self {
        BalancedPath {
            lambda: self.lambda,
            c: self.c.iter().map(|v| v * s).collect(),
            rhs: self.rhs.scale(s),
            triples: self
                .triples
                .iter()
                .map(|t| AtomTriple {
                    minus: &t.minus * s,
                    mid: &t.mid * s,
                    plus: &t.plus * s,
                })
                .collect(),
            end: &self.end * s,
        }
    }

    /// `self += s * other`; both paths must share `λ` and the partition.
    pub fn axpy(&mut self, s: C64, other: &BalancedPath) -> Result<()> {
        if self.lambda != other.lambda || self.c.len() != other.c.len() {
            return Err(Error::Shape("paths with different lambda or partition".into()));
        }
        for (a, b) in self.c.iter_mut().zip(&other.c) {
            *a += b * s;
        }
        self.rhs.axpy(s, &other.rhs);
        for (a, b) in self.triples.iter_mut().zip(&other.triples) {
            a.minus += &b.minus * s;
            a.mid += &b.mid * s;
            a.plus += &b.plus * s;
        }
        self.end += &other.end * s;
        Ok(())
    }

    /// `Σ coeffs[i] paths[i]`.
    pub fn combine(spec: &SystemSpec, lambda: C64, paths: &[BalancedPath], coeffs: &[C64]) -> Result<Self> {
        let mut out = BalancedPath::zero(spec, lambda);
        for (p, &s) in paths.iter().zip(coeffs) {
            out.axpy(s, p)?;
        }
        Ok(out)
    }

    /// Largest pointwise difference over atom triples, gap starts and `u⁻(b)`.
    pub fn max_difference(&self, other: &BalancedPath) -> f64 {
        let mut m: f64 = linalg::max_abs(&(&self.end - &other.end));
        for (a, b) in self.c.iter().zip(&other.c) {
            m = m.max(linalg::max_abs(&(a - b)));
        }
        for (a, b) in self.triples.iter().zip(&other.triples) {
            m = m
                .max(linalg::max_abs(&(&a.minus - &b.minus)))
                .max(linalg::max_abs(&(&a.mid - &b.mid)))
                .max(linalg::max_abs(&(&a.plus - &b.plus)));
        }
        m
    }

    /// Largest entry over the same sample set as [`max_difference`].
    pub fn magnitude(&self) -> f64 {
        let mut m: f64 = linalg::max_abs(&self.end);
        for v in &self.c {
            m = m.max(linalg::max_abs(v));
        }
        for t in &self.triples {
            m = m.max(linalg::max_abs(&t.minus)).max(linalg::max_abs(&t.plus));
        }
        m
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResidualReport {
    /// `|B_+ u⁺ − B_- u⁻ − Δw f|` per atom.
    pub atoms: Vec<f64>,
    /// `max |J u' + (Q − λW) u − W f|` over Chebyshev points, per gap.
    pub gaps: Vec<f64>,
    /// Mismatch between stored atom triples and the gap evaluators.
    pub endpoint_mismatch: f64,
    pub max: f64,
}

const CHEB_POINTS: usize = 20;

/// Chebyshev points on [-1, 1] and the differentiation matrix.
fn chebyshev(m: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
    let x: Vec<f64> = (0..=m)
        .map(|i| (std::f64::consts::PI * i as f64 / m as f64).cos())
        .collect();
    let c = |i: usize| if i == 0 || i == m { 2.0 } else { 1.0 };
    let mut d = vec![vec![0.0; m + 1]; m + 1];
    for i in 0..=m {
        for j in 0..=m {
            if i != j {
                let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
                d[i][j] = c(i) / c(j) * sign / (x[i] - x[j]);
            }
        }
        d[i][i] = -(0..=m).filter(|&j| j != i).map(|j| d[i][j]).sum::<f64>();
    }
    (x, d)
}

/// Jump residuals at atoms and spectral ODE residuals inside the gaps.
pub fn residual(spec: &SystemSpec, path: &BalancedPath) -> ResidualReport {
    let lambda = path.lambda;
    let atoms: Vec<f64> = spec
        .atoms()
        .iter()
        .zip(&path.triples)
        .zip(&path.rhs.atoms)
        .map(|((atom, t), f)| {
            let jp = jump_matrices(atom, spec.j(), lambda);
            (&jp.plus * &t.plus - &jp.minus * &t.minus - &atom.dw * f).norm()
        })
        .collect();
    let (xs, d) = chebyshev(CHEB_POINTS);
    let gaps: Vec<f64> = (0..=spec.num_atoms())
        .map(|j| {
            let len = spec.gap_len(j);
            let vals: Vec<CVec> = xs
                .iter()
                .map(|&x| path.value_in_gap(spec, j, (x + 1.0) * 0.5 * len))
                .collect();
            let g = &spec.gaps()[j];
            let op = &g.q - &g.w * lambda;
            let wf = &g.w * &path.rhs.gaps[j];
            let mut worst: f64 = 0.0;
            for i in 0..xs.len() {
                let mut deriv = CVec::zeros(spec.n());
                for (k, v) in vals.iter().enumerate() {
                    deriv += v * C64::new(d[i][k] * 2.0 / len, 0.0);
                }
                let r = spec.j() * deriv + &op * &vals[i] - &wf;
                worst = worst.max(r.norm());
            }
            worst
        })
        .collect();
    let mut mismatch: f64 = 0.0;
    for k in 0..spec.num_atoms() {
        let left = path.value_in_gap(spec, k, spec.gap_len(k));
        mismatch = mismatch
            .max((&left - &path.triples[k].minus).norm())
            .max((&path.c[k + 1] - &path.triples[k].plus).norm());
    }
    let last = spec.num_atoms();
    mismatch = mismatch.max((path.value_in_gap(spec, last, spec.gap_len(last)) - &path.end).norm());
    let max = atoms.iter().chain(&gaps).copied().fold(0.0, f64::max);
    ResidualReport {
        atoms,
        gaps,
        endpoint_mismatch: mismatch,
        max,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::real_matrix;
    use crate::model::{Atom, GapDensity};

    fn j2() -> CMat {
        real_matrix(2, 2, &[0.0, -1.0, 1.0, 0.0])
    }

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn zero_density_transfer_is_identity() {
        let spec = SystemSpec::new(j2(), 0.0, 2.0, vec![], None).unwrap();
        for x in [0.0, 0.7, 2.0] {
            let u = transfer_matrix(&spec, 0, c(1.3, -0.4), x).unwrap();
            assert!((u - CMat::identity(2, 2)).norm() < 1e-15);
        }
        assert!(transfer_matrix(&spec, 0, c(0.0, 0.0), 2.5).is_err());
    }

    #[test]
    fn constant_integrand() {
        let w = real_matrix(2, 2, &[1.0, 0.5, 0.5, 2.0]);
        let gaps = vec![GapDensity {
            q: CMat::zeros(2, 2),
            w: w.clone(),
        }];
        // λ = 0 keeps U ≡ I even with a weight density
        let spec = SystemSpec::new(j2(), 0.0, 1.5, vec![], Some(gaps)).unwrap();
        let mut f = RightHandSide::zeros(&spec);
        f.gaps[0] = CVec::from_vec(vec![c(1.0, 0.0), c(0.0, 2.0)]);
        let i = gap_integral(&spec, 0, c(0.0, 0.0), &f);
        let expect = &w * &f.gaps[0] * c(1.5, 0.0);
        assert!((i - expect).norm() < 1e-13);
        let zero_w = SystemSpec::new(j2(), 0.0, 1.5, vec![], None).unwrap();
        assert!(gap_integral(&zero_w, 0, c(1.0, 1.0), &f).norm() == 0.0);
    }

    #[test]
    fn constant_path_without_atoms() {
        let spec = SystemSpec::new(j2(), 0.0, 1.0, vec![], None).unwrap();
        let e1 = CVec::from_vec(vec![c(1.0, 0.0), c(0.0, 0.0)]);
        let p = propagate_path(&spec, c(0.5, 0.5), &RightHandSide::zeros(&spec), vec![e1.clone()]).unwrap();
        assert_eq!(p.end, e1);
        let mid = p.evaluate(&spec, 0.3).unwrap();
        assert!((mid.mid - &e1).norm() < 1e-15);
        assert!(residual(&spec, &p).max < 1e-12);
        assert!(matches!(p.evaluate(&spec, 1.5), Err(Error::OutOfDomain { .. })));
    }

    #[test]
    fn balanced_average_at_atom() {
        let atom = Atom {
            x: 1.0,
            dq: -real_matrix(2, 2, &[0.0, 2.0, 2.0, 0.0]),
            dw: real_matrix(2, 2, &[2.0, 0.0, 0.0, 0.0]),
        };
        let spec = SystemSpec::new(j2(), 0.5, 2.0, vec![atom], None).unwrap();
        let left = CVec::from_vec(vec![c(0.0, 0.0), c(3.0, 0.0)]);
        let right = CVec::from_vec(vec![c(1.0, 0.0), c(5.0, 0.0)]);
        let p = propagate_path(&spec, c(1.0, 0.0), &RightHandSide::zeros(&spec), vec![left, right]).unwrap();
        let t = p.evaluate(&spec, 1.0).unwrap();
        assert!((t.mid - CVec::from_vec(vec![c(0.5, 0.0), c(4.0, 0.0)])).norm() < 1e-15);
        let end = p.evaluate(&spec, 2.0).unwrap();
        assert!((end.mid - CVec::from_vec(vec![c(1.0, 0.0), c(5.0, 0.0)])).norm() < 1e-15);
    }

    #[test]
    fn perturbed_triple_shows_in_jump_residual() {
        let atom = Atom {
            x: 1.0,
            dq: real_matrix(2, 2, &[0.4, 0.1, 0.1, -0.3]),
            dw: real_matrix(2, 2, &[1.0, 0.0, 0.0, 0.5]),
        };
        let spec = SystemSpec::new(j2(), 0.0, 2.0, vec![atom], None).unwrap();
        let lam = c(0.2, 0.9);
        // continue a solution through the atom: u⁺ = B_+⁻¹ B_- u⁻
        let c0 = CVec::from_vec(vec![c(1.0, 0.0), c(-0.5, 0.3)]);
        let jp = jump_matrices(&spec.atoms()[0], spec.j(), lam);
        let c1 = jp.plus.clone().try_inverse().unwrap() * &jp.minus * &c0;
        let mut p = propagate_path(&spec, lam, &RightHandSide::zeros(&spec), vec![c0, c1]).unwrap();
        let r0 = residual(&spec, &p);
        assert!(r0.max < 1e-12, "{r0:?}");
        let eps = 1e-6;
        p.triples[0].plus[0] += c(eps, 0.0);
        let r = residual(&spec, &p);
        let expect = (jp.plus.column(0) * c(eps, 0.0)).norm();
        assert!((r.atoms[0] - expect).abs() < 1e-12);
    }
}
