//! Problem data for `J u' + q u = w f` with atomic `q`, `w` plus constant gap
//! densities, its validation, the jump matrices at atoms and the sets of
//! troublesome spectral parameters.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, relative_det, ONE};
use crate::tol::Tolerances;
use crate::{CMat, C64};

/// Point mass of `q` and `w`.
#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    pub x: f64,
    /// Jump of the anti-derivative of `q` (Hermitian).
    pub dq: CMat,
    /// Jump of the anti-derivative of `w` (positive semi-definite).
    pub dw: CMat,
}

/// Constant densities of `q` and `w` on one gap between partition points.
#[derive(Debug, Clone, PartialEq)]
pub struct GapDensity {
    pub q: CMat,
    pub w: CMat,
}

impl GapDensity {
    pub fn zero(n: usize) -> Self {
        GapDensity {
            q: CMat::zeros(n, n),
            w: CMat::zeros(n, n),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.q.iter().all(|z| *z == C64::new(0.0, 0.0)) && self.w.iter().all(|z| *z == C64::new(0.0, 0.0))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemSpec {
    n: usize,
    a: f64,
    b: f64,
    j: CMat,
    j_inv: CMat,
    atoms: Vec<Atom>,
    gaps: Vec<GapDensity>,
}

impl SystemSpec {
    /// Builds a spec after checking shapes. `gaps = None` means zero densities.
    /// Mathematical hypotheses are checked separately by [`validate`].
    pub fn new(j: CMat, a: f64, b: f64, atoms: Vec<Atom>, gaps: Option<Vec<GapDensity>>) -> Result<Self> {
        let n = j.nrows();
        if n == 0 || j.ncols() != n {
            return Err(Error::Shape(format!("J must be square and non-empty, got {:?}", j.shape())));
        }
        for (k, atom) in atoms.iter().enumerate() {
            if atom.dq.shape() != (n, n) || atom.dw.shape() != (n, n) {
                return Err(Error::Shape(format!("atom {k}: matrices must be {n}x{n}")));
            }
        }
        let gaps = match gaps {
            Some(g) => {
                if g.len() != atoms.len() + 1 {
                    return Err(Error::Shape(format!(
                        "expected {} gap densities, got {}",
                        atoms.len() + 1,
                        g.len()
                    )));
                }
                for (k, gap) in g.iter().enumerate() {
                    if gap.q.shape() != (n, n) || gap.w.shape() != (n, n) {
                        return Err(Error::Shape(format!("gap {k}: matrices must be {n}x{n}")));
                    }
                }
                g
            }
            None => vec![GapDensity::zero(n); atoms.len() + 1],
        };
        let j_inv = j.clone().try_inverse().unwrap_or_else(|| CMat::zeros(n, n));
        Ok(SystemSpec {
            n,
            a,
            b,
            j,
            j_inv,
            atoms,
            gaps,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }
    pub fn a(&self) -> f64 {
        self.a
    }
    pub fn b(&self) -> f64 {
        self.b
    }
    pub fn j(&self) -> &CMat {
        &self.j
    }
    pub fn j_inv(&self) -> &CMat {
        &self.j_inv
    }
    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }
    pub fn gaps(&self) -> &[GapDensity] {
        &self.gaps
    }
    pub fn num_atoms(&self) -> usize {
        self.atoms.len()
    }

    /// Endpoints of gap `j`: `(x_j, x_{j+1})` with `x_0 = a`, `x_{N+1} = b`.
    pub fn gap_bounds(&self, j: usize) -> (f64, f64) {
        let lo = if j == 0 { self.a } else { self.atoms[j - 1].x };
        let hi = if j == self.atoms.len() { self.b } else { self.atoms[j].x };
        (lo, hi)
    }

    pub fn gap_len(&self, j: usize) -> f64 {
        let (lo, hi) = self.gap_bounds(j);
        hi - lo
    }

    /// True when every gap has zero weight density.
    pub fn weight_is_atomic(&self) -> bool {
        self.gaps.iter().all(|g| g.w.iter().all(|z| z.norm() == 0.0))
    }

    pub fn first_dense_gap(&self) -> Option<usize> {
        self.gaps.iter().position(|g| g.w.iter().any(|z| z.norm() != 0.0))
    }

    /// Gap index containing `x` in its closure, preferring the gap to the right.
    pub fn locate(&self, x: f64) -> Result<Location> {
        if !(x >= self.a && x <= self.b) {
            return Err(Error::OutOfDomain { x, a: self.a, b: self.b });
        }
        if x == self.a {
            return Ok(Location::LeftEnd);
        }
        if x == self.b {
            return Ok(Location::RightEnd);
        }
        let idx = self.atoms.partition_point(|atom| atom.x < x);
        if idx < self.atoms.len() && self.atoms[idx].x == x {
            return Ok(Location::Atom(idx));
        }
        Ok(Location::Gap(idx))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Location {
    LeftEnd,
    RightEnd,
    Atom(usize),
    Gap(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ViolationKind {
    NotSkewHermitian,
    Singular,
    NotHermitian,
    NotPositiveSemidefinite,
    PositionOrder,
    PositionOutside,
    Interval,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub location: String,
    pub kind: ViolationKind,
    pub magnitude: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, location: impl Into<String>, kind: ViolationKind, magnitude: f64) {
        self.violations.push(Violation {
            location: location.into(),
            kind,
            magnitude,
        });
    }
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.passed() {
            return write!(f, "ok");
        }
        let parts: Vec<String> = self
            .violations
            .iter()
            .map(|v| format!("{}: {:?} ({:.3e})", v.location, v.kind, v.magnitude))
            .collect();
        write!(f, "{}", parts.join("; "))
    }
}

fn hermitian_defect(m: &CMat) -> f64 {
    let scale = m.norm().max(f64::MIN_POSITIVE);
    (m - m.adjoint()).norm() / scale
}

fn check_hermitian_psd(report: &mut ValidationReport, loc: &str, m: &CMat, psd: bool, tol: f64) {
    let defect = hermitian_defect(m);
    if defect > tol {
        report.push(loc, ViolationKind::NotHermitian, defect);
    }
    if psd {
        let (vals, _) = linalg::hermitian_eigen(m);
        let scale = m.norm();
        if let Some(&min) = vals.first() {
            if min < -tol * scale.max(1.0) {
                report.push(loc, ViolationKind::NotPositiveSemidefinite, min);
            }
        }
    }
}

/// Checks every structural hypothesis of the problem, reporting all failures.
pub fn validate(spec: &SystemSpec, tol: &Tolerances) -> ValidationReport {
    let mut report = ValidationReport::default();
    let j = spec.j();
    let jn = j.norm();
    let skew = (j + j.adjoint()).norm() / jn.max(f64::MIN_POSITIVE);
    if skew > tol.sym {
        report.push("J", ViolationKind::NotSkewHermitian, skew);
    }
    let svd = linalg::full_svd(j);
    let smax = svd.singular.first().copied().unwrap_or(0.0);
    let smin = svd.singular.last().copied().unwrap_or(0.0);
    if smax == 0.0 || smin <= tol.rank * smax {
        report.push("J", ViolationKind::Singular, if smax > 0.0 { smin / smax } else { 0.0 });
    }
    if !(spec.a() < spec.b()) || !spec.a().is_finite() || !spec.b().is_finite() {
        report.push("interval", ViolationKind::Interval, spec.b() - spec.a());
    }
    let mut prev = spec.a();
    for (k, atom) in spec.atoms().iter().enumerate() {
        let loc = format!("atom {k} (x = {})", atom.x);
        if !(atom.x > spec.a() && atom.x < spec.b()) {
            report.push(loc.clone(), ViolationKind::PositionOutside, atom.x);
        } else if k > 0 && !(atom.x > prev) {
            report.push(loc.clone(), ViolationKind::PositionOrder, atom.x - prev);
        }
        prev = atom.x;
        check_hermitian_psd(&mut report, &format!("{loc} dq"), &atom.dq, false, tol.sym);
        check_hermitian_psd(&mut report, &format!("{loc} dw"), &atom.dw, true, tol.sym);
    }
    for (k, gap) in spec.gaps().iter().enumerate() {
        check_hermitian_psd(&mut report, &format!("gap {k} Q"), &gap.q, false, tol.sym);
        check_hermitian_psd(&mut report, &format!("gap {k} W"), &gap.w, true, tol.sym);
    }
    report
}

/// Validates and converts a failing report into [`Error::Invalid`].
pub fn ensure_valid(spec: &SystemSpec, tol: &Tolerances) -> Result<()> {
    let report = validate(spec, tol);
    if report.passed() {
        Ok(())
    } else {
        Err(Error::Invalid(Box::new(report)))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JumpPair {
    pub minus: CMat,
    pub plus: CMat,
    pub lambda: C64,
}

/// `B_±(x, λ) = J ± (Δq − λ Δw) / 2`.
pub fn jump_matrices(atom: &Atom, j: &CMat, lambda: C64) -> JumpPair {
    let half = (&atom.dq - &atom.dw * lambda) * C64::new(0.5, 0.0);
    JumpPair {
        minus: j - &half,
        plus: j + &half,
        lambda,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum BadLambdaSet {
    /// `det B_+ det B_-` vanishes identically.
    AllOfC,
    Finite(Vec<C64>),
}

impl BadLambdaSet {
    pub fn is_all(&self) -> bool {
        matches!(self, BadLambdaSet::AllOfC)
    }

    pub fn roots(&self) -> &[C64] {
        match self {
            BadLambdaSet::AllOfC => &[],
            BadLambdaSet::Finite(r) => r,
        }
    }
}

/// Zeros of `det(base + λ slope)`; `None` when the determinant vanishes
/// identically. The determinant has degree at most `n`, so `n + 1` samples
/// decide whether it is the zero polynomial.
fn pencil_roots(base: &CMat, slope: &CMat, tol: &Tolerances) -> Option<Vec<C64>> {
    let n = base.nrows();
    let sn = slope.norm();
    let radius = if sn == 0.0 { 1.0 } else { 1.0 + base.norm() / sn };
    let mut best: Option<(f64, C64)> = None;
    for k in 0..=n {
        // off-axis angle keeps samples away from the symmetric real/imaginary roots
        let theta = 0.37 + 2.0 * std::f64::consts::PI * k as f64 / (n + 1) as f64;
        let lam = C64::from_polar(radius, theta);
        let m = base + slope * lam;
        let r = relative_det(&m);
        if best.is_none_or(|(b, _)| r > b) {
            best = Some((r, lam));
        }
    }
    let (rel, lam0) = best.expect("at least one sample");
    if rel < tol.det {
        return None;
    }
    // base + λ slope = M0 (I + (λ − λ0) M0⁻¹ slope); singular iff λ − λ0 = −1/μ
    let m0 = base + slope * lam0;
    let m0_inv = m0.try_inverse()?;
    let k = m0_inv * slope;
    let kn = k.norm();
    let mut roots = Vec::new();
    for mu in linalg::eigenvalues(&k) {
        if mu.norm() > tol.det * kn.max(f64::MIN_POSITIVE) {
            roots.push(lam0 - ONE / mu);
        }
    }
    Some(roots)
}

/// `Λ_x`: the parameters at which `B_+(x, λ)` or `B_-(x, λ)` is singular.
pub fn bad_lambda_set(atom: &Atom, j: &CMat, tol: &Tolerances) -> BadLambdaSet {
    let at_zero = jump_matrices(atom, j, C64::new(0.0, 0.0));
    let half_w = &atom.dw * C64::new(0.5, 0.0);
    // B_+(λ) = B_+(0) − λ Δw/2,  B_-(λ) = B_-(0) + λ Δw/2
    let plus = pencil_roots(&at_zero.plus, &(-&half_w), tol);
    let minus = pencil_roots(&at_zero.minus, &half_w, tol);
    match (plus, minus) {
        (Some(p), Some(m)) => {
            let mut all: Vec<C64> = Vec::new();
            for z in p.into_iter().chain(m) {
                if !all.iter().any(|w| (w - z).norm() <= tol.gap * (1.0 + z.norm())) {
                    all.push(z);
                }
            }
            all.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
            BadLambdaSet::Finite(all)
        }
        _ => BadLambdaSet::AllOfC,
    }
}

/// Indices of atoms at which a jump matrix is singular for this `λ`.
pub fn xi_set(spec: &SystemSpec, lambda: C64, tol: &Tolerances) -> Vec<usize> {
    spec.atoms()
        .iter()
        .enumerate()
        .filter(|(_, atom)| {
            let jp = jump_matrices(atom, spec.j(), lambda);
            relative_det(&jp.plus) < tol.det || relative_det(&jp.minus) < tol.det
        })
        .map(|(k, _)| k)
        .collect()
}

/// Sampling region for [`generic_lambda`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Region {
    Annulus { center: C64, inner: f64, outer: f64 },
    Rectangle { re: (f64, f64), im: (f64, f64) },
}

impl Default for Region {
    fn default() -> Self {
        Region::Annulus {
            center: C64::new(0.0, 0.0),
            inner: 0.5,
            outer: 2.0,
        }
    }
}

impl Region {
    fn sample(&self, rng: &mut ChaCha8Rng) -> C64 {
        match *self {
            Region::Annulus { center, inner, outer } => {
                let r = inner + (outer - inner) * rng.random::<f64>();
                let theta = 2.0 * std::f64::consts::PI * rng.random::<f64>();
                center + C64::from_polar(r, theta)
            }
            Region::Rectangle { re, im } => C64::new(
                re.0 + (re.1 - re.0) * rng.random::<f64>(),
                im.0 + (im.1 - im.0) * rng.random::<f64>(),
            ),
        }
    }
}

/// Whether `λ` passes the genericity test: non-real, away from every finite
/// bad set, and `rk 𝔹(λ) = rk 𝔹(λ̄)` with a tolerance-stable rank.
pub fn is_generic(spec: &SystemSpec, lambda: C64, bad: &[BadLambdaSet], tol: &Tolerances) -> bool {
    if lambda.im.abs() < tol.gap {
        return false;
    }
    for set in bad {
        for root in set.roots() {
            if (root - lambda).norm() < tol.gap || (root - lambda.conj()).norm() < tol.gap {
                return false;
            }
        }
    }
    if spec.num_atoms() == 0 {
        return true;
    }
    let rank_of = |l: C64| -> Option<usize> {
        let sys = crate::assembly::assemble(spec, l, None).ok()?.0;
        linalg::rank(&sys.b, tol.rank, "B(lambda)").ok()
    };
    match (rank_of(lambda), rank_of(lambda.conj())) {
        (Some(r1), Some(r2)) => r1 == r2,
        _ => false,
    }
}

/// Deterministic rejection sampler for a generic spectral parameter.
pub fn generic_lambda(spec: &SystemSpec, region: Region, seed: u64, tol: &Tolerances) -> Result<C64> {
    let bad: Vec<BadLambdaSet> = spec
        .atoms()
        .iter()
        .map(|atom| bad_lambda_set(atom, spec.j(), tol))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..tol.max_tries {
        let lambda = region.sample(&mut rng);
        if is_generic(spec, lambda, &bad, tol) {
            return Ok(lambda);
        }
    }
    Err(Error::GenericityNotFound { tries: tol.max_tries })
}
