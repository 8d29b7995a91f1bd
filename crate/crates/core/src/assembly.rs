//! The finite block system `𝔹(λ) ũ = F₀(f, λ)` for the right limits
//! `ũ = (c_0, …, c_N)` at the partition points, with the companion matrix
//! `𝔻(λ)` producing balanced values at the atoms.

use crate::error::{Error, Obstruction, Result};
use crate::linalg::{self, block_diag, kernel_basis, lstsq, spectral_norm, stack_rows, ZERO};
use crate::model::{jump_matrices, SystemSpec};
use crate::propagate::{gap_integral, propagate_stacked, BalancedPath, GapTransfer, RightHandSide};
use crate::tol::Tolerances;
use crate::{CMat, CVec, C64};

#[derive(Debug, Clone)]
pub struct BlockSystem {
    pub lambda: C64,
    pub n: usize,
    pub num_atoms: usize,
    /// `nN x n(N+1)`.
    pub b: CMat,
    /// `nN x n(N+1)`.
    pub d: CMat,
    /// `B_+(x_k, λ)` per atom.
    pub bplus: Vec<CMat>,
    /// `B_-(x_k, λ)` per atom.
    pub bminus: Vec<CMat>,
    /// `U_j(x_{j+1}, λ)` for every gap, including the last one.
    pub transfers: Vec<CMat>,
    pub j: CMat,
}

impl BlockSystem {
    fn drop_ends(&self, m: &CMat) -> CMat {
        let width = self.n * self.num_atoms.saturating_sub(1);
        m.view((0, self.n), (m.nrows(), width)).into_owned()
    }

    /// `𝔹` without its first and last block column (zero width when `N = 1`).
    pub fn b_m(&self) -> CMat {
        self.drop_ends(&self.b)
    }

    pub fn d_m(&self) -> CMat {
        self.drop_ends(&self.d)
    }

    /// `ℬ(λ) = diag(B_+(x_1, λ), …)`.
    pub fn script_b(&self) -> CMat {
        block_diag(&self.bplus)
    }

    /// `𝒰(λ) = diag(U_0(x_1, λ), …, U_{N-1}(x_N, λ))`.
    pub fn script_u(&self) -> CMat {
        block_diag(&self.transfers[..self.num_atoms])
    }

    pub fn script_j(&self) -> CMat {
        block_diag(&vec![self.j.clone(); self.num_atoms])
    }

    /// Selector dropping the last `n` components of `ũ`.
    pub fn e_bottom(&self) -> CMat {
        let rows = self.n * self.num_atoms;
        let mut e = CMat::zeros(rows, rows + self.n);
        e.view_mut((0, 0), (rows, rows)).fill_with_identity();
        e
    }

    /// Selector dropping the first `n` components of `ũ`.
    pub fn e_top(&self) -> CMat {
        let rows = self.n * self.num_atoms;
        let mut e = CMat::zeros(rows, rows + self.n);
        e.view_mut((0, self.n), (rows, rows)).fill_with_identity();
        e
    }
}

/// `F₀ = ℛ(f) − ℬ(λ̄)* 𝒰(λ) 𝒥⁻¹ ℐ(f, λ)` and its ingredients.
#[derive(Debug, Clone)]
pub struct RhsVector {
    pub f0: CVec,
    /// `(Δw f)(x_k)` stacked.
    pub atomic: CVec,
    /// `I_0, …, I_{N-1}` stacked.
    pub integrals: CVec,
    /// `I_N`.
    pub last_integral: CVec,
}

pub fn assemble(spec: &SystemSpec, lambda: C64, f: Option<&RightHandSide>) -> Result<(BlockSystem, Option<RhsVector>)> {
    let n = spec.n();
    let big_n = spec.num_atoms();
    if big_n == 0 {
        return Err(Error::EmptyPartition);
    }
    if let Some(f) = f {
        f.check_shape(spec)?;
    }
    let transfers: Vec<CMat> = (0..=big_n).map(|j| GapTransfer::new(spec, j, lambda).end()).collect();
    let jumps: Vec<_> = spec.atoms().iter().map(|a| jump_matrices(a, spec.j(), lambda)).collect();
    let mut b = CMat::zeros(n * big_n, n * (big_n + 1));
    let mut d = CMat::zeros(n * big_n, n * (big_n + 1));
    let half = C64::new(0.5, 0.0);
    for (k, jp) in jumps.iter().enumerate() {
        let left = -(&jp.minus * &transfers[k]);
        b.view_mut((k * n, k * n), (n, n)).copy_from(&left);
        b.view_mut((k * n, (k + 1) * n), (n, n)).copy_from(&jp.plus);
        d.view_mut((k * n, k * n), (n, n)).copy_from(&(&transfers[k] * half));
        d.view_mut((k * n, (k + 1) * n), (n, n))
            .copy_from(&(CMat::identity(n, n) * half));
    }
    let rhs = f.map(|f| {
        let ints: Vec<CVec> = (0..=big_n).map(|j| gap_integral(spec, j, lambda, f)).collect();
        let atomic: Vec<CVec> = spec.atoms().iter().zip(&f.atoms).map(|(a, v)| &a.dw * v).collect();
        let f0: Vec<CVec> = (0..big_n)
            .map(|k| &atomic[k] + &jumps[k].minus * &transfers[k] * spec.j_inv() * &ints[k])
            .collect();
        RhsVector {
            f0: linalg::stack_vectors(&f0),
            atomic: linalg::stack_vectors(&atomic),
            integrals: linalg::stack_vectors(&ints[..big_n]),
            last_integral: ints[big_n].clone(),
        }
    });
    let sys = BlockSystem {
        lambda,
        n,
        num_atoms: big_n,
        b,
        d,
        bplus: jumps.iter().map(|jp| jp.plus.clone()).collect(),
        bminus: jumps.iter().map(|jp| jp.minus.clone()).collect(),
        transfers,
        j: spec.j().clone(),
    };
    Ok((sys, rhs))
}

/// `dim ker m` with the rank stability guard.
pub fn kernel_dim(m: &CMat, tol: f64, context: &str) -> Result<usize> {
    Ok(m.ncols() - linalg::rank(m, tol, context)?)
}

/// `dim ker m*`.
pub fn cokernel_dim(m: &CMat, tol: f64, context: &str) -> Result<usize> {
    Ok(m.nrows() - linalg::rank(m, tol, context)?)
}

fn consistent(m: &CMat, x: &CVec, rhs: &CVec, tol: &Tolerances) -> (bool, f64) {
    let r = (m * x - rhs).norm();
    let scale = spectral_norm(m) * x.norm() + rhs.norm();
    (r <= tol.lin * scale.max(f64::MIN_POSITIVE), r)
}

fn obstruction(m: &CMat, rhs: &CVec, tol: &Tolerances) -> Error {
    let witness = kernel_basis(&m.adjoint(), tol.rank).unwrap_or_else(|_| CMat::zeros(m.nrows(), 0));
    let pairings: Vec<f64> = witness.column_iter().map(|v| v.dotc(rhs).norm()).collect();
    let max_pairing = pairings.iter().copied().fold(0.0, f64::max);
    Error::Unsolvable {
        obstruction: Box::new(Obstruction { witness, pairings }),
        max_pairing,
    }
}

/// Particular solution (if the right-hand side is non-zero) plus a basis of
/// the homogeneous solutions, all in `ũ` coordinates.
#[derive(Debug, Clone)]
pub struct SolutionSet {
    pub lambda: C64,
    pub particular: Option<CVec>,
    pub kernel: CMat,
    pub rhs: RightHandSide,
}

impl SolutionSet {
    pub fn dim(&self) -> usize {
        self.kernel.ncols()
    }

    /// `ũ_p + kernel * coeffs`.
    pub fn member(&self, coeffs: &[C64]) -> CVec {
        let mut u = self
            .particular
            .clone()
            .unwrap_or_else(|| CVec::zeros(self.kernel.nrows()));
        for (k, &s) in coeffs.iter().enumerate() {
            u += self.kernel.column(k) * s;
        }
        u
    }

    pub fn path(&self, spec: &SystemSpec, coeffs: &[C64]) -> Result<BalancedPath> {
        propagate_stacked(spec, self.lambda, &self.rhs, &self.member(coeffs))
    }

    /// Paths of the homogeneous basis (zero right-hand side).
    pub fn kernel_paths(&self, spec: &SystemSpec) -> Result<Vec<BalancedPath>> {
        let zero = RightHandSide::zeros(spec);
        self.kernel
            .column_iter()
            .map(|c| propagate_stacked(spec, self.lambda, &zero, &c.into_owned()))
            .collect()
    }
}

/// All balanced solutions of `J u' + (q − λw) u = w f`.
pub fn solve_nonhomogeneous(spec: &SystemSpec, lambda: C64, f: &RightHandSide, tol: &Tolerances) -> Result<SolutionSet> {
    let (sys, rhs) = assemble(spec, lambda, Some(f))?;
    let f0 = rhs.expect("rhs requested").f0;
    let kernel = kernel_basis(&sys.b, tol.rank)?;
    let particular = if f.is_zero() {
        None
    } else {
        let x = lstsq(&sys.b, &f0, tol.rank);
        if !consistent(&sys.b, &x, &f0, tol).0 {
            return Err(obstruction(&sys.b, &f0, tol));
        }
        Some(x)
    };
    Ok(SolutionSet {
        lambda,
        particular,
        kernel,
        rhs: f.clone(),
    })
}

/// Solutions with `u⁺(a) = u⁻(b) = 0`.
pub fn solve_vanishing(spec: &SystemSpec, lambda: C64, f: &RightHandSide, tol: &Tolerances) -> Result<SolutionSet> {
    let (sys, rhs) = assemble(spec, lambda, Some(f))?;
    let rhs = rhs.expect("rhs requested");
    let n = spec.n();
    let big_n = spec.num_atoms();
    let c_last = -(spec.j_inv() * &rhs.last_integral);
    // the last jump equation carries B_+(x_N) c_N to the right-hand side
    let mut target = rhs.f0.clone();
    {
        let shift = &sys.bplus[big_n - 1] * &c_last;
        let mut tail = target.rows_mut((big_n - 1) * n, n);
        tail -= shift;
    }
    let bm = sys.b_m();
    let inner = if bm.ncols() == 0 {
        CVec::zeros(0)
    } else {
        lstsq(&bm, &target, tol.rank)
    };
    let (ok, _) = consistent(&bm, &inner, &target, tol);
    if !ok && target.norm() > 0.0 {
        return Err(obstruction(&bm, &target, tol));
    }
    let embed = |v: &CVec| {
        let mut out = CVec::zeros(n * (big_n + 1));
        out.rows_mut(n, v.len()).copy_from(v);
        out
    };
    let mut particular = embed(&inner);
    particular.rows_mut(n * big_n, n).copy_from(&c_last);
    let kin = if bm.ncols() == 0 {
        CMat::zeros(0, 0)
    } else {
        kernel_basis(&bm, tol.rank)?
    };
    let mut kernel = CMat::zeros(n * (big_n + 1), kin.ncols());
    for (k, col) in kin.column_iter().enumerate() {
        kernel.set_column(k, &embed(&col.into_owned()));
    }
    Ok(SolutionSet {
        lambda,
        particular: if f.is_zero() { None } else { Some(particular) },
        kernel,
        rhs: f.clone(),
    })
}

/// The unique homogeneous solution with balanced atom values `û`, for
/// `û ∈ ker 𝔹_m(λ̄)*`.
pub fn reconstruct_from_hat(spec: &SystemSpec, lambda: C64, uhat: &CVec, tol: &Tolerances) -> Result<BalancedPath> {
    let (sys, _) = assemble(spec, lambda, None)?;
    if uhat.len() != sys.b.nrows() {
        return Err(Error::Shape("uhat must have n N entries".into()));
    }
    let (conj_sys, _) = assemble(spec, lambda.conj(), None)?;
    let bm = conj_sys.b_m();
    let pre = (bm.adjoint() * uhat).norm();
    if pre > tol.lin * (spectral_norm(&bm) * uhat.norm()).max(f64::MIN_POSITIVE) && pre > 0.0 {
        return Err(Error::NotInKernel { residual: pre });
    }
    let m = stack_rows(&[&sys.b, &sys.d]);
    let mut rhs = CVec::zeros(m.nrows());
    rhs.rows_mut(sys.b.nrows(), uhat.len()).copy_from(uhat);
    let u = lstsq(&m, &rhs, tol.rank);
    let (ok, r) = consistent(&m, &u, &rhs, tol);
    if !ok && rhs.norm() > 0.0 {
        return Err(Error::NotInKernel { residual: r });
    }
    propagate_stacked(spec, lambda, &RightHandSide::zeros(spec), &u)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentityReport {
    /// `‖𝔻(λ̄)*𝔹(λ) − 𝔹(λ̄)*𝔻(λ) − diag(−J, 0, …, 0, J)‖_F`.
    pub full: f64,
    /// `‖𝔻_m(λ̄)*𝔹(λ) − 𝔹_m(λ̄)*𝔻(λ)‖_F`.
    pub reduced: f64,
    /// `‖𝒰(λ̄)*𝒥𝒰(λ) − 𝒥‖_F`.
    pub j_unitarity: f64,
    /// `‖𝔹‖_F + ‖𝔻‖_F`.
    pub scale: f64,
}

impl IdentityReport {
    pub fn max_relative(&self) -> f64 {
        self.full.max(self.reduced).max(self.j_unitarity) / self.scale.max(1.0)
    }
}

pub fn structural_identities(spec: &SystemSpec, lambda: C64) -> Result<IdentityReport> {
    let (s, _) = assemble(spec, lambda, None)?;
    let (c, _) = assemble(spec, lambda.conj(), None)?;
    let n = spec.n();
    let cols = s.b.ncols();
    let mut expect = CMat::zeros(cols, cols);
    expect.view_mut((0, 0), (n, n)).copy_from(&(-spec.j()));
    expect.view_mut((cols - n, cols - n), (n, n)).copy_from(spec.j());
    let full = (c.d.adjoint() * &s.b - c.b.adjoint() * &s.d - expect).norm();
    let reduced = (c.d_m().adjoint() * &s.b - c.b_m().adjoint() * &s.d).norm();
    let j_unitarity = (c.script_u().adjoint() * s.script_j() * s.script_u() - s.script_j()).norm();
    Ok(IdentityReport {
        full,
        reduced,
        j_unitarity,
        scale: s.b.norm() + s.d.norm(),
    })
}

/// `ñ(λ) = dim ker 𝔹_m(λ̄)* − dim ker 𝔹(λ̄)*`.
pub fn n_tilde(spec: &SystemSpec, lambda: C64, tol: &Tolerances) -> Result<usize> {
    let (c, _) = assemble(spec, lambda.conj(), None)?;
    let km = cokernel_dim(&c.b_m(), tol.rank, "B_m(conj lambda)")?;
    let k = cokernel_dim(&c.b, tol.rank, "B(conj lambda)")?;
    Ok(km - k)
}

/// `∫ v* w f` for a path `v` and a right-hand side `f`, together with the
/// sum of the absolute values of its terms.
pub fn weighted_pairing(spec: &SystemSpec, v: &BalancedPath, f: &RightHandSide) -> (C64, f64) {
    let mut total = ZERO;
    let mut scale = 0.0;
    for (k, atom) in spec.atoms().iter().enumerate() {
        let wf = &atom.dw * &f.atoms[k];
        total += v.triples[k].mid.dotc(&wf);
        scale += v.triples[k].mid.norm() * wf.norm();
    }
    for (j, g) in spec.gaps().iter().enumerate() {
        let wf = &g.w * &f.gaps[j];
        if wf.norm() == 0.0 {
            continue;
        }
        let iv = v.gap_value_integral(spec, j);
        total += iv.dotc(&wf);
        scale += iv.norm() * wf.norm();
    }
    (total, scale)
}

#[derive(Debug, Clone)]
pub struct SolvabilityReport {
    pub rank_test: bool,
    pub orthogonality_test: bool,
    /// `‖𝔹ũ − F₀‖` for the least-squares `ũ`.
    pub rank_residual: f64,
    /// Largest `|∫ v* w f|` over the vanishing solutions of the conjugate equation.
    pub max_pairing: f64,
    pub vanishing_dim: usize,
}

/// Solvability decided by the rank of the block system and, independently,
/// by orthogonality against the solutions of the `λ̄` equation vanishing at
/// both endpoints.
pub fn solvable(spec: &SystemSpec, lambda: C64, f: &RightHandSide, tol: &Tolerances) -> Result<SolvabilityReport> {
    let (sys, rhs) = assemble(spec, lambda, Some(f))?;
    let f0 = rhs.expect("rhs requested").f0;
    let x = lstsq(&sys.b, &f0, tol.rank);
    let (rank_test, rank_residual) = consistent(&sys.b, &x, &f0, tol);
    let rank_test = rank_test || f0.norm() == 0.0;

    // û ∈ ker 𝔹(λ)* are the atom values of those vanishing solutions
    let hats = kernel_basis(&sys.b.adjoint(), tol.rank)?;
    let mut max_pairing: f64 = 0.0;
    let mut orthogonal = true;
    for h in hats.column_iter() {
        let v = reconstruct_from_hat(spec, lambda.conj(), &h.into_owned(), tol)?;
        let (p, scale) = weighted_pairing(spec, &v, f);
        max_pairing = max_pairing.max(p.norm());
        if p.norm() > tol.lin * scale.max(f64::MIN_POSITIVE) && p.norm() > 0.0 {
            orthogonal = false;
        }
    }
    if rank_test != orthogonal {
        return Err(Error::InternalDisagreement {
            rank_test,
            orthogonality_test: orthogonal,
        });
    }
    Ok(SolvabilityReport {
        rank_test,
        orthogonality_test: orthogonal,
        rank_residual,
        max_pairing,
        vanishing_dim: hats.ncols(),
    })
}
