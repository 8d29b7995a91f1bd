//! Resolvents of self-adjoint restrictions and the Green's kernel they
//! induce on the atoms.

pub mod example;

use crate::canonical::{canonicalize, nk_spaces, NkSpaces, TauGrid};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::linalg::{self, pinv};
use crate::model::SystemSpec;
use crate::propagate::{BalancedPath, RightHandSide};
use crate::relations::{adjoint_subspace, l0_basis, require_atomic, L2wSpace, PairSubspace, SUBSPACE_TOL};
use crate::tol::Tolerances;
use crate::{CMat, CVec, C64};

/// A self-adjoint relation `T` together with a factored `T − λ`.
#[derive(Debug, Clone)]
pub struct ResolventContext {
    pub spec: SystemSpec,
    pub relation: PairSubspace,
    pub lambda: C64,
    pub space: L2wSpace,
    pub nk: NkSpaces,
    /// `(Y − λX)⁻¹` where `[X; Y]` is the basis of `T`.
    solver: CMat,
    tol: Tolerances,
}

impl ResolventContext {
    pub fn new(spec: &SystemSpec, relation: &PairSubspace, lambda: C64, tol: &Tolerances) -> Result<Self> {
        require_atomic(spec)?;
        let space = L2wSpace::new(spec, tol);
        let r = space.dim();
        if relation.basis.nrows() != 2 * r || relation.paths.len() != relation.dim() {
            return Err(Error::Shape("relation does not carry a path per basis pair".into()));
        }
        let adj = adjoint_subspace(relation, tol)?;
        let angle = relation.angle_to(&adj);
        if angle > SUBSPACE_TOL {
            return Err(Error::NotSelfAdjoint { angle });
        }
        let x = relation.basis.rows(0, r).into_owned();
        let y = relation.basis.rows(r, r).into_owned();
        let m = y - x * lambda;
        let solver = if r == 0 {
            CMat::zeros(relation.dim(), 0)
        } else {
            let s = linalg::full_svd(&m).singular;
            let smin = s.iter().copied().fold(f64::INFINITY, f64::min);
            if s.len() < r || smin <= tol.rank * (1.0 + lambda.norm()) {
                return Err(Error::NotInResolventSet {
                    re: lambda.re,
                    im: lambda.im,
                });
            }
            m.try_inverse().ok_or(Error::NotInResolventSet {
                re: lambda.re,
                im: lambda.im,
            })?
        };
        let l0 = l0_basis(spec, tol)?;
        let nk = nk_spaces(spec, &TauGrid::new(spec), &l0, tol)?;
        Ok(ResolventContext {
            spec: spec.clone(),
            relation: relation.clone(),
            lambda,
            space,
            nk,
            solver,
            tol: *tol,
        })
    }

    /// Canonical solution `u` of `J u' + q u = w(λ u + f)` with `([u], λ[u] + [f]) ∈ T`,
    /// returned as a path at `λ = 0` whose right-hand side represents `λu + f`.
    pub fn apply_class(&self, class: &CVec) -> Result<BalancedPath> {
        if class.len() != self.space.dim() {
            return Err(Error::Shape("class has the wrong dimension".into()));
        }
        let y = &self.solver * class;
        let coeffs: Vec<C64> = y.iter().copied().collect();
        let raw = BalancedPath::combine(&self.spec, C64::new(0.0, 0.0), &self.relation.paths, &coeffs)?;
        canonicalize(&self.spec, &raw, &self.nk, &self.tol)
    }

    pub fn apply(&self, f: &RightHandSide) -> Result<BalancedPath> {
        f.check_shape(&self.spec)?;
        self.apply_class(&self.space.class_of_rhs(f))
    }

    /// `‖([g] − λ[u]) − [f]‖` for an output of [`apply_class`].
    pub fn class_residual(&self, out: &BalancedPath, class: &CVec) -> f64 {
        let u = self.space.class_of_path(out);
        let g = self.space.class_of_rhs(&out.rhs);
        (g - u * self.lambda - class).norm()
    }
}

/// `K(x, x_k, λ) = G(x, x_k, λ) Δw(x_k)` on a list of points.
#[derive(Debug, Clone)]
pub struct KernelTable {
    pub lambda: C64,
    pub points: Vec<f64>,
    pub atoms: Vec<f64>,
    /// `k[p][a]` is the `n x n` block for point `p` and atom `a`.
    pub k: Vec<Vec<CMat>>,
    /// Minimal-norm `G = K pinv(Δw)`.
    pub g: Vec<Vec<CMat>>,
}

impl KernelTable {
    /// `Σ_k K(x_p, x_k) f(x_k)` for every point.
    pub fn apply(&self, f: &RightHandSide) -> Vec<CVec> {
        self.k
            .iter()
            .map(|row| {
                row.iter()
                    .zip(&f.atoms)
                    .fold(CVec::zeros(f.atoms.first().map_or(0, |v| v.len())), |acc, (blk, v)| acc + blk * v)
            })
            .collect()
    }
}

/// Column `j` of the block for atom `k` is the resolvent applied to
/// `f = e_j δ_{x_k}`, evaluated (balanced) at each point.
pub fn greens_table(ctx: &ResolventContext, points: &[f64], exec: Execution) -> Result<KernelTable> {
    let spec = &ctx.spec;
    let n = spec.n();
    let big_n = spec.num_atoms();
    for &x in points {
        spec.locate(x)?;
    }
    let columns: Vec<Result<Vec<CVec>>> = exec.map_range(big_n * n, |idx| {
        let (k, j) = (idx / n, idx % n);
        let mut f = RightHandSide::zeros(spec);
        f.atoms[k][j] = C64::new(1.0, 0.0);
        let path = ctx.apply(&f)?;
        points
            .iter()
            .map(|&x| path.evaluate(spec, x).map(|t| t.mid))
            .collect()
    });
    let mut k = vec![vec![CMat::zeros(n, n); big_n]; points.len()];
    for (idx, col) in columns.into_iter().enumerate() {
        let (a, j) = (idx / n, idx % n);
        for (p, v) in col?.into_iter().enumerate() {
            k[p][a].set_column(j, &v);
        }
    }
    let pinvs: Vec<CMat> = spec.atoms().iter().map(|a| pinv(&a.dw, ctx.tol.rank)).collect();
    let g = k
        .iter()
        .map(|row| row.iter().zip(&pinvs).map(|(blk, p)| blk * p).collect())
        .collect();
    Ok(KernelTable {
        lambda: ctx.lambda,
        points: points.to_vec(),
        atoms: spec.atoms().iter().map(|a| a.x).collect(),
        k,
        g,
    })
}
