//! The finite-dimensional space `L²(w)` of a purely atomic weight, the
//! maximal and minimal relations, deficiency spaces, the boundary form and
//! restrictions of `T_max` by boundary conditions.

use crate::assembly::{assemble, weighted_pairing};
use crate::error::{Error, Result};
use crate::linalg::{self, block_diag, column_space, hermitian_eigen, kernel_basis, stack_rows, ONE, ZERO};
use crate::model::SystemSpec;
use crate::propagate::{propagate_path, propagate_stacked, BalancedPath, RightHandSide};
use crate::tol::Tolerances;
use crate::{CMat, CVec, C64};

/// Coordinates on `L²(w)` restricted to the atoms: at atom `k` the class of
/// `f` is `W_k* f(x_k)` with `W_k W_k* = Δw(x_k)` and `W_k` of full column
/// rank, so that `⟨f, g⟩ = Σ_k (W_k* f)* (W_k* g)`.
#[derive(Debug, Clone)]
pub struct L2wSpace {
    n: usize,
    factors: Vec<CMat>,
    /// `V_k diag(1/√s)`: maps coordinates back to values in `ran Δw(x_k)`.
    lifts: Vec<CMat>,
    offsets: Vec<usize>,
    dim: usize,
}

impl L2wSpace {
    pub fn new(spec: &SystemSpec, tol: &Tolerances) -> Self {
        let n = spec.n();
        let eig: Vec<(Vec<f64>, CMat)> = spec.atoms().iter().map(|a| hermitian_eigen(&a.dw)).collect();
        let top = eig.iter().flat_map(|(s, _)| s.iter().copied()).fold(0.0, f64::max);
        let mut factors = Vec::new();
        let mut lifts = Vec::new();
        let mut offsets = Vec::new();
        let mut dim = 0;
        for (s, v) in &eig {
            let keep: Vec<usize> = (0..n).filter(|&i| top > 0.0 && s[i] > tol.rank * top).collect();
            let mut w = CMat::zeros(n, keep.len());
            let mut l = CMat::zeros(n, keep.len());
            for (c, &i) in keep.iter().enumerate() {
                w.set_column(c, &(v.column(i) * C64::new(s[i].sqrt(), 0.0)));
                l.set_column(c, &(v.column(i) / C64::new(s[i].sqrt(), 0.0)));
            }
            offsets.push(dim);
            dim += keep.len();
            factors.push(w);
            lifts.push(l);
        }
        L2wSpace {
            n,
            factors,
            lifts,
            offsets,
            dim,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Coordinate dimension contributed by each atom (`rk Δw(x_k)`).
    pub fn atom_dims(&self) -> Vec<usize> {
        self.factors.iter().map(|w| w.ncols()).collect()
    }

    /// `blockdiag(W_k*)`: stacked atom values to class coordinates.
    pub fn class_map(&self) -> CMat {
        let adj: Vec<CMat> = self.factors.iter().map(|w| w.adjoint()).collect();
        block_diag(&adj)
    }

    /// `blockdiag(W_k)`: class coordinates to stacked `Δw f`.
    pub fn weight_map(&self) -> CMat {
        block_diag(&self.factors)
    }

    pub fn class_of_values(&self, values: &[CVec]) -> CVec {
        let mut out = CVec::zeros(self.dim);
        for (k, v) in values.iter().enumerate() {
            let part = self.factors[k].adjoint() * v;
            out.rows_mut(self.offsets[k], part.len()).copy_from(&part);
        }
        out
    }

    /// Class of a path, from its balanced atom values.
    pub fn class_of_path(&self, path: &BalancedPath) -> CVec {
        let mids: Vec<CVec> = path.triples.iter().map(|t| t.mid.clone()).collect();
        self.class_of_values(&mids)
    }

    pub fn class_of_rhs(&self, f: &RightHandSide) -> CVec {
        self.class_of_values(&f.atoms)
    }

    /// The representative with values in `ran Δw(x_k)` at every atom.
    pub fn representative(&self, class: &CVec) -> Vec<CVec> {
        self.lifts
            .iter()
            .zip(&self.offsets)
            .map(|(l, &o)| l * class.rows(o, l.ncols()))
            .collect()
    }

    pub fn rhs_of_class(&self, spec: &SystemSpec, class: &CVec) -> RightHandSide {
        let atoms = self.representative(class);
        debug_assert!(atoms.iter().all(|v| v.len() == self.n));
        RightHandSide::atomic(spec, atoms)
    }
}

/// `⟨f, g⟩ = ∫ f* w g` for piecewise-constant right-hand sides.
pub fn inner_product(spec: &SystemSpec, f: &RightHandSide, g: &RightHandSide) -> C64 {
    let mut s = ZERO;
    for (k, atom) in spec.atoms().iter().enumerate() {
        s += f.atoms[k].dotc(&(&atom.dw * &g.atoms[k]));
    }
    for (j, gap) in spec.gaps().iter().enumerate() {
        s += f.gaps[j].dotc(&(&gap.w * &g.gaps[j])) * spec.gap_len(j);
    }
    s
}

pub fn require_atomic(spec: &SystemSpec) -> Result<()> {
    match spec.first_dense_gap() {
        Some(gap) => Err(Error::NotPurelyAtomic { gap }),
        None => Ok(()),
    }
}

/// Principal-angle threshold for subspace equality and inclusion.
pub const SUBSPACE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RelationKind {
    Tmax,
    TminClosure,
    Deficiency(C64),
    Restriction,
    Adjoint,
}

/// Subspace of `L²(w) × L²(w)` in class coordinates: columns are orthonormal
/// pairs `([u]; [f])`. When `paths` is non-empty, `paths[i]` is a solution
/// of `J u' + q u = w f` at `λ = 0` representing column `i`.
#[derive(Debug, Clone)]
pub struct PairSubspace {
    pub kind: RelationKind,
    pub basis: CMat,
    pub paths: Vec<BalancedPath>,
}

impl PairSubspace {
    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    /// `dim L²(w)`.
    pub fn space_dim(&self) -> usize {
        self.basis.nrows() / 2
    }

    /// Sine of the largest principal angle to another subspace.
    pub fn angle_to(&self, other: &PairSubspace) -> f64 {
        linalg::max_angle_sine(&self.basis, &other.basis)
    }

    /// How far `other` sticks out of `self`.
    pub fn excess_of(&self, other: &PairSubspace) -> f64 {
        linalg::residual_outside(&self.basis, &other.basis)
    }

    /// Attaches representatives by expanding the basis in `host`, which must
    /// carry paths and contain `self`.
    pub fn with_paths_from(mut self, spec: &SystemSpec, host: &PairSubspace) -> Result<Self> {
        let outside = host.excess_of(&self);
        if outside > SUBSPACE_TOL {
            return Err(Error::NotInKernel { residual: outside });
        }
        let coef = host.basis.adjoint() * &self.basis;
        self.paths = combine_columns(spec, &host.paths, &coef)?;
        Ok(self)
    }
}

/// Pair vector `([u]; [f])` of a path at `λ = 0`.
pub fn pair_of_path(space: &L2wSpace, path: &BalancedPath) -> CVec {
    linalg::stack_vectors(&[space.class_of_path(path), space.class_of_rhs(&path.rhs)])
}

fn combine_columns(spec: &SystemSpec, paths: &[BalancedPath], coef: &CMat) -> Result<Vec<BalancedPath>> {
    let lambda = paths.first().map(|p| p.lambda).unwrap_or(ZERO);
    coef.column_iter()
        .map(|c| {
            let cs: Vec<C64> = c.iter().copied().collect();
            BalancedPath::combine(spec, lambda, paths, &cs)
        })
        .collect()
}

/// Rows `W_j A^m` (`m < n`) expressing `W_j u ≡ 0` on gap `j` for the
/// homogeneous solution started at `c_j`, embedded at block column `j`.
fn gap_null_rows(spec: &SystemSpec) -> CMat {
    let n = spec.n();
    let cols = n * (spec.num_atoms() + 1);
    let mut blocks = Vec::new();
    for (j, g) in spec.gaps().iter().enumerate() {
        if g.w.iter().all(|z| z.norm() == 0.0) {
            continue;
        }
        let a = -(spec.j_inv() * &g.q);
        let mut p = g.w.clone();
        for _ in 0..n {
            let mut row = CMat::zeros(n, cols);
            row.view_mut((0, j * n), (n, n)).copy_from(&p);
            blocks.push(row);
            p = &p * &a;
        }
    }
    let refs: Vec<&CMat> = blocks.iter().collect();
    if refs.is_empty() {
        CMat::zeros(0, cols)
    } else {
        stack_rows(&refs)
    }
}

/// `ℒ₀`: homogeneous solutions at `λ = 0` with `w u = 0`.
pub fn l0_basis(spec: &SystemSpec, tol: &Tolerances) -> Result<Vec<BalancedPath>> {
    let space = L2wSpace::new(spec, tol);
    let gap_rows = gap_null_rows(spec);
    let m = if spec.num_atoms() == 0 {
        gap_rows
    } else {
        let (sys, _) = assemble(spec, ZERO, None)?;
        let class_rows = space.class_map() * &sys.d;
        stack_rows(&[&sys.b, &class_rows, &gap_rows])
    };
    let k = kernel_basis(&m, tol.rank)?;
    let zero = RightHandSide::zeros(spec);
    k.column_iter()
        .map(|c| propagate_stacked(spec, ZERO, &zero, &c.into_owned()))
        .collect()
}

/// Solutions `(ũ, [f])` of `𝔹(0) ũ = Δw f`, optionally with `c_0 = c_N = 0`,
/// mapped to pair coordinates and orthonormalized.
fn relation_from_kernel(spec: &SystemSpec, compact: bool, kind: RelationKind, tol: &Tolerances) -> Result<PairSubspace> {
    require_atomic(spec)?;
    let space = L2wSpace::new(spec, tol);
    let r = space.dim();
    if spec.num_atoms() == 0 {
        return Ok(PairSubspace {
            kind,
            basis: CMat::zeros(0, 0),
            paths: Vec::new(),
        });
    }
    let n = spec.n();
    let big_n = spec.num_atoms();
    let cols_u = n * (big_n + 1);
    let (sys, _) = assemble(spec, ZERO, None)?;
    let mut m = CMat::zeros(sys.b.nrows(), cols_u + r);
    m.view_mut((0, 0), sys.b.shape()).copy_from(&sys.b);
    m.view_mut((0, cols_u), (sys.b.nrows(), r)).copy_from(&(-space.weight_map()));
    if compact {
        let mut ends = CMat::zeros(2 * n, cols_u + r);
        ends.view_mut((0, 0), (n, n)).fill_with_identity();
        ends.view_mut((n, big_n * n), (n, n)).fill_with_identity();
        m = stack_rows(&[&m, &ends]);
    }
    let k = kernel_basis(&m, tol.rank)?;
    let mut lift = CMat::zeros(2 * r, cols_u + r);
    lift.view_mut((0, 0), (r, cols_u)).copy_from(&(space.class_map() * &sys.d));
    lift.view_mut((r, cols_u), (r, r)).fill_with_identity();
    let (q, coef) = column_space(&(&lift * &k), linalg::spectral_norm(&lift), tol.rank, "relation basis")?;
    let pre = k * coef;
    let paths = pre
        .column_iter()
        .map(|col| {
            let c = linalg::split_vector(&col.rows(0, cols_u).into_owned(), n);
            let f = space.rhs_of_class(spec, &col.rows(cols_u, r).into_owned());
            propagate_path(spec, ZERO, &f, c)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PairSubspace { kind, basis: q, paths })
}

pub fn tmax_subspace(spec: &SystemSpec, tol: &Tolerances) -> Result<PairSubspace> {
    relation_from_kernel(spec, false, RelationKind::Tmax, tol)
}

/// Pairs whose representative vanishes on the first and the last gap.
pub fn tmin_closure_subspace(spec: &SystemSpec, tol: &Tolerances) -> Result<PairSubspace> {
    relation_from_kernel(spec, true, RelationKind::TminClosure, tol)
}

/// `S* = {(v, g): ⟨g, u⟩ = ⟨v, f⟩ for (u, f) ∈ S}`, the orthogonal
/// complement of `S` turned by `(u, f) ↦ (f, −u)`. No paths are attached.
pub fn adjoint_subspace(s: &PairSubspace, tol: &Tolerances) -> Result<PairSubspace> {
    let r = s.space_dim();
    let mut turned = CMat::zeros(2 * r, s.dim());
    turned.view_mut((0, 0), (r, s.dim())).copy_from(&s.basis.rows(r, r));
    turned.view_mut((r, 0), (r, s.dim())).copy_from(&(-s.basis.rows(0, r)));
    let basis = kernel_basis(&turned.adjoint(), tol.rank)?;
    Ok(PairSubspace {
        kind: RelationKind::Adjoint,
        basis,
        paths: Vec::new(),
    })
}

#[derive(Debug, Clone)]
pub struct Deficiency {
    pub lambda: C64,
    /// `D_λ` with representatives re-expressed at `λ = 0` (`f = λ u`).
    pub space: PairSubspace,
    /// `n_λ = dim D_λ`.
    pub index: usize,
    /// Dimension of all solutions of `J u' + q u = λ w u`.
    pub solution_dim: usize,
}

/// `D_λ = {([u], λ[u]) ∈ T_max}`.
pub fn deficiency(spec: &SystemSpec, lambda: C64, tol: &Tolerances) -> Result<Deficiency> {
    require_atomic(spec)?;
    let space = L2wSpace::new(spec, tol);
    let r = space.dim();
    if spec.num_atoms() == 0 {
        return Ok(Deficiency {
            lambda,
            space: PairSubspace {
                kind: RelationKind::Deficiency(lambda),
                basis: CMat::zeros(0, 0),
                paths: Vec::new(),
            },
            index: 0,
            solution_dim: spec.n(),
        });
    }
    let (sys, _) = assemble(spec, lambda, None)?;
    let k = kernel_basis(&sys.b, tol.rank)?;
    let classes = space.class_map() * &sys.d * &k;
    let pairs = stack_rows(&[&classes, &(&classes * lambda)]);
    let (q, coef) = column_space(&pairs, linalg::spectral_norm(&(space.class_map() * &sys.d)) * (1.0 + lambda.norm()), tol.rank, "deficiency space")?;
    let pre = &k * coef;
    let n = spec.n();
    let paths = pre
        .column_iter()
        .map(|col| {
            let col = col.into_owned();
            let hat = &sys.d * &col;
            let f_atoms: Vec<CVec> = linalg::split_vector(&hat, n).into_iter().map(|v| v * lambda).collect();
            propagate_path(spec, ZERO, &RightHandSide::atomic(spec, f_atoms), linalg::split_vector(&col, n))
        })
        .collect::<Result<Vec<_>>>()?;
    debug_assert_eq!(q.nrows(), 2 * r);
    Ok(Deficiency {
        lambda,
        index: q.ncols(),
        space: PairSubspace {
            kind: RelationKind::Deficiency(lambda),
            basis: q,
            paths,
        },
        solution_dim: k.ncols(),
    })
}

/// `(v* J u)⁻(b) − (v* J u)⁺(a)`.
pub fn boundary_form(spec: &SystemSpec, v: &BalancedPath, u: &BalancedPath) -> C64 {
    let j = spec.j();
    v.end.dotc(&(j * &u.end)) - v.c[0].dotc(&(j * &u.c[0]))
}

/// `⟨v, f⟩ − ⟨g, u⟩` for paths `u`, `v` solving the equation with right-hand
/// sides `f`, `g`.
pub fn lagrange_rhs(spec: &SystemSpec, v: &BalancedPath, u: &BalancedPath) -> C64 {
    let (vf, _) = weighted_pairing(spec, v, &u.rhs);
    let (ug, _) = weighted_pairing(spec, u, &v.rhs);
    vf - ug.conj()
}

/// Boundary conditions `(g_j* J u)⁻(b) − (g_j* J u)⁺(a) = 0` generated by
/// elements `(v_j, g_j)` of `D_i ⊕ D_{−i}`.
#[derive(Debug, Clone)]
pub struct BoundaryData {
    pub plus: Deficiency,
    pub minus: Deficiency,
    /// Rows are coefficient vectors over `[D_i basis, D_{−i} basis]`.
    pub coefficients: CMat,
    /// `(v_j, g_j)` in pair coordinates, one column per condition.
    pub pairs: CMat,
    /// Path of `g_j`; it solves the equation with right-hand side `−v_j`.
    pub g_paths: Vec<BalancedPath>,
    /// `(A𝒥A*)_{kl} = (g_k* J g_l)⁻(b) − (g_k* J g_l)⁺(a)`.
    pub ajja: CMat,
    /// `d = n₊ + n₋`.
    pub d: usize,
    /// `d` minus the number of conditions.
    pub m: isize,
}

pub fn boundary_data(spec: &SystemSpec, coefficients: &CMat, tol: &Tolerances) -> Result<BoundaryData> {
    let i = C64::new(0.0, 1.0);
    let plus = deficiency(spec, i, tol)?;
    let minus = deficiency(spec, -i, tol)?;
    let d = plus.index + minus.index;
    if coefficients.ncols() != d {
        return Err(Error::Shape(format!(
            "boundary coefficients need {d} columns (n+ = {}, n- = {})",
            plus.index, minus.index
        )));
    }
    let mut pair_basis = CMat::zeros(plus.space.basis.nrows(), d);
    if d > 0 {
        pair_basis.view_mut((0, 0), plus.space.basis.shape()).copy_from(&plus.space.basis);
        pair_basis
            .view_mut((0, plus.index), minus.space.basis.shape())
            .copy_from(&minus.space.basis);
    }
    let g_sources: Vec<BalancedPath> = plus
        .space
        .paths
        .iter()
        .map(|p| p.scale(i))
        .chain(minus.space.paths.iter().map(|p| p.scale(-i)))
        .collect();
    let count = coefficients.nrows();
    let rows_t = coefficients.transpose();
    let pairs = &pair_basis * &rows_t;
    let g_paths = if d == 0 {
        (0..count).map(|_| BalancedPath::zero(spec, ZERO)).collect()
    } else {
        combine_columns(spec, &g_sources, &rows_t)?
    };
    let mut ajja = CMat::zeros(count, count);
    for k in 0..count {
        for l in 0..count {
            ajja[(k, l)] = boundary_form(spec, &g_paths[k], &g_paths[l]);
        }
    }
    Ok(BoundaryData {
        plus,
        minus,
        coefficients: coefficients.clone(),
        pairs,
        g_paths,
        ajja,
        d,
        m: d as isize - count as isize,
    })
}

/// Rows `e_j + U e_j`: `half` self-adjoint conditions for `n₊ = n₋ = half`.
pub fn self_adjoint_conditions(unitary: &CMat) -> CMat {
    let h = unitary.nrows();
    let mut out = CMat::zeros(h, 2 * h);
    out.view_mut((0, 0), (h, h)).fill_with_identity();
    out.view_mut((0, h), (h, h)).copy_from(&unitary.transpose());
    out
}

/// `d − m` rows with `rk A𝒥A* = d − 2m`: `m` rows `e_j + U e_j` and, for
/// the remaining `j`, `e_j` and `U e_j` separately, mixed by `mix`.
pub fn symmetric_conditions(unitary: &CMat, m: usize, mix: &CMat) -> CMat {
    let h = unitary.nrows();
    assert!(m <= h);
    let count = 2 * h - m;
    let sa = self_adjoint_conditions(unitary);
    let mut rows = CMat::zeros(count, 2 * h);
    for j in 0..m {
        rows.set_row(j, &sa.row(j));
    }
    for (t, j) in (m..h).enumerate() {
        rows[(m + 2 * t, j)] = ONE;
        let ue = unitary.column(j).transpose();
        rows.view_mut((m + 2 * t + 1, h), (1, h)).copy_from(&ue);
    }
    assert_eq!(mix.shape(), (count, count));
    mix * rows
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classification {
    SelfAdjoint,
    Symmetric,
    NotSymmetric,
}

#[derive(Debug, Clone)]
pub struct Restriction {
    pub relation: PairSubspace,
    pub classification: Classification,
    /// Whether the adjoint computed from the subspace agrees with the
    /// classification read off `A𝒥A*`.
    pub confirmed: bool,
    /// `sin` of the largest angle between `T` and `T*` (1 if dims differ).
    pub adjoint_angle: f64,
    /// How far `T` sticks out of `T*`.
    pub symmetry_defect: f64,
    /// Boundary-form functionals versus the inner-product route.
    pub route_mismatch: f64,
    pub ajja_rank: usize,
    pub d: usize,
    pub m: isize,
}

/// `T = {(u, f) ∈ T_max : (g_j* J u)⁻(b) − (g_j* J u)⁺(a) = 0}`.
pub fn restriction_from_conditions(
    spec: &SystemSpec,
    tmax: &PairSubspace,
    data: &BoundaryData,
    tol: &Tolerances,
) -> Result<Restriction> {
    let count = data.coefficients.nrows();
    let dim = tmax.dim();
    let mut functionals = CMat::zeros(count, dim);
    for j in 0..count {
        for l in 0..dim {
            functionals[(j, l)] = boundary_form(spec, &data.g_paths[j], &tmax.paths[l]);
        }
    }
    // ⟨(v_j, g_j), (u, f)⟩ gives the same functionals
    let by_inner = data.pairs.adjoint() * &tmax.basis;
    let route_mismatch = (&functionals - &by_inner).norm() / (1.0 + functionals.norm());

    let fscale = data.coefficients.norm().max(f64::MIN_POSITIVE);
    let fsv = linalg::full_svd(&functionals).singular;
    let frank = linalg::stable_rank_scaled(&fsv, fscale, tol.lin, "boundary functionals")?;
    if frank < count {
        return Err(Error::DependentConditions { rank: frank, count });
    }
    let k = kernel_basis(&functionals, tol.rank)?;
    let basis = &tmax.basis * &k;
    let paths = combine_columns(spec, &tmax.paths, &k)?;
    let relation = PairSubspace {
        kind: RelationKind::Restriction,
        basis,
        paths,
    };

    let ascale = data.coefficients.norm().powi(2).max(f64::MIN_POSITIVE);
    let asv = linalg::full_svd(&data.ajja).singular;
    let ajja_rank = linalg::stable_rank_scaled(&asv, ascale, tol.lin, "AJA*")?;
    let classification = if ajja_rank == 0 && 2 * count == data.d {
        Classification::SelfAdjoint
    } else if data.m >= 0 && ajja_rank as isize == data.d as isize - 2 * data.m {
        Classification::Symmetric
    } else {
        Classification::NotSymmetric
    };

    let adj = adjoint_subspace(&relation, tol)?;
    let adjoint_angle = relation.angle_to(&adj);
    let symmetry_defect = adj.excess_of(&relation);
    let confirmed = match classification {
        Classification::SelfAdjoint => adjoint_angle <= SUBSPACE_TOL,
        Classification::Symmetric => symmetry_defect <= SUBSPACE_TOL && adjoint_angle > SUBSPACE_TOL,
        Classification::NotSymmetric => symmetry_defect > SUBSPACE_TOL,
    };
    Ok(Restriction {
        relation,
        classification,
        confirmed,
        adjoint_angle,
        symmetry_defect,
        route_mismatch,
        ajja_rank,
        d: data.d,
        m: data.m,
    })
}

/// Self-adjoint restriction with `U = I` (no conditions when `d = 0`).
pub fn default_self_adjoint(spec: &SystemSpec, tmax: &PairSubspace, tol: &Tolerances) -> Result<Restriction> {
    let i = C64::new(0.0, 1.0);
    let np = deficiency(spec, i, tol)?.index;
    let nm = deficiency(spec, -i, tol)?.index;
    if np != nm {
        return Err(Error::NotSelfAdjoint { angle: 1.0 });
    }
    let rows = self_adjoint_conditions(&CMat::identity(np, np));
    let data = boundary_data(spec, &rows, tol)?;
    restriction_from_conditions(spec, tmax, &data, tol)
}
