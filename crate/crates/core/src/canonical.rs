//! Canonical representatives: among all solutions in one `L²(w)` class,
//! the one whose values at a grid of cut points are orthogonal to what
//! `ℒ₀` can reach there.

use crate::error::{Error, Result};
use crate::linalg::{self, column_space, kernel_basis_scaled, lstsq, stack_rows};
use crate::model::SystemSpec;
use crate::propagate::{propagate_path, BalancedPath, GapTransfer};
use crate::tol::Tolerances;
use crate::{CMat, CVec, C64};

/// Base point `τ₀` inside a gap and the atoms to its right (ascending) and
/// left (descending).
#[derive(Debug, Clone, PartialEq)]
pub struct TauGrid {
    pub tau0: f64,
    pub base_gap: usize,
    pub right: Vec<usize>,
    pub left: Vec<usize>,
}

impl TauGrid {
    /// `τ₀` is the midpoint of the first widest gap.
    pub fn new(spec: &SystemSpec) -> Self {
        let mut best = 0;
        for j in 1..=spec.num_atoms() {
            if spec.gap_len(j) > spec.gap_len(best) {
                best = j;
            }
        }
        Self::at_gap(spec, best)
    }

    pub fn at_gap(spec: &SystemSpec, gap: usize) -> Self {
        let (lo, hi) = spec.gap_bounds(gap);
        TauGrid {
            tau0: 0.5 * (lo + hi),
            base_gap: gap,
            right: (gap..spec.num_atoms()).collect(),
            left: (0..gap).rev().collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cut {
    Base,
    /// `u⁺` at the atom, for atoms right of `τ₀`.
    Right(usize),
    /// `u⁻` at the atom, for atoms left of `τ₀`.
    Left(usize),
}

/// One cut: the admissible `ℒ₀` combinations (support on the far side of
/// the cut), their one-sided values there and an orthonormal basis of `N_k`.
#[derive(Debug, Clone)]
pub struct CutSpace {
    pub cut: Cut,
    /// Columns: coefficients over the `ℒ₀` basis.
    pub admissible: CMat,
    /// `n x admissible.ncols()`.
    pub values: CMat,
    /// Orthonormal basis of `N_k`.
    pub basis: CMat,
}

/// All `N_k` spaces of a grid with the `ℒ₀` basis they were built from.
#[derive(Debug, Clone)]
pub struct NkSpaces {
    pub grid: TauGrid,
    /// Columns: stacked `ũ` of the `ℒ₀` basis.
    pub l0: CMat,
    pub cuts: Vec<CutSpace>,
}

fn selector(n: usize, blocks: usize, which: impl Iterator<Item = usize>) -> CMat {
    let rows: Vec<CMat> = which
        .map(|j| {
            let mut s = CMat::zeros(n, n * blocks);
            s.view_mut((0, j * n), (n, n)).fill_with_identity();
            s
        })
        .collect();
    if rows.is_empty() {
        return CMat::zeros(0, n * blocks);
    }
    let refs: Vec<&CMat> = rows.iter().collect();
    stack_rows(&refs)
}

pub fn nk_spaces(spec: &SystemSpec, grid: &TauGrid, l0: &[BalancedPath], tol: &Tolerances) -> Result<NkSpaces> {
    let n = spec.n();
    let blocks = spec.num_atoms() + 1;
    let p = l0.len();
    let stacked: Vec<CVec> = l0.iter().map(|h| h.stacked()).collect();
    let h = linalg::columns_to_matrix(n * blocks, &stacked);
    let make = |cut: Cut, vanish: Vec<usize>, read: CMat| -> Result<CutSpace> {
        let admissible = if p == 0 {
            CMat::zeros(0, 0)
        } else {
            kernel_basis_scaled(&(selector(n, blocks, vanish.into_iter()) * &h), 1.0, tol.rank)?
        };
        let values = &read * &h * &admissible;
        let scale = linalg::spectral_norm(&read) * linalg::spectral_norm(&h);
        let (basis, _) = column_space(&values, scale, tol.rank, "N_k")?;
        Ok(CutSpace {
            cut,
            admissible,
            values,
            basis,
        })
    };
    let mut cuts = Vec::new();
    let g = grid.base_gap;
    let t = GapTransfer::new(spec, g, C64::new(0.0, 0.0));
    let at_tau = t.at_offset(grid.tau0 - t.start) * selector(n, blocks, std::iter::once(g));
    cuts.push(make(Cut::Base, Vec::new(), at_tau)?);
    for &i in &grid.right {
        // h vanishes on every gap up to and including gap i, u⁺(x_i) = c_{i+1}
        cuts.push(make(Cut::Right(i), (0..=i).collect(), selector(n, blocks, std::iter::once(i + 1)))?);
    }
    for &i in &grid.left {
        // h vanishes on every gap from i + 1 on, u⁻(x_i) = U_i c_i
        let u = GapTransfer::new(spec, i, C64::new(0.0, 0.0)).end();
        let read = u * selector(n, blocks, std::iter::once(i));
        cuts.push(make(Cut::Left(i), (i + 1..blocks).collect(), read)?);
    }
    Ok(NkSpaces {
        grid: grid.clone(),
        l0: h,
        cuts,
    })
}

/// The value of `path` that condition `cut` constrains.
pub fn cut_value(spec: &SystemSpec, path: &BalancedPath, grid: &TauGrid, cut: Cut) -> CVec {
    match cut {
        Cut::Base => {
            let (lo, _) = spec.gap_bounds(grid.base_gap);
            path.value_in_gap(spec, grid.base_gap, grid.tau0 - lo)
        }
        Cut::Right(i) => path.triples[i].plus.clone(),
        Cut::Left(i) => path.triples[i].minus.clone(),
    }
}

/// `‖P_{N_k} v‖ / max(1, ‖path‖)` for the constrained value `v`.
pub fn condition_defect(spec: &SystemSpec, path: &BalancedPath, nk: &NkSpaces, cut: &CutSpace) -> f64 {
    if cut.basis.ncols() == 0 {
        return 0.0;
    }
    let v = cut_value(spec, path, &nk.grid, cut.cut);
    (cut.basis.adjoint() * v).norm() / path.magnitude().max(1.0)
}

pub fn satisfies_condition_k(spec: &SystemSpec, path: &BalancedPath, nk: &NkSpaces, cut: &CutSpace, tol: &Tolerances) -> bool {
    condition_defect(spec, path, nk, cut) <= tol.lin
}

/// Largest defect over all cuts.
pub fn max_condition_defect(spec: &SystemSpec, path: &BalancedPath, nk: &NkSpaces) -> f64 {
    nk.cuts
        .iter()
        .map(|c| condition_defect(spec, path, nk, c))
        .fold(0.0, f64::max)
}

/// Subtracts `ℒ₀` elements until every condition holds: first at `τ₀`,
/// then at the atoms to the right in order, then to the left.
pub fn canonicalize(spec: &SystemSpec, path: &BalancedPath, nk: &NkSpaces, tol: &Tolerances) -> Result<BalancedPath> {
    if nk.l0.ncols() == 0 {
        return Ok(path.clone());
    }
    let n = spec.n();
    let mut current = path.clone();
    for cut in &nk.cuts {
        if cut.basis.ncols() == 0 {
            continue;
        }
        let v = cut_value(spec, &current, &nk.grid, cut.cut);
        let target = &cut.basis * (cut.basis.adjoint() * &v);
        if target.norm() == 0.0 {
            continue;
        }
        let a = lstsq(&cut.values, &target, tol.rank);
        let residual = (&cut.values * &a - &target).norm();
        if residual > tol.lin * v.norm().max(1.0) {
            return Err(Error::ProjectionFailed {
                location: format!("{:?}", cut.cut),
                residual,
            });
        }
        // ℒ₀ elements solve the homogeneous equation for every λ, so the
        // shift is a change of initial vectors only
        let shift = &nk.l0 * (&cut.admissible * a);
        let parts = linalg::split_vector(&shift, n);
        let c: Vec<CVec> = current.c.iter().zip(&parts).map(|(c, s)| c - s).collect();
        current = propagate_path(spec, current.lambda, &current.rhs, c)?;
    }
    Ok(current)
}

/// Largest `|Δw (u − v)|` at atoms and `|W (u − v)|` at the gap starts.
pub fn class_difference(spec: &SystemSpec, u: &BalancedPath, v: &BalancedPath) -> f64 {
    let mut m: f64 = 0.0;
    for (k, atom) in spec.atoms().iter().enumerate() {
        m = m.max((&atom.dw * (&u.triples[k].mid - &v.triples[k].mid)).norm());
    }
    for (j, g) in spec.gaps().iter().enumerate() {
        m = m.max((&g.w * (&u.c[j] - &v.c[j])).norm());
    }
    m
}
