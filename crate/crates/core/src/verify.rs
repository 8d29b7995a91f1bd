//! Seeded property suite over one spec: block-system identities, relation
//! invariants, canonical representatives, resolvent and kernel consistency,
//! and, for the built-in example, the closed forms.

use rand::Rng;
use serde::Serialize;

use crate::assembly::{n_tilde, structural_identities};
use crate::canonical::{canonicalize, class_difference, nk_spaces, TauGrid};
use crate::error::Result;
use crate::exec::Execution;
use crate::greens::example::{example_norm_sq, example_resolvent, ExampleSpec};
use crate::greens::{greens_table, ResolventContext};
use crate::model::{generic_lambda, Region, SystemSpec};
use crate::propagate::{BalancedPath, RightHandSide};
use crate::random::{random_complex, random_vector, rng};
use crate::relations::{
    adjoint_subspace, boundary_form, default_self_adjoint, deficiency, l0_basis, lagrange_rhs, tmax_subspace,
    tmin_closure_subspace, L2wSpace, PairSubspace, SUBSPACE_TOL,
};
use crate::tol::Tolerances;
use crate::{CMat, CVec, C64};

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    /// Worst value observed (a residual, angle or violation count).
    pub value: f64,
    pub threshold: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
    pub warnings: Vec<String>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    fn push(&mut self, name: &str, value: f64, threshold: f64, samples: usize) {
        self.checks.push(Check {
            name: name.to_string(),
            passed: value <= threshold,
            value,
            threshold,
            samples,
        });
    }
}

fn worst(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().fold(0.0, f64::max)
}

fn random_path(spec: &SystemSpec, tmax: &PairSubspace, seed: u64) -> Result<BalancedPath> {
    let mut r = rng(seed);
    let coeffs: Vec<C64> = (0..tmax.dim()).map(|_| random_complex(&mut r)).collect();
    BalancedPath::combine(spec, C64::new(0.0, 0.0), &tmax.paths, &coeffs)
}

fn random_atomic_rhs(spec: &SystemSpec, seed: u64) -> RightHandSide {
    let mut r = rng(seed);
    RightHandSide::atomic(spec, (0..spec.num_atoms()).map(|_| random_vector(spec.n(), &mut r)).collect())
}

/// Runs every check that applies to `spec`. Trial `t` draws its randomness
/// from `seed + t`, so reports are reproducible and independent of `exec`.
pub fn verify(
    spec: &SystemSpec,
    example: Option<&ExampleSpec>,
    seed: u64,
    trials: usize,
    tol: &Tolerances,
    exec: Execution,
) -> Result<VerifyReport> {
    let mut report = VerifyReport::default();
    if trials == 0 {
        report.warnings.push("no trials requested: every check passes vacuously".into());
        return Ok(report);
    }
    let n = spec.n();
    let seeds: Vec<u64> = (0..trials as u64).map(|t| seed.wrapping_add(t)).collect();

    if spec.num_atoms() > 0 {
        let lambdas = exec
            .map_range(trials, |t| generic_lambda(spec, Region::default(), seeds[t], tol))
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
        let identities = exec
            .map_range(trials, |t| structural_identities(spec, lambdas[t]).map(|r| r.max_relative()))
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
        report.push("block-system identities", worst(identities), 1e-10, trials);
        let violations = exec
            .map_range(trials, |t| -> Result<f64> {
                let a = n_tilde(spec, lambdas[t], tol)?;
                let b = n_tilde(spec, lambdas[t].conj(), tol)?;
                Ok(f64::from(u8::from(a + b != 2 * n || a != n)))
            })
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
        report.push("rank identities at generic lambda", violations.iter().sum(), 0.0, trials);
    } else {
        report.warnings.push("no atoms: block-system checks skipped".into());
    }

    if let Some(gap) = spec.first_dense_gap() {
        report
            .warnings
            .push(format!("gap {gap} carries a weight density: relation, canonical and resolvent checks skipped"));
        return Ok(report);
    }

    let i = C64::new(0.0, 1.0);
    let tmax = tmax_subspace(spec, tol)?;
    let tmin = tmin_closure_subspace(spec, tol)?;
    let plus = deficiency(spec, i, tol)?;
    let minus = deficiency(spec, -i, tol)?;
    let adj = adjoint_subspace(&tmin, tol)?;
    report.push(
        "deficiency indices equal and at most n",
        f64::from(u8::from(plus.index != minus.index || plus.index > n)),
        0.0,
        1,
    );
    report.push("adjoint of minimal relation equals maximal", adj.angle_to(&tmax), SUBSPACE_TOL, 1);
    report.push(
        "von Neumann dimension count",
        (tmax.dim() as f64 - (tmin.dim() + plus.index + minus.index) as f64).abs(),
        0.0,
        1,
    );
    let mut lagrange: f64 = 0.0;
    for u in &tmax.paths {
        for v in &tmax.paths {
            let d = (boundary_form(spec, v, u) - lagrange_rhs(spec, v, u)).norm();
            lagrange = lagrange.max(d / (u.magnitude() * v.magnitude()).max(1.0));
        }
    }
    report.push("Lagrange identity on the maximal relation", lagrange, 1e-10, tmax.dim() * tmax.dim());

    let restriction = default_self_adjoint(spec, &tmax, tol)?;
    report.push(
        "default restriction is self-adjoint",
        restriction.adjoint_angle,
        SUBSPACE_TOL,
        1,
    );

    let l0 = l0_basis(spec, tol)?;
    let nk = nk_spaces(spec, &TauGrid::new(spec), &l0, tol)?;
    let canon = exec
        .map_range(trials, |t| -> Result<(f64, f64, f64)> {
            let p = random_path(spec, &tmax, seeds[t])?;
            let e = canonicalize(spec, &p, &nk, tol)?;
            let scale = e.magnitude().max(1.0);
            let idem = canonicalize(spec, &e, &nk, tol)?.max_difference(&e) / scale;
            let class = class_difference(spec, &e, &p) / scale;
            let mut r = rng(seeds[t] ^ 0x5eed);
            let mut q = p.clone();
            for l in &l0 {
                q.axpy(random_complex(&mut r) * 2.0, l)?;
            }
            let indep = canonicalize(spec, &q, &nk, tol)?.max_difference(&e) / scale;
            Ok((idem, class, indep))
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    report.push("canonical form is idempotent", worst(canon.iter().map(|c| c.0)), 1e-12, trials);
    report.push("canonical form keeps the class", worst(canon.iter().map(|c| c.1)), 1e-12, trials);
    report.push("canonical form ignores L0 shifts", worst(canon.iter().map(|c| c.2)), 1e-10, trials);

    let space = L2wSpace::new(spec, tol);
    if space.dim() > 0 {
        let lambda = C64::new(0.5, 1.0);
        let ctx = ResolventContext::new(spec, &restriction.relation, lambda, tol)?;
        let points = {
            let mut r = rng(seed ^ 0xface);
            (0..10)
                .map(|_| spec.a() + (spec.b() - spec.a()) * r.random::<f64>())
                .collect::<Vec<_>>()
        };
        let table = greens_table(&ctx, &points, exec)?;
        let results = exec
            .map_range(trials, |t| -> Result<(f64, f64)> {
                let f = random_atomic_rhs(spec, seeds[t]);
                let class = space.class_of_rhs(&f);
                let u = ctx.apply(&f)?;
                let res = ctx.class_residual(&u, &class) / class.norm().max(1.0);
                let via = table.apply(&f);
                let mut k: f64 = 0.0;
                for (p, &x) in points.iter().enumerate() {
                    k = k.max((&via[p] - u.evaluate(spec, x)?.mid).norm());
                }
                Ok((res, k / u.magnitude().max(1.0)))
            })
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
        report.push("resolvent solves (T - lambda) u = f", worst(results.iter().map(|r| r.0)), 1e-10, trials);
        report.push("kernel table reproduces the resolvent", worst(results.iter().map(|r| r.1)), 1e-9, trials);
    } else {
        report.warnings.push("L2(w) is trivial: resolvent checks skipped".into());
    }

    if let Some(ex) = example {
        example_checks(spec, ex, &restriction.relation, &space, &tmax, &seeds, tol, exec, &mut report)?;
    }
    Ok(report)
}

#[allow(clippy::too_many_arguments)]
fn example_checks(
    spec: &SystemSpec,
    ex: &ExampleSpec,
    relation: &PairSubspace,
    space: &L2wSpace,
    tmax: &PairSubspace,
    seeds: &[u64],
    tol: &Tolerances,
    exec: Execution,
    report: &mut VerifyReport,
) -> Result<()> {
    let lambda = C64::new(0.0, 2.0);
    let ctx = ResolventContext::new(spec, relation, lambda, tol)?;
    let mut points = vec![];
    for x in 1..=ex.num_atoms() {
        points.push(x as f64);
        points.push(x as f64 + 0.5);
    }
    let results = exec
        .map_range(seeds.len(), |t| -> Result<(f64, f64)> {
            let f = random_atomic_rhs(spec, seeds[t]);
            let f1: Vec<C64> = f.atoms.iter().map(|v| v[0]).collect();
            let u = ctx.apply(&f)?;
            let mut err: f64 = 0.0;
            let mut scale: f64 = 0.0;
            for &x in &points {
                let want = example_resolvent(ex, lambda, &f1, x);
                err = err.max((u.evaluate(spec, x)?.mid - &want).norm());
                scale = scale.max(want.norm());
            }
            let closed = example_norm_sq(lambda, &f1);
            let norm = space.class_of_path(&u).norm_squared();
            Ok((err / scale.max(f64::MIN_POSITIVE), (norm - closed).abs() / closed.max(f64::MIN_POSITIVE)))
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    report.push("example resolvent closed form", worst(results.iter().map(|r| r.0)), 1e-9, seeds.len());
    report.push("example norm identity", worst(results.iter().map(|r| r.1)), 1e-9, seeds.len());

    // T_max = (H x {0}) + ({0} x H_inf): u₁ equal on each pair, f₁ opposite
    let r = space.dim();
    let mut cols = Vec::new();
    for k in 0..ex.num_pairs() {
        for sign in [1.0, -1.0] {
            let mut values = vec![CVec::zeros(2); ex.num_atoms()];
            values[2 * k][0] = C64::new(1.0, 0.0);
            values[2 * k + 1][0] = C64::new(sign, 0.0);
            let class = space.class_of_values(&values);
            let mut pair = CVec::zeros(2 * r);
            let offset = if sign > 0.0 { 0 } else { r };
            pair.rows_mut(offset, r).copy_from(&class);
            cols.push(pair);
        }
    }
    let m = CMat::from_columns(&cols);
    let (q, _) = crate::linalg::column_space(&m, 1.0, tol.rank, "example decomposition")?;
    let angle = crate::linalg::max_angle_sine(&q, &tmax.basis);
    report.push("example maximal relation decomposes", angle, SUBSPACE_TOL, 1);
    Ok(())
}
