use atomsys::assembly::solve_nonhomogeneous;
use atomsys::canonical::{canonicalize, class_difference, nk_spaces, TauGrid};
use atomsys::io::{parse_problem, problem_json};
use atomsys::linalg::{jacobi_svd, svd};
use atomsys::model::{generic_lambda, jump_matrices, Region};
use atomsys::propagate::{residual, GapTransfer};
use atomsys::random::{l0_rich_spec, random_complex, random_matrix, random_rhs, random_spec, rng, SpecOptions};
use atomsys::relations::{inner_product, l0_basis, tmax_subspace};
use atomsys::{BalancedPath, CMat, Execution, Tolerances, C64};
use proptest::prelude::*;

fn config() -> ProptestConfig {
    ProptestConfig::with_cases(48)
}

fn orthonormality(q: &CMat) -> f64 {
    (q.adjoint() * q - CMat::identity(q.ncols(), q.ncols())).norm()
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn gap_transfer_is_j_unitary(seed in any::<u64>(), re in -3.0..3.0f64, im in -3.0..3.0f64) {
        let mut r = rng(seed);
        let spec = random_spec(&SpecOptions::general(), &mut r);
        let lambda = C64::new(re, im);
        for g in 0..=spec.num_atoms() {
            let u = GapTransfer::new(&spec, g, lambda).end();
            let v = GapTransfer::new(&spec, g, lambda.conj()).end();
            let defect = (v.adjoint() * spec.j() * &u - spec.j()).norm();
            prop_assert!(defect < 1e-10 * (1.0 + u.norm() * v.norm()), "gap {g}: {defect:e}");
        }
    }

    #[test]
    fn atom_transfer_is_j_unitary(seed in any::<u64>(), re in -3.0..3.0f64, im in -3.0..3.0f64) {
        let mut r = rng(seed);
        let spec = random_spec(&SpecOptions::general(), &mut r);
        let lambda = C64::new(re, im);
        for atom in spec.atoms() {
            let p = jump_matrices(atom, spec.j(), lambda);
            let q = jump_matrices(atom, spec.j(), lambda.conj());
            let (Some(pi), Some(qi)) = (p.plus.clone().try_inverse(), q.plus.clone().try_inverse()) else { continue };
            let t = pi * &p.minus;
            let s = qi * &q.minus;
            let defect = (s.adjoint() * spec.j() * &t - spec.j()).norm();
            prop_assert!(defect < 1e-9 * (1.0 + t.norm() * s.norm()), "{defect:e}");
        }
    }

    #[test]
    fn inner_product_is_hermitian_and_positive(seed in any::<u64>()) {
        let mut r = rng(seed);
        let spec = random_spec(&SpecOptions::general(), &mut r);
        let f = random_rhs(&spec, &mut r);
        let g = random_rhs(&spec, &mut r);
        let fg = inner_product(&spec, &f, &g);
        let gf = inner_product(&spec, &g, &f);
        prop_assert!((fg - gf.conj()).norm() < 1e-12 * (1.0 + fg.norm()));
        let ff = inner_product(&spec, &f, &f);
        prop_assert!(ff.re >= -1e-12 && ff.im.abs() < 1e-12 * (1.0 + ff.re));
    }

    #[test]
    fn svd_reconstructs_rank_deficient_products(seed in any::<u64>(), rows in 1usize..9, cols in 1usize..9, rank in 0usize..5) {
        let mut r = rng(seed);
        let m = random_matrix(rows, rank, &mut r) * random_matrix(rank, cols, &mut r);
        for d in [svd(&m), if rows >= cols { jacobi_svd(&m) } else { svd(&m) }] {
            let s = CMat::from_diagonal(&d.singular.iter().map(|&x| C64::new(x, 0.0)).collect::<Vec<_>>().into());
            let back = &d.u * s * d.v.adjoint();
            prop_assert!((back - &m).norm() < 1e-12 * (1.0 + m.norm()));
            prop_assert!(orthonormality(&d.u) < 1e-12 && orthonormality(&d.v) < 1e-12);
            prop_assert!(d.singular.windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn solved_paths_satisfy_the_equation(seed in any::<u64>()) {
        let tol = Tolerances::default();
        let mut r = rng(seed);
        let spec = random_spec(&SpecOptions::general(), &mut r);
        let lambda = generic_lambda(&spec, Region::default(), seed, &tol).unwrap();
        let f = random_rhs(&spec, &mut r);
        let set = solve_nonhomogeneous(&spec, lambda, &f, &tol).unwrap();
        let coeffs: Vec<C64> = (0..set.dim()).map(|_| random_complex(&mut r)).collect();
        let path = set.path(&spec, &coeffs).unwrap();
        let report = residual(&spec, &path);
        prop_assert!(report.max < 1e-8 * (1.0 + path.magnitude()), "{:e}", report.max);
    }

    #[test]
    fn problem_files_round_trip(seed in any::<u64>()) {
        let mut r = rng(seed);
        let spec = random_spec(&SpecOptions::general(), &mut r);
        let f = random_rhs(&spec, &mut r);
        let text = problem_json(&spec, Some(&f), None).to_string();
        let back = parse_problem(&text).unwrap();
        prop_assert_eq!(back.spec, spec);
        prop_assert_eq!(back.rhs.unwrap(), f);
    }

    #[test]
    fn canonical_form_is_a_projection(seed in any::<u64>()) {
        let tol = Tolerances::default();
        let mut r = rng(seed);
        let spec = l0_rich_spec(&mut r);
        let tmax = tmax_subspace(&spec, &tol).unwrap();
        let l0 = l0_basis(&spec, &tol).unwrap();
        let nk = nk_spaces(&spec, &TauGrid::new(&spec), &l0, &tol).unwrap();
        let coeffs: Vec<C64> = (0..tmax.dim()).map(|_| random_complex(&mut r)).collect();
        let p = BalancedPath::combine(&spec, C64::new(0.0, 0.0), &tmax.paths, &coeffs).unwrap();
        let e = canonicalize(&spec, &p, &nk, &tol).unwrap();
        let scale = e.magnitude().max(1.0);
        prop_assert!(canonicalize(&spec, &e, &nk, &tol).unwrap().max_difference(&e) < 1e-12 * scale);
        prop_assert!(class_difference(&spec, &e, &p) < 1e-12 * scale);
    }

    #[test]
    fn execution_modes_agree(count in 0usize..200) {
        let f = |i: usize| (i as f64).sqrt().sin();
        prop_assert_eq!(Execution::Sequential.map_range(count, f), Execution::Parallel.map_range(count, f));
    }
}
