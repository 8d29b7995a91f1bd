//! Oracles that share no numerical code with the library: an adaptive
//! Runge-Kutta integrator, Gauss-Legendre quadrature, row reduction and the
//! hand-derived closed forms of the periodic example.

#![allow(dead_code)]

use atomsys::linalg::real_matrix;
use atomsys::model::{Atom, SystemSpec};
use atomsys::{CMat, CVec, C64};

/// Dormand-Prince 5(4) for `Y' = A Y`, `Y(0) = Y0`, integrated to `t`.
pub fn dopri_linear(a: &CMat, y0: &CMat, t: f64, rtol: f64) -> CMat {
    const A: [[f64; 6]; 7] = [
        [0.0; 6],
        [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
        [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
        [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
    ];
    const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
    const B4: [f64; 7] = [
        5179.0 / 57600.0,
        0.0,
        7571.0 / 16695.0,
        393.0 / 640.0,
        -92097.0 / 339200.0,
        187.0 / 2100.0,
        1.0 / 40.0,
    ];
    let mut y = y0.clone();
    let mut s = 0.0;
    let mut h = (t / 16.0).max(1e-6);
    while s < t {
        if s + h > t {
            h = t - s;
        }
        let mut k: Vec<CMat> = Vec::with_capacity(7);
        for i in 0..7 {
            let mut stage = y.clone();
            for (j, kj) in k.iter().enumerate() {
                if A[i][j] != 0.0 {
                    stage += kj * C64::new(h * A[i][j], 0.0);
                }
            }
            k.push(a * stage);
        }
        let mut y5 = y.clone();
        let mut y4 = y.clone();
        for i in 0..7 {
            y5 += &k[i] * C64::new(h * B5[i], 0.0);
            y4 += &k[i] * C64::new(h * B4[i], 0.0);
        }
        let err = (&y5 - &y4).norm() / (rtol * (1.0 + y5.norm()));
        if err <= 1.0 {
            s += h;
            y = y5;
        }
        let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h *= factor;
    }
    y
}

/// Gauss-Legendre nodes and weights on `[-1, 1]` by Newton iteration.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
    (x, w)
}

/// `Y(t)` at each of `ts` (any order) for `Y' = A Y`, `Y(0) = I`.
pub fn dopri_values(a: &CMat, ts: &[f64], rtol: f64) -> Vec<CMat> {
    let mut order: Vec<usize> = (0..ts.len()).collect();
    order.sort_by(|&i, &j| ts[i].total_cmp(&ts[j]));
    let mut out = vec![CMat::zeros(0, 0); ts.len()];
    let mut y = CMat::identity(a.nrows(), a.nrows());
    let mut t = 0.0;
    for i in order {
        if ts[i] > t {
            y = dopri_linear(a, &y, ts[i] - t, rtol);
            t = ts[i];
        }
        out[i] = y.clone();
    }
    out
}

/// Nodes and weights of composite Gauss-Legendre on `[0, len]`.
pub fn composite_rule(len: f64, nodes: usize, panels: usize) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(nodes);
    let h = len / panels as f64;
    let mut ts = Vec::new();
    let mut ws = Vec::new();
    for p in 0..panels {
        let mid = (p as f64 + 0.5) * h;
        for (xi, wi) in x.iter().zip(&w) {
            ts.push(mid + 0.5 * h * xi);
            ws.push(0.5 * h * wi);
        }
    }
    (ts, ws)
}

/// `∫_0^len g(t) dt` with `panels` composite Gauss-Legendre panels.
pub fn quadrature(len: f64, nodes: usize, panels: usize, mut g: impl FnMut(f64) -> CMat) -> CMat {
    let (x, w) = gauss_legendre(nodes);
    let h = len / panels as f64;
    let mut total: Option<CMat> = None;
    for p in 0..panels {
        let mid = (p as f64 + 0.5) * h;
        for (xi, wi) in x.iter().zip(&w) {
            let v = g(mid + 0.5 * h * xi) * C64::new(0.5 * h * wi, 0.0);
            total = Some(match total {
                None => v,
                Some(t) => t + v,
            });
        }
    }
    total.expect("at least one node")
}

/// Rank by Gaussian elimination with partial pivoting; entries below
/// `tol * max|m|` count as zero.
pub fn elimination_rank(m: &CMat, tol: f64) -> usize {
    rref(m, tol).1.len()
}

/// Reduced row echelon form and pivot columns.
pub fn rref(m: &CMat, tol: f64) -> (CMat, Vec<usize>) {
    let mut a = m.clone();
    let (rows, cols) = a.shape();
    let scale = a.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let thresh = tol * scale.max(f64::MIN_POSITIVE);
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        let (best, val) = (r..rows)
            .map(|i| (i, a[(i, c)].norm()))
            .fold((r, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if val <= thresh {
            continue;
        }
        a.swap_rows(r, best);
        let p = a[(r, c)];
        for j in 0..cols {
            a[(r, j)] /= p;
        }
        for i in 0..rows {
            if i != r {
                let factor = a[(i, c)];
                if factor.norm() > 0.0 {
                    for j in 0..cols {
                        let v = a[(r, j)];
                        a[(i, j)] -= factor * v;
                    }
                }
            }
        }
        pivots.push(c);
        r += 1;
    }
    (a, pivots)
}

/// Null space from the reduced row echelon form, one column per free variable.
pub fn rref_kernel(m: &CMat, tol: f64) -> CMat {
    let (a, pivots) = rref(m, tol);
    let cols = m.ncols();
    let free: Vec<usize> = (0..cols).filter(|c| !pivots.contains(c)).collect();
    let mut k = CMat::zeros(cols, free.len());
    for (t, &f) in free.iter().enumerate() {
        k[(f, t)] = C64::new(1.0, 0.0);
        for (r, &p) in pivots.iter().enumerate() {
            k[(p, t)] = -a[(r, f)];
        }
    }
    k
}

/// `B₊ c_{k+1} − B₋ c_k = 0` for every atom of a spec without densities,
/// assembled from the definition of the jump matrices.
pub fn hand_block_matrix(spec: &SystemSpec, lambda: C64) -> CMat {
    let n = spec.n();
    let big_n = spec.num_atoms();
    let mut m = CMat::zeros(n * big_n, n * (big_n + 1));
    for (k, atom) in spec.atoms().iter().enumerate() {
        let h = (&atom.dq - &atom.dw * lambda) * C64::new(0.5, 0.0);
        let plus = spec.j() + &h;
        let minus = spec.j() - &h;
        m.view_mut((n * k, n * k), (n, n)).copy_from(&(-minus));
        m.view_mut((n * k, n * (k + 1)), (n, n)).copy_from(&plus);
    }
    m
}

/// Gram matrix `Σ_k u#_k* Δw_k v#_k` of the solutions whose stacked initial
/// vectors are the columns of `k` (no densities, so `u# = (c_k + c_{k+1}) / 2`).
pub fn hand_gram(spec: &SystemSpec, kernel: &CMat) -> CMat {
    let n = spec.n();
    let d = kernel.ncols();
    let mut g = CMat::zeros(d, d);
    for (k, atom) in spec.atoms().iter().enumerate() {
        let mids: Vec<CVec> = (0..d)
            .map(|c| {
                let col = kernel.column(c);
                (col.rows(n * k, n) + col.rows(n * (k + 1), n)) * C64::new(0.5, 0.0)
            })
            .collect();
        for a in 0..d {
            for b in 0..d {
                g[(a, b)] += mids[a].dotc(&(&atom.dw * &mids[b]));
            }
        }
    }
    g
}

pub fn j2() -> CMat {
    real_matrix(2, 2, &[0.0, -1.0, 1.0, 0.0])
}

pub fn sigma() -> CMat {
    real_matrix(2, 2, &[0.0, 2.0, 2.0, 0.0])
}

/// Two atoms at 1 and 2 on (0, 3): `q = σ(δ₁ − δ₂)`, `w = diag(2, 0)(δ₁ + δ₂)`.
pub fn two_atom_spec() -> SystemSpec {
    let dw = real_matrix(2, 2, &[2.0, 0.0, 0.0, 0.0]);
    let atoms = vec![
        Atom { x: 1.0, dq: sigma(), dw: dw.clone() },
        Atom { x: 2.0, dq: -sigma(), dw },
    ];
    SystemSpec::new(j2(), 0.0, 3.0, atoms, None).unwrap()
}

/// Solution of the periodic example with first components `f1` at the atoms
/// `1, …, 4M`, from the two jump equations across each odd gap:
/// `α = −(f₁(2k−1) + f₁(2k))/λ`, `β = −(f₁(2k−1) − f₁(2k))/2` on `(2k−1, 2k)`,
/// zero on every other gap; balanced at integers.
pub fn hand_resolvent(lambda: C64, f1: &[C64], x: f64) -> CVec {
    let on_gap = |y: f64| -> CVec {
        let i = y.floor() as i64;
        let pairs = f1.len() as i64 / 2;
        if i >= 1 && i % 2 == 1 && (i + 1) / 2 <= pairs {
            let (a, b) = (f1[(i - 1) as usize], f1[i as usize]);
            CVec::from_vec(vec![-(a + b) / lambda, -(a - b) * 0.5])
        } else {
            CVec::zeros(2)
        }
    };
    if x == x.floor() {
        (on_gap(x - 0.5) + on_gap(x + 0.5)) * C64::new(0.5, 0.0)
    } else {
        on_gap(x)
    }
}
