//! Seeded random instances: general specs, purely atomic specs, specs with a
//! large space of zero-norm solutions, and right-hand sides that are
//! deliberately not in the range of the block system.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::greens::example::sigma;
use crate::linalg::{block_diag, real_matrix};
use crate::model::{jump_matrices, Atom, GapDensity, SystemSpec};
use crate::propagate::{propagate_path, BalancedPath, GapTransfer, RightHandSide};
use crate::{CMat, CVec, C64};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn uniform(rng: &mut ChaCha8Rng) -> f64 {
    2.0 * rng.random::<f64>() - 1.0
}

pub fn random_complex(rng: &mut ChaCha8Rng) -> C64 {
    C64::new(uniform(rng), uniform(rng))
}

pub fn random_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> CMat {
    CMat::from_fn(rows, cols, |_, _| random_complex(rng))
}

pub fn random_vector(n: usize, rng: &mut ChaCha8Rng) -> CVec {
    CVec::from_fn(n, |_, _| random_complex(rng))
}

pub fn random_hermitian(n: usize, scale: f64, rng: &mut ChaCha8Rng) -> CMat {
    let m = random_matrix(n, n, rng);
    (&m + m.adjoint()) * C64::new(0.5 * scale, 0.0)
}

/// `Σ v v*` over `rank` random vectors.
pub fn random_psd(n: usize, rank: usize, scale: f64, rng: &mut ChaCha8Rng) -> CMat {
    let v = random_matrix(n, rank, rng);
    &v * v.adjoint() * C64::new(scale, 0.0)
}

pub fn random_unitary(n: usize, rng: &mut ChaCha8Rng) -> CMat {
    if n == 0 {
        return CMat::zeros(0, 0);
    }
    random_matrix(n, n, rng).qr().q()
}

/// `J = i V diag(±d) V*` with `|d| ∈ [0.5, 1.5]`.
pub fn random_j(n: usize, rng: &mut ChaCha8Rng) -> CMat {
    let v = random_unitary(n, rng);
    let d = CMat::from_diagonal(&CVec::from_fn(n, |_, _| {
        let mag = 0.5 + rng.random::<f64>();
        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
        C64::new(0.0, sign * mag)
    }));
    &v * d * v.adjoint()
}

#[derive(Debug, Clone, Copy)]
pub struct SpecOptions {
    pub max_n: usize,
    pub min_atoms: usize,
    pub max_atoms: usize,
    /// Random `Q` densities on the gaps.
    pub q_densities: bool,
    /// Random `W` densities on the gaps (the weight is then not atomic).
    pub w_densities: bool,
}

impl SpecOptions {
    pub fn general() -> Self {
        SpecOptions {
            max_n: 4,
            min_atoms: 1,
            max_atoms: 6,
            q_densities: true,
            w_densities: true,
        }
    }

    pub fn atomic() -> Self {
        SpecOptions {
            w_densities: false,
            ..Self::general()
        }
    }
}

/// Atoms near `1, …, N` on `(0, N + 1)`.
fn positions(count: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (1..=count).map(|k| k as f64 + 0.3 * uniform(rng)).collect()
}

pub fn random_spec(opts: &SpecOptions, rng: &mut ChaCha8Rng) -> SystemSpec {
    let n = rng.random_range(1..=opts.max_n);
    let count = rng.random_range(opts.min_atoms..=opts.max_atoms);
    let j = random_j(n, rng);
    let atoms = positions(count, rng)
        .into_iter()
        .map(|x| {
            let rank = rng.random_range(1..=n);
            Atom {
                x,
                dq: random_hermitian(n, 1.5, rng),
                dw: random_psd(n, rank, 0.5, rng),
            }
        })
        .collect();
    let gaps = (0..=count)
        .map(|_| GapDensity {
            q: if opts.q_densities {
                random_hermitian(n, 0.5, rng)
            } else {
                CMat::zeros(n, n)
            },
            w: if opts.w_densities {
                random_psd(n, rng.random_range(0..=n), 0.3, rng)
            } else {
                CMat::zeros(n, n)
            },
        })
        .collect();
    SystemSpec::new(j, 0.0, count as f64 + 1.0, atoms, Some(gaps)).expect("shapes are consistent")
}

pub fn random_rhs(spec: &SystemSpec, rng: &mut ChaCha8Rng) -> RightHandSide {
    let n = spec.n();
    RightHandSide {
        gaps: (0..=spec.num_atoms()).map(|_| random_vector(n, rng)).collect(),
        atoms: (0..spec.num_atoms()).map(|_| random_vector(n, rng)).collect(),
    }
}

/// The alternating `∓σ` two-dimensional block on `count` atoms plus a
/// definite scalar block, mixed by a random congruence `P* · P`.
/// Zero-norm solutions live on every gap entered through an even atom.
pub fn l0_rich_spec(rng: &mut ChaCha8Rng) -> SystemSpec {
    let count = rng.random_range(2..=6);
    let j2 = real_matrix(2, 2, &[0.0, -1.0, 1.0, 0.0]);
    let i = C64::new(0.0, 1.0);
    let j = block_diag(&[j2, CMat::from_element(1, 1, i)]);
    let p = CMat::identity(3, 3) + random_matrix(3, 3, rng) * C64::new(0.3, 0.0);
    let congruent = |m: &CMat| p.adjoint() * m * &p;
    let atoms = positions(count, rng)
        .into_iter()
        .enumerate()
        .map(|(k, x)| {
            let s = if k % 2 == 0 { -sigma() } else { sigma() };
            let dq = block_diag(&[s, CMat::from_element(1, 1, C64::new(2.0 * uniform(rng), 0.0))]);
            let dw = block_diag(&[
                real_matrix(2, 2, &[2.0, 0.0, 0.0, 0.0]),
                CMat::from_element(1, 1, C64::new(0.5 + rng.random::<f64>(), 0.0)),
            ]);
            Atom {
                x,
                dq: congruent(&dq),
                dw: congruent(&dw),
            }
        })
        .collect();
    let gaps = (0..=count)
        .map(|_| {
            let mut q = CMat::zeros(3, 3);
            q[(2, 2)] = C64::new(uniform(rng), 0.0);
            GapDensity {
                q: congruent(&q),
                w: CMat::zeros(3, 3),
            }
        })
        .collect();
    SystemSpec::new(congruent(&j), 0.0, count as f64 + 1.0, atoms, Some(gaps)).expect("shapes are consistent")
}

/// A spec with a solution of the equation at real `λ` that vanishes near
/// both endpoints, and a right-hand side that pairs nontrivially with it.
#[derive(Debug, Clone)]
pub struct UnsolvableInstance {
    pub spec: SystemSpec,
    pub lambda: C64,
    pub rhs: RightHandSide,
    /// The vanishing solution.
    pub witness: BalancedPath,
}

/// Hermitian `H` with `H y = z`, valid when `y* z` is real.
fn hermitian_with_image(y: &CVec, z: &CVec) -> CMat {
    let yy = y.norm_squared();
    let yz = y.dotc(z);
    (z * y.adjoint() + y * z.adjoint()) / C64::new(yy, 0.0) - y * y.adjoint() * (yz / (yy * yy))
}

/// Real `c` is neutral for a real antisymmetric `J`. The first atom is chosen
/// so that `B₊ c = 0`, which lets a solution start from zero; it is carried
/// to the last atom, whose `Δq` is chosen so that `B₋ u⁻ = 0` there.
pub fn engineered_unsolvable(rng: &mut ChaCha8Rng) -> Result<UnsolvableInstance> {
    let n = 2;
    let count = rng.random_range(2..=6);
    let lambda = C64::new(2.0 * uniform(rng), 0.0);
    let j = real_matrix(2, 2, &[0.0, -1.0, 1.0, 0.0]) * C64::new(0.5 + rng.random::<f64>(), 0.0);
    let c1 = CVec::from_fn(n, |_, _| C64::new(uniform(rng), 0.0)).normalize();

    let mut atoms: Vec<Atom> = positions(count, rng)
        .into_iter()
        .map(|x| Atom {
            x,
            dq: random_hermitian(n, 1.5, rng),
            dw: random_psd(n, n, 0.5, rng),
        })
        .collect();
    let gaps: Vec<GapDensity> = (0..=count)
        .map(|_| GapDensity {
            q: random_hermitian(n, 0.5, rng),
            w: random_psd(n, n, 0.3, rng),
        })
        .collect();
    // B₊ = J + ½H vanishes on c₁ iff H c₁ = −2 J c₁
    let h1 = hermitian_with_image(&c1, &(&j * &c1 * C64::new(-2.0, 0.0)));
    atoms[0].dq = &h1 + &atoms[0].dw * lambda;

    let draft = SystemSpec::new(j.clone(), 0.0, count as f64 + 1.0, atoms.clone(), Some(gaps.clone()))?;
    let mut c = vec![CVec::zeros(n), c1];
    for k in 1..count - 1 {
        let minus = GapTransfer::new(&draft, k, lambda).end() * &c[k];
        let jumps = jump_matrices(&draft.atoms()[k], draft.j(), lambda);
        let plus = jumps.plus.clone().lu().solve(&(&jumps.minus * minus)).ok_or(Error::NotInKernel { residual: f64::INFINITY })?;
        c.push(plus);
    }
    let y = GapTransfer::new(&draft, count - 1, lambda).end() * &c[count - 1];
    // B₋ = J − ½H vanishes on y iff H y = 2 J y
    let h = hermitian_with_image(&y, &(&j * &y * C64::new(2.0, 0.0)));
    let last = count - 1;
    atoms[last].dq = &h + &atoms[last].dw * lambda;
    c.push(CVec::zeros(n));

    let spec = SystemSpec::new(j, 0.0, count as f64 + 1.0, atoms, Some(gaps))?;
    let zero = RightHandSide::zeros(&spec);
    let witness = propagate_path(&spec, lambda, &zero, c)?;
    let mut rhs = random_rhs(&spec, rng).scale(C64::new(0.1, 0.0));
    for (k, t) in witness.triples.iter().enumerate() {
        rhs.atoms[k] += &t.mid;
    }
    Ok(UnsolvableInstance {
        spec,
        lambda,
        rhs,
        witness,
    })
}
