//! Built-in reference problem: `J = [[0, −1], [1, 0]]`,
//! `q = σ Σ (δ_{2k} − δ_{2k+1})` with `σ = [[0, 2], [2, 0]]` and
//! `w = diag(2, 0) Σ δ_k`, truncated to the atoms `1, …, 4M` on
//! `(1/2, 4M + 1/2)`. Every solution is constant between integers, which
//! gives closed forms for resolvents, norms and the kernel.

use crate::error::{Error, Result};
use crate::linalg::real_matrix;
use crate::model::{Atom, SystemSpec};
use crate::{CMat, CVec, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExampleSpec {
    pub m: usize,
}

pub fn example_spec(m: usize) -> Result<ExampleSpec> {
    if m == 0 {
        return Err(Error::Shape("the example needs M >= 1".into()));
    }
    Ok(ExampleSpec { m })
}

pub fn sigma() -> CMat {
    real_matrix(2, 2, &[0.0, 2.0, 2.0, 0.0])
}

impl ExampleSpec {
    pub fn num_atoms(&self) -> usize {
        4 * self.m
    }

    pub fn interval(&self) -> (f64, f64) {
        (0.5, 4.0 * self.m as f64 + 0.5)
    }

    /// Odd atoms carry `Δq = −σ`, even atoms `Δq = σ`; all carry `Δw = diag(2, 0)`.
    pub fn spec(&self) -> SystemSpec {
        let atoms = (1..=self.num_atoms())
            .map(|x| Atom {
                x: x as f64,
                dq: if x % 2 == 1 { -sigma() } else { sigma() },
                dw: real_matrix(2, 2, &[2.0, 0.0, 0.0, 0.0]),
            })
            .collect();
        let (a, b) = self.interval();
        SystemSpec::new(real_matrix(2, 2, &[0.0, -1.0, 1.0, 0.0]), a, b, atoms, None)
            .expect("example data has consistent shapes")
    }

    /// Number of odd gaps `(2k − 1, 2k)`.
    pub fn num_pairs(&self) -> usize {
        2 * self.m
    }
}

/// `(α, β)` on the gap `(2k − 1, 2k)`, `k = 1, …, 2M`, from adding and
/// subtracting the two jump equations. `f1[i]` is `f_1` at atom `i + 1`.
pub fn alpha_beta(lambda: C64, f1: &[C64], k: usize) -> (C64, C64) {
    let (odd, even) = (f1[2 * k - 2], f1[2 * k - 1]);
    (-(odd + even) / lambda, -(odd - even) * 0.5)
}

/// Pair index `k` if `x` lies in the open gap `(2k − 1, 2k)`.
fn odd_gap_of(x: f64, pairs: usize) -> Option<usize> {
    let i = x.floor();
    if x == i || i < 1.0 {
        return None;
    }
    let i = i as usize;
    if i % 2 == 1 && i.div_ceil(2) <= pairs {
        Some(i.div_ceil(2))
    } else {
        None
    }
}

/// Closed-form resolvent: `(α_k, β_k)` on odd gaps, zero elsewhere, and the
/// balanced average at integers.
pub fn example_resolvent(ex: &ExampleSpec, lambda: C64, f1: &[C64], x: f64) -> CVec {
    let value = |y: f64| -> CVec {
        match odd_gap_of(y, ex.num_pairs()) {
            Some(k) => {
                let (a, b) = alpha_beta(lambda, f1, k);
                CVec::from_vec(vec![a, b])
            }
            None => CVec::zeros(2),
        }
    };
    if x == x.floor() {
        (value(x - 0.5) + value(x + 0.5)) * C64::new(0.5, 0.0)
    } else {
        value(x)
    }
}

/// `‖ℛ_λ f‖² = |λ|⁻² Σ_k |f_1(2k − 1) + f_1(2k)|²`.
pub fn example_norm_sq(lambda: C64, f1: &[C64]) -> f64 {
    f1.chunks(2).map(|p| (p[0] + p[1]).norm_sqr()).sum::<f64>() / lambda.norm_sqr()
}

/// `Σ_k 2 |u_1(k)|²` over the atoms, for any list of balanced first components.
pub fn weighted_norm_sq(u1: &[C64]) -> f64 {
    u1.iter().map(|z| 2.0 * z.norm_sqr()).sum()
}

/// How the indicator of the gap closure is evaluated at its endpoints in `y`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EndpointWeight {
    /// `χ#(y) = 1/2` at `y = 2k − 1, 2k`.
    Balanced,
    /// `χ(y) = 1` on the closed gap.
    Closed,
}

/// The displayed kernel
/// `[−λ⁻¹ e₁₁ + ½ [[0, 1], [−1, 0]] sgn(x − y)] χ_{(2k−1,2k)}(x) χ_{(2k−1,2k)}(y)`,
/// halved at integer `x` using the one-sided limit from inside the gap.
pub fn example_green(ex: &ExampleSpec, x: f64, y: f64, lambda: C64, weight: EndpointWeight) -> CMat {
    let pairs = ex.num_pairs();
    // locate x: the odd gap it belongs to, an x-weight, and a side for sgn at x = y
    let (k, wx, side) = if x == x.floor() {
        let i = x as i64;
        if i >= 1 && i % 2 == 1 && (i as usize).div_ceil(2) <= pairs {
            ((i as usize).div_ceil(2), 0.5, 1.0)
        } else if i >= 2 && i % 2 == 0 && (i as usize) / 2 <= pairs {
            ((i as usize) / 2, 0.5, -1.0)
        } else {
            return CMat::zeros(2, 2);
        }
    } else {
        match odd_gap_of(x, pairs) {
            Some(k) => (k, 1.0, 0.0),
            None => return CMat::zeros(2, 2),
        }
    };
    let lo = (2 * k - 1) as f64;
    let hi = (2 * k) as f64;
    let wy = if y > lo && y < hi {
        1.0
    } else if y == lo || y == hi {
        match weight {
            EndpointWeight::Balanced => 0.5,
            EndpointWeight::Closed => 1.0,
        }
    } else {
        return CMat::zeros(2, 2);
    };
    let diff = x - y;
    let sgn = if diff > 0.0 {
        1.0
    } else if diff < 0.0 {
        -1.0
    } else {
        side
    };
    let mut g = real_matrix(2, 2, &[0.0, 0.5 * sgn, -0.5 * sgn, 0.0]);
    g[(0, 0)] -= C64::new(1.0, 0.0) / lambda;
    g * C64::new(wx * wy, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{bad_lambda_set, jump_matrices, validate, xi_set};
    use crate::tol::Tolerances;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn data_matches_jump_matrices() {
        let ex = example_spec(2).unwrap();
        let spec = ex.spec();
        let tol = Tolerances::default();
        assert!(validate(&spec, &tol).passed());
        let lam = c(0.3, 1.7);
        let odd = jump_matrices(&spec.atoms()[0], spec.j(), lam);
        let expect_minus = CMat::from_row_slice(2, 2, &[lam, c(0.0, 0.0), c(2.0, 0.0), c(0.0, 0.0)]);
        let expect_plus = CMat::from_row_slice(2, 2, &[-lam, c(-2.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        assert!((odd.minus - expect_minus).norm() < 1e-15);
        assert!((odd.plus - expect_plus).norm() < 1e-15);
        let even = jump_matrices(&spec.atoms()[1], spec.j(), lam);
        let expect_minus = CMat::from_row_slice(2, 2, &[lam, c(-2.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        let expect_plus = CMat::from_row_slice(2, 2, &[-lam, c(0.0, 0.0), c(2.0, 0.0), c(0.0, 0.0)]);
        assert!((even.minus - expect_minus).norm() < 1e-15);
        assert!((even.plus - expect_plus).norm() < 1e-15);
        assert!(bad_lambda_set(&spec.atoms()[0], spec.j(), &tol).is_all());
        assert_eq!(xi_set(&spec, lam, &tol).len(), 8);
    }

    #[test]
    fn closed_forms_agree() {
        let ex = example_spec(1).unwrap();
        let lam = c(0.0, 2.0);
        let f1 = [c(1.0, 0.0), c(0.5, -1.0), c(-2.0, 0.0), c(0.0, 3.0)];
        let u1: Vec<C64> = (1..=4).map(|x| example_resolvent(&ex, lam, &f1, x as f64)[0]).collect();
        assert!((weighted_norm_sq(&u1) - example_norm_sq(lam, &f1)).abs() < 1e-12);
        let zero = [c(0.0, 0.0); 4];
        assert_eq!(example_resolvent(&ex, lam, &zero, 1.5), CVec::zeros(2));
        // even gaps and end gaps carry nothing
        assert_eq!(example_resolvent(&ex, lam, &f1, 2.5), CVec::zeros(2));
        assert_eq!(example_resolvent(&ex, lam, &f1, 0.75), CVec::zeros(2));
    }

    #[test]
    fn balanced_kernel_reproduces_resolvent() {
        let ex = example_spec(1).unwrap();
        let lam = c(1.0, 1.0);
        let f1 = [c(1.0, 0.5), c(-0.5, 0.0), c(0.25, 2.0), c(1.0, -1.0)];
        for &x in &[1.0, 1.3, 2.0, 3.0, 3.9, 4.0, 2.5] {
            let direct = example_resolvent(&ex, lam, &f1, x);
            for (weight, factor) in [(EndpointWeight::Balanced, 1.0), (EndpointWeight::Closed, 2.0)] {
                let mut sum = CVec::zeros(2);
                for (i, &f) in f1.iter().enumerate() {
                    let g = example_green(&ex, x, (i + 1) as f64, lam, weight);
                    // w f at atom y is diag(2, 0) (f₁, ·)
                    sum += g.column(0) * (f * 2.0);
                }
                assert!((sum - &direct * C64::new(factor, 0.0)).norm() < 1e-14, "x = {x}");
            }
        }
    }
}
