//! Spatial gradient tensors, the convex t-CTV, the non-convex mode-shuffled
//! NMS-t-CTV, and numerical checkers for the rank and TV-compatibility
//! inequalities relating them.

use serde::{Deserialize, Serialize};

use crate::error::{arg_err, dim_err, Error, Result};
use crate::tensor::{
    atv_norm, diff_matrix, mode_n_product, permute_p, tv_norm, DenseMatrix, Tensor3,
};
use crate::tsvd::{fourier_singular_values, mode_ntpnn, tnn, tubal_rank, Surrogate, RANK_TOL};

/// The two spatial gradient tensors of a map tensor `a` (`I1 x I2 x R`).
#[derive(Clone, Debug, PartialEq)]
pub struct GradientPair {
    pub g1: Tensor3,
    pub g2: Tensor3,
}

impl GradientPair {
    pub fn of(a: &Tensor3) -> Result<Self> {
        Ok(Self {
            g1: gradient_tensor(a, 1)?,
            g2: gradient_tensor(a, 2)?,
        })
    }

    pub fn get(&self, n: usize) -> &Tensor3 {
        if n == 1 {
            &self.g1
        } else {
            &self.g2
        }
    }
}

/// `a x_n D_{I_n}` for `n` in {1, 2, 3}.
pub fn gradient_tensor(a: &Tensor3, n: usize) -> Result<Tensor3> {
    if !(1..=3).contains(&n) {
        return arg_err(format!("gradient mode must be 1, 2 or 3, got {n}"));
    }
    let dim = a.shape()[n - 1];
    if dim < 2 {
        return dim_err(format!("mode-{n} gradient needs dimension >= 2, got {dim}"));
    }
    mode_n_product(a, &diff_matrix(dim)?, n)
}

/// Convex t-CTV: mean TNN of the gradient tensors along `modes`.
pub fn tctv(a: &Tensor3, modes: &[usize]) -> Result<f64> {
    if modes.is_empty() {
        return arg_err("t-CTV needs at least one mode");
    }
    let mut total = 0.0;
    for &n in modes {
        total += tnn(&gradient_tensor(a, n)?)?;
    }
    Ok(total / modes.len() as f64)
}

/// NMS-t-CTV: `(1/2) sum_n mode_ntpnn(a x_n D, 3 - n)`.
pub fn nms_tctv(a: &Tensor3, psi: &Surrogate) -> Result<f64> {
    let g = GradientPair::of(a)?;
    nms_tctv_of_gradients(&g.g1, &g.g2, psi)
}

/// NMS-t-CTV evaluated on already-formed gradient tensors.
pub fn nms_tctv_of_gradients(g1: &Tensor3, g2: &Tensor3, psi: &Surrogate) -> Result<f64> {
    Ok(0.5 * (mode_ntpnn(g1, 2, psi)? + mode_ntpnn(g2, 1, psi)?))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankReport {
    pub mode: usize,
    pub rank_z: usize,
    pub rank_gradient: usize,
    pub holds: bool,
}

/// Checks `rank(z) - 1 <= rank(a x_n D) <= rank(z)` for mode-(3-n) tubal ranks,
/// where `a = z x_3 s^T` is recovered through the semi-unitary `s`.
pub fn check_prop1_rank(z: &Tensor3, s: &DenseMatrix, n: usize, tol: f64) -> Result<RankReport> {
    if n != 1 && n != 2 {
        return arg_err(format!("rank check mode must be 1 or 2, got {n}"));
    }
    if s.rows() != z.shape()[2] {
        return dim_err(format!(
            "s has {} rows but z has {} bands",
            s.rows(),
            z.shape()[2]
        ));
    }
    let gram = s.transpose().matmul(s)?;
    let defect = gram.sub(&DenseMatrix::identity(s.cols()))?.frobenius_norm();
    if defect > tol {
        return Err(Error::Precondition(format!(
            "s is not semi-unitary: |s^T s - I|_F = {defect:.3e} > {tol:.1e}"
        )));
    }
    let a = mode_n_product(z, &s.transpose(), 3)?;
    let grad = gradient_tensor(&a, n)?;
    let rank_z = tubal_rank(&permute_p(z, 3 - n)?, RANK_TOL)?;
    let rank_gradient = tubal_rank(&permute_p(&grad, 3 - n)?, RANK_TOL)?;
    Ok(RankReport {
        mode: n,
        rank_z,
        rank_gradient,
        holds: rank_gradient + 1 >= rank_z && rank_gradient <= rank_z,
    })
}

/// One side of a sandwich inequality `lower <= value <= upper`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sandwich {
    pub lower: f64,
    pub value: f64,
    pub upper: f64,
    pub holds: bool,
}

impl Sandwich {
    fn new(lower: f64, value: f64, upper: f64) -> Self {
        // relative slack for rounding in the singular values
        let slack = 1e-10 * value.abs().max(upper.abs());
        Self {
            lower,
            value,
            upper,
            holds: lower <= value + slack && value <= upper + slack,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TvSandwichReport {
    /// Largest Fourier singular value of the permuted gradients.
    pub x_b: f64,
    /// `psi(x_b) / x_b`; lower-bound slope.
    pub b: f64,
    /// `psi'(0+)`; upper-bound slope.
    pub g: f64,
    /// `max(I1, I2)`.
    pub i_max: usize,
    /// Per-slice rank bound used in the nuclear-to-Frobenius step: the largest
    /// `min(rows, cols)` over the Fourier slices of both permuted gradients.
    pub k: usize,
    pub tv: Sandwich,
    pub atv: Sandwich,
}

impl TvSandwichReport {
    pub fn holds(&self) -> bool {
        self.tv.holds && self.atv.holds
    }
}

/// Evaluates both TV-compatibility chains for `a` with concrete constants.
///
/// Lower bounds use `b = psi(x_b)/x_b`, upper bounds the limiting slope `g`:
/// `b/(2 sqrt(I^m)) tv <= nms <= g sqrt(2k) tv` and
/// `b/(2 sqrt(I^m I1 I2 R)) atv <= nms <= g sqrt(k) atv`.
pub fn check_prop1_tv_sandwich(a: &Tensor3, psi: &Surrogate) -> Result<TvSandwichReport> {
    let [n1, n2, r] = a.shape();
    let grads = GradientPair::of(a)?;
    let p1 = permute_p(&grads.g1, 2)?;
    let p2 = permute_p(&grads.g2, 1)?;
    let x_b = fourier_singular_values(&p1)?
        .iter()
        .chain(fourier_singular_values(&p2)?.iter())
        .flatten()
        .fold(0.0f64, |m, &s| m.max(s));
    let k = [p1.shape(), p2.shape()]
        .iter()
        .map(|s| s[0].min(s[1]))
        .max()
        .unwrap_or(0);
    let value = nms_tctv_of_gradients(&grads.g1, &grads.g2, psi)?;
    let tv = tv_norm(a)?;
    let atv = atv_norm(a)?;
    let i_max = n1.max(n2);
    let g = psi.slope_at_zero();
    let b = if x_b > 0.0 { psi.value(x_b) / x_b } else { g };
    let lower_tv = b / (2.0 * (i_max as f64).sqrt()) * tv;
    let lower_atv = b / (2.0 * ((i_max * n1 * n2 * r) as f64).sqrt()) * atv;
    Ok(TvSandwichReport {
        x_b,
        b,
        g,
        i_max,
        k,
        tv: Sandwich::new(lower_tv, value, g * ((2 * k) as f64).sqrt() * tv),
        atv: Sandwich::new(lower_atv, value, g * (k as f64).sqrt() * atv),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tsvd::ntpnn;
    use nalgebra::DMatrix;
    use num_complex::Complex64;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(shape: [usize; 3], seed: u64) -> Tensor3 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Tensor3::from_fn(shape, |_, _, _| rng.random_range(-1.0..1.0))
    }

    fn semi_unitary(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0));
        let q = m.qr().q();
        DenseMatrix::from_fn(rows, cols, |i, j| q[(i, j)])
    }

    #[test]
    fn gradient_of_constant_is_zero() {
        let a = Tensor3::filled([4, 5, 2], 3.5);
        assert_eq!(gradient_tensor(&a, 1).unwrap().max_abs(), 0.0);
        assert_eq!(gradient_tensor(&a, 2).unwrap().max_abs(), 0.0);
        assert!(matches!(
            gradient_tensor(&Tensor3::zeros([1, 3, 2]), 1),
            Err(Error::InvalidDimension(_))
        ));
    }

    #[test]
    fn gradient_hand_example() {
        let a = Tensor3::from_vec([2, 2, 1], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let g = gradient_tensor(&a, 1).unwrap();
        assert_eq!(g.shape(), [1, 2, 1]);
        assert_eq!(g.data(), &[-2.0, -2.0]);
        let oracle = diff_matrix(2)
            .unwrap()
            .matmul(&DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap())
            .unwrap();
        assert_eq!(oracle.data(), g.data());
    }

    #[test]
    fn gradient_is_linear() {
        let a = random([4, 3, 2], 1);
        let b = random([4, 3, 2], 2);
        for n in 1..=2 {
            let lhs = gradient_tensor(&a.add(&b).unwrap(), n).unwrap();
            let rhs = gradient_tensor(&a, n)
                .unwrap()
                .add(&gradient_tensor(&b, n).unwrap())
                .unwrap();
            assert!(lhs.sub(&rhs).unwrap().max_abs() < 1e-14);
        }
    }

    #[test]
    fn tctv_cases() {
        assert_eq!(
            tctv(&Tensor3::filled([4, 4, 3], 1.0), &[1, 2]).unwrap(),
            0.0
        );
        let a = random([4, 4, 3], 3);
        let g1 = tnn(&gradient_tensor(&a, 1).unwrap()).unwrap();
        let g2 = tnn(&gradient_tensor(&a, 2).unwrap()).unwrap();
        assert_eq!(tctv(&a, &[1]).unwrap(), g1);
        assert!((tctv(&a, &[1, 2]).unwrap() - 0.5 * (g1 + g2)).abs() < 1e-12);
        assert!(matches!(tctv(&a, &[]), Err(Error::InvalidArgument(_))));
    }

    /// Composition oracle built from explicit index permutation, a naive DFT
    /// and nalgebra SVDs.
    fn nms_oracle(a: &Tensor3, gamma: f64) -> f64 {
        let [n1, n2, r] = a.shape();
        let psi = |x: f64| (gamma * x).ln_1p() / gamma.ln_1p();
        let g1 = Tensor3::from_fn([n1 - 1, n2, r], |i, j, k| a[(i, j, k)] - a[(i + 1, j, k)]);
        let g2 = Tensor3::from_fn([n1, n2 - 1, r], |i, j, k| a[(i, j, k)] - a[(i, j + 1, k)]);
        // mode-2 view of g1: slices (I1-1) x R indexed by j; mode-1 view of g2:
        // slices (I2-1) x R indexed by i
        let ntpnn_view = |rows: usize, tubes: usize, get: &dyn Fn(usize, usize, usize) -> f64| {
            let mut total = 0.0;
            for f in 0..tubes {
                let m = DMatrix::from_fn(rows, r, |p, q| {
                    (0..tubes)
                        .map(|t| {
                            let ang = -2.0 * std::f64::consts::PI * (f * t) as f64 / tubes as f64;
                            Complex64::from_polar(get(p, q, t), ang)
                        })
                        .sum::<Complex64>()
                });
                total += m.singular_values().iter().map(|&s| psi(s)).sum::<f64>();
            }
            total / tubes as f64
        };
        let v1 = ntpnn_view(n1 - 1, n2, &|p, q, t| g1[(p, t, q)]);
        let v2 = ntpnn_view(n2 - 1, n1, &|p, q, t| g2[(t, p, q)]);
        0.5 * (v1 + v2)
    }

    #[test]
    fn nms_tctv_matches_composition_oracle() {
        let psi = Surrogate::new(0.1).unwrap();
        assert_eq!(
            nms_tctv(&Tensor3::filled([5, 5, 3], 2.0), &psi).unwrap(),
            0.0
        );
        let a = random([5, 5, 3], 4);
        let v = nms_tctv(&a, &psi).unwrap();
        assert!((v - nms_oracle(&a, 0.1)).abs() < 1e-10);
        let b = random([6, 4, 2], 5);
        assert!((nms_tctv(&b, &psi).unwrap() - nms_oracle(&b, 0.1)).abs() < 1e-10);
        let shifted = a.map(|x| x + 7.25);
        assert!((nms_tctv(&shifted, &psi).unwrap() - v).abs() < 1e-10);
        let direct = 0.5
            * (ntpnn(
                &permute_p(&gradient_tensor(&a, 1).unwrap(), 2).unwrap(),
                &psi,
            )
            .unwrap()
                + ntpnn(
                    &permute_p(&gradient_tensor(&a, 2).unwrap(), 1).unwrap(),
                    &psi,
                )
                .unwrap());
        assert_eq!(v, direct);
    }

    #[test]
    fn rank_check_on_low_rank_maps() {
        // two rank-1 spatial maps mixed into three bands
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let u: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
        let v: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
        let w: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
        let a = Tensor3::from_fn([6, 5, 2], |i, j, k| {
            if k == 0 {
                u[i] * v[j]
            } else {
                w[i] * v[j] * 0.5
            }
        });
        let s = semi_unitary(4, 2, 7);
        let z = mode_n_product(&a, &s, 3).unwrap();
        for n in 1..=2 {
            let rep = check_prop1_rank(&z, &s, n, 1e-8).unwrap();
            assert!(rep.holds, "{rep:?}");
        }
    }

    #[test]
    fn rank_check_zero_and_precondition() {
        let s = semi_unitary(4, 2, 8);
        let rep = check_prop1_rank(&Tensor3::zeros([3, 3, 4]), &s, 1, 1e-8).unwrap();
        assert_eq!((rep.rank_z, rep.rank_gradient, rep.holds), (0, 0, true));
        let bad = DenseMatrix::from_fn(4, 2, |i, j| (i + j) as f64);
        assert!(matches!(
            check_prop1_rank(&Tensor3::zeros([3, 3, 4]), &bad, 1, 1e-8),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn tv_sandwich_zero_and_scaling() {
        let psi = Surrogate::new(0.1).unwrap();
        let rep = check_prop1_tv_sandwich(&Tensor3::zeros([4, 4, 2]), &psi).unwrap();
        assert!(rep.holds());
        assert_eq!(rep.tv.value, 0.0);
        let a = random([6, 6, 4], 9);
        for alpha in [1e-3, 1.0, 1e3] {
            let rep = check_prop1_tv_sandwich(&a.scale(alpha), &psi).unwrap();
            assert!(rep.holds(), "alpha {alpha}: {rep:?}");
            assert_eq!(rep.k, 4);
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn maps() -> impl Strategy<Value = Tensor3> {
            (2usize..=6, 2usize..=6, 1usize..=3).prop_flat_map(|(a, b, c)| {
                proptest::collection::vec(-3.0f64..3.0, a * b * c)
                    .prop_map(move |d| Tensor3::from_vec([a, b, c], d).unwrap())
            })
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(48))]

            #[test]
            fn nms_tctv_zero_iff_constant(a in maps(), c in -2.0f64..2.0, flat in any::<bool>()) {
                let psi = Surrogate::new(0.1).unwrap();
                let t = if flat {
                    let [n1, n2, r] = a.shape();
                    Tensor3::from_fn([n1, n2, r], |_, _, k| c + a[(0, 0, k)])
                } else {
                    a.clone()
                };
                let v = nms_tctv(&t, &psi).unwrap();
                let g = GradientPair::of(&t).unwrap();
                let zero_grad = g.g1.max_abs() <= 1e-12 && g.g2.max_abs() <= 1e-12;
                prop_assert_eq!(v <= 1e-10, zero_grad);
            }

            #[test]
            fn negation_invariance(a in maps()) {
                let psi = Surrogate::new(0.1).unwrap();
                let neg = a.scale(-1.0);
                prop_assert!((nms_tctv(&a, &psi).unwrap() - nms_tctv(&neg, &psi).unwrap()).abs() <= 1e-10);
                prop_assert!((tctv(&a, &[1, 2]).unwrap() - tctv(&neg, &[1, 2]).unwrap()).abs() <= 1e-10);
            }

            #[test]
            fn tv_sandwich_holds(a in maps(), gamma in 0.01f64..10.0) {
                let psi = Surrogate::new(gamma).unwrap();
                prop_assert!(check_prop1_tv_sandwich(&a, &psi).unwrap().holds());
            }
        }
    }
}
