//! t-product algebra, the t-SVD, convex and non-convex tensor nuclear norms
//! and the singular-value proximal operator.
//!
//! Everything here works slice-wise in the mode-3 Fourier domain. For real
//! inputs the Fourier slices come in conjugate pairs (`k` and `I3 - k`), so
//! only the first `I3 / 2 + 1` slices are factorized and the rest are filled in
//! by conjugation, which also keeps the inverse transform exactly real.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{arg_err, dim_err, Error, Result};
use crate::tensor::{fft_mode3, ifft_mode3, permute_p, ComplexTensor3, Tensor3};

const SVD_EPS: f64 = 1e-15;
const SVD_MAX_ITER: usize = 10_000;

/// Relative threshold for numerical rank decisions.
pub const RANK_TOL: f64 = 1e-8;

/// The log surrogate `psi(x) = ln(gamma x + 1) / ln(gamma + 1)`.
///
/// It is concave and nondecreasing with `psi(0) = 0` and `psi(1) = 1`; its
/// derivative is convex, nonincreasing and bounded by `gamma / ln(gamma + 1)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Surrogate {
    gamma: f64,
    log_norm: f64,
}

impl Surrogate {
    pub fn new(gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return arg_err(format!(
                "surrogate gamma must be positive and finite, got {gamma}"
            ));
        }
        Ok(Self {
            gamma,
            log_norm: gamma.ln_1p(),
        })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn value(&self, x: f64) -> f64 {
        (self.gamma * x).ln_1p() / self.log_norm
    }

    pub fn derivative(&self, x: f64) -> f64 {
        self.gamma / ((self.gamma * x + 1.0) * self.log_norm)
    }

    /// `lim_{x -> 0+} psi'(x)`, which also bounds `psi(x) / x` from above.
    pub fn slope_at_zero(&self) -> f64 {
        self.gamma / self.log_norm
    }
}

/// Thin SVD of one Fourier slice, singular values descending.
#[derive(Clone, Debug)]
pub(crate) struct SliceSvd {
    pub u: DMatrix<Complex64>,
    pub s: Vec<f64>,
    pub v_t: DMatrix<Complex64>,
}

impl SliceSvd {
    fn conj(&self) -> SliceSvd {
        SliceSvd {
            u: self.u.map(|c| c.conj()),
            s: self.s.clone(),
            v_t: self.v_t.map(|c| c.conj()),
        }
    }
}

fn slice_svd(m: DMatrix<Complex64>, slice: usize) -> Result<SliceSvd> {
    let svd = m
        .try_svd(true, true, SVD_EPS, SVD_MAX_ITER)
        .ok_or(Error::Factorization { slice })?;
    let (u, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => return Err(Error::Factorization { slice }),
    };
    let sv: Vec<f64> = svd.singular_values.iter().copied().collect();
    if sv.iter().any(|v| !v.is_finite()) {
        return Err(Error::Factorization { slice });
    }
    // stable: ties keep the factorization's own order
    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&a, &b| sv[b].total_cmp(&sv[a]));
    Ok(SliceSvd {
        u: u.select_columns(order.iter()),
        s: order.iter().map(|&i| sv[i]).collect(),
        v_t: v_t.select_rows(order.iter()),
    })
}

fn slice_singular_values(m: DMatrix<Complex64>, slice: usize) -> Result<Vec<f64>> {
    let mut sv: Vec<f64> = m
        .try_svd(false, false, SVD_EPS, SVD_MAX_ITER)
        .ok_or(Error::Factorization { slice })?
        .singular_values
        .iter()
        .copied()
        .collect();
    if sv.iter().any(|v| !v.is_finite()) {
        return Err(Error::Factorization { slice });
    }
    sv.sort_by(|a, b| b.total_cmp(a));
    Ok(sv)
}

/// Indices of the Fourier slices that must be factorized explicitly.
fn independent_slices(n3: usize, exploit_symmetry: bool) -> usize {
    if exploit_symmetry {
        n3 / 2 + 1
    } else {
        n3
    }
}

pub(crate) fn fourier_slice_svds(
    f: &ComplexTensor3,
    exploit_symmetry: bool,
) -> Result<Vec<SliceSvd>> {
    let n3 = f.shape()[2];
    let head = independent_slices(n3, exploit_symmetry);
    let mut svds = (0..head)
        .into_par_iter()
        .map(|k| slice_svd(f.slice_matrix(k), k))
        .collect::<Result<Vec<_>>>()?;
    for k in head..n3 {
        let mirrored = svds[n3 - k].conj();
        svds.push(mirrored);
    }
    Ok(svds)
}

/// Singular values of every mode-3 Fourier slice, each sorted descending.
pub fn fourier_singular_values(t: &Tensor3) -> Result<Vec<Vec<f64>>> {
    let f = fft_mode3(t);
    let n3 = t.shape()[2];
    let head = independent_slices(n3, true);
    let mut out = (0..head)
        .into_par_iter()
        .map(|k| slice_singular_values(f.slice_matrix(k), k))
        .collect::<Result<Vec<_>>>()?;
    for k in head..n3 {
        let mirrored = out[n3 - k].clone();
        out.push(mirrored);
    }
    Ok(out)
}

/// t-product `a * b` computed slice-wise in the Fourier domain.
pub fn t_product(a: &Tensor3, b: &Tensor3) -> Result<Tensor3> {
    let [m, k, n3] = a.shape();
    let [k2, n, n3b] = b.shape();
    if k != k2 || n3 != n3b {
        return dim_err(format!(
            "t-product needs (I1,K,I3) * (K,I2,I3); got {:?} * {:?}",
            a.shape(),
            b.shape()
        ));
    }
    let fa = fft_mode3(a);
    let fb = fft_mode3(b);
    let mut out = ComplexTensor3::zeros([m, n, n3]);
    for s in 0..n3 {
        out.set_slice(s, &(fa.slice_matrix(s) * fb.slice_matrix(s)));
    }
    ifft_mode3(&out)
}

/// Tensor conjugate transpose: transpose every frontal slice and reverse the
/// order of slices 2..I3.
pub fn t_transpose(t: &Tensor3) -> Tensor3 {
    let [n1, n2, n3] = t.shape();
    Tensor3::from_fn([n2, n1, n3], |i, j, k| t[(j, i, (n3 - k) % n3)])
}

/// Factors of `t = u * s * v^T` (t-products).
#[derive(Clone, Debug)]
pub struct TSvdFactors {
    pub u: Tensor3,
    pub s: Tensor3,
    pub v: Tensor3,
}

impl TSvdFactors {
    pub fn reconstruct(&self) -> Result<Tensor3> {
        t_product(&t_product(&self.u, &self.s)?, &t_transpose(&self.v))
    }
}

/// Extends the orthonormal columns of `q` to an orthonormal basis of C^n.
fn complete_basis(q: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let n = q.nrows();
    let mut cols: Vec<nalgebra::DVector<Complex64>> =
        q.column_iter().map(|c| c.into_owned()).collect();
    let mut candidates: Vec<usize> = (0..n).collect();
    while cols.len() < n {
        // pick the coordinate vector with the largest residual
        let mut best: Option<(usize, nalgebra::DVector<Complex64>, f64)> = None;
        for (pos, &e) in candidates.iter().enumerate() {
            let mut v = nalgebra::DVector::<Complex64>::zeros(n);
            v[e] = Complex64::new(1.0, 0.0);
            for _ in 0..2 {
                for c in &cols {
                    let proj = c.dotc(&v);
                    v -= c * proj;
                }
            }
            let norm = v.norm();
            if best.as_ref().is_none_or(|b| norm > b.2) {
                best = Some((pos, v, norm));
            }
        }
        let (pos, v, norm) = best.expect("candidates remain while basis is incomplete");
        candidates.remove(pos);
        cols.push(v / Complex64::new(norm, 0.0));
    }
    DMatrix::from_columns(&cols)
}

/// Full t-SVD. `u` is `I1 x I1 x I3`, `s` is `I1 x I2 x I3` f-diagonal and `v`
/// is `I2 x I2 x I3`.
pub fn t_svd(t: &Tensor3) -> Result<TSvdFactors> {
    let [n1, n2, n3] = t.shape();
    let f = fft_mode3(t);
    let head = independent_slices(n3, true);
    let full = (0..head)
        .into_par_iter()
        .map(|k| {
            let svd = slice_svd(f.slice_matrix(k), k)?;
            let u = complete_basis(&svd.u);
            let v = complete_basis(&svd.v_t.adjoint());
            Ok((u, svd.s, v))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut fu = ComplexTensor3::zeros([n1, n1, n3]);
    let mut fs = ComplexTensor3::zeros([n1, n2, n3]);
    let mut fv = ComplexTensor3::zeros([n2, n2, n3]);
    for k in 0..n3 {
        let (src, conj) = if k < head { (k, false) } else { (n3 - k, true) };
        let (u, s, v) = &full[src];
        let fix = |m: &DMatrix<Complex64>| if conj { m.map(|c| c.conj()) } else { m.clone() };
        fu.set_slice(k, &fix(u));
        fv.set_slice(k, &fix(v));
        for (j, &sv) in s.iter().enumerate() {
            fs.set(j, j, k, Complex64::new(sv, 0.0));
        }
    }
    Ok(TSvdFactors {
        u: ifft_mode3(&fu)?,
        s: ifft_mode3(&fs)?,
        v: ifft_mode3(&fv)?,
    })
}

/// Tensor nuclear norm: mean over Fourier slices of the slice nuclear norms.
pub fn tnn(t: &Tensor3) -> Result<f64> {
    let n3 = t.shape()[2] as f64;
    let sv = fourier_singular_values(t)?;
    Ok(sv.iter().flatten().sum::<f64>() / n3)
}

/// Non-convex pseudo nuclear norm: `psi` applied to every Fourier singular
/// value, averaged over slices.
pub fn ntpnn(t: &Tensor3, psi: &Surrogate) -> Result<f64> {
    let n3 = t.shape()[2] as f64;
    let sv = fourier_singular_values(t)?;
    Ok(sv.iter().flatten().map(|&s| psi.value(s)).sum::<f64>() / n3)
}

/// Mode-`n` NTPNN: [`ntpnn`] of [`permute_p`]`(t, n)`.
pub fn mode_ntpnn(t: &Tensor3, n: usize, psi: &Surrogate) -> Result<f64> {
    ntpnn(&permute_p(t, n)?, psi)
}

/// Global minimizer of `psi(x) + rho (x - s)^2` over `x >= 0`.
///
/// Stationary points solve `gamma x^2 + (1 - gamma s) x + gamma / (2 rho L) - s = 0`
/// with `L = ln(1 + gamma)`; the best positive root is compared against `x = 0`.
pub fn scalar_prox(s: f64, rho: f64, psi: &Surrogate) -> f64 {
    if s <= 0.0 {
        return 0.0;
    }
    let g = psi.gamma;
    let objective = |x: f64| psi.value(x) + rho * (x - s) * (x - s);
    let b = 1.0 - g * s;
    let c = g / (2.0 * rho * psi.log_norm) - s;
    let disc = (1.0 + g * s).powi(2) - 2.0 * g * g / (rho * psi.log_norm);
    let mut best = 0.0;
    let mut best_val = rho * s * s;
    if disc >= 0.0 {
        let q = -0.5 * (b + b.signum() * disc.sqrt());
        let mut roots = [q / g, f64::NAN];
        if q != 0.0 {
            roots[1] = c / q;
        }
        for r in roots {
            if r.is_finite() && r > 0.0 {
                let v = objective(r);
                if v < best_val {
                    best = r;
                    best_val = v;
                }
            }
        }
    }
    best
}

/// Proximal map of `ntpnn(., psi) / rho` in the `|.|_F^2` metric: every
/// Fourier singular value `sigma` of `c` is replaced by
/// `scalar_prox(sigma, rho, psi)`.
pub fn ntpnn_prox(c: &Tensor3, rho: f64, psi: &Surrogate) -> Result<Tensor3> {
    ntpnn_prox_with(c, rho, psi, true)
}

pub(crate) fn ntpnn_prox_with(
    c: &Tensor3,
    rho: f64,
    psi: &Surrogate,
    exploit_symmetry: bool,
) -> Result<Tensor3> {
    if !(rho > 0.0 && rho.is_finite()) {
        return arg_err(format!("prox penalty must be positive, got {rho}"));
    }
    let f = fft_mode3(c);
    let svds = fourier_slice_svds(&f, exploit_symmetry)?;
    let mut out = ComplexTensor3::zeros(c.shape());
    for (k, svd) in svds.iter().enumerate() {
        let shrunk: Vec<f64> = svd.s.iter().map(|&s| scalar_prox(s, rho, psi)).collect();
        let mut us = svd.u.clone();
        for (j, &x) in shrunk.iter().enumerate() {
            us.column_mut(j).scale_mut(x);
        }
        out.set_slice(k, &(us * &svd.v_t));
    }
    ifft_mode3(&out)
}

/// Numerical tubal rank: the largest count, over Fourier slices, of singular
/// values above `rel_tol` times the largest singular value of the tensor.
pub fn tubal_rank(t: &Tensor3, rel_tol: f64) -> Result<usize> {
    let sv = fourier_singular_values(t)?;
    let smax = sv.iter().flatten().fold(0.0f64, |m, &s| m.max(s));
    if smax == 0.0 {
        return Ok(0);
    }
    Ok(sv
        .iter()
        .map(|slice| slice.iter().filter(|&&s| s > rel_tol * smax).count())
        .max()
        .unwrap_or(0))
}
