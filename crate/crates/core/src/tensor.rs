//! Dense third-order tensors, dense matrices and the mode-wise primitives
//! (unfolding, mode-n products, permutations, tube FFTs, TV norms) that the
//! rest of the crate is built from.
//!
//! Storage is row-major with mode 1 slowest, so element `(i1, i2, i3)` lives at
//! `(i1 * I2 + i2) * I3 + i3` and every mode-3 tube is contiguous.

use std::ops::{Index, IndexMut};

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{arg_err, dim_err, Error, Result};

/// Imaginary residue tolerated when collapsing an inverse FFT back to reals.
pub const IMAG_RESIDUE_TOL: f64 = 1e-8;

/// Dense real matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return dim_err(format!(
                "matrix {rows}x{cols} needs {} entries, got {}",
                rows * cols,
                data.len()
            ));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("matrix entries must be finite".into()));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return dim_err("ragged rows");
        }
        Self::from_vec(r, c, rows.concat())
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    pub fn transpose(&self) -> DenseMatrix {
        DenseMatrix::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    pub fn matmul(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != other.rows {
            return dim_err(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            ));
        }
        let mut out = DenseMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == 0.0 {
                    continue;
                }
                for (o, b) in out_row.iter_mut().zip(other.row(k)) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn matvec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.cols {
            return dim_err(format!(
                "matrix has {} columns, vector has {} entries",
                self.cols,
                v.len()
            ));
        }
        Ok((0..self.rows)
            .map(|r| self.row(r).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect())
    }

    pub fn sub(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.rows != other.rows || self.cols != other.cols {
            return dim_err("matrix shapes differ");
        }
        Ok(DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a - b)
                .collect(),
        })
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub(crate) fn to_nalgebra(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }

    pub(crate) fn from_nalgebra(m: &nalgebra::DMatrix<f64>) -> DenseMatrix {
        DenseMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
    }
}

/// The `(n-1) x n` first-order forward difference matrix: `1` on the
/// diagonal, `-1` on the superdiagonal.
pub fn diff_matrix(n: usize) -> Result<DenseMatrix> {
    if n < 2 {
        return dim_err(format!("difference matrix needs n >= 2, got {n}"));
    }
    let mut d = DenseMatrix::zeros(n - 1, n);
    for i in 0..n - 1 {
        d.set(i, i, 1.0);
        d.set(i, i + 1, -1.0);
    }
    Ok(d)
}

/// Dense real third-order tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor3 {
    shape: [usize; 3],
    data: Vec<f64>,
}

impl Tensor3 {
    pub fn zeros(shape: [usize; 3]) -> Self {
        Self {
            shape,
            data: vec![0.0; shape.iter().product()],
        }
    }

    pub fn filled(shape: [usize; 3], value: f64) -> Self {
        Self {
            shape,
            data: vec![value; shape.iter().product()],
        }
    }

    pub fn from_vec(shape: [usize; 3], data: Vec<f64>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if data.len() != n {
            return dim_err(format!(
                "tensor {:?} needs {n} entries, got {}",
                shape,
                data.len()
            ));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("tensor entries must be finite".into()));
        }
        Ok(Self { shape, data })
    }

    pub fn from_fn(shape: [usize; 3], mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(shape.iter().product());
        for i in 0..shape[0] {
            for j in 0..shape[1] {
                for k in 0..shape[2] {
                    data.push(f(i, j, k));
                }
            }
        }
        Self { shape, data }
    }

    /// t-product identity: first frontal slice is `I_n`, the rest are zero.
    pub fn identity(n: usize, tubes: usize) -> Self {
        Self::from_fn(
            [n, n, tubes],
            |i, j, k| {
                if i == j && k == 0 {
                    1.0
                } else {
                    0.0
                }
            },
        )
    }

    #[inline]
    pub fn shape(&self) -> [usize; 3] {
        self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    fn offset(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.shape[1] + j) * self.shape[2] + k
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Entrywise absolute sum.
    pub fn l1_norm(&self) -> f64 {
        self.data.iter().map(|v| v.abs()).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor3 {
        Tensor3 {
            shape: self.shape,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn scale(&self, alpha: f64) -> Tensor3 {
        self.map(|v| alpha * v)
    }

    fn zip_with(&self, other: &Tensor3, f: impl Fn(f64, f64) -> f64) -> Result<Tensor3> {
        if self.shape != other.shape {
            return dim_err(format!(
                "shape mismatch {:?} vs {:?}",
                self.shape, other.shape
            ));
        }
        Ok(Tensor3 {
            shape: self.shape,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn add(&self, other: &Tensor3) -> Result<Tensor3> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Tensor3) -> Result<Tensor3> {
        self.zip_with(other, |a, b| a - b)
    }

    /// In place `self += alpha * other`.
    pub fn axpy(&mut self, alpha: f64, other: &Tensor3) -> Result<()> {
        if self.shape != other.shape {
            return dim_err(format!(
                "shape mismatch {:?} vs {:?}",
                self.shape, other.shape
            ));
        }
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * b;
        }
        Ok(())
    }

    pub fn dot(&self, other: &Tensor3) -> Result<f64> {
        if self.shape != other.shape {
            return dim_err("shape mismatch in inner product");
        }
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum())
    }

    /// Frontal slice `(:, :, k)` as a matrix.
    pub fn frontal_slice(&self, k: usize) -> DenseMatrix {
        DenseMatrix::from_fn(self.shape[0], self.shape[1], |i, j| self[(i, j, k)])
    }

    /// Mode-3 tube at `(i, j)`.
    pub fn tube(&self, i: usize, j: usize) -> &[f64] {
        let o = self.offset(i, j, 0);
        &self.data[o..o + self.shape[2]]
    }
}

impl Index<(usize, usize, usize)> for Tensor3 {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j, k): (usize, usize, usize)) -> &f64 {
        &self.data[self.offset(i, j, k)]
    }
}

impl IndexMut<(usize, usize, usize)> for Tensor3 {
    #[inline]
    fn index_mut(&mut self, (i, j, k): (usize, usize, usize)) -> &mut f64 {
        let o = self.offset(i, j, k);
        &mut self.data[o]
    }
}

/// Complex third-order tensor; in practice the mode-3 DFT image of a
/// [`Tensor3`].
#[derive(Clone, Debug)]
pub struct ComplexTensor3 {
    shape: [usize; 3],
    data: Vec<Complex64>,
}

impl ComplexTensor3 {
    pub fn zeros(shape: [usize; 3]) -> Self {
        Self {
            shape,
            data: vec![Complex64::new(0.0, 0.0); shape.iter().product()],
        }
    }

    pub fn shape(&self) -> [usize; 3] {
        self.shape
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> Complex64 {
        self.data[(i * self.shape[1] + j) * self.shape[2] + k]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, v: Complex64) {
        self.data[(i * self.shape[1] + j) * self.shape[2] + k] = v;
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Frontal slice `k` as an nalgebra matrix.
    pub fn slice_matrix(&self, k: usize) -> nalgebra::DMatrix<Complex64> {
        nalgebra::DMatrix::from_fn(self.shape[0], self.shape[1], |i, j| self.get(i, j, k))
    }

    pub fn set_slice(&mut self, k: usize, m: &nalgebra::DMatrix<Complex64>) {
        debug_assert_eq!(m.shape(), (self.shape[0], self.shape[1]));
        for i in 0..self.shape[0] {
            for j in 0..self.shape[1] {
                self.set(i, j, k, m[(i, j)]);
            }
        }
    }
}

fn check_mode(mode: usize) -> Result<usize> {
    if !(1..=3).contains(&mode) {
        return arg_err(format!("mode must be 1, 2 or 3, got {mode}"));
    }
    Ok(mode - 1)
}

/// Mode-`mode` unfolding. Row index is `i_mode`; the column index enumerates
/// the two remaining modes with the lower-numbered one varying fastest.
pub fn unfold(t: &Tensor3, mode: usize) -> Result<DenseMatrix> {
    let m = check_mode(mode)?;
    let [n1, n2, n3] = t.shape;
    let mut out = DenseMatrix::zeros(t.shape[m], t.len() / t.shape[m].max(1));
    for i in 0..n1 {
        for j in 0..n2 {
            for k in 0..n3 {
                let (r, c) = match m {
                    0 => (i, j + n2 * k),
                    1 => (j, i + n1 * k),
                    _ => (k, i + n1 * j),
                };
                out.set(r, c, t[(i, j, k)]);
            }
        }
    }
    Ok(out)
}

/// Inverse of [`unfold`].
pub fn fold(mat: &DenseMatrix, mode: usize, shape: [usize; 3]) -> Result<Tensor3> {
    let m = check_mode(mode)?;
    let total: usize = shape.iter().product();
    if mat.rows() != shape[m] || mat.rows() * mat.cols() != total {
        return dim_err(format!(
            "cannot fold {}x{} matrix along mode {mode} into {:?}",
            mat.rows(),
            mat.cols(),
            shape
        ));
    }
    let [n1, n2, _] = shape;
    Ok(Tensor3::from_fn(shape, |i, j, k| {
        let (r, c) = match m {
            0 => (i, j + n2 * k),
            1 => (j, i + n1 * k),
            _ => (k, i + n1 * j),
        };
        mat.get(r, c)
    }))
}

/// Mode-n product `t x_mode m`: contracts mode `mode` of `t` with the columns
/// of `m`.
pub fn mode_n_product(t: &Tensor3, m: &DenseMatrix, mode: usize) -> Result<Tensor3> {
    let md = check_mode(mode)?;
    if m.cols() != t.shape[md] {
        return dim_err(format!(
            "mode-{mode} product: matrix has {} columns but tensor dimension is {}",
            m.cols(),
            t.shape[md]
        ));
    }
    let [n1, n2, n3] = t.shape;
    let mut shape = t.shape;
    shape[md] = m.rows();
    let mut out = Tensor3::zeros(shape);
    match md {
        0 => {
            let slab = n2 * n3;
            for r in 0..m.rows() {
                let dst = &mut out.data[r * slab..(r + 1) * slab];
                for (c, &w) in m.row(r).iter().enumerate() {
                    if w == 0.0 {
                        continue;
                    }
                    for (d, s) in dst.iter_mut().zip(&t.data[c * slab..(c + 1) * slab]) {
                        *d += w * s;
                    }
                }
            }
        }
        1 => {
            let rows = m.rows();
            for i in 0..n1 {
                for r in 0..rows {
                    let o = (i * rows + r) * n3;
                    for (c, &w) in m.row(r).iter().enumerate() {
                        if w == 0.0 {
                            continue;
                        }
                        let s = (i * n2 + c) * n3;
                        for k in 0..n3 {
                            out.data[o + k] += w * t.data[s + k];
                        }
                    }
                }
            }
        }
        _ => {
            let rows = m.rows();
            for (tube, dst) in t.data.chunks_exact(n3).zip(out.data.chunks_exact_mut(rows)) {
                for (r, d) in dst.iter_mut().enumerate() {
                    *d = m.row(r).iter().zip(tube).map(|(a, b)| a * b).sum();
                }
            }
        }
    }
    Ok(out)
}

/// General permutation with MATLAB `permute` semantics: output dimension `d`
/// is input dimension `order[d]` (zero-based here).
pub fn permute(t: &Tensor3, order: [usize; 3]) -> Result<Tensor3> {
    let mut seen = [false; 3];
    for &o in &order {
        if o > 2 || seen[o] {
            return arg_err(format!("{order:?} is not a permutation of [0, 1, 2]"));
        }
        seen[o] = true;
    }
    let shape = [t.shape[order[0]], t.shape[order[1]], t.shape[order[2]]];
    Ok(Tensor3::from_fn(shape, |a, b, c| {
        let mut idx = [0usize; 3];
        idx[order[0]] = a;
        idx[order[1]] = b;
        idx[order[2]] = c;
        t[(idx[0], idx[1], idx[2])]
    }))
}

fn permute_p_order(n: usize) -> Result<[usize; 3]> {
    match n {
        // [3 - n, 3, n] in one-based terms
        1 => Ok([1, 2, 0]),
        2 => Ok([0, 2, 1]),
        _ => arg_err(format!("permutation index must be 1 or 2, got {n}")),
    }
}

/// `permute(t, [3-n, 3, n])`, which moves mode `n` to the tube direction.
pub fn permute_p(t: &Tensor3, n: usize) -> Result<Tensor3> {
    permute(t, permute_p_order(n)?)
}

/// Inverse of [`permute_p`].
pub fn inverse_permute_p(t: &Tensor3, n: usize) -> Result<Tensor3> {
    let order = permute_p_order(n)?;
    let mut inv = [0usize; 3];
    for (d, &o) in order.iter().enumerate() {
        inv[o] = d;
    }
    permute(t, inv)
}

/// Unnormalized forward DFT along every mode-3 tube.
pub fn fft_mode3(t: &Tensor3) -> ComplexTensor3 {
    let n3 = t.shape[2];
    let mut data: Vec<Complex64> = t.data.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    if n3 > 1 {
        let fft = FftPlanner::<f64>::new().plan_fft_forward(n3);
        fft.process(&mut data);
    }
    ComplexTensor3 {
        shape: t.shape,
        data,
    }
}

/// Inverse DFT along mode-3 tubes with `1/I3` normalization, kept complex.
pub fn ifft_mode3_complex(f: &ComplexTensor3) -> ComplexTensor3 {
    let n3 = f.shape[2];
    let mut data = f.data.clone();
    if n3 > 1 {
        let ifft = FftPlanner::<f64>::new().plan_fft_inverse(n3);
        ifft.process(&mut data);
        let s = 1.0 / n3 as f64;
        for v in &mut data {
            *v *= s;
        }
    }
    ComplexTensor3 {
        shape: f.shape,
        data,
    }
}

/// Inverse DFT along mode-3 tubes, collapsed to a real tensor. Fails if the
/// imaginary part exceeds `IMAG_RESIDUE_TOL` relative to the real part.
pub fn ifft_mode3(f: &ComplexTensor3) -> Result<Tensor3> {
    let c = ifft_mode3_complex(f);
    let re: f64 = c.data.iter().map(|v| v.re * v.re).sum::<f64>().sqrt();
    let im: f64 = c.data.iter().map(|v| v.im * v.im).sum::<f64>().sqrt();
    if im > IMAG_RESIDUE_TOL * re {
        return Err(Error::Numerical(format!(
            "inverse FFT left imaginary residue {im:e} against real norm {re:e}"
        )));
    }
    Ok(Tensor3 {
        shape: c.shape,
        data: c.data.iter().map(|v| v.re).collect(),
    })
}

fn spatial_gradients(t: &Tensor3) -> Result<(Tensor3, Tensor3)> {
    let [n1, n2, _] = t.shape;
    if n1 < 2 || n2 < 2 {
        return dim_err(format!(
            "TV norms need both spatial dimensions >= 2, got {n1}x{n2}"
        ));
    }
    Ok((
        mode_n_product(t, &diff_matrix(n1)?, 1)?,
        mode_n_product(t, &diff_matrix(n2)?, 2)?,
    ))
}

/// Isotropic-in-norm TV: `sqrt(|t x1 D|_F^2 + |t x2 D|_F^2)`.
pub fn tv_norm(t: &Tensor3) -> Result<f64> {
    let (g1, g2) = spatial_gradients(t)?;
    Ok((g1.frobenius_norm().powi(2) + g2.frobenius_norm().powi(2)).sqrt())
}

/// Anisotropic TV: `|t x1 D|_1 + |t x2 D|_1` with entrywise absolute sums.
pub fn atv_norm(t: &Tensor3) -> Result<f64> {
    let (g1, g2) = spatial_gradients(t)?;
    Ok(g1.l1_norm() + g2.l1_norm())
}
