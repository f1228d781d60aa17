//! Full-reference quality metrics (PSNR, ERGAS, SAM, SSIM) and the bicubic
//! interpolation baseline.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{arg_err, dim_err, Error, Result};
use crate::tensor::{mode_n_product, DenseMatrix, Tensor3};

pub const PSNR_CAP_DB: f64 = 100.0;
pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;

fn same_shape(a: &Tensor3, b: &Tensor3) -> Result<()> {
    if a.shape() != b.shape() {
        return dim_err(format!(
            "reference {:?} and estimate {:?} differ in shape",
            a.shape(),
            b.shape()
        ));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PsnrMode {
    /// Mean of per-band PSNR values.
    #[default]
    PerBand,
    /// One PSNR over the whole cube.
    Flattened,
}

impl FromStr for PsnrMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "per-band" => Ok(Self::PerBand),
            "flattened" => Ok(Self::Flattened),
            other => arg_err(format!(
                "psnr mode must be `per-band` or `flattened`, got {other:?}"
            )),
        }
    }
}

fn psnr_from_mse(mse: f64, peak: f64, cap: f64) -> f64 {
    if mse == 0.0 {
        cap
    } else {
        (10.0 * (peak * peak / mse).log10()).min(cap)
    }
}

/// Per-band averaged PSNR in dB, zero-error bands scoring [`PSNR_CAP_DB`].
pub fn psnr(reference: &Tensor3, estimate: &Tensor3, peak: f64) -> Result<f64> {
    psnr_with(reference, estimate, peak, PsnrMode::PerBand, PSNR_CAP_DB)
}

pub fn psnr_with(
    reference: &Tensor3,
    estimate: &Tensor3,
    peak: f64,
    mode: PsnrMode,
    cap: f64,
) -> Result<f64> {
    same_shape(reference, estimate)?;
    if !(peak > 0.0) {
        return arg_err(format!("peak must be positive, got {peak}"));
    }
    let [n1, n2, n3] = reference.shape();
    let sq = band_sums(&reference.sub(estimate)?.map(|v| v * v));
    Ok(match mode {
        PsnrMode::PerBand => {
            sq.iter()
                .map(|&s| psnr_from_mse(s / (n1 * n2) as f64, peak, cap))
                .sum::<f64>()
                / n3 as f64
        }
        PsnrMode::Flattened => {
            psnr_from_mse(sq.iter().sum::<f64>() / reference.len() as f64, peak, cap)
        }
    })
}

fn band_sums(t: &Tensor3) -> Vec<f64> {
    let n3 = t.shape()[2];
    let mut sums = vec![0.0; n3];
    for tube in t.data().chunks(n3) {
        for (s, v) in sums.iter_mut().zip(tube) {
            *s += v;
        }
    }
    sums
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErgasOutput {
    pub value: f64,
    /// Bands skipped because the reference band mean is zero.
    pub excluded_bands: Vec<usize>,
}

/// ERGAS with resolution ratio `ratio`, e.g. the spatial downsampling factor.
pub fn ergas(reference: &Tensor3, estimate: &Tensor3, ratio: f64) -> Result<f64> {
    Ok(ergas_detailed(reference, estimate, ratio)?.value)
}

pub fn ergas_detailed(reference: &Tensor3, estimate: &Tensor3, ratio: f64) -> Result<ErgasOutput> {
    same_shape(reference, estimate)?;
    if !(ratio > 0.0) {
        return arg_err(format!("resolution ratio must be positive, got {ratio}"));
    }
    let [n1, n2, _] = reference.shape();
    let pixels = (n1 * n2) as f64;
    let means = band_sums(reference);
    let sq = band_sums(&reference.sub(estimate)?.map(|v| v * v));
    let mut excluded = Vec::new();
    let mut acc = 0.0;
    let mut used = 0usize;
    for (b, (&m, &s)) in means.iter().zip(&sq).enumerate() {
        let mu = m / pixels;
        if mu == 0.0 {
            excluded.push(b);
            continue;
        }
        acc += (s / pixels) / (mu * mu);
        used += 1;
    }
    if used == 0 {
        return Err(Error::UndefinedMetric(
            "ERGAS: every reference band has zero mean".into(),
        ));
    }
    Ok(ErgasOutput {
        value: 100.0 / ratio * (acc / used as f64).sqrt(),
        excluded_bands: excluded,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamOutput {
    /// Mean spectral angle in degrees.
    pub value: f64,
    /// Pixels skipped because either spectrum is zero.
    pub skipped_pixels: usize,
}

/// Mean spectral angle in degrees.
pub fn sam(reference: &Tensor3, estimate: &Tensor3) -> Result<f64> {
    Ok(sam_detailed(reference, estimate)?.value)
}

pub fn sam_detailed(reference: &Tensor3, estimate: &Tensor3) -> Result<SamOutput> {
    same_shape(reference, estimate)?;
    let n3 = reference.shape()[2];
    let mut total = 0.0;
    let mut counted = 0usize;
    let mut skipped = 0usize;
    for (r, e) in reference.data().chunks(n3).zip(estimate.data().chunks(n3)) {
        let dot: f64 = r.iter().zip(e).map(|(a, b)| a * b).sum();
        let nr = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        let ne = e.iter().map(|v| v * v).sum::<f64>().sqrt();
        if nr == 0.0 || ne == 0.0 {
            skipped += 1;
            continue;
        }
        total += (dot / (nr * ne)).clamp(-1.0, 1.0).acos();
        counted += 1;
    }
    if counted == 0 {
        return Err(Error::UndefinedMetric(
            "SAM: every pixel has a zero spectrum".into(),
        ));
    }
    Ok(SamOutput {
        value: (total / counted as f64).to_degrees(),
        skipped_pixels: skipped,
    })
}

fn gaussian_window(size: usize, sigma: f64) -> Vec<f64> {
    let half = (size / 2) as f64;
    let w: Vec<f64> = (0..size)
        .map(|i| {
            let d = i as f64 - half;
            (-d * d / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|v| v / total).collect()
}

/// Separable "valid" filtering of an `rows x cols` row-major image.
fn filter_valid(img: &[f64], rows: usize, cols: usize, w: &[f64]) -> Vec<f64> {
    let k = w.len();
    let (out_r, out_c) = (rows - k + 1, cols - k + 1);
    let mut tmp = vec![0.0; rows * out_c];
    for r in 0..rows {
        for c in 0..out_c {
            tmp[r * out_c + c] = (0..k).map(|t| w[t] * img[r * cols + c + t]).sum();
        }
    }
    let mut out = vec![0.0; out_r * out_c];
    for r in 0..out_r {
        for c in 0..out_c {
            out[r * out_c + c] = (0..k).map(|t| w[t] * tmp[(r + t) * out_c + c]).sum();
        }
    }
    out
}

fn band(t: &Tensor3, b: usize) -> Vec<f64> {
    let n3 = t.shape()[2];
    t.data().iter().skip(b).step_by(n3).copied().collect()
}

/// Mean single-scale SSIM over bands (11x11 Gaussian window, sigma 1.5,
/// `C1 = (0.01 peak)^2`, `C2 = (0.03 peak)^2`, valid window positions).
pub fn ssim(reference: &Tensor3, estimate: &Tensor3, peak: f64) -> Result<f64> {
    same_shape(reference, estimate)?;
    let [n1, n2, n3] = reference.shape();
    if n1 < SSIM_WINDOW || n2 < SSIM_WINDOW {
        return dim_err(format!(
            "SSIM needs at least {SSIM_WINDOW}x{SSIM_WINDOW} pixels, got {n1}x{n2}"
        ));
    }
    if !(peak > 0.0) {
        return arg_err(format!("peak must be positive, got {peak}"));
    }
    let w = gaussian_window(SSIM_WINDOW, SSIM_SIGMA);
    let c1 = (0.01 * peak).powi(2);
    let c2 = (0.03 * peak).powi(2);
    let mut total = 0.0;
    for b in 0..n3 {
        let x = band(reference, b);
        let y = band(estimate, b);
        let prod = |f: &dyn Fn(f64, f64) -> f64| {
            x.iter()
                .zip(&y)
                .map(|(&a, &c)| f(a, c))
                .collect::<Vec<f64>>()
        };
        let mx = filter_valid(&x, n1, n2, &w);
        let my = filter_valid(&y, n1, n2, &w);
        let sxx = filter_valid(&prod(&|a, _| a * a), n1, n2, &w);
        let syy = filter_valid(&prod(&|_, c| c * c), n1, n2, &w);
        let sxy = filter_valid(&prod(&|a, c| a * c), n1, n2, &w);
        let mut acc = 0.0;
        for i in 0..mx.len() {
            let (ux, uy) = (mx[i], my[i]);
            let vx = sxx[i] - ux * ux;
            let vy = syy[i] - uy * uy;
            let cov = sxy[i] - ux * uy;
            acc += ((2.0 * ux * uy + c1) * (2.0 * cov + c2))
                / ((ux * ux + uy * uy + c1) * (vx + vy + c2));
        }
        total += acc / mx.len() as f64;
    }
    Ok(total / n3 as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub psnr: f64,
    pub ergas: f64,
    pub sam: f64,
    pub ssim: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricOptions {
    /// Defaults to the reference maximum.
    pub peak: Option<f64>,
    /// Spatial resolution ratio used by ERGAS.
    pub ratio: f64,
    pub psnr_mode: PsnrMode,
    pub psnr_cap: f64,
}

impl MetricOptions {
    pub fn with_ratio(ratio: f64) -> Self {
        Self {
            peak: None,
            ratio,
            psnr_mode: PsnrMode::PerBand,
            psnr_cap: PSNR_CAP_DB,
        }
    }
}

/// All four metrics of `estimate` against `reference`.
pub fn evaluate(
    reference: &Tensor3,
    estimate: &Tensor3,
    opts: &MetricOptions,
) -> Result<MetricReport> {
    let peak = match opts.peak {
        Some(p) => p,
        None => reference.max(),
    };
    Ok(MetricReport {
        psnr: psnr_with(reference, estimate, peak, opts.psnr_mode, opts.psnr_cap)?,
        ergas: ergas(reference, estimate, opts.ratio)?,
        sam: sam(reference, estimate)?,
        ssim: ssim(reference, estimate, peak)?,
    })
}

/// Keys cubic convolution kernel with `a = -0.5`.
fn keys(t: f64) -> f64 {
    const A: f64 = -0.5;
    let t = t.abs();
    if t <= 1.0 {
        (A + 2.0) * t * t * t - (A + 3.0) * t * t + 1.0
    } else if t < 2.0 {
        A * t * t * t - 5.0 * A * t * t + 8.0 * A * t - 4.0 * A
    } else {
        0.0
    }
}

/// Interpolation matrix: output `p` samples the input at `p / factor`, so
/// input sample `k` sits on output pixel `k factor`; borders replicate.
pub fn cubic_interpolation_matrix(n_in: usize, factor: usize) -> Result<DenseMatrix> {
    if n_in == 0 || factor == 0 {
        return arg_err("interpolation needs a non-empty input and factor >= 1");
    }
    let mut m = DenseMatrix::zeros(n_in * factor, n_in);
    for p in 0..n_in * factor {
        let u = p as f64 / factor as f64;
        let base = u.floor();
        let frac = u - base;
        for off in -1i64..=2 {
            let idx = (base as i64 + off).clamp(0, n_in as i64 - 1) as usize;
            m.set(p, idx, m.get(p, idx) + keys(frac - off as f64));
        }
    }
    Ok(m)
}

/// Per-band bicubic upsampling by an integer factor on both spatial axes.
pub fn bicubic_upsample(x: &Tensor3, factor: usize) -> Result<Tensor3> {
    let [m1, m2, _] = x.shape();
    let rows = cubic_interpolation_matrix(m1, factor)?;
    let cols = cubic_interpolation_matrix(m2, factor)?;
    mode_n_product(&mode_n_product(x, &rows, 1)?, &cols, 2)
}
