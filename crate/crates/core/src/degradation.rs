//! Spatial and spectral degradation operators, forward simulation of the
//! observed HSI/MSI pair, and a seeded synthetic scene generator.
//!
//! Synthetic scenes draw from `ChaCha8Rng` (the ChaCha stream cipher with 8
//! rounds, as implemented by `rand_chacha`) seeded with `seed_from_u64`, so a
//! given seed yields the same scene on every platform.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{arg_err, dim_err, Error, Result};
use crate::linalg::orthonormalize_columns;
use crate::tensor::{mode_n_product, DenseMatrix, Tensor3};

/// Landsat-7 ETM+ reflective bands (nm).
pub const LANDSAT7_BANDS: [(f64, f64); 6] = [
    (450.0, 520.0),
    (520.0, 600.0),
    (630.0, 690.0),
    (760.0, 900.0),
    (1550.0, 1750.0),
    (2080.0, 2350.0),
];

/// Approximate IKONOS-like response as four rectangular bands: blue, green,
/// red and near infrared (nm).
pub const IKONOS_BANDS: [(f64, f64); 4] = [
    (450.0, 520.0),
    (520.0, 600.0),
    (630.0, 690.0),
    (760.0, 900.0),
];

pub const DEFAULT_SIGMA: f64 = 3.3973;
pub const DEFAULT_KERNEL_SIZE: usize = 9;

/// Uniform wavelength grid over 400-2500 nm inclusive.
pub fn wavelength_grid(n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![400.0],
        _ => (0..n)
            .map(|k| 400.0 + 2100.0 * k as f64 / (n - 1) as f64)
            .collect(),
    }
}

/// Normalized, centered 1-D Gaussian taps.
pub fn gaussian_kernel_1d(size: usize, sigma: f64) -> Result<Vec<f64>> {
    if size.is_multiple_of(2) {
        return arg_err(format!("kernel size must be odd, got {size}"));
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return arg_err(format!("kernel sigma must be positive, got {sigma}"));
    }
    let half = (size / 2) as f64;
    let taps: Vec<f64> = (0..size)
        .map(|i| {
            let k = i as f64 - half;
            (-k * k / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let total: f64 = taps.iter().sum();
    Ok(taps.into_iter().map(|t| t / total).collect())
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    /// Periodic extension; the blur matrix is circulant.
    #[default]
    Circular,
}

/// `(big_dim / factor) x big_dim` blur-then-decimate matrix: circular
/// convolution with `kernel`, keeping samples `0, factor, 2 factor, ...`.
pub fn build_spatial_degradation(
    big_dim: usize,
    factor: usize,
    kernel: &[f64],
    boundary: Boundary,
) -> Result<DenseMatrix> {
    let Boundary::Circular = boundary;
    if factor == 0 || big_dim == 0 || !big_dim.is_multiple_of(factor) {
        return dim_err(format!(
            "dimension {big_dim} is not divisible by factor {factor}"
        ));
    }
    if kernel.is_empty() || kernel.len().is_multiple_of(2) {
        return arg_err(format!("kernel length must be odd, got {}", kernel.len()));
    }
    let half = kernel.len() / 2;
    let mut p = DenseMatrix::zeros(big_dim / factor, big_dim);
    for r in 0..big_dim / factor {
        let center = r * factor;
        for (k, &w) in kernel.iter().enumerate() {
            let col = (center + k + big_dim * kernel.len() - half) % big_dim;
            p.set(r, col, p.get(r, col) + w);
        }
    }
    Ok(p)
}

/// Band-averaging response: row `b` puts weight `1/k` on each of the `k`
/// wavelengths inside `[low, high]`.
pub fn build_spectral_response(bands: &[(f64, f64)], wavelengths: &[f64]) -> Result<DenseMatrix> {
    if bands.is_empty() {
        return arg_err("spectral response needs at least one band");
    }
    let mut p = DenseMatrix::zeros(bands.len(), wavelengths.len());
    for (b, &(lo, hi)) in bands.iter().enumerate() {
        let inside: Vec<usize> = (0..wavelengths.len())
            .filter(|&k| wavelengths[k] >= lo && wavelengths[k] <= hi)
            .collect();
        if inside.is_empty() {
            return arg_err(format!(
                "band {b} ({lo}-{hi} nm) contains no wavelength sample"
            ));
        }
        let w = 1.0 / inside.len() as f64;
        for k in inside {
            p.set(b, k, w);
        }
    }
    Ok(p)
}

/// Parses a band table: one `low_nm high_nm` pair per line, `#` starts a
/// comment.
pub fn parse_band_table(text: &str) -> Result<Vec<(f64, f64)>> {
    let mut bands = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |msg: String| Error::Config { line: idx + 1, msg };
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 2 {
            return Err(err(format!("expected `low high`, got {line:?}")));
        }
        let lo: f64 = fields[0]
            .parse()
            .map_err(|_| err(format!("bad number {:?}", fields[0])))?;
        let hi: f64 = fields[1]
            .parse()
            .map_err(|_| err(format!("bad number {:?}", fields[1])))?;
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(err(format!("invalid band range {lo}..{hi}")));
        }
        bands.push((lo, hi));
    }
    if bands.is_empty() {
        return Err(Error::Config {
            line: 0,
            msg: "band table is empty".into(),
        });
    }
    Ok(bands)
}

/// Resolves a band table name (`landsat7`, `ikonos`) or file path.
pub fn load_band_table(spec: &str) -> Result<Vec<(f64, f64)>> {
    match spec {
        "landsat7" => Ok(LANDSAT7_BANDS.to_vec()),
        "ikonos" => Ok(IKONOS_BANDS.to_vec()),
        path => parse_band_table(&std::fs::read_to_string(Path::new(path))?),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DegradationMeta {
    pub kernel_size: usize,
    pub sigma: f64,
    pub factor: usize,
    pub boundary: Boundary,
    pub bands: Vec<(f64, f64)>,
}

/// The three degradation matrices `p1 (i1 x I1)`, `p2 (i2 x I2)` and
/// `p3 (i3 x I3)`.
#[derive(Clone, Debug, PartialEq)]
pub struct DegradationSet {
    pub p1: DenseMatrix,
    pub p2: DenseMatrix,
    pub p3: DenseMatrix,
    pub meta: Option<DegradationMeta>,
}

impl DegradationSet {
    /// Validates user-supplied matrices.
    pub fn new(
        p1: DenseMatrix,
        p2: DenseMatrix,
        p3: DenseMatrix,
        meta: Option<DegradationMeta>,
    ) -> Result<Self> {
        for (name, p) in [("p1", &p1), ("p2", &p2), ("p3", &p3)] {
            if p.rows() == 0 || p.rows() >= p.cols() {
                return dim_err(format!(
                    "{name} must be wide ({}x{} given)",
                    p.rows(),
                    p.cols()
                ));
            }
        }
        for b in 0..p3.rows() {
            let row = p3.row(b);
            let total: f64 = row.iter().sum();
            if row.iter().any(|&v| v < 0.0) || (total - 1.0).abs() > 1e-9 {
                return arg_err(format!(
                    "p3 row {b} must be nonnegative and sum to 1 (sum {total})"
                ));
            }
        }
        Ok(Self { p1, p2, p3, meta })
    }

    /// Separable Gaussian blur + decimation on both spatial axes and a
    /// band-averaging spectral response.
    pub fn build(
        shape: [usize; 3],
        factor: usize,
        kernel_size: usize,
        sigma: f64,
        bands: &[(f64, f64)],
        wavelengths: &[f64],
    ) -> Result<Self> {
        if factor < 2 {
            return arg_err(format!("downsampling factor must be >= 2, got {factor}"));
        }
        if wavelengths.len() != shape[2] {
            return dim_err(format!(
                "{} wavelengths for {} bands",
                wavelengths.len(),
                shape[2]
            ));
        }
        let kernel = gaussian_kernel_1d(kernel_size, sigma)?;
        let p1 = build_spatial_degradation(shape[0], factor, &kernel, Boundary::Circular)?;
        let p2 = build_spatial_degradation(shape[1], factor, &kernel, Boundary::Circular)?;
        let p3 = build_spectral_response(bands, wavelengths)?;
        let meta = DegradationMeta {
            kernel_size,
            sigma,
            factor,
            boundary: Boundary::Circular,
            bands: bands.to_vec(),
        };
        Self::new(p1, p2, p3, Some(meta))
    }

    /// Shape `[I1, I2, I3]` of the latent image these operators act on.
    pub fn latent_shape(&self) -> [usize; 3] {
        [self.p1.cols(), self.p2.cols(), self.p3.cols()]
    }
}

/// `x = z x1 p1 x2 p2` (HSI) and `y = z x3 p3` (MSI).
pub fn simulate(z: &Tensor3, d: &DegradationSet) -> Result<(Tensor3, Tensor3)> {
    if z.shape() != d.latent_shape() {
        return dim_err(format!(
            "scene shape {:?} does not match degradation operators {:?}",
            z.shape(),
            d.latent_shape()
        ));
    }
    let x = mode_n_product(&mode_n_product(z, &d.p1, 1)?, &d.p2, 2)?;
    let y = mode_n_product(z, &d.p3, 3)?;
    Ok((x, y))
}

/// Elementwise `z^power` for nonnegative `z`.
pub fn gamma_calibrate(z: &Tensor3, power: f64) -> Result<Tensor3> {
    if !(power > 0.0 && power <= 1.0) {
        return arg_err(format!("gamma power must lie in (0, 1], got {power}"));
    }
    if let Some(v) = z.data().iter().find(|v| !(**v >= 0.0)) {
        return Err(Error::Domain(format!(
            "gamma calibration needs nonnegative entries, found {v}"
        )));
    }
    Ok(z.map(|v| v.powf(power)))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpectraKind {
    /// Orthonormalized uniform random columns.
    #[default]
    RandomSemiUnitary,
    /// Orthonormalized Gaussian bumps spread along the band axis.
    SmoothGaussians,
}

impl std::str::FromStr for SpectraKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random-semi-unitary" | "random" => Ok(Self::RandomSemiUnitary),
            "smooth-gaussians" | "gaussians" => Ok(Self::SmoothGaussians),
            other => arg_err(format!("unknown spectra kind {other:?}")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub shape: [usize; 3],
    pub r: usize,
    /// Blocks per spatial axis of the piecewise-constant maps.
    pub blocks: usize,
    pub seed: u64,
    pub spectra: SpectraKind,
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        let [n1, n2, n3] = self.shape;
        if n1 == 0 || n2 == 0 || n3 == 0 {
            return dim_err(format!("scene shape {:?} has an empty axis", self.shape));
        }
        if self.r == 0 || self.r > n3 {
            return arg_err(format!("scene rank must lie in 1..={n3}, got {}", self.r));
        }
        if self.blocks == 0 || self.blocks > n1.min(n2) {
            return arg_err(format!(
                "blocks per axis must lie in 1..={}, got {}",
                n1.min(n2),
                self.blocks
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct SyntheticScene {
    pub z: Tensor3,
    /// Spatial maps, `I1 x I2 x R`.
    pub a: Tensor3,
    /// Semi-unitary spectral basis, `I3 x R`.
    pub s: DenseMatrix,
}

/// Exact block-term scene `z = a x3 s` with piecewise-constant maps.
///
/// Draw order: all map levels (map-major, then block row, then block
/// column), then the spectral columns (column-major) for random spectra.
pub fn synth_scene(spec: &SceneSpec) -> Result<SyntheticScene> {
    spec.validate()?;
    let [n1, n2, n3] = spec.shape;
    let (r, blocks) = (spec.r, spec.blocks);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let levels: Vec<f64> = (0..r * blocks * blocks)
        .map(|_| rng.random::<f64>())
        .collect();
    let a = Tensor3::from_fn([n1, n2, r], |i, j, k| {
        let (bi, bj) = (i * blocks / n1, j * blocks / n2);
        levels[(k * blocks + bi) * blocks + bj]
    });
    let raw = match spec.spectra {
        SpectraKind::RandomSemiUnitary => {
            let cols: Vec<f64> = (0..r * n3).map(|_| rng.random_range(-1.0..1.0)).collect();
            DenseMatrix::from_fn(n3, r, |b, k| cols[k * n3 + b])
        }
        SpectraKind::SmoothGaussians => {
            let width = (n3 as f64 / (2.0 * r as f64)).max(1.0);
            DenseMatrix::from_fn(n3, r, |b, k| {
                let center = (k as f64 + 0.5) * n3 as f64 / r as f64;
                let d = b as f64 - center;
                (-d * d / (2.0 * width * width)).exp()
            })
        }
    };
    let s = orthonormalize_columns(&raw)?;
    let z = mode_n_product(&a, &s, 3)?;
    Ok(SyntheticScene { z, a, s })
}
