//! Artifact plumbing: the CMT1 tensor format, flat `key=value` run
//! configuration, the JSON run report, diagnostics CSV and ENVI import.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::degradation::{SpectraKind, DEFAULT_KERNEL_SIZE, DEFAULT_SIGMA};
use crate::error::{Error, Result};
use crate::metrics::{MetricReport, PsnrMode};
use crate::solver::{
    Diagnostics, EpsMode, KktReport, KktTolerances, KktVerdict, SolveOutput, SolverConfig, TauMode,
    TauReport,
};
use crate::tensor::{DenseMatrix, Tensor3};

pub const MAGIC: &[u8; 4] = b"CMT1";
pub const DTYPE_F64_LE: u8 = 0x01;
const HEADER_FIXED: usize = 6;

/// A decoded tensor file: 2-D files are matrices, 3-D files cubes.
#[derive(Clone, Debug, PartialEq)]
pub enum TensorData {
    Matrix(DenseMatrix),
    Cube(Tensor3),
}

impl TensorData {
    pub fn shape(&self) -> Vec<usize> {
        match self {
            TensorData::Matrix(m) => vec![m.rows(), m.cols()],
            TensorData::Cube(t) => t.shape().to_vec(),
        }
    }

    fn data(&self) -> &[f64] {
        match self {
            TensorData::Matrix(m) => m.data(),
            TensorData::Cube(t) => t.data(),
        }
    }
}

fn parse_err<T>(offset: usize, msg: impl Into<String>) -> Result<T> {
    Err(Error::Parse {
        offset: offset as u64,
        msg: msg.into(),
    })
}

pub fn encode(t: &TensorData) -> Vec<u8> {
    let shape = t.shape();
    let data = t.data();
    let mut out = Vec::with_capacity(HEADER_FIXED + 8 * shape.len() + 8 * data.len());
    out.extend_from_slice(MAGIC);
    out.push(DTYPE_F64_LE);
    out.push(shape.len() as u8);
    for &d in &shape {
        out.extend_from_slice(&(d as u64).to_le_bytes());
    }
    for &v in data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<TensorData> {
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return parse_err(0, "bad magic, expected \"CMT1\"");
    }
    let Some(&dtype) = bytes.get(4) else {
        return parse_err(4, "truncated header: missing dtype");
    };
    if dtype != DTYPE_F64_LE {
        return parse_err(4, format!("unsupported dtype code 0x{dtype:02x}"));
    }
    let Some(&ndim) = bytes.get(5) else {
        return parse_err(5, "truncated header: missing ndim");
    };
    if ndim != 2 && ndim != 3 {
        return parse_err(5, format!("ndim must be 2 or 3, got {ndim}"));
    }
    let mut shape = Vec::with_capacity(ndim as usize);
    for k in 0..ndim as usize {
        let at = HEADER_FIXED + 8 * k;
        let Some(chunk) = bytes.get(at..at + 8) else {
            return parse_err(at, format!("truncated header: missing extent of axis {k}"));
        };
        let d = u64::from_le_bytes(chunk.try_into().expect("8-byte slice"));
        match usize::try_from(d) {
            Ok(d) => shape.push(d),
            Err(_) => return parse_err(at, format!("extent {d} does not fit in memory")),
        }
    }
    let header = HEADER_FIXED + 8 * ndim as usize;
    let count = shape.iter().try_fold(1usize, |a, &d| a.checked_mul(d));
    let Some(payload) = count.and_then(|c| c.checked_mul(8)) else {
        return parse_err(HEADER_FIXED, format!("shape {shape:?} overflows"));
    };
    let available = bytes.len() - header.min(bytes.len());
    if available < payload {
        return parse_err(
            bytes.len(),
            format!(
                "truncated payload: expected {payload} bytes after the header, found {available}"
            ),
        );
    }
    if available > payload {
        return parse_err(
            header + payload,
            format!("{} trailing bytes after payload", available - payload),
        );
    }
    let data: Vec<f64> = bytes[header..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    Ok(if ndim == 2 {
        TensorData::Matrix(DenseMatrix::from_vec(shape[0], shape[1], data)?)
    } else {
        TensorData::Cube(Tensor3::from_vec([shape[0], shape[1], shape[2]], data)?)
    })
}

/// Writes to a sibling temporary file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let name = path
        .file_name()
        .ok_or_else(|| Error::InvalidArgument(format!("{} is not a file path", path.display())))?;
    let tmp = dir.join(format!(
        ".{}.{}.tmp",
        name.to_string_lossy(),
        std::process::id()
    ));
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path).inspect_err(|_| {
        let _ = fs::remove_file(&tmp);
    })?;
    Ok(())
}

pub fn write_tensor(path: &Path, t: &TensorData) -> Result<()> {
    write_atomic(path, &encode(t))
}

pub fn write_tensor3(path: &Path, t: &Tensor3) -> Result<()> {
    write_tensor(path, &TensorData::Cube(t.clone()))
}

pub fn write_matrix(path: &Path, m: &DenseMatrix) -> Result<()> {
    write_tensor(path, &TensorData::Matrix(m.clone()))
}

pub fn read_tensor(path: &Path) -> Result<TensorData> {
    decode(&fs::read(path)?)
}

pub fn read_tensor3(path: &Path) -> Result<Tensor3> {
    match read_tensor(path)? {
        TensorData::Cube(t) => Ok(t),
        TensorData::Matrix(m) => Err(Error::InvalidDimension(format!(
            "{}: expected a 3-D tensor, found a {}x{} matrix",
            path.display(),
            m.rows(),
            m.cols()
        ))),
    }
}

pub fn read_matrix(path: &Path) -> Result<DenseMatrix> {
    match read_tensor(path)? {
        TensorData::Matrix(m) => Ok(m),
        TensorData::Cube(t) => Err(Error::InvalidDimension(format!(
            "{}: expected a matrix, found a tensor of shape {:?}",
            path.display(),
            t.shape()
        ))),
    }
}

/// Everything a pipeline run can be configured with. Defaults follow the
/// reference protocol: x8 decimation, 9-tap blur, six Landsat-7 bands, R = 5.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub solver: SolverConfig,
    pub factor: usize,
    pub kernel_size: usize,
    pub sigma: f64,
    /// `landsat7`, `ikonos` or a path to a two-column band table.
    pub band_table: String,
    pub seed: u64,
    /// Metric peak; the reference maximum when absent.
    pub peak: Option<f64>,
    pub psnr_mode: PsnrMode,
    /// Synthetic scenes only: rank, blocks per axis and spectra family.
    pub scene_r: usize,
    pub blocks: usize,
    pub spectra: SpectraKind,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            solver: SolverConfig::default(),
            factor: 8,
            kernel_size: DEFAULT_KERNEL_SIZE,
            sigma: DEFAULT_SIGMA,
            band_table: "landsat7".into(),
            seed: 0,
            peak: None,
            psnr_mode: PsnrMode::PerBand,
            scene_r: 3,
            blocks: 4,
            spectra: SpectraKind::default(),
        }
    }
}

pub const CONFIG_KEYS: &[&str] = &[
    "r",
    "gamma",
    "rho0",
    "nu",
    "eps",
    "eps_mode",
    "max_iter",
    "tau_mode",
    "factor",
    "kernel_size",
    "sigma",
    "band_table",
    "seed",
    "peak",
    "psnr_mode",
    "scene_r",
    "blocks",
    "spectra",
];

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> std::result::Result<T, String> {
    value
        .parse()
        .map_err(|_| format!("invalid value {value:?} for `{key}`"))
}

impl RunConfig {
    /// Sets one key from its textual value; unknown keys are rejected.
    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        let v = value.trim();
        match key {
            "r" => self.solver.r = parse_value(key, v)?,
            "gamma" => self.solver.gamma = parse_value(key, v)?,
            "rho0" => self.solver.rho0 = parse_value(key, v)?,
            "nu" => self.solver.nu = parse_value(key, v)?,
            "eps" => self.solver.eps = parse_value(key, v)?,
            "eps_mode" => self.solver.eps_mode = v.parse::<EpsMode>().map_err(|e| e.to_string())?,
            "max_iter" => self.solver.max_iter = parse_value(key, v)?,
            "tau_mode" => self.solver.tau_mode = v.parse::<TauMode>().map_err(|e| e.to_string())?,
            "factor" => self.factor = parse_value(key, v)?,
            "kernel_size" => self.kernel_size = parse_value(key, v)?,
            "sigma" => self.sigma = parse_value(key, v)?,
            "band_table" => {
                if v.is_empty() {
                    return Err("`band_table` must not be empty".into());
                }
                self.band_table = v.to_string()
            }
            "seed" => self.seed = parse_value(key, v)?,
            "peak" => self.peak = Some(parse_value(key, v)?),
            "psnr_mode" => self.psnr_mode = v.parse::<PsnrMode>().map_err(|e| e.to_string())?,
            "scene_r" => self.scene_r = parse_value(key, v)?,
            "blocks" => self.blocks = parse_value(key, v)?,
            "spectra" => self.spectra = v.parse::<SpectraKind>().map_err(|e| e.to_string())?,
            other => return Err(format!("unknown key `{other}`")),
        }
        Ok(())
    }

    /// Parses `key = value` lines over the defaults. `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seen = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: String| Error::Config { line: idx + 1, msg };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected key=value, got {line:?}")))?;
            let key = key.trim();
            if let Some(prev) = seen.insert(key.to_string(), idx + 1) {
                return Err(err(format!(
                    "duplicate key `{key}` (first set on line {prev})"
                )));
            }
            cfg.set(key, value).map_err(err)?;
        }
        cfg.validate().map_err(|e| Error::Config {
            line: 0,
            msg: e.to_string(),
        })?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.solver.validate()?;
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.factor < 2 {
            return bad(format!("factor must be >= 2, got {}", self.factor));
        }
        if self.kernel_size == 0 || self.kernel_size.is_multiple_of(2) {
            return bad(format!("kernel_size must be odd, got {}", self.kernel_size));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return bad(format!("sigma must be positive, got {}", self.sigma));
        }
        if let Some(p) = self.peak {
            if !(p > 0.0 && p.is_finite()) {
                return bad(format!("peak must be positive, got {p}"));
            }
        }
        if self.scene_r == 0 || self.blocks == 0 {
            return bad("scene_r and blocks must be positive".into());
        }
        Ok(())
    }

    /// Canonical `key = value` rendering that [`RunConfig::parse`] reads back.
    pub fn to_text(&self) -> String {
        let s = &self.solver;
        let mut out = String::new();
        let tau = match s.tau_mode {
            TauMode::Paper => "paper",
            TauMode::Safe => "safe",
        };
        let eps_mode = match s.eps_mode {
            EpsMode::Absolute => "absolute",
            EpsMode::Relative => "relative",
        };
        let psnr_mode = match self.psnr_mode {
            PsnrMode::PerBand => "per-band",
            PsnrMode::Flattened => "flattened",
        };
        let spectra = match self.spectra {
            SpectraKind::RandomSemiUnitary => "random-semi-unitary",
            SpectraKind::SmoothGaussians => "smooth-gaussians",
        };
        let _ = writeln!(out, "r = {}", s.r);
        let _ = writeln!(out, "gamma = {}", s.gamma);
        let _ = writeln!(out, "rho0 = {}", s.rho0);
        let _ = writeln!(out, "nu = {}", s.nu);
        let _ = writeln!(out, "eps = {}", s.eps);
        let _ = writeln!(out, "eps_mode = {eps_mode}");
        let _ = writeln!(out, "max_iter = {}", s.max_iter);
        let _ = writeln!(out, "tau_mode = {tau}");
        let _ = writeln!(out, "factor = {}", self.factor);
        let _ = writeln!(out, "kernel_size = {}", self.kernel_size);
        let _ = writeln!(out, "sigma = {}", self.sigma);
        let _ = writeln!(out, "band_table = {}", self.band_table);
        let _ = writeln!(out, "seed = {}", self.seed);
        if let Some(p) = self.peak {
            let _ = writeln!(out, "peak = {p}");
        }
        let _ = writeln!(out, "psnr_mode = {psnr_mode}");
        let _ = writeln!(out, "scene_r = {}", self.scene_r);
        let _ = writeln!(out, "blocks = {}", self.blocks);
        let _ = writeln!(out, "spectra = {spectra}");
        out
    }
}

/// Persisted outcome of a fusion run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: SolverConfig,
    pub iterations: usize,
    pub converged: bool,
    pub tau: TauReport,
    pub z_shape: [usize; 3],
    pub diagnostics: Diagnostics,
    pub kkt: KktReport,
    pub tolerances: KktTolerances,
    pub verdict: KktVerdict,
}

impl RunReport {
    pub fn new(out: &SolveOutput, config: &SolverConfig) -> Self {
        let tolerances = KktTolerances::standard(config.eps, out.tau.used);
        Self {
            config: config.clone(),
            iterations: out.iterations(),
            converged: out.converged,
            tau: out.tau,
            z_shape: out.z_hat.shape(),
            diagnostics: out.diagnostics.clone(),
            verdict: out.kkt.verdict(&tolerances),
            kkt: out.kkt.clone(),
            tolerances,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Report(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let r: Self = serde_json::from_str(text).map_err(|e| Error::Report(e.to_string()))?;
        r.check()?;
        Ok(r)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_json()?.as_bytes())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    fn check(&self) -> Result<()> {
        let d = &self.diagnostics;
        let n = self.iterations;
        let lens = [
            d.res_x.len(),
            d.res_y.len(),
            d.res_g1.len(),
            d.res_g2.len(),
            d.objective.len(),
            d.grad_norm.len(),
            d.rho.len(),
            d.mx_norm.len(),
            d.my_norm.len(),
        ];
        if lens.iter().any(|&l| l != n) {
            return Err(Error::Report(format!(
                "diagnostic traces have lengths {lens:?} but the run has {n} iterations"
            )));
        }
        Ok(())
    }

    /// Maxima of the four residual traces over the whole run.
    pub fn residual_maxima(&self) -> [f64; 4] {
        let d = &self.diagnostics;
        let m = |v: &[f64]| v.iter().copied().fold(0.0, f64::max);
        [m(&d.res_x), m(&d.res_y), m(&d.res_g1), m(&d.res_g2)]
    }

    /// Headline verdict line followed by a few detail lines.
    pub fn summary(&self) -> String {
        let k = &self.kkt;
        let head = if !self.converged {
            "KKT: NOT CONVERGED (max_iter)".to_string()
        } else if self.verdict.pass() {
            "KKT: PASS".to_string()
        } else {
            let mut failed = Vec::new();
            if !self.verdict.residuals {
                failed.push("residuals");
            }
            if !self.verdict.gradient {
                failed.push("gradient");
            }
            if !self.verdict.subgradient {
                failed.push("subgradient");
            }
            format!("KKT: FAIL ({})", failed.join(", "))
        };
        let mx = self.residual_maxima();
        let mut out = head;
        let _ = write!(
            out,
            "\niterations: {} (max_iter {}), tau {:?} = {:.6e}",
            self.iterations, self.config.max_iter, self.tau.mode, self.tau.used
        );
        let _ = write!(
            out,
            "\nfinal residuals: x {:.3e}, y {:.3e}, g1 {:.3e}, g2 {:.3e}",
            k.residuals[0], k.residuals[1], k.residuals[2], k.residuals[3]
        );
        let _ = write!(
            out,
            "\nresidual maxima: x {:.3e}, y {:.3e}, g1 {:.3e}, g2 {:.3e}",
            mx[0], mx[1], mx[2], mx[3]
        );
        let _ = write!(
            out,
            "\ngradient norm: {:.3e} (tol {:.3e})\nsubgradient deviation: {:.3e}, {:.3e} (tol {:.1e})",
            k.grad_norm, self.tolerances.grad, k.subgradient[0].max_deviation, k.subgradient[1].max_deviation,
            self.tolerances.subgradient
        );
        let _ = write!(
            out,
            "\nmultipliers: final/median x {:.3}, y {:.3} ({})",
            k.multipliers.final_over_median_x,
            k.multipliers.final_over_median_y,
            if self.verdict.multipliers_bounded {
                "bounded"
            } else {
                "growing"
            }
        );
        out
    }
}

pub const CSV_HEADER: &str = "iter,res_x,res_y,res_g1,res_g2,rho,objective";

/// One row per executed iteration, 17 significant digits.
pub fn diagnostics_csv(d: &Diagnostics) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for k in 0..d.iterations() {
        let _ = writeln!(
            out,
            "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            k + 1,
            d.res_x[k],
            d.res_y[k],
            d.res_g1[k],
            d.res_g2[k],
            d.rho[k],
            d.objective[k]
        );
    }
    out
}

/// `psnr=…` lines; values print in shortest round-trip form.
pub fn format_metrics(m: &MetricReport) -> String {
    format!(
        "psnr={}\nergas={}\nsam={}\nssim={}\n",
        m.psnr, m.ergas, m.sam, m.ssim
    )
}

pub fn parse_metrics(text: &str) -> Result<MetricReport> {
    let mut vals: BTreeMap<&str, f64> = BTreeMap::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let err = |msg: String| Error::Config { line: idx + 1, msg };
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| err(format!("expected key=value, got {line:?}")))?;
        if !["psnr", "ergas", "sam", "ssim"].contains(&k) {
            return Err(err(format!("unknown metric `{k}`")));
        }
        let v: f64 = v
            .parse()
            .map_err(|_| err(format!("invalid value {v:?} for `{k}`")))?;
        if vals.insert(k, v).is_some() {
            return Err(err(format!("duplicate metric `{k}`")));
        }
    }
    let get = |k: &str| {
        vals.get(k).copied().ok_or_else(|| Error::Config {
            line: 0,
            msg: format!("missing metric `{k}`"),
        })
    };
    Ok(MetricReport {
        psnr: get("psnr")?,
        ergas: get("ergas")?,
        sam: get("sam")?,
        ssim: get("ssim")?,
    })
}

/// Reads an ENVI band-sequential raster given its `.hdr` path. The binary
/// is `<stem>` or `<stem>.img`/`.raw`/`.dat` next to it.
/// Returns a `lines x samples x bands` tensor.
pub fn read_envi(hdr_path: &Path) -> Result<Tensor3> {
    let text = fs::read_to_string(hdr_path)?;
    let hdr = parse_envi_header(&text)?;
    let stem = hdr_path.with_extension("");
    let data_path = ["", "img", "raw", "dat", "bsq"]
        .iter()
        .map(|ext| {
            if ext.is_empty() {
                stem.clone()
            } else {
                stem.with_extension(ext)
            }
        })
        .find(|p| p.is_file())
        .ok_or_else(|| {
            Error::InvalidArgument(format!(
                "no raster file found next to {}",
                hdr_path.display()
            ))
        })?;
    decode_envi(&hdr, &fs::read(data_path)?)
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnviHeader {
    pub samples: usize,
    pub lines: usize,
    pub bands: usize,
    pub data_type: u32,
    pub big_endian: bool,
    pub header_offset: usize,
}

pub fn parse_envi_header(text: &str) -> Result<EnviHeader> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, l)) if l.trim() == "ENVI" => {}
        _ => {
            return Err(Error::Config {
                line: 1,
                msg: "ENVI header must start with `ENVI`".into(),
            })
        }
    }
    let mut fields = BTreeMap::new();
    let mut pending: Option<(usize, String, String)> = None;
    for (idx, raw) in lines {
        if let Some((start, key, mut acc)) = pending.take() {
            acc.push_str(raw);
            if raw.contains('}') {
                fields.insert(key, (start, acc));
            } else {
                pending = Some((start, key, acc));
            }
            continue;
        }
        let Some((k, v)) = raw.split_once('=') else {
            continue;
        };
        let key = k.trim().to_ascii_lowercase();
        let v = v.trim().to_string();
        if v.starts_with('{') && !v.contains('}') {
            pending = Some((idx + 1, key, v));
        } else {
            fields.insert(key, (idx + 1, v));
        }
    }
    let num = |key: &str, default: Option<usize>| -> Result<usize> {
        match fields.get(key) {
            Some((line, v)) => v.parse().map_err(|_| Error::Config {
                line: *line,
                msg: format!("invalid `{key}` value {v:?}"),
            }),
            None => default.ok_or_else(|| Error::Config {
                line: 0,
                msg: format!("missing `{key}`"),
            }),
        }
    };
    if let Some((line, v)) = fields.get("interleave") {
        if !v.eq_ignore_ascii_case("bsq") {
            return Err(Error::Config {
                line: *line,
                msg: format!("only bsq interleave is supported, got {v}"),
            });
        }
    }
    let data_type = num("data type", None)? as u32;
    if ![1, 2, 4, 5, 12].contains(&data_type) {
        return Err(Error::Config {
            line: fields["data type"].0,
            msg: format!("unsupported data type {data_type}"),
        });
    }
    Ok(EnviHeader {
        samples: num("samples", None)?,
        lines: num("lines", None)?,
        bands: num("bands", None)?,
        data_type,
        big_endian: num("byte order", Some(0))? == 1,
        header_offset: num("header offset", Some(0))?,
    })
}

pub fn decode_envi(h: &EnviHeader, bytes: &[u8]) -> Result<Tensor3> {
    let width = match h.data_type {
        1 => 1,
        2 | 12 => 2,
        4 => 4,
        _ => 8,
    };
    let count = h.samples * h.lines * h.bands;
    let need = h.header_offset + count * width;
    if bytes.len() < need {
        return parse_err(
            bytes.len(),
            format!("raster truncated: need {need} bytes, found {}", bytes.len()),
        );
    }
    let raw = &bytes[h.header_offset..need];
    let value = |c: &[u8]| -> f64 {
        macro_rules! rd {
            ($t:ty) => {{
                let a = c.try_into().expect("sized chunk");
                if h.big_endian {
                    <$t>::from_be_bytes(a) as f64
                } else {
                    <$t>::from_le_bytes(a) as f64
                }
            }};
        }
        match h.data_type {
            1 => c[0] as f64,
            2 => rd!(i16),
            12 => rd!(u16),
            4 => rd!(f32),
            _ => rd!(f64),
        }
    };
    let vals: Vec<f64> = raw.chunks_exact(width).map(value).collect();
    let plane = h.samples * h.lines;
    Ok(Tensor3::from_fn(
        [h.lines, h.samples, h.bands],
        |i, j, b| vals[b * plane + i * h.samples + j],
    ))
}
