//! `cmlptr`: simulate -> fuse -> eval -> diagnose.
//!
//! Every failure prints a single `error: kind=<kind> msg=<text>` line on
//! stderr and exits with status 1 (2 for usage errors).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cmlptr_core::degradation::{load_band_table, simulate, synth_scene, wavelength_grid};
use cmlptr_core::io::{
    diagnostics_csv, format_metrics, read_matrix, read_tensor3, write_atomic, write_matrix,
    write_tensor3,
};
use cmlptr_core::metrics::{bicubic_upsample, evaluate, MetricOptions, PSNR_CAP_DB};
use cmlptr_core::{
    solve, DegradationSet, Error, Problem, RunConfig, RunReport, SceneSpec, TauMode,
};

#[derive(Parser)]
#[command(name = "cmlptr", version, about = "Hyperspectral/multispectral fusion")]
struct Cli {
    /// key=value file providing defaults; flags override it.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    #[command(flatten)]
    overrides: Overrides,

    #[command(subcommand)]
    command: Command,
}

/// Mirrors the config keys; values are parsed and validated by `RunConfig`.
#[derive(Args, Default)]
struct Overrides {
    #[arg(long, global = true, allow_negative_numbers = true)]
    r: Option<String>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    gamma: Option<String>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    rho0: Option<String>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    nu: Option<String>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    eps: Option<String>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    eps_mode: Option<String>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    max_iter: Option<String>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    tau_mode: Option<String>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    factor: Option<String>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    kernel_size: Option<String>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    sigma: Option<String>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    band_table: Option<String>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    seed: Option<String>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    peak: Option<String>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    psnr_mode: Option<String>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    scene_r: Option<String>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    blocks: Option<String>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    spectra: Option<String>,
}

impl Overrides {
    fn pairs(&self) -> Vec<(&'static str, &str)> {
        [
            ("r", &self.r),
            ("gamma", &self.gamma),
            ("rho0", &self.rho0),
            ("nu", &self.nu),
            ("eps", &self.eps),
            ("eps_mode", &self.eps_mode),
            ("max_iter", &self.max_iter),
            ("tau_mode", &self.tau_mode),
            ("factor", &self.factor),
            ("kernel_size", &self.kernel_size),
            ("sigma", &self.sigma),
            ("band_table", &self.band_table),
            ("seed", &self.seed),
            ("peak", &self.peak),
            ("psnr_mode", &self.psnr_mode),
            ("scene_r", &self.scene_r),
            ("blocks", &self.blocks),
            ("spectra", &self.spectra),
        ]
        .into_iter()
        .filter_map(|(k, v)| v.as_deref().map(|v| (k, v)))
        .collect()
    }
}

#[derive(Subcommand)]
enum Command {
    /// Degrade a ground truth (or a generated scene) into X, Y and P1..P3.
    Simulate {
        /// CMT1 ground-truth cube.
        #[arg(
            long,
            conflicts_with = "synthetic",
            required_unless_present = "synthetic"
        )]
        gt: Option<PathBuf>,
        /// Generate a block-term scene of shape `I1xI2xI3` instead.
        #[arg(long, value_name = "SHAPE")]
        synthetic: Option<String>,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Estimate the latent image from X, Y and the degradation matrices.
    Fuse {
        /// Directory with x.cmt, y.cmt, p1.cmt, p2.cmt, p3.cmt.
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "z_hat.cmt")]
        out: PathBuf,
        #[arg(long, default_value = "report.json")]
        report: PathBuf,
    },
    /// Score an estimate against a reference.
    Eval {
        #[arg(long)]
        reference: PathBuf,
        #[arg(long)]
        estimate: PathBuf,
        /// Also write the key=value report here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Summarize a fusion report and optionally export residual curves.
    Diagnose {
        #[arg(long)]
        report: PathBuf,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Bicubic baseline: upsample X by `factor`.
    Bicubic {
        #[arg(long)]
        x: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn load_config(cli: &Cli) -> Result<RunConfig, Error> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    for (key, value) in cli.overrides.pairs() {
        cfg.set(key, value)
            .map_err(|msg| Error::InvalidArgument(format!("--{}: {msg}", key.replace('_', "-"))))?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn parse_shape(s: &str) -> Result<[usize; 3], Error> {
    let dims: Vec<usize> = s
        .split('x')
        .map(|d| d.trim().parse::<usize>())
        .collect::<Result<_, _>>()
        .map_err(|_| Error::InvalidArgument(format!("shape must look like 64x64x32, got {s:?}")))?;
    match dims.as_slice() {
        &[a, b, c] => Ok([a, b, c]),
        _ => Err(Error::InvalidArgument(format!(
            "shape needs three extents, got {s:?}"
        ))),
    }
}

fn cmd_simulate(
    cfg: &RunConfig,
    gt: Option<&Path>,
    synthetic: Option<&str>,
    out: &Path,
) -> Result<(), Error> {
    let z = match (gt, synthetic) {
        (Some(p), _) => read_tensor3(p)?,
        (None, Some(shape)) => {
            let scene = synth_scene(&SceneSpec {
                shape: parse_shape(shape)?,
                r: cfg.scene_r,
                blocks: cfg.blocks,
                seed: cfg.seed,
                spectra: cfg.spectra,
            })?;
            std::fs::create_dir_all(out)?;
            write_tensor3(&out.join("gt.cmt"), &scene.z)?;
            scene.z
        }
        (None, None) => return Err(Error::InvalidArgument("need --gt or --synthetic".into())),
    };
    let bands = load_band_table(&cfg.band_table)?;
    let grid = wavelength_grid(z.shape()[2]);
    let d = DegradationSet::build(
        z.shape(),
        cfg.factor,
        cfg.kernel_size,
        cfg.sigma,
        &bands,
        &grid,
    )?;
    let (x, y) = simulate(&z, &d)?;
    std::fs::create_dir_all(out)?;
    write_tensor3(&out.join("x.cmt"), &x)?;
    write_tensor3(&out.join("y.cmt"), &y)?;
    write_matrix(&out.join("p1.cmt"), &d.p1)?;
    write_matrix(&out.join("p2.cmt"), &d.p2)?;
    write_matrix(&out.join("p3.cmt"), &d.p3)?;
    write_atomic(&out.join("config.txt"), cfg.to_text().as_bytes())?;
    let s = |t: [usize; 3]| format!("{}x{}x{}", t[0], t[1], t[2]);
    println!("x_shape={}\ny_shape={}", s(x.shape()), s(y.shape()));
    Ok(())
}

fn cmd_fuse(cfg: &RunConfig, input: &Path, out: &Path, report: &Path) -> Result<(), Error> {
    let problem = Problem::new(
        read_tensor3(&input.join("x.cmt"))?,
        read_tensor3(&input.join("y.cmt"))?,
        read_matrix(&input.join("p1.cmt"))?,
        read_matrix(&input.join("p2.cmt"))?,
        read_matrix(&input.join("p3.cmt"))?,
    )?;
    let result = solve(problem, &cfg.solver)?;
    write_tensor3(out, &result.z_hat)?;
    let rep = RunReport::new(&result, &cfg.solver);
    rep.write(report)?;
    let mode = match rep.tau.mode {
        TauMode::Paper => "paper",
        TauMode::Safe => "safe",
    };
    println!(
        "iterations={}\nconverged={}\ntau_mode={mode}\ntau={}\nkkt_pass={}",
        rep.iterations,
        rep.converged,
        rep.tau.used,
        rep.converged && rep.verdict.pass()
    );
    Ok(())
}

fn cmd_eval(
    cfg: &RunConfig,
    reference: &Path,
    estimate: &Path,
    out: Option<&Path>,
) -> Result<(), Error> {
    let r = read_tensor3(reference)?;
    let e = read_tensor3(estimate)?;
    let opts = MetricOptions {
        peak: cfg.peak,
        ratio: cfg.factor as f64,
        psnr_mode: cfg.psnr_mode,
        psnr_cap: PSNR_CAP_DB,
    };
    let text = format_metrics(&evaluate(&r, &e, &opts)?);
    if let Some(p) = out {
        write_atomic(p, text.as_bytes())?;
    }
    print!("{text}");
    Ok(())
}

fn cmd_diagnose(report: &Path, csv: Option<&Path>) -> Result<(), Error> {
    let rep = RunReport::read(report)?;
    println!("{}", rep.summary());
    if let Some(p) = csv {
        write_atomic(p, diagnostics_csv(&rep.diagnostics).as_bytes())?;
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<(), Error> {
    let cfg = load_config(cli)?;
    match &cli.command {
        Command::Simulate { gt, synthetic, out } => {
            cmd_simulate(&cfg, gt.as_deref(), synthetic.as_deref(), out)
        }
        Command::Fuse { input, out, report } => cmd_fuse(&cfg, input, out, report),
        Command::Eval {
            reference,
            estimate,
            out,
        } => cmd_eval(&cfg, reference, estimate, out.as_deref()),
        Command::Diagnose { report, csv } => cmd_diagnose(report, csv.as_deref()),
        Command::Bicubic { x, out } => {
            write_tensor3(out, &bicubic_upsample(&read_tensor3(x)?, cfg.factor)?)
        }
    }
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.to_string();
            let first = text
                .lines()
                .next()
                .unwrap_or("")
                .trim_start_matches("error: ");
            eprintln!("error: kind=usage msg={}", one_line(first));
            return ExitCode::from(2);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: kind={} msg={}", e.kind(), one_line(&e.to_string()));
            ExitCode::FAILURE
        }
    }
}
