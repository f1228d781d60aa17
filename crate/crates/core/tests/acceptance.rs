//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits nonzero if any criterion fails.
//!
//! The conditional full-scale criterion runs only when `CMLPTR_GT` names a
//! 256x256x162 CMT1 ground-truth cube; otherwise it prints SKIP.

use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use cmlptr_core::degradation::{
    simulate, synth_scene, wavelength_grid, DegradationSet, DEFAULT_KERNEL_SIZE, DEFAULT_SIGMA,
    IKONOS_BANDS, LANDSAT7_BANDS,
};
use cmlptr_core::io::{read_tensor3, write_tensor3};
use cmlptr_core::linalg::orthonormalize_columns;
use cmlptr_core::metrics::{bicubic_upsample, evaluate, psnr_with, sam, MetricOptions};
use cmlptr_core::regularizer::{check_prop1_rank, check_prop1_tv_sandwich};
use cmlptr_core::solver::{tau_report, KktTolerances, Model, SolverState};
use cmlptr_core::tsvd::{ntpnn, scalar_prox, t_product, t_svd, t_transpose, tnn};
use cmlptr_core::{
    solve, DenseMatrix, Problem, PsnrMode, SceneSpec, SolveOutput, SolverConfig, SpectraKind,
    Surrogate, TauMode, Tensor3,
};

const SCENE_SEED: u64 = 10;

/// Per-band PSNR without the identical-band cap, so near-exact recoveries
/// stay comparable.
fn psnr(reference: &Tensor3, estimate: &Tensor3, peak: f64) -> Result<f64, cmlptr_core::Error> {
    psnr_with(reference, estimate, peak, PsnrMode::PerBand, f64::INFINITY)
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn random(shape: [usize; 3], rng: &mut ChaCha8Rng) -> Tensor3 {
    Tensor3::from_fn(shape, |_, _, _| rng.random_range(-1.0..1.0))
}

fn semi_unitary(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DenseMatrix {
    let m = DenseMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0));
    orthonormalize_columns(&m).expect("random columns are independent")
}

fn rel(a: &Tensor3, b: &Tensor3) -> f64 {
    a.sub(b).unwrap().frobenius_norm() / b.frobenius_norm().max(f64::MIN_POSITIVE)
}

fn tsvd_factorization() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let start = Instant::now();
    let (mut worst_rec, mut worst_orth) = (0.0f64, 0.0f64);
    for _ in 0..100 {
        let shape = [
            rng.random_range(1..=16),
            rng.random_range(1..=12),
            rng.random_range(1..=8),
        ];
        let a = random(shape, &mut rng);
        let f = t_svd(&a).unwrap();
        worst_rec = worst_rec.max(rel(&f.reconstruct().unwrap(), &a));
        for q in [&f.u, &f.v] {
            let [n, _, tubes] = q.shape();
            let gram = t_product(&t_transpose(q), q).unwrap();
            worst_orth = worst_orth.max(
                gram.sub(&Tensor3::identity(n, tubes))
                    .unwrap()
                    .frobenius_norm(),
            );
        }
    }
    let elapsed = start.elapsed();
    outcome(
        worst_rec <= 1e-10 && worst_orth <= 1e-10 && elapsed < Duration::from_secs(5),
        format!(
            "max reconstruction {worst_rec:.2e}, max orthogonality {worst_orth:.2e}, {:.2}s",
            elapsed.as_secs_f64()
        ),
    )
}

/// Direct DFT along mode 3 followed by an SVD per slice.
fn oracle_singular_values(t: &Tensor3) -> Vec<Vec<f64>> {
    let [n1, n2, n3] = t.shape();
    (0..n3)
        .map(|k| {
            let m = DMatrix::from_fn(n1, n2, |i, j| {
                (0..n3)
                    .map(|s| {
                        let ang = -2.0 * std::f64::consts::PI * (k * s) as f64 / n3 as f64;
                        Complex64::from_polar(t[(i, j, s)], ang)
                    })
                    .sum::<Complex64>()
            });
            m.singular_values().iter().copied().collect()
        })
        .collect()
}

fn norm_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let shape = [
            rng.random_range(1..=8),
            rng.random_range(1..=8),
            rng.random_range(1..=8),
        ];
        let t = random(shape, &mut rng);
        let psi = Surrogate::new(10f64.powf(rng.random_range(-2.0..1.0))).unwrap();
        let sv = oracle_singular_values(&t);
        let n3 = shape[2] as f64;
        let want_tnn = sv.iter().flatten().sum::<f64>() / n3;
        let want_ntpnn = sv.iter().flatten().map(|&s| psi.value(s)).sum::<f64>() / n3;
        worst = worst.max((tnn(&t).unwrap() - want_tnn).abs());
        worst = worst.max((ntpnn(&t, &psi).unwrap() - want_ntpnn).abs());
    }
    outcome(worst <= 1e-10, format!("max |closed - oracle| {worst:.2e}"))
}

/// Exhaustive search on the grid `{0, h, 2h, ...}` covering `[0, s]`; the
/// minimizer cannot exceed `s` because `psi` is increasing.
fn grid_prox(s: f64, rho: f64, psi: &Surrogate) -> f64 {
    let h = 1e-5;
    let steps = (s / h).ceil() as usize;
    let mut best = (0.0, f64::INFINITY);
    for i in 0..=steps {
        let x = i as f64 * h;
        let v = psi.value(x) + rho * (x - s) * (x - s);
        if v < best.1 {
            best = (x, v);
        }
    }
    best.0
}

fn prox_grid() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let psi = Surrogate::new(0.1).unwrap();
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let s = rng.random_range(0.0..=10.0);
        let rho = 10f64.powf(rng.random_range(-3.0..=3.0));
        worst = worst.max((scalar_prox(s, rho, &psi) - grid_prox(s, rho, &psi)).abs());
    }
    outcome(
        worst <= 1e-4,
        format!("max |closed - grid| {worst:.2e} over 1000 pairs"),
    )
}

/// A small exact-model instance with a random semi-unitary basis.
fn random_model(rng: &mut ChaCha8Rng) -> Model {
    let n1 = 2 * rng.random_range(2..=4);
    let n2 = 2 * rng.random_range(2..=4);
    let n3 = 4;
    let r = rng.random_range(1..=2);
    let grid = wavelength_grid(n3);
    let bands = [(grid[0], grid[1]), (grid[2], grid[3])];
    let d = DegradationSet::build([n1, n2, n3], 2, 3, 1.0, &bands, &grid).unwrap();
    let s = semi_unitary(n3, r, rng);
    let z = cmlptr_core::tensor::mode_n_product(&random([n1, n2, r], rng), &s, 3).unwrap();
    let (x, y) = simulate(&z, &d).unwrap();
    let p = Problem::new(x, y, d.p1, d.p2, d.p3).unwrap();
    Model::new(p, s, 0.1, 1e-3, 1.05).unwrap()
}

fn random_state(model: &Model, rng: &mut ChaCha8Rng) -> SolverState {
    let mut st = model.zero_state();
    for t in [
        &mut st.a, &mut st.g1, &mut st.g2, &mut st.mx, &mut st.my, &mut st.m1, &mut st.m2,
    ] {
        *t = random(t.shape(), rng);
    }
    st.rho = 10f64.powf(rng.random_range(-2.0..1.0));
    st
}

fn gradient_fd() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let model = random_model(&mut rng);
        let st = random_state(&model, &mut rng);
        let grad = model.grad_a(&st).unwrap();
        let h = 1e-6;
        let mut fd = Tensor3::zeros(st.a.shape());
        for idx in 0..st.a.len() {
            let mut plus = st.a.clone();
            plus.data_mut()[idx] += h;
            let mut minus = st.a.clone();
            minus.data_mut()[idx] -= h;
            fd.data_mut()[idx] =
                (model.l1(&st, &plus).unwrap() - model.l1(&st, &minus).unwrap()) / (2.0 * h);
        }
        worst = worst.max(rel(&fd, &grad));
    }
    outcome(
        worst <= 1e-5,
        format!("max relative error {worst:.2e} over 20 instances"),
    )
}

fn lipschitz() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let models: Vec<Model> = (0..4).map(|_| random_model(&mut rng)).collect();
    let (mut safe_viol, mut paper_viol) = (0, 0);
    let mut worst_ratio = 0.0f64;
    for i in 0..200 {
        let model = &models[i % models.len()];
        let p = &model.problem;
        let tau = tau_report(&p.p1, &p.p2, &p.p3, &model.s, TauMode::Safe).unwrap();
        let s1 = random_state(model, &mut rng);
        let mut s2 = s1.clone();
        s2.a = random(s1.a.shape(), &mut rng).scale(10f64.powf(rng.random_range(-3.0..1.0)));
        let lhs = model
            .grad_a(&s1)
            .unwrap()
            .sub(&model.grad_a(&s2).unwrap())
            .unwrap()
            .frobenius_norm();
        let dist = s1.a.sub(&s2.a).unwrap().frobenius_norm();
        worst_ratio = worst_ratio.max(lhs / (tau.safe * dist));
        if lhs > tau.safe * dist {
            safe_viol += 1;
        }
        if lhs > tau.paper * dist {
            paper_viol += 1;
        }
    }
    outcome(
        safe_viol == 0,
        format!("safe violations {safe_viol}/200 (max ratio {worst_ratio:.3}); paper-mode violations {paper_viol}/200 (reported)"),
    )
}

fn prop1_checks() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut rank_ok = 0;
    for _ in 0..50 {
        let n3 = rng.random_range(3..=6);
        let r = rng.random_range(1..=3.min(n3));
        let shape = [rng.random_range(2..=8), rng.random_range(2..=8), r];
        let s = semi_unitary(n3, r, &mut rng);
        let z = cmlptr_core::tensor::mode_n_product(&random(shape, &mut rng), &s, 3).unwrap();
        let n = rng.random_range(1..=2);
        if check_prop1_rank(&z, &s, n, 1e-8).unwrap().holds {
            rank_ok += 1;
        }
    }
    let psi = Surrogate::new(0.1).unwrap();
    let mut tv_ok = 0;
    for _ in 0..100 {
        let shape = [
            rng.random_range(2..=8),
            rng.random_range(2..=8),
            rng.random_range(1..=4),
        ];
        let a = random(shape, &mut rng).scale(10f64.powf(rng.random_range(-2.0..2.0)));
        if check_prop1_tv_sandwich(&a, &psi).unwrap().holds() {
            tv_ok += 1;
        }
    }
    outcome(
        rank_ok == 50 && tv_ok == 100,
        format!("rank sandwich {rank_ok}/50, TV chains {tv_ok}/100"),
    )
}

struct Synthetic {
    z: Tensor3,
    x: Tensor3,
    problem: Problem,
}

fn synthetic() -> Synthetic {
    let scene = synth_scene(&SceneSpec {
        shape: [64, 64, 32],
        r: 3,
        blocks: 4,
        seed: SCENE_SEED,
        spectra: SpectraKind::RandomSemiUnitary,
    })
    .unwrap();
    let grid = wavelength_grid(32);
    let d = DegradationSet::build(
        [64, 64, 32],
        4,
        DEFAULT_KERNEL_SIZE,
        DEFAULT_SIGMA,
        &IKONOS_BANDS,
        &grid,
    )
    .unwrap();
    let (x, y) = simulate(&scene.z, &d).unwrap();
    let problem = Problem::new(x.clone(), y, d.p1, d.p2, d.p3).unwrap();
    Synthetic {
        z: scene.z,
        x,
        problem,
    }
}

fn run(syn: &Synthetic, config: &SolverConfig) -> (SolveOutput, Duration) {
    let start = Instant::now();
    let out = solve(syn.problem.clone(), config).unwrap();
    (out, start.elapsed())
}

fn end_to_end(syn: &Synthetic, out: &SolveOutput, elapsed: Duration) -> Outcome {
    let peak = syn.z.max();
    let d = &out.diagnostics;
    let final_res = d.max_residual(d.iterations() - 1);
    let fused = psnr(&syn.z, &out.z_hat, peak).unwrap();
    let bicubic = bicubic_upsample(&syn.x, 4).unwrap();
    let base = psnr(&syn.z, &bicubic, peak).unwrap();
    let angle = sam(&syn.z, &out.z_hat).unwrap();
    let pass = out.converged
        && final_res <= 1e-5
        && fused - base >= 10.0
        && angle <= 2.0
        && elapsed.as_secs() <= 120;
    outcome(
        pass,
        format!(
            "converged {} in {} iterations (final max residual {final_res:.2e}), PSNR {fused:.2} dB vs bicubic {base:.2} dB, SAM {angle:.2e} deg, {:.1}s",
            out.converged,
            out.iterations(),
            elapsed.as_secs_f64()
        ),
    )
}

fn kkt(out: &SolveOutput, eps: f64) -> Outcome {
    let tol = KktTolerances::standard(eps, out.tau.used);
    let v = out.kkt.verdict(&tol);
    let k = &out.kkt;
    let res_max = k.residuals.iter().copied().fold(0.0, f64::max);
    outcome(
        out.converged && v.residuals && v.gradient && v.subgradient,
        format!(
            "residuals {res_max:.2e} (tol {:.0e}), |grad| {:.2e} (tol {:.2e}), subgradient deviation {:.2e}/{:.2e} on {}+{} values (tol {:.0e})",
            tol.residual,
            k.grad_norm,
            tol.grad,
            k.subgradient[0].max_deviation,
            k.subgradient[1].max_deviation,
            k.subgradient[0].retained,
            k.subgradient[1].retained,
            tol.subgradient
        ),
    )
}

fn hyperparameters(syn: &Synthetic, base: &SolveOutput) -> Outcome {
    let peak = syn.z.max();
    let score = |out: &SolveOutput| psnr(&syn.z, &out.z_hat, peak).unwrap();
    let at_r3 = score(base);
    let mut by_r = Vec::new();
    for r in 1..=6 {
        let p = if r == 3 {
            at_r3
        } else {
            score(
                &run(
                    syn,
                    &SolverConfig {
                        r,
                        ..SolverConfig::default()
                    },
                )
                .0,
            )
        };
        by_r.push(p);
    }
    let mut by_gamma = Vec::new();
    for gamma in [0.01, 0.1, 1.0, 10.0] {
        let p = if gamma == 0.1 {
            at_r3
        } else {
            score(
                &run(
                    syn,
                    &SolverConfig {
                        r: 3,
                        gamma,
                        ..SolverConfig::default()
                    },
                )
                .0,
            )
        };
        by_gamma.push(p);
    }
    let peak_at_3 = by_r.iter().enumerate().all(|(i, &p)| i == 2 || p < at_r3);
    let drop = at_r3 - by_r[0];
    let spread = by_gamma.iter().copied().fold(f64::MIN, f64::max)
        - by_gamma.iter().copied().fold(f64::MAX, f64::min);
    let fmt = |v: &[f64]| {
        v.iter()
            .map(|p| format!("{p:.2}"))
            .collect::<Vec<_>>()
            .join(" ")
    };
    outcome(
        peak_at_3 && drop >= 3.0 && spread < 1.0,
        format!(
            "PSNR over R=1..6 [{}] (drop at R=1 {drop:.2} dB); over gamma {{0.01,0.1,1,10}} [{}] (spread {spread:.2} dB)",
            fmt(&by_r),
            fmt(&by_gamma)
        ),
    )
}

fn determinism(syn: &Synthetic, first: &SolveOutput) -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.cmt"), dir.path().join("b.cmt"));
    write_tensor3(&a, &first.z_hat).unwrap();
    let (second, _) = run(
        syn,
        &SolverConfig {
            r: 3,
            ..SolverConfig::default()
        },
    );
    write_tensor3(&b, &second.z_hat).unwrap();
    let (ba, bb) = (std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    outcome(
        ba == bb,
        format!("two runs, {} bytes each, identical: {}", ba.len(), ba == bb),
    )
}

fn full_scale(path: &Path) -> Outcome {
    let z = read_tensor3(path).unwrap();
    let shape = z.shape();
    if shape != [256, 256, 162] {
        return outcome(
            false,
            format!("ground truth has shape {shape:?}, expected [256, 256, 162]"),
        );
    }
    let grid = wavelength_grid(162);
    let d = DegradationSet::build(shape, 8, 9, DEFAULT_SIGMA, &LANDSAT7_BANDS, &grid).unwrap();
    let (x, y) = simulate(&z, &d).unwrap();
    let problem = Problem::new(x, y, d.p1, d.p2, d.p3).unwrap();
    let out = solve(problem, &SolverConfig::default()).unwrap();
    let m = evaluate(&z, &out.z_hat, &MetricOptions::with_ratio(8.0)).unwrap();
    outcome(
        out.converged,
        format!(
            "converged {} in {} iterations; PSNR {:.4} ERGAS {:.4} SAM {:.4} SSIM {:.4}",
            out.converged,
            out.iterations(),
            m.psnr,
            m.ergas,
            m.sam,
            m.ssim
        ),
    )
}

fn report(name: &str, o: &Outcome, failures: &mut usize) {
    println!(
        "{} {name}: {}",
        if o.pass { "PASS" } else { "FAIL" },
        o.detail
    );
    if !o.pass {
        *failures += 1;
    }
}

fn main() -> ExitCode {
    // `cargo test -- --list` and filters are accepted but the suite always runs whole
    if std::env::args().any(|a| a == "--list") {
        println!("acceptance: test");
        return ExitCode::SUCCESS;
    }
    let mut failures = 0;
    report("t-SVD factorization", &tsvd_factorization(), &mut failures);
    report(
        "TNN/NTPNN oracle equivalence",
        &norm_oracles(),
        &mut failures,
    );
    report("scalar prox vs grid oracle", &prox_grid(), &mut failures);
    report(
        "gradient vs finite differences",
        &gradient_fd(),
        &mut failures,
    );
    report("Lipschitz certificate", &lipschitz(), &mut failures);
    report(
        "rank and TV sandwich checks",
        &prop1_checks(),
        &mut failures,
    );

    let syn = synthetic();
    let config = SolverConfig {
        r: 3,
        ..SolverConfig::default()
    };
    let (out, elapsed) = run(&syn, &config);
    report(
        "end-to-end synthetic recovery",
        &end_to_end(&syn, &out, elapsed),
        &mut failures,
    );
    report("KKT diagnostics", &kkt(&out, config.eps), &mut failures);
    report(
        "hyperparameter sensitivity",
        &hyperparameters(&syn, &out),
        &mut failures,
    );
    report("determinism", &determinism(&syn, &out), &mut failures);

    match std::env::var_os("CMLPTR_GT") {
        Some(p) => report(
            "full-scale protocol (conditional)",
            &full_scale(Path::new(&p)),
            &mut failures,
        ),
        None => println!(
            "SKIP full-scale protocol (conditional): set CMLPTR_GT to a 256x256x162 CMT1 cube"
        ),
    }

    println!("acceptance: {} failed", failures);
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
