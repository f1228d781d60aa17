//! Shared fixtures for the benchmarks.

use cmlptr_core::degradation::{
    simulate, synth_scene, wavelength_grid, DEFAULT_KERNEL_SIZE, DEFAULT_SIGMA, IKONOS_BANDS,
};
use cmlptr_core::solver::{extract_subspace, lipschitz_tau, Model};
use cmlptr_core::{DegradationSet, Problem, SceneSpec, SpectraKind, TauMode, Tensor3};

/// The 64x64x32 calibration scene bound to its solver model, plus the safe
/// step size.
pub fn scene_model() -> (Model, f64) {
    let shape = [64, 64, 32];
    let scene = synth_scene(&SceneSpec {
        shape,
        r: 3,
        blocks: 4,
        seed: 10,
        spectra: SpectraKind::RandomSemiUnitary,
    })
    .expect("valid scene");
    let grid = wavelength_grid(shape[2]);
    let d = DegradationSet::build(
        shape,
        4,
        DEFAULT_KERNEL_SIZE,
        DEFAULT_SIGMA,
        &IKONOS_BANDS,
        &grid,
    )
    .expect("valid degradation");
    let (x, y) = simulate(&scene.z, &d).expect("shapes agree");
    let s = extract_subspace(&x, 3).expect("rank 3 subspace");
    let tau = lipschitz_tau(&d.p1, &d.p2, &d.p3, &s, TauMode::Safe).expect("finite tau");
    let problem = Problem::new(x, y, d.p1, d.p2, d.p3).expect("consistent problem");
    let model = Model::new(problem, s, 0.1, 1e-3, 1.05).expect("valid model");
    (model, tau)
}

/// Deterministic pseudo-random cube in [-1, 1).
pub fn cube(shape: [usize; 3], seed: u64) -> Tensor3 {
    let mut s = seed ^ 0x9e37_79b9_7f4a_7c15;
    Tensor3::from_fn(shape, |_, _, _| {
        s = s
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        (s >> 11) as f64 / (1u64 << 52) as f64 - 1.0
    })
}
