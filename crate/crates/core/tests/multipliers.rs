use cmlptr_core::degradation::{
    simulate, synth_scene, wavelength_grid, DegradationSet, DEFAULT_KERNEL_SIZE, DEFAULT_SIGMA,
    IKONOS_BANDS,
};
use cmlptr_core::{solve, Problem, SceneSpec, SolverConfig, SpectraKind};

/// The data multipliers grow geometrically with the penalty schedule, so the
/// last norm ends far above the median on every scene tried (ratios 55-350).
#[test]
#[ignore = "known red: multiplier norms grow with rho; final/median ratio exceeds 10 on converged runs"]
fn data_multipliers_stay_bounded() {
    let scene = synth_scene(&SceneSpec {
        shape: [64, 64, 32],
        r: 3,
        blocks: 4,
        seed: 10,
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
    let problem = Problem::new(x, y, d.p1, d.p2, d.p3).unwrap();
    let out = solve(
        problem,
        &SolverConfig {
            r: 3,
            ..SolverConfig::default()
        },
    )
    .unwrap();
    assert!(out.converged);
    let m = out.kkt.multipliers;
    assert!(m.bounded(), "{m:?}");
}
