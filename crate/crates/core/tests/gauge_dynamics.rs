use ymsim_core::experiments::{physical_basis, prepare_meson, prepare_vacuum};
use ymsim_core::hamiltonian::{build_gauss_generators, build_target_h, gauss_violation, ModelParams};
use ymsim_core::solver::{evolve, expectation, SolverConfig};

#[test]
fn gauss_violation_does_not_drift() {
    let cfg = SolverConfig::default();
    for (sites, cutoff) in [(2usize, 1u8), (2, 2), (4, 1)] {
        let p = ModelParams { sites, cutoff, g: 1.2, m: 0.4, beta: Some(0.6), ..ModelParams::default() };
        let basis = physical_basis(&p, Some(sites as u32 / 2 * 2)).unwrap();
        let h = build_target_h(&p, &basis).unwrap();
        let g2 = gauss_violation(&build_gauss_generators(&basis).unwrap(), basis.dim()).unwrap();
        let start = if sites == 4 { prepare_meson(&basis, 0, 3).unwrap() } else { prepare_vacuum(&basis).unwrap() };
        let t = 5.0 / p.g;
        let before = expectation(&g2, &start).re;
        let after = evolve(&h, &start, t, 5, &cfg).unwrap();
        assert!((after.norm() - 1.0).abs() < 1e-10);
        assert!((expectation(&g2, &after).re - before).abs() <= 1e-8);
    }
}
