//! Angular-momentum bookkeeping and the bath replacement of the atomic model.

use ymsim_core::fock::{enumerate_sector, Ladder, Letter, Location, SectorSpec, Species};
use ymsim_core::hamiltonian::{build_hf, build_microscopic_h, weighted_number, BathMode, ModelParams};
use ymsim_core::hyperfine::{validate, HalfInt, SpeciesAssignment, Violation};
use ymsim_core::sparse::Term;
use ymsim_core::{SparseOperator, C64};

fn explicit(cutoff: u8, bath_cutoff: u8, alpha: f64) -> ModelParams {
    ModelParams {
        sites: 2,
        cutoff,
        g: 0.9,
        m: 0.4,
        epsilon: 0.7,
        lambda: 5.0,
        gamma: 0.3,
        alpha,
        bath: BathMode::Explicit,
        bath_cutoff,
        ..ModelParams::default()
    }
}

fn mf_operator(basis: &ymsim_core::fock::SectorBasis, a: &SpeciesAssignment) -> SparseOperator {
    weighted_number(basis, |s| a.get(s).to_f64())
}

#[test]
fn microscopic_model_conserves_mf() {
    let p = explicit(1, 2, 1.0);
    let reg = p.microscopic_layout().registry().unwrap();
    let basis = enumerate_sector(&reg, &SectorSpec::new()).unwrap();
    let h = build_microscopic_h(&p, &basis).unwrap();
    assert!(h.nnz() > 0);
    let m = mf_operator(&basis, &SpeciesAssignment::reference());
    assert!(SparseOperator::commutator_max_norm(&h, &m) <= 1e-12);
}

/// `f^† b^† b' f'` for a collision between cells `(f, b)` and `(f', b')`.
fn exchange(reg: &ymsim_core::fock::ModeRegistry, cells: [(Species, Species); 2]) -> Vec<Term> {
    let at = |s: Species| {
        let loc = if s.on_vertex() { Location::Vertex(0) } else { Location::Link(0) };
        reg.require(s, loc).unwrap()
    };
    let [(f, b), (f2, b2)] = cells;
    let word = vec![
        Letter::Ladder(at(f), Ladder::Raise),
        Letter::Ladder(at(b), Ladder::Raise),
        Letter::Ladder(at(b2), Ladder::Lower),
        Letter::Ladder(at(f2), Ladder::Lower),
    ];
    vec![Term::new(C64::new(1.0, 0.0), word)]
}

#[test]
fn collisions_enable_unwanted_processes() {
    let reference = SpeciesAssignment::reference();
    let mut broken = reference;
    // psi1 + A2 = 7/2 and chi1 + C1 = 7/2 + C1; C1 = 0 makes (psi1, A2) collide with (chi1, C1).
    broken.set(Species::C1, HalfInt::from_int(0));
    let v = validate(&broken).unwrap();
    assert!(!v.valid);
    let collision = [(Species::Psi1, Species::A2), (Species::Chi1, Species::C1)];
    assert!(v.violations.iter().any(|x| matches!(
        x,
        Violation::Collision { value, cells, .. }
            if *value == HalfInt::from_twice(7) && collision.iter().all(|c| cells.contains(c))
    )));

    let p = explicit(1, 1, 1.0);
    let reg = p.microscopic_layout().registry().unwrap();
    let basis = enumerate_sector(&reg, &SectorSpec::new()).unwrap();
    let extra = SparseOperator::from_terms(&basis, &exchange(&reg, collision)).plus_adjoint();
    assert!(extra.nnz() > 0);
    let m_broken = mf_operator(&basis, &broken);
    let m_ref = mf_operator(&basis, &reference);
    assert!(SparseOperator::commutator_max_norm(&extra, &m_broken) <= 1e-12);
    assert!(SparseOperator::commutator_max_norm(&extra, &m_ref) > 0.1);
}

fn coherent(alpha: f64, cutoff: u8) -> Vec<f64> {
    let mut amps = Vec::with_capacity(cutoff as usize + 1);
    let mut a = (-alpha * alpha / 2.0).exp();
    for n in 0..=cutoff as usize {
        amps.push(a);
        a *= alpha / ((n + 1) as f64).sqrt();
    }
    let norm: f64 = amps.iter().map(|x| x * x).sum::<f64>().sqrt();
    amps.iter().map(|x| x / norm).collect()
}

#[test]
fn bath_coherent_state_reproduces_meanfield_tunneling() {
    let alpha = 1.0;
    let cutoff = 6u8;
    assert!(cutoff as f64 >= alpha * alpha + 5.0 * alpha);
    let p_ex = explicit(1, cutoff, alpha);
    let p_mf = ModelParams { bath: BathMode::Meanfield, ..p_ex.clone() };

    let reg_mf = p_mf.microscopic_layout().registry().unwrap();
    let sys = enumerate_sector(&reg_mf, &SectorSpec::balanced(&reg_mf).with_fermion_count(2)).unwrap();
    let h_mf = build_hf(&p_mf, &sys).unwrap();

    let reg_ex = p_ex.microscopic_layout().registry().unwrap();
    let full = enumerate_sector(&reg_ex, &SectorSpec::balanced(&reg_ex).with_fermion_count(2)).unwrap();
    let h_ex = build_hf(&p_ex, &full).unwrap();

    // Map registry modes of the system into the explicit registry.
    let place: Vec<usize> = reg_mf
        .modes()
        .iter()
        .map(|m| reg_ex.require(m.species, m.location).unwrap())
        .collect();
    let bath: Vec<usize> = [Species::C1, Species::C2, Species::D1, Species::D2]
        .iter()
        .map(|&s| reg_ex.require(s, Location::Link(0)).unwrap())
        .collect();
    let coh = coherent(alpha, cutoff);
    let dressed = |i: usize| -> Vec<C64> {
        let mut v = vec![C64::new(0.0, 0.0); full.dim()];
        let mut occ = vec![0u8; reg_ex.len()];
        for (k, &n) in sys.state(i).iter().enumerate() {
            occ[place[k]] = n;
        }
        let c = cutoff as usize + 1;
        for code in 0..c.pow(4) {
            let mut rest = code;
            let mut amp = 1.0;
            for &b in &bath {
                let n = rest % c;
                rest /= c;
                occ[b] = n as u8;
                amp *= coh[n];
            }
            v[full.index_of(&occ).expect("dressed state in basis")] = C64::new(amp, 0.0);
        }
        v
    };

    let dressed_all: Vec<Vec<C64>> = (0..sys.dim()).map(dressed).collect();
    let mut compared = 0;
    let mut worst: f64 = 0.0;
    let entries = h_mf.triplets();
    for j in 0..sys.dim() {
        let hv = h_ex.apply(&dressed_all[j]);
        for t in entries.iter().filter(|t| t.col == j) {
            let got: C64 = dressed_all[t.row].iter().zip(&hv).map(|(a, b)| a.conj() * b).sum();
            worst = worst.max((got - t.value).norm() / t.value.norm());
            compared += 1;
        }
    }
    assert!(compared > 0);
    assert!(worst <= 5.0 / alpha, "relative error {}", worst);
    assert!(worst <= 1e-3, "relative error {}", worst);
}
