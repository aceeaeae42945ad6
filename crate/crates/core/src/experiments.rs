//! Physics studies built from the other modules: string states, the
//! strong-coupling string tension, adiabatic parameter sweeps and a cutoff
//! stability cross-check.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{apply_word, enumerate_sector, BasisState, Ladder, Letter, ModeRegistry, SectorBasis, SectorSpec};
use crate::hamiltonian::{
    build_gauss_generators, build_he, build_hm, build_target_h, gauss_violation, psi_modes, ModelParams,
};
use crate::linalg::fit_line;
use crate::linkops::LinkModes;
use crate::solver::{evolve, expectation, gauss_singlet_projector, Projector, SolverConfig, StateVector};
use crate::sparse::{SparseOperator, C64, ZERO};

/// Occupations of the strong-coupling vacuum: odd vertices doubly filled,
/// everything else empty.
pub fn vacuum_occupations(registry: &ModeRegistry) -> Result<BasisState> {
    let mut occ = vec![0u8; registry.len()];
    for n in (1..registry.num_vertices()).step_by(2) {
        for m in psi_modes(registry, n)? {
            occ[m] = 1;
        }
    }
    Ok(BasisState(occ))
}

/// Fermion number of the vacuum on `sites` vertices.
pub fn vacuum_filling(sites: usize) -> u32 {
    2 * (sites as u32 / 2)
}

/// Balanced gauge-theory basis; `psi_count = None` keeps every fermion number.
pub fn physical_basis(params: &ModelParams, psi_count: Option<u32>) -> Result<SectorBasis> {
    params.validate()?;
    let reg = params.target_layout().registry()?;
    let mut spec = SectorSpec::balanced(&reg);
    spec.psi_count = psi_count;
    enumerate_sector(&reg, &spec)
}

fn basis_vector(basis: &SectorBasis, occ: &BasisState) -> Result<StateVector> {
    let i = basis
        .index_of(&occ.0)
        .ok_or_else(|| Error::InvalidSector(format!("state {:?} is not in the basis", occ.0)))?;
    Ok(StateVector::basis(basis.dim(), i))
}

pub fn prepare_vacuum(basis: &SectorBasis) -> Result<StateVector> {
    basis_vector(basis, &vacuum_occupations(basis.registry())?)
}

/// `sum psi^†_{n0,i0} U_{n0}(i0,i1) ... U_{n0+l-1}(i_{l-1},i_l) psi_{n0+l,i_l} |vac>`,
/// normalized.
pub fn prepare_meson(basis: &SectorBasis, n0: usize, length: usize) -> Result<StateVector> {
    if length % 2 == 0 {
        return Err(Error::InvalidInput(format!("meson length must be odd, got {}", length)));
    }
    let reg = basis.registry();
    if n0 + length >= reg.num_vertices() {
        return Err(Error::InvalidInput(format!(
            "string from vertex {} of length {} leaves the {}-vertex lattice",
            n0,
            length,
            reg.num_vertices()
        )));
    }
    let links: Vec<LinkModes> = (n0..n0 + length).map(|l| LinkModes::of(reg, l)).collect::<Result<_>>()?;
    let head = psi_modes(reg, n0)?;
    let tail = psi_modes(reg, n0 + length)?;
    let vac = vacuum_occupations(reg)?;

    // Words of U_{n0} ... U_{n0+l-1} for fixed outer indices, built link by link.
    let mut partial: Vec<(usize, usize, f64, Vec<Letter>)> = Vec::new();
    for i in 0..2 {
        partial.push((i, i, 1.0, Vec::new()));
    }
    for lm in &links {
        let mut next = Vec::with_capacity(partial.len() * 4);
        for (first, last, sign, word) in &partial {
            for k in 0..2 {
                for (s, w) in lm.u(*last, k) {
                    let mut joined = word.clone();
                    joined.extend(w);
                    next.push((*first, k, sign * s, joined));
                }
            }
        }
        partial = next;
    }

    let mut amps = vec![ZERO; basis.dim()];
    for (first, last, sign, word) in partial {
        let mut full = vec![Letter::Ladder(head[first], Ladder::Raise)];
        full.extend(word);
        full.push(Letter::Ladder(tail[last], Ladder::Lower));
        let mut occ = vac.0.clone();
        if let Some(a) = apply_word(reg, &mut occ, &full) {
            let i = basis
                .index_of(&occ)
                .ok_or_else(|| Error::InvalidSector("meson leaves the basis sector".into()))?;
            amps[i] += C64::new(sign * a, 0.0);
        }
    }
    let state = StateVector::new(amps);
    if state.norm() < 1e-12 {
        return Err(Error::InvalidInput(format!(
            "meson at vertex {} of length {} annihilates the vacuum",
            n0, length
        )));
    }
    Ok(state.normalized())
}

/// Both fermion components filled at the even vertex `n0`, links empty.
pub fn prepare_baryon(basis: &SectorBasis, n0: usize) -> Result<StateVector> {
    let reg = basis.registry();
    if n0 % 2 != 0 || n0 >= reg.num_vertices() {
        return Err(Error::InvalidInput(format!("baryon needs an even vertex on the lattice, got {}", n0)));
    }
    let mut occ = vacuum_occupations(reg)?;
    for m in psi_modes(reg, n0)? {
        occ.0[m] = 1;
    }
    basis_vector(basis, &occ)
}

/// `max_n ||sum_a G_{n,a}^2 psi||`-style check: `<psi| sum G^2 |psi>`.
pub fn gauss_defect(basis: &SectorBasis, state: &StateVector) -> Result<f64> {
    let gens = build_gauss_generators(basis)?;
    let g2 = gauss_violation(&gens, basis.dim())?;
    Ok(expectation(&g2, state).re.abs())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StringRow {
    pub length: usize,
    /// `E(l) - E_vac`.
    pub energy: f64,
    /// `2m + (3/8) g^2 l`.
    pub strong_coupling: f64,
    /// Squared overlap of the meson with the eigenstate used (1 at `beta = 0`).
    pub overlap: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StringTensionReport {
    pub beta: f64,
    pub vacuum_energy: f64,
    pub rows: Vec<StringRow>,
    pub slope: f64,
    pub intercept: f64,
    pub fit_residual: f64,
    /// Largest `<sum G^2>` over the prepared strings.
    pub gauss_defect: f64,
}

/// Meson energies above the vacuum for strings starting at vertex 0.
///
/// At `beta = 0` the Hamiltonian is diagonal and the energies are
/// expectation values. Otherwise the Gauss-singlet block is diagonalized
/// densely and each string is assigned the eigenvalue of the eigenvector it
/// overlaps most; the vacuum energy is the lowest singlet eigenvalue.
pub fn string_tension_scan(params: &ModelParams, lengths: &[usize]) -> Result<StringTensionReport> {
    if lengths.len() < 2 {
        return Err(Error::InvalidInput("string tension scan needs at least two lengths".into()));
    }
    let basis = physical_basis(params, Some(vacuum_filling(params.sites)))?;
    let h = build_target_h(params, &basis)?;
    let vac = prepare_vacuum(&basis)?;
    let mesons: Vec<StateVector> = lengths.iter().map(|&l| prepare_meson(&basis, 0, l)).collect::<Result<_>>()?;
    let gens = build_gauss_generators(&basis)?;
    let g2 = gauss_violation(&gens, basis.dim())?;
    let gauss = mesons.iter().map(|s| expectation(&g2, s).re.abs()).fold(0.0, f64::max);

    let beta = params.beta();
    let (vacuum_energy, energies): (f64, Vec<(f64, f64)>) = if beta == 0.0 {
        let e0 = expectation(&h, &vac).re;
        (e0, mesons.iter().map(|s| (expectation(&h, s).re, 1.0)).collect())
    } else {
        let p = gauss_singlet_projector(basis.dim(), &gens)?;
        let eig = p.spectrum(&h);
        let e0 = eig.values[0];
        let picks = mesons
            .iter()
            .map(|s| {
                let c = p.coordinates(&s.amplitudes);
                let (best, w) = (0..eig.values.len())
                    .map(|k| {
                        let v = eig.vector(k);
                        let o: C64 = v.iter().zip(&c).map(|(a, b)| a.conj() * b).sum();
                        (k, o.norm_sqr())
                    })
                    .fold((0, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
                (eig.values[best], w)
            })
            .collect();
        (e0, picks)
    };

    let rows: Vec<StringRow> = lengths
        .iter()
        .zip(&energies)
        .map(|(&l, &(e, w))| StringRow {
            length: l,
            energy: e - vacuum_energy,
            strong_coupling: 2.0 * params.m + 0.375 * params.g * params.g * l as f64,
            overlap: w,
        })
        .collect();
    let x: Vec<f64> = rows.iter().map(|r| r.length as f64).collect();
    let y: Vec<f64> = rows.iter().map(|r| r.energy).collect();
    let fit = fit_line(&x, &y).ok_or_else(|| Error::InvalidInput("string lengths must differ".into()))?;
    Ok(StringTensionReport {
        beta,
        vacuum_energy,
        rows,
        slope: fit.slope,
        intercept: fit.intercept,
        fit_residual: fit.rms_residual,
        gauss_defect: gauss,
    })
}

/// Linear ramp of `g` and `m` over `duration`, applied as `slices`
/// piecewise-constant steps evaluated at slice midpoints.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSchedule {
    pub g_start: f64,
    pub g_end: f64,
    pub m_start: f64,
    pub m_end: f64,
    pub duration: f64,
    pub slices: usize,
}

impl SweepSchedule {
    fn at(&self, s: f64) -> (f64, f64) {
        (self.g_start + s * (self.g_end - self.g_start), self.m_start + s * (self.m_end - self.m_start))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub time: f64,
    pub g: f64,
    pub m: f64,
    pub energy: f64,
    pub ground_energy: f64,
    /// `|<ground(t)|psi(t)>|^2`.
    pub fidelity: f64,
    pub gauss_violation: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub singlet_dim: usize,
    pub trace: Vec<SweepPoint>,
    pub final_fidelity: f64,
    pub max_gauss_violation: f64,
}

struct SingletSector {
    basis: SectorBasis,
    projector: Projector,
    g2: SparseOperator,
}

impl SingletSector {
    fn new(params: &ModelParams) -> Result<Self> {
        let basis = physical_basis(params, Some(vacuum_filling(params.sites)))?;
        let gens = build_gauss_generators(&basis)?;
        let projector = gauss_singlet_projector(basis.dim(), &gens)?;
        let g2 = gauss_violation(&gens, basis.dim())?;
        Ok(Self { basis, projector, g2 })
    }

    fn hamiltonian(&self, params: &ModelParams, g: f64, m: f64) -> Result<SparseOperator> {
        let p = ModelParams { g, m, ..params.clone() };
        build_target_h(&p, &self.basis)
    }

    fn ground(&self, h: &SparseOperator) -> (f64, StateVector) {
        let eig = self.projector.spectrum(h);
        (eig.values[0], StateVector::new(self.projector.lift(&eig.vector(0))))
    }
}

/// Start in the singlet ground state at `(g_start, m_start)` and follow the
/// schedule with the gauge-theory Hamiltonian at fixed `beta`.
pub fn adiabatic_sweep(params: &ModelParams, schedule: &SweepSchedule, cfg: &SolverConfig) -> Result<SweepReport> {
    if !(schedule.duration >= 0.0 && schedule.duration.is_finite()) {
        return Err(Error::InvalidInput(format!("sweep duration must be finite and >= 0, got {}", schedule.duration)));
    }
    if schedule.duration > 0.0 && schedule.slices == 0 {
        return Err(Error::InvalidInput("a sweep of positive duration needs at least one slice".into()));
    }
    let sector = SingletSector::new(params)?;
    let point = |time: f64, s: f64, psi: &StateVector| -> Result<SweepPoint> {
        let (g, m) = schedule.at(s);
        let h = sector.hamiltonian(params, g, m)?;
        let (e0, gs) = sector.ground(&h);
        Ok(SweepPoint {
            time,
            g,
            m,
            energy: expectation(&h, psi).re,
            ground_energy: e0,
            fidelity: gs.fidelity(psi),
            gauss_violation: expectation(&sector.g2, psi).re.abs(),
        })
    };

    let h0 = sector.hamiltonian(params, schedule.g_start, schedule.m_start)?;
    let mut psi = sector.ground(&h0).1;
    let mut trace = vec![point(0.0, 0.0, &psi)?];
    if schedule.duration == 0.0 {
        trace.push(point(0.0, 1.0, &psi)?);
    } else {
        let n = schedule.slices;
        let dt = schedule.duration / n as f64;
        for k in 0..n {
            let (g, m) = schedule.at((k as f64 + 0.5) / n as f64);
            let h = sector.hamiltonian(params, g, m)?;
            let steps = (libm::ceil(dt.abs()) as usize).max(1);
            psi = evolve(&h, &psi, dt, steps, cfg)?;
            let s = (k + 1) as f64 / n as f64;
            trace.push(point(s * schedule.duration, s, &psi)?);
        }
    }
    let final_fidelity = trace.last().expect("non-empty").fidelity;
    let max_gauss_violation = trace.iter().map(|p| p.gauss_violation).fold(0.0, f64::max);
    Ok(SweepReport { singlet_dim: sector.projector.rank(), trace, final_fidelity, max_gauss_violation })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityRow {
    pub time: f64,
    /// `<H_E>` at cutoff 1 and 2.
    pub electric: [f64; 2],
    /// `<H_m>` at cutoff 1 and 2.
    pub mass: [f64; 2],
    /// Largest difference of any vertex occupation.
    pub occupation_deviation: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub rows: Vec<StabilityRow>,
    pub max_deviation: f64,
}

/// Evolve the vacuum with the gauge-theory Hamiltonian at cutoff 1 and at
/// cutoff 2 and compare local observables.
pub fn cutoff_stability(params: &ModelParams, times: &[f64], cfg: &SolverConfig) -> Result<StabilityReport> {
    struct Run {
        he: SparseOperator,
        hm: SparseOperator,
        occ: Vec<SparseOperator>,
        h: SparseOperator,
        vac: StateVector,
    }
    let setup = |cutoff: u8| -> Result<Run> {
        let p = ModelParams { cutoff, ..params.clone() };
        let basis = physical_basis(&p, Some(vacuum_filling(p.sites)))?;
        let reg = basis.registry();
        let occ = (0..reg.num_vertices())
            .map(|n| {
                let modes = psi_modes(reg, n)?;
                let v: Vec<f64> = (0..basis.dim()).map(|i| basis.count(i, &modes) as f64).collect();
                Ok(SparseOperator::real_diagonal(&v))
            })
            .collect::<Result<_>>()?;
        Ok(Run {
            he: build_he(&p, &basis)?,
            hm: build_hm(&p, &basis)?,
            occ,
            h: build_target_h(&p, &basis)?,
            vac: prepare_vacuum(&basis)?,
        })
    };
    let runs = [setup(1)?, setup(2)?];
    let mut rows = Vec::with_capacity(times.len());
    let mut worst: f64 = 0.0;
    for &t in times {
        let steps = (libm::ceil(t.abs()) as usize).max(1);
        let states = [evolve(&runs[0].h, &runs[0].vac, t, steps, cfg)?, evolve(&runs[1].h, &runs[1].vac, t, steps, cfg)?];
        let ev = |k: usize, op: &SparseOperator| expectation(op, &states[k]).re;
        let electric = [ev(0, &runs[0].he), ev(1, &runs[1].he)];
        let mass = [ev(0, &runs[0].hm), ev(1, &runs[1].hm)];
        let occupation_deviation = runs[0]
            .occ
            .iter()
            .zip(&runs[1].occ)
            .map(|(a, b)| (ev(0, a) - ev(1, b)).abs())
            .fold(0.0, f64::max);
        worst = worst.max((electric[0] - electric[1]).abs()).max((mass[0] - mass[1]).abs()).max(occupation_deviation);
        rows.push(StabilityRow { time: t, electric, mass, occupation_deviation });
    }
    Ok(StabilityReport { rows, max_deviation: worst })
}

/// A scripted study, as read from a job file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "experiment", rename_all = "snake_case", deny_unknown_fields)]
pub enum ExperimentSpec {
    StringTension { params: ModelParams, lengths: Vec<usize> },
    AdiabaticSweep { params: ModelParams, schedule: SweepSchedule },
    CutoffStability { params: ModelParams, times: Vec<f64> },
}

impl ExperimentSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentSpec::StringTension { .. } => "string_tension",
            ExperimentSpec::AdiabaticSweep { .. } => "adiabatic_sweep",
            ExperimentSpec::CutoffStability { .. } => "cutoff_stability",
        }
    }

    pub fn params(&self) -> &ModelParams {
        match self {
            ExperimentSpec::StringTension { params, .. }
            | ExperimentSpec::AdiabaticSweep { params, .. }
            | ExperimentSpec::CutoffStability { params, .. } => params,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params().validate()?;
        if let ExperimentSpec::StringTension { params, lengths } = self {
            for &l in lengths {
                if l % 2 == 0 || l == 0 {
                    return Err(Error::InvalidInput(format!("meson length must be odd, got {}", l)));
                }
                if l >= params.sites {
                    return Err(Error::InvalidInput(format!(
                        "meson length {} does not fit on {} sites",
                        l, params.sites
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "experiment", rename_all = "snake_case")]
pub enum ExperimentOutcome {
    StringTension(StringTensionReport),
    AdiabaticSweep(SweepReport),
    CutoffStability(StabilityReport),
}

pub fn run_experiment(spec: &ExperimentSpec, cfg: &SolverConfig) -> Result<ExperimentOutcome> {
    spec.validate()?;
    Ok(match spec {
        ExperimentSpec::StringTension { params, lengths } => {
            ExperimentOutcome::StringTension(string_tension_scan(params, lengths)?)
        }
        ExperimentSpec::AdiabaticSweep { params, schedule } => {
            ExperimentOutcome::AdiabaticSweep(adiabatic_sweep(params, schedule, cfg)?)
        }
        ExperimentSpec::CutoffStability { params, times } => {
            ExperimentOutcome::CutoffStability(cutoff_stability(params, times, cfg)?)
        }
    })
}
