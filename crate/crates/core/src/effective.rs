//! Adiabatic elimination of the link ancillas and checks of the resulting
//! gauge-theory Hamiltonian.
//!
//! With `H0 = H_chi` and `V` the rest of the microscopic Hamiltonian, the
//! second-order effective operator on the ancilla-free sector `P` is
//! `P V P - P V Q (Q H0 Q)^(-1) Q V P`.
//!
//! Virtual hops out and back through one ancilla produce
//! `-(epsilon^2 / (sqrt 2 lambda)) psi^† psi (N + 1)`. The `N` part is the
//! density-flux term that `H~_f` cancels; the `+1` part is a fermion-number
//! offset counted by [`elimination_offset`]. Where a link sits at the boson
//! cutoff the `W W^†` products lose their raising branch, so closed-form
//! comparisons use columns whose links all satisfy `N <= cutoff - 1`.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{enumerate_sector, BasisState, SectorBasis, SectorSpec};
use crate::hamiltonian::{
    apply_staggered_phase, build_gauss_generators, build_hbeta, build_he, build_hm,
    build_htilde_f, build_microscopic_h, build_hchi, chi_modes, density_flux, psi_modes,
    HbetaVariant, ModelParams,
};
use crate::linalg::{eigh, fit_line};
use crate::experiments::{vacuum_filling, vacuum_occupations};
use crate::linkops::LinkModes;
use crate::solver::{evolve, generated_subspace, SolverConfig, StateVector};
use crate::sparse::SparseOperator;

/// States of `basis` with no ancilla fermion.
pub fn zero_chi_states(basis: &SectorBasis) -> Result<Vec<usize>> {
    let reg = basis.registry();
    let chi: Vec<[usize; 2]> = (0..reg.num_links()).map(|l| chi_modes(reg, l)).collect::<Result<_>>()?;
    Ok((0..basis.dim())
        .filter(|&i| {
            let s = basis.state(i);
            chi.iter().all(|c| s[c[0]] == 0 && s[c[1]] == 0)
        })
        .collect())
}

/// Second-order effective operator on the span of the basis states `p`,
/// for diagonal `h0` vanishing on `p`. The result is indexed by position in
/// `p`.
pub fn second_order_effective(h0: &SparseOperator, v: &SparseOperator, p: &[usize]) -> Result<SparseOperator> {
    let dim = h0.dim();
    if v.dim() != dim {
        return Err(Error::DimensionMismatch { expected: dim, found: v.dim() });
    }
    if !v.is_hermitian() || !h0.is_hermitian() {
        return Err(Error::NotHermitian);
    }
    if !h0.is_diagonal() {
        return Err(Error::InvalidInput("unperturbed operator must be diagonal".into()));
    }
    let d = h0.diagonal_entries();
    let scale = h0.max_abs().max(1.0);
    let mut pos = vec![usize::MAX; dim];
    for (k, &i) in p.iter().enumerate() {
        if i >= dim {
            return Err(Error::InvalidInput(format!("state {} outside basis of dimension {}", i, dim)));
        }
        if d[i].norm() > 1e-12 * scale {
            return Err(Error::InvalidInput(format!("unperturbed energy of P state {} is {}, not 0", i, d[i].re)));
        }
        pos[i] = k;
    }
    let singular: Vec<usize> = (0..dim).filter(|&q| pos[q] == usize::MAX && d[q].norm() <= 1e-12 * scale).collect();
    if !singular.is_empty() {
        let shown: Vec<String> = singular.iter().take(8).map(|q| format!("{}", q)).collect();
        return Err(Error::Singular(format!(
            "{} excited states have zero unperturbed energy: {}{}",
            singular.len(),
            shown.join(", "),
            if singular.len() > 8 { ", ..." } else { "" }
        )));
    }

    let mut t = Vec::new();
    for (col, &pc) in p.iter().enumerate() {
        // Column pc of V is the conjugate of row pc.
        for (j, vjp) in v.row(pc) {
            let v_j_pc = vjp.conj();
            if pos[j] != usize::MAX {
                t.push((pos[j], col, v_j_pc));
                continue;
            }
            let inv = 1.0 / d[j].re;
            for (r, v_q_r) in v.row(j) {
                if pos[r] != usize::MAX {
                    // V_{r q} V_{q pc} / d_q with V_{r q} = conj(V_{q r}).
                    t.push((pos[r], col, -(v_q_r.conj() * v_j_pc) * inv));
                }
            }
        }
    }
    SparseOperator::from_triplets(p.len(), t).into_hermitian()
}

/// `-(epsilon^2 / (sqrt 2 lambda)) sum psi^† psi (N_{R,n-1} + N_{L,n})`.
pub fn build_hf_prime(params: &ModelParams, basis: &SectorBasis) -> Result<SparseOperator> {
    Ok(density_flux(basis)?.scale_real(-params.cancelling_gamma()))
}

/// `-(epsilon^2 / (sqrt 2 lambda)) sum_n c_n psi_n^† psi_n` with `c_n` the
/// number of links touching vertex `n`.
pub fn elimination_offset(params: &ModelParams, basis: &SectorBasis) -> Result<SparseOperator> {
    let reg = basis.registry();
    let nv = reg.num_vertices();
    let psi: Vec<[usize; 2]> = (0..nv).map(|n| psi_modes(reg, n)).collect::<Result<_>>()?;
    let w = -params.cancelling_gamma();
    let values: Vec<f64> = basis
        .states()
        .map(|s| {
            psi.iter()
                .enumerate()
                .map(|(n, p)| {
                    let c = (n > 0) as u32 + (n + 1 < nv && n < reg.num_links()) as u32;
                    c as f64 * (s[p[0]] + s[p[1]]) as f64
                })
                .sum::<f64>()
                * w
        })
        .collect();
    Ok(SparseOperator::real_diagonal(&values))
}

/// Ancilla-free states whose links all carry `N_L <= cutoff - 1`.
fn interior_states(basis: &SectorBasis, states: &[usize]) -> Result<Vec<usize>> {
    let reg = basis.registry();
    let links: Vec<LinkModes> = (0..reg.num_links()).map(|l| LinkModes::of(reg, l)).collect::<Result<_>>()?;
    Ok(states
        .iter()
        .copied()
        .filter(|&i| {
            let s = basis.state(i);
            links.iter().all(|lm| {
                let cap = reg.modes()[lm.a[0]].cutoff;
                s[lm.a[0]] + s[lm.a[1]] < cap && s[lm.b[0]] + s[lm.b[1]] < cap
            })
        })
        .collect())
}

fn max_on_columns(op: &SparseOperator, cols: &[usize]) -> f64 {
    let adj = op.adjoint();
    cols.iter()
        .flat_map(|&c| adj.row(c).map(|(_, v)| v.norm()))
        .fold(0.0, f64::max)
}


/// Microscopic basis with every link balanced and the fermion number of the
/// staggered vacuum.
pub fn microscopic_basis(params: &ModelParams) -> Result<SectorBasis> {
    let reg = params.microscopic_layout().registry()?;
    enumerate_sector(&reg, &SectorSpec::balanced(&reg).with_fermion_count(vacuum_filling(params.sites)))
}

/// Gauge-theory basis (no ancillas) with the fermion number of the staggered vacuum.
pub fn target_basis(params: &ModelParams) -> Result<SectorBasis> {
    let reg = params.target_layout().registry()?;
    enumerate_sector(&reg, &SectorSpec::balanced(&reg).with_psi_count(vacuum_filling(params.sites)))
}

/// Numerical elimination compared against its closed form.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EliminationReport {
    pub lambda: f64,
    pub epsilon: f64,
    pub gamma: f64,
    pub zero_chi_dim: usize,
    /// Columns used for closed-form comparisons.
    pub interior_dim: usize,
    /// `max |H_eff - (H_E + H_m + H~_f + H_f' + H_beta(full) + offset)|`.
    pub operator_difference: f64,
    /// `max |H_f'(numerical) + H~_f|`.
    pub cancellation_residual: f64,
    /// `max |[G_{n,a}, H_eff]|` over the ancilla-free sector.
    pub gauge_commutator: f64,
    pub hermitian_defect: f64,
}

/// Eliminate the ancillas of the microscopic chain described by `params`.
pub fn elimination_check(params: &ModelParams) -> Result<EliminationReport> {
    params.validate()?;
    if params.lambda == 0.0 {
        return Err(Error::InvalidParams("elimination needs lambda != 0".into()));
    }
    let basis = microscopic_basis(params)?;
    let p = zero_chi_states(&basis)?;
    let h0 = build_hchi(params, &basis)?;
    let full = build_microscopic_h(params, &basis)?;
    let v = full.sub(&h0).into_hermitian()?;
    let heff = second_order_effective(&h0, &v, &p)?;

    let restrict = |op: SparseOperator| op.restrict(&p, &p);
    let pvp = restrict(v.clone());
    let beta_params = ModelParams { beta: None, ..params.clone() };
    let hbeta = restrict(build_hbeta(&beta_params, &basis, HbetaVariant::Full)?);
    let offset = restrict(elimination_offset(params, &basis)?);
    let hf_prime = restrict(build_hf_prime(params, &basis)?);
    let htilde = restrict(build_htilde_f(params, &basis)?);
    let closed = SparseOperator::sum(
        p.len(),
        &[
            restrict(build_he(params, &basis)?),
            restrict(build_hm(params, &basis)?),
            htilde.clone(),
            hf_prime,
            hbeta.clone(),
            offset.clone(),
        ],
    );
    let cols: Vec<usize> = {
        let inner = interior_states(&basis, &p)?;
        let mut at = vec![usize::MAX; basis.dim()];
        for (k, &i) in p.iter().enumerate() {
            at[i] = k;
        }
        inner.iter().map(|&i| at[i]).collect()
    };
    let operator_difference = max_on_columns(&heff.sub(&closed), &cols);
    let hf_prime_numerical = heff.sub(&pvp).sub(&hbeta).sub(&offset);
    let cancellation_residual = max_on_columns(&hf_prime_numerical.add(&htilde), &cols);

    let gauge_commutator = build_gauss_generators(&basis)?
        .iter()
        .map(|g| SparseOperator::commutator_max_norm(&g.restrict(&p, &p), &heff))
        .fold(0.0, f64::max);

    Ok(EliminationReport {
        lambda: params.lambda,
        epsilon: params.epsilon,
        gamma: params.gamma,
        zero_chi_dim: p.len(),
        interior_dim: cols.len(),
        operator_difference,
        cancellation_residual,
        gauge_commutator,
        hermitian_defect: heff.hermitian_defect(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub lambda: f64,
    /// `max_k |(E_k - E_0)_full - (E_k - E_0)_eff|` over the compared levels.
    pub gap_error: f64,
    /// `max_k |E_k,full - E_k,eff|` including the elimination offset.
    pub level_error: f64,
    pub full_levels: Vec<f64>,
    pub effective_levels: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanReport {
    pub levels: usize,
    pub rows: Vec<ScanRow>,
    /// `p` in `gap_error ~ lambda^(-p)`; absent when some error vanishes.
    pub fitted_p: Option<f64>,
    /// RMS residual of the log-log fit.
    pub fit_residual: Option<f64>,
}

/// Compare the low spectrum of the microscopic chain (with `gamma` tuned to
/// cancel `H_f'`) against `H_E + H_m + H_beta(full)` over a grid of `lambda`.
pub fn spectral_convergence_scan(params: &ModelParams, lambdas: &[f64], levels: usize) -> Result<ScanReport> {
    if lambdas.len() < 3 {
        return Err(Error::InvalidInput(format!("need at least 3 lambda values to fit, got {}", lambdas.len())));
    }
    if levels == 0 {
        return Err(Error::InvalidInput("compare at least one level".into()));
    }
    let mut rows = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidParams(format!("lambda must be positive, got {}", lambda)));
        }
        let mut p = ModelParams { lambda, beta: None, ..params.clone() };
        p.gamma = p.cancelling_gamma();
        p.validate()?;

        let micro = microscopic_basis(&p)?;
        let full = eigh(&build_microscopic_h(&p, &micro)?.to_dense()).values;
        let target = target_basis(&p)?;
        let heff = SparseOperator::sum(
            target.dim(),
            &[
                build_he(&p, &target)?,
                build_hm(&p, &target)?,
                build_hbeta(&p, &target, HbetaVariant::Full)?,
                elimination_offset(&p, &target)?,
            ],
        );
        let eff = eigh(&heff.to_dense()).values;
        let k = levels.min(eff.len());
        let full_levels = full[..k].to_vec();
        let effective_levels = eff[..k].to_vec();
        let mut gap_error: f64 = 0.0;
        let mut level_error: f64 = 0.0;
        for i in 0..k {
            gap_error = gap_error.max(((full[i] - full[0]) - (eff[i] - eff[0])).abs());
            level_error = level_error.max((full[i] - eff[i]).abs());
        }
        rows.push(ScanRow { lambda, gap_error, level_error, full_levels, effective_levels });
    }
    let (fitted_p, fit_residual) = if rows.iter().all(|r| r.gap_error > 0.0) {
        let x: Vec<f64> = rows.iter().map(|r| libm::log(r.lambda)).collect();
        let y: Vec<f64> = rows.iter().map(|r| libm::log(r.gap_error)).collect();
        match fit_line(&x, &y) {
            Some(f) => (Some(-f.slope), Some(f.rms_residual)),
            None => (None, None),
        }
    } else {
        (None, None)
    };
    Ok(ScanReport { levels, rows, fitted_p, fit_residual })
}

/// Starting configuration of the truncation check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitialState {
    /// Odd vertices doubly filled, all links empty.
    Vacuum,
    /// Explicit occupations in registry order.
    Occupations(BasisState),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvolutionDeviation {
    pub time: f64,
    /// `max_i |psi_full(t)_i - psi_trunc(t)_i|`.
    pub deviation: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruncationReport {
    pub sites: usize,
    pub cutoff: u8,
    pub depth: usize,
    pub subspace_dim: usize,
    /// `max |V^† (H_full' - H_trunc) V|` on the generated subspace.
    pub max_compressed_deviation: f64,
    /// `max |(H_full' - H_trunc) psi0|`.
    pub single_action_deviation: f64,
    /// Weight of the generated subspace on states with some link above
    /// `j = 1/2`, summed over its basis vectors.
    pub high_flux_weight: f64,
    pub evolution: Vec<EvolutionDeviation>,
}

/// Compare the phased full hopping with the truncated one on the subspace
/// they generate from `initial`. Initial links above `j = 1/2` are rejected.
pub fn truncation_equivalence_check(
    params: &ModelParams,
    initial: &InitialState,
    depth: usize,
    times: &[f64],
    cfg: &SolverConfig,
) -> Result<TruncationReport> {
    truncation_report(params, initial, depth, times, cfg, true)
}

/// [`truncation_equivalence_check`] without the `j <= 1/2` precondition,
/// for negative controls.
pub fn truncation_deviation_unchecked(
    params: &ModelParams,
    initial: &InitialState,
    depth: usize,
    times: &[f64],
    cfg: &SolverConfig,
) -> Result<TruncationReport> {
    truncation_report(params, initial, depth, times, cfg, false)
}

fn truncation_report(
    params: &ModelParams,
    initial: &InitialState,
    depth: usize,
    times: &[f64],
    cfg: &SolverConfig,
    enforce: bool,
) -> Result<TruncationReport> {
    params.validate()?;
    let reg = params.target_layout().registry()?;
    let occ = match initial {
        InitialState::Vacuum => vacuum_occupations(&reg)?,
        InitialState::Occupations(s) => {
            s.validate(&reg)?;
            s.clone()
        }
    };
    let links: Vec<LinkModes> = (0..reg.num_links()).map(|l| LinkModes::of(&reg, l)).collect::<Result<_>>()?;
    let flux = |s: &[u8], lm: &LinkModes| (s[lm.a[0]] + s[lm.a[1]], s[lm.b[0]] + s[lm.b[1]]);
    for (l, lm) in links.iter().enumerate() {
        let (nl, nr) = flux(&occ.0, lm);
        if nl != nr {
            return Err(Error::InvalidInput(format!("link {} is unbalanced (N_L = {}, N_R = {})", l, nl, nr)));
        }
        if enforce && nl > 1 {
            return Err(Error::InvalidInput(format!(
                "link {} starts at j = {}/2; the truncated hopping is only equivalent for j <= 1/2",
                l, nl
            )));
        }
    }
    let psi_total: u32 = (0..reg.num_vertices())
        .map(|n| psi_modes(&reg, n).map(|p| (occ.0[p[0]] + occ.0[p[1]]) as u32))
        .sum::<Result<u32>>()?;
    let basis = enumerate_sector(&reg, &SectorSpec::balanced(&reg).with_psi_count(psi_total))?;
    let start = basis
        .index_of(&occ.0)
        .ok_or_else(|| Error::InvalidInput("initial state lies outside its own sector".into()))?;

    let full = apply_staggered_phase(&basis, &build_hbeta(params, &basis, HbetaVariant::Full)?)?;
    let trunc = build_hbeta(params, &basis, HbetaVariant::Truncated)?;
    let psi0 = StateVector::basis(basis.dim(), start);

    let diff = full.sub(&trunc);
    let single_action_deviation = diff.apply(&psi0.amplitudes).iter().map(|v| v.norm()).fold(0.0, f64::max);

    let k = generated_subspace(&full, &psi0, depth);
    let cf = k.compress(&full);
    let ct = k.compress(&trunc);
    let max_compressed_deviation = (cf - ct).iter().map(|v| v.norm()).fold(0.0, f64::max);

    let high: Vec<bool> = (0..basis.dim())
        .map(|i| links.iter().any(|lm| flux(basis.state(i), lm).0 > 1))
        .collect();
    let high_flux_weight: f64 = k
        .columns()
        .iter()
        .map(|c| c.iter().zip(&high).filter(|(_, h)| **h).map(|(v, _)| v.norm_sqr()).sum::<f64>())
        .sum();

    let diag = build_he(params, &basis)?.add(&build_hm(params, &basis)?);
    let h_full = diag.add(&full);
    let h_trunc = diag.add(&trunc);
    let mut evolution = Vec::with_capacity(times.len());
    for &t in times {
        let steps = (libm::ceil(t.abs()) as usize).max(1);
        let a = evolve(&h_full, &psi0, t, steps, cfg)?;
        let b = evolve(&h_trunc, &psi0, t, steps, cfg)?;
        let deviation = a.amplitudes.iter().zip(&b.amplitudes).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
        evolution.push(EvolutionDeviation { time: t, deviation });
    }

    Ok(TruncationReport {
        sites: params.sites,
        cutoff: params.cutoff,
        depth,
        subspace_dim: k.rank(),
        max_compressed_deviation,
        single_action_deviation,
        high_flux_weight,
        evolution,
    })
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::C64;

    fn micro(lambda: f64, gamma: f64) -> ModelParams {
        ModelParams { sites: 2, cutoff: 2, g: 1.0, m: 0.5, epsilon: 1.0, lambda, gamma, ..ModelParams::default() }
    }

    #[test]
    fn elimination_matches_closed_form() {
        let lambda = 1000.0;
        let p = micro(lambda, 0.3);
        let r = elimination_check(&p).unwrap();
        assert!(r.interior_dim > 0);
        assert!(r.operator_difference <= 1e-10 * 1.0 / lambda, "{:?}", r);
        assert!(r.hermitian_defect < 1e-12);
        assert!(r.gauge_commutator < 1e-10, "{:?}", r);
    }

    #[test]
    fn cancellation_at_tuned_gamma() {
        for (g, m) in [(1.0, 0.5), (0.3, 2.0)] {
            let mut p = ModelParams { g, m, ..micro(200.0, 0.0) };
            p.gamma = p.cancelling_gamma();
            let r = elimination_check(&p).unwrap();
            assert!(r.cancellation_residual <= 1e-12, "{:?}", r);
        }
        let off = elimination_check(&micro(200.0, 0.0)).unwrap();
        assert!(off.cancellation_residual > 1e-4);
    }

    #[test]
    fn zero_epsilon_gives_pvp() {
        let p = ModelParams { epsilon: 0.0, ..micro(50.0, 0.2) };
        let basis = microscopic_basis(&p).unwrap();
        let ps = zero_chi_states(&basis).unwrap();
        let h0 = build_hchi(&p, &basis).unwrap();
        let v = build_microscopic_h(&p, &basis).unwrap().sub(&h0).into_hermitian().unwrap();
        let heff = second_order_effective(&h0, &v, &ps).unwrap();
        assert_eq!(heff.max_abs_diff(&v.restrict(&ps, &ps)), 0.0);
    }

    #[test]
    fn singular_block_is_reported() {
        let h0 = SparseOperator::real_diagonal(&[0.0, 0.0, 2.0]);
        let v = SparseOperator::zeros(3);
        match second_order_effective(&h0, &v, &[0]) {
            Err(Error::Singular(msg)) => assert!(msg.contains('1')),
            other => panic!("{:?}", other),
        }
    }

    #[test]
    fn two_level_oracle() {
        // P = {0}, Q = {1} at energy 4, coupling 0.5: -0.25/4.
        let h0 = SparseOperator::real_diagonal(&[0.0, 4.0]);
        let v = SparseOperator::from_triplets(2, vec![(0, 1, C64::new(0.5, 0.0))]).plus_adjoint();
        let h = second_order_effective(&h0, &v, &[0]).unwrap();
        assert!((h.get(0, 0).re + 0.0625).abs() < 1e-16);
    }

    #[test]
    fn scan_needs_three_points_and_vanishes_without_tunneling() {
        let p = micro(50.0, 0.0);
        assert!(spectral_convergence_scan(&p, &[50.0, 100.0], 2).is_err());
        let z = ModelParams { epsilon: 0.0, ..p };
        let r = spectral_convergence_scan(&z, &[50.0, 100.0, 200.0], 2).unwrap();
        assert!(r.rows.iter().all(|row| row.gap_error == 0.0 && row.level_error == 0.0));
        assert!(r.fitted_p.is_none());
    }

    #[test]
    fn truncation_single_action_on_vacuum() {
        let p = ModelParams { sites: 4, cutoff: 2, g: 1.0, m: 0.5, beta: Some(0.4), ..ModelParams::default() };
        let r = truncation_equivalence_check(&p, &InitialState::Vacuum, 1, &[], &SolverConfig::default()).unwrap();
        assert!(r.single_action_deviation < 1e-14);
        assert!(r.max_compressed_deviation < 1e-14);
    }

    #[test]
    fn high_flux_start_is_rejected_and_deviates() {
        let p = ModelParams { sites: 2, cutoff: 3, g: 1.0, m: 0.5, beta: Some(0.4), ..ModelParams::default() };
        let reg = p.target_layout().registry().unwrap();
        let lm = LinkModes::of(&reg, 0).unwrap();
        let mut occ = vec![0u8; reg.len()];
        for m in lm.a.iter().chain(&lm.b) {
            occ[*m] = 1;
        }
        occ[psi_modes(&reg, 1).unwrap()[0]] = 1;
        occ[psi_modes(&reg, 0).unwrap()[1]] = 1;
        let init = InitialState::Occupations(BasisState(occ));
        let cfg = SolverConfig::default();
        assert!(truncation_equivalence_check(&p, &init, 2, &[], &cfg).is_err());
        let r = truncation_deviation_unchecked(&p, &init, 2, &[], &cfg).unwrap();
        assert!(r.max_compressed_deviation > 1e-3, "{:?}", r);
    }
}
