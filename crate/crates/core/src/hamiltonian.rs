//! Hamiltonian terms of the lattice gauge theory and of its atomic simulator.
//!
//! Conventions: vertices `n = 0..sites`, vertex 0 is even; link `n` joins
//! vertices `n` and `n + 1` (open chain). Each builder returns an operator on
//! the given basis flagged Hermitian.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{ChainLayout, Ladder, Letter, Location, ModeId, ModeRegistry, SectorBasis, Species};
use crate::linkops::{doublet_bilinear, pauli, terms_from_words, LinkModes, SignedWord};
use crate::sparse::{SparseOperator, Term, C64, I, ONE};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    #[default]
    Open,
}

/// How the bath bosons `C`, `D` enter the boson-assisted tunneling.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BathMode {
    /// Bath operators replaced by the coherent amplitude `alpha`.
    #[default]
    Meanfield,
    /// Bath bosons kept as modes (single-link systems only).
    Explicit,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HbetaVariant {
    /// `(beta / sqrt 2) sum (psi^† W_L W_R psi + h.c.)`
    Full,
    /// `i beta sum (psi^† U psi - h.c.)`
    Truncated,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    pub sites: usize,
    #[serde(default)]
    pub boundary: Boundary,
    pub cutoff: u8,
    pub g: f64,
    pub m: f64,
    #[serde(default)]
    pub epsilon: f64,
    #[serde(default)]
    pub lambda: f64,
    #[serde(default)]
    pub gamma: f64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub bath: BathMode,
    /// Per-mode cap of the bath bosons in explicit mode.
    #[serde(default = "default_bath_cutoff")]
    pub bath_cutoff: u8,
    /// Explicit hopping amplitude; derived from `-epsilon^2 / lambda` when absent.
    #[serde(default)]
    pub beta: Option<f64>,
}

fn default_alpha() -> f64 {
    1.0
}

fn default_bath_cutoff() -> u8 {
    6
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            sites: 2,
            boundary: Boundary::Open,
            cutoff: 1,
            g: 1.0,
            m: 0.0,
            epsilon: 0.0,
            lambda: 0.0,
            gamma: 0.0,
            alpha: default_alpha(),
            bath: BathMode::Meanfield,
            bath_cutoff: default_bath_cutoff(),
            beta: None,
        }
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        if self.sites < 2 {
            return Err(Error::InvalidParams(format!("sites must be at least 2, got {}", self.sites)));
        }
        if self.cutoff == 0 {
            return Err(Error::InvalidParams("cutoff must be at least 1".into()));
        }
        let named = [
            ("g", self.g),
            ("m", self.m),
            ("epsilon", self.epsilon),
            ("lambda", self.lambda),
            ("gamma", self.gamma),
            ("alpha", self.alpha),
            ("beta", self.beta.unwrap_or(0.0)),
        ];
        for (name, v) in named {
            if !v.is_finite() {
                return Err(Error::InvalidParams(format!("{} must be finite, got {}", name, v)));
            }
        }
        if self.alpha <= 0.0 {
            return Err(Error::InvalidParams(format!("alpha must be positive, got {}", self.alpha)));
        }
        if let Some(beta) = self.beta {
            if self.epsilon != 0.0 && self.lambda != 0.0 {
                let derived = -self.epsilon * self.epsilon / self.lambda;
                if (beta - derived).abs() > 1e-12 * beta.abs().max(1.0) {
                    return Err(Error::InvalidParams(format!(
                        "beta = {} contradicts -epsilon^2/lambda = {}",
                        beta, derived
                    )));
                }
            }
        }
        if self.bath == BathMode::Explicit && self.sites != 2 {
            return Err(Error::InvalidParams("explicit bath mode supports a single link (sites = 2)".into()));
        }
        Ok(())
    }

    pub fn beta(&self) -> f64 {
        match self.beta {
            Some(b) => b,
            None if self.lambda != 0.0 => -self.epsilon * self.epsilon / self.lambda,
            None => 0.0,
        }
    }

    /// `epsilon^2 / (sqrt 2 lambda)`, the density-density strength that
    /// cancels the second-order diagonal term.
    pub fn cancelling_gamma(&self) -> f64 {
        if self.lambda == 0.0 {
            0.0
        } else {
            self.epsilon * self.epsilon / (core::f64::consts::SQRT_2 * self.lambda)
        }
    }

    pub fn target_layout(&self) -> ChainLayout {
        ChainLayout::target(self.sites, self.cutoff)
    }

    pub fn microscopic_layout(&self) -> ChainLayout {
        match self.bath {
            BathMode::Meanfield => ChainLayout::microscopic(self.sites, self.cutoff),
            BathMode::Explicit => ChainLayout::explicit_bath(self.sites, self.cutoff, self.bath_cutoff),
        }
    }
}

/// `(psi1, psi2)` of a vertex.
pub fn psi_modes(registry: &ModeRegistry, vertex: usize) -> Result<[ModeId; 2]> {
    let loc = Location::Vertex(vertex);
    Ok([registry.require(Species::Psi1, loc)?, registry.require(Species::Psi2, loc)?])
}

/// `(chi1, chi2)` of a link.
pub fn chi_modes(registry: &ModeRegistry, link: usize) -> Result<[ModeId; 2]> {
    let loc = Location::Link(link);
    Ok([registry.require(Species::Chi1, loc)?, registry.require(Species::Chi2, loc)?])
}

fn bath_modes(registry: &ModeRegistry, link: usize) -> Result<([ModeId; 2], [ModeId; 2])> {
    let loc = Location::Link(link);
    Ok((
        [registry.require(Species::C1, loc)?, registry.require(Species::C2, loc)?],
        [registry.require(Species::D1, loc)?, registry.require(Species::D2, loc)?],
    ))
}

fn require_gauge_modes(registry: &ModeRegistry) -> Result<()> {
    if registry.num_vertices() < 2 || registry.num_links() + 1 != registry.num_vertices() {
        return Err(Error::MissingModes(format!(
            "need a chain of at least 2 vertices joined by links, found {} vertices and {} links",
            registry.num_vertices(),
            registry.num_links()
        )));
    }
    for n in 0..registry.num_vertices() {
        psi_modes(registry, n)?;
    }
    for l in 0..registry.num_links() {
        LinkModes::of(registry, l)?;
    }
    Ok(())
}

fn raise(m: ModeId) -> Letter {
    Letter::Ladder(m, Ladder::Raise)
}

fn lower(m: ModeId) -> Letter {
    Letter::Ladder(m, Ladder::Lower)
}

fn diagonal_from(basis: &SectorBasis, f: impl Fn(&[u8]) -> f64) -> SparseOperator {
    let values: Vec<f64> = basis.states().map(f).collect();
    SparseOperator::real_diagonal(&values)
}

fn spin_energy(n: u32) -> f64 {
    let j = n as f64 / 2.0;
    j * (j + 1.0)
}

/// Electric energy `(g^2/4) sum [N_L/2 (N_L/2+1) + N_R/2 (N_R/2+1)]`.
pub fn build_he(params: &ModelParams, basis: &SectorBasis) -> Result<SparseOperator> {
    let reg = basis.registry();
    let links: Vec<LinkModes> = (0..reg.num_links()).map(|l| LinkModes::of(reg, l)).collect::<Result<_>>()?;
    let pref = params.g * params.g / 4.0;
    Ok(diagonal_from(basis, |s| {
        let e: f64 = links
            .iter()
            .map(|lm| {
                let nl = s[lm.a[0]] as u32 + s[lm.a[1]] as u32;
                let nr = s[lm.b[0]] as u32 + s[lm.b[1]] as u32;
                spin_energy(nl) + spin_energy(nr)
            })
            .sum();
        pref * e
    }))
}

/// Staggered mass `m sum (-1)^n psi_n^† psi_n`.
pub fn build_hm(params: &ModelParams, basis: &SectorBasis) -> Result<SparseOperator> {
    let reg = basis.registry();
    let psi: Vec<[ModeId; 2]> = (0..reg.num_vertices()).map(|n| psi_modes(reg, n)).collect::<Result<_>>()?;
    Ok(diagonal_from(basis, |s| {
        psi.iter()
            .enumerate()
            .map(|(n, p)| {
                let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
                sign * (s[p[0]] + s[p[1]]) as f64
            })
            .sum::<f64>()
            * params.m
    }))
}

/// Ancilla energy `lambda sum chi^† chi`.
pub fn build_hchi(params: &ModelParams, basis: &SectorBasis) -> Result<SparseOperator> {
    let reg = basis.registry();
    let chi: Vec<[ModeId; 2]> = (0..reg.num_links()).map(|l| chi_modes(reg, l)).collect::<Result<_>>()?;
    Ok(diagonal_from(basis, |s| {
        params.lambda * chi.iter().map(|c| (s[c[0]] + s[c[1]]) as f64).sum::<f64>()
    }))
}

/// `sum_n psi_n^† psi_n (N_{R,n-1} + N_{L,n})` over existing links.
pub fn density_flux(basis: &SectorBasis) -> Result<SparseOperator> {
    let reg = basis.registry();
    let psi: Vec<[ModeId; 2]> = (0..reg.num_vertices()).map(|n| psi_modes(reg, n)).collect::<Result<_>>()?;
    let links: Vec<LinkModes> = (0..reg.num_links()).map(|l| LinkModes::of(reg, l)).collect::<Result<_>>()?;
    Ok(diagonal_from(basis, |s| {
        psi.iter()
            .enumerate()
            .map(|(n, p)| {
                let occ = (s[p[0]] + s[p[1]]) as f64;
                let mut flux = 0.0;
                if n > 0 {
                    if let Some(lm) = links.get(n - 1) {
                        flux += (s[lm.b[0]] + s[lm.b[1]]) as f64;
                    }
                }
                if let Some(lm) = links.get(n) {
                    flux += (s[lm.a[0]] + s[lm.a[1]]) as f64;
                }
                occ * flux
            })
            .sum()
    }))
}

/// Density-density term `gamma sum psi_n^† psi_n (N_{R,n-1} + N_{L,n})`.
pub fn build_htilde_f(params: &ModelParams, basis: &SectorBasis) -> Result<SparseOperator> {
    Ok(density_flux(basis)?.scale_real(params.gamma))
}

/// Boson-assisted tunneling between vertices and link ancillas.
pub fn build_hf(params: &ModelParams, basis: &SectorBasis) -> Result<SparseOperator> {
    let reg = basis.registry();
    if reg.num_links() == 0 {
        return Err(Error::MissingModes("tunneling needs at least one link".into()));
    }
    let explicit = params.bath == BathMode::Explicit;
    if explicit && reg.num_links() != 1 {
        return Err(Error::InvalidParams("explicit bath mode supports a single link".into()));
    }
    let root4 = libm::pow(2.0, 0.25);
    let pref = if explicit { params.epsilon / (root4 * params.alpha) } else { params.epsilon / root4 };
    let coeff = C64::new(pref, 0.0);
    let mut terms = Vec::new();
    for l in 0..reg.num_links() {
        let lm = LinkModes::of(reg, l)?;
        let chi = chi_modes(reg, l)?;
        let left = psi_modes(reg, l)?;
        let right = psi_modes(reg, l + 1)?;
        let baths = if explicit { Some(bath_modes(reg, l)?) } else { None };
        for i in 0..2 {
            for j in 0..2 {
                let (sl, wl) = lm.w_left(i, j);
                let (sr, wr) = lm.w_right(i, j);
                let (mut word_l, mut word_r) = (vec![raise(left[i]), wl], vec![raise(chi[i]), wr]);
                if let Some((c, d)) = baths {
                    word_l.push(bath_letter_left(c, i, j));
                    word_r.push(bath_letter_right(d, i, j));
                }
                word_l.push(lower(chi[j]));
                word_r.push(lower(right[j]));
                terms.push(Term::new(coeff * sl, word_l));
                terms.push(Term::new(coeff * sr, word_r));
            }
        }
    }
    Ok(SparseOperator::from_terms(basis, &terms).plus_adjoint())
}

/// Bath factor of `W~_L(i, j)`: `c1, c2^†, c2, c1^†`.
fn bath_letter_left(c: [ModeId; 2], i: usize, j: usize) -> Letter {
    match (i, j) {
        (0, 0) => lower(c[0]),
        (0, 1) => raise(c[1]),
        (1, 0) => lower(c[1]),
        _ => raise(c[0]),
    }
}

/// Bath factor of `W~_R(i, j)`: `d1, d2, d2^†, d1^†`.
fn bath_letter_right(d: [ModeId; 2], i: usize, j: usize) -> Letter {
    match (i, j) {
        (0, 0) => lower(d[0]),
        (0, 1) => lower(d[1]),
        (1, 0) => raise(d[1]),
        _ => raise(d[0]),
    }
}

fn hopping_terms(reg: &ModeRegistry, coeff: C64, entry: impl Fn(&LinkModes, usize, usize) -> Vec<SignedWord>) -> Result<Vec<Term>> {
    let mut terms = Vec::new();
    for l in 0..reg.num_links() {
        let lm = LinkModes::of(reg, l)?;
        let left = psi_modes(reg, l)?;
        let right = psi_modes(reg, l + 1)?;
        for i in 0..2 {
            for k in 0..2 {
                let words = entry(&lm, i, k).into_iter().map(|(s, w)| {
                    let mut full = vec![raise(left[i])];
                    full.extend(w);
                    full.push(lower(right[k]));
                    (s, full)
                });
                terms.extend(terms_from_words(coeff, words));
            }
        }
    }
    Ok(terms)
}

/// Gauge-matter hopping, either with the flux-dependent square roots
/// (`Full`) or with the unitary link operator (`Truncated`).
pub fn build_hbeta(params: &ModelParams, basis: &SectorBasis, variant: HbetaVariant) -> Result<SparseOperator> {
    let reg = basis.registry();
    require_gauge_modes(reg)?;
    let beta = params.beta();
    let terms = match variant {
        HbetaVariant::Full => {
            hopping_terms(reg, C64::new(beta / core::f64::consts::SQRT_2, 0.0), |lm, i, k| lm.ww(i, k))?
        }
        HbetaVariant::Truncated => hopping_terms(reg, I * beta, |lm, i, k| lm.u(i, k))?,
    };
    Ok(SparseOperator::from_terms(basis, &terms).plus_adjoint())
}

/// `H_E + H_m + H_beta(truncated)`.
pub fn build_target_h(params: &ModelParams, basis: &SectorBasis) -> Result<SparseOperator> {
    require_gauge_modes(basis.registry())?;
    let he = build_he(params, basis)?;
    let hm = build_hm(params, basis)?;
    let hb = build_hbeta(params, basis, HbetaVariant::Truncated)?;
    Ok(he.add(&hm).add(&hb))
}

/// `H_E + H_m + H_chi + H_f + H~_f` on a basis with ancillas.
pub fn build_microscopic_h(params: &ModelParams, basis: &SectorBasis) -> Result<SparseOperator> {
    let parts = [
        build_he(params, basis)?,
        build_hm(params, basis)?,
        build_hchi(params, basis)?,
        build_hf(params, basis)?,
        build_htilde_f(params, basis)?,
    ];
    Ok(SparseOperator::sum(basis.dim(), &parts))
}

/// Position of `G_{n,a}` in the list returned by [`build_gauss_generators`].
pub fn gauss_index(vertex: usize, a: usize) -> usize {
    3 * vertex + a
}

/// `G_{n,a} = L_{n,a} - R_{n-1,a} - Q_{n,a}` for every vertex and component,
/// ordered by [`gauss_index`]. Missing boundary links are dropped.
pub fn build_gauss_generators(basis: &SectorBasis) -> Result<Vec<SparseOperator>> {
    let reg = basis.registry();
    let mut out = Vec::with_capacity(3 * reg.num_vertices());
    for n in 0..reg.num_vertices() {
        let psi = psi_modes(reg, n)?;
        let right_link = if n < reg.num_links() { Some(LinkModes::of(reg, n)?) } else { None };
        let left_link = if n > 0 && n - 1 < reg.num_links() { Some(LinkModes::of(reg, n - 1)?) } else { None };
        for a in 0..3 {
            let mut terms = doublet_bilinear(psi, &pauli(a), C64::new(-0.5, 0.0));
            if let Some(lm) = &right_link {
                terms.extend(lm.left_generator(a));
            }
            if let Some(lm) = &left_link {
                terms.extend(lm.right_generator(a).into_iter().map(|t| Term::new(-t.coeff, t.word)));
            }
            out.push(SparseOperator::from_terms(basis, &terms).into_hermitian()?);
        }
    }
    Ok(out)
}

/// `sum_{n,a} G_{n,a}^2`.
pub fn gauss_violation(generators: &[SparseOperator], dim: usize) -> Result<SparseOperator> {
    let squares: Vec<SparseOperator> = generators.iter().map(|g| g.mul(g)).collect();
    SparseOperator::sum(dim, &squares).into_hermitian()
}

/// Diagonal of the unitary `prod_n i^(n psi_n^† psi_n)` in `basis`.
pub fn staggered_phases(basis: &SectorBasis) -> Result<Vec<C64>> {
    let reg = basis.registry();
    let psi: Vec<[ModeId; 2]> = (0..reg.num_vertices()).map(|n| psi_modes(reg, n)).collect::<Result<_>>()?;
    let powers = [ONE, I, -ONE, -I];
    Ok(basis
        .states()
        .map(|s| {
            let k: usize = psi.iter().enumerate().map(|(n, p)| n * (s[p[0]] + s[p[1]]) as usize).sum();
            powers[k % 4]
        })
        .collect())
}

/// Conjugate `op` by the staggered phase map `psi_n -> i^n psi_n`.
pub fn apply_staggered_phase(basis: &SectorBasis, op: &SparseOperator) -> Result<SparseOperator> {
    if op.dim() != basis.dim() {
        return Err(Error::DimensionMismatch { expected: basis.dim(), found: op.dim() });
    }
    let phases = staggered_phases(basis)?;
    let out = op.conjugate_diagonal(&phases);
    Ok(if op.is_hermitian() { out.into_hermitian()? } else { out })
}

/// Diagonal `sum_modes weight(species) * n_mode`.
pub fn weighted_number(basis: &SectorBasis, weight: impl Fn(Species) -> f64) -> SparseOperator {
    let w: Vec<f64> = basis.registry().modes().iter().map(|m| weight(m.species)).collect();
    diagonal_from(basis, |s| s.iter().zip(&w).map(|(&n, &wt)| n as f64 * wt).sum())
}

/// Conserved link charge `N_L - N_R + n(chi1) - n(chi2)`; on links without
/// ancillas this is `N_L - N_R`.
pub fn link_charge(basis: &SectorBasis, link: usize) -> Result<SparseOperator> {
    let reg = basis.registry();
    let lm = LinkModes::of(reg, link)?;
    let chi = chi_modes(reg, link).ok();
    Ok(diagonal_from(basis, |s| {
        let mut d = s[lm.a[0]] as f64 + s[lm.a[1]] as f64 - s[lm.b[0]] as f64 - s[lm.b[1]] as f64;
        if let Some(c) = chi {
            d += s[c[0]] as f64 - s[c[1]] as f64;
        }
        d
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{enumerate_sector, SectorSpec};
    use crate::linkops::levi_civita;
    use crate::sparse::ZERO;

    fn target_basis(sites: usize, cutoff: u8, psi: u32) -> SectorBasis {
        let reg = ChainLayout::target(sites, cutoff).registry().unwrap();
        enumerate_sector(&reg, &SectorSpec::balanced(&reg).with_psi_count(psi)).unwrap()
    }

    fn vacuum_index(basis: &SectorBasis) -> usize {
        let reg = basis.registry();
        let mut occ = vec![0u8; reg.len()];
        for n in (1..reg.num_vertices()).step_by(2) {
            for p in psi_modes(reg, n).unwrap() {
                occ[p] = 1;
            }
        }
        basis.index_of(&occ).unwrap()
    }

    fn params(g: f64, m: f64, beta: f64) -> ModelParams {
        ModelParams { g, m, beta: Some(beta), ..ModelParams::default() }
    }

    #[test]
    fn vacuum_mass_energy() {
        for sites in [2usize, 4] {
            let b = target_basis(sites, 1, 2 * (sites as u32 / 2));
            let hm = build_hm(&params(0.0, 1.0, 0.0), &b).unwrap();
            let v = vacuum_index(&b);
            assert_eq!(hm.get(v, v).re, -(sites as f64));
        }
    }

    #[test]
    fn single_half_flux_costs_three_eighths() {
        let b = target_basis(2, 1, 1);
        let reg = b.registry();
        let lm = LinkModes::of(reg, 0).unwrap();
        let p = params(1.0, 0.0, 0.0);
        let h = build_target_h(&p, &b).unwrap();
        let mut occ = vec![0u8; reg.len()];
        occ[psi_modes(reg, 0).unwrap()[0]] = 1;
        occ[lm.a[0]] = 1;
        occ[lm.b[0]] = 1;
        let i = b.index_of(&occ).unwrap();
        assert!((h.get(i, i).re - 0.375).abs() < 1e-15);
    }

    #[test]
    fn zero_couplings_give_zero_matrix() {
        let b = target_basis(2, 2, 2);
        let h = build_target_h(&params(0.0, 0.0, 0.0), &b).unwrap();
        assert_eq!(h.max_abs(), 0.0);
    }

    #[test]
    fn electric_energy_matches_casimir_sum() {
        let b = target_basis(3, 2, 3);
        let p = params(1.3, 0.0, 0.0);
        let he = build_he(&p, &b).unwrap();
        let reg = b.registry();
        let mut cas = SparseOperator::zeros(b.dim());
        for l in 0..reg.num_links() {
            let lm = LinkModes::of(reg, l).unwrap();
            for a in 0..3 {
                let g = SparseOperator::from_terms(&b, &lm.left_generator(a));
                cas = cas.add(&g.mul(&g));
            }
        }
        let diff = he.sub(&cas.scale_real(p.g * p.g / 2.0));
        assert!(diff.max_abs() < 1e-12);
        let mut occ = vec![0u8; reg.len()];
        let lm = LinkModes::of(reg, 0).unwrap();
        occ[lm.a[1]] = 1;
        occ[lm.b[0]] = 1;
        occ[psi_modes(reg, 0).unwrap()[0]] = 1;
        occ[psi_modes(reg, 1).unwrap()[0]] = 1;
        occ[psi_modes(reg, 2).unwrap()[1]] = 1;
        let i = b.index_of(&occ).unwrap();
        let two = ModelParams { g: 2f64.sqrt(), ..p };
        assert!((build_he(&two, &b).unwrap().get(i, i).re - 0.75).abs() < 1e-14);
    }

    #[test]
    fn gauss_generators_commute_with_target_h() {
        let b = target_basis(3, 2, 3);
        let p = params(0.7, 0.4, 0.3);
        let h = build_target_h(&p, &b).unwrap();
        let full = build_he(&p, &b).unwrap().add(&build_hm(&p, &b).unwrap()).add(&build_hbeta(&p, &b, HbetaVariant::Full).unwrap());
        let gs = build_gauss_generators(&b).unwrap();
        for g in &gs {
            assert!(SparseOperator::commutator_max_norm(g, &h) < 1e-12);
            assert!(SparseOperator::commutator_max_norm(g, &full) < 1e-12);
        }
        for n in 0..3 {
            for a in 0..3 {
                for bb in 0..3 {
                    let mut r = SparseOperator::commutator(&gs[gauss_index(n, a)], &gs[gauss_index(n, bb)]);
                    for cc in 0..3 {
                        let e = levi_civita(a, bb, cc);
                        if e != 0.0 {
                            r = r.add(&gs[gauss_index(n, cc)].scale(I * e));
                        }
                    }
                    assert!(r.max_abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn gauss_generators_annihilate_vacuum() {
        let b = target_basis(4, 1, 4);
        let v = vacuum_index(&b);
        let mut e = vec![ZERO; b.dim()];
        e[v] = ONE;
        for g in build_gauss_generators(&b).unwrap() {
            assert!(crate::sparse::norm(&g.apply(&e)) < 1e-15);
        }
    }

    #[test]
    fn full_hopping_matches_truncated_on_vacuum_after_phase() {
        let b = target_basis(4, 2, 4);
        let p = params(0.0, 0.0, -0.37);
        let full = apply_staggered_phase(&b, &build_hbeta(&p, &b, HbetaVariant::Full).unwrap()).unwrap();
        let trunc = build_hbeta(&p, &b, HbetaVariant::Truncated).unwrap();
        let mut e = vec![ZERO; b.dim()];
        e[vacuum_index(&b)] = ONE;
        let (x, y) = (full.apply(&e), trunc.apply(&e));
        assert!(crate::sparse::norm(&x) > 0.1);
        let d: f64 = x.iter().zip(&y).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(d < 1e-14);
    }

    #[test]
    fn staggered_phase_leaves_diagonals_and_cycles() {
        let b = target_basis(3, 1, 3);
        let p = params(1.0, 0.8, 0.2);
        let hm = build_hm(&p, &b).unwrap();
        assert_eq!(apply_staggered_phase(&b, &hm).unwrap().max_abs_diff(&hm), 0.0);
        let h = build_hbeta(&p, &b, HbetaVariant::Full).unwrap();
        let mut x = h.clone();
        for _ in 0..4 {
            x = apply_staggered_phase(&b, &x).unwrap();
        }
        assert!(x.max_abs_diff(&h) < 1e-15);
    }

    #[test]
    fn builders_conserve_link_charge() {
        let reg = ChainLayout::microscopic(3, 2).registry().unwrap();
        let b = enumerate_sector(&reg, &SectorSpec::new().with_fermion_count(3).with_max_link_bosons(2)).unwrap();
        let p = ModelParams { sites: 3, cutoff: 2, g: 1.0, m: 0.3, epsilon: 0.5, lambda: 20.0, gamma: 0.2, ..ModelParams::default() };
        let h = build_microscopic_h(&p, &b).unwrap();
        assert!(h.is_hermitian());
        for l in 0..2 {
            let d = link_charge(&b, l).unwrap();
            assert!(SparseOperator::commutator_max_norm(&d, &h) < 1e-12);
        }
    }

    #[test]
    fn tunneling_amplitude_from_vertex_to_ancilla() {
        let reg = ChainLayout::microscopic(2, 1).registry().unwrap();
        let b = enumerate_sector(&reg, &SectorSpec::balanced(&reg).with_fermion_count(1)).unwrap();
        let p = ModelParams { epsilon: 0.9, lambda: 10.0, ..ModelParams::default() };
        let h = build_hf(&p, &b).unwrap();
        let lm = LinkModes::of(&reg, 0).unwrap();
        let mut from = vec![0u8; reg.len()];
        from[psi_modes(&reg, 0).unwrap()[0]] = 1;
        let mut to = vec![0u8; reg.len()];
        to[chi_modes(&reg, 0).unwrap()[1]] = 1;
        to[lm.a[1]] = 1;
        let (i, j) = (b.index_of(&to).unwrap(), b.index_of(&from).unwrap());
        assert!((h.get(i, j).norm() - 0.9 / 2f64.powf(0.25)).abs() < 1e-15);
        let zero = build_hf(&ModelParams { epsilon: 0.0, ..p }, &b).unwrap();
        assert_eq!(zero.max_abs(), 0.0);
    }

    #[test]
    fn density_flux_counts_adjacent_links() {
        let b = target_basis(3, 1, 1);
        let reg = b.registry();
        let mut occ = vec![0u8; reg.len()];
        occ[psi_modes(reg, 1).unwrap()[0]] = 1;
        for l in 0..2 {
            let lm = LinkModes::of(reg, l).unwrap();
            occ[lm.a[0]] = 1;
            occ[lm.b[1]] = 1;
        }
        let i = b.index_of(&occ).unwrap();
        let p = ModelParams { gamma: 0.25, ..ModelParams::default() };
        assert!((build_htilde_f(&p, &b).unwrap().get(i, i).re - 0.5).abs() < 1e-15);
    }

    #[test]
    fn truncated_hopping_has_no_diagonal() {
        let b = target_basis(2, 1, 2);
        let h = build_hbeta(&params(0.0, 0.0, 0.4), &b, HbetaVariant::Truncated).unwrap();
        assert!(h.diagonal_entries().iter().all(|v| *v == ZERO));
        assert!(h.hermitian_defect() < 1e-15);
    }

    #[test]
    fn params_validation() {
        assert!(ModelParams::default().validate().is_ok());
        assert!(ModelParams { sites: 1, ..ModelParams::default() }.validate().is_err());
        assert!(ModelParams { alpha: 0.0, ..ModelParams::default() }.validate().is_err());
        let p = ModelParams { epsilon: 1.0, lambda: 10.0, beta: Some(0.1), ..ModelParams::default() };
        assert!(p.validate().is_err());
        let q = ModelParams { beta: Some(-0.1), ..p };
        assert!(q.validate().is_ok());
        assert_eq!(ModelParams { epsilon: 1.0, lambda: 10.0, ..ModelParams::default() }.beta(), -0.1);
    }

    #[test]
    fn missing_modes_are_reported() {
        let reg = ChainLayout::target(2, 1).registry().unwrap();
        let b = enumerate_sector(&reg, &SectorSpec::balanced(&reg)).unwrap();
        assert!(build_hchi(&ModelParams::default(), &b).is_err());
        assert!(build_hf(&ModelParams::default(), &b).is_err());
    }
}
