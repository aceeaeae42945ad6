//! Schwinger-boson link operators.
//!
//! A link carries two doublets of bosons, `a = (a1, a2)` at its left end and
//! `b = (b1, b2)` at its right end. With `N_L = a^† a`, `N_R = b^† b`:
//!
//! ```text
//! U_L = (N_L + 1)^(-1/2) [[a1^†, -a2], [a2^†, a1]]
//! U_R = [[b1^†, b2^†], [-b2, b1]] (N_R + 1)^(-1/2)
//! U   = U_L U_R
//! W_L = sqrt(N_L + 1) U_L,   W_R = U_R sqrt(N_R + 1)
//! L_a = 1/2 a_k^† (sigma_a)_lk a_l,   R_a = 1/2 b_k^† (sigma_a)_kl b_l
//! ```
//!
//! [`LinkModes`] produces these entries as operator words usable on any
//! registry; [`LinkOperatorSet`] assembles them on a single link and checks the
//! algebra.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::fock::{
    enumerate_sector, Ladder, Letter, Location, ModeId, ModeRegistry, SectorBasis, SectorSpec,
    Species,
};
use crate::sparse::{SparseOperator, Term, C64, I, ONE, ZERO};

/// Pauli matrix `sigma_{x,y,z}` for `a = 0, 1, 2`.
pub fn pauli(a: usize) -> [[C64; 2]; 2] {
    match a {
        0 => [[ZERO, ONE], [ONE, ZERO]],
        1 => [[ZERO, -I], [I, ZERO]],
        2 => [[ONE, ZERO], [ZERO, -ONE]],
        _ => panic!("pauli index {} out of range", a),
    }
}

/// Levi-Civita symbol on `{0, 1, 2}`.
pub fn levi_civita(a: usize, b: usize, c: usize) -> f64 {
    match (a, b, c) {
        (0, 1, 2) | (1, 2, 0) | (2, 0, 1) => 1.0,
        (0, 2, 1) | (2, 1, 0) | (1, 0, 2) => -1.0,
        _ => 0.0,
    }
}

/// Bilinear `sum_kl coeff * m_kl c_k^† c_l` over a doublet of modes.
pub fn doublet_bilinear(modes: [ModeId; 2], m: &[[C64; 2]; 2], coeff: C64) -> Vec<Term> {
    let mut terms = Vec::new();
    for k in 0..2 {
        for l in 0..2 {
            if m[k][l] != ZERO {
                terms.push(Term::new(
                    coeff * m[k][l],
                    vec![Letter::Ladder(modes[k], Ladder::Raise), Letter::Ladder(modes[l], Ladder::Lower)],
                ));
            }
        }
    }
    terms
}

fn transpose(m: [[C64; 2]; 2]) -> [[C64; 2]; 2] {
    [[m[0][0], m[1][0]], [m[0][1], m[1][1]]]
}

/// Mode ids of the Schwinger bosons of one link.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LinkModes {
    pub a: [ModeId; 2],
    pub b: [ModeId; 2],
}

/// A signed operator word.
pub type SignedWord = (f64, Vec<Letter>);

impl LinkModes {
    pub fn of(registry: &ModeRegistry, link: usize) -> Result<Self> {
        let loc = Location::Link(link);
        Ok(Self {
            a: [registry.require(Species::A1, loc)?, registry.require(Species::A2, loc)?],
            b: [registry.require(Species::B1, loc)?, registry.require(Species::B2, loc)?],
        })
    }

    fn left_norm(&self, inverse: bool) -> Letter {
        Letter::PairSqrt { modes: self.a, inverse }
    }

    fn right_norm(&self, inverse: bool) -> Letter {
        Letter::PairSqrt { modes: self.b, inverse }
    }

    /// Entry `(i, j)` of `W_L`.
    pub fn w_left(&self, i: usize, j: usize) -> (f64, Letter) {
        let [a1, a2] = self.a;
        match (i, j) {
            (0, 0) => (1.0, Letter::Ladder(a1, Ladder::Raise)),
            (0, 1) => (-1.0, Letter::Ladder(a2, Ladder::Lower)),
            (1, 0) => (1.0, Letter::Ladder(a2, Ladder::Raise)),
            (1, 1) => (1.0, Letter::Ladder(a1, Ladder::Lower)),
            _ => panic!("W_L index out of range"),
        }
    }

    /// Entry `(i, j)` of `W_R`.
    pub fn w_right(&self, i: usize, j: usize) -> (f64, Letter) {
        let [b1, b2] = self.b;
        match (i, j) {
            (0, 0) => (1.0, Letter::Ladder(b1, Ladder::Raise)),
            (0, 1) => (1.0, Letter::Ladder(b2, Ladder::Raise)),
            (1, 0) => (-1.0, Letter::Ladder(b2, Ladder::Lower)),
            (1, 1) => (1.0, Letter::Ladder(b1, Ladder::Lower)),
            _ => panic!("W_R index out of range"),
        }
    }

    pub fn u_left(&self, i: usize, j: usize) -> SignedWord {
        let (s, w) = self.w_left(i, j);
        (s, vec![self.left_norm(true), w])
    }

    pub fn u_right(&self, i: usize, j: usize) -> SignedWord {
        let (s, w) = self.w_right(i, j);
        (s, vec![w, self.right_norm(true)])
    }

    /// Entry `(i, k)` of `U = U_L U_R` as a sum of two words.
    pub fn u(&self, i: usize, k: usize) -> Vec<SignedWord> {
        (0..2)
            .map(|j| {
                let (s1, mut w) = self.u_left(i, j);
                let (s2, w2) = self.u_right(j, k);
                w.extend(w2);
                (s1 * s2, w)
            })
            .collect()
    }

    /// Entry `(i, k)` of `W_L W_R`.
    pub fn ww(&self, i: usize, k: usize) -> Vec<SignedWord> {
        (0..2)
            .map(|j| {
                let (s1, l1) = self.w_left(i, j);
                let (s2, l2) = self.w_right(j, k);
                (s1 * s2, vec![l1, l2])
            })
            .collect()
    }

    /// `L_a` as terms.
    pub fn left_generator(&self, a: usize) -> Vec<Term> {
        doublet_bilinear(self.a, &transpose(pauli(a)), C64::new(0.5, 0.0))
    }

    /// `R_a` as terms.
    pub fn right_generator(&self, a: usize) -> Vec<Term> {
        doublet_bilinear(self.b, &pauli(a), C64::new(0.5, 0.0))
    }
}

/// Turn signed words into terms with a common prefactor.
pub fn terms_from_words(coeff: C64, words: impl IntoIterator<Item = SignedWord>) -> Vec<Term> {
    words.into_iter().map(|(s, w)| Term::new(coeff * s, w)).collect()
}

type Mat2 = [[SparseOperator; 2]; 2];

/// All link operators of one link, assembled on the full single-link Fock
/// space (both ends capped at the cutoff, no balance constraint). The
/// balanced sector `N_L = N_R` is kept as an index list.
#[derive(Clone, Debug)]
pub struct LinkOperatorSet {
    pub cutoff: u8,
    pub basis: SectorBasis,
    /// Positions of the `N_L = N_R` states in `basis`.
    pub balanced: Vec<usize>,
    pub n_left: SparseOperator,
    pub n_right: SparseOperator,
    pub left: [SparseOperator; 3],
    pub right: [SparseOperator; 3],
    pub left_casimir: SparseOperator,
    pub right_casimir: SparseOperator,
    pub u_left: Mat2,
    pub u_right: Mat2,
    pub u: Mat2,
    pub w_left: Mat2,
    pub w_right: Mat2,
    sqrt_left: SparseOperator,
    sqrt_right: SparseOperator,
}

fn mat2(f: impl Fn(usize, usize) -> SparseOperator) -> Mat2 {
    [[f(0, 0), f(0, 1)], [f(1, 0), f(1, 1)]]
}

impl LinkOperatorSet {
    pub fn new(cutoff: u8) -> Result<Self> {
        let registry = ModeRegistry::single_link(cutoff)?;
        let basis = enumerate_sector(&registry, &SectorSpec::new())?;
        let modes = LinkModes::of(&registry, 0)?;
        let dim = basis.dim();
        let op = |terms: Vec<Term>| SparseOperator::from_terms(&basis, &terms);

        let nl: Vec<f64> = (0..dim).map(|i| basis.count(i, &modes.a) as f64).collect();
        let nr: Vec<f64> = (0..dim).map(|i| basis.count(i, &modes.b) as f64).collect();
        let balanced = (0..dim).filter(|&i| nl[i] == nr[i]).collect();

        let left = [0, 1, 2].map(|a| op(modes.left_generator(a)));
        let right = [0, 1, 2].map(|a| op(modes.right_generator(a)));
        let casimir = |g: &[SparseOperator; 3]| {
            SparseOperator::sum(dim, &[g[0].mul(&g[0]), g[1].mul(&g[1]), g[2].mul(&g[2])])
        };
        let left_casimir = casimir(&left);
        let right_casimir = casimir(&right);

        let single = |(s, w): SignedWord| op(vec![Term::new(C64::new(s, 0.0), w)]);
        let u_left = mat2(|i, j| single(modes.u_left(i, j)));
        let u_right = mat2(|i, j| single(modes.u_right(i, j)));
        let u = mat2(|i, k| op(terms_from_words(ONE, modes.u(i, k))));
        let w_left = mat2(|i, j| {
            let (s, l) = modes.w_left(i, j);
            single((s, vec![l]))
        });
        let w_right = mat2(|i, j| {
            let (s, l) = modes.w_right(i, j);
            single((s, vec![l]))
        });
        let sqrt_left = SparseOperator::real_diagonal(&nl.iter().map(|n| libm::sqrt(n + 1.0)).collect::<Vec<_>>());
        let sqrt_right = SparseOperator::real_diagonal(&nr.iter().map(|n| libm::sqrt(n + 1.0)).collect::<Vec<_>>());

        Ok(Self {
            cutoff,
            balanced,
            n_left: SparseOperator::real_diagonal(&nl),
            n_right: SparseOperator::real_diagonal(&nr),
            left,
            right,
            left_casimir,
            right_casimir,
            u_left,
            u_right,
            u,
            w_left,
            w_right,
            sqrt_left,
            sqrt_right,
            basis,
        })
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    /// Balanced states with `N_L <= cutoff - 1`: the block on which products
    /// that raise the flux by one stay inside the cutoff.
    pub fn interior(&self) -> Vec<usize> {
        let lim = self.cutoff.saturating_sub(1) as f64;
        self.balanced
            .iter()
            .copied()
            .filter(|&i| self.n_left.get(i, i).re <= lim)
            .collect()
    }

    /// Largest entry of `op` restricted to the given block.
    fn block_norm(op: &SparseOperator, states: &[usize]) -> f64 {
        op.block(states, states).iter().fold(0.0, |m, &(_, _, v)| m.max(v.norm()))
    }

    /// Residuals of every algebraic identity of the link operators.
    pub fn algebra_report(&self) -> AlgebraReport {
        let dim = self.dim();
        let sector = &self.balanced;
        let interior = self.interior();
        let half = C64::new(0.5, 0.0);

        let mut left_algebra: f64 = 0.0;
        let mut right_algebra: f64 = 0.0;
        let mut left_right_commute: f64 = 0.0;
        for a in 0..3 {
            for b in 0..3 {
                let mut lhs_l = SparseOperator::commutator(&self.left[a], &self.left[b]);
                let mut lhs_r = SparseOperator::commutator(&self.right[a], &self.right[b]);
                for c in 0..3 {
                    let e = levi_civita(a, b, c);
                    if e != 0.0 {
                        lhs_l = lhs_l.add(&self.left[c].scale(I * e));
                        lhs_r = lhs_r.sub(&self.right[c].scale(I * e));
                    }
                }
                left_algebra = left_algebra.max(Self::block_norm(&lhs_l, sector));
                right_algebra = right_algebra.max(Self::block_norm(&lhs_r, sector));
                let lr = SparseOperator::commutator(&self.left[a], &self.right[b]);
                left_right_commute = left_right_commute.max(Self::block_norm(&lr, sector));
            }
        }

        let mut left_transform: f64 = 0.0;
        let mut right_transform: f64 = 0.0;
        for a in 0..3 {
            let s = pauli(a);
            for i in 0..2 {
                for k in 0..2 {
                    let mut l = SparseOperator::commutator(&self.left[a], &self.u[i][k]);
                    let mut r = SparseOperator::commutator(&self.right[a], &self.u[i][k]);
                    for j in 0..2 {
                        l = l.sub(&self.u[j][k].scale(half * s[i][j]));
                        r = r.sub(&self.u[i][j].scale(half * s[j][k]));
                    }
                    left_transform = left_transform.max(Self::block_norm(&l, &interior));
                    right_transform = right_transform.max(Self::block_norm(&r, &interior));
                }
            }
        }

        let id = SparseOperator::identity(dim);
        let mut unitarity: f64 = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                let mut udu = SparseOperator::zeros(dim);
                let mut uud = SparseOperator::zeros(dim);
                for k in 0..2 {
                    udu = udu.add(&self.u[k][i].adjoint().mul(&self.u[k][j]));
                    uud = uud.add(&self.u[i][k].mul(&self.u[j][k].adjoint()));
                }
                if i == j {
                    udu = udu.sub(&id);
                    uud = uud.sub(&id);
                }
                unitarity = unitarity
                    .max(Self::block_norm(&udu, &interior))
                    .max(Self::block_norm(&uud, &interior));
            }
        }

        let mut w_factorization: f64 = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                let l = self.w_left[i][j].sub(&self.sqrt_left.mul(&self.u_left[i][j]));
                let r = self.w_right[i][j].sub(&self.u_right[i][j].mul(&self.sqrt_right));
                w_factorization = w_factorization.max(l.max_abs()).max(r.max_abs());
            }
        }

        let casimir = Self::block_norm(&self.left_casimir.sub(&self.right_casimir), sector);
        let spin: Vec<f64> = (0..dim)
            .map(|i| {
                let j = self.n_left.get(i, i).re / 2.0;
                j * (j + 1.0)
            })
            .collect();
        let casimir_value =
            Self::block_norm(&self.left_casimir.sub(&SparseOperator::real_diagonal(&spin)), sector);

        let max_residual = [
            left_algebra,
            right_algebra,
            left_right_commute,
            left_transform,
            right_transform,
            unitarity,
            w_factorization,
            casimir,
            casimir_value,
        ]
        .iter()
        .fold(0.0f64, |m, &v| m.max(v));

        AlgebraReport {
            cutoff: self.cutoff,
            sector_dim: sector.len(),
            interior_dim: interior.len(),
            left_algebra,
            right_algebra,
            left_right_commute,
            left_transform,
            right_transform,
            unitarity,
            w_factorization,
            casimir,
            casimir_value,
            max_residual,
            boundary_note: format!(
                "generator algebra and Casimirs on all {} balanced states; U transformation \
                 and unitarity on the {} states with N_L <= {}",
                sector.len(),
                interior.len(),
                self.cutoff.saturating_sub(1)
            ),
        }
    }
}

/// Max-entry residuals of the link algebra. Products that raise the flux
/// are only checked where the raised state is still representable.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlgebraReport {
    pub cutoff: u8,
    pub sector_dim: usize,
    pub interior_dim: usize,
    /// `[L_a, L_b] + i eps_abc L_c`
    pub left_algebra: f64,
    /// `[R_a, R_b] - i eps_abc R_c`
    pub right_algebra: f64,
    /// `[L_a, R_b]`
    pub left_right_commute: f64,
    /// `[L_a, U] - 1/2 sigma_a U`
    pub left_transform: f64,
    /// `[R_a, U] - U 1/2 sigma_a`
    pub right_transform: f64,
    /// `U^† U - 1` and `U U^† - 1`
    pub unitarity: f64,
    /// `W_L - sqrt(N_L+1) U_L` and `W_R - U_R sqrt(N_R+1)`
    pub w_factorization: f64,
    /// `L^2 - R^2`
    pub casimir: f64,
    /// `L^2 - N_L/2 (N_L/2 + 1)`
    pub casimir_value: f64,
    pub max_residual: f64,
    pub boundary_note: String,
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::collections::BTreeMap;

    #[test]
    fn algebra_holds_for_small_cutoffs() {
        for c in 1..=4 {
            let r = LinkOperatorSet::new(c).unwrap().algebra_report();
            assert!(r.max_residual < 1e-12, "cutoff {}: {:?}", c, r);
        }
    }

    #[test]
    fn balanced_sector_has_square_multiplets() {
        for c in 1..=4u8 {
            let set = LinkOperatorSet::new(c).unwrap();
            let mut counts: BTreeMap<u64, usize> = BTreeMap::new();
            for &i in &set.balanced {
                let n = set.n_left.get(i, i).re as u64;
                *counts.entry(n).or_default() += 1;
            }
            for (n, k) in counts {
                let two_j_plus_one = n as usize + 1;
                assert_eq!(k, two_j_plus_one * two_j_plus_one);
            }
        }
    }

    #[test]
    fn generators_are_hermitian() {
        let set = LinkOperatorSet::new(2).unwrap();
        for g in set.left.iter().chain(set.right.iter()) {
            assert_eq!(g.hermitian_defect(), 0.0);
        }
    }

    #[test]
    fn u_is_zero_on_saturated_flux_raise() {
        // U_00 raises both ends; from N = cutoff it must vanish.
        let set = LinkOperatorSet::new(1).unwrap();
        for &i in &set.balanced {
            if set.n_left.get(i, i).re == 1.0 {
                let mut e = vec![ZERO; set.dim()];
                e[i] = ONE;
                let out = set.w_left[0][0].mul(&set.w_right[0][0]).apply(&e);
                assert!(out.iter().all(|v| *v == ZERO));
            }
        }
    }

    #[test]
    fn pauli_algebra() {
        // sigma_a sigma_b = delta + i eps sigma_c
        for a in 0..3 {
            for b in 0..3 {
                let (sa, sb) = (pauli(a), pauli(b));
                for r in 0..2 {
                    for s in 0..2 {
                        let prod = sa[r][0] * sb[0][s] + sa[r][1] * sb[1][s];
                        let mut want = if a == b && r == s { ONE } else { ZERO };
                        for c in 0..3 {
                            want += I * levi_civita(a, b, c) * pauli(c)[r][s];
                        }
                        assert!((prod - want).norm() < 1e-15);
                    }
                }
            }
        }
    }
}
