//! Lanczos ground states, Krylov propagation and subspace projectors.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{eigh, eigh_tridiagonal, Eigen};
use crate::sparse::{axpy, inner, norm, SparseOperator, C64, ONE, ZERO};

/// Complex amplitudes in the basis of some sector.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    pub amplitudes: Vec<C64>,
}

impl StateVector {
    pub fn new(amplitudes: Vec<C64>) -> Self {
        Self { amplitudes }
    }

    pub fn zeros(dim: usize) -> Self {
        Self { amplitudes: vec![ZERO; dim] }
    }

    /// The `i`-th basis vector.
    pub fn basis(dim: usize, i: usize) -> Self {
        let mut s = Self::zeros(dim);
        s.amplitudes[i] = ONE;
        s
    }

    /// Normalized vector with seeded uniform random entries.
    pub fn random(dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let amps = (0..dim)
            .map(|_| C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
            .collect();
        Self::new(amps).normalized()
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn norm(&self) -> f64 {
        norm(&self.amplitudes)
    }

    pub fn normalized(mut self) -> Self {
        let n = self.norm();
        if n > 0.0 {
            for a in self.amplitudes.iter_mut() {
                *a /= n;
            }
        }
        self
    }

    /// `<self, other>`.
    pub fn inner(&self, other: &Self) -> C64 {
        inner(&self.amplitudes, &other.amplitudes)
    }

    /// `|<self, other>|^2`.
    pub fn fidelity(&self, other: &Self) -> f64 {
        self.inner(other).norm_sqr()
    }

    pub fn is_finite(&self) -> bool {
        self.amplitudes.iter().all(|a| a.re.is_finite() && a.im.is_finite())
    }
}

/// Orthonormal columns spanning a subspace.
#[derive(Clone, Debug, PartialEq)]
pub struct Projector {
    dim: usize,
    columns: Vec<Vec<C64>>,
}

impl Projector {
    /// Wrap columns that are already orthonormal.
    pub fn from_orthonormal(dim: usize, columns: Vec<Vec<C64>>) -> Self {
        Self { dim, columns }
    }

    /// Span of the given basis states.
    pub fn from_basis_states(dim: usize, states: &[usize]) -> Self {
        let columns = states.iter().map(|&i| StateVector::basis(dim, i).amplitudes).collect();
        Self { dim, columns }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rank(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[Vec<C64>] {
        &self.columns
    }

    /// Coordinates `V^† x`.
    pub fn coordinates(&self, x: &[C64]) -> Vec<C64> {
        self.columns.iter().map(|c| inner(c, x)).collect()
    }

    /// `V c` for coordinates `c`.
    pub fn lift(&self, coords: &[C64]) -> Vec<C64> {
        let mut out = vec![ZERO; self.dim];
        for (c, &a) in self.columns.iter().zip(coords) {
            axpy(a, c, &mut out);
        }
        out
    }

    /// `P x`.
    pub fn project(&self, x: &[C64]) -> Vec<C64> {
        self.lift(&self.coordinates(x))
    }

    /// `||x - P x||`.
    pub fn leakage(&self, x: &[C64]) -> f64 {
        let p = self.project(x);
        libm::sqrt(x.iter().zip(&p).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>())
    }

    /// `max |V^† V - 1|`.
    pub fn orthonormality_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (i, a) in self.columns.iter().enumerate() {
            for (j, b) in self.columns.iter().enumerate() {
                let want = if i == j { ONE } else { ZERO };
                worst = worst.max((inner(a, b) - want).norm());
            }
        }
        worst
    }

    /// `max_i ||(1 - P) H v_i||`, zero when the subspace is invariant.
    pub fn invariance_defect(&self, h: &SparseOperator) -> f64 {
        self.columns.iter().map(|c| self.leakage(&h.apply(c))).fold(0.0, f64::max)
    }

    /// `V^† H V`.
    pub fn compress(&self, h: &SparseOperator) -> DMatrix<C64> {
        h.compress(&self.columns)
    }

    /// Sorted spectrum of `V^† H V`.
    pub fn spectrum(&self, h: &SparseOperator) -> Eigen {
        eigh(&self.compress(h))
    }
}

/// Iteration caps and seeds. All limits are hard.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    /// Lanczos basis size per restart.
    pub krylov_dim: usize,
    /// Restarts allowed per eigenpair.
    pub max_restarts: usize,
    /// Seed of the start-vector generator.
    pub seed: u64,
    /// Krylov basis size for propagation.
    pub evolve_krylov_dim: usize,
    /// Local error allowed per propagation substep.
    pub step_tolerance: f64,
    /// Step halvings allowed per requested step.
    pub max_halvings: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            krylov_dim: 80,
            max_restarts: 400,
            seed: 0x5eed_2013,
            evolve_krylov_dim: 30,
            step_tolerance: 1e-12,
            max_halvings: 40,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Eigenpair {
    pub value: f64,
    pub vector: StateVector,
    /// `||H v - E v||`.
    pub residual: f64,
}

fn row_sum_bound(h: &SparseOperator) -> f64 {
    (0..h.dim())
        .map(|i| h.row(i).map(|(_, v)| v.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn orthogonalize(w: &mut [C64], against: &[Vec<C64>]) {
    for _ in 0..2 {
        for v in against {
            let c = inner(v, w);
            axpy(-c, v, w);
        }
    }
}

fn scale_in_place(v: &mut [C64], s: f64) {
    for a in v.iter_mut() {
        *a *= s;
    }
}

/// Lanczos tridiagonalization from `start` with full reorthogonalization.
/// Returns the basis and the tridiagonal coefficients.
fn lanczos(
    h: &SparseOperator,
    start: &[C64],
    locked: &[Vec<C64>],
    m: usize,
    breakdown: f64,
) -> (Vec<Vec<C64>>, Vec<f64>, Vec<f64>) {
    let mut basis: Vec<Vec<C64>> = Vec::with_capacity(m);
    let mut alphas = Vec::with_capacity(m);
    let mut betas = Vec::with_capacity(m);
    let mut v = start.to_vec();
    orthogonalize(&mut v, locked);
    let n0 = norm(&v);
    if n0 == 0.0 {
        return (basis, alphas, betas);
    }
    scale_in_place(&mut v, 1.0 / n0);
    let mut w = vec![ZERO; h.dim()];
    loop {
        h.apply_into(&v, &mut w);
        let alpha = inner(&v, &w).re;
        basis.push(v);
        alphas.push(alpha);
        let before = norm(&w);
        for _ in 0..2 {
            for u in locked.iter().chain(basis.iter()) {
                let c = inner(u, &w);
                axpy(-c, u, &mut w);
            }
        }
        let beta = norm(&w);
        if basis.len() == m || beta <= breakdown.max(1e-10 * before) {
            betas.push(beta);
            break;
        }
        betas.push(beta);
        v = w.iter().map(|x| x / beta).collect();
    }
    (basis, alphas, betas)
}

/// The `k` lowest eigenpairs of a Hermitian operator, by restarted Lanczos
/// with locking. Converged pairs satisfy `||Hv - Ev|| <= 1e-9 max(1, |E|)`.
pub fn ground_state(h: &SparseOperator, k: usize, cfg: &SolverConfig) -> Result<Vec<Eigenpair>> {
    if !h.is_hermitian() {
        return Err(Error::NotHermitian);
    }
    let dim = h.dim();
    if k > dim {
        return Err(Error::InvalidInput(format!("requested {} eigenpairs of a {}-dimensional operator", k, dim)));
    }
    let scale = row_sum_bound(h).max(1.0);
    let breakdown = 1e-13 * scale;
    let mut locked: Vec<Vec<C64>> = Vec::with_capacity(k);
    let mut pairs = Vec::with_capacity(k);
    let mut hx = vec![ZERO; dim];
    for index in 0..k {
        let mut start = StateVector::random(dim, cfg.seed.wrapping_add(index as u64)).amplitudes;
        let mut last_residual = f64::INFINITY;
        let mut done = None;
        for _ in 0..=cfg.max_restarts {
            let m = cfg.krylov_dim.max(2).min(dim - locked.len());
            let (basis, _, _) = lanczos(h, &start, &locked, m, breakdown);
            if basis.is_empty() {
                // Start vector lay inside the locked span; draw a fresh one.
                start = StateVector::random(dim, cfg.seed.wrapping_add(1000 + index as u64)).amplitudes;
                continue;
            }
            // Rayleigh-Ritz on the span: immune to round-off in the recurrence
            // coefficients near breakdown.
            let hv: Vec<Vec<C64>> = basis.iter().map(|v| h.apply(v)).collect();
            let n = basis.len();
            let projected = DMatrix::from_fn(n, n, |i, j| inner(&basis[i], &hv[j]));
            let ritz = eigh(&projected);
            let mut x = vec![ZERO; dim];
            for (j, v) in basis.iter().enumerate() {
                axpy(ritz.vectors[(j, 0)], v, &mut x);
            }
            orthogonalize(&mut x, &locked);
            let nx = norm(&x);
            scale_in_place(&mut x, 1.0 / nx);
            h.apply_into(&x, &mut hx);
            let theta = inner(&x, &hx).re;
            let residual = libm::sqrt(hx.iter().zip(&x).map(|(a, b)| (a - b * theta).norm_sqr()).sum::<f64>());
            last_residual = residual;
            if residual <= 1e-9 * theta.abs().max(1.0) {
                done = Some((theta, x, residual));
                break;
            }
            start = x;
        }
        let Some((value, x, residual)) = done else {
            return Err(Error::NotConverged { iterations: cfg.max_restarts, residual: last_residual });
        };
        locked.push(x.clone());
        pairs.push(Eigenpair { value, vector: StateVector::new(x), residual });
    }
    // Locking finds pairs in ascending order up to round-off; sort anyway.
    pairs.sort_by(|a, b| a.value.total_cmp(&b.value));
    Ok(pairs)
}

/// One Krylov step `exp(-i H tau) psi`. Returns the new state and the a
/// posteriori error estimate.
fn krylov_step(h: &SparseOperator, psi: &[C64], tau: f64, m: usize, breakdown: f64) -> (Vec<C64>, f64) {
    let s = norm(psi);
    if s == 0.0 {
        return (psi.to_vec(), 0.0);
    }
    let (basis, alphas, betas) = lanczos(h, psi, &[], m.min(h.dim()), breakdown);
    let n = basis.len();
    let (vals, vecs) = eigh_tridiagonal(&alphas, &betas[..n - 1]);
    let mut c = vec![ZERO; n];
    for k in 0..n {
        let phase = C64::new(0.0, -vals[k] * tau).exp() * vecs[(0, k)];
        for (j, cj) in c.iter_mut().enumerate() {
            *cj += phase * vecs[(j, k)];
        }
    }
    let tail = betas[n - 1];
    let err = tail * c[n - 1].norm() * s;
    let mut out = vec![ZERO; h.dim()];
    for (j, v) in basis.iter().enumerate() {
        axpy(c[j] * s, v, &mut out);
    }
    (out, err)
}

/// `exp(-i H t) psi0`, split into `steps` equal steps, each subdivided by
/// halving until the local Krylov error estimate meets the tolerance.
pub fn evolve(
    h: &SparseOperator,
    psi0: &StateVector,
    t: f64,
    steps: usize,
    cfg: &SolverConfig,
) -> Result<StateVector> {
    if !h.is_hermitian() {
        return Err(Error::NotHermitian);
    }
    if psi0.dim() != h.dim() {
        return Err(Error::DimensionMismatch { expected: h.dim(), found: psi0.dim() });
    }
    if !t.is_finite() {
        return Err(Error::InvalidInput("evolution time must be finite".into()));
    }
    if t == 0.0 {
        return Ok(psi0.clone());
    }
    if h.is_diagonal() {
        let amps = h
            .diagonal_entries()
            .iter()
            .zip(&psi0.amplitudes)
            .map(|(e, a)| C64::new(0.0, -e.re * t).exp() * a)
            .collect();
        return Ok(StateVector::new(amps));
    }
    let steps = steps.max(1);
    let breakdown = 1e-13 * row_sum_bound(h).max(1.0);
    let dt = t / steps as f64;
    let mut psi = psi0.amplitudes.clone();
    let mut halvings = 0usize;
    let mut sub = dt;
    for _ in 0..steps {
        let mut remaining = dt;
        while remaining.abs() > 0.0 {
            let tau = if sub.abs() >= remaining.abs() { remaining } else { sub };
            let (next, err) = krylov_step(h, &psi, tau, cfg.evolve_krylov_dim, breakdown);
            if err <= cfg.step_tolerance {
                psi = next;
                remaining -= tau;
                if remaining.abs() <= 1e-15 * dt.abs() {
                    remaining = 0.0;
                }
            } else {
                halvings += 1;
                if halvings > cfg.max_halvings {
                    return Err(Error::NotConverged { iterations: halvings, residual: err });
                }
                sub = tau / 2.0;
            }
        }
    }
    Ok(StateVector::new(psi))
}

/// `<psi| op |psi>`.
pub fn expectation(op: &SparseOperator, state: &StateVector) -> C64 {
    inner(&state.amplitudes, &op.apply(&state.amplitudes))
}

/// Orthonormal basis of `span{H^k seed : k <= depth}`, with two-pass
/// Gram-Schmidt and relative rank tolerance `1e-10`.
pub fn generated_subspace(h: &SparseOperator, seed: &StateVector, depth: usize) -> Projector {
    let dim = h.dim();
    let mut columns: Vec<Vec<C64>> = Vec::new();
    let n0 = seed.norm();
    if n0 == 0.0 {
        return Projector::from_orthonormal(dim, columns);
    }
    columns.push(seed.amplitudes.iter().map(|a| a / n0).collect());
    for _ in 0..depth {
        let mut w = h.apply(columns.last().expect("non-empty"));
        let before = norm(&w);
        orthogonalize(&mut w, &columns);
        let after = norm(&w);
        if before == 0.0 || after <= 1e-10 * before {
            break;
        }
        scale_in_place(&mut w, 1.0 / after);
        columns.push(w);
    }
    Projector::from_orthonormal(dim, columns)
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Joint null space of the Gauss generators, from the eigenvectors of
/// `sum G^2` with eigenvalue below `1e-10`.
///
/// Diagonal generators fix the candidate states first; the remaining
/// positive semidefinite matrix is diagonalized block by block over its
/// connected components.
pub fn gauss_singlet_projector(dim: usize, generators: &[SparseOperator]) -> Result<Projector> {
    for g in generators {
        if g.dim() != dim {
            return Err(Error::DimensionMismatch { expected: dim, found: g.dim() });
        }
    }
    let mut candidate = vec![true; dim];
    for g in generators.iter().filter(|g| g.is_diagonal()) {
        for (i, v) in g.diagonal_entries().iter().enumerate() {
            if v.norm() > 1e-12 {
                candidate[i] = false;
            }
        }
    }
    let states: Vec<usize> = (0..dim).filter(|&i| candidate[i]).collect();
    let off: Vec<&SparseOperator> = generators.iter().filter(|g| !g.is_diagonal()).collect();
    let squares: Vec<SparseOperator> = off.iter().map(|g| g.mul(g)).collect();
    let s = SparseOperator::sum(dim, &squares);

    let mut pos = vec![usize::MAX; dim];
    for (p, &i) in states.iter().enumerate() {
        pos[i] = p;
    }
    let mut parent: Vec<usize> = (0..states.len()).collect();
    for (p, &i) in states.iter().enumerate() {
        for (j, v) in s.row(i) {
            if v != ZERO && pos[j] != usize::MAX {
                let (a, b) = (find(&mut parent, p), find(&mut parent, pos[j]));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut groups: alloc::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for p in 0..states.len() {
        let r = find(&mut parent, p);
        groups.entry(r).or_default().push(states[p]);
    }
    let mut columns = Vec::new();
    for members in groups.values() {
        let block = s.block(members, members);
        let k = members.len();
        let mut m = DMatrix::from_element(k, k, ZERO);
        for (r, c, v) in block {
            m[(r, c)] = v;
        }
        let e = eigh(&m);
        for (idx, &val) in e.values.iter().enumerate() {
            if val < 1e-10 {
                let mut col = vec![ZERO; dim];
                for (r, &state) in members.iter().enumerate() {
                    col[state] = e.vectors[(r, idx)];
                }
                columns.push(col);
            }
        }
    }
    Ok(Projector::from_orthonormal(dim, columns))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{enumerate_sector, ChainLayout, SectorSpec};
    use crate::hamiltonian::{build_gauss_generators, build_he, build_hm, build_target_h, ModelParams};

    fn random_hermitian(dim: usize, seed: u64) -> SparseOperator {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut t = Vec::new();
        for i in 0..dim {
            t.push((i, i, C64::new(rng.gen::<f64>() * 4.0 - 2.0, 0.0)));
            for _ in 0..3 {
                let j = rng.gen_range(0..dim);
                if j > i {
                    t.push((i, j, C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)));
                }
            }
        }
        SparseOperator::from_triplets(dim, t).plus_adjoint()
    }

    #[test]
    fn lanczos_matches_dense() {
        let h = random_hermitian(300, 1);
        let dense = eigh(&h.to_dense());
        let pairs = ground_state(&h, 4, &SolverConfig::default()).unwrap();
        for (k, p) in pairs.iter().enumerate() {
            assert!((p.value - dense.values[k]).abs() < 1e-9, "{} vs {}", p.value, dense.values[k]);
            assert!(p.residual <= 1e-9 * p.value.abs().max(1.0));
        }
    }

    #[test]
    fn degenerate_levels_are_all_found() {
        let mut d = vec![3.0; 20];
        d[4] = -1.0;
        d[9] = -1.0;
        d[13] = -1.0;
        let h = SparseOperator::real_diagonal(&d);
        let pairs = ground_state(&h, 4, &SolverConfig::default()).unwrap();
        let v: Vec<f64> = pairs.iter().map(|p| p.value).collect();
        assert!((v[0] + 1.0).abs() < 1e-12 && (v[2] + 1.0).abs() < 1e-12 && (v[3] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn zero_matrix_and_errors() {
        let z = SparseOperator::zeros(5);
        assert_eq!(ground_state(&z, 1, &SolverConfig::default()).unwrap()[0].value, 0.0);
        assert!(ground_state(&z, 6, &SolverConfig::default()).is_err());
        let nh = SparseOperator::from_triplets(2, vec![(0, 1, ONE)]);
        assert_eq!(ground_state(&nh, 1, &SolverConfig::default()), Err(Error::NotHermitian));
        let cfg = SolverConfig { krylov_dim: 2, max_restarts: 0, ..SolverConfig::default() };
        let r = ground_state(&random_hermitian(200, 4), 1, &cfg);
        assert!(matches!(r, Err(Error::NotConverged { .. })));
    }

    #[test]
    fn seeded_runs_are_identical() {
        let h = random_hermitian(150, 2);
        let a = ground_state(&h, 2, &SolverConfig::default()).unwrap();
        let b = ground_state(&h, 2, &SolverConfig::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn evolution_matches_dense_exponential() {
        let h = random_hermitian(60, 3);
        let psi = StateVector::random(60, 9);
        let t = 1.7;
        let out = evolve(&h, &psi, t, 4, &SolverConfig::default()).unwrap();
        let e = eigh(&h.to_dense());
        let mut want = vec![ZERO; 60];
        for k in 0..60 {
            let v = e.vector(k);
            let c = inner(&v, &psi.amplitudes) * C64::new(0.0, -e.values[k] * t).exp();
            axpy(c, &v, &mut want);
        }
        let d = out.amplitudes.iter().zip(&want).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(d < 1e-10, "deviation {}", d);
        assert!((out.norm() - 1.0).abs() < 1e-10);
        let back = evolve(&h, &out, -t, 4, &SolverConfig::default()).unwrap();
        assert!(back.amplitudes.iter().zip(&psi.amplitudes).all(|(a, b)| (a - b).norm() < 1e-8));
        assert_eq!(evolve(&h, &psi, 0.0, 3, &SolverConfig::default()).unwrap(), psi);
    }

    #[test]
    fn diagonal_evolution_is_exact_phase() {
        let d = [0.3, -1.2, 2.5];
        let h = SparseOperator::real_diagonal(&d);
        let psi = StateVector::new(vec![ONE; 3]);
        let out = evolve(&h, &psi, 2.0, 1, &SolverConfig::default()).unwrap();
        for (k, e) in d.iter().enumerate() {
            assert!((out.amplitudes[k] - C64::new(0.0, -e * 2.0).exp()).norm() < 1e-15);
        }
    }

    fn two_site(cutoff: u8) -> crate::fock::SectorBasis {
        let reg = ChainLayout::target(2, cutoff).registry().unwrap();
        enumerate_sector(&reg, &SectorSpec::balanced(&reg).with_psi_count(2)).unwrap()
    }

    fn vacuum(basis: &crate::fock::SectorBasis) -> usize {
        let reg = basis.registry();
        let mut occ = vec![0u8; reg.len()];
        for p in crate::hamiltonian::psi_modes(reg, 1).unwrap() {
            occ[p] = 1;
        }
        basis.index_of(&occ).unwrap()
    }

    #[test]
    fn strong_coupling_ground_state_is_vacuum() {
        let b = two_site(1);
        let p = ModelParams { g: 1.0, m: 1.0, beta: Some(0.0), ..ModelParams::default() };
        let h = build_he(&p, &b).unwrap().add(&build_hm(&p, &b).unwrap());
        let gs = ground_state(&h, 1, &SolverConfig::default()).unwrap();
        assert!((gs[0].value + 2.0).abs() < 1e-12);
        assert!(gs[0].vector.amplitudes[vacuum(&b)].norm() > 1.0 - 1e-9);
    }

    #[test]
    fn hopping_lowers_ground_energy() {
        let b = two_site(1);
        let p = ModelParams { g: 1.0, m: 0.5, beta: Some(0.1), ..ModelParams::default() };
        let h = build_target_h(&p, &b).unwrap();
        let gs = ground_state(&h, 3, &SolverConfig::default()).unwrap();
        let dense = eigh(&h.to_dense());
        assert!((gs[0].value - dense.values[0]).abs() < 1e-10);
        assert!(gs[0].value < -1.0);
        assert!(gs.windows(2).all(|w| w[0].value <= w[1].value));
    }

    #[test]
    fn singlet_projector_properties() {
        let b = two_site(1);
        let gens = build_gauss_generators(&b).unwrap();
        let proj = gauss_singlet_projector(b.dim(), &gens).unwrap();
        assert!(proj.rank() > 0);
        assert!(proj.orthonormality_defect() < 1e-12);
        let vac = StateVector::basis(b.dim(), vacuum(&b));
        assert!(proj.leakage(&vac.amplitudes) < 1e-12);
        let p = ModelParams { g: 1.0, m: 0.5, beta: Some(0.3), ..ModelParams::default() };
        assert!(proj.invariance_defect(&build_target_h(&p, &b).unwrap()) < 1e-10);
        for c in proj.columns() {
            for g in &gens {
                assert!(norm(&g.apply(c)) < 1e-10);
            }
        }
        let x = StateVector::random(b.dim(), 5);
        let px = proj.project(&x.amplitudes);
        let ppx = proj.project(&px);
        assert!(px.iter().zip(&ppx).all(|(a, b)| (a - b).norm() < 1e-12));
    }

    #[test]
    fn degenerate_excited_levels_after_exhausted_krylov_space() {
        // The Krylov space of a random start spans only the distinct
        // eigenvalues here, so every restart ends in a breakdown.
        let reg = ChainLayout::target(2, 2).registry().unwrap();
        let b = enumerate_sector(&reg, &SectorSpec::balanced(&reg).with_psi_count(2)).unwrap();
        let p = ModelParams { cutoff: 2, g: 0.5, m: 0.8769869496239782, beta: Some(0.1), ..ModelParams::default() };
        let h = build_target_h(&p, &b).unwrap();
        let dense = eigh(&h.to_dense());
        let pairs = ground_state(&h, 5, &SolverConfig::default()).unwrap();
        for (k, pair) in pairs.iter().enumerate() {
            assert!((pair.value - dense.values[k]).abs() < 1e-9);
        }
    }

    #[test]
    fn lone_fermion_is_not_a_singlet() {
        let reg = ChainLayout::target(1, 1).registry().unwrap();
        let b = enumerate_sector(&reg, &SectorSpec::new().with_psi_count(1)).unwrap();
        let gens = build_gauss_generators(&b).unwrap();
        assert_eq!(gauss_singlet_projector(b.dim(), &gens).unwrap().rank(), 0);
    }

    #[test]
    fn generated_subspace_depth_zero_is_seed() {
        let h = random_hermitian(40, 6);
        let seed = StateVector::random(40, 1);
        let k = generated_subspace(&h, &seed, 0);
        assert_eq!(k.rank(), 1);
        let k5 = generated_subspace(&h, &seed, 5);
        assert_eq!(k5.rank(), 6);
        assert!(k5.orthonormality_defect() < 1e-12);
        let hv = h.apply(&h.apply(&seed.amplitudes));
        assert!(k5.leakage(&hv) < 1e-10 * norm(&hv));
    }

    #[test]
    fn expectation_of_identity_is_one() {
        let s = StateVector::random(10, 3);
        assert!((expectation(&SparseOperator::identity(10), &s) - ONE).norm() < 1e-15);
    }
}
