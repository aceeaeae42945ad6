//! Modes, constrained occupation-number bases and ladder operators.
//!
//! A [`ModeRegistry`] fixes a total order on all bosonic and fermionic modes.
//! That order is the fermionic sign convention: a fermion operator on mode `k`
//! picks up `(-1)^(number of occupied fermion modes with id < k)`.
//!
//! Link bosons come in Schwinger pairs, `(a1, a2)` at the left end of a link and
//! `(b1, b2)` at the right end. The boson cutoff of a link bounds the *total*
//! occupation of each pair, `N_L <= cutoff` and `N_R <= cutoff`, so every
//! retained block of fixed `N` is a complete SU(2) multiplet (`j <= cutoff / 2`).
//! Bath bosons `C`, `D` are capped mode by mode.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type ModeId = usize;

/// Atomic species carried by a mode.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Species {
    A1,
    A2,
    B1,
    B2,
    C1,
    C2,
    D1,
    D2,
    #[serde(rename = "psi1")]
    Psi1,
    #[serde(rename = "psi2")]
    Psi2,
    #[serde(rename = "chi1")]
    Chi1,
    #[serde(rename = "chi2")]
    Chi2,
}

impl Species {
    pub const ALL: [Species; 12] = [
        Species::A1,
        Species::A2,
        Species::B1,
        Species::B2,
        Species::C1,
        Species::C2,
        Species::D1,
        Species::D2,
        Species::Psi1,
        Species::Psi2,
        Species::Chi1,
        Species::Chi2,
    ];

    pub fn kind(self) -> ModeKind {
        match self {
            Species::Psi1 | Species::Psi2 | Species::Chi1 | Species::Chi2 => ModeKind::Fermion,
            _ => ModeKind::Boson,
        }
    }

    pub fn is_fermion(self) -> bool {
        self.kind() == ModeKind::Fermion
    }

    /// Species living on vertices (matter fermions); all others sit on links.
    pub fn on_vertex(self) -> bool {
        matches!(self, Species::Psi1 | Species::Psi2)
    }

    pub fn name(self) -> &'static str {
        match self {
            Species::A1 => "A1",
            Species::A2 => "A2",
            Species::B1 => "B1",
            Species::B2 => "B2",
            Species::C1 => "C1",
            Species::C2 => "C2",
            Species::D1 => "D1",
            Species::D2 => "D2",
            Species::Psi1 => "psi1",
            Species::Psi2 => "psi2",
            Species::Chi1 => "chi1",
            Species::Chi2 => "chi2",
        }
    }

    pub fn from_name(name: &str) -> Option<Species> {
        Species::ALL.iter().copied().find(|s| s.name() == name)
    }

    /// The other member of a Schwinger pair (`A1 <-> A2`, `B1 <-> B2`).
    fn schwinger_partner(self) -> Option<Species> {
        match self {
            Species::A1 => Some(Species::A2),
            Species::A2 => Some(Species::A1),
            Species::B1 => Some(Species::B2),
            Species::B2 => Some(Species::B1),
            _ => None,
        }
    }
}

impl fmt::Display for Species {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModeKind {
    Boson,
    Fermion,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Location {
    Vertex(usize),
    Link(usize),
}

/// One mode of the registry.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mode {
    pub id: ModeId,
    pub species: Species,
    pub location: Location,
    /// Maximum occupation (1 for fermions).
    pub cutoff: u8,
    /// Other half of the Schwinger pair sharing the end-total cap.
    pub partner: Option<ModeId>,
}

impl Mode {
    pub fn kind(&self) -> ModeKind {
        self.species.kind()
    }
}

/// Input row for [`ModeRegistry::new`]. Fermion cutoffs are ignored.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModeSpec {
    pub species: Species,
    pub location: Location,
    pub cutoff: u8,
}

/// Ordered list of all modes; ids are `0..len` in registry order.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeRegistry {
    modes: Vec<Mode>,
    lookup: BTreeMap<(Location, Species), ModeId>,
    num_vertices: usize,
    num_links: usize,
}

impl ModeRegistry {
    pub fn new(specs: &[ModeSpec]) -> Result<Self> {
        let mut modes = Vec::with_capacity(specs.len());
        let mut lookup = BTreeMap::new();
        let mut num_vertices = 0;
        let mut num_links = 0;
        for (id, spec) in specs.iter().enumerate() {
            match (spec.species.on_vertex(), spec.location) {
                (true, Location::Vertex(v)) => num_vertices = num_vertices.max(v + 1),
                (false, Location::Link(l)) => num_links = num_links.max(l + 1),
                _ => {
                    return Err(Error::InvalidRegistry(format!(
                        "species {} cannot sit at {:?}",
                        spec.species, spec.location
                    )))
                }
            }
            let cutoff = if spec.species.is_fermion() {
                1
            } else {
                if spec.cutoff == 0 {
                    return Err(Error::InvalidRegistry(format!(
                        "boson mode {} ({} at {:?}) has cutoff 0",
                        id, spec.species, spec.location
                    )));
                }
                spec.cutoff
            };
            if lookup.insert((spec.location, spec.species), id).is_some() {
                return Err(Error::InvalidRegistry(format!(
                    "duplicate mode {} at {:?}",
                    spec.species, spec.location
                )));
            }
            modes.push(Mode {
                id,
                species: spec.species,
                location: spec.location,
                cutoff,
                partner: None,
            });
        }
        for id in 0..modes.len() {
            if let Some(partner) = modes[id].species.schwinger_partner() {
                if let Some(&pid) = lookup.get(&(modes[id].location, partner)) {
                    if modes[pid].cutoff != modes[id].cutoff {
                        return Err(Error::InvalidRegistry(format!(
                            "Schwinger pair {}/{} at {:?} has unequal cutoffs",
                            modes[id].species, partner, modes[id].location
                        )));
                    }
                    modes[id].partner = Some(pid);
                }
            }
        }
        Ok(Self { modes, lookup, num_vertices, num_links })
    }

    /// The four link bosons of a single link, no vertices.
    pub fn single_link(cutoff: u8) -> Result<Self> {
        let specs: Vec<ModeSpec> = [Species::A1, Species::A2, Species::B1, Species::B2]
            .iter()
            .map(|&species| ModeSpec { species, location: Location::Link(0), cutoff })
            .collect();
        Self::new(&specs)
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    pub fn mode(&self, id: ModeId) -> Result<&Mode> {
        self.modes
            .get(id)
            .ok_or(Error::ModeOutOfRange { mode: id, len: self.modes.len() })
    }

    pub fn find(&self, species: Species, location: Location) -> Option<ModeId> {
        self.lookup.get(&(location, species)).copied()
    }

    /// Like [`find`](Self::find) but reports the missing mode.
    pub fn require(&self, species: Species, location: Location) -> Result<ModeId> {
        self.find(species, location).ok_or_else(|| {
            Error::MissingModes(format!("{} at {:?}", species, location))
        })
    }

    pub fn num_vertices(&self) -> usize {
        self.num_vertices
    }

    pub fn num_links(&self) -> usize {
        self.num_links
    }

    pub fn has_species(&self, species: Species) -> bool {
        self.modes.iter().any(|m| m.species == species)
    }

    pub fn modes_at(&self, location: Location) -> impl Iterator<Item = &Mode> {
        self.modes.iter().filter(move |m| m.location == location)
    }
}

/// Builder for the standard open chain: vertices and links interleaved
/// left to right, `psi1 psi2` on each vertex and
/// `A1 A2 B1 B2 [C1 C2 D1 D2] [chi1 chi2]` on each link.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainLayout {
    pub sites: usize,
    pub cutoff: u8,
    pub chi: bool,
    pub bath_cutoff: Option<u8>,
}

impl ChainLayout {
    pub fn target(sites: usize, cutoff: u8) -> Self {
        Self { sites, cutoff, chi: false, bath_cutoff: None }
    }

    pub fn microscopic(sites: usize, cutoff: u8) -> Self {
        Self { sites, cutoff, chi: true, bath_cutoff: None }
    }

    pub fn explicit_bath(sites: usize, cutoff: u8, bath_cutoff: u8) -> Self {
        Self { sites, cutoff, chi: true, bath_cutoff: Some(bath_cutoff) }
    }

    pub fn registry(&self) -> Result<ModeRegistry> {
        if self.sites == 0 {
            return Err(Error::InvalidRegistry("chain needs at least one vertex".into()));
        }
        let mut specs = Vec::new();
        for v in 0..self.sites {
            for species in [Species::Psi1, Species::Psi2] {
                specs.push(ModeSpec { species, location: Location::Vertex(v), cutoff: 1 });
            }
            if v + 1 == self.sites {
                break;
            }
            let link = Location::Link(v);
            for species in [Species::A1, Species::A2, Species::B1, Species::B2] {
                specs.push(ModeSpec { species, location: link, cutoff: self.cutoff });
            }
            if let Some(bath) = self.bath_cutoff {
                for species in [Species::C1, Species::C2, Species::D1, Species::D2] {
                    specs.push(ModeSpec { species, location: link, cutoff: bath });
                }
            }
            if self.chi {
                for species in [Species::Chi1, Species::Chi2] {
                    specs.push(ModeSpec { species, location: link, cutoff: 1 });
                }
            }
        }
        ModeRegistry::new(&specs)
    }
}

/// Occupation numbers indexed by mode id.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct BasisState(pub Vec<u8>);

impl BasisState {
    pub fn vacuum(registry: &ModeRegistry) -> Self {
        BasisState(vec![0; registry.len()])
    }

    pub fn occupations(&self) -> &[u8] {
        &self.0
    }

    /// Check occupation bounds against the registry (including end-total caps).
    pub fn validate(&self, registry: &ModeRegistry) -> Result<()> {
        if self.0.len() != registry.len() {
            return Err(Error::DimensionMismatch { expected: registry.len(), found: self.0.len() });
        }
        for mode in registry.modes() {
            let n = self.0[mode.id];
            let total = n + mode.partner.map_or(0, |p| self.0[p]);
            if n > mode.cutoff || total > mode.cutoff {
                return Err(Error::InvalidInput(format!(
                    "occupation {} of mode {} ({} at {:?}) exceeds cutoff {}",
                    n, mode.id, mode.species, mode.location, mode.cutoff
                )));
            }
        }
        Ok(())
    }
}

/// Per-state sector filters.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SectorSpec {
    /// Links on which `N_L - N_R + n(chi1) - n(chi2) = 0`. Without ancillas
    /// on the link this is the constraint `N_L = N_R`.
    pub balanced_links: Vec<usize>,
    /// Upper bound on `N_L + N_R` for every link.
    pub max_link_bosons: Option<u32>,
    pub psi_count: Option<u32>,
    pub chi_count: Option<u32>,
    /// Total fermion number, psi plus chi.
    pub fermion_count: Option<u32>,
    /// Carried along for the solver; the singlet condition is a projection,
    /// not a basis filter.
    pub gauss_singlet: bool,
}

impl SectorSpec {
    pub fn new() -> Self {
        Self::default()
    }

    /// Balance every link of the registry.
    pub fn balanced(registry: &ModeRegistry) -> Self {
        Self { balanced_links: (0..registry.num_links()).collect(), ..Self::default() }
    }

    pub fn with_psi_count(mut self, n: u32) -> Self {
        self.psi_count = Some(n);
        self
    }

    pub fn with_chi_count(mut self, n: u32) -> Self {
        self.chi_count = Some(n);
        self
    }

    pub fn with_fermion_count(mut self, n: u32) -> Self {
        self.fermion_count = Some(n);
        self
    }

    pub fn with_max_link_bosons(mut self, n: u32) -> Self {
        self.max_link_bosons = Some(n);
        self
    }
}

/// Link-local occupation sums used by the sector filters.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
struct LinkTally {
    left: i32,
    right: i32,
    chi_balance: i32,
}

/// Canonically ordered basis of one sector with a bijective index.
#[derive(Clone, Debug, PartialEq)]
pub struct SectorBasis {
    registry: ModeRegistry,
    spec: SectorSpec,
    width: usize,
    len: usize,
    occ: Vec<u8>,
}

impl SectorBasis {
    pub fn registry(&self) -> &ModeRegistry {
        &self.registry
    }

    pub fn spec(&self) -> &SectorSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.dim() == 0
    }

    /// Occupations of state `i`.
    pub fn state(&self, i: usize) -> &[u8] {
        &self.occ[i * self.width..(i + 1) * self.width]
    }

    pub fn states(&self) -> impl Iterator<Item = &[u8]> + '_ {
        (0..self.dim()).map(move |i| self.state(i))
    }

    /// Position of an occupation vector, by bisection.
    pub fn index_of(&self, occupations: &[u8]) -> Option<usize> {
        if occupations.len() != self.width {
            return None;
        }
        if self.width == 0 {
            return if self.len == 0 { None } else { Some(0) };
        }
        let (mut lo, mut hi) = (0usize, self.dim());
        while lo < hi {
            let mid = (lo + hi) / 2;
            match self.state(mid).cmp(occupations) {
                Ordering::Less => lo = mid + 1,
                Ordering::Greater => hi = mid,
                Ordering::Equal => return Some(mid),
            }
        }
        None
    }

    /// Apply one ladder operator to basis state `index`.
    ///
    /// Returns `Ok(None)` for every physics null: Pauli blocking, annihilating
    /// an empty mode, hitting the cutoff, or landing outside the sector.
    pub fn apply_ladder(
        &self,
        mode: ModeId,
        ladder: Ladder,
        index: usize,
    ) -> Result<Option<(usize, f64)>> {
        self.registry.mode(mode)?;
        if index >= self.dim() {
            return Err(Error::InvalidInput(format!(
                "state index {} out of range for basis of dimension {}",
                index,
                self.dim()
            )));
        }
        let mut occ = self.state(index).to_vec();
        Ok(ladder_in_place(&self.registry, &mut occ, mode, ladder)
            .and_then(|amp| self.index_of(&occ).map(|j| (j, amp))))
    }

    /// Sum of the occupations of the given modes in state `i`.
    pub fn count(&self, i: usize, modes: &[ModeId]) -> u32 {
        let s = self.state(i);
        modes.iter().map(|&m| s[m] as u32).sum()
    }
}

/// Enumerate every occupation vector passing the per-state filters of `spec`,
/// in lexicographic order (mode 0 most significant).
pub fn enumerate_sector(registry: &ModeRegistry, spec: &SectorSpec) -> Result<SectorBasis> {
    for &link in &spec.balanced_links {
        if link >= registry.num_links() {
            return Err(Error::InvalidSector(format!(
                "balanced link {} does not exist (registry has {} links)",
                link,
                registry.num_links()
            )));
        }
    }
    if spec.chi_count.is_some() && !registry.has_species(Species::Chi1) {
        return Err(Error::InvalidSector("chi count requested but registry has no chi modes".into()));
    }

    let n = registry.len();
    // closing[pos] lists links whose last mode is at `pos`.
    let mut last_of_link = vec![None::<usize>; registry.num_links()];
    for mode in registry.modes() {
        if let Location::Link(l) = mode.location {
            last_of_link[l] = Some(mode.id);
        }
    }
    let mut closing: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (l, last) in last_of_link.iter().enumerate() {
        if let Some(pos) = last {
            closing[*pos].push(l);
        }
    }
    let mut balanced = vec![false; registry.num_links()];
    for &l in &spec.balanced_links {
        balanced[l] = true;
    }

    // Remaining fermion capacity after each position, for count pruning.
    let mut psi_left = vec![0u32; n + 1];
    let mut chi_left = vec![0u32; n + 1];
    for pos in (0..n).rev() {
        let species = registry.modes()[pos].species;
        psi_left[pos] = psi_left[pos + 1] + matches!(species, Species::Psi1 | Species::Psi2) as u32;
        chi_left[pos] = chi_left[pos + 1] + matches!(species, Species::Chi1 | Species::Chi2) as u32;
    }

    let mut ctx = Enumeration {
        registry,
        spec,
        closing: &closing,
        balanced: &balanced,
        psi_left: &psi_left,
        chi_left: &chi_left,
        tally: vec![LinkTally::default(); registry.num_links()],
        current: vec![0u8; n],
        out: Vec::new(),
        count: 0,
    };
    ctx.descend(0, 0, 0);
    Ok(SectorBasis { registry: registry.clone(), spec: spec.clone(), width: n, len: ctx.count, occ: ctx.out })
}

struct Enumeration<'a> {
    registry: &'a ModeRegistry,
    spec: &'a SectorSpec,
    closing: &'a [Vec<usize>],
    balanced: &'a [bool],
    psi_left: &'a [u32],
    chi_left: &'a [u32],
    tally: Vec<LinkTally>,
    current: Vec<u8>,
    out: Vec<u8>,
    count: usize,
}

impl Enumeration<'_> {
    fn counts_feasible(&self, pos: usize, psi: u32, chi: u32) -> bool {
        let fits = |target: Option<u32>, have: u32, room: u32| match target {
            Some(t) => have <= t && have + room >= t,
            None => true,
        };
        fits(self.spec.psi_count, psi, self.psi_left[pos])
            && fits(self.spec.chi_count, chi, self.chi_left[pos])
            && fits(self.spec.fermion_count, psi + chi, self.psi_left[pos] + self.chi_left[pos])
    }

    fn link_ok(&self, link: usize) -> bool {
        let t = self.tally[link];
        if self.balanced[link] && t.left - t.right + t.chi_balance != 0 {
            return false;
        }
        if let Some(max) = self.spec.max_link_bosons {
            if (t.left + t.right) as u32 > max {
                return false;
            }
        }
        true
    }

    fn descend(&mut self, pos: usize, psi: u32, chi: u32) {
        if !self.counts_feasible(pos, psi, chi) {
            return;
        }
        if pos == self.current.len() {
            self.out.extend_from_slice(&self.current);
            self.count += 1;
            return;
        }
        let mode = &self.registry.modes()[pos];
        let mut max = mode.cutoff;
        if let Some(p) = mode.partner {
            if p < pos {
                max = max.saturating_sub(self.current[p]);
            }
        }
        for value in 0..=max {
            self.current[pos] = value;
            let (dpsi, dchi) = match mode.species {
                Species::Psi1 | Species::Psi2 => (value as u32, 0),
                Species::Chi1 | Species::Chi2 => (0, value as u32),
                _ => (0, 0),
            };
            if let Location::Link(l) = mode.location {
                let v = value as i32;
                let t = &mut self.tally[l];
                match mode.species {
                    Species::A1 | Species::A2 => t.left += v,
                    Species::B1 | Species::B2 => t.right += v,
                    Species::Chi1 => t.chi_balance += v,
                    Species::Chi2 => t.chi_balance -= v,
                    _ => {}
                }
            }
            if self.closing[pos].iter().all(|&l| self.link_ok(l)) {
                self.descend(pos + 1, psi + dpsi, chi + dchi);
            }
            if let Location::Link(l) = mode.location {
                let v = value as i32;
                let t = &mut self.tally[l];
                match mode.species {
                    Species::A1 | Species::A2 => t.left -= v,
                    Species::B1 | Species::B2 => t.right -= v,
                    Species::Chi1 => t.chi_balance -= v,
                    Species::Chi2 => t.chi_balance += v,
                    _ => {}
                }
            }
        }
        self.current[pos] = 0;
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Ladder {
    Raise,
    Lower,
}

impl Ladder {
    pub fn adjoint(self) -> Ladder {
        match self {
            Ladder::Raise => Ladder::Lower,
            Ladder::Lower => Ladder::Raise,
        }
    }
}

/// Apply a ladder operator to raw occupations, returning the amplitude or
/// `None` when the result vanishes or leaves the truncated Fock space.
pub fn ladder_in_place(
    registry: &ModeRegistry,
    occ: &mut [u8],
    mode: ModeId,
    ladder: Ladder,
) -> Option<f64> {
    let m = &registry.modes()[mode];
    let n = occ[mode];
    match m.kind() {
        ModeKind::Boson => match ladder {
            Ladder::Raise => {
                let total = n + m.partner.map_or(0, |p| occ[p]);
                if n >= m.cutoff || total >= m.cutoff {
                    return None;
                }
                occ[mode] = n + 1;
                Some(libm::sqrt(n as f64 + 1.0))
            }
            Ladder::Lower => {
                if n == 0 {
                    return None;
                }
                occ[mode] = n - 1;
                Some(libm::sqrt(n as f64))
            }
        },
        ModeKind::Fermion => {
            let blocked = match ladder {
                Ladder::Raise => n == 1,
                Ladder::Lower => n == 0,
            };
            if blocked {
                return None;
            }
            let below = registry.modes()[..mode]
                .iter()
                .filter(|other| other.kind() == ModeKind::Fermion && occ[other.id] == 1)
                .count();
            occ[mode] = 1 - n;
            Some(if below % 2 == 0 { 1.0 } else { -1.0 })
        }
    }
}

/// One factor of an operator word.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Letter {
    Ladder(ModeId, Ladder),
    /// `sqrt(n_a + n_b + 1)`, or its inverse, evaluated where it stands.
    PairSqrt { modes: [ModeId; 2], inverse: bool },
}

/// Apply a word (written left to right, acting right to left) to raw
/// occupations. Returns the accumulated real amplitude.
pub fn apply_word(registry: &ModeRegistry, occ: &mut [u8], word: &[Letter]) -> Option<f64> {
    let mut amp = 1.0;
    for letter in word.iter().rev() {
        match *letter {
            Letter::Ladder(mode, ladder) => amp *= ladder_in_place(registry, occ, mode, ladder)?,
            Letter::PairSqrt { modes, inverse } => {
                let n = occ[modes[0]] as f64 + occ[modes[1]] as f64 + 1.0;
                let root = libm::sqrt(n);
                amp *= if inverse { 1.0 / root } else { root };
            }
        }
    }
    Some(amp)
}

/// Hermitian conjugate of a word.
pub fn adjoint_word(word: &[Letter]) -> Vec<Letter> {
    word.iter()
        .rev()
        .map(|l| match *l {
            Letter::Ladder(m, ladder) => Letter::Ladder(m, ladder.adjoint()),
            other => other,
        })
        .collect()
}

/// Render a state as `[psi1@v0=1, A1@l0=2, ...]`, skipping empty modes.
pub fn describe(registry: &ModeRegistry, occ: &[u8]) -> String {
    let mut s = String::from("[");
    let mut first = true;
    for mode in registry.modes() {
        if occ[mode.id] == 0 {
            continue;
        }
        if !first {
            s.push_str(", ");
        }
        first = false;
        let loc = match mode.location {
            Location::Vertex(v) => format!("v{}", v),
            Location::Link(l) => format!("l{}", l),
        };
        s.push_str(&format!("{}@{}={}", mode.species, loc, occ[mode.id]));
    }
    s.push(']');
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fermions(k: usize) -> ModeRegistry {
        let specs: Vec<ModeSpec> = (0..k)
            .map(|v| ModeSpec {
                species: if v % 2 == 0 { Species::Psi1 } else { Species::Psi2 },
                location: Location::Vertex(v / 2),
                cutoff: 1,
            })
            .collect();
        ModeRegistry::new(&specs).unwrap()
    }

    /// Brute force over the raw product space, independent of the pruned DFS.
    fn brute_force(registry: &ModeRegistry, keep: impl Fn(&[u8]) -> bool) -> Vec<Vec<u8>> {
        let mut out = Vec::new();
        let mut occ = vec![0u8; registry.len()];
        loop {
            if keep(&occ) {
                out.push(occ.clone());
            }
            let mut pos = registry.len();
            loop {
                if pos == 0 {
                    return out;
                }
                pos -= 1;
                if occ[pos] < registry.modes()[pos].cutoff {
                    occ[pos] += 1;
                    break;
                }
                occ[pos] = 0;
            }
        }
    }

    #[test]
    fn single_link_cutoff_one_has_five_balanced_states() {
        let reg = ModeRegistry::single_link(1).unwrap();
        let basis = enumerate_sector(&reg, &SectorSpec::balanced(&reg)).unwrap();
        let expected = brute_force(&reg, |o| o[0] + o[1] <= 1 && o[2] + o[3] <= 1 && o[0] + o[1] == o[2] + o[3]);
        assert_eq!(expected.len(), 5);
        assert_eq!(basis.dim(), 5);
        for (i, s) in expected.iter().enumerate() {
            assert_eq!(basis.state(i), &s[..]);
        }
    }

    #[test]
    fn empty_registry_has_one_state() {
        let reg = ModeRegistry::new(&[]).unwrap();
        let basis = enumerate_sector(&reg, &SectorSpec::new()).unwrap();
        assert_eq!(basis.dim(), 1);
        assert_eq!(basis.index_of(&[]), Some(0));
    }

    #[test]
    fn two_vertices_two_fermions_gives_six_states() {
        let reg = ChainLayout::target(2, 1).registry().unwrap();
        // Restrict links to vacuum so only the fermions vary.
        let spec = SectorSpec::balanced(&reg).with_psi_count(2).with_max_link_bosons(0);
        let basis = enumerate_sector(&reg, &spec).unwrap();
        let brute = brute_force(&reg, |o| {
            let psi = o[0] + o[1] + o[6] + o[7];
            psi == 2 && o[2..6].iter().all(|&x| x == 0)
        });
        assert_eq!(brute.len(), 6);
        assert_eq!(basis.dim(), 6);
    }

    #[test]
    fn empty_sector_is_a_value() {
        let reg = ChainLayout::target(2, 1).registry().unwrap();
        let basis = enumerate_sector(&reg, &SectorSpec::new().with_psi_count(7)).unwrap();
        assert!(basis.is_empty());
    }

    #[test]
    fn zero_cutoff_boson_is_rejected() {
        let err = ModeRegistry::single_link(0).unwrap_err();
        assert!(matches!(err, Error::InvalidRegistry(_)));
    }

    #[test]
    fn unknown_link_in_spec_is_rejected() {
        let reg = ModeRegistry::single_link(1).unwrap();
        let spec = SectorSpec { balanced_links: vec![3], ..SectorSpec::default() };
        assert!(matches!(enumerate_sector(&reg, &spec), Err(Error::InvalidSector(_))));
    }

    #[test]
    fn boson_ladder_amplitudes_and_cutoff() {
        let reg = ModeRegistry::single_link(2).unwrap();
        let basis = enumerate_sector(&reg, &SectorSpec::new()).unwrap();
        let vac = basis.index_of(&[0, 0, 0, 0]).unwrap();
        let (one, amp) = basis.apply_ladder(0, Ladder::Raise, vac).unwrap().unwrap();
        assert_eq!(amp, 1.0);
        let (two, amp) = basis.apply_ladder(0, Ladder::Raise, one).unwrap().unwrap();
        assert!((amp - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(basis.apply_ladder(0, Ladder::Raise, two).unwrap(), None);
        // end-total cap: a1 = 1 leaves room for exactly one a2
        let (mixed, _) = basis.apply_ladder(1, Ladder::Raise, one).unwrap().unwrap();
        assert_eq!(basis.apply_ladder(1, Ladder::Raise, mixed).unwrap(), None);
        assert_eq!(basis.apply_ladder(2, Ladder::Lower, vac).unwrap(), None);
        assert!(matches!(basis.apply_ladder(9, Ladder::Raise, vac), Err(Error::ModeOutOfRange { .. })));
    }

    #[test]
    fn fermion_sign_counts_lower_occupied_modes() {
        let reg = fermions(4);
        let basis = enumerate_sector(&reg, &SectorSpec::new()).unwrap();
        let i = basis.index_of(&[1, 1, 0, 0]).unwrap();
        let (j, amp) = basis.apply_ladder(2, Ladder::Raise, i).unwrap().unwrap();
        assert_eq!(basis.state(j), &[1, 1, 1, 0]);
        assert_eq!(amp, 1.0);
        let i = basis.index_of(&[1, 0, 0, 0]).unwrap();
        let (_, amp) = basis.apply_ladder(3, Ladder::Raise, i).unwrap().unwrap();
        assert_eq!(amp, -1.0);
        assert_eq!(basis.apply_ladder(0, Ladder::Raise, i).unwrap(), None);
    }

    /// Explicit antisymmetrized-product bookkeeping: represent a state as an
    /// ordered list of created modes and count transpositions to sort it.
    fn oracle_sign(created_in_order: &[usize]) -> f64 {
        let mut v = created_in_order.to_vec();
        let mut swaps = 0;
        for i in 0..v.len() {
            for j in 0..v.len() - 1 - i {
                if v[j] > v[j + 1] {
                    v.swap(j, j + 1);
                    swaps += 1;
                }
            }
        }
        if swaps % 2 == 0 { 1.0 } else { -1.0 }
    }

    #[test]
    fn fermion_signs_match_permutation_oracle() {
        let reg = fermions(4);
        // all orderings of creating three of the four modes from vacuum
        let orders: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
        for order in orders {
            let mut occ = vec![0u8; 4];
            let mut amp = 1.0;
            // c†_{o0} c†_{o1} c†_{o2} |0>: rightmost acts first
            for &m in order.iter().rev() {
                amp *= ladder_in_place(&reg, &mut occ, m, Ladder::Raise).unwrap();
            }
            assert_eq!(amp, oracle_sign(&order), "order {:?}", order);
        }
    }

    #[test]
    fn fermion_anticommutation_exhaustive() {
        let reg = fermions(6);
        let basis = enumerate_sector(&reg, &SectorSpec::new()).unwrap();
        for s in 0..basis.dim() {
            for i in 0..6 {
                for j in 0..6 {
                    if i == j {
                        continue;
                    }
                    for (li, lj) in [(Ladder::Raise, Ladder::Raise), (Ladder::Raise, Ladder::Lower), (Ladder::Lower, Ladder::Lower)] {
                        let ij = apply_word(&reg, &mut basis.state(s).to_vec(), &[Letter::Ladder(j, lj), Letter::Ladder(i, li)]);
                        let ji = apply_word(&reg, &mut basis.state(s).to_vec(), &[Letter::Ladder(i, li), Letter::Ladder(j, lj)]);
                        match (ij, ji) {
                            (Some(a), Some(b)) => assert_eq!(a, -b),
                            (None, None) => {}
                            other => panic!("mismatch {:?} at state {} modes {} {}", other, s, i, j),
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn boson_commutator_is_identity_below_cutoff() {
        let reg = ModeRegistry::single_link(3).unwrap();
        let basis = enumerate_sector(&reg, &SectorSpec::new()).unwrap();
        for s in 0..basis.dim() {
            for mode in 0..4 {
                let occ = basis.state(s);
                let partner = reg.modes()[mode].partner.unwrap();
                if occ[mode] + occ[partner] >= 3 {
                    continue;
                }
                let lr = apply_word(&reg, &mut occ.to_vec(), &[Letter::Ladder(mode, Ladder::Lower), Letter::Ladder(mode, Ladder::Raise)]).unwrap_or(0.0);
                let rl = apply_word(&reg, &mut occ.to_vec(), &[Letter::Ladder(mode, Ladder::Raise), Letter::Ladder(mode, Ladder::Lower)]).unwrap_or(0.0);
                assert!((lr - rl - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn chain_layout_interleaves_vertices_and_links() {
        let reg = ChainLayout::microscopic(3, 1).registry().unwrap();
        let names: Vec<&str> = reg.modes().iter().map(|m| m.species.name()).collect();
        assert_eq!(
            names,
            ["psi1", "psi2", "A1", "A2", "B1", "B2", "chi1", "chi2", "psi1", "psi2", "A1", "A2", "B1", "B2", "chi1", "chi2", "psi1", "psi2"]
        );
        assert_eq!(reg.num_vertices(), 3);
        assert_eq!(reg.num_links(), 2);
    }

    #[test]
    fn enumeration_is_deterministic_and_sorted() {
        let reg = ChainLayout::microscopic(2, 2).registry().unwrap();
        let spec = SectorSpec::balanced(&reg).with_fermion_count(2);
        let a = enumerate_sector(&reg, &spec).unwrap();
        let b = enumerate_sector(&reg, &spec).unwrap();
        assert_eq!(a, b);
        for i in 1..a.dim() {
            assert!(a.state(i - 1) < a.state(i));
        }
        for i in 0..a.dim() {
            assert_eq!(a.index_of(a.state(i)), Some(i));
        }
    }
}
