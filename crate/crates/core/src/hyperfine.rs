//! Magnetic-level (`m_F`) selection rules of the atomic implementation.
//!
//! Each boson-assisted tunneling process creates one boson-fermion pair and
//! annihilates another, so it conserves angular momentum only if the two
//! pairs carry the same total `m_F`. The left and right ends of a link each
//! give a 4x4 table of pair sums. Four designated pairs of cells per table
//! must agree (the wanted processes); every other value must be unique so
//! that no unwanted process conserves `m_F`.
//!
//! All arithmetic is exact: values are stored as twice the `m_F`.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::fock::Species;

/// An integer or half-integer, stored as twice its value.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct HalfInt(i32);

impl HalfInt {
    pub const ZERO: HalfInt = HalfInt(0);

    pub const fn from_twice(twice: i32) -> Self {
        HalfInt(twice)
    }

    pub const fn from_int(v: i32) -> Self {
        HalfInt(2 * v)
    }

    pub const fn twice(self) -> i32 {
        self.0
    }

    pub fn is_integer(self) -> bool {
        self.0 % 2 == 0
    }

    pub fn to_f64(self) -> f64 {
        self.0 as f64 / 2.0
    }

    /// Parse `"3"`, `"-3/2"` or `"1.5"`.
    pub fn parse(s: &str) -> Option<Self> {
        let s = s.trim();
        if let Some((num, den)) = s.split_once('/') {
            let n: i32 = num.trim().parse().ok()?;
            return match den.trim() {
                "1" => n.checked_mul(2).map(HalfInt),
                "2" => Some(HalfInt(n)),
                _ => None,
            };
        }
        if let Ok(n) = s.parse::<i32>() {
            return n.checked_mul(2).map(HalfInt);
        }
        let f: f64 = s.parse().ok()?;
        Self::from_f64(f)
    }

    /// Exact conversion from a float that is a multiple of 1/2.
    pub fn from_f64(f: f64) -> Option<Self> {
        let t = f * 2.0;
        if t.is_finite() && libm::trunc(t) == t && t.abs() <= i32::MAX as f64 {
            Some(HalfInt(t as i32))
        } else {
            None
        }
    }
}

impl core::ops::Add for HalfInt {
    type Output = HalfInt;
    fn add(self, rhs: HalfInt) -> HalfInt {
        HalfInt(self.0 + rhs.0)
    }
}

impl core::ops::Neg for HalfInt {
    type Output = HalfInt;
    fn neg(self) -> HalfInt {
        HalfInt(-self.0)
    }
}

impl fmt::Display for HalfInt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_integer() {
            write!(f, "{}", self.0 / 2)
        } else {
            write!(f, "{}/2", self.0)
        }
    }
}

impl Serialize for HalfInt {
    fn serialize<S: Serializer>(&self, s: S) -> core::result::Result<S::Ok, S::Error> {
        if self.is_integer() {
            s.serialize_i32(self.0 / 2)
        } else {
            s.collect_str(self)
        }
    }
}

struct HalfIntVisitor;

impl Visitor<'_> for HalfIntVisitor {
    type Value = HalfInt;

    fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("an integer, a multiple of 0.5, or a string like \"-3/2\"")
    }

    fn visit_i64<E: de::Error>(self, v: i64) -> core::result::Result<HalfInt, E> {
        i32::try_from(v)
            .ok()
            .and_then(|n| n.checked_mul(2))
            .map(HalfInt)
            .ok_or_else(|| E::custom(format!("m_F {} out of range", v)))
    }

    fn visit_u64<E: de::Error>(self, v: u64) -> core::result::Result<HalfInt, E> {
        self.visit_i64(i64::try_from(v).map_err(|_| E::custom("m_F out of range"))?)
    }

    fn visit_f64<E: de::Error>(self, v: f64) -> core::result::Result<HalfInt, E> {
        HalfInt::from_f64(v).ok_or_else(|| E::custom(format!("{} is not a multiple of 1/2", v)))
    }

    fn visit_str<E: de::Error>(self, v: &str) -> core::result::Result<HalfInt, E> {
        HalfInt::parse(v).ok_or_else(|| E::custom(format!("cannot read {:?} as a half-integer", v)))
    }
}

impl<'de> Deserialize<'de> for HalfInt {
    fn deserialize<D: Deserializer<'de>>(d: D) -> core::result::Result<HalfInt, D::Error> {
        d.deserialize_any(HalfIntVisitor)
    }
}

fn index(s: Species) -> usize {
    s as usize
}

/// One `m_F` per species.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "BTreeMap<Species, HalfInt>", try_from = "BTreeMap<Species, HalfInt>")]
pub struct SpeciesAssignment {
    values: [HalfInt; 12],
}

impl SpeciesAssignment {
    pub fn new(pairs: &[(Species, HalfInt)]) -> Result<Self> {
        let mut seen = [false; 12];
        let mut values = [HalfInt::ZERO; 12];
        for &(s, v) in pairs {
            if seen[index(s)] {
                return Err(Error::InvalidInput(format!("species {} assigned twice", s)));
            }
            seen[index(s)] = true;
            values[index(s)] = v;
        }
        if let Some(missing) = Species::ALL.iter().find(|s| !seen[index(**s)]) {
            return Err(Error::InvalidInput(format!("species {} has no m_F", missing)));
        }
        Ok(Self { values })
    }

    /// Reference assignment: `A = (3, 2)`, `B = (-3, -2)`, `C = (1, -3)`,
    /// `D = (-1, 3)`, `psi = (3/2, -3/2)`, `chi = (7/2, -7/2)`.
    pub fn reference() -> Self {
        use Species::*;
        let h = HalfInt::from_twice;
        Self::new(&[
            (A1, h(6)),
            (A2, h(4)),
            (B1, h(-6)),
            (B2, h(-4)),
            (C1, h(2)),
            (C2, h(-6)),
            (D1, h(-2)),
            (D2, h(6)),
            (Psi1, h(3)),
            (Psi2, h(-3)),
            (Chi1, h(7)),
            (Chi2, h(-7)),
        ])
        .expect("complete")
    }

    pub fn get(&self, s: Species) -> HalfInt {
        self.values[index(s)]
    }

    pub fn set(&mut self, s: Species, v: HalfInt) {
        self.values[index(s)] = v;
    }

    /// Every value negated.
    pub fn negated(&self) -> Self {
        let mut out = *self;
        for v in out.values.iter_mut() {
            *v = -*v;
        }
        out
    }

    /// Every value shifted by `s`.
    pub fn shifted(&self, s: HalfInt) -> Self {
        let mut out = *self;
        for v in out.values.iter_mut() {
            *v = *v + s;
        }
        out
    }

    /// Bosons must be integers and fermions half-odd.
    pub fn check_parity(&self) -> Result<()> {
        for s in Species::ALL {
            let v = self.get(s);
            if s.is_fermion() == v.is_integer() {
                return Err(Error::InvalidInput(format!(
                    "m_F of {} is {}; {} need {} values",
                    s,
                    v,
                    if s.is_fermion() { "fermions" } else { "bosons" },
                    if s.is_fermion() { "half-odd" } else { "integer" }
                )));
            }
        }
        Ok(())
    }
}

impl From<SpeciesAssignment> for BTreeMap<Species, HalfInt> {
    fn from(a: SpeciesAssignment) -> Self {
        Species::ALL.iter().map(|&s| (s, a.get(s))).collect()
    }
}

impl TryFrom<BTreeMap<Species, HalfInt>> for SpeciesAssignment {
    type Error = String;
    fn try_from(map: BTreeMap<Species, HalfInt>) -> core::result::Result<Self, String> {
        let pairs: Vec<(Species, HalfInt)> = map.into_iter().collect();
        SpeciesAssignment::new(&pairs).map_err(|e| e.to_string())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub const BOTH: [Side; 2] = [Side::Left, Side::Right];

    pub fn rows(self) -> [Species; 4] {
        [Species::Psi1, Species::Psi2, Species::Chi1, Species::Chi2]
    }

    pub fn columns(self) -> [Species; 4] {
        match self {
            Side::Left => [Species::A1, Species::A2, Species::C1, Species::C2],
            Side::Right => [Species::B1, Species::B2, Species::D1, Species::D2],
        }
    }

    /// Cells `(row species, column species)` that must agree, in the order
    /// red, green, blue, cyan of the tunneling matrix entries.
    pub fn required_pairs(self) -> [[(Species, Species); 2]; 4] {
        use Species::*;
        match self {
            Side::Left => [
                [(Psi1, A1), (Chi1, C1)],
                [(Psi1, C2), (Chi2, A2)],
                [(Psi2, A2), (Chi1, C2)],
                [(Psi2, C1), (Chi2, A1)],
            ],
            Side::Right => [
                [(Psi1, D1), (Chi1, B1)],
                [(Psi2, D2), (Chi1, B2)],
                [(Psi1, B2), (Chi2, D2)],
                [(Psi2, B1), (Chi2, D1)],
            ],
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::Left => "left",
            Side::Right => "right",
        })
    }
}

/// `m(row) + m(column)` for one end of a link.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectionTable {
    pub side: Side,
    pub rows: [Species; 4],
    pub columns: [Species; 4],
    pub cells: [[HalfInt; 4]; 4],
    /// Required-equal cells as `(row, column)` positions.
    pub required: [[(usize, usize); 2]; 4],
}

impl SelectionTable {
    pub fn new(a: &SpeciesAssignment, side: Side) -> Self {
        let rows = side.rows();
        let columns = side.columns();
        let mut cells = [[HalfInt::ZERO; 4]; 4];
        for (r, &rs) in rows.iter().enumerate() {
            for (c, &cs) in columns.iter().enumerate() {
                cells[r][c] = a.get(rs) + a.get(cs);
            }
        }
        let pos = |(rs, cs): (Species, Species)| {
            (
                rows.iter().position(|&x| x == rs).expect("row"),
                columns.iter().position(|&x| x == cs).expect("column"),
            )
        };
        let required = side.required_pairs().map(|[p, q]| [pos(p), pos(q)]);
        Self { side, rows, columns, cells, required }
    }

    pub fn cell(&self, row: Species, column: Species) -> Option<HalfInt> {
        let r = self.rows.iter().position(|&x| x == row)?;
        let c = self.columns.iter().position(|&x| x == column)?;
        Some(self.cells[r][c])
    }

    /// Which required pair (0..4) a cell belongs to.
    pub fn pair_of(&self, r: usize, c: usize) -> Option<usize> {
        self.required.iter().position(|p| p.contains(&(r, c)))
    }

    /// Plain-text rendering; required cells carry a `*k` marker.
    pub fn render(&self) -> String {
        let mut out = format!("{:<8}", self.side.to_string());
        for c in self.columns {
            out.push_str(&format!("{:>10}", c.name()));
        }
        out.push('\n');
        for (r, rs) in self.rows.iter().enumerate() {
            out.push_str(&format!("{:<8}", rs.name()));
            for c in 0..4 {
                let mark = match self.pair_of(r, c) {
                    Some(k) => format!("*{}", k + 1),
                    None => String::new(),
                };
                out.push_str(&format!("{:>10}", format!("{}{}", self.cells[r][c], mark)));
            }
            out.push('\n');
        }
        out
    }
}

pub fn build_tables(a: &SpeciesAssignment) -> (SelectionTable, SelectionTable) {
    (SelectionTable::new(a, Side::Left), SelectionTable::new(a, Side::Right))
}

/// One failed selection rule.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    /// A wanted process does not conserve `m_F`.
    BrokenPair { side: Side, pair: usize, cells: [(Species, Species); 2], values: [HalfInt; 2] },
    /// Cells outside a common required pair share a value, so the process
    /// exchanging them conserves `m_F`.
    Collision { side: Side, value: HalfInt, cells: Vec<(Species, Species)> },
}

/// Equal values in the left and right tables. Harmless, since the two ends
/// of a link are spatially separated.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CrossSideWarning {
    pub value: HalfInt,
    pub left: Vec<(Species, Species)>,
    pub right: Vec<(Species, Species)>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Validation {
    pub valid: bool,
    pub violations: Vec<Violation>,
    pub warnings: Vec<CrossSideWarning>,
}

/// Value groups of a table: merged required pairs that agree, single cells
/// otherwise.
fn groups(t: &SelectionTable) -> Vec<(HalfInt, Vec<(usize, usize)>)> {
    let mut out = Vec::new();
    let mut used = [[false; 4]; 4];
    for [p, q] in t.required {
        let (vp, vq) = (t.cells[p.0][p.1], t.cells[q.0][q.1]);
        if vp == vq {
            out.push((vp, vec![p, q]));
        } else {
            out.push((vp, vec![p]));
            out.push((vq, vec![q]));
        }
        used[p.0][p.1] = true;
        used[q.0][q.1] = true;
    }
    for r in 0..4 {
        for c in 0..4 {
            if !used[r][c] {
                out.push((t.cells[r][c], vec![(r, c)]));
            }
        }
    }
    out
}

pub fn validate(a: &SpeciesAssignment) -> Result<Validation> {
    a.check_parity()?;
    let (left, right) = build_tables(a);
    let mut violations = Vec::new();
    let names = |t: &SelectionTable, cells: &[(usize, usize)]| -> Vec<(Species, Species)> {
        cells.iter().map(|&(r, c)| (t.rows[r], t.columns[c])).collect()
    };
    for t in [&left, &right] {
        for (k, [p, q]) in t.required.iter().enumerate() {
            let (vp, vq) = (t.cells[p.0][p.1], t.cells[q.0][q.1]);
            if vp != vq {
                violations.push(Violation::BrokenPair {
                    side: t.side,
                    pair: k,
                    cells: [(t.rows[p.0], t.columns[p.1]), (t.rows[q.0], t.columns[q.1])],
                    values: [vp, vq],
                });
            }
        }
        let mut by_value: BTreeMap<HalfInt, Vec<Vec<(usize, usize)>>> = BTreeMap::new();
        for (v, cells) in groups(t) {
            by_value.entry(v).or_default().push(cells);
        }
        for (value, gs) in by_value {
            if gs.len() > 1 {
                let cells: Vec<(usize, usize)> = gs.into_iter().flatten().collect();
                violations.push(Violation::Collision { side: t.side, value, cells: names(t, &cells) });
            }
        }
    }
    let mut warnings = Vec::new();
    let cells_with = |t: &SelectionTable, v: HalfInt| -> Vec<(Species, Species)> {
        let mut out = Vec::new();
        for r in 0..4 {
            for c in 0..4 {
                if t.cells[r][c] == v {
                    out.push((t.rows[r], t.columns[c]));
                }
            }
        }
        out
    };
    let mut values: Vec<HalfInt> = left.cells.iter().flatten().copied().collect();
    values.sort();
    values.dedup();
    for v in values {
        let r = cells_with(&right, v);
        if !r.is_empty() {
            warnings.push(CrossSideWarning { value: v, left: cells_with(&left, v), right: r });
        }
    }
    Ok(Validation { valid: violations.is_empty(), violations, warnings })
}

/// Candidate values per species.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SearchRanges {
    pub values: BTreeMap<Species, Vec<HalfInt>>,
}

impl SearchRanges {
    /// Singleton ranges holding exactly `a`.
    pub fn singleton(a: &SpeciesAssignment) -> Self {
        Self { values: Species::ALL.iter().map(|&s| (s, vec![a.get(s)])).collect() }
    }

    /// Bosons over `lo..=hi`, fermions over the half-odd values in
    /// `[-fermion_max, fermion_max]`.
    pub fn uniform(boson_lo: i32, boson_hi: i32, fermion_max_twice: i32) -> Self {
        let bosons: Vec<HalfInt> = (boson_lo..=boson_hi).map(HalfInt::from_int).collect();
        let fermions: Vec<HalfInt> =
            (-fermion_max_twice..=fermion_max_twice).filter(|t| t % 2 != 0).map(HalfInt::from_twice).collect();
        let values = Species::ALL
            .iter()
            .map(|&s| (s, if s.is_fermion() { fermions.clone() } else { bosons.clone() }))
            .collect();
        Self { values }
    }
}

/// Placement order: fermions, then the left-end bosons, then the right-end ones.
const SEARCH_ORDER: [Species; 12] = [
    Species::Psi1,
    Species::Psi2,
    Species::Chi1,
    Species::Chi2,
    Species::A1,
    Species::A2,
    Species::C1,
    Species::C2,
    Species::B1,
    Species::B2,
    Species::D1,
    Species::D2,
];

struct Search<'a> {
    ranges: Vec<&'a [HalfInt]>,
    placed: [Option<HalfInt>; 12],
    limit: usize,
    out: Vec<SpeciesAssignment>,
}

/// Whether the placed values can still satisfy the rules of `side`.
fn partial_ok(placed: &[Option<HalfInt>; 12], side: Side) -> bool {
    let rows = side.rows();
    let cols = side.columns();
    let cell = |(rs, cs): (Species, Species)| Some(placed[index(rs)]? + placed[index(cs)]?);
    let mut in_pair = [[false; 4]; 4];
    let mut vals: Vec<HalfInt> = Vec::with_capacity(12);
    for [p, q] in side.required_pairs() {
        for (rs, cs) in [p, q] {
            let r = rows.iter().position(|&x| x == rs).expect("row");
            let c = cols.iter().position(|&x| x == cs).expect("column");
            in_pair[r][c] = true;
        }
        match (cell(p), cell(q)) {
            (Some(a), Some(b)) if a != b => return false,
            (Some(a), _) | (_, Some(a)) => vals.push(a),
            _ => {}
        }
    }
    for (r, &rs) in rows.iter().enumerate() {
        for (c, &cs) in cols.iter().enumerate() {
            if !in_pair[r][c] {
                if let Some(v) = cell((rs, cs)) {
                    vals.push(v);
                }
            }
        }
    }
    vals.sort();
    vals.windows(2).all(|w| w[0] != w[1])
}

impl Search<'_> {
    fn descend(&mut self, depth: usize) {
        if self.out.len() >= self.limit {
            return;
        }
        if depth == SEARCH_ORDER.len() {
            let pairs: Vec<(Species, HalfInt)> =
                Species::ALL.iter().map(|&s| (s, self.placed[index(s)].expect("placed"))).collect();
            self.out.push(SpeciesAssignment::new(&pairs).expect("complete"));
            return;
        }
        let s = SEARCH_ORDER[depth];
        for k in 0..self.ranges[depth].len() {
            let v = self.ranges[depth][k];
            self.placed[index(s)] = Some(v);
            if Side::BOTH.iter().all(|&side| partial_ok(&self.placed, side)) {
                self.descend(depth + 1);
                if self.out.len() >= self.limit {
                    break;
                }
            }
        }
        self.placed[index(s)] = None;
    }
}

/// Valid assignments drawn from `ranges`, at most `limit`, in lexicographic
/// order of (psi1, psi2, chi1, chi2, A1, A2, C1, C2, B1, B2, D1, D2) over the
/// sorted ranges.
pub fn search(ranges: &SearchRanges, limit: usize) -> Result<Vec<SpeciesAssignment>> {
    let mut sorted: Vec<Vec<HalfInt>> = Vec::with_capacity(12);
    for s in SEARCH_ORDER {
        let mut vals = ranges.values.get(&s).cloned().unwrap_or_default();
        if vals.is_empty() {
            return Err(Error::InvalidInput(format!("empty search range for {}", s)));
        }
        if let Some(bad) = vals.iter().find(|v| v.is_integer() == s.is_fermion()) {
            return Err(Error::InvalidInput(format!("range of {} contains {} of the wrong parity", s, bad)));
        }
        vals.sort();
        vals.dedup();
        sorted.push(vals);
    }
    let mut search = Search {
        ranges: sorted.iter().map(|v| v.as_slice()).collect(),
        placed: [None; 12],
        limit,
        out: Vec::new(),
    };
    if limit > 0 {
        search.descend(0);
    }
    Ok(search.out)
}
