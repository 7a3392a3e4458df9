//! Elements, finite subsets and Følner boxes of the lattice group `Z^d`, `d <= 3`.
//!
//! The group is written additively: the translate `Sg` of the multiplicative
//! notation becomes `S + g`.

use std::collections::HashSet;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub const MAX_DIM: usize = 3;

/// A point of `Z^d`. Unused trailing coordinates are kept at zero so that
/// equality and hashing are plain structural comparisons.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LatticePoint {
    dim: u8,
    coords: [i64; MAX_DIM],
}

impl LatticePoint {
    pub fn new(coords: &[i64]) -> Result<Self> {
        if coords.is_empty() || coords.len() > MAX_DIM {
            return Err(Error::Input(format!(
                "lattice points need 1..={MAX_DIM} coordinates, got {}",
                coords.len()
            )));
        }
        let mut c = [0; MAX_DIM];
        c[..coords.len()].copy_from_slice(coords);
        Ok(LatticePoint { dim: coords.len() as u8, coords: c })
    }

    /// Shorthand for one-dimensional points.
    pub fn d1(x: i64) -> Self {
        LatticePoint { dim: 1, coords: [x, 0, 0] }
    }

    pub fn d2(x: i64, y: i64) -> Self {
        LatticePoint { dim: 2, coords: [x, y, 0] }
    }

    pub fn d3(x: i64, y: i64, z: i64) -> Self {
        LatticePoint { dim: 3, coords: [x, y, z] }
    }

    pub fn origin(dim: usize) -> Self {
        assert!((1..=MAX_DIM).contains(&dim), "dimension out of range");
        LatticePoint { dim: dim as u8, coords: [0; MAX_DIM] }
    }

    /// Point with every coordinate equal to `value`.
    pub fn splat(dim: usize, value: i64) -> Self {
        let mut p = Self::origin(dim);
        for c in &mut p.coords[..dim] {
            *c = value;
        }
        p
    }

    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    pub fn coords(&self) -> &[i64] {
        &self.coords[..self.dim as usize]
    }

    pub(crate) fn coords_mut(&mut self) -> &mut [i64] {
        &mut self.coords[..self.dim as usize]
    }

    pub fn coord(&self, axis: usize) -> i64 {
        self.coords[axis]
    }

    pub fn is_origin(&self) -> bool {
        self.coords == [0; MAX_DIM]
    }

    pub fn dot(&self, x: &[f64]) -> f64 {
        self.coords().iter().zip(x).map(|(&a, &b)| a as f64 * b).sum()
    }

    fn map2(self, other: Self, f: impl Fn(i64, i64) -> i64) -> Self {
        debug_assert_eq!(self.dim, other.dim, "mixed dimensions");
        let mut coords = [0; MAX_DIM];
        for (axis, c) in coords.iter_mut().enumerate().take(self.dim()) {
            *c = f(self.coords[axis], other.coords[axis]);
        }
        LatticePoint { dim: self.dim, coords }
    }

    pub fn scale(self, k: i64) -> Self {
        let mut p = self;
        for c in &mut p.coords {
            *c *= k;
        }
        p
    }
}

impl std::ops::Add for LatticePoint {
    type Output = LatticePoint;
    fn add(self, rhs: Self) -> Self {
        self.map2(rhs, |a, b| a + b)
    }
}

impl std::ops::Sub for LatticePoint {
    type Output = LatticePoint;
    fn sub(self, rhs: Self) -> Self {
        self.map2(rhs, |a, b| a - b)
    }
}

impl std::ops::Neg for LatticePoint {
    type Output = LatticePoint;
    fn neg(self) -> Self {
        self.scale(-1)
    }
}

impl fmt::Debug for LatticePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for LatticePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.dim == 1 {
            return write!(f, "{}", self.coords[0]);
        }
        write!(f, "(")?;
        for (i, c) in self.coords().iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

impl Serialize for LatticePoint {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.coords().serialize(s)
    }
}

impl<'de> Deserialize<'de> for LatticePoint {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let coords = Vec::<i64>::deserialize(d)?;
        LatticePoint::new(&coords).map_err(serde::de::Error::custom)
    }
}

/// An axis-aligned box `[lo_0, hi_0) x ... x [lo_{d-1}, hi_{d-1})`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoxRegion {
    pub lo: LatticePoint,
    pub hi: LatticePoint,
}

impl BoxRegion {
    pub fn new(lo: LatticePoint, hi: LatticePoint) -> Result<Self> {
        if lo.dim() != hi.dim() {
            return Err(Error::Dimension { expected: lo.dim(), found: hi.dim() });
        }
        Ok(BoxRegion { lo, hi })
    }

    /// `[0, side)^d`.
    pub fn cube(dim: usize, side: i64) -> Self {
        BoxRegion { lo: LatticePoint::origin(dim), hi: LatticePoint::splat(dim, side) }
    }

    /// `[lo, hi)` in one dimension.
    pub fn interval(lo: i64, hi: i64) -> Self {
        BoxRegion { lo: LatticePoint::d1(lo), hi: LatticePoint::d1(hi) }
    }

    pub fn dim(&self) -> usize {
        self.lo.dim()
    }

    pub fn extent(&self, axis: usize) -> i64 {
        (self.hi.coord(axis) - self.lo.coord(axis)).max(0)
    }

    pub fn len(&self) -> usize {
        (0..self.dim()).map(|a| self.extent(a) as usize).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, p: &LatticePoint) -> bool {
        p.dim() == self.dim()
            && (0..self.dim()).all(|a| p.coord(a) >= self.lo.coord(a) && p.coord(a) < self.hi.coord(a))
    }

    pub fn contains_box(&self, other: &BoxRegion) -> bool {
        other.is_empty()
            || (0..self.dim()).all(|a| {
                other.lo.coord(a) >= self.lo.coord(a) && other.hi.coord(a) <= self.hi.coord(a)
            })
    }

    /// Row-major offset of `p`, last axis fastest.
    pub fn index_of(&self, p: &LatticePoint) -> Option<usize> {
        if !self.contains(p) {
            return None;
        }
        let mut idx = 0usize;
        for a in 0..self.dim() {
            idx = idx * self.extent(a) as usize + (p.coord(a) - self.lo.coord(a)) as usize;
        }
        Some(idx)
    }

    pub fn point_at(&self, mut idx: usize) -> LatticePoint {
        let mut coords = [0i64; MAX_DIM];
        for a in (0..self.dim()).rev() {
            let ext = self.extent(a) as usize;
            coords[a] = self.lo.coord(a) + (idx % ext) as i64;
            idx /= ext;
        }
        LatticePoint::new(&coords[..self.dim()]).expect("valid dimension")
    }

    pub fn points(&self) -> impl Iterator<Item = LatticePoint> + '_ {
        (0..self.len()).map(move |i| self.point_at(i))
    }

    pub fn translate(&self, c: LatticePoint) -> BoxRegion {
        BoxRegion { lo: self.lo + c, hi: self.hi + c }
    }

    /// Smallest box containing `self + s` for every `s` in `shifts`.
    pub fn expand_by(&self, shifts: &[LatticePoint]) -> BoxRegion {
        if shifts.is_empty() {
            return *self;
        }
        let mut lo = self.lo;
        let mut hi = self.hi;
        for a in 0..self.dim() {
            let min = shifts.iter().map(|s| s.coord(a)).min().unwrap_or(0).min(0);
            let max = shifts.iter().map(|s| s.coord(a)).max().unwrap_or(0).max(0);
            lo.coords[a] += min;
            hi.coords[a] += max;
        }
        BoxRegion { lo, hi }
    }

    pub fn to_set(&self) -> FiniteLatticeSet {
        FiniteLatticeSet::from_sorted_unique(self.dim(), self.points().collect())
    }
}

/// A finite subset of `Z^d`: a sorted point list with a hash index.
#[derive(Clone)]
pub struct FiniteLatticeSet {
    dim: usize,
    points: Vec<LatticePoint>,
    index: HashSet<LatticePoint>,
}

impl FiniteLatticeSet {
    pub fn new(dim: usize, points: impl IntoIterator<Item = LatticePoint>) -> Result<Self> {
        if !(1..=MAX_DIM).contains(&dim) {
            return Err(Error::Input(format!("dimension {dim} out of range")));
        }
        let mut pts: Vec<LatticePoint> = points.into_iter().collect();
        if let Some(p) = pts.iter().find(|p| p.dim() != dim) {
            return Err(Error::Dimension { expected: dim, found: p.dim() });
        }
        pts.sort_unstable();
        pts.dedup();
        Ok(Self::from_sorted_unique(dim, pts))
    }

    fn from_sorted_unique(dim: usize, points: Vec<LatticePoint>) -> Self {
        let index = points.iter().copied().collect();
        FiniteLatticeSet { dim, points, index }
    }

    pub fn empty(dim: usize) -> Self {
        Self::from_sorted_unique(dim, Vec::new())
    }

    /// One-dimensional set from integers.
    pub fn from_ints(xs: impl IntoIterator<Item = i64>) -> Self {
        Self::new(1, xs.into_iter().map(LatticePoint::d1)).expect("dimension 1")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn contains(&self, p: &LatticePoint) -> bool {
        self.index.contains(p)
    }

    pub fn points(&self) -> &[LatticePoint] {
        &self.points
    }

    pub fn iter(&self) -> impl Iterator<Item = &LatticePoint> {
        self.points.iter()
    }

    pub fn contains_origin(&self) -> bool {
        self.contains(&LatticePoint::origin(self.dim))
    }

    pub fn translate(&self, c: LatticePoint) -> Self {
        // translation preserves the lexicographic order
        Self::from_sorted_unique(self.dim, self.points.iter().map(|&p| p + c).collect())
    }

    pub fn union(&self, other: &Self) -> Self {
        Self::new(self.dim, self.points.iter().chain(other.points.iter()).copied())
            .expect("same dimension")
    }

    pub fn intersection(&self, other: &Self) -> Self {
        Self::from_sorted_unique(
            self.dim,
            self.points.iter().filter(|p| other.contains(p)).copied().collect(),
        )
    }

    pub fn difference(&self, other: &Self) -> Self {
        Self::from_sorted_unique(
            self.dim,
            self.points.iter().filter(|p| !other.contains(p)).copied().collect(),
        )
    }

    pub fn symmetric_difference_len(&self, other: &Self) -> usize {
        self.difference(other).len() + other.difference(self).len()
    }

    pub fn is_subset(&self, other: &Self) -> bool {
        self.points.iter().all(|p| other.contains(p))
    }

    pub fn bounding_box(&self) -> Option<BoxRegion> {
        let first = self.points.first()?;
        let mut lo = *first;
        let mut hi = *first;
        for p in &self.points {
            for a in 0..self.dim {
                lo.coords[a] = lo.coords[a].min(p.coords[a]);
                hi.coords[a] = hi.coords[a].max(p.coords[a]);
            }
        }
        for a in 0..self.dim {
            hi.coords[a] += 1;
        }
        Some(BoxRegion { lo, hi })
    }

    /// True when the set is exactly the lattice box spanned by its bounding box.
    pub fn is_box(&self) -> bool {
        self.bounding_box().is_some_and(|b| b.len() == self.len())
    }
}

impl PartialEq for FiniteLatticeSet {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.points == other.points
    }
}

impl Eq for FiniteLatticeSet {}

impl fmt::Debug for FiniteLatticeSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.points.iter()).finish()
    }
}

impl Serialize for FiniteLatticeSet {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.points.serialize(s)
    }
}

impl<'de> Deserialize<'de> for FiniteLatticeSet {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let pts = Vec::<LatticePoint>::deserialize(d)?;
        let dim = pts.first().map_or(1, |p| p.dim());
        FiniteLatticeSet::new(dim, pts).map_err(serde::de::Error::custom)
    }
}

/// Side-length rule `N -> side(N)` of a Følner box family.
#[derive(Clone)]
pub enum SideRule {
    /// `side(N) = N`.
    Identity,
    /// `side(N) = m * N`.
    Scaled(usize),
    Custom(Arc<dyn Fn(usize) -> usize + Send + Sync>),
}

impl SideRule {
    pub fn side(&self, n: usize) -> usize {
        match self {
            SideRule::Identity => n,
            SideRule::Scaled(m) => m * n,
            SideRule::Custom(f) => f(n),
        }
    }
}

impl fmt::Debug for SideRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SideRule::Identity => write!(f, "Identity"),
            SideRule::Scaled(m) => write!(f, "Scaled({m})"),
            SideRule::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoxStyle {
    /// `[0, side)^d`
    Anchored,
    /// `[-floor(side/2), side - floor(side/2))^d`
    Centered,
}

/// A Følner sequence of boxes in `Z^d`.
#[derive(Clone, Debug)]
pub struct FolnerPlan {
    pub dim: usize,
    pub style: BoxStyle,
    pub side: SideRule,
}

impl FolnerPlan {
    pub fn anchored(dim: usize) -> Self {
        FolnerPlan { dim, style: BoxStyle::Anchored, side: SideRule::Identity }
    }

    pub fn centered(dim: usize) -> Self {
        FolnerPlan { dim, style: BoxStyle::Centered, side: SideRule::Identity }
    }

    pub fn with_side(mut self, side: SideRule) -> Self {
        self.side = side;
        self
    }

    pub fn side(&self, n: usize) -> usize {
        self.side.side(n)
    }

    /// The box `F_N` as a region.
    pub fn region(&self, n: usize) -> BoxRegion {
        let s = self.side(n) as i64;
        match self.style {
            BoxStyle::Anchored => BoxRegion::cube(self.dim, s),
            BoxStyle::Centered => BoxRegion::cube(self.dim, s).translate(LatticePoint::splat(self.dim, -(s / 2))),
        }
    }
}

/// `F_N` as a finite set; `|F_N| = side(N)^d`.
pub fn folner_box(plan: &FolnerPlan, n: usize) -> Result<FiniteLatticeSet> {
    if n == 0 {
        return Err(Error::Input("Følner index must be at least 1".into()));
    }
    if plan.side(n) == 0 {
        return Err(Error::Input(format!("side({n}) must be at least 1")));
    }
    Ok(plan.region(n).to_set())
}

/// `∂_S T = { g : (S+g) ∩ T ≠ ∅ and (S+g) ⊄ T }`.
pub fn boundary_set(s: &FiniteLatticeSet, t: &FiniteLatticeSet) -> Result<FiniteLatticeSet> {
    if s.is_empty() {
        return Err(Error::Input("boundary_set needs a nonempty shift set".into()));
    }
    if s.dim() != t.dim() {
        return Err(Error::Dimension { expected: s.dim(), found: t.dim() });
    }
    // g can only meet T if g = x - s for some x in T, s in S
    let mut candidates: Vec<LatticePoint> =
        t.iter().flat_map(|&x| s.iter().map(move |&sh| x - sh)).collect();
    candidates.sort_unstable();
    candidates.dedup();
    let out = candidates.into_iter().filter(|&g| {
        let inside = s.iter().filter(|&&sh| t.contains(&(sh + g))).count();
        inside > 0 && inside < s.len()
    });
    FiniteLatticeSet::new(t.dim(), out)
}

/// `|∂_S F| / |F|`.
pub fn invariance_ratio(s: &FiniteLatticeSet, f: &FiniteLatticeSet) -> Result<f64> {
    if f.is_empty() {
        return Err(Error::Input("invariance_ratio needs a nonempty set".into()));
    }
    Ok(boundary_set(s, f)?.len() as f64 / f.len() as f64)
}

/// `|F Δ (F + h)| / |F|`.
pub fn translation_defect(f: &FiniteLatticeSet, h: LatticePoint) -> f64 {
    f.symmetric_difference_len(&f.translate(h)) as f64 / f.len().max(1) as f64
}
