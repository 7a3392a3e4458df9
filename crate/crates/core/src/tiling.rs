//! Dyadic congruent tilings of `Z^d`, tiling boundaries and the Følner partition.

use std::collections::{HashMap, HashSet};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::averaging::{Domain, SequenceWindow};
use crate::error::{Error, Result};
use crate::lattice::{BoxRegion, FiniteLatticeSet, FolnerPlan, LatticePoint};

pub const MAX_LEVEL: u32 = 20;

/// Tiling of `Z^d` by translates of `[0, 2^k)^d` centred on `2^k Z^d`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Tiling {
    level: u32,
    dim: usize,
}

pub fn dyadic_tiling(k: u32, d: usize) -> Result<Tiling> {
    if k > MAX_LEVEL {
        return Err(Error::Input(format!("tiling level {k} exceeds {MAX_LEVEL}")));
    }
    if !(1..=3).contains(&d) {
        return Err(Error::Input(format!("dimension {d} not in 1..=3")));
    }
    Ok(Tiling { level: k, dim: d })
}

impl Tiling {
    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn side(&self) -> i64 {
        1i64 << self.level
    }

    pub fn tile_len(&self) -> usize {
        (self.side() as usize).pow(self.dim as u32)
    }

    pub fn shape_box(&self) -> BoxRegion {
        BoxRegion::cube(self.dim, self.side())
    }

    pub fn shape(&self) -> FiniteLatticeSet {
        self.shape_box().to_set()
    }

    pub fn is_center(&self, c: &LatticePoint) -> bool {
        c.dim() == self.dim && c.coords().iter().all(|x| x.rem_euclid(self.side()) == 0)
    }

    pub fn center_of(&self, p: &LatticePoint) -> LatticePoint {
        let s = self.side();
        let mut c = *p;
        for ax in 0..self.dim {
            c.coords_mut()[ax] = p.coord(ax).div_euclid(s) * s;
        }
        c
    }

    pub fn tile(&self, center: LatticePoint) -> BoxRegion {
        self.shape_box().translate(center)
    }

    pub fn tile_containing(&self, p: &LatticePoint) -> BoxRegion {
        self.tile(self.center_of(p))
    }

    /// The smallest union of tiles containing `region`, itself a box.
    pub fn cover(&self, region: &BoxRegion) -> BoxRegion {
        if region.is_empty() {
            return BoxRegion::cube(self.dim, 0);
        }
        let s = self.side();
        let mut lo = region.lo;
        let mut hi = region.hi;
        for ax in 0..self.dim {
            lo.coords_mut()[ax] = region.lo.coord(ax).div_euclid(s) * s;
            hi.coords_mut()[ax] = (region.hi.coord(ax) - 1).div_euclid(s) * s + s;
        }
        BoxRegion { lo, hi }
    }

    /// Centres of the tiles inside an aligned box, row-major.
    pub fn centers_in(&self, aligned: &BoxRegion) -> Vec<LatticePoint> {
        if aligned.is_empty() {
            return Vec::new();
        }
        let s = self.side();
        let mut lo = aligned.lo;
        let mut hi = aligned.lo;
        for ax in 0..self.dim {
            lo.coords_mut()[ax] = aligned.lo.coord(ax).div_euclid(s);
            hi.coords_mut()[ax] = aligned.hi.coord(ax).div_euclid(s);
        }
        BoxRegion { lo, hi }.points().map(|p| p.scale(s)).collect()
    }

    /// Number of tiles meeting both `region` and its complement.
    pub fn straddling_count(&self, region: &BoxRegion) -> usize {
        if region.is_empty() {
            return 0;
        }
        let s = self.side();
        let mut meet = 1usize;
        let mut inside = 1usize;
        for ax in 0..self.dim {
            let (a, b) = (region.lo.coord(ax), region.hi.coord(ax));
            meet *= ((b - 1).div_euclid(s) - a.div_euclid(s) + 1) as usize;
            inside *= (b.div_euclid(s) - (a + s - 1).div_euclid(s)).max(0) as usize;
        }
        meet - inside
    }

    /// `|∂_T B|` for a box `B`, in closed form.
    pub fn boundary_len(&self, region: &BoxRegion) -> usize {
        self.straddling_count(region) * self.tile_len()
    }
}

/// Union of the tiles that meet both `b` and its complement.
pub fn tiling_boundary(t: &Tiling, b: &FiniteLatticeSet) -> Result<FiniteLatticeSet> {
    if !b.is_empty() && b.dim() != t.dim() {
        return Err(Error::Dimension { expected: t.dim(), found: b.dim() });
    }
    let mut counts: HashMap<LatticePoint, usize> = HashMap::new();
    for p in b.iter() {
        *counts.entry(t.center_of(p)).or_default() += 1;
    }
    let full = t.tile_len();
    let mut centers: Vec<LatticePoint> = counts.into_iter().filter(|&(_, n)| n < full).map(|(c, _)| c).collect();
    centers.sort_unstable();
    FiniteLatticeSet::new(t.dim(), centers.into_iter().flat_map(|c| t.tile(c).points().collect::<Vec<_>>()))
}

/// Tilings at strictly increasing dyadic levels; each tile is a union of finer ones.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CongruentFamily {
    dim: usize,
    levels: Vec<u32>,
}

impl CongruentFamily {
    pub fn new(dim: usize, levels: Vec<u32>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::Input("a congruent family needs at least one level".into()));
        }
        if levels.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Input(format!("levels {levels:?} are not strictly increasing")));
        }
        for &k in &levels {
            dyadic_tiling(k, dim)?;
        }
        Ok(CongruentFamily { dim, levels })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn levels(&self) -> &[u32] {
        &self.levels
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn tiling(&self, i: usize) -> Tiling {
        Tiling { level: self.levels[i], dim: self.dim }
    }

    /// Checks that the tile at the origin of each level is exactly tiled by the level below.
    pub fn verify_congruency(&self) -> bool {
        (1..self.len()).all(|i| {
            let coarse = self.tiling(i);
            let fine = self.tiling(i - 1);
            let parent = coarse.tile(LatticePoint::origin(self.dim));
            let children = fine.centers_in(&parent);
            let mut seen = HashSet::new();
            let disjoint = children.iter().all(|&c| fine.tile(c).points().all(|p| seen.insert(p)));
            disjoint && seen.len() == parent.len() && seen.iter().all(|p| parent.contains(p))
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PlacedTile {
    pub level: u32,
    pub center: LatticePoint,
}

impl PlacedTile {
    pub fn region(&self) -> BoxRegion {
        BoxRegion::cube(self.center.dim(), 1i64 << self.level).translate(self.center)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelCount {
    pub level: u32,
    pub count: usize,
}

/// Partition of a neighbourhood of `F_{N_max}` into tiles of a congruent family.
#[derive(Clone, Debug)]
pub struct TilePartition {
    dim: usize,
    tiles: Vec<PlacedTile>,
    plan: FolnerPlan,
    n_max: usize,
    thresholds: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct PartitionJson {
    tiles: Vec<PlacedTile>,
    summary: Vec<LevelCount>,
}

impl Serialize for TilePartition {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        PartitionJson { tiles: self.tiles.clone(), summary: self.summary() }.serialize(s)
    }
}

impl TilePartition {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn tiles(&self) -> &[PlacedTile] {
        &self.tiles
    }

    pub fn len(&self) -> usize {
        self.tiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tiles.is_empty()
    }

    pub fn plan(&self) -> &FolnerPlan {
        &self.plan
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn thresholds(&self) -> &[usize] {
        &self.thresholds
    }

    pub fn summary(&self) -> Vec<LevelCount> {
        let mut out: Vec<LevelCount> = Vec::new();
        for t in &self.tiles {
            match out.iter_mut().find(|c| c.level == t.level) {
                Some(c) => c.count += 1,
                None => out.push(LevelCount { level: t.level, count: 1 }),
            }
        }
        out.sort_by_key(|c| c.level);
        out
    }

    /// Bounding box of all tiles.
    pub fn hull(&self) -> Option<BoxRegion> {
        let first = self.tiles.first()?.region();
        Some(self.tiles.iter().skip(1).fold(first, |acc, t| {
            let r = t.region();
            let mut lo = acc.lo;
            let mut hi = acc.hi;
            for ax in 0..self.dim {
                lo.coords_mut()[ax] = lo.coord(ax).min(r.lo.coord(ax));
                hi.coords_mut()[ax] = hi.coord(ax).max(r.hi.coord(ax));
            }
            BoxRegion { lo, hi }
        }))
    }

    /// Tiles contained in `f`.
    pub fn tiles_inside<'a>(&'a self, f: &'a BoxRegion) -> impl Iterator<Item = &'a PlacedTile> + 'a {
        self.tiles.iter().filter(move |t| f.contains_box(&t.region()))
    }

    /// `|A_N| / |F_N|` where `A_N` is the union of the tiles inside `F_N`.
    pub fn covered_fraction(&self, n: usize) -> f64 {
        let f = self.plan.region(n);
        if f.is_empty() {
            return 1.0;
        }
        let covered: usize = self.tiles_inside(&f).map(|t| t.region().len()).sum();
        covered as f64 / f.len() as f64
    }

    pub fn covered_set(&self, n: usize) -> FiniteLatticeSet {
        let f = self.plan.region(n);
        let pts: Vec<LatticePoint> = self.tiles_inside(&f).flat_map(|t| t.region().points().collect::<Vec<_>>()).collect();
        FiniteLatticeSet::new(self.dim, pts).expect("tiles share the dimension")
    }

    /// `(N, |A_N|/|F_N|)` at powers of two up to `N_max`, and at `N_max`.
    pub fn fraction_report(&self) -> Vec<(usize, f64)> {
        let mut ns: Vec<usize> = std::iter::successors(Some(1usize), |n| n.checked_mul(2))
            .take_while(|&n| n <= self.n_max)
            .collect();
        if self.n_max > 0 && ns.last() != Some(&self.n_max) {
            ns.push(self.n_max);
        }
        ns.into_iter().map(|n| (n, self.covered_fraction(n))).collect()
    }

    /// Exhaustive check that tiles are pairwise disjoint genuine tiles.
    pub fn verify(&self) -> bool {
        let mut seen = HashSet::new();
        self.tiles.iter().all(|t| {
            let tiling = Tiling { level: t.level, dim: self.dim };
            tiling.is_center(&t.center) && t.region().points().all(|p| seen.insert(p))
        })
    }
}

/// Default threshold for level index `i` (1-based): the least `N` after which
/// `|∂_{T_{i+1}} F_N| / |F_N| <= 1/(i+1)` up to `n_max`.
pub fn default_thresholds(family: &CongruentFamily, plan: &FolnerPlan, n_max: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity(family.len().saturating_sub(1));
    let mut prev = 1usize;
    for i in 1..family.len() {
        let t = family.tiling(i);
        let bound = 1.0 / (i + 1) as f64;
        let mut n_i = 1usize;
        for n in (1..=n_max).rev() {
            let f = plan.region(n);
            if t.boundary_len(&f) as f64 / f.len() as f64 > bound {
                n_i = n + 1;
                break;
            }
        }
        n_i = n_i.min(n_max).max(prev);
        out.push(n_i);
        prev = n_i;
    }
    out
}

/// Partition built level by level: `D_i` is the union of level-`(i+1)` tiles meeting
/// `F_{N_i}`, the last layer uses level-`L` tiles meeting `F_{N_max}`, and the
/// partition keeps the level-`i` tiles in `D_i \ D_{i-1}`.
///
/// Følner boxes of a plan are nested, so `F_{N_i}` stands for `⋃_{N<=N_i} F_N`.
pub fn congruent_partition(
    family: &CongruentFamily,
    plan: &FolnerPlan,
    n_max: usize,
    thresholds: Option<&[usize]>,
) -> Result<TilePartition> {
    if plan.dim != family.dim() {
        return Err(Error::Dimension { expected: family.dim(), found: plan.dim });
    }
    let levels = family.len();
    let thresholds = match thresholds {
        None => default_thresholds(family, plan, n_max),
        Some(t) => {
            if t.len() + 1 != levels {
                return Err(Error::Schedule(format!(
                    "{} thresholds given for {levels} levels, expected {}",
                    t.len(),
                    levels - 1
                )));
            }
            if t.windows(2).any(|w| w[0] > w[1]) {
                return Err(Error::Schedule(format!("thresholds {t:?} are not monotone")));
            }
            if let Some(&bad) = t.iter().find(|&&n| n == 0 || n > n_max) {
                return Err(Error::Schedule(format!("threshold {bad} outside 1..={n_max}")));
            }
            t.to_vec()
        }
    };
    let mut tiles = Vec::new();
    if n_max > 0 {
        let mut prev: Option<BoxRegion> = None;
        for i in 0..levels {
            let (n_i, cover_level) = if i + 1 < levels { (thresholds[i], i + 1) } else { (n_max, i) };
            let d_i = family.tiling(cover_level).cover(&plan.region(n_i));
            let fine = family.tiling(i);
            for c in fine.centers_in(&d_i) {
                if prev.is_some_and(|p| p.contains(&c)) {
                    continue;
                }
                tiles.push(PlacedTile { level: fine.level(), center: c });
            }
            prev = Some(d_i);
        }
    }
    Ok(TilePartition { dim: family.dim(), tiles, plan: plan.clone(), n_max, thresholds })
}

/// Writes block `blocks[i]` (indexed relative to its tile's centre) into tile `i`
/// of the partition, and `fill` at every other point of `region`.
pub fn assemble_blocks(
    partition: &TilePartition,
    blocks: &[SequenceWindow],
    fill: Complex64,
    region: BoxRegion,
    domain: Domain,
) -> Result<SequenceWindow> {
    if blocks.len() != partition.len() {
        return Err(Error::Input(format!(
            "{} blocks supplied for {} tiles",
            blocks.len(),
            partition.len()
        )));
    }
    let mut values = vec![fill; region.len()];
    for (tile, block) in partition.tiles().iter().zip(blocks) {
        let shape = BoxRegion::cube(partition.dim(), 1i64 << tile.level);
        if let Some(p) = shape.points().find(|p| block.get(p).is_none()) {
            return Err(Error::Coverage(p));
        }
        for p in shape.points() {
            if let Some(i) = region.index_of(&(p + tile.center)) {
                values[i] = block.get(&p).expect("checked");
            }
        }
    }
    SequenceWindow::new(region, values, domain)
}
