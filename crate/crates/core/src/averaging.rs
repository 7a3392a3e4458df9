//! Finite sequence windows over `Z^d` and their Cesàro / correlation averages.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{BoxRegion, FiniteLatticeSet, LatticePoint};

/// Tolerance for domain membership of stored values.
pub const DOMAIN_TOL: f64 = 1e-12;
/// Looser tolerance used for convex-hull membership.
pub const HULL_TOL: f64 = 1e-9;

/// The compact set `D ⊂ C` a window takes values in.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "points", rename_all = "kebab-case")]
pub enum Domain {
    /// closed unit disc
    Disc,
    /// unit circle
    Circle,
    /// `{0, 1}`
    Binary,
    /// `{-1, 1}`
    Sign,
    /// `[0, 1]`
    UnitInterval,
    /// `[-1, 1]`
    SignedInterval,
    Finite(Vec<Complex64>),
    /// convex hull of a finite set
    Hull(Vec<Complex64>),
}

impl Domain {
    pub fn contains(&self, z: Complex64) -> bool {
        let real = z.im.abs() <= DOMAIN_TOL;
        match self {
            Domain::Disc => z.norm() <= 1.0 + DOMAIN_TOL,
            Domain::Circle => (z.norm() - 1.0).abs() <= DOMAIN_TOL,
            Domain::Binary => real && (z.re.abs() <= DOMAIN_TOL || (z.re - 1.0).abs() <= DOMAIN_TOL),
            Domain::Sign => real && (z.re.abs() - 1.0).abs() <= DOMAIN_TOL,
            Domain::UnitInterval => real && z.re >= -DOMAIN_TOL && z.re <= 1.0 + DOMAIN_TOL,
            Domain::SignedInterval => real && z.re.abs() <= 1.0 + DOMAIN_TOL,
            Domain::Finite(pts) => pts.iter().any(|p| (p - z).norm() <= DOMAIN_TOL),
            Domain::Hull(pts) => in_convex_hull(pts, z, HULL_TOL),
        }
    }

    /// Largest modulus of a point of the domain.
    pub fn radius(&self) -> f64 {
        match self {
            Domain::Finite(pts) | Domain::Hull(pts) => pts.iter().map(|p| p.norm()).fold(0.0, f64::max),
            _ => 1.0,
        }
    }

    /// Finite sample of the domain used to sanity-check polynomial bounds.
    pub fn samples(&self) -> Vec<Complex64> {
        let c = |re: f64| Complex64::new(re, 0.0);
        match self {
            Domain::Disc => {
                let mut v = vec![Complex64::new(0.0, 0.0)];
                for r in [0.25, 0.5, 0.75, 1.0] {
                    v.extend((0..16).map(|k| Complex64::from_polar(r, std::f64::consts::TAU * k as f64 / 16.0)));
                }
                v
            }
            Domain::Circle => (0..32).map(|k| Complex64::from_polar(1.0, std::f64::consts::TAU * k as f64 / 32.0)).collect(),
            Domain::Binary => vec![c(0.0), c(1.0)],
            Domain::Sign => vec![c(-1.0), c(1.0)],
            Domain::UnitInterval => (0..=10).map(|k| c(k as f64 / 10.0)).collect(),
            Domain::SignedInterval => (0..=20).map(|k| c(-1.0 + k as f64 / 10.0)).collect(),
            Domain::Finite(pts) => pts.clone(),
            Domain::Hull(pts) => {
                let mut v = pts.clone();
                for (i, a) in pts.iter().enumerate() {
                    for b in &pts[i + 1..] {
                        v.push((a + b) / 2.0);
                    }
                }
                v
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Domain::Disc => "disc",
            Domain::Circle => "circle",
            Domain::Binary => "binary",
            Domain::Sign => "sign",
            Domain::UnitInterval => "unit-interval",
            Domain::SignedInterval => "signed-interval",
            Domain::Finite(_) => "finite",
            Domain::Hull(_) => "hull",
        }
    }
}

fn cross(o: Complex64, a: Complex64, b: Complex64) -> f64 {
    (a.re - o.re) * (b.im - o.im) - (a.im - o.im) * (b.re - o.re)
}

/// Convex hull in counter-clockwise order (monotone chain). Collinear points dropped.
pub(crate) fn convex_hull(points: &[Complex64]) -> Vec<Complex64> {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    pts.dedup_by(|a, b| (*a - *b).norm() <= DOMAIN_TOL);
    if pts.len() <= 2 {
        return pts;
    }
    let mut hull: Vec<Complex64> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &Complex64>> =
            if pass == 0 { Box::new(pts.iter()) } else { Box::new(pts.iter().rev()) };
        for &p in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull
}

fn dist_to_segment(a: Complex64, b: Complex64, z: Complex64) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_sqr();
    if len2 == 0.0 {
        return (z - a).norm();
    }
    let t = (((z - a) * ab.conj()).re / len2).clamp(0.0, 1.0);
    (a + ab * t - z).norm()
}

pub(crate) fn in_convex_hull(points: &[Complex64], z: Complex64, tol: f64) -> bool {
    let hull = convex_hull(points);
    match hull.len() {
        0 => false,
        1 => (hull[0] - z).norm() <= tol,
        2 => dist_to_segment(hull[0], hull[1], z) <= tol,
        n => {
            let inside = (0..n).all(|i| cross(hull[i], hull[(i + 1) % n], z) >= 0.0);
            inside || (0..n).any(|i| dist_to_segment(hull[i], hull[(i + 1) % n], z) <= tol)
        }
    }
}

/// A complex number written either as a bare real or as `[re, im]`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ComplexRepr {
    Real(f64),
    Pair([f64; 2]),
}

impl From<ComplexRepr> for Complex64 {
    fn from(c: ComplexRepr) -> Self {
        match c {
            ComplexRepr::Real(re) => Complex64::new(re, 0.0),
            ComplexRepr::Pair([re, im]) => Complex64::new(re, im),
        }
    }
}

impl From<Complex64> for ComplexRepr {
    fn from(z: Complex64) -> Self {
        ComplexRepr::Pair([z.re, z.im])
    }
}

/// The most specific built-in domain containing every value.
pub fn infer_domain(values: &[Complex64]) -> Domain {
    for d in [Domain::Binary, Domain::Sign, Domain::UnitInterval, Domain::SignedInterval, Domain::Circle, Domain::Disc] {
        if values.iter().all(|&z| d.contains(z)) {
            return d;
        }
    }
    let mut pts = values.to_vec();
    pts.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    pts.dedup();
    Domain::Finite(pts)
}

/// A finite assignment `g -> z_g` on a box, every point carrying a value in `domain`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SequenceWindow {
    region: BoxRegion,
    values: Vec<Complex64>,
    domain: Domain,
}

impl SequenceWindow {
    pub fn new(region: BoxRegion, values: Vec<Complex64>, domain: Domain) -> Result<Self> {
        if values.len() != region.len() {
            return Err(Error::Input(format!(
                "window over {} points given {} values",
                region.len(),
                values.len()
            )));
        }
        if let Some((i, z)) = values.iter().enumerate().find(|(_, z)| !domain.contains(**z)) {
            return Err(Error::Domain(format!(
                "value {z} at {} is not in the {} domain",
                region.point_at(i),
                domain.name()
            )));
        }
        Ok(SequenceWindow { region, values, domain })
    }

    pub fn from_fn(region: BoxRegion, domain: Domain, mut f: impl FnMut(LatticePoint) -> Complex64) -> Result<Self> {
        let values = region.points().map(&mut f).collect();
        Self::new(region, values, domain)
    }

    pub fn constant(region: BoxRegion, value: Complex64, domain: Domain) -> Result<Self> {
        Self::new(region, vec![value; region.len()], domain)
    }

    pub fn region(&self) -> &BoxRegion {
        &self.region
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn dim(&self) -> usize {
        self.region.dim()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn get(&self, p: &LatticePoint) -> Option<Complex64> {
        self.region.index_of(p).map(|i| self.values[i])
    }

    pub fn value_at(&self, p: &LatticePoint) -> Result<Complex64> {
        self.get(p).ok_or(Error::Coverage(*p))
    }

    pub fn iter(&self) -> impl Iterator<Item = (LatticePoint, Complex64)> + '_ {
        self.region.points().zip(self.values.iter().copied())
    }

    pub fn covers(&self, points: &BoxRegion) -> bool {
        self.region.contains_box(points)
    }

    /// Re-tags the window; fails if some value is outside the new domain.
    pub fn with_domain(self, domain: Domain) -> Result<Self> {
        Self::new(self.region, self.values, domain)
    }

    pub fn map(&self, domain: Domain, f: impl Fn(Complex64) -> Complex64) -> Result<Self> {
        Self::new(self.region, self.values.iter().map(|&z| f(z)).collect(), domain)
    }

    /// Restriction to a sub-box.
    pub fn restrict(&self, region: &BoxRegion) -> Result<Self> {
        if !self.region.contains_box(region) {
            return Err(Error::Coverage(region.lo));
        }
        let values = region.points().map(|p| self.get(&p).expect("covered")).collect();
        Ok(SequenceWindow { region: *region, values, domain: self.domain.clone() })
    }

    pub(crate) fn from_parts_unchecked(region: BoxRegion, values: Vec<Complex64>, domain: Domain) -> Self {
        debug_assert_eq!(region.len(), values.len());
        SequenceWindow { region, values, domain }
    }
}

/// One term `c * Π_i z_i^{a_i} conj(z_i)^{b_i}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub coef: Complex64,
    pub exps: Vec<(u32, u32)>,
}

#[derive(Serialize, Deserialize)]
struct RawPoly {
    terms: Vec<Term>,
    #[serde(default)]
    sup_bound: Option<f64>,
    #[serde(default)]
    arity: Option<usize>,
}

/// A polynomial in `z_1..z_j` and their conjugates, with a declared sup bound.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPoly", into = "RawPoly")]
pub struct StarPolynomial {
    arity: usize,
    terms: Vec<Term>,
    sup_bound: f64,
}

impl TryFrom<RawPoly> for StarPolynomial {
    type Error = Error;
    fn try_from(raw: RawPoly) -> Result<Self> {
        let arity = match (raw.arity, raw.terms.first()) {
            (Some(a), _) => a,
            (None, Some(t)) => t.exps.len(),
            (None, None) => return Err(Error::Input("polynomial without terms needs an arity".into())),
        };
        let bound = raw
            .sup_bound
            .unwrap_or_else(|| raw.terms.iter().map(|t| t.coef.norm()).sum());
        StarPolynomial::new(arity, raw.terms, bound)
    }
}

impl From<StarPolynomial> for RawPoly {
    fn from(p: StarPolynomial) -> Self {
        RawPoly { terms: p.terms, sup_bound: Some(p.sup_bound), arity: Some(p.arity) }
    }
}

impl StarPolynomial {
    pub fn new(arity: usize, terms: Vec<Term>, sup_bound: f64) -> Result<Self> {
        if arity == 0 {
            return Err(Error::Input("polynomial arity must be at least 1".into()));
        }
        if let Some(t) = terms.iter().find(|t| t.exps.len() != arity) {
            return Err(Error::Input(format!(
                "term has {} exponent slots, polynomial arity is {arity}",
                t.exps.len()
            )));
        }
        if !(sup_bound.is_finite() && sup_bound >= 0.0) {
            return Err(Error::Input(format!("invalid sup bound {sup_bound}")));
        }
        Ok(StarPolynomial { arity, terms, sup_bound })
    }

    /// Bound from the triangle inequality over a domain of radius `r`.
    pub fn triangle_bound(terms: &[Term], radius: f64) -> f64 {
        terms
            .iter()
            .map(|t| t.coef.norm() * radius.powi(t.exps.iter().map(|(a, b)| (a + b) as i32).sum()))
            .sum()
    }

    pub fn with_triangle_bound(arity: usize, terms: Vec<Term>, domain: &Domain) -> Result<Self> {
        let bound = Self::triangle_bound(&terms, domain.radius());
        Self::new(arity, terms, bound)
    }

    /// `Π_i z_i^{a_i} conj(z_i)^{b_i}` with bound 1 (for domains inside the unit disc).
    pub fn monomial(exps: Vec<(u32, u32)>) -> Self {
        let arity = exps.len();
        Self::new(arity, vec![Term { coef: Complex64::new(1.0, 0.0), exps }], 1.0).expect("valid monomial")
    }

    /// `p(z) = z`.
    pub fn identity() -> Self {
        Self::monomial(vec![(1, 0)])
    }

    /// `p(z_1, z_2) = z_1 conj(z_2)`.
    pub fn correlation() -> Self {
        Self::monomial(vec![(1, 0), (0, 1)])
    }

    /// `p(z_1, .., z_j) = z_1 ⋯ z_j`.
    pub fn product(arity: usize) -> Self {
        Self::monomial(vec![(1, 0); arity])
    }

    pub fn constant(c: Complex64) -> Self {
        Self::new(1, vec![Term { coef: c, exps: vec![(0, 0)] }], c.norm()).expect("valid constant")
    }

    /// `Π_i p_{ε_i}(z_i)` with `p_1(x) = x`, `p_0(x) = 1 - x`, expanded into monomials.
    pub fn indicator_pattern(keeps: &[bool]) -> Self {
        let mut terms = vec![Term { coef: Complex64::new(1.0, 0.0), exps: vec![(0, 0); keeps.len()] }];
        for (slot, &keep) in keeps.iter().enumerate() {
            let mut next = Vec::with_capacity(terms.len() * 2);
            for t in terms {
                let mut with_z = t.clone();
                with_z.exps[slot] = (1, 0);
                if keep {
                    next.push(with_z);
                } else {
                    with_z.coef = -with_z.coef;
                    next.push(t);
                    next.push(with_z);
                }
            }
            terms = next;
        }
        Self::new(keeps.len(), terms, 1.0).expect("valid pattern")
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn sup_bound(&self) -> f64 {
        self.sup_bound
    }

    pub fn scale(&self, c: Complex64) -> Self {
        let terms = self.terms.iter().map(|t| Term { coef: t.coef * c, exps: t.exps.clone() }).collect();
        StarPolynomial { arity: self.arity, terms, sup_bound: self.sup_bound * c.norm() }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.arity != other.arity {
            return Err(Error::Input("cannot add polynomials of different arity".into()));
        }
        let terms = self.terms.iter().chain(other.terms.iter()).cloned().collect();
        Self::new(self.arity, terms, self.sup_bound + other.sup_bound)
    }

    pub fn eval(&self, z: &[Complex64]) -> Complex64 {
        debug_assert_eq!(z.len(), self.arity);
        self.terms
            .iter()
            .map(|t| {
                t.exps.iter().zip(z).fold(t.coef, |acc, (&(a, b), &zi)| {
                    let mut v = acc;
                    if a > 0 {
                        v *= zi.powu(a);
                    }
                    if b > 0 {
                        v *= zi.conj().powu(b);
                    }
                    v
                })
            })
            .sum()
    }

    /// Largest `|p|` over a finite sample of `domain^arity`.
    pub fn sampled_sup(&self, domain: &Domain) -> f64 {
        const MAX_TUPLES: usize = 20_000;
        let samples = domain.samples();
        let n = samples.len();
        let total = (n as f64).powi(self.arity as i32);
        let mut buf = vec![Complex64::new(0.0, 0.0); self.arity];
        let mut best = 0.0f64;
        if total <= MAX_TUPLES as f64 {
            for mut idx in 0..total as usize {
                for slot in buf.iter_mut() {
                    *slot = samples[idx % n];
                    idx /= n;
                }
                best = best.max(self.eval(&buf).norm());
            }
        } else {
            // xorshift64 walk over tuples, deterministic
            let mut state = 0x9E37_79B9_7F4A_7C15u64;
            for _ in 0..MAX_TUPLES {
                for slot in buf.iter_mut() {
                    state ^= state << 13;
                    state ^= state >> 7;
                    state ^= state << 17;
                    *slot = samples[(state % n as u64) as usize];
                }
                best = best.max(self.eval(&buf).norm());
            }
        }
        best
    }

    pub fn check_bound(&self, domain: &Domain) -> Result<()> {
        let sup = self.sampled_sup(domain);
        if sup > self.sup_bound + 1e-9 {
            return Err(Error::Input(format!(
                "declared sup bound {} is below the sampled sup {sup} on the {} domain",
                self.sup_bound,
                domain.name()
            )));
        }
        Ok(())
    }
}

/// One correlation statistic `(1/|F|) Σ_g p(z_{h_1+g}, .., z_{h_j+g})` with an optional target.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationEntry {
    pub shifts: Vec<LatticePoint>,
    pub poly: StarPolynomial,
    #[serde(default, skip_serializing_if = "Option::is_none", deserialize_with = "de_opt_complex")]
    pub target: Option<Complex64>,
    #[serde(default)]
    pub distinct: bool,
}

fn de_opt_complex<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Option<Complex64>, D::Error> {
    Ok(Option::<ComplexRepr>::deserialize(d)?.map(Complex64::from))
}

impl CorrelationEntry {
    pub fn new(shifts: Vec<LatticePoint>, poly: StarPolynomial) -> Result<Self> {
        let e = CorrelationEntry { shifts, poly, target: None, distinct: false };
        e.validate()?;
        Ok(e)
    }

    /// Entry whose shifts must be pairwise distinct.
    pub fn distinct(shifts: Vec<LatticePoint>, poly: StarPolynomial) -> Result<Self> {
        let e = CorrelationEntry { shifts, poly, target: None, distinct: true };
        e.validate()?;
        Ok(e)
    }

    pub fn with_target(mut self, target: Complex64) -> Self {
        self.target = Some(target);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.shifts.len() != self.poly.arity() {
            return Err(Error::Input(format!(
                "{} shifts given for a polynomial of arity {}",
                self.shifts.len(),
                self.poly.arity()
            )));
        }
        if let Some(first) = self.shifts.first() {
            if let Some(bad) = self.shifts.iter().find(|s| s.dim() != first.dim()) {
                return Err(Error::Dimension { expected: first.dim(), found: bad.dim() });
            }
        }
        if self.distinct {
            for (i, a) in self.shifts.iter().enumerate() {
                if self.shifts[i + 1..].contains(a) {
                    return Err(Error::Input(format!("shift {a} repeated in a distinct-mode entry")));
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> Option<usize> {
        self.shifts.first().map(|s| s.dim())
    }

    /// `p(z_{h_1+g}, ..)` at a single base point.
    pub fn eval_at(&self, w: &SequenceWindow, g: LatticePoint, buf: &mut Vec<Complex64>) -> Result<Complex64> {
        buf.clear();
        for &h in &self.shifts {
            buf.push(w.value_at(&(h + g))?);
        }
        Ok(self.poly.eval(buf))
    }
}

/// The list of entries of a correlation specification.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CorrelationSpec {
    pub entries: Vec<CorrelationEntry>,
}

impl CorrelationSpec {
    pub fn new(entries: Vec<CorrelationEntry>) -> Result<Self> {
        for e in &entries {
            e.validate()?;
        }
        Ok(CorrelationSpec { entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Every shift used by some entry, deduplicated.
    pub fn all_shifts(&self) -> Vec<LatticePoint> {
        let mut v: Vec<LatticePoint> = self.entries.iter().flat_map(|e| e.shifts.iter().copied()).collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    pub fn max_sup_bound(&self) -> f64 {
        self.entries.iter().map(|e| e.poly.sup_bound()).fold(0.0, f64::max)
    }

    pub fn check_bounds(&self, domain: &Domain) -> Result<()> {
        self.entries.iter().try_for_each(|e| e.poly.check_bound(domain))
    }
}

/// Pairwise (cascade) summation with a fixed split, so results are bit-stable.
pub fn pairwise_sum(xs: &[Complex64]) -> Complex64 {
    const BASE: usize = 64;
    if xs.len() <= BASE {
        return xs.iter().fold(Complex64::new(0.0, 0.0), |acc, &x| acc + x);
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

pub fn pairwise_sum_real(xs: &[f64]) -> f64 {
    const BASE: usize = 64;
    if xs.len() <= BASE {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum_real(&xs[..mid]) + pairwise_sum_real(&xs[mid..])
}

fn average_over(
    w: &SequenceWindow,
    e: &CorrelationEntry,
    points: impl Iterator<Item = LatticePoint>,
    count: usize,
) -> Result<Complex64> {
    if count == 0 {
        return Err(Error::Input("average over an empty set".into()));
    }
    let mut buf = Vec::with_capacity(e.shifts.len());
    let mut terms = Vec::with_capacity(count);
    for g in points {
        terms.push(e.eval_at(w, g, &mut buf)?);
    }
    Ok(pairwise_sum(&terms) / count as f64)
}

/// `(1/|F|) Σ_{g∈F} p(z_{h_1+g}, .., z_{h_j+g})`.
pub fn cesaro_correlation(w: &SequenceWindow, e: &CorrelationEntry, f: &FiniteLatticeSet) -> Result<Complex64> {
    average_over(w, e, f.iter().copied(), f.len())
}

/// Same as [`cesaro_correlation`] with `F` given as a box.
pub fn cesaro_correlation_region(w: &SequenceWindow, e: &CorrelationEntry, f: &BoxRegion) -> Result<Complex64> {
    average_over(w, e, f.points(), f.len())
}

/// Plain mean `(1/|F|) Σ_{g∈F} z_g`.
pub fn window_mean(w: &SequenceWindow, f: &BoxRegion) -> Result<Complex64> {
    let e = CorrelationEntry::new(vec![LatticePoint::origin(w.dim())], StarPolynomial::identity())?;
    cesaro_correlation_region(w, &e, f)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeylReport {
    pub pass: bool,
    /// `l` that maximises the power-sum modulus (smallest on ties)
    pub worst_l: usize,
    pub worst_value: f64,
    pub first_failure: Option<usize>,
    /// `|avg z^l|` for `l = 1..=l_max`
    pub values: Vec<f64>,
    pub tol: f64,
}

/// Weyl's criterion at finite scale: `|(1/|F|) Σ z_g^l| <= tol` for `1 <= l <= l_max`.
pub fn weyl_ud_test(w: &SequenceWindow, l_max: usize, f: &FiniteLatticeSet, tol: f64) -> Result<WeylReport> {
    if *w.domain() != Domain::Circle {
        return Err(Error::Domain(format!("Weyl test needs a circle window, got {}", w.domain().name())));
    }
    if l_max == 0 {
        return Err(Error::Input("l_max must be at least 1".into()));
    }
    let origin = LatticePoint::origin(w.dim());
    let mut values = Vec::with_capacity(l_max);
    for l in 1..=l_max {
        let e = CorrelationEntry::new(vec![origin], StarPolynomial::monomial(vec![(l as u32, 0)]))?;
        values.push(cesaro_correlation(w, &e, f)?.norm());
    }
    let (worst_idx, worst_value) = values
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) });
    let first_failure = values.iter().position(|&v| v > tol).map(|i| i + 1);
    Ok(WeylReport { pass: first_failure.is_none(), worst_l: worst_idx + 1, worst_value, first_failure, values, tol })
}

/// A shift `h` together with the keep (`ε = 1`) / complement (`ε = 0`) flag.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SetShift {
    pub shift: LatticePoint,
    pub keep: bool,
}

impl SetShift {
    pub fn keep(shift: LatticePoint) -> Self {
        SetShift { shift, keep: true }
    }
    pub fn complement(shift: LatticePoint) -> Self {
        SetShift { shift, keep: false }
    }
}

/// `|F ∩ ⋂_i (A - h_i)^{ε_i}| / |F|`, complements taken inside `universe`.
pub fn set_density(
    a: &FiniteLatticeSet,
    universe: &BoxRegion,
    shifts: &[SetShift],
    f: &FiniteLatticeSet,
) -> Result<f64> {
    density_over(a, universe, shifts, f.iter().copied(), f.len())
}

pub fn set_density_region(a: &FiniteLatticeSet, universe: &BoxRegion, shifts: &[SetShift], f: &BoxRegion) -> Result<f64> {
    density_over(a, universe, shifts, f.points(), f.len())
}

fn density_over(
    a: &FiniteLatticeSet,
    universe: &BoxRegion,
    shifts: &[SetShift],
    points: impl Iterator<Item = LatticePoint>,
    count: usize,
) -> Result<f64> {
    if count == 0 {
        return Err(Error::Input("density over an empty set".into()));
    }
    if let Some(p) = a.iter().find(|p| !universe.contains(p)) {
        return Err(Error::Input(format!("set point {p} lies outside the declared universe")));
    }
    let mut hits = 0usize;
    for g in points {
        let mut all = true;
        for s in shifts {
            let q = s.shift + g;
            if !universe.contains(&q) {
                return Err(Error::Coverage(q));
            }
            if a.contains(&q) != s.keep {
                all = false;
            }
        }
        if all {
            hits += 1;
        }
    }
    Ok(hits as f64 / count as f64)
}

/// Best density of `A` over all boxes of side `side` lying inside `window`.
pub fn banach_density_estimate(a: &FiniteLatticeSet, window: &BoxRegion, side: usize) -> Result<f64> {
    let dim = window.dim();
    if side == 0 || (0..dim).any(|ax| window.extent(ax) < side as i64) {
        return Err(Error::Input(format!("sub-box side {side} does not fit in the window")));
    }
    // summed-area table with one padding row per axis
    let ext: Vec<usize> = (0..dim).map(|ax| window.extent(ax) as usize + 1).collect();
    let total: usize = ext.iter().product();
    let mut table = vec![0i64; total];
    let flat = |idx: &[usize]| idx.iter().zip(&ext).fold(0usize, |acc, (&i, &e)| acc * e + i);
    for p in a.iter().filter(|p| window.contains(p)) {
        let idx: Vec<usize> = (0..dim).map(|ax| (p.coord(ax) - window.lo.coord(ax)) as usize + 1).collect();
        table[flat(&idx)] += 1;
    }
    let mut stride = 1usize;
    for ax in (0..dim).rev() {
        for i in 0..total {
            if !(i / stride).is_multiple_of(ext[ax]) {
                table[i] += table[i - stride];
            }
        }
        stride *= ext[ax];
    }
    let l = side;
    let counts: Vec<usize> = (0..dim).map(|ax| ext[ax] - l).collect();
    let n_boxes: usize = counts.iter().product();
    let volume = (l as f64).powi(dim as i32);
    let mut best = 0i64;
    let mut corner = vec![0usize; dim];
    for mut b in 0..n_boxes {
        for ax in (0..dim).rev() {
            corner[ax] = b % counts[ax];
            b /= counts[ax];
        }
        let mut s = 0i64;
        for mask in 0..(1usize << dim) {
            let mut idx = vec![0usize; dim];
            let mut sign = 1i64;
            for ax in 0..dim {
                if mask & (1 << ax) != 0 {
                    idx[ax] = corner[ax] + l;
                } else {
                    idx[ax] = corner[ax];
                    sign = -sign;
                }
            }
            s += sign * table[flat(&idx)];
        }
        best = best.max(s);
    }
    Ok(best as f64 / volume)
}

/// Finite proxy of `limsup_{h∈H} x_h`, reported with the truncation used.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimsupProxy {
    pub value: f64,
    pub truncation: usize,
}

/// `min_{k <= truncation} sup_{i >= k} values[i]`.
pub fn limsup_over_h(values: &[f64], truncation: usize) -> Result<LimsupProxy> {
    if truncation >= values.len() {
        return Err(Error::Input(format!(
            "truncation {truncation} must be smaller than the number of values {}",
            values.len()
        )));
    }
    let mut suffix = vec![f64::NEG_INFINITY; values.len() + 1];
    for i in (0..values.len()).rev() {
        suffix[i] = suffix[i + 1].max(values[i]);
    }
    let value = suffix[..=truncation].iter().copied().fold(f64::INFINITY, f64::min);
    Ok(LimsupProxy { value, truncation })
}

/// One row of an averaging report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AverageReport {
    pub statistic: String,
    #[serde(rename = "F_index")]
    pub f_index: usize,
    pub value_re: f64,
    pub value_im: f64,
    pub tol: f64,
    pub pass: bool,
}

impl AverageReport {
    pub fn new(statistic: impl Into<String>, f_index: usize, value: Complex64, tol: f64) -> Self {
        AverageReport {
            statistic: statistic.into(),
            f_index,
            value_re: value.re,
            value_im: value.im,
            tol,
            pass: value.norm() <= tol,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{folner_box, FolnerPlan};
    use std::f64::consts::TAU;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn rotation_window(n: i64, alpha: f64) -> SequenceWindow {
        SequenceWindow::from_fn(BoxRegion::interval(0, n), Domain::Circle, |p| {
            Complex64::from_polar(1.0, TAU * ((p.coord(0) as f64 * alpha).fract()))
        })
        .unwrap()
    }

    #[test]
    fn constant_window_mean() {
        let z = Complex64::new(0.3, -0.4);
        let w = SequenceWindow::constant(BoxRegion::interval(-5, 20), z, Domain::Disc).unwrap();
        let e = CorrelationEntry::new(vec![LatticePoint::d1(0)], StarPolynomial::identity()).unwrap();
        let f = FiniteLatticeSet::from_ints([-3, 0, 7, 11]);
        assert!((cesaro_correlation(&w, &e, &f).unwrap() - z).norm() < 1e-15);
    }

    #[test]
    fn alternating_shift_product_is_minus_one() {
        let w = SequenceWindow::from_fn(BoxRegion::interval(0, 101), Domain::Sign, |p| {
            c(if p.coord(0) % 2 == 0 { 1.0 } else { -1.0 })
        })
        .unwrap();
        let e = CorrelationEntry::new(vec![LatticePoint::d1(0), LatticePoint::d1(1)], StarPolynomial::product(2)).unwrap();
        let f = folner_box(&FolnerPlan::anchored(1), 100).unwrap();
        assert_eq!(cesaro_correlation(&w, &e, &f).unwrap(), c(-1.0));
    }

    #[test]
    fn irrational_rotation_mean_obeys_geometric_bound() {
        let alpha = 2f64.sqrt() - 1.0;
        let n = 100_000;
        let w = rotation_window(n, alpha);
        let mean = window_mean(&w, &BoxRegion::interval(0, n)).unwrap().norm();
        let bound = 1.0 / (n as f64 * (std::f64::consts::PI * alpha).sin());
        assert!(bound <= 1.1e-5);
        assert!(mean <= bound * (1.0 + 1e-6), "{mean} > {bound}");
    }

    #[test]
    fn coverage_error_reports_missing_point() {
        let w = SequenceWindow::constant(BoxRegion::interval(0, 10), c(1.0), Domain::Binary).unwrap();
        let e = CorrelationEntry::new(vec![LatticePoint::d1(0), LatticePoint::d1(1)], StarPolynomial::product(2)).unwrap();
        let f = FiniteLatticeSet::from_ints(0..10);
        match cesaro_correlation(&w, &e, &f) {
            Err(Error::Coverage(p)) => assert_eq!(p, LatticePoint::d1(10)),
            other => panic!("expected coverage error, got {other:?}"),
        }
    }

    #[test]
    fn weyl_examples() {
        let n = 100_000i64;
        let f = folner_box(&FolnerPlan::anchored(1), n as usize).unwrap();
        let rot = rotation_window(n, 2f64.sqrt() - 1.0);
        let rep = weyl_ud_test(&rot, 8, &f, 0.01).unwrap();
        assert!(rep.pass);
        for (i, v) in rep.values.iter().enumerate() {
            let l = (i + 1) as f64;
            let bound = 1.0 / (n as f64 * (std::f64::consts::PI * l * (2f64.sqrt() - 1.0)).sin().abs());
            assert!(*v <= bound * (1.0 + 1e-6));
        }

        let ones = SequenceWindow::constant(BoxRegion::interval(0, 100), c(1.0), Domain::Circle).unwrap();
        let f100 = FiniteLatticeSet::from_ints(0..100);
        let rep = weyl_ud_test(&ones, 5, &f100, 0.01).unwrap();
        assert!(!rep.pass);
        assert_eq!((rep.worst_l, rep.first_failure), (1, Some(1)));
        assert!((rep.worst_value - 1.0).abs() < 1e-12);

        let quarter = SequenceWindow::from_fn(BoxRegion::interval(0, 100), Domain::Circle, |p| {
            Complex64::new(0.0, 1.0).powu(p.coord(0) as u32)
        })
        .unwrap();
        let rep = weyl_ud_test(&quarter, 4, &f100, 0.01).unwrap();
        assert_eq!((rep.worst_l, rep.first_failure), (4, Some(4)));
        assert!((rep.worst_value - 1.0).abs() < 1e-12);

        let disc = ones.clone().with_domain(Domain::Disc).unwrap();
        assert!(matches!(weyl_ud_test(&disc, 2, &f100, 0.1), Err(Error::Domain(_))));
    }

    #[test]
    fn rotation_keeps_power_moduli() {
        let w = rotation_window(5000, 0.1234567);
        let omega = Complex64::from_polar(1.0, 1.1);
        let rotated = w.map(Domain::Circle, |z| z * omega).unwrap();
        let f = FiniteLatticeSet::from_ints(0..5000);
        let a = weyl_ud_test(&w, 6, &f, 0.1).unwrap();
        let b = weyl_ud_test(&rotated, 6, &f, 0.1).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn densities_of_evens() {
        let universe = BoxRegion::interval(0, 110);
        let evens = FiniteLatticeSet::from_ints((0..110).filter(|x| x % 2 == 0));
        let f = FiniteLatticeSet::from_ints(0..100);
        let d = |shifts: &[SetShift]| set_density(&evens, &universe, shifts, &f).unwrap();
        assert_eq!(d(&[SetShift::keep(LatticePoint::d1(0))]), 0.5);
        assert_eq!(d(&[SetShift::keep(LatticePoint::d1(0)), SetShift::keep(LatticePoint::d1(1))]), 0.0);
        assert_eq!(d(&[SetShift::keep(LatticePoint::d1(0)), SetShift::keep(LatticePoint::d1(2))]), 0.5);
        assert_eq!(d(&[SetShift::complement(LatticePoint::d1(0)), SetShift::keep(LatticePoint::d1(1))]), 0.5);
        let far = [SetShift::keep(LatticePoint::d1(20))];
        assert!(matches!(set_density(&evens, &universe, &far, &f), Err(Error::Coverage(_))));
    }

    #[test]
    fn density_matches_indicator_polynomial() {
        let universe = BoxRegion::interval(0, 64);
        let a = FiniteLatticeSet::from_ints((0..64).filter(|x| (x * x + 3 * x) % 5 < 2));
        let ind = SequenceWindow::from_fn(universe, Domain::Binary, |p| c(if a.contains(&p) { 1.0 } else { 0.0 })).unwrap();
        let f = FiniteLatticeSet::from_ints(0..50);
        let shifts = [SetShift::keep(LatticePoint::d1(0)), SetShift::complement(LatticePoint::d1(3)), SetShift::keep(LatticePoint::d1(7))];
        let dens = set_density(&a, &universe, &shifts, &f).unwrap();
        let e = CorrelationEntry::new(
            shifts.iter().map(|s| s.shift).collect(),
            StarPolynomial::indicator_pattern(&shifts.iter().map(|s| s.keep).collect::<Vec<_>>()),
        )
        .unwrap();
        let via_poly = cesaro_correlation(&ind, &e, &f).unwrap();
        assert!((via_poly.re - dens).abs() < 1e-12 && via_poly.im.abs() < 1e-12);
    }

    #[test]
    fn banach_density_examples() {
        let window = BoxRegion::interval(0, 400);
        let all = window.to_set();
        assert_eq!(banach_density_estimate(&all, &window, 16).unwrap(), 1.0);
        let periodic = FiniteLatticeSet::from_ints((0..400).filter(|x| x % 4 < 2));
        assert_eq!(banach_density_estimate(&periodic, &window, 8).unwrap(), 0.5);
        let block = FiniteLatticeSet::from_ints((0..400).filter(|x| (100..120).contains(x) || x % 50 == 0));
        assert_eq!(banach_density_estimate(&block, &window, 20).unwrap(), 1.0);

        let w2 = BoxRegion::cube(2, 12);
        let corner = FiniteLatticeSet::new(2, BoxRegion::cube(2, 3).translate(LatticePoint::d2(5, 7)).points()).unwrap();
        assert_eq!(banach_density_estimate(&corner, &w2, 3).unwrap(), 1.0);
        assert!((banach_density_estimate(&corner, &w2, 4).unwrap() - 9.0 / 16.0).abs() < 1e-15);
        assert!(banach_density_estimate(&corner, &w2, 13).is_err());
    }

    #[test]
    fn limsup_examples() {
        let inv: Vec<f64> = (1..=1000).map(|h| 1.0 / h as f64).collect();
        let r = limsup_over_h(&inv, 100).unwrap();
        assert_eq!(r, LimsupProxy { value: 1.0 / 101.0, truncation: 100 });
        assert_eq!(limsup_over_h(&[0.7; 20], 5).unwrap().value, 0.7);
        let alt: Vec<f64> = (0..50).map(|i| (i % 2) as f64).collect();
        assert_eq!(limsup_over_h(&alt, 40).unwrap().value, 1.0);
        assert!(limsup_over_h(&alt, 50).is_err());
    }

    #[test]
    fn indicator_pattern_values() {
        let p = StarPolynomial::indicator_pattern(&[true, false, false]);
        for bits in 0..8u32 {
            let z: Vec<Complex64> = (0..3).map(|i| c(((bits >> i) & 1) as f64)).collect();
            let want = if bits == 1 { 1.0 } else { 0.0 };
            assert!((p.eval(&z) - c(want)).norm() < 1e-15);
        }
        assert!(p.check_bound(&Domain::Binary).is_ok());
    }

    #[test]
    fn sup_bound_check_rejects_understated_bounds() {
        let terms = vec![Term { coef: c(2.0), exps: vec![(1, 0), (0, 1)] }];
        let p = StarPolynomial::new(2, terms.clone(), 1.0).unwrap();
        assert!(p.check_bound(&Domain::Circle).is_err());
        let q = StarPolynomial::with_triangle_bound(2, terms, &Domain::Circle).unwrap();
        assert!(q.check_bound(&Domain::Circle).is_ok());
    }

    #[test]
    fn hull_membership() {
        let tri = vec![c(0.0), c(1.0), Complex64::new(0.0, 1.0)];
        let d = Domain::Hull(tri);
        assert!(d.contains(Complex64::new(0.3, 0.3)));
        assert!(d.contains(Complex64::new(0.5, 0.5)));
        assert!(!d.contains(Complex64::new(0.6, 0.6)));
        let seg = Domain::Hull(vec![c(-1.0), c(1.0)]);
        assert!(seg.contains(c(0.2)) && !seg.contains(Complex64::new(0.2, 0.01)));
    }

    #[test]
    fn window_rejects_out_of_domain_values() {
        let r = SequenceWindow::new(BoxRegion::interval(0, 2), vec![c(0.0), c(0.5)], Domain::Binary);
        assert!(matches!(r, Err(Error::Domain(_))));
    }

    #[test]
    fn spec_json_shape() {
        let js = r#"{"entries":[{"shifts":[[0],[1]],"poly":{"terms":[{"coef":[1.0,0.0],"exps":[[1,0],[0,1]]}]},"target":[0.0,0.0]}]}"#;
        let spec: CorrelationSpec = serde_json::from_str(js).unwrap();
        assert_eq!(spec.entries[0].poly, StarPolynomial::correlation());
        assert_eq!(spec.entries[0].target, Some(c(0.0)));
        let js = r#"{"entries":[{"shifts":[[0]],"poly":{"terms":[{"coef":[1.0,0.0],"exps":[[1,0]]}]},"target":0.5}]}"#;
        let spec: CorrelationSpec = serde_json::from_str(js).unwrap();
        assert_eq!(spec.entries[0].target, Some(c(0.5)));
    }
}
