//! Finite measure-preserving systems, finitistic witnesses, sequence synthesis
//! along dyadic tilings, and the inverse correspondence principle.

use std::collections::HashMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::averaging::{
    cesaro_correlation_region, infer_domain, pairwise_sum, set_density_region, ComplexRepr, CorrelationEntry,
    CorrelationSpec, Domain, SequenceWindow, SetShift, StarPolynomial,
};
use crate::error::{Error, Result};
use crate::lattice::{BoxRegion, FiniteLatticeSet, FolnerPlan, LatticePoint};
use crate::randomization::{BernoulliGenerator, SeededRng};
use crate::tiling::{assemble_blocks, congruent_partition, CongruentFamily, TilePartition};

/// Largest denominator tried when rationalizing weights.
pub const MAX_DENOMINATOR: u64 = 10_000;

#[derive(Clone, Debug, PartialEq)]
struct Cycles {
    /// cycle index of each state
    cycle_of: Vec<usize>,
    /// position of each state within its cycle
    pos: Vec<usize>,
    cycles: Vec<Vec<usize>>,
}

impl Cycles {
    fn of(perm: &[usize]) -> Self {
        let n = perm.len();
        let mut cycle_of = vec![usize::MAX; n];
        let mut pos = vec![0; n];
        let mut cycles = Vec::new();
        for start in 0..n {
            if cycle_of[start] != usize::MAX {
                continue;
            }
            let mut cyc = Vec::new();
            let mut x = start;
            while cycle_of[x] == usize::MAX {
                cycle_of[x] = cycles.len();
                pos[x] = cyc.len();
                cyc.push(x);
                x = perm[x];
            }
            cycles.push(cyc);
        }
        Cycles { cycle_of, pos, cycles }
    }

    fn power(&self, x: usize, n: i64) -> usize {
        let cyc = &self.cycles[self.cycle_of[x]];
        let len = cyc.len() as i64;
        cyc[(self.pos[x] as i64 + n).rem_euclid(len) as usize]
    }
}

/// A finite probability space with `d` commuting weight-preserving permutations
/// and a bounded observable.
#[derive(Clone, Debug, PartialEq)]
pub struct FiniteMps {
    weights: Vec<f64>,
    generators: Vec<Vec<usize>>,
    observable: Vec<Complex64>,
    domain: Domain,
    cycles: Vec<Cycles>,
}

#[derive(Serialize, Deserialize)]
struct RawMps {
    weights: Vec<f64>,
    generators: Vec<Vec<usize>>,
    observable: Vec<ComplexRepr>,
    #[serde(default)]
    domain: Option<Domain>,
}

impl Serialize for FiniteMps {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        RawMps {
            weights: self.weights.clone(),
            generators: self.generators.clone(),
            observable: self.observable.iter().map(|&z| z.into()).collect(),
            domain: Some(self.domain.clone()),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for FiniteMps {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = RawMps::deserialize(d)?;
        let observable: Vec<Complex64> = raw.observable.into_iter().map(Complex64::from).collect();
        let domain = raw.domain.unwrap_or_else(|| infer_domain(&observable));
        FiniteMps::new(raw.weights, raw.generators, observable, domain).map_err(serde::de::Error::custom)
    }
}

impl FiniteMps {
    pub fn new(weights: Vec<f64>, generators: Vec<Vec<usize>>, observable: Vec<Complex64>, domain: Domain) -> Result<Self> {
        let n = weights.len();
        if n == 0 {
            return Err(Error::System("the state space is empty".into()));
        }
        if !(1..=3).contains(&generators.len()) {
            return Err(Error::System(format!("{} generators given, expected 1..=3", generators.len())));
        }
        if observable.len() != n {
            return Err(Error::System(format!("observable has {} values for {n} states", observable.len())));
        }
        if weights.iter().any(|&w| !(w >= 0.0)) {
            return Err(Error::System("weights must be nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::System(format!("weights sum to {total}, not 1")));
        }
        for (i, g) in generators.iter().enumerate() {
            let mut hit = vec![false; n];
            if g.len() != n || g.iter().any(|&y| y >= n || std::mem::replace(&mut hit[y], true)) {
                return Err(Error::System(format!("generator {i} is not a permutation of the {n} states")));
            }
            if let Some(x) = (0..n).find(|&x| weights[g[x]] != weights[x]) {
                return Err(Error::System(format!("generator {i} moves state {x} to a state of different weight")));
            }
        }
        for (i, a) in generators.iter().enumerate() {
            for b in &generators[i + 1..] {
                if (0..n).any(|x| a[b[x]] != b[a[x]]) {
                    return Err(Error::System("generators do not commute".into()));
                }
            }
        }
        if let Some(x) = (0..n).find(|&x| !domain.contains(observable[x])) {
            return Err(Error::Domain(format!(
                "observable value {} at state {x} is outside the {} domain",
                observable[x],
                domain.name()
            )));
        }
        let cycles = generators.iter().map(|g| Cycles::of(g)).collect();
        Ok(FiniteMps { weights, generators, observable, domain, cycles })
    }

    /// `Z_q` with uniform weights and the rotation `x -> x + 1 mod q`.
    pub fn rotation(q: usize, observable: Vec<Complex64>) -> Result<Self> {
        if q == 0 {
            return Err(Error::System("rotation needs at least one state".into()));
        }
        let domain = infer_domain(&observable);
        Self::new(vec![1.0 / q as f64; q], vec![(0..q).map(|x| (x + 1) % q).collect()], observable, domain)
    }

    /// Rotation of `Z_q` with the indicator of the states in `set` as observable.
    pub fn rotation_indicator(q: usize, set: &[usize]) -> Result<Self> {
        let f = (0..q).map(|x| Complex64::new(if set.contains(&x) { 1.0 } else { 0.0 }, 0.0)).collect();
        let m = Self::rotation(q, f)?;
        Self::new(m.weights, m.generators, m.observable, Domain::Binary)
    }

    /// Trivial action of `Z^dim`.
    pub fn identity(dim: usize, weights: Vec<f64>, observable: Vec<Complex64>, domain: Domain) -> Result<Self> {
        let n = weights.len();
        Self::new(weights, vec![(0..n).collect(); dim], observable, domain)
    }

    /// One-point system with `f == c`.
    pub fn constant(dim: usize, c: Complex64) -> Result<Self> {
        Self::identity(dim, vec![1.0], vec![c], infer_domain(&[c]))
    }

    pub fn dim(&self) -> usize {
        self.generators.len()
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn generators(&self) -> &[Vec<usize>] {
        &self.generators
    }

    pub fn observable(&self) -> &[Complex64] {
        &self.observable
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn bound(&self) -> f64 {
        self.observable.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// `T_h x`.
    pub fn apply(&self, h: &LatticePoint, x: usize) -> usize {
        debug_assert_eq!(h.dim(), self.dim());
        (0..self.dim()).fold(x, |y, ax| self.cycles[ax].power(y, h.coord(ax)))
    }

    /// `f(T_h x)`.
    pub fn observe(&self, h: &LatticePoint, x: usize) -> Complex64 {
        self.observable[self.apply(h, x)]
    }

    pub fn mean(&self) -> Complex64 {
        pairwise_sum(&self.weights.iter().zip(&self.observable).map(|(&w, &f)| f * w).collect::<Vec<_>>())
    }

    /// `Σ_x w(x) φ(T_h x)` for an arbitrary function of the state.
    pub fn integrate_shifted(&self, h: &LatticePoint, phi: impl Fn(usize) -> f64) -> f64 {
        self.weights.iter().enumerate().map(|(x, &w)| w * phi(self.apply(h, x))).sum()
    }

    fn with_observable(&self, observable: Vec<Complex64>, domain: Domain) -> Result<Self> {
        Self::new(self.weights.clone(), self.generators.clone(), observable, domain)
    }

    /// Same system observed through `g = c·f`.
    pub fn scaled(&self, c: Complex64) -> Result<Self> {
        let obs: Vec<Complex64> = self.observable.iter().map(|&z| z * c).collect();
        let domain = infer_domain(&obs);
        self.with_observable(obs, domain)
    }
}

/// `Σ_x w(x) p(f(T_{h_1} x), .., f(T_{h_j} x))`.
pub fn mps_correlation(m: &FiniteMps, e: &CorrelationEntry) -> Result<Complex64> {
    if let Some(d) = e.dim() {
        if d != m.dim() {
            return Err(Error::Dimension { expected: m.dim(), found: d });
        }
    }
    let mut buf = Vec::with_capacity(e.shifts.len());
    let terms: Vec<Complex64> = (0..m.len())
        .map(|x| {
            buf.clear();
            buf.extend(e.shifts.iter().map(|h| m.observe(h, x)));
            e.poly.eval(&buf) * m.weights[x]
        })
        .collect();
    Ok(pairwise_sum(&terms))
}

/// Product space with the diagonal action and observable `f_1(x_1) f_2(x_2)`;
/// state `(x_1, x_2)` has index `x_1 * n_2 + x_2`.
pub fn product_mps(m1: &FiniteMps, m2: &FiniteMps) -> Result<FiniteMps> {
    if m1.dim() != m2.dim() {
        return Err(Error::Dimension { expected: m1.dim(), found: m2.dim() });
    }
    let n2 = m2.len();
    let idx = |a: usize, b: usize| a * n2 + b;
    let mut weights = Vec::with_capacity(m1.len() * n2);
    let mut observable = Vec::with_capacity(m1.len() * n2);
    for a in 0..m1.len() {
        for b in 0..n2 {
            weights.push(m1.weights[a] * m2.weights[b]);
            observable.push(m1.observable[a] * m2.observable[b]);
        }
    }
    // renormalise away rounding in the products
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    let generators = m1
        .generators
        .iter()
        .zip(&m2.generators)
        .map(|(g1, g2)| {
            let mut g = vec![0; m1.len() * n2];
            for a in 0..m1.len() {
                for b in 0..n2 {
                    g[idx(a, b)] = idx(g1[a], g2[b]);
                }
            }
            g
        })
        .collect();
    let domain = product_domain(&m1.domain, &m2.domain, &observable);
    FiniteMps::new(weights, generators, observable, domain)
}

fn product_domain(a: &Domain, b: &Domain, values: &[Complex64]) -> Domain {
    match (a, b) {
        (Domain::Binary, Domain::Binary) => Domain::Binary,
        (Domain::Sign, Domain::Sign) => Domain::Sign,
        (Domain::Circle, Domain::Circle) => Domain::Circle,
        _ => infer_domain(values),
    }
}

/// Two copies of the space with half weights and observable `F(x, i) = f_i(x)`,
/// `f_0 = Re f`, `f_1 = Im f`; state `(x, i)` has index `2x + i`.
pub fn real_imag_duplication(m: &FiniteMps) -> Result<FiniteMps> {
    let n = m.len();
    let weights = (0..2 * n).map(|y| m.weights[y / 2] / 2.0).collect();
    let observable: Vec<Complex64> = (0..2 * n)
        .map(|y| {
            let z = m.observable[y / 2];
            Complex64::new(if y % 2 == 0 { z.re } else { z.im }, 0.0)
        })
        .collect();
    let generators = m.generators.iter().map(|g| (0..2 * n).map(|y| 2 * g[y / 2] + y % 2).collect()).collect();
    let domain = if observable.iter().all(|z| Domain::SignedInterval.contains(*z)) {
        Domain::SignedInterval
    } else {
        infer_domain(&observable)
    };
    FiniteMps::new(weights, generators, observable, domain)
}

/// Smallest `q <= max_q` whose largest-remainder rounding `c/q` is within `tol` in `l^1`.
pub fn rationalize(weights: &[f64], tol: f64, max_q: u64) -> Result<(u64, Vec<u64>)> {
    for q in 1..=max_q {
        let scaled: Vec<f64> = weights.iter().map(|&w| w * q as f64).collect();
        let mut counts: Vec<u64> = scaled.iter().map(|s| s.floor() as u64).collect();
        let assigned: u64 = counts.iter().sum();
        if assigned > q {
            continue;
        }
        let mut order: Vec<usize> = (0..weights.len()).collect();
        order.sort_by(|&i, &j| (scaled[j] - scaled[j].floor()).total_cmp(&(scaled[i] - scaled[i].floor())).then(i.cmp(&j)));
        for &i in order.iter().take((q - assigned) as usize) {
            counts[i] += 1;
        }
        let err: f64 = weights.iter().zip(&counts).map(|(&w, &c)| (w - c as f64 / q as f64).abs()).sum();
        if err <= tol {
            return Ok((q, counts));
        }
    }
    Err(Error::Rationalization { tolerance: tol, max_denominator: max_q })
}

/// `K` sequences over a common region, stored as distinct windows with multiplicities.
#[derive(Clone, Debug, PartialEq)]
pub struct WitnessBundle {
    base: FiniteLatticeSet,
    region: BoxRegion,
    domain: Domain,
    atoms: Vec<SequenceWindow>,
    counts: Vec<usize>,
    provenance: String,
}

impl WitnessBundle {
    /// `base` is the averaging set `A`; every window must cover its region.
    pub fn new(base: FiniteLatticeSet, atoms: Vec<SequenceWindow>, counts: Vec<usize>, provenance: impl Into<String>) -> Result<Self> {
        let first = atoms.first().ok_or_else(|| Error::Witness("a witness bundle needs a sequence".into()))?;
        let (region, domain) = (*first.region(), first.domain().clone());
        if atoms.len() != counts.len() || counts.contains(&0) {
            return Err(Error::Witness("every witness needs a positive multiplicity".into()));
        }
        if atoms.iter().any(|w| *w.region() != region || *w.domain() != domain) {
            return Err(Error::Witness("witnesses must share region and domain".into()));
        }
        if let Some(p) = base.iter().find(|p| !region.contains(p)) {
            return Err(Error::Coverage(*p));
        }
        Ok(WitnessBundle { base, region, domain, atoms, counts, provenance: provenance.into() })
    }

    /// Uniform bundle: every window counted once.
    pub fn uniform(base: FiniteLatticeSet, atoms: Vec<SequenceWindow>, provenance: impl Into<String>) -> Result<Self> {
        let n = atoms.len();
        Self::new(base, atoms, vec![1; n], provenance)
    }

    pub fn k(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn base(&self) -> &FiniteLatticeSet {
        &self.base
    }

    pub fn region(&self) -> &BoxRegion {
        &self.region
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    pub fn distinct(&self) -> impl Iterator<Item = (&SequenceWindow, usize)> {
        self.atoms.iter().zip(self.counts.iter().copied())
    }

    /// The `k`-th sequence, `0 <= k < K`.
    pub fn sequence(&self, mut k: usize) -> &SequenceWindow {
        for (w, &c) in self.atoms.iter().zip(&self.counts) {
            if k < c {
                return w;
            }
            k -= c;
        }
        panic!("witness index out of range")
    }

    /// `(1/(K|A|)) Σ_k Σ_{a∈A} p(z_{h_1+a,k}, ..)`.
    pub fn statistic(&self, e: &CorrelationEntry) -> Result<Complex64> {
        let mut buf = Vec::with_capacity(e.shifts.len());
        let mut terms = Vec::with_capacity(self.atoms.len());
        for (w, c) in self.distinct() {
            let inner: Vec<Complex64> = self
                .base
                .iter()
                .map(|&a| e.eval_at(w, a, &mut buf))
                .collect::<Result<_>>()?;
            terms.push(pairwise_sum(&inner) * c as f64);
        }
        Ok(pairwise_sum(&terms) / (self.k() * self.base.len()) as f64)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FinitisticWitnesses {
    pub bundle: WitnessBundle,
    pub denominator: u64,
    /// `γ(l)` computed on the system
    pub targets: Vec<Complex64>,
    /// `|γ(l) - statistic_l|`
    pub discrepancies: Vec<f64>,
}

fn shift_hull(base: &BoxRegion, spec: &CorrelationSpec) -> BoxRegion {
    let mut shifts = spec.all_shifts();
    shifts.push(LatticePoint::origin(base.dim()));
    base.expand_by(&shifts)
}

/// Orbit sequences `z_{a,x} = f(T_a x)`, each state replicated in proportion to its weight.
pub fn finitistic_witnesses(m: &FiniteMps, spec: &CorrelationSpec, a: &FiniteLatticeSet, delta: f64) -> Result<FinitisticWitnesses> {
    if !(delta > 0.0) {
        return Err(Error::Input("δ must be positive".into()));
    }
    if a.is_empty() {
        return Err(Error::Input("the averaging set A is empty".into()));
    }
    if a.dim() != m.dim() {
        return Err(Error::Dimension { expected: m.dim(), found: a.dim() });
    }
    let bound = spec.max_sup_bound();
    let tol = if bound > 0.0 { delta / (2.0 * bound) } else { f64::INFINITY };
    let (q, counts) = rationalize(&m.weights, tol, MAX_DENOMINATOR)?;
    let region = shift_hull(&a.bounding_box().expect("nonempty"), spec);
    let mut atoms = Vec::new();
    let mut mult = Vec::new();
    for (x, &c) in counts.iter().enumerate().filter(|(_, &c)| c > 0) {
        let values = region.points().map(|p| m.observe(&p, x)).collect();
        atoms.push(SequenceWindow::from_parts_unchecked(region, values, m.domain.clone()));
        mult.push(c as usize);
    }
    let bundle = WitnessBundle::new(a.clone(), atoms, mult, format!("orbits of a {}-state system, q = {q}", m.len()))?;
    let mut targets = Vec::with_capacity(spec.len());
    let mut discrepancies = Vec::with_capacity(spec.len());
    for e in &spec.entries {
        let gamma = mps_correlation(m, e)?;
        let d = (bundle.statistic(e)? - gamma).norm();
        if d >= delta {
            return Err(Error::Witness(format!("witness discrepancy {d} is not below δ = {delta}")));
        }
        targets.push(gamma);
        discrepancies.push(d);
    }
    Ok(FinitisticWitnesses { bundle, denominator: q, targets, discrepancies })
}

/// Source of fresh random blocks for synthesis.
pub trait WitnessGenerator: Send + Sync {
    fn domain(&self) -> Domain;
    /// Value used at sites no block covers.
    fn fill(&self) -> Complex64;
    fn generate(&self, region: &BoxRegion, rng: &SeededRng) -> Result<SequenceWindow>;
    fn describe(&self) -> String;
}

/// Where synthesis takes its finitistic witnesses from.
pub enum WitnessSource {
    Mps(FiniteMps),
    Generator(Box<dyn WitnessGenerator>),
}

impl WitnessSource {
    pub fn dim(&self) -> Option<usize> {
        match self {
            WitnessSource::Mps(m) => Some(m.dim()),
            WitnessSource::Generator(_) => None,
        }
    }

    pub fn domain(&self) -> Domain {
        match self {
            WitnessSource::Mps(m) => m.domain().clone(),
            WitnessSource::Generator(g) => g.domain(),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            WitnessSource::Mps(m) => format!("finite system with {} states", m.len()),
            WitnessSource::Generator(g) => g.describe(),
        }
    }
}

/// The point of the domain closest to `target`; ties go to the earliest sample.
pub fn nearest_domain_value(domain: &Domain, target: Complex64) -> Complex64 {
    if domain.contains(target) {
        return target;
    }
    let mut samples = domain.samples();
    samples.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    samples
        .into_iter()
        .fold((f64::INFINITY, target), |(bd, bz), z| {
            let d = (z - target).norm();
            if d < bd - 1e-15 {
                (d, z)
            } else {
                (bd, bz)
            }
        })
        .1
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelSpec {
    /// tiles at this level are `[0, 2^k)^d`
    pub k: u32,
    /// block tolerance; the default is `1/L` for the `L`-th level
    pub delta: f64,
    /// witnesses sit on sub-tiles `[0, 2^s)^d`; chosen automatically if absent
    pub sub_exponent: Option<u32>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthesisSchedule {
    pub levels: Vec<LevelSpec>,
    /// partition thresholds `N_1 <= .. <= N_{L-1}`; default schedule if absent
    pub thresholds: Option<Vec<usize>>,
    /// target accuracy at the horizon
    pub epsilon: f64,
    pub seed: u64,
}

pub const DEFAULT_EPSILON: f64 = 0.05;

impl SynthesisSchedule {
    /// Levels `k_top - 6, .., k_top` in steps of two, `k_top = log2(side) - 4`.
    pub fn default_for(plan: &FolnerPlan, horizon: usize) -> Self {
        let side = plan.side(horizon).max(1);
        let top = (usize::BITS - 1 - side.leading_zeros()).saturating_sub(4).max(1);
        let mut ks: Vec<u32> = (0..4).map(|i| top as i64 - 2 * i).filter(|&k| k >= 1).map(|k| k as u32).collect();
        ks.reverse();
        Self::from_exponents(&ks)
    }

    pub fn from_exponents(ks: &[u32]) -> Self {
        let levels = ks
            .iter()
            .enumerate()
            .map(|(i, &k)| LevelSpec { k, delta: 1.0 / (i + 1) as f64, sub_exponent: None })
            .collect();
        SynthesisSchedule { levels, thresholds: None, epsilon: DEFAULT_EPSILON, seed: 0 }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    #[serde(rename = "N")]
    pub n: usize,
    pub entry: usize,
    pub value: Complex64,
    pub target: Complex64,
    pub abs_err: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelReport {
    pub index: usize,
    pub k: u32,
    pub sub_exponent: u32,
    pub witnesses: usize,
    pub subtiles_kept: usize,
    pub subtiles_dropped: usize,
    pub tiles: usize,
    pub delta: f64,
    /// worst `|γ(l) - block statistic|` over checked entries and tiles
    pub block_error: f64,
}

#[derive(Clone, Debug)]
pub struct Synthesis {
    pub window: SequenceWindow,
    pub partition: TilePartition,
    pub targets: Vec<Complex64>,
    pub trace: Vec<TraceRow>,
    pub levels: Vec<LevelReport>,
    pub epsilon: f64,
    /// `4ε/5 + ε/10 + ε/10`
    pub composed_bound: f64,
    pub final_error: f64,
    pub pass: bool,
}

impl Synthesis {
    /// Largest `|avg_N - γ(l)|` over entries at each traced `N`.
    pub fn max_error_by_n(&self) -> Vec<(usize, f64)> {
        let mut out: Vec<(usize, f64)> = Vec::new();
        for row in &self.trace {
            match out.last_mut() {
                Some((n, e)) if *n == row.n => *e = e.max(row.abs_err),
                _ => out.push((row.n, row.abs_err)),
            }
        }
        out
    }
}

/// `N = 1, 2, 4, ..` up to `horizon`, and `horizon` itself.
pub fn dyadic_indices(horizon: usize) -> Vec<usize> {
    let mut ns: Vec<usize> = std::iter::successors(Some(1usize), |n| n.checked_mul(2)).take_while(|&n| n <= horizon).collect();
    if horizon > 0 && ns.last() != Some(&horizon) {
        ns.push(horizon);
    }
    ns
}

/// `|avg_{F_N} p_l - γ(l)|` for each traced `N` and entry.
pub fn verification_trace(
    w: &SequenceWindow,
    spec: &CorrelationSpec,
    targets: &[Complex64],
    plan: &FolnerPlan,
    ns: &[usize],
) -> Result<Vec<TraceRow>> {
    let mut rows = Vec::with_capacity(ns.len() * spec.len());
    for &n in ns {
        let f = plan.region(n);
        for (l, (e, &target)) in spec.entries.iter().zip(targets).enumerate() {
            let value = cesaro_correlation_region(w, e, &f)?;
            rows.push(TraceRow { n, entry: l, value, target, abs_err: (value - target).norm() });
        }
    }
    Ok(rows)
}

fn subtile_ratio(shifts: &[LatticePoint], s: u32, dim: usize) -> f64 {
    let shape = BoxRegion::cube(dim, 1i64 << s);
    let hull = shape.expand_by(&shifts.iter().map(|&h| -h).collect::<Vec<_>>());
    let inside: usize = (0..dim)
        .map(|ax| {
            let lo = shifts.iter().map(|h| h.coord(ax)).min().unwrap_or(0);
            let hi = shifts.iter().map(|h| h.coord(ax)).max().unwrap_or(0);
            ((1i64 << s) - (hi - lo)).max(0) as usize
        })
        .product();
    let meeting = hull.points().filter(|&g| shifts.iter().any(|&h| shape.contains(&(h + g)))).count();
    (meeting - inside) as f64 / shape.len() as f64
}

/// Sub-tile exponent minimising the dropped fraction plus `|∂_S S'|/|S'|`.
fn auto_sub_exponent(k: u32, dim: usize, witnesses: usize, shifts: &[LatticePoint]) -> u32 {
    let mut best = (f64::INFINITY, k);
    for s in 0..=k {
        let n_sub = 1usize << (dim as u32 * (k - s));
        if n_sub < witnesses {
            continue;
        }
        let cost = (n_sub % witnesses) as f64 / n_sub as f64 + subtile_ratio(shifts, s, dim);
        if cost < best.0 - 1e-15 {
            best = (cost, s);
        }
    }
    best.1
}

fn block_statistics(block: &SequenceWindow, shape: &BoxRegion, spec: &CorrelationSpec, checked: usize) -> Result<Vec<Complex64>> {
    spec.entries[..checked].iter().map(|e| cesaro_correlation_region(block, e, shape)).collect()
}

fn mix_key(parts: &[u64]) -> u64 {
    parts.iter().fold(0x243F_6A88_85A3_08D3u64, |acc, &p| crate::randomization::splitmix64(acc ^ p))
}

/// Builds a window whose Cesàro correlations along `F_N` approach the targets.
///
/// Level `L` of the schedule supplies one block per tile of `[0, 2^{k_L})^d`,
/// itself assembled from witness sub-tiles and checked against `δ_L` on the
/// first `min(L, #entries)` entries. Blocks are then placed on the Følner
/// partition of the dyadic family.
pub fn synthesize_sequence(
    spec: &CorrelationSpec,
    source: &WitnessSource,
    plan: &FolnerPlan,
    horizon: usize,
    schedule: &SynthesisSchedule,
) -> Result<Synthesis> {
    let dim = plan.dim;
    if spec.is_empty() {
        return Err(Error::Input("the correlation spec has no entries".into()));
    }
    if let Some(d) = spec.entries.iter().find_map(|e| e.dim().filter(|&d| d != dim)) {
        return Err(Error::Dimension { expected: dim, found: d });
    }
    if let Some(d) = source.dim().filter(|&d| d != dim) {
        return Err(Error::Dimension { expected: dim, found: d });
    }
    if schedule.levels.is_empty() {
        return Err(Error::Schedule("the schedule has no levels".into()));
    }
    if horizon == 0 {
        return Err(Error::Schedule("horizon must be at least 1".into()));
    }
    if !(schedule.epsilon > 0.0) {
        return Err(Error::Schedule("ε must be positive".into()));
    }
    if let Some(l) = schedule.levels.iter().find(|l| !(l.delta > 0.0) || l.sub_exponent.is_some_and(|s| s > l.k)) {
        return Err(Error::Schedule(format!("invalid level {l:?}")));
    }
    let family = CongruentFamily::new(dim, schedule.levels.iter().map(|l| l.k).collect())
        .map_err(|e| Error::Schedule(e.to_string()))?;
    let top = *family.levels().last().expect("nonempty");
    if plan.side(horizon) < 1usize << top {
        return Err(Error::Schedule(format!(
            "F_{horizon} has side {} but the coarsest tile has side {}",
            plan.side(horizon),
            1usize << top
        )));
    }
    let domain = source.domain();
    spec.check_bounds(&domain)?;

    let (targets, fill, mps_witness) = match source {
        WitnessSource::Mps(m) => {
            let targets = spec
                .entries
                .iter()
                .map(|e| Ok(e.target.unwrap_or(mps_correlation(m, e)?)))
                .collect::<Result<Vec<_>>>()?;
            (targets, nearest_domain_value(&domain, m.mean()), Some(m))
        }
        WitnessSource::Generator(g) => {
            let targets = spec
                .entries
                .iter()
                .enumerate()
                .map(|(i, e)| e.target.ok_or_else(|| Error::Input(format!("entry {i} needs a target"))))
                .collect::<Result<Vec<_>>>()?;
            (targets, g.fill(), None)
        }
    };
    if !domain.contains(fill) {
        return Err(Error::Domain(format!("fill value {fill} is outside the {} domain", domain.name())));
    }

    let partition = congruent_partition(&family, plan, horizon, schedule.thresholds.as_deref())?;
    let mut shifts = spec.all_shifts();
    shifts.push(LatticePoint::origin(dim));
    shifts.sort_unstable();
    shifts.dedup();
    let rng = SeededRng::new(schedule.seed, 0);

    let mut level_blocks: HashMap<u32, SequenceWindow> = HashMap::new();
    let mut levels = Vec::with_capacity(family.len());
    let mut blocks = Vec::with_capacity(partition.len());
    let mut block_errors: HashMap<u32, f64> = HashMap::new();

    for (idx, lvl) in schedule.levels.iter().enumerate() {
        let level_index = idx + 1;
        let checked = level_index.min(spec.len());
        let shape = BoxRegion::cube(dim, 1i64 << lvl.k);
        let block_region = shape.expand_by(&shifts);
        let tiles_here = partition.tiles().iter().filter(|t| t.level == lvl.k).count();
        let (sub, witnesses, kept, dropped) = match mps_witness {
            Some(m) => {
                let probe = finitistic_witnesses(
                    m,
                    spec,
                    &BoxRegion::cube(dim, 1).to_set(),
                    lvl.delta / 5.0,
                )?;
                let kk = probe.bundle.k();
                let sub = lvl.sub_exponent.unwrap_or_else(|| auto_sub_exponent(lvl.k, dim, kk, &shifts));
                let sub_shape = BoxRegion::cube(dim, 1i64 << sub);
                let wit = finitistic_witnesses(m, spec, &sub_shape.to_set(), lvl.delta / 5.0)?;
                let kk = wit.bundle.k();
                let sub_tiles = crate::tiling::dyadic_tiling(sub, dim)?.centers_in(&shape);
                let kept = sub_tiles.len() - sub_tiles.len() % kk;
                if kept == 0 {
                    return Err(Error::Witness(format!(
                        "level {level_index}: {kk} witnesses do not fit in {} sub-tiles",
                        sub_tiles.len()
                    )));
                }
                let mut values = vec![fill; block_region.len()];
                for (i, &c) in sub_tiles.iter().take(kept).enumerate() {
                    let w = wit.bundle.sequence(i % kk);
                    for p in sub_shape.points() {
                        values[block_region.index_of(&(p + c)).expect("inside block")] = w.get(&p).expect("covered");
                    }
                }
                let block = SequenceWindow::from_parts_unchecked(block_region, values, domain.clone());
                let stats = block_statistics(&block, &shape, spec, checked)?;
                let err = stats.iter().zip(&targets).map(|(s, t)| (s - t).norm()).fold(0.0, f64::max);
                if err >= lvl.delta {
                    return Err(Error::Witness(format!(
                        "level {level_index} block misses its targets by {err} (δ = {})",
                        lvl.delta
                    )));
                }
                block_errors.insert(lvl.k, err);
                level_blocks.insert(lvl.k, block);
                (sub, kk, kept, sub_tiles.len() - kept)
            }
            None => {
                block_errors.insert(lvl.k, 0.0);
                (lvl.k, 1, 1, 0)
            }
        };
        levels.push(LevelReport {
            index: level_index,
            k: lvl.k,
            sub_exponent: sub,
            witnesses,
            subtiles_kept: kept,
            subtiles_dropped: dropped,
            tiles: tiles_here,
            delta: lvl.delta,
            block_error: 0.0,
        });
    }

    for tile in partition.tiles() {
        let block = match source {
            WitnessSource::Mps(_) => level_blocks[&tile.level].clone(),
            WitnessSource::Generator(g) => {
                let idx = schedule.levels.iter().position(|l| l.k == tile.level).expect("level");
                let spec_level = schedule.levels[idx];
                let shape = BoxRegion::cube(dim, 1i64 << tile.level);
                let block_region = shape.expand_by(&shifts);
                let mut key: Vec<u64> = vec![tile.level as u64];
                key.extend(tile.center.coords().iter().map(|&c| c as u64));
                let fresh = g.generate(&shape, &rng.derive(mix_key(&key)))?;
                let mut values = vec![fill; block_region.len()];
                for (p, z) in fresh.iter() {
                    values[block_region.index_of(&p).expect("inside block")] = z;
                }
                let block = SequenceWindow::new(block_region, values, domain.clone())?;
                let checked = (idx + 1).min(spec.len());
                let stats = block_statistics(&block, &shape, spec, checked)?;
                let err = stats.iter().zip(&targets).map(|(s, t)| (s - t).norm()).fold(0.0, f64::max);
                if err >= spec_level.delta {
                    return Err(Error::Witness(format!(
                        "generated block at {} misses its targets by {err} (δ = {})",
                        tile.center, spec_level.delta
                    )));
                }
                let e = block_errors.entry(tile.level).or_insert(0.0);
                *e = e.max(err);
                block
            }
        };
        blocks.push(block);
    }
    for l in &mut levels {
        l.block_error = block_errors.get(&l.k).copied().unwrap_or(0.0);
    }

    let region = match partition.hull() {
        Some(h) => h.expand_by(&shifts),
        None => plan.region(horizon).expand_by(&shifts),
    };
    let window = assemble_blocks(&partition, &blocks, fill, region, domain)?;
    let trace = verification_trace(&window, spec, &targets, plan, &dyadic_indices(horizon))?;
    let eps = schedule.epsilon;
    let composed_bound = 4.0 * eps / 5.0 + eps / 10.0 + eps / 10.0;
    let final_error = trace.iter().filter(|r| r.n == horizon).map(|r| r.abs_err).fold(0.0, f64::max);
    Ok(Synthesis {
        window,
        partition,
        targets,
        trace,
        levels,
        epsilon: eps,
        composed_bound,
        final_error,
        pass: final_error <= composed_bound,
    })
}

/// Either a finite system with a `{0,1}` observable or an iid Bernoulli(`p`) process.
#[derive(Clone, Debug, PartialEq)]
pub enum SetSource {
    Mps(FiniteMps),
    Iid { p: f64, dim: usize },
}

impl SetSource {
    pub fn dim(&self) -> usize {
        match self {
            SetSource::Mps(m) => m.dim(),
            SetSource::Iid { dim, .. } => *dim,
        }
    }

    /// `μ(⋂_i T_{h_i} B^{ε_i})`.
    pub fn target(&self, family: &[SetShift]) -> Result<f64> {
        match self {
            SetSource::Mps(m) => Ok(mps_correlation(m, &family_entry(family)?)?.re),
            SetSource::Iid { p, .. } => {
                let mut seen: Vec<SetShift> = Vec::new();
                for s in family {
                    if seen.iter().any(|t| t.shift == s.shift && t.keep != s.keep) {
                        return Ok(0.0);
                    }
                    if !seen.contains(s) {
                        seen.push(*s);
                    }
                }
                Ok(seen.iter().map(|s| if s.keep { *p } else { 1.0 - p }).product())
            }
        }
    }
}

fn family_entry(family: &[SetShift]) -> Result<CorrelationEntry> {
    CorrelationEntry::new(
        family.iter().map(|s| s.shift).collect(),
        StarPolynomial::indicator_pattern(&family.iter().map(|s| s.keep).collect::<Vec<_>>()),
    )
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FamilyDensity {
    pub family: Vec<SetShift>,
    pub density: f64,
    pub target: f64,
    pub deviation: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnionDensity {
    pub shifts: Vec<LatticePoint>,
    pub density: f64,
    pub target: f64,
    pub deviation: f64,
}

#[derive(Clone, Debug)]
pub struct IfcResult {
    pub set: FiniteLatticeSet,
    pub universe: BoxRegion,
    pub averaging_box: BoxRegion,
    pub families: Vec<FamilyDensity>,
    pub unions: Vec<UnionDensity>,
    pub synthesis: Synthesis,
}

impl IfcResult {
    pub fn max_deviation(&self) -> f64 {
        self.families
            .iter()
            .map(|f| f.deviation)
            .chain(self.unions.iter().map(|u| u.deviation))
            .fold(0.0, f64::max)
    }
}

/// A set `A` with `d_F(⋂_i (A - h_i)^{ε_i}) ≈ μ(⋂_i T_{h_i} B^{ε_i})` for each family,
/// and `d_F(⋃_i (A - h_i)) ≈ μ(⋃_i T_{h_i} B)` for each union.
pub fn inverse_furstenberg(
    source: &SetSource,
    families: &[Vec<SetShift>],
    unions: &[Vec<LatticePoint>],
    plan: &FolnerPlan,
    horizon: usize,
    schedule: &SynthesisSchedule,
) -> Result<IfcResult> {
    let dim = plan.dim;
    if source.dim() != dim {
        return Err(Error::Dimension { expected: dim, found: source.dim() });
    }
    let union_families: Vec<Vec<SetShift>> =
        unions.iter().map(|u| u.iter().map(|&h| SetShift::complement(h)).collect()).collect();
    let all: Vec<&Vec<SetShift>> = families.iter().chain(union_families.iter()).collect();
    if all.is_empty() {
        return Err(Error::Input("no families requested".into()));
    }
    let mut entries = Vec::with_capacity(all.len());
    let mut targets = Vec::with_capacity(all.len());
    for fam in &all {
        if fam.is_empty() {
            return Err(Error::Input("empty shift family".into()));
        }
        let t = source.target(fam)?;
        entries.push(family_entry(fam)?.with_target(Complex64::new(t, 0.0)));
        targets.push(t);
    }
    let spec = CorrelationSpec::new(entries)?;
    let witness_source = match source {
        SetSource::Mps(m) => {
            if *m.domain() != Domain::Binary {
                return Err(Error::Domain("inverse correspondence needs a {0,1}-valued observable".into()));
            }
            WitnessSource::Mps(m.clone())
        }
        SetSource::Iid { p, .. } => WitnessSource::Generator(Box::new(BernoulliGenerator::new(*p)?)),
    };
    let synthesis = synthesize_sequence(&spec, &witness_source, plan, horizon, schedule)?;
    let universe = *synthesis.window.region();
    let set = FiniteLatticeSet::new(dim, synthesis.window.iter().filter(|(_, z)| z.re > 0.5).map(|(p, _)| p))?;
    let averaging_box = plan.region(horizon);
    let mut fam_rows = Vec::new();
    for (fam, &target) in families.iter().zip(&targets) {
        let density = set_density_region(&set, &universe, fam, &averaging_box)?;
        fam_rows.push(FamilyDensity { family: fam.clone(), density, target, deviation: (density - target).abs() });
    }
    let mut union_rows = Vec::new();
    for (i, u) in unions.iter().enumerate() {
        let complement = set_density_region(&set, &universe, &union_families[i], &averaging_box)?;
        let density = 1.0 - complement;
        let target = 1.0 - targets[families.len() + i];
        union_rows.push(UnionDensity { shifts: u.clone(), density, target, deviation: (density - target).abs() });
    }
    Ok(IfcResult { set, universe, averaging_box, families: fam_rows, unions: union_rows, synthesis })
}

#[derive(Clone, Debug)]
pub struct SemigroupIfc {
    /// `A ⊆ {1, .., horizon}`
    pub set: FiniteLatticeSet,
    /// densities along `F_N = {1, .., horizon}`
    pub families: Vec<FamilyDensity>,
}

/// The `Z` construction restricted to `ℕ`, with densities along `{1, .., N}`.
pub fn semigroup_ifc(
    source: &SetSource,
    families: &[Vec<SetShift>],
    horizon: usize,
    schedule: &SynthesisSchedule,
) -> Result<SemigroupIfc> {
    if source.dim() != 1 {
        return Err(Error::Dimension { expected: 1, found: source.dim() });
    }
    let plan = FolnerPlan::anchored(1);
    let z = inverse_furstenberg(source, families, &[], &plan, horizon + 1, schedule)?;
    let positive = FiniteLatticeSet::from_ints(z.set.iter().map(|p| p.coord(0)).filter(|&x| x >= 1));
    let f = BoxRegion::interval(1, horizon as i64 + 1);
    let mut rows = Vec::new();
    for fam in families {
        let target = source.target(fam)?;
        let density = set_density_region(&positive, &z.universe, fam, &f)?;
        rows.push(FamilyDensity { family: fam.clone(), density, target, deviation: (density - target).abs() });
    }
    let set = FiniteLatticeSet::from_ints(positive.iter().map(|p| p.coord(0)).filter(|&x| x <= horizon as i64));
    Ok(SemigroupIfc { set, families: rows })
}
