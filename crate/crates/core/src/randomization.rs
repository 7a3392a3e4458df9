//! Seeded randomness and the probabilistic constructions built on it: biased
//! circle draws, lifting of disc witnesses to circle witnesses, convexification
//! and white noise.

use std::collections::HashMap;
use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::distr::Distribution;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::averaging::{
    cesaro_correlation_region, convex_hull, in_convex_hull, pairwise_sum, CorrelationEntry, Domain, SequenceWindow,
    StarPolynomial, DOMAIN_TOL,
};
use crate::correspondence::{nearest_domain_value, WitnessBundle, WitnessGenerator};
use crate::error::{Error, Result};
use crate::lattice::{BoxRegion, LatticePoint};
use crate::simplex::LinearProgram;

/// Name of the underlying generator, recorded in reports.
pub const ALGORITHM: &str = "ChaCha8";

/// Largest number of circle copies per disc witness tried by [`lift_witnesses_to_circle`].
pub const LIFT_CAP: usize = 10_000;

const REPRESENTATION_TOL: f64 = 1e-9;

pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// ChaCha8 keyed by `(seed, stream)`; sub-streams are derived by hashing keys into the seed.
#[derive(Clone, Debug)]
pub struct SeededRng {
    seed: u64,
    stream: u64,
    inner: ChaCha8Rng,
}

impl SeededRng {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        SeededRng { seed, stream, inner }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// Independent generator for `key`; does not advance `self`.
    pub fn derive(&self, key: u64) -> Self {
        Self::new(splitmix64(self.seed ^ splitmix64(key)), self.stream)
    }

    /// Generator owned by one lattice site.
    pub fn for_site(&self, p: &LatticePoint) -> Self {
        let key = p.coords().iter().fold(p.dim() as u64, |acc, &c| splitmix64(acc ^ c as u64));
        self.derive(key)
    }
}

impl RngCore for SeededRng {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

/// Law on the unit circle with density `1 + Re(z·conj w)` against normalised arc length.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BiasedCircle {
    w: Complex64,
    envelope: f64,
}

impl BiasedCircle {
    pub fn new(w: Complex64) -> Result<Self> {
        if !(w.norm() <= 1.0 + DOMAIN_TOL) {
            return Err(Error::Domain(format!("bias {w} lies outside the closed unit disc")));
        }
        Ok(BiasedCircle { w, envelope: 1.0 + w.norm() })
    }

    pub fn bias(&self) -> Complex64 {
        self.w
    }

    pub fn density(&self, z: Complex64) -> f64 {
        1.0 + (z * self.w.conj()).re
    }

    /// One draw and the number of proposals it took.
    pub fn sample_counted<R: Rng + ?Sized>(&self, rng: &mut R) -> (Complex64, usize) {
        let mut proposals = 0;
        loop {
            proposals += 1;
            let z = Complex64::from_polar(1.0, rng.random::<f64>() * TAU);
            if rng.random::<f64>() * self.envelope < self.density(z) {
                return (z, proposals);
            }
        }
    }
}

impl Distribution<Complex64> for BiasedCircle {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Complex64 {
        self.sample_counted(rng).0
    }
}

pub fn sample_biased_circle<R: Rng + ?Sized>(w: Complex64, rng: &mut R) -> Result<Complex64> {
    Ok(BiasedCircle::new(w)?.sample(rng))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub algorithm: String,
    pub bias: Complex64,
    pub draws: usize,
    pub proposals: usize,
    pub mean: Complex64,
    pub second: Complex64,
    pub third: Complex64,
    /// `3 · 4/√draws`
    pub envelope: f64,
    pub pass: bool,
}

/// Empirical `E z`, `E z^2`, `E z^3` against `w/2`, `0`, `0`.
pub fn biased_circle_moments(w: Complex64, draws: usize, rng: &mut SeededRng) -> Result<MomentReport> {
    if draws == 0 {
        return Err(Error::Input("at least one draw is needed".into()));
    }
    let law = BiasedCircle::new(w)?;
    let mut proposals = 0;
    let mut zs = Vec::with_capacity(draws);
    for _ in 0..draws {
        let (z, p) = law.sample_counted(rng);
        proposals += p;
        zs.push(z);
    }
    let n = draws as f64;
    let moment = |k: i32| pairwise_sum(&zs.iter().map(|z| z.powi(k)).collect::<Vec<_>>()) / n;
    let (mean, second, third) = (moment(1), moment(2), moment(3));
    let envelope = 3.0 * 4.0 / n.sqrt();
    let pass = (mean - w / 2.0).norm() <= envelope && second.norm() <= envelope && third.norm() <= envelope;
    Ok(MomentReport { algorithm: ALGORITHM.into(), bias: w, draws, proposals, mean, second, third, envelope, pass })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LiftCheck {
    pub shift: LatticePoint,
    pub power: u32,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LiftedWitnesses {
    pub bundle: WitnessBundle,
    /// circle copies per input witness
    pub copies: usize,
    pub delta: f64,
    pub mean_target: Complex64,
    pub mean_value: Complex64,
    pub checks: Vec<LiftCheck>,
}

impl LiftedWitnesses {
    pub fn worst_correlation(&self) -> f64 {
        self.checks.iter().map(|c| c.value).fold(0.0, f64::max)
    }
}

/// Replaces each disc witness by `M` circle sequences drawn site by site from
/// [`BiasedCircle`], doubling `M` until every power correlation over `h0` and the
/// halved mean are within `δ`.
pub fn lift_witnesses_to_circle(
    bundle: &WitnessBundle,
    h0: &[LatticePoint],
    l_max: u32,
    delta: f64,
    rng: &SeededRng,
) -> Result<LiftedWitnesses> {
    if !(delta > 0.0) {
        return Err(Error::Input("δ must be positive".into()));
    }
    for (w, _) in bundle.distinct() {
        if let Some(z) = w.values().iter().find(|z| z.norm() > 1.0 + DOMAIN_TOL) {
            return Err(Error::Domain(format!("witness value {z} lies outside the unit disc")));
        }
    }
    let region = *bundle.region();
    let base = bundle.base();
    let mut shifted = Vec::with_capacity(h0.len());
    for h in h0 {
        let pts: Vec<usize> = base
            .iter()
            .map(|&a| region.index_of(&(a + *h)).ok_or(Error::Coverage(a + *h)))
            .collect::<Result<_>>()?;
        shifted.push(pts);
    }
    let base_idx: Vec<usize> = base.iter().map(|a| region.index_of(a).expect("base inside region")).collect();
    let input_mean = {
        let per: Vec<Complex64> = bundle
            .distinct()
            .map(|(w, c)| pairwise_sum(&base_idx.iter().map(|&i| w.values()[i]).collect::<Vec<_>>()) * c as f64)
            .collect();
        pairwise_sum(&per) / (bundle.k() * base.len()) as f64
    };
    let mean_target = input_mean / 2.0;
    let laws: Vec<Vec<BiasedCircle>> = bundle
        .distinct()
        .map(|(w, _)| w.values().iter().map(|&z| BiasedCircle::new(z)).collect::<Result<_>>())
        .collect::<Result<_>>()?;
    let kk = bundle.k();
    let owners: Vec<usize> = bundle.distinct().enumerate().flat_map(|(i, (_, c))| std::iter::repeat_n(i, c)).collect();

    let mut sequences: Vec<Vec<Complex64>> = Vec::new();
    let mut copies = 1;
    loop {
        let wanted = kk * copies;
        while sequences.len() < wanted {
            let j = sequences.len();
            let law = &laws[owners[j % kk]];
            let seq_rng = rng.derive(j as u64);
            let seq = region.points().zip(law).map(|(p, l)| l.sample(&mut seq_rng.for_site(&p))).collect();
            sequences.push(seq);
        }
        let norm = (wanted * base.len()) as f64;
        let mean_value = pairwise_sum(
            &sequences.iter().map(|s| pairwise_sum(&base_idx.iter().map(|&i| s[i]).collect::<Vec<_>>())).collect::<Vec<_>>(),
        ) / norm;
        let mut checks = Vec::new();
        for (h, idx) in h0.iter().zip(&shifted) {
            for l in 1..=l_max {
                let per: Vec<Complex64> = sequences
                    .iter()
                    .map(|s| {
                        let terms: Vec<Complex64> =
                            idx.iter().zip(&base_idx).map(|(&i, &j)| s[i].powu(l) * s[j].powu(l).conj()).collect();
                        pairwise_sum(&terms)
                    })
                    .collect();
                checks.push(LiftCheck { shift: *h, power: l, value: (pairwise_sum(&per) / norm).norm() });
            }
        }
        let ok = (mean_value - mean_target).norm() < delta && checks.iter().all(|c| c.value < delta);
        if ok {
            let atoms = sequences
                .into_iter()
                .map(|s| SequenceWindow::from_parts_unchecked(region, s, Domain::Circle))
                .collect();
            let bundle = WitnessBundle::uniform(
                base.clone(),
                atoms,
                format!("circle lift of {kk} witnesses, {copies} copies each"),
            )?;
            return Ok(LiftedWitnesses { bundle, copies, delta, mean_target, mean_value, checks });
        }
        copies *= 2;
        if copies > LIFT_CAP {
            return Err(Error::Convergence(format!(
                "circle lift missed δ = {delta} with {} copies per witness",
                copies / 2
            )));
        }
    }
}

fn project_to_hull(hull: &[Complex64], z: Complex64) -> Complex64 {
    let seg = |a: Complex64, b: Complex64| {
        let d = b - a;
        let t = if d.norm_sqr() == 0.0 { 0.0 } else { ((z - a) * d.conj()).re / d.norm_sqr() };
        a + d * t.clamp(0.0, 1.0)
    };
    match hull.len() {
        0 => z,
        1 => hull[0],
        n => (0..n)
            .map(|i| seg(hull[i], hull[(i + 1) % n]))
            .min_by(|a, b| (a - z).norm().total_cmp(&(b - z).norm()))
            .expect("nonempty"),
    }
}

fn is_pair(d: &[Complex64], lo: f64, hi: f64) -> bool {
    let mut s: Vec<Complex64> = d.to_vec();
    s.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    s.dedup();
    s == [Complex64::new(lo, 0.0), Complex64::new(hi, 0.0)]
}

/// Weights `λ ≥ 0`, `Σ λ = 1`, `Σ λ_i d_i = z`, as `(d_i, λ_i)` pairs with positive weight.
pub fn convex_representation(d: &[Complex64], z: Complex64) -> Result<Vec<(Complex64, f64)>> {
    if d.is_empty() {
        return Err(Error::Geometry { re: z.re, im: z.im });
    }
    let outside = || Error::Geometry { re: z.re, im: z.im };
    let clamp_pair = |t: f64| if (-REPRESENTATION_TOL..=1.0 + REPRESENTATION_TOL).contains(&t) { Ok(t.clamp(0.0, 1.0)) } else { Err(outside()) };
    if z.im.abs() <= REPRESENTATION_TOL && is_pair(d, 0.0, 1.0) {
        let t = clamp_pair(z.re)?;
        return Ok(vec![(Complex64::new(0.0, 0.0), 1.0 - t), (Complex64::new(1.0, 0.0), t)]);
    }
    if z.im.abs() <= REPRESENTATION_TOL && is_pair(d, -1.0, 1.0) {
        let t = clamp_pair((1.0 + z.re) / 2.0)?;
        return Ok(vec![(Complex64::new(-1.0, 0.0), 1.0 - t), (Complex64::new(1.0, 0.0), t)]);
    }
    if !in_convex_hull(d, z, REPRESENTATION_TOL) {
        return Err(outside());
    }
    let solve = |target: Complex64| -> Result<Vec<f64>> {
        let mut rows = vec![vec![1.0; d.len()], d.iter().map(|p| p.re).collect()];
        let mut rhs = vec![1.0, target.re];
        if d.iter().any(|p| p.im != 0.0) || target.im != 0.0 {
            rows.push(d.iter().map(|p| p.im).collect());
            rhs.push(target.im);
        }
        Ok(LinearProgram::new(vec![0.0; d.len()], rows, rhs)?.solve()?.x)
    };
    let lambda = solve(z).or_else(|_| solve(project_to_hull(&convex_hull(d), z))).map_err(|_| outside())?;
    let total: f64 = lambda.iter().sum();
    let mean: Complex64 = d.iter().zip(&lambda).map(|(&p, &l)| p * (l / total)).sum();
    if (mean - z).norm() > REPRESENTATION_TOL || (total - 1.0).abs() > REPRESENTATION_TOL {
        return Err(outside());
    }
    Ok(d.iter().zip(&lambda).filter(|(_, &l)| l > 0.0).map(|(&p, &l)| (p, l / total)).collect())
}

fn draw_from(rep: &[(Complex64, f64)], u: f64) -> Complex64 {
    let mut acc = 0.0;
    for &(p, l) in rep {
        acc += l;
        if u < acc {
            return p;
        }
    }
    rep.last().expect("nonempty representation").0
}

/// Each site independently draws a point of `d` whose mean is the site's value.
pub fn convexify_window(w: &SequenceWindow, d: &[Complex64], rng: &SeededRng) -> Result<SequenceWindow> {
    let mut reps: HashMap<(u64, u64), Vec<(Complex64, f64)>> = HashMap::new();
    let mut values = Vec::with_capacity(w.len());
    for (p, z) in w.iter() {
        let key = (z.re.to_bits(), z.im.to_bits());
        let rep = match reps.entry(key) {
            std::collections::hash_map::Entry::Occupied(e) => e.into_mut(),
            std::collections::hash_map::Entry::Vacant(e) => e.insert(convex_representation(d, z)?),
        };
        values.push(draw_from(rep, rng.for_site(&p).random::<f64>()));
    }
    SequenceWindow::new(*w.region(), values, Domain::Finite(d.to_vec()))
}

/// `3σ`-style envelope for iid unimodular averages of `n` sites.
pub fn white_noise_envelope(n: usize) -> f64 {
    4.0 / (n.max(1) as f64).sqrt()
}

/// Independent uniform points of the circle at every site.
pub fn white_noise_window(region: &BoxRegion, rng: &SeededRng) -> SequenceWindow {
    let values = region.points().map(|p| Complex64::from_polar(1.0, rng.for_site(&p).random::<f64>() * TAU)).collect();
    SequenceWindow::from_parts_unchecked(*region, values, Domain::Circle)
}

/// Ten one-dimensional entries over distinct shifts, each with a nonzero exponent
/// pattern, whose white-noise averages tend to zero.
pub fn white_noise_entries() -> Vec<CorrelationEntry> {
    let p = LatticePoint::d1;
    let table: [(&[i64], &[(u32, u32)]); 10] = [
        (&[0], &[(1, 0)]),
        (&[0], &[(3, 0)]),
        (&[1, 0], &[(1, 0), (0, 1)]),
        (&[0, 3], &[(2, 0), (0, 1)]),
        (&[0, 5], &[(1, 0), (1, 0)]),
        (&[2, 0], &[(1, 0), (0, 1)]),
        (&[0, 7], &[(0, 3), (2, 0)]),
        (&[0, 1, 2], &[(1, 0), (1, 0), (0, 2)]),
        (&[0, 1, 4], &[(1, 0), (0, 1), (1, 0)]),
        (&[0, 2, 3, 6], &[(1, 0), (0, 1), (1, 0), (0, 1)]),
    ];
    table
        .iter()
        .map(|(shifts, exps)| {
            CorrelationEntry::distinct(shifts.iter().map(|&x| p(x)).collect(), StarPolynomial::monomial(exps.to_vec()))
                .expect("arity matches")
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WhiteNoiseReport {
    pub n: usize,
    pub seed: u64,
    pub envelope: f64,
    /// `|average|` of each entry of [`white_noise_entries`] over `[0, n)`
    pub values: Vec<f64>,
    pub pass: bool,
}

/// White noise on `[0, n + reach)` checked entry by entry over `[0, n)`.
pub fn white_noise_check(n: usize, seed: u64) -> Result<(SequenceWindow, WhiteNoiseReport)> {
    if n == 0 {
        return Err(Error::Input("white-noise window needs n > 0".into()));
    }
    let entries = white_noise_entries();
    let reach = entries.iter().flat_map(|e| e.shifts.iter().map(|h| h.coord(0))).max().unwrap_or(0);
    let w = white_noise_window(&BoxRegion::interval(0, n as i64 + reach), &SeededRng::new(seed, 0));
    let f = BoxRegion::interval(0, n as i64);
    let values = entries.iter().map(|e| cesaro_correlation_region(&w, e, &f).map(|z| z.norm())).collect::<Result<Vec<_>>>()?;
    let envelope = white_noise_envelope(n);
    let pass = values.iter().all(|&v| v <= envelope);
    Ok((w, WhiteNoiseReport { n, seed, envelope, values, pass }))
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct WhiteNoiseGenerator;

impl WitnessGenerator for WhiteNoiseGenerator {
    fn domain(&self) -> Domain {
        Domain::Circle
    }

    fn fill(&self) -> Complex64 {
        Complex64::new(1.0, 0.0)
    }

    fn generate(&self, region: &BoxRegion, rng: &SeededRng) -> Result<SequenceWindow> {
        Ok(white_noise_window(region, rng))
    }

    fn describe(&self) -> String {
        "white noise on the circle".into()
    }
}

/// Independent `{0,1}` sites with `P(1) = p`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BernoulliGenerator {
    p: f64,
}

impl BernoulliGenerator {
    pub fn new(p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Domain(format!("Bernoulli parameter {p} is outside [0, 1]")));
        }
        Ok(BernoulliGenerator { p })
    }

    pub fn p(&self) -> f64 {
        self.p
    }
}

impl WitnessGenerator for BernoulliGenerator {
    fn domain(&self) -> Domain {
        Domain::Binary
    }

    fn fill(&self) -> Complex64 {
        nearest_domain_value(&Domain::Binary, Complex64::new(self.p, 0.0))
    }

    fn generate(&self, region: &BoxRegion, rng: &SeededRng) -> Result<SequenceWindow> {
        let values = region
            .points()
            .map(|q| Complex64::new(if rng.for_site(&q).random::<f64>() < self.p { 1.0 } else { 0.0 }, 0.0))
            .collect();
        Ok(SequenceWindow::from_parts_unchecked(*region, values, Domain::Binary))
    }

    fn describe(&self) -> String {
        format!("iid Bernoulli({})", self.p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::averaging::{cesaro_correlation_region, window_mean, CorrelationEntry, StarPolynomial};
    use crate::lattice::FiniteLatticeSet;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn streams_are_reproducible() {
        let a: Vec<u64> = (0..4).map(|_| 0).scan(SeededRng::new(7, 3), |r, _: u64| Some(r.next_u64())).collect();
        let b: Vec<u64> = (0..4).map(|_| 0).scan(SeededRng::new(7, 3), |r, _: u64| Some(r.next_u64())).collect();
        assert_eq!(a, b);
        let mut other = SeededRng::new(7, 4);
        assert_ne!(a[0], other.next_u64());
        let root = SeededRng::new(1, 0);
        assert_eq!(
            root.for_site(&LatticePoint::d2(3, -1)).next_u64(),
            root.for_site(&LatticePoint::d2(3, -1)).next_u64()
        );
        assert_ne!(root.for_site(&LatticePoint::d2(3, -1)).next_u64(), root.for_site(&LatticePoint::d2(-1, 3)).next_u64());
    }

    #[test]
    fn biased_circle_rejects_large_bias() {
        assert!(BiasedCircle::new(Complex64::new(1.0, 0.1)).is_err());
        assert!(BiasedCircle::new(Complex64::new(0.0, 1.0)).is_ok());
    }

    #[test]
    fn circle_moments_small_sample() {
        let r = biased_circle_moments(c(1.0), 20_000, &mut SeededRng::new(5, 0)).unwrap();
        assert!(r.pass, "{r:?}");
        assert!(r.proposals >= r.draws && r.proposals < 3 * r.draws);
    }

    #[test]
    fn lift_of_constant_witness() {
        let base = FiniteLatticeSet::from_ints(0..50);
        let region = BoxRegion::interval(0, 53);
        let w = SequenceWindow::constant(region, c(0.6), Domain::Disc).unwrap();
        let b = WitnessBundle::uniform(base, vec![w], "constant").unwrap();
        let lifted = lift_witnesses_to_circle(&b, &[], 3, 0.05, &SeededRng::new(2, 0)).unwrap();
        assert!((0.25..=0.35).contains(&lifted.mean_value.re));
        assert_eq!(lifted.bundle.k(), lifted.copies);
        assert_eq!(*lifted.bundle.domain(), Domain::Circle);
        // the shift-1 correlation of the lift tends to 0.6^2 / 4 = 0.09 > δ
        let h0 = [LatticePoint::d1(1)];
        assert!(matches!(lift_witnesses_to_circle(&b, &h0, 3, 0.05, &SeededRng::new(2, 0)), Err(Error::Convergence(_))));
    }

    #[test]
    fn lift_of_zero_witnesses() {
        let base = FiniteLatticeSet::from_ints(0..200);
        let w = SequenceWindow::constant(BoxRegion::interval(0, 203), c(0.0), Domain::Disc).unwrap();
        let b = WitnessBundle::uniform(base, vec![w.clone(), w], "zero").unwrap();
        let h0: Vec<LatticePoint> = (1..=3).map(LatticePoint::d1).collect();
        let lifted = lift_witnesses_to_circle(&b, &h0, 3, 0.05, &SeededRng::new(9, 0)).unwrap();
        assert!(lifted.worst_correlation() < 0.05 && lifted.mean_value.norm() < 0.05);
        assert_eq!(lifted.checks.len(), 9);
    }

    #[test]
    fn representations() {
        let square = [c(1.0), Complex64::new(0.0, 1.0), c(-1.0), Complex64::new(0.0, -1.0)];
        let rep = convex_representation(&square, Complex64::new(0.2, 0.3)).unwrap();
        let mean: Complex64 = rep.iter().map(|&(p, l)| p * l).sum();
        assert!((mean - Complex64::new(0.2, 0.3)).norm() < 1e-12);
        assert!(rep.len() <= 3);
        assert!(matches!(convex_representation(&square, c(0.9) + Complex64::new(0.0, 0.9)), Err(Error::Geometry { .. })));
        let coin = convex_representation(&[c(0.0), c(1.0)], c(0.25)).unwrap();
        assert_eq!(coin, vec![(c(0.0), 0.75), (c(1.0), 0.25)]);
        // slightly outside but within tolerance is projected
        assert!(convex_representation(&[c(0.0), c(1.0)], c(1.0 + 1e-11)).is_ok());
        assert!(convex_representation(&[c(0.0), c(1.0)], c(1.1)).is_err());
        let three = [c(0.0), c(0.5), c(1.0)];
        let rep = convex_representation(&three, c(0.75)).unwrap();
        assert!((rep.iter().map(|&(p, l)| p * l).sum::<Complex64>() - c(0.75)).norm() < 1e-12);
    }

    #[test]
    fn convexify_coin() {
        let region = BoxRegion::interval(0, 20_001);
        let w = SequenceWindow::constant(region, c(0.5), Domain::UnitInterval).unwrap();
        let out = convexify_window(&w, &[c(0.0), c(1.0)], &SeededRng::new(11, 0)).unwrap();
        let f = BoxRegion::interval(0, 20_000);
        assert!((window_mean(&out, &f).unwrap().re - 0.5).abs() < 0.02);
        let pair = CorrelationEntry::new(vec![LatticePoint::d1(0), LatticePoint::d1(1)], StarPolynomial::product(2)).unwrap();
        assert!((cesaro_correlation_region(&out, &pair, &f).unwrap().re - 0.25).abs() < 0.02);
    }

    #[test]
    fn white_noise_is_unimodular_and_deterministic() {
        let region = BoxRegion::interval(-5, 100);
        let a = white_noise_window(&region, &SeededRng::new(3, 1));
        let b = white_noise_window(&region, &SeededRng::new(3, 1));
        assert_eq!(a, b);
        assert!(a.values().iter().all(|z| (z.norm() - 1.0).abs() < 1e-12));
        // a sub-window sees the same values: draws are per site
        let sub = white_noise_window(&BoxRegion::interval(10, 20), &SeededRng::new(3, 1));
        assert_eq!(sub.values(), a.restrict(&BoxRegion::interval(10, 20)).unwrap().values());
    }

    #[test]
    fn bernoulli_generator_validates() {
        assert!(BernoulliGenerator::new(1.5).is_err());
        let g = BernoulliGenerator::new(0.0).unwrap();
        let w = g.generate(&BoxRegion::interval(0, 10), &SeededRng::new(0, 0)).unwrap();
        assert!(w.values().iter().all(|&z| z == c(0.0)));
        assert_eq!(g.fill(), c(0.0));
    }
}
