//! Invariants checked on randomly generated inputs.

use std::collections::HashSet;

use num_complex::Complex64;
use proptest::prelude::*;

use vdclab::averaging::{
    cesaro_correlation, weyl_ud_test, CorrelationEntry, Domain, SequenceWindow, StarPolynomial, Term,
};
use vdclab::correspondence::{mps_correlation, product_mps, rationalize, FiniteMps};
use vdclab::lattice::{boundary_set, invariance_ratio, folner_box, BoxRegion, FiniteLatticeSet, FolnerPlan, LatticePoint};
use vdclab::randomization::{convex_representation, SeededRng};
use vdclab::spectral::{grid_fourier, primal_atom_lp, GridMeasure};
use vdclab::tiling::{congruent_partition, dyadic_tiling, CongruentFamily};

fn point(dim: usize, r: i64) -> impl Strategy<Value = LatticePoint> {
    prop::collection::vec(-r..=r, dim).prop_map(|c| LatticePoint::new(&c).unwrap())
}

fn lattice_set(dim: usize, r: i64, max: usize) -> impl Strategy<Value = FiniteLatticeSet> {
    prop::collection::vec(point(dim, r), 1..max).prop_map(move |pts| FiniteLatticeSet::new(dim, pts).unwrap())
}

fn disc_value() -> impl Strategy<Value = Complex64> {
    (0.0..1.0f64, 0.0..std::f64::consts::TAU).prop_map(|(r, t)| Complex64::from_polar(r, t))
}

fn window(region: BoxRegion, values: Vec<Complex64>) -> SequenceWindow {
    SequenceWindow::new(region, values, Domain::Disc).unwrap()
}

/// Points `g` whose translate `S + g` meets `T` without lying inside it, by enumeration.
fn boundary_oracle(s: &FiniteLatticeSet, t: &FiniteLatticeSet) -> HashSet<LatticePoint> {
    let mut out = HashSet::new();
    for &g0 in t.iter() {
        for &h in s.iter() {
            let g = g0 - h;
            let inside = s.iter().filter(|&&a| t.contains(&(a + g))).count();
            if inside > 0 && inside < s.len() {
                out.insert(g);
            }
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn boundary_is_translation_equivariant(
        s in lattice_set(2, 2, 4),
        t in lattice_set(2, 5, 25),
        c in point(2, 50),
    ) {
        prop_assert_eq!(boundary_set(&s, &t.translate(c)).unwrap(), boundary_set(&s, &t).unwrap().translate(c));
    }

    #[test]
    fn boundary_matches_enumeration(s in lattice_set(2, 2, 5), t in lattice_set(2, 4, 30)) {
        let got: HashSet<LatticePoint> = boundary_set(&s, &t).unwrap().iter().copied().collect();
        prop_assert_eq!(got, boundary_oracle(&s, &t));
    }

    #[test]
    fn interior_points_keep_their_shifts(s in lattice_set(2, 2, 5), t in lattice_set(2, 4, 40)) {
        let s = s.union(&FiniteLatticeSet::new(2, [LatticePoint::origin(2)]).unwrap());
        let bd = boundary_set(&s, &t).unwrap();
        for g in t.iter().filter(|g| !bd.contains(g)) {
            prop_assert!(s.iter().all(|&a| t.contains(&(a + *g))));
        }
    }

    #[test]
    fn cesaro_is_linear_in_coefficients(
        values in prop::collection::vec(disc_value(), 30),
        a in disc_value(),
        b in disc_value(),
    ) {
        let region = BoxRegion::interval(0, 30);
        let w = window(region, values);
        let f = BoxRegion::interval(0, 25).to_set();
        let shifts = vec![LatticePoint::d1(0), LatticePoint::d1(3)];
        let p1 = StarPolynomial::new(2, vec![Term { coef: a, exps: vec![(1, 0), (0, 1)] }], a.norm()).unwrap();
        let p2 = StarPolynomial::new(2, vec![Term { coef: b, exps: vec![(2, 1), (0, 0)] }], b.norm()).unwrap();
        let sum = p1.add(&p2).unwrap();
        let avg = |p: StarPolynomial| cesaro_correlation(&w, &CorrelationEntry::new(shifts.clone(), p).unwrap(), &f).unwrap();
        let lhs = avg(sum);
        let rhs = avg(p1) + avg(p2);
        prop_assert!((lhs - rhs).norm() < 1e-12);
    }

    #[test]
    fn weyl_moduli_are_rotation_invariant(angles in prop::collection::vec(0.0..1.0f64, 50), omega in 0.0..1.0f64) {
        let region = BoxRegion::interval(0, 50);
        let circle = |t: f64| Complex64::from_polar(1.0, std::f64::consts::TAU * t);
        let w = SequenceWindow::new(region, angles.iter().map(|&t| circle(t)).collect(), Domain::Circle).unwrap();
        let rot = w.map(Domain::Circle, |z| z * circle(omega)).unwrap();
        let f = region.to_set();
        let a = weyl_ud_test(&w, 6, &f, 0.1).unwrap();
        let b = weyl_ud_test(&rot, 6, &f, 0.1).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn partition_tiles_are_disjoint_genuine_tiles(dim in 1..=2usize, top in 1..=4u32, n in 4..=40usize) {
        let family = CongruentFamily::new(dim, (0..=top).collect()).unwrap();
        let plan = FolnerPlan::anchored(dim);
        let p = congruent_partition(&family, &plan, n, None).unwrap();
        let mut seen = HashSet::new();
        for t in p.tiles() {
            let tiling = dyadic_tiling(t.level, dim).unwrap();
            prop_assert!(tiling.is_center(&t.center));
            for q in t.region().points() {
                prop_assert!(seen.insert(q));
            }
        }
        prop_assert!(plan.region(n).points().all(|q| seen.contains(&q)));
    }

    #[test]
    fn coarse_tiles_split_into_finer_ones(dim in 1..=3usize, k in 1..=4u32, c in prop::collection::vec(-8i64..8, 3)) {
        let coarse = dyadic_tiling(k, dim).unwrap();
        let fine = dyadic_tiling(k - 1, dim).unwrap();
        let center = LatticePoint::new(&c[..dim]).unwrap().scale(1 << k);
        let tile = coarse.tile(center);
        let parts = fine.centers_in(&tile);
        prop_assert_eq!(parts.len(), 1 << dim);
        let total: usize = parts.iter().map(|&c| fine.tile(c).len()).sum();
        prop_assert_eq!(total, tile.len());
    }

    #[test]
    fn rotations_preserve_measure(q in 2..=12usize, seed in any::<u64>()) {
        let obs: Vec<Complex64> = (0..q).map(|i| Complex64::new((i as f64 * 0.37 + seed as f64 * 1e-3).sin(), 0.0)).collect();
        let m = FiniteMps::rotation(q, obs).unwrap();
        let phi: Vec<f64> = (0..q).map(|i| ((i as u64).wrapping_mul(seed | 1) % 97) as f64).collect();
        let base: f64 = (0..q).map(|x| m.weights()[x] * phi[x]).sum();
        for h in -5..=5i64 {
            let shifted = m.integrate_shifted(&LatticePoint::d1(h), |x| phi[x]);
            prop_assert!((shifted - base).abs() <= 1e-9 * (1.0 + base.abs()));
        }
    }

    #[test]
    fn products_factor_single_entries(q1 in 2..=5usize, q2 in 2..=5usize, h in -4i64..=4) {
        let m1 = FiniteMps::rotation(q1, (0..q1).map(|i| Complex64::from_polar(1.0, i as f64)).collect()).unwrap();
        let m2 = FiniteMps::rotation(q2, (0..q2).map(|i| Complex64::from_polar(1.0, 2.0 * i as f64)).collect()).unwrap();
        let prod = product_mps(&m1, &m2).unwrap();
        let e = CorrelationEntry::new(vec![LatticePoint::d1(0), LatticePoint::d1(h)], StarPolynomial::correlation()).unwrap();
        let lhs = mps_correlation(&prod, &e).unwrap();
        let rhs = mps_correlation(&m1, &e).unwrap() * mps_correlation(&m2, &e).unwrap();
        prop_assert!((lhs - rhs).norm() < 1e-12);
    }

    #[test]
    fn rationalized_weights_meet_tolerance(raw in prop::collection::vec(0.01..1.0f64, 1..6), tol in 1e-3..0.1f64) {
        let total: f64 = raw.iter().sum();
        let w: Vec<f64> = raw.iter().map(|x| x / total).collect();
        let (q, counts) = rationalize(&w, tol, 10_000).unwrap();
        prop_assert_eq!(counts.iter().sum::<u64>(), q);
        let err: f64 = w.iter().zip(&counts).map(|(&x, &c)| (x - c as f64 / q as f64).abs()).sum();
        prop_assert!(err <= tol);
    }

    #[test]
    fn convex_representations_reproduce_the_point(z in disc_value()) {
        let d: Vec<Complex64> = [1.0, -1.0].iter().flat_map(|&a| [Complex64::new(a, 0.0), Complex64::new(0.0, a)]).collect();
        match convex_representation(&d, z) {
            Ok(rep) => {
                let mean: Complex64 = rep.iter().map(|&(p, l)| p * l).sum();
                let mass: f64 = rep.iter().map(|&(_, l)| l).sum();
                prop_assert!((mean - z).norm() <= 1e-9);
                prop_assert!((mass - 1.0).abs() <= 1e-9);
                prop_assert!(rep.iter().all(|&(_, l)| l >= 0.0));
            }
            // only points outside the square {|re| + |im| <= 1} may be rejected
            Err(_) => prop_assert!(z.re.abs() + z.im.abs() > 1.0 - 1e-9),
        }
    }

    #[test]
    fn grid_measure_transform_is_a_characteristic_function(raw in prop::collection::vec(0.0..1.0f64, 12), h in -30i64..30) {
        let total: f64 = raw.iter().sum::<f64>().max(1e-9);
        let mu = GridMeasure::new(1, 12, raw.iter().map(|x| x / total).collect()).unwrap();
        let f = |k: i64| grid_fourier(&mu, &LatticePoint::d1(k)).unwrap();
        prop_assert!((f(0) - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        prop_assert!(f(h).norm() <= 1.0 + 1e-12);
        prop_assert!((f(-h) - f(h).conj()).norm() < 1e-12);
        prop_assert!((f(h + 12) - f(h)).norm() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn atom_optimum_is_monotone_and_symmetric(hs in prop::collection::vec(1i64..20, 1..5), m in 24..=48usize) {
        let h0: Vec<LatticePoint> = hs.iter().filter(|&&h| h % m as i64 != 0).map(|&h| LatticePoint::d1(h)).collect();
        prop_assume!(!h0.is_empty());
        let mut prev = 1.0;
        for k in 1..=h0.len() {
            let v = primal_atom_lp(&h0[..k], 1, m).unwrap().value;
            prop_assert!(v <= prev + 1e-9);
            prev = v;
        }
        let neg: Vec<LatticePoint> = h0.iter().map(|&h| -h).collect();
        let v_neg = primal_atom_lp(&neg, 1, m).unwrap().value;
        prop_assert!((v_neg - prev).abs() <= 1e-9);
    }
}

#[test]
fn invariance_ratio_decreases_along_boxes() {
    let s = FiniteLatticeSet::new(1, [LatticePoint::d1(0), LatticePoint::d1(1)]).unwrap();
    let plan = FolnerPlan::anchored(1);
    let r: Vec<f64> = [10, 100, 1000].iter().map(|&n| invariance_ratio(&s, &folner_box(&plan, n).unwrap()).unwrap()).collect();
    assert!(r[0] > r[1] && r[1] > r[2]);
}

#[test]
fn seeded_streams_are_reproducible() {
    use rand::RngCore;
    let mut a = SeededRng::new(9, 4);
    let mut b = SeededRng::new(9, 4);
    let xs: Vec<u64> = (0..64).map(|_| a.next_u64()).collect();
    let ys: Vec<u64> = (0..64).map(|_| b.next_u64()).collect();
    assert_eq!(xs, ys);
    let mut c = SeededRng::new(9, 5);
    assert_ne!(xs[0], c.next_u64());
}
