//! Acceptance suite: one printed line per criterion, tolerances pinned below.

use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::Rng;

use vdclab::averaging::{
    cesaro_correlation, weyl_ud_test, CorrelationEntry, CorrelationSpec, Domain, SequenceWindow, SetShift,
    StarPolynomial,
};
use vdclab::casebook::{run_all, CaseParams};
use vdclab::correspondence::{inverse_furstenberg, synthesize_sequence, FiniteMps, SetSource, SynthesisSchedule, WitnessSource};
use vdclab::lattice::{boundary_set, BoxRegion, FiniteLatticeSet, FolnerPlan, LatticePoint};
use vdclab::randomization::{biased_circle_moments, white_noise_check, SeededRng};
use vdclab::spectral::{dual_cosine_certificate, grid_fourier, primal_atom_lp, vdc_evidence, GridMeasure, HSet};
use vdclab::tiling::{assemble_blocks, congruent_partition, CongruentFamily};

const MOMENT_TOL: f64 = 5e-3;
const MOMENT_DRAWS: usize = 1_000_000;
const AVERAGING_INSTANCES: usize = 200;
const ASSEMBLY_INSTANCES: usize = 50;
const SYNTHESIS_HORIZON: usize = 1 << 16;
const SYNTHESIS_TOL: f64 = 0.05;
const IFC_TOL: f64 = 0.02;
const GAP_TOL: f64 = 1e-6;
const LP_INSTANCES: usize = 20;
const WHITE_NOISE_N: usize = 100_000;
const WHITE_NOISE_TOL: f64 = 0.02;
const WEYL_TOL: f64 = 0.01;
const WEYL_LMAX: usize = 8;
const WEYL_N: usize = 100_000;
const SEED: u64 = 20_240_601;

struct Outcome {
    pass: bool,
    detail: String,
}

fn timed(budget: Duration, f: impl FnOnce() -> Outcome) -> (Outcome, Duration) {
    let start = Instant::now();
    let mut out = f();
    let took = start.elapsed();
    if took > budget {
        out.pass = false;
        out.detail.push_str(&format!("; over budget {budget:?}"));
    }
    (out, took)
}

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

fn ruzsa_moments() -> Outcome {
    let mut rng = SeededRng::new(SEED, 1);
    let r = biased_circle_moments(c(1.0), MOMENT_DRAWS, &mut rng).expect("valid bias");
    let d1 = (r.mean - c(0.5)).norm();
    let d2 = r.second.norm();
    Outcome { pass: d1 <= MOMENT_TOL && d2 <= MOMENT_TOL, detail: format!("|E z - 1/2| = {d1:.2e}, |E z^2| = {d2:.2e}") }
}

fn random_disc(rng: &mut SeededRng) -> Complex64 {
    loop {
        let z = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        if z.norm() <= 1.0 {
            return z;
        }
    }
}

fn averaging_lemma() -> Outcome {
    let mut rng = SeededRng::new(SEED, 2);
    let mut worst_ratio: f64 = 0.0;
    let mut violations = 0;
    for _ in 0..AVERAGING_INSTANCES {
        let dim = rng.random_range(1..=3usize);
        let side = rng.random_range(2..=[40i64, 12, 6][dim - 1]);
        let region = BoxRegion::cube(dim, side);
        let big_m: f64 = rng.random_range(0.1..5.0);
        let delta: f64 = rng.random_range(0.01..0.5);
        let w = SequenceWindow::from_fn(region, Domain::Disc, |_| random_disc(&mut rng)).unwrap();
        let e: Vec<LatticePoint> = region.points().filter(|_| rng.random_bool(0.7)).collect();
        if e.is_empty() {
            continue;
        }
        // drop strictly fewer than δ|E| points, preferring the largest values
        let max_drop = ((delta * e.len() as f64).ceil() as usize).saturating_sub(1);
        let drop = rng.random_range(0..=max_drop);
        let mut sorted = e.clone();
        sorted.sort_by(|a, b| w.get(b).unwrap().re.total_cmp(&w.get(a).unwrap().re));
        let e_prime: Vec<LatticePoint> = sorted[drop..].to_vec();
        if e_prime.is_empty() {
            continue;
        }
        let poly = StarPolynomial::identity().scale(c(big_m));
        let entry = CorrelationEntry::new(vec![LatticePoint::origin(dim)], poly).unwrap();
        let a = cesaro_correlation(&w, &entry, &FiniteLatticeSet::new(dim, e.clone()).unwrap()).unwrap();
        let b = cesaro_correlation(&w, &entry, &FiniteLatticeSet::new(dim, e_prime).unwrap()).unwrap();
        let diff = (a - b).norm();
        let bound = 2.0 * big_m * delta;
        worst_ratio = worst_ratio.max(diff / bound);
        if diff >= bound {
            violations += 1;
        }
    }
    Outcome { pass: violations == 0, detail: format!("{violations} violations, worst diff/(2Mδ) = {worst_ratio:.3}") }
}

fn assembly_bound() -> Outcome {
    let mut rng = SeededRng::new(SEED, 3);
    let mut worst_ratio: f64 = 0.0;
    let mut violations = 0;
    for _ in 0..ASSEMBLY_INSTANCES {
        let dim = rng.random_range(1..=2usize);
        let top = rng.random_range(2..=if dim == 1 { 6u32 } else { 3 });
        let levels: Vec<u32> = (1..=top).collect();
        let family = CongruentFamily::new(dim, levels).unwrap();
        let plan = FolnerPlan::anchored(dim);
        let n = rng.random_range(if dim == 1 { 100..=400usize } else { 20..=40 });
        let partition = congruent_partition(&family, &plan, n, None).unwrap();
        let big_m: f64 = rng.random_range(0.5..3.0);
        let reach = rng.random_range(1..=2i64);
        let mut shifts = vec![LatticePoint::origin(dim)];
        for _ in 0..rng.random_range(1..=2usize) {
            let coords: Vec<i64> = (0..dim).map(|_| rng.random_range(-reach..=reach)).collect();
            let h = LatticePoint::new(&coords).unwrap();
            if !shifts.contains(&h) {
                shifts.push(h);
            }
        }
        let poly = StarPolynomial::product(shifts.len()).scale(c(big_m));
        let entry = CorrelationEntry::new(shifts.clone(), poly).unwrap();
        let blocks: Vec<SequenceWindow> = partition
            .tiles()
            .iter()
            .map(|t| {
                let shape = BoxRegion::cube(dim, 1 << t.level);
                SequenceWindow::from_fn(shape.expand_by(&shifts), Domain::Disc, |_| random_disc(&mut rng)).unwrap()
            })
            .collect();
        let a = plan.region(n);
        let hull = partition.hull().unwrap();
        let region = hull.expand_by(&shifts);
        let inner: Vec<BoxRegion> = partition.tiles().iter().map(|t| t.region()).collect();
        let fill = random_disc(&mut rng);
        let block_cubes: Vec<SequenceWindow> = partition
            .tiles()
            .iter()
            .zip(&blocks)
            .map(|(t, b)| b.restrict(&BoxRegion::cube(dim, 1 << t.level)).unwrap())
            .collect();
        let assembled = assemble_blocks(&partition, &block_cubes, fill, region, Domain::Disc).unwrap();

        // tiles contained in A, and the quantities of the lemma
        let s_set = FiniteLatticeSet::new(dim, shifts.clone()).unwrap();
        let mut covered = 0usize;
        let mut max_ratio: f64 = 0.0;
        let mut weighted = Complex64::new(0.0, 0.0);
        for ((t, r), own) in partition.tiles().iter().zip(&inner).zip(&blocks) {
            if !a.contains_box(r) {
                continue;
            }
            covered += r.len();
            let shape = BoxRegion::cube(dim, 1 << t.level).to_set();
            let bd = boundary_set(&s_set, &shape).unwrap();
            max_ratio = max_ratio.max(bd.len() as f64 / shape.len() as f64);
            // the block is a full sequence, so shifts may read past its tile
            let stat = cesaro_correlation(own, &entry, &shape).unwrap();
            weighted += stat * r.len() as f64;
        }
        if covered == 0 {
            continue;
        }
        let weighted = weighted / covered as f64;
        let uncovered = 1.0 - covered as f64 / a.len() as f64;
        let delta = big_m * max_ratio.max(uncovered) * (1.0 + 1e-9) + 1e-12;
        let lhs = cesaro_correlation(&assembled, &entry, &a.to_set()).unwrap();
        let diff = (lhs - weighted).norm();
        worst_ratio = worst_ratio.max(diff / (4.0 * delta));
        if diff > 4.0 * delta {
            violations += 1;
        }
    }
    Outcome { pass: violations == 0, detail: format!("{violations} violations, worst diff/(4δ) = {worst_ratio:.3}") }
}

fn synthesis_fidelity() -> Outcome {
    let id = StarPolynomial::identity();
    let spec = CorrelationSpec::new(vec![
        CorrelationEntry::new(vec![LatticePoint::d1(0)], id).unwrap(),
        CorrelationEntry::new(vec![LatticePoint::d1(0), LatticePoint::d1(1)], StarPolynomial::product(2)).unwrap(),
    ])
    .unwrap();
    let m = FiniteMps::rotation_indicator(2, &[0]).unwrap();
    let plan = FolnerPlan::anchored(1);
    let schedule = SynthesisSchedule::default_for(&plan, SYNTHESIS_HORIZON).with_seed(SEED);
    let s = synthesize_sequence(&spec, &WitnessSource::Mps(m), &plan, SYNTHESIS_HORIZON, &schedule).unwrap();
    // γ = (1/2, 0) for the two-point rotation with the indicator of one point
    let n = SYNTHESIS_HORIZON;
    let xs: Vec<f64> = (0..=n as i64).map(|i| s.window.value_at(&LatticePoint::d1(i)).unwrap().re).collect();
    let mean = xs[..n].iter().sum::<f64>() / n as f64;
    let corr = xs.windows(2).take(n).map(|p| p[0] * p[1]).sum::<f64>() / n as f64;
    let err = (mean - 0.5).abs().max(corr.abs());
    let curve = s.max_error_by_n();
    let tail: Vec<f64> = curve.iter().rev().take(4).rev().map(|&(_, e)| e).collect();
    let monotone = tail.windows(2).all(|p| p[1] <= p[0]);
    Outcome {
        pass: err <= SYNTHESIS_TOL && monotone,
        detail: format!("final error {err:.2e}, last four dyadic errors {tail:.4?}"),
    }
}

fn inverse_furstenberg_check() -> Outcome {
    let m = FiniteMps::identity(1, vec![0.5, 0.5], vec![c(1.0), c(0.0)], Domain::Binary).unwrap();
    let families = vec![vec![SetShift::keep(LatticePoint::d1(0))]];
    let unions: Vec<Vec<LatticePoint>> =
        [vec![0], vec![0, 1], vec![0, 1, 2], vec![0, 4], vec![0, 3, 7]].iter().map(|u| u.iter().map(|&x| LatticePoint::d1(x)).collect()).collect();
    let plan = FolnerPlan::anchored(1);
    let schedule = SynthesisSchedule::default_for(&plan, SYNTHESIS_HORIZON).with_seed(SEED);
    let r = inverse_furstenberg(&SetSource::Mps(m), &families, &unions, &plan, SYNTHESIS_HORIZON, &schedule).unwrap();
    let union_dev = r.unions.iter().map(|u| (u.density - 0.5).abs()).fold(0.0, f64::max);

    let pair = vec![vec![SetShift::keep(LatticePoint::d1(0)), SetShift::keep(LatticePoint::d1(1))]];
    let iid = SetSource::Iid { p: 0.5, dim: 1 };
    let r2 = inverse_furstenberg(&iid, &pair, &[], &plan, SYNTHESIS_HORIZON, &schedule).unwrap();
    let pair_dev = (r2.families[0].density - 0.25).abs();
    Outcome {
        pass: r.unions.len() == 5 && union_dev <= IFC_TOL && pair_dev <= IFC_TOL,
        detail: format!("union deviation from 1/2 {union_dev:.2e}, iid pair deviation from 1/4 {pair_dev:.2e}"),
    }
}

fn certificate_gap(h0: &[LatticePoint], dim: usize, m: usize) -> f64 {
    let cert = dual_cosine_certificate(h0, dim, m).unwrap();
    let primal = primal_atom_lp(h0, dim, m).unwrap();
    // T evaluated independently at every grid point
    let mut min_t = f64::INFINITY;
    for idx in 0..m.pow(dim as u32) {
        let mut x = vec![0.0; dim];
        let mut r = idx;
        for ax in (0..dim).rev() {
            x[ax] = (r % m) as f64 / m as f64;
            r /= m;
        }
        min_t = min_t.min(cert.eval(&x));
    }
    let eps = -min_t;
    let dual = eps / (1.0 + eps);
    let feasible = h0.iter().all(|h| grid_fourier(&primal.measure, h).unwrap().norm() <= 1e-7);
    if !feasible || (cert.value_at_zero() - 1.0).abs() > 1e-7 {
        return f64::INFINITY;
    }
    (primal.value - dual).abs()
}

fn spectral_lp() -> Outcome {
    let mut rng = SeededRng::new(SEED, 6);
    let mut worst_gap: f64 = 0.0;
    let mut solved = 0;
    while solved < LP_INSTANCES {
        let dim = if rng.random_bool(0.7) { 1 } else { 2 };
        let m = if dim == 1 { rng.random_range(8..=64usize) } else { rng.random_range(4..=10usize) };
        let k = rng.random_range(1..=4usize);
        let h0: Vec<LatticePoint> = (0..k)
            .map(|_| {
                let coords: Vec<i64> = (0..dim).map(|_| rng.random_range(-12..=12i64)).collect();
                LatticePoint::new(&coords).unwrap()
            })
            .collect();
        let aliased = h0.iter().any(|h| h.coords().iter().all(|&x| x.rem_euclid(m as i64) == 0));
        if aliased {
            continue;
        }
        worst_gap = worst_gap.max(certificate_gap(&h0, dim, m));
        solved += 1;
    }
    // H0 = {1..k}: uniform mass on the (k+1)-th roots of unity is feasible with atom 1/(k+1)
    let mut floor_ok = true;
    let mut floors = Vec::new();
    for k in [1usize, 2, 3, 5] {
        let m = 120;
        let h0: Vec<LatticePoint> = (1..=k as i64).map(LatticePoint::d1).collect();
        let cells: Vec<Vec<usize>> = (0..=k).map(|j| vec![j * m / (k + 1)]).collect();
        let witness = GridMeasure::uniform_on(1, m, &cells).unwrap();
        let witness_ok = h0.iter().all(|h| grid_fourier(&witness, h).unwrap().norm() <= 1e-12);
        let v = primal_atom_lp(&h0, 1, m).unwrap().value;
        floor_ok &= witness_ok && v >= 1.0 / (k + 1) as f64 - 1e-9;
        floors.push(v);
    }
    let squares = HSet::parse("squares:<=100").unwrap();
    let report = vdc_evidence(&squares, &[2, 4, 6, 8], &[256], 0.05).unwrap();
    let trace = report.finest_trace();
    let decreasing = trace.len() == 4 && trace.windows(2).all(|p| p[1] < p[0]);
    Outcome {
        pass: worst_gap <= GAP_TOL && floor_ok && decreasing,
        detail: format!("worst gap {worst_gap:.1e}, {{1..k}} optima {floors:.4?}, squares {trace:.4?}"),
    }
}

fn white_noise() -> Outcome {
    let (_, r) = white_noise_check(WHITE_NOISE_N, SEED).unwrap();
    let worst = r.values.iter().copied().fold(0.0, f64::max);
    Outcome { pass: r.values.len() == 10 && worst <= WHITE_NOISE_TOL, detail: format!("largest |average| {worst:.2e} over {} entries", r.values.len()) }
}

fn rotation_window(alpha: f64, n: usize) -> SequenceWindow {
    SequenceWindow::from_fn(BoxRegion::interval(0, n as i64), Domain::Circle, |p| {
        let t = (p.coord(0) as f64 * alpha).fract();
        Complex64::from_polar(1.0, std::f64::consts::TAU * t)
    })
    .unwrap()
}

fn weyl() -> Outcome {
    let f = BoxRegion::interval(0, WEYL_N as i64).to_set();
    let golden = (5f64.sqrt() - 1.0) / 2.0;
    let silver = 2f64.sqrt() - 1.0;
    let g = weyl_ud_test(&rotation_window(golden, WEYL_N), WEYL_LMAX, &f, WEYL_TOL).unwrap();
    let s = weyl_ud_test(&rotation_window(silver, WEYL_N), WEYL_LMAX, &f, WEYL_TOL).unwrap();
    // p/q in lowest terms is first detected at l = q
    let (p, q) = (3u64, 7u64);
    let r = weyl_ud_test(&rotation_window(p as f64 / q as f64, WEYL_N), WEYL_LMAX, &f, WEYL_TOL).unwrap();
    Outcome {
        pass: g.pass && s.pass && r.first_failure == Some(q as usize),
        detail: format!(
            "golden worst {:.1e}, silver worst {:.1e}, 3/7 first fails at l = {:?}",
            g.worst_value, s.worst_value, r.first_failure
        ),
    }
}

fn casebook() -> Outcome {
    let reports = run_all(&CaseParams::default()).unwrap();
    let failed: Vec<&str> = reports.iter().filter(|r| !r.pass).map(|r| r.case.as_str()).collect();
    Outcome { pass: failed.is_empty(), detail: format!("{} cases, failed {failed:?}", reports.len()) }
}

fn main() -> std::process::ExitCode {
    let criteria: Vec<(&str, Duration, fn() -> Outcome)> = vec![
        ("Ruzsa moments", Duration::from_secs(5), ruzsa_moments),
        ("averaging lemma bound", Duration::from_secs(5), averaging_lemma),
        ("assembly bound", Duration::from_secs(30), assembly_bound),
        ("synthesis fidelity", Duration::from_secs(60), synthesis_fidelity),
        ("inverse Furstenberg", Duration::from_secs(60), inverse_furstenberg_check),
        ("spectral LP", Duration::from_secs(120), spectral_lp),
        ("white noise", Duration::from_secs(10), white_noise),
        ("Weyl test", Duration::from_secs(5), weyl),
        ("casebook", Duration::from_secs(360), casebook),
    ];
    let mut failures = Vec::new();
    for (i, (name, budget, f)) in criteria.into_iter().enumerate() {
        let (out, took) = timed(budget, f);
        let tag = if out.pass { "PASS" } else { "FAIL" };
        println!("[{tag}] {}. {name}: {} ({:.2} s)", i + 1, out.detail, took.as_secs_f64());
        if !out.pass {
            failures.push(name);
        }
    }
    if failures.is_empty() {
        println!("acceptance: all criteria pass");
        std::process::ExitCode::SUCCESS
    } else {
        println!("acceptance: failed criteria {failures:?}");
        std::process::ExitCode::FAILURE
    }
}
