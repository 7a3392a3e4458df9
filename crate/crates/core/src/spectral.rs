//! Probability measures on a grid of the torus `T^d`, their Fourier
//! coefficients, and the linear programs behind the spectral criterion.

use std::f64::consts::{PI, TAU};
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::averaging::{pairwise_sum, pairwise_sum_real};
use crate::error::{Error, Result};
use crate::lattice::{FolnerPlan, LatticePoint};
use crate::simplex::LinearProgram;

/// Default threshold separating small from large atom optima.
pub const DEFAULT_THRESHOLD: f64 = 0.05;
/// Tolerance on the primal/dual gap.
pub const GAP_TOL: f64 = 1e-6;

const ZERO_ROW_TOL: f64 = 1e-12;

/// Nonnegative weights on the points `j/M`, `j ∈ {0..M-1}^d`, in row-major order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridMeasure {
    dim: usize,
    resolution: usize,
    weights: Vec<f64>,
}

impl GridMeasure {
    pub fn new(dim: usize, resolution: usize, weights: Vec<f64>) -> Result<Self> {
        if !(1..=3).contains(&dim) || resolution == 0 {
            return Err(Error::Input(format!("grid of dimension {dim} and resolution {resolution}")));
        }
        let cells = resolution.pow(dim as u32);
        if weights.len() != cells {
            return Err(Error::Input(format!("{} weights for {cells} grid cells", weights.len())));
        }
        if weights.iter().any(|&w| !(w >= 0.0)) {
            return Err(Error::Input("grid weights must be nonnegative".into()));
        }
        let total = pairwise_sum_real(&weights);
        if (total - 1.0).abs() > 1e-10 {
            return Err(Error::Input(format!("grid weights sum to {total}")));
        }
        Ok(GridMeasure { dim, resolution, weights })
    }

    /// Unit mass at `0`.
    pub fn dirac(dim: usize, resolution: usize) -> Self {
        let mut w = vec![0.0; resolution.pow(dim as u32)];
        w[0] = 1.0;
        GridMeasure { dim, resolution, weights: w }
    }

    pub fn uniform(dim: usize, resolution: usize) -> Self {
        let n = resolution.pow(dim as u32);
        GridMeasure { dim, resolution, weights: vec![1.0 / n as f64; n] }
    }

    /// Uniform over the given cells.
    pub fn uniform_on(dim: usize, resolution: usize, cells: &[Vec<usize>]) -> Result<Self> {
        let mut w = vec![0.0; resolution.pow(dim as u32)];
        for c in cells {
            if c.len() != dim || c.iter().any(|&j| j >= resolution) {
                return Err(Error::Input(format!("cell {c:?} is not on the grid")));
            }
            w[cell_index(c, resolution)] += 1.0 / cells.len() as f64;
        }
        Self::new(dim, resolution, w)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Mass of the atom at `0`.
    pub fn atom_at_zero(&self) -> f64 {
        self.weights[0]
    }

    /// Integer coordinates of cell `idx`.
    pub fn cell(&self, idx: usize) -> Vec<usize> {
        cell_of(idx, self.dim, self.resolution)
    }
}

fn cell_index(c: &[usize], m: usize) -> usize {
    c.iter().fold(0, |acc, &j| acc * m + j)
}

fn cell_of(mut idx: usize, dim: usize, m: usize) -> Vec<usize> {
    let mut c = vec![0; dim];
    for ax in (0..dim).rev() {
        c[ax] = idx % m;
        idx /= m;
    }
    c
}

/// `(h·j) mod M` over the grid, in row-major order of `j`.
fn phases(h: &LatticePoint, dim: usize, m: usize) -> Vec<usize> {
    let hm: Vec<i64> = h.coords().iter().map(|&x| x.rem_euclid(m as i64)).collect();
    (0..m.pow(dim as u32))
        .map(|idx| {
            cell_of(idx, dim, m).iter().zip(&hm).map(|(&j, &x)| (j as i64 * x) as u128).sum::<u128>() as usize % m
        })
        .collect()
}

fn unit_table(m: usize) -> Vec<Complex64> {
    (0..m).map(|k| Complex64::from_polar(1.0, TAU * k as f64 / m as f64)).collect()
}

/// `Σ_j μ(j/M) e^{2πi h·j/M}`.
pub fn grid_fourier(mu: &GridMeasure, h: &LatticePoint) -> Result<Complex64> {
    if h.dim() != mu.dim {
        return Err(Error::Dimension { expected: mu.dim, found: h.dim() });
    }
    let table = unit_table(mu.resolution);
    let terms: Vec<Complex64> =
        phases(h, mu.dim, mu.resolution).iter().zip(&mu.weights).map(|(&k, &w)| table[k] * w).collect();
    Ok(pairwise_sum(&terms))
}

/// Frequencies reduced modulo `M` and up to sign; errors if any is `0 mod M`.
pub fn reduce_frequencies(h0: &[LatticePoint], m: usize) -> Result<Vec<LatticePoint>> {
    let mut out: Vec<LatticePoint> = Vec::new();
    for h in h0 {
        let r: Vec<i64> = h.coords().iter().map(|&x| x.rem_euclid(m as i64)).collect();
        if r.iter().all(|&x| x == 0) {
            return Err(Error::Alias(*h));
        }
        let neg: Vec<i64> = r.iter().map(|&x| (m as i64 - x) % m as i64).collect();
        let canon = LatticePoint::new(if neg < r { &neg } else { &r })?;
        if !out.contains(&canon) {
            out.push(canon);
        }
    }
    Ok(out)
}

fn check_dims(h0: &[LatticePoint], dim: usize) -> Result<()> {
    match h0.iter().find(|h| h.dim() != dim) {
        Some(h) => Err(Error::Dimension { expected: dim, found: h.dim() }),
        None => Ok(()),
    }
}

struct Constraints {
    rows: Vec<Vec<f64>>,
    rhs: Vec<f64>,
    /// for each kept frequency, the indices of its cosine and sine rows
    kept: Vec<(LatticePoint, usize, Option<usize>)>,
}

fn spectral_constraints(freqs: &[LatticePoint], dim: usize, m: usize) -> Constraints {
    let n = m.pow(dim as u32);
    let mut rows = vec![vec![1.0; n]];
    let mut rhs = vec![1.0];
    let mut kept = Vec::new();
    let table = unit_table(m);
    for h in freqs {
        let ph = phases(h, dim, m);
        rows.push(ph.iter().map(|&k| table[k].re).collect());
        rhs.push(0.0);
        let c = rows.len() - 1;
        let sin: Vec<f64> = ph.iter().map(|&k| table[k].im).collect();
        let s = if sin.iter().any(|v| v.abs() > ZERO_ROW_TOL) {
            rows.push(sin);
            rhs.push(0.0);
            Some(rows.len() - 1)
        } else {
            None
        };
        kept.push((*h, c, s));
    }
    Constraints { rows, rhs, kept }
}

fn cyclic_distance(c: &[usize], m: usize) -> usize {
    c.iter().map(|&j| j.min(m - j)).max().unwrap_or(0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrimalSolution {
    /// largest achievable mass at the zero cell
    pub value: f64,
    pub measure: GridMeasure,
    /// number of cells counted as "zero"
    pub zero_cells: usize,
    pub iterations: usize,
}

/// Maximises `μ({0})` over grid measures with `μ̂(h) = 0` for `h ∈ H₀`.
pub fn primal_atom_lp(h0: &[LatticePoint], dim: usize, m: usize) -> Result<PrimalSolution> {
    primal_neighborhood_lp(h0, dim, m, 0)
}

/// As [`primal_atom_lp`], maximising the mass of all cells within `r` cells of `0`.
pub fn primal_neighborhood_lp(h0: &[LatticePoint], dim: usize, m: usize, r: usize) -> Result<PrimalSolution> {
    check_dims(h0, dim)?;
    if m == 0 {
        return Err(Error::Input("grid resolution must be positive".into()));
    }
    let freqs = reduce_frequencies(h0, m)?;
    let n = m.pow(dim as u32);
    let zero: Vec<bool> = (0..n).map(|i| cyclic_distance(&cell_of(i, dim, m), m) <= r).collect();
    let objective: Vec<f64> = zero.iter().map(|&z| if z { 1.0 } else { 0.0 }).collect();
    let cons = spectral_constraints(&freqs, dim, m);
    let sol = LinearProgram::new(objective, cons.rows, cons.rhs)?.solve()?;
    let total: f64 = sol.x.iter().sum();
    let weights: Vec<f64> = sol.x.iter().map(|&x| x / total).collect();
    Ok(PrimalSolution {
        value: sol.value,
        measure: GridMeasure::new(dim, m, weights)?,
        zero_cells: zero.iter().filter(|&&z| z).count(),
        iterations: sol.iterations,
    })
}

/// `T(x) = Σ_h a_h cos(2π h·x) + b_h sin(2π h·x)` with `T(0) = 1` and `T ≥ -ε` on the grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CosineCertificate {
    pub support: Vec<LatticePoint>,
    pub cos_coefficients: Vec<f64>,
    pub sin_coefficients: Vec<f64>,
    /// `-min_grid T`
    pub epsilon: f64,
    pub resolution: usize,
    /// `ε/(1+ε)`
    pub dual_value: f64,
    pub primal_value: f64,
    pub gap: f64,
}

impl CosineCertificate {
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.support
            .iter()
            .zip(self.cos_coefficients.iter().zip(&self.sin_coefficients))
            .map(|(h, (&a, &b))| {
                let t = TAU * h.dot(x);
                a * t.cos() + b * t.sin()
            })
            .sum()
    }

    /// `T` at every grid cell.
    pub fn grid_values(&self) -> Vec<f64> {
        let dim = self.support.first().map_or(1, |h| h.dim());
        let m = self.resolution;
        let mut vals = vec![0.0; m.pow(dim as u32)];
        let table = unit_table(m);
        for (h, (&a, &b)) in self.support.iter().zip(self.cos_coefficients.iter().zip(&self.sin_coefficients)) {
            for (v, k) in vals.iter_mut().zip(phases(h, dim, m)) {
                *v += a * table[k].re + b * table[k].im;
            }
        }
        vals
    }

    pub fn value_at_zero(&self) -> f64 {
        self.cos_coefficients.iter().sum()
    }
}

/// Certificate read from the optimal duals of [`primal_atom_lp`].
pub fn dual_cosine_certificate(h0: &[LatticePoint], dim: usize, m: usize) -> Result<CosineCertificate> {
    check_dims(h0, dim)?;
    if h0.is_empty() {
        return Err(Error::Input("a certificate needs at least one frequency".into()));
    }
    let freqs = reduce_frequencies(h0, m)?;
    let n = m.pow(dim as u32);
    let mut objective = vec![0.0; n];
    objective[0] = 1.0;
    let cons = spectral_constraints(&freqs, dim, m);
    let sol = LinearProgram::new(objective, cons.rows, cons.rhs)?.solve()?;
    let v = sol.value;
    if v >= 1.0 - 1e-12 {
        return Err(Error::Solver("δ_0 is feasible, so no certificate exists".into()));
    }
    let scale = 1.0 - v;
    let mut support = Vec::new();
    let mut a = Vec::new();
    let mut b = Vec::new();
    for (h, c, s) in &cons.kept {
        support.push(*h);
        a.push(sol.duals[*c] / scale);
        b.push(s.map_or(0.0, |s| sol.duals[s] / scale));
    }
    let mut cert = CosineCertificate {
        support,
        cos_coefficients: a,
        sin_coefficients: b,
        epsilon: 0.0,
        resolution: m,
        dual_value: 0.0,
        primal_value: v,
        gap: 0.0,
    };
    let eps = -cert.grid_values().into_iter().fold(f64::INFINITY, f64::min);
    cert.epsilon = eps;
    cert.dual_value = eps / (1.0 + eps);
    cert.gap = (v - cert.dual_value).abs();
    Ok(cert)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    pub value: f64,
    /// `Π_i min(1, 1/(s_i |sin π x_i|))`
    pub bound: f64,
}

/// `|(1/|F_N|) Σ_{g∈F_N} e^{2πi x·g}|`.
pub fn character_average_decay(x: &[f64], plan: &FolnerPlan, n: usize) -> Result<DecayReport> {
    if x.len() != plan.dim {
        return Err(Error::Dimension { expected: plan.dim, found: x.len() });
    }
    let region = plan.region(n);
    let mut value = 1.0;
    let mut bound = 1.0;
    for (ax, &xi) in x.iter().enumerate() {
        let (lo, s) = (region.lo.coord(ax), region.extent(ax));
        let terms: Vec<Complex64> = (lo..lo + s).map(|g| Complex64::from_polar(1.0, TAU * xi * g as f64)).collect();
        value *= pairwise_sum(&terms).norm() / s as f64;
        let sin = (PI * xi).sin().abs();
        bound *= if sin < 1e-15 { 1.0 } else { (1.0 / (s as f64 * sin)).min(1.0) };
    }
    Ok(DecayReport { value, bound })
}

/// Enumerations of candidate sets `H ⊆ Z^d ∖ {0}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum HSet {
    Finite { points: Vec<LatticePoint> },
    /// `n^2` for `n ≥ 1`, optionally stopping at `n^2 <= max`
    Squares { max: Option<i64> },
}

impl HSet {
    pub fn finite(points: Vec<LatticePoint>) -> Result<Self> {
        if points.iter().any(|p| p.is_origin()) {
            return Err(Error::Input("H must not contain 0".into()));
        }
        if let Some(p) = points.iter().find(|p| p.dim() != points[0].dim()) {
            return Err(Error::Dimension { expected: points[0].dim(), found: p.dim() });
        }
        Ok(HSet::Finite { points })
    }

    /// `finite:1,2,3` (coordinates joined by `:` for `d > 1`), `squares:<=K`, or `file:PATH`.
    pub fn parse(expr: &str) -> Result<Self> {
        let (kind, rest) = expr.split_once(':').ok_or_else(|| Error::Input(format!("cannot parse H expression `{expr}`")))?;
        match kind {
            "finite" => {
                let pts = rest
                    .split(',')
                    .map(|t| parse_point(t.trim()))
                    .collect::<Result<Vec<_>>>()?;
                Self::finite(pts)
            }
            "squares" => {
                let bound = rest.trim().strip_prefix("<=").unwrap_or(rest.trim());
                let max = bound.parse::<i64>().map_err(|e| Error::Input(format!("bad squares bound `{bound}`: {e}")))?;
                Ok(HSet::Squares { max: Some(max) })
            }
            "file" => Self::from_file(Path::new(rest)),
            _ => Err(Error::Input(format!("unknown H kind `{kind}`"))),
        }
    }

    /// A JSON list of points, or whitespace/comma separated integers.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        if let Ok(points) = serde_json::from_str::<Vec<LatticePoint>>(&text) {
            return Self::finite(points);
        }
        if let Ok(ints) = serde_json::from_str::<Vec<i64>>(&text) {
            return Self::finite(ints.into_iter().map(LatticePoint::d1).collect());
        }
        let pts = text
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|t| !t.is_empty())
            .map(parse_point)
            .collect::<Result<Vec<_>>>()?;
        Self::finite(pts)
    }

    pub fn dim(&self) -> usize {
        match self {
            HSet::Finite { points } => points.first().map_or(1, |p| p.dim()),
            HSet::Squares { .. } => 1,
        }
    }

    /// First `k` elements.
    pub fn truncate(&self, k: usize) -> Vec<LatticePoint> {
        match self {
            HSet::Finite { points } => points.iter().take(k).copied().collect(),
            HSet::Squares { max } => (1i64..)
                .map(|n| n * n)
                .take_while(|&s| max.is_none_or(|m| s <= m))
                .take(k)
                .map(LatticePoint::d1)
                .collect(),
        }
    }

    /// Number of elements, if finite.
    pub fn len(&self) -> Option<usize> {
        match self {
            HSet::Finite { points } => Some(points.len()),
            HSet::Squares { max: Some(m) } => Some((1i64..).take_while(|n| n * n <= *m).count()),
            HSet::Squares { max: None } => None,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == Some(0)
    }

    pub fn describe(&self) -> String {
        match self {
            HSet::Finite { points } => {
                let parts: Vec<String> = points.iter().map(|p| p.to_string()).collect();
                format!("finite {{{}}}", parts.join(", "))
            }
            HSet::Squares { max: Some(m) } => format!("squares <= {m}"),
            HSet::Squares { max: None } => "squares".into(),
        }
    }
}

fn parse_point(t: &str) -> Result<LatticePoint> {
    let coords = t
        .split(':')
        .map(|c| c.trim().parse::<i64>().map_err(|e| Error::Input(format!("bad coordinate `{c}`: {e}"))))
        .collect::<Result<Vec<_>>>()?;
    LatticePoint::new(&coords)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    VdcEvidence,
    NonVdcEvidence,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvidenceRow {
    pub truncation: usize,
    pub h0_size: usize,
    pub resolution: usize,
    pub value: f64,
    pub gap: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvidenceReport {
    #[serde(rename = "H_description")]
    pub h_description: String,
    pub schedule: Vec<(usize, usize)>,
    pub optima: Vec<EvidenceRow>,
    /// smallest optimum over the table
    pub floor: f64,
    pub max_gap: f64,
    pub verdict: Verdict,
    pub threshold: f64,
}

impl EvidenceReport {
    /// Optima at the finest resolution, in truncation order.
    pub fn finest_trace(&self) -> Vec<f64> {
        let m = self.optima.iter().map(|r| r.resolution).max().unwrap_or(0);
        self.optima.iter().filter(|r| r.resolution == m).map(|r| r.value).collect()
    }
}

/// Atom optima over every `(truncation, resolution)` pair, and a verdict from the
/// trace at the finest resolution: flat and above `threshold` counts against
/// vdC, below `threshold` and still falling counts in favour.
pub fn vdc_evidence(h: &HSet, truncations: &[usize], resolutions: &[usize], threshold: f64) -> Result<EvidenceReport> {
    if truncations.is_empty() || resolutions.is_empty() {
        return Err(Error::Input("schedules must be nonempty".into()));
    }
    if truncations.windows(2).any(|w| w[0] >= w[1]) || resolutions.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Input("schedules must be increasing".into()));
    }
    let dim = h.dim();
    let mut optima = Vec::new();
    let mut schedule = Vec::new();
    for &k in truncations {
        let h0 = h.truncate(k);
        for &m in resolutions {
            schedule.push((k, m));
            let (value, gap) = if h0.is_empty() {
                (primal_atom_lp(&h0, dim, m)?.value, None)
            } else {
                let cert = dual_cosine_certificate(&h0, dim, m)?;
                (cert.primal_value, Some(cert.gap))
            };
            optima.push(EvidenceRow { truncation: k, h0_size: h0.len(), resolution: m, value, gap });
        }
    }
    let floor = optima.iter().map(|r| r.value).fold(f64::INFINITY, f64::min);
    let max_gap = optima.iter().filter_map(|r| r.gap).fold(0.0, f64::max);
    let mut report = EvidenceReport {
        h_description: h.describe(),
        schedule,
        optima,
        floor,
        max_gap,
        verdict: Verdict::Inconclusive,
        threshold,
    };
    let trace = report.finest_trace();
    let last = *trace.last().expect("nonempty");
    let falling = trace.len() >= 2 && last < trace[trace.len() - 2] - 1e-9;
    let flat = trace.len() < 2 || (last - trace[trace.len() - 2]).abs() <= 1e-9;
    report.verdict = if last < threshold && falling {
        Verdict::VdcEvidence
    } else if floor >= threshold && flat {
        Verdict::NonVdcEvidence
    } else {
        Verdict::Inconclusive
    };
    Ok(report)
}
