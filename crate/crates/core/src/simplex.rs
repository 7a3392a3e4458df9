//! Dense two-phase simplex; Bland's rule guards against cycling.
//!
//! Solves `maximize c·x` subject to `A x = b`, `x >= 0`. Duals are read off the
//! artificial columns, which carry `B^{-1}` once phase one has finished.

use crate::error::{Error, Result};

pub const ITERATION_CAP: usize = 1_000_000;
const PIVOT_TOL: f64 = 1e-9;
const FEAS_TOL: f64 = 1e-8;
const PERTURBATION: f64 = 1e-7;

#[derive(Clone, Debug, PartialEq)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub rows: Vec<Vec<f64>>,
    pub rhs: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LpSolution {
    pub value: f64,
    pub x: Vec<f64>,
    /// One dual per constraint row; `rhs · duals == value` at optimality.
    pub duals: Vec<f64>,
    pub iterations: usize,
}

struct Tableau {
    m: usize,
    /// structural + artificial columns
    width: usize,
    cells: Vec<f64>,
    rhs: Vec<f64>,
    basis: Vec<usize>,
    is_basic: Vec<bool>,
    active: Vec<bool>,
}

/// Degenerate pivots tolerated before pricing switches to Bland's rule.
const DEGENERATE_STREAK: usize = 50;

impl Tableau {
    fn at(&self, r: usize, c: usize) -> f64 {
        self.cells[r * self.width + c]
    }

    fn pivot(&mut self, r: usize, c: usize, reduced: &mut [f64]) {
        let w = self.width;
        let p = self.at(r, c);
        for j in 0..w {
            self.cells[r * w + j] /= p;
        }
        self.rhs[r] /= p;
        let (pivot_row, pivot_rhs) = (self.cells[r * w..(r + 1) * w].to_vec(), self.rhs[r]);
        for i in 0..self.m {
            if i == r || !self.active[i] {
                continue;
            }
            let f = self.cells[i * w + c];
            if f == 0.0 {
                continue;
            }
            let row = &mut self.cells[i * w..(i + 1) * w];
            for (x, &pv) in row.iter_mut().zip(&pivot_row) {
                *x -= f * pv;
            }
            self.rhs[i] -= f * pivot_rhs;
        }
        let f = reduced[c];
        if f != 0.0 {
            for (d, &pv) in reduced.iter_mut().zip(&pivot_row) {
                *d -= f * pv;
            }
        }
        self.is_basic[self.basis[r]] = false;
        self.is_basic[c] = true;
        self.basis[r] = c;
    }

    fn reduced_costs(&self, cost: &[f64]) -> Vec<f64> {
        let mut d = cost.to_vec();
        for r in (0..self.m).filter(|&r| self.active[r]) {
            let cb = cost[self.basis[r]];
            if cb != 0.0 {
                for (j, dj) in d.iter_mut().enumerate() {
                    *dj -= cb * self.at(r, j);
                }
            }
        }
        d
    }

    /// Maximises `cost` over columns `< allowed`. Pricing takes the largest reduced
    /// cost and falls back to Bland's rule during runs of degenerate pivots.
    fn optimise(&mut self, cost: &[f64], allowed: usize, iterations: &mut usize) -> Result<()> {
        let mut reduced = self.reduced_costs(cost);
        let mut streak = 0;
        loop {
            if *iterations >= ITERATION_CAP {
                return Err(Error::Solver(format!("iteration cap {ITERATION_CAP} reached")));
            }
            let candidates = (0..allowed).filter(|&j| !self.is_basic[j] && reduced[j] > PIVOT_TOL);
            let entering = if streak < DEGENERATE_STREAK {
                candidates.max_by(|&a, &b| reduced[a].total_cmp(&reduced[b]).then(b.cmp(&a)))
            } else {
                candidates.min()
            };
            let Some(c) = entering else { return Ok(()) };
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..self.m {
                if !self.active[r] {
                    continue;
                }
                let a = self.at(r, c);
                if a > PIVOT_TOL {
                    let ratio = self.rhs[r] / a;
                    leave = match leave {
                        None => Some((r, ratio)),
                        Some((br, bratio)) => {
                            if ratio < bratio - 1e-12
                                || ((ratio - bratio).abs() <= 1e-12 && self.basis[r] < self.basis[br])
                            {
                                Some((r, ratio))
                            } else {
                                Some((br, bratio))
                            }
                        }
                    };
                }
            }
            let Some((r, ratio)) = leave else {
                return Err(Error::Solver("objective is unbounded".into()));
            };
            streak = if ratio.abs() <= 1e-12 { streak + 1 } else { 0 };
            self.pivot(r, c, &mut reduced);
            *iterations += 1;
        }
    }
}

impl LinearProgram {
    pub fn new(objective: Vec<f64>, rows: Vec<Vec<f64>>, rhs: Vec<f64>) -> Result<Self> {
        if rows.len() != rhs.len() {
            return Err(Error::Solver(format!("{} rows but {} right-hand sides", rows.len(), rhs.len())));
        }
        if let Some(r) = rows.iter().find(|r| r.len() != objective.len()) {
            return Err(Error::Solver(format!("row of width {} for {} variables", r.len(), objective.len())));
        }
        Ok(LinearProgram { objective, rows, rhs })
    }

    /// Solves with a perturbed right-hand side first, which keeps the highly
    /// degenerate programs of the spectral module from stalling, then re-reads the
    /// optimal basis against the true right-hand side. Falls back to the plain
    /// problem when that basis is not feasible for it.
    pub fn solve(&self) -> Result<LpSolution> {
        match self.attempt(true)? {
            Some(s) => Ok(s),
            None => Ok(self.attempt(false)?.expect("unperturbed attempt always concludes")),
        }
    }

    fn attempt(&self, perturb: bool) -> Result<Option<LpSolution>> {
        let n = self.objective.len();
        let m = self.rows.len();
        let width = n + m;
        let mut cells = vec![0.0; m * width];
        let mut rhs = self.rhs.clone();
        let mut flipped = vec![false; m];
        for (i, row) in self.rows.iter().enumerate() {
            let sign = if rhs[i] < 0.0 { -1.0 } else { 1.0 };
            flipped[i] = sign < 0.0;
            rhs[i] *= sign;
            for (j, &a) in row.iter().enumerate() {
                cells[i * width + j] = sign * a;
            }
            cells[i * width + n + i] = 1.0;
        }
        let true_rhs = rhs.clone();
        if perturb {
            for (i, b) in rhs.iter_mut().enumerate() {
                let u = 0.5 + 0.5 * ((i as f64 + 1.0) * 0.618_033_988_749_895).fract();
                *b += PERTURBATION * (1.0 + b.abs()) * u;
            }
        }
        let mut is_basic = vec![false; width];
        is_basic[n..].iter_mut().for_each(|b| *b = true);
        let mut t = Tableau { m, width, cells, rhs, basis: (n..n + m).collect(), is_basic, active: vec![true; m] };
        let mut iterations = 0;

        let mut phase_one = vec![0.0; width];
        for c in phase_one.iter_mut().skip(n) {
            *c = -1.0;
        }
        t.optimise(&phase_one, width, &mut iterations)?;
        let infeasibility: f64 = (0..m).filter(|&r| t.basis[r] >= n).map(|r| t.rhs[r]).sum();
        if infeasibility > FEAS_TOL * (1.0 + self.rhs.iter().map(|b| b.abs()).sum::<f64>()) {
            if perturb {
                return Ok(None);
            }
            return Err(Error::Solver(format!("infeasible (phase-one residual {infeasibility:e})")));
        }
        let mut scratch = vec![0.0; width];
        // drive remaining artificials out of the basis; drop redundant rows
        for r in 0..m {
            if t.basis[r] < n {
                continue;
            }
            match (0..n).find(|&j| t.at(r, j).abs() > PIVOT_TOL && !t.is_basic[j]) {
                Some(j) => t.pivot(r, j, &mut scratch),
                None => t.active[r] = false,
            }
        }

        let mut phase_two = vec![0.0; width];
        phase_two[..n].copy_from_slice(&self.objective);
        t.optimise(&phase_two, n, &mut iterations)?;

        let mut x = vec![0.0; n];
        for r in (0..m).filter(|&r| t.active[r]) {
            let xb = if perturb { (0..m).map(|i| t.at(r, n + i) * true_rhs[i]).sum() } else { t.rhs[r] };
            if xb < -FEAS_TOL * (1.0 + true_rhs.iter().map(|b| b.abs()).sum::<f64>()) {
                return Ok(None);
            }
            if t.basis[r] < n {
                x[t.basis[r]] = xb.max(0.0);
            } else if xb > FEAS_TOL {
                return Ok(None);
            }
        }
        let value = self.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
        let duals = (0..m)
            .map(|i| {
                let y: f64 = (0..m)
                    .filter(|&r| t.active[r])
                    .map(|r| phase_two[t.basis[r]] * t.at(r, n + i))
                    .sum();
                if flipped[i] {
                    -y
                } else {
                    y
                }
            })
            .collect();
        Ok(Some(LpSolution { value, x, duals, iterations }))
    }
}
