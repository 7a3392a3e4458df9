use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use vdclab::averaging::{weyl_ud_test, CorrelationSpec, Domain, SetShift};
use vdclab::casebook::{run_all, run_case, CaseParams, CaseReport};
use vdclab::correspondence::{inverse_furstenberg, synthesize_sequence, FiniteMps, SetSource, SynthesisSchedule, WitnessSource};
use vdclab::io::{read_json, read_window, write_window};
use vdclab::lattice::{FolnerPlan, LatticePoint};
use vdclab::randomization::{white_noise_check, WhiteNoiseGenerator};
use vdclab::spectral::{vdc_evidence, HSet, Verdict, DEFAULT_THRESHOLD, GAP_TOL};
use vdclab::{Error, Result};

#[derive(Parser)]
#[command(name = "vdclab", version, about = "Correlation synthesis, inverse correspondence and spectral evidence over Z^d")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a window whose Følner averages match a correlation spec.
    Synthesize {
        /// correlation spec (JSON)
        #[arg(long)]
        spec: PathBuf,
        /// size parameter N of the final Følner set F_N
        #[arg(long)]
        horizon: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// window output (CSV, or JSON by extension)
        #[arg(long)]
        out: Option<PathBuf>,
        /// finite system supplying witnesses and default targets
        #[arg(long, conflicts_with = "white_noise")]
        mps: Option<PathBuf>,
        /// use fresh white-noise blocks as witnesses
        #[arg(long)]
        white_noise: bool,
        /// average over centered boxes instead of [0, N)^d
        #[arg(long)]
        centered: bool,
        /// lattice dimension when neither input fixes it
        #[arg(long)]
        dim: Option<usize>,
    },
    /// Inverse correspondence: a set whose densities match a system.
    Ifc {
        /// finite system (JSON) with a {0,1} observable
        #[arg(long, conflicts_with = "iid")]
        mps: Option<PathBuf>,
        /// iid Bernoulli(p) instead of a finite system
        #[arg(long)]
        iid: Option<f64>,
        /// families `h,h,..;..` with `!h` for a complement and `:` between coordinates
        #[arg(long)]
        shifts: String,
        /// union families in the same syntax
        #[arg(long)]
        unions: Option<String>,
        /// size parameter N of F_N
        #[arg(long)]
        horizon: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// lattice dimension for --iid
        #[arg(long, default_value_t = 1)]
        dim: usize,
        /// largest accepted density deviation
        #[arg(long, default_value_t = 0.02)]
        tol: f64,
        /// the constructed set as CSV of coordinates
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Atom-mass LP optima over truncations of H.
    Spectral {
        /// `finite:1,2,3`, `squares:<=K` or `file:PATH`
        #[arg(long = "set")]
        set: String,
        /// grid resolutions M
        #[arg(long, num_args = 1.., default_values_t = [256usize])]
        grid: Vec<usize>,
        /// truncations 1..=K
        #[arg(long, default_value_t = 8)]
        truncate: usize,
        /// floor below which a falling trace counts as vdC evidence
        #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
        threshold: f64,
        /// print the report as JSON
        #[arg(long)]
        json: bool,
    },
    /// Weyl power-sum test of a circle window over its whole region.
    Weyl {
        /// circle-valued window (CSV or JSON)
        #[arg(long)]
        window: PathBuf,
        /// largest power l tested
        #[arg(long, default_value_t = 8)]
        lmax: usize,
        /// largest accepted power sum
        #[arg(long, default_value_t = 0.01)]
        tol: f64,
    },
    /// White-noise window with its correlation checks.
    Whitenoise {
        /// number of averaged sites
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// window output (CSV, or JSON by extension)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Catalogued experiments.
    Casebook {
        #[command(subcommand)]
        action: CasebookAction,
    },
}

#[derive(Subcommand)]
enum CasebookAction {
    Run {
        /// case name or `all`
        name: String,
        /// print the reports as JSON
        #[arg(long)]
        json: bool,
        /// override the catalogue seed
        #[arg(long)]
        seed: Option<u64>,
    },
}

/// `println!` that stops quietly when the reader closes the pipe.
macro_rules! out {
    ($($t:tt)*) => {{
        use std::io::Write;
        let _ = writeln!(std::io::stdout(), $($t)*);
    }};
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn print_json(v: &impl serde::Serialize) -> Result<()> {
    out!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Synthesize { spec, horizon, seed, out, mps, white_noise, centered, dim } => {
            let spec: CorrelationSpec = read_json(&spec)?;
            let source = match (mps, white_noise) {
                (Some(p), _) => WitnessSource::Mps(read_json::<FiniteMps>(&p)?),
                (None, true) => WitnessSource::Generator(Box::new(WhiteNoiseGenerator)),
                (None, false) => return Err(Error::Input("give --mps FILE or --white-noise".into())),
            };
            let dim = dim.or(source.dim()).or_else(|| spec.entries.iter().find_map(|e| e.dim())).unwrap_or(1);
            let plan = if centered { FolnerPlan::centered(dim) } else { FolnerPlan::anchored(dim) };
            let schedule = SynthesisSchedule::default_for(&plan, horizon).with_seed(seed);
            let s = synthesize_sequence(&spec, &source, &plan, horizon, &schedule)?;
            if let Some(path) = out {
                write_window(&path, &s.window)?;
            }
            print_json(&json!({
                "source": source.describe(),
                "schedule": schedule,
                "partition": s.partition.summary(),
                "levels": s.levels,
                "trace": s.trace,
                "final_error": s.final_error,
                "composed_bound": s.composed_bound,
                "pass": s.pass,
            }))?;
            Ok(s.pass)
        }
        Command::Ifc { mps, iid, shifts, unions, horizon, seed, dim, tol, out } => {
            let source = match (mps, iid) {
                (Some(p), _) => SetSource::Mps(read_json(&p)?),
                (None, Some(p)) => SetSource::Iid { p, dim },
                (None, None) => return Err(Error::Input("give --mps FILE or --iid p".into())),
            };
            let dim = source.dim();
            let families = parse_families(&shifts, dim)?;
            let unions: Vec<Vec<LatticePoint>> = match unions {
                Some(u) => parse_families(&u, dim)?.into_iter().map(|f| f.into_iter().map(|s| s.shift).collect()).collect(),
                None => Vec::new(),
            };
            let plan = FolnerPlan::anchored(dim);
            let schedule = SynthesisSchedule::default_for(&plan, horizon).with_seed(seed);
            let r = inverse_furstenberg(&source, &families, &unions, &plan, horizon, &schedule)?;
            if let Some(path) = out {
                let mut wr = csv::Writer::from_path(path)?;
                wr.write_record((0..dim).map(|i| format!("x{i}")))?;
                for p in r.set.iter() {
                    wr.write_record(p.coords().iter().map(|c| c.to_string()))?;
                }
                wr.flush()?;
            }
            let pass = r.max_deviation() <= tol;
            print_json(&json!({
                "families": r.families,
                "unions": r.unions,
                "set_size": r.set.len(),
                "averaging_box": r.averaging_box,
                "max_deviation": r.max_deviation(),
                "tol": tol,
                "pass": pass,
            }))?;
            Ok(pass)
        }
        Command::Spectral { set, grid, truncate, threshold, json } => {
            let h = HSet::parse(&set)?;
            let truncations: Vec<usize> = (1..=truncate.max(1)).collect();
            let report = vdc_evidence(&h, &truncations, &grid, threshold)?;
            let pass = report.max_gap <= GAP_TOL;
            if json {
                print_json(&report)?;
            } else {
                out!("H = {}", report.h_description);
                for row in &report.optima {
                    out!("|H0| = {:>3}  M = {:>5}  optimum = {:.6}", row.h0_size, row.resolution, row.value);
                }
                let verdict = match report.verdict {
                    Verdict::VdcEvidence => "vdC-evidence",
                    Verdict::NonVdcEvidence => "non-vdC-evidence",
                    Verdict::Inconclusive => "inconclusive",
                };
                out!("floor = {:.6}, largest gap = {:.2e}, verdict: {verdict}", report.floor, report.max_gap);
            }
            Ok(pass)
        }
        Command::Weyl { window, lmax, tol } => {
            let w = read_window(&window, Some(Domain::Circle))?;
            let report = weyl_ud_test(&w, lmax, &w.region().to_set(), tol)?;
            print_json(&report)?;
            Ok(report.pass)
        }
        Command::Whitenoise { n, seed, out } => {
            let (w, report) = white_noise_check(n, seed)?;
            if let Some(path) = out {
                write_window(&path, &w)?;
            }
            print_json(&report)?;
            Ok(report.pass)
        }
        Command::Casebook { action: CasebookAction::Run { name, json, seed } } => {
            let params = CaseParams { seed, ..Default::default() };
            let reports: Vec<CaseReport> = if name == "all" { run_all(&params)? } else { vec![run_case(&name, &params)?] };
            if json {
                print_json(&reports)?;
            } else {
                for r in &reports {
                    out!("{:<26} {}  ({} ms)", r.case, if r.pass { "pass" } else { "FAIL" }, r.runtime_ms);
                    for q in r.failures() {
                        out!("    {}: measured {} target {} ({:?}, tol {})", q.name, q.measured, q.target, q.relation, q.tolerance);
                    }
                }
            }
            Ok(reports.iter().all(|r| r.pass))
        }
    }
}

fn parse_families(text: &str, dim: usize) -> Result<Vec<Vec<SetShift>>> {
    text.split(';')
        .filter(|f| !f.trim().is_empty())
        .map(|fam| {
            fam.split(',')
                .map(|tok| {
                    let tok = tok.trim();
                    let (keep, body) = match tok.strip_prefix('!') {
                        Some(rest) => (false, rest),
                        None => (true, tok),
                    };
                    let coords = body
                        .split(':')
                        .map(|c| c.trim().parse::<i64>().map_err(|e| Error::Input(format!("bad shift `{tok}`: {e}"))))
                        .collect::<Result<Vec<_>>>()?;
                    if coords.len() != dim {
                        return Err(Error::Dimension { expected: dim, found: coords.len() });
                    }
                    let shift = LatticePoint::new(&coords)?;
                    Ok(if keep { SetShift::keep(shift) } else { SetShift::complement(shift) })
                })
                .collect()
        })
        .collect()
}
