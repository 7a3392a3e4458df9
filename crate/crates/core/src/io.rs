//! Window, spec and system files.
//!
//! Windows are CSV with a header `x0[,x1[,x2]],re,im`, one row per site, or JSON
//! `{region, domain, values}` with values as `[re, im]` pairs.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex64;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::averaging::{infer_domain, Domain, SequenceWindow};
use crate::error::{Error, Result};
use crate::lattice::{BoxRegion, LatticePoint};

pub fn write_window_csv<W: Write>(w: &SequenceWindow, out: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(out);
    let mut header: Vec<String> = (0..w.dim()).map(|i| format!("x{i}")).collect();
    header.extend(["re".to_string(), "im".to_string()]);
    wr.write_record(&header)?;
    for (p, z) in w.iter() {
        let mut row: Vec<String> = p.coords().iter().map(|c| c.to_string()).collect();
        row.push(z.re.to_string());
        row.push(z.im.to_string());
        wr.write_record(&row)?;
    }
    wr.flush()?;
    Ok(())
}

/// Reads a CSV window; the sites must fill their bounding box. Without a
/// `domain` the smallest standard domain containing the values is used.
pub fn read_window_csv<R: Read>(input: R, domain: Option<Domain>) -> Result<SequenceWindow> {
    let mut rd = csv::Reader::from_reader(input);
    let dim = rd.headers()?.len().checked_sub(2).filter(|d| (1..=3).contains(d)).ok_or_else(|| {
        Error::Input("window CSV needs 1 to 3 coordinate columns followed by re, im".into())
    })?;
    let mut sites = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        let num = |i: usize| rec.get(i).unwrap_or("").trim().to_string();
        let coords = (0..dim)
            .map(|i| num(i).parse::<i64>().map_err(|e| Error::Input(format!("bad coordinate `{}`: {e}", num(i)))))
            .collect::<Result<Vec<_>>>()?;
        let part = |i: usize| num(i).parse::<f64>().map_err(|e| Error::Input(format!("bad value `{}`: {e}", num(i))));
        sites.push((LatticePoint::new(&coords)?, Complex64::new(part(dim)?, part(dim + 1)?)));
    }
    if sites.is_empty() {
        return Err(Error::Input("window CSV has no rows".into()));
    }
    let lo: Vec<i64> = (0..dim).map(|a| sites.iter().map(|(p, _)| p.coord(a)).min().expect("rows")).collect();
    let hi: Vec<i64> = (0..dim).map(|a| sites.iter().map(|(p, _)| p.coord(a)).max().expect("rows") + 1).collect();
    let region = BoxRegion::new(LatticePoint::new(&lo)?, LatticePoint::new(&hi)?)?;
    let mut values = vec![None; region.len()];
    for (p, z) in sites {
        let i = region.index_of(&p).expect("inside bounding box");
        if values[i].replace(z).is_some() {
            return Err(Error::Input(format!("site {p} appears twice")));
        }
    }
    let values = values
        .into_iter()
        .enumerate()
        .map(|(i, z)| z.ok_or_else(|| Error::Coverage(region.point_at(i))))
        .collect::<Result<Vec<_>>>()?;
    let domain = domain.unwrap_or_else(|| infer_domain(&values));
    SequenceWindow::new(region, values, domain)
}

#[derive(Serialize, Deserialize)]
struct WindowFile {
    region: BoxRegion,
    domain: Domain,
    values: Vec<Complex64>,
}

pub fn window_to_json(w: &SequenceWindow) -> Result<String> {
    let f = WindowFile { region: *w.region(), domain: w.domain().clone(), values: w.values().to_vec() };
    Ok(serde_json::to_string(&f)?)
}

pub fn window_from_json(text: &str) -> Result<SequenceWindow> {
    let f: WindowFile = serde_json::from_str(text)?;
    SequenceWindow::new(f.region, f.values, f.domain)
}

/// Reads a window from `.json` or CSV depending on the extension.
pub fn read_window(path: &Path, domain: Option<Domain>) -> Result<SequenceWindow> {
    if path.extension().is_some_and(|e| e == "json") {
        let w = window_from_json(&std::fs::read_to_string(path)?)?;
        return match domain {
            Some(d) => w.with_domain(d),
            None => Ok(w),
        };
    }
    read_window_csv(File::open(path)?, domain)
}

pub fn write_window(path: &Path, w: &SequenceWindow) -> Result<()> {
    if path.extension().is_some_and(|e| e == "json") {
        std::fs::write(path, window_to_json(w)?)?;
        return Ok(());
    }
    write_window_csv(w, File::create(path)?)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}
