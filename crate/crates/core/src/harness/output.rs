//! CSV writers. Floats are written with 17 significant digits so every value
//! reads back to the same bits.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{AggregateResult, AggregateRow, HarnessError};
use crate::analysis::{RegimePoint, SurfacePoint};

pub const CSV_HEADER: &str = "iteration,metric,mean,stderr,stddev,n_seeds,fn_evals,sg_evals";
pub const SURFACE_HEADER: &str = "alpha,beta,bias,variance,total";
pub const REGIMES_HEADER: &str = "k,k_over_n,rho,alpha_star,beta_star";

fn real(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn render_csv(result: &AggregateResult) -> Result<String, HarnessError> {
    if result.rows.is_empty() {
        return Err(HarnessError::EmptyResult);
    }
    let mut out = String::with_capacity(result.rows.len() * 96);
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in &result.rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.iteration,
            r.metric,
            real(r.mean),
            real(r.stderr),
            real(r.stddev),
            r.n_seeds,
            r.fn_evals,
            r.sg_evals
        )
        .expect("writing to a String");
    }
    Ok(out)
}

/// Writes the whole file or nothing: content goes to a sibling temporary
/// file that is renamed into place.
fn write_atomic(path: &Path, content: &str) -> Result<(), HarnessError> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".partial");
    fs::write(&tmp, content)?;
    fs::rename(&tmp, path).inspect_err(|_| {
        let _ = fs::remove_file(&tmp);
    })?;
    Ok(())
}

pub fn emit_csv(result: &AggregateResult, path: &Path) -> Result<(), HarnessError> {
    write_atomic(path, &render_csv(result)?)
}

pub fn parse_csv(text: &str) -> Result<Vec<AggregateRow>, HarnessError> {
    let mut lines = text.lines();
    if lines.next() != Some(CSV_HEADER) {
        return Err(HarnessError::Parse("missing header".into()));
    }
    let bad = |line: &str| HarnessError::Parse(format!("bad row `{line}`"));
    lines
        .map(|line| {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 8 {
                return Err(bad(line));
            }
            let float = |s: &str| s.parse::<f64>().map_err(|_| bad(line));
            let int = |s: &str| s.parse::<usize>().map_err(|_| bad(line));
            Ok(AggregateRow {
                iteration: int(f[0])?,
                metric: f[1].parse()?,
                mean: float(f[2])?,
                stderr: float(f[3])?,
                stddev: float(f[4])?,
                n_seeds: int(f[5])?,
                fn_evals: int(f[6])?,
                sg_evals: int(f[7])?,
            })
        })
        .collect()
}

pub fn emit_surface_csv(points: &[SurfacePoint], path: &Path) -> Result<(), HarnessError> {
    if points.is_empty() {
        return Err(HarnessError::EmptyResult);
    }
    let mut out = format!("{SURFACE_HEADER}\n");
    for p in points {
        writeln!(
            out,
            "{},{},{},{},{}",
            real(p.alpha),
            real(p.beta),
            real(p.bias),
            real(p.variance),
            real(p.total)
        )
        .expect("writing to a String");
    }
    write_atomic(path, &out)
}

pub fn emit_regimes_csv(points: &[RegimePoint], path: &Path) -> Result<(), HarnessError> {
    if points.is_empty() {
        return Err(HarnessError::EmptyResult);
    }
    let mut out = format!("{REGIMES_HEADER}\n");
    for p in points {
        writeln!(
            out,
            "{},{},{},{},{}",
            p.k,
            real(p.k_over_n),
            real(p.rho),
            real(p.alpha_star),
            real(p.beta_star)
        )
        .expect("writing to a String");
    }
    write_atomic(path, &out)
}
