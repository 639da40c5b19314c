//! Three-column solution tables.

use std::fs;
use std::path::Path;

use anyhow::{anyhow, Context, Result};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SolutionTable {
    pub x: Vec<f64>,
    pub u: Vec<f64>,
    pub du: Vec<f64>,
}

/// Header line plus one row per sample, 17 significant digits.
pub fn write_csv(header: &[&str; 3], t: &SolutionTable) -> String {
    let mut out = String::with_capacity(64 * (t.x.len() + 1));
    out.push_str(&header.join(","));
    out.push('\n');
    for k in 0..t.x.len() {
        out.push_str(&format!(
            "{:.16e},{:.16e},{:.16e}\n",
            t.x[k], t.u[k], t.du[k]
        ));
    }
    out
}

/// Reads a table with header `x,u,uprime`. Rows must have strictly
/// increasing `x` and finite values.
pub fn parse_solution_csv(text: &str) -> Result<SolutionTable> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| anyhow!("empty file"))?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    if cols != ["x", "u", "uprime"] {
        return Err(anyhow!("expected header `x,u,uprime`, got `{header}`"));
    }
    let mut t = SolutionTable::default();
    for (k, line) in lines.enumerate() {
        let vals: Vec<f64> = line
            .split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| anyhow!("row {}: {e}", k + 1))?;
        if vals.len() != 3 || vals.iter().any(|v| !v.is_finite()) {
            return Err(anyhow!("row {}: expected three finite numbers", k + 1));
        }
        if let Some(&prev) = t.x.last() {
            if vals[0] <= prev {
                return Err(anyhow!("row {}: x is not increasing", k + 1));
            }
        }
        t.x.push(vals[0]);
        t.u.push(vals[1]);
        t.du.push(vals[2]);
    }
    if t.x.len() < 2 {
        return Err(anyhow!("need at least two rows"));
    }
    Ok(t)
}

pub fn read_solution_csv(path: &Path) -> Result<SolutionTable> {
    let text =
        fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    parse_solution_csv(&text).with_context(|| format!("malformed {}", path.display()))
}
