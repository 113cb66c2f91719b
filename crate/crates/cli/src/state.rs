//! Plain-text wavefunction files: `#`-prefixed `key = value` header lines,
//! then one `re im` pair per grid point.

use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex64;
use ringgyro::{GroundState, RingGrid, Wavefunction};

use crate::CliError;

pub struct StateHeader {
    pub n_points: usize,
    pub radius: f64,
    pub trap_omega: f64,
    pub interaction: f64,
    pub energy: f64,
}

pub fn render(header: &StateHeader, psi: &Wavefunction) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# ringgyro wavefunction");
    let _ = writeln!(s, "# n_points = {}", header.n_points);
    let _ = writeln!(s, "# radius = {:.16e}", header.radius);
    let _ = writeln!(s, "# trap_omega = {:.16e}", header.trap_omega);
    let _ = writeln!(s, "# interaction = {:.16e}", header.interaction);
    let _ = writeln!(s, "# energy = {:.16e}", header.energy);
    for a in psi.amps() {
        let _ = writeln!(s, "{:.16e} {:.16e}", a.re, a.im);
    }
    s
}

pub fn write(path: &Path, gs: &GroundState, trap_omega: f64, interaction: f64) -> Result<(), CliError> {
    let header = StateHeader {
        n_points: gs.state.grid().n_points(),
        radius: gs.state.grid().radius(),
        trap_omega,
        interaction,
        energy: gs.energy,
    };
    std::fs::write(path, render(&header, &gs.state)).map_err(|e| CliError::io(path, e))
}

pub fn parse(text: &str) -> Result<(StateHeader, Wavefunction), CliError> {
    let bad = |msg: String| CliError::Invalid(format!("state file: {msg}"));
    let mut fields = std::collections::HashMap::new();
    let mut amps = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            if let Some((k, v)) = rest.split_once('=') {
                fields.insert(k.trim().to_string(), v.trim().to_string());
            }
            continue;
        }
        let mut it = line.split_whitespace();
        let (Some(re), Some(im), None) = (it.next(), it.next(), it.next()) else {
            return Err(bad(format!("line {} is not a `re im` pair", lineno + 1)));
        };
        let parse = |s: &str| s.parse::<f64>().map_err(|e| bad(format!("line {}: {e}", lineno + 1)));
        amps.push(Complex64::new(parse(re)?, parse(im)?));
    }
    let num = |k: &str| -> Result<f64, CliError> {
        fields
            .get(k)
            .ok_or_else(|| bad(format!("missing `{k}`")))?
            .parse::<f64>()
            .map_err(|e| bad(format!("`{k}`: {e}")))
    };
    let n_points = num("n_points")? as usize;
    let header = StateHeader {
        n_points,
        radius: num("radius")?,
        trap_omega: num("trap_omega")?,
        interaction: num("interaction")?,
        energy: num("energy")?,
    };
    if amps.len() != n_points {
        return Err(bad(format!("header says {n_points} points, found {}", amps.len())));
    }
    let grid = RingGrid::new(n_points, header.radius).map_err(|e| bad(e.to_string()))?;
    let psi = Wavefunction::new(grid, amps).map_err(|e| bad(e.to_string()))?;
    Ok((header, psi))
}
