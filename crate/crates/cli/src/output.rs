//! CSV and manifest outputs of a scheme run, and their re-validation.

use std::fs;
use std::path::{Path, PathBuf};

use ringgyro::schemes::Diagnostics;
use ringgyro::{FisherSeries, SchemeConfig, SchemeOutput};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::CliError;

pub const FISHER_COLUMNS: [&str; 7] = ["time", "f_q", "f_c", "f_lr", "f_spin", "analytic_f_q", "f_s_reference"];

/// 17 significant digits.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn opt(col: &Option<Vec<f64>>, i: usize) -> String {
    col.as_ref().map(|v| fmt_float(v[i])).unwrap_or_default()
}

fn csv_err(path: &Path, e: csv::Error) -> CliError {
    CliError::Invalid(format!("{}: {e}", path.display()))
}

pub fn write_fisher(path: &Path, s: &FisherSeries) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(FISHER_COLUMNS).map_err(|e| csv_err(path, e))?;
    for i in 0..s.len() {
        let row = [
            fmt_float(s.times[i]),
            fmt_float(s.f_q[i]),
            fmt_float(s.f_c[i]),
            opt(&s.f_lr, i),
            opt(&s.f_spin, i),
            opt(&s.analytic_f_q, i),
            fmt_float(s.f_s_reference),
        ];
        w.write_record(&row).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// First row: an empty cell then the θ grid. Each further row: time then values.
pub fn write_map(path: &Path, theta: &[f64], times: &[f64], rows: &[Vec<f64>]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    let head: Vec<String> = std::iter::once(String::new())
        .chain(theta.iter().map(|t| fmt_float(*t)))
        .collect();
    w.write_record(&head).map_err(|e| csv_err(path, e))?;
    for (t, row) in times.iter().zip(rows) {
        let rec: Vec<String> = std::iter::once(fmt_float(*t))
            .chain(row.iter().map(|v| fmt_float(*v)))
            .collect();
        w.write_record(&rec).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

fn reader(path: &Path) -> Result<csv::Reader<fs::File>, CliError> {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_path(path)
        .map_err(|e| csv_err(path, e))
}

fn parse_cell(path: &Path, row: usize, cell: &str) -> Result<f64, CliError> {
    let v: f64 = cell
        .parse()
        .map_err(|e| CliError::Invalid(format!("{} row {row}: `{cell}`: {e}", path.display())))?;
    if !v.is_finite() {
        return Err(CliError::Invalid(format!(
            "{} row {row}: non-finite value",
            path.display()
        )));
    }
    Ok(v)
}

/// Reads `fisher.csv` back into a series.
pub fn read_fisher(path: &Path) -> Result<FisherSeries, CliError> {
    let mut rows = reader(path)?.into_records();
    let header = rows
        .next()
        .ok_or_else(|| CliError::Invalid(format!("{} is empty", path.display())))?
        .map_err(|e| csv_err(path, e))?;
    if header.iter().ne(FISHER_COLUMNS) {
        return Err(CliError::Invalid(format!("{}: unexpected header", path.display())));
    }
    let mut cols: [Vec<Option<f64>>; 7] = Default::default();
    for (i, rec) in rows.enumerate() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        if rec.len() != FISHER_COLUMNS.len() {
            return Err(CliError::Invalid(format!(
                "{} row {}: wrong width",
                path.display(),
                i + 1
            )));
        }
        for (c, cell) in rec.iter().enumerate() {
            cols[c].push(if cell.is_empty() {
                None
            } else {
                Some(parse_cell(path, i + 1, cell)?)
            });
        }
    }
    let required = |c: usize| -> Result<Vec<f64>, CliError> {
        cols[c]
            .iter()
            .map(|v| v.ok_or_else(|| CliError::Invalid(format!("{}: empty `{}`", path.display(), FISHER_COLUMNS[c]))))
            .collect()
    };
    let optional = |c: usize| -> Result<Option<Vec<f64>>, CliError> {
        match (cols[c].iter().all(Option::is_some), cols[c].iter().all(Option::is_none)) {
            (_, true) if !cols[c].is_empty() => Ok(None),
            (true, _) => Ok(Some(cols[c].iter().map(|v| v.unwrap()).collect())),
            _ => Err(CliError::Invalid(format!(
                "{}: `{}` is partially filled",
                path.display(),
                FISHER_COLUMNS[c]
            ))),
        }
    };
    let reference = required(6)?;
    let f_s_reference = *reference
        .first()
        .ok_or_else(|| CliError::Invalid(format!("{} has no rows", path.display())))?;
    if reference.iter().any(|r| *r != f_s_reference) {
        return Err(CliError::Invalid(format!("{}: f_s_reference varies", path.display())));
    }
    Ok(FisherSeries {
        times: required(0)?,
        f_q: required(1)?,
        f_c: required(2)?,
        f_lr: optional(3)?,
        f_spin: optional(4)?,
        analytic_f_q: optional(5)?,
        f_s_reference,
    })
}

/// Reads a (θ, t) map; returns `(theta, times, rows)`.
pub type Map = (Vec<f64>, Vec<f64>, Vec<Vec<f64>>);

pub fn read_map(path: &Path) -> Result<Map, CliError> {
    let mut rows = reader(path)?.into_records();
    let head = rows
        .next()
        .ok_or_else(|| CliError::Invalid(format!("{} is empty", path.display())))?
        .map_err(|e| csv_err(path, e))?;
    if head.get(0) != Some("") {
        return Err(CliError::Invalid(format!(
            "{}: first cell must be empty",
            path.display()
        )));
    }
    let theta = head
        .iter()
        .skip(1)
        .map(|c| parse_cell(path, 0, c))
        .collect::<Result<Vec<_>, _>>()?;
    let mut times = Vec::new();
    let mut values = Vec::new();
    for (i, rec) in rows.enumerate() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        if rec.len() != theta.len() + 1 {
            return Err(CliError::Invalid(format!(
                "{} row {}: wrong width",
                path.display(),
                i + 1
            )));
        }
        let mut cells = rec.iter().map(|c| parse_cell(path, i + 1, c));
        times.push(cells.next().unwrap()?);
        values.push(cells.collect::<Result<Vec<_>, _>>()?);
    }
    Ok((theta, times, values))
}

#[derive(Debug, Serialize)]
pub struct FileEntry {
    pub name: String,
    pub bytes: u64,
    pub sha256: String,
}

pub fn file_entry(path: &Path) -> Result<FileEntry, CliError> {
    let data = fs::read(path).map_err(|e| CliError::io(path, e))?;
    let digest = Sha256::digest(&data);
    Ok(FileEntry {
        name: path.file_name().unwrap().to_string_lossy().into_owned(),
        bytes: data.len() as u64,
        sha256: digest.iter().map(|b| format!("{b:02x}")).collect(),
    })
}

#[derive(Debug, Serialize)]
pub struct BarrierRecord {
    pub amplitude: f64,
    pub calibrated: bool,
    pub reflection: Option<f64>,
    pub evaluations: Option<usize>,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub scheme: String,
    pub version: &'static str,
    pub config: SchemeConfig,
    pub omega0: f64,
    pub delta: f64,
    pub threads: usize,
    pub dt: f64,
    pub wall_time_seconds: f64,
    pub max_richardson_residual: Option<f64>,
    pub richardson_residual: Vec<f64>,
    pub max_norm_drift: Option<f64>,
    pub max_excluded_mass: Option<f64>,
    pub barrier: Option<BarrierRecord>,
    pub ground_state_energy: Option<f64>,
    pub pulse_time: Option<f64>,
    pub degraded: bool,
    pub degraded_reasons: Vec<String>,
    pub files: Vec<FileEntry>,
}

impl RunManifest {
    pub fn new(config: &SchemeConfig, omega0: f64, delta: f64, threads: usize) -> Self {
        RunManifest {
            scheme: config.scheme.to_string(),
            version: env!("CARGO_PKG_VERSION"),
            config: config.clone(),
            omega0,
            delta,
            threads,
            dt: 0.0,
            wall_time_seconds: 0.0,
            max_richardson_residual: None,
            richardson_residual: Vec::new(),
            max_norm_drift: None,
            max_excluded_mass: None,
            barrier: None,
            ground_state_energy: None,
            pulse_time: None,
            degraded: false,
            degraded_reasons: Vec::new(),
            files: Vec::new(),
        }
    }

    pub fn record(&mut self, d: &Diagnostics) {
        self.dt = d.dt;
        self.max_richardson_residual = Some(d.max_residual());
        self.richardson_residual = d.richardson_residual.clone();
        self.max_norm_drift = Some(d.max_norm_drift);
        self.max_excluded_mass = Some(d.max_excluded_mass);
        self.barrier = d.barrier_amplitude.map(|amplitude| BarrierRecord {
            amplitude,
            calibrated: d.barrier.is_some(),
            reflection: d.barrier.map(|c| c.reflection),
            evaluations: d.barrier.map(|c| c.evaluations),
        });
        self.ground_state_energy = d.ground_state_energy;
        self.pulse_time = d.pulse_time;
        self.degraded_reasons = d.degraded_reasons();
        self.degraded = !self.degraded_reasons.is_empty();
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf, CliError> {
        let path = dir.join("manifest.json");
        let text = serde_json::to_string_pretty(self).map_err(|e| CliError::Invalid(e.to_string()))?;
        fs::write(&path, text + "\n").map_err(|e| CliError::io(&path, e))?;
        Ok(path)
    }
}

/// Writes every data file of `out` into `dir` and returns their paths.
pub fn write_outputs(dir: &Path, out: &SchemeOutput) -> Result<Vec<PathBuf>, CliError> {
    let times = &out.series.times;
    let mut written = Vec::new();
    let fisher = dir.join("fisher.csv");
    write_fisher(&fisher, &out.series)?;
    written.push(fisher);
    let mut maps = vec![("density.csv", &out.density), ("ddensity.csv", &out.ddensity)];
    if let (Some(jz), Some(djz)) = (&out.jz, &out.djz) {
        maps.push(("jz.csv", jz));
        maps.push(("djz.csv", djz));
    }
    for (name, rows) in maps {
        let p = dir.join(name);
        write_map(&p, &out.theta, times, rows)?;
        written.push(p);
    }
    Ok(written)
}

/// Re-reads the written files and checks their schema, shared lattice and the
/// Fisher orderings. Returns the ordering violations found.
pub fn validate_outputs(dir: &Path, expect_spinor: bool) -> Result<Vec<String>, CliError> {
    let series = read_fisher(&dir.join("fisher.csv"))?;
    let mut names = vec!["density.csv", "ddensity.csv"];
    if expect_spinor {
        names.extend(["jz.csv", "djz.csv"]);
    }
    let mut lattice: Option<Vec<f64>> = None;
    for name in names {
        let (theta, times, rows) = read_map(&dir.join(name))?;
        if times != series.times {
            return Err(CliError::Invalid(format!("{name}: times differ from fisher.csv")));
        }
        if rows.is_empty() || theta.is_empty() {
            return Err(CliError::Invalid(format!("{name}: no data")));
        }
        match &lattice {
            Some(l) if *l != theta => return Err(CliError::Invalid(format!("{name}: θ grid differs"))),
            None => lattice = Some(theta),
            _ => {}
        }
    }
    Ok(series.violations())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_keep_seventeen_digits() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 0.0] {
            let s = fmt_float(x);
            assert_eq!(s.parse::<f64>().unwrap(), x);
            let mantissa = s.trim_start_matches('-').split('e').next().unwrap().replace('.', "");
            assert_eq!(mantissa.len(), 17, "{s}");
        }
    }

    #[test]
    fn fisher_round_trip_with_empty_columns() {
        let dir = tempfile::tempdir().unwrap();
        let s = FisherSeries {
            times: vec![0.0, 0.5, 1.0],
            f_q: vec![0.0, 1.0, 4.0],
            f_c: vec![0.0, 0.9, 3.9],
            f_lr: None,
            f_spin: Some(vec![0.0, 0.8, 3.8]),
            f_s_reference: 39.47841760435743,
            analytic_f_q: None,
        };
        let p = dir.path().join("fisher.csv");
        write_fisher(&p, &s).unwrap();
        assert_eq!(read_fisher(&p).unwrap(), s);
        let text = fs::read_to_string(&p).unwrap();
        assert!(text.lines().nth(1).unwrap().contains(",,"));
    }

    #[test]
    fn map_round_trip_and_width_check() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.csv");
        let theta = vec![-1.0, 0.0, 1.0];
        let rows = vec![vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]];
        write_map(&p, &theta, &[0.0, 0.25], &rows).unwrap();
        let (t, times, back) = read_map(&p).unwrap();
        assert_eq!((t, times, back), (theta, vec![0.0, 0.25], rows));
        fs::write(&p, ",1,2\n0,1\n").unwrap();
        assert!(read_map(&p).is_err());
    }

    #[test]
    fn partial_optional_column_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("fisher.csv");
        fs::write(
            &p,
            "time,f_q,f_c,f_lr,f_spin,analytic_f_q,f_s_reference\n0,0,0,1,,,1\n1,1,1,,,,1\n",
        )
        .unwrap();
        assert!(read_fisher(&p).is_err());
    }
}
