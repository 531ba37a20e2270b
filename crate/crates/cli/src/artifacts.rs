//! Plain-text run artifacts. Every file is comma-separated with a one-line
//! header; floating-point values carry 17 significant digits.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use ttgrape_core::{GrapeRecord, PulseSequence};

use crate::CliError;

pub const CONVERGENCE_FILE: &str = "convergence.csv";
pub const PULSE_FILE: &str = "pulse.csv";
pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const SUMMARY_FILE: &str = "summary.txt";

/// Round-trip exact float formatting.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// Row-at-a-time CSV writer that flushes after every row.
pub struct CsvWriter {
    path: PathBuf,
    out: BufWriter<File>,
}

impl CsvWriter {
    pub fn create(path: &Path, header: &[&str]) -> Result<Self, CliError> {
        let file = File::create(path).map_err(CliError::io(path))?;
        let mut w = Self { path: path.to_owned(), out: BufWriter::new(file) };
        w.row(header.iter().map(|s| s.to_string()))?;
        Ok(w)
    }

    pub fn row(&mut self, fields: impl IntoIterator<Item = String>) -> Result<(), CliError> {
        let line = fields.into_iter().collect::<Vec<_>>().join(",");
        writeln!(self.out, "{line}").and_then(|_| self.out.flush()).map_err(CliError::io(&self.path))
    }
}

pub fn convergence_writer(dir: &Path) -> Result<CsvWriter, CliError> {
    CsvWriter::create(
        &dir.join(CONVERGENCE_FILE),
        &["iteration", "wall_seconds", "fidelity", "infidelity", "step_size", "max_rank", "accepted"],
    )
}

pub fn convergence_row(r: &GrapeRecord) -> Vec<String> {
    vec![
        r.iteration.to_string(),
        num(r.wall_time),
        num(r.fidelity),
        num(r.infidelity),
        num(r.step),
        r.max_rank.to_string(),
        u8::from(r.accepted).to_string(),
    ]
}

/// One row per `(n, k)` in time order: interval midpoint and amplitude.
pub fn write_pulse(path: &Path, pulse: &PulseSequence) -> Result<(), CliError> {
    let mut w = CsvWriter::create(path, &["time", "amplitude"])?;
    let tau = pulse.tau();
    for (n, row) in pulse.amplitudes().iter().enumerate() {
        let mid = (n as f64 + 0.5) * tau;
        for &c in row {
            w.row([num(mid), num(c)])?;
        }
    }
    Ok(())
}

/// Reads a pulse file written by [`write_pulse`]; rows sharing a midpoint
/// belong to the same interval.
pub fn read_pulse(path: &Path, tau: f64, controls: usize) -> Result<PulseSequence, CliError> {
    let bad = |message: String| CliError::PulseFile { path: path.to_owned(), message };
    let file = File::open(path).map_err(CliError::io(path))?;
    let mut amps: Vec<Vec<f64>> = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate().skip(1) {
        let line = line.map_err(CliError::io(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split([',', ' ', '\t']).filter(|s| !s.is_empty()).collect();
        let [t, c] = fields[..] else {
            return Err(bad(format!("line {}: expected two columns", i + 1)));
        };
        let parse = |s: &str| s.parse::<f64>().map_err(|e| bad(format!("line {}: {e}", i + 1)));
        let (t, c) = (parse(t)?, parse(c)?);
        let n = (t / tau - 0.5).round();
        if n < 0.0 || ((n + 0.5) * tau - t).abs() > 1e-9 * tau {
            return Err(bad(format!("line {}: time {t} is not an interval midpoint for τ = {tau}", i + 1)));
        }
        let n = n as usize;
        if n == amps.len() {
            amps.push(Vec::with_capacity(controls));
        } else if n + 1 != amps.len() {
            return Err(bad(format!("line {}: intervals out of order", i + 1)));
        }
        amps[n].push(c);
    }
    if let Some(n) = amps.iter().position(|r| r.len() != controls) {
        return Err(bad(format!("interval {n} has {} amplitudes, expected {controls}", amps[n].len())));
    }
    Ok(PulseSequence::new(tau, amps)?)
}

pub fn trajectory_writer(dir: &Path, sites: usize) -> Result<CsvWriter, CliError> {
    let mut header: Vec<String> =
        ["time", "trace", "norm", "fidelity", "max_rank"].iter().map(|s| s.to_string()).collect();
    header.extend((1..=sites).map(|k| format!("sz_{k}")));
    let refs: Vec<&str> = header.iter().map(String::as_str).collect();
    CsvWriter::create(&dir.join(TRAJECTORY_FILE), &refs)
}
