//! CSV tables and channel dumps.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use epdetect_core::analysis::EvolutionState;
use epdetect_core::detector::DetectionOutput;
use epdetect_core::harness::MetricsRow;
use epdetect_core::linalg::{squared_norm, CMatrix, CVector};

use crate::error::{Result, SimError};

pub const METRICS_HEADER: [&str; 9] = [
    "snr_db",
    "subarray_size",
    "iter",
    "ber",
    "ser",
    "mean_mse_gamma0",
    "mean_tau0_inv",
    "trials",
    "floor_event_rate",
];

pub const TRACE_HEADER: [&str; 7] = [
    "iter",
    "tau0",
    "omega0",
    "mse_gamma0_vs_truth",
    "floor_events",
    "omega_residual",
    "mean_residual",
];

/// Decimal rendering with six significant digits.
pub fn sig6(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    if !v.is_finite() {
        return v.to_string();
    }
    let mut exp = v.abs().log10().floor() as i32;
    // rounding can carry into the next decade
    if (v.abs() / 10f64.powi(exp)) >= 9.999995 {
        exp += 1;
    }
    if exp >= 5 {
        let unit = 10f64.powi(exp - 5);
        format!("{:.0}", (v / unit).round() * unit)
    } else {
        format!("{:.*}", (5 - exp) as usize, v)
    }
}

fn csv_writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out)
}

pub fn write_metrics<W: Write>(rows: &[MetricsRow], out: W) -> std::result::Result<(), csv::Error> {
    let mut w = csv_writer(out);
    w.write_record(METRICS_HEADER)?;
    for r in rows {
        w.write_record([
            sig6(r.snr_db),
            r.subarray_size.to_string(),
            r.iter.to_string(),
            sig6(r.ber),
            sig6(r.ser),
            sig6(r.mean_mse_gamma0),
            sig6(r.mean_tau0_inv),
            r.trials.to_string(),
            sig6(r.floor_event_rate),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn emit_csv(rows: &[MetricsRow], path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| SimError::io(path, e))?;
    write_metrics(rows, BufWriter::new(file)).map_err(|source| SimError::Csv {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_metrics(path: &Path) -> Result<Vec<MetricsRow>> {
    let wrap = |source| SimError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut reader = csv::Reader::from_path(path).map_err(wrap)?;
    let bad = |msg: String| SimError::Csv {
        path: path.to_path_buf(),
        source: csv::Error::from(io::Error::new(io::ErrorKind::InvalidData, msg)),
    };
    let header = reader.headers().map_err(wrap)?.clone();
    if header.iter().ne(METRICS_HEADER) {
        return Err(bad(format!("unexpected header {header:?}")));
    }
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(wrap)?;
        let f = |i: usize| rec[i].parse::<f64>().map_err(|e| bad(format!("column {i}: {e}")));
        let u = |i: usize| rec[i].parse::<usize>().map_err(|e| bad(format!("column {i}: {e}")));
        rows.push(MetricsRow {
            snr_db: f(0)?,
            subarray_size: u(1)?,
            iter: u(2)?,
            ber: f(3)?,
            ser: f(4)?,
            mean_mse_gamma0: f(5)?,
            mean_tau0_inv: f(6)?,
            trials: u(7)?,
            floor_event_rate: f(8)?,
        });
    }
    Ok(rows)
}

/// Per-iteration trace of one detection; the MSE column is empty without truth.
pub fn write_trace<W: Write>(
    out: &DetectionOutput,
    truth: Option<&CVector>,
    dest: W,
) -> std::result::Result<(), csv::Error> {
    let mut w = csv_writer(dest);
    w.write_record(TRACE_HEADER)?;
    for rec in &out.trace {
        let mse = truth
            .map(|x| sig6(squared_norm(&(&rec.gamma0 - x)) / x.len() as f64))
            .unwrap_or_default();
        w.write_record([
            rec.iter.to_string(),
            sig6(rec.tau0_mean()),
            sig6(rec.omega0),
            mse,
            rec.floor_events.to_string(),
            sig6(rec.residuals.omega_spread),
            sig6(rec.residuals.mean_spread),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Columns `iter, rho, nu_0, nu_1, ...`.
pub fn write_evolution<W: Write>(state: &EvolutionState, dest: W) -> std::result::Result<(), csv::Error> {
    let mut w = csv_writer(dest);
    let mut header = vec!["iter".to_string(), "rho".to_string()];
    header.extend((0..state.nu.len()).map(|c| format!("nu_{c}")));
    w.write_record(&header)?;
    for t in 0..state.t_max() {
        let mut row = vec![(t + 1).to_string(), sig6(state.rho[t])];
        row.extend(state.nu.iter().map(|traj| sig6(traj[t])));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DumpFormat {
    Csv,
    Binary,
}

/// Row-major dump with real and imaginary parts interleaved. The CSV form
/// holds one matrix row per line in full precision; the binary form is a
/// flat sequence of little-endian `f64`.
pub fn write_channel<W: Write>(h: &CMatrix, format: DumpFormat, mut dest: W) -> io::Result<()> {
    match format {
        DumpFormat::Csv => {
            for i in 0..h.nrows() {
                let line: Vec<String> = h
                    .row(i)
                    .iter()
                    .flat_map(|z| [format!("{:e}", z.re), format!("{:e}", z.im)])
                    .collect();
                writeln!(dest, "{}", line.join(","))?;
            }
        }
        DumpFormat::Binary => {
            for i in 0..h.nrows() {
                for z in h.row(i).iter() {
                    dest.write_all(&z.re.to_le_bytes())?;
                    dest.write_all(&z.im.to_le_bytes())?;
                }
            }
        }
    }
    dest.flush()
}

pub fn read_channel_binary(bytes: &[u8], rows: usize, cols: usize) -> Option<CMatrix> {
    if bytes.len() != rows * cols * 16 {
        return None;
    }
    let vals: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|b| f64::from_le_bytes(b.try_into().expect("chunk of eight bytes")))
        .collect();
    Some(CMatrix::from_fn(rows, cols, |i, j| {
        let at = 2 * (i * cols + j);
        epdetect_core::linalg::c64(vals[at], vals[at + 1])
    }))
}
