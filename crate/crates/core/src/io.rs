//! File formats: signals (CSV, WAV), time-frequency dumps (CSV, PGM), trajectories,
//! ground truth, benchmark tables and per-frame diagnostics.
//!
//! Floats are written with `Display`, which is the shortest round-trip representation, so
//! identical results always produce identical bytes.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::bench::{BenchRow, Method};
use crate::error::{Error, Result};
use crate::fri::FrameTrace;
use crate::ridge::RidgeTrajectories;
use crate::signal::Signal;
use crate::tf::TfMatrix;

fn writer(path: &Path) -> Result<csv::Writer<File>> {
    Ok(csv::Writer::from_path(path)?)
}

pub fn write_signal_csv(path: &Path, signal: &Signal) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["real", "imag"])?;
    for z in signal.samples() {
        w.write_record([z.re.to_string(), z.im.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads `real,imag` rows (header required). A single `real` column is accepted as well.
pub fn read_signal_csv(path: &Path) -> Result<Signal> {
    let mut r = csv::Reader::from_path(path)?;
    let mut samples = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let parse = |j: usize| -> Result<f64> {
            rec.get(j)
                .map(str::trim)
                .unwrap_or("0")
                .parse()
                .map_err(|_| Error::invalid(format!("{}: row {} is not numeric", path.display(), i + 1)))
        };
        samples.push(Complex64::new(parse(0)?, parse(1)?));
    }
    Signal::new(samples)
}

/// Analytic signal of a real sequence: negative frequencies removed, positive doubled.
pub fn analytic_extension(real: &[f64]) -> Vec<Complex64> {
    let n = real.len();
    if n == 0 {
        return Vec::new();
    }
    let mut planner = FftPlanner::new();
    let mut buf: Vec<Complex64> = real.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    planner.plan_fft_forward(n).process(&mut buf);
    for (k, z) in buf.iter_mut().enumerate() {
        let keep = if k == 0 || (n.is_multiple_of(2) && k == n / 2) {
            1.0
        } else if k < n.div_ceil(2) {
            2.0
        } else {
            0.0
        };
        *z *= keep / n as f64;
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    buf
}

/// Loads a mono WAV file and converts it to an analytic signal. Integer samples are scaled
/// to `[-1, 1)`.
pub fn read_wav(path: &Path) -> Result<Signal> {
    let mut reader = hound::WavReader::open(path)?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(Error::invalid(format!(
            "{}: expected a mono file, found {} channels",
            path.display(),
            spec.channels
        )));
    }
    let real: Vec<f64> = match spec.sample_format {
        hound::SampleFormat::Float => reader
            .samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<std::result::Result<_, _>>()?,
        hound::SampleFormat::Int => {
            let scale = 2f64.powi(spec.bits_per_sample as i32 - 1);
            reader
                .samples::<i32>()
                .map(|s| s.map(|v| v as f64 / scale))
                .collect::<std::result::Result<_, _>>()?
        }
    };
    Signal::new(analytic_extension(&real))
}

/// Writes the real part as 32-bit float mono WAV.
pub fn write_wav(path: &Path, signal: &Signal, sample_rate: u32) -> Result<()> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate,
        bits_per_sample: 32,
        sample_format: hound::SampleFormat::Float,
    };
    let mut w = hound::WavWriter::create(path, spec)?;
    for z in signal.samples() {
        w.write_sample(z.re as f32)?;
    }
    w.finalize()?;
    Ok(())
}

fn is_wav(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("wav"))
}

/// Dispatches on the extension: `.wav` is read with [`read_wav`], anything else as CSV.
pub fn read_signal(path: &Path) -> Result<Signal> {
    if is_wav(path) {
        read_wav(path)
    } else {
        read_signal_csv(path)
    }
}

pub fn write_signal(path: &Path, signal: &Signal) -> Result<()> {
    if is_wav(path) {
        write_wav(path, signal, 8000)
    } else {
        write_signal_csv(path, signal)
    }
}

/// One line per frame, `M` comma-separated values.
pub fn write_tfr_csv(path: &Path, tfr: &TfMatrix<f64>) -> Result<()> {
    let mut w = writer(path)?;
    for row in tfr.frames() {
        w.write_record(row.iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Plain (ASCII) PGM, time left to right and frequency bottom to top, 60 dB dynamic range.
pub fn write_tfr_pgm(path: &Path, tfr: &TfMatrix<f64>) -> Result<()> {
    const RANGE_DB: f64 = 60.0;
    let mut w = BufWriter::new(File::create(path)?);
    let (n, m) = (tfr.n_frames(), tfr.n_bins());
    let peak = tfr.as_slice().iter().copied().fold(0.0, f64::max);
    writeln!(w, "P2\n{n} {m}\n255")?;
    for bin in (0..m).rev() {
        let line: Vec<String> = (0..n)
            .map(|frame| {
                let v = *tfr.get(frame, bin);
                let level = if peak > 0.0 && v > 0.0 {
                    let db = 10.0 * (v / peak).log10();
                    ((db + RANGE_DB) / RANGE_DB).clamp(0.0, 1.0)
                } else {
                    0.0
                };
                ((level * 255.0).round() as u8).to_string()
            })
            .collect();
        writeln!(w, "{}", line.join(" "))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_trajectories_csv(path: &Path, traj: &RidgeTrajectories) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["frame", "component", "if_bins", "if_normalized", "amplitude", "flag"])?;
    let m = traj.n_bins as f64;
    for n in 0..traj.n_frames() {
        for k in 0..traj.n_components() {
            let f = traj.if_estimates[k][n];
            w.write_record([
                n.to_string(),
                k.to_string(),
                f.to_string(),
                (f / m).to_string(),
                traj.amp_estimates[k][n].to_string(),
                traj.flags[n].as_str().to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Ground-truth sidecar: `frame, component, if_normalized, if_bins, amplitude`.
pub fn write_truth_csv(path: &Path, signal: &Signal, n_bins: usize) -> Result<()> {
    let comps = signal
        .ground_truth()
        .ok_or_else(|| Error::invalid("signal carries no ground truth"))?;
    let mut w = writer(path)?;
    w.write_record(["frame", "component", "if_normalized", "if_bins", "amplitude"])?;
    for n in 0..signal.len() {
        for (k, c) in comps.iter().enumerate() {
            let f = c.if_at(n);
            w.write_record([
                n.to_string(),
                k.to_string(),
                f.to_string(),
                (f * n_bins as f64).to_string(),
                c.amplitude_at(n).to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads a truth sidecar back as `truth[k][n]` in bins.
pub fn read_truth_csv(path: &Path) -> Result<Vec<Vec<f64>>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut truth: Vec<Vec<f64>> = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let bad = || Error::invalid(format!("{}: malformed truth row", path.display()));
        let n: usize = rec.get(0).and_then(|s| s.parse().ok()).ok_or_else(bad)?;
        let k: usize = rec.get(1).and_then(|s| s.parse().ok()).ok_or_else(bad)?;
        let bins: f64 = rec.get(3).and_then(|s| s.parse().ok()).ok_or_else(bad)?;
        if truth.len() <= k {
            truth.resize(k + 1, Vec::new());
        }
        if truth[k].len() != n {
            return Err(bad());
        }
        truth[k].push(bins);
    }
    Ok(truth)
}

/// Long-format metrics: one row per (method, SNR).
pub fn write_bench_csv(path: &Path, rows: &[BenchRow]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record([
        "method",
        "snr_db",
        "realizations",
        "rmse_mean",
        "rmse_std",
        "rmae_mean",
        "rmae_std",
        "degenerate_frames",
    ])?;
    for r in rows {
        w.write_record([
            r.method.to_string(),
            r.snr_db.to_string(),
            r.realizations.to_string(),
            r.rmse.mean.to_string(),
            r.rmse.std.to_string(),
            r.rmae.mean.to_string(),
            r.rmae.std.to_string(),
            r.degenerate_frames.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Mean RQF per component and their average, one row per (method, SNR).
pub fn write_rqf_csv(path: &Path, rows: &[BenchRow]) -> Result<()> {
    let mut w = writer(path)?;
    let k = rows.first().map_or(0, |r| r.rqf.len());
    let mut header = vec!["method".to_string(), "snr_db".to_string()];
    header.extend((1..=k).map(|i| format!("c{i}_mean")));
    header.extend((1..=k).map(|i| format!("c{i}_std")));
    header.push("average".into());
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![r.method.to_string(), r.snr_db.to_string()];
        rec.extend(r.rqf.iter().map(|m| m.mean.to_string()));
        rec.extend(r.rqf.iter().map(|m| m.std.to_string()));
        rec.push(r.rqf_average.to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Plot-ready table: SNR on rows, one `<method>_mean` / `<method>_std` column pair per method.
pub fn write_sweep_table(path: &Path, rows: &[BenchRow], pick: impl Fn(&BenchRow) -> (f64, f64)) -> Result<()> {
    let mut methods: Vec<Method> = Vec::new();
    let mut snrs: Vec<f64> = Vec::new();
    for r in rows {
        if !methods.contains(&r.method) {
            methods.push(r.method);
        }
        if !snrs.contains(&r.snr_db) {
            snrs.push(r.snr_db);
        }
    }
    let mut w = writer(path)?;
    let mut header = vec!["snr_db".to_string()];
    for m in &methods {
        header.push(format!("{m}_mean"));
        header.push(format!("{m}_std"));
    }
    w.write_record(&header)?;
    for &snr in &snrs {
        let mut rec = vec![snr.to_string()];
        for &m in &methods {
            match rows.iter().find(|r| r.method == m && r.snr_db == snr) {
                Some(r) => {
                    let (mean, std) = pick(r);
                    rec.push(mean.to_string());
                    rec.push(std.to_string());
                }
                None => rec.extend([String::new(), String::new()]),
            }
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

fn complex_list(values: &[Complex64]) -> String {
    values
        .iter()
        .map(|z| format!("{}{:+}j", z.re, z.im))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Per-frame coefficients, filter and roots.
pub fn write_diagnostics_csv(path: &Path, traces: &[(usize, Result<FrameTrace>)]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["frame", "status", "coefficients", "filter", "roots", "positions", "weights"])?;
    for (n, t) in traces {
        match t {
            Ok(t) => {
                let join = |v: &[f64]| v.iter().map(f64::to_string).collect::<Vec<_>>().join(" ");
                w.write_record([
                    n.to_string(),
                    if t.result.warned { "warned" } else { "ok" }.to_string(),
                    complex_list(&t.coefficients.values),
                    complex_list(&t.filter.coefficients),
                    complex_list(&t.roots),
                    join(&t.result.stream.positions),
                    join(&t.result.stream.weights),
                ])?;
            }
            Err(e) => {
                let msg = e.to_string();
                w.write_record([n.to_string().as_str(), "error", msg.as_str(), "", "", "", ""])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// `mode, file, rqf_db` rows; the RQF column is empty when no reference exists.
pub fn write_rqf_report(path: &Path, rows: &[(usize, String, Option<f64>)]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["mode", "file", "rqf_db"])?;
    for (k, file, q) in rows {
        w.write_record([k.to_string(), file.clone(), q.map(|v| v.to_string()).unwrap_or_default()])?;
    }
    w.flush()?;
    Ok(())
}
