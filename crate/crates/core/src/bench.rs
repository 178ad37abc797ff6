//! Experiment configuration, estimator variants and the Monte-Carlo benchmark.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fri::{build_kernel, build_sst_kernel, FilterKernel, FilterMethod};
use crate::modes::{build_masks, extract_mode, rqf, DEFAULT_MASK_HALFWIDTH};
use crate::ridge::{estimate_ridges, evaluate, MetricsReport, RidgeTrajectories};
use crate::signal::{add_noise, synthesize, Component, FrequencyLaw, Signal};
use crate::tf::{spectrogram, stft, vsst, AnalysisConfig, StftMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Prony on the spectrogram.
    Fri,
    /// Total least squares on the spectrogram.
    FriTls,
    /// Total least squares on the synchrosqueezed transform.
    FriSst,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Fri, Method::FriTls, Method::FriSst];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Fri => "fri",
            Method::FriTls => "fri-tls",
            Method::FriSst => "fri-sst",
        }
    }

    pub fn filter(&self) -> FilterMethod {
        match self {
            Method::Fri => FilterMethod::Prony,
            Method::FriTls | Method::FriSst => FilterMethod::Tls,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::invalid(format!("unknown method '{s}' (expected fri, fri-tls or fri-sst)")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentSpec {
    #[serde(flatten)]
    pub law: FrequencyLaw,
    #[serde(default = "one")]
    pub amplitude: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignalSection {
    pub n_samples: usize,
    #[serde(default)]
    pub components: Vec<ComponentSpec>,
    /// Signal file (CSV or WAV) used instead of the synthetic components.
    #[serde(default)]
    pub input: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSection {
    pub window_spread: f64,
    pub n_bins: usize,
    /// Defaults to `ceil(4L)`.
    #[serde(default)]
    pub window_halfwidth: Option<usize>,
    /// Defaults to the conditioning-capped value of the spectrogram kernel.
    #[serde(default)]
    pub bandlimit: Option<usize>,
    /// Frames excluded at each end from the metrics; defaults to `ceil(2L)`.
    #[serde(default)]
    pub boundary: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorSection {
    pub method: Method,
    pub components: usize,
    pub sst_kernel_std: f64,
    pub mask_halfwidth: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub snr_db: Vec<f64>,
    pub realizations: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub signal: SignalSection,
    pub analysis: AnalysisSection,
    pub estimator: EstimatorSection,
    pub sweep: SweepSection,
    pub output: OutputSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let n = 500;
        Self {
            signal: SignalSection {
                n_samples: n,
                components: vec![
                    ComponentSpec {
                        law: FrequencyLaw::Sinusoid { frequency: 0.1 },
                        amplitude: 1.0,
                    },
                    ComponentSpec {
                        law: FrequencyLaw::LinearChirp {
                            f_start: 0.15,
                            f_end: 0.35,
                        },
                        amplitude: 1.0,
                    },
                    ComponentSpec {
                        law: FrequencyLaw::SinusoidalFm {
                            center: 0.43,
                            deviation: 0.04,
                            rate: 0.004,
                        },
                        amplitude: 1.0,
                    },
                ],
                input: None,
            },
            analysis: AnalysisSection {
                window_spread: 20.0,
                n_bins: 500,
                window_halfwidth: None,
                bandlimit: None,
                boundary: None,
            },
            estimator: EstimatorSection {
                method: Method::FriTls,
                components: 3,
                sst_kernel_std: 0.5,
                mask_halfwidth: DEFAULT_MASK_HALFWIDTH,
            },
            sweep: SweepSection {
                snr_db: vec![-5.0, 0.0, 5.0, 10.0],
                realizations: 100,
                seed: 0,
            },
            output: OutputSection { dir: PathBuf::from("out") },
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.signal.n_samples == 0 {
            return Err(Error::invalid("signal.n_samples must be positive"));
        }
        if self.sweep.realizations == 0 {
            return Err(Error::invalid("sweep.realizations must be at least 1"));
        }
        if self.sweep.snr_db.is_empty() {
            return Err(Error::invalid("sweep.snr_db must not be empty"));
        }
        if let Some(bad) = self.sweep.snr_db.iter().find(|s| s.is_nan() || **s == f64::NEG_INFINITY) {
            return Err(Error::invalid(format!("invalid SNR {bad}")));
        }
        if self.estimator.components == 0 {
            return Err(Error::invalid("estimator.components must be at least 1"));
        }
        if self.estimator.sst_kernel_std.is_nan() || self.estimator.sst_kernel_std <= 0.0 {
            return Err(Error::invalid("estimator.sst_kernel_std must be positive"));
        }
        self.base_analysis()?;
        Ok(())
    }

    fn base_analysis(&self) -> Result<AnalysisConfig> {
        let a = &self.analysis;
        let mut config = AnalysisConfig::new(a.window_spread, a.n_bins)?;
        if let Some(h) = a.window_halfwidth {
            config = config.with_halfwidth(h)?;
        }
        if let Some(m0) = a.bandlimit {
            config = config.with_bandlimit(m0)?;
        }
        Ok(config)
    }

    pub fn boundary(&self) -> usize {
        self.analysis
            .boundary
            .unwrap_or((2.0 * self.analysis.window_spread).ceil() as usize)
    }

    pub fn components(&self) -> Result<Vec<Component>> {
        self.signal
            .components
            .iter()
            .map(|c| Component::from_law(self.signal.n_samples, c.law, c.amplitude))
            .collect()
    }

    /// Clean synthetic signal, or the configured input file.
    pub fn clean_signal(&self) -> Result<Signal> {
        match &self.signal.input {
            Some(path) => crate::io::read_signal(path),
            None => synthesize(self.signal.n_samples, &self.components()?),
        }
    }

    pub fn estimator(&self, method: Method) -> Result<Estimator> {
        Estimator::new(
            method,
            self.estimator.components,
            self.base_analysis()?,
            self.estimator.sst_kernel_std,
        )
    }
}

/// A method bound to its analysis config and deconvolution kernel.
#[derive(Debug, Clone)]
pub struct Estimator {
    pub method: Method,
    pub components: usize,
    /// Config of the STFT, used for mode extraction.
    pub analysis: AnalysisConfig,
    pub kernel: FilterKernel,
}

/// Ridge estimate of one signal together with its STFT.
#[derive(Debug, Clone)]
pub struct Estimate {
    pub trajectories: RidgeTrajectories,
    pub stft: StftMatrix,
}

impl Estimator {
    pub fn new(method: Method, components: usize, analysis: AnalysisConfig, sst_kernel_std: f64) -> Result<Self> {
        let kernel = match method {
            Method::Fri | Method::FriTls => build_kernel(&analysis)?,
            Method::FriSst => build_sst_kernel(sst_kernel_std, &analysis)?,
        };
        Ok(Self {
            method,
            components,
            analysis,
            kernel,
        })
    }

    pub fn run(&self, signal: &Signal) -> Result<Estimate> {
        let f = stft(signal, &self.analysis)?;
        let trajectories = match self.method {
            Method::Fri | Method::FriTls => {
                estimate_ridges(&spectrogram(&f), self.components, self.method.filter(), &self.kernel)?
            }
            Method::FriSst => estimate_ridges(
                &vsst(signal, &self.analysis)?,
                self.components,
                self.method.filter(),
                &self.kernel,
            )?,
        };
        Ok(Estimate { trajectories, stft: f })
    }
}

/// Metrics of one noisy realization.
#[derive(Debug, Clone, PartialEq)]
pub struct RealizationResult {
    pub metrics: MetricsReport,
    /// RQF of each ground-truth component against the mode extracted around its matched track.
    pub rqf: Vec<f64>,
    pub degenerate_frames: usize,
}

/// Runs one estimator on `clean + noise(snr, seed)` and scores it against the ground truth.
pub fn run_realization(
    estimator: &Estimator,
    clean: &Signal,
    snr_db: f64,
    seed: u64,
    boundary: usize,
    mask_halfwidth: usize,
) -> Result<RealizationResult> {
    let truth_components = clean
        .ground_truth()
        .ok_or_else(|| Error::invalid("benchmarking needs a synthetic signal with ground truth"))?;
    let truth = clean
        .truth_bins(estimator.analysis.n_bins)
        .expect("ground truth present");
    let noisy = add_noise(clean, snr_db, seed)?;
    let estimate = estimator.run(&noisy)?;
    let metrics = evaluate(&estimate.trajectories, &truth, boundary)?;
    let masks = build_masks(&estimate.trajectories, mask_halfwidth);
    let rqf = truth_components
        .iter()
        .zip(&metrics.assignment)
        .map(|(comp, &track)| {
            let reference = synthesize(clean.len(), std::slice::from_ref(comp))?;
            let mode = extract_mode(&estimate.stft, &masks[track])?;
            rqf(&reference, &mode)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(RealizationResult {
        metrics,
        rqf,
        degenerate_frames: estimate.trajectories.degenerate_frames(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    /// Mean and sample standard deviation (zero for a single value).
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Self { mean, std }
    }
}

/// Aggregate over all realizations of one (method, SNR) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub method: Method,
    pub snr_db: f64,
    pub realizations: usize,
    pub rmse: MeanStd,
    pub rmae: MeanStd,
    /// Mean RQF per ground-truth component.
    pub rqf: Vec<MeanStd>,
    /// Mean over components of the per-component mean RQF.
    pub rqf_average: f64,
    pub degenerate_frames: usize,
}

pub fn bench_row(
    estimator: &Estimator,
    clean: &Signal,
    snr_db: f64,
    realizations: usize,
    base_seed: u64,
    boundary: usize,
    mask_halfwidth: usize,
) -> Result<BenchRow> {
    let results = (0..realizations as u64)
        .into_par_iter()
        .map(|r| run_realization(estimator, clean, snr_db, base_seed + r, boundary, mask_halfwidth))
        .collect::<Result<Vec<_>>>()?;
    let pick = |f: &dyn Fn(&RealizationResult) -> f64| results.iter().map(f).collect::<Vec<_>>();
    let n_comp = results[0].rqf.len();
    let rqf: Vec<MeanStd> = (0..n_comp).map(|k| MeanStd::of(&pick(&|r| r.rqf[k]))).collect();
    let rqf_average = rqf.iter().map(|m| m.mean).sum::<f64>() / n_comp as f64;
    Ok(BenchRow {
        method: estimator.method,
        snr_db,
        realizations,
        rmse: MeanStd::of(&pick(&|r| r.metrics.rmse)),
        rmae: MeanStd::of(&pick(&|r| r.metrics.rmae)),
        rqf,
        rqf_average,
        degenerate_frames: results.iter().map(|r| r.degenerate_frames).sum(),
    })
}

/// One row per (method, SNR), methods in the given order and SNRs in config order.
pub fn run_bench(config: &ExperimentConfig, methods: &[Method]) -> Result<Vec<BenchRow>> {
    config.validate()?;
    let clean = config.clean_signal()?;
    if clean.ground_truth().is_none() {
        return Err(Error::invalid("the benchmark needs synthetic components, not an input file"));
    }
    let mut rows = Vec::new();
    for &method in methods {
        let estimator = config.estimator(method)?;
        for &snr in &config.sweep.snr_db {
            rows.push(bench_row(
                &estimator,
                &clean,
                snr,
                config.sweep.realizations,
                config.sweep.seed,
                config.boundary(),
                config.estimator.mask_halfwidth,
            )?);
        }
    }
    Ok(rows)
}

/// Per-invocation options shared by the single-signal commands.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub method: Method,
    /// `+inf` for no noise.
    pub snr_db: f64,
    pub seed: u64,
    /// Overrides `signal.input` of the config.
    pub input: Option<PathBuf>,
    pub out_dir: PathBuf,
    /// Also dump the TFR as CSV and the per-frame FRI intermediates.
    pub debug_dump: bool,
}

impl RunOptions {
    pub fn from_config(config: &ExperimentConfig) -> Self {
        Self {
            method: config.estimator.method,
            snr_db: f64::INFINITY,
            seed: config.sweep.seed,
            input: config.signal.input.clone(),
            out_dir: config.output.dir.clone(),
            debug_dump: false,
        }
    }

    /// The observed signal: the input file as is, or the synthetic mixture plus noise.
    pub fn observed_signal(&self, config: &ExperimentConfig) -> Result<Signal> {
        match &self.input {
            Some(path) => {
                let x = crate::io::read_signal(path)?;
                if self.snr_db.is_finite() {
                    add_noise(&x, self.snr_db, self.seed)
                } else {
                    Ok(x)
                }
            }
            None => add_noise(&synthesize(config.signal.n_samples, &config.components()?)?, self.snr_db, self.seed),
        }
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    Ok(())
}

/// Writes `signal.csv` and, for synthetic signals, the `truth.csv` sidecar.
pub fn cmd_generate(config: &ExperimentConfig, opts: &RunOptions) -> Result<Vec<PathBuf>> {
    config.validate()?;
    let signal = opts.observed_signal(config)?;
    ensure_dir(&opts.out_dir)?;
    let mut written = vec![opts.out_dir.join("signal.csv")];
    crate::io::write_signal_csv(&written[0], &signal)?;
    if signal.ground_truth().is_some() {
        let truth = opts.out_dir.join("truth.csv");
        crate::io::write_truth_csv(&truth, &signal, config.analysis.n_bins)?;
        written.push(truth);
    }
    Ok(written)
}

#[derive(Debug, Clone)]
pub struct EstimateOutput {
    pub estimate: Estimate,
    /// Present when the signal carries ground truth.
    pub metrics: Option<MetricsReport>,
    pub written: Vec<PathBuf>,
}

/// Full pipeline on one signal; writes `trajectories.csv`, `tfr.pgm` and, with ground
/// truth, `metrics.csv`.
pub fn cmd_estimate(config: &ExperimentConfig, opts: &RunOptions) -> Result<EstimateOutput> {
    config.validate()?;
    let signal = opts.observed_signal(config)?;
    let estimator = config.estimator(opts.method)?;
    let estimate = estimator.run(&signal)?;
    ensure_dir(&opts.out_dir)?;
    let mut written = Vec::new();

    let traj_path = opts.out_dir.join("trajectories.csv");
    crate::io::write_trajectories_csv(&traj_path, &estimate.trajectories)?;
    written.push(traj_path);

    let tfr = match opts.method {
        Method::FriSst => vsst(&signal, &estimator.analysis)?.values,
        _ => spectrogram(&estimate.stft).values,
    };
    let pgm = opts.out_dir.join("tfr.pgm");
    crate::io::write_tfr_pgm(&pgm, &tfr)?;
    written.push(pgm);

    if opts.debug_dump {
        let csv_path = opts.out_dir.join("tfr.csv");
        crate::io::write_tfr_csv(&csv_path, &tfr)?;
        written.push(csv_path);
        let traces: Vec<_> = (0..tfr.n_frames())
            .into_par_iter()
            .map(|n| {
                let t = crate::fri::trace_frame(
                    tfr.frame(n),
                    n,
                    &estimator.kernel,
                    estimator.components,
                    opts.method.filter(),
                );
                (n, t)
            })
            .collect();
        let diag = opts.out_dir.join("diagnostics.csv");
        crate::io::write_diagnostics_csv(&diag, &traces)?;
        written.push(diag);
    }

    let metrics = match signal.truth_bins(estimator.analysis.n_bins) {
        Some(truth) if truth.len() == estimator.components => {
            let report = evaluate(&estimate.trajectories, &truth, config.boundary())?;
            let path = opts.out_dir.join("metrics.csv");
            write_metrics_csv(&path, &report)?;
            written.push(path);
            Some(report)
        }
        _ => None,
    };
    Ok(EstimateOutput {
        estimate,
        metrics,
        written,
    })
}

fn write_metrics_csv(path: &Path, report: &MetricsReport) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["component", "track", "rmse", "rmae"])?;
    for (k, (c, track)) in report.per_component.iter().zip(&report.assignment).enumerate() {
        w.write_record([k.to_string(), track.to_string(), c.rmse.to_string(), c.rmae.to_string()])?;
    }
    w.write_record(["total".to_string(), String::new(), report.rmse.to_string(), report.rmae.to_string()])?;
    w.flush()?;
    Ok(())
}

/// Runs the sweep and writes `metrics.csv`, `rqf.csv`, `rmse_by_snr.csv` and `rmae_by_snr.csv`.
pub fn cmd_bench(config: &ExperimentConfig, methods: &[Method], out_dir: &Path) -> Result<Vec<BenchRow>> {
    if methods.is_empty() {
        return Err(Error::invalid("no methods selected"));
    }
    let rows = run_bench(config, methods)?;
    ensure_dir(out_dir)?;
    crate::io::write_bench_csv(&out_dir.join("metrics.csv"), &rows)?;
    crate::io::write_rqf_csv(&out_dir.join("rqf.csv"), &rows)?;
    crate::io::write_sweep_table(&out_dir.join("rmse_by_snr.csv"), &rows, |r| (r.rmse.mean, r.rmse.std))?;
    crate::io::write_sweep_table(&out_dir.join("rmae_by_snr.csv"), &rows, |r| (r.rmae.mean, r.rmae.std))?;
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtractedMode {
    pub signal: Signal,
    pub path: PathBuf,
    /// Against the matched clean component, or against the observed signal for the
    /// all-pass mask; `None` without a reference.
    pub rqf: Option<f64>,
}

/// Extracts one mode per estimated track (or a single all-pass mode) and writes
/// `mode_<k>.csv` plus `rqf_report.csv`.
pub fn cmd_extract(config: &ExperimentConfig, opts: &RunOptions, all_pass: bool) -> Result<Vec<ExtractedMode>> {
    config.validate()?;
    let signal = opts.observed_signal(config)?;
    ensure_dir(&opts.out_dir)?;
    let estimator = config.estimator(opts.method)?;

    let modes: Vec<(Signal, Option<f64>)> = if all_pass {
        let f = stft(&signal, &estimator.analysis)?;
        let mask = crate::modes::BinaryMask::constant(f.values.n_frames(), f.values.n_bins(), true);
        let mode = extract_mode(&f, &mask)?;
        let q = rqf(&signal, &mode)?;
        vec![(mode, Some(q))]
    } else {
        let estimate = estimator.run(&signal)?;
        let masks = build_masks(&estimate.trajectories, config.estimator.mask_halfwidth);
        let extracted = masks
            .iter()
            .map(|m| extract_mode(&estimate.stft, m))
            .collect::<Result<Vec<_>>>()?;
        // Reference for each track: the ground-truth component matched to it.
        let mut references: Vec<Option<Signal>> = vec![None; extracted.len()];
        if let (Some(comps), Some(truth)) = (signal.ground_truth(), signal.truth_bins(estimator.analysis.n_bins)) {
            if truth.len() == extracted.len() {
                let report = evaluate(&estimate.trajectories, &truth, config.boundary())?;
                for (comp, &track) in comps.iter().zip(&report.assignment) {
                    references[track] = Some(synthesize(signal.len(), std::slice::from_ref(comp))?);
                }
            }
        }
        extracted
            .into_iter()
            .zip(references)
            .map(|(mode, reference)| {
                let q = reference.map(|r| rqf(&r, &mode)).transpose()?;
                Ok((mode, q))
            })
            .collect::<Result<Vec<_>>>()?
    };

    let as_wav = opts.input.as_deref().is_some_and(|p| {
        p.extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| e.eq_ignore_ascii_case("wav"))
    });
    let mut report = Vec::new();
    let mut out = Vec::new();
    for (k, (signal, q)) in modes.into_iter().enumerate() {
        let name = format!("mode_{k}.csv");
        let path = opts.out_dir.join(&name);
        crate::io::write_signal_csv(&path, &signal)?;
        if as_wav {
            crate::io::write_signal(&opts.out_dir.join(format!("mode_{k}.wav")), &signal)?;
        }
        report.push((k, name, q));
        out.push(ExtractedMode { signal, path, rqf: q });
    }
    crate::io::write_rqf_report(&opts.out_dir.join("rqf_report.csv"), &report)?;
    Ok(out)
}
