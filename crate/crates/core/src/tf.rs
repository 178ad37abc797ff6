//! Gaussian-window STFT, spectrogram, inverse STFT and second-order vertical
//! synchrosqueezing.
//!
//! Frames are taken at every sample (hop 1) and the phase reference is absolute:
//!
//! ```text
//! F(n, m) = sum_l x(l) theta_L(n - l) exp(-2 pi j l m / M),   |n - l| <= halfwidth
//! ```
//!
//! Samples outside `[0, N)` are treated as zero.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::Signal;

/// Dense time-frequency matrix stored frame-major (`n_frames` rows of `n_bins`).
#[derive(Debug, Clone, PartialEq)]
pub struct TfMatrix<T> {
    n_frames: usize,
    n_bins: usize,
    data: Vec<T>,
}

impl<T: Clone> TfMatrix<T> {
    pub fn filled(n_frames: usize, n_bins: usize, value: T) -> Self {
        Self {
            n_frames,
            n_bins,
            data: vec![value; n_frames * n_bins],
        }
    }

    pub fn from_vec(n_frames: usize, n_bins: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != n_frames * n_bins {
            return Err(Error::invalid(format!(
                "{} values cannot fill a {n_frames}x{n_bins} matrix",
                data.len()
            )));
        }
        Ok(Self {
            n_frames,
            n_bins,
            data,
        })
    }

    pub fn n_frames(&self) -> usize {
        self.n_frames
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    pub fn frame(&self, n: usize) -> &[T] {
        &self.data[n * self.n_bins..(n + 1) * self.n_bins]
    }

    pub fn frame_mut(&mut self, n: usize) -> &mut [T] {
        &mut self.data[n * self.n_bins..(n + 1) * self.n_bins]
    }

    pub fn frames(&self) -> impl Iterator<Item = &[T]> {
        self.data.chunks(self.n_bins)
    }

    pub fn get(&self, n: usize, m: usize) -> &T {
        &self.data[n * self.n_bins + m]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn map<U: Clone>(&self, f: impl Fn(&T) -> U) -> TfMatrix<U> {
        TfMatrix {
            n_frames: self.n_frames,
            n_bins: self.n_bins,
            data: self.data.iter().map(f).collect(),
        }
    }

    pub fn same_shape<U>(&self, other: &TfMatrix<U>) -> bool {
        self.n_frames == other.n_frames && self.n_bins == other.n_bins
    }
}

/// Analysis parameters shared by the transforms and the FRI stage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalysisConfig {
    /// Time spread `L` of the Gaussian window, in samples.
    pub window_spread: f64,
    /// Number of frequency bins `M`.
    pub n_bins: usize,
    /// Window truncation radius in samples.
    pub window_halfwidth: usize,
    /// Bandlimit `M0`: Fourier-series coefficients `-M0..=M0` are retained.
    pub bandlimit: usize,
}

impl AnalysisConfig {
    /// Config with the default truncation `ceil(4L)` and the conditioning-capped bandlimit
    /// of the spectrogram kernel.
    pub fn new(window_spread: f64, n_bins: usize) -> Result<Self> {
        if !(window_spread > 0.0 && window_spread.is_finite()) {
            return Err(Error::invalid(format!("window spread must be > 0, got {window_spread}")));
        }
        if n_bins < 3 {
            return Err(Error::invalid(format!("need at least 3 frequency bins, got {n_bins}")));
        }
        let bandlimit = crate::fri::default_bandlimit(window_spread, n_bins);
        let config = Self {
            window_spread,
            n_bins,
            window_halfwidth: min_halfwidth(window_spread),
            bandlimit,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn with_bandlimit(mut self, bandlimit: usize) -> Result<Self> {
        self.bandlimit = bandlimit;
        self.validate()?;
        Ok(self)
    }

    pub fn with_halfwidth(mut self, halfwidth: usize) -> Result<Self> {
        self.window_halfwidth = halfwidth;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.window_spread > 0.0 && self.window_spread.is_finite()) {
            return Err(Error::invalid("window spread must be positive"));
        }
        if self.n_bins < 2 {
            return Err(Error::invalid("need at least 2 frequency bins"));
        }
        if self.bandlimit < 1 || self.bandlimit > (self.n_bins - 1) / 2 {
            return Err(Error::invalid(format!(
                "bandlimit {} outside [1, {}]",
                self.bandlimit,
                (self.n_bins - 1) / 2
            )));
        }
        if self.window_halfwidth < min_halfwidth(self.window_spread) {
            return Err(Error::invalid(format!(
                "window halfwidth {} below ceil(4L) = {}",
                self.window_halfwidth,
                min_halfwidth(self.window_spread)
            )));
        }
        Ok(())
    }

    /// Sampled analysis window, index `u + halfwidth` for offsets `u` in `[-h, h]`.
    pub fn window(&self) -> Vec<f64> {
        self.offsets()
            .map(|u| gaussian_window(u as f64, self.window_spread))
            .collect()
    }

    fn offsets(&self) -> impl Iterator<Item = i64> {
        let h = self.window_halfwidth as i64;
        -h..=h
    }
}

fn min_halfwidth(spread: f64) -> usize {
    (4.0 * spread).ceil() as usize
}

/// `theta_L(n) = exp(-n^2 / (2 L^2)) / (sqrt(2 pi) L)`.
pub fn gaussian_window(n: f64, spread: f64) -> f64 {
    (-(n * n) / (2.0 * spread * spread)).exp() / ((2.0 * PI).sqrt() * spread)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StftMatrix {
    pub values: TfMatrix<Complex64>,
    pub config: AnalysisConfig,
}

/// Squared STFT modulus.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    pub values: TfMatrix<f64>,
    pub config: AnalysisConfig,
}

/// Energy distribution of the vertical second-order synchrosqueezed STFT.
#[derive(Debug, Clone, PartialEq)]
pub struct SharpenedTfr {
    pub values: TfMatrix<f64>,
    pub config: AnalysisConfig,
}

/// Any nonnegative time-frequency representation the ridge estimator can consume.
pub trait EnergyTfr {
    fn energy(&self) -> &TfMatrix<f64>;
    fn config(&self) -> &AnalysisConfig;
}

impl EnergyTfr for Spectrogram {
    fn energy(&self) -> &TfMatrix<f64> {
        &self.values
    }
    fn config(&self) -> &AnalysisConfig {
        &self.config
    }
}

impl EnergyTfr for SharpenedTfr {
    fn energy(&self) -> &TfMatrix<f64> {
        &self.values
    }
    fn config(&self) -> &AnalysisConfig {
        &self.config
    }
}

fn forward_plan(n: usize) -> Arc<dyn Fft<f64>> {
    FftPlanner::new().plan_fft_forward(n)
}

/// STFT with an arbitrary real window given on offsets `[-h, h]`.
fn windowed_stft(x: &[Complex64], window: &[f64], n_bins: usize) -> TfMatrix<Complex64> {
    let n = x.len();
    let h = (window.len() / 2) as i64;
    let fft = forward_plan(n_bins);
    let mut out = TfMatrix::filled(n, n_bins, Complex64::new(0.0, 0.0));
    out.data
        .par_chunks_mut(n_bins)
        .enumerate()
        .for_each(|(frame, buf)| {
            let centre = frame as i64;
            for (i, &w) in window.iter().enumerate() {
                let l = centre + i as i64 - h;
                if l < 0 || l >= n as i64 {
                    continue;
                }
                // Absolute phase reference: sample l lands at DFT index l mod M.
                buf[l.rem_euclid(n_bins as i64) as usize] += x[l as usize] * w;
            }
            fft.process(buf);
        });
    out
}

pub fn stft(signal: &Signal, config: &AnalysisConfig) -> Result<StftMatrix> {
    config.validate()?;
    Ok(StftMatrix {
        values: windowed_stft(signal.samples(), &config.window(), config.n_bins),
        config: *config,
    })
}

pub fn spectrogram(stft: &StftMatrix) -> Spectrogram {
    Spectrogram {
        values: stft.values.map(|z| z.norm_sqr()),
        config: stft.config,
    }
}

/// Least-squares overlap-add inverse of [`stft`].
///
/// Each frame is inverse-DFT'd to recover `x(l) theta(n - l)` on the window support; the
/// frames are recombined as `sum_n theta(n-l) y_n(l) / sum_n theta(n-l)^2`, which is the
/// identity on unmodified transforms.
pub fn inverse_stft(stft: &StftMatrix, config: &AnalysisConfig) -> Result<Signal> {
    if stft.config != *config {
        return Err(Error::invalid("STFT was computed with a different analysis config"));
    }
    config.validate()?;
    let n_bins = config.n_bins;
    if stft.values.n_bins() != n_bins {
        return Err(Error::invalid(format!(
            "STFT has {} bins, config expects {n_bins}",
            stft.values.n_bins()
        )));
    }
    if 2 * config.window_halfwidth + 1 > n_bins {
        return Err(Error::invalid(format!(
            "window support {} exceeds {n_bins} bins; frames alias and cannot be inverted",
            2 * config.window_halfwidth + 1
        )));
    }
    let n = stft.values.n_frames();
    let window = config.window();
    let h = config.window_halfwidth as i64;
    let ifft = FftPlanner::new().plan_fft_inverse(n_bins);

    let frames: Vec<Vec<Complex64>> = (0..n)
        .into_par_iter()
        .map(|frame| {
            let mut buf = stft.values.frame(frame).to_vec();
            ifft.process(&mut buf);
            buf
        })
        .collect();

    let mut num = vec![Complex64::new(0.0, 0.0); n];
    let mut den = vec![0.0; n];
    let scale = 1.0 / n_bins as f64;
    for (frame, buf) in frames.iter().enumerate() {
        for (i, &w) in window.iter().enumerate() {
            let l = frame as i64 + i as i64 - h;
            if l < 0 || l >= n as i64 {
                continue;
            }
            let y = buf[l.rem_euclid(n_bins as i64) as usize] * scale;
            num[l as usize] += y * w;
            den[l as usize] += w * w;
        }
    }
    let samples = num.into_iter().zip(den).map(|(v, d)| v / d).collect();
    Signal::new(samples)
}

/// Relative floor below which STFT coefficients are not reassigned.
const VSST_ENERGY_FLOOR: f64 = 1e-8;
/// Relative size of the second-order denominator below which the first-order IF is used.
const VSST_SECOND_ORDER_FLOOR: f64 = 1e-8;

/// Second-order vertical synchrosqueezing of the spectrogram energy.
///
/// With `V_h` the STFT using window `h(u)` at offset `u = l - n`, the complex IF and
/// chirp-rate estimates are
///
/// ```text
/// w~ = w + j V_g'/V_g
/// q~ = j (V_g'^2 - V_g'' V_g) / (V_ug V_g' - V_ug' V_g)
/// w2 = Re(w~) - Re(q~ V_ug / V_g)
/// ```
///
/// which is exact for linear chirps. The energy `|V_g|^2` of each bin is moved to the
/// estimated IF and split linearly between the two neighbouring bins.
pub fn vsst(signal: &Signal, config: &AnalysisConfig) -> Result<SharpenedTfr> {
    config.validate()?;
    let l2 = config.window_spread * config.window_spread;
    let h = config.window_halfwidth as i64;
    let base = config.window();
    let offsets: Vec<f64> = (-h..=h).map(|u| u as f64).collect();
    let derived = |f: &dyn Fn(f64, f64) -> f64| -> Vec<f64> {
        offsets.iter().zip(&base).map(|(&u, &g)| f(u, g)).collect()
    };
    let g1 = derived(&|u, g| -u / l2 * g);
    let g2 = derived(&|u, g| (u * u / (l2 * l2) - 1.0 / l2) * g);
    let ug = derived(&|u, g| u * g);
    let ug1 = derived(&|u, g| -u * u / l2 * g);

    let x = signal.samples();
    let m_bins = config.n_bins;
    let v = windowed_stft(x, &base, m_bins);
    let v1 = windowed_stft(x, &g1, m_bins);
    let v2 = windowed_stft(x, &g2, m_bins);
    let vt = windowed_stft(x, &ug, m_bins);
    let vt1 = windowed_stft(x, &ug1, m_bins);

    let peak = v.as_slice().iter().map(|z| z.norm_sqr()).fold(0.0, f64::max);
    let mut out = TfMatrix::filled(v.n_frames(), m_bins, 0.0);
    if peak == 0.0 {
        return Ok(SharpenedTfr {
            values: out,
            config: *config,
        });
    }
    let floor = VSST_ENERGY_FLOOR * peak;
    let j = Complex64::new(0.0, 1.0);
    let bins_per_radian = m_bins as f64 / (2.0 * PI);

    out.data
        .par_chunks_mut(m_bins)
        .enumerate()
        .for_each(|(n, row)| {
            for m in 0..m_bins {
                let g = *v.get(n, m);
                let energy = g.norm_sqr();
                if energy <= floor {
                    continue;
                }
                let (d1, d2, t, t1) = (*v1.get(n, m), *v2.get(n, m), *vt.get(n, m), *vt1.get(n, m));
                let omega = 2.0 * PI * m as f64 / m_bins as f64;
                let first = omega - (d1 / g).im;
                let denom = t * d1 - t1 * g;
                let estimate = if denom.norm() > VSST_SECOND_ORDER_FLOOR * energy {
                    let q = j * (d1 * d1 - d2 * g) / denom;
                    first - (q * t / g).re
                } else {
                    first
                };
                if !estimate.is_finite() {
                    continue;
                }
                let pos = (estimate * bins_per_radian).rem_euclid(m_bins as f64);
                let lo = pos.floor();
                let frac = pos - lo;
                let lo = lo as usize % m_bins;
                row[lo] += energy * (1.0 - frac);
                row[(lo + 1) % m_bins] += energy * frac;
            }
        });

    Ok(SharpenedTfr {
        values: out,
        config: *config,
    })
}
