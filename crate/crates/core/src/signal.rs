//! Synthetic multi-component AM-FM test signals.
//!
//! A [`Signal`] is a finite complex sequence `x(n) = sum_k a_k(n) exp(2 pi j phi_k(n))`.
//! Synthetic signals keep their [`Component`]s so that the instantaneous
//! frequency (IF) of every mode is available as ground truth.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Frequency law of a single mode. Frequencies are normalized (cycles/sample).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FrequencyLaw {
    Sinusoid {
        frequency: f64,
    },
    LinearChirp {
        f_start: f64,
        f_end: f64,
    },
    SinusoidalFm {
        center: f64,
        deviation: f64,
        rate: f64,
    },
}

/// One AM-FM mode with known phase and IF.
#[derive(Debug, Clone, PartialEq)]
pub struct Component {
    n_samples: usize,
    amplitude: f64,
    law: FrequencyLaw,
}

fn check_len(n_samples: usize) -> Result<()> {
    if n_samples == 0 {
        return Err(Error::invalid("component length must be positive"));
    }
    Ok(())
}

fn check_amplitude(amp: f64) -> Result<()> {
    if !amp.is_finite() || amp < 0.0 {
        return Err(Error::invalid(format!("amplitude must be finite and >= 0, got {amp}")));
    }
    Ok(())
}

fn check_frequency(name: &str, f: f64) -> Result<()> {
    if !(f > 0.0 && f < 0.5) {
        return Err(Error::invalid(format!("{name} = {f} outside (0, 0.5)")));
    }
    Ok(())
}

/// Constant-frequency mode `amp * exp(2 pi j f0 n)`.
pub fn make_sinusoid(n_samples: usize, f0: f64, amp: f64) -> Result<Component> {
    check_len(n_samples)?;
    check_frequency("frequency", f0)?;
    check_amplitude(amp)?;
    Ok(Component {
        n_samples,
        amplitude: amp,
        law: FrequencyLaw::Sinusoid { frequency: f0 },
    })
}

/// Linear chirp whose IF runs from `f_start` at n = 0 to `f_end` at n = N-1.
pub fn make_linear_chirp(n_samples: usize, f_start: f64, f_end: f64, amp: f64) -> Result<Component> {
    check_len(n_samples)?;
    check_frequency("f_start", f_start)?;
    check_frequency("f_end", f_end)?;
    check_amplitude(amp)?;
    Ok(Component {
        n_samples,
        amplitude: amp,
        law: FrequencyLaw::LinearChirp { f_start, f_end },
    })
}

/// Sinusoidally frequency-modulated mode, IF = `center + deviation * sin(2 pi rate n)`.
pub fn make_sin_fm(
    n_samples: usize,
    center: f64,
    deviation: f64,
    rate: f64,
    amp: f64,
) -> Result<Component> {
    check_len(n_samples)?;
    check_amplitude(amp)?;
    if !(deviation.is_finite() && deviation >= 0.0) || !(rate.is_finite() && rate >= 0.0) {
        return Err(Error::invalid("FM deviation and rate must be finite and >= 0"));
    }
    check_frequency("lowest IF", center - deviation)?;
    check_frequency("highest IF", center + deviation)?;
    Ok(Component {
        n_samples,
        amplitude: amp,
        law: FrequencyLaw::SinusoidalFm {
            center,
            deviation,
            rate,
        },
    })
}

impl Component {
    /// Builds a component from a frequency law, dispatching to the matching generator.
    pub fn from_law(n_samples: usize, law: FrequencyLaw, amp: f64) -> Result<Self> {
        match law {
            FrequencyLaw::Sinusoid { frequency } => make_sinusoid(n_samples, frequency, amp),
            FrequencyLaw::LinearChirp { f_start, f_end } => {
                make_linear_chirp(n_samples, f_start, f_end, amp)
            }
            FrequencyLaw::SinusoidalFm {
                center,
                deviation,
                rate,
            } => make_sin_fm(n_samples, center, deviation, rate, amp),
        }
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn law(&self) -> FrequencyLaw {
        self.law
    }

    pub fn amplitude_at(&self, _n: usize) -> f64 {
        self.amplitude
    }

    /// Phase in cycles, with `phase_at(0) == 0`.
    pub fn phase_at(&self, n: usize) -> f64 {
        let t = n as f64;
        match self.law {
            FrequencyLaw::Sinusoid { frequency } => frequency * t,
            FrequencyLaw::LinearChirp { f_start, f_end } => {
                f_start * t + 0.5 * self.chirp_slope(f_start, f_end) * t * t
            }
            FrequencyLaw::SinusoidalFm {
                center,
                deviation,
                rate,
            } => {
                if deviation == 0.0 || rate == 0.0 {
                    return center * t;
                }
                let w = 2.0 * PI * rate;
                center * t - (deviation / w) * ((w * t).cos() - 1.0)
            }
        }
    }

    /// Instantaneous frequency in cycles/sample.
    pub fn if_at(&self, n: usize) -> f64 {
        let t = n as f64;
        match self.law {
            FrequencyLaw::Sinusoid { frequency } => frequency,
            FrequencyLaw::LinearChirp { f_start, f_end } => {
                f_start + self.chirp_slope(f_start, f_end) * t
            }
            FrequencyLaw::SinusoidalFm {
                center,
                deviation,
                rate,
            } => center + deviation * (2.0 * PI * rate * t).sin(),
        }
    }

    fn chirp_slope(&self, f_start: f64, f_end: f64) -> f64 {
        if self.n_samples < 2 {
            0.0
        } else {
            (f_end - f_start) / (self.n_samples - 1) as f64
        }
    }

    pub fn sample(&self, n: usize) -> Complex64 {
        // Reducing the phase mod 1 keeps the argument small for long signals.
        let cycles = self.phase_at(n).rem_euclid(1.0);
        Complex64::from_polar(self.amplitude_at(n), 2.0 * PI * cycles)
    }

    pub fn samples(&self) -> Vec<Complex64> {
        (0..self.n_samples).map(|n| self.sample(n)).collect()
    }
}

/// A complex discrete-time signal, optionally carrying the components it was built from.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    samples: Vec<Complex64>,
    ground_truth: Option<Vec<Component>>,
}

impl Signal {
    pub fn new(samples: Vec<Complex64>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::invalid("signal must contain at least one sample"));
        }
        Ok(Self {
            samples,
            ground_truth: None,
        })
    }

    pub fn from_real(samples: &[f64]) -> Result<Self> {
        Self::new(samples.iter().map(|&v| Complex64::new(v, 0.0)).collect())
    }

    pub fn zeros(n_samples: usize) -> Result<Self> {
        Self::new(vec![Complex64::new(0.0, 0.0); n_samples])
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<Complex64> {
        self.samples
    }

    pub fn ground_truth(&self) -> Option<&[Component]> {
        self.ground_truth.as_deref()
    }

    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Ground-truth IF of every component in bin units, `truth[k][n] = M * phi'_k(n)`.
    pub fn truth_bins(&self, n_bins: usize) -> Option<Vec<Vec<f64>>> {
        self.ground_truth.as_ref().map(|comps| {
            comps
                .iter()
                .map(|c| (0..self.len()).map(|n| c.if_at(n) * n_bins as f64).collect())
                .collect()
        })
    }
}

/// Sums the components sample-wise.
pub fn synthesize(n_samples: usize, components: &[Component]) -> Result<Signal> {
    if let Some(bad) = components.iter().find(|c| c.n_samples != n_samples) {
        return Err(Error::invalid(format!(
            "component has {} samples, expected {n_samples}",
            bad.n_samples
        )));
    }
    let mut samples = vec![Complex64::new(0.0, 0.0); n_samples];
    for comp in components {
        for (n, s) in samples.iter_mut().enumerate() {
            *s += comp.sample(n);
        }
    }
    let mut signal = Signal::new(samples)?;
    signal.ground_truth = Some(components.to_vec());
    Ok(signal)
}

/// Adds complex circular white Gaussian noise so that `10 log10(|x|^2 / E|w|^2) = snr_db`.
///
/// `snr_db = +inf` returns the input unchanged.
pub fn add_noise(signal: &Signal, snr_db: f64, seed: u64) -> Result<Signal> {
    if snr_db.is_nan() || snr_db == f64::NEG_INFINITY {
        return Err(Error::invalid(format!("snr_db must be a number or +inf, got {snr_db}")));
    }
    let energy = signal.energy();
    if energy == 0.0 {
        return Err(Error::invalid("cannot calibrate noise against a zero-energy signal"));
    }
    if snr_db == f64::INFINITY {
        return Ok(signal.clone());
    }
    let variance = energy / (signal.len() as f64 * 10f64.powf(snr_db / 10.0));
    let sd = (variance / 2.0).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = signal
        .samples
        .iter()
        .map(|&x| {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            x + Complex64::new(sd * re, sd * im)
        })
        .collect();
    Ok(Signal {
        samples,
        ground_truth: signal.ground_truth.clone(),
    })
}
