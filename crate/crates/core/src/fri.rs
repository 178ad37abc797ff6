//! Finite-rate-of-innovation recovery of a single time-frequency column.
//!
//! A column is modelled as a periodic stream of `K` weighted Diracs blurred by a known
//! kernel, `s(m) = sum_k a_k g(m - p_k)`. Its Fourier-series coefficients divided by those
//! of the kernel form an exponential sum `f(l) = sum_k a_k u_k^l` with
//! `u_k = exp(-2 pi j p_k / M)`, from which the positions are found as the roots of an
//! annihilating filter and the weights by a small Vandermonde solve.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, Schur, SVD};
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tf::AnalysisConfig;

/// Retained coefficients must satisfy `|g_hat(l)| >= AUTO_BANDLIMIT_RATIO |g_hat(0)|`.
pub const AUTO_BANDLIMIT_RATIO: f64 = 1e-6;
/// Below this ratio the kernel cannot be deconvolved at all.
pub const ILL_CONDITIONED_RATIO: f64 = 1e-12;
/// Positions closer than this (in bins) are treated as coincident.
pub const COINCIDENCE_TOL: f64 = 1e-6;
/// Relative singular-value ratio below which the Prony system is considered singular.
const SINGULAR_RATIO: f64 = 1e-12;
const SCHUR_MAX_ITER: usize = 500;
const NEWTON_STEPS: usize = 3;

/// Kernel profile as a function of a (wrapped) bin offset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum KernelShape {
    /// Squared modulus of the Gaussian window transform, `exp(-(2 pi d L / M)^2)`.
    Spectrogram { window_spread: f64 },
    /// Unit-peak Gaussian with standard deviation `std_bins`.
    Gaussian { std_bins: f64 },
}

impl KernelShape {
    pub fn eval(&self, offset: f64, n_bins: usize) -> f64 {
        match *self {
            KernelShape::Spectrogram { window_spread } => {
                let x = 2.0 * PI * offset * window_spread / n_bins as f64;
                (-x * x).exp()
            }
            KernelShape::Gaussian { std_bins } => (-offset * offset / (2.0 * std_bins * std_bins)).exp(),
        }
    }

    /// Kernel sampled on the `M`-periodic bin grid using wrapped distance.
    ///
    /// Far tails are floored at the smallest normal `f64` instead of underflowing to zero.
    pub fn sample(&self, n_bins: usize) -> Vec<f64> {
        (0..n_bins)
            .map(|m| self.eval(wrapped_offset(m as f64, n_bins), n_bins).max(f64::MIN_POSITIVE))
            .collect()
    }
}

/// Signed representative of `x` modulo `M` in `(-M/2, M/2]`.
pub fn wrapped_offset(x: f64, n_bins: usize) -> f64 {
    let m = n_bins as f64;
    let r = x.rem_euclid(m);
    if r > m / 2.0 {
        r - m
    } else {
        r
    }
}

/// Sampled kernel together with its retained Fourier-series coefficients.
#[derive(Clone)]
pub struct FilterKernel {
    shape: KernelShape,
    g_samples: Vec<f64>,
    g_hat: Vec<Complex64>,
    bandlimit: usize,
    fft: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for FilterKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FilterKernel")
            .field("shape", &self.shape)
            .field("n_bins", &self.g_samples.len())
            .field("bandlimit", &self.bandlimit)
            .finish()
    }
}

impl FilterKernel {
    pub fn shape(&self) -> KernelShape {
        self.shape
    }

    pub fn n_bins(&self) -> usize {
        self.g_samples.len()
    }

    pub fn bandlimit(&self) -> usize {
        self.bandlimit
    }

    pub fn g_samples(&self) -> &[f64] {
        &self.g_samples
    }

    /// `g_hat(lambda)` for `|lambda| <= M0`.
    pub fn g_hat(&self, lambda: i64) -> Complex64 {
        self.g_hat[(lambda + self.bandlimit as i64) as usize]
    }

    pub fn g_hat_values(&self) -> &[Complex64] {
        &self.g_hat
    }
}

/// Normalized DFT `(1/M) sum_m x(m) exp(-2 pi j m l / M)` of a real sequence.
fn normalized_dft(fft: &dyn Fft<f64>, x: &[f64]) -> Vec<Complex64> {
    let scale = 1.0 / x.len() as f64;
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v * scale, 0.0)).collect();
    fft.process(&mut buf);
    buf
}

fn dft_at(spectrum: &[Complex64], lambda: i64) -> Complex64 {
    spectrum[lambda.rem_euclid(spectrum.len() as i64) as usize]
}

/// Largest `M0 <= floor((M-1)/2)` such that every `|g_hat(l)| / |g_hat(0)|` for `l <= M0`
/// stays above [`AUTO_BANDLIMIT_RATIO`]. Never below 1.
pub fn auto_bandlimit(g_samples: &[f64]) -> usize {
    let n = g_samples.len();
    let fft = FftPlanner::new().plan_fft_forward(n);
    let spectrum = normalized_dft(fft.as_ref(), g_samples);
    let dc = spectrum[0].norm();
    let max = (n - 1) / 2;
    let bandlimit = spectrum[1..=max]
        .iter()
        .take_while(|z| z.norm() >= AUTO_BANDLIMIT_RATIO * dc)
        .count();
    bandlimit.max(1)
}

/// Default bandlimit of the spectrogram kernel for window spread `L` and `M` bins.
pub fn default_bandlimit(window_spread: f64, n_bins: usize) -> usize {
    auto_bandlimit(&KernelShape::Spectrogram { window_spread }.sample(n_bins))
}

fn kernel_from_shape(shape: KernelShape, n_bins: usize, bandlimit: usize) -> Result<FilterKernel> {
    if bandlimit == 0 || bandlimit > (n_bins - 1) / 2 {
        return Err(Error::invalid(format!("bandlimit {bandlimit} outside [1, {}]", (n_bins - 1) / 2)));
    }
    let g_samples = shape.sample(n_bins);
    let fft = FftPlanner::new().plan_fft_forward(n_bins);
    let spectrum = normalized_dft(fft.as_ref(), &g_samples);
    let dc = spectrum[0].norm();
    let m0 = bandlimit as i64;
    let g_hat: Vec<Complex64> = (-m0..=m0).map(|l| dft_at(&spectrum, l)).collect();
    for lambda in 0..=bandlimit {
        let ratio = g_hat[bandlimit + lambda].norm() / dc;
        if ratio.is_nan() || ratio < ILL_CONDITIONED_RATIO {
            return Err(Error::IllConditionedKernel { lambda, ratio });
        }
    }
    Ok(FilterKernel {
        shape,
        g_samples,
        g_hat,
        bandlimit,
        fft,
    })
}

/// Spectrogram kernel of the analysis window, truncated to `config.bandlimit`.
pub fn build_kernel(config: &AnalysisConfig) -> Result<FilterKernel> {
    config.validate()?;
    kernel_from_shape(
        KernelShape::Spectrogram {
            window_spread: config.window_spread,
        },
        config.n_bins,
        config.bandlimit,
    )
}

/// Narrow Gaussian kernel used on synchrosqueezed representations.
pub fn build_sst_kernel(std_bins: f64, config: &AnalysisConfig) -> Result<FilterKernel> {
    if !(std_bins > 0.0 && std_bins.is_finite()) {
        return Err(Error::invalid(format!("kernel std must be > 0, got {std_bins}")));
    }
    config.validate()?;
    kernel_from_shape(KernelShape::Gaussian { std_bins }, config.n_bins, config.bandlimit)
}

/// Noiseless column `s(m) = sum_k a_k g(m - p_k)` for arbitrary real positions.
pub fn synthesize_frame(kernel: &FilterKernel, positions: &[f64], weights: &[f64]) -> Result<Vec<f64>> {
    if positions.len() != weights.len() {
        return Err(Error::invalid("positions and weights differ in length"));
    }
    let n = kernel.n_bins();
    Ok((0..n)
        .map(|m| {
            positions
                .iter()
                .zip(weights)
                .map(|(&p, &a)| a * kernel.shape.eval(wrapped_offset(m as f64 - p, n), n))
                .sum()
        })
        .collect())
}

/// Kernel-deconvolved Fourier-series coefficients of one column, `lambda` in `[-M0, M0]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierCoefficients {
    pub values: Vec<Complex64>,
    pub frame_index: usize,
}

impl FourierCoefficients {
    /// Exact coefficients `sum_k a_k exp(-2 pi j l p_k / M)` of a Dirac stream.
    pub fn from_diracs(positions: &[f64], weights: &[f64], n_bins: usize, bandlimit: usize) -> Self {
        let m0 = bandlimit as i64;
        let values = (-m0..=m0)
            .map(|l| {
                positions
                    .iter()
                    .zip(weights)
                    .map(|(&p, &a)| Complex64::from_polar(a, -2.0 * PI * l as f64 * p / n_bins as f64))
                    .sum()
            })
            .collect();
        Self { values, frame_index: 0 }
    }

    pub fn bandlimit(&self) -> usize {
        (self.values.len() - 1) / 2
    }

    pub fn at(&self, lambda: i64) -> Complex64 {
        self.values[(lambda + self.bandlimit() as i64) as usize]
    }

    fn max_abs(&self) -> f64 {
        self.values.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

/// `f_hat = D_g^-1 V^+ s`.
///
/// The columns of `V` are distinct DFT exponentials, so `V^+ = V^H / M` whether or not
/// `M = 2 M0 + 1`; this is the normalized DFT restricted to `[-M0, M0]`. Negative orders
/// are mirrored from positive ones, so the result is exactly Hermitian.
pub fn fourier_coefficients(frame: &[f64], kernel: &FilterKernel, frame_index: usize) -> Result<FourierCoefficients> {
    if frame.len() != kernel.n_bins() {
        return Err(Error::invalid(format!(
            "frame has {} bins, kernel expects {}",
            frame.len(),
            kernel.n_bins()
        )));
    }
    let spectrum = normalized_dft(kernel.fft.as_ref(), frame);
    let m0 = kernel.bandlimit as i64;
    let values = (-m0..=m0)
        .map(|l| {
            let v = spectrum[l.unsigned_abs() as usize] / kernel.g_hat(l.abs());
            if l < 0 {
                v.conj()
            } else {
                v
            }
        })
        .collect();
    Ok(FourierCoefficients { values, frame_index })
}

/// `V D_g f_hat`: the column described by a set of retained coefficients.
pub fn synthesize_from_coefficients(coeffs: &FourierCoefficients, kernel: &FilterKernel) -> Vec<Complex64> {
    let n = kernel.n_bins();
    let m0 = coeffs.bandlimit() as i64;
    (0..n)
        .map(|m| {
            (-m0..=m0)
                .map(|l| {
                    let phase = 2.0 * PI * ((m as i64 * l).rem_euclid(n as i64)) as f64 / n as f64;
                    kernel.g_hat(l) * coeffs.at(l) * Complex64::from_polar(1.0, phase)
                })
                .sum()
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FilterMethod {
    Prony,
    Tls,
}

/// Coefficients `h(0..=K)` with `sum_i h(i) f(l - i) = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnihilatingFilter {
    pub coefficients: Vec<Complex64>,
    pub method: FilterMethod,
}

impl AnnihilatingFilter {
    pub fn order(&self) -> usize {
        self.coefficients.len() - 1
    }

    /// `(f * h)(l)` for every `l` where all taps fall inside the retained band.
    pub fn residual(&self, coeffs: &FourierCoefficients) -> Vec<Complex64> {
        let m0 = coeffs.bandlimit() as i64;
        let k = self.order() as i64;
        (-m0 + k..=m0)
            .map(|l| {
                self.coefficients
                    .iter()
                    .enumerate()
                    .map(|(i, h)| h * coeffs.at(l - i as i64))
                    .sum()
            })
            .collect()
    }
}

fn check_order(coeffs: &FourierCoefficients, k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::invalid("number of components must be at least 1"));
    }
    if coeffs.bandlimit() < k {
        return Err(Error::invalid(format!(
            "{} coefficients cannot determine {k} Diracs (need 2K+1)",
            coeffs.values.len()
        )));
    }
    Ok(())
}

/// Yule-Walker solution with `h(0) = 1`: `sum_{i=1..K} h(i) f(l - i) = -f(l)` for `l = 1..K`.
pub fn prony_filter(coeffs: &FourierCoefficients, k: usize) -> Result<AnnihilatingFilter> {
    check_order(coeffs, k)?;
    let a = DMatrix::from_fn(k, k, |r, c| coeffs.at(r as i64 - c as i64));
    let b = DVector::from_fn(k, |r, _| -coeffs.at(r as i64 + 1));
    let sv = a.singular_values();
    let (smax, smin) = (sv.max(), sv.min());
    if smax.is_nan() || smax <= 0.0 || smin < SINGULAR_RATIO * smax {
        return Err(Error::degenerate("Toeplitz system is singular (coincident or missing Diracs)"));
    }
    let h = a
        .lu()
        .solve(&b)
        .ok_or_else(|| Error::degenerate("Toeplitz system is singular"))?;
    let mut coefficients = Vec::with_capacity(k + 1);
    coefficients.push(Complex64::new(1.0, 0.0));
    coefficients.extend(h.iter().copied());
    Ok(AnnihilatingFilter {
        coefficients,
        method: FilterMethod::Prony,
    })
}

/// Unit-norm minimizer of `|A h|` over the full Toeplitz matrix of all retained coefficients.
pub fn tls_filter(coeffs: &FourierCoefficients, k: usize) -> Result<AnnihilatingFilter> {
    check_order(coeffs, k)?;
    let m0 = coeffs.bandlimit() as i64;
    let rows = (2 * m0 + 1) as usize - k;
    if rows < k + 1 {
        return Err(Error::invalid(format!("only {rows} rows for {} unknowns", k + 1)));
    }
    let a = DMatrix::from_fn(rows, k + 1, |r, c| coeffs.at(-m0 + k as i64 + r as i64 - c as i64));
    let svd = SVD::try_new(a, false, true, f64::EPSILON, 0)
        .ok_or_else(|| Error::NumericalFailure("SVD did not converge".into()))?;
    let v_t = svd.v_t.expect("right singular vectors requested");
    let (idx, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("at least one singular value");
    let h: Vec<Complex64> = v_t.row(idx).iter().map(|z| z.conj()).collect();
    let norm = h.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    Ok(AnnihilatingFilter {
        coefficients: h.into_iter().map(|z| z / norm).collect(),
        method: FilterMethod::Tls,
    })
}

fn horner(poly: &[Complex64], z: Complex64) -> (Complex64, Complex64) {
    let mut p = Complex64::new(0.0, 0.0);
    let mut dp = Complex64::new(0.0, 0.0);
    for &c in poly {
        dp = dp * z + p;
        p = p * z + c;
    }
    (p, dp)
}

/// Roots of `h(0) z^K + h(1) z^(K-1) + ... + h(K)`.
pub fn filter_roots(filter: &AnnihilatingFilter) -> Result<Vec<Complex64>> {
    let h = &filter.coefficients;
    let k = filter.order();
    let scale = h.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if !scale.is_finite() || scale <= 0.0 {
        return Err(Error::degenerate("annihilating filter is zero"));
    }
    if h[0].norm() <= f64::EPSILON * scale {
        return Err(Error::degenerate("annihilating filter has a root at infinity"));
    }
    let monic: Vec<Complex64> = h.iter().map(|c| c / h[0]).collect();
    let mut roots = if k == 1 {
        vec![-monic[1]]
    } else {
        let companion = DMatrix::from_fn(k, k, |r, c| {
            if r == 0 {
                -monic[c + 1]
            } else if r == c + 1 {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        let schur = Schur::try_new(companion, f64::EPSILON, SCHUR_MAX_ITER)
            .ok_or_else(|| Error::NumericalFailure("companion eigenvalues did not converge".into()))?;
        schur
            .eigenvalues()
            .ok_or_else(|| Error::NumericalFailure("Schur form is not triangular".into()))?
            .iter()
            .copied()
            .collect()
    };
    for z in roots.iter_mut() {
        for _ in 0..NEWTON_STEPS {
            let (p, dp) = horner(&monic, *z);
            if dp.norm() == 0.0 {
                break;
            }
            let next = *z - p / dp;
            if horner(&monic, next).0.norm() < p.norm() {
                *z = next;
            } else {
                break;
            }
        }
    }
    if roots.iter().any(|z| !z.re.is_finite() || !z.im.is_finite() || z.norm() == 0.0) {
        return Err(Error::NumericalFailure("non-finite polynomial root".into()));
    }
    Ok(roots)
}

/// Position in `[0, M)` of a root `u = exp(-2 pi j p / M)`, after projection onto the unit circle.
pub fn root_to_position(root: Complex64, n_bins: usize) -> f64 {
    let m = n_bins as f64;
    let u = root / root.norm();
    let p = (-m / (2.0 * PI) * u.arg()).rem_euclid(m);
    if p >= m {
        0.0
    } else {
        p
    }
}

/// Sorted positions, plus whether coincident roots had to be separated.
#[derive(Debug, Clone, PartialEq)]
pub struct Positions {
    pub values: Vec<f64>,
    pub separated_duplicates: bool,
}

pub fn roots_to_positions(filter: &AnnihilatingFilter, n_bins: usize, k: usize) -> Result<Positions> {
    if filter.order() != k {
        return Err(Error::invalid(format!("filter has degree {}, expected {k}", filter.order())));
    }
    let roots = filter_roots(filter)?;
    let mut values: Vec<f64> = roots.iter().map(|&z| root_to_position(z, n_bins)).collect();
    values.sort_by(f64::total_cmp);
    let separated_duplicates = separate_duplicates(&mut values, n_bins);
    Ok(Positions {
        values,
        separated_duplicates,
    })
}

fn circular_gap(a: f64, b: f64, n_bins: usize) -> f64 {
    wrapped_offset(a - b, n_bins).abs()
}

/// Pushes each member of a coincident pair `COINCIDENCE_TOL` away from the other.
fn separate_duplicates(values: &mut [f64], n_bins: usize) -> bool {
    let k = values.len();
    if k < 2 {
        return false;
    }
    let m = n_bins as f64;
    let mut changed = false;
    for _ in 0..k {
        let mut pass_changed = false;
        for i in 0..k {
            let j = (i + 1) % k;
            if i == j || circular_gap(values[i], values[j], n_bins) >= 2.0 * COINCIDENCE_TOL {
                continue;
            }
            let mid = values[i] + wrapped_offset(values[j] - values[i], n_bins) / 2.0;
            values[i] = (mid - COINCIDENCE_TOL).rem_euclid(m);
            values[j] = (mid + COINCIDENCE_TOL).rem_euclid(m);
            pass_changed = true;
        }
        changed |= pass_changed;
        if !pass_changed {
            break;
        }
    }
    if changed {
        values.sort_by(f64::total_cmp);
    }
    changed
}

fn check_distinct(positions: &[f64], n_bins: usize) -> Result<()> {
    for i in 0..positions.len() {
        for j in i + 1..positions.len() {
            if circular_gap(positions[i], positions[j], n_bins) < COINCIDENCE_TOL {
                return Err(Error::degenerate(format!(
                    "positions {} and {} coincide",
                    positions[i], positions[j]
                )));
            }
        }
    }
    Ok(())
}

/// Complex solution `w` of `sum_q exp(-2 pi j p x_q / M) w_q = f(p)`, `p = 0..K-1`.
pub fn solve_amplitudes_complex(
    coeffs: &FourierCoefficients,
    positions: &[f64],
    n_bins: usize,
) -> Result<Vec<Complex64>> {
    let k = positions.len();
    if k == 0 {
        return Ok(Vec::new());
    }
    if coeffs.bandlimit() + 1 < k {
        return Err(Error::invalid("not enough coefficients for the amplitude system"));
    }
    check_distinct(positions, n_bins)?;
    let w = DMatrix::from_fn(k, k, |p, q| {
        Complex64::from_polar(1.0, -2.0 * PI * p as f64 * positions[q] / n_bins as f64)
    });
    let rhs = DVector::from_fn(k, |p, _| coeffs.at(p as i64));
    let sol = w
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::degenerate("Vandermonde system is singular"))?;
    if sol.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::degenerate("Vandermonde system is singular"));
    }
    Ok(sol.iter().copied().collect())
}

/// Real, nonnegative Dirac weights at the given positions.
pub fn solve_amplitudes(coeffs: &FourierCoefficients, positions: &[f64], n_bins: usize) -> Result<Vec<f64>> {
    Ok(solve_amplitudes_complex(coeffs, positions, n_bins)?
        .into_iter()
        .map(|z| z.re.max(0.0))
        .collect())
}

/// Sparse description of one column.
#[derive(Debug, Clone, PartialEq)]
pub struct DiracStream {
    /// Ascending positions in bins, `[0, M)`.
    pub positions: Vec<f64>,
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecoveredFrame {
    pub stream: DiracStream,
    /// Coincident roots were pushed apart before the amplitude solve.
    pub warned: bool,
}

/// Intermediate quantities of one recovery, for diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameTrace {
    pub coefficients: FourierCoefficients,
    pub filter: AnnihilatingFilter,
    pub roots: Vec<Complex64>,
    pub result: RecoveredFrame,
}

pub fn annihilating_filter(coeffs: &FourierCoefficients, k: usize, method: FilterMethod) -> Result<AnnihilatingFilter> {
    match method {
        FilterMethod::Prony => prony_filter(coeffs, k),
        FilterMethod::Tls => tls_filter(coeffs, k),
    }
}

fn recover_from_coefficients(
    coeffs: &FourierCoefficients,
    kernel: &FilterKernel,
    k: usize,
    method: FilterMethod,
) -> Result<(AnnihilatingFilter, RecoveredFrame)> {
    if coeffs.max_abs() == 0.0 {
        return Err(Error::degenerate("empty frame"));
    }
    let filter = annihilating_filter(coeffs, k, method)?;
    let positions = roots_to_positions(&filter, kernel.n_bins(), k)?;
    let weights = solve_amplitudes(coeffs, &positions.values, kernel.n_bins())?;
    let frame = RecoveredFrame {
        stream: DiracStream {
            positions: positions.values,
            weights,
        },
        warned: positions.separated_duplicates,
    };
    Ok((filter, frame))
}

/// Positions and weights of the `k` Diracs best explaining one column.
pub fn recover_frame(frame: &[f64], kernel: &FilterKernel, k: usize, method: FilterMethod) -> Result<RecoveredFrame> {
    let coeffs = fourier_coefficients(frame, kernel, 0)?;
    recover_from_coefficients(&coeffs, kernel, k, method).map(|(_, r)| r)
}

/// Same as [`recover_frame`] but keeps the coefficients, filter and raw roots.
pub fn trace_frame(
    frame: &[f64],
    frame_index: usize,
    kernel: &FilterKernel,
    k: usize,
    method: FilterMethod,
) -> Result<FrameTrace> {
    let coefficients = fourier_coefficients(frame, kernel, frame_index)?;
    let (filter, result) = recover_from_coefficients(&coefficients, kernel, k, method)?;
    let roots = filter_roots(&filter)?;
    Ok(FrameTrace {
        coefficients,
        filter,
        roots,
        result,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tf::AnalysisConfig;

    const M: usize = 500;

    fn config() -> AnalysisConfig {
        AnalysisConfig::new(20.0, M).unwrap()
    }

    fn kernel() -> FilterKernel {
        build_kernel(&config()).unwrap()
    }

    fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    #[test]
    fn spectrogram_kernel_samples() {
        let k = kernel();
        assert_eq!(k.g_samples()[0], 1.0);
        assert!((k.g_samples()[4] - (-(0.32 * PI).powi(2)).exp()).abs() < 1e-15);
        assert!((k.g_samples()[4] - 0.3640).abs() < 1e-4);
        assert_eq!(k.g_samples()[3], k.g_samples()[M - 3]);
        assert!(k.g_samples().iter().all(|&g| g > 0.0));
    }

    #[test]
    fn default_bandlimit_is_conditioning_capped() {
        let k = kernel();
        let m0 = k.bandlimit();
        assert!(m0 < (M - 1) / 2);
        let ratio = |l: i64| k.g_hat(l).norm() / k.g_hat(0).norm();
        assert!(ratio(m0 as i64) >= AUTO_BANDLIMIT_RATIO);
        let wider = build_kernel(&config().with_bandlimit(m0 + 1).unwrap()).unwrap();
        assert!(wider.g_hat(m0 as i64 + 1).norm() / wider.g_hat(0).norm() < AUTO_BANDLIMIT_RATIO);
    }

    #[test]
    fn g_hat_is_hermitian_and_real() {
        let k = kernel();
        for l in 0..=k.bandlimit() as i64 {
            assert!(close(k.g_hat(-l), k.g_hat(l).conj(), 1e-17));
            assert!(k.g_hat(l).im.abs() < 1e-15);
        }
    }

    #[test]
    fn ill_conditioned_bandlimit_is_rejected() {
        let c = config().with_bandlimit(249).unwrap();
        match build_kernel(&c) {
            Err(Error::IllConditionedKernel { lambda, ratio }) => {
                assert!(lambda > 148);
                assert!(ratio < ILL_CONDITIONED_RATIO);
            }
            other => panic!("expected ill-conditioned kernel, got {other:?}"),
        }
    }

    #[test]
    fn sst_kernel_values_and_flatness() {
        let c = config().with_bandlimit(100).unwrap();
        let k = build_sst_kernel(0.5, &c).unwrap();
        assert_eq!(k.g_samples()[0], 1.0);
        assert!((k.g_samples()[1] - (-2.0f64).exp()).abs() < 1e-15);
        assert!((k.g_samples()[1] - 0.1353).abs() < 1e-4);
        let wide = build_sst_kernel(1.0, &c).unwrap();
        let flat = |k: &FilterKernel| k.g_hat(100).norm() / k.g_hat(0).norm();
        assert!(flat(&k) > flat(&wide));
        assert!(build_sst_kernel(0.0, &c).is_err());
        assert_eq!(auto_bandlimit(k.g_samples()), 249);
    }

    #[test]
    fn single_bump_coefficients() {
        let k = kernel();
        let (a, m0) = (3.0, 137.0);
        let frame = synthesize_frame(&k, &[m0], &[a]).unwrap();
        let f = fourier_coefficients(&frame, &k, 0).unwrap();
        for l in -(k.bandlimit() as i64)..=k.bandlimit() as i64 {
            let expected = Complex64::from_polar(a, -2.0 * PI * l as f64 * m0 / M as f64);
            assert!(close(f.at(l), expected, 1e-8), "lambda {l}");
        }
    }

    #[test]
    fn coefficients_zero_linear_and_hermitian() {
        let k = kernel();
        let zero = fourier_coefficients(&vec![0.0; M], &k, 0).unwrap();
        assert!(zero.values.iter().all(|z| z.norm() == 0.0));

        let a = synthesize_frame(&k, &[40.0], &[1.5]).unwrap();
        let b = synthesize_frame(&k, &[300.0], &[0.7]).unwrap();
        let ab: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
        let (fa, fb, fab) = (
            fourier_coefficients(&a, &k, 0).unwrap(),
            fourier_coefficients(&b, &k, 0).unwrap(),
            fourier_coefficients(&ab, &k, 0).unwrap(),
        );
        for i in 0..fab.values.len() {
            assert!(close(fab.values[i], fa.values[i] + fb.values[i], 1e-8));
        }
        for l in 0..=k.bandlimit() as i64 {
            assert!(close(fab.at(-l), fab.at(l).conj(), 1e-10));
        }
        assert!(fourier_coefficients(&a[..10], &k, 0).is_err());
    }

    #[test]
    fn prony_single_root() {
        let m0 = 81.0;
        let f = FourierCoefficients::from_diracs(&[m0], &[2.0], M, 10);
        let h = prony_filter(&f, 1).unwrap();
        assert_eq!(h.coefficients[0], Complex64::new(1.0, 0.0));
        let expected = -Complex64::from_polar(1.0, -2.0 * PI * m0 / M as f64);
        assert!(close(h.coefficients[1], expected, 1e-12));
    }

    #[test]
    fn prony_annihilates_two_diracs() {
        let f = FourierCoefficients::from_diracs(&[61.3, 250.0], &[1.0, 0.4], M, 148);
        let h = prony_filter(&f, 2).unwrap();
        assert_eq!(h.order(), 2);
        let scale = f.max_abs();
        assert!(h.residual(&f).iter().all(|r| r.norm() <= 1e-8 * scale));
    }

    #[test]
    fn prony_rejects_coincident_and_missing_diracs() {
        let f = FourierCoefficients::from_diracs(&[100.0, 100.0], &[1.0, 1.0], M, 20);
        assert!(matches!(prony_filter(&f, 2), Err(Error::DegenerateSystem(_))));
        let one = FourierCoefficients::from_diracs(&[100.0], &[1.0], M, 20);
        assert!(matches!(prony_filter(&one, 3), Err(Error::DegenerateSystem(_))));
    }

    #[test]
    fn order_must_fit_bandlimit() {
        let f = FourierCoefficients::from_diracs(&[1.0, 2.0, 3.0], &[1.0; 3], M, 2);
        assert!(matches!(prony_filter(&f, 3), Err(Error::InvalidParameter(_))));
        assert!(matches!(tls_filter(&f, 3), Err(Error::InvalidParameter(_))));
        assert!(tls_filter(&f, 0).is_err());
    }

    #[test]
    fn tls_is_unit_norm_and_matches_prony() {
        let pos = [12.5, 140.0, 333.3];
        let f = FourierCoefficients::from_diracs(&pos, &[1.0, 2.0, 0.5], M, 148);
        let t = tls_filter(&f, 3).unwrap();
        let norm: f64 = t.coefficients.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-12);
        let p = prony_filter(&f, 3).unwrap();
        let rt = roots_to_positions(&t, M, 3).unwrap().values;
        let rp = roots_to_positions(&p, M, 3).unwrap().values;
        for (a, b) in rt.iter().zip(&rp) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn tls_is_stable_under_small_perturbation() {
        let pos = [70.0, 220.25, 401.0];
        let clean = FourierCoefficients::from_diracs(&pos, &[1.0, 1.0, 1.0], M, 148);
        let scale = clean.max_abs();
        let noisy = FourierCoefficients {
            values: clean
                .values
                .iter()
                .enumerate()
                .map(|(i, z)| z + Complex64::from_polar(1e-6 * scale, i as f64 * 1.7))
                .collect(),
            frame_index: 0,
        };
        let est = roots_to_positions(&tls_filter(&noisy, 3).unwrap(), M, 3).unwrap().values;
        for (a, b) in est.iter().zip(&pos) {
            assert!((a - b).abs() <= 1e-3);
        }
    }

    #[test]
    fn single_root_position_is_exact() {
        let h = AnnihilatingFilter {
            coefficients: vec![
                Complex64::new(1.0, 0.0),
                -Complex64::from_polar(1.0, -2.0 * PI * 37.25 / M as f64),
            ],
            method: FilterMethod::Prony,
        };
        let p = roots_to_positions(&h, M, 1).unwrap();
        assert!((p.values[0] - 37.25).abs() < 1e-10);
        assert!(!p.separated_duplicates);
        let scaled = AnnihilatingFilter {
            coefficients: h.coefficients.iter().map(|z| z * Complex64::new(-3.0, 0.5)).collect(),
            method: FilterMethod::Tls,
        };
        assert!((roots_to_positions(&scaled, M, 1).unwrap().values[0] - 37.25).abs() < 1e-10);
        assert!(roots_to_positions(&h, M, 2).is_err());
    }

    #[test]
    fn three_positions_from_clean_coefficients() {
        let pos = [50.0, 200.5, 410.1];
        let f = FourierCoefficients::from_diracs(&pos, &[1.0, 1.0, 1.0], M, 148);
        let est = roots_to_positions(&prony_filter(&f, 3).unwrap(), M, 3).unwrap().values;
        for (a, b) in est.iter().zip(&pos) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn coincident_roots_are_separated_and_flagged() {
        let u = Complex64::from_polar(1.0, -2.0 * PI * 100.0 / M as f64);
        // (z - u)^2
        let h = AnnihilatingFilter {
            coefficients: vec![Complex64::new(1.0, 0.0), -2.0 * u, u * u],
            method: FilterMethod::Prony,
        };
        let p = roots_to_positions(&h, M, 2).unwrap();
        assert!(p.separated_duplicates);
        assert!(p.values[1] - p.values[0] >= COINCIDENCE_TOL);
        assert!((p.values[0] - 100.0).abs() < 1e-4);
        let f = FourierCoefficients::from_diracs(&[100.0], &[1.0], M, 10);
        assert!(solve_amplitudes(&f, &p.values, M).is_ok());
    }

    #[test]
    fn amplitudes() {
        let f = FourierCoefficients::from_diracs(&[77.7], &[4.2], M, 5);
        let a = solve_amplitudes(&f, &[77.7], M).unwrap();
        assert!((a[0] - f.at(0).re).abs() < 1e-12);

        let k = kernel();
        let frame = synthesize_frame(&k, &[120.0, 260.5], &[2.0, 5.0]).unwrap();
        let f = fourier_coefficients(&frame, &k, 0).unwrap();
        let w = solve_amplitudes_complex(&f, &[120.0, 260.5], M).unwrap();
        assert!((w[0].re - 2.0).abs() < 1e-6 && (w[1].re - 5.0).abs() < 1e-6);
        assert!(w.iter().all(|z| z.im.abs() <= 1e-8));

        assert!(matches!(
            solve_amplitudes(&f, &[120.0, 120.0 + 1e-7], M),
            Err(Error::DegenerateSystem(_))
        ));
    }

    #[test]
    fn recover_frame_end_to_end() {
        let k = kernel();
        let pos = [80.25, 190.5, 333.7];
        let w = [1.0, 0.6, 1.8];
        let frame = synthesize_frame(&k, &pos, &w).unwrap();
        for method in [FilterMethod::Prony, FilterMethod::Tls] {
            let r = recover_frame(&frame, &k, 3, method).unwrap();
            assert!(!r.warned);
            for i in 0..3 {
                assert!((r.stream.positions[i] - pos[i]).abs() < 1e-4, "{method:?}");
                assert!((r.stream.weights[i] - w[i]).abs() < 1e-4 * w[i]);
            }
        }
    }

    #[test]
    fn recover_frame_scale_equivariance() {
        let k = kernel();
        let frame = synthesize_frame(&k, &[100.0, 300.5], &[1.0, 2.0]).unwrap();
        let scaled: Vec<f64> = frame.iter().map(|v| v * 7.0).collect();
        for method in [FilterMethod::Prony, FilterMethod::Tls] {
            let a = recover_frame(&frame, &k, 2, method).unwrap().stream;
            let b = recover_frame(&scaled, &k, 2, method).unwrap().stream;
            for i in 0..2 {
                assert!((a.positions[i] - b.positions[i]).abs() < 1e-9);
                assert!((7.0 * a.weights[i] - b.weights[i]).abs() < 1e-9 * b.weights[i]);
            }
        }
    }

    #[test]
    fn zero_frame_is_degenerate() {
        let k = kernel();
        for method in [FilterMethod::Prony, FilterMethod::Tls] {
            assert!(matches!(
                recover_frame(&vec![0.0; M], &k, 2, method),
                Err(Error::DegenerateSystem(_))
            ));
        }
    }

    #[test]
    fn trace_keeps_intermediates() {
        let k = kernel();
        let frame = synthesize_frame(&k, &[42.0], &[1.0]).unwrap();
        let t = trace_frame(&frame, 9, &k, 1, FilterMethod::Tls).unwrap();
        assert_eq!(t.coefficients.frame_index, 9);
        assert_eq!(t.roots.len(), 1);
        assert!((root_to_position(t.roots[0], M) - 42.0).abs() < 1e-8);
    }

    #[test]
    fn vandermonde_round_trip_square() {
        let c = AnalysisConfig::new(20.0, 401).unwrap().with_bandlimit(200).unwrap();
        let k = build_kernel(&c).unwrap();
        let frame = synthesize_frame(&k, &[33.3, 150.0, 299.5], &[1.0, 0.5, 2.0]).unwrap();
        let f = fourier_coefficients(&frame, &k, 0).unwrap();
        let back = synthesize_from_coefficients(&f, &k);
        let err: f64 = frame.iter().zip(&back).map(|(a, b)| (b - a).norm_sqr()).sum::<f64>().sqrt();
        let norm: f64 = frame.iter().map(|a| a * a).sum::<f64>().sqrt();
        assert!(err / norm < 1e-8);
    }
}
