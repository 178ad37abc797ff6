//! Mode reconstruction by binary masking of the STFT around estimated ridges.

use crate::error::{Error, Result};
use crate::ridge::RidgeTrajectories;
use crate::signal::Signal;
use crate::tf::{inverse_stft, StftMatrix, TfMatrix};

pub const DEFAULT_MASK_HALFWIDTH: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct BinaryMask {
    pub support: TfMatrix<bool>,
    pub halfwidth: usize,
}

impl BinaryMask {
    pub fn constant(n_frames: usize, n_bins: usize, value: bool) -> Self {
        Self {
            support: TfMatrix::filled(n_frames, n_bins, value),
            halfwidth: 0,
        }
    }

    /// Band `|m - round(track[n])| <= halfwidth` around one track, clipped to `[0, M)`.
    pub fn around_track(track: &[f64], halfwidth: usize, n_bins: usize) -> Self {
        let mut support = TfMatrix::filled(track.len(), n_bins, false);
        for (n, &centre) in track.iter().enumerate() {
            let c = centre.round() as i64;
            let lo = (c - halfwidth as i64).max(0);
            let hi = (c + halfwidth as i64).min(n_bins as i64 - 1);
            let row = support.frame_mut(n);
            for m in lo..=hi {
                row[m as usize] = true;
            }
        }
        Self { support, halfwidth }
    }

    pub fn complement(&self) -> Self {
        Self {
            support: self.support.map(|b| !b),
            halfwidth: self.halfwidth,
        }
    }

    pub fn union(&self, other: &BinaryMask) -> Result<Self> {
        if !self.support.same_shape(&other.support) {
            return Err(Error::invalid("masks differ in shape"));
        }
        let data = self
            .support
            .as_slice()
            .iter()
            .zip(other.support.as_slice())
            .map(|(a, b)| *a || *b)
            .collect();
        Ok(Self {
            support: TfMatrix::from_vec(self.support.n_frames(), self.support.n_bins(), data)?,
            halfwidth: self.halfwidth.max(other.halfwidth),
        })
    }

    pub fn column_count(&self, n: usize) -> usize {
        self.support.frame(n).iter().filter(|b| **b).count()
    }
}

/// One mask per estimated track.
pub fn build_masks(traj: &RidgeTrajectories, halfwidth: usize) -> Vec<BinaryMask> {
    traj.if_estimates
        .iter()
        .map(|track| BinaryMask::around_track(track, halfwidth, traj.n_bins))
        .collect()
}

/// `inverse_stft(F * mask)`.
pub fn extract_mode(stft: &StftMatrix, mask: &BinaryMask) -> Result<Signal> {
    if !stft.values.same_shape(&mask.support) {
        return Err(Error::invalid(format!(
            "mask is {}x{}, STFT is {}x{}",
            mask.support.n_frames(),
            mask.support.n_bins(),
            stft.values.n_frames(),
            stft.values.n_bins()
        )));
    }
    let data = stft
        .values
        .as_slice()
        .iter()
        .zip(mask.support.as_slice())
        .map(|(z, keep)| if *keep { *z } else { num_complex::Complex64::new(0.0, 0.0) })
        .collect();
    let masked = StftMatrix {
        values: TfMatrix::from_vec(stft.values.n_frames(), stft.values.n_bins(), data)?,
        config: stft.config,
    };
    inverse_stft(&masked, &stft.config)
}

/// `10 log10(|x|^2 / |x - y|^2)` in dB; `+inf` when the estimate is exact.
pub fn rqf(reference: &Signal, estimate: &Signal) -> Result<f64> {
    if reference.len() != estimate.len() {
        return Err(Error::invalid(format!(
            "reference has {} samples, estimate has {}",
            reference.len(),
            estimate.len()
        )));
    }
    let energy = reference.energy();
    if energy == 0.0 {
        return Err(Error::invalid("RQF is undefined for a zero reference"));
    }
    let err: f64 = reference
        .samples()
        .iter()
        .zip(estimate.samples())
        .map(|(x, y)| (x - y).norm_sqr())
        .sum();
    if err == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (energy / err).log10())
}
