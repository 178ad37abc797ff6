//! Frame-by-frame ridge recovery, track association and IF error metrics.

use itertools::Itertools;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fri::{recover_frame, wrapped_offset, FilterKernel, FilterMethod, RecoveredFrame};
use crate::tf::EnergyTfr;

/// Largest K for which exhaustive permutation search is used.
const EXHAUSTIVE_MAX_K: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FrameFlag {
    Ok,
    /// Coincident roots were separated before the amplitude solve.
    Warned,
    /// Recovery failed; values are held from a neighbouring frame.
    Degenerate,
}

impl FrameFlag {
    pub fn as_str(&self) -> &'static str {
        match self {
            FrameFlag::Ok => "ok",
            FrameFlag::Warned => "warned",
            FrameFlag::Degenerate => "degenerate",
        }
    }
}

/// `K` tracks over `N` frames, positions in bins.
#[derive(Debug, Clone, PartialEq)]
pub struct RidgeTrajectories {
    /// `if_estimates[k][n]`.
    pub if_estimates: Vec<Vec<f64>>,
    pub amp_estimates: Vec<Vec<f64>>,
    pub flags: Vec<FrameFlag>,
    pub n_bins: usize,
}

impl RidgeTrajectories {
    pub fn n_components(&self) -> usize {
        self.if_estimates.len()
    }

    pub fn n_frames(&self) -> usize {
        self.flags.len()
    }

    pub fn degenerate_frames(&self) -> usize {
        self.flags.iter().filter(|f| **f == FrameFlag::Degenerate).count()
    }
}

/// Runs [`recover_frame`] on every column of `tfr` and links the results into tracks.
///
/// Frames whose recovery fails for numerical reasons are flagged, not fatal.
pub fn estimate_ridges<T: EnergyTfr + Sync>(
    tfr: &T,
    k: usize,
    method: FilterMethod,
    kernel: &FilterKernel,
) -> Result<RidgeTrajectories> {
    let values = tfr.energy();
    if values.n_bins() != kernel.n_bins() {
        return Err(Error::invalid(format!(
            "representation has {} bins, kernel expects {}",
            values.n_bins(),
            kernel.n_bins()
        )));
    }
    if k == 0 {
        return Err(Error::invalid("number of components must be at least 1"));
    }
    let frames: Vec<Option<RecoveredFrame>> = (0..values.n_frames())
        .into_par_iter()
        .map(|n| match recover_frame(values.frame(n), kernel, k, method) {
            Ok(r) => Ok(Some(r)),
            Err(Error::DegenerateSystem(_) | Error::NumericalFailure(_)) => Ok(None),
            Err(e) => Err(e),
        })
        .collect::<Result<_>>()?;
    associate(&frames, k, kernel.n_bins())
}

fn circular_distance(a: f64, b: f64, n_bins: usize) -> f64 {
    wrapped_offset(a - b, n_bins).abs()
}

/// `perm[k]` = index in `next` continuing track `k`.
fn match_tracks(prev: &[f64], next: &[f64], n_bins: usize) -> Vec<usize> {
    let k = prev.len();
    let cost = |perm: &[usize]| -> f64 {
        perm.iter()
            .enumerate()
            .map(|(i, &j)| circular_distance(prev[i], next[j], n_bins))
            .sum()
    };
    if k <= EXHAUSTIVE_MAX_K {
        let mut best: Vec<usize> = (0..k).collect();
        let mut best_cost = cost(&best);
        for perm in (0..k).permutations(k) {
            let c = cost(&perm);
            if c < best_cost {
                best_cost = c;
                best = perm;
            }
        }
        return best;
    }
    let mut pairs: Vec<(f64, usize, usize)> = (0..k)
        .cartesian_product(0..k)
        .map(|(i, j)| (circular_distance(prev[i], next[j], n_bins), i, j))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut perm = vec![usize::MAX; k];
    let mut used = vec![false; k];
    for (_, i, j) in pairs {
        if perm[i] == usize::MAX && !used[j] {
            perm[i] = j;
            used[j] = true;
        }
    }
    perm
}

/// Links per-frame Diracs into tracks by minimal total displacement between consecutive
/// frames. `None` marks a failed frame; it holds the previous values (leading failures take
/// the first successful frame's values).
pub fn associate(per_frame: &[Option<RecoveredFrame>], k: usize, n_bins: usize) -> Result<RidgeTrajectories> {
    let n = per_frame.len();
    for (i, f) in per_frame.iter().enumerate() {
        if let Some(f) = f {
            if f.stream.positions.len() != k || f.stream.weights.len() != k {
                return Err(Error::invalid(format!(
                    "frame {i} has {} Diracs, expected {k}",
                    f.stream.positions.len()
                )));
            }
        }
    }
    let first = per_frame
        .iter()
        .position(Option::is_some)
        .ok_or_else(|| Error::PipelineFailure("every frame is degenerate".into()))?;

    let mut if_estimates = vec![vec![0.0; n]; k];
    let mut amp_estimates = vec![vec![0.0; n]; k];
    let mut flags = vec![FrameFlag::Degenerate; n];

    let mut prev_pos: Vec<f64> = Vec::new();
    let mut prev_amp: Vec<f64> = Vec::new();
    for (idx, frame) in per_frame.iter().enumerate().skip(first) {
        if let Some(f) = frame {
            let (pos, amp) = (&f.stream.positions, &f.stream.weights);
            let order: Vec<usize> = if idx == first {
                (0..k).sorted_by(|&a, &b| pos[a].total_cmp(&pos[b])).collect()
            } else {
                match_tracks(&prev_pos, pos, n_bins)
            };
            prev_pos = order.iter().map(|&j| pos[j]).collect();
            prev_amp = order.iter().map(|&j| amp[j]).collect();
            flags[idx] = if f.warned { FrameFlag::Warned } else { FrameFlag::Ok };
        }
        for c in 0..k {
            if_estimates[c][idx] = prev_pos[c];
            amp_estimates[c][idx] = prev_amp[c];
        }
    }
    for idx in 0..first {
        for c in 0..k {
            if_estimates[c][idx] = if_estimates[c][first];
            amp_estimates[c][idx] = amp_estimates[c][first];
        }
    }
    Ok(RidgeTrajectories {
        if_estimates,
        amp_estimates,
        flags,
        n_bins,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComponentError {
    pub rmse: f64,
    pub rmae: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub rmse: f64,
    pub rmae: f64,
    /// Indexed by ground-truth component, under the RMSE-optimal labelling.
    pub per_component: Vec<ComponentError>,
    /// `assignment[k]` = estimated track matched to truth component `k`.
    pub assignment: Vec<usize>,
    pub excluded_boundary_frames: usize,
}

#[derive(Clone, Copy)]
enum Metric {
    Squared,
    Absolute,
}

impl Metric {
    fn frame_error(self, truth: f64, est: f64) -> f64 {
        match self {
            Metric::Squared => (truth - est).powi(2),
            Metric::Absolute => (truth - est).abs(),
        }
    }

    fn normalization(self, n_bins: usize) -> f64 {
        let m = n_bins as f64;
        match self {
            Metric::Squared => m * m,
            Metric::Absolute => m,
        }
    }
}

fn evaluated_range(n: usize, boundary: usize) -> Result<std::ops::Range<usize>> {
    if 2 * boundary >= n {
        return Err(Error::invalid(format!(
            "excluding {boundary} frames at each end leaves nothing of {n}"
        )));
    }
    Ok(boundary..n - boundary)
}

fn check_shapes(est: &RidgeTrajectories, truth: &[Vec<f64>]) -> Result<()> {
    if truth.len() != est.n_components() {
        return Err(Error::invalid(format!(
            "{} estimated tracks vs {} true components",
            est.n_components(),
            truth.len()
        )));
    }
    if let Some(t) = truth.iter().find(|t| t.len() != est.n_frames()) {
        return Err(Error::invalid(format!(
            "truth has {} frames, estimate has {}",
            t.len(),
            est.n_frames()
        )));
    }
    Ok(())
}

/// Per-truth-component errors for every (truth, track) pair. Normalized once at the end so
/// that closed-form cases come out exact.
fn pair_errors(est: &RidgeTrajectories, truth: &[Vec<f64>], metric: Metric, range: std::ops::Range<usize>) -> Vec<Vec<f64>> {
    truth
        .iter()
        .map(|t| {
            est.if_estimates
                .iter()
                .map(|e| {
                    range.clone().map(|n| metric.frame_error(t[n], e[n])).sum::<f64>()
                        / metric.normalization(est.n_bins)
                })
                .collect()
        })
        .collect()
}

fn best_assignment(pairs: &[Vec<f64>]) -> (f64, Vec<usize>) {
    let k = pairs.len();
    let total = |perm: &[usize]| -> f64 { perm.iter().enumerate().map(|(i, &j)| pairs[i][j]).sum() };
    (0..k)
        .permutations(k)
        .map(|p| (total(&p), p))
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .unwrap_or((0.0, Vec::new()))
}

fn metric(est: &RidgeTrajectories, truth: &[Vec<f64>], boundary: usize, m: Metric) -> Result<f64> {
    check_shapes(est, truth)?;
    let range = evaluated_range(est.n_frames(), boundary)?;
    Ok(best_assignment(&pair_errors(est, truth, m, range)).0)
}

/// `sum_k sum_n (truth - est)^2 / M^2` over frames `[boundary, N - boundary)`, labels matched
/// to minimize the result.
pub fn rmse(est: &RidgeTrajectories, truth: &[Vec<f64>], boundary: usize) -> Result<f64> {
    metric(est, truth, boundary, Metric::Squared)
}

/// `(1/M) sum_k sum_n |truth - est|`, same frames and matching rule as [`rmse`].
pub fn rmae(est: &RidgeTrajectories, truth: &[Vec<f64>], boundary: usize) -> Result<f64> {
    metric(est, truth, boundary, Metric::Absolute)
}

pub fn evaluate(est: &RidgeTrajectories, truth: &[Vec<f64>], boundary: usize) -> Result<MetricsReport> {
    check_shapes(est, truth)?;
    let range = evaluated_range(est.n_frames(), boundary)?;
    let sq = pair_errors(est, truth, Metric::Squared, range.clone());
    let abs = pair_errors(est, truth, Metric::Absolute, range);
    let (rmse, assignment) = best_assignment(&sq);
    let (rmae, _) = best_assignment(&abs);
    let per_component = assignment
        .iter()
        .enumerate()
        .map(|(i, &j)| ComponentError {
            rmse: sq[i][j],
            rmae: abs[i][j],
        })
        .collect();
    Ok(MetricsReport {
        rmse,
        rmae,
        per_component,
        assignment,
        excluded_boundary_frames: 2 * boundary,
    })
}
