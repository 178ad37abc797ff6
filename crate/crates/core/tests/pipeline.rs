use fri_ridge::bench::{ExperimentConfig, Method};
use fri_ridge::error::Error;
use fri_ridge::fri::{build_kernel, FilterMethod};
use fri_ridge::ridge::{estimate_ridges, evaluate, RidgeTrajectories};
use fri_ridge::signal::{make_linear_chirp, make_sin_fm, make_sinusoid, synthesize, Component, Signal};
use fri_ridge::tf::{gaussian_window, spectrogram, stft, AnalysisConfig};

const M: usize = 500;
const BOUNDARY: usize = 40;

fn run(method: Method, components: &[Component]) -> (Signal, RidgeTrajectories) {
    let config = ExperimentConfig::default();
    let clean = synthesize(500, components).unwrap();
    let mut estimator = config.estimator(method).unwrap();
    estimator.components = components.len();
    let traj = estimator.run(&clean).unwrap().trajectories;
    (clean, traj)
}

/// Share of interior frames where each ground-truth IF is within `tol` bins of its matched track.
fn within(clean: &Signal, traj: &RidgeTrajectories, tol: f64) -> Vec<f64> {
    let truth = clean.truth_bins(M).unwrap();
    let report = evaluate(traj, &truth, BOUNDARY).unwrap();
    let frames = BOUNDARY..M - BOUNDARY;
    report
        .assignment
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            frames
                .clone()
                .filter(|&n| (traj.if_estimates[t][n] - truth[k][n]).abs() <= tol)
                .count() as f64
                / frames.len() as f64
        })
        .collect()
}

fn default_components() -> Vec<Component> {
    ExperimentConfig::default().components().unwrap()
}

#[test]
fn noiseless_default_mixture_prony_within_half_bin() {
    let (clean, traj) = run(Method::Fri, &default_components());
    let share = within(&clean, &traj, 0.5);
    assert!(share.iter().all(|&s| s >= 0.95), "share of frames within 0.5 bin: {share:?}");
}

#[test]
fn noiseless_sinusoid_and_chirp_track_within_one_bin() {
    let comps = [make_sinusoid(M, 0.1, 1.0).unwrap(), make_linear_chirp(M, 0.15, 0.35, 1.0).unwrap()];
    for method in Method::ALL {
        let (clean, traj) = run(method, &comps);
        let share = within(&clean, &traj, 1.0);
        assert!(share.iter().all(|&s| s >= 0.95), "{method}: {share:?}");
    }
}

// For K = 1 the Prony root is the circular centroid of the column, which for a Gaussian
// window equals the IF averaged with weight theta^2.
#[test]
fn single_component_prony_is_the_smoothed_if() {
    let fm = make_sin_fm(M, 0.43, 0.04, 0.004, 1.0).unwrap();
    let (_, traj) = run(Method::Fri, std::slice::from_ref(&fm));
    for n in BOUNDARY..M - BOUNDARY {
        let (mut num, mut den) = (0.0, 0.0);
        for l in 0..M {
            let w = gaussian_window(n as f64 - l as f64, 20.0).powi(2);
            num += w * fm.if_at(l) * M as f64;
            den += w;
        }
        assert!((traj.if_estimates[0][n] - num / den).abs() < 0.01, "frame {n}");
    }
}

#[test]
fn sinusoid_gives_flat_trajectory() {
    let config = AnalysisConfig::new(20.0, M).unwrap();
    let x = synthesize(M, &[make_sinusoid(M, 0.2, 1.0).unwrap()]).unwrap();
    let s = spectrogram(&stft(&x, &config).unwrap());
    let kernel = build_kernel(&config).unwrap();
    let traj = estimate_ridges(&s, 1, FilterMethod::Prony, &kernel).unwrap();
    for n in BOUNDARY..M - BOUNDARY {
        assert!((traj.if_estimates[0][n] - 100.0).abs() < 1e-2);
    }
}

#[test]
fn sst_estimator_uses_half_bin_gaussian_kernel() {
    let est = ExperimentConfig::default().estimator(Method::FriSst).unwrap();
    assert_eq!(
        est.kernel.shape(),
        fri_ridge::fri::KernelShape::Gaussian { std_bins: 0.5 }
    );
    assert!((est.kernel.g_samples()[1] - (-2.0f64).exp()).abs() < 1e-15);
}

#[test]
fn under_modelling_returns_requested_tracks() {
    let (_, traj) = run(Method::FriTls, &default_components()[..]);
    assert_eq!(traj.n_components(), 3);
    let config = ExperimentConfig::default();
    let clean = config.clean_signal().unwrap();
    let mut estimator = config.estimator(Method::FriTls).unwrap();
    estimator.components = 2;
    let two = estimator.run(&clean).unwrap().trajectories;
    assert_eq!(two.n_components(), 2);
    assert!(two.if_estimates.iter().flatten().all(|v| (0.0..500.0).contains(v)));
}

#[test]
fn empty_signal_is_rejected() {
    assert!(matches!(Signal::new(Vec::new()), Err(Error::InvalidParameter(_))));
}
