use std::path::Path;

use fri_ridge::bench::ExperimentConfig;

#[test]
fn shipped_default_config_matches_builtin_defaults() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/default.toml");
    assert_eq!(ExperimentConfig::load(&path).unwrap(), ExperimentConfig::default());
}

#[test]
fn unknown_keys_are_rejected() {
    let text = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/default.toml")).unwrap();
    let bad = text.replace("seed = 0", "seed = 0\nsneed = 1");
    assert!(ExperimentConfig::from_toml_str(&bad).is_err());
}

#[test]
fn components_default_to_unit_amplitude() {
    let text = r#"
        [signal]
        n_samples = 64
        [[signal.components]]
        kind = "sinusoid"
        frequency = 0.2
        [analysis]
        window_spread = 4.0
        n_bins = 32
        [estimator]
        method = "fri"
        components = 1
        sst_kernel_std = 0.5
        mask_halfwidth = 3
        [sweep]
        snr_db = [0.0]
        realizations = 1
        seed = 7
        [output]
        dir = "x"
    "#;
    let c = ExperimentConfig::from_toml_str(text).unwrap();
    assert_eq!(c.signal.components[0].amplitude, 1.0);
    c.validate().unwrap();
}
