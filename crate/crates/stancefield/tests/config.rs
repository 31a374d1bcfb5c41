use std::path::PathBuf;

use stancefield::config::{
    PipelineConfig, ENV_METADATA, ENV_OBSERVATIONS, ENV_OUTPUT_DIR, PER_PLATFORM_DROPOUT, PER_PLATFORM_WEIGHT_DECAY,
};
use stancefield_core::evaluate::Grouping;
use stancefield_core::landscape::TrainConfig;
use stancefield_core::regression::DEFAULT_LENGTHSCALE_DAYS;

#[test]
fn default_hyperparameters() {
    let c = PipelineConfig::default();
    let t = TrainConfig::default();
    assert_eq!(c.landscape.train_config(0), t);
    assert_eq!(t.hidden_dims, vec![128; 4]);
    assert_eq!(t.batch_size, 512);
    assert_eq!(t.learning_rate, 0.009);
    assert_eq!(t.weight_decay, 0.026);
    assert_eq!(t.dropout, 0.035);
    assert_eq!(t.sigma_initial, 0.34);
    assert_eq!(t.confinement_factor, 0.004);
    assert_eq!(c.regression.lengthscale_days, DEFAULT_LENGTHSCALE_DAYS);
    assert_eq!(c.ingest.min_posts, 400);
    assert_eq!(c.binning.bin_width_days, 2);
    assert_eq!(c.ppca.n_components, 3);
    assert_eq!(c.analytics.top_loadings, 30);
    assert_eq!(c.export.years, vec![2022, 2023, 2024, 2025]);
    c.validate().unwrap();
}

#[test]
fn config_round_trips_losslessly() {
    let mut c = PipelineConfig::default();
    c.seed = 99;
    c.paths.observations = Some("data/obs.jsonl".into());
    c.landscape.learning_rate = 1.0 / 3.0;
    c.regression.alpha_grid = vec![1e-3, 0.1, 7.25];
    c.evaluation.grouping = Grouping::Party;
    c.ingest.study_start = Some("2022-06-01T00:00:00Z".parse().unwrap());
    let text = c.to_toml().unwrap();
    assert_eq!(PipelineConfig::from_toml(&text, true).unwrap(), c);
    assert_eq!(
        PipelineConfig::from_toml(&PipelineConfig::default().to_toml().unwrap(), true).unwrap(),
        PipelineConfig::default()
    );
}

#[test]
fn partial_files_fill_in_defaults() {
    let c = PipelineConfig::from_toml("seed = 3\n[landscape]\nnum_epochs = 5\n", true).unwrap();
    assert_eq!(c.seed, 3);
    assert_eq!(c.landscape.num_epochs, 5);
    assert_eq!(c.landscape.batch_size, 512);
    assert_eq!(c.ppca, PipelineConfig::default().ppca);
}

#[test]
fn unknown_keys_fail_only_when_strict() {
    let text = "seed = 1\n[landscape]\nlearning_rat = 0.1\n[plots]\ncolor = \"red\"\n";
    let lenient = PipelineConfig::from_toml(text, false).unwrap();
    assert_eq!(lenient.seed, 1);
    let err = PipelineConfig::from_toml(text, true).unwrap_err();
    assert_eq!(err.exit_code(), 2);
    let msg = err.to_string();
    assert!(msg.contains("landscape.learning_rat") && msg.contains("plots"), "{msg}");
}

#[test]
fn invalid_values_are_config_errors() {
    for text in [
        "[ppca]\nlatent_dims = 4\n",
        "[binning]\nbin_width_days = 0\n",
        "[regression]\nalpha_grid = []\n",
        "[analytics]\nyears = [2030]\n",
        "[landscape]\ntrain_fraction = 1.5\n",
        "[export]\ntemperature = 0.0\n",
        "seed = \"abc\"\n",
        "not toml at all ===",
    ] {
        let err = PipelineConfig::from_toml(text, false).unwrap_err();
        assert_eq!(err.exit_code(), 2, "{text}: {err}");
    }
}

#[test]
fn per_account_mode_uses_the_platform_defaults_unless_set() {
    let mut c = PipelineConfig::default();
    c.use_accounts(None).unwrap();
    assert!(c.ingest.by_account);
    assert_eq!(c.landscape.dropout, PER_PLATFORM_DROPOUT);
    assert_eq!(c.landscape.weight_decay, PER_PLATFORM_WEIGHT_DECAY);

    let text = "[landscape]\ndropout = 0.1\n";
    let mut c = PipelineConfig::from_toml(text, true).unwrap();
    c.use_accounts(Some(text)).unwrap();
    assert_eq!(c.landscape.dropout, 0.1);
    assert_eq!(c.landscape.weight_decay, PER_PLATFORM_WEIGHT_DECAY);
}

// The only test in this binary that touches the environment.
#[test]
fn environment_overrides_paths_only() {
    std::env::set_var(ENV_OBSERVATIONS, "/data/obs.csv");
    std::env::set_var(ENV_METADATA, "/data/meta.csv");
    std::env::set_var(ENV_OUTPUT_DIR, "/tmp/run");
    let mut c = PipelineConfig::from_toml("[paths]\nobservations = \"x.jsonl\"\n", true).unwrap();
    c.apply_env();
    std::env::remove_var(ENV_OBSERVATIONS);
    std::env::remove_var(ENV_METADATA);
    std::env::remove_var(ENV_OUTPUT_DIR);
    assert_eq!(c.paths.observations, Some(PathBuf::from("/data/obs.csv")));
    assert_eq!(c.paths.metadata, Some(PathBuf::from("/data/meta.csv")));
    assert_eq!(c.paths.output_dir, PathBuf::from("/tmp/run"));
    let mut rest = c.clone();
    rest.paths = PipelineConfig::default().paths;
    let mut plain = PipelineConfig::default();
    plain.paths = rest.paths.clone();
    assert_eq!(rest, plain);
}
