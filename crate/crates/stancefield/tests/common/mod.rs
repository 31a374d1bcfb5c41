#![allow(dead_code)]

use std::path::{Path, PathBuf};

use stancefield::config::PipelineConfig;
use stancefield::synth;
use stancefield_core::synthetic::{AnalyticPotential, CohortSpec};

/// A 20-person, 10-target cohort written under `dir/data`.
pub fn cohort(dir: &Path, potential: &AnalyticPotential, seed: u64) -> [PathBuf; 3] {
    let spec = CohortSpec {
        persons: 20,
        targets: 10,
        bins: 160,
        ..CohortSpec::default()
    };
    let cfg = PipelineConfig::default();
    synth::write_cohort(&dir.join("data"), potential, &spec, &cfg.binning.binning(), seed)
        .unwrap()
        .1
}

pub fn double_well() -> AnalyticPotential {
    synth::potential("double-well", 2).unwrap()
}

/// Small network and lattice so a full run takes seconds.
pub fn small_config(data: &[PathBuf; 3], out: &Path) -> PipelineConfig {
    let text = "seed = 11
[ingest]
min_posts = 20
[ppca]
smoothing_window = 3
[landscape]
hidden_dims = [16, 16]
num_epochs = 15
batch_size = 64
grid_steps = 11
n_mc = 4
[export]
marginal_steps = 5
";
    let mut cfg = PipelineConfig::from_toml(text, true).unwrap();
    cfg.paths.observations = Some(data[0].clone());
    cfg.paths.metadata = Some(data[1].clone());
    cfg.paths.output_dir = out.to_path_buf();
    cfg
}

pub fn read(path: &Path) -> Vec<u8> {
    std::fs::read(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}
