use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use stancefield::config::PipelineConfig;
use stancefield::error::{Error, Result};
use stancefield::formats;
use stancefield::pipeline::{self, plane_axes, Pipeline, RunOptions, Stage, SweepGrid, EVALUATION};
use stancefield::svg::export_svg;
use stancefield::synth;
use stancefield_core::density::snapshot_series;
use stancefield_core::landscape::FieldConfig;
use stancefield_core::seed;
use stancefield_core::synthetic::CohortSpec;

#[derive(Parser)]
#[command(name = "stancefield", version, about = "Stance trajectories and drift landscapes from labelled posts")]
struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides the config and environment.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Observation file; overrides the config and environment.
    #[arg(long, global = true)]
    observations: Option<PathBuf>,
    /// Metadata CSV; overrides the config and environment.
    #[arg(long, global = true)]
    metadata: Option<PathBuf>,
    /// Reject unknown config keys and input fields.
    #[arg(long, global = true)]
    strict: bool,
    /// Keep each account of a person as its own stream.
    #[arg(long, global = true)]
    by_account: bool,
    /// Reuse a fitted PPCA model instead of fitting one.
    #[arg(long, global = true)]
    ppca_model: Option<PathBuf>,
    /// kT of the Boltzmann marginal; overrides export.temperature.
    #[arg(long, global = true)]
    kt: Option<f64>,
    /// Rerun stages even when their outputs are current.
    #[arg(long, global = true)]
    force: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate, window, deduplicate and filter the observations.
    Ingest,
    /// Kernel-regress every person and target onto the bin grid.
    Regress,
    /// Fit PPCA and project to smoothed latent trajectories.
    Latent,
    /// Rolling drift and ADF/KPSS tests on the trajectories.
    Stationarity,
    /// Train the potential network and export its drift field.
    Train {
        /// Train on these trajectories instead of the latent stage's.
        #[arg(long)]
        trajectories: Option<PathBuf>,
        /// Grid-search learning rate, dropout and weight decay instead of
        /// running the stage; results go to landscape/sweep.json.
        #[arg(long)]
        sweep: bool,
        /// Learning rates to try; defaults to a third, one and three times
        /// the configured rate.
        #[arg(long, value_delimiter = ',')]
        sweep_lr: Vec<f64>,
        /// Dropout rates to try; defaults to the configured rate.
        #[arg(long, value_delimiter = ',')]
        sweep_dropout: Vec<f64>,
        /// Weight decays to try; defaults to the configured value.
        #[arg(long, value_delimiter = ',')]
        sweep_weight_decay: Vec<f64>,
    },
    /// Compare forecasters across horizons.
    Evaluate {
        #[arg(long)]
        trajectories: Option<PathBuf>,
    },
    /// Group statistics, movers and yearly landscape figures.
    Analytics,
    /// Run every stage, skipping those already current.
    Pipeline {
        #[arg(long)]
        trajectories: Option<PathBuf>,
    },
    /// Write a synthetic cohort in the input formats.
    Synth {
        /// bowl, double-well or tilted.
        #[arg(long, default_value = "double-well")]
        potential: String,
        #[arg(long, default_value_t = 2)]
        dim: usize,
        #[arg(long, default_value_t = 20)]
        persons: usize,
        #[arg(long, default_value_t = 10)]
        targets: usize,
        #[arg(long, default_value_t = 120)]
        bins: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Directory for the generated files.
        dir: PathBuf,
    },
    /// Render yearly SVG landscapes from a trained model.
    Export {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        trajectories: PathBuf,
        /// Years to render; defaults to the config's export years.
        #[arg(long, value_delimiter = ',')]
        years: Vec<i32>,
        /// Directory for the figures.
        dir: PathBuf,
    },
    /// Recheck every output hash recorded in a run's manifest.
    Verify { dir: PathBuf },
}

fn load_config(cli: &Cli) -> Result<PipelineConfig> {
    let text = match &cli.config {
        Some(p) => Some(std::fs::read_to_string(p).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?),
        None => None,
    };
    let mut cfg = match &text {
        Some(t) => PipelineConfig::from_toml(t, cli.strict)?,
        None => PipelineConfig::default(),
    };
    cfg.apply_env();
    if let Some(o) = &cli.out {
        cfg.paths.output_dir = o.clone();
    }
    if let Some(o) = &cli.observations {
        cfg.paths.observations = Some(o.clone());
    }
    if let Some(m) = &cli.metadata {
        cfg.paths.metadata = Some(m.clone());
    }
    if cli.strict {
        cfg.ingest.strict = true;
    }
    if let Some(kt) = cli.kt {
        cfg.export.temperature = kt;
    }
    if cli.by_account || cfg.ingest.by_account {
        cfg.use_accounts(text.as_deref())?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    let cfg = load_config(&cli)?;
    let mut opts = RunOptions {
        ppca_model: cli.ppca_model.clone(),
        trajectories: None,
        force: cli.force,
    };
    let stages: Vec<Stage> = match &cli.command {
        Command::Ingest => vec![Stage::Ingest],
        Command::Regress => vec![Stage::Regression],
        Command::Latent => vec![Stage::Latent],
        Command::Stationarity => vec![Stage::Stationarity],
        Command::Analytics => vec![Stage::Analytics],
        Command::Train {
            trajectories,
            sweep,
            sweep_lr,
            sweep_dropout,
            sweep_weight_decay,
        } => {
            if *sweep {
                let l = &cfg.landscape;
                let or = |v: &Vec<f64>, d: Vec<f64>| if v.is_empty() { d } else { v.clone() };
                let grid = SweepGrid {
                    learning_rates: or(sweep_lr, vec![l.learning_rate / 3.0, l.learning_rate, l.learning_rate * 3.0]),
                    dropouts: or(sweep_dropout, vec![l.dropout]),
                    weight_decays: or(sweep_weight_decay, vec![l.weight_decay]),
                };
                let path = trajectories
                    .clone()
                    .unwrap_or_else(|| cfg.paths.output_dir.join(pipeline::TRAJECTORIES));
                let trajs = formats::trajectories_from_csv(&formats::read_text(&path)?)?;
                let base = l.train_config(seed::derive(cfg.seed, pipeline::SEED_TRAIN));
                let trials = pipeline::sweep(&trajs, &base, &grid, &cfg.binning.binning())?;
                println!("{:>12} {:>8} {:>12} {:>6} {:>14}", "lr", "dropout", "weight_decay", "epoch", "validation");
                for t in &trials {
                    let v = t.best_validation.map_or("diverged".to_string(), |v| format!("{v:.6}"));
                    println!("{:>12.6} {:>8.4} {:>12.6} {:>6} {v:>14}", t.learning_rate, t.dropout, t.weight_decay, t.best_epoch);
                }
                formats::write_text(
                    &cfg.paths.output_dir.join("landscape/sweep.json"),
                    &formats::to_json_pretty(&trials),
                )?;
                return Ok(());
            }
            opts.trajectories = trajectories.clone();
            vec![Stage::Landscape]
        }
        Command::Evaluate { trajectories } => {
            opts.trajectories = trajectories.clone();
            vec![Stage::Evaluate]
        }
        Command::Pipeline { trajectories } => {
            opts.trajectories = trajectories.clone();
            let mut all = Stage::ALL.to_vec();
            if trajectories.is_some() {
                all.retain(|s| !matches!(s, Stage::Ingest | Stage::Regression | Stage::Latent | Stage::Analytics));
            }
            all
        }
        Command::Synth {
            potential,
            dim,
            persons,
            targets,
            bins,
            seed,
            dir,
        } => {
            let p = synth::potential(potential, *dim)?;
            let spec = CohortSpec {
                persons: *persons,
                targets: *targets,
                bins: *bins,
                ..CohortSpec::default()
            };
            let (cohort, paths) = synth::write_cohort(dir, &p, &spec, &cfg.binning.binning(), *seed)?;
            println!("{} observations from {} people", cohort.observations.len(), cohort.trajectories.len());
            for p in paths {
                println!("wrote {}", p.display());
            }
            return Ok(());
        }
        Command::Export {
            model,
            trajectories,
            years,
            dir,
        } => {
            let net = formats::net_from_json(&formats::read_text(model)?)?;
            let trajs = formats::trajectories_from_csv(&formats::read_text(trajectories)?)?;
            let years = if years.is_empty() { cfg.export.years.clone() } else { years.clone() };
            let axes = plane_axes(&trajs, cfg.landscape.grid_steps, cfg.landscape.grid_padding)?;
            let field_cfg = FieldConfig {
                n_mc: cfg.landscape.n_mc,
                seed: seed::derive(cfg.seed, pipeline::SEED_FIELD),
                support_factor: cfg.landscape.support_factor,
            };
            for snap in snapshot_series(&net, &years, &axes, &trajs, &net.binning, &field_cfg)? {
                let svg = export_svg(&snap.field, &snap.density, &cfg.export, &format!("Stance landscape {}", snap.year))?;
                let path = dir.join(format!("{}.svg", snap.year));
                formats::write_text(&path, &svg)?;
                println!("wrote {}", path.display());
            }
            return Ok(());
        }
        Command::Verify { dir } => {
            let bad = pipeline::verify(dir)?;
            if bad.is_empty() {
                println!("all recorded outputs match");
                return Ok(());
            }
            for b in &bad {
                println!("mismatch: {b}");
            }
            return Err(Error::Data(format!("{} outputs differ from the manifest", bad.len())));
        }
    };
    let pipeline = Pipeline::new(cfg, opts);
    let log = pipeline.run(&stages)?;
    for s in &log.stages {
        println!("{:<13} {:<8} {:>8.2}s", s.stage, s.action, s.seconds);
    }
    if stages.contains(&Stage::Evaluate) {
        let text = formats::read_text(&pipeline.out().join(EVALUATION))?;
        let report: pipeline::EvaluationReport = serde_json::from_str(&text)?;
        println!("\nerror ratio to the stationary baseline\n{}", pipeline::render_summary(&report.report));
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
