//! Synthetic cohorts written in the pipeline's input formats, with the true
//! latent paths alongside for checking recovery.

use std::path::{Path, PathBuf};

use stancefield_core::ingest::{FigureType, PersonMeta, TimeBinning};
use stancefield_core::synthetic::{stance_cohort, AnalyticPotential, Cohort, CohortSpec};

use crate::error::{Error, Result};
use crate::formats;

pub const OBSERVATIONS: &str = "observations.jsonl";
pub const METADATA: &str = "metadata.csv";
pub const TRUE_TRAJECTORIES: &str = "true_trajectories.csv";

/// Named potentials offered on the command line.
pub fn potential(name: &str, dim: usize) -> Result<AnalyticPotential> {
    if dim == 0 {
        return Err(Error::Config("dimension must be positive".into()));
    }
    let double_well = || AnalyticPotential::DoubleWell {
        barrier: 0.02,
        spacing: 2.0,
        transverse_stiffness: 0.2,
        dimension: dim,
    };
    Ok(match name {
        "bowl" => {
            let mut center = vec![0.0; dim];
            center[0] = 0.5;
            if dim > 1 {
                center[1] = -0.5;
            }
            AnalyticPotential::QuadraticBowl { center, stiffness: 0.2 }
        }
        "double-well" => double_well(),
        "tilted" => AnalyticPotential::Tilted {
            base: Box::new(double_well()),
            tilt_rate: 0.05,
        },
        other => {
            return Err(Error::Config(format!(
                "unknown potential {other:?}; expected bowl, double-well or tilted"
            )))
        }
    })
}

/// Alternating politicians and influencers spread over three parties.
pub fn cohort_metadata(cohort: &Cohort) -> Vec<PersonMeta> {
    cohort
        .trajectories
        .iter()
        .enumerate()
        .map(|(i, t)| PersonMeta {
            person_id: t.person_id.clone(),
            figure_type: if i % 2 == 0 { FigureType::Politician } else { FigureType::Influencer },
            party: Some(format!("party-{}", i % 3)),
            province: None,
        })
        .collect()
}

/// Simulates a cohort and writes observations, metadata and the true
/// trajectories into `dir`. Returns the written paths in that order.
pub fn write_cohort(
    dir: &Path,
    p: &AnalyticPotential,
    spec: &CohortSpec,
    binning: &TimeBinning,
    seed: u64,
) -> Result<(Cohort, [PathBuf; 3])> {
    let cohort = stance_cohort(p, spec, binning, seed)?;
    let paths = [dir.join(OBSERVATIONS), dir.join(METADATA), dir.join(TRUE_TRAJECTORIES)];
    formats::write_text(&paths[0], &formats::observations_to_jsonl(&cohort.observations))?;
    formats::write_text(&paths[1], &formats::metadata_to_csv(&cohort_metadata(&cohort))?)?;
    formats::write_text(&paths[2], &formats::trajectories_to_csv(&cohort.trajectories)?)?;
    Ok((cohort, paths))
}
