//! Gaussian kernel density estimates on a 2-D lattice and yearly snapshots
//! of the drift field paired with the density of positions in that year.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use chrono::Datelike;
use libm::{exp, pow, sqrt};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{new_year, TimeBinning};
use crate::landscape::{drift_field, lattice_nodes, Axis, DriftField, FieldConfig, PotentialNet};
use crate::latent::LatentTrajectory;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bandwidth {
    /// `n^(-1/6)`, the two-dimensional Scott factor.
    Scott,
    /// Fixed factor multiplying the data's standard deviations.
    Factor(f64),
}

/// Density values on a 2-D lattice, row-major with the first axis slow.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityGrid {
    pub axes: [Axis; 2],
    pub values: Vec<f64>,
}

impl DensityGrid {
    pub fn zeros(axes: [Axis; 2]) -> DensityGrid {
        DensityGrid {
            values: vec![0.0; axes[0].steps * axes[1].steps],
            axes,
        }
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.axes[1].steps + j]
    }

    /// Rectangle-rule integral over the lattice.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.axes[0].spacing() * self.axes[1].spacing()
    }

    pub fn max(&self) -> f64 {
        self.values.iter().cloned().fold(0.0, f64::max)
    }
}

/// Gaussian KDE with the kernel covariance equal to the data covariance
/// (n − 1 normalization) scaled by the squared bandwidth factor.
pub fn kde_density(points: &[[f64; 2]], axes: [Axis; 2], bandwidth: Bandwidth) -> Result<DensityGrid> {
    for a in &axes {
        a.validate()?;
    }
    let n = points.len();
    if n < 2 {
        return Err(Error::InvalidInput("density needs at least two points".into()));
    }
    if points.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("density point"));
    }
    let factor = match bandwidth {
        Bandwidth::Scott => pow(n as f64, -1.0 / 6.0),
        Bandwidth::Factor(f) if f > 0.0 => f,
        Bandwidth::Factor(_) => return Err(Error::InvalidInput("bandwidth factor must be positive".into())),
    };
    let nf = n as f64;
    let mx = points.iter().map(|p| p[0]).sum::<f64>() / nf;
    let my = points.iter().map(|p| p[1]).sum::<f64>() / nf;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for p in points {
        let (dx, dy) = (p[0] - mx, p[1] - my);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    let f2 = factor * factor / (nf - 1.0);
    let (a, b, c) = (sxx * f2, sxy * f2, syy * f2);
    let det = a * c - b * b;
    // Relative test so that scale does not matter.
    if !(det > 1e-12 * (a * c).max(f64::MIN_POSITIVE)) {
        return Err(Error::Degenerate("points lie on a line or coincide"));
    }
    let (ia, ib, ic) = (c / det, -b / det, a / det);
    let norm = 1.0 / (2.0 * core::f64::consts::PI * sqrt(det) * nf);
    let mut grid = DensityGrid::zeros(axes);
    for (v, node) in grid.values.iter_mut().zip(lattice_nodes(&grid.axes)) {
        let mut s = 0.0;
        for p in points {
            let (dx, dy) = (node[0] - p[0], node[1] - p[1]);
            s += exp(-0.5 * (ia * dx * dx + 2.0 * ib * dx * dy + ic * dy * dy));
        }
        *v = s * norm;
    }
    Ok(grid)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub year: i32,
    /// Normalized time of the year's midpoint.
    pub time: f64,
    pub field: DriftField,
    pub density: DensityGrid,
    /// Trajectory points that fell inside the year.
    pub n_points: usize,
}

/// Years are accepted from the first anchor's year through the second
/// anchor's year inclusive.
pub fn check_year(year: i32, binning: &TimeBinning) -> Result<()> {
    let (lo, hi) = (binning.anchors[0].0.year(), binning.anchors[1].0.year());
    if year < lo || year > hi {
        return Err(Error::InvalidInput(alloc::format!("year {year} lies outside {lo}..={hi}")));
    }
    Ok(())
}

/// One drift field per year at the year's normalized midpoint, with the
/// density of trajectory points from that year on the field's two varying
/// axes. A year with too few or collinear points gets an all-zero density.
pub fn snapshot_series(
    net: &PotentialNet,
    years: &[i32],
    axes: &[Axis],
    trajs: &[LatentTrajectory],
    binning: &TimeBinning,
    cfg: &FieldConfig,
) -> Result<Vec<Snapshot>> {
    let varying: Vec<usize> = (0..axes.len()).filter(|&k| axes[k].steps > 1).collect();
    if varying.len() != 2 {
        return Err(Error::InvalidInput(String::from("snapshots need exactly two varying axes")));
    }
    let plane = [axes[varying[0]], axes[varying[1]]];
    let support: Vec<Vec<f64>> = trajs.iter().flat_map(|t| t.coords.iter().cloned()).collect();
    let mut out = Vec::with_capacity(years.len());
    for &year in years {
        check_year(year, binning)?;
        let start = binning.normalize_time(new_year(year))?;
        let end = binning.normalize_time(new_year(year + 1))?;
        let mid = 0.5 * (start + end);
        let field = drift_field(net, axes, mid, &support, cfg)?;
        let pts: Vec<[f64; 2]> = trajs
            .iter()
            .flat_map(|t| t.times.iter().zip(&t.coords))
            .filter(|(time, _)| **time >= start && **time < end)
            .map(|(_, c)| [c[varying[0]], c[varying[1]]])
            .collect();
        let density = match kde_density(&pts, plane, Bandwidth::Scott) {
            Ok(d) => d,
            Err(Error::InvalidInput(_) | Error::Degenerate(_)) => DensityGrid::zeros(plane),
            Err(e) => return Err(e),
        };
        out.push(Snapshot {
            year,
            time: mid,
            field,
            density,
            n_points: pts.len(),
        });
    }
    Ok(out)
}
