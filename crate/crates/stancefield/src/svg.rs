//! Layered SVG 1.1 figure of one drift field: a density heat layer,
//! streamlines traced through the drift, and hatching over low-support
//! nodes. Coordinates are printed with fixed precision so equal inputs give
//! byte-identical documents.

use std::fmt::Write as _;

use stancefield_core::density::DensityGrid;
use stancefield_core::landscape::{Axis, DriftField};

use crate::config::ExportSection;
use crate::error::{Error, Result};
use crate::formats::fixed;

/// Five-stop sequential colormap, dark to light.
const COLORMAP: [[f64; 3]; 5] = [
    [68.0, 1.0, 84.0],
    [59.0, 82.0, 139.0],
    [33.0, 145.0, 140.0],
    [94.0, 201.0, 98.0],
    [253.0, 231.0, 37.0],
];

fn color(v: f64) -> String {
    let v = v.clamp(0.0, 1.0) * (COLORMAP.len() - 1) as f64;
    let i = (v.floor() as usize).min(COLORMAP.len() - 2);
    let f = v - i as f64;
    let c: Vec<u8> = (0..3)
        .map(|k| (COLORMAP[i][k] + f * (COLORMAP[i + 1][k] - COLORMAP[i][k])).round() as u8)
        .collect();
    format!("#{:02x}{:02x}{:02x}", c[0], c[1], c[2])
}

/// The two varying axes of a field as a plane.
struct Plane {
    axes: [Axis; 2],
    dims: [usize; 2],
}

impl Plane {
    fn of(field: &DriftField) -> Result<Plane> {
        let v = field.varying_axes();
        if v.len() != 2 {
            return Err(Error::Data("figures need a field with exactly two varying axes".into()));
        }
        Ok(Plane {
            axes: [field.axes[v[0]], field.axes[v[1]]],
            dims: [v[0], v[1]],
        })
    }

    fn node(&self, i: usize, j: usize) -> usize {
        i * self.axes[1].steps + j
    }

    /// Bilinear interpolation of the in-plane drift; `None` outside.
    fn drift_at(&self, field: &DriftField, p: [f64; 2]) -> Option<[f64; 2]> {
        let mut idx = [0usize; 2];
        let mut frac = [0.0; 2];
        for k in 0..2 {
            let a = &self.axes[k];
            if p[k] < a.min || p[k] > a.max {
                return None;
            }
            let u = (p[k] - a.min) / a.spacing();
            let i = (u.floor() as usize).min(a.steps - 2);
            idx[k] = i;
            frac[k] = u - i as f64;
        }
        let mut out = [0.0; 2];
        for (di, wi) in [(0, 1.0 - frac[0]), (1, frac[0])] {
            for (dj, wj) in [(0, 1.0 - frac[1]), (1, frac[1])] {
                let d = &field.drift[self.node(idx[0] + di, idx[1] + dj)];
                for k in 0..2 {
                    out[k] += wi * wj * d[self.dims[k]];
                }
            }
        }
        Some(out)
    }
}

/// Streamlines in data coordinates, one per seed that moves. Seeds sit on
/// every `seed_stride`-th node of each axis; each path advances by
/// `step_fraction` of the finer grid spacing per step, along the unit
/// direction or scaled by speed relative to the fastest node.
pub fn trace_streamlines(field: &DriftField, style: &ExportSection) -> Result<Vec<Vec<[f64; 2]>>> {
    let plane = Plane::of(field)?;
    let speed = |d: &[f64]| d[plane.dims[0]].hypot(d[plane.dims[1]]);
    let max_speed = field.drift.iter().map(|d| speed(d)).fold(0.0, f64::max);
    if !(max_speed > 0.0) || !max_speed.is_finite() {
        return Ok(Vec::new());
    }
    let h = style.step_fraction * plane.axes[0].spacing().min(plane.axes[1].spacing());
    let mut lines = Vec::new();
    for i in (0..plane.axes[0].steps).step_by(style.seed_stride) {
        for j in (0..plane.axes[1].steps).step_by(style.seed_stride) {
            let mut p = [plane.axes[0].value(i), plane.axes[1].value(j)];
            let mut line = vec![p];
            for _ in 0..style.max_steps {
                let Some(v) = plane.drift_at(field, p) else { break };
                let s = v[0].hypot(v[1]);
                if s <= 1e-12 * max_speed {
                    break;
                }
                let scale = if style.normalize_streams { h / s } else { h / max_speed };
                let next = [p[0] + scale * v[0], p[1] + scale * v[1]];
                if plane.drift_at(field, next).is_none() {
                    break;
                }
                p = next;
                line.push(p);
            }
            if line.len() >= 2 {
                lines.push(line);
            }
        }
    }
    Ok(lines)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Renders the figure. The density must be defined on the field's plane.
pub fn export_svg(field: &DriftField, density: &DensityGrid, style: &ExportSection, title: &str) -> Result<String> {
    let plane = Plane::of(field)?;
    if density.axes != plane.axes {
        return Err(Error::Data("density and drift field use different grids".into()));
    }
    let (w, h) = (f64::from(style.width), f64::from(style.height));
    let [ax, ay] = plane.axes;
    let px = |x: f64| fixed((x - ax.min) / (ax.max - ax.min) * w, 2);
    let py = |y: f64| fixed(h - (y - ay.min) / (ay.max - ay.min) * h, 2);
    let (cw, ch) = (ax.spacing() / (ax.max - ax.min) * w, ay.spacing() / (ay.max - ay.min) * h);

    let mut s = String::new();
    s.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\" standalone=\"no\"?>\n");
    s.push_str(
        "<!DOCTYPE svg PUBLIC \"-//W3C//DTD SVG 1.1//EN\" \"http://www.w3.org/Graphics/SVG/1.1/DTD/svg11.dtd\">\n",
    );
    let _ = writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{}\" height=\"{}\" viewBox=\"0 0 {} {}\">",
        style.width, style.height, style.width, style.height
    );
    let _ = writeln!(s, "<title>{}</title>", escape(title));
    s.push_str("<defs>\n<pattern id=\"hatch\" width=\"6\" height=\"6\" patternUnits=\"userSpaceOnUse\" patternTransform=\"rotate(45)\">\n");
    s.push_str("<line x1=\"0\" y1=\"0\" x2=\"0\" y2=\"6\" stroke=\"#404040\" stroke-width=\"1\"/>\n</pattern>\n</defs>\n");
    let _ = writeln!(s, "<rect x=\"0\" y=\"0\" width=\"{}\" height=\"{}\" fill=\"{}\"/>", style.width, style.height, color(0.0));

    let cell = |s: &mut String, i: usize, j: usize, fill: &str| {
        let (x, y) = (ax.value(i), ay.value(j));
        let _ = writeln!(
            s,
            "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{fill}\"/>",
            fixed((x - ax.min) / (ax.max - ax.min) * w - cw / 2.0, 2),
            fixed(h - (y - ay.min) / (ay.max - ay.min) * h - ch / 2.0, 2),
            fixed(cw, 2),
            fixed(ch, 2),
        );
    };

    s.push_str("<g id=\"density\">\n");
    let top = density.max();
    if top > 0.0 {
        for i in 0..ax.steps {
            for j in 0..ay.steps {
                let v = density.at(i, j);
                if v > 0.0 {
                    cell(&mut s, i, j, &color(v / top));
                }
            }
        }
    }
    s.push_str("</g>\n");

    s.push_str("<g id=\"streamlines\" fill=\"none\" stroke=\"#ffffff\" stroke-width=\"1\" stroke-opacity=\"0.8\">\n");
    for line in trace_streamlines(field, style)? {
        let mut d = String::new();
        for (k, p) in line.iter().enumerate() {
            let _ = write!(d, "{}{} {}", if k == 0 { "M" } else { " L" }, px(p[0]), py(p[1]));
        }
        let _ = writeln!(s, "<path d=\"{d}\"/>");
    }
    s.push_str("</g>\n");

    s.push_str("<g id=\"hatching\">\n");
    for i in 0..ax.steps {
        for j in 0..ay.steps {
            if field.low_support[plane.node(i, j)] {
                cell(&mut s, i, j, "url(#hatch)");
            }
        }
    }
    s.push_str("</g>\n</svg>\n");
    Ok(s)
}
