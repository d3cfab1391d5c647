//! Layer files, raster images and reconstruction metrics.

use std::fmt::Write as _;
use std::path::Path;

use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::geometry::{components, CellIndex, Mesh, Region};
use crate::phantom::PclcCoefficient;

pub const RASTER_SIZE: usize = 256;

/// Binary portable graymap of `region` sampled at pixel centres over the
/// square `[-r, r]²`, `r` the largest vertex radius: 255 inside, 0 outside.
pub fn region_pgm(region: &Region, mesh: &Mesh, size: usize) -> Vec<u8> {
    let r = mesh.vertices().iter().map(|p| p[0].hypot(p[1])).fold(0.0, f64::max);
    let index = CellIndex::new(mesh);
    let mask = region.mask(mesh.n_cells());
    let step = 2.0 * r / size as f64;
    let mut out = format!("P5\n{size} {size}\n255\n").into_bytes();
    for row in 0..size {
        let y = r - (row as f64 + 0.5) * step;
        for col in 0..size {
            let x = -r + (col as f64 + 0.5) * step;
            let inside = mesh.locate([x, y], &index).is_some_and(|t| mask[t]);
            out.push(if inside { 255 } else { 0 });
        }
    }
    out
}

pub fn values_text(values: &[f64]) -> String {
    let mut s = String::new();
    for (n, v) in values.iter().enumerate() {
        writeln!(s, "{} {:.16e}", n + 1, v).unwrap();
    }
    s
}

pub fn values_from_text(text: &str) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
        let mut f = line.split_whitespace();
        let (Some(i), Some(v), None) = (f.next(), f.next(), f.next()) else {
            return Err(Error::Parse(format!("bad values line `{line}`")));
        };
        let i: usize = i.parse().map_err(|_| Error::Parse(format!("bad component index `{i}`")))?;
        if i != out.len() + 1 {
            return Err(Error::Parse(format!("component {i} out of order")));
        }
        out.push(v.parse().map_err(|_| Error::Parse(format!("bad value `{v}`")))?);
    }
    Ok(out)
}

pub fn layer_stem(j: usize) -> String {
    format!("layer_{:02}", j + 1)
}

/// Writes `layer_NN.region`, `layer_NN.values` and `layer_NN.pgm` per layer.
pub fn write_layers(layers: &[(Region, Vec<f64>)], mesh: &Mesh, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for (j, (region, values)) in layers.iter().enumerate() {
        let stem = layer_stem(j);
        std::fs::write(dir.join(format!("{stem}.region")), region.to_text())?;
        std::fs::write(dir.join(format!("{stem}.values")), values_text(values))?;
        std::fs::write(dir.join(format!("{stem}.pgm")), region_pgm(region, mesh, RASTER_SIZE))?;
    }
    Ok(())
}

pub fn coefficient_layers(gamma: &PclcCoefficient) -> Vec<(Region, Vec<f64>)> {
    gamma.layers().iter().map(|l| (l.region.clone(), l.offsets.clone())).collect()
}

/// Reads consecutive `layer_NN.region` / `layer_NN.values` pairs.
pub fn read_layers(dir: &Path) -> Result<Vec<(Region, Vec<f64>)>> {
    let mut out = Vec::new();
    loop {
        let stem = layer_stem(out.len());
        let region_path = dir.join(format!("{stem}.region"));
        if !region_path.exists() {
            break;
        }
        let region = Region::from_text(&std::fs::read_to_string(region_path)?)?;
        let values = values_from_text(&std::fs::read_to_string(dir.join(format!("{stem}.values")))?)?;
        out.push((region, values));
    }
    Ok(out)
}

/// Jaccard index per layer and relative value error per reconstructed
/// component, each matched to the true component it overlaps most.
pub fn metrics(recon: &[(Region, Vec<f64>)], truth: &[(Region, Vec<f64>)], mesh: &Mesh) -> Value {
    let n = recon.len().max(truth.len());
    let mut layers = Vec::with_capacity(n);
    for j in 0..n {
        let (r, t) = (recon.get(j), truth.get(j));
        let mut entry = json!({
            "layer": j + 1,
            "recon_cells": r.map_or(0, |x| x.0.len()),
            "truth_cells": t.map_or(0, |x| x.0.len()),
        });
        if let (Some((rr, rv)), Some((tr, tv))) = (r, t) {
            entry["jaccard"] = json!(rr.jaccard(tr));
            let truth_comps = components(tr, mesh);
            let values: Vec<Value> = components(rr, mesh)
                .iter()
                .zip(rv)
                .enumerate()
                .map(|(k, (comp, &v))| {
                    let best = truth_comps
                        .iter()
                        .enumerate()
                        .map(|(i, c)| (comp.intersection(c).len(), i))
                        .filter(|&(overlap, _)| overlap > 0)
                        .max_by_key(|&(overlap, i)| (overlap, std::cmp::Reverse(i)));
                    match best.and_then(|(_, i)| tv.get(i).map(|&c| (i, c))) {
                        Some((i, c)) => json!({
                            "component": k + 1,
                            "truth_component": i + 1,
                            "recovered": v,
                            "truth": c,
                            "rel_error": (v - c).abs() / c.abs(),
                        }),
                        None => json!({ "component": k + 1, "recovered": v }),
                    }
                })
                .collect();
            entry["values"] = json!(values);
        }
        layers.push(entry);
    }
    json!({ "recon_layers": recon.len(), "truth_layers": truth.len(), "layers": layers })
}
