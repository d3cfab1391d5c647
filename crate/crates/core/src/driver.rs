//! The layer-peeling loop: shape of the next layer, then its constants,
//! until no further layer is found.

use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::ExtremeCoefficient;
use crate::geometry::{components, Mesh, Region};
use crate::io::write_layers;
use crate::ndmap::{assemble_nd, assemble_nd_functions, BoundaryBasis, NdMatrix};
use crate::order::DeltaPolicy;
use crate::phantom::{Layer, PclcCoefficient};
use crate::shape::{reconstruct_layer, ShapeParams};
use crate::value::ValueBench;

/// Correction of the data for the gap between the reconstruction mesh and
/// finer discretizations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelCorrection {
    None,
    /// Subtract `Λ_h/2(γ_k) − Λ_h(γ_k)` computed on the refined mesh.
    Refined,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReconParams {
    pub delta: DeltaPolicy,
    /// Relative noise level of the data, `0` for exact data.
    pub noise_eps: f64,
    pub tol_t: f64,
    pub max_layers: usize,
    pub shape: ShapeParams,
    pub correction: ModelCorrection,
}

impl Default for ReconParams {
    fn default() -> Self {
        Self {
            delta: DeltaPolicy::default(),
            noise_eps: 0.0,
            tol_t: 1e-3,
            max_layers: 16,
            shape: ShapeParams::default(),
            correction: ModelCorrection::Refined,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    EmptySet,
    MaxLayers,
    Inconsistent,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LayerRecord {
    pub region: Region,
    pub values: Vec<f64>,
    /// Components found by the shape step that were dropped as near-zero.
    pub dropped: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReconResult {
    pub coefficient: PclcCoefficient,
    pub layer_history: Vec<LayerRecord>,
    pub termination: Termination,
    pub delta: f64,
    /// Why value recovery stopped the loop, if it did.
    pub note: Option<String>,
}

/// Per-layer data correction on the refined mesh.
pub struct Refinement {
    fine: Mesh,
    functions: Vec<Vec<f64>>,
}

impl Refinement {
    pub fn new(mesh: &Mesh, basis: &BoundaryBasis) -> Result<Self> {
        let fine = mesh.refine()?;
        let functions = basis.transfer(mesh, &fine)?;
        Ok(Self { fine, functions })
    }

    /// `Λ_h/2(γ_k) − Λ_h(γ_k)` in the basis of `mesh`.
    pub fn gap(&self, gamma_k: &PclcCoefficient, mesh: &Mesh, basis: &BoundaryBasis) -> Result<DMatrix<f64>> {
        let coarse = gamma_k.evaluate(mesh, None);
        // children of cell t are 4t..4t+3 on the refined mesh
        let lifted: Vec<f64> = coarse.iter().flat_map(|&v| [v; 4]).collect();
        let fine = assemble_nd_functions(&ExtremeCoefficient::regular(lifted), &self.functions, &self.fine, &basis.id)?;
        let coarse = assemble_nd(&ExtremeCoefficient::regular(coarse), basis, mesh)?;
        Ok(fine.entries - coarse.entries)
    }

    /// `data` with the gap for `gamma_k` removed.
    pub fn correct(&self, data: &NdMatrix, gamma_k: &PclcCoefficient, mesh: &Mesh, basis: &BoundaryBasis) -> Result<NdMatrix> {
        Ok(corrected(data, Some(&self.gap(gamma_k, mesh, basis)?)))
    }
}

fn corrected(data: &NdMatrix, gap: Option<&DMatrix<f64>>) -> NdMatrix {
    let mut out = data.clone();
    if let Some(g) = gap {
        out.entries -= g;
    }
    out
}

/// Reconstructs the layered coefficient from ND data, starting from `γ₀ ≡ c0`.
pub fn reconstruct(
    data: &NdMatrix,
    mesh: &Mesh,
    basis: &BoundaryBasis,
    c0: f64,
    tau: f64,
    params: &ReconParams,
) -> Result<ReconResult> {
    if data.basis_id != basis.id || data.m() != basis.m {
        return Err(Error::BasisMismatch {
            expected: format!("{} (m = {})", basis.id, basis.m),
            found: format!("{} (m = {})", data.basis_id, data.m()),
        });
    }
    if !(params.tol_t > 0.0) {
        return Err(Error::InvalidArgument(format!("tol_t must be positive, got {}", params.tol_t)));
    }
    let delta = params.delta.delta(data.norm(), params.noise_eps, mesh.h());
    let refinement = match params.correction {
        ModelCorrection::None => None,
        ModelCorrection::Refined => Some(Refinement::new(mesh, basis)?),
    };
    let mut gamma = PclcCoefficient::background(c0, tau)?;
    let mut history = Vec::new();
    loop {
        if history.len() == params.max_layers {
            return Ok(ReconResult { coefficient: gamma, layer_history: history, termination: Termination::MaxLayers, delta, note: None });
        }
        let gap = refinement.as_ref().map(|r| r.gap(&gamma, mesh, basis)).transpose()?;
        let data_k = corrected(data, gap.as_ref());
        let shape = reconstruct_layer(&gamma, &data_k, mesh, basis, delta, &params.shape)?;
        if shape.is_empty() {
            return Ok(ReconResult { coefficient: gamma, layer_history: history, termination: Termination::EmptySet, delta, note: None });
        }
        let comps = components(&shape, mesh);
        let mut values = Vec::with_capacity(comps.len());
        for m0 in 0..comps.len() {
            let bench = ValueBench::new(&gamma, &shape, m0, &data_k, tau, mesh, basis)?;
            let v = bench.sign(delta).and_then(|s| bench.bisect(s, delta, params.tol_t));
            match v {
                Ok(v) => values.push(v),
                Err(e @ (Error::InconsistentData(_) | Error::ValueOutOfRange { .. } | Error::ValueUnbounded { .. })) => {
                    let note = format!("layer {} component {}: {e}", history.len() + 1, m0 + 1);
                    return Ok(ReconResult {
                        coefficient: gamma,
                        layer_history: history,
                        termination: Termination::Inconsistent,
                        delta,
                        note: Some(note),
                    });
                }
                Err(e) => return Err(e),
            }
        }
        let mut kept = Vec::new();
        let mut offsets = Vec::new();
        for (comp, v) in comps.iter().zip(&values) {
            if v.abs() >= params.tol_t {
                kept.extend_from_slice(comp.cells());
                offsets.push(*v);
            }
        }
        let dropped = comps.len() - offsets.len();
        if offsets.is_empty() {
            return Ok(ReconResult { coefficient: gamma, layer_history: history, termination: Termination::EmptySet, delta, note: None });
        }
        let region = Region::new(kept);
        gamma = gamma.with_layer(Layer { region: region.clone(), offsets: offsets.clone() }, mesh)?;
        history.push(LayerRecord { region, values: offsets, dropped });
    }
}

impl Termination {
    pub fn as_str(self) -> &'static str {
        match self {
            Termination::EmptySet => "empty_set",
            Termination::MaxLayers => "max_layers",
            Termination::Inconsistent => "inconsistent",
        }
    }
}

/// Writes `layer_NN.{region,values,pgm}` and `summary.json` into `dir`.
///
/// `config` is echoed verbatim into the summary together with its SHA-256.
pub fn write_result_dir(result: &ReconResult, mesh: &Mesh, config: &serde_json::Value, dir: &Path) -> Result<()> {
    let layers: Vec<(Region, Vec<f64>)> = result.layer_history.iter().map(|r| (r.region.clone(), r.values.clone())).collect();
    write_layers(&layers, mesh, dir)?;
    let layer_summary: Vec<serde_json::Value> = result
        .layer_history
        .iter()
        .enumerate()
        .map(|(j, rec)| {
            serde_json::json!({
                "layer": j + 1,
                "cells": rec.region.len(),
                "area": rec.region.area(mesh),
                "components": rec.values.len(),
                "dropped_components": rec.dropped,
                "values": rec.values,
            })
        })
        .collect();
    let summary = serde_json::json!({
        "termination_reason": result.termination.as_str(),
        "note": result.note,
        "delta": result.delta,
        "layers": layer_summary,
        "config": config,
        "config_sha256": config_hash(config),
    });
    std::fs::write(dir.join("summary.json"), serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n")?;
    Ok(())
}

pub fn config_hash(config: &serde_json::Value) -> String {
    use sha2::{Digest, Sha256};
    let text = serde_json::to_string(config).expect("config serializes");
    Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}
