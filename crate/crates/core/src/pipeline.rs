//! The `simulate`, `reconstruct` and `oracle` commands on top of a
//! [`RunConfig`]. Every output is a deterministic function of the config,
//! the input files and the seed.

use std::path::Path;

use serde_json::json;

use crate::config::RunConfig;
use crate::driver::{config_hash, reconstruct as run_layers, write_result_dir, ReconResult};
use crate::error::Result;
use crate::io::{coefficient_layers, metrics, read_layers, write_layers};
use crate::ndmap::{BoundaryBasis, NdMatrix};
use crate::oracle::{run_oracle, OracleReport};
use crate::phantom::{simulate_data, PclcCoefficient, PhantomSpec};

pub const DATA_FILE: &str = "data.ndmap";
pub const TRUTH_DIR: &str = "truth";

pub struct Simulated {
    pub data: NdMatrix,
    pub truth: PclcCoefficient,
}

/// Writes `data.ndmap`, the rasterized truth under `truth/` and
/// `simulate.json` into `out`.
pub fn simulate(config: &RunConfig, phantom: &PhantomSpec, out: &Path) -> Result<Simulated> {
    let mesh = config.recon_mesh()?;
    let sim = config.sim_mesh(&mesh)?;
    let basis = BoundaryBasis::new(&mesh, config.m)?;
    let truth = phantom.rasterize(&mesh)?;
    let data = simulate_data(&truth, &sim, &mesh, &basis, config.noise_eps, config.seed)?;
    std::fs::create_dir_all(out)?;
    std::fs::write(out.join(DATA_FILE), data.to_text())?;
    write_layers(&coefficient_layers(&truth), &mesh, &out.join(TRUTH_DIR))?;
    let echo = config.echo();
    let summary = json!({
        "phantom": phantom,
        "recon_cells": mesh.n_cells(),
        "sim_cells": sim.n_cells(),
        "h_recon": mesh.h(),
        "h_sim": sim.h(),
        "data_norm": data.norm(),
        "config": echo,
        "config_sha256": config_hash(&echo),
    });
    std::fs::write(out.join("simulate.json"), serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n")?;
    Ok(Simulated { data, truth })
}

/// Runs the layer-peeling loop on `data` and writes the result directory,
/// plus `metrics.json` when a truth directory is given.
pub fn reconstruct(config: &RunConfig, data: &NdMatrix, out: &Path, truth: Option<&Path>) -> Result<ReconResult> {
    let mesh = config.recon_mesh()?;
    let basis = BoundaryBasis::new(&mesh, config.m)?;
    let result = run_layers(data, &mesh, &basis, config.c0, config.tau, &config.recon_params())?;
    write_result_dir(&result, &mesh, &config.echo(), out)?;
    if let Some(dir) = truth {
        let recon: Vec<_> = result.layer_history.iter().map(|r| (r.region.clone(), r.values.clone())).collect();
        let m = metrics(&recon, &read_layers(dir)?, &mesh);
        std::fs::write(out.join("metrics.json"), serde_json::to_string_pretty(&m).expect("metrics serialize") + "\n")?;
    }
    Ok(result)
}

/// Full-boundary disk spectrum check for the configured case, mesh size and
/// number of basis functions.
pub fn oracle(config: &RunConfig) -> Result<OracleReport> {
    run_oracle(&config.oracle.case, config.radius, config.h_recon, config.m, config.oracle.n_max)
}
