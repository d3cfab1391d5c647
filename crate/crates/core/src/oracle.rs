//! Closed-form ND spectra on a disk measured on its whole boundary, and the
//! comparison of a discrete map against them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::ExtremeCoefficient;
use crate::geometry::build_disk_mesh;
use crate::ndmap::{assemble_nd, BoundaryBasis};
use crate::order::symmetric_eigenvalues;

/// Radially layered test conductivity on a disk of radius `radius`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum OracleCase {
    Homogeneous { conductivity: f64 },
    Concentric { outer: f64, inner: f64, inner_radius: f64 },
}

impl OracleCase {
    /// Eigenvalue of the `n`-th Fourier mode, `n ≥ 1`, for an L²-normalized
    /// basis on the circle of radius `radius`.
    pub fn eigenvalue(&self, n: usize, radius: f64) -> f64 {
        let n = n as f64;
        match *self {
            OracleCase::Homogeneous { conductivity } => radius / (conductivity * n),
            OracleCase::Concentric { outer, inner, inner_radius } => {
                let mu = (outer - inner) / (outer + inner);
                let q = mu * (inner_radius / radius).powf(2.0 * n);
                radius / (outer * n) * (1.0 + q) / (1.0 - q)
            }
        }
    }

    fn conductivity(&self, p: [f64; 2]) -> f64 {
        match *self {
            OracleCase::Homogeneous { conductivity } => conductivity,
            OracleCase::Concentric { outer, inner, inner_radius } => {
                if p[0].hypot(p[1]) < inner_radius {
                    inner
                } else {
                    outer
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OracleRow {
    pub mode: usize,
    pub computed: [f64; 2],
    pub analytic: f64,
    pub rel_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OracleReport {
    pub rows: Vec<OracleRow>,
    pub max_rel_error: f64,
}

impl OracleReport {
    pub fn table(&self) -> String {
        let mut out = String::from("mode  computed_cos          computed_sin          analytic              rel_error\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{:>4}  {:<20.14e}  {:<20.14e}  {:<20.14e}  {:.3e}\n",
                r.mode, r.computed[0], r.computed[1], r.analytic, r.rel_error
            ));
        }
        out.push_str(&format!("max relative error {:.3e}\n", self.max_rel_error));
        out
    }
}

/// Compares the `2·n_max` largest discrete eigenvalues, in pairs, with the
/// analytic values of modes `1..=n_max`.
pub fn compare_spectrum(eigenvalues: &[f64], case: &OracleCase, radius: f64, n_max: usize) -> Result<OracleReport> {
    if eigenvalues.len() < 2 * n_max {
        return Err(Error::InvalidArgument(format!(
            "{} eigenvalues cannot cover {n_max} modes of multiplicity two",
            eigenvalues.len()
        )));
    }
    let mut sorted = eigenvalues.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let rows: Vec<OracleRow> = (1..=n_max)
        .map(|n| {
            let computed = [sorted[2 * n - 2], sorted[2 * n - 1]];
            let analytic = case.eigenvalue(n, radius);
            let rel_error = computed.iter().map(|c| (c - analytic).abs() / analytic.abs()).fold(0.0, f64::max);
            OracleRow { mode: n, computed, analytic, rel_error }
        })
        .collect();
    let max_rel_error = rows.iter().map(|r| r.rel_error).fold(0.0, f64::max);
    Ok(OracleReport { rows, max_rel_error })
}

/// Builds the disk mesh, assembles the full-boundary ND map with `m`
/// functions and compares its spectrum with the closed form.
pub fn run_oracle(case: &OracleCase, radius: f64, h: f64, m: usize, n_max: usize) -> Result<OracleReport> {
    let mesh = build_disk_mesh(radius, h)?;
    let basis = BoundaryBasis::new(&mesh, m)?;
    let values = mesh.centroids().iter().map(|&p| case.conductivity(p)).collect();
    let nd = assemble_nd(&ExtremeCoefficient::regular(values), &basis, &mesh)?;
    compare_spectrum(&symmetric_eigenvalues(&nd.entries), case, radius, n_max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn series_reduces_to_homogeneous() {
        let same = OracleCase::Concentric { outer: 2.0, inner: 2.0, inner_radius: 0.5 };
        let hom = OracleCase::Homogeneous { conductivity: 2.0 };
        for n in 1..6 {
            assert!((same.eigenvalue(n, 1.0) - hom.eigenvalue(n, 1.0)).abs() < 1e-15);
        }
        // a more conductive core lowers every eigenvalue
        let core = OracleCase::Concentric { outer: 1.0, inner: 3.0, inner_radius: 0.5 };
        assert!((core.eigenvalue(1, 1.0) - (1.0 - 0.125) / (1.0 + 0.125)).abs() < 1e-15);
    }

    #[test]
    fn comparison_pairs_sorted_eigenvalues() {
        let case = OracleCase::Homogeneous { conductivity: 1.0 };
        let eig = [0.5, 1.0, 0.5, 1.0];
        let r = compare_spectrum(&eig, &case, 1.0, 2).unwrap();
        assert_eq!(r.max_rel_error, 0.0);
        assert!(compare_spectrum(&eig, &case, 1.0, 3).is_err());
    }

    #[test]
    fn coarse_mesh_misses_tolerance() {
        let r = run_oracle(&OracleCase::Homogeneous { conductivity: 1.0 }, 1.0, 0.3, 16, 8).unwrap();
        assert!(r.max_rel_error > 1e-2);
    }
}
