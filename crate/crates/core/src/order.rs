//! Loewner-order comparison of ND matrices.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ndmap::NdMatrix;

/// Eigenvalues of a symmetric matrix in ascending order.
pub fn symmetric_eigenvalues(a: &DMatrix<f64>) -> Vec<f64> {
    let mut ev: Vec<f64> = SymmetricEigen::new(a.clone()).eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

pub fn min_eigenvalue(a: &DMatrix<f64>) -> f64 {
    symmetric_eigenvalues(a).first().copied().unwrap_or(0.0)
}

/// Spectral norm of a symmetric matrix.
pub fn spectral_norm(a: &DMatrix<f64>) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    let sym = (a + a.transpose()) * 0.5;
    symmetric_eigenvalues(&sym).iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn check_same_basis(a: &NdMatrix, b: &NdMatrix) -> Result<()> {
    if a.basis_id != b.basis_id || a.m() != b.m() {
        return Err(Error::BasisMismatch {
            expected: format!("{} (m = {})", a.basis_id, a.m()),
            found: format!("{} (m = {})", b.basis_id, b.m()),
        });
    }
    Ok(())
}

/// `λ_min(A − B)`.
pub fn min_eig_difference(a: &NdMatrix, b: &NdMatrix) -> Result<f64> {
    check_same_basis(a, b)?;
    let d = &a.entries - &b.entries;
    Ok(min_eigenvalue(&((&d + d.transpose()) * 0.5)))
}

/// `A ≥ B` up to `delta`: true iff `λ_min(A − B) ≥ −delta`.
pub fn loewner_geq(a: &NdMatrix, b: &NdMatrix, delta: f64) -> Result<bool> {
    if !(delta >= 0.0) {
        return Err(Error::InvalidArgument(format!("delta must be nonnegative, got {delta}")));
    }
    Ok(min_eig_difference(a, b)? >= -delta)
}

/// Tolerance used in every Loewner comparison against measured data.
///
/// For noisy data the tolerance is `(noise_factor·ε + mesh_factor·h)·‖Λ(γ)‖₂`;
/// for exact data it is `exact_factor·‖Λ(γ)‖₂`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeltaPolicy {
    pub noise_factor: f64,
    pub mesh_factor: f64,
    pub exact_factor: f64,
}

impl Default for DeltaPolicy {
    fn default() -> Self {
        Self { noise_factor: 2.0, mesh_factor: 10.0, exact_factor: 1e-9 }
    }
}

impl DeltaPolicy {
    pub fn delta(&self, data_norm: f64, noise_eps: f64, h: f64) -> f64 {
        if noise_eps > 0.0 {
            (self.noise_factor * noise_eps + self.mesh_factor * h) * data_norm
        } else {
            self.exact_factor * data_norm
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn nd(entries: DMatrix<f64>) -> NdMatrix {
        NdMatrix { entries, basis_id: "b".into(), meta: String::new() }
    }

    #[test]
    fn reflexive() {
        let a = nd(DMatrix::from_fn(4, 4, |i, j| 1.0 / (1.0 + i as f64 + j as f64)));
        assert!(loewner_geq(&a, &a, 0.0).unwrap());
    }

    #[test]
    fn sign_of_smallest_eigenvalue() {
        let z = nd(DMatrix::zeros(2, 2));
        let pos = nd(DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![0.5, 0.1])));
        let ind = nd(DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![0.5, -0.1])));
        assert!(loewner_geq(&pos, &z, 0.0).unwrap());
        assert!(!loewner_geq(&ind, &z, 0.0).unwrap());
        assert!(loewner_geq(&ind, &z, 0.1).unwrap());
    }

    #[test]
    fn basis_mismatch() {
        let a = nd(DMatrix::zeros(2, 2));
        let mut b = a.clone();
        b.basis_id = "other".into();
        assert!(matches!(loewner_geq(&a, &b, 0.0), Err(Error::BasisMismatch { .. })));
        assert!(matches!(loewner_geq(&a, &nd(DMatrix::zeros(3, 3)), 0.0), Err(Error::BasisMismatch { .. })));
    }

    #[test]
    fn delta_policy() {
        let p = DeltaPolicy::default();
        assert_eq!(p.delta(2.0, 0.0, 0.03), 2e-9);
        assert!((p.delta(1.0, 1e-3, 0.03) - (2e-3 + 0.3)).abs() < 1e-15);
    }
}
