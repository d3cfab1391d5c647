//! Recovery of the constant on one component of a reconstructed layer.
//!
//! For component `m0` and a trial value `t` the test coefficient is
//! `γ_k + t` on the outer τ-layer of the component, extreme (`0` or `∞`) on
//! the rest of the layer and `γ_k` elsewhere. The inequality against the
//! data flips exactly at the true constant, so its sign at `t = 0` gives the
//! sign of the constant and bisection on a doubled bracket gives its value.

use serde::{Deserialize, Serialize};

use crate::condense::{CondensedExterior, Extreme};
use crate::error::{Error, Result};
use crate::forward::ExtremeCoefficient;
use crate::geometry::{components, outer_layer, Mesh, Region};
use crate::ndmap::{BoundaryBasis, NdMatrix};
use crate::order::min_eig_difference;
use crate::phantom::PclcCoefficient;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sign {
    Positive,
    Negative,
}

impl Sign {
    pub fn as_f64(self) -> f64 {
        match self {
            Sign::Positive => 1.0,
            Sign::Negative => -1.0,
        }
    }
}

/// Largest doubling exponent tried when bracketing a positive value.
pub const BRACKET_DOUBLINGS: u32 = 60;

fn component(layer: &Region, m0: usize, mesh: &Mesh) -> Result<Region> {
    let mut comps = components(layer, mesh);
    if m0 >= comps.len() {
        return Err(Error::InvalidArgument(format!("component {m0} requested but the layer has {}", comps.len())));
    }
    Ok(comps.swap_remove(m0))
}

/// Test coefficient for component `m0` (0-based, in [`components`] order).
pub fn build_test_coefficient(
    gamma_k: &PclcCoefficient,
    layer: &Region,
    m0: usize,
    t: f64,
    mu: Extreme,
    tau: f64,
    mesh: &Mesh,
) -> Result<ExtremeCoefficient> {
    let comp = component(layer, m0, mesh)?;
    let shell = outer_layer(&comp, tau, mesh);
    let mut base = gamma_k.evaluate(mesh, None);
    for &c in shell.cells() {
        base[c] += t;
        if !(base[c] > 0.0) {
            return Err(Error::InvalidArgument(format!("trial value {t} makes the conductivity nonpositive in cell {c}")));
        }
    }
    let extreme = layer.difference(&shell);
    let (zero_set, inf_set) = match mu {
        Extreme::Zero => (extreme, Region::empty()),
        Extreme::Infinity => (Region::empty(), extreme),
    };
    Ok(ExtremeCoefficient { base, zero_set, inf_set })
}

/// Precomputed exterior of a layer for repeated trial values on one component.
pub struct ValueBench<'a> {
    mesh: &'a Mesh,
    data: &'a NdMatrix,
    background: Vec<f64>,
    shell: Vec<usize>,
    /// `t` must stay above this for positivity on the shell.
    lower_limit: f64,
    exterior: CondensedExterior,
}

impl<'a> ValueBench<'a> {
    pub fn new(
        gamma_k: &PclcCoefficient,
        layer: &Region,
        m0: usize,
        data: &'a NdMatrix,
        tau: f64,
        mesh: &'a Mesh,
        basis: &BoundaryBasis,
    ) -> Result<Self> {
        let comp = component(layer, m0, mesh)?;
        let shell = outer_layer(&comp, tau, mesh);
        if shell.is_empty() {
            return Err(Error::InvalidArgument(format!("component {m0} has an empty outer layer")));
        }
        let background = gamma_k.evaluate(mesh, None);
        let lower_limit = -shell.cells().iter().map(|&c| background[c]).fold(f64::INFINITY, f64::min);
        let exterior = CondensedExterior::new(mesh, &background, layer, basis)?;
        Ok(Self { mesh, data, background, shell: shell.cells().to_vec(), lower_limit, exterior })
    }

    pub fn lower_limit(&self) -> f64 {
        self.lower_limit
    }

    pub fn test_map(&self, t: f64, mu: Extreme) -> Result<NdMatrix> {
        if !(t > self.lower_limit) {
            return Err(Error::InvalidArgument(format!(
                "trial value {t} must exceed {} to keep the conductivity positive",
                self.lower_limit
            )));
        }
        let bg = &self.background;
        self.exterior.nd_map(self.mesh, &self.shell, |c| bg[c] + t, mu)
    }

    /// `λ_min(Λ(γ) − Λ_∞(t))`; nonnegative iff `t ≥ c`.
    pub fn infinity_margin(&self, t: f64) -> Result<f64> {
        min_eig_difference(self.data, &self.test_map(t, Extreme::Infinity)?)
    }

    /// `λ_min(Λ₀(t) − Λ(γ))`; nonnegative iff `t ≤ c`.
    pub fn zero_margin(&self, t: f64) -> Result<f64> {
        min_eig_difference(&self.test_map(t, Extreme::Zero)?, self.data)
    }

    pub fn sign(&self, delta: f64) -> Result<Sign> {
        let below = self.infinity_margin(0.0)? >= -delta;
        let above = self.zero_margin(0.0)? >= -delta;
        match (below, above) {
            (true, false) => Ok(Sign::Negative),
            (false, true) => Ok(Sign::Positive),
            (true, true) => Err(Error::InconsistentData("both tests pass at t = 0, which would mean a zero offset".into())),
            (false, false) => Err(Error::InconsistentData("neither test passes at t = 0".into())),
        }
    }

    /// Bisects the feasibility predicate of the given sign to width `tol_t`
    /// and returns the midpoint.
    pub fn bisect(&self, sign: Sign, delta: f64, tol_t: f64) -> Result<f64> {
        let (lo, hi) = self.bracket(sign, delta, tol_t)?;
        Ok(0.5 * (lo + hi))
    }

    /// Final bisection bracket `[lo, hi]`, at most `tol_t` wide. The end
    /// nearer zero fails the predicate and the other end passes it.
    pub fn bracket(&self, sign: Sign, delta: f64, tol_t: f64) -> Result<(f64, f64)> {
        if !(tol_t > 0.0) {
            return Err(Error::InvalidArgument(format!("tol_t must be positive, got {tol_t}")));
        }
        match sign {
            Sign::Positive => {
                let holds = |t: f64| self.infinity_margin(t).map(|m| m >= -delta);
                let mut lo = 0.0;
                let mut hi = tol_t;
                let mut k = 0;
                while !holds(hi)? {
                    if k == BRACKET_DOUBLINGS {
                        return Err(Error::ValueUnbounded { cap: hi });
                    }
                    lo = hi;
                    hi *= 2.0;
                    k += 1;
                }
                while hi - lo > tol_t {
                    let mid = 0.5 * (lo + hi);
                    if holds(mid)? {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                Ok((lo, hi))
            }
            Sign::Negative => {
                let holds = |t: f64| self.zero_margin(t).map(|m| m >= -delta);
                // keep a margin of tol_t above the positivity limit
                let floor = self.lower_limit + 0.5 * tol_t;
                let mut hi = 0.0;
                let mut lo = -tol_t;
                loop {
                    if lo <= floor {
                        if floor >= hi || !holds(floor)? {
                            return Err(Error::ValueOutOfRange { bound: self.lower_limit });
                        }
                        lo = floor;
                        break;
                    }
                    if holds(lo)? {
                        break;
                    }
                    hi = lo;
                    lo *= 2.0;
                }
                while hi - lo > tol_t {
                    let mid = 0.5 * (lo + hi);
                    if holds(mid)? {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                Ok((lo, hi))
            }
        }
    }
}

/// Sign of the constant on component `m0`.
#[allow(clippy::too_many_arguments)]
pub fn sign_of_component(
    gamma_k: &PclcCoefficient,
    layer: &Region,
    m0: usize,
    data: &NdMatrix,
    tau: f64,
    mesh: &Mesh,
    basis: &BoundaryBasis,
    delta: f64,
) -> Result<Sign> {
    ValueBench::new(gamma_k, layer, m0, data, tau, mesh, basis)?.sign(delta)
}

/// Constant on component `m0` given its sign.
#[allow(clippy::too_many_arguments)]
pub fn bisect_value(
    gamma_k: &PclcCoefficient,
    layer: &Region,
    m0: usize,
    sign: Sign,
    data: &NdMatrix,
    tau: f64,
    mesh: &Mesh,
    basis: &BoundaryBasis,
    delta: f64,
    tol_t: f64,
) -> Result<f64> {
    ValueBench::new(gamma_k, layer, m0, data, tau, mesh, basis)?.bisect(sign, delta, tol_t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_disk_mesh, thin};
    use crate::ndmap::assemble_nd;
    use crate::phantom::{simulate_reference, PhantomSpec};

    #[test]
    fn test_coefficient_layout() {
        let mesh = build_disk_mesh(1.0, 0.1).unwrap();
        let g0 = PclcCoefficient::background(1.0, 0.2).unwrap();
        let layer = Region::from_predicate(&mesh, |p| p[0].hypot(p[1]) < 0.5);
        let s = build_test_coefficient(&g0, &layer, 0, 0.0, Extreme::Zero, 0.2, &mesh).unwrap();
        assert_eq!(s.base, vec![1.0; mesh.n_cells()]);
        assert_eq!(s.zero_set, thin(&layer, 0.2, &mesh));
        assert!(build_test_coefficient(&g0, &layer, 0, -1.0, Extreme::Zero, 0.2, &mesh).is_err());

        let two = Region::from_predicate(&mesh, |p| (p[0] - 0.4).hypot(p[1]) < 0.3 || (p[0] + 0.4).hypot(p[1]) < 0.3);
        let comps = components(&two, &mesh);
        let s = build_test_coefficient(&g0, &two, 1, 0.5, Extreme::Infinity, 0.2, &mesh).unwrap();
        assert!(comps[0].is_subset(&s.inf_set));
    }

    #[test]
    fn bench_matches_global_assembly() {
        let mesh = build_disk_mesh(1.0, 0.1).unwrap();
        let basis = BoundaryBasis::new(&mesh, 6).unwrap();
        let g0 = PclcCoefficient::background(1.0, 0.2).unwrap();
        let layer = Region::from_predicate(&mesh, |p| p[0].hypot(p[1]) < 0.5);
        let data = simulate_reference(&g0, &mesh, &basis, 0.0, 0).unwrap();
        let bench = ValueBench::new(&g0, &layer, 0, &data, 0.2, &mesh, &basis).unwrap();
        for mu in [Extreme::Zero, Extreme::Infinity] {
            let fast = bench.test_map(0.7, mu).unwrap();
            let slow = assemble_nd(&build_test_coefficient(&g0, &layer, 0, 0.7, mu, 0.2, &mesh).unwrap(), &basis, &mesh).unwrap();
            assert!((&fast.entries - &slow.entries).norm() < 1e-10 * slow.entries.norm());
        }
    }

    #[test]
    fn recovers_value_without_mesh_mismatch() {
        let mesh = build_disk_mesh(1.0, 0.08).unwrap();
        let basis = BoundaryBasis::new(&mesh, 8).unwrap();
        let g0 = PclcCoefficient::background(1.0, 0.2).unwrap();
        for c in [2.0, -0.5] {
            let truth = PhantomSpec::concentric(1.0, 0.2, &[(0.45, c)]).rasterize(&mesh).unwrap();
            let layer = truth.layers()[0].region.clone();
            let data = simulate_reference(&truth, &mesh, &basis, 0.0, 0).unwrap();
            let delta = 1e-9 * data.norm();
            let bench = ValueBench::new(&g0, &layer, 0, &data, 0.2, &mesh, &basis).unwrap();
            let sign = bench.sign(delta).unwrap();
            assert_eq!(sign.as_f64(), c.signum());
            let v = bench.bisect(sign, delta, 1e-3).unwrap();
            // the "if" direction is exact, so the estimate never overshoots the
            // true constant; finitely many boundary functions blur the other side
            assert!(v.abs() <= c.abs() + 1e-3 && v.abs() >= 0.9 * c.abs(), "{v} vs {c}");
            // both inequalities hold at the true value
            assert!(bench.infinity_margin(c).unwrap() >= -delta && bench.zero_margin(c).unwrap() >= -delta);
        }
    }

    #[test]
    fn homogeneous_data_is_inconsistent_with_a_layer() {
        let mesh = build_disk_mesh(1.0, 0.1).unwrap();
        let basis = BoundaryBasis::new(&mesh, 6).unwrap();
        let g0 = PclcCoefficient::background(1.0, 0.2).unwrap();
        let layer = Region::from_predicate(&mesh, |p| p[0].hypot(p[1]) < 0.5);
        let data = simulate_reference(&g0, &mesh, &basis, 0.0, 0).unwrap();
        let r = sign_of_component(&g0, &layer, 0, &data, 0.2, &mesh, &basis, 1e-9 * data.norm());
        assert!(matches!(r, Err(Error::InconsistentData(_))));
    }
}
