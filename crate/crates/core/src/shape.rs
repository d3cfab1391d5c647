//! Shape reconstruction of the next layer from extreme test inclusions.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::condense::{CondensedExterior, Extreme};
use crate::error::{Error, Result};
use crate::geometry::{components, is_admissible, test_family_with, thin, CarveShape, Mesh, Region, TestInclusion};
use crate::forward::ExtremeCoefficient;
use crate::ndmap::{assemble_nd, BoundaryBasis, NdMatrix};
use crate::order::min_eig_difference;
use crate::phantom::PclcCoefficient;

/// How candidate inclusions are generated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeStrategy {
    /// One carved inclusion per probe cell and direction; probes whose
    /// inclusion passes are excluded.
    ProbeFamily,
    /// Start from the thinned parent and repeatedly remove bites at its
    /// boundary while the tests keep passing.
    Peeling,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShapeParams {
    pub strategy: ShapeStrategy,
    pub directions: usize,
    pub carve: CarveShapeParams,
    /// Bite radii as fractions of `tau`, used from first to last.
    pub bite_radii: Vec<f64>,
    /// Components with fewer cells are dropped from the result.
    pub min_component_cells: usize,
    pub output: PeelOutput,
    /// When the passing bites fail jointly, accept them one at a time
    /// instead of moving on to the next radius.
    pub greedy: bool,
}

/// What the peeling strategy reports.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PeelOutput {
    /// Intersection of every passing inclusion that was tried.
    Intersection,
    /// The smallest inclusion reached that still passes.
    LastPassing,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CarveShapeParams {
    pub ball_radius: f64,
    pub channel_width: f64,
}

impl Default for CarveShapeParams {
    fn default() -> Self {
        let c = CarveShape::default();
        Self { ball_radius: c.ball_radius, channel_width: c.channel_width }
    }
}

impl From<CarveShapeParams> for CarveShape {
    fn from(p: CarveShapeParams) -> Self {
        CarveShape { ball_radius: p.ball_radius, channel_width: p.channel_width }
    }
}

impl Default for ShapeParams {
    fn default() -> Self {
        Self {
            strategy: ShapeStrategy::Peeling,
            directions: 4,
            carve: CarveShapeParams::default(),
            bite_radii: vec![0.5, 0.25, 0.125],
            min_component_cells: 3,
            output: PeelOutput::LastPassing,
            greedy: false,
        }
    }
}

/// Loewner margins of a test inclusion: `λ_min(Λ₀ − Λ)` and `λ_min(Λ − Λ_∞)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Margins {
    pub zero: f64,
    pub infinity: f64,
}

impl Margins {
    pub fn passes(&self, delta: f64) -> bool {
        self.zero >= -delta && self.infinity >= -delta
    }

    pub fn worst(&self) -> f64 {
        self.zero.min(self.infinity)
    }
}

/// Precomputed background for a fixed work region. Every inclusion
/// evaluated here is the work region minus a set of "open" cells that
/// keep the background value.
pub struct TestBench<'a> {
    mesh: &'a Mesh,
    background: Vec<f64>,
    data: &'a NdMatrix,
    exterior: CondensedExterior,
}

impl<'a> TestBench<'a> {
    pub fn new(
        gamma_k: &PclcCoefficient,
        work: &Region,
        data: &'a NdMatrix,
        mesh: &'a Mesh,
        basis: &BoundaryBasis,
    ) -> Result<Self> {
        let background = gamma_k.evaluate(mesh, None);
        let exterior = CondensedExterior::new(mesh, &background, work, basis)?;
        Ok(Self { mesh, background, data, exterior })
    }

    /// Margins for the inclusion `work \ open`.
    pub fn margins(&self, open: &[usize]) -> Result<Margins> {
        let bg = &self.background;
        let zero = self.exterior.nd_map(self.mesh, open, |c| bg[c], Extreme::Zero)?;
        let infinity = self.exterior.nd_map(self.mesh, open, |c| bg[c], Extreme::Infinity)?;
        Ok(Margins { zero: min_eig_difference(&zero, self.data)?, infinity: min_eig_difference(self.data, &infinity)? })
    }

    pub fn passes(&self, open: &[usize], delta: f64) -> Result<bool> {
        let bg = &self.background;
        let zero = self.exterior.nd_map(self.mesh, open, |c| bg[c], Extreme::Zero)?;
        if min_eig_difference(&zero, self.data)? < -delta {
            return Ok(false);
        }
        let infinity = self.exterior.nd_map(self.mesh, open, |c| bg[c], Extreme::Infinity)?;
        Ok(min_eig_difference(self.data, &infinity)? >= -delta)
    }
}

/// `Λ₀(γ_k;C) ≥ Λ(γ) ≥ Λ_∞(γ_k;C)` up to `delta`.
pub fn passes_shape_test(
    inclusion: &TestInclusion,
    gamma_k: &PclcCoefficient,
    data: &NdMatrix,
    delta: f64,
    mesh: &Mesh,
    basis: &BoundaryBasis,
) -> Result<bool> {
    check_delta(delta)?;
    let bench = TestBench::new(gamma_k, &inclusion.work, data, mesh, basis)?;
    bench.passes(inclusion.carve.cells(), delta)
}

/// Same test for an arbitrary cell set `C`.
pub fn region_passes(
    region: &Region,
    gamma_k: &PclcCoefficient,
    data: &NdMatrix,
    delta: f64,
    mesh: &Mesh,
    basis: &BoundaryBasis,
) -> Result<bool> {
    check_delta(delta)?;
    if region.is_empty() {
        return background_passes(gamma_k, data, delta, mesh, basis);
    }
    TestBench::new(gamma_k, region, data, mesh, basis)?.passes(&[], delta)
}

/// The test for `C = ∅`, which reduces to `Λ(γ_k) ≈ Λ(γ)` within `delta`.
pub fn background_passes(
    gamma_k: &PclcCoefficient,
    data: &NdMatrix,
    delta: f64,
    mesh: &Mesh,
    basis: &BoundaryBasis,
) -> Result<bool> {
    let model = assemble_nd(&ExtremeCoefficient::regular(gamma_k.evaluate(mesh, None)), basis, mesh)?;
    Ok(min_eig_difference(&model, data)? >= -delta && min_eig_difference(data, &model)? >= -delta)
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta >= 0.0 && delta.is_finite()) {
        return Err(Error::InvalidArgument(format!("delta must be nonnegative, got {delta}")));
    }
    Ok(())
}

/// The region in which the next layer is searched: `Ω` for the first
/// layer, the deepest layer otherwise.
pub fn parent_region(gamma_k: &PclcCoefficient, mesh: &Mesh) -> Region {
    gamma_k.deepest().cloned().unwrap_or_else(|| Region::all(mesh))
}

/// Margins of every member of the carved family, in family order.
///
/// Passing at a given delta is `margins.passes(delta)`, so one evaluation
/// serves any number of tolerances.
pub struct FamilyMargins {
    pub members: Vec<TestInclusion>,
    pub margins: Vec<Margins>,
    pub probes: Region,
}

impl FamilyMargins {
    pub fn compute(
        gamma_k: &PclcCoefficient,
        data: &NdMatrix,
        mesh: &Mesh,
        basis: &BoundaryBasis,
        params: &ShapeParams,
    ) -> Result<Option<Self>> {
        let parent = parent_region(gamma_k, mesh);
        let tau = gamma_k.tau();
        let members = match test_family_with(&parent, tau, mesh, params.directions, params.carve.into()) {
            Ok(m) => m,
            Err(Error::EmptyFamily(_)) => return Ok(None),
            Err(e) => return Err(e),
        };
        let probes = thin(&parent, tau, mesh);
        let Some(first) = members.first() else {
            return Ok(Some(Self { members, margins: Vec::new(), probes }));
        };
        let bench = TestBench::new(gamma_k, &first.work, data, mesh, basis)?;
        let margins = members.par_iter().map(|m| bench.margins(m.carve.cells())).collect::<Result<Vec<_>>>()?;
        Ok(Some(Self { members, margins, probes }))
    }

    /// Probe cells not excluded by a passing member.
    pub fn surviving(&self, delta: f64) -> Region {
        let excluded: Vec<usize> = self
            .members
            .iter()
            .zip(&self.margins)
            .filter(|(_, m)| m.passes(delta))
            .map(|(c, _)| c.probe_cell)
            .collect();
        self.probes.difference(&Region::new(excluded))
    }
}

/// Reconstructs `D_{k+1}` inside the deepest layer of `gamma_k`.
/// An empty result signals that no further layer exists.
pub fn reconstruct_layer(
    gamma_k: &PclcCoefficient,
    data: &NdMatrix,
    mesh: &Mesh,
    basis: &BoundaryBasis,
    delta: f64,
    params: &ShapeParams,
) -> Result<Region> {
    check_delta(delta)?;
    let raw = match params.strategy {
        ShapeStrategy::ProbeFamily => match FamilyMargins::compute(gamma_k, data, mesh, basis, params)? {
            Some(f) => f.surviving(delta),
            None => Region::empty(),
        },
        ShapeStrategy::Peeling => peel(gamma_k, data, mesh, basis, delta, params)?,
    };
    Ok(drop_small_components(&raw, mesh, params.min_component_cells))
}

pub fn drop_small_components(region: &Region, mesh: &Mesh, min_cells: usize) -> Region {
    let kept: Vec<usize> =
        components(region, mesh).into_iter().filter(|c| c.len() >= min_cells).flat_map(|c| c.cells().to_vec()).collect();
    Region::new(kept)
}

/// Cells of `region` with an edge on its boundary.
fn rim(region: &Region, mesh: &Mesh) -> Vec<usize> {
    let mask = region.mask(mesh.n_cells());
    region
        .cells()
        .iter()
        .copied()
        .filter(|&t| mesh.neighbors(t).iter().any(|n| n.map_or(true, |n| !mask[n])))
        .collect()
}

/// Bites of radius `radius` centered on rim cells at least `radius / 2` apart.
fn bites(base: &Region, radius: f64, mesh: &Mesh) -> Vec<Region> {
    let mut centers: Vec<[f64; 2]> = Vec::new();
    let spacing = 0.5 * radius;
    for t in rim(base, mesh) {
        let p = mesh.centroid(t);
        if centers.iter().all(|c| (c[0] - p[0]).hypot(c[1] - p[1]) >= spacing) {
            centers.push(p);
        }
    }
    centers
        .iter()
        .map(|c| {
            let cells = base
                .cells()
                .iter()
                .copied()
                .filter(|&t| {
                    let q = mesh.centroid(t);
                    (q[0] - c[0]).hypot(q[1] - c[1]) <= radius
                })
                .collect();
            Region::new(cells)
        })
        .collect()
}

fn peel(
    gamma_k: &PclcCoefficient,
    data: &NdMatrix,
    mesh: &Mesh,
    basis: &BoundaryBasis,
    delta: f64,
    params: &ShapeParams,
) -> Result<Region> {
    let parent = parent_region(gamma_k, mesh);
    let tau = gamma_k.tau();
    let probes = thin(&parent, tau, mesh);
    let mut base = thin(&parent, tau / 2.0, mesh);
    if base.is_empty() || probes.is_empty() {
        return Ok(Region::empty());
    }
    if background_passes(gamma_k, data, delta, mesh, basis)? {
        return Ok(Region::empty());
    }
    let mut bench = TestBench::new(gamma_k, &base, data, mesh, basis)?;
    if !bench.passes(&[], delta)? {
        // nothing can be excluded: the intersection over passing sets is the whole search region
        return Ok(probes);
    }
    if params.bite_radii.is_empty() || params.bite_radii.iter().any(|r| !(*r > 0.0)) {
        return Err(Error::InvalidArgument("bite radii must be a nonempty list of positive fractions".into()));
    }
    let mut scale = 0;
    let mut excluded = Region::empty();
    loop {
        let radius = params.bite_radii[scale] * tau;
        let candidates: Vec<Region> =
            bites(&base, radius, mesh).into_iter().filter(|b| is_admissible(&base.difference(b), &parent, mesh)).collect();
        let passing: Vec<bool> =
            candidates.par_iter().map(|b| bench.passes(b.cells(), delta)).collect::<Result<Vec<_>>>()?;
        let passed: Vec<&Region> = candidates.iter().zip(&passing).filter(|(_, p)| **p).map(|(b, _)| b).collect();
        for b in &passed {
            excluded = excluded.union(b);
        }
        if passed.is_empty() {
            scale += 1;
            if scale == params.bite_radii.len() {
                break;
            }
            continue;
        }
        let all = passed.iter().fold(Region::empty(), |acc, b| acc.union(b));
        let joint = base.difference(&all);
        let mut next = None;
        if !joint.is_empty() && is_admissible(&joint, &parent, mesh) {
            let trial = TestBench::new(gamma_k, &joint, data, mesh, basis)?;
            if trial.passes(&[], delta)? {
                next = Some((joint, trial));
            }
        }
        if next.is_none() && params.greedy {
            let mut open = Region::empty();
            for b in &passed {
                let trial = open.union(b);
                let rest = base.difference(&trial);
                if !rest.is_empty() && is_admissible(&rest, &parent, mesh) && bench.passes(trial.cells(), delta)? {
                    open = trial;
                }
            }
            let rest = base.difference(&open);
            if !open.is_empty() && !rest.is_empty() {
                let b = TestBench::new(gamma_k, &rest, data, mesh, basis)?;
                next = Some((rest, b));
            }
        }
        match next {
            Some((b, t)) => {
                base = b;
                bench = t;
            }
            None => {
                scale += 1;
                if scale == params.bite_radii.len() {
                    break;
                }
            }
        }
    }
    Ok(match params.output {
        PeelOutput::Intersection => probes.intersection(&base).difference(&excluded),
        PeelOutput::LastPassing => probes.intersection(&base),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::build_disk_mesh;
    use crate::phantom::{simulate_reference, PhantomSpec};

    #[test]
    fn no_deeper_layer_gives_empty_region() {
        // the carved channel must be wider than a cell to reach the outside
        let mesh = build_disk_mesh(1.0, 0.08).unwrap();
        let basis = BoundaryBasis::new(&mesh, 8).unwrap();
        let g = PclcCoefficient::background(1.0, 0.5).unwrap();
        let data = simulate_reference(&g, &mesh, &basis, 0.0, 0).unwrap();
        let delta = 1e-9 * data.norm();
        for strategy in [ShapeStrategy::Peeling, ShapeStrategy::ProbeFamily] {
            let params = ShapeParams { strategy, directions: 4, ..Default::default() };
            let r = reconstruct_layer(&g, &data, &mesh, &basis, delta, &params).unwrap();
            assert!(r.is_empty(), "{strategy:?} left {} cells", r.len());
        }
    }

    #[test]
    fn covering_inclusion_passes_and_cutting_one_fails() {
        let mesh = build_disk_mesh(1.0, 0.08).unwrap();
        let basis = BoundaryBasis::new(&mesh, 8).unwrap();
        let g0 = PclcCoefficient::background(1.0, 0.2).unwrap();
        let truth = PhantomSpec::concentric(1.0, 0.2, &[(0.35, 2.0)]).rasterize(&mesh).unwrap();
        let data = simulate_reference(&truth, &mesh, &basis, 0.0, 0).unwrap();
        let delta = 1e-9 * data.norm();
        let cover = Region::from_predicate(&mesh, |p| p[0].hypot(p[1]) < 0.6);
        assert!(region_passes(&cover, &g0, &data, delta, &mesh, &basis).unwrap());
        let inner = Region::from_predicate(&mesh, |p| p[0].hypot(p[1]) < 0.15);
        assert!(!region_passes(&inner, &g0, &data, delta, &mesh, &basis).unwrap());
    }

    #[test]
    fn negative_delta_is_rejected() {
        let mesh = build_disk_mesh(1.0, 0.2).unwrap();
        let basis = BoundaryBasis::new(&mesh, 4).unwrap();
        let g = PclcCoefficient::background(1.0, 0.3).unwrap();
        let data = simulate_reference(&g, &mesh, &basis, 0.0, 0).unwrap();
        let r = reconstruct_layer(&g, &data, &mesh, &basis, -1.0, &ShapeParams::default());
        assert!(matches!(r, Err(Error::InvalidArgument(_))));
    }
}
