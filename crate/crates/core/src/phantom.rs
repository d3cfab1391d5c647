//! Piecewise constant layered coefficients, phantom specifications and
//! synthetic measurement data.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{components, thin, CellIndex, Mesh, Point, Region};
use crate::ndmap::{assemble_nd, assemble_nd_functions, BoundaryBasis, NdMatrix};
use crate::forward::ExtremeCoefficient;
use crate::order::spectral_norm;

/// One layer: its cell set and one offset per edge-connected component,
/// components ordered as returned by [`components`].
#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    pub region: Region,
    pub offsets: Vec<f64>,
}

/// A validated piecewise constant layered coefficient on a fixed mesh.
#[derive(Clone, Debug, PartialEq)]
pub struct PclcCoefficient {
    c0: f64,
    tau: f64,
    layers: Vec<Layer>,
}

impl PclcCoefficient {
    /// The background coefficient `γ₀ ≡ c0` with no layers.
    pub fn background(c0: f64, tau: f64) -> Result<Self> {
        if !(c0 > 0.0 && c0.is_finite()) {
            return Err(Error::Pclc(format!("background conductivity must be positive, got {c0}")));
        }
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::Pclc(format!("layer thickness must be positive, got {tau}")));
        }
        Ok(Self { c0, tau, layers: Vec::new() })
    }

    /// Checks every structural invariant and returns the coefficient.
    pub fn new(c0: f64, tau: f64, layers: Vec<Layer>, mesh: &Mesh) -> Result<Self> {
        let mut gamma = Self::background(c0, tau)?;
        for layer in layers {
            gamma = gamma.with_layer(layer, mesh)?;
        }
        Ok(gamma)
    }

    /// Appends a deeper layer after checking nesting, offsets and positivity.
    pub fn with_layer(&self, layer: Layer, mesh: &Mesh) -> Result<Self> {
        let j = self.layers.len() + 1;
        if layer.region.is_empty() {
            return Err(Error::Pclc(format!("layer {j} is empty")));
        }
        if let Some(&c) = layer.region.cells().last() {
            if c >= mesh.n_cells() {
                return Err(Error::Pclc(format!("layer {j} references cell {c} outside the mesh")));
            }
        }
        let comps = components(&layer.region, mesh);
        if comps.len() != layer.offsets.len() {
            return Err(Error::Pclc(format!(
                "layer {j} has {} components but {} offsets",
                comps.len(),
                layer.offsets.len()
            )));
        }
        if let Some((n, v)) = layer.offsets.iter().enumerate().find(|(_, v)| !(**v != 0.0 && v.is_finite())) {
            return Err(Error::Pclc(format!("offset {v} of component {} in layer {j} must be a nonzero real", n + 1)));
        }
        match self.layers.last() {
            None => {
                let tris = mesh.triangles();
                if let Some(&c) = layer.region.cells().iter().find(|&&c| tris[c].iter().any(|&v| mesh.is_boundary_vertex(v))) {
                    return Err(Error::Pclc(format!("layer 1 cell {c} touches the domain boundary")));
                }
            }
            Some(parent) => {
                let core = thin(&parent.region, self.tau, mesh);
                if let Some(&c) = layer.region.cells().iter().find(|&&c| !core.contains(c)) {
                    return Err(Error::Pclc(format!(
                        "layer {j} is not nested in the {}-thinning of layer {} (cell {c})",
                        self.tau,
                        j - 1
                    )));
                }
            }
        }
        let mut out = self.clone();
        out.layers.push(layer);
        let values = out.evaluate(mesh, None);
        if let Some((c, v)) = out.layers[j - 1].region.cells().iter().map(|&c| (c, values[c])).find(|(_, v)| *v <= 0.0) {
            return Err(Error::Pclc(format!("conductivity {v} in cell {c} is not positive")));
        }
        Ok(out)
    }

    pub fn c0(&self) -> f64 {
        self.c0
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn n_layers(&self) -> usize {
        self.layers.len()
    }

    /// Deepest layer region, or `None` for the background coefficient.
    pub fn deepest(&self) -> Option<&Region> {
        self.layers.last().map(|l| &l.region)
    }

    /// Keeps the first `k` layers.
    pub fn truncated(&self, k: usize) -> Self {
        Self { c0: self.c0, tau: self.tau, layers: self.layers[..k.min(self.layers.len())].to_vec() }
    }

    /// Cell values of the truncation to `k` layers (`None` = all layers).
    pub fn evaluate(&self, mesh: &Mesh, k: Option<usize>) -> Vec<f64> {
        let k = k.unwrap_or(self.layers.len()).min(self.layers.len());
        let mut values = vec![self.c0; mesh.n_cells()];
        for layer in &self.layers[..k] {
            for (comp, &offset) in components(&layer.region, mesh).iter().zip(&layer.offsets) {
                for &c in comp.cells() {
                    values[c] += offset;
                }
            }
        }
        values
    }
}

/// Geometric primitive of a phantom specification.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Shape {
    Disk { center: Point, radius: f64 },
    Rectangle { min: Point, max: Point },
    Union { parts: Vec<Shape> },
}

impl Shape {
    pub fn contains(&self, p: Point) -> bool {
        match self {
            Shape::Disk { center, radius } => (p[0] - center[0]).hypot(p[1] - center[1]) < *radius,
            Shape::Rectangle { min, max } => p[0] > min[0] && p[0] < max[0] && p[1] > min[1] && p[1] < max[1],
            Shape::Union { parts } => parts.iter().any(|s| s.contains(p)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub shapes: Vec<Shape>,
    /// One offset per component in rasterized component order; a single
    /// value applies to every component.
    pub offsets: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhantomSpec {
    pub c0: f64,
    pub tau: f64,
    pub layers: Vec<LayerSpec>,
}

impl PhantomSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("phantom spec: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("phantom spec serializes")
    }

    /// Concentric disks centered at the origin, outermost first.
    pub fn concentric(c0: f64, tau: f64, disks: &[(f64, f64)]) -> Self {
        let layers = disks
            .iter()
            .map(|&(radius, offset)| LayerSpec {
                shapes: vec![Shape::Disk { center: [0.0, 0.0], radius }],
                offsets: vec![offset],
            })
            .collect();
        Self { c0, tau, layers }
    }

    /// Rasterizes the primitives at cell centroids and validates the result.
    pub fn rasterize(&self, mesh: &Mesh) -> Result<PclcCoefficient> {
        let mut layers = Vec::with_capacity(self.layers.len());
        for (j, spec) in self.layers.iter().enumerate() {
            let region = Region::from_predicate(mesh, |p| spec.shapes.iter().any(|s| s.contains(p)));
            let n = components(&region, mesh).len();
            let offsets = match spec.offsets.len() {
                1 => vec![spec.offsets[0]; n],
                k if k == n => spec.offsets.clone(),
                k => {
                    return Err(Error::Pclc(format!(
                        "layer {} rasterizes to {n} components but lists {k} offsets",
                        j + 1
                    )))
                }
            };
            layers.push(Layer { region, offsets });
        }
        PclcCoefficient::new(self.c0, self.tau, layers, mesh)
    }
}

/// Alias: validated coefficient from a specification.
pub fn make_pclc(spec: &PhantomSpec, mesh: &Mesh) -> Result<PclcCoefficient> {
    spec.rasterize(mesh)
}

/// Adds `eps·‖A‖₂·(S+Sᵀ)/‖S+Sᵀ‖₂` with `S` standard normal from `seed`.
pub fn add_noise(data: &NdMatrix, noise_eps: f64, seed: u64) -> Result<NdMatrix> {
    if !(noise_eps >= 0.0 && noise_eps.is_finite()) {
        return Err(Error::InvalidArgument(format!("noise level must be nonnegative, got {noise_eps}")));
    }
    if noise_eps == 0.0 {
        return Ok(data.clone());
    }
    let m = data.m();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let s = DMatrix::<f64>::from_fn(m, m, |_, _| StandardNormal.sample(&mut rng));
    let sym = &s + s.transpose();
    let scale = noise_eps * data.norm() / spectral_norm(&sym);
    let mut out = data.clone();
    out.entries += sym * scale;
    out.meta = format!("{} noise_eps={noise_eps:e} seed={seed}", data.meta).trim().to_string();
    Ok(out)
}

/// ND data of `gamma` (given on `recon_mesh`) simulated on `sim_mesh`, in
/// the reconstruction basis.
///
/// `sim_mesh` must resolve at least twice as finely as `recon_mesh` and
/// share its measurement boundary. Each simulation cell takes the value of
/// the reconstruction cell containing its centroid, which is exact for a
/// nested refinement.
pub fn simulate_data(
    gamma: &PclcCoefficient,
    sim_mesh: &Mesh,
    recon_mesh: &Mesh,
    recon_basis: &BoundaryBasis,
    noise_eps: f64,
    seed: u64,
) -> Result<NdMatrix> {
    if sim_mesh.h() > 0.5 * recon_mesh.h() * (1.0 + 1e-9) {
        return Err(Error::InvalidArgument(format!(
            "simulation mesh size {} exceeds half the reconstruction mesh size {}",
            sim_mesh.h(),
            recon_mesh.h()
        )));
    }
    let functions = recon_basis.transfer(recon_mesh, sim_mesh)?;
    let coarse = gamma.evaluate(recon_mesh, None);
    let values = lift_cells(recon_mesh, sim_mesh)?.into_iter().map(|t| coarse[t]).collect();
    let mut exact = assemble_nd_functions(&ExtremeCoefficient::regular(values), &functions, sim_mesh, &recon_basis.id)?;
    exact.meta = format!("simulated h_sim={:e}", sim_mesh.h());
    add_noise(&exact, noise_eps, seed)
}

/// For every cell of `fine`, the cell of `coarse` containing its centroid.
pub fn lift_cells(coarse: &Mesh, fine: &Mesh) -> Result<Vec<usize>> {
    let index = CellIndex::new(coarse);
    fine.centroids()
        .iter()
        .enumerate()
        .map(|(t, &p)| {
            coarse.locate(p, &index).ok_or_else(|| {
                Error::InvalidArgument(format!("simulation cell {t} lies outside the reconstruction mesh"))
            })
        })
        .collect()
}

/// Data computed on the reconstruction mesh itself (inverse crime).
pub fn simulate_reference(
    gamma: &PclcCoefficient,
    mesh: &Mesh,
    basis: &BoundaryBasis,
    noise_eps: f64,
    seed: u64,
) -> Result<NdMatrix> {
    let sigma = ExtremeCoefficient::regular(gamma.evaluate(mesh, None));
    add_noise(&assemble_nd(&sigma, basis, mesh)?, noise_eps, seed)
}
