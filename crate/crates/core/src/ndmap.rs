//! Mean-free boundary bases on the measurement boundary and discretized
//! local Neumann-to-Dirichlet maps.

use std::f64::consts::PI;
use std::fmt::Write as _;

use nalgebra::DMatrix;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::forward::{gamma_load, ExtremeCoefficient, ForwardSystem};
use crate::geometry::{Mesh, Point};
use crate::order::spectral_norm;

/// Orthonormal, mean-free piecewise-linear functions on the measurement
/// boundary of one mesh.
#[derive(Clone, Debug)]
pub struct BoundaryBasis {
    pub m: usize,
    /// Measurement-boundary vertex ids in boundary order.
    pub nodes: Vec<usize>,
    pub closed: bool,
    /// `nodes.len() × m` nodal values.
    pub functions: DMatrix<f64>,
    pub gram_tol: f64,
    pub id: String,
}

fn chain_edges(nodes: &[usize], closed: bool) -> Vec<(usize, usize)> {
    let n = nodes.len();
    let count = if closed { n } else { n - 1 };
    (0..count).map(|i| (i, (i + 1) % n)).collect()
}

/// Mass matrix of the chain (local node numbering), applied to a vector.
fn chain_mass_apply(points: &[Point], edges: &[(usize, usize)], x: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; x.len()];
    for &(a, b) in edges {
        let len = (points[a][0] - points[b][0]).hypot(points[a][1] - points[b][1]);
        y[a] += len / 6.0 * (2.0 * x[a] + x[b]);
        y[b] += len / 6.0 * (x[a] + 2.0 * x[b]);
    }
    y
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Removes the mean and orthonormalizes columns in the chain's L² inner
/// product; returns `None` when a column becomes numerically dependent.
fn mass_orthonormalize(points: &[Point], edges: &[(usize, usize)], cols: &mut [Vec<f64>]) -> Option<()> {
    let ones = vec![1.0; points.len()];
    let w = chain_mass_apply(points, edges, &ones);
    let total = dot(&w, &ones);
    for j in 0..cols.len() {
        let initial = dot(&chain_mass_apply(points, edges, &cols[j]), &cols[j]).sqrt();
        for _pass in 0..2 {
            let mean = dot(&w, &cols[j]) / total;
            cols[j].iter_mut().for_each(|x| *x -= mean);
            for i in 0..j {
                let mi = chain_mass_apply(points, edges, &cols[i]);
                let c = dot(&mi, &cols[j]);
                let (head, tail) = cols.split_at_mut(j);
                tail[0].iter_mut().zip(&head[i]).for_each(|(x, y)| *x -= c * y);
            }
        }
        let norm = dot(&chain_mass_apply(points, edges, &cols[j]), &cols[j]).sqrt();
        if !(norm > 1e-8 * initial.max(f64::MIN_POSITIVE)) {
            return None;
        }
        cols[j].iter_mut().for_each(|x| *x /= norm);
    }
    Some(())
}

impl BoundaryBasis {
    /// Trigonometric profiles in the normalized arc parameter of the
    /// measurement boundary: `cos`, `sin` pairs of increasing frequency on a
    /// closed loop, half-period cosines `cos(kπξ)` on an arc.
    pub fn new(mesh: &Mesh, m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidArgument("basis size must be at least 1".into()));
        }
        let chain = mesh.gamma_chain()?;
        let edges = chain_edges(&chain.nodes, chain.closed);
        if edges.len() < m + 1 {
            return Err(Error::InvalidArgument(format!(
                "measurement boundary has {} edges, at least {} needed for m = {m}",
                edges.len(),
                m + 1
            )));
        }
        let points: Vec<Point> = chain.nodes.iter().map(|&v| mesh.vertices()[v]).collect();
        let mut cols: Vec<Vec<f64>> = (0..m)
            .map(|j| {
                chain
                    .xi
                    .iter()
                    .map(|&x| {
                        if chain.closed {
                            let k = (j / 2 + 1) as f64;
                            if j % 2 == 0 {
                                (2.0 * PI * k * x).cos()
                            } else {
                                (2.0 * PI * k * x).sin()
                            }
                        } else {
                            ((j + 1) as f64 * PI * x).cos()
                        }
                    })
                    .collect()
            })
            .collect();
        mass_orthonormalize(&points, &edges, &mut cols).ok_or_else(|| {
            Error::InvalidArgument(format!("m = {m} is too large for the boundary resolution"))
        })?;
        let n = chain.nodes.len();
        let functions = DMatrix::from_fn(n, m, |i, j| cols[j][i]);
        let id = basis_id(&points, &functions, chain.closed);
        let basis = Self { m, nodes: chain.nodes, closed: chain.closed, functions, gram_tol: 1e-8, id };
        basis.check(mesh)?;
        Ok(basis)
    }

    fn points(&self, mesh: &Mesh) -> Vec<Point> {
        self.nodes.iter().map(|&v| mesh.vertices()[v]).collect()
    }

    pub fn gram(&self, mesh: &Mesh) -> DMatrix<f64> {
        let pts = self.points(mesh);
        let edges = chain_edges(&self.nodes, self.closed);
        let mf: Vec<Vec<f64>> = (0..self.m)
            .map(|j| chain_mass_apply(&pts, &edges, self.functions.column(j).as_slice()))
            .collect();
        DMatrix::from_fn(self.m, self.m, |i, j| dot(&mf[j], self.functions.column(i).as_slice()))
    }

    /// `⟨f_j, 1⟩` for every basis function.
    pub fn means(&self, mesh: &Mesh) -> Vec<f64> {
        let pts = self.points(mesh);
        let edges = chain_edges(&self.nodes, self.closed);
        let w = chain_mass_apply(&pts, &edges, &vec![1.0; pts.len()]);
        (0..self.m).map(|j| dot(&w, self.functions.column(j).as_slice())).collect()
    }

    fn check(&self, mesh: &Mesh) -> Result<()> {
        let gram = self.gram(mesh);
        let err = (gram - DMatrix::identity(self.m, self.m)).abs().max();
        if err > self.gram_tol {
            return Err(Error::InvalidArgument(format!("basis Gram matrix deviates from identity by {err:e}")));
        }
        if let Some(mean) = self.means(mesh).into_iter().find(|m| m.abs() > 1e-10) {
            return Err(Error::InvalidArgument(format!("basis function has mean {mean:e}")));
        }
        Ok(())
    }

    /// Basis functions as full vertex vectors (zero off the boundary),
    /// one vector per function.
    pub fn vertex_functions(&self, mesh: &Mesh) -> Vec<Vec<f64>> {
        (0..self.m)
            .map(|j| {
                let mut f = vec![0.0; mesh.n_vertices()];
                for (i, &v) in self.nodes.iter().enumerate() {
                    f[v] = self.functions[(i, j)];
                }
                f
            })
            .collect()
    }

    /// Carries the functions over to another mesh of the same domain:
    /// every measurement-boundary node of `target` is projected onto this
    /// basis' boundary polyline and the piecewise-linear functions are
    /// interpolated there, then the mean is removed in `target`'s boundary
    /// inner product. Exact for nested refinements.
    pub fn transfer(&self, source: &Mesh, target: &Mesh) -> Result<Vec<Vec<f64>>> {
        let src_pts = self.points(source);
        let src_edges = chain_edges(&self.nodes, self.closed);
        let chain = target.gamma_chain()?;
        let scale = source.h();
        let mut out = vec![vec![0.0; target.n_vertices()]; self.m];
        for &v in &chain.nodes {
            let p = target.vertices()[v];
            let mut best = (f64::INFINITY, 0usize, 0.0);
            for (e, &(a, b)) in src_edges.iter().enumerate() {
                let (pa, pb) = (src_pts[a], src_pts[b]);
                let (dx, dy) = (pb[0] - pa[0], pb[1] - pa[1]);
                let s = (((p[0] - pa[0]) * dx + (p[1] - pa[1]) * dy) / (dx * dx + dy * dy)).clamp(0.0, 1.0);
                let d = (pa[0] + s * dx - p[0]).hypot(pa[1] + s * dy - p[1]);
                if d < best.0 {
                    best = (d, e, s);
                }
            }
            if best.0 > scale {
                return Err(Error::InvalidArgument(format!(
                    "boundary node {v} of the target mesh is {:e} away from the basis boundary",
                    best.0
                )));
            }
            let (a, b) = src_edges[best.1];
            for j in 0..self.m {
                out[j][v] = (1.0 - best.2) * self.functions[(a, j)] + best.2 * self.functions[(b, j)];
            }
        }
        let ones = vec![1.0; target.n_vertices()];
        let w = gamma_load(target, &ones);
        let total = dot(&w, &ones);
        let on_gamma: Vec<bool> = (0..target.n_vertices()).map(|v| target.is_gamma_vertex(v)).collect();
        for f in &mut out {
            let mean = dot(&w, f) / total;
            for (x, &g) in f.iter_mut().zip(&on_gamma) {
                if g {
                    *x -= mean;
                }
            }
        }
        Ok(out)
    }
}

fn basis_id(points: &[Point], functions: &DMatrix<f64>, closed: bool) -> String {
    let mut h = Sha256::new();
    h.update([closed as u8]);
    for p in points {
        h.update(p[0].to_le_bytes());
        h.update(p[1].to_le_bytes());
    }
    for x in functions.iter() {
        h.update(x.to_le_bytes());
    }
    let digest = h.finalize();
    let hex: String = digest.iter().take(8).map(|b| format!("{b:02x}")).collect();
    format!("gamma-m{}-n{}-{}", functions.ncols(), points.len(), hex)
}

/// Symmetric matrix of a local ND map on a fixed boundary basis:
/// `entries[(i, j)] = ⟨Λ f_j, f_i⟩`.
#[derive(Clone, Debug, PartialEq)]
pub struct NdMatrix {
    pub entries: DMatrix<f64>,
    pub basis_id: String,
    pub meta: String,
}

impl NdMatrix {
    pub fn m(&self) -> usize {
        self.entries.nrows()
    }

    pub fn norm(&self) -> f64 {
        spectral_norm(&self.entries)
    }

    /// `ndmap v1 <m>`, the basis id, then `m` rows at 17 significant digits.
    pub fn to_text(&self) -> String {
        let m = self.m();
        let mut s = String::new();
        writeln!(s, "ndmap v1 {m}").unwrap();
        writeln!(s, "{}", self.basis_id).unwrap();
        for i in 0..m {
            let row: Vec<String> = (0..m).map(|j| format!("{:.16e}", self.entries[(i, j)])).collect();
            writeln!(s, "{}", row.join(" ")).unwrap();
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| Error::Parse("empty ndmap file".into()))?;
        let f: Vec<&str> = header.split_whitespace().collect();
        if f.len() != 3 || f[0] != "ndmap" || f[1] != "v1" {
            return Err(Error::Parse(format!("bad ndmap header `{header}`")));
        }
        let m: usize = f[2].parse().map_err(|_| Error::Parse(format!("bad ndmap size `{}`", f[2])))?;
        let basis_id = lines
            .next()
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .ok_or_else(|| Error::Parse("missing basis id line".into()))?
            .to_string();
        let mut entries = DMatrix::zeros(m, m);
        for i in 0..m {
            let line = lines.next().ok_or_else(|| Error::Parse(format!("ndmap truncated at row {i} of {m}")))?;
            let row: Vec<f64> = line
                .split_whitespace()
                .map(|x| x.parse().map_err(|_| Error::Parse(format!("bad number `{x}` in row {i}"))))
                .collect::<Result<_>>()?;
            if row.len() != m {
                return Err(Error::Parse(format!("row {i} has {} entries, expected {m}", row.len())));
            }
            for (j, v) in row.into_iter().enumerate() {
                entries[(i, j)] = v;
            }
        }
        Ok(Self { entries, basis_id, meta: String::new() })
    }
}

/// ND matrix for boundary data given as vertex vectors on `mesh`, checked
/// for symmetry and then symmetrized.
pub fn assemble_nd_functions(
    sigma: &ExtremeCoefficient,
    functions: &[Vec<f64>],
    mesh: &Mesh,
    basis_id: &str,
) -> Result<NdMatrix> {
    let system = ForwardSystem::new(sigma, mesh)?;
    let loads: Vec<Vec<f64>> = functions.iter().map(|f| gamma_load(mesh, f)).collect();
    let traces: Vec<Vec<f64>> = loads
        .par_iter()
        .map(|b| system.solve_load(b).map(|u| u.nodal_values))
        .collect::<Result<_>>()?;
    let m = functions.len();
    let a = DMatrix::from_fn(m, m, |i, j| {
        loads[i].iter().zip(&traces[j]).filter(|(l, _)| **l != 0.0).map(|(l, u)| l * u).sum::<f64>()
    });
    symmetrized(a, basis_id)
}

pub(crate) fn symmetrized(a: DMatrix<f64>, basis_id: &str) -> Result<NdMatrix> {
    let norm = spectral_norm(&a);
    let asym = (&a - a.transpose()).abs().max();
    if asym > 1e-10 * norm.max(f64::MIN_POSITIVE) {
        return Err(Error::Solver(format!("ND matrix asymmetry {asym:e} exceeds 1e-10 of its norm {norm:e}")));
    }
    let entries = (&a + a.transpose()) * 0.5;
    Ok(NdMatrix { entries, basis_id: basis_id.to_string(), meta: String::new() })
}

/// `A[i][j] = ⟨u_j|_Γ, f_i⟩` with `u_j` the potential for datum `f_j`.
pub fn assemble_nd(sigma: &ExtremeCoefficient, basis: &BoundaryBasis, mesh: &Mesh) -> Result<NdMatrix> {
    assemble_nd_functions(sigma, &basis.vertex_functions(mesh), mesh, &basis.id)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::build_disk_mesh;

    #[test]
    fn full_circle_basis_spans_low_harmonics() {
        let mesh = build_disk_mesh(1.0, 0.1).unwrap();
        let basis = BoundaryBasis::new(&mesh, 4).unwrap();
        let gram = basis.gram(&mesh);
        assert!((gram - DMatrix::identity(4, 4)).abs().max() < 1e-8);
        // cos θ, sin θ, cos 2θ, sin 2θ lie in the span at the nodes
        let f = &basis.functions;
        let proj = f * (f.transpose() * f).try_inverse().unwrap() * f.transpose();
        for k in 0..4 {
            let n = (k / 2 + 1) as f64;
            let g = DMatrix::from_fn(basis.nodes.len(), 1, |i, _| {
                let p = mesh.vertices()[basis.nodes[i]];
                let a = p[1].atan2(p[0]);
                if k % 2 == 0 {
                    (n * a).cos()
                } else {
                    (n * a).sin()
                }
            });
            assert!((&proj * &g - &g).abs().max() < 1e-10);
        }
    }

    #[test]
    fn half_arc_basis_is_orthonormal_and_mean_free() {
        let mesh = build_disk_mesh(1.0, 0.05).unwrap().with_gamma_arc(0.0, PI).unwrap();
        let basis = BoundaryBasis::new(&mesh, 8).unwrap();
        assert!(!basis.closed);
        assert!((basis.gram(&mesh) - DMatrix::identity(8, 8)).abs().max() < 1e-8);
        assert!(basis.means(&mesh).iter().all(|m| m.abs() <= 1e-10));
    }

    #[test]
    fn too_many_functions() {
        let mesh = build_disk_mesh(1.0, 0.5).unwrap();
        let edges = mesh.boundary_edges().len();
        assert!(BoundaryBasis::new(&mesh, edges).is_err());
        assert!(BoundaryBasis::new(&mesh, 0).is_err());
    }

    #[test]
    fn ndmap_text_round_trip_and_truncation() {
        let nd = NdMatrix {
            entries: DMatrix::from_fn(3, 3, |i, j| 1.0 / (1.0 + i as f64 + j as f64) + 1e-17),
            basis_id: "gamma-test".into(),
            meta: String::new(),
        };
        let text = nd.to_text();
        assert_eq!(NdMatrix::from_text(&text).unwrap(), nd);
        let truncated: String = text.lines().take(3).collect::<Vec<_>>().join("\n");
        assert!(matches!(NdMatrix::from_text(&truncated), Err(Error::Parse(_))));
    }

    #[test]
    fn scaling_of_constant_conductivity() {
        let mesh = build_disk_mesh(1.0, 0.1).unwrap();
        let basis = BoundaryBasis::new(&mesh, 6).unwrap();
        let a1 = assemble_nd(&ExtremeCoefficient::constant(1.0, &mesh), &basis, &mesh).unwrap();
        let a2 = assemble_nd(&ExtremeCoefficient::constant(2.0, &mesh), &basis, &mesh).unwrap();
        let diff = (&a1.entries - &a2.entries * 2.0).abs().max();
        assert!(diff <= 1e-12 * a1.norm());
    }
}
