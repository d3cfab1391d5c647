//! Piecewise-linear Galerkin solver for the partial-data conductivity
//! problem, including perfectly insulating and perfectly conducting cells.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::geometry::{Mesh, Region};
use crate::sparse::{CsrMatrix, EnvelopeCholesky, TripletBuilder};

/// Per-cell conductivity with optional insulating (`zero_set`) and perfectly
/// conducting (`inf_set`) parts.
#[derive(Clone, Debug, PartialEq)]
pub struct ExtremeCoefficient {
    pub base: Vec<f64>,
    pub zero_set: Region,
    pub inf_set: Region,
}

impl ExtremeCoefficient {
    pub fn regular(base: Vec<f64>) -> Self {
        Self { base, zero_set: Region::empty(), inf_set: Region::empty() }
    }

    pub fn constant(value: f64, mesh: &Mesh) -> Self {
        Self::regular(vec![value; mesh.n_cells()])
    }

    pub fn has_extremes(&self) -> bool {
        !self.zero_set.is_empty() || !self.inf_set.is_empty()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { base: self.base.iter().map(|b| b * c).collect(), ..self.clone() }
    }

    pub fn validate(&self, mesh: &Mesh) -> Result<()> {
        if self.base.len() != mesh.n_cells() {
            return Err(Error::InvalidCoefficient(format!(
                "{} values for {} cells",
                self.base.len(),
                mesh.n_cells()
            )));
        }
        if !self.zero_set.is_disjoint(&self.inf_set) {
            return Err(Error::InvalidCoefficient("zero and infinity sets overlap".into()));
        }
        for set in [&self.zero_set, &self.inf_set] {
            if let Some(&c) = set.cells().iter().find(|&&c| c >= mesh.n_cells()) {
                return Err(Error::InvalidCoefficient(format!("extreme cell {c} out of range")));
            }
            if let Some(&c) = set.cells().iter().find(|&&c| mesh.touches_gamma(c)) {
                return Err(Error::InvalidCoefficient(format!(
                    "extreme cell {c} touches the measurement boundary"
                )));
            }
        }
        let zero = self.zero_set.mask(mesh.n_cells());
        let inf = self.inf_set.mask(mesh.n_cells());
        for (t, &b) in self.base.iter().enumerate() {
            if !zero[t] && !inf[t] && !(b > 0.0 && b.is_finite()) {
                return Err(Error::InvalidCoefficient(format!("conductivity {b} in cell {t} is not positive")));
            }
        }
        Ok(())
    }
}

/// Nodal potential. Vertices without an equation (interior of the
/// insulating set, floating islands) carry `NaN`.
#[derive(Clone, Debug)]
pub struct Potential {
    pub nodal_values: Vec<f64>,
    pub gamma_mean: f64,
}

impl Potential {
    pub fn trace(&self, nodes: &[usize]) -> Vec<f64> {
        nodes.iter().map(|&v| self.nodal_values[v]).collect()
    }
}

/// P1 element stiffness for unit conductivity.
pub fn element_stiffness(mesh: &Mesh, cell: usize) -> [[f64; 3]; 3] {
    let t = mesh.triangles()[cell];
    let p = t.map(|v| mesh.vertices()[v]);
    let area = mesh.area(cell);
    let mut g = [[0.0; 2]; 3];
    for i in 0..3 {
        let (j, k) = ((i + 1) % 3, (i + 2) % 3);
        g[i] = [(p[j][1] - p[k][1]) / (2.0 * area), (p[k][0] - p[j][0]) / (2.0 * area)];
    }
    let mut ke = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            ke[i][j] = area * (g[i][0] * g[j][0] + g[i][1] * g[j][1]);
        }
    }
    ke
}

/// Boundary load `∫_Γ f φ_v` for a piecewise-linear density given by its
/// nodal values (entries off the measurement boundary are ignored).
pub fn gamma_load(mesh: &Mesh, density: &[f64]) -> Vec<f64> {
    let mut b = vec![0.0; mesh.n_vertices()];
    for (e, edge) in mesh.boundary_edges().iter().enumerate() {
        if !mesh.gamma_mask()[e] {
            continue;
        }
        let [u, v] = edge.vertices;
        let (p, q) = (mesh.vertices()[u], mesh.vertices()[v]);
        let len = (p[0] - q[0]).hypot(p[1] - q[1]);
        b[u] += len / 6.0 * (2.0 * density[u] + density[v]);
        b[v] += len / 6.0 * (density[u] + 2.0 * density[v]);
    }
    b
}

/// `∫_Γ a b` for nodal traces.
pub fn gamma_inner(mesh: &Mesh, a: &[f64], b: &[f64]) -> f64 {
    gamma_load(mesh, a).iter().zip(b).filter(|(l, _)| **l != 0.0).map(|(l, x)| l * x).sum()
}

/// `r = b − A u` with each row accumulated in double-double arithmetic, so
/// that iterative refinement recovers full accuracy at high contrast.
fn compensated_residual(a: &CsrMatrix, u: &[f64], b: &[f64], r: &mut [f64]) {
    for (i, ri) in r.iter_mut().enumerate() {
        let (mut hi, mut lo) = (b[i], 0.0);
        for (j, v) in a.row(i) {
            let p = -v * u[j];
            let e = (-v).mul_add(u[j], -p);
            let s = hi + p;
            let bp = s - hi;
            lo += (hi - (s - bp)) + (p - bp) + e;
            hi = s;
        }
        *ri = hi + lo;
    }
}

/// Assembled, factorized system for one coefficient; reused for every
/// boundary datum.
pub struct ForwardSystem {
    dof: Vec<Option<usize>>,
    stiffness: CsrMatrix,
    /// Largest absolute row sum of `stiffness`.
    stiffness_norm: f64,
    factor: EnvelopeCholesky,
    ground: usize,
    gamma_weight: Vec<f64>,
}

pub(crate) struct UnionFind(pub(crate) Vec<usize>);

impl UnionFind {
    pub(crate) fn new(n: usize) -> Self {
        Self((0..n).collect())
    }
    pub(crate) fn find(&mut self, mut x: usize) -> usize {
        while self.0[x] != x {
            self.0[x] = self.0[self.0[x]];
            x = self.0[x];
        }
        x
    }
    pub(crate) fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra.max(rb)] = ra.min(rb);
        }
    }
}

impl ForwardSystem {
    pub fn new(sigma: &ExtremeCoefficient, mesh: &Mesh) -> Result<Self> {
        sigma.validate(mesh)?;
        let (nv, nc) = (mesh.n_vertices(), mesh.n_cells());
        let zero = sigma.zero_set.mask(nc);
        let inf = sigma.inf_set.mask(nc);
        let tris = mesh.triangles();

        // vertices of each perfectly conducting component share one unknown
        let mut uf = UnionFind((0..nv).collect());
        let mut active = vec![false; nv];
        for t in 0..nc {
            if zero[t] {
                continue;
            }
            for &v in &tris[t] {
                active[v] = true;
            }
            if inf[t] {
                uf.union(tris[t][0], tris[t][1]);
                uf.union(tris[t][0], tris[t][2]);
            }
        }
        let mut dof = vec![None; nv];
        let mut root_dof = vec![None; nv];
        let mut n = 0usize;
        for v in 0..nv {
            if !active[v] {
                continue;
            }
            let r = uf.find(v);
            let d = *root_dof[r].get_or_insert_with(|| {
                n += 1;
                n - 1
            });
            dof[v] = Some(d);
        }

        // keep only the part connected to the measurement boundary
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
        for t in 0..nc {
            if zero[t] || inf[t] {
                continue;
            }
            let d = tris[t].map(|v| dof[v].unwrap());
            for i in 0..3 {
                for j in 0..3 {
                    if d[i] != d[j] {
                        adj[d[i]].push(d[j]);
                    }
                }
            }
        }
        let mut comp = vec![usize::MAX; n];
        let mut gamma_comps = Vec::new();
        for v in (0..nv).filter(|&v| mesh.is_gamma_vertex(v)) {
            let s = dof[v].expect("measurement boundary vertices are always active");
            if comp[s] != usize::MAX {
                continue;
            }
            let id = gamma_comps.len();
            gamma_comps.push(s);
            comp[s] = id;
            let mut q = VecDeque::from([s]);
            while let Some(a) = q.pop_front() {
                for &b in &adj[a] {
                    if comp[b] == usize::MAX {
                        comp[b] = id;
                        q.push_back(b);
                    }
                }
            }
        }
        if gamma_comps.len() != 1 {
            return Err(Error::Solver(format!(
                "measurement boundary split into {} disconnected parts",
                gamma_comps.len()
            )));
        }
        let mut renum = vec![usize::MAX; n];
        let mut m = 0;
        for d in 0..n {
            if comp[d] == 0 {
                renum[d] = m;
                m += 1;
            }
        }
        for v in 0..nv {
            dof[v] = dof[v].and_then(|d| (renum[d] != usize::MAX).then_some(renum[d]));
        }
        let ground = gamma_comps[0];
        let ground = renum[ground];

        let mut full = TripletBuilder::new(m);
        let mut grounded = TripletBuilder::new(m);
        for t in 0..nc {
            if zero[t] || inf[t] {
                continue;
            }
            let Some(d0) = dof[tris[t][0]] else { continue };
            let d = [d0, dof[tris[t][1]].unwrap(), dof[tris[t][2]].unwrap()];
            let ke = element_stiffness(mesh, t);
            let s = sigma.base[t];
            for i in 0..3 {
                for j in 0..3 {
                    let v = s * ke[i][j];
                    full.add(d[i], d[j], v);
                    if d[i] != ground && d[j] != ground {
                        grounded.add(d[i], d[j], v);
                    }
                }
            }
        }
        grounded.add(ground, ground, 1.0);
        let stiffness = full.build();
        let stiffness_norm =
            (0..stiffness.n()).map(|i| stiffness.row(i).map(|(_, v)| v.abs()).sum::<f64>()).fold(0.0, f64::max);
        let factor = EnvelopeCholesky::factor(&grounded.build())?;

        let ones = vec![1.0; nv];
        let w = gamma_load(mesh, &ones);
        let mut gamma_weight = vec![0.0; m];
        for v in 0..nv {
            if let Some(d) = dof[v] {
                gamma_weight[d] += w[v];
            }
        }
        Ok(Self { dof, stiffness, stiffness_norm, factor, ground, gamma_weight })
    }

    pub fn n_dofs(&self) -> usize {
        self.stiffness.n()
    }

    /// Solves for a vertex load vector (`∫_Γ f φ_v`), returning the
    /// potential with zero mean on the measurement boundary.
    pub fn solve_load(&self, load: &[f64]) -> Result<Potential> {
        let m = self.n_dofs();
        let mut b = vec![0.0; m];
        for (v, d) in self.dof.iter().enumerate() {
            if let Some(d) = d {
                b[*d] += load[v];
            }
        }
        let bnorm = b.iter().map(|x| x * x).sum::<f64>().sqrt();
        let mut u = vec![0.0; m];
        if bnorm > 0.0 {
            let mut rhs = b.clone();
            rhs[self.ground] = 0.0;
            u = self.factor.solve(&rhs);
            let mut r = vec![0.0; m];
            for _ in 0..4 {
                compensated_residual(&self.stiffness, &u, &b, &mut r);
                let rnorm = r.iter().map(|x| x * x).sum::<f64>().sqrt();
                if rnorm <= 1e-12 * bnorm {
                    break;
                }
                r[self.ground] = 0.0;
                let du = self.factor.solve(&r);
                for i in 0..m {
                    u[i] += du[i];
                }
            }
            // normwise backward error, so large contrasts do not trip the check
            self.stiffness.matvec(&u, &mut r);
            let rnorm = r.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
            let unorm = u.iter().map(|x| x * x).sum::<f64>().sqrt();
            let scale = self.stiffness_norm * unorm + bnorm;
            if !(rnorm <= 1e-10 * scale) {
                return Err(Error::Solver(format!("backward error {:e} above 1e-10", rnorm / scale)));
            }
        }
        let total: f64 = self.gamma_weight.iter().sum();
        let mean = self.gamma_weight.iter().zip(&u).map(|(w, x)| w * x).sum::<f64>() / total;
        for x in &mut u {
            *x -= mean;
        }
        let gamma_mean = self.gamma_weight.iter().zip(&u).map(|(w, x)| w * x).sum::<f64>() / total;
        let nodal_values = self.dof.iter().map(|d| d.map_or(f64::NAN, |d| u[d])).collect();
        Ok(Potential { nodal_values, gamma_mean })
    }
}

fn check_compatible(mesh: &Mesh, density: &[f64]) -> Result<()> {
    let ones = vec![1.0; mesh.n_vertices()];
    let mean = gamma_inner(mesh, density, &ones);
    let norm = gamma_inner(mesh, density, density).max(0.0).sqrt();
    let length = gamma_inner(mesh, &ones, &ones).sqrt();
    let tol = 1e-10 * norm * length;
    if mean.abs() > tol.max(f64::MIN_POSITIVE) && norm > 0.0 {
        return Err(Error::Compatibility { mean, tol });
    }
    Ok(())
}

/// Solves the regular problem for a boundary current density with zero
/// mean on the measurement boundary.
pub fn solve_neumann(sigma: &ExtremeCoefficient, density: &[f64], mesh: &Mesh) -> Result<Potential> {
    if sigma.has_extremes() {
        return Err(Error::InvalidArgument("solve_neumann expects a coefficient without extreme sets".into()));
    }
    solve_extreme(sigma, density, mesh)
}

/// Solves with insulating cells removed and each perfectly conducting
/// component held at one floating potential.
pub fn solve_extreme(sigma: &ExtremeCoefficient, density: &[f64], mesh: &Mesh) -> Result<Potential> {
    if density.len() != mesh.n_vertices() {
        return Err(Error::InvalidArgument(format!(
            "density has {} values for {} vertices",
            density.len(),
            mesh.n_vertices()
        )));
    }
    check_compatible(mesh, density)?;
    let system = ForwardSystem::new(sigma, mesh)?;
    system.solve_load(&gamma_load(mesh, density))
}

/// `∫ σ |∇u|²` over the cells carrying an equation.
pub fn energy(sigma: &ExtremeCoefficient, u: &Potential, mesh: &Mesh) -> f64 {
    let zero = sigma.zero_set.mask(mesh.n_cells());
    let inf = sigma.inf_set.mask(mesh.n_cells());
    let mut e = 0.0;
    for t in 0..mesh.n_cells() {
        if zero[t] || inf[t] {
            continue;
        }
        let vals = mesh.triangles()[t].map(|v| u.nodal_values[v]);
        if vals.iter().any(|x| x.is_nan()) {
            continue;
        }
        let ke = element_stiffness(mesh, t);
        for i in 0..3 {
            for j in 0..3 {
                e += sigma.base[t] * ke[i][j] * vals[i] * vals[j];
            }
        }
    }
    e
}
