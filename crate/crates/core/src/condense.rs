//! Static condensation of the fixed exterior of a work region.
//!
//! Test coefficients only differ from the background inside a work region
//! `W`. The background part `Ω \ W` is eliminated once onto the interface
//! vertices shared with `W`, so each test coefficient costs one small dense
//! solve instead of a full sparse factorization. The result equals the
//! global Galerkin ND map up to round-off.

use std::collections::VecDeque;

use nalgebra::{Cholesky, DMatrix};

use crate::error::{Error, Result};
use crate::forward::{element_stiffness, gamma_load, UnionFind};
use crate::geometry::{Mesh, Region};
use crate::ndmap::{symmetrized, BoundaryBasis, NdMatrix};
use crate::sparse::{EnvelopeCholesky, TripletBuilder};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Extreme {
    Zero,
    Infinity,
}

pub struct CondensedExterior {
    work: Vec<bool>,
    iface: Vec<usize>,
    schur: DMatrix<f64>,
    /// interface × m coupling of the boundary loads
    coupling: DMatrix<f64>,
    /// m × m map with the interface grounded
    outer_map: DMatrix<f64>,
    basis_id: String,
}

const NONE: usize = usize::MAX;

impl CondensedExterior {
    /// `background` is the per-cell conductivity used outside the work region.
    pub fn new(mesh: &Mesh, background: &[f64], work: &Region, basis: &BoundaryBasis) -> Result<Self> {
        let (nv, nc) = (mesh.n_vertices(), mesh.n_cells());
        let in_work = work.mask(nc);
        let tris = mesh.triangles();
        if let Some(&c) = work.cells().iter().find(|&&c| mesh.touches_gamma(c)) {
            return Err(Error::InvalidArgument(format!("work cell {c} touches the measurement boundary")));
        }
        let mut touches_work = vec![false; nv];
        let mut touches_outer = vec![false; nv];
        for t in 0..nc {
            for &v in &tris[t] {
                if in_work[t] {
                    touches_work[v] = true;
                } else {
                    touches_outer[v] = true;
                }
            }
        }
        let mut iface_of = vec![NONE; nv];
        let mut outer_of = vec![NONE; nv];
        let mut iface = Vec::new();
        let mut n_outer = 0;
        for v in 0..nv {
            if touches_outer[v] && touches_work[v] {
                iface_of[v] = iface.len();
                iface.push(v);
            } else if touches_outer[v] {
                outer_of[v] = n_outer;
                n_outer += 1;
            }
        }
        if iface.is_empty() {
            return Err(Error::InvalidArgument("work region has no interface with its exterior".into()));
        }
        let ni = iface.len();
        let mut k_oo = TripletBuilder::new(n_outer);
        let mut k_ii = DMatrix::<f64>::zeros(ni, ni);
        // columns of K_oi: for each interface index, sparse (outer idx, value)
        let mut k_oi: Vec<Vec<(usize, f64)>> = vec![Vec::new(); ni];
        for t in (0..nc).filter(|&t| !in_work[t]) {
            let ke = element_stiffness(mesh, t);
            let s = background[t];
            for a in 0..3 {
                for b in 0..3 {
                    let (va, vb) = (tris[t][a], tris[t][b]);
                    let v = s * ke[a][b];
                    match (outer_of[va], outer_of[vb]) {
                        (oa, ob) if oa != NONE && ob != NONE => k_oo.add(oa, ob, v),
                        (oa, NONE) if oa != NONE => k_oi[iface_of[vb]].push((oa, v)),
                        (NONE, NONE) => k_ii[(iface_of[va], iface_of[vb])] += v,
                        _ => {}
                    }
                }
            }
        }
        let k_oo = k_oo.build();
        let factor = EnvelopeCholesky::factor(&k_oo)?;

        let funcs = basis.vertex_functions(mesh);
        let m = funcs.len();
        let mut loads = DMatrix::<f64>::zeros(n_outer, m);
        for (j, f) in funcs.iter().enumerate() {
            for (v, l) in gamma_load(mesh, f).into_iter().enumerate() {
                if l != 0.0 {
                    loads[(outer_of[v], j)] = l;
                }
            }
        }
        let mut z = DMatrix::<f64>::zeros(n_outer, m);
        for j in 0..m {
            let col = factor.solve(loads.column(j).as_slice());
            z.set_column(j, &nalgebra::DVector::from_vec(col));
        }
        let outer_map = loads.transpose() * &z;
        let mut coupling = DMatrix::<f64>::zeros(ni, m);
        for i in 0..ni {
            for &(o, v) in &k_oi[i] {
                for j in 0..m {
                    coupling[(i, j)] += v * z[(o, j)];
                }
            }
        }
        let mut schur = k_ii;
        let mut rhs = vec![0.0; n_outer];
        for j in 0..ni {
            rhs.iter_mut().for_each(|x| *x = 0.0);
            for &(o, v) in &k_oi[j] {
                rhs[o] += v;
            }
            factor.solve_in_place(&mut rhs);
            for i in 0..ni {
                let s: f64 = k_oi[i].iter().map(|&(o, v)| v * rhs[o]).sum();
                schur[(i, j)] -= s;
            }
        }
        let schur = (&schur + schur.transpose()) * 0.5;
        Ok(Self { work: in_work, iface, schur, coupling, outer_map, basis_id: basis.id.clone() })
    }

    pub fn interface_len(&self) -> usize {
        self.iface.len()
    }

    pub fn is_work(&self, cell: usize) -> bool {
        self.work[cell]
    }

    /// ND map when the work cells in `free` carry `conductivity(cell)` and
    /// every other work cell is extreme of the given kind.
    pub fn nd_map<F: Fn(usize) -> f64>(
        &self,
        mesh: &Mesh,
        free: &[usize],
        conductivity: F,
        kind: Extreme,
    ) -> Result<NdMatrix> {
        let (nv, nc) = (mesh.n_vertices(), mesh.n_cells());
        let tris = mesh.triangles();
        let mut is_free = vec![false; nc];
        for &c in free {
            if !self.work[c] {
                return Err(Error::InvalidArgument(format!("cell {c} is outside the work region")));
            }
            is_free[c] = true;
        }
        let mut dof = vec![NONE; nv];
        let mut n = 0usize;
        if kind == Extreme::Infinity {
            // vertex-connected groups of extreme cells share one unknown
            let mut uf = UnionFind::new(nv);
            let extreme: Vec<usize> = (0..nc).filter(|&t| self.work[t] && !is_free[t]).collect();
            for &t in &extreme {
                uf.union(tris[t][0], tris[t][1]);
                uf.union(tris[t][0], tris[t][2]);
            }
            for &t in &extreme {
                for &v in &tris[t] {
                    let r = uf.find(v);
                    if dof[r] == NONE {
                        dof[r] = n;
                        n += 1;
                    }
                    dof[v] = dof[r];
                }
            }
        }
        for &v in &self.iface {
            if dof[v] == NONE {
                dof[v] = n;
                n += 1;
            }
        }
        for &c in free {
            for &v in &tris[c] {
                if dof[v] == NONE {
                    dof[v] = n;
                    n += 1;
                }
            }
        }
        let ni = self.iface.len();
        let m = self.coupling.ncols();
        let mut mat = DMatrix::<f64>::zeros(n, n);
        let idof: Vec<usize> = self.iface.iter().map(|&v| dof[v]).collect();
        for j in 0..ni {
            for i in 0..ni {
                mat[(idof[i], idof[j])] += self.schur[(i, j)];
            }
        }
        for &c in free {
            let ke = element_stiffness(mesh, c);
            let s = conductivity(c);
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::InvalidCoefficient(format!("conductivity {s} in cell {c} is not positive")));
            }
            let d = tris[c].map(|v| dof[v]);
            for a in 0..3 {
                for b in 0..3 {
                    mat[(d[a], d[b])] += s * ke[a][b];
                }
            }
        }
        let mut rhs = DMatrix::<f64>::zeros(n, m);
        for i in 0..ni {
            for j in 0..m {
                rhs[(idof[i], j)] -= self.coupling[(i, j)];
            }
        }
        // ground one unknown per connected block
        let scale = (0..n).map(|i| mat[(i, i)].abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        let mut comp = vec![NONE; n];
        for s in 0..n {
            if comp[s] != NONE {
                continue;
            }
            comp[s] = s;
            let mut queue = VecDeque::from([s]);
            while let Some(a) = queue.pop_front() {
                for b in 0..n {
                    if comp[b] == NONE && mat[(a, b)] != 0.0 {
                        comp[b] = s;
                        queue.push_back(b);
                    }
                }
            }
            for k in 0..n {
                mat[(s, k)] = 0.0;
                mat[(k, s)] = 0.0;
            }
            mat[(s, s)] = scale;
            for j in 0..m {
                rhs[(s, j)] = 0.0;
            }
        }
        let chol = Cholesky::new(mat).ok_or_else(|| Error::Solver("condensed test system is not positive definite".into()))?;
        let x = chol.solve(&rhs);
        // grounded unknowns vanish, so dropping their load rows changes nothing
        let a = &self.outer_map + rhs.transpose() * &x;
        symmetrized(a, &self.basis_id)
    }
}
