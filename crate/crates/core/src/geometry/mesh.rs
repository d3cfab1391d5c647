//! Conforming triangulations with a marked measurement boundary.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt::Write as _;

use crate::error::{Error, Result};

pub type Point = [f64; 2];

/// A boundary edge together with its arc-parameter interval along the
/// boundary loop (cumulative polygonal length).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryEdge {
    pub vertices: [usize; 2],
    pub arc: [f64; 2],
}

/// Ordered chain of measurement-boundary nodes with normalized arc position.
#[derive(Clone, Debug)]
pub struct GammaChain {
    /// Vertex ids in boundary order. For an open arc both endpoints are included.
    pub nodes: Vec<usize>,
    /// Normalized arc position in `[0, 1)` (closed) or `[0, 1]` (open).
    pub xi: Vec<f64>,
    pub closed: bool,
    pub length: f64,
}

#[derive(Clone, Debug)]
pub struct Mesh {
    vertices: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    boundary_edges: Vec<BoundaryEdge>,
    gamma_mask: Vec<bool>,
    h: f64,
    // derived, fixed at construction
    neighbors: Vec<[Option<usize>; 3]>,
    centroids: Vec<Point>,
    areas: Vec<f64>,
    on_boundary: Vec<bool>,
    on_gamma: Vec<bool>,
    boundary_cell: Vec<bool>,
}

fn edge_key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

fn dist(a: Point, b: Point) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

pub(crate) fn signed_area(a: Point, b: Point, c: Point) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

impl Mesh {
    /// Builds a mesh and checks conformity. Edge `k` of triangle `t` joins
    /// `t[k]` and `t[(k + 1) % 3]`.
    pub fn new(
        vertices: Vec<Point>,
        triangles: Vec<[usize; 3]>,
        mut boundary_edges: Vec<BoundaryEdge>,
        gamma_mask: Vec<bool>,
    ) -> Result<Self> {
        let nv = vertices.len();
        if triangles.is_empty() {
            return Err(Error::InvalidMesh("no triangles".into()));
        }
        if gamma_mask.len() != boundary_edges.len() {
            return Err(Error::InvalidMesh(format!(
                "gamma mask has {} entries for {} boundary edges",
                gamma_mask.len(),
                boundary_edges.len()
            )));
        }
        if !gamma_mask.iter().any(|&g| g) {
            return Err(Error::InvalidMesh("measurement boundary is empty".into()));
        }

        let mut areas = Vec::with_capacity(triangles.len());
        let mut centroids = Vec::with_capacity(triangles.len());
        let mut h: f64 = 0.0;
        let mut edge_owner: HashMap<(usize, usize), (usize, usize)> = HashMap::new();
        let mut neighbors = vec![[None; 3]; triangles.len()];
        for (t, tri) in triangles.iter().enumerate() {
            if tri.iter().any(|&v| v >= nv) {
                return Err(Error::InvalidMesh(format!("triangle {t} references a missing vertex")));
            }
            let [a, b, c] = tri.map(|v| vertices[v]);
            let area = signed_area(a, b, c);
            if !(area > 0.0) {
                return Err(Error::InvalidMesh(format!("triangle {t} has non-positive area {area:e}")));
            }
            areas.push(area);
            centroids.push([(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]);
            h = h.max(dist(a, b)).max(dist(b, c)).max(dist(c, a));
            for k in 0..3 {
                let key = edge_key(tri[k], tri[(k + 1) % 3]);
                match edge_owner.get(&key) {
                    None => {
                        edge_owner.insert(key, (t, k));
                    }
                    Some(&(s, j)) => {
                        if neighbors[s][j].is_some() {
                            return Err(Error::InvalidMesh(format!(
                                "edge {key:?} shared by more than two triangles"
                            )));
                        }
                        neighbors[s][j] = Some(t);
                        neighbors[t][k] = Some(s);
                    }
                }
            }
        }

        let mut on_boundary = vec![false; nv];
        let mut on_gamma = vec![false; nv];
        let mut boundary_cell = vec![false; triangles.len()];
        let mut seen = 0usize;
        for (e, edge) in boundary_edges.iter_mut().enumerate() {
            let key = edge_key(edge.vertices[0], edge.vertices[1]);
            let Some(&(t, k)) = edge_owner.get(&key) else {
                return Err(Error::InvalidMesh(format!("boundary edge {key:?} is not a mesh edge")));
            };
            if neighbors[t][k].is_some() {
                return Err(Error::InvalidMesh(format!("boundary edge {key:?} is interior")));
            }
            boundary_cell[t] = true;
            // store counterclockwise, domain on the left
            edge.vertices = [triangles[t][k], triangles[t][(k + 1) % 3]];
            for &v in &edge.vertices {
                on_boundary[v] = true;
                if gamma_mask[e] {
                    on_gamma[v] = true;
                }
            }
            seen += 1;
        }
        let open_edges = neighbors.iter().flatten().filter(|n| n.is_none()).count();
        if open_edges != seen {
            return Err(Error::InvalidMesh(format!(
                "{open_edges} edges have a single triangle but {seen} boundary edges are listed"
            )));
        }

        Ok(Self {
            vertices,
            triangles,
            boundary_edges,
            gamma_mask,
            h,
            neighbors,
            centroids,
            areas,
            on_boundary,
            on_gamma,
            boundary_cell,
        })
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }
    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }
    pub fn boundary_edges(&self) -> &[BoundaryEdge] {
        &self.boundary_edges
    }
    pub fn gamma_mask(&self) -> &[bool] {
        &self.gamma_mask
    }
    /// Maximum triangle diameter.
    pub fn h(&self) -> f64 {
        self.h
    }
    pub fn n_cells(&self) -> usize {
        self.triangles.len()
    }
    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }
    pub fn centroid(&self, cell: usize) -> Point {
        self.centroids[cell]
    }
    pub fn centroids(&self) -> &[Point] {
        &self.centroids
    }
    pub fn area(&self, cell: usize) -> f64 {
        self.areas[cell]
    }
    /// Neighbor across edge `k` of `cell`, `None` on the domain boundary.
    pub fn neighbors(&self, cell: usize) -> [Option<usize>; 3] {
        self.neighbors[cell]
    }
    pub fn is_boundary_vertex(&self, v: usize) -> bool {
        self.on_boundary[v]
    }
    pub fn is_gamma_vertex(&self, v: usize) -> bool {
        self.on_gamma[v]
    }
    /// True if the cell has an edge on the outer boundary.
    pub fn is_boundary_cell(&self, cell: usize) -> bool {
        self.boundary_cell[cell]
    }
    /// True if any vertex of the cell lies on the measurement boundary.
    pub fn touches_gamma(&self, cell: usize) -> bool {
        self.triangles[cell].iter().any(|&v| self.on_gamma[v])
    }
    pub fn total_area(&self) -> f64 {
        self.areas.iter().sum()
    }
    pub fn edge_points(&self, cell: usize, k: usize) -> (Point, Point) {
        let t = self.triangles[cell];
        (self.vertices[t[k]], self.vertices[t[(k + 1) % 3]])
    }

    /// Returns a copy with the measurement boundary set to the edges whose
    /// midpoint satisfies `select`.
    pub fn with_gamma<F: Fn(Point) -> bool>(&self, select: F) -> Result<Self> {
        let mask = self
            .boundary_edges
            .iter()
            .map(|e| {
                let a = self.vertices[e.vertices[0]];
                let b = self.vertices[e.vertices[1]];
                select([(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0])
            })
            .collect();
        Self::new(self.vertices.clone(), self.triangles.clone(), self.boundary_edges.clone(), mask)
    }

    /// Measurement boundary restricted to edge midpoints with polar angle in
    /// `[start, end)` (radians, measured counterclockwise from the x-axis).
    pub fn with_gamma_arc(&self, start: f64, end: f64) -> Result<Self> {
        self.with_gamma(|p| {
            let mut a = p[1].atan2(p[0]);
            while a < start {
                a += 2.0 * PI;
            }
            while a >= start + 2.0 * PI {
                a -= 2.0 * PI;
            }
            a < end
        })
    }

    /// Orders the measurement-boundary nodes along the boundary. Fails if the
    /// measurement boundary is not a single closed loop or a single arc.
    pub fn gamma_chain(&self) -> Result<GammaChain> {
        let mut next: HashMap<usize, (usize, usize)> = HashMap::new();
        let mut has_prev: HashMap<usize, bool> = HashMap::new();
        let mut n_edges = 0;
        for (e, edge) in self.boundary_edges.iter().enumerate() {
            if !self.gamma_mask[e] {
                continue;
            }
            n_edges += 1;
            let [a, b] = edge.vertices;
            if next.insert(a, (b, e)).is_some() {
                return Err(Error::InvalidMesh("measurement boundary branches".into()));
            }
            has_prev.insert(b, true);
            has_prev.entry(a).or_insert(false);
        }
        let starts: Vec<usize> = {
            let mut s: Vec<usize> = has_prev.iter().filter(|(_, &p)| !p).map(|(&v, _)| v).collect();
            s.sort_unstable();
            s
        };
        let closed = starts.is_empty();
        let start = if closed {
            // deterministic start: the smallest vertex id on the loop
            *next.keys().min().expect("nonempty gamma")
        } else if starts.len() == 1 {
            starts[0]
        } else {
            return Err(Error::InvalidMesh(format!(
                "measurement boundary has {} disjoint arcs",
                starts.len()
            )));
        };
        let mut nodes = vec![start];
        let mut cum = vec![0.0];
        let mut cur = start;
        for _ in 0..n_edges {
            let Some(&(nxt, _)) = next.get(&cur) else {
                break;
            };
            let len = dist(self.vertices[cur], self.vertices[nxt]);
            cum.push(cum.last().unwrap() + len);
            nodes.push(nxt);
            cur = nxt;
        }
        if nodes.len() != n_edges + 1 {
            return Err(Error::InvalidMesh("measurement boundary is not a single chain".into()));
        }
        let length = *cum.last().unwrap();
        if closed {
            if nodes.last() != Some(&start) {
                return Err(Error::InvalidMesh("measurement boundary loop does not close".into()));
            }
            nodes.pop();
            cum.pop();
        }
        let xi = cum.iter().map(|s| s / length).collect();
        Ok(GammaChain { nodes, xi, closed, length })
    }

    /// Uniform red refinement: every triangle is split into four. New
    /// boundary vertices stay on the edge midpoints, so the refined mesh
    /// covers exactly the same polygon and its P1 space contains the coarse
    /// one. Child `4 t + j` of cell `t` lies inside the parent.
    pub fn refine(&self) -> Result<Self> {
        let mut vertices = self.vertices.clone();
        let mut mid: HashMap<(usize, usize), usize> = HashMap::new();
        let mut midpoint = |a: usize, b: usize, vertices: &mut Vec<Point>| -> usize {
            *mid.entry(edge_key(a, b)).or_insert_with(|| {
                let (p, q) = (vertices[a], vertices[b]);
                vertices.push([(p[0] + q[0]) / 2.0, (p[1] + q[1]) / 2.0]);
                vertices.len() - 1
            })
        };
        let mut triangles = Vec::with_capacity(4 * self.triangles.len());
        for &[a, b, c] in &self.triangles {
            let ab = midpoint(a, b, &mut vertices);
            let bc = midpoint(b, c, &mut vertices);
            let ca = midpoint(c, a, &mut vertices);
            triangles.push([a, ab, ca]);
            triangles.push([ab, b, bc]);
            triangles.push([ca, bc, c]);
            triangles.push([ab, bc, ca]);
        }
        let mut boundary_edges = Vec::with_capacity(2 * self.boundary_edges.len());
        let mut gamma_mask = Vec::with_capacity(2 * self.boundary_edges.len());
        for (e, edge) in self.boundary_edges.iter().enumerate() {
            let [a, b] = edge.vertices;
            let m = midpoint(a, b, &mut vertices);
            let sm = 0.5 * (edge.arc[0] + edge.arc[1]);
            boundary_edges.push(BoundaryEdge { vertices: [a, m], arc: [edge.arc[0], sm] });
            boundary_edges.push(BoundaryEdge { vertices: [m, b], arc: [sm, edge.arc[1]] });
            gamma_mask.push(self.gamma_mask[e]);
            gamma_mask.push(self.gamma_mask[e]);
        }
        Self::new(vertices, triangles, boundary_edges, gamma_mask)
    }

    /// Index of a triangle containing `p`, if any.
    pub fn locate(&self, p: Point, index: &CellIndex) -> Option<usize> {
        index.candidates(p).find(|&t| {
            let [a, b, c] = self.triangles[t].map(|v| self.vertices[v]);
            let eps = -1e-12 * self.areas[t];
            signed_area(a, b, p) >= eps && signed_area(b, c, p) >= eps && signed_area(c, a, p) >= eps
        })
    }

    /// Plain-text serialization: `vertices`, `triangles` and `boundary`
    /// sections with counts, coordinates at 17 significant digits.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "vertices {}", self.vertices.len()).unwrap();
        for p in &self.vertices {
            writeln!(s, "{:.16e} {:.16e}", p[0], p[1]).unwrap();
        }
        writeln!(s, "triangles {}", self.triangles.len()).unwrap();
        for t in &self.triangles {
            writeln!(s, "{} {} {}", t[0], t[1], t[2]).unwrap();
        }
        writeln!(s, "boundary {}", self.boundary_edges.len()).unwrap();
        for (e, g) in self.boundary_edges.iter().zip(&self.gamma_mask) {
            writeln!(
                s,
                "{} {} {:.16e} {:.16e} {}",
                e.vertices[0], e.vertices[1], e.arc[0], e.arc[1], *g as u8
            )
            .unwrap();
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let lines: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
        let mut pos = 0usize;
        let mut take = || -> Result<&str> {
            let l = lines.get(pos).copied().ok_or_else(|| Error::Parse("unexpected end of mesh file".into()))?;
            pos += 1;
            Ok(l)
        };
        fn section(line: &str, name: &str) -> Result<usize> {
            let mut it = line.split_whitespace();
            if it.next() != Some(name) {
                return Err(Error::Parse(format!("expected `{name}` section, found `{line}`")));
            }
            it.next().and_then(|n| n.parse().ok()).ok_or_else(|| Error::Parse(format!("bad count in `{line}`")))
        }
        fn fields<T: std::str::FromStr>(line: &str, n: usize) -> Result<Vec<T>> {
            let v: Vec<T> = line
                .split_whitespace()
                .map(|x| x.parse::<T>().map_err(|_| Error::Parse(format!("bad number in `{line}`"))))
                .collect::<Result<_>>()?;
            if v.len() != n {
                return Err(Error::Parse(format!("expected {n} fields in `{line}`")));
            }
            Ok(v)
        }
        let nv = section(take()?, "vertices")?;
        let mut vertices = Vec::with_capacity(nv);
        for _ in 0..nv {
            let v: Vec<f64> = fields(take()?, 2)?;
            vertices.push([v[0], v[1]]);
        }
        let nt = section(take()?, "triangles")?;
        let mut triangles = Vec::with_capacity(nt);
        for _ in 0..nt {
            let v: Vec<usize> = fields(take()?, 3)?;
            triangles.push([v[0], v[1], v[2]]);
        }
        let nb = section(take()?, "boundary")?;
        let mut edges = Vec::with_capacity(nb);
        let mut mask = Vec::with_capacity(nb);
        for _ in 0..nb {
            let v: Vec<f64> = fields(take()?, 5)?;
            edges.push(BoundaryEdge { vertices: [v[0] as usize, v[1] as usize], arc: [v[2], v[3]] });
            mask.push(v[4] != 0.0);
        }
        Self::new(vertices, triangles, edges, mask)
    }
}

/// Uniform bucket grid over triangle bounding boxes for point location.
pub struct CellIndex {
    origin: Point,
    cell: f64,
    nx: usize,
    ny: usize,
    buckets: Vec<Vec<usize>>,
}

impl CellIndex {
    pub fn new(mesh: &Mesh) -> Self {
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for p in &mesh.vertices {
            for d in 0..2 {
                lo[d] = lo[d].min(p[d]);
                hi[d] = hi[d].max(p[d]);
            }
        }
        let cell = mesh.h.max(1e-300);
        let nx = (((hi[0] - lo[0]) / cell).ceil() as usize).max(1);
        let ny = (((hi[1] - lo[1]) / cell).ceil() as usize).max(1);
        let mut buckets = vec![Vec::new(); nx * ny];
        for (t, tri) in mesh.triangles.iter().enumerate() {
            let pts = tri.map(|v| mesh.vertices[v]);
            let bx = |x: f64| (((x - lo[0]) / cell).floor().max(0.0) as usize).min(nx - 1);
            let by = |y: f64| (((y - lo[1]) / cell).floor().max(0.0) as usize).min(ny - 1);
            let (x0, x1) = (pts.iter().map(|p| bx(p[0])).min().unwrap(), pts.iter().map(|p| bx(p[0])).max().unwrap());
            let (y0, y1) = (pts.iter().map(|p| by(p[1])).min().unwrap(), pts.iter().map(|p| by(p[1])).max().unwrap());
            for j in y0..=y1 {
                for i in x0..=x1 {
                    buckets[j * nx + i].push(t);
                }
            }
        }
        Self { origin: lo, cell, nx, ny, buckets }
    }

    fn candidates(&self, p: Point) -> impl Iterator<Item = usize> + '_ {
        let i = ((p[0] - self.origin[0]) / self.cell).floor();
        let j = ((p[1] - self.origin[1]) / self.cell).floor();
        let ok = i >= 0.0 && j >= 0.0 && (i as usize) < self.nx && (j as usize) < self.ny;
        let bucket: &[usize] = if ok { &self.buckets[j as usize * self.nx + i as usize] } else { &[] };
        bucket.iter().copied()
    }
}

/// Triangulates the disk of the given radius with concentric rings of
/// `6 i` nodes, refined until the maximum triangle diameter is at most
/// `h_target`. Boundary vertices lie on the circle, and the whole boundary
/// is the measurement boundary.
pub fn build_disk_mesh(radius: f64, h_target: f64) -> Result<Mesh> {
    if !(radius > 0.0) || !(h_target > 0.0) || !(h_target < radius) {
        return Err(Error::InvalidArgument(format!(
            "disk mesh needs radius > 0 and 0 < h_target < radius, got radius={radius}, h_target={h_target}"
        )));
    }
    let mut rings = (radius / h_target).ceil() as usize;
    loop {
        let mesh = ring_disk(radius, rings)?;
        if mesh.h <= h_target || rings > 100_000 {
            return Ok(mesh);
        }
        rings += 1;
    }
}

fn ring_disk(radius: f64, rings: usize) -> Result<Mesh> {
    let dr = radius / rings as f64;
    let mut vertices: Vec<Point> = vec![[0.0, 0.0]];
    let mut start = vec![0usize];
    for i in 1..=rings {
        start.push(vertices.len());
        let n = 6 * i;
        let r = if i == rings { radius } else { i as f64 * dr };
        for j in 0..n {
            let a = 2.0 * PI * j as f64 / n as f64;
            vertices.push([r * a.cos(), r * a.sin()]);
        }
    }
    let mut triangles = Vec::with_capacity(6 * rings * rings);
    let mut push = |t: [usize; 3], vertices: &[Point]| {
        let [a, b, c] = t.map(|v| vertices[v]);
        if signed_area(a, b, c) > 0.0 {
            triangles.push(t);
        } else {
            triangles.push([t[0], t[2], t[1]]);
        }
    };
    for j in 0..6 {
        push([0, start[1] + j, start[1] + (j + 1) % 6], &vertices);
    }
    for i in 1..rings {
        let (na, nb) = (6 * i, 6 * (i + 1));
        let inner = |k: usize| start[i] + k % na;
        let outer = |k: usize| start[i + 1] + k % nb;
        let (mut ia, mut ib) = (0usize, 0usize);
        while ia < na || ib < nb {
            let next_in = (ia + 1) as f64 / na as f64;
            let next_out = (ib + 1) as f64 / nb as f64;
            if ib == nb || (ia < na && next_in < next_out) {
                push([inner(ia), outer(ib), inner(ia + 1)], &vertices);
                ia += 1;
            } else {
                push([inner(ia), outer(ib), outer(ib + 1)], &vertices);
                ib += 1;
            }
        }
    }
    let nb = 6 * rings;
    let mut boundary_edges = Vec::with_capacity(nb);
    let mut s = 0.0;
    for j in 0..nb {
        let (a, b) = (start[rings] + j, start[rings] + (j + 1) % nb);
        let len = dist(vertices[a], vertices[b]);
        boundary_edges.push(BoundaryEdge { vertices: [a, b], arc: [s, s + len] });
        s += len;
    }
    let mask = vec![true; nb];
    Mesh::new(vertices, triangles, boundary_edges, mask)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_arguments() {
        assert!(matches!(build_disk_mesh(1.0, 0.0), Err(Error::InvalidArgument(_))));
        assert!(matches!(build_disk_mesh(1.0, 1.5), Err(Error::InvalidArgument(_))));
        assert!(matches!(build_disk_mesh(-1.0, 0.1), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn boundary_vertices_on_circle() {
        let mesh = build_disk_mesh(1.0, 0.5).unwrap();
        for e in mesh.boundary_edges() {
            for &v in &e.vertices {
                let p = mesh.vertices()[v];
                assert!(((p[0] * p[0] + p[1] * p[1]).sqrt() - 1.0).abs() < 1e-12);
            }
        }
        assert!(mesh.h() <= 0.5 * 1.5);
    }

    #[test]
    fn positive_areas_and_mesh_size() {
        let mesh = build_disk_mesh(1.0, 0.1).unwrap();
        assert!((0..mesh.n_cells()).all(|t| mesh.area(t) > 0.0));
        assert!(mesh.h() > 0.0 && mesh.h() <= 0.15);
    }

    #[test]
    fn area_converges_to_pi() {
        let mesh = build_disk_mesh(1.0, 0.05).unwrap();
        // inscribed regular polygon with the same boundary node count
        let n = mesh.boundary_edges().len() as f64;
        let polygon = 0.5 * n * (2.0 * PI / n).sin();
        assert!((mesh.total_area() - polygon).abs() < 1e-10);
        assert!((mesh.total_area() - PI).abs() <= 2.0 * mesh.h() * mesh.h());
    }

    #[test]
    fn refinement_nests() {
        let mesh = build_disk_mesh(1.0, 0.3).unwrap();
        let fine = mesh.refine().unwrap();
        assert_eq!(fine.n_cells(), 4 * mesh.n_cells());
        assert!((fine.h() - mesh.h() / 2.0).abs() < 1e-12);
        assert!((fine.total_area() - mesh.total_area()).abs() < 1e-12);
        for t in 0..mesh.n_cells() {
            let total: f64 = (0..4).map(|j| fine.area(4 * t + j)).sum();
            assert!((total - mesh.area(t)).abs() < 1e-14);
        }
    }

    #[test]
    fn gamma_chain_full_and_arc() {
        let mesh = build_disk_mesh(1.0, 0.2).unwrap();
        let full = mesh.gamma_chain().unwrap();
        assert!(full.closed);
        assert_eq!(full.nodes.len(), mesh.boundary_edges().len());
        let half = mesh.with_gamma_arc(0.0, PI).unwrap();
        let arc = half.gamma_chain().unwrap();
        assert!(!arc.closed);
        assert_eq!(arc.nodes.len(), mesh.boundary_edges().len() / 2 + 1);
        assert!((arc.xi[0]).abs() < 1e-15 && (arc.xi.last().unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn text_round_trip() {
        let mesh = build_disk_mesh(1.0, 0.4).unwrap().with_gamma_arc(0.0, PI).unwrap();
        let back = Mesh::from_text(&mesh.to_text()).unwrap();
        assert_eq!(back.vertices(), mesh.vertices());
        assert_eq!(back.triangles(), mesh.triangles());
        assert_eq!(back.gamma_mask(), mesh.gamma_mask());
    }

    #[test]
    fn point_location() {
        let mesh = build_disk_mesh(1.0, 0.2).unwrap();
        let index = CellIndex::new(&mesh);
        for t in (0..mesh.n_cells()).step_by(7) {
            let c = mesh.centroid(t);
            assert_eq!(mesh.locate(c, &index), Some(t));
        }
        assert_eq!(mesh.locate([2.0, 0.0], &index), None);
    }
}
