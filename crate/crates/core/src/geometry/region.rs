//! Cell sets and the region calculus: thinning, outer layers, components,
//! admissibility.

use std::collections::VecDeque;
use std::fmt::Write as _;

use super::mesh::{Mesh, Point};
use crate::error::{Error, Result};

/// A set of mesh cells, kept sorted and unique.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Region {
    cells: Vec<usize>,
}

impl Region {
    pub fn new(mut cells: Vec<usize>) -> Self {
        cells.sort_unstable();
        cells.dedup();
        Self { cells }
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn all(mesh: &Mesh) -> Self {
        Self { cells: (0..mesh.n_cells()).collect() }
    }

    pub fn from_mask(mask: &[bool]) -> Self {
        Self { cells: mask.iter().enumerate().filter(|(_, &m)| m).map(|(i, _)| i).collect() }
    }

    /// Cells whose centroid satisfies `inside`.
    pub fn from_predicate<F: Fn(Point) -> bool>(mesh: &Mesh, inside: F) -> Self {
        Self { cells: (0..mesh.n_cells()).filter(|&t| inside(mesh.centroid(t))).collect() }
    }

    pub fn cells(&self) -> &[usize] {
        &self.cells
    }
    pub fn len(&self) -> usize {
        self.cells.len()
    }
    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }
    pub fn contains(&self, cell: usize) -> bool {
        self.cells.binary_search(&cell).is_ok()
    }

    pub fn mask(&self, n_cells: usize) -> Vec<bool> {
        let mut m = vec![false; n_cells];
        for &c in &self.cells {
            m[c] = true;
        }
        m
    }

    pub fn is_subset(&self, other: &Region) -> bool {
        let mut j = 0;
        for &c in &self.cells {
            while j < other.cells.len() && other.cells[j] < c {
                j += 1;
            }
            if j == other.cells.len() || other.cells[j] != c {
                return false;
            }
        }
        true
    }

    pub fn union(&self, other: &Region) -> Region {
        let mut v = Vec::with_capacity(self.len() + other.len());
        let (mut i, mut j) = (0, 0);
        while i < self.cells.len() || j < other.cells.len() {
            let a = self.cells.get(i).copied().unwrap_or(usize::MAX);
            let b = other.cells.get(j).copied().unwrap_or(usize::MAX);
            if a <= b {
                v.push(a);
                i += 1;
                if a == b {
                    j += 1;
                }
            } else {
                v.push(b);
                j += 1;
            }
        }
        Region { cells: v }
    }

    pub fn intersection(&self, other: &Region) -> Region {
        Region { cells: self.cells.iter().copied().filter(|&c| other.contains(c)).collect() }
    }

    pub fn difference(&self, other: &Region) -> Region {
        Region { cells: self.cells.iter().copied().filter(|&c| !other.contains(c)).collect() }
    }

    pub fn is_disjoint(&self, other: &Region) -> bool {
        self.intersection(other).is_empty()
    }

    pub fn area(&self, mesh: &Mesh) -> f64 {
        self.cells.iter().map(|&c| mesh.area(c)).sum()
    }

    /// `|A ∩ B| / |A ∪ B|` by cell count; 1 for two empty sets.
    pub fn jaccard(&self, other: &Region) -> f64 {
        let inter = self.intersection(other).len();
        let uni = self.len() + other.len() - inter;
        if uni == 0 {
            1.0
        } else {
            inter as f64 / uni as f64
        }
    }

    /// Plain text: `region v1 <ncells>` followed by sorted cell indices.
    pub fn to_text(&self) -> String {
        let mut s = String::with_capacity(8 * self.cells.len() + 16);
        writeln!(s, "region v1 {}", self.cells.len()).unwrap();
        for c in &self.cells {
            writeln!(s, "{c}").unwrap();
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        let header = lines.next().ok_or_else(|| Error::Parse("empty region file".into()))?;
        let f: Vec<&str> = header.split_whitespace().collect();
        if f.len() != 3 || f[0] != "region" || f[1] != "v1" {
            return Err(Error::Parse(format!("bad region header `{header}`")));
        }
        let n: usize = f[2].parse().map_err(|_| Error::Parse(format!("bad region count `{}`", f[2])))?;
        let cells: Vec<usize> = lines
            .map(|l| l.parse().map_err(|_| Error::Parse(format!("bad cell index `{l}`"))))
            .collect::<Result<_>>()?;
        if cells.len() != n {
            return Err(Error::Parse(format!("region header announces {n} cells, found {}", cells.len())));
        }
        if cells.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Parse("region cells are not sorted and unique".into()));
        }
        Ok(Self { cells })
    }
}

/// Boundary segments of the union of the region's cells: edges whose
/// neighbor is outside the region or outside the mesh.
pub fn boundary_segments(region: &Region, mesh: &Mesh) -> Vec<(Point, Point)> {
    let mask = region.mask(mesh.n_cells());
    let mut segs = Vec::new();
    for &t in region.cells() {
        for (k, nb) in mesh.neighbors(t).iter().enumerate() {
            if nb.map_or(true, |n| !mask[n]) {
                segs.push(mesh.edge_points(t, k));
            }
        }
    }
    segs
}

pub(crate) fn point_segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len2 = dx * dx + dy * dy;
    let s = if len2 > 0.0 { (((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / len2).clamp(0.0, 1.0) } else { 0.0 };
    let (qx, qy) = (a[0] + s * dx - p[0], a[1] + s * dy - p[1]);
    (qx * qx + qy * qy).sqrt()
}

/// Segment buckets for nearest-boundary queries.
struct SegmentGrid {
    segs: Vec<(Point, Point)>,
    origin: Point,
    size: f64,
    nx: usize,
    ny: usize,
    buckets: Vec<Vec<u32>>,
}

impl SegmentGrid {
    fn new(segs: Vec<(Point, Point)>, size: f64) -> Self {
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for (a, b) in &segs {
            for p in [a, b] {
                for d in 0..2 {
                    lo[d] = lo[d].min(p[d]);
                    hi[d] = hi[d].max(p[d]);
                }
            }
        }
        let nx = (((hi[0] - lo[0]) / size).floor() as usize + 1).max(1);
        let ny = (((hi[1] - lo[1]) / size).floor() as usize + 1).max(1);
        let mut buckets = vec![Vec::new(); nx * ny];
        for (i, (a, b)) in segs.iter().enumerate() {
            let i0 = ((a[0].min(b[0]) - lo[0]) / size) as usize;
            let i1 = (((a[0].max(b[0]) - lo[0]) / size) as usize).min(nx - 1);
            let j0 = ((a[1].min(b[1]) - lo[1]) / size) as usize;
            let j1 = (((a[1].max(b[1]) - lo[1]) / size) as usize).min(ny - 1);
            for j in j0..=j1 {
                for ii in i0..=i1 {
                    buckets[j * nx + ii].push(i as u32);
                }
            }
        }
        Self { segs, origin: lo, size, nx, ny, buckets }
    }

    /// Exact distance from `p` to the nearest segment, searching bucket rings
    /// outward until no closer segment can exist.
    fn distance(&self, p: Point) -> f64 {
        if self.segs.is_empty() {
            return f64::INFINITY;
        }
        let fi = ((p[0] - self.origin[0]) / self.size).floor() as i64;
        let fj = ((p[1] - self.origin[1]) / self.size).floor() as i64;
        let mut best = f64::INFINITY;
        let max_ring = self.nx.max(self.ny) as i64 + 1;
        for ring in 0..=max_ring {
            // every segment in rings > `ring` is at least `ring * size` away
            if best <= (ring as f64 - 1.0).max(0.0) * self.size && ring > 0 {
                break;
            }
            for j in (fj - ring)..=(fj + ring) {
                for i in (fi - ring)..=(fi + ring) {
                    if (j - fj).abs() != ring && (i - fi).abs() != ring {
                        continue;
                    }
                    if i < 0 || j < 0 || i as usize >= self.nx || j as usize >= self.ny {
                        continue;
                    }
                    for &s in &self.buckets[j as usize * self.nx + i as usize] {
                        let (a, b) = self.segs[s as usize];
                        best = best.min(point_segment_distance(p, a, b));
                    }
                }
            }
        }
        best
    }
}

/// Centroid distance of every cell of `region` to the region's polygonal boundary.
pub fn boundary_distances(region: &Region, mesh: &Mesh) -> Vec<f64> {
    let grid = SegmentGrid::new(boundary_segments(region, mesh), mesh.h().max(1e-12));
    region.cells().iter().map(|&t| grid.distance(mesh.centroid(t))).collect()
}

/// Discrete τ-thinning: cells of `region` whose centroid lies at distance
/// `≥ tau` from the polygonal boundary of the region.
pub fn thin(region: &Region, tau: f64, mesh: &Mesh) -> Region {
    if tau <= 0.0 {
        return region.clone();
    }
    let d = boundary_distances(region, mesh);
    Region { cells: region.cells().iter().zip(&d).filter(|(_, &d)| d >= tau).map(|(&c, _)| c).collect() }
}

/// Discrete outer τ-layer: the cells of `region` not in `thin(region, tau)`.
pub fn outer_layer(region: &Region, tau: f64, mesh: &Mesh) -> Region {
    if tau <= 0.0 {
        return Region::empty();
    }
    let d = boundary_distances(region, mesh);
    Region { cells: region.cells().iter().zip(&d).filter(|(_, &d)| d < tau).map(|(&c, _)| c).collect() }
}

/// Maximal edge-connected groups of cells, ordered by smallest cell index.
pub fn components(region: &Region, mesh: &Mesh) -> Vec<Region> {
    let mask = region.mask(mesh.n_cells());
    let mut seen = vec![false; mesh.n_cells()];
    let mut out = Vec::new();
    let mut queue = VecDeque::new();
    for &start in region.cells() {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        queue.push_back(start);
        let mut comp = Vec::new();
        while let Some(t) = queue.pop_front() {
            comp.push(t);
            for n in mesh.neighbors(t).into_iter().flatten() {
                if mask[n] && !seen[n] {
                    seen[n] = true;
                    queue.push_back(n);
                }
            }
        }
        out.push(Region::new(comp));
    }
    out
}

/// Number of edge-connected groups of the complement of `region` in the
/// plane: all other cells plus one exterior node adjacent to every cell with
/// a boundary edge.
pub fn complement_groups(region: &Region, mesh: &Mesh) -> usize {
    let n = mesh.n_cells();
    let inside = region.mask(n);
    let exterior = n;
    let mut seen = vec![false; n + 1];
    let mut groups = 0;
    let mut queue = VecDeque::new();
    let boundary_cells: Vec<usize> = (0..n).filter(|&t| mesh.is_boundary_cell(t) && !inside[t]).collect();
    for start in std::iter::once(exterior).chain((0..n).filter(|&t| !inside[t])) {
        if seen[start] {
            continue;
        }
        groups += 1;
        seen[start] = true;
        queue.push_back(start);
        while let Some(t) = queue.pop_front() {
            if t == exterior {
                for &b in &boundary_cells {
                    if !seen[b] {
                        seen[b] = true;
                        queue.push_back(b);
                    }
                }
                continue;
            }
            if mesh.is_boundary_cell(t) && !seen[exterior] {
                seen[exterior] = true;
                queue.push_back(exterior);
            }
            for nb in mesh.neighbors(t).into_iter().flatten() {
                if !inside[nb] && !seen[nb] {
                    seen[nb] = true;
                    queue.push_back(nb);
                }
            }
        }
    }
    groups
}

/// Admissible test inclusion: nonempty, inside `parent`, with connected
/// complement. Polygonal cell unions have Lipschitz boundary by construction.
pub fn is_admissible(candidate: &Region, parent: &Region, mesh: &Mesh) -> bool {
    !candidate.is_empty() && candidate.is_subset(parent) && complement_groups(candidate, mesh) == 1
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::mesh::build_disk_mesh;

    fn radius(p: Point) -> f64 {
        (p[0] * p[0] + p[1] * p[1]).sqrt()
    }

    #[test]
    fn thin_disk_is_smaller_disk() {
        let mesh = build_disk_mesh(1.0, 0.05).unwrap();
        let disk = Region::from_predicate(&mesh, |p| radius(p) <= 0.8);
        let inner = thin(&disk, 0.2, &mesh);
        let h = mesh.h();
        for &t in inner.cells() {
            assert!(radius(mesh.centroid(t)) <= 0.6 + h);
        }
        for &t in disk.cells() {
            if radius(mesh.centroid(t)) < 0.6 - 1.5 * h {
                assert!(inner.contains(t));
            }
        }
        assert_eq!(thin(&disk, 0.0, &mesh), disk);
    }

    #[test]
    fn outer_layer_is_annulus() {
        let mesh = build_disk_mesh(1.0, 0.05).unwrap();
        let disk = Region::from_predicate(&mesh, |p| radius(p) <= 0.8);
        let ring = outer_layer(&disk, 0.2, &mesh);
        let h = mesh.h();
        for &t in ring.cells() {
            assert!(radius(mesh.centroid(t)) >= 0.6 - 1.5 * h);
        }
        let inner = thin(&disk, 0.2, &mesh);
        assert!(ring.is_disjoint(&inner));
        assert_eq!(ring.union(&inner), disk);
    }

    #[test]
    fn components_of_blobs() {
        let mesh = build_disk_mesh(1.0, 0.08).unwrap();
        let one = Region::from_predicate(&mesh, |p| (p[0] - 0.3).abs() < 0.2 && p[1].abs() < 0.2);
        let two = Region::from_predicate(&mesh, |p| (p[0] + 0.4).abs() < 0.15 && (p[1] - 0.3).abs() < 0.15);
        assert_eq!(components(&one, &mesh), vec![one.clone()]);
        let both = one.union(&two);
        let comps = components(&both, &mesh);
        assert_eq!(comps.len(), 2);
        assert!(comps[0].cells()[0] < comps[1].cells()[0]);
    }

    #[test]
    fn admissibility() {
        let mesh = build_disk_mesh(1.0, 0.05).unwrap();
        let parent = Region::all(&mesh);
        let annulus = Region::from_predicate(&mesh, |p| (0.3..0.6).contains(&radius(p)));
        assert!(!is_admissible(&annulus, &parent, &mesh));
        let blob = Region::from_predicate(&mesh, |p| radius(p) < 0.5);
        assert!(is_admissible(&blob, &parent, &mesh));
        assert!(!is_admissible(&Region::empty(), &parent, &mesh));
        assert!(!is_admissible(&blob, &annulus, &mesh));
        // hole with a channel to the outside of the blob
        let carved = Region::from_predicate(&mesh, |p| {
            radius(p) < 0.5 && radius(p) > 0.15 && !(p[0] > 0.0 && p[1].abs() < 0.08)
        });
        assert_eq!(complement_groups(&carved, &mesh), 1);
        assert!(is_admissible(&carved, &parent, &mesh));
    }

    #[test]
    fn region_text_round_trip_and_errors() {
        let r = Region::new(vec![5, 1, 9, 1]);
        assert_eq!(r.cells(), &[1, 5, 9]);
        assert_eq!(Region::from_text(&r.to_text()).unwrap(), r);
        assert!(Region::from_text("region v1 3\n1\n2\n").is_err());
        assert!(Region::from_text("region v2 0\n").is_err());
        assert!(Region::from_text("region v1 2\n4\n2\n").is_err());
    }
}
