//! Carved test inclusions: the thinned parent layer with a small ball and a
//! straight channel to its outside removed around every probe cell.

use std::collections::VecDeque;
use std::f64::consts::PI;
use std::sync::Arc;

use super::mesh::{Mesh, Point};
use super::region::{is_admissible, thin, Region};
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct TestInclusion {
    /// Work set `thin(parent, tau / 2)` shared by the whole family.
    pub work: Arc<Region>,
    /// Cells removed from the work set (ball around the probe plus channel).
    pub carve: Region,
    pub probe_cell: usize,
    pub probe_point: Point,
    pub carve_direction: usize,
    pub admissible: bool,
}

impl TestInclusion {
    /// The inclusion itself, `work \ carve`.
    pub fn region(&self) -> Region {
        self.work.difference(&self.carve)
    }
}

/// Carve geometry: ball radius and channel width, both as fractions of τ.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CarveShape {
    pub ball_radius: f64,
    pub channel_width: f64,
}

impl Default for CarveShape {
    fn default() -> Self {
        Self { ball_radius: 0.25, channel_width: 0.25 }
    }
}

fn direction(k: usize, directions: usize) -> Point {
    let a = 2.0 * PI * k as f64 / directions as f64;
    [a.cos(), a.sin()]
}

/// Cells of `work` carved for probe `p` along `dir`: the edge-connected
/// component containing the probe of (ball ∪ half-strip) ∩ work. Taking the
/// component stops the channel at its first exit from the work set.
fn carve(
    work_mask: &[bool],
    mesh: &Mesh,
    probe: usize,
    dir: Point,
    ball: f64,
    half_width: f64,
) -> Region {
    let p = mesh.centroid(probe);
    let inside = |t: usize| {
        let c = mesh.centroid(t);
        let (dx, dy) = (c[0] - p[0], c[1] - p[1]);
        if dx * dx + dy * dy <= ball * ball {
            return true;
        }
        let along = dx * dir[0] + dy * dir[1];
        let across = (-dx * dir[1] + dy * dir[0]).abs();
        along >= 0.0 && across <= half_width
    };
    let mut seen = std::collections::HashSet::new();
    let mut queue = VecDeque::from([probe]);
    seen.insert(probe);
    let mut cells = Vec::new();
    while let Some(t) = queue.pop_front() {
        cells.push(t);
        for n in mesh.neighbors(t).into_iter().flatten() {
            if work_mask[n] && !seen.contains(&n) && inside(n) {
                seen.insert(n);
                queue.push_back(n);
            }
        }
    }
    Region::new(cells)
}

/// Builds the carved family over `parent` with the default carve geometry.
pub fn test_family(parent: &Region, tau: f64, mesh: &Mesh, directions: usize) -> Result<Vec<TestInclusion>> {
    test_family_with(parent, tau, mesh, directions, CarveShape::default())
}

pub fn test_family_with(
    parent: &Region,
    tau: f64,
    mesh: &Mesh,
    directions: usize,
    shape: CarveShape,
) -> Result<Vec<TestInclusion>> {
    if directions == 0 {
        return Err(Error::InvalidArgument("test family needs at least one direction".into()));
    }
    let work = thin(parent, tau / 2.0, mesh);
    if work.is_empty() {
        return Err(Error::EmptyFamily(format!("thinning of the parent by {} is empty", tau / 2.0)));
    }
    let probes = thin(parent, tau, mesh);
    if probes.is_empty() {
        return Err(Error::EmptyFamily(format!("thinning of the parent by {tau} is empty")));
    }
    let work = Arc::new(work);
    let work_mask = work.mask(mesh.n_cells());
    let mut family = Vec::new();
    for &p in probes.cells() {
        for k in 0..directions {
            let cut = carve(
                &work_mask,
                mesh,
                p,
                direction(k, directions),
                shape.ball_radius * tau,
                0.5 * shape.channel_width * tau,
            );
            let inclusion = TestInclusion {
                work: Arc::clone(&work),
                carve: cut,
                probe_cell: p,
                probe_point: mesh.centroid(p),
                carve_direction: k,
                admissible: false,
            };
            if is_admissible(&inclusion.region(), parent, mesh) {
                family.push(TestInclusion { admissible: true, ..inclusion });
            }
        }
    }
    Ok(family)
}
