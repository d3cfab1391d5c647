//! Mesh construction and the region calculus.

mod family;
mod mesh;
mod region;

pub use family::{test_family, test_family_with, CarveShape, TestInclusion};
pub use mesh::{build_disk_mesh, BoundaryEdge, CellIndex, GammaChain, Mesh, Point};
pub use region::{
    boundary_distances, boundary_segments, complement_groups, components, is_admissible, outer_layer, thin,
    Region,
};
