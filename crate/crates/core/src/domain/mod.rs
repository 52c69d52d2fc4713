//! Parameter domains: triangulated sheets, the glued three-sheet complex,
//! discrete gluing maps, boundary graphs and maps defined on the complex.

mod glued;
mod gluing;
mod graph;
mod map;
mod sheet;

pub use glued::{build_glued_domain, CorrespondencePolicy, GluedDomain};
pub use gluing::{sample_boundary_targets, GluingData};
pub use graph::BoundaryGraph;
pub use map::{junction_point, PiecewiseMap};
pub use sheet::{build_disk_mesh, build_half_disk_mesh, SheetMesh};

pub(crate) use map::junction_stencil;
pub(crate) use sheet::signed_area2;
