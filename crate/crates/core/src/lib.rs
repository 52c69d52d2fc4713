//! Discrete singular Plateau problem.
//!
//! Three disk-type sheets are glued along a free junction curve and mapped
//! into R^n so that each sheet spans one arc of a three-arc boundary graph.
//! The crate minimizes the weighted Dirichlet energies of such glued maps
//! over maps, weights and boundary reparameterizations, then certifies the
//! result: weak conformality, balanced 120 degree junctions, harmonic
//! multi-sheeted reflection across the junction, and local isothermal charts.

pub mod diagnostics;
pub mod domain;
pub mod energy;
pub mod error;
pub mod io;
pub mod positions;
pub mod reflection;
pub mod scenarios;
pub mod solver;
pub mod sparse;
pub mod uniformize;

pub use domain::{
    build_disk_mesh, build_glued_domain, build_half_disk_mesh, sample_boundary_targets, BoundaryGraph,
    CorrespondencePolicy, GluedDomain, GluingData, PiecewiseMap, SheetMesh,
};
pub use energy::{
    area, dirichlet_energy, l1_energy, l2_energy, optimal_weights, weights_l1_to_l2, weights_l2_to_l1,
    EnergyTriple, WeightMode, WeightVector,
};
pub use error::{Error, Result};
pub use positions::Positions;
pub use uniformize::{
    beltrami_coefficient, isothermal_march, pullback_metric, BeltramiField, BeltramiSampler, IsothermalChart, MarchOptions,
    MeshBeltrami, Metric, MetricField,
};
