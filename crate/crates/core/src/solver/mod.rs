//! Minimization of the weighted energies over maps, weights and gluing.

mod minimize;
mod system;

pub use minimize::{
    convexity_check, gluing_gradient, minimize, update_gluing, update_weights, GluingMode, GluingOutcome,
    GluingUpdate, IterationRecord, Solution, SolveConfig, Termination, WeightUpdate,
};
pub use system::{
    assemble_weighted_system, solve_harmonic_map, stiffness_matrices, Dof, HarmonicProblem, HarmonicSolve, Link,
    WeightedSystem,
};

#[cfg(test)]
mod tests;
