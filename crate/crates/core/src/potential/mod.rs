//! Discrete potential theory on `Z²` and `Z³`: the potential kernel, the
//! lattice Green's function, harmonic measure from infinity, capacity and
//! Green's functions of finite sets.
//!
//! The exact route works with the equilibrium measure of a finite set,
//! obtained from one dense solve against the free-space kernel. The sparse
//! module solves the same exterior problems on a truncated disk and serves
//! as an independent cross-check.

use thiserror::Error;

use crate::lattice::{Dim, Site};

pub mod exact;
pub mod kernel;
pub mod profile;
pub mod sparse;

pub use exact::{
    capacity, capacity_from_profile, capacity_increment, capacity_of_set, greens_function,
    greens_to_infinity, harmonic_measure_exact, harmonic_measure_exact_with, CapacityIncrement,
    CapacityReport, ExactOptions, SetSolver,
};
pub use profile::{HarmonicProfile, ProfileSource};
pub use sparse::{escape_profile, harmonic_measure_ladder, LadderOptions};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PotentialError {
    #[error("operation needs dimension {expected}, got {got}")]
    UnsupportedDimension { expected: u8, got: u8 },
    #[error("set has {sites} sites, above the exact-solver cap of {cap}")]
    TooLarge { sites: usize, cap: usize },
    #[error("dense solve residual {residual:.3e} exceeds tolerance")]
    Solver { residual: f64 },
    #[error("iterative solve stopped at residual {residual:.3e} after {iterations} iterations")]
    NonConvergence { residual: f64, iterations: usize },
    #[error("radius ladder did not converge (last change {tv:.3e} in total variation)")]
    LadderNotConverged {
        tv: f64,
        previous: Box<HarmonicProfile>,
        last: Box<HarmonicProfile>,
    },
    #[error("outer radius {rho} must exceed {min}")]
    InvalidRadius { rho: i64, min: f64 },
    #[error("site {0} is not on the cluster boundary")]
    NotOnBoundary(Site),
    #[error("empty set")]
    EmptySet,
}

/// `a(x)` for a planar site. Errors in three dimensions, where the walk is
/// transient and [`lattice_green`] plays this role.
pub fn potential_kernel(x: Site, dim: Dim) -> Result<f64, PotentialError> {
    match dim {
        Dim::Two => Ok(kernel::potential_kernel_at(x.0[0] as i64, x.0[1] as i64)),
        Dim::Three => Err(PotentialError::UnsupportedDimension {
            expected: 2,
            got: 3,
        }),
    }
}

/// `G0(x)`: expected visits to `x` of a walk from the origin in `Z³`.
pub fn lattice_green(x: Site) -> f64 {
    kernel::lattice_green_at([x.0[0] as i64, x.0[1] as i64, x.0[2] as i64])
}

/// The lattice constant `κ = (2γ + ln 8)/π` in `a(x) ≈ (2/π) ln|x| + κ`.
pub const KERNEL_CONSTANT: f64 = 1.029_373_705_654_570_9;
