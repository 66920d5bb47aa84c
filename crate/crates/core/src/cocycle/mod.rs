//! Cocycle generators, orbit products and orbitwise Lyapunov data.

pub mod exponents;
pub mod product;
pub mod spec;

pub use exponents::{
    bunching_membership, good_times, lyapunov_exponents, lyapunov_norm, Bunching, EpsSchedule, ExponentEstimate,
    GoodTimes, LyapunovNorm,
};
pub use product::{orbit_product, Direction, FactorStream};
pub use spec::{AutoWord, Cocycle, CocycleSpec, HolderConst, Kind, TransferFn, TransferSpec, TrigTerm};
