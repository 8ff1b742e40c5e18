//! The discrete energy `G₁^{v₀} = K₁ + 𝒲`: double-well potential, collocation
//! kernel, exterior moments, whole-box model and sub-region evaluator.
//!
//! Counting convention: the Gagliardo term sums over ordered pairs `(i, j)`
//! with `i ≠ j`, and every interaction between disjoint sets carries the
//! factor 2, so `K₁(A ∪ B) = K₁(A) + K₁(B) + 𝒲((v, A), (v, B))`.

pub mod exterior;
pub mod kernel;
pub mod model;
pub mod potential;
pub mod region;

pub use exterior::{exterior_interaction, moment_1d, moment_2d, tail_moments, ExteriorWeights};
pub use kernel::{KernelTable, MatvecPath, ToeplitzOperator};
pub use model::{gagliardo_direct, EnergyBreakdown, EnergyModel, Evaluation, Geometry, ModelParams};
pub use potential::{build_potential, Potential};
pub use region::{Region, WindowModel};
