//! Stationary measures of one-dimensional McKean–Vlasov SDEs
//!
//! ```text
//! dX = (-V'(X) - θ(P'(X) - E[P'(X)])) dt + σ k(X) dB
//! ```
//!
//! The stationary densities form the family
//! `ρ(x; m) ∝ k⁻² exp(-(2/σ²) V̄(x, m))` with `V̄(x, m) = ∫_0^x (V' + θ(P' - m)) / k²`,
//! and a member is admissible when `m` is a zero of the self-consistency
//! function. The crate evaluates these functions by stabilized quadrature,
//! locates their roots, tracks the noise levels at which the root count
//! changes, and cross-checks against an interacting particle simulation.
//!
//! ```
//! use mvsde::model::{Model, ModelSpec};
//! use mvsde::selfconsistency::find_roots;
//!
//! let model = Model::new(ModelSpec::polynomial(&[0.0, -1.0, 0.0, 1.0], &[0.0, 1.0], 2.0)).unwrap();
//! let report = find_roots(&model, 0.3).unwrap();
//! assert_eq!(report.roots.len(), 3);
//! ```

pub mod critical;
pub mod error;
pub mod function;
pub mod gauss;
pub mod model;
pub mod particle;
pub mod quadrature;
pub mod roots;
pub mod selfconsistency;

pub use error::{Error, Result};

/// Library version, embedded in every artifact written by the front ends.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub use function::{Drift, FunctionSpec};
pub use model::{Model, ModelSpec};

/// Map over a slice, in parallel when the `parallel` feature is enabled.
/// Output order always matches input order.
pub(crate) fn par_map<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}
