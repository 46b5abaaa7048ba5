//! Reconstruction of a complex Sturm–Liouville potential from a subspectrum
//! when the boundary condition at `x = π` depends on entire functions of the
//! spectral parameter.
//!
//! Pipeline: eigenvalues and boundary pair → moment system in
//! `H = L2(0,π) ⊕ L2(0,π)` → Cauchy data `{K, N, ω}` → Weyl data
//! `{θ_n, M_n}` → Gelfand–Levitan reconstruction of `q`.

pub mod error;
pub mod gl;
pub mod half_inverse;
pub mod analytic;
pub mod cauchy;
pub mod quad;
pub mod recon;
pub mod roots;
pub mod stability;
pub mod sturm;

pub use error::{Error, Result};
