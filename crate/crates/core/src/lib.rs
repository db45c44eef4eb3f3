//! Discrete de Rham (DDR) complex of arbitrary degree on 3D polyhedral meshes.
//!
//! The crate is organized around the chain
//!
//! ```text
//! grad space --G--> curl space --C--> div space --D--> broken polynomials
//! ```
//!
//! whose spaces are vectors of polynomial components attached to mesh
//! entities and whose operators are defined through local moment problems.
//!
//! Modules:
//! - [`mesh`]: polyhedral mesh data model, orientation conventions, built-in
//!   generators and validation;
//! - [`submesh`]: conforming tetrahedral refinement adding only face and
//!   element centers, with parent maps;
//! - [`quadrature`]: Gauss rules on segments, triangles and tetrahedra, and
//!   rules on polytopal entities by simplicial subdivision;
//! - [`polyspace`]: scaled monomial bases, L2 projectors and the
//!   rotational/gradient polynomial decompositions;
//! - [`ddr`]: the discrete spaces, local operators, traces, global complex,
//!   component norms and interpolators;
//! - [`whitney`]: lowest-order simplicial bases in closed form, their dual
//!   pairings, norms, differential identities, and the assembled global
//!   complex on the submesh;
//! - [`mimetic`]: Poincaré inequalities for collections of entity values and
//!   the edge/face lifting constructions;
//! - [`inverse`]: constructive right inverses of the discrete operators and
//!   numerical Poincaré-constant estimation;
//! - [`magneto`]: a magnetostatics scheme with explicit discrete harmonic
//!   forms, stable on domains with voids.

// indexed loops over several parallel arrays are the norm in the assembly
// kernels, and negated comparisons are deliberate NaN guards
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod ddr;
pub mod linalg;

pub mod inverse;
pub mod magneto;
pub mod mesh;
pub mod mimetic;

pub mod polyspace;
pub mod quadrature;
pub mod submesh;
pub mod whitney;

/// 3D coordinate/vector type used throughout.
pub type Vec3 = nalgebra::Vector3<f64>;

/// Relative singular-value cutoff for numerical rank decisions.
pub const RANK_RTOL: f64 = 1e-10;
