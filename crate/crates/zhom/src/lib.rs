//! Exact computational homological algebra for connected Z-algebras on
//! finite degree windows: minimal free resolutions, internal Ext and Tor,
//! local cohomology through the stabilizing colimit of the torsion functor,
//! the side-swapping duality, and the AS/ASF regularity checkers built on
//! top of them.
//!
//! All arithmetic is exact (arbitrary-precision rationals or GF(p)); every
//! homological answer is a rank computation, never an approximation.

pub mod algebra;
pub mod bimodule;
pub mod derived;
pub mod field;
pub mod linalg;
pub mod module;
pub mod par;
pub mod regularity;
pub mod resolution;
pub mod samples;
pub mod schema;

pub use algebra::{
    make_adjacent_presentation, make_nil, make_opposite, make_poly, make_skew, make_trivial,
    Tensor3, ValidationReport, Window, ZAlgebra,
};
pub use field::{FieldSpec, Scalar};
pub use linalg::SparseMatrix;
pub use module::{GradedModule, ModuleMorphism, Side};
