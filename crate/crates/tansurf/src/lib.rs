//! Tangent surfaces of curves under affine connections.
//!
//! Given a chart with Christoffel symbols `Γ^λ_{μν}(x)` and a curve
//! `γ(t)`, this crate integrates the tangent geodesics `φ(γ(t), γ'(t), s)`,
//! computes exact covariant jets `∇^k γ`, and classifies the singularities
//! of the resulting ruled surface along its singular locus `s = 0`
//! (cuspidal edges, folded umbrellas, folds, and the degenerate leftovers).
//!
//! The narrative guide with runnable examples lives in `book/`; its code
//! blocks are compiled as doc-tests of this crate.

pub mod cli;
pub mod curve;
pub mod expr;
pub mod genericity;
pub mod geodesic;
pub mod geometry;
pub mod linalg;
pub mod mesh;
pub mod scene;
pub mod surface;

// The guide's code blocks run as doc-tests so the book and the crate
// cannot drift apart.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/expressions.md")]
    mod expressions {}
    #[doc = include_str!("../../../book/src/connections.md")]
    mod connections {}
    #[doc = include_str!("../../../book/src/curves-and-jets.md")]
    mod curves_and_jets {}
    #[doc = include_str!("../../../book/src/geodesics.md")]
    mod geodesics {}
    #[doc = include_str!("../../../book/src/tangent-surfaces.md")]
    mod tangent_surfaces {}
    #[doc = include_str!("../../../book/src/classification.md")]
    mod classification {}
    #[doc = include_str!("../../../book/src/genericity.md")]
    mod genericity_census {}
    #[doc = include_str!("../../../book/src/scenes-and-cli.md")]
    mod scenes_and_cli {}
}
