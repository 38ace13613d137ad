//! Tensegrity structures built from rigid bars and bodies connected by cables,
//! described in natural coordinates.

pub mod assembly;
pub mod error;
pub mod integrator;
pub mod forces;
pub mod linalg;
pub mod members;
pub mod modal;
pub mod scenarios;
pub mod statics;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/natural-coordinates.md")]
    mod natural_coordinates {}
    #[doc = include_str!("../../../book/src/assembly.md")]
    mod assembly {}
    #[doc = include_str!("../../../book/src/forces.md")]
    mod forces {}
    #[doc = include_str!("../../../book/src/statics.md")]
    mod statics {}
    #[doc = include_str!("../../../book/src/modal.md")]
    mod modal {}
    #[doc = include_str!("../../../book/src/dynamics.md")]
    mod dynamics {}
    #[doc = include_str!("../../../book/src/scenarios.md")]
    mod scenarios {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
