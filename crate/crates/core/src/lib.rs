pub mod bounds;
pub mod displaced;
pub mod error;
pub mod fock;
pub mod harness;
pub mod homodyne;
pub mod multimode;
pub mod oracles;
pub mod quadrature;
pub mod records;
pub mod rng;
pub mod shadow;
pub mod special;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/states.md")]
    mod states {}
    #[doc = include_str!("../../../book/src/homodyne.md")]
    mod homodyne {}
    #[doc = include_str!("../../../book/src/pnr.md")]
    mod pnr {}
    #[doc = include_str!("../../../book/src/multimode.md")]
    mod multimode {}
    #[doc = include_str!("../../../book/src/bounds.md")]
    mod bounds {}
    #[doc = include_str!("../../../book/src/harness.md")]
    mod harness {}
}
