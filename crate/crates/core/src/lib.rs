//! Finite, checkable stages of a metric group topology on `K = G ⊕ H`,
//! where `G` is a wide subgroup of `Q^m` and `H` is finitely generated, in
//! which every neighbourhood `U` of zero has the small subgroup generating
//! property: the cyclic subgroups inside `U` generate a dense subgroup.
//!
//! The topology is approximated by a descending chain of conditions, each
//! holding symbolic neighbourhoods of zero with exact membership. See the
//! guide in `book/` for a walk-through.

pub mod arith;
pub mod cli;
pub mod density;
pub mod driver;
pub mod error;
pub mod groups;
pub mod poset;
pub mod report;
pub mod symsets;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/elements.md")]
    mod elements {}
    #[doc = include_str!("../../../book/src/symbolic-sets.md")]
    mod symbolic_sets {}
    #[doc = include_str!("../../../book/src/wide-groups.md")]
    mod wide_groups {}
    #[doc = include_str!("../../../book/src/conditions.md")]
    mod conditions {}
    #[doc = include_str!("../../../book/src/chains.md")]
    mod chains {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
