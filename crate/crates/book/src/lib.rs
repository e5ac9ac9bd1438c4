//! mdbook cannot run listings that need workspace crates, so each chapter is
//! pulled in as a module doc and `cargo test -p avr-book --doc` runs them.
//! One module per chapter keeps a failing listing easy to place.

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/embeddings.md")]
pub mod embeddings {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/models.md")]
pub mod models {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/training.md")]
pub mod training {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/reproducibility.md")]
pub mod reproducibility {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/service.md")]
pub mod service {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
