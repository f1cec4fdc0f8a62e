//! Test harness for the guide in `book/`: every chapter is included as
//! rustdoc, so `cargo test --doc` compiles and runs each of its code blocks.
//! mdbook itself cannot run snippets against the crate, so the book and the
//! library are kept in sync here; one module per chapter keeps failures
//! attributable.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/spaces.md")]
pub mod spaces {}

#[doc = include_str!("../../../book/src/functions.md")]
pub mod functions {}

#[doc = include_str!("../../../book/src/operator.md")]
pub mod operator {}

#[doc = include_str!("../../../book/src/gibbs.md")]
pub mod gibbs {}

#[doc = include_str!("../../../book/src/derivatives.md")]
pub mod derivatives {}

#[doc = include_str!("../../../book/src/variance.md")]
pub mod variance {}

#[doc = include_str!("../../../book/src/clt.md")]
pub mod clt {}

#[doc = include_str!("../../../book/src/markov.md")]
pub mod markov {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
