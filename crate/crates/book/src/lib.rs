//! mdbook cannot run snippets that depend on workspace crates, so each chapter
//! of the guide is included here as the docs of an empty module and
//! `cargo test` runs its code blocks as doc-tests. One module per chapter
//! keeps a failing snippet traceable to its file.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/defect-states.md")]
pub mod defect_states {}

#[doc = include_str!("../../../book/src/mining.md")]
pub mod mining {}

#[doc = include_str!("../../../book/src/scoring.md")]
pub mod scoring {}

#[doc = include_str!("../../../book/src/evaluation.md")]
pub mod evaluation {}

#[doc = include_str!("../../../book/src/synthetic-fleets.md")]
pub mod synthetic_fleets {}

#[doc = include_str!("../../../book/src/cli-and-service.md")]
pub mod cli_and_service {}
