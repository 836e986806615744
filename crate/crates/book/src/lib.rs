//! Runs the code listings of the guide in `book/` as doc-tests. One module per
//! chapter so a failing listing is easy to locate.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/channels.md")]
pub mod channels {}

#[doc = include_str!("../../../book/src/coding.md")]
pub mod coding {}

#[doc = include_str!("../../../book/src/receivers.md")]
pub mod receivers {}

#[doc = include_str!("../../../book/src/recovery.md")]
pub mod recovery {}

#[doc = include_str!("../../../book/src/learning.md")]
pub mod learning {}

#[doc = include_str!("../../../book/src/experiments.md")]
pub mod experiments {}
