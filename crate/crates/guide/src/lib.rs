//! Runs the code in the mdbook guide as doctests, since `mdbook test` cannot
//! see this workspace's crates.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/ego-frame.md")]
pub mod ego_frame {}
#[doc = include_str!("../../../book/src/assignment.md")]
pub mod assignment {}
#[doc = include_str!("../../../book/src/association.md")]
pub mod association {}
#[doc = include_str!("../../../book/src/lifecycle.md")]
pub mod lifecycle {}
#[doc = include_str!("../../../book/src/lidar.md")]
pub mod lidar {}
#[doc = include_str!("../../../book/src/simulation.md")]
pub mod simulation {}
#[doc = include_str!("../../../book/src/evaluation.md")]
pub mod evaluation {}
#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
