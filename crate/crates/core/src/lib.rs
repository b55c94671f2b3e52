//! Concurrent model synchronization with triple graph grammars.

pub mod error;
pub mod fixtures;
pub mod grammar;
pub mod graph;
pub mod operational;
pub mod pattern;
pub mod precedence;
pub mod rewrite;
pub mod delta;
pub mod dpg;
pub mod conflict;
pub mod restore;
pub mod scenario;
pub mod bench;

pub use error::{Error, Result};
