pub mod bench;
pub mod bundle;
pub mod bytes;
pub mod cache;
mod engine;
pub mod fixtures;
pub mod generate;
pub mod grammar;
pub mod mask;
pub mod matcher;
pub mod pda;
pub mod schema;
pub mod stack;
pub mod vocab;

pub use bundle::{compile, CompileOptions, CompiledGrammar};
pub use engine::{BranchCapError, LOCAL_STATE_CAP};
pub use mask::TokenMask;
pub use matcher::Matcher;
