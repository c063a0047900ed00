pub mod build;
pub mod eval;
pub mod fuse;
pub mod pc;
pub mod score;
pub mod sweep;
