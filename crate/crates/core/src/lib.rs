pub mod dtn;
pub mod error;
pub mod factorization;
pub mod geometry;
pub mod jet;
pub mod lame;
pub mod operator;
pub mod recovery;
pub mod reference;
pub mod symbol;
