pub mod bench;
pub mod infer;
pub mod score;
pub mod simulate;
