pub mod assertions;
pub mod cli;
pub mod lang;
pub mod laws;
pub mod proofs;
pub mod semantics;
pub mod semiring;
pub mod transformers;
pub mod weighting;
