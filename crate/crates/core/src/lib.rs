pub mod barrington;
pub mod bootstrap;
pub mod checks;
pub mod circuit;
pub mod mjp;
pub mod obf_nc1;
pub mod zmod;
