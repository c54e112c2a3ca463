pub mod analysis;
pub mod cli;
pub mod growth;
pub mod lattice;
pub mod oracle;
pub mod potential;
pub mod walkers;
