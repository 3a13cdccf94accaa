pub mod entropy;
pub mod error;
pub mod grid;
pub mod io;
pub mod occupations;
pub mod oracle;
pub mod phase;
pub mod poisson;
pub mod scf;
pub mod spectral;
