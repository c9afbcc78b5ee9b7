pub mod algorithms;
pub mod analysis;
pub mod experiment;
pub mod problems;
pub mod record;
pub mod seeds;
pub mod topology;
