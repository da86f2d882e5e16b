pub mod cli;
pub mod estimator;
pub mod format;
pub mod markov;
pub mod policy;
pub mod sim;
pub mod trace;
