pub mod channel;
pub mod linalg;
pub mod metrics;
pub mod optimizer;
pub mod scattering;
pub mod scenario;
pub mod cli;
