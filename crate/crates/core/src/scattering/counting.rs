//! Element and impedance-component counts for each architecture/mode pair.

use super::{Architecture, Mode, RisConfig};

/// Number of tunable impedance components needed to realize a surface.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HardwareComplexity {
    pub components: u64,
    /// Set when the closed-form count is fractional (odd `(S+1)·N`) and
    /// `components` holds the value rounded up.
    pub rounded_up: bool,
}

impl HardwareComplexity {
    fn exact(components: u64) -> Self {
        Self { components, rounded_up: false }
    }

    /// `ceil(numerator / 2)`, flagged when the division is inexact.
    fn half_of(numerator: u64) -> Self {
        Self { components: numerator.div_ceil(2), rounded_up: numerator % 2 == 1 }
    }
}

/// Impedance-component count.
///
/// * single-connected: `N` for reflective/transmissive, `(3/2)·N` for
///   hybrid and `(S+1)·N/2` for multi-sector;
/// * fully-connected: `(N+1)·N/2` in every mode;
/// * group-connected: `(N/G + 1)·N/2` in every mode.
pub fn hardware_complexity(config: &RisConfig) -> HardwareComplexity {
    let n = config.n_elements() as u64;
    match config.architecture() {
        Architecture::SingleConnected => match config.mode() {
            Mode::Reflective | Mode::Transmissive => HardwareComplexity::exact(n),
            Mode::Hybrid => HardwareComplexity::half_of(3 * n),
            Mode::MultiSector { sectors } => HardwareComplexity::half_of((sectors as u64 + 1) * n),
        },
        Architecture::FullyConnected => HardwareComplexity::exact((n + 1) * n / 2),
        Architecture::GroupConnected { .. } => {
            let dim = config.group_dimension() as u64;
            HardwareComplexity::exact((dim + 1) * n / 2)
        }
    }
}

/// Non-zero entries of one response block: `N`, `N²` or `G·Ñ²`.
pub fn nonzero_count(config: &RisConfig) -> u64 {
    let groups = config.group_count() as u64;
    groups * elements_per_group(config)
}

/// Entries per group block: `1`, `N²` or `Ñ²`.
pub fn elements_per_group(config: &RisConfig) -> u64 {
    let d = config.group_dimension() as u64;
    d * d
}
