use std::fmt;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::ScatteringError;

/// How the reconfigurable elements are interconnected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Architecture {
    /// No inter-element connections; diagonal response (conventional RIS).
    SingleConnected,
    /// Every element connected to every other one.
    FullyConnected,
    /// Elements split into `groups` fully-connected sub-arrays.
    GroupConnected { groups: usize },
}

/// Which half-spaces the surface radiates into.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Reflective,
    Transmissive,
    /// Reflection and transmission at once; two response blocks.
    Hybrid,
    /// Energy split across `sectors` (≥ 2) sectors; one block per sector.
    MultiSector { sectors: usize },
}

impl Mode {
    /// Number of response blocks a scattering matrix in this mode carries.
    pub fn sectors(&self) -> usize {
        match *self {
            Mode::Reflective | Mode::Transmissive => 1,
            Mode::Hybrid => 2,
            Mode::MultiSector { sectors } => sectors,
        }
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Architecture::SingleConnected => write!(f, "single-connected"),
            Architecture::FullyConnected => write!(f, "fully-connected"),
            Architecture::GroupConnected { groups } => write!(f, "group-connected (G={groups})"),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mode::Reflective => write!(f, "reflective"),
            Mode::Transmissive => write!(f, "transmissive"),
            Mode::Hybrid => write!(f, "hybrid"),
            Mode::MultiSector { sectors } => write!(f, "multi-sector (S={sectors})"),
        }
    }
}

/// A validated surface description: architecture, operating mode and
/// element count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RisConfig {
    architecture: Architecture,
    mode: Mode,
    n_elements: usize,
}

impl RisConfig {
    pub fn new(architecture: Architecture, mode: Mode, n_elements: usize) -> Result<Self, ScatteringError> {
        if n_elements == 0 {
            return Err(ScatteringError::NoElements);
        }
        if let Architecture::GroupConnected { groups } = architecture {
            if groups == 0 || !n_elements.is_multiple_of(groups) {
                return Err(ScatteringError::GroupsDoNotDivide { n: n_elements, groups });
            }
        }
        if let Mode::MultiSector { sectors } = mode {
            if sectors < 2 {
                return Err(ScatteringError::TooFewSectors { sectors });
            }
        }
        Ok(Self { architecture, mode, n_elements })
    }

    /// Shorthand for a reflective-mode surface.
    pub fn reflective(architecture: Architecture, n_elements: usize) -> Result<Self, ScatteringError> {
        Self::new(architecture, Mode::Reflective, n_elements)
    }

    pub fn architecture(&self) -> Architecture {
        self.architecture
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn n_elements(&self) -> usize {
        self.n_elements
    }

    pub fn sectors(&self) -> usize {
        self.mode.sectors()
    }

    /// Number of independently constrained groups (N, 1 or G).
    pub fn group_count(&self) -> usize {
        match self.architecture {
            Architecture::SingleConnected => self.n_elements,
            Architecture::FullyConnected => 1,
            Architecture::GroupConnected { groups } => groups,
        }
    }

    /// Elements per group (1, N or N/G).
    pub fn group_dimension(&self) -> usize {
        self.n_elements / self.group_count()
    }

    /// Index range covered by group `g`.
    pub fn group_range(&self, g: usize) -> Range<usize> {
        let d = self.group_dimension();
        g * d..(g + 1) * d
    }

    /// Whether entry `(i, j)` may be non-zero under the architecture's
    /// sparsity pattern.
    pub fn in_pattern(&self, i: usize, j: usize) -> bool {
        let d = self.group_dimension();
        i / d == j / d
    }

    /// Same mode and size with a different architecture.
    pub fn with_architecture(&self, architecture: Architecture) -> Result<Self, ScatteringError> {
        Self::new(architecture, self.mode, self.n_elements)
    }
}

impl fmt::Display for RisConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}, {}, N={}", self.architecture, self.mode, self.n_elements)
    }
}
