//! Scattering-matrix constraint sets for beyond-diagonal surfaces.
//!
//! A surface of `N` elements is described by one `N×N` complex response
//! block per sector. The architecture fixes the sparsity pattern
//! (diagonal, full, or `G` diagonal blocks of size `Ñ = N/G`) and the mode
//! fixes the energy-conservation constraint that couples the sector blocks:
//!
//! ```text
//! Σ_s Φ_{s,g}ᴴ Φ_{s,g} = I_Ñ     for every group g
//! ```
//!
//! which is plain unitarity per group for one sector, the
//! `|φ_r|² + |φ_t|² = 1` split for hybrid single-connected surfaces, and so
//! on. Projection onto these sets stacks the sector blocks of each group and
//! takes the polar factor of the stack.

mod config;
mod counting;

pub use config::{Architecture, Mode, RisConfig};
pub use counting::{elements_per_group, hardware_complexity, nonzero_count, HardwareComplexity};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::linalg::{polar_factor, CMatrix};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScatteringError {
    #[error("a surface needs at least one element")]
    NoElements,
    #[error("group count {groups} does not divide N = {n}")]
    GroupsDoNotDivide { n: usize, groups: usize },
    #[error("multi-sector mode needs at least 2 sectors, got {sectors}")]
    TooFewSectors { sectors: usize },
    #[error("expected {expected} response block(s), got {found}")]
    BlockCount { expected: usize, found: usize },
    #[error("block {block} is {rows}x{cols}, expected {n}x{n}")]
    Dimension { block: usize, rows: usize, cols: usize, n: usize },
    #[error("{0} is rank deficient; its polar factor is not unique")]
    RankDeficient(String),
    #[error("diagonal entry {index} is zero in every sector; its phase is undefined")]
    ZeroDiagonal { index: usize },
    #[error("matrix does not fit the {target} sparsity pattern")]
    PatternMismatch { target: Architecture },
}

/// Per-group constraint residuals of a scattering matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintReport {
    /// `‖Σ_s Φ_{s,g}ᴴ Φ_{s,g} − I‖_F` for every group `g`; for
    /// single-connected surfaces this is `|Σ_s |φ_{s,n}|² − 1|` per element.
    pub group_residuals: Vec<f64>,
    /// Largest group residual.
    pub residual: f64,
    /// Entries outside the sparsity pattern that are not exactly zero.
    pub sparsity_violations: usize,
    pub tolerance: f64,
    pub passed: bool,
}

/// Knobs for [`project_feasible_with`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ProjectionOptions {
    /// Symmetrize every block (`(Φ + Φᵀ)/2`) before the polar step. This is
    /// a heuristic for reciprocal surfaces: the result is symmetric only up
    /// to rounding for single-sector modes and not in general for stacked
    /// modes.
    pub symmetric: bool,
}

/// Surface response: one `N×N` block per sector plus the configuration it
/// was built for. Immutable once constructed.
#[derive(Debug, Clone, PartialEq)]
pub struct ScatteringMatrix {
    config: RisConfig,
    blocks: Vec<CMatrix>,
}

impl ScatteringMatrix {
    /// Wraps `blocks` after checking their number and shape against
    /// `config`. Constraint satisfaction is not checked; use
    /// [`ScatteringMatrix::validate`] or build through [`project_feasible`].
    pub fn new(config: RisConfig, blocks: Vec<CMatrix>) -> Result<Self, ScatteringError> {
        check_shapes(&config, &blocks)?;
        Ok(Self { config, blocks })
    }

    pub fn config(&self) -> &RisConfig {
        &self.config
    }

    pub fn n(&self) -> usize {
        self.config.n_elements()
    }

    pub fn blocks(&self) -> &[CMatrix] {
        &self.blocks
    }

    /// First block: the reflection response in reflective and hybrid modes,
    /// the through response in transmissive mode.
    pub fn primary_block(&self) -> &CMatrix {
        &self.blocks[0]
    }

    pub fn into_blocks(self) -> Vec<CMatrix> {
        self.blocks
    }

    pub fn validate(&self, tol: f64) -> ConstraintReport {
        validate_blocks(&self.config, &self.blocks, tol).expect("shapes checked at construction")
    }

    /// Relabels the matrix under another architecture with the same mode and
    /// size. Succeeds only if every non-zero entry lies inside the target
    /// pattern, so a single-connected solution embeds into group- and
    /// fully-connected feasible sets unchanged.
    pub fn embed(&self, architecture: Architecture) -> Result<Self, ScatteringError> {
        let config = self.config.with_architecture(architecture)?;
        for block in &self.blocks {
            for j in 0..block.ncols() {
                for i in 0..block.nrows() {
                    if !config.in_pattern(i, j) && block[(i, j)] != Complex64::new(0.0, 0.0) {
                        return Err(ScatteringError::PatternMismatch { target: architecture });
                    }
                }
            }
        }
        Ok(Self { config, blocks: self.blocks.clone() })
    }
}

fn check_shapes(config: &RisConfig, blocks: &[CMatrix]) -> Result<(), ScatteringError> {
    let expected = config.sectors();
    if blocks.len() != expected {
        return Err(ScatteringError::BlockCount { expected, found: blocks.len() });
    }
    let n = config.n_elements();
    for (block, m) in blocks.iter().enumerate() {
        if m.nrows() != n || m.ncols() != n {
            return Err(ScatteringError::Dimension { block, rows: m.nrows(), cols: m.ncols(), n });
        }
    }
    Ok(())
}

/// Checks `blocks` against the sparsity pattern and mode constraint of
/// `config`. Passes iff every group residual is `≤ tol` and every entry
/// outside the pattern is exactly zero.
pub fn validate_blocks(config: &RisConfig, blocks: &[CMatrix], tol: f64) -> Result<ConstraintReport, ScatteringError> {
    check_shapes(config, blocks)?;
    let n = config.n_elements();

    let mut sparsity_violations = 0;
    for m in blocks {
        for j in 0..n {
            for i in 0..n {
                if !config.in_pattern(i, j) && m[(i, j)] != Complex64::new(0.0, 0.0) {
                    sparsity_violations += 1;
                }
            }
        }
    }

    let d = config.group_dimension();
    let group_residuals: Vec<f64> = (0..config.group_count())
        .map(|g| {
            let r = config.group_range(g);
            let mut gram = DMatrix::<Complex64>::identity(d, d) * Complex64::new(-1.0, 0.0);
            for m in blocks {
                let sub = m.view((r.start, r.start), (d, d));
                gram += sub.adjoint() * sub;
            }
            gram.norm()
        })
        .collect();
    let residual = group_residuals.iter().copied().fold(0.0_f64, f64::max);
    let passed = sparsity_violations == 0 && residual <= tol && residual.is_finite();
    Ok(ConstraintReport { group_residuals, residual, sparsity_violations, tolerance: tol, passed })
}

/// Nearest feasible scattering matrix to `raw` (see [`project_feasible_with`]).
pub fn project_feasible(raw: &[CMatrix], config: &RisConfig) -> Result<ScatteringMatrix, ScatteringError> {
    project_feasible_with(raw, config, ProjectionOptions::default())
}

/// Projects `raw` onto the constraint set of `config`.
///
/// Entries outside the sparsity pattern are dropped. For every group the
/// sector blocks are stacked into an `S·Ñ × Ñ` matrix whose polar factor
/// (orthonormal columns) is split back into the sectors. With one sector
/// and `Ñ = 1` this is plain modulus normalization that keeps the phase.
pub fn project_feasible_with(
    raw: &[CMatrix],
    config: &RisConfig,
    options: ProjectionOptions,
) -> Result<ScatteringMatrix, ScatteringError> {
    check_shapes(config, raw)?;
    let n = config.n_elements();
    let sectors = config.sectors();
    let d = config.group_dimension();

    let sym;
    let raw = if options.symmetric {
        sym = raw
            .iter()
            .map(|m| (m + m.transpose()) * Complex64::new(0.5, 0.0))
            .collect::<Vec<_>>();
        &sym[..]
    } else {
        raw
    };

    let mut out = vec![CMatrix::zeros(n, n); sectors];
    for g in 0..config.group_count() {
        let start = config.group_range(g).start;
        if d == 1 {
            let norm = raw.iter().map(|m| m[(start, start)].norm_sqr()).sum::<f64>().sqrt();
            if norm == 0.0 || !norm.is_finite() {
                return Err(ScatteringError::ZeroDiagonal { index: start });
            }
            for (o, m) in out.iter_mut().zip(raw) {
                o[(start, start)] = m[(start, start)] / norm;
            }
            continue;
        }
        let mut stack = CMatrix::zeros(sectors * d, d);
        for (s, m) in raw.iter().enumerate() {
            stack.view_mut((s * d, 0), (d, d)).copy_from(&m.view((start, start), (d, d)));
        }
        let u = polar_factor(&stack).ok_or_else(|| ScatteringError::RankDeficient(group_label(config, g)))?;
        for (s, o) in out.iter_mut().enumerate() {
            o.view_mut((start, start), (d, d)).copy_from(&u.view((s * d, 0), (d, d)));
        }
    }
    Ok(ScatteringMatrix { config: *config, blocks: out })
}

fn group_label(config: &RisConfig, g: usize) -> String {
    match config.architecture() {
        Architecture::FullyConnected => "the full response block".to_string(),
        _ => format!("group {g}"),
    }
}

/// Complex standard Gaussian matrices restricted to the sparsity pattern of
/// `config`, one per sector. Deterministic in `seed`.
pub fn gaussian_blocks(config: &RisConfig, seed: u64) -> Vec<CMatrix> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = config.n_elements();
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    (0..config.sectors())
        .map(|_| {
            let mut m = CMatrix::zeros(n, n);
            for j in 0..n {
                for i in 0..n {
                    if config.in_pattern(i, j) {
                        let re: f64 = StandardNormal.sample(&mut rng);
                        let im: f64 = StandardNormal.sample(&mut rng);
                        m[(i, j)] = Complex64::new(re * scale, im * scale);
                    }
                }
            }
            m
        })
        .collect()
}

/// Random feasible matrix: the projection of a seeded complex Gaussian draw,
/// which is Haar distributed on each unitary group block.
pub fn random_feasible(config: &RisConfig, seed: u64) -> Result<ScatteringMatrix, ScatteringError> {
    project_feasible(&gaussian_blocks(config, seed), config)
}
