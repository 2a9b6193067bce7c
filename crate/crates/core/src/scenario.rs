//! Monte Carlo element-count sweep for the V2V underlay case study.
//!
//! For every `(n, trial)` cell one channel realization is drawn and every
//! scheme is optimized on it. Surfaces are solved from the sparsest
//! architecture up, each warm-started from the solutions it contains, so
//! the per-trial ordering fully ≥ group ≥ single holds by construction.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{sample_scenario, ChannelError, FadingConfig, GeometryConfig, ScenarioChannels};
use crate::metrics::LinkBudget;
use crate::optimizer::{alternating_optimize_from, power_only, OptimizeError, OptimizeResult, OptimizerSettings};
use crate::scattering::{Architecture, RisConfig, ScatteringError, ScatteringMatrix};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("invalid sweep configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Optimize(#[from] OptimizeError),
    #[error(transparent)]
    Scattering(#[from] ScatteringError),
    #[error("cannot start worker pool: {0}")]
    ThreadPool(String),
}

/// Transmission scheme compared in the sweep. The derived order is the
/// order records are sorted in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    FullyConnected,
    /// Groups of `group_size` fully-connected elements (`G = N / group_size`).
    GroupConnected { group_size: usize },
    SingleConnected,
    NoRis,
}

impl Scheme {
    /// Stable identifier used in CSV output.
    pub fn label(&self) -> String {
        match self {
            Scheme::FullyConnected => "fully_connected".into(),
            Scheme::GroupConnected { group_size } => format!("group_connected_{group_size}"),
            Scheme::SingleConnected => "single_connected".into(),
            Scheme::NoRis => "no_ris".into(),
        }
    }

    /// Reflective surface configuration for `n` elements; `None` for the
    /// no-surface baseline.
    pub fn ris_config(&self, n: usize) -> Result<Option<RisConfig>, ScatteringError> {
        let arch = match *self {
            Scheme::FullyConnected => Architecture::FullyConnected,
            Scheme::GroupConnected { group_size } => {
                if group_size == 0 || !n.is_multiple_of(group_size) {
                    return Err(ScatteringError::GroupsDoNotDivide { n, groups: group_size });
                }
                Architecture::GroupConnected { groups: n / group_size }
            }
            Scheme::SingleConnected => Architecture::SingleConnected,
            Scheme::NoRis => return Ok(None),
        };
        RisConfig::reflective(arch, n).map(Some)
    }

    /// Number of elements wired together, which orders the warm-start chain.
    fn connectivity(&self, n: usize) -> usize {
        match *self {
            Scheme::FullyConnected => n,
            Scheme::GroupConnected { group_size } => group_size,
            Scheme::SingleConnected => 1,
            Scheme::NoRis => 0,
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub n_values: Vec<usize>,
    pub schemes: Vec<Scheme>,
    pub trials: usize,
    pub base_seed: u64,
    /// `budget.p_v` is the V2V power limit.
    pub budget: LinkBudget,
    pub geometry: GeometryConfig,
    pub fading: FadingConfig,
    pub optimizer: OptimizerSettings,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            n_values: (16..=64).step_by(8).collect(),
            schemes: vec![Scheme::FullyConnected, Scheme::SingleConnected, Scheme::NoRis],
            trials: 500,
            base_seed: 2024,
            budget: LinkBudget::default(),
            geometry: GeometryConfig::default(),
            fading: FadingConfig::default(),
            optimizer: OptimizerSettings::default(),
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let bad = |msg: String| Err(ScenarioError::InvalidConfig(msg));
        if self.n_values.is_empty() {
            return bad("n_values is empty".into());
        }
        if self.n_values[0] == 0 || self.n_values.windows(2).any(|w| w[1] <= w[0]) {
            return bad(format!("n_values must be positive and strictly increasing, got {:?}", self.n_values));
        }
        if self.schemes.is_empty() {
            return bad("schemes is empty".into());
        }
        let mut sorted = self.schemes.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != self.schemes.len() {
            return bad("schemes contains duplicates".into());
        }
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if !self.budget.is_valid() || !(self.budget.p_v > 0.0) {
            return bad("budget powers must be finite, p_v and noise positive".into());
        }
        self.geometry.validate()?;
        self.fading.validate()?;
        self.optimizer.validate()?;
        for s in &self.schemes {
            for &n in &self.n_values {
                if let Err(e) = s.ris_config(n) {
                    return bad(format!("scheme {s} at n = {n}: {e}"));
                }
            }
        }
        Ok(())
    }
}

/// Channel seed of a trial. It ignores both the scheme and `n`, so all
/// schemes share a realization and the realizations for different `n` are
/// prefixes of one another.
pub fn trial_seed(base_seed: u64, trial: usize) -> u64 {
    let mut z = base_seed ^ (trial as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub scheme: Scheme,
    pub n: usize,
    pub trial: usize,
    pub seed: u64,
    /// Bits/s/Hz.
    pub se: f64,
    /// Watts.
    pub p_v_opt: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// Mean and standard error of one `(scheme, n)` series point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub scheme: Scheme,
    pub n: usize,
    pub trials: usize,
    pub mean_se: f64,
    /// Sample standard deviation over `sqrt(trials)`; zero for one trial.
    pub std_error: f64,
    pub mean_p_v: f64,
    pub converged_fraction: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutput {
    pub records: Vec<SweepRecord>,
    pub aggregates: Vec<Aggregate>,
}

/// Optimizes every scheme of `schemes` on one realization. Returns results
/// in the order of `schemes`.
fn solve_cell(
    ch: &ScenarioChannels,
    schemes: &[Scheme],
    cfg: &SweepConfig,
) -> Result<Vec<OptimizeResult>, ScenarioError> {
    let n = ch.n();
    let p_max = cfg.budget.p_v;
    let mut order: Vec<usize> = (0..schemes.len()).collect();
    order.sort_by_key(|&i| (schemes[i].connectivity(n), schemes[i]));

    // the sparsest surface seeds every denser one
    let mut solved: Vec<(usize, ScatteringMatrix)> = Vec::new();
    let mut single = None;
    let needs_single = schemes.iter().any(|s| s.connectivity(n) > 1);
    if needs_single && !schemes.contains(&Scheme::SingleConnected) {
        single = Some(run_scheme(ch, Scheme::SingleConnected, cfg, &[])?);
    }
    if let Some(m) = single.as_ref().and_then(|r: &OptimizeResult| r.matrix_opt.clone()) {
        solved.push((1, m));
    }

    let mut out: Vec<Option<OptimizeResult>> = vec![None; schemes.len()];
    for i in order {
        let s = schemes[i];
        let r = match s {
            Scheme::NoRis => power_only(ch, &cfg.budget, p_max)?,
            _ => {
                let k = s.connectivity(n);
                let warm: Vec<ScatteringMatrix> =
                    solved.iter().filter(|(j, _)| *j < k && k.is_multiple_of(*j)).map(|(_, m)| m.clone()).collect();
                let r = run_scheme(ch, s, cfg, &warm)?;
                if let Some(m) = &r.matrix_opt {
                    solved.push((k, m.clone()));
                }
                r
            }
        };
        out[i] = Some(r);
    }
    Ok(out.into_iter().map(|r| r.expect("every scheme solved")).collect())
}

fn run_scheme(
    ch: &ScenarioChannels,
    scheme: Scheme,
    cfg: &SweepConfig,
    warm: &[ScatteringMatrix],
) -> Result<OptimizeResult, ScenarioError> {
    match scheme.ris_config(ch.n())? {
        None => Ok(power_only(ch, &cfg.budget, cfg.budget.p_v)?),
        Some(rc) => Ok(alternating_optimize_from(ch, &rc, &cfg.budget, cfg.budget.p_v, &cfg.optimizer, warm)?),
    }
}

fn cell_records(n: usize, trial: usize, cfg: &SweepConfig) -> Result<Vec<SweepRecord>, ScenarioError> {
    let seed = trial_seed(cfg.base_seed, trial);
    let ch = sample_scenario(&cfg.geometry, &cfg.fading, n, seed)?;
    let results = solve_cell(&ch, &cfg.schemes, cfg)?;
    Ok(cfg
        .schemes
        .iter()
        .zip(results)
        .map(|(&scheme, r)| SweepRecord {
            scheme,
            n,
            trial,
            seed,
            se: r.se,
            p_v_opt: r.p_v_opt,
            converged: r.converged,
            iterations: r.iterations,
        })
        .collect())
}

/// One record for `scheme` at `(n, trial)`. Warm starts follow the schemes
/// listed in `cfg`, so the record equals the one [`run_sweep`] produces.
pub fn run_trial(scheme: Scheme, n: usize, trial: usize, cfg: &SweepConfig) -> Result<SweepRecord, ScenarioError> {
    let mut local = cfg.clone();
    if !local.schemes.contains(&scheme) {
        local.schemes.push(scheme);
    }
    let k = scheme.connectivity(n);
    local.schemes.retain(|s| *s == scheme || (s.connectivity(n) < k && s.connectivity(n) > 0));
    let records = cell_records(n, trial, &local)?;
    Ok(records.into_iter().find(|r| r.scheme == scheme).expect("scheme is part of the cell"))
}

/// Runs every `(scheme, n, trial)` combination on `threads` workers (all
/// cores when `None`). The output does not depend on the thread count.
pub fn run_sweep(cfg: &SweepConfig, threads: Option<usize>) -> Result<SweepOutput, ScenarioError> {
    cfg.validate()?;
    let cells: Vec<(usize, usize)> =
        cfg.n_values.iter().flat_map(|&n| (0..cfg.trials).map(move |t| (n, t))).collect();
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        builder = builder.num_threads(t);
    }
    let pool = builder.build().map_err(|e| ScenarioError::ThreadPool(e.to_string()))?;
    let per_cell: Vec<Result<Vec<SweepRecord>, ScenarioError>> =
        pool.install(|| cells.par_iter().map(|&(n, t)| cell_records(n, t, cfg)).collect());

    let mut records = Vec::with_capacity(cells.len() * cfg.schemes.len());
    for r in per_cell {
        records.extend(r?);
    }
    records.sort_by_key(|r| (r.scheme, r.n, r.trial));
    let aggregates = aggregate(&records);
    Ok(SweepOutput { records, aggregates })
}

/// Per-`(scheme, n)` statistics of sorted records.
pub fn aggregate(records: &[SweepRecord]) -> Vec<Aggregate> {
    let mut out = Vec::new();
    for chunk in records.chunk_by(|a, b| a.scheme == b.scheme && a.n == b.n) {
        let k = chunk.len() as f64;
        let mean_se = chunk.iter().map(|r| r.se).sum::<f64>() / k;
        let std_error = if chunk.len() > 1 {
            let var = chunk.iter().map(|r| (r.se - mean_se).powi(2)).sum::<f64>() / (k - 1.0);
            (var / k).sqrt()
        } else {
            0.0
        };
        out.push(Aggregate {
            scheme: chunk[0].scheme,
            n: chunk[0].n,
            trials: chunk.len(),
            mean_se,
            std_error,
            mean_p_v: chunk.iter().map(|r| r.p_v_opt).sum::<f64>() / k,
            converged_fraction: chunk.iter().filter(|r| r.converged).count() as f64 / k,
        });
    }
    out
}
