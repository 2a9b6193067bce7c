use std::f64::consts::{FRAC_PI_2, PI, TAU};

use num_complex::Complex64;

use super::gradient::Objective;
use super::{check_budget, check_single_block, OptimizeError};
use crate::channel::ScenarioChannels;
use crate::linalg::{CMatrix, CVector};
use crate::metrics::{LinkBudget, MetricsError};
use crate::scattering::{RisConfig, ScatteringMatrix};

/// Best grid point found by [`brute_force_oracle`].
#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub se: f64,
    pub p_v: f64,
    pub matrix: ScatteringMatrix,
}

/// Largest single-connected surface searched exhaustively.
const MAX_DIAGONAL: usize = 3;

/// Exhaustive grid search over the surface, with the power set to
/// `min(p_max, i_max / L)` at every grid point.
///
/// Diagonal surfaces (up to three elements) use `points_per_turn` phases
/// per element. A fully-connected two-element surface is searched through
///
/// ```text
/// e^{jα}·[[cos θ e^{jβ}, sin θ e^{jγ}], [−sin θ e^{−jγ}, cos θ e^{−jβ}]]
/// ```
///
/// with `β, γ` over a full turn, `α` over half a turn and `θ` over
/// `[0, π/2]`, all at spacing `2π / points_per_turn`. The omitted ranges
/// map onto the searched ones by shifting the other angles by `π`.
pub fn brute_force_oracle(
    ch: &ScenarioChannels,
    config: &RisConfig,
    b: &LinkBudget,
    p_max: f64,
    points_per_turn: usize,
) -> Result<OracleResult, OptimizeError> {
    check_single_block(config)?;
    check_budget(b, p_max)?;
    let n = config.n_elements();
    if ch.n() != n {
        return Err(MetricsError::Dimension { channel: ch.n(), surface: n }.into());
    }
    if !(4..=1 << 14).contains(&points_per_turn) {
        return Err(OptimizeError::InstanceTooLarge(format!("points_per_turn must lie in 4..=16384, got {points_per_turn}")));
    }

    let phi = if config.group_dimension() == 1 {
        if n > MAX_DIAGONAL {
            return Err(OptimizeError::InstanceTooLarge(format!("diagonal search supports N ≤ {MAX_DIAGONAL}, got {n}")));
        }
        search_diagonal(ch, b, p_max, points_per_turn)
    } else if config.group_count() == 1 && n == 2 {
        search_u2(ch, b, p_max, points_per_turn)
    } else {
        return Err(OptimizeError::InstanceTooLarge(format!("no exhaustive search for {} with N = {n}", config.architecture())));
    };

    let matrix = ScatteringMatrix::new(*config, vec![phi])?;
    let obj = Objective::CappedPower { p_max };
    let se = obj.value(ch, Some(&matrix), b)?;
    let p_v = super::optimal_power(ch, Some(&matrix), b, p_max)?;
    Ok(OracleResult { se, p_v, matrix })
}

/// `|x0 + e^{jω}·x1|² = c + 2·(k.re·cos ω − k.im·sin ω)` with `k = conj(x0)·x1`.
#[derive(Clone, Copy)]
struct Rotated {
    c: f64,
    k: Complex64,
}

impl Rotated {
    fn new(x0: Complex64, x1: Complex64) -> Self {
        Self { c: x0.norm_sqr() + x1.norm_sqr(), k: x0.conj() * x1 }
    }

    /// `(|x0| + |x1|)²` and `(|x0| − |x1|)²`.
    fn extremes(&self) -> (f64, f64) {
        let r = 2.0 * self.k.norm();
        (self.c + r, (self.c - r).max(0.0))
    }
}

/// Outer-grid stride of the warm-up pass in the exhaustive searches.
const COARSE_STRIDE: usize = 8;

/// Upper bound on the SINR over every rotation `ω`; lets a search skip a
/// sweep that cannot beat the best point already found.
fn sinr_bound(a: Rotated, bi: Rotated, l: Rotated, budget: &LinkBudget, p_max: f64) -> f64 {
    let (a_hi, _) = a.extremes();
    let (_, b_lo) = bi.extremes();
    let (_, l_lo) = l.extremes();
    let p = if l_lo > 0.0 { (budget.i_max / l_lo).min(p_max) } else { p_max };
    // slack covers rounding between the bound and the swept values
    (1.0 + 1e-9) * p * a_hi / (budget.p_c * b_lo + budget.sigma2)
}

/// Grid points scored per chunk in [`PhaseGrid::best`].
const LANES: usize = 8;

/// Phases `k·spacing`, padded to whole chunks with copies of phase 0.
struct PhaseGrid {
    count: usize,
    cos: Vec<f64>,
    sin: Vec<f64>,
}

impl PhaseGrid {
    fn new(count: usize, spacing: f64) -> Self {
        let padded = count.div_ceil(LANES) * LANES;
        let angles = (0..padded).map(|k| if k < count { k as f64 * spacing } else { 0.0 });
        Self { count, cos: angles.clone().map(f64::cos).collect(), sin: angles.map(f64::sin).collect() }
    }

    fn phase(&self, k: usize) -> Complex64 {
        Complex64::new(self.cos[k], self.sin[k])
    }

    /// Highest SINR over the grid for the signal, interference and leakage
    /// channels `x0 + e^{jω}x1`, with its index.
    fn best(&self, a: Rotated, bi: Rotated, l: Rotated, budget: &LinkBudget, p_max: f64) -> (f64, usize) {
        let (pc, s2, i_max) = (budget.p_c, budget.sigma2, budget.i_max);
        let mut best = f64::NEG_INFINITY;
        let mut arg = 0;
        for (chunk, (cs, ss)) in self.cos.chunks_exact(LANES).zip(self.sin.chunks_exact(LANES)).enumerate() {
            let mut v = [0.0; LANES];
            for i in 0..LANES {
                let (c, s) = (cs[i], ss[i]);
                let a2 = a.c + 2.0 * (a.k.re * c - a.k.im * s);
                let b2 = bi.c + 2.0 * (bi.k.re * c - bi.k.im * s);
                let l2 = (l.c + 2.0 * (l.k.re * c - l.k.im * s)).max(f64::MIN_POSITIVE);
                // p·a2/D with p = min(p_max, i_max / l2)
                v[i] = a2 * (p_max * l2).min(i_max) / (l2 * (pc * b2 + s2));
            }
            let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if m > best {
                best = m;
                arg = chunk * LANES + v.iter().position(|&x| x == m).unwrap_or(0);
            }
        }
        // padding repeats phase 0, which can tie but never win
        debug_assert!(arg < self.count);
        (best, arg)
    }

    fn len(&self) -> usize {
        self.count
    }
}

fn search_diagonal(ch: &ScenarioChannels, b: &LinkBudget, p_max: f64, points: usize) -> CMatrix {
    let n = ch.n();
    let grid = PhaseGrid::new(points, TAU / points as f64);
    let ca: Vec<Complex64> = (0..n).map(|i| ch.g_r[i].conj() * ch.h_t[i]).collect();
    let cb: Vec<Complex64> = (0..n).map(|i| ch.g_r[i].conj() * ch.f_t[i]).collect();
    let cl: Vec<Complex64> = (0..n).map(|i| ch.q_r[i].conj() * ch.h_t[i]).collect();
    let last = n - 1;

    let mut best = (f64::NEG_INFINITY, vec![0; n]);
    for stride in [COARSE_STRIDE, 1] {
        let outer = points.div_ceil(stride).pow(last as u32);
        let mut idx = vec![0usize; last];
        for _ in 0..outer {
            let (mut a0, mut b0, mut l0) = (ch.h_d, ch.f_d, ch.q_d);
            for (i, &k) in idx.iter().enumerate() {
                let e = grid.phase(k);
                a0 += e * ca[i];
                b0 += e * cb[i];
                l0 += e * cl[i];
            }
            let (ra, rb, rl) = (Rotated::new(a0, ca[last]), Rotated::new(b0, cb[last]), Rotated::new(l0, cl[last]));
            if sinr_bound(ra, rb, rl, b, p_max) > best.0 {
                let (v, k) = grid.best(ra, rb, rl, b, p_max);
                if v > best.0 {
                    best.0 = v;
                    best.1[..last].copy_from_slice(&idx);
                    best.1[last] = k;
                }
            }
            for slot in idx.iter_mut() {
                *slot += stride;
                if *slot < points {
                    break;
                }
                *slot = 0;
            }
        }
    }
    CMatrix::from_diagonal(&CVector::from_iterator(n, best.1.iter().map(|&k| grid.phase(k))))
}

/// `e^{jβ}·m00 + e^{−jβ}·m11` and `e^{jγ}·m01 − e^{−jγ}·m10` over a grid,
/// for one bilinear form `m_ij = conj(out_i)·in_j`.
fn u2_parts(out: &CVector, inc: &CVector, grid: &PhaseGrid) -> (Vec<Complex64>, Vec<Complex64>) {
    let m = |i: usize, j: usize| out[i].conj() * inc[j];
    let n = grid.len();
    let diag = (0..n).map(|k| grid.phase(k) * m(0, 0) + grid.phase(k).conj() * m(1, 1)).collect();
    let anti = (0..n).map(|k| grid.phase(k) * m(0, 1) - grid.phase(k).conj() * m(1, 0)).collect();
    (diag, anti)
}

fn u2(theta: f64, alpha: Complex64, beta: Complex64, gamma: Complex64) -> CMatrix {
    let (s, c) = theta.sin_cos();
    CMatrix::from_row_slice(
        2,
        2,
        &[alpha * beta * c, alpha * gamma * s, -alpha * gamma.conj() * s, alpha * beta.conj() * c],
    )
}

fn search_u2(ch: &ScenarioChannels, b: &LinkBudget, p_max: f64, points: usize) -> CMatrix {
    let spacing = TAU / points as f64;
    let turn = PhaseGrid::new(points, spacing);
    let half = PhaseGrid::new((PI / spacing).ceil() as usize, spacing);
    let theta_steps = (FRAC_PI_2 / spacing).ceil() as usize;
    let thetas: Vec<f64> = (0..=theta_steps).map(|k| k as f64 * FRAC_PI_2 / theta_steps as f64).collect();

    let (pa, qa) = u2_parts(&ch.g_r, &ch.h_t, &turn);
    let (pb, qb) = u2_parts(&ch.g_r, &ch.f_t, &turn);
    let (pl, ql) = u2_parts(&ch.q_r, &ch.h_t, &turn);

    let mut best = (f64::NEG_INFINITY, 0.0, 0, 0, 0);
    // a coarse pass first raises the bar the pruning test compares against
    for stride in [COARSE_STRIDE, 1] {
        for &theta in thetas.iter().step_by(stride) {
            let (s, c) = theta.sin_cos();
            for j in (0..points).step_by(stride) {
                for k in (0..points).step_by(stride) {
                    let a1 = pa[j] * c + qa[k] * s;
                    let b1 = pb[j] * c + qb[k] * s;
                    let l1 = pl[j] * c + ql[k] * s;
                    let (ra, rb, rl) = (Rotated::new(ch.h_d, a1), Rotated::new(ch.f_d, b1), Rotated::new(ch.q_d, l1));
                    if sinr_bound(ra, rb, rl, b, p_max) <= best.0 {
                        continue;
                    }
                    let (v, i) = half.best(ra, rb, rl, b, p_max);
                    if v > best.0 {
                        best = (v, theta, i, j, k);
                    }
                }
            }
        }
    }
    let (_, theta, i, j, k) = best;
    u2(theta, half.phase(i), turn.phase(j), turn.phase(k))
}
