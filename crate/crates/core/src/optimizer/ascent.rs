use num_complex::Complex64;

use super::gradient::{gradient_factors, piece_factors, power_for_leakage, LowRank, Objective};
use super::{OptimizeError, OptimizerSettings};
use crate::channel::ScenarioChannels;
use crate::linalg::{hermitian_part, orthonormal_basis, orthonormality_residual, polar_factor, CMatrix, CVector};
use crate::metrics::{check_dims, couplings, Couplings, LinkBudget};
use crate::scattering::{project_feasible, RisConfig, ScatteringMatrix};

/// Sufficient-increase constant of the backtracking rule.
const ARMIJO: f64 = 1e-4;

/// The power cap is treated as active on both sides once the two SE
/// branches differ by less than this many first-order step gains.
const KINK_BAND: f64 = 4.0;

/// Drift from unitarity tolerated before the low-rank path re-projects.
const REORTHO_TOL: f64 = 1e-12;

/// Tangent-space ascent direction at the current iterate.
enum Direction {
    /// Single-connected: one complex number per element.
    Diagonal(CVector),
    /// Block-diagonal with several groups; retracted by projection.
    Blocks(CMatrix),
    /// One fully-connected block, kept as `Φ·Q·K·Qᴴ` with `K` skew-Hermitian.
    LowRank { phi_q: CMatrix, q: CMatrix, k: CMatrix },
}

impl Direction {
    fn new(cfg: &RisConfig, phi: &CMatrix, grad: &LowRank) -> Self {
        let n = cfg.n_elements();
        let d = cfg.group_dimension();
        if d == 1 {
            let g = grad.diagonal(n);
            return Direction::Diagonal(CVector::from_fn(n, |i, _| {
                let p = phi[(i, i)];
                g[i] - p * (p.conj() * g[i]).re
            }));
        }
        if cfg.group_count() > 1 {
            let mut r = CMatrix::zeros(n, n);
            for g in 0..cfg.group_count() {
                let start = cfg.group_range(g).start;
                let x = phi.view((start, start), (d, d)).clone_owned();
                let gg = grad.block(start, d);
                let rg = &gg - &x * hermitian_part(&(x.adjoint() * &gg));
                r.view_mut((start, start), (d, d)).copy_from(&rg);
            }
            return Direction::Blocks(r);
        }

        // ΦᴴG = Σ u_k y_kᴴ, and R = Φ·skew(ΦᴴG) lives on span{u_k, y_k}.
        let phi_h = phi.adjoint();
        let pairs: Vec<(CVector, CVector)> = grad.terms.iter().map(|(x, y)| (&phi_h * x, y.clone())).collect();
        let span: Vec<CVector> = pairs.iter().flat_map(|(u, y)| [u.clone(), y.clone()]).collect();
        let basis = orthonormal_basis(&span, 1e-14);
        let r = basis.len();
        let q = if r == 0 { CMatrix::zeros(n, 0) } else { CMatrix::from_columns(&basis) };
        let mut k = CMatrix::zeros(r, r);
        for (u, y) in &pairs {
            let qu = q.adjoint() * u;
            let qy = q.adjoint() * y;
            k += (&qu * qy.adjoint() - &qy * qu.adjoint()) * Complex64::new(0.5, 0.0);
        }
        Direction::LowRank { phi_q: phi * &q, q, k }
    }

    /// Real inner product `Re tr(Aᴴ B)` of two directions at the same point.
    fn inner(&self, other: &Direction) -> f64 {
        match (self, other) {
            (Direction::Diagonal(a), Direction::Diagonal(b)) => a.dotc(b).re,
            (Direction::Blocks(a), Direction::Blocks(b)) => a.dotc(b).re,
            (Direction::LowRank { q: q1, k: k1, .. }, Direction::LowRank { q: q2, k: k2, .. }) => {
                let m = q1.adjoint() * q2;
                (k1.adjoint() * &m * k2 * m.adjoint()).trace().re
            }
            _ => unreachable!("directions at one iterate share a representation"),
        }
    }

    fn norm(&self) -> f64 {
        match self {
            Direction::Diagonal(r) => r.norm(),
            Direction::Blocks(r) => r.norm(),
            Direction::LowRank { k, .. } => k.norm(),
        }
    }

    /// Feasible point reached from `phi` along `s` times the direction.
    fn retract(&self, cfg: &RisConfig, phi: &CMatrix, s: f64) -> Result<CMatrix, OptimizeError> {
        let s = Complex64::new(s, 0.0);
        match self {
            Direction::Diagonal(r) => {
                let mut out = CMatrix::zeros(phi.nrows(), phi.ncols());
                for i in 0..r.len() {
                    let z = phi[(i, i)] + r[i] * s;
                    out[(i, i)] = z / z.norm();
                }
                Ok(out)
            }
            Direction::Blocks(r) => {
                let raw = phi + r * s;
                Ok(project_feasible(&[raw], cfg)?.into_blocks().swap_remove(0))
            }
            Direction::LowRank { phi_q, q, k } => {
                let r = k.nrows();
                let step = CMatrix::identity(r, r) + k * s;
                let mut p = polar_factor(&step).unwrap_or_else(|| CMatrix::identity(r, r));
                for i in 0..r {
                    p[(i, i)] -= Complex64::new(1.0, 0.0);
                }
                Ok(phi + phi_q * p * q.adjoint())
            }
        }
    }
}

/// Smallest element of the convex hull of the tangent gradients of the two
/// SE branches `SE(p_max)` and `SE(i_max / L)`; moving along it raises both
/// to first order, which is what the capped objective (their minimum) needs
/// near the switch between them.
fn kink_direction(cfg: &RisConfig, phi: &CMatrix, ch: &ScenarioChannels, c: &Couplings, b: &LinkBudget, p_max: f64) -> Direction {
    let l = c.leakage.norm_sqr();
    let free = piece_factors(ch, c, b, p_max, false);
    let capped = piece_factors(ch, c, b, power_for_leakage(l, b.i_max, f64::INFINITY), true);
    let d1 = Direction::new(cfg, phi, &free);
    let d2 = Direction::new(cfg, phi, &capped);
    let (a11, a12, a22) = (d1.inner(&d1), d1.inner(&d2), d2.inner(&d2));
    let denom = a11 - 2.0 * a12 + a22;
    let w = if denom > 0.0 { ((a22 - a12) / denom).clamp(0.0, 1.0) } else { 0.5 };
    Direction::new(cfg, phi, &free.blend(w, &capped))
}

/// Outcome of one ascent run.
pub(crate) struct Ascent {
    pub matrix: ScatteringMatrix,
    pub value: f64,
}

/// Riemannian gradient ascent on the constraint set with backtracking.
///
/// Each step moves a Frobenius distance `t` along the normalized
/// tangent-projected gradient and retracts onto the feasible set. A step is
/// accepted only if it raises the objective by at least `1e-4·t·2‖R‖`
/// (the first-order increase is `2t‖R‖`), so the output is never worse than
/// `m0`. With a [`Objective::FixedPower`] objective and a start that meets
/// the interference cap, steps that would break the cap are rejected too.
pub fn projected_gradient_ascent(
    ch: &ScenarioChannels,
    m0: &ScatteringMatrix,
    b: &LinkBudget,
    objective: &Objective,
    settings: &OptimizerSettings,
) -> Result<ScatteringMatrix, OptimizeError> {
    Ok(ascend(ch, m0, b, objective, settings)?.matrix)
}

pub(crate) fn ascend(
    ch: &ScenarioChannels,
    m0: &ScatteringMatrix,
    b: &LinkBudget,
    objective: &Objective,
    settings: &OptimizerSettings,
) -> Result<Ascent, OptimizeError> {
    let cfg = *m0.config();
    super::check_single_block(&cfg)?;
    check_dims(ch, Some(m0))?;
    settings.validate()?;

    let within_cap = |p: f64, c: &Couplings| p * c.leakage.norm_sqr() <= b.i_max * (1.0 + 1e-12);
    let mut phi = m0.primary_block().clone();
    let mut c = couplings(ch, Some(&phi));
    let mut f = objective.value_at(&c, b);
    let cap = match *objective {
        Objective::FixedPower(p) if within_cap(p, &c) => Some(p),
        _ => None,
    };
    let admissible = |c: &Couplings| cap.is_none_or(|p| within_cap(p, c));

    let t_max = 2.0 * (cfg.n_elements() as f64).sqrt();
    let mut t = settings.step_init.min(t_max);
    for _ in 0..settings.inner_grad_iters {
        let kink = match *objective {
            Objective::CappedPower { p_max } if c.leakage.norm_sqr() > 0.0 => Some(p_max),
            _ => None,
        };
        let mut dir = Direction::new(&cfg, &phi, &gradient_factors(objective, ch, &c, b));
        let mut blended = false;
        if let Some(p_max) = kink {
            let free = Objective::FixedPower(p_max).value_at(&c, b);
            let capped = Objective::FixedPower(b.i_max / c.leakage.norm_sqr()).value_at(&c, b);
            let gap = (free - capped).abs();
            if gap <= KINK_BAND * t * dir.norm() {
                dir = kink_direction(&cfg, &phi, ch, &c, b, p_max);
                blended = true;
            }
        }

        let t_start = t;
        let mut step = None;
        loop {
            let norm = dir.norm();
            if !(norm > settings.grad_tol) {
                break;
            }
            t = t_start;
            for _ in 0..=settings.max_backtracks {
                let cand = dir.retract(&cfg, &phi, t / norm)?;
                let cc = couplings(ch, Some(&cand));
                let fc = objective.value_at(&cc, b);
                if fc > f && fc - f >= ARMIJO * t * 2.0 * norm && admissible(&cc) {
                    step = Some((cand, cc, fc));
                    break;
                }
                t *= settings.backtrack_factor;
            }
            match (step.is_some(), kink) {
                (false, Some(p_max)) if !blended => {
                    dir = kink_direction(&cfg, &phi, ch, &c, b, p_max);
                    blended = true;
                }
                _ => break,
            }
        }
        let Some((cand, cc, fc)) = step else {
            break;
        };
        phi = cand;
        c = cc;
        f = fc;
        t = (t / settings.backtrack_factor).min(t_max);
    }

    if cfg.group_count() == 1 && cfg.group_dimension() > 1 && orthonormality_residual(&phi) > REORTHO_TOL {
        if let Ok(clean) = project_feasible(&[phi.clone()], &cfg) {
            let cc = couplings(ch, Some(clean.primary_block()));
            let fc = objective.value_at(&cc, b);
            if fc >= f && admissible(&cc) {
                phi = clean.into_blocks().swap_remove(0);
                f = fc;
            }
        }
    }
    Ok(Ascent { matrix: ScatteringMatrix::new(cfg, vec![phi])?, value: f })
}
