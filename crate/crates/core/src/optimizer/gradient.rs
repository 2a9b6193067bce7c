//! Objectives over the surface response and their Wirtinger gradients.
//!
//! For a real objective `F(Φ)` the conjugate-coordinate gradient is
//! `G = ∂F/∂Φ*`, so that `dF = 2·Re tr(Gᴴ dΦ)`. With
//! `a = h_d + g_rᴴΦh_t`, `b = f_d + g_rᴴΦf_t`, `l = q_d + q_rᴴΦh_t` and
//! `D = p_c|b|² + σ²`:
//!
//! ```text
//! ∂|a|²/∂Φ* = a·g_r h_tᴴ     ∂|b|²/∂Φ* = b·g_r f_tᴴ     ∂|l|²/∂Φ* = l·q_r h_tᴴ
//! ```
//!
//! so every gradient is a sum of at most two rank-one terms.

use crate::channel::ScenarioChannels;
use crate::linalg::{hermitian_part, CMatrix, CVector};
use crate::metrics::{check_dims, couplings, spectral_efficiency, Couplings, LinkBudget, MetricsError};
use crate::scattering::ScatteringMatrix;

/// Spectral-efficiency objective seen by the surface update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Objective {
    /// SE with the V2V power held at the given value.
    FixedPower(f64),
    /// SE with the V2V power set to `min(p_max, i_max / L(Φ))`, the value
    /// the closed-form power update returns for the same surface.
    CappedPower { p_max: f64 },
}

/// `min(p_max, i_max / leakage)`, or `p_max` when there is no leakage.
pub(crate) fn power_for_leakage(leakage_gain: f64, i_max: f64, p_max: f64) -> f64 {
    if leakage_gain > 0.0 {
        (i_max / leakage_gain).min(p_max)
    } else {
        p_max
    }
}

impl Objective {
    pub(crate) fn power(&self, c: &Couplings, b: &LinkBudget) -> f64 {
        match *self {
            Objective::FixedPower(p) => p,
            Objective::CappedPower { p_max } => power_for_leakage(c.leakage.norm_sqr(), b.i_max, p_max),
        }
    }

    /// True when the power in use is pinned by the interference cap.
    fn cap_binding(&self, c: &Couplings, b: &LinkBudget) -> bool {
        match *self {
            Objective::FixedPower(_) => false,
            Objective::CappedPower { p_max } => {
                let l = c.leakage.norm_sqr();
                l > 0.0 && b.i_max / l < p_max
            }
        }
    }

    pub(crate) fn value_at(&self, c: &Couplings, b: &LinkBudget) -> f64 {
        spectral_efficiency(c.sinr(&b.with_power(self.power(c, b))))
    }

    /// Objective value in bits/s/Hz; `None` evaluates the direct links only.
    pub fn value(&self, ch: &ScenarioChannels, m: Option<&ScatteringMatrix>, b: &LinkBudget) -> Result<f64, MetricsError> {
        check_dims(ch, m)?;
        Ok(self.value_at(&couplings(ch, m.map(|m| m.primary_block())), b))
    }
}

/// Gradient kept as `Σ_k x_k y_kᴴ`.
#[derive(Debug, Clone)]
pub(crate) struct LowRank {
    pub terms: Vec<(CVector, CVector)>,
}

impl LowRank {
    pub fn dense(&self, n: usize) -> CMatrix {
        let mut g = CMatrix::zeros(n, n);
        for (x, y) in &self.terms {
            g += x * y.adjoint();
        }
        g
    }

    /// Diagonal `len × len` sub-block starting at `(start, start)`.
    pub fn block(&self, start: usize, len: usize) -> CMatrix {
        let mut g = CMatrix::zeros(len, len);
        for (x, y) in &self.terms {
            g += x.rows(start, len) * y.rows(start, len).adjoint();
        }
        g
    }

    /// `w·self + (1 − w)·other`.
    pub fn blend(&self, w: f64, other: &LowRank) -> LowRank {
        let scaled = |t: &(CVector, CVector), f: f64| (t.0.clone(), t.1.map(|z| z * f));
        let terms = self.terms.iter().map(|t| scaled(t, w)).chain(other.terms.iter().map(|t| scaled(t, 1.0 - w))).collect();
        LowRank { terms }
    }

    pub fn diagonal(&self, n: usize) -> CVector {
        CVector::from_fn(n, |i, _| self.terms.iter().map(|(x, y)| x[i] * y[i].conj()).sum())
    }
}

pub(crate) fn gradient_factors(obj: &Objective, ch: &ScenarioChannels, c: &Couplings, b: &LinkBudget) -> LowRank {
    piece_factors(ch, c, b, obj.power(c, b), obj.cap_binding(c, b))
}

/// Gradient of the SE with power `p`, or with power `i_max / L(Φ)` when
/// `through_leakage` is set (then `p` must equal that value).
pub(crate) fn piece_factors(ch: &ScenarioChannels, c: &Couplings, b: &LinkBudget, p: f64, through_leakage: bool) -> LowRank {
    let d = b.p_c * c.interference.norm_sqr() + b.sigma2;
    let sinr = p * c.signal.norm_sqr() / d;
    let eta = 1.0 / (std::f64::consts::LN_2 * (1.0 + sinr));

    // ∂SINR/∂Φ* = (p/D)·a·g hᴴ − (SINR·p_c/D)·b·g fᴴ [− (SINR/|l|²)·l·q hᴴ]
    let ca = c.signal * (eta * p / d);
    let cb = c.interference * (eta * sinr * b.p_c / d);
    let right = ch.h_t.map(|z| z * ca.conj()) - ch.f_t.map(|z| z * cb.conj());
    let mut terms = vec![(ch.g_r.clone(), right)];
    if through_leakage {
        let cl = c.leakage * (eta * sinr / c.leakage.norm_sqr());
        terms.push((ch.q_r.clone(), ch.h_t.map(|z| -z * cl.conj())));
    }
    LowRank { terms }
}

/// Conjugate-coordinate gradient `∂F/∂Φ*` of `obj` with respect to every
/// entry of the primary block, treating the entries as free complex
/// variables (no constraint, no sparsity mask).
pub fn wirtinger_gradient(
    obj: &Objective,
    ch: &ScenarioChannels,
    m: &ScatteringMatrix,
    b: &LinkBudget,
) -> Result<CMatrix, MetricsError> {
    check_dims(ch, Some(m))?;
    let c = couplings(ch, Some(m.primary_block()));
    Ok(gradient_factors(obj, ch, &c, b).dense(m.n()))
}

/// Projection of a Euclidean gradient onto the tangent space of the
/// constraint set at `m`: per group, with the sector blocks stacked into
/// `X`, `G − X·herm(Xᴴ G)`. Entries outside the sparsity pattern are zero.
pub fn tangent_project(m: &ScatteringMatrix, gradient: &[CMatrix]) -> Vec<CMatrix> {
    let cfg = m.config();
    let n = cfg.n_elements();
    let d = cfg.group_dimension();
    let sectors = cfg.sectors();
    let mut out = vec![CMatrix::zeros(n, n); sectors];
    for g in 0..cfg.group_count() {
        let start = cfg.group_range(g).start;
        let mut x = CMatrix::zeros(sectors * d, d);
        let mut gs = CMatrix::zeros(sectors * d, d);
        for s in 0..sectors {
            x.view_mut((s * d, 0), (d, d)).copy_from(&m.blocks()[s].view((start, start), (d, d)));
            gs.view_mut((s * d, 0), (d, d)).copy_from(&gradient[s].view((start, start), (d, d)));
        }
        let r = &gs - &x * hermitian_part(&(x.adjoint() * &gs));
        for (s, o) in out.iter_mut().enumerate() {
            o.view_mut((start, start), (d, d)).copy_from(&r.view((s * d, 0), (d, d)));
        }
    }
    out
}

/// Frobenius norm of the tangent-projected gradient of `obj` at `m`
/// (single-block modes).
pub fn riemannian_gradient_norm(
    obj: &Objective,
    ch: &ScenarioChannels,
    m: &ScatteringMatrix,
    b: &LinkBudget,
) -> Result<f64, MetricsError> {
    let g = wirtinger_gradient(obj, ch, m, b)?;
    Ok(tangent_project(m, &[g]).iter().map(|r| r.norm_squared()).sum::<f64>().sqrt())
}
