//! Link quality of the V2V pair and its leakage into the cellular user.
//!
//! The V2V receiver sees
//!
//! ```text
//! SINR = p_v·|h_d + g_rᴴΦh_t|² / (p_c·|f_d + g_rᴴΦf_t|² + σ²)
//! ```
//!
//! and the cellular user receives `p_v·|q_d + q_rᴴΦh_t|²` of leakage. Every
//! function accepts `None` for the surface, meaning no surface is deployed
//! and only the direct terms remain.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::ScenarioChannels;
use crate::linalg::{CMatrix, CVector};
use crate::scattering::ScatteringMatrix;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("channel vectors have length {channel} but the surface has {surface} elements")]
    Dimension { channel: usize, surface: usize },
}

/// Powers in watts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinkBudget {
    /// V2V transmit power (the upper bound when power is optimized).
    pub p_v: f64,
    /// RSU transmit power.
    pub p_c: f64,
    /// Receiver noise variance.
    pub sigma2: f64,
    /// Largest interference power the cellular user tolerates.
    pub i_max: f64,
}

impl Default for LinkBudget {
    fn default() -> Self {
        Self { p_v: 1.0, p_c: 10.0, sigma2: 1e-4, i_max: 1e-3 }
    }
}

impl LinkBudget {
    pub fn is_valid(&self) -> bool {
        [self.p_v, self.p_c, self.i_max].iter().all(|v| *v >= 0.0 && v.is_finite())
            && self.sigma2 > 0.0
            && self.sigma2.is_finite()
    }

    pub fn with_power(&self, p_v: f64) -> Self {
        Self { p_v, ..*self }
    }
}

/// `direct + outgoingᴴ · Φ · incoming`.
pub fn effective_channel(
    direct: Complex64,
    incoming: &CVector,
    outgoing: &CVector,
    phi: &CMatrix,
) -> Result<Complex64, MetricsError> {
    let n = phi.ncols();
    if phi.nrows() != n || incoming.len() != n || outgoing.len() != n {
        return Err(MetricsError::Dimension { channel: incoming.len().max(outgoing.len()), surface: n });
    }
    Ok(direct + outgoing.dotc(&(phi * incoming)))
}

/// The three scalars every metric is built from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Couplings {
    /// Useful V2V channel.
    pub signal: Complex64,
    /// RSU interference channel at the V2V receiver.
    pub interference: Complex64,
    /// V2V leakage channel at the cellular user.
    pub leakage: Complex64,
}

/// Unchecked: caller guarantees matching dimensions.
pub(crate) fn couplings(ch: &ScenarioChannels, phi: Option<&CMatrix>) -> Couplings {
    match phi {
        None => Couplings { signal: ch.h_d, interference: ch.f_d, leakage: ch.q_d },
        Some(phi) => {
            let ph = phi * &ch.h_t;
            let pf = phi * &ch.f_t;
            Couplings {
                signal: ch.h_d + ch.g_r.dotc(&ph),
                interference: ch.f_d + ch.g_r.dotc(&pf),
                leakage: ch.q_d + ch.q_r.dotc(&ph),
            }
        }
    }
}

pub(crate) fn check_dims(ch: &ScenarioChannels, m: Option<&ScatteringMatrix>) -> Result<(), MetricsError> {
    match m {
        Some(m) if m.n() != ch.n() => Err(MetricsError::Dimension { channel: ch.n(), surface: m.n() }),
        _ => Ok(()),
    }
}

impl Couplings {
    pub fn sinr(&self, b: &LinkBudget) -> f64 {
        b.p_v * self.signal.norm_sqr() / (b.p_c * self.interference.norm_sqr() + b.sigma2)
    }
}

/// SINR at the V2V receiver. Uses the surface's primary block.
pub fn sinr_v2v(ch: &ScenarioChannels, m: Option<&ScatteringMatrix>, b: &LinkBudget) -> Result<f64, MetricsError> {
    check_dims(ch, m)?;
    Ok(couplings(ch, m.map(|m| m.primary_block())).sinr(b))
}

/// Interference power `p_v·|q_d + q_rᴴΦh_t|²` caused at the cellular user.
pub fn cellular_interference(ch: &ScenarioChannels, m: Option<&ScatteringMatrix>, p_v: f64) -> Result<f64, MetricsError> {
    check_dims(ch, m)?;
    Ok(p_v * couplings(ch, m.map(|m| m.primary_block())).leakage.norm_sqr())
}

/// `log2(1 + sinr)` in bits/s/Hz.
pub fn spectral_efficiency(sinr: f64) -> f64 {
    sinr.ln_1p() / std::f64::consts::LN_2
}
