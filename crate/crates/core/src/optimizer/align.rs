use num_complex::Complex64;

use super::OptimizeError;
use crate::channel::ScenarioChannels;
use crate::linalg::{complete_unitary, CMatrix};
use crate::scattering::{Mode, RisConfig, ScatteringMatrix};

/// Closed-form surface that co-phases the useful path with the direct
/// link, ignoring interference and leakage.
///
/// Per group with sub-vectors `g`, `h` the block is `e^{j∠h_d}·U Vᴴ`, where
/// `U` and `V` are unitary completions of `g/‖g‖` and `h/‖h‖`; this gives
/// `|h_eff| = |h_d| + Σ_g ‖g_(g)‖·‖h_(g)‖`. For one-element groups it reduces
/// to the phase `∠h_d + ∠g_n − ∠h_n`.
pub fn closed_form_align(ch: &ScenarioChannels, config: &RisConfig) -> Result<ScatteringMatrix, OptimizeError> {
    if !matches!(config.mode(), Mode::Reflective | Mode::Transmissive) {
        return Err(OptimizeError::UnsupportedMode(config.mode()));
    }
    let n = config.n_elements();
    if ch.n() != n {
        return Err(OptimizeError::Dimension { channel: ch.n(), surface: n });
    }
    if ch.h_t.norm() == 0.0 {
        return Err(OptimizeError::ZeroChannel("h_t"));
    }
    if ch.g_r.norm() == 0.0 {
        return Err(OptimizeError::ZeroChannel("g_r"));
    }

    let rot = Complex64::from_polar(1.0, ch.h_d.arg());
    let d = config.group_dimension();
    let mut phi = CMatrix::zeros(n, n);
    for g in 0..config.group_count() {
        let start = config.group_range(g).start;
        let gs = ch.g_r.rows(start, d).clone_owned();
        let hs = ch.h_t.rows(start, d).clone_owned();
        let block = match (complete_unitary(&gs), complete_unitary(&hs)) {
            (Some(u), Some(v)) => u * v.adjoint() * rot,
            _ => CMatrix::identity(d, d) * rot,
        };
        phi.view_mut((start, start), (d, d)).copy_from(&block);
    }
    Ok(ScatteringMatrix::new(*config, vec![phi])?)
}
