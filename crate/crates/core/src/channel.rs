//! Seeded Monte Carlo channel realizations for the V2V underlay geometry.
//!
//! Every link is `sqrt(PL(d)) · (sqrt(K/(K+1))·e^{jψ} + sqrt(1/(K+1))·w)`
//! with log-distance path loss `PL`, a uniformly random line-of-sight phase
//! `ψ` per entry and `w ~ CN(0, 1)`. Each link draws from its own ChaCha
//! stream keyed by `(seed, link id)`, and entries are drawn in index order,
//! so a realization with `N` elements is a prefix of the one with `N' > N`
//! elements under the same seed.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::CVector;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChannelError {
    #[error("distance must be positive, got {0} m")]
    NonPositiveDistance(f64),
    #[error("{0} and {1} are co-located")]
    CoLocated(&'static str, &'static str),
    #[error("carrier frequency must be positive, got {0} Hz")]
    CarrierFrequency(f64),
    #[error("path-loss exponent for {class} links must lie in [1.5, 6], got {value}")]
    Exponent { class: LinkClass, value: f64 },
    #[error("Rician K-factor for {class} links must be finite and non-negative, got {value}")]
    KFactor { class: LinkClass, value: f64 },
    #[error("reference path loss must be finite, got {0} dB")]
    ReferenceLoss(f64),
}

/// Propagation class of a link; each class has its own exponent and K-factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkClass {
    /// V2V transmitter to V2V receiver.
    Direct,
    /// Either hop of the useful path through the surface.
    Ris,
    /// Links that carry RSU interference or V2V leakage.
    Interference,
}

impl std::fmt::Display for LinkClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            LinkClass::Direct => "direct",
            LinkClass::Ris => "ris",
            LinkClass::Interference => "interference",
        })
    }
}

/// One value per [`LinkClass`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerClass {
    pub direct: f64,
    pub ris: f64,
    pub interference: f64,
}

impl PerClass {
    pub fn get(&self, class: LinkClass) -> f64 {
        match class {
            LinkClass::Direct => self.direct,
            LinkClass::Ris => self.ris,
            LinkClass::Interference => self.interference,
        }
    }
}

/// Node positions in metres (2-D) and carrier frequency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometryConfig {
    pub v2v_tx: [f64; 2],
    pub v2v_rx: [f64; 2],
    pub ris: [f64; 2],
    pub rsu: [f64; 2],
    pub cellular_user: [f64; 2],
    pub carrier_frequency_hz: f64,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        Self {
            v2v_tx: [0.0, 0.0],
            v2v_rx: [50.0, 0.0],
            ris: [25.0, 10.0],
            rsu: [-150.0, 50.0],
            cellular_user: [-100.0, 20.0],
            carrier_frequency_hz: 3.5e9,
        }
    }
}

impl GeometryConfig {
    pub fn validate(&self) -> Result<(), ChannelError> {
        if !(self.carrier_frequency_hz > 0.0 && self.carrier_frequency_hz.is_finite()) {
            return Err(ChannelError::CarrierFrequency(self.carrier_frequency_hz));
        }
        let nodes = [
            ("v2v_tx", self.v2v_tx),
            ("v2v_rx", self.v2v_rx),
            ("ris", self.ris),
            ("rsu", self.rsu),
            ("cellular_user", self.cellular_user),
        ];
        for (i, (na, a)) in nodes.iter().enumerate() {
            for (nb, b) in &nodes[i + 1..] {
                if !(distance(*a, *b) > 0.0) {
                    return Err(ChannelError::CoLocated(na, nb));
                }
            }
        }
        Ok(())
    }

    /// Free-space loss at 1 m for the configured carrier,
    /// `32.4 + 20·log10(f / 1 GHz)` dB.
    pub fn free_space_reference_db(&self) -> f64 {
        32.4 + 20.0 * (self.carrier_frequency_hz / 1e9).log10()
    }
}

/// Large- and small-scale fading parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FadingConfig {
    /// Path loss at the 1 m reference distance, dB.
    pub reference_loss_db: f64,
    pub exponent: PerClass,
    /// Linear Rician K-factor; 0 gives Rayleigh fading.
    pub k_factor: PerClass,
    /// Include RSU interference and V2V leakage that travel via the surface
    /// (`f_t`, `q_r`). When false those vectors are zero.
    pub ris_assisted_interference: bool,
}

impl Default for FadingConfig {
    fn default() -> Self {
        Self {
            reference_loss_db: 0.0,
            exponent: PerClass { direct: 3.5, ris: 2.2, interference: 3.0 },
            k_factor: PerClass { direct: 0.0, ris: 2.0, interference: 0.0 },
            ris_assisted_interference: true,
        }
    }
}

impl FadingConfig {
    pub fn validate(&self) -> Result<(), ChannelError> {
        if !self.reference_loss_db.is_finite() {
            return Err(ChannelError::ReferenceLoss(self.reference_loss_db));
        }
        for class in [LinkClass::Direct, LinkClass::Ris, LinkClass::Interference] {
            let value = self.exponent.get(class);
            if !(1.5..=6.0).contains(&value) {
                return Err(ChannelError::Exponent { class, value });
            }
            let value = self.k_factor.get(class);
            if !(value >= 0.0 && value.is_finite()) {
                return Err(ChannelError::KFactor { class, value });
            }
        }
        Ok(())
    }
}

/// One realization of every channel in the scenario.
///
/// Vectors are indexed by surface element; the useful signal at the V2V
/// receiver is `h_d + g_rᴴ Φ h_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioChannels {
    /// V2V Tx → V2V Rx.
    pub h_d: Complex64,
    /// V2V Tx → surface.
    pub h_t: CVector,
    /// Surface → V2V Rx.
    pub g_r: CVector,
    /// RSU → V2V Rx.
    pub f_d: Complex64,
    /// RSU → surface.
    pub f_t: CVector,
    /// V2V Tx → cellular user.
    pub q_d: Complex64,
    /// Surface → cellular user.
    pub q_r: CVector,
}

impl ScenarioChannels {
    pub fn n(&self) -> usize {
        self.h_t.len()
    }

    /// All vectors share one length and every entry is finite.
    pub fn is_consistent(&self) -> bool {
        let n = self.n();
        let vectors = [&self.h_t, &self.g_r, &self.f_t, &self.q_r];
        vectors.iter().all(|v| v.len() == n)
            && vectors.iter().all(|v| v.iter().all(|z| z.re.is_finite() && z.im.is_finite()))
            && [self.h_d, self.f_d, self.q_d].iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

fn distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Linear power gain `10^(−(PL0 + 10·α·log10 d)/10)`.
pub fn path_loss_linear(distance_m: f64, class: LinkClass, cfg: &FadingConfig) -> Result<f64, ChannelError> {
    if !(distance_m > 0.0) {
        return Err(ChannelError::NonPositiveDistance(distance_m));
    }
    let alpha = cfg.exponent.get(class);
    let loss_db = cfg.reference_loss_db + 10.0 * alpha * distance_m.log10();
    Ok(10f64.powf(-loss_db / 10.0))
}

#[derive(Debug, Clone, Copy)]
#[repr(u64)]
enum Link {
    Hd = 0,
    Ht = 1,
    Gr = 2,
    Fd = 3,
    Ft = 4,
    Qd = 5,
    Qr = 6,
}

struct LinkSampler {
    rng: ChaCha8Rng,
    amplitude: f64,
    los: f64,
    scatter: f64,
}

impl LinkSampler {
    fn new(seed: u64, link: Link, gain: f64, k: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(link as u64);
        Self { rng, amplitude: gain.sqrt(), los: (k / (k + 1.0)).sqrt(), scatter: (1.0 / (k + 1.0)).sqrt() }
    }

    fn next(&mut self) -> Complex64 {
        let phase: f64 = self.rng.gen_range(0.0..2.0 * PI);
        let re: f64 = self.rng.sample(StandardNormal);
        let im: f64 = self.rng.sample(StandardNormal);
        let w = Complex64::new(re, im) * FRAC_1_SQRT_2;
        (Complex64::from_polar(self.los, phase) + w * self.scatter) * self.amplitude
    }

    fn vector(mut self, n: usize) -> CVector {
        CVector::from_fn(n, |_, _| self.next())
    }
}

/// Draws one realization of all scenario channels for an `n`-element
/// surface. Bit-for-bit deterministic in `(geom, fading, n, seed)`.
pub fn sample_scenario(
    geom: &GeometryConfig,
    fading: &FadingConfig,
    n: usize,
    seed: u64,
) -> Result<ScenarioChannels, ChannelError> {
    geom.validate()?;
    fading.validate()?;
    let sampler = |link: Link, from: [f64; 2], to: [f64; 2], class: LinkClass| -> Result<LinkSampler, ChannelError> {
        let gain = path_loss_linear(distance(from, to), class, fading)?;
        Ok(LinkSampler::new(seed, link, gain, fading.k_factor.get(class)))
    };

    let h_d = sampler(Link::Hd, geom.v2v_tx, geom.v2v_rx, LinkClass::Direct)?.next();
    let h_t = sampler(Link::Ht, geom.v2v_tx, geom.ris, LinkClass::Ris)?.vector(n);
    let g_r = sampler(Link::Gr, geom.ris, geom.v2v_rx, LinkClass::Ris)?.vector(n);
    let f_d = sampler(Link::Fd, geom.rsu, geom.v2v_rx, LinkClass::Interference)?.next();
    let q_d = sampler(Link::Qd, geom.v2v_tx, geom.cellular_user, LinkClass::Interference)?.next();
    let (f_t, q_r) = if fading.ris_assisted_interference {
        (
            sampler(Link::Ft, geom.rsu, geom.ris, LinkClass::Interference)?.vector(n),
            sampler(Link::Qr, geom.ris, geom.cellular_user, LinkClass::Interference)?.vector(n),
        )
    } else {
        (CVector::zeros(n), CVector::zeros(n))
    };
    Ok(ScenarioChannels { h_d, h_t, g_r, f_d, f_t, q_d, q_r })
}
