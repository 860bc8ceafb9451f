//! Pulse envelopes, normalised to a unit plateau.

use std::f64::consts::{FRAC_PI_2, SQRT_2};

use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PulseShape {
    /// Rectangle of `length` starting at `start`, convolved with a Gaussian of width `sigma`.
    RectGauss { start: f64, length: f64, sigma: f64 },
    /// `sin^2` rise of `rise`, flat `plateau`, mirrored fall.
    SinRiseFall { start: f64, plateau: f64, rise: f64 },
}

impl PulseShape {
    /// Rect-Gauss pulse padded by `8 sigma` on both sides, starting at `t = 0`.
    pub fn rect_gauss(length: f64, sigma: f64) -> Self {
        PulseShape::RectGauss { start: 8.0 * sigma, length, sigma }
    }

    pub fn sin_rise_fall(plateau: f64, rise: f64) -> Self {
        PulseShape::SinRiseFall { start: 0.0, plateau, rise }
    }

    pub fn value(&self, t: f64) -> f64 {
        match *self {
            PulseShape::RectGauss { start, length, sigma } => {
                let s = SQRT_2 * sigma;
                0.5 * (erf((t - start) / s) - erf((t - start - length) / s))
            }
            PulseShape::SinRiseFall { start, plateau, rise } => {
                let u = t - start;
                if u <= 0.0 || u >= plateau + 2.0 * rise {
                    0.0
                } else if u < rise {
                    (FRAC_PI_2 * u / rise).sin().powi(2)
                } else if u <= rise + plateau {
                    1.0
                } else {
                    (FRAC_PI_2 * (plateau + 2.0 * rise - u) / rise).sin().powi(2)
                }
            }
        }
    }

    /// Time at which the simulation window ends.
    pub fn end(&self) -> f64 {
        match *self {
            PulseShape::RectGauss { start, length, sigma } => start + length + 8.0 * sigma,
            PulseShape::SinRiseFall { start, plateau, rise } => start + plateau + 2.0 * rise,
        }
    }

    /// Gate time as quoted: rectangle length, or plateau plus both ramps.
    pub fn gate_time(&self) -> f64 {
        match *self {
            PulseShape::RectGauss { length, .. } => length,
            PulseShape::SinRiseFall { plateau, rise, .. } => plateau + 2.0 * rise,
        }
    }

    pub fn center(&self) -> f64 {
        match *self {
            PulseShape::RectGauss { start, length, .. } => start + length / 2.0,
            PulseShape::SinRiseFall { start, plateau, rise } => start + rise + plateau / 2.0,
        }
    }

    /// Points where the envelope has a kink; the integrator aligns steps to them.
    pub fn breakpoints(&self) -> Vec<f64> {
        match *self {
            PulseShape::RectGauss { .. } => Vec::new(),
            PulseShape::SinRiseFall { start, plateau, rise } => {
                vec![start, start + rise, start + rise + plateau, start + plateau + 2.0 * rise]
            }
        }
    }
}
