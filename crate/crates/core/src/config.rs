//! TOML configuration for devices, pulses and sweeps. Every numeric key
//! carries its unit in its name (`freq_ghz`, `time_ns`, `flux_phi0`, ...);
//! values are converted to the internal rad/ns units here and nowhere else.

use std::f64::consts::PI;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::pulse::device::{ghz, mhz, TransmonSite, TunableCouplerDevice, TunableQubitDevice};
use crate::pulse::integrator::StepControl;
use crate::pulse::runs::{coupler_operating_point, CouplerGate, CouplerSettings, TqGate, TqSettings};
use crate::sweeps::{AxisSpec, Observable, SweepDevice, SweepSpec};

pub fn load<T: DeserializeOwned>(path: &Path) -> Result<T, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io { path: path.display().to_string(), source: e })?;
    parse(&text, &path.display().to_string())
}

pub fn parse<T: DeserializeOwned>(text: &str, origin: &str) -> Result<T, ConfigError> {
    toml::from_str(text).map_err(|e| ConfigError::Parse { path: origin.into(), message: e.to_string() })
}

fn invalid(key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { key: key.into(), message: message.into() }
}

fn positive(key: &str, v: f64) -> Result<f64, ConfigError> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(invalid(key, format!("must be positive and finite, got {v}")))
    }
}

fn finite(key: &str, v: f64) -> Result<f64, ConfigError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(invalid(key, "must be finite"))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SiteConfig {
    /// Idle frequency; for couplers the maximum (zero-flux) frequency.
    pub freq_ghz: f64,
    pub anharmonicity_mhz: f64,
    #[serde(default)]
    pub max_freq_ghz: Option<f64>,
    #[serde(default = "three")]
    pub levels: usize,
}

fn three() -> usize {
    3
}

impl SiteConfig {
    fn to_site(&self, key: &str) -> Result<TransmonSite, ConfigError> {
        positive(&format!("{key}.freq_ghz"), self.freq_ghz)?;
        finite(&format!("{key}.anharmonicity_mhz"), self.anharmonicity_mhz)?;
        if self.levels < 3 {
            return Err(invalid(&format!("{key}.levels"), "at least 3 levels are needed"));
        }
        let mut s = TransmonSite::fixed(ghz(self.freq_ghz), mhz(self.anharmonicity_mhz));
        s.levels = self.levels;
        if let Some(m) = self.max_freq_ghz {
            positive(&format!("{key}.max_freq_ghz"), m)?;
            if m < self.freq_ghz {
                return Err(invalid(&format!("{key}.max_freq_ghz"), "below the idle frequency"));
            }
            s.omega_max = Some(ghz(m));
        }
        Ok(s)
    }

    fn from_site(s: &TransmonSite) -> Self {
        let to_ghz = |w: f64| w / (2.0 * PI);
        Self {
            freq_ghz: to_ghz(s.omega),
            anharmonicity_mhz: to_ghz(s.alpha) * 1e3,
            max_freq_ghz: s.omega_max.map(to_ghz),
            levels: s.levels,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TunableQubitsConfig {
    pub q0: SiteConfig,
    pub q1: SiteConfig,
    pub q2: SiteConfig,
    /// Exchange couplings `q0-q1`, `q0-q2`.
    pub coupling_mhz: [f64; 2],
}

impl TunableQubitsConfig {
    pub fn to_device(&self) -> Result<TunableQubitDevice, ConfigError> {
        let sites = [self.q0.to_site("q0")?, self.q1.to_site("q1")?, self.q2.to_site("q2")?];
        for (j, g) in self.coupling_mhz.iter().enumerate() {
            finite(&format!("coupling_mhz[{j}]"), *g)?;
        }
        let dev = TunableQubitDevice {
            sites,
            g: [mhz(self.coupling_mhz[0]), mhz(self.coupling_mhz[1])],
            omega_ref: sites[0].omega,
        };
        dev.validate().map_err(|e| invalid("device", e.to_string()))?;
        Ok(dev)
    }

    pub fn from_device(d: &TunableQubitDevice) -> Self {
        Self {
            q0: SiteConfig::from_site(&d.sites[0]),
            q1: SiteConfig::from_site(&d.sites[1]),
            q2: SiteConfig::from_site(&d.sites[2]),
            coupling_mhz: d.g.map(|g| g / (2.0 * PI) * 1e3),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingsConfig {
    pub q0_c1_mhz: f64,
    pub q0_c2_mhz: f64,
    pub q1_c1_mhz: f64,
    pub q2_c2_mhz: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TunableCouplerConfig {
    pub q0: SiteConfig,
    pub q1: SiteConfig,
    pub q2: SiteConfig,
    pub c1: SiteConfig,
    pub c2: SiteConfig,
    pub coupling: CouplingsConfig,
    pub bias_flux_phi0: [f64; 2],
}

impl TunableCouplerConfig {
    pub fn to_device(&self) -> Result<TunableCouplerDevice, ConfigError> {
        let c = &self.coupling;
        for (k, v) in [("q0_c1_mhz", c.q0_c1_mhz), ("q0_c2_mhz", c.q0_c2_mhz), ("q1_c1_mhz", c.q1_c1_mhz), ("q2_c2_mhz", c.q2_c2_mhz)] {
            finite(&format!("coupling.{k}"), v)?;
        }
        let dev = TunableCouplerDevice {
            qubits: [self.q0.to_site("q0")?, self.q1.to_site("q1")?, self.q2.to_site("q2")?],
            couplers: [self.c1.to_site("c1")?, self.c2.to_site("c2")?],
            g: [[mhz(c.q0_c1_mhz), mhz(c.q0_c2_mhz)], [mhz(c.q1_c1_mhz), 0.0], [0.0, mhz(c.q2_c2_mhz)]],
            theta: self.bias_flux_phi0,
        };
        dev.validate().map_err(|e| invalid("bias_flux_phi0", e.to_string()))?;
        Ok(dev)
    }

    pub fn from_device(d: &TunableCouplerDevice) -> Self {
        let m = |w: f64| w / (2.0 * PI) * 1e3;
        Self {
            q0: SiteConfig::from_site(&d.qubits[0]),
            q1: SiteConfig::from_site(&d.qubits[1]),
            q2: SiteConfig::from_site(&d.qubits[2]),
            c1: SiteConfig::from_site(&d.couplers[0]),
            c2: SiteConfig::from_site(&d.couplers[1]),
            coupling: CouplingsConfig {
                q0_c1_mhz: m(d.g[0][0]),
                q0_c2_mhz: m(d.g[0][1]),
                q1_c1_mhz: m(d.g[1][0]),
                q2_c2_mhz: m(d.g[2][1]),
            },
            bias_flux_phi0: d.theta,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TqPulseConfig {
    pub time_ns: f64,
    #[serde(default = "one")]
    pub sigma_ns: f64,
    #[serde(default)]
    pub offset_mhz: [f64; 2],
    #[serde(default)]
    pub delay_ns: [f64; 2],
}

fn one() -> f64 {
    1.0
}

impl TqPulseConfig {
    pub fn to_settings(&self) -> Result<TqSettings, ConfigError> {
        let delays = self.delay_ns;
        if delays.iter().any(|d| !(d.is_finite() && *d >= 0.0)) {
            return Err(invalid("delay_ns", "must be non-negative"));
        }
        Ok(TqSettings {
            t_gate: positive("time_ns", self.time_ns)?,
            offsets: [mhz(finite("offset_mhz", self.offset_mhz[0])?), mhz(finite("offset_mhz", self.offset_mhz[1])?)],
            sigma: positive("sigma_ns", self.sigma_ns)?,
            delays,
        })
    }

    pub fn from_settings(s: &TqSettings) -> Self {
        Self {
            time_ns: s.t_gate,
            sigma_ns: s.sigma,
            offset_mhz: s.offsets.map(|o| o / (2.0 * PI) * 1e3),
            delay_ns: s.delays,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplerPulseConfig {
    pub plateau_time_ns: f64,
    #[serde(default = "rise")]
    pub rise_time_ns: f64,
    pub amplitude_flux_phi0: [f64; 2],
    pub mod_freq_ghz: [f64; 2],
    #[serde(default)]
    pub phase_rad: [f64; 2],
}

fn rise() -> f64 {
    25.0
}

impl CouplerPulseConfig {
    pub fn to_settings(&self) -> Result<CouplerSettings, ConfigError> {
        if !(self.plateau_time_ns.is_finite() && self.plateau_time_ns >= 0.0) {
            return Err(invalid("plateau_time_ns", "must be non-negative"));
        }
        for v in self.amplitude_flux_phi0.iter().chain(&self.mod_freq_ghz).chain(&self.phase_rad) {
            finite("pulse", *v)?;
        }
        Ok(CouplerSettings {
            plateau: self.plateau_time_ns,
            rise: positive("rise_time_ns", self.rise_time_ns)?,
            delta0: self.amplitude_flux_phi0,
            omega_phi: self.mod_freq_ghz.map(ghz),
            phase: self.phase_rad,
        })
    }

    pub fn from_settings(s: &CouplerSettings) -> Self {
        Self {
            plateau_time_ns: s.plateau,
            rise_time_ns: s.rise,
            amplitude_flux_phi0: s.delta0,
            mod_freq_ghz: s.omega_phi.map(|w| w / (2.0 * PI)),
            phase_rad: s.phase,
        }
    }
}

/// Device file: a scheme tag and the device tables.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "kebab-case")]
pub enum DeviceFile {
    TunableQubits(TunableQubitsConfig),
    TunableCoupler(TunableCouplerConfig),
}

/// Sweep file. `device` and `base` fall back to the built-in device and its
/// calibrated or nominal operating point for the gate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepFile {
    pub name: String,
    pub scheme: String,
    pub gate: String,
    #[serde(default = "step")]
    pub step_ns: f64,
    #[serde(default = "pi")]
    pub target_phi_rad: f64,
    #[serde(default)]
    pub device: Option<toml::Table>,
    #[serde(default)]
    pub base: Option<toml::Table>,
    pub axis: Vec<AxisSpec>,
    pub observable: Vec<Observable>,
}

fn step() -> f64 {
    0.05
}

fn pi() -> f64 {
    PI
}

fn table_into<T: DeserializeOwned>(t: &toml::Table, key: &str) -> Result<T, ConfigError> {
    t.clone().try_into().map_err(|e: toml::de::Error| ConfigError::Parse { path: key.into(), message: e.to_string() })
}

impl SweepFile {
    pub fn to_spec(&self) -> Result<SweepSpec, ConfigError> {
        let step = StepControl::with_dt(positive("step_ns", self.step_ns)?);
        let device = match self.scheme.as_str() {
            "tunable-qubits" => {
                let gate = TqGate::parse(&self.gate).ok_or_else(|| invalid("gate", format!("unknown gate '{}'", self.gate)))?;
                let device = match &self.device {
                    Some(t) => table_into::<TunableQubitsConfig>(t, "device")?.to_device()?,
                    None if matches!(gate, TqGate::Iswap01 | TqGate::Iswap02 | TqGate::Div) => {
                        TunableQubitDevice::default_div()
                    }
                    None => TunableQubitDevice::default_cczs(),
                };
                let base = match &self.base {
                    Some(t) => table_into::<TqPulseConfig>(t, "base")?.to_settings()?,
                    None => TqSettings::nominal(&device, gate),
                };
                SweepDevice::TunableQubits { device, gate, base }
            }
            "tunable-coupler" => {
                let gate =
                    CouplerGate::parse(&self.gate).ok_or_else(|| invalid("gate", format!("unknown gate '{}'", self.gate)))?;
                let device = match &self.device {
                    Some(t) => table_into::<TunableCouplerConfig>(t, "device")?.to_device()?,
                    None => TunableCouplerDevice::default_device(),
                };
                let base = match &self.base {
                    Some(t) => table_into::<CouplerPulseConfig>(t, "base")?.to_settings()?,
                    None => coupler_operating_point(gate),
                };
                SweepDevice::TunableCoupler { device, gate, base }
            }
            other => return Err(invalid("scheme", format!("unknown scheme '{other}'"))),
        };
        let spec = SweepSpec {
            name: self.name.clone(),
            device,
            axes: self.axis.clone(),
            observables: self.observable.clone(),
            target_phi: finite("target_phi_rad", self.target_phi_rad)?,
            step,
        };
        spec.validate().map_err(|e| invalid("sweep", e.to_string()))?;
        Ok(spec)
    }
}
