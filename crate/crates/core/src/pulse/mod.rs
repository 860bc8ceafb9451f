//! Time-dependent simulation of transmon devices.

pub mod calibrate;
pub mod device;
pub mod fidelity;
pub mod integrator;
pub mod runs;
pub mod shapes;

pub use device::{
    CouplerPulse, DeviceModel, Drive, FluxDrive, TransmonSite, TunableCouplerDevice, TunableQubitDevice,
    TunableQubitPulse,
};
pub use fidelity::{average_gate_fidelity, gate_fidelity, FidelityReport};
pub use integrator::{DressedFrame, Scheme, Simulator, StepControl};
pub use shapes::PulseShape;
