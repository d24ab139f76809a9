//! Event-camera HDR imaging by temporal incident-light modulation.
//!
//! A dynamic-vision-sensor pixel array is driven by a dual-path light
//! modulator: a scene path whose transmittance ramps up and a constant
//! uniform path that fades down. Each pixel emits asynchronous events at
//! log-intensity threshold crossings; because brighter pixels reach every
//! trigger level earlier, scene radiance is encoded in event timing and can
//! be decoded by temporally weighted event summation. Threshold
//! fixed-pattern noise is corrected with a per-pixel gain map calibrated
//! from repeated uniform captures.
//!
//! Pipeline: [`radiance`] (scenes and test targets) -> [`modulation`]
//! (transmittance profiles) -> [`sim`] (event generation) ->
//! [`reconstruct`] (decoding and correction) -> [`metrics`] (evaluation).
//! [`io`] holds the file formats.
//!
//! All numeric code is generic over [`scalar::Scalar`] (`f32` or `f64`);
//! the aliases at the crate root pin the `f64` instantiation used by the
//! CLI and the file formats.

// Validation deliberately writes `!(x > zero)` instead of `x <= zero`:
// the negated form also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod io;
pub mod metrics;
pub mod modulation;
pub mod radiance;
pub mod reconstruct;
pub mod rng;
pub mod scalar;
pub mod sim;

pub use error::{Error, Result};
pub use reconstruct::WeightingMethod;

/// Scalar type used by the CLI and the file formats.
pub type Real = f64;

pub type RadianceMap = radiance::RadianceMap<Real>;
pub type DensityFilterArray = radiance::DensityFilterArray<Real>;
pub type ModulationProfile = modulation::ModulationProfile<Real>;
pub type SeparableProfile = modulation::SeparableProfile<Real>;
pub type SensorConfig = sim::SensorConfig<Real>;
pub type NoiseConfig = sim::NoiseConfig<Real>;
pub type ThresholdField = sim::ThresholdField<Real>;
pub type Event = sim::Event<Real>;
pub type EventStream = sim::EventStream<Real>;
pub type ReconstructionConfig = reconstruct::ReconstructionConfig<Real>;
pub type CMap = reconstruct::CMap<Real>;
pub type Snr = metrics::Snr<Real>;
pub type CalibrationSpec = metrics::CalibrationSpec<Real>;
pub type MethodSnr = metrics::MethodSnr<Real>;
pub type KSweepPoint = metrics::KSweepPoint<Real>;
pub type ResponsiveRange = metrics::ResponsiveRange<Real>;
pub type MonotonicityReport = metrics::MonotonicityReport;
