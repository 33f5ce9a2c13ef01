//! Simulation and analysis toolkit for sub-terahertz sliding-correlator
//! channel sounding.
//!
//! Numeric code is generic over [`Real`] (`f32` or `f64`); the `*64` aliases
//! below fix the scalar for the common double-precision case.

pub mod channel_sim;
pub mod dsp;
pub mod error;
pub mod fitting;
pub mod metrics;
pub mod receiver;
pub mod scalar;
pub mod toolkit;
pub mod waveform;
pub mod weather;

pub use error::{Error, Result};
pub use scalar::Real;
pub use toolkit::capture::CaptureFile;
pub use toolkit::config::RunConfig;

pub type FrameLayout64 = waveform::FrameLayout<f64>;
pub type PulseShape64 = waveform::PulseShape<f64>;
pub type BasebandSignal64 = waveform::BasebandSignal<f64>;
pub type TapSet64 = channel_sim::TapSet<f64>;
pub type ImpairmentSet64 = channel_sim::ImpairmentSet<f64>;

pub use channel_sim::Scenario;
pub type WeatherState64 = weather::WeatherState<f64>;
pub type LinkBudget64 = weather::LinkBudget<f64>;
pub type SnowModelParams64 = weather::SnowModelParams<f64>;
pub type CalibrationProfile64 = receiver::CalibrationProfile<f64>;
pub type CarrierEstimate64 = receiver::CarrierEstimate<f64>;
pub type PowerDelayProfile64 = receiver::PowerDelayProfile<f64>;
pub type MpcProfile64 = receiver::MpcProfile<f64>;
pub type MpcComponent64 = receiver::MpcComponent<f64>;
pub type Receiver64 = receiver::Receiver<f64>;
pub type ReceiverConfig64 = receiver::ReceiverConfig<f64>;
pub type ChannelMetrics64 = metrics::ChannelMetrics<f64>;
pub type NoiseModel64 = metrics::NoiseModel<f64>;
pub type DistParams64 = fitting::DistParams<f64>;
pub type FitResult64 = fitting::FitResult<f64>;
