//! Radio parameters, synthetic CIR streams and traffic traces.

mod cir_io;
mod golay;
mod radio;
mod scene;
mod synth;
mod traffic;

pub use cir_io::{read_cir_bin, read_cir_csv, write_cir_bin, write_cir_csv};
pub use golay::{golay_check, golay_pair, summed_autocorrelation};
pub use radio::{doppler_axis, DopplerAxis, RadioConfig, SPEED_OF_LIGHT};
pub use scene::{static_scene, walking_scene, WalkingParams};
pub use synth::{synth_cir, CirSample, CirStream, GainMatrix, ReflectorTrack, VelocityProfile};
pub use traffic::{load_traffic_trace, parse_traffic_csv, poisson_trace, LoadedTrace, Packet, TrafficTrace};
