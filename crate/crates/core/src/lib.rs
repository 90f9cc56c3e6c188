//! Conditioning of observables and instruments on finite-dimensional
//! Hilbert spaces, with measurement models and a randomized identity checker.

pub mod channels;
pub mod effects;
pub mod error;
pub mod instruments;
pub mod matkernel;
pub mod measmodel;
pub mod scenario;

pub use channels::{Channel, LinearMap, Operation, QuantumMap};
pub use effects::{BiObservable, Effect, Observable, OutcomeMap, State, StochasticMatrix};
pub use error::{Error, Result};
pub use instruments::{BiInstrument, HolevoSpec, Instrument};
pub use matkernel::{CMatrix, Tolerance, C64};
pub use measmodel::{HolevoSeparableSpec, KrausSeparableChannel, MeasurementModel};
