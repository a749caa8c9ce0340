//! Tiny touchscreen performances: the data format, touch-to-sound
//! instruments, gesture analytics and trace rendering.

pub mod analytics;
pub mod corpus;
pub mod gesture;
pub mod perf;
pub mod stats;
pub mod synth;
pub mod synthetic;
pub mod trace;

pub use perf::{Instrument, LayeredPerformance, Metadata, TinyPerformance, TouchEvent};
