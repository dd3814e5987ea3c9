//! Core of the blink-driven text entry pipeline: headset stream framing,
//! blink detection, T6 predictive text and the scanning selector.

pub mod predict;
pub mod protocol;
pub mod selector;
pub mod signal;
pub mod wire;
