pub mod ablate;
pub mod analyze;
pub mod calibrate;
pub mod quantize;
pub mod sweep;
pub mod synth;
