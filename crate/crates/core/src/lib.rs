pub mod bmp;
pub mod cls_metrics;
pub mod ensemble;
pub mod error;
pub mod mask;
pub mod ranking;
pub mod report;
pub mod seg_metrics;
pub mod stats;
pub mod synth;

pub use error::{Error, Result};
pub use mask::{LabelMask, PixelLabel, RegionKind, RegionMask};
