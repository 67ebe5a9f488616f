//! Gradient-aligned alternating learning for paired image-vector and tabular
//! classification.
//!
//! Two modality encoders share one linear classifier. Training alternates
//! between modalities; before each head update the current modality's head
//! gradient is projected so it does not conflict with the head gradient of
//! the other modality's most uncertain samples.

pub mod checkpoint;
pub mod data;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod model;
pub mod numerics;
pub mod surgery;
pub mod train;

pub use error::{Error, Result};
pub use eval::TrainedModel;
pub use model::{Modality, ModelDims, ModelState};
pub use numerics::{Matrix, RngStream};
pub use surgery::{project_gradient, SurgeryConfig, SurgeryResult};
pub use train::{train, BaselineMode, TrainConfig};
