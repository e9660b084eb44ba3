//! Mining level-design structure from gameplay traces.
//!
//! The pipeline in this crate works from recorded gameplay of tile-based
//! platformers and ends at new level sections:
//!
//! 1. [`vision`] turns raster frames into symbolic sprite-instance frames.
//! 2. [`segmentation`] splits a trace into level sections and scores how long
//!    the player interacted with each one.
//! 3. [`clustering`] groups the high-interaction sections into categories.
//! 4. [`model`] learns a generative shape model (shapes, relative positions,
//!    quantity profiles) from one category of sections.
//! 5. [`generator`] enumerates new sections consistent with that model.
//! 6. [`evaluation`] scores generated sections for playability and style.
//! 7. [`corpus`] builds deterministic synthetic traces so the whole pipeline
//!    can be exercised and verified without any real game footage.

pub mod clustering;
pub mod corpus;
pub mod error;
pub mod evaluation;
pub mod generator;
pub mod model;
pub mod render;
pub mod segmentation;
pub mod trace;
pub mod vision;

pub use error::{Error, Result};
