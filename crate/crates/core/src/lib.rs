//! Region extraction toolkit for paired AP and lateral chest radiographs.
//!
//! The crate takes a grayscale radiograph together with an externally produced
//! lung segmentation (and, optionally, a lung detection box) and turns it into a
//! standardized set of twelve rectangular regions:
//!
//! | View | Regions |
//! |------|---------|
//! | AP   | `APUR`, `APMR`, `APLR` (right lung thirds), `APUL`, `APML`, `APLL` (left lung thirds), `APUM`, `APMM` (upper and middle mediastinum) |
//! | LAT  | `LATULS`, `LATMLS`, `LATLLS` (lung thirds), `LATMM` (middle mediastinum) |
//!
//! Stages, in pipeline order:
//!
//! - [`enhance`]: CLAHE contrast enhancement and z-normalization.
//! - [`template`]: crop to the lung detection, build the region template.
//! - [`maskops`]: blob labelling, PCA orientation, raster rotation.
//! - [`orientation`]: lateral spine-side detection and horizontal flip.
//! - [`metrics`]: Dice / precision / recall / ASD and the training losses.
//! - [`synthgen`]: seed-deterministic phantoms used as a test corpus.
//! - [`pipeline`]: batch driver over JSON case manifests.
//!
//! See the `examples/` directory of this crate for one runnable program per
//! capability.

pub mod enhance;
pub mod error;
pub mod imagecore;
pub mod io;
pub mod maskops;
pub mod metrics;
pub mod orientation;
pub mod pipeline;
pub mod synthgen;
pub mod template;

pub use error::{Error, Result};
pub use imagecore::{BBox, BinaryMask, BitDepth, GrayImage, RealImage, ViewKind};
