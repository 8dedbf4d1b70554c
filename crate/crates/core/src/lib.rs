//! Data-driven microscopic crowd simulation.
//!
//! The pipeline has three stages. Geometric feature extraction
//! ([`features`]) turns each pedestrian's surroundings into a fixed-length
//! vector: own velocity, one nearest neighbour per angular sector, ray-cast
//! visual points and the two exit endpoints. A temporal convolutional network
//! ([`vpnn`]) maps a lookback window of those vectors to the next velocity.
//! The rolling-forecast [`simulator`] feeds predictions back into extraction
//! until everyone has left.
//!
//! Complex scenes are composed from modules ([`scene`], [`layouts`]); a
//! pedestrian only perceives the walls and exit of the module it stands in.
//! A social-force baseline ([`social_force`]) and trajectory/fundamental-
//! diagram metrics ([`evaluation`]) complete the toolkit.

pub mod error;
pub mod evaluation;
pub mod features;
pub mod geometry;
pub mod layouts;
pub mod manifest;
pub mod rng;
pub mod pipeline;
pub mod scene;
pub mod simulator;
pub mod social_force;
pub mod synthetic;
pub mod trajectory;
pub mod vpnn;

pub use error::{Error, Result};
pub use geometry::{Point2, Rect, Segment, Vec2};
pub use scene::{ModuleKind, ModuleRegion, Scene};
