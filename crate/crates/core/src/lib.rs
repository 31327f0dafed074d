//! A two-phase learning agent for a planar push world.
//!
//! During the intrinsic phase the agent pushes objects at random and stores
//! every `(pre image, action, post image)` triplet. Afterwards it learns a
//! background model, a linear image encoder and a table of per-latent
//! "same state" thresholds. During the extrinsic phase it receives goal images
//! and plans over the stored triplets with A*, relaxing the thresholds level
//! by level until a plan is found.

pub mod abstraction;
pub mod agent;
mod binio;
pub mod config;
pub mod error;
pub mod eval;
pub mod explorer;
pub mod image;
pub mod memory;
pub mod perception;
pub mod planner;
pub mod sim;

pub use abstraction::ThresholdTable;
pub use agent::{Agent, Artifacts, Stage};
pub use config::RunConfig;
pub use error::{Error, Result};
pub use explorer::{propose_action, ExplorationMode};
pub use image::Image;
pub use memory::{Triplet, TripletStore};
pub use perception::{BackgroundModel, BackgroundParams, Latent, LatentEncoder, LinearEncoder};
pub use planner::{compute_max_depth, Plan, Planner, PlannerConfig};
pub use sim::{ObjectState, Point, PushAction, PushWorld, TableGeometry, WorldState};
