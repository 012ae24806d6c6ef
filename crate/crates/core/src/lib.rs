//! Topological machinery for teacher-student segmentation on likelihood grids.
//!
//! The crate computes 0-dimensional sublevel (or superlevel) persistence
//! diagrams of 2D grids with their critical pixels, splits them into signal
//! and noise by persistence, matches diagrams under Wasserstein and
//! bottleneck costs, and turns the matching into losses whose gradients with
//! respect to the student likelihood are sparse and analytic. A small
//! grid-parameterised teacher-student simulator and topology-aware
//! segmentation metrics sit on top.
//!
//! Everything here is `no_std` + `alloc`; file formats and the command line
//! live in the `topocons` crate.
#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

mod error;
mod union_find;

pub mod diagram;
pub mod grid;
pub mod losses;
pub mod matching;
pub mod metrics;
pub mod persistence;
pub mod scenarios;
pub mod trainer;

pub use diagram::{decompose, persistence_of, total_persistence, DecomposedDiagram};
pub use error::{Error, Result};
pub use grid::{
    label_components, threshold, BinaryMask, ComponentLabeling, Connectivity, Direction,
    LikelihoodGrid,
};
pub use losses::{
    cross_entropy_loss, dice_loss, finite_difference_check, supervised_loss,
    topo_consistency_gradient, topo_consistency_loss, GradientGrid, NoiseMode, TopoLossConfig,
    TopoLossReport,
};
pub use matching::{
    hungarian, match_diagrams, match_diagrams_with, DiagramMatching, Exponent, GroundMetric, Partner,
};
pub use metrics::{
    betti_error, betti_matching_error, evaluate, variation_of_information, MetricReport,
};
pub use persistence::{betti_curve, compute_diagram, oracle_diagram, PersistenceDiagram, PersistentDot};
pub use trainer::{
    ema_update, ramp_up_weight, run_simulation, LabeledTarget, LogitsGrid, StepRecord, TopoTerms,
    TrainConfig, TrainTrace,
};

/// Default persistence threshold separating signal from noise dots.
pub const DEFAULT_PHI: f64 = 0.7;
/// Default EMA decay of the teacher.
pub const DEFAULT_EMA_DECAY: f64 = 0.999;
/// Default weight of the topological consistency term.
pub const DEFAULT_LAMBDA_TOPO: f64 = 0.002;
/// Default scale `k` of the Gaussian ramp-up of the pixel consistency weight.
pub const DEFAULT_RAMP_SCALE: f64 = 0.1;
/// Default weights of cross-entropy and Dice in the supervised loss.
pub const DEFAULT_SUPERVISED_WEIGHT: f64 = 0.5;
/// Default Betti-error window side in pixels.
pub const DEFAULT_WINDOW: usize = 256;
