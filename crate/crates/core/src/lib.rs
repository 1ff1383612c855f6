//! Polygon-network activity spaces from irregularly sampled GPS data.
//!
//! The crate estimates how time is split across GIS polygons and road
//! segments, derives level-γ activity spaces, clusters daily activity
//! patterns and measures their stability over time. A map-based simulator
//! and a Monte Carlo harness ship alongside for evaluation.

pub mod activity_space;
pub mod clustering;
pub mod error;
pub mod estimation;
pub mod eval;
pub mod geometry;
pub mod gis;
pub mod ingest;
pub mod plot;
pub mod pn;
pub mod simulator;
pub mod stability;

pub use error::{Error, Result};
pub use estimation::{
    adjust_assignments, assign, compute_marks, estimate, normalize_by_class, ClassTables,
    Estimator, MarkedDay, TimeUseEntry, TimeUseTable,
};
pub use geometry::{BoundingBox, Point2D, Polygon, Polyline};
pub use ingest::{GpsDay, GpsRecord};
pub use pn::{
    distance_point_to_entity, misclassification_bound, Entity, EntityId, EntityKind, Geometry,
    Nearest, PnSpace,
};
pub use activity_space::{composed_space, level_space, weighted_level_space, ActivitySpace, SpaceClass, WeightedSpace};
pub use clustering::{
    adjusted_rand_index, compress, distance_matrix, flag_outliers, remove_jitter_loops, single_linkage,
    tw_edit_distance, Cut, DayPattern, Dendrogram, DistanceMatrix, MatchCost,
};
pub use eval::{convergence_check, rmise, run_comparison, ExperimentGrid, Rmise};
pub use simulator::{Scenario, Simulator, TimestampMode};
pub use stability::{lct, lct_curve, sym_diff_ratio, StabilitySeries};
