//! Dense optical-flow losses with occlusion-aware geometric constraints.
//!
//! The crate bundles a census photometric term, edge-aware smoothness, the
//! non-intersection and non-blocking geometric penalties, a coarse-to-fine
//! Adam optimizer over the flow field itself, and `.flo`/image I/O.
//!
//! Conventions used throughout:
//!
//! * Rasters are indexed `(row, col)`; continuous positions are `[x, y]`
//!   with `x` along columns.
//! * A flow vector `[u, v]` moves a pixel by `u` columns and `v` rows.
//! * Every loss returns its value together with the gradient with respect
//!   to the flow field(s), computed analytically.
//!
//! ```
//! use geoflow::{non_intersection_loss, FlowField, Image, OcclusionMask, RobustLossParams};
//!
//! let img = Image::constant(8, 8, [0.5; 3]).unwrap();
//! let flow = FlowField::constant(8, 8, [2.0, -1.0]);
//! let occ = OcclusionMask::none(8, 8);
//! let out = non_intersection_loss(&img, &flow, &occ, &RobustLossParams::default()).unwrap();
//! assert_eq!(out.value, 0.0);
//! ```

pub mod blocking;
pub mod config;
pub mod error;
pub mod field;
pub mod geometry;
pub mod gradcheck;
pub mod intersection;
pub mod io;
pub mod metrics;
pub mod objective;
pub mod occlusion;
pub mod optimize;
pub mod oracle;
pub mod photometric;
pub mod pyramid;
pub mod viz;
pub mod warp;

pub use blocking::{blocked_count, non_blocking_loss, BlockUnit, NonBlockingLoss};
pub use config::Config;
pub use error::{Error, FloError, Result};
pub use field::{CoordField, FlowField, Image, OcclusionMask};
pub use geometry::{
    in_quadrilateral, in_triangle, intersection_coeffs, segment_distance, IntersectCoeffs, QuadMembership,
    SegmentDistance, Vec2,
};
pub use gradcheck::{finite_diff_check, gradcheck_scene, GradCheckReport, LossSelector};
pub use intersection::{crossing_count, non_intersection_loss, IntersectUnit, NonIntersectionLoss};
pub use io::{read_flo, read_image, write_flo, write_image};
pub use metrics::{epe, FlowEvalResult, ValidityMask};
pub use objective::{total_loss, total_loss_with_masks, LossBreakdown, LossConfig, LossTerms};
pub use occlusion::{occlusion_mask, OcclusionParams};
pub use optimize::{adam_step, optimize_flow_pair, AdamParams, AdamState, OptimizeConfig, OptimizeResult};
pub use photometric::{
    census_loss, census_transform, robust_sigma, smoothness_loss, CensusField, CensusLoss, RobustLossParams,
    SmoothnessOrder, SmoothnessParams,
};
pub use viz::flow_to_color;
pub use warp::{bilinear_sample, displace, warp};
