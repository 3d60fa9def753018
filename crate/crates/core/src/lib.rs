//! Proprioceptive soft-finger grasping.
//!
//! The crate simulates a three-finger gripper whose soft fingers carry five
//! optical fibers each. Bending a fiber attenuates the light it carries; the
//! per-fiber losses are mapped to the finger's normal force and the sign of its
//! twist torque by a calibrated linear model. Those estimates drive an
//! interactive grasp loop: twist every finger until its Z-torque vanishes,
//! switch the base layout to suit the object, then rebalance the normal forces
//! so the resting friction load is zero and the anti-disturbance margin is
//! maximal.
//!
//! Modules, bottom-up:
//!
//! - [`scene`]: planar objects, finger layouts, contact resolution, pose noise.
//! - [`sensor`]: flux loss, synthetic fiber response, ground-truth reaction wrench.
//! - [`calibration`]: dataset generation, ridge/logistic fit, RMSE and R² metrics.
//! - [`mechanics`]: friction cone, equilibrium residuals, squeeze solve, margin.
//! - [`optimizer`]: torque and friction optimization, the interactive grasp.
//! - [`harness`]: shake test, conventional-vs-interactive comparison, reports.
//! - [`config`] and [`cli`]: scene/params files and the command-line front end.

pub mod calibration;
pub mod cli;
pub mod config;
pub mod error;
pub mod harness;
pub mod mechanics;
pub mod nnls;
pub mod optimizer;
pub mod scene;
pub mod sensor;

pub use error::{Error, Result};
