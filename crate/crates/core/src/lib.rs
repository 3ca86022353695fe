//! Synthesizing-control solver for two-point boundary value problems of
//! stationary nonlinear ODE systems.
//!
//! Given `dx/dt = f(x, u)` with a controllable linearization and `f(0,0) = 0`,
//! the library constructs a state-feedback control that steers the system from
//! the origin at `t = 0` toward a target state at `t = 1`. The construction
//! runs on the compressed time scale `t = 1 - e^{-alpha tau}`:
//!
//! 1. shift the deviation variables so the control-free forcing decays at a
//!    chosen exponential order ([`shift_cascade`]),
//! 2. stabilize the resulting linear time-varying system with exponential
//!    coefficients by companion reduction and pole placement ([`stabilizer`]),
//! 3. integrate the exact nonlinear closed loop and map back to original
//!    variables ([`closed_loop`], [`pipeline`]).
//!
//! Right-hand sides are plain arithmetic expressions ([`expr`]); every
//! derivative the construction needs is obtained through truncated Taylor
//! jets, machine-exact for this expression class.

pub mod closed_loop;
pub mod error;
pub mod exp_poly;
pub mod expr;
pub mod linalg;
pub mod pipeline;
pub mod scenarios;
pub mod shift_cascade;
pub mod stabilizer;
pub mod system_model;

pub use error::{Error, Result};
