// Exact rationals make error payloads large; errors are rare and not on hot paths.
#![allow(clippy::result_large_err)]

pub mod corpus;
pub mod minplus;
pub mod rational;
pub mod redundancy;
pub mod regulators;
pub mod sim;
pub mod tfa;
pub mod topology;
pub mod verify;

pub use minplus::{h_dev, v_dev, Bound, ConcaveCurve, CurveError, RateLatency, ServiceCurve, TokenBucket};
pub use rational::Rational;
