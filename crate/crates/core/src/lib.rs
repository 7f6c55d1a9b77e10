//! Finite-horizon Glosten-Milgrom market making.
//!
//! A market maker quotes break-even bid and ask prices to a stream of
//! informed and noise traders. This crate provides
//!
//! - the game primitives ([`model`]) and the belief map that drives the
//!   market maker's posterior ([`belief_map`]),
//! - exact closed-form statistics over the binomial law of the buy count
//!   ([`exact`]),
//! - a reproducible Monte Carlo simulator ([`monte_carlo`]),
//! - numerical checks of the bound `E[G_n] <= T · I(Y; X_{1:n})` and of the
//!   entropic inequality behind it ([`verification`]).
//!
//! All logarithms are natural; information is measured in nats.

pub mod belief_map;
pub mod binomial;
pub mod entropy;
pub mod error;
pub mod exact;
pub mod model;
pub mod monte_carlo;
pub mod sum;
pub mod verification;

pub use belief_map::{map_apply, map_iterate, price_from_buycount, BuyCount, MapExponent, MapOrbit};
pub use entropy::{h, h_deriv, UnitInterval};
pub use error::{Error, Result};
pub use exact::{MutualInfoSeries, StepMoments};
pub use model::{AssetValue, Belief, ModelParams, Order, Quote};
pub use monte_carlo::{EnsembleStats, SimConfig, Trajectory, YMode};
pub use verification::{GridSpec, ScalingFit, ScanReport};
