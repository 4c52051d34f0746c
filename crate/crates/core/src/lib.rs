//! Game-theoretic analysis of a four-node full-duplex slotted-Aloha grid.
//!
//! Two pairs of nodes share one channel. Each slot a pair waits, sends a
//! half-duplex packet in either direction, or opens a full-duplex link, and
//! pays a price for transmitting. The crate provides
//!
//! * [`model`]: physical parameters and the derived success factors,
//! * [`game`]: utilities, dominance screening and the mixed-equilibrium family,
//! * [`throughput`]: aggregate throughput and its equilibrium-compatible optimum,
//! * [`poa`]: price of anarchy across the equilibrium family,
//! * [`montecarlo`]: a seeded slot-level simulator used as an oracle.

pub mod error;
pub mod game;
pub mod model;
pub mod montecarlo;
pub mod poa;
pub mod throughput;

pub use error::{Error, Result};
pub use game::{CostPolicy, EquilibriumFamily, MixedStrategy};
pub use model::{derive_constants, DerivedConstants, NetworkParams, Role, Strategy};
