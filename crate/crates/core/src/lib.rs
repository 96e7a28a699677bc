//! Simulation and analysis toolkit for learning dynamics in discretized cheap-talk games.

pub mod equilibria;
pub mod error;
pub mod game;
pub mod harness;
pub mod io;
pub mod dynamics;
pub mod matrix;
pub mod receiver;
pub mod sender;

pub use error::{Error, Result};
pub use game::{Bias, ExploredPolicy, Policy, ReceiverResponse, StateGrid};
pub use matrix::SquareMatrix;
pub use sender::{QTable, Schedules};
