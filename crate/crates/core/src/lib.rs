//! Planar angle rigidity: angularities, the angle rigidity matrix and its
//! rank test, dependency detection, vertex-addition constructions and
//! angle-only formation control.

pub mod angularity;
pub mod cli;
pub mod construction;
pub mod control;
pub mod dependency;
pub mod error;
pub mod geometry;
pub mod io;
pub mod rigidity;
pub mod sim;

pub use angularity::{AngleTriplet, AngleVector, Angularity};
pub use error::{Error, Result};
pub use geometry::{point, Point};
pub use rigidity::{classify, rigidity_matrix, RigidityReport};
