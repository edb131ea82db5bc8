pub mod barrier;
pub mod ellipsoid;
pub mod error;
pub mod filter;
pub mod format;
pub mod linalg;
pub mod mvee;
pub mod relax;
pub mod sampling;
pub mod scenarios;
pub mod sim;
pub mod verify;
