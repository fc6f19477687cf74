pub mod cli;
pub mod coupling;
pub mod error;
pub mod model;
pub mod numerics;
pub mod rates;
pub mod resolvent;
