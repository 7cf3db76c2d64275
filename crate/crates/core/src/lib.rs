pub mod approx;
pub mod bench;
pub mod config;
pub mod error;
pub mod exact;
pub mod figures;
pub mod oc;
pub mod recommend;
pub mod report;
pub mod seed;
pub mod special;
pub mod trial;

pub use error::{Error, Result};
