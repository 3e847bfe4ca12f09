pub mod contact_model;
pub mod curate;
pub mod design;
pub mod dynamics;
pub mod error;
pub mod estimate;
pub mod fisher;
pub mod io;
pub mod loss;
pub mod synth;

pub use error::{Error, Result};
