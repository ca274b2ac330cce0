pub mod clustering;
pub mod data;
pub mod evaluation;
pub mod features;
pub mod forecast;
pub mod learners;
pub mod occur;
pub mod pipeline;
pub mod recognition;
pub mod smo;
pub mod solar;
pub mod synth;
pub mod validity;
