pub mod assets;
pub mod math;
pub mod rng;
pub mod scene;
pub mod physics;
pub mod render;
pub mod export;
pub mod metrics;
pub mod runtime;
