pub mod config;
pub mod design_opt;
pub mod geometry;
pub mod imaging;
pub mod metrics;
pub mod pnm;
pub mod proprio;
pub mod report;
pub mod scene;
