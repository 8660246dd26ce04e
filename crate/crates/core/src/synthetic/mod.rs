//! Deterministic parametric street scenes and simulated sensors, used as
//! ground truth for the labelling pipeline.

mod render;
mod scenario;
mod scene;
mod truth;

pub use render::{
    render_semantic_image, simulate_lidar, simulate_radar, BeamPattern, RadarOptions, SimulatedLidar, BACKGROUND,
};
pub use scenario::{
    generate_scenario, simulated_rig, CameraConfig, LidarConfig, RadarConfig, ScenarioConfig, Trajectory,
    CAMERA_FRAMES, CHAIN_RATE_HZ, EPOCH, LIDAR_FRAMES,
};
pub use scene::{Footprint, Hit, Prism, Scene, SceneObject, Shape, Snapshot};
pub use truth::{ground_truth_classes, ground_truth_grid};
