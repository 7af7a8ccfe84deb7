//! Built-in scenes.
//!
//! - `scenario-1`: a clear rooftop next to one cluttered with HVAC units.
//! - `scenario-2`: waterfront with open water, a pier, a clear rooftop and a
//!   rubble-strewn one.
//! - `city`: 200 m square with a road grid and traffic, sidewalks, parks, a
//!   river with piers and rooftops of mixed height and condition.

use std::path::Path;

use crate::scene::{SceneError, SceneModel};
use crate::scene_file::{load_scene, parse_scene};

pub const SCENARIO_1: &str = include_str!("../scenes/scenario-1.scene");
pub const SCENARIO_2: &str = include_str!("../scenes/scenario-2.scene");
pub const CITY: &str = include_str!("../scenes/city.scene");

pub const PRESET_NAMES: [&str; 3] = ["scenario-1", "scenario-2", "city"];

pub fn preset_text(name: &str) -> Option<&'static str> {
    match name {
        "scenario-1" => Some(SCENARIO_1),
        "scenario-2" => Some(SCENARIO_2),
        "city" => Some(CITY),
        _ => None,
    }
}

pub fn load_preset(name: &str) -> Option<Result<SceneModel, SceneError>> {
    preset_text(name).map(parse_scene)
}

/// A preset name, or else a path to a scene file.
pub fn resolve_scene(spec: &str) -> Result<SceneModel, SceneError> {
    match load_preset(spec) {
        Some(scene) => scene,
        None => load_scene(Path::new(spec)),
    }
}
