//! Scenario files and the seeded accident library.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::ads;
use crate::config::CyberConfiguration;
use crate::error::{Error, Result};
use crate::geometry::Vec2;
use crate::record::FrameTransform;
use crate::scenario::{
    ActorKind, ActorState, Color, Extent, MapEntityState, PhysicalCondition, RoadMap, Value,
    Waypoint, WeatherState,
};
use crate::sim::AccidentKind;

pub const SCENARIO_VERSION: u32 = 1;

/// One actor as written in a scenario file. The extent defaults to the kind's.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActorEntry {
    pub id: String,
    pub kind: ActorKind,
    pub color: Color,
    pub position: Vec2,
    pub heading: f64,
    pub speed: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extent: Option<Extent>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub script: Vec<Waypoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub version: u32,
    #[serde(default)]
    pub id: String,
    pub map: RoadMap,
    pub actors: Vec<ActorEntry>,
    #[serde(default)]
    pub map_entities: Vec<MapEntityState>,
    #[serde(default)]
    pub weather: WeatherState,
    #[serde(default)]
    pub ego_config_overrides: BTreeMap<String, Value>,
    /// Authoring frame; every pose is moved into the world frame by it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame: Option<FrameTransform>,
}

impl ScenarioFile {
    pub fn parse(text: &str) -> Result<Self> {
        let s: ScenarioFile = serde_json::from_str(text)?;
        if s.version != SCENARIO_VERSION {
            return Err(Error::InvalidScenario(format!(
                "unsupported scenario version {} (expected {SCENARIO_VERSION})",
                s.version
            )));
        }
        Ok(s)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut s = Self::parse(&std::fs::read_to_string(path)?)?;
        if s.id.is_empty() {
            s.id = path
                .file_stem()
                .map(|x| x.to_string_lossy().into_owned())
                .unwrap_or_default();
        }
        Ok(s)
    }

    /// The validated physical condition in world coordinates.
    pub fn condition(&self) -> Result<PhysicalCondition> {
        let mut scripts = BTreeMap::new();
        let actors = self
            .actors
            .iter()
            .map(|a| {
                if !a.script.is_empty() {
                    scripts.insert(a.id.clone(), a.script.clone());
                }
                ActorState {
                    id: a.id.clone(),
                    kind: a.kind,
                    color: a.color,
                    position: a.position,
                    heading: a.heading,
                    speed: a.speed,
                    extent: a.extent.unwrap_or_else(|| a.kind.default_extent()),
                }
            })
            .collect();
        let p = PhysicalCondition {
            map: self.map.clone(),
            actors,
            map_entities: self.map_entities.clone(),
            weather: self.weather,
            actor_scripts: scripts,
        };
        let p = match &self.frame {
            Some(f) => f.apply_to(&p),
            None => p,
        };
        p.ensure_valid()?;
        Ok(p)
    }

    pub fn config(&self) -> Result<CyberConfiguration> {
        CyberConfiguration::with_overrides(&self.ego_config_overrides)
    }
}

/// A library scenario with its seeded misconfiguration.
#[derive(Debug, Clone, PartialEq)]
pub struct Fixture {
    pub id: &'static str,
    pub description: &'static str,
    pub source: &'static str,
    pub module: &'static str,
    pub parameter: &'static str,
    /// Seeded (accident-causing) value, from the scenario's overrides or the default.
    pub seeded: f64,
    /// A value known to suppress the accident.
    pub fix: f64,
    /// Which side of the seeded value a correct fix lies on: +1 above, -1 below.
    pub fix_side: f64,
    /// Edge of the fixing interval next to the seeded value, inclusive.
    pub boundary: f64,
    pub accident: AccidentKind,
}

impl Fixture {
    pub fn scenario(&self) -> Result<ScenarioFile> {
        let mut s = ScenarioFile::parse(self.source)?;
        s.id = self.id.into();
        Ok(s)
    }

    pub fn key(&self) -> String {
        format!("{}.{}", self.module, self.parameter)
    }

    /// Whether `v` lies on the fixing side of the causal boundary.
    pub fn fixes(&self, v: f64) -> bool {
        if self.fix_side > 0.0 {
            v >= self.boundary
        } else {
            v <= self.boundary
        }
    }
}

/// The four seeded scenarios.
pub fn scenario_library() -> Vec<Fixture> {
    vec![
        Fixture {
            id: "s1",
            description: "slow crossing car taken for a static object",
            source: include_str!("../scenarios/s1.json"),
            module: ads::PREDICTION,
            parameter: "still_obstacle_speed_threshold",
            seeded: 0.99,
            fix: 0.5,
            fix_side: -1.0,
            boundary: 0.98,
            accident: AccidentKind::EmergencyBraking,
        },
        Fixture {
            id: "s2",
            description: "oncoming left turner, yield decided too late",
            source: include_str!("../scenarios/s2.json"),
            module: ads::PLANNING,
            parameter: "yield_distance",
            seeded: 5.0,
            fix: 2.0,
            fix_side: -1.0,
            boundary: 4.9334,
            accident: AccidentKind::EmergencyBraking,
        },
        Fixture {
            id: "s3",
            description: "red truck ahead in the next lane triggers a needless hard brake",
            source: include_str!("../scenarios/s3.json"),
            module: ads::PERCEPTION,
            parameter: "BRAKE_THRESHOLD",
            seeded: 0.1,
            fix: 0.2,
            fix_side: 1.0,
            boundary: 0.2,
            accident: AccidentKind::EmergencyBraking,
        },
        Fixture {
            id: "s4",
            description: "truck sliding on wet road clips the ego lane",
            source: include_str!("../scenarios/s4.json"),
            module: ads::PLANNING,
            parameter: "kADCSafetyLBuffer",
            seeded: 0.1,
            fix: 1.0,
            fix_side: 1.0,
            boundary: 0.95,
            accident: AccidentKind::Collision,
        },
    ]
}

pub fn fixture(id: &str) -> Option<Fixture> {
    scenario_library().into_iter().find(|f| f.id == id)
}
