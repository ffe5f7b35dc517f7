//! Physical scene model: actors, map entities, weather and scripted motion, plus the
//! delta type shared by both mutation phases.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::TAU;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Obb, Vec2};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActorKind {
    Ego,
    Sedan,
    Truck,
    Cyclist,
    Pedestrian,
}

impl ActorKind {
    pub const fn label(self) -> &'static str {
        match self {
            ActorKind::Ego => "ego",
            ActorKind::Sedan => "sedan",
            ActorKind::Truck => "truck",
            ActorKind::Cyclist => "cyclist",
            ActorKind::Pedestrian => "pedestrian",
        }
    }

    pub fn from_label(s: &str) -> Option<Self> {
        Some(match s {
            "ego" => ActorKind::Ego,
            "sedan" => ActorKind::Sedan,
            "truck" => ActorKind::Truck,
            "cyclist" => ActorKind::Cyclist,
            "pedestrian" => ActorKind::Pedestrian,
            _ => return None,
        })
    }

    pub fn default_extent(self) -> Extent {
        match self {
            ActorKind::Ego | ActorKind::Sedan => Extent::new(2.3, 1.0),
            ActorKind::Truck => Extent::new(4.0, 1.25),
            ActorKind::Cyclist => Extent::new(0.9, 0.35),
            ActorKind::Pedestrian => Extent::new(0.3, 0.3),
        }
    }

    pub fn is_vehicle(self) -> bool {
        matches!(self, ActorKind::Sedan | ActorKind::Truck)
    }

    pub fn is_vulnerable(self) -> bool {
        matches!(self, ActorKind::Cyclist | ActorKind::Pedestrian)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Color {
    Red,
    Blue,
    Black,
    White,
    Gray,
}

impl Color {
    pub const ALL: [Color; 5] = [Color::Red, Color::Blue, Color::Black, Color::White, Color::Gray];

    pub const fn label(self) -> &'static str {
        match self {
            Color::Red => "red",
            Color::Blue => "blue",
            Color::Black => "black",
            Color::White => "white",
            Color::Gray => "gray",
        }
    }

    pub fn from_label(s: &str) -> Option<Self> {
        Color::ALL.into_iter().find(|c| c.label() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Extent {
    pub half_length: f64,
    pub half_width: f64,
}

impl Extent {
    pub const fn new(half_length: f64, half_width: f64) -> Self {
        Self {
            half_length,
            half_width,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActorState {
    pub id: String,
    pub kind: ActorKind,
    pub color: Color,
    pub position: Vec2,
    pub heading: f64,
    pub speed: f64,
    pub extent: Extent,
}

impl ActorState {
    pub fn obb(&self) -> Obb {
        Obb::new(
            self.position,
            self.heading,
            self.extent.half_length,
            self.extent.half_width,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MapEntityKind {
    TrafficCone,
    Box,
    Building,
    Vegetation,
    TrafficLight,
}

impl MapEntityKind {
    pub const fn label(self) -> &'static str {
        match self {
            MapEntityKind::TrafficCone => "traffic_cone",
            MapEntityKind::Box => "box",
            MapEntityKind::Building => "building",
            MapEntityKind::Vegetation => "vegetation",
            MapEntityKind::TrafficLight => "traffic_light",
        }
    }

    /// Entities the ego can physically hit.
    pub fn is_solid(self) -> bool {
        !matches!(self, MapEntityKind::TrafficLight)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LightPolicy {
    Red,
    Yellow,
    Green,
}

impl LightPolicy {
    pub const ALL: [LightPolicy; 3] = [LightPolicy::Red, LightPolicy::Yellow, LightPolicy::Green];

    pub const fn label(self) -> &'static str {
        match self {
            LightPolicy::Red => "red",
            LightPolicy::Yellow => "yellow",
            LightPolicy::Green => "green",
        }
    }

    pub fn from_label(s: &str) -> Option<Self> {
        LightPolicy::ALL.into_iter().find(|c| c.label() == s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapEntityState {
    pub id: String,
    pub kind: MapEntityKind,
    pub position: Vec2,
    pub heading: f64,
    pub enabled: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub light_policy: Option<LightPolicy>,
    pub extent: Extent,
}

impl MapEntityState {
    pub fn obb(&self) -> Obb {
        Obb::new(
            self.position,
            self.heading,
            self.extent.half_length,
            self.extent.half_width,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeatherState {
    pub cloudiness: f64,
    pub precipitation: f64,
    pub sun_azimuth: f64,
    pub sun_altitude: f64,
    pub fog_density: f64,
}

impl Default for WeatherState {
    fn default() -> Self {
        Self {
            cloudiness: 10.0,
            precipitation: 0.0,
            sun_azimuth: 180.0,
            sun_altitude: 45.0,
            fog_density: 0.0,
        }
    }
}

/// Closed ranges of the weather fields (azimuth is half-open).
pub const WEATHER_FIELDS: [(&str, f64, f64); 5] = [
    ("cloudiness", 0.0, 100.0),
    ("precipitation", 0.0, 100.0),
    ("sun_azimuth", 0.0, 360.0),
    ("sun_altitude", -90.0, 90.0),
    ("fog_density", 0.0, 100.0),
];

/// Precipitation above which scripted drift offsets take effect.
pub const WET_GROUND_PRECIPITATION: f64 = 50.0;

impl WeatherState {
    pub fn get(&self, field: &str) -> Option<f64> {
        Some(match field {
            "cloudiness" => self.cloudiness,
            "precipitation" => self.precipitation,
            "sun_azimuth" => self.sun_azimuth,
            "sun_altitude" => self.sun_altitude,
            "fog_density" => self.fog_density,
            _ => return None,
        })
    }

    fn slot(&mut self, field: &str) -> Option<&mut f64> {
        Some(match field {
            "cloudiness" => &mut self.cloudiness,
            "precipitation" => &mut self.precipitation,
            "sun_azimuth" => &mut self.sun_azimuth,
            "sun_altitude" => &mut self.sun_altitude,
            "fog_density" => &mut self.fog_density,
            _ => return None,
        })
    }

    pub fn is_wet(&self) -> bool {
        self.precipitation > WET_GROUND_PRECIPITATION
    }
}

/// One point of a scripted actor's schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Waypoint {
    pub t: f64,
    pub position: Vec2,
    pub heading: f64,
    pub speed: f64,
    /// Heading offset from the path tangent, applied only on wet ground.
    #[serde(default, skip_serializing_if = "is_zero")]
    pub drift: f64,
}

fn is_zero(v: &f64) -> bool {
    *v == 0.0
}

/// Static road description: the ego follows the straight lane through its start pose.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoadMap {
    pub name: String,
    /// Mission cruise speed along the ego lane, m/s.
    pub speed_limit: f64,
    pub lane_half_width: f64,
}

impl Default for RoadMap {
    fn default() -> Self {
        Self {
            name: "straight".into(),
            speed_limit: 8.0,
            lane_half_width: 1.75,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhysicalCondition {
    pub map: RoadMap,
    pub actors: Vec<ActorState>,
    pub map_entities: Vec<MapEntityState>,
    pub weather: WeatherState,
    /// Waypoint schedules keyed by actor id.
    pub actor_scripts: BTreeMap<String, Vec<Waypoint>>,
}

impl PhysicalCondition {
    pub fn ego(&self) -> Option<&ActorState> {
        self.actors.iter().find(|a| a.kind == ActorKind::Ego)
    }

    pub fn actor(&self, id: &str) -> Option<&ActorState> {
        self.actors.iter().find(|a| a.id == id)
    }

    pub fn map_entity(&self, id: &str) -> Option<&MapEntityState> {
        self.map_entities.iter().find(|m| m.id == id)
    }

    /// Reports every invariant violation, each prefixed by the offending path.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let mut push = |path: String, msg: String| out.push(Violation { path, message: msg });

        let egos = self.actors.iter().filter(|a| a.kind == ActorKind::Ego).count();
        if egos != 1 {
            push("actors".into(), format!("expected exactly one ego, found {egos}"));
        }
        let mut ids = BTreeSet::new();
        for a in &self.actors {
            let p = format!("actors.{}", a.id);
            if a.id.is_empty() || a.id.contains('.') {
                push(p.clone(), "id must be non-empty and contain no '.'".into());
            }
            if !ids.insert(a.id.clone()) {
                push(p.clone(), format!("duplicate id `{}`", a.id));
            }
            if !(a.speed >= 0.0) || !a.speed.is_finite() {
                push(format!("{p}.speed"), format!("speed {} must be >= 0", a.speed));
            }
            if !(a.extent.half_length > 0.0 && a.extent.half_width > 0.0) {
                push(format!("{p}.extent"), "extent components must be > 0".into());
            }
            if !heading_in_range(a.heading) {
                push(format!("{p}.heading"), format!("heading {} outside [0, 2π)", a.heading));
            }
            if !(a.position.x.is_finite() && a.position.y.is_finite()) {
                push(format!("{p}.position"), "position must be finite".into());
            }
        }
        for m in &self.map_entities {
            let p = format!("map_entities.{}", m.id);
            if m.id.is_empty() || m.id.contains('.') {
                push(p.clone(), "id must be non-empty and contain no '.'".into());
            }
            if !ids.insert(m.id.clone()) {
                push(p.clone(), format!("duplicate id `{}`", m.id));
            }
            let is_light = m.kind == MapEntityKind::TrafficLight;
            if is_light != m.light_policy.is_some() {
                push(
                    format!("{p}.light_policy"),
                    "light_policy must be present iff kind = traffic_light".into(),
                );
            }
            if !heading_in_range(m.heading) {
                push(format!("{p}.heading"), format!("heading {} outside [0, 2π)", m.heading));
            }
            if !(m.extent.half_length > 0.0 && m.extent.half_width > 0.0) {
                push(format!("{p}.extent"), "extent components must be > 0".into());
            }
        }
        for (field, lo, hi) in WEATHER_FIELDS {
            let v = self.weather.get(field).unwrap_or(f64::NAN);
            let ok = if field == "sun_azimuth" {
                v >= lo && v < hi
            } else {
                v >= lo && v <= hi
            };
            if !ok {
                push(format!("weather.{field}"), format!("{v} outside [{lo}, {hi}]"));
            }
        }
        for (id, wps) in &self.actor_scripts {
            let p = format!("actor_scripts.{id}");
            match self.actor(id) {
                None => push(p.clone(), format!("script references unknown actor `{id}`")),
                Some(a) if a.kind == ActorKind::Ego => {
                    push(p.clone(), "the ego is driven by the ADS and cannot be scripted".into())
                }
                _ => {}
            }
            if wps.is_empty() {
                push(p.clone(), "empty script".into());
            }
            for w in wps.windows(2) {
                if !(w[1].t > w[0].t) {
                    push(p.clone(), format!("script times not strictly increasing at t={}", w[1].t));
                    break;
                }
            }
            if wps.iter().any(|w| !(w.speed >= 0.0)) {
                push(p.clone(), "waypoint speeds must be >= 0".into());
            }
        }
        if !(self.map.speed_limit > 0.0) {
            push("map.speed_limit".into(), "must be > 0".into());
        }
        if !(self.map.lane_half_width > 0.0) {
            push("map.lane_half_width".into(), "must be > 0".into());
        }
        out
    }

    pub fn ensure_valid(&self) -> Result<()> {
        let v = self.validate();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidScenario(
                v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "),
            ))
        }
    }

    /// Reads a property addressed by a delta path.
    pub fn get(&self, path: &str) -> Result<Value> {
        let parts: Vec<&str> = path.split('.').collect();
        let unresolved = || Error::UnresolvedPath(path.to_string());
        match parts.as_slice() {
            ["actors", id, prop] => {
                let a = self.actor(id).ok_or_else(unresolved)?;
                Ok(match *prop {
                    "kind" => Value::Label(a.kind.label().into()),
                    "color" => Value::Label(a.color.label().into()),
                    "x" => Value::Real(a.position.x),
                    "y" => Value::Real(a.position.y),
                    "heading" => Value::Real(a.heading),
                    "speed" => Value::Real(a.speed),
                    _ => return Err(unresolved()),
                })
            }
            ["map_entities", id, prop] => {
                let m = self.map_entity(id).ok_or_else(unresolved)?;
                Ok(match *prop {
                    "x" => Value::Real(m.position.x),
                    "y" => Value::Real(m.position.y),
                    "heading" => Value::Real(m.heading),
                    "enabled" => Value::Bool(m.enabled),
                    "policy" => Value::Label(m.light_policy.ok_or_else(unresolved)?.label().into()),
                    _ => return Err(unresolved()),
                })
            }
            ["weather", field] => Ok(Value::Real(self.weather.get(field).ok_or_else(unresolved)?)),
            _ => Err(unresolved()),
        }
    }

    fn set(&mut self, path: &str, value: &Value) -> Result<()> {
        let parts: Vec<&str> = path.split('.').collect();
        let unresolved = || Error::UnresolvedPath(path.to_string());
        let bad = |reason: &str| Error::InvalidDeltaEntry {
            path: path.to_string(),
            reason: reason.to_string(),
        };
        match parts.as_slice() {
            ["actors", id, prop] => {
                let a = self
                    .actors
                    .iter_mut()
                    .find(|a| a.id == *id)
                    .ok_or_else(unresolved)?;
                match *prop {
                    "kind" => {
                        let k = value
                            .as_label()
                            .and_then(ActorKind::from_label)
                            .ok_or_else(|| bad("expected an actor kind"))?;
                        if !(a.kind.is_vehicle() && k.is_vehicle()) {
                            return Err(bad("only sedan <-> truck swaps are allowed"));
                        }
                        a.kind = k;
                        a.extent = k.default_extent();
                    }
                    "color" => {
                        a.color = value
                            .as_label()
                            .and_then(Color::from_label)
                            .ok_or_else(|| bad("expected a color"))?;
                    }
                    "x" => a.position.x = finite(value).ok_or_else(|| bad("expected a real"))?,
                    "y" => a.position.y = finite(value).ok_or_else(|| bad("expected a real"))?,
                    "heading" => {
                        let h = finite(value).ok_or_else(|| bad("expected a real"))?;
                        if !heading_in_range(h) {
                            return Err(bad("heading outside [0, 2π)"));
                        }
                        a.heading = h;
                    }
                    "speed" => {
                        let s = finite(value).ok_or_else(|| bad("expected a real"))?;
                        if s < 0.0 {
                            return Err(bad("speed must be >= 0"));
                        }
                        a.speed = s;
                    }
                    _ => return Err(unresolved()),
                }
            }
            ["map_entities", id, prop] => {
                let m = self
                    .map_entities
                    .iter_mut()
                    .find(|m| m.id == *id)
                    .ok_or_else(unresolved)?;
                match *prop {
                    "x" => m.position.x = finite(value).ok_or_else(|| bad("expected a real"))?,
                    "y" => m.position.y = finite(value).ok_or_else(|| bad("expected a real"))?,
                    "heading" => {
                        let h = finite(value).ok_or_else(|| bad("expected a real"))?;
                        if !heading_in_range(h) {
                            return Err(bad("heading outside [0, 2π)"));
                        }
                        m.heading = h;
                    }
                    "enabled" => {
                        m.enabled = value.as_bool().ok_or_else(|| bad("expected a boolean"))?
                    }
                    "policy" => {
                        if m.light_policy.is_none() {
                            return Err(unresolved());
                        }
                        m.light_policy = Some(
                            value
                                .as_label()
                                .and_then(LightPolicy::from_label)
                                .ok_or_else(|| bad("expected a light policy"))?,
                        );
                    }
                    _ => return Err(unresolved()),
                }
            }
            ["weather", field] => {
                let (_, lo, hi) = WEATHER_FIELDS
                    .iter()
                    .find(|(f, _, _)| f == field)
                    .ok_or_else(unresolved)?;
                let v = finite(value).ok_or_else(|| bad("expected a real"))?;
                if v < *lo || v > *hi || (*field == "sun_azimuth" && v >= *hi) {
                    return Err(bad(&format!("{v} outside [{lo}, {hi}]")));
                }
                *self.weather.slot(field).ok_or_else(unresolved)? = v;
            }
            _ => return Err(unresolved()),
        }
        Ok(())
    }
}

fn finite(v: &Value) -> Option<f64> {
    v.as_real().filter(|x| x.is_finite())
}

fn heading_in_range(h: f64) -> bool {
    (0.0..TAU).contains(&h)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub path: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

/// A property value: reals, categorical labels or booleans.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Bool(bool),
    Real(f64),
    Label(String),
}

impl Value {
    pub fn as_real(&self) -> Option<f64> {
        match self {
            Value::Real(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Value::Bool(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_label(&self) -> Option<&str> {
        match self {
            Value::Label(v) => Some(v),
            _ => None,
        }
    }

    pub fn is_categorical(&self) -> bool {
        !matches!(self, Value::Real(_))
    }

    fn matches(&self, other: &Value) -> bool {
        match (self, other) {
            (Value::Real(a), Value::Real(b)) => (a - b).abs() <= 1e-9 * (1.0 + a.abs().max(b.abs())),
            _ => self == other,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Bool(b) => write!(f, "{b}"),
            Value::Real(v) => write!(f, "{v}"),
            Value::Label(s) => write!(f, "{s}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeltaKind {
    Physical,
    Cyber,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaEntry {
    pub path: String,
    pub old: Value,
    pub new: Value,
}

/// A sparse set of property changes against a base object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Delta {
    pub kind: DeltaKind,
    pub entries: Vec<DeltaEntry>,
}

impl Delta {
    pub fn empty(kind: DeltaKind) -> Self {
        Self {
            kind,
            entries: Vec::new(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn push(&mut self, path: impl Into<String>, old: Value, new: Value) {
        self.entries.push(DeltaEntry {
            path: path.into(),
            old,
            new,
        });
    }

    /// The delta that undoes this one.
    pub fn inverse(&self) -> Delta {
        Delta {
            kind: self.kind,
            entries: self
                .entries
                .iter()
                .map(|e| DeltaEntry {
                    path: e.path.clone(),
                    old: e.new.clone(),
                    new: e.old.clone(),
                })
                .collect(),
        }
    }

    /// Edit distance in raw units: one per changed property, plus one per categorical
    /// change, plus `|new - old|` per real change.
    pub fn magnitude(&self) -> f64 {
        self.magnitude_scaled(|_| None)
    }

    /// Same as [`Delta::magnitude`] but each real change is divided by the width returned
    /// by `scale` for its path (raw units when `None`).
    pub fn magnitude_scaled(&self, scale: impl Fn(&str) -> Option<f64>) -> f64 {
        let mut total = self.entries.len() as f64;
        for e in &self.entries {
            match (&e.old, &e.new) {
                (Value::Real(a), Value::Real(b)) => {
                    let w = scale(&e.path).filter(|w| *w > 0.0).unwrap_or(1.0);
                    total += (b - a).abs() / w;
                }
                (a, b) if a != b => total += 1.0,
                _ => {}
            }
        }
        total
    }

    /// Distinct entity ids touched by a physical delta (`actors.<id>.*`, `map_entities.<id>.*`,
    /// and `weather` as a pseudo-entity).
    pub fn entities(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for e in &self.entries {
            let ent = entity_of(&e.path);
            if !out.contains(&ent) {
                out.push(ent);
            }
        }
        out
    }
}

/// Entity component of a physical delta path.
pub fn entity_of(path: &str) -> String {
    let mut it = path.split('.');
    match (it.next(), it.next()) {
        (Some("actors"), Some(id)) | (Some("map_entities"), Some(id)) => id.to_string(),
        (Some(head), _) => head.to_string(),
        _ => path.to_string(),
    }
}

/// Objects a delta can be applied to.
pub trait Apply: Sized + Clone {
    const KIND: DeltaKind;
    fn read(&self, path: &str) -> Result<Value>;
    fn write(&mut self, path: &str, value: &Value) -> Result<()>;
}

impl Apply for PhysicalCondition {
    const KIND: DeltaKind = DeltaKind::Physical;
    fn read(&self, path: &str) -> Result<Value> {
        self.get(path)
    }
    fn write(&mut self, path: &str, value: &Value) -> Result<()> {
        self.set(path, value)
    }
}

/// Returns a copy of `base` with every entry of `delta` applied. `base` is untouched.
pub fn apply_delta<T: Apply>(base: &T, delta: &Delta) -> Result<T> {
    if delta.kind != T::KIND {
        return Err(Error::DeltaKindMismatch);
    }
    let mut out = base.clone();
    for e in &delta.entries {
        if e.old == e.new {
            return Err(Error::InvalidDeltaEntry {
                path: e.path.clone(),
                reason: "old and new values are equal".into(),
            });
        }
        let current = out.read(&e.path)?;
        if !current.matches(&e.old) {
            return Err(Error::InvalidDeltaEntry {
                path: e.path.clone(),
                reason: format!("expected old value {}, found {}", e.old, current),
            });
        }
        out.write(&e.path, &e.new)?;
    }
    Ok(out)
}

/// Mutation-space width of a physical property, used to normalize real changes.
pub fn physical_scale(path: &str) -> Option<f64> {
    let last = path.rsplit('.').next()?;
    if path.starts_with("weather.") {
        return WEATHER_FIELDS
            .iter()
            .find(|(f, _, _)| *f == last)
            .map(|(_, lo, hi)| hi - lo);
    }
    match last {
        "x" | "y" => Some(2.0 * POSITION_SPAN),
        "heading" => Some(TAU),
        "speed" => Some(SPEED_SPAN),
        _ => None,
    }
}

/// Positions may move this far (m) from their original value in either direction.
pub const POSITION_SPAN: f64 = 20.0;
/// Upper bound of mutated speeds, m/s.
pub const SPEED_SPAN: f64 = 20.0;

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub fn sample_condition() -> PhysicalCondition {
        PhysicalCondition {
            map: RoadMap::default(),
            actors: vec![
                ActorState {
                    id: "ego".into(),
                    kind: ActorKind::Ego,
                    color: Color::Blue,
                    position: Vec2::ZERO,
                    heading: 0.0,
                    speed: 8.0,
                    extent: ActorKind::Ego.default_extent(),
                },
                ActorState {
                    id: "lead".into(),
                    kind: ActorKind::Sedan,
                    color: Color::White,
                    position: Vec2::new(30.0, 3.5),
                    heading: 0.0,
                    speed: 0.98,
                    extent: ActorKind::Sedan.default_extent(),
                },
            ],
            map_entities: vec![MapEntityState {
                id: "b1".into(),
                kind: MapEntityKind::Building,
                position: Vec2::new(20.0, 15.0),
                heading: 0.0,
                enabled: true,
                light_policy: None,
                extent: Extent::new(5.0, 5.0),
            }],
            weather: WeatherState::default(),
            actor_scripts: BTreeMap::new(),
        }
    }

    #[test]
    fn empty_delta_is_identity() {
        let p = sample_condition();
        let q = apply_delta(&p, &Delta::empty(DeltaKind::Physical)).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn speed_change_applies() {
        let p = sample_condition();
        let mut d = Delta::empty(DeltaKind::Physical);
        d.push("actors.lead.speed", Value::Real(0.98), Value::Real(1.2));
        let q = apply_delta(&p, &d).unwrap();
        assert_eq!(q.actor("lead").unwrap().speed, 1.2);
        assert_eq!(p.actor("lead").unwrap().speed, 0.98);
        assert_eq!(apply_delta(&q, &d.inverse()).unwrap(), p);
    }

    #[test]
    fn unresolvable_path_rejected() {
        let p = sample_condition();
        let mut d = Delta::empty(DeltaKind::Physical);
        d.push("actors.ghost.speed", Value::Real(1.0), Value::Real(2.0));
        assert!(matches!(apply_delta(&p, &d), Err(Error::UnresolvedPath(_))));
    }

    #[test]
    fn magnitudes() {
        assert_eq!(Delta::empty(DeltaKind::Cyber).magnitude(), 0.0);
        let mut d = Delta::empty(DeltaKind::Physical);
        d.push("actors.lead.color", Value::Label("red".into()), Value::Label("blue".into()));
        assert_eq!(d.magnitude(), 2.0);
        let mut d = Delta::empty(DeltaKind::Cyber);
        d.push("planning.yield_distance", Value::Real(5.0), Value::Real(2.0));
        assert_eq!(d.magnitude(), 4.0);
    }

    #[test]
    fn validation_reports() {
        assert!(sample_condition().validate().is_empty());
        let mut p = sample_condition();
        p.actors[1].id = "ego".into();
        let v = p.validate();
        assert!(v.iter().any(|v| v.message.contains("duplicate id `ego`")));
        let mut p = sample_condition();
        p.weather.precipitation = 150.0;
        let v = p.validate();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].path, "weather.precipitation");
    }

    #[test]
    fn kind_swap_restricted_to_vehicles() {
        let p = sample_condition();
        let mut d = Delta::empty(DeltaKind::Physical);
        d.push("actors.lead.kind", Value::Label("sedan".into()), Value::Label("truck".into()));
        let q = apply_delta(&p, &d).unwrap();
        assert_eq!(q.actor("lead").unwrap().extent, ActorKind::Truck.default_extent());
        let mut d = Delta::empty(DeltaKind::Physical);
        d.push("actors.lead.kind", Value::Label("sedan".into()), Value::Label("pedestrian".into()));
        assert!(apply_delta(&p, &d).is_err());
    }

    proptest::proptest! {
        #[test]
        fn delta_inverse_restores(speed in 0.0f64..20.0, x in -50.0f64..50.0, fog in 0.0f64..100.0,
                                  enable in proptest::bool::ANY) {
            let p = sample_condition();
            let mut d = Delta::empty(DeltaKind::Physical);
            if speed != 0.98 { d.push("actors.lead.speed", Value::Real(0.98), Value::Real(speed)); }
            if x != 30.0 { d.push("actors.lead.x", Value::Real(30.0), Value::Real(x)); }
            if fog != 0.0 { d.push("weather.fog_density", Value::Real(0.0), Value::Real(fog)); }
            if !enable { d.push("map_entities.b1.enabled", Value::Bool(true), Value::Bool(false)); }
            let q = apply_delta(&p, &d).unwrap();
            proptest::prop_assert_eq!(apply_delta(&q, &d.inverse()).unwrap(), p);
            proptest::prop_assert_eq!(d.magnitude() == 0.0, d.is_empty());
        }

        #[test]
        fn real_magnitude_is_linear(a in -10.0f64..10.0, k in 0.1f64..5.0) {
            let mut d1 = Delta::empty(DeltaKind::Cyber);
            d1.push("m.p", Value::Real(a), Value::Real(a + 1.0));
            let mut dk = Delta::empty(DeltaKind::Cyber);
            dk.push("m.p", Value::Real(a), Value::Real(a + k));
            let extra1 = d1.magnitude() - 1.0;
            let extrak = dk.magnitude() - 1.0;
            proptest::prop_assert!((extrak - k * extra1).abs() < 1e-9);
        }
    }
}
