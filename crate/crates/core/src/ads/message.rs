//! Labeled message trees and the typed payloads carried on each channel.

use std::fmt;

use serde::de::Error as _;
use serde::ser::SerializeSeq;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::geometry::Vec2;

#[derive(Debug, Clone, PartialEq)]
pub enum Leaf {
    Num(f64),
    Str(String),
    Bool(bool),
}

/// A message as an ordered, labeled tree. Leaves hold scalars.
#[derive(Debug, Clone, PartialEq)]
pub enum MessageTree {
    Leaf(Leaf),
    Node(Vec<(String, MessageTree)>),
}

impl MessageTree {
    pub fn num(v: f64) -> Self {
        MessageTree::Leaf(Leaf::Num(v))
    }

    pub fn str(v: impl Into<String>) -> Self {
        MessageTree::Leaf(Leaf::Str(v.into()))
    }

    pub fn bool(v: bool) -> Self {
        MessageTree::Leaf(Leaf::Bool(v))
    }

    pub fn node() -> NodeBuilder {
        NodeBuilder(Vec::new())
    }

    pub fn children(&self) -> &[(String, MessageTree)] {
        match self {
            MessageTree::Node(c) => c,
            MessageTree::Leaf(_) => &[],
        }
    }

    pub fn child(&self, label: &str) -> Option<&MessageTree> {
        self.children().iter().find(|(l, _)| l == label).map(|(_, t)| t)
    }

    pub fn as_num(&self) -> Option<f64> {
        match self {
            MessageTree::Leaf(Leaf::Num(v)) => Some(*v),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            MessageTree::Leaf(Leaf::Str(v)) => Some(v),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            MessageTree::Leaf(Leaf::Bool(v)) => Some(*v),
            _ => None,
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            MessageTree::Leaf(_) => 0,
            MessageTree::Node(c) => 1 + c.iter().map(|(_, t)| t.depth()).max().unwrap_or(0),
        }
    }

    pub fn leaf_count(&self) -> usize {
        match self {
            MessageTree::Leaf(_) => 1,
            MessageTree::Node(c) => c.iter().map(|(_, t)| t.leaf_count()).sum(),
        }
    }

    fn to_json(&self) -> serde_json::Value {
        use serde_json::Value as J;
        match self {
            MessageTree::Leaf(Leaf::Num(v)) => {
                serde_json::Number::from_f64(*v).map(J::Number).unwrap_or(J::Null)
            }
            MessageTree::Leaf(Leaf::Str(s)) => J::String(s.clone()),
            MessageTree::Leaf(Leaf::Bool(b)) => J::Bool(*b),
            MessageTree::Node(c) => J::Array(
                c.iter()
                    .map(|(l, t)| J::Array(vec![J::String(l.clone()), t.to_json()]))
                    .collect(),
            ),
        }
    }

    fn from_json(v: serde_json::Value) -> Result<Self, String> {
        use serde_json::Value as J;
        Ok(match v {
            J::Number(n) => MessageTree::num(n.as_f64().ok_or("non-finite number")?),
            J::String(s) => MessageTree::str(s),
            J::Bool(b) => MessageTree::bool(b),
            J::Array(items) => {
                let mut out = Vec::with_capacity(items.len());
                for it in items {
                    match it {
                        J::Array(mut pair) if pair.len() == 2 => {
                            let t = pair.pop().unwrap();
                            let l = match pair.pop().unwrap() {
                                J::String(s) => s,
                                _ => return Err("child label must be a string".into()),
                            };
                            out.push((l, Self::from_json(t)?));
                        }
                        _ => return Err("node children must be [label, tree] pairs".into()),
                    }
                }
                MessageTree::Node(out)
            }
            J::Null => return Err("null is not a valid tree".into()),
            J::Object(_) => return Err("objects are not valid trees".into()),
        })
    }
}

/// Leaves serialize as JSON scalars, nodes as arrays of `[label, subtree]` pairs.
impl Serialize for MessageTree {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            MessageTree::Leaf(Leaf::Num(v)) => s.serialize_f64(*v),
            MessageTree::Leaf(Leaf::Str(v)) => s.serialize_str(v),
            MessageTree::Leaf(Leaf::Bool(v)) => s.serialize_bool(*v),
            MessageTree::Node(c) => {
                let mut seq = s.serialize_seq(Some(c.len()))?;
                for (l, t) in c {
                    seq.serialize_element(&(l, t))?;
                }
                seq.end()
            }
        }
    }
}

impl<'de> Deserialize<'de> for MessageTree {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = serde_json::Value::deserialize(d)?;
        MessageTree::from_json(v).map_err(D::Error::custom)
    }
}

impl fmt::Display for MessageTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_json())
    }
}

pub struct NodeBuilder(Vec<(String, MessageTree)>);

impl NodeBuilder {
    pub fn with(mut self, label: impl Into<String>, t: MessageTree) -> Self {
        self.0.push((label.into(), t));
        self
    }

    pub fn num(self, label: &str, v: f64) -> Self {
        self.with(label, MessageTree::num(v))
    }

    pub fn str(self, label: &str, v: impl Into<String>) -> Self {
        self.with(label, MessageTree::str(v))
    }

    pub fn bool(self, label: &str, v: bool) -> Self {
        self.with(label, MessageTree::bool(v))
    }

    pub fn build(self) -> MessageTree {
        MessageTree::Node(self.0)
    }
}

/// Failure to read a typed payload back out of a tree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError(pub String);

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

type Parsed<T> = Result<T, ParseError>;

fn field<'a>(t: &'a MessageTree, label: &str) -> Parsed<&'a MessageTree> {
    t.child(label)
        .ok_or_else(|| ParseError(format!("missing field `{label}`")))
}

fn num(t: &MessageTree, label: &str) -> Parsed<f64> {
    field(t, label)?
        .as_num()
        .ok_or_else(|| ParseError(format!("`{label}` is not a number")))
}

fn text(t: &MessageTree, label: &str) -> Parsed<String> {
    field(t, label)?
        .as_str()
        .map(str::to_string)
        .ok_or_else(|| ParseError(format!("`{label}` is not a string")))
}

fn flag(t: &MessageTree, label: &str) -> Parsed<bool> {
    field(t, label)?
        .as_bool()
        .ok_or_else(|| ParseError(format!("`{label}` is not a boolean")))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChassisMsg {
    pub position: Vec2,
    pub heading: f64,
    pub speed: f64,
}

impl ChassisMsg {
    pub fn to_tree(&self) -> MessageTree {
        MessageTree::node()
            .num("x", self.position.x)
            .num("y", self.position.y)
            .num("heading", self.heading)
            .num("speed", self.speed)
            .build()
    }

    pub fn from_tree(t: &MessageTree) -> Parsed<Self> {
        Ok(Self {
            position: Vec2::new(num(t, "x")?, num(t, "y")?),
            heading: num(t, "heading")?,
            speed: num(t, "speed")?,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerceivedObstacle {
    pub id: String,
    pub kind: String,
    pub color: String,
    pub position: Vec2,
    pub heading: f64,
    /// Direction of travel estimated from successive observations.
    pub course: f64,
    pub speed: f64,
    pub half_length: f64,
    pub half_width: f64,
    pub visible: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerceivedLight {
    pub id: String,
    pub state: String,
    pub position: Vec2,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PerceptionMsg {
    pub obstacles: Vec<PerceivedObstacle>,
    pub lights: Vec<PerceivedLight>,
}

impl PerceptionMsg {
    pub fn to_tree(&self) -> MessageTree {
        let obstacles = self
            .obstacles
            .iter()
            .map(|o| {
                (
                    o.id.clone(),
                    MessageTree::node()
                        .str("id", o.id.clone())
                        .str("kind", o.kind.clone())
                        .str("color", o.color.clone())
                        .num("x", o.position.x)
                        .num("y", o.position.y)
                        .num("heading", o.heading)
                        .num("course", o.course)
                        .num("speed", o.speed)
                        .num("half_length", o.half_length)
                        .num("half_width", o.half_width)
                        .num("visible", o.visible)
                        .build(),
                )
            })
            .collect();
        let lights = self
            .lights
            .iter()
            .map(|l| {
                (
                    l.id.clone(),
                    MessageTree::node()
                        .str("id", l.id.clone())
                        .str("state", l.state.clone())
                        .num("x", l.position.x)
                        .num("y", l.position.y)
                        .build(),
                )
            })
            .collect();
        MessageTree::node()
            .with("obstacles", MessageTree::Node(obstacles))
            .with("lights", MessageTree::Node(lights))
            .build()
    }

    pub fn from_tree(t: &MessageTree) -> Parsed<Self> {
        let mut obstacles = Vec::new();
        for (_, o) in field(t, "obstacles")?.children() {
            obstacles.push(PerceivedObstacle {
                id: text(o, "id")?,
                kind: text(o, "kind")?,
                color: text(o, "color")?,
                position: Vec2::new(num(o, "x")?, num(o, "y")?),
                heading: num(o, "heading")?,
                course: num(o, "course")?,
                speed: num(o, "speed")?,
                half_length: num(o, "half_length")?,
                half_width: num(o, "half_width")?,
                visible: num(o, "visible")?,
            });
        }
        let mut lights = Vec::new();
        for (_, l) in field(t, "lights")?.children() {
            lights.push(PerceivedLight {
                id: text(l, "id")?,
                state: text(l, "state")?,
                position: Vec2::new(num(l, "x")?, num(l, "y")?),
            });
        }
        Ok(Self { obstacles, lights })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BrakeMsg {
    pub pred_brake: f64,
}

impl BrakeMsg {
    pub fn to_tree(&self) -> MessageTree {
        MessageTree::node().num("pred_brake", self.pred_brake).build()
    }

    pub fn from_tree(t: &MessageTree) -> Parsed<Self> {
        Ok(Self {
            pred_brake: num(t, "pred_brake")?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MotionLabel {
    Static,
    Moving,
    /// A vulnerable road user standing at the curb, predicted to step into the lane.
    Crossing,
    /// Outside the prediction range; no trajectory.
    Ignored,
}

impl MotionLabel {
    pub fn label(self) -> &'static str {
        match self {
            MotionLabel::Static => "static",
            MotionLabel::Moving => "moving",
            MotionLabel::Crossing => "crossing",
            MotionLabel::Ignored => "ignored",
        }
    }

    pub fn from_label(s: &str) -> Option<Self> {
        Some(match s {
            "static" => MotionLabel::Static,
            "moving" => MotionLabel::Moving,
            "crossing" => MotionLabel::Crossing,
            "ignored" => MotionLabel::Ignored,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictedObstacle {
    pub id: String,
    pub label: MotionLabel,
    pub heading: f64,
    pub speed: f64,
    pub half_length: f64,
    pub half_width: f64,
    /// (time offset, position) samples.
    pub traj: Vec<(f64, Vec2)>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PredictionMsg {
    pub obstacles: Vec<PredictedObstacle>,
}

impl PredictionMsg {
    pub fn to_tree(&self) -> MessageTree {
        let obstacles = self
            .obstacles
            .iter()
            .map(|o| {
                let node = if o.label == MotionLabel::Ignored {
                    MessageTree::node()
                        .str("id", o.id.clone())
                        .str("label", o.label.label())
                        .build()
                } else {
                    let traj = o
                        .traj
                        .iter()
                        .enumerate()
                        .map(|(k, (t, p))| {
                            (
                                k.to_string(),
                                MessageTree::node().num("t", *t).num("x", p.x).num("y", p.y).build(),
                            )
                        })
                        .collect();
                    MessageTree::node()
                        .str("id", o.id.clone())
                        .str("label", o.label.label())
                        .num("heading", o.heading)
                        .num("speed", o.speed)
                        .num("half_length", o.half_length)
                        .num("half_width", o.half_width)
                        .with("traj", MessageTree::Node(traj))
                        .build()
                };
                (o.id.clone(), node)
            })
            .collect();
        MessageTree::node()
            .with("obstacles", MessageTree::Node(obstacles))
            .build()
    }

    pub fn from_tree(t: &MessageTree) -> Parsed<Self> {
        let mut obstacles = Vec::new();
        for (_, o) in field(t, "obstacles")?.children() {
            let label_text = text(o, "label")?;
            let label = MotionLabel::from_label(&label_text)
                .ok_or_else(|| ParseError(format!("unknown motion label `{label_text}`")))?;
            if label == MotionLabel::Ignored {
                obstacles.push(PredictedObstacle {
                    id: text(o, "id")?,
                    label,
                    heading: 0.0,
                    speed: 0.0,
                    half_length: 0.0,
                    half_width: 0.0,
                    traj: Vec::new(),
                });
                continue;
            }
            let mut traj = Vec::new();
            for (_, p) in field(o, "traj")?.children() {
                traj.push((num(p, "t")?, Vec2::new(num(p, "x")?, num(p, "y")?)));
            }
            obstacles.push(PredictedObstacle {
                id: text(o, "id")?,
                label,
                heading: num(o, "heading")?,
                speed: num(o, "speed")?,
                half_length: num(o, "half_length")?,
                half_width: num(o, "half_width")?,
                traj,
            });
        }
        Ok(Self { obstacles })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Cruise,
    Yield,
    Overtake,
    Stop,
}

impl Decision {
    pub fn label(self) -> &'static str {
        match self {
            Decision::Cruise => "cruise",
            Decision::Yield => "yield",
            Decision::Overtake => "overtake",
            Decision::Stop => "stop",
        }
    }

    pub fn from_label(s: &str) -> Option<Self> {
        Some(match s {
            "cruise" => Decision::Cruise,
            "yield" => Decision::Yield,
            "overtake" => Decision::Overtake,
            "stop" => Decision::Stop,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanPoint {
    pub t: f64,
    pub position: Vec2,
    pub speed: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanningMsg {
    pub lane_id: String,
    pub decision: Decision,
    /// Obstacle the decision refers to; empty when cruising.
    pub target_obstacle: String,
    pub target_speed: f64,
    pub target_accel: f64,
    /// Route station of the stop point, or -1 when there is none.
    pub stop_s: f64,
    pub traj: Vec<PlanPoint>,
}

impl PlanningMsg {
    pub fn to_tree(&self) -> MessageTree {
        let traj = self
            .traj
            .iter()
            .enumerate()
            .map(|(k, p)| {
                (
                    k.to_string(),
                    MessageTree::node()
                        .num("t", p.t)
                        .num("x", p.position.x)
                        .num("y", p.position.y)
                        .num("v", p.speed)
                        .build(),
                )
            })
            .collect();
        MessageTree::node()
            .str("lane_id", self.lane_id.clone())
            .str("decision", self.decision.label())
            .str("target_obstacle", self.target_obstacle.clone())
            .num("target_speed", self.target_speed)
            .num("target_accel", self.target_accel)
            .num("stop_s", self.stop_s)
            .with("traj", MessageTree::Node(traj))
            .build()
    }

    pub fn from_tree(t: &MessageTree) -> Parsed<Self> {
        let decision_text = text(t, "decision")?;
        let mut traj = Vec::new();
        for (_, p) in field(t, "traj")?.children() {
            traj.push(PlanPoint {
                t: num(p, "t")?,
                position: Vec2::new(num(p, "x")?, num(p, "y")?),
                speed: num(p, "v")?,
            });
        }
        Ok(Self {
            lane_id: text(t, "lane_id")?,
            decision: Decision::from_label(&decision_text)
                .ok_or_else(|| ParseError(format!("unknown decision `{decision_text}`")))?,
            target_obstacle: text(t, "target_obstacle")?,
            target_speed: num(t, "target_speed")?,
            target_accel: num(t, "target_accel")?,
            stop_s: num(t, "stop_s")?,
            traj,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ControlMsg {
    pub steer: f64,
    pub throttle: f64,
    pub brake: f64,
    pub collide_flag: bool,
    pub brake_override: bool,
}

impl ControlMsg {
    pub fn to_tree(&self) -> MessageTree {
        MessageTree::node()
            .num("steer", self.steer)
            .num("throttle", self.throttle)
            .num("brake", self.brake)
            .bool("collide_flag", self.collide_flag)
            .bool("brake_override", self.brake_override)
            .build()
    }

    pub fn from_tree(t: &MessageTree) -> Parsed<Self> {
        Ok(Self {
            steer: num(t, "steer")?,
            throttle: num(t, "throttle")?,
            brake: num(t, "brake")?,
            collide_flag: flag(t, "collide_flag")?,
            brake_override: flag(t, "brake_override")?,
        })
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use proptest::prelude::*;

    pub fn arb_tree() -> impl Strategy<Value = MessageTree> {
        let leaf = prop_oneof![
            (-1e6f64..1e6).prop_map(MessageTree::num),
            "[a-z]{0,6}".prop_map(MessageTree::str),
            any::<bool>().prop_map(MessageTree::bool),
        ];
        leaf.prop_recursive(4, 64, 4, |inner| {
            prop::collection::vec(("[a-z]{1,4}", inner), 0..4).prop_map(MessageTree::Node)
        })
    }

    proptest! {
        #[test]
        fn tree_round_trips_through_json(t in arb_tree()) {
            let s = serde_json::to_string(&t).unwrap();
            let back: MessageTree = serde_json::from_str(&s).unwrap();
            prop_assert_eq!(back, t);
        }
    }

    #[test]
    fn typed_payloads_round_trip() {
        let p = PredictionMsg {
            obstacles: vec![
                PredictedObstacle {
                    id: "a".into(),
                    label: MotionLabel::Moving,
                    heading: 0.3,
                    speed: 0.98,
                    half_length: 2.3,
                    half_width: 1.0,
                    traj: vec![(0.0, Vec2::new(1.0, 2.0)), (0.5, Vec2::new(1.1, 2.0))],
                },
                PredictedObstacle {
                    id: "b".into(),
                    label: MotionLabel::Ignored,
                    heading: 0.0,
                    speed: 0.0,
                    half_length: 0.0,
                    half_width: 0.0,
                    traj: vec![],
                },
            ],
        };
        assert_eq!(PredictionMsg::from_tree(&p.to_tree()).unwrap(), p);
        let c = ControlMsg {
            steer: -0.1,
            throttle: 0.0,
            brake: 1.0,
            collide_flag: false,
            brake_override: true,
        };
        assert_eq!(ControlMsg::from_tree(&c.to_tree()).unwrap(), c);
    }

    #[test]
    fn node_serializes_as_pairs() {
        let t = MessageTree::node().num("a", 1.5).str("b", "x").build();
        assert_eq!(serde_json::to_string(&t).unwrap(), r#"[["a",1.5],["b","x"]]"#);
    }
}
