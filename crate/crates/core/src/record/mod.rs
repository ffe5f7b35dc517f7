//! Execution records: line-delimited JSON on disk, trimming and frame transforms.

pub mod replay;

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::ads::{is_known_channel, MessageTree, CHANNELS};
use crate::config::CyberConfiguration;
use crate::error::{Error, Result};
use crate::geometry::{wrap_angle, Vec2};
use crate::scenario::PhysicalCondition;
use crate::sim::{AccidentKind, AccidentVerdict, Sample, SimulationParams, Trajectories};

pub const RECORD_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecordHeader {
    pub version: u32,
    pub scenario_id: String,
    pub seed: u64,
    pub dt: f64,
    pub horizon: f64,
    pub config: CyberConfiguration,
    /// Initial physical condition, needed to rebuild map entities and weather on replay.
    pub scene: PhysicalCondition,
}

impl RecordHeader {
    pub fn new(
        scenario_id: &str,
        params: &SimulationParams,
        cfg: &CyberConfiguration,
        scene: &PhysicalCondition,
    ) -> Self {
        Self {
            version: RECORD_VERSION,
            scenario_id: scenario_id.into(),
            seed: params.seed,
            dt: params.dt,
            horizon: params.horizon,
            config: cfg.clone(),
            scene: scene.clone(),
        }
    }

    pub fn params(&self) -> SimulationParams {
        SimulationParams {
            dt: self.dt,
            horizon: self.horizon,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelMessage {
    pub seq: u64,
    pub t: f64,
    pub tree: MessageTree,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExecutionRecord {
    pub header: RecordHeader,
    pub channels: BTreeMap<String, Vec<ChannelMessage>>,
    pub trajectories: Trajectories,
    pub verdict: AccidentVerdict,
}

#[derive(Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum LineOut<'a> {
    Msg {
        channel: &'a str,
        seq: u64,
        t: f64,
        tree: &'a MessageTree,
    },
    Traj {
        actor: &'a str,
        t: f64,
        x: f64,
        y: f64,
        heading: f64,
        speed: f64,
    },
    Verdict {
        accident: AccidentKind,
        #[serde(skip_serializing_if = "Option::is_none")]
        time: Option<f64>,
        participants: &'a [String],
    },
}

#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum LineIn {
    Msg {
        channel: String,
        seq: u64,
        t: f64,
        tree: MessageTree,
    },
    Traj {
        actor: String,
        t: f64,
        x: f64,
        y: f64,
        heading: f64,
        speed: f64,
    },
    Verdict {
        accident: AccidentKind,
        #[serde(default)]
        time: Option<f64>,
        participants: Vec<String>,
    },
}

impl ExecutionRecord {
    /// Time of the last trajectory sample.
    pub fn end_time(&self) -> f64 {
        self.trajectories
            .values()
            .filter_map(|t| t.last())
            .map(|s| s.t)
            .fold(0.0, f64::max)
    }

    pub fn write_to<W: Write>(&self, w: W) -> Result<()> {
        let mut w = BufWriter::new(w);
        serde_json::to_writer(&mut w, &self.header)?;
        writeln!(w)?;

        // Messages interleaved by tick, channels in bus order within a tick.
        let mut msgs: Vec<(u64, usize, &str, &ChannelMessage)> = Vec::new();
        for (name, list) in &self.channels {
            let order = CHANNELS.iter().position(|c| c == name).unwrap_or(usize::MAX);
            msgs.extend(list.iter().map(|m| (m.seq, order, name.as_str(), m)));
        }
        msgs.sort_by_key(|a| (a.0, a.1));
        for (_, _, channel, m) in msgs {
            let line = LineOut::Msg {
                channel,
                seq: m.seq,
                t: m.t,
                tree: &m.tree,
            };
            serde_json::to_writer(&mut w, &line)?;
            writeln!(w)?;
        }

        let len = self.trajectories.values().map(Vec::len).max().unwrap_or(0);
        for k in 0..len {
            for (actor, traj) in &self.trajectories {
                let Some(s) = traj.get(k) else { continue };
                let line = LineOut::Traj {
                    actor,
                    t: s.t,
                    x: s.position.x,
                    y: s.position.y,
                    heading: s.heading,
                    speed: s.speed,
                };
                serde_json::to_writer(&mut w, &line)?;
                writeln!(w)?;
            }
        }

        let line = LineOut::Verdict {
            accident: self.verdict.kind,
            time: self.verdict.time,
            participants: &self.verdict.participants,
        };
        serde_json::to_writer(&mut w, &line)?;
        writeln!(w)?;
        w.flush()?;
        Ok(())
    }

    pub fn read_from<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines().enumerate();
        let (_, first) = lines
            .next()
            .ok_or_else(|| Error::RecordFormat("empty file".into()))?;
        let header: RecordHeader = serde_json::from_str(&first?)
            .map_err(|e| Error::RecordFormat(format!("line 1: {e}")))?;
        if header.version != RECORD_VERSION {
            return Err(Error::RecordFormat(format!(
                "schema version {} (expected {RECORD_VERSION})",
                header.version
            )));
        }

        let mut channels: BTreeMap<String, Vec<ChannelMessage>> =
            CHANNELS.iter().map(|c| (c.to_string(), Vec::new())).collect();
        let mut trajectories = Trajectories::new();
        let mut verdict = None;
        for (i, line) in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            if verdict.is_some() {
                return Err(Error::RecordFormat(format!("line {}: content after verdict", i + 1)));
            }
            let parsed: LineIn = serde_json::from_str(&line)
                .map_err(|e| Error::RecordFormat(format!("line {}: {e}", i + 1)))?;
            match parsed {
                LineIn::Msg { channel, seq, t, tree } => {
                    if !is_known_channel(&channel) {
                        return Err(Error::UnknownChannel(channel));
                    }
                    let list = channels.get_mut(&channel).expect("known channel");
                    if list.last().is_some_and(|m| m.seq >= seq) {
                        return Err(Error::RecordFormat(format!(
                            "line {}: channel `{channel}` out of order",
                            i + 1
                        )));
                    }
                    list.push(ChannelMessage { seq, t, tree });
                }
                LineIn::Traj {
                    actor,
                    t,
                    x,
                    y,
                    heading,
                    speed,
                } => trajectories.entry(actor).or_default().push(Sample {
                    t,
                    position: Vec2::new(x, y),
                    heading,
                    speed,
                }),
                LineIn::Verdict {
                    accident,
                    time,
                    participants,
                } => {
                    verdict = Some(AccidentVerdict {
                        kind: accident,
                        time,
                        participants,
                    })
                }
            }
        }
        let verdict = verdict.ok_or_else(|| Error::RecordFormat("truncated: no verdict line".into()))?;
        Ok(Self {
            header,
            channels,
            trajectories,
            verdict,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_to(File::create(path)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_from(BufReader::new(File::open(path)?))
    }

    /// Keeps the last `window` seconds, re-based to start at zero. Sample times are
    /// recomputed from their step index so they stay on the dt grid exactly.
    pub fn trim(&self, window: f64) -> Self {
        let dt = self.header.dt;
        let end_step = (self.end_time() / dt).round() as i64;
        let k0 = (end_step - (window / dt).round() as i64).max(0);
        if k0 == 0 {
            return self.clone();
        }
        let start = k0 as f64 * dt;
        let rebase = |t: f64| ((t / dt).round() as i64 - k0) as f64 * dt;
        let channels = self
            .channels
            .iter()
            .map(|(name, list)| {
                let kept = list
                    .iter()
                    .filter(|m| m.seq as i64 >= k0)
                    .map(|m| ChannelMessage {
                        seq: m.seq - k0 as u64,
                        t: rebase(m.t),
                        tree: m.tree.clone(),
                    })
                    .collect();
                (name.clone(), kept)
            })
            .collect();
        let trajectories = self
            .trajectories
            .iter()
            .map(|(id, traj)| {
                let kept = traj
                    .iter()
                    .filter(|s| s.t >= start - dt / 2.0)
                    .map(|s| Sample { t: rebase(s.t), ..*s })
                    .collect();
                (id.clone(), kept)
            })
            .collect();
        let mut header = self.header.clone();
        header.horizon = rebase(header.horizon);
        let mut verdict = self.verdict.clone();
        verdict.time = verdict.time.map(rebase);
        Self {
            header,
            channels,
            trajectories,
            verdict,
        }
    }
}

/// Rotation about the origin followed by a translation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameTransform {
    pub angle: f64,
    pub translation: Vec2,
}

impl Default for FrameTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl FrameTransform {
    pub const fn identity() -> Self {
        Self {
            angle: 0.0,
            translation: Vec2::ZERO,
        }
    }

    pub fn to_world(&self, p: Vec2) -> Vec2 {
        p.rotate(self.angle) + self.translation
    }

    pub fn heading(&self, h: f64) -> f64 {
        wrap_angle(h + self.angle)
    }

    /// `self ∘ inner`: applies `inner` first.
    pub fn compose(&self, inner: &FrameTransform) -> FrameTransform {
        FrameTransform {
            angle: self.angle + inner.angle,
            translation: inner.translation.rotate(self.angle) + self.translation,
        }
    }

    /// Moves every pose of a condition (actors, map entities, scripts) into this frame.
    pub fn apply_to(&self, p: &PhysicalCondition) -> PhysicalCondition {
        let mut out = p.clone();
        for a in &mut out.actors {
            a.position = self.to_world(a.position);
            a.heading = self.heading(a.heading);
        }
        for m in &mut out.map_entities {
            m.position = self.to_world(m.position);
            m.heading = self.heading(m.heading);
        }
        for wps in out.actor_scripts.values_mut() {
            for w in wps {
                w.position = self.to_world(w.position);
                w.heading = self.heading(w.heading);
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::tests::sample_condition;
    use crate::sim::run_execution;
    use std::f64::consts::FRAC_PI_2;

    fn short_record() -> ExecutionRecord {
        let params = SimulationParams {
            horizon: 4.0,
            ..SimulationParams::default()
        };
        run_execution(&CyberConfiguration::default(), &sample_condition(), &params)
            .unwrap()
            .2
    }

    #[test]
    fn round_trip() {
        let r = short_record();
        let mut buf = Vec::new();
        r.write_to(&mut buf).unwrap();
        let back = ExecutionRecord::read_from(buf.as_slice()).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn unknown_channel_is_named() {
        let r = short_record();
        let mut buf = Vec::new();
        r.write_to(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap().replacen("\"channel\":\"planning\"", "\"channel\":\"lidar\"", 1);
        match ExecutionRecord::read_from(text.as_bytes()) {
            Err(Error::UnknownChannel(c)) => assert_eq!(c, "lidar"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn truncated_and_unknown_fields_rejected() {
        let r = short_record();
        let mut buf = Vec::new();
        r.write_to(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let without_verdict: String = text.lines().take(text.lines().count() - 1).map(|l| format!("{l}\n")).collect();
        assert!(ExecutionRecord::read_from(without_verdict.as_bytes()).is_err());
        let extra = text.replacen("\"kind\":\"traj\"", "\"kind\":\"traj\",\"z\":0", 1);
        assert!(ExecutionRecord::read_from(extra.as_bytes()).is_err());
        assert!(ExecutionRecord::read_from(&b""[..]).is_err());
    }

    #[test]
    fn trim_rebases_on_grid() {
        let r = short_record();
        let t = r.trim(1.0);
        let ego = &t.trajectories["ego"];
        assert_eq!(ego.len(), 21);
        for (k, s) in ego.iter().enumerate() {
            assert_eq!(s.t, k as f64 * r.header.dt);
        }
        assert_eq!(ego[0].position, r.trajectories["ego"][60].position);
        assert_eq!(t.verdict, r.verdict);
        assert_eq!(r.trim(100.0), r);
    }

    #[test]
    fn frame_transform_examples() {
        let id = FrameTransform::identity();
        assert_eq!(id.to_world(Vec2::new(3.0, -2.0)), Vec2::new(3.0, -2.0));
        let t = FrameTransform {
            angle: FRAC_PI_2,
            translation: Vec2::new(1.0, 0.0),
        };
        let p = t.to_world(Vec2::new(1.0, 0.0));
        assert!((p.x - 1.0).abs() < 1e-12 && (p.y - 1.0).abs() < 1e-12);
    }

    proptest::proptest! {
        #[test]
        fn composition(a1 in -3.0..3.0f64, a2 in -3.0..3.0f64, x in -50.0..50.0f64, y in -50.0..50.0f64,
                       tx in -9.0..9.0f64, ty in -9.0..9.0f64) {
            let t1 = FrameTransform { angle: a1, translation: Vec2::new(tx, ty) };
            let t2 = FrameTransform { angle: a2, translation: Vec2::new(ty, -tx) };
            let p = Vec2::new(x, y);
            let lhs = t2.to_world(t1.to_world(p));
            let rhs = t2.compose(&t1).to_world(p);
            proptest::prop_assert!(lhs.distance(rhs) < 1e-9);
        }
    }
}
