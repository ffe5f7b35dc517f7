//! Locating the first module whose output deviated, from per-channel change times.

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::ads::cmg::{ChannelModuleGraph, Vertex, VertexKind};
use crate::ads::CH_CONTROL;
use crate::error::{Error, Result};

/// Reaction-time window between a cause and its downstream effect.
pub const DEFAULT_REACTION: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pinpoint {
    pub module: String,
    /// First change time per vertex, `None` when it never changes.
    pub channel_times: BTreeMap<String, Option<f64>>,
    pub module_times: BTreeMap<String, Option<f64>>,
    /// Edges that survived pruning, as (from, to) display names.
    pub kept_edges: Vec<(String, String)>,
    /// Vertices from the control channel back to the chosen module.
    pub path: Vec<String>,
}

fn within(tu: f64, tv: f64, delta: f64) -> bool {
    tu.is_finite() && tv.is_finite() && tu >= tv - delta && tu <= tv
}

/// `channel_t` maps each channel to its first change time (absent or infinite = none).
pub fn find_init_module(
    g: &ChannelModuleGraph,
    channel_t: &BTreeMap<String, f64>,
    delta: f64,
) -> Result<Pinpoint> {
    let t_channel = |c: &str| channel_t.get(c).copied().unwrap_or(f64::INFINITY);
    let control_t = t_channel(CH_CONTROL);
    if !control_t.is_finite() {
        return Err(Error::NoAccidentSignature(
            "the control channel has no change point".into(),
        ));
    }

    let mut module_t: BTreeMap<&str, f64> = BTreeMap::new();
    for m in &g.modules {
        let t = g
            .outputs(m)
            .iter()
            .map(|c| t_channel(c))
            .fold(f64::INFINITY, f64::min);
        module_t.insert(m, t);
    }
    let time_of = |v: &Vertex| match v.kind {
        VertexKind::Channel => t_channel(&v.name),
        VertexKind::Module => module_t.get(v.name.as_str()).copied().unwrap_or(f64::INFINITY),
    };

    let kept: Vec<(Vertex, Vertex)> = g
        .edges
        .iter()
        .filter(|(u, v)| within(time_of(u), time_of(v), delta))
        .cloned()
        .collect();
    let pruned = ChannelModuleGraph {
        modules: g.modules.clone(),
        channels: g.channels.clone(),
        edges: kept.clone(),
    };

    let start = Vertex::channel(CH_CONTROL);
    let reach = pruned.reverse_reach(&start);
    // Earliest change wins; ties go to the module farthest upstream, then by name.
    let chosen = reach
        .iter()
        .filter(|(v, _)| v.kind == VertexKind::Module)
        .map(|(v, depth)| (time_of(v), std::cmp::Reverse(*depth), v.name.clone()))
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let Some((_, _, module)) = chosen else {
        let dump: Vec<String> = kept.iter().map(|(u, v)| format!("{u} -> {v}")).collect();
        return Err(Error::PinpointFailed(format!(
            "no module reachable from the control channel; kept edges: [{}]",
            dump.join(", ")
        )));
    };

    let finite = |t: f64| t.is_finite().then_some(t);
    Ok(Pinpoint {
        path: path_to(&pruned, &start, &Vertex::module(&module)),
        channel_times: g.channels.iter().map(|c| (c.clone(), finite(t_channel(c)))).collect(),
        module_times: module_t.iter().map(|(m, t)| (m.to_string(), finite(*t))).collect(),
        kept_edges: kept.iter().map(|(u, v)| (u.to_string(), v.to_string())).collect(),
        module,
    })
}

/// Shortest reversed path from `start` to `target`, listed from `start`.
fn path_to(g: &ChannelModuleGraph, start: &Vertex, target: &Vertex) -> Vec<String> {
    let mut parent: BTreeMap<Vertex, Vertex> = BTreeMap::new();
    let mut q = VecDeque::from([start.clone()]);
    let mut seen = vec![start.clone()];
    while let Some(v) = q.pop_front() {
        if &v == target {
            break;
        }
        for (a, b) in &g.edges {
            if b == &v && !seen.contains(a) {
                seen.push(a.clone());
                parent.insert(a.clone(), v.clone());
                q.push_back(a.clone());
            }
        }
    }
    let mut path = vec![target.to_string()];
    let mut cur = target.clone();
    while let Some(p) = parent.get(&cur) {
        path.push(p.to_string());
        cur = p.clone();
    }
    path.reverse();
    path
}
