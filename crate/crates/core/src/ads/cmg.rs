//! Channel-module graph: which module writes and reads which channel.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VertexKind {
    Module,
    Channel,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Vertex {
    pub kind: VertexKind,
    pub name: String,
}

impl Vertex {
    pub fn module(name: &str) -> Self {
        Self {
            kind: VertexKind::Module,
            name: name.into(),
        }
    }

    pub fn channel(name: &str) -> Self {
        Self {
            kind: VertexKind::Channel,
            name: name.into(),
        }
    }
}

impl std::fmt::Display for Vertex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.kind {
            VertexKind::Module => write!(f, "module:{}", self.name),
            VertexKind::Channel => write!(f, "channel:{}", self.name),
        }
    }
}

/// Directed bipartite graph. `(module, channel)` means the module writes the channel,
/// `(channel, module)` means the module reads it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelModuleGraph {
    pub modules: Vec<String>,
    pub channels: Vec<String>,
    pub edges: Vec<(Vertex, Vertex)>,
}

impl ChannelModuleGraph {
    pub fn new() -> Self {
        Self {
            modules: Vec::new(),
            channels: Vec::new(),
            edges: Vec::new(),
        }
    }

    pub fn add_module(&mut self, m: &str) {
        if !self.modules.iter().any(|x| x == m) {
            self.modules.push(m.into());
        }
    }

    pub fn add_channel(&mut self, c: &str) {
        if !self.channels.iter().any(|x| x == c) {
            self.channels.push(c.into());
        }
    }

    pub fn writes(&mut self, module: &str, channel: &str) {
        self.add_module(module);
        self.add_channel(channel);
        self.edges.push((Vertex::module(module), Vertex::channel(channel)));
    }

    pub fn reads(&mut self, module: &str, channel: &str) {
        self.add_module(module);
        self.add_channel(channel);
        self.edges.push((Vertex::channel(channel), Vertex::module(module)));
    }

    pub fn is_bipartite(&self) -> bool {
        self.edges.iter().all(|(a, b)| a.kind != b.kind)
    }

    pub fn writers(&self, channel: &str) -> Vec<&str> {
        self.edges
            .iter()
            .filter(|(a, b)| {
                a.kind == VertexKind::Module && b.kind == VertexKind::Channel && b.name == channel
            })
            .map(|(a, _)| a.name.as_str())
            .collect()
    }

    /// Modules that write channels (outgoing edges of a module vertex).
    pub fn outputs(&self, module: &str) -> Vec<&str> {
        self.edges
            .iter()
            .filter(|(a, _)| a.kind == VertexKind::Module && a.name == module)
            .map(|(_, b)| b.name.as_str())
            .collect()
    }

    /// Vertices reachable from `start` following edges backwards, with their BFS depth.
    pub fn reverse_reach(&self, start: &Vertex) -> BTreeMap<Vertex, usize> {
        let mut preds: BTreeMap<&Vertex, Vec<&Vertex>> = BTreeMap::new();
        for (a, b) in &self.edges {
            preds.entry(b).or_default().push(a);
        }
        let mut seen = BTreeMap::new();
        seen.insert(start.clone(), 0);
        let mut q = VecDeque::from([(start, 0usize)]);
        while let Some((v, d)) = q.pop_front() {
            for p in preds.get(v).into_iter().flatten() {
                if !seen.contains_key(*p) {
                    seen.insert((*p).clone(), d + 1);
                    q.push_back((p, d + 1));
                }
            }
        }
        seen
    }

    /// True iff the module-to-module graph (through channels) has a cycle avoiding `except`.
    pub fn has_module_cycle_avoiding(&self, except: &str) -> bool {
        let edges: BTreeSet<(&str, &str)> = self
            .edges
            .iter()
            .filter(|(a, b)| a.name != except && b.name != except)
            .flat_map(|(a, b)| {
                // m -> c -> m' collapses to m -> m'
                if a.kind == VertexKind::Module {
                    self.edges
                        .iter()
                        .filter(move |(c, _)| c == b)
                        .map(move |(_, m2)| (a.name.as_str(), m2.name.as_str()))
                        .collect::<Vec<_>>()
                } else {
                    Vec::new()
                }
            })
            .collect();
        let nodes: BTreeSet<&str> = edges.iter().flat_map(|(a, b)| [*a, *b]).collect();
        // Kahn's algorithm
        let mut indeg: BTreeMap<&str, usize> = nodes.iter().map(|n| (*n, 0)).collect();
        for (_, b) in &edges {
            *indeg.get_mut(b).unwrap() += 1;
        }
        let mut q: VecDeque<&str> = indeg.iter().filter(|(_, d)| **d == 0).map(|(n, _)| *n).collect();
        let mut removed = 0;
        while let Some(n) = q.pop_front() {
            removed += 1;
            for (a, b) in &edges {
                if *a == n {
                    let d = indeg.get_mut(b).unwrap();
                    *d -= 1;
                    if *d == 0 {
                        q.push_back(b);
                    }
                }
            }
        }
        removed != nodes.len()
    }
}

impl Default for ChannelModuleGraph {
    fn default() -> Self {
        Self::new()
    }
}
