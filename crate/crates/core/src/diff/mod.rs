//! Differential analysis of two executions: per-channel MDR series, change points and
//! the initial deviating module.

pub mod mdr;
pub mod pelt;
pub mod pinpoint;

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::ads::ChannelModuleGraph;
use crate::error::Result;
use crate::exec::Executor;
use crate::record::ExecutionRecord;
pub use mdr::{channel_mdr_series, mdr, MdrSeries};
pub use pelt::{default_penalty, pelt};
pub use pinpoint::{find_init_module, Pinpoint, DEFAULT_REACTION};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelChanges {
    pub channel: String,
    pub penalty: f64,
    pub change_times: Vec<f64>,
    /// Mean MDR before and after the first change (whole series when none).
    pub pre_mean: f64,
    pub post_mean: f64,
}

impl ChannelChanges {
    pub fn first(&self) -> Option<f64> {
        self.change_times.first().copied()
    }
}

pub fn change_points(series: &MdrSeries, penalty: Option<f64>) -> ChannelChanges {
    let x = series.values();
    let penalty = penalty.unwrap_or_else(|| default_penalty(&x));
    let cps = pelt(&x, penalty);
    let mean = |s: &[f64]| if s.is_empty() { 0.0 } else { s.iter().sum::<f64>() / s.len() as f64 };
    let (pre_mean, post_mean) = match cps.first() {
        Some(&i) => (mean(&x[..i]), mean(&x[i..])),
        None => (mean(&x), mean(&x)),
    };
    ChannelChanges {
        channel: series.channel.clone(),
        penalty,
        change_times: cps.iter().map(|&i| series.samples[i].0).collect(),
        pre_mean,
        post_mean,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffReport {
    pub series: Vec<MdrSeries>,
    pub changes: Vec<ChannelChanges>,
    pub pinpoint: Option<Pinpoint>,
    /// Why pinpointing failed, when it did.
    pub failure: Option<String>,
}

/// Compares every channel of the graph and runs the module search.
pub fn exec_diff(
    a: &ExecutionRecord,
    b: &ExecutionRecord,
    g: &ChannelModuleGraph,
    delta: f64,
    penalty: Option<f64>,
    exec: Executor,
) -> Result<DiffReport> {
    let series: Vec<MdrSeries> = exec
        .map(&g.channels, |c| channel_mdr_series(a, b, c))
        .into_iter()
        .collect::<Result<_>>()?;
    let changes: Vec<ChannelChanges> = series.iter().map(|s| change_points(s, penalty)).collect();
    let t: BTreeMap<String, f64> = changes
        .iter()
        .filter_map(|c| c.first().map(|t| (c.channel.clone(), t)))
        .collect();
    let (pinpoint, failure) = match find_init_module(g, &t, delta) {
        Ok(p) => (Some(p), None),
        Err(e) => (None, Some(e.to_string())),
    };
    Ok(DiffReport {
        series,
        changes,
        pinpoint,
        failure,
    })
}

impl DiffReport {
    /// Plot-ready rows: time, channel, mdr.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "time,channel,mdr")?;
        for s in &self.series {
            for (t, m) in &s.samples {
                writeln!(w, "{t},{},{m}", s.channel)?;
            }
        }
        Ok(())
    }

    pub fn summary(&self) -> String {
        let mut out = String::new();
        for c in &self.changes {
            let times: Vec<String> = c.change_times.iter().map(|t| format!("{t:.2}")).collect();
            out.push_str(&format!(
                "{:<22} t*={:<8} changes=[{}] pre={:.4} post={:.4}\n",
                c.channel,
                c.first().map_or("inf".to_string(), |t| format!("{t:.2}")),
                times.join(", "),
                c.pre_mean,
                c.post_mean
            ));
        }
        match (&self.pinpoint, &self.failure) {
            (Some(p), _) => out.push_str(&format!("deviating module: {} via {}\n", p.module, p.path.join(" <- "))),
            (None, Some(f)) => out.push_str(&format!("pinpointing failed: {f}\n")),
            _ => {}
        }
        out
    }
}
