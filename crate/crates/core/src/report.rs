//! The root-cause report: its JSON form, text rendering and stats tables.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cyber::ParameterChange;
use crate::error::Result;
use crate::scenario::Value;
use crate::sim::AccidentVerdict;

pub const REPORT_VERSION: u32 = 1;
pub const SIGNIFICANT_DIGITS: usize = 9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Replay,
    PhysicalMutation,
    ExecDiff,
    CyberMutation,
}

impl Phase {
    pub const ALL: [Phase; 4] = [Phase::Replay, Phase::PhysicalMutation, Phase::ExecDiff, Phase::CyberMutation];

    pub fn label(self) -> &'static str {
        match self {
            Phase::Replay => "replay",
            Phase::PhysicalMutation => "physical_mutation",
            Phase::ExecDiff => "exec_diff",
            Phase::CyberMutation => "cyber_mutation",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Complete,
    NoAccident,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyChange {
    pub path: String,
    pub original: Value,
    pub mutated: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriggerReport {
    pub entities: Vec<String>,
    pub changes: Vec<PropertyChange>,
    pub f1: f64,
    pub f2: f64,
    pub f3: f64,
    pub deviation: f64,
    /// Admissible front members tried before exec-diff accepted one.
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModuleReport {
    pub module: String,
    pub path: Vec<String>,
    /// First change time per channel; `None` means it never changed.
    pub channel_times: BTreeMap<String, Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MisconfigReport {
    pub changes: Vec<ParameterChange>,
    pub h1: f64,
    pub h2: f64,
    pub deviation: f64,
    pub post_window_deviation: f64,
    /// Verdict of the original scenario replayed under the reported change.
    pub fix_verdict: AccidentVerdict,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SearchStats {
    pub evaluations: usize,
    pub feasible: usize,
    pub front_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScopeReport {
    pub label: String,
    pub scoped_parameters: usize,
    pub total_parameters: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseTiming {
    pub phase: Phase,
    pub seconds: f64,
}

/// Record files written next to the report, relative to the run directory.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RecordPaths {
    pub original: Option<String>,
    pub reference: Option<String>,
    pub fix: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RootCauseReport {
    pub version: u32,
    pub scenario_id: String,
    pub status: Status,
    pub failed_phase: Option<Phase>,
    pub diagnostics: Option<String>,
    pub verdict: AccidentVerdict,
    pub trigger: Option<TriggerReport>,
    pub deviating_module: Option<ModuleReport>,
    pub scope: Option<ScopeReport>,
    pub misconfiguration: Option<MisconfigReport>,
    pub records: RecordPaths,
    pub physical_search: Option<SearchStats>,
    pub cyber_search: Option<SearchStats>,
    /// Wall-clock seconds; excluded from determinism comparisons.
    pub timings: Vec<PhaseTiming>,
}

/// Rounds every number in a JSON tree to a fixed count of significant digits.
pub fn canonicalize(v: &mut serde_json::Value) {
    match v {
        serde_json::Value::Number(n) => {
            if n.is_f64() {
                let x = n.as_f64().unwrap_or(0.0);
                let r: f64 = format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x).parse().unwrap_or(x);
                if let Some(m) = serde_json::Number::from_f64(r) {
                    *n = m;
                }
            }
        }
        serde_json::Value::Array(xs) => xs.iter_mut().for_each(canonicalize),
        serde_json::Value::Object(m) => m.values_mut().for_each(canonicalize),
        _ => {}
    }
}

impl RootCauseReport {
    /// Pretty JSON with sorted keys and rounded numbers.
    pub fn to_json(&self) -> Result<String> {
        let mut v = serde_json::to_value(self)?;
        canonicalize(&mut v);
        let mut s = serde_json::to_string_pretty(&v)?;
        s.push('\n');
        Ok(s)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    pub fn total_seconds(&self) -> f64 {
        self.timings.iter().map(|t| t.seconds).sum()
    }

    /// (phase, seconds, share) rows; shares sum to one when any time was spent.
    pub fn phase_shares(&self) -> Vec<(Phase, f64, f64)> {
        let total = self.total_seconds();
        self.timings
            .iter()
            .map(|t| (t.phase, t.seconds, if total > 0.0 { t.seconds / total } else { 0.0 }))
            .collect()
    }

    pub fn write_stats_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "phase,seconds,share")?;
        for (p, s, share) in self.phase_shares() {
            writeln!(w, "{},{s:.6},{share:.6}", p.label())?;
        }
        Ok(())
    }

    pub fn render_stats(&self) -> String {
        let mut out = String::new();
        if let Some(s) = &self.scope {
            out.push_str(&format!(
                "scope {}: {} of {} parameters ({:.1}%)\n",
                s.label,
                s.scoped_parameters,
                s.total_parameters,
                100.0 * s.scoped_parameters as f64 / s.total_parameters.max(1) as f64
            ));
        }
        out.push_str(&format!("{:<18} {:>10} {:>7}\n", "phase", "seconds", "share"));
        for (p, s, share) in self.phase_shares() {
            out.push_str(&format!("{:<18} {:>10.3} {:>6.1}%\n", p.label(), s, 100.0 * share));
        }
        out
    }

    pub fn render_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("scenario {}\n", self.scenario_id));
        let v = &self.verdict;
        out.push_str(&format!(
            "accident: {:?}{}{}\n",
            v.kind,
            v.time.map(|t| format!(" at t={t:.2}s")).unwrap_or_default(),
            if v.participants.is_empty() { String::new() } else { format!(" ({})", v.participants.join(", ")) }
        ));
        match self.status {
            Status::Complete => out.push_str("status: complete\n"),
            Status::NoAccident => out.push_str("status: no accident signature, stopped after replay\n"),
            Status::Failed => out.push_str(&format!(
                "status: failed in {}\n",
                self.failed_phase.map_or("?", Phase::label)
            )),
        }
        if let Some(d) = &self.diagnostics {
            out.push_str(&format!("diagnostics: {d}\n"));
        }
        if let Some(t) = &self.trigger {
            out.push_str(&format!("\ntriggering entities: {}\n", t.entities.join(", ")));
            for c in &t.changes {
                out.push_str(&format!("  {}: {} -> {}\n", c.path, c.original, c.mutated));
            }
            out.push_str(&format!(
                "  f1={:.4} f2={:.4} f3={:.4} deviation={:.4} rank={}\n",
                t.f1, t.f2, t.f3, t.deviation, t.rank
            ));
        }
        if let Some(m) = &self.deviating_module {
            out.push_str(&format!("\ndeviating module: {}\n", m.module));
            out.push_str(&format!("  path: {}\n", m.path.join(" <- ")));
            for (c, t) in &m.channel_times {
                out.push_str(&format!(
                    "  {:<22} t*={}\n",
                    c,
                    t.map_or("inf".to_string(), |t| format!("{t:.2}"))
                ));
            }
        }
        if let Some(m) = &self.misconfiguration {
            out.push_str("\nmisconfiguration:\n");
            for c in &m.changes {
                out.push_str(&format!("  {}: {} -> {}\n", c.name, c.original, c.mutated));
            }
            out.push_str(&format!(
                "  h1={:.4} h2={:.4} ego deviation={:.4} post-window={:.4} fix verdict={:?}\n",
                m.h1, m.h2, m.deviation, m.post_window_deviation, m.fix_verdict.kind
            ));
        }
        let stats = |name: &str, s: &Option<SearchStats>| {
            s.as_ref().map(|s| {
                format!(
                    "{name}: {} evaluations, {} feasible, front {}\n",
                    s.evaluations, s.feasible, s.front_size
                )
            })
        };
        out.push('\n');
        out.push_str(&stats("physical search", &self.physical_search).unwrap_or_default());
        out.push_str(&stats("cyber search", &self.cyber_search).unwrap_or_default());
        let r = &self.records;
        for (name, p) in [("original", &r.original), ("reference", &r.reference), ("fix", &r.fix)] {
            if let Some(p) = p {
                out.push_str(&format!("{name} record: {p}\n"));
            }
        }
        out.push('\n');
        out.push_str(&self.render_stats());
        out
    }

    /// JSON with the timing fields removed, for determinism comparisons.
    pub fn without_timings(&self) -> Result<String> {
        let mut r = self.clone();
        r.timings.clear();
        r.to_json()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_numbers() {
        let mut v = serde_json::json!({"b": 0.1 + 0.2, "a": [1.0 / 3.0, 7], "c": 1e-12});
        canonicalize(&mut v);
        let s = serde_json::to_string(&v).unwrap();
        assert_eq!(s, r#"{"a":[0.333333333,7],"b":0.3,"c":1e-12}"#);
    }
}
