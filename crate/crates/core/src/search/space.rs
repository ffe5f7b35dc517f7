//! Sparse genomes over a list of mutable properties.

use std::fmt::Write as _;

use rand::Rng;

use crate::geometry::{angle_diff, wrap_angle};
use crate::scenario::{Delta, DeltaKind, Value};

#[derive(Debug, Clone, PartialEq)]
pub enum GeneKind {
    /// Real interval. Angles wrap into [0, 2π) instead of clamping.
    Real { lo: f64, hi: f64, angle: bool },
    Choice(Vec<Value>),
    Flag,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gene {
    pub path: String,
    pub kind: GeneKind,
    pub base: Value,
}

impl Gene {
    pub fn real(path: impl Into<String>, base: f64, lo: f64, hi: f64) -> Self {
        Self {
            path: path.into(),
            kind: GeneKind::Real { lo, hi, angle: false },
            base: Value::Real(base),
        }
    }

    pub fn angle(path: impl Into<String>, base: f64) -> Self {
        Self {
            path: path.into(),
            kind: GeneKind::Real {
                lo: 0.0,
                hi: std::f64::consts::TAU,
                angle: true,
            },
            base: Value::Real(base),
        }
    }

    pub fn choice(path: impl Into<String>, base: Value, values: Vec<Value>) -> Self {
        Self {
            path: path.into(),
            kind: GeneKind::Choice(values),
            base,
        }
    }

    pub fn flag(path: impl Into<String>, base: bool) -> Self {
        Self {
            path: path.into(),
            kind: GeneKind::Flag,
            base: Value::Bool(base),
        }
    }

    /// Brings a real into the gene's domain.
    pub fn normalize(&self, v: f64) -> f64 {
        match self.kind {
            GeneKind::Real { lo, hi, angle: true } => {
                let w = wrap_angle(v);
                if w >= hi { lo } else { w }
            }
            GeneKind::Real { lo, hi, angle: false } => v.clamp(lo, hi),
            _ => v,
        }
    }

    /// A random value different from the base. Reals land near the base half the time.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> Value {
        match &self.kind {
            GeneKind::Real { lo, hi, .. } => {
                let base = self.base.as_real().unwrap_or(*lo);
                let v = if rng.gen_bool(0.5) {
                    rng.gen_range(*lo..=*hi)
                } else {
                    base + rng.gen_range(-0.1..=0.1) * (hi - lo)
                };
                Value::Real(self.normalize(v))
            }
            GeneKind::Choice(values) => {
                let others: Vec<&Value> = values.iter().filter(|v| **v != self.base).collect();
                if others.is_empty() {
                    self.base.clone()
                } else {
                    others[rng.gen_range(0..others.len())].clone()
                }
            }
            GeneKind::Flag => Value::Bool(!self.base.as_bool().unwrap_or(false)),
        }
    }

    /// A real strictly on one side of the base (`side` > 0 above). Other kinds ignore `side`.
    pub fn sample_side<R: Rng>(&self, rng: &mut R, side: f64) -> Value {
        let GeneKind::Real { lo, hi, angle } = self.kind else {
            return self.sample(rng);
        };
        let base = self.base.as_real().unwrap_or(lo);
        let room = if angle {
            (hi - lo) / 2.0
        } else if side > 0.0 {
            hi - base
        } else {
            base - lo
        };
        let reach = if rng.gen_bool(0.5) { room } else { room.min(0.1 * (hi - lo)) };
        let v = base + side.signum() * rng.gen_range(0.0..=1.0) * reach;
        Value::Real(self.normalize(v))
    }

    /// Point `t` of the way from the base to `to` (shortest arc for angles).
    pub fn toward(&self, to: f64, t: f64) -> f64 {
        let base = self.base.as_real().unwrap_or(to);
        match self.kind {
            GeneKind::Real { angle: true, .. } => self.normalize(base + angle_diff(to, base) * t),
            _ => self.normalize(base + (to - base) * t),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchSpace {
    pub kind: DeltaKind,
    pub genes: Vec<Gene>,
}

/// One optional value per gene; `None` keeps the base value.
#[derive(Debug, Clone, PartialEq)]
pub struct Genome(pub Vec<Option<Value>>);

impl Genome {
    pub fn empty(len: usize) -> Self {
        Genome(vec![None; len])
    }

    pub fn active(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().enumerate().filter(|(_, v)| v.is_some()).map(|(i, _)| i)
    }

    /// Drops entries equal to their base value.
    pub fn canonical(mut self, space: &SearchSpace) -> Self {
        for (slot, g) in self.0.iter_mut().zip(&space.genes) {
            if slot.as_ref() == Some(&g.base) {
                *slot = None;
            }
        }
        self
    }

    /// Stable identity for caching: exact bit patterns of reals.
    pub fn key(&self) -> String {
        let mut s = String::new();
        for (i, v) in self.0.iter().enumerate() {
            let Some(v) = v else { continue };
            match v {
                Value::Real(x) => write!(s, "{i}:{:016x};", x.to_bits()),
                other => write!(s, "{i}:{other};"),
            }
            .expect("write to string");
        }
        s
    }

    pub fn to_delta(&self, space: &SearchSpace) -> Delta {
        let mut d = Delta::empty(space.kind);
        for (v, g) in self.0.iter().zip(&space.genes) {
            if let Some(v) = v {
                if *v != g.base {
                    d.push(g.path.clone(), g.base.clone(), v.clone());
                }
            }
        }
        d
    }

    pub fn from_delta(delta: &Delta, space: &SearchSpace) -> Option<Self> {
        let mut g = Genome::empty(space.genes.len());
        for e in &delta.entries {
            let i = space.genes.iter().position(|x| x.path == e.path)?;
            g.0[i] = Some(e.new.clone());
        }
        Some(g)
    }
}
