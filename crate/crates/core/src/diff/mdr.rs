//! Message difference ratio between two message trees.

use serde::{Deserialize, Serialize};

use crate::ads::message::{Leaf, MessageTree};
use crate::error::{Error, Result};
use crate::record::ExecutionRecord;

/// Numeric leaves closer than this (relative to their magnitude, at least 1) are equal.
pub const LEAF_TOLERANCE: f64 = 1e-9;

pub fn leaf_eq(a: &Leaf, b: &Leaf) -> bool {
    match (a, b) {
        (Leaf::Num(x), Leaf::Num(y)) => {
            x == y || (x - y).abs() <= LEAF_TOLERANCE * x.abs().max(y.abs()).max(1.0)
        }
        (Leaf::Str(x), Leaf::Str(y)) => x == y,
        (Leaf::Bool(x), Leaf::Bool(y)) => x == y,
        _ => false,
    }
}

/// 0 for equal trees, 1 for unequal leaves or mismatched child counts, otherwise the
/// mean over children paired by position. Labels are not compared.
pub fn mdr(a: &MessageTree, b: &MessageTree) -> f64 {
    match (a, b) {
        (MessageTree::Leaf(x), MessageTree::Leaf(y)) => {
            if leaf_eq(x, y) {
                0.0
            } else {
                1.0
            }
        }
        (MessageTree::Node(xs), MessageTree::Node(ys)) => {
            if xs.len() != ys.len() {
                return 1.0;
            }
            if xs.is_empty() {
                return 0.0;
            }
            let sum: f64 = xs.iter().zip(ys).map(|((_, x), (_, y))| mdr(x, y)).sum();
            sum / xs.len() as f64
        }
        _ => 1.0,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MdrSeries {
    pub channel: String,
    /// (time of the first record's message, mdr)
    pub samples: Vec<(f64, f64)>,
}

impl MdrSeries {
    pub fn values(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.1).collect()
    }

    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.0).collect()
    }
}

/// Pairs the k-th message of `channel` in both records; stops at the shorter one.
pub fn channel_mdr_series(a: &ExecutionRecord, b: &ExecutionRecord, channel: &str) -> Result<MdrSeries> {
    let ma = a.channels.get(channel).ok_or_else(|| Error::MissingChannel(channel.into()))?;
    let mb = b.channels.get(channel).ok_or_else(|| Error::MissingChannel(channel.into()))?;
    Ok(MdrSeries {
        channel: channel.into(),
        samples: ma.iter().zip(mb).map(|(x, y)| (x.t, mdr(&x.tree, &y.tree))).collect(),
    })
}
