use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::design::{mask, DesignModel};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TraceError {
    #[error("signal `{0}` has {1} samples, expected {2}")]
    Length(String, usize, usize),
    #[error("signal `{0}` value {1:#x} exceeds width {2}")]
    Width(String, u64, u32),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceSignal {
    pub name: String,
    pub width: u32,
}

/// Per-cycle values of every declared signal of a design.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trace {
    pub design: String,
    pub signals: Vec<TraceSignal>,
    pub length: usize,
    /// `values[s][t]`: value of signal `s` at cycle `t`.
    pub values: Vec<Vec<u64>>,
}

impl Trace {
    pub fn new(
        design: impl Into<String>,
        signals: Vec<TraceSignal>,
        values: Vec<Vec<u64>>,
    ) -> Result<Self, TraceError> {
        let length = values.first().map_or(0, Vec::len);
        for (s, v) in signals.iter().zip(&values) {
            if v.len() != length {
                return Err(TraceError::Length(s.name.clone(), v.len(), length));
            }
            if let Some(bad) = v.iter().find(|x| **x & !mask(s.width) != 0) {
                return Err(TraceError::Width(s.name.clone(), *bad, s.width));
            }
        }
        if values.len() != signals.len() {
            return Err(TraceError::Length("<signal table>".into(), values.len(), signals.len()));
        }
        Ok(Trace { design: design.into(), signals, length, values })
    }

    /// Transpose per-cycle signal vectors into a trace.
    pub fn from_rows(design: &DesignModel, rows: Vec<Vec<u64>>) -> Trace {
        let signals: Vec<TraceSignal> =
            design.signals().iter().map(|s| TraceSignal { name: s.name.clone(), width: s.width }).collect();
        let mut values = vec![Vec::with_capacity(rows.len()); signals.len()];
        for row in &rows {
            for (i, v) in row.iter().enumerate() {
                values[i].push(*v);
            }
        }
        Trace { design: design.name.clone(), length: rows.len(), signals, values }
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.signals.iter().position(|s| s.name == name)
    }

    pub fn value(&self, name: &str, cycle: usize) -> Option<u64> {
        let i = self.index_of(name)?;
        self.values[i].get(cycle).copied()
    }

    /// All signal values of one cycle, in signal-table order.
    pub fn row(&self, cycle: usize) -> Vec<u64> {
        self.values.iter().map(|v| v[cycle]).collect()
    }

    /// Prefix of the first `len` cycles.
    pub fn truncated(&self, len: usize) -> Trace {
        let len = len.min(self.length);
        Trace {
            design: self.design.clone(),
            signals: self.signals.clone(),
            length: len,
            values: self.values.iter().map(|v| v[..len].to_vec()).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_ragged_and_wide_values() {
        let sig = |n: &str, w| TraceSignal { name: n.into(), width: w };
        assert!(Trace::new("d", vec![sig("a", 1), sig("b", 1)], vec![vec![0, 1], vec![1]]).is_err());
        assert!(matches!(Trace::new("d", vec![sig("a", 1)], vec![vec![2]]), Err(TraceError::Width(..))));
        let t = Trace::new("d", vec![sig("a", 2)], vec![vec![3, 1]]).unwrap();
        assert_eq!(t.value("a", 0), Some(3));
        assert_eq!(t.truncated(1).length, 1);
    }
}
