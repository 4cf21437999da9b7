//! Which parts of the program text were reduced since the last wait.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::engine::{RuleSet, StepRecord};
use crate::syntax::SourceRange;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct HighlightSet {
    pub phase_index: u64,
    /// Sorted, without duplicates.
    pub ranges: Vec<SourceRange>,
}

#[derive(Debug, Default)]
pub struct HighlightTracker {
    pending: BTreeSet<(SourceRange, u64)>,
    phase: u64,
}

impl HighlightTracker {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record_steps(&mut self, steps: &[StepRecord]) {
        for step in steps {
            if let Some(origin) = &step.redex_origin {
                self.pending.insert((origin.range.clone(), origin.version));
            }
        }
    }

    pub fn pending(&self) -> impl Iterator<Item = &SourceRange> {
        self.pending.iter().map(|(range, _)| range)
    }

    /// Publishes the ranges recorded since the previous flush. Ranges that
    /// belong to an older version of their module are dropped.
    pub fn flush_on_wait(&mut self, rules: &RuleSet) -> HighlightSet {
        self.phase += 1;
        let versions = rules.module_versions();
        let ranges = std::mem::take(&mut self.pending)
            .into_iter()
            .filter(|(range, version)| versions.get(&*range.module) == Some(version))
            .map(|(range, _)| range)
            .collect();
        HighlightSet {
            phase_index: self.phase,
            ranges,
        }
    }
}
