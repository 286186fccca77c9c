use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::FrameAnnotation;
use crate::nn::demographics::{AgeGroup, Gender};
use crate::nn::expression::Expression;

/// Per-detection counts over a run. Every label appears, zero or not.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SummaryReport {
    pub frames_processed: u64,
    /// Frames that could not be read and were skipped.
    pub frames_skipped: u64,
    /// Faces with a complete annotation; failed faces are counted separately.
    pub total_detections: u64,
    pub failed_detections: u64,
    pub gender_counts: BTreeMap<String, u64>,
    pub age_group_histogram: BTreeMap<String, u64>,
    pub expression_histogram: BTreeMap<String, u64>,
}

impl Default for SummaryReport {
    fn default() -> Self {
        SummaryReport {
            frames_processed: 0,
            frames_skipped: 0,
            total_detections: 0,
            failed_detections: 0,
            gender_counts: Gender::ALL.iter().map(|g| (g.label().to_string(), 0)).collect(),
            age_group_histogram: AgeGroup::all().map(|g| (g.label(), 0)).collect(),
            expression_histogram: Expression::ALL
                .iter()
                .map(|e| (e.label().to_string(), 0))
                .collect(),
        }
    }
}

impl SummaryReport {
    pub fn add(&mut self, annotation: &FrameAnnotation) {
        self.frames_processed += 1;
        for person in &annotation.persons {
            match &person.attributes {
                Ok(a) => {
                    self.total_detections += 1;
                    *self
                        .gender_counts
                        .entry(a.age_gender.gender.label().to_string())
                        .or_default() += 1;
                    *self
                        .age_group_histogram
                        .entry(a.age_gender.age_group.label())
                        .or_default() += 1;
                    *self
                        .expression_histogram
                        .entry(a.expression.label.label().to_string())
                        .or_default() += 1;
                }
                Err(_) => self.failed_detections += 1,
            }
        }
    }

    /// Each histogram sums to `total_detections`.
    pub fn is_consistent(&self) -> bool {
        let total = |m: &BTreeMap<String, u64>| m.values().sum::<u64>();
        total(&self.gender_counts) == self.total_detections
            && total(&self.age_group_histogram) == self.total_detections
            && total(&self.expression_histogram) == self.total_detections
    }
}

pub fn aggregate<'a>(annotations: impl IntoIterator<Item = &'a FrameAnnotation>) -> SummaryReport {
    let mut report = SummaryReport::default();
    for a in annotations {
        report.add(a);
    }
    report
}
