//! Optional comparison of predictions against hand labels.
//!
//! Label file: CSV with header `frame,x,y,w,h,gender,age_group,expression`.
//! The last three columns may be empty; `age_group` takes a decade label
//! (`30-39`) or a numeric age.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::FrameAnnotation;
use crate::error::{Error, Result};
use crate::haar::Detection;
use crate::nn::demographics::{age_group, AgeGroup, Gender};
use crate::nn::expression::Expression;

/// Minimum overlap for a prediction to count as the labelled face.
pub const MATCH_IOU: f64 = 0.5;

#[derive(Clone, Debug, PartialEq)]
pub struct FaceLabel {
    pub frame: u64,
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
    pub gender: Option<Gender>,
    pub age_group: Option<AgeGroup>,
    pub expression: Option<Expression>,
}

#[derive(Deserialize)]
struct Row {
    frame: u64,
    x: u32,
    y: u32,
    w: u32,
    h: u32,
    gender: Option<String>,
    age_group: Option<String>,
    expression: Option<String>,
}

fn parse_age(s: &str) -> Result<AgeGroup> {
    match s.trim().parse::<f64>() {
        Ok(age) => age_group(age),
        Err(_) => s.parse(),
    }
}

pub fn read_labels(path: &Path) -> Result<Vec<FaceLabel>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    let mut labels = Vec::new();
    for (i, row) in reader.deserialize::<Row>().enumerate() {
        let row = row.map_err(|e| Error::Format(format!("{} row {}: {e}", path.display(), i + 1)))?;
        let nonempty = |v: Option<String>| v.filter(|s| !s.is_empty());
        labels.push(FaceLabel {
            frame: row.frame,
            x: row.x,
            y: row.y,
            w: row.w,
            h: row.h,
            gender: nonempty(row.gender).map(|s| s.parse()).transpose()?,
            age_group: nonempty(row.age_group).map(|s| parse_age(&s)).transpose()?,
            expression: nonempty(row.expression).map(|s| s.parse()).transpose()?,
        });
    }
    Ok(labels)
}

pub fn iou(a: &Detection, l: &FaceLabel) -> f64 {
    let ix = (a.x + a.w).min(l.x + l.w).saturating_sub(a.x.max(l.x)) as f64;
    let iy = (a.y + a.h).min(l.y + l.h).saturating_sub(a.y.max(l.y)) as f64;
    let inter = ix * iy;
    let union = (a.w as f64 * a.h as f64) + (l.w as f64 * l.h as f64) - inter;
    if union > 0.0 {
        inter / union
    } else {
        0.0
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Tally {
    pub evaluated: u64,
    pub correct: u64,
    pub accuracy: Option<f64>,
}

impl Tally {
    fn record(&mut self, ok: bool) {
        self.evaluated += 1;
        self.correct += ok as u64;
    }

    fn finish(&mut self) {
        self.accuracy = (self.evaluated > 0).then(|| super::output::canonical(self.correct as f64 / self.evaluated as f64));
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub labeled_faces: u64,
    pub matched_faces: u64,
    pub gender: Tally,
    /// Exact decade match.
    pub age_group: Tally,
    /// Predicted decade at most one bin away.
    pub age_group_within_one: Tally,
    pub expression: Tally,
}

/// Greedy one-to-one matching of labels to annotated faces by best overlap.
pub fn evaluate<'a>(labels: &[FaceLabel], annotations: impl IntoIterator<Item = &'a FrameAnnotation>) -> Evaluation {
    let mut by_frame: HashMap<u64, Vec<&FaceLabel>> = HashMap::new();
    for l in labels {
        by_frame.entry(l.frame).or_default().push(l);
    }
    let mut ev = Evaluation {
        labeled_faces: labels.len() as u64,
        ..Default::default()
    };
    for a in annotations {
        let Some(frame_labels) = by_frame.get(&a.frame_index) else {
            continue;
        };
        let mut used = vec![false; a.persons.len()];
        for l in frame_labels {
            let best = a
                .persons
                .iter()
                .enumerate()
                .filter(|(i, p)| !used[*i] && p.attributes.is_ok())
                .map(|(i, p)| (i, iou(&p.detection, l)))
                .filter(|&(_, o)| o >= MATCH_IOU)
                .max_by(|x, y| x.1.total_cmp(&y.1).then(y.0.cmp(&x.0)));
            let Some((i, _)) = best else { continue };
            used[i] = true;
            ev.matched_faces += 1;
            let attrs = a.persons[i].attributes.as_ref().expect("filtered to annotated faces");
            if let Some(g) = l.gender {
                ev.gender.record(attrs.age_gender.gender == g);
            }
            if let Some(group) = l.age_group {
                let predicted = attrs.age_gender.age_group.index() as i64;
                ev.age_group.record(predicted == group.index() as i64);
                ev.age_group_within_one
                    .record((predicted - group.index() as i64).abs() <= 1);
            }
            if let Some(e) = l.expression {
                ev.expression.record(attrs.expression.label == e);
            }
        }
    }
    for t in [
        &mut ev.gender,
        &mut ev.age_group,
        &mut ev.age_group_within_one,
        &mut ev.expression,
    ] {
        t.finish();
    }
    ev
}
