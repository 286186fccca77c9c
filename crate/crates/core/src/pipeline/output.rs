//! JSON Lines, CSV and summary serialisation.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::report::SummaryReport;
use super::{FrameAnnotation, PersonAnnotation};
use crate::error::{Error, Result};
use crate::nn::expression::Expression;

/// Rounds to 6 significant digits so serialised output is stable across platforms.
pub fn canonical(v: f64) -> f64 {
    if !v.is_finite() || v == 0.0 {
        return if v.is_finite() { 0.0 } else { v };
    }
    format!("{v:.5e}").parse().expect("formatted float parses")
}

fn canonical_vec(v: &[f32]) -> Vec<f64> {
    v.iter().map(|&x| canonical(x as f64)).collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoxRecord {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenderRecord {
    pub label: String,
    pub probs: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgeRecord {
    pub estimate: f64,
    pub group: String,
    pub probs_omitted: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpressionRecord {
    pub label: String,
    pub probs: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PersonRecord {
    Annotated {
        #[serde(rename = "box")]
        bbox: BoxRecord,
        gender: GenderRecord,
        age: AgeRecord,
        expression: ExpressionRecord,
    },
    Failed {
        #[serde(rename = "box")]
        bbox: BoxRecord,
        error: String,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub frame: u64,
    pub persons: Vec<PersonRecord>,
}

impl From<&PersonAnnotation> for PersonRecord {
    fn from(p: &PersonAnnotation) -> Self {
        let d = p.detection;
        let bbox = BoxRecord {
            x: d.x,
            y: d.y,
            w: d.w,
            h: d.h,
        };
        match &p.attributes {
            Ok(a) => PersonRecord::Annotated {
                bbox,
                gender: GenderRecord {
                    label: a.age_gender.gender.label().into(),
                    probs: canonical_vec(&a.age_gender.gender_probs),
                },
                age: AgeRecord {
                    estimate: canonical(a.age_gender.age_estimate),
                    group: a.age_gender.age_group.label(),
                    probs_omitted: true,
                },
                expression: ExpressionRecord {
                    label: a.expression.label.label().into(),
                    probs: canonical_vec(&a.expression.probs),
                },
            },
            Err(e) => PersonRecord::Failed {
                bbox,
                error: e.clone(),
            },
        }
    }
}

impl From<&FrameAnnotation> for FrameRecord {
    fn from(a: &FrameAnnotation) -> Self {
        FrameRecord {
            frame: a.frame_index,
            persons: a.persons.iter().map(PersonRecord::from).collect(),
        }
    }
}

/// One compact JSON object followed by a newline.
pub fn write_jsonl_line(w: &mut impl Write, annotation: &FrameAnnotation) -> Result<()> {
    serde_json::to_writer(&mut *w, &FrameRecord::from(annotation)).map_err(json_err)?;
    w.write_all(b"\n")?;
    Ok(())
}

pub fn write_summary(w: &mut impl Write, report: &SummaryReport) -> Result<()> {
    serde_json::to_writer_pretty(&mut *w, report).map_err(json_err)?;
    w.write_all(b"\n")?;
    Ok(())
}

fn json_err(e: serde_json::Error) -> Error {
    match e.io_error_kind() {
        Some(kind) => Error::Io(std::io::Error::new(kind, e)),
        None => Error::Format(e.to_string()),
    }
}

pub fn csv_header() -> Vec<String> {
    let mut h: Vec<String> = [
        "frame", "person", "x", "y", "w", "h", "gender", "p_female", "p_male", "age", "age_group",
        "expression",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    h.extend(Expression::ALL.iter().map(|e| format!("p_{}", e.label())));
    h
}

/// One row per annotated person; failed faces are left out.
pub fn csv_rows(annotation: &FrameAnnotation) -> Vec<Vec<String>> {
    let fmt = |v: f64| serde_json::to_string(&canonical(v)).expect("finite float");
    annotation
        .persons
        .iter()
        .enumerate()
        .filter_map(|(i, p)| {
            let a = p.attributes.as_ref().ok()?;
            let d = p.detection;
            let mut row = vec![
                annotation.frame_index.to_string(),
                i.to_string(),
                d.x.to_string(),
                d.y.to_string(),
                d.w.to_string(),
                d.h.to_string(),
                a.age_gender.gender.label().to_string(),
                fmt(a.age_gender.gender_probs[0] as f64),
                fmt(a.age_gender.gender_probs[1] as f64),
                fmt(a.age_gender.age_estimate),
                a.age_gender.age_group.label(),
                a.expression.label.label().to_string(),
            ];
            row.extend(a.expression.probs.iter().map(|&p| fmt(p as f64)));
            Some(row)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_caps_significant_digits() {
        assert_eq!(canonical(0.123456789), 0.123457);
        assert_eq!(canonical(34.56), 34.56);
        assert_eq!(canonical(1.0), 1.0);
        assert_eq!(canonical(0.0), 0.0);
        assert_eq!(canonical(-0.0), 0.0);
        assert_eq!(canonical(1.23456789e-20), 1.23457e-20);
        assert_eq!(serde_json::to_string(&canonical(0.1f32 as f64)).unwrap(), "0.1");
        assert_eq!(serde_json::to_string(&canonical(2.0 / 3.0)).unwrap(), "0.666667");
    }

    #[test]
    fn empty_frame_record() {
        let a = FrameAnnotation {
            frame_index: 4,
            persons: vec![],
        };
        let mut buf = Vec::new();
        write_jsonl_line(&mut buf, &a).unwrap();
        assert_eq!(buf, b"{\"frame\":4,\"persons\":[]}\n");
    }
}
