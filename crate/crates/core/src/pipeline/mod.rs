//! Frames in, per-person annotations and aggregate reports out.

mod draw;
pub mod labels;
pub mod output;
pub mod report;
pub mod run;
pub mod source;

use std::path::Path;

use crate::error::{Error, Result};
use crate::haar::{detect_multiscale, Cascade, DetectParams, Detection};
use crate::imaging::RgbImage;
use crate::nn::demographics::{
    build_wrn, predict_age_gender, preprocess_face, wrn_manifest, AgeGenderResult, WrnConfig,
    DEFAULT_CROP_MARGIN,
};
use crate::nn::expression::{
    build_mini_xception, predict_expression, preprocess_gray, xception_manifest, ExpressionResult,
    XceptionConfig,
};
use crate::nn::Network;
use crate::weights::{validate_manifest, Manifest, TensorArchive};

pub use draw::annotate_frame;
pub use report::{aggregate, SummaryReport};
pub use run::{prepare_output_dir, run_pipeline, OutputFormat, RunOptions, RunOutcome};
pub use source::{FrameItem, FrameSource, Frames};

/// The detector and both networks, shared read-only by all workers.
pub struct Models {
    pub cascade: Cascade,
    pub age_gender: Network,
    pub expression: Network,
}

/// Checks an archive against a manifest; missing or mis-shaped tensors are fatal.
pub fn check_archive(archive: &TensorArchive, manifest: &Manifest, what: &str) -> Result<()> {
    let report = validate_manifest(archive, manifest);
    if !report.extra.is_empty() {
        log::warn!("{what}: {} tensors not in the manifest", report.extra.len());
    }
    if let Some(name) = report.missing.first() {
        log::error!("{what} archive does not match its manifest:\n{report}");
        return Err(Error::MissingWeight(name.clone()));
    }
    if let Some(m) = report.mismatched.first() {
        log::error!("{what} archive does not match its manifest:\n{report}");
        return Err(Error::Shape {
            axis: m.name.clone(),
            message: format!("expected {:?}, archive has {:?}", m.expected, m.actual),
        });
    }
    Ok(())
}

impl Models {
    pub fn from_archives(cascade: Cascade, wrn: &TensorArchive, xception: &TensorArchive) -> Result<Models> {
        let wrn_config = WrnConfig::default();
        let xc_config = XceptionConfig::default();
        check_archive(wrn, &wrn_manifest(&wrn_config)?, "age/gender")?;
        check_archive(xception, &xception_manifest(&xc_config)?, "expression")?;
        Ok(Models {
            cascade,
            age_gender: build_wrn(&wrn_config, wrn)?,
            expression: build_mini_xception(&xc_config, xception)?,
        })
    }

    pub fn load(cascade: &Path, wrn: &Path, xception: &Path) -> Result<Models> {
        let cascade = Cascade::from_file(cascade)?;
        log::info!(
            "cascade: {}x{} window, {} stages, {} classifiers",
            cascade.window_width,
            cascade.window_height,
            cascade.stages.len(),
            cascade.classifier_count()
        );
        Models::from_archives(cascade, &TensorArchive::load(wrn)?, &TensorArchive::load(xception)?)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PipelineParams {
    pub detect: DetectParams,
    pub crop_margin: f64,
}

impl Default for PipelineParams {
    fn default() -> Self {
        PipelineParams {
            detect: DetectParams::default(),
            crop_margin: DEFAULT_CROP_MARGIN,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PersonAttributes {
    pub age_gender: AgeGenderResult,
    pub expression: ExpressionResult,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PersonAnnotation {
    pub detection: Detection,
    /// Inference failure for this face, kept as a marker instead of failing the frame.
    pub attributes: std::result::Result<PersonAttributes, String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FrameAnnotation {
    pub frame_index: u64,
    pub persons: Vec<PersonAnnotation>,
}

fn analyse_face(frame: &RgbImage, det: &Detection, models: &Models, params: &PipelineParams) -> Result<PersonAttributes> {
    let face = preprocess_face(frame, det, params.crop_margin)?;
    let age_gender = predict_age_gender(&models.age_gender, &face)?;
    let gray = preprocess_gray(frame, det)?;
    let expression = predict_expression(&models.expression, &gray)?;
    Ok(PersonAttributes {
        age_gender,
        expression,
    })
}

/// Detects faces and runs both networks on each, in detector order.
pub fn process_frame(frame: &RgbImage, frame_index: u64, models: &Models, params: &PipelineParams) -> Result<FrameAnnotation> {
    let detections = detect_multiscale(&models.cascade, &frame.to_gray(), &params.detect)?;
    let persons = detections
        .into_iter()
        .map(|det| {
            let attributes = analyse_face(frame, &det, models, params).map_err(|e| {
                log::warn!("frame {frame_index}: face at ({}, {}) failed: {e}", det.x, det.y);
                e.to_string()
            });
            PersonAnnotation {
                detection: det,
                attributes,
            }
        })
        .collect();
    Ok(FrameAnnotation {
        frame_index,
        persons,
    })
}
