//! mini-Xception expression classifier on 64×64 grayscale faces.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{argmax, bn_entries, warn_on_extras, GraphBuilder, Network, NodeId, Op};
use crate::error::{Error, Result};
use crate::haar::Detection;
use crate::imaging::{luma, resize_bilinear, RgbImage};
use crate::tensor::{ConvSpec, Padding, Pool, Tensor};
use crate::weights::{Manifest, TensorArchive};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Expression {
    Angry,
    Disgust,
    Fear,
    Happy,
    Sad,
    Surprise,
    Neutral,
}

impl Expression {
    /// Output index order of the classifier.
    pub const ALL: [Expression; 7] = [
        Expression::Angry,
        Expression::Disgust,
        Expression::Fear,
        Expression::Happy,
        Expression::Sad,
        Expression::Surprise,
        Expression::Neutral,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Expression::Angry => "angry",
            Expression::Disgust => "disgust",
            Expression::Fear => "fear",
            Expression::Happy => "happy",
            Expression::Sad => "sad",
            Expression::Surprise => "surprise",
            Expression::Neutral => "neutral",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Expression {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        if s == "anger" {
            return Ok(Expression::Angry);
        }
        Expression::ALL
            .into_iter()
            .find(|e| e.label() == s)
            .ok_or_else(|| Error::Domain(format!("unknown expression label `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct XceptionConfig {
    pub input_side: usize,
    pub stem_filters: usize,
    pub blocks: usize,
    pub block_filters: Vec<usize>,
    pub classes: usize,
}

impl Default for XceptionConfig {
    fn default() -> Self {
        XceptionConfig {
            input_side: 64,
            stem_filters: 8,
            blocks: 4,
            block_filters: vec![16, 32, 64, 128],
            classes: 7,
        }
    }
}

impl XceptionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.blocks != self.block_filters.len() {
            return Err(Error::Domain(format!(
                "{} blocks but {} filter counts",
                self.blocks,
                self.block_filters.len()
            )));
        }
        if self.classes != Expression::ALL.len() {
            return Err(Error::Domain(format!(
                "expression head must have {} classes, got {}",
                Expression::ALL.len(),
                self.classes
            )));
        }
        if self.stem_filters == 0 || self.block_filters.contains(&0) {
            return Err(Error::Domain("filter counts must be positive".into()));
        }
        // Two valid 3×3 stem convs need at least a 5×5 input.
        if self.input_side < 5 {
            return Err(Error::Domain(format!("input side {} too small", self.input_side)));
        }
        Ok(())
    }
}

fn separable_entries(prefix: &str, cin: usize, cout: usize) -> Manifest {
    let mut m = vec![
        (format!("{prefix}.depthwise"), vec![3, 3, 1, cin]),
        (format!("{prefix}.pointwise"), vec![1, 1, cin, cout]),
    ];
    m.extend(bn_entries(&format!("{prefix}.bn"), cout));
    m
}

pub fn xception_manifest(config: &XceptionConfig) -> Result<Manifest> {
    config.validate()?;
    let s = config.stem_filters;
    let mut m: Manifest = Vec::new();
    for (name, cin) in [("xc.stem1", 1), ("xc.stem2", s)] {
        m.push((format!("{name}.kernel"), vec![3, 3, cin, s]));
        m.extend(bn_entries(&format!("{name}.bn"), s));
    }
    let mut cin = s;
    for (i, &f) in config.block_filters.iter().enumerate() {
        let p = format!("xc.b{}", i + 1);
        m.extend(separable_entries(&format!("{p}.sep1"), cin, f));
        m.extend(separable_entries(&format!("{p}.sep2"), f, f));
        m.push((format!("{p}.shortcut.kernel"), vec![1, 1, cin, f]));
        m.extend(bn_entries(&format!("{p}.shortcut.bn"), f));
        cin = f;
    }
    m.push(("xc.conv_out.kernel".into(), vec![3, 3, cin, config.classes]));
    m.push(("xc.conv_out.bias".into(), vec![config.classes]));
    Ok(m)
}

fn separable(g: &mut GraphBuilder, prefix: &str, x: NodeId, cin: usize, cout: usize) -> Result<NodeId> {
    let same = Padding::Same;
    let dw = g.conv_named(
        &format!("{prefix}.depthwise"),
        &format!("{prefix}.depthwise"),
        x,
        [3, 3, 1, cin],
        ConvSpec::depthwise(cin, 1, same),
        false,
    )?;
    let pw = g.conv_named(
        &format!("{prefix}.pointwise"),
        &format!("{prefix}.pointwise"),
        dw,
        [1, 1, cin, cout],
        ConvSpec::new(1, same),
        false,
    )?;
    g.batch_norm(&format!("{prefix}.bn"), pw, cout)
}

/// Fully convolutional classifier; the single output is the 7-way probability vector.
pub fn build_mini_xception(config: &XceptionConfig, weights: &TensorArchive) -> Result<Network> {
    let manifest = xception_manifest(config)?;
    let side = config.input_side;
    let s = config.stem_filters;
    let (mut g, input) = GraphBuilder::new(weights, vec![side, side, 1]);

    let mut x = input;
    for (name, cin) in [("xc.stem1", 1), ("xc.stem2", s)] {
        x = g.conv(name, x, [3, 3, cin, s], ConvSpec::new(1, Padding::Valid), false)?;
        x = g.batch_norm(&format!("{name}.bn"), x, s)?;
        x = g.relu(format!("{name}.relu"), x);
    }

    let mut cin = s;
    for (i, &f) in config.block_filters.iter().enumerate() {
        let p = format!("xc.b{}", i + 1);
        let shortcut = g.conv(
            &format!("{p}.shortcut"),
            x,
            [1, 1, cin, f],
            ConvSpec::new(2, Padding::Same),
            false,
        )?;
        let shortcut = g.batch_norm(&format!("{p}.shortcut.bn"), shortcut, f)?;
        let h = separable(&mut g, &format!("{p}.sep1"), x, cin, f)?;
        let h = g.relu(format!("{p}.relu"), h);
        let h = separable(&mut g, &format!("{p}.sep2"), h, f, f)?;
        let h = g.push(
            format!("{p}.pool"),
            Op::Pool(Pool::Max {
                window: 3,
                stride: 2,
                padding: Padding::Same,
            }),
            &[h],
        );
        x = g.push(format!("{p}.add"), Op::Add, &[h, shortcut]);
        cin = f;
    }

    let logits = g.conv(
        "xc.conv_out",
        x,
        [3, 3, cin, config.classes],
        ConvSpec::new(1, Padding::Same),
        true,
    )?;
    let pooled = g.push("xc.gap", Op::Pool(Pool::GlobalAvg), &[logits]);
    let probs = g.push("xc.probs", Op::Softmax, &[pooled]);

    warn_on_extras(weights, &manifest, "mini-xception");
    Ok(g.finish(&[probs]))
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExpressionResult {
    pub probs: Vec<f32>,
    pub label: Expression,
}

pub fn predict_expression(net: &Network, face: &Tensor) -> Result<ExpressionResult> {
    let probs = net
        .forward(face)?
        .into_iter()
        .next()
        .ok_or_else(|| Error::shape("network outputs", "expected a probability vector"))?
        .into_data();
    if probs.len() != Expression::ALL.len() {
        return Err(Error::shape(
            "expression output",
            format!("expected 7 classes, got {}", probs.len()),
        ));
    }
    Ok(ExpressionResult {
        label: Expression::ALL[argmax(&probs)],
        probs,
    })
}

/// Box clamped to the frame, as `(x0, y0, x1, y1)`.
fn clamp_box(frame: &RgbImage, det: &Detection) -> Result<(u32, u32, u32, u32)> {
    let x1 = det.x.saturating_add(det.w).min(frame.width());
    let y1 = det.y.saturating_add(det.h).min(frame.height());
    if x1 <= det.x || y1 <= det.y {
        return Err(Error::Geometry(format!(
            "box ({}, {}, {}, {}) is empty inside the {}x{} frame",
            det.x,
            det.y,
            det.w,
            det.h,
            frame.width(),
            frame.height()
        )));
    }
    Ok((det.x, det.y, x1, y1))
}

/// Luma crop of the box resized to 64×64×1 and scaled to [−1, 1].
pub fn preprocess_gray(frame: &RgbImage, det: &Detection) -> Result<Tensor> {
    preprocess_gray_sized(frame, det, 64)
}

pub fn preprocess_gray_sized(frame: &RgbImage, det: &Detection, side: usize) -> Result<Tensor> {
    let (x0, y0, x1, y1) = clamp_box(frame, det)?;
    let crop = frame.crop(x0, y0, x1 - x0, y1 - y0)?;
    let gray: Vec<u8> = crop
        .data()
        .chunks_exact(3)
        .map(|p| luma(p[0], p[1], p[2]))
        .collect();
    let resized = resize_bilinear(&gray, crop.width() as usize, crop.height() as usize, 1, side, side);
    let scaled = resized.into_iter().map(|v| v / 127.5 - 1.0).collect();
    Tensor::new(vec![side, side, 1], scaled)
}
