//! WRN age and gender estimation on 64×64 RGB face crops.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{argmax, bn_entries, warn_on_extras, GraphBuilder, Network, NodeId, Op};
use crate::error::{Error, Result};
use crate::haar::Detection;
use crate::imaging::{resize_bilinear, RgbImage};
use crate::tensor::{ConvSpec, Padding, Pool, Tensor};
use crate::weights::{Manifest, TensorArchive};

pub const DEFAULT_CROP_MARGIN: f64 = 0.4;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WrnConfig {
    pub depth: usize,
    pub widen_factor: usize,
    pub input_side: usize,
    pub age_bins: usize,
    pub gender_classes: usize,
}

impl Default for WrnConfig {
    fn default() -> Self {
        WrnConfig {
            depth: 16,
            widen_factor: 8,
            input_side: 64,
            age_bins: 101,
            gender_classes: 2,
        }
    }
}

impl WrnConfig {
    pub fn validate(&self) -> Result<()> {
        if self.depth < 10 || (self.depth - 4) % 6 != 0 {
            return Err(Error::Domain(format!(
                "WRN depth must be 6n+4 with n >= 1, got {}",
                self.depth
            )));
        }
        if self.widen_factor == 0 {
            return Err(Error::Domain("widen factor must be positive".into()));
        }
        if self.input_side != 64 {
            return Err(Error::Domain(format!(
                "input side must be 64, got {}",
                self.input_side
            )));
        }
        if self.age_bins == 0 {
            return Err(Error::Domain("age head needs at least one bin".into()));
        }
        if self.gender_classes != 2 {
            return Err(Error::Domain(format!(
                "gender head must have 2 classes, got {}",
                self.gender_classes
            )));
        }
        Ok(())
    }

    /// Residual blocks per group.
    pub fn blocks_per_group(&self) -> usize {
        (self.depth - 4) / 6
    }

    /// Output channels of the three groups.
    pub fn widths(&self) -> [usize; 3] {
        [16, 32, 64].map(|w| w * self.widen_factor)
    }
}

const STEM_FILTERS: usize = 16;
const GROUP_STRIDES: [usize; 3] = [1, 2, 2];

struct BlockPlan {
    prefix: String,
    cin: usize,
    cout: usize,
    stride: usize,
}

impl BlockPlan {
    fn projects(&self) -> bool {
        self.cin != self.cout || self.stride != 1
    }
}

fn block_plans(config: &WrnConfig) -> Vec<BlockPlan> {
    let mut plans = Vec::new();
    let mut cin = STEM_FILTERS;
    for (g, (&cout, &stride)) in config.widths().iter().zip(&GROUP_STRIDES).enumerate() {
        for b in 0..config.blocks_per_group() {
            plans.push(BlockPlan {
                prefix: format!("wrn.g{}.b{}", g + 1, b + 1),
                cin,
                cout,
                stride: if b == 0 { stride } else { 1 },
            });
            cin = cout;
        }
    }
    plans
}

/// Tensor names and dims a WRN archive must contain, in build order.
pub fn wrn_manifest(config: &WrnConfig) -> Result<Manifest> {
    config.validate()?;
    let mut m: Manifest = vec![("wrn.conv0.kernel".into(), vec![3, 3, 3, STEM_FILTERS])];
    for p in block_plans(config) {
        m.extend(bn_entries(&format!("{}.bn1", p.prefix), p.cin));
        m.push((format!("{}.conv1.kernel", p.prefix), vec![3, 3, p.cin, p.cout]));
        m.extend(bn_entries(&format!("{}.bn2", p.prefix), p.cout));
        m.push((format!("{}.conv2.kernel", p.prefix), vec![3, 3, p.cout, p.cout]));
        if p.projects() {
            m.push((format!("{}.shortcut.kernel", p.prefix), vec![1, 1, p.cin, p.cout]));
        }
    }
    let top = config.widths()[2];
    m.extend(bn_entries("wrn.bn_final", top));
    for (head, n) in [("gender", config.gender_classes), ("age", config.age_bins)] {
        m.push((format!("wrn.head.{head}.kernel"), vec![top, n]));
        m.push((format!("wrn.head.{head}.bias"), vec![n]));
    }
    Ok(m)
}

/// Pre-activation wide residual network with gender and age softmax heads.
///
/// Outputs are `[gender_probs, age_probs]`.
pub fn build_wrn(config: &WrnConfig, weights: &TensorArchive) -> Result<Network> {
    let manifest = wrn_manifest(config)?;
    let side = config.input_side;
    let (mut g, input) = GraphBuilder::new(weights, vec![side, side, 3]);
    let same = |stride| ConvSpec::new(stride, Padding::Same);

    let mut x = g.conv("wrn.conv0", input, [3, 3, 3, STEM_FILTERS], same(1), false)?;
    for p in block_plans(config) {
        let pre = g.batch_norm(&format!("{}.bn1", p.prefix), x, p.cin)?;
        let pre = g.relu(format!("{}.relu1", p.prefix), pre);
        let h = g.conv(
            &format!("{}.conv1", p.prefix),
            pre,
            [3, 3, p.cin, p.cout],
            same(p.stride),
            false,
        )?;
        let h = g.batch_norm(&format!("{}.bn2", p.prefix), h, p.cout)?;
        let h = g.relu(format!("{}.relu2", p.prefix), h);
        let h = g.conv(
            &format!("{}.conv2", p.prefix),
            h,
            [3, 3, p.cout, p.cout],
            same(1),
            false,
        )?;
        let shortcut: NodeId = if p.projects() {
            g.conv(
                &format!("{}.shortcut", p.prefix),
                pre,
                [1, 1, p.cin, p.cout],
                same(p.stride),
                false,
            )?
        } else {
            x
        };
        x = g.push(format!("{}.add", p.prefix), Op::Add, &[h, shortcut]);
    }

    let top = config.widths()[2];
    let x = g.batch_norm("wrn.bn_final", x, top)?;
    let x = g.relu("wrn.relu_final", x);
    let features = g.push("wrn.gap", Op::Pool(Pool::GlobalAvg), &[x]);
    let gender = g.dense("wrn.head.gender", features, top, config.gender_classes)?;
    let gender = g.push("wrn.gender_probs", Op::Softmax, &[gender]);
    let age = g.dense("wrn.head.age", features, top, config.age_bins)?;
    let age = g.push("wrn.age_probs", Op::Softmax, &[age]);

    warn_on_extras(weights, &manifest, "wrn");
    Ok(g.finish(&[gender, age]))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gender {
    Female,
    Male,
}

impl Gender {
    /// Head index order.
    pub const ALL: [Gender; 2] = [Gender::Female, Gender::Male];

    pub fn label(self) -> &'static str {
        match self {
            Gender::Female => "female",
            Gender::Male => "male",
        }
    }
}

impl fmt::Display for Gender {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Gender {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "female" | "f" => Ok(Gender::Female),
            "male" | "m" => Ok(Gender::Male),
            other => Err(Error::Domain(format!("unknown gender label `{other}`"))),
        }
    }
}

/// Decade bins; ages of 70 and above fall in the last one.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AgeGroup(u8);

impl AgeGroup {
    pub const COUNT: usize = 8;

    pub fn all() -> impl Iterator<Item = AgeGroup> {
        (0..Self::COUNT as u8).map(AgeGroup)
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn label(self) -> String {
        let lo = self.0 as u32 * 10;
        format!("{}-{}", lo, lo + 9)
    }
}

impl fmt::Display for AgeGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl FromStr for AgeGroup {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AgeGroup::all()
            .find(|g| g.label() == s.trim())
            .ok_or_else(|| Error::Domain(format!("unknown age group `{s}`")))
    }
}

impl Serialize for AgeGroup {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.label())
    }
}

impl<'de> Deserialize<'de> for AgeGroup {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

pub fn age_group(age: f64) -> Result<AgeGroup> {
    if age.is_nan() || age < 0.0 {
        return Err(Error::Domain(format!("age must be non-negative, got {age}")));
    }
    let decade = (age / 10.0).floor().min((AgeGroup::COUNT - 1) as f64);
    Ok(AgeGroup(decade as u8))
}

#[derive(Clone, Debug, PartialEq)]
pub struct AgeGenderResult {
    pub gender_probs: Vec<f32>,
    pub gender: Gender,
    pub age_probs: Vec<f32>,
    pub age_estimate: f64,
    pub age_group: AgeGroup,
}

/// Expected bin index under `probs`, accumulated in f64.
pub fn expected_age(probs: &[f32]) -> f64 {
    probs
        .iter()
        .enumerate()
        .map(|(i, &p)| i as f64 * p as f64)
        .sum::<f64>()
        .clamp(0.0, probs.len().saturating_sub(1) as f64)
}

pub fn predict_age_gender(net: &Network, face: &Tensor) -> Result<AgeGenderResult> {
    let mut out = net.forward(face)?.into_iter();
    let (gender_probs, age_probs) = match (out.next(), out.next()) {
        (Some(g), Some(a)) => (g.into_data(), a.into_data()),
        _ => {
            return Err(Error::shape(
                "network outputs",
                "expected gender and age outputs",
            ))
        }
    };
    let age_estimate = expected_age(&age_probs);
    Ok(AgeGenderResult {
        gender: Gender::ALL[argmax(&gender_probs).min(1)],
        gender_probs,
        age_group: age_group(age_estimate)?,
        age_probs,
        age_estimate,
    })
}

/// Box grown by `margin · side` on each edge, rounded and clamped to the frame,
/// as `(x0, y0, x1, y1)`.
pub fn expand_box(frame_w: u32, frame_h: u32, det: &Detection, margin: f64) -> Result<(u32, u32, u32, u32)> {
    if !(margin.is_finite() && margin >= 0.0) {
        return Err(Error::Domain(format!("crop margin must be >= 0, got {margin}")));
    }
    let grow = |start: u32, len: u32, limit: u32| {
        let pad = margin * len as f64;
        let lo = (start as f64 - pad).round().clamp(0.0, limit as f64) as u32;
        let hi = ((start + len) as f64 + pad).round().clamp(0.0, limit as f64) as u32;
        (lo, hi)
    };
    let (x0, x1) = grow(det.x, det.w, frame_w);
    let (y0, y1) = grow(det.y, det.h, frame_h);
    if x1 <= x0 || y1 <= y0 {
        return Err(Error::Geometry(format!(
            "box ({}, {}, {}, {}) is empty inside the {frame_w}x{frame_h} frame",
            det.x, det.y, det.w, det.h
        )));
    }
    Ok((x0, y0, x1, y1))
}

/// Margin-expanded, clamped crop resized to `side`×`side`×3 with values in [0, 255].
pub fn preprocess_face(frame: &RgbImage, det: &Detection, margin: f64) -> Result<Tensor> {
    preprocess_face_sized(frame, det, margin, 64)
}

pub fn preprocess_face_sized(frame: &RgbImage, det: &Detection, margin: f64, side: usize) -> Result<Tensor> {
    let (x0, y0, x1, y1) = expand_box(frame.width(), frame.height(), det, margin)?;
    let crop = frame.crop(x0, y0, x1 - x0, y1 - y0)?;
    let data = resize_bilinear(
        crop.data(),
        crop.width() as usize,
        crop.height() as usize,
        3,
        side,
        side,
    );
    Tensor::new(vec![side, side, 3], data)
}
