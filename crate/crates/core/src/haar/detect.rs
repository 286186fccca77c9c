use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cascade::Cascade;
use super::group::{group_rectangles, BoxI};
use super::integral::IntegralImage;
use crate::error::{Error, Result};
use crate::imaging::GrayImage;

/// A grouped face box in frame coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Detection {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
    pub neighbor_count: u32,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DetectParams {
    pub scale_factor: f64,
    pub min_neighbors: u32,
    /// Grouping tolerance as a fraction of box size.
    pub eps: f64,
    pub min_size: Option<(u32, u32)>,
    pub max_size: Option<(u32, u32)>,
}

impl Default for DetectParams {
    fn default() -> Self {
        DetectParams {
            scale_factor: 1.1,
            min_neighbors: 3,
            eps: 0.2,
            min_size: Some((30, 30)),
            max_size: None,
        }
    }
}

impl DetectParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.scale_factor.is_finite() && self.scale_factor > 1.0) {
            return Err(Error::Domain(format!(
                "scale factor must be > 1, got {}",
                self.scale_factor
            )));
        }
        if self.eps.is_nan() || self.eps < 0.0 {
            return Err(Error::Domain(format!("eps must be >= 0, got {}", self.eps)));
        }
        if let (Some(min), Some(max)) = (self.min_size, self.max_size) {
            if min.0 > max.0 || min.1 > max.1 {
                return Err(Error::Domain(format!(
                    "min size {min:?} exceeds max size {max:?}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug)]
struct ScaledRect {
    x: u32,
    y: u32,
    w: u32,
    h: u32,
    weight: f64,
}

#[derive(Clone, Debug)]
struct ScaledWeak {
    rects: Vec<ScaledRect>,
    threshold: f64,
    left_value: f64,
    right_value: f64,
}

#[derive(Clone, Debug)]
struct ScaledStage {
    weak: Vec<ScaledWeak>,
    threshold: f64,
}

/// A cascade with every rect pre-scaled to one window size.
#[derive(Clone, Debug)]
pub(crate) struct ScaledCascade {
    stages: Vec<ScaledStage>,
    win_w: u32,
    win_h: u32,
    /// Variance window: the detection window inset by a one-pixel (scaled) border.
    norm: (u32, u32, u32, u32),
    norm_area: f64,
    extent_w: u32,
    extent_h: u32,
}

fn scale_dim(v: u32, scale: f64) -> u32 {
    (v as f64 * scale).round() as u32
}

impl ScaledCascade {
    pub(crate) fn new(cascade: &Cascade, scale: f64) -> Self {
        let win_w = scale_dim(cascade.window_width, scale).max(1);
        let win_h = scale_dim(cascade.window_height, scale).max(1);
        let inset = (scale.round() as u32).max(1);
        let norm = (
            inset,
            inset,
            scale_dim(cascade.window_width - 2, scale).max(1),
            scale_dim(cascade.window_height - 2, scale).max(1),
        );
        let mut extent_w = win_w.max(norm.0 + norm.2);
        let mut extent_h = win_h.max(norm.1 + norm.3);

        let stages = cascade
            .stages
            .iter()
            .map(|stage| ScaledStage {
                threshold: stage.stage_threshold,
                weak: stage
                    .weak_classifiers
                    .iter()
                    .map(|weak| {
                        let mut rects: Vec<ScaledRect> = weak
                            .rects
                            .iter()
                            .map(|r| ScaledRect {
                                x: scale_dim(r.x, scale),
                                y: scale_dim(r.y, scale),
                                w: scale_dim(r.w, scale).max(1),
                                h: scale_dim(r.h, scale).max(1),
                                weight: r.weight,
                            })
                            .collect();
                        rebalance(&mut rects);
                        for r in &rects {
                            extent_w = extent_w.max(r.x + r.w);
                            extent_h = extent_h.max(r.y + r.h);
                        }
                        ScaledWeak {
                            rects,
                            threshold: weak.threshold,
                            left_value: weak.left_value,
                            right_value: weak.right_value,
                        }
                    })
                    .collect(),
            })
            .collect();

        ScaledCascade {
            stages,
            win_w,
            win_h,
            norm,
            norm_area: norm.2 as f64 * norm.3 as f64,
            extent_w,
            extent_h,
        }
    }

    fn fits(&self, ii: &IntegralImage, x: u32, y: u32) -> bool {
        x as u64 + self.extent_w as u64 <= ii.width() as u64
            && y as u64 + self.extent_h as u64 <= ii.height() as u64
    }

    /// Standard deviation of the variance window, or 1 when it is flat.
    fn variance_norm(&self, ii: &IntegralImage, x: u32, y: u32) -> f64 {
        let (nx, ny, nw, nh) = self.norm;
        let s = ii.rect_sum_unchecked(ii.sum_table(), x + nx, y + ny, nw, nh) as i128;
        let sq = ii.rect_sum_unchecked(ii.sq_table(), x + nx, y + ny, nw, nh) as i128;
        let area = nw as i128 * nh as i128;
        // area² · variance, exact in integers.
        let scaled_var = area * sq - s * s;
        if scaled_var <= 0 {
            1.0
        } else {
            (scaled_var as f64).sqrt() / area as f64
        }
    }

    /// Caller guarantees the window fits.
    fn passes(&self, ii: &IntegralImage, x: u32, y: u32) -> bool {
        let norm = self.variance_norm(ii, x, y) * self.norm_area;
        let table = ii.sum_table();
        for stage in &self.stages {
            let mut stage_sum = 0.0;
            for weak in &stage.weak {
                let feature: f64 = weak
                    .rects
                    .iter()
                    .map(|r| {
                        r.weight * ii.rect_sum_unchecked(table, x + r.x, y + r.y, r.w, r.h) as f64
                    })
                    .sum();
                stage_sum += if feature < weak.threshold * norm {
                    weak.left_value
                } else {
                    weak.right_value
                };
            }
            if stage_sum < stage.threshold {
                return false;
            }
        }
        true
    }
}

/// Re-weights the single negative rect so the weighted areas cancel after rounding.
fn rebalance(rects: &mut [ScaledRect]) {
    if rects.len() < 2 {
        return;
    }
    let Some(neg) = rects.iter().position(|r| r.weight < 0.0) else {
        return;
    };
    let positive: f64 = rects
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != neg)
        .map(|(_, r)| r.weight * (r.w as f64 * r.h as f64))
        .sum();
    let area = rects[neg].w as f64 * rects[neg].h as f64;
    rects[neg].weight = -positive / area;
}

/// Runs every stage of `cascade` on the window at `(x, y)` scaled by `scale`.
pub fn eval_window(cascade: &Cascade, ii: &IntegralImage, x: u32, y: u32, scale: f64) -> Result<bool> {
    if !(scale.is_finite() && scale > 0.0) {
        return Err(Error::Domain(format!("invalid scale {scale}")));
    }
    let scaled = ScaledCascade::new(cascade, scale);
    if !scaled.fits(ii, x, y) {
        return Err(Error::Bounds(format!(
            "{}x{} window at ({x}, {y}) exceeds {}x{} image",
            scaled.extent_w,
            scaled.extent_h,
            ii.width(),
            ii.height()
        )));
    }
    Ok(scaled.passes(ii, x, y))
}

/// Window scales `scale_factor^k` whose window lies between the size limits.
pub(crate) fn scan_scales(cascade: &Cascade, img_w: u32, img_h: u32, params: &DetectParams) -> Vec<f64> {
    let mut scales = Vec::new();
    for k in 0.. {
        let s = params.scale_factor.powi(k);
        let w = scale_dim(cascade.window_width, s);
        let h = scale_dim(cascade.window_height, s);
        if w > img_w || h > img_h {
            break;
        }
        if let Some((mw, mh)) = params.max_size {
            if w > mw || h > mh {
                break;
            }
        }
        if let Some((mw, mh)) = params.min_size {
            if w < mw || h < mh {
                continue;
            }
        }
        scales.push(s);
    }
    scales
}

/// Raw window hits before grouping, in scan order.
pub fn scan_windows(cascade: &Cascade, ii: &IntegralImage, params: &DetectParams) -> Vec<BoxI> {
    let scales = scan_scales(cascade, ii.width(), ii.height(), params);
    let per_scale: Vec<Vec<BoxI>> = scales
        .par_iter()
        .map(|&s| {
            let sc = ScaledCascade::new(cascade, s);
            let step = (s.round() as usize).max(1);
            let mut hits = Vec::new();
            if sc.extent_w > ii.width() || sc.extent_h > ii.height() {
                return hits;
            }
            for y in (0..=ii.height() - sc.extent_h).step_by(step) {
                for x in (0..=ii.width() - sc.extent_w).step_by(step) {
                    if sc.passes(ii, x, y) {
                        hits.push(BoxI {
                            x: x as i64,
                            y: y as i64,
                            w: sc.win_w as i64,
                            h: sc.win_h as i64,
                        });
                    }
                }
            }
            hits
        })
        .collect();
    per_scale.into_iter().flatten().collect()
}

/// Multi-scale sliding-window detection followed by rectangle grouping.
pub fn detect_multiscale(cascade: &Cascade, img: &GrayImage, params: &DetectParams) -> Result<Vec<Detection>> {
    params.validate()?;
    if img.width() < cascade.window_width || img.height() < cascade.window_height {
        return Ok(Vec::new());
    }
    let ii = IntegralImage::new(img);
    let hits = scan_windows(cascade, &ii, params);
    let mut found = group_rectangles(&hits, params.min_neighbors, params.eps);
    // Averages are rounded per field, which can overhang the frame by a pixel.
    for d in &mut found {
        d.w = d.w.min(img.width() - d.x);
        d.h = d.h.min(img.height() - d.y);
    }
    Ok(found)
}
