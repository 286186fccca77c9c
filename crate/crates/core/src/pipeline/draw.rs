use font8x8::legacy::BASIC_LEGACY;

use super::FrameAnnotation;
use crate::imaging::RgbImage;

const BOX_COLOR: [u8; 3] = [0, 255, 0];
const FAILED_COLOR: [u8; 3] = [255, 0, 0];
const TEXT_COLOR: [u8; 3] = [255, 255, 255];
const TEXT_BACKGROUND: [u8; 3] = [0, 0, 0];
const GLYPH: u32 = 8;

fn outline(img: &mut RgbImage, x: u32, y: u32, w: u32, h: u32, color: [u8; 3]) {
    for t in 0..2 {
        for px in x..x + w {
            img.put(px, y + t, color);
            img.put(px, (y + h).saturating_sub(1 + t), color);
        }
        for py in y..y + h {
            img.put(x + t, py, color);
            img.put((x + w).saturating_sub(1 + t), py, color);
        }
    }
}

fn text(img: &mut RgbImage, x: u32, y: u32, s: &str) {
    for (i, ch) in s.chars().enumerate() {
        let glyph = BASIC_LEGACY.get(ch as usize).copied().unwrap_or([0; 8]);
        let gx = x + i as u32 * GLYPH;
        for (row, bits) in glyph.iter().enumerate() {
            for col in 0..GLYPH {
                let on = bits >> col & 1 == 1;
                img.put(gx + col, y + row as u32, if on { TEXT_COLOR } else { TEXT_BACKGROUND });
            }
        }
    }
}

/// Copy of `frame` with each face boxed and labelled `label: value`.
pub fn annotate_frame(frame: &RgbImage, annotation: &FrameAnnotation) -> RgbImage {
    let mut img = frame.clone();
    for person in &annotation.persons {
        let d = person.detection;
        let lines = match &person.attributes {
            Ok(a) => {
                outline(&mut img, d.x, d.y, d.w, d.h, BOX_COLOR);
                vec![
                    format!("gender: {}", a.age_gender.gender),
                    format!("age: {:.0} ({})", a.age_gender.age_estimate, a.age_gender.age_group),
                    format!("expression: {}", a.expression.label),
                ]
            }
            Err(_) => {
                outline(&mut img, d.x, d.y, d.w, d.h, FAILED_COLOR);
                vec!["error".to_string()]
            }
        };
        let block = lines.len() as u32 * GLYPH;
        // Above the box when there is room, otherwise just below it.
        let top = if d.y >= block { d.y - block } else { d.y + d.h };
        for (i, line) in lines.iter().enumerate() {
            text(&mut img, d.x, top + i as u32 * GLYPH, line);
        }
    }
    img
}
