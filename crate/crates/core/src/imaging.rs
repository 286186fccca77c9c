//! 8-bit frames, PPM/PNG I/O, luma conversion and bilinear resampling.

use std::io::{BufRead, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GrayImage {
    width: u32,
    height: u32,
    pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: u32, height: u32, pixels: Vec<u8>) -> Result<Self> {
        check_size(width, height, pixels.len(), 1)?;
        Ok(GrayImage {
            width,
            height,
            pixels,
        })
    }

    pub fn filled(width: u32, height: u32, value: u8) -> Result<Self> {
        GrayImage::new(width, height, vec![value; width as usize * height as usize])
    }

    pub fn from_fn(width: u32, height: u32, f: impl Fn(u32, u32) -> u8) -> Result<Self> {
        let pixels = (0..height)
            .flat_map(|y| (0..width).map(move |x| (x, y)))
            .map(|(x, y)| f(x, y))
            .collect();
        GrayImage::new(width, height, pixels)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn get(&self, x: u32, y: u32) -> u8 {
        self.pixels[(y * self.width + x) as usize]
    }
}

/// Interleaved RGB24 frame.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RgbImage {
    width: u32,
    height: u32,
    data: Vec<u8>,
}

impl RgbImage {
    pub fn new(width: u32, height: u32, data: Vec<u8>) -> Result<Self> {
        check_size(width, height, data.len(), 3)?;
        Ok(RgbImage {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: u32, height: u32, rgb: [u8; 3]) -> Result<Self> {
        let n = width as usize * height as usize;
        RgbImage::new(width, height, rgb.repeat(n))
    }

    pub fn from_fn(width: u32, height: u32, f: impl Fn(u32, u32) -> [u8; 3]) -> Result<Self> {
        let data = (0..height)
            .flat_map(|y| (0..width).map(move |x| (x, y)))
            .flat_map(|(x, y)| f(x, y))
            .collect();
        RgbImage::new(width, height, data)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn get(&self, x: u32, y: u32) -> [u8; 3] {
        let i = (y as usize * self.width as usize + x as usize) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn put(&mut self, x: u32, y: u32, rgb: [u8; 3]) {
        if x < self.width && y < self.height {
            let i = (y as usize * self.width as usize + x as usize) * 3;
            self.data[i..i + 3].copy_from_slice(&rgb);
        }
    }

    /// Luma with 0.299/0.587/0.114 weights, rounded to nearest.
    pub fn to_gray(&self) -> GrayImage {
        let pixels = self.data.chunks_exact(3).map(|p| luma(p[0], p[1], p[2])).collect();
        GrayImage {
            width: self.width,
            height: self.height,
            pixels,
        }
    }

    pub fn crop(&self, x: u32, y: u32, w: u32, h: u32) -> Result<RgbImage> {
        if w == 0 || h == 0 || x + w > self.width || y + h > self.height {
            return Err(Error::Geometry(format!(
                "crop ({x}, {y}, {w}, {h}) does not fit {}x{}",
                self.width, self.height
            )));
        }
        let mut data = Vec::with_capacity(w as usize * h as usize * 3);
        for row in y..y + h {
            let start = (row as usize * self.width as usize + x as usize) * 3;
            data.extend_from_slice(&self.data[start..start + w as usize * 3]);
        }
        RgbImage::new(w, h, data)
    }
}

fn check_size(width: u32, height: u32, len: usize, channels: usize) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::Geometry(format!("image size {width}x{height}")));
    }
    let expected = width as usize * height as usize * channels;
    if len != expected {
        return Err(Error::Geometry(format!(
            "{width}x{height}x{channels} image needs {expected} bytes, got {len}"
        )));
    }
    Ok(())
}

pub fn luma(r: u8, g: u8, b: u8) -> u8 {
    (0.299 * r as f64 + 0.587 * g as f64 + 0.114 * b as f64)
        .round()
        .clamp(0.0, 255.0) as u8
}

/// Half-pixel-centred bilinear resize of an interleaved `channels`-plane buffer.
///
/// Source coordinates are `(dst + 0.5) * src/dst - 0.5`, clamped to the edge,
/// so resizing to the same size is the identity.
pub fn resize_bilinear(
    src: &[u8],
    src_w: usize,
    src_h: usize,
    channels: usize,
    dst_w: usize,
    dst_h: usize,
) -> Vec<f32> {
    let axis = |dst: usize, src_len: usize, scale: f64| {
        let pos = ((dst as f64 + 0.5) * scale - 0.5).clamp(0.0, (src_len - 1) as f64);
        let lo = pos.floor() as usize;
        let hi = (lo + 1).min(src_len - 1);
        (lo, hi, pos - lo as f64)
    };
    let sx = src_w as f64 / dst_w as f64;
    let sy = src_h as f64 / dst_h as f64;
    let mut out = Vec::with_capacity(dst_w * dst_h * channels);
    for dy in 0..dst_h {
        let (y0, y1, fy) = axis(dy, src_h, sy);
        for dx in 0..dst_w {
            let (x0, x1, fx) = axis(dx, src_w, sx);
            for c in 0..channels {
                let at = |x: usize, y: usize| src[(y * src_w + x) * channels + c] as f64;
                let top = at(x0, y0) * (1.0 - fx) + at(x1, y0) * fx;
                let bottom = at(x0, y1) * (1.0 - fx) + at(x1, y1) * fx;
                out.push((top * (1.0 - fy) + bottom * fy) as f32);
            }
        }
    }
    out
}

/// Reads a binary PPM (P6, maxval 255).
pub fn read_ppm(reader: impl Read) -> Result<RgbImage> {
    let mut r = std::io::BufReader::new(reader);
    let magic = ppm_token(&mut r)?;
    if magic != "P6" {
        return Err(Error::Format(format!("PPM magic `{magic}`, expected P6")));
    }
    let mut field = |name: &str| -> Result<u32> {
        let tok = ppm_token(&mut r)?;
        tok.parse::<u32>()
            .map_err(|_| Error::Format(format!("PPM {name} `{tok}` is not a number")))
    };
    let width = field("width")?;
    let height = field("height")?;
    let maxval = field("maxval")?;
    if maxval != 255 {
        return Err(Error::Format(format!("PPM maxval {maxval}, only 255 is supported")));
    }
    if width == 0 || height == 0 {
        return Err(Error::Format(format!("PPM size {width}x{height}")));
    }
    let mut data = vec![0u8; width as usize * height as usize * 3];
    r.read_exact(&mut data)
        .map_err(|_| Error::Format("PPM pixel data is truncated".into()))?;
    RgbImage::new(width, height, data)
}

/// Next whitespace-delimited header token, skipping `#` comments. Consumes
/// exactly one whitespace byte after the token.
fn ppm_token(r: &mut impl BufRead) -> Result<String> {
    let mut tok = String::new();
    let mut byte = [0u8; 1];
    loop {
        if r.read(&mut byte)? == 0 {
            return Err(Error::Format("PPM header ended early".into()));
        }
        let b = byte[0];
        if b == b'#' && tok.is_empty() {
            let mut skip = Vec::new();
            r.read_until(b'\n', &mut skip)?;
        } else if b.is_ascii_whitespace() {
            if !tok.is_empty() {
                return Ok(tok);
            }
        } else {
            tok.push(b as char);
            if tok.len() > 16 {
                return Err(Error::Format("PPM header token too long".into()));
            }
        }
    }
}

pub fn write_ppm(img: &RgbImage, mut w: impl Write) -> Result<()> {
    write!(w, "P6\n{} {}\n255\n", img.width, img.height)?;
    w.write_all(&img.data)?;
    Ok(())
}

/// Loads a frame by extension: `.ppm` always, `.png` with the `png` feature.
pub fn load_image(path: &Path) -> Result<RgbImage> {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase());
    match ext.as_deref() {
        Some("ppm") => read_ppm(std::fs::File::open(path)?),
        #[cfg(feature = "png")]
        Some("png") => {
            let img = image::open(path)
                .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?
                .to_rgb8();
            let (w, h) = img.dimensions();
            RgbImage::new(w, h, img.into_raw())
        }
        _ => Err(Error::Format(format!(
            "{}: unsupported image type",
            path.display()
        ))),
    }
}

pub fn is_supported_image(path: &Path) -> bool {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase());
    ext.as_deref() == Some("ppm") || (cfg!(feature = "png") && ext.as_deref() == Some("png"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn luma_coefficients() {
        assert_eq!(luma(255, 255, 255), 255);
        assert_eq!(luma(0, 0, 0), 0);
        assert_eq!(luma(255, 0, 0), 76);
        assert_eq!(luma(0, 255, 0), 150);
        assert_eq!(luma(0, 0, 255), 29);
    }

    #[test]
    fn resize_same_size_is_identity() {
        let src: Vec<u8> = (0..48).collect();
        let out = resize_bilinear(&src, 4, 4, 3, 4, 4);
        assert_eq!(out, src.iter().map(|&v| v as f32).collect::<Vec<_>>());
    }

    #[test]
    fn ppm_round_trip_with_comment() {
        let img = RgbImage::from_fn(3, 2, |x, y| [x as u8, y as u8, 7]).unwrap();
        let mut buf = Vec::new();
        write_ppm(&img, &mut buf).unwrap();
        assert_eq!(read_ppm(buf.as_slice()).unwrap(), img);

        let mut commented = b"P6\n# made by hand\n3 2\n255\n".to_vec();
        commented.extend_from_slice(img.data());
        assert_eq!(read_ppm(commented.as_slice()).unwrap(), img);
    }

    #[test]
    fn ppm_header_errors() {
        assert!(matches!(read_ppm(&b"P3\n1 1\n255\n"[..]), Err(Error::Format(_))));
        assert!(matches!(read_ppm(&b"P6\n1 x\n255\n"[..]), Err(Error::Format(_))));
        assert!(matches!(read_ppm(&b"P6\n1 1\n65535\n"[..]), Err(Error::Format(_))));
        assert!(matches!(read_ppm(&b"P6\n2 2\n255\nabc"[..]), Err(Error::Format(_))));
        assert!(matches!(read_ppm(&b"P6\n2"[..]), Err(Error::Format(_))));
    }

    #[test]
    fn crop_bounds() {
        let img = RgbImage::filled(4, 4, [1, 2, 3]).unwrap();
        assert_eq!(img.crop(1, 1, 2, 3).unwrap().width(), 2);
        assert!(img.crop(3, 0, 2, 1).is_err());
        assert!(img.crop(0, 0, 0, 1).is_err());
    }
}
