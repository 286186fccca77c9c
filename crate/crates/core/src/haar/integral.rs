use crate::error::{Error, Result};
use crate::imaging::GrayImage;

/// Summed-area tables with a leading zero row and column.
///
/// `sum(y, x)` is the sum of all pixels strictly above and left of `(y, x)`;
/// `sq_sum` is the same over squared pixels.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IntegralImage {
    width: u32,
    height: u32,
    sum: Vec<u64>,
    sq_sum: Vec<u64>,
}

impl IntegralImage {
    pub fn new(img: &GrayImage) -> Self {
        let (w, h) = (img.width() as usize, img.height() as usize);
        let stride = w + 1;
        let mut sum = vec![0u64; stride * (h + 1)];
        let mut sq_sum = vec![0u64; stride * (h + 1)];
        for (y, row) in img.pixels().chunks_exact(w).enumerate() {
            let mut row_sum = 0u64;
            let mut row_sq = 0u64;
            for (x, &p) in row.iter().enumerate() {
                let p = p as u64;
                row_sum += p;
                row_sq += p * p;
                let at = (y + 1) * stride + x + 1;
                sum[at] = sum[at - stride] + row_sum;
                sq_sum[at] = sq_sum[at - stride] + row_sq;
            }
        }
        IntegralImage {
            width: img.width(),
            height: img.height(),
            sum,
            sq_sum,
        }
    }

    /// Width of the source image (the tables are one wider).
    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn sum_at(&self, y: u32, x: u32) -> u64 {
        self.sum[y as usize * (self.width as usize + 1) + x as usize]
    }

    pub fn sq_sum_at(&self, y: u32, x: u32) -> u64 {
        self.sq_sum[y as usize * (self.width as usize + 1) + x as usize]
    }

    fn check(&self, x: u32, y: u32, w: u32, h: u32) -> Result<()> {
        if w == 0 || h == 0 {
            return Err(Error::Bounds(format!("zero-area rect {w}x{h}")));
        }
        if x as u64 + w as u64 > self.width as u64 || y as u64 + h as u64 > self.height as u64 {
            return Err(Error::Bounds(format!(
                "rect ({x}, {y}, {w}, {h}) exceeds {}x{} image",
                self.width, self.height
            )));
        }
        Ok(())
    }

    /// Sum of the pixels in the `w`×`h` rect at `(x, y)`.
    pub fn rect_sum(&self, x: u32, y: u32, w: u32, h: u32) -> Result<u64> {
        self.check(x, y, w, h)?;
        Ok(self.rect_sum_unchecked(&self.sum, x, y, w, h))
    }

    pub fn rect_sq_sum(&self, x: u32, y: u32, w: u32, h: u32) -> Result<u64> {
        self.check(x, y, w, h)?;
        Ok(self.rect_sum_unchecked(&self.sq_sum, x, y, w, h))
    }

    #[inline]
    pub(crate) fn rect_sum_unchecked(&self, table: &[u64], x: u32, y: u32, w: u32, h: u32) -> u64 {
        let stride = self.width as usize + 1;
        let (x0, y0) = (x as usize, y as usize);
        let (x1, y1) = (x0 + w as usize, y0 + h as usize);
        table[y1 * stride + x1] + table[y0 * stride + x0]
            - table[y0 * stride + x1]
            - table[y1 * stride + x0]
    }

    pub(crate) fn sum_table(&self) -> &[u64] {
        &self.sum
    }

    pub(crate) fn sq_table(&self) -> &[u64] {
        &self.sq_sum
    }
}

pub fn compute_integral(img: &GrayImage) -> IntegralImage {
    IntegralImage::new(img)
}
