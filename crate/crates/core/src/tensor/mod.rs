//! Dense `f32` tensors and the inference-time operators used by both networks.
//!
//! Feature maps are laid out height × width × channels, row-major with the last
//! dimension fastest. Convolution kernels are kh × kw × (in / groups) × out.

mod ops;

pub use ops::{
    add, batch_norm_inference, conv2d, dense, pool2d, relu, softmax, BatchNormParams, ConvSpec,
    Padding, Pool,
};

use crate::error::{Error, Result};

pub const MAX_RANK: usize = 4;

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    dims: Vec<usize>,
    data: Vec<f32>,
}

impl Tensor {
    pub fn new(dims: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        check_dims(&dims)?;
        let expected: usize = dims.iter().product();
        if expected != data.len() {
            return Err(Error::shape(
                "data",
                format!("dims {dims:?} need {expected} values, got {}", data.len()),
            ));
        }
        Ok(Tensor { dims, data })
    }

    pub fn zeros(dims: Vec<usize>) -> Result<Self> {
        let n = dims.iter().product();
        Tensor::new(dims, vec![0.0; n])
    }

    pub fn filled(dims: Vec<usize>, value: f32) -> Result<Self> {
        let n = dims.iter().product();
        Tensor::new(dims, vec![value; n])
    }

    pub fn from_vec(data: Vec<f32>) -> Result<Self> {
        Tensor::new(vec![data.len()], data)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn rank(&self) -> usize {
        self.dims.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    /// Same data viewed with different dims.
    pub fn reshape(self, dims: Vec<usize>) -> Result<Self> {
        Tensor::new(dims, self.data)
    }

    pub fn map(&self, f: impl Fn(f32) -> f32) -> Tensor {
        Tensor {
            dims: self.dims.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Interprets the tensor as H × W × C.
    pub(crate) fn hwc(&self, what: &str) -> Result<(usize, usize, usize)> {
        match self.dims.as_slice() {
            &[h, w, c] => Ok((h, w, c)),
            other => Err(Error::shape(
                what,
                format!("expected rank-3 H×W×C tensor, got dims {other:?}"),
            )),
        }
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

fn check_dims(dims: &[usize]) -> Result<()> {
    if dims.is_empty() || dims.len() > MAX_RANK {
        return Err(Error::shape(
            "rank",
            format!("rank must be 1..={MAX_RANK}, got {}", dims.len()),
        ));
    }
    if let Some(axis) = dims.iter().position(|&d| d == 0) {
        return Err(Error::shape(format!("axis {axis}"), "dimension must be positive"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_mismatched_length() {
        assert!(matches!(
            Tensor::new(vec![2, 2], vec![1.0; 3]),
            Err(Error::Shape { .. })
        ));
    }

    #[test]
    fn rejects_bad_rank_and_zero_dims() {
        assert!(Tensor::new(vec![], vec![]).is_err());
        assert!(Tensor::new(vec![1, 1, 1, 1, 1], vec![0.0]).is_err());
        assert!(Tensor::new(vec![2, 0], vec![]).is_err());
    }

    #[test]
    fn reshape_keeps_data() {
        let t = Tensor::new(vec![2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let r = t.clone().reshape(vec![4]).unwrap();
        assert_eq!(r.data(), t.data());
        assert!(t.reshape(vec![3]).is_err());
    }
}
