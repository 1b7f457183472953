//! Dense row-major `f32` tensor.
//!
//! Image tensors use the `(batch, channel, height, width)` layout. Storage is
//! 32-bit; reductions accumulate in `f64`.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f32>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        if shape.contains(&0) {
            return Err(Error::dim("tensor", format!("zero extent in shape {shape:?}")));
        }
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::dim(
                "tensor",
                format!("shape {shape:?} holds {n} values but data has {}", data.len()),
            ));
        }
        Ok(Tensor { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::full(shape, 0.0)
    }

    pub fn full(shape: &[usize], value: f32) -> Self {
        let n = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: vec![value; n],
        }
    }

    pub fn scalar(value: f32) -> Self {
        Tensor {
            shape: vec![1],
            data: vec![value],
        }
    }

    pub fn from_fn(shape: &[usize], mut f: impl FnMut(usize) -> f32) -> Self {
        let n: usize = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: (0..n).map(&mut f).collect(),
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    /// Extents of a 4-D `BCHW` tensor.
    pub fn dims4(&self) -> Result<(usize, usize, usize, usize)> {
        match self.shape[..] {
            [b, c, h, w] => Ok((b, c, h, w)),
            _ => Err(Error::dim(
                "dims4",
                format!("expected a 4-D (batch, channel, height, width) tensor, got {:?}", self.shape),
            )),
        }
    }

    pub fn reshape(self, shape: Vec<usize>) -> Result<Self> {
        Tensor::new(shape, self.data)
    }

    /// Concatenate 4-D tensors along the batch axis.
    pub fn stack(parts: &[Tensor]) -> Result<Tensor> {
        let first = parts
            .first()
            .ok_or_else(|| Error::InvalidArgument("stack of zero tensors".into()))?;
        let (_, c, h, w) = first.dims4()?;
        let mut batch = 0;
        let mut data = Vec::with_capacity(parts.iter().map(Tensor::len).sum());
        for p in parts {
            let (b, pc, ph, pw) = p.dims4()?;
            if (pc, ph, pw) != (c, h, w) {
                return Err(Error::dim(
                    "stack",
                    format!("per-sample shape {:?} differs from {:?}", &p.shape[1..], &first.shape[1..]),
                ));
            }
            batch += b;
            data.extend_from_slice(&p.data);
        }
        Tensor::new(vec![batch, c, h, w], data)
    }

    /// Sample `index` of a 4-D tensor, as a batch of one.
    pub fn sample(&self, index: usize) -> Result<Tensor> {
        let (b, c, h, w) = self.dims4()?;
        if index >= b {
            return Err(Error::dim("sample", format!("index {index} out of batch {b}")));
        }
        let n = c * h * w;
        Ok(Tensor {
            shape: vec![1, c, h, w],
            data: self.data[index * n..(index + 1) * n].to_vec(),
        })
    }

    /// Borrow the values of sample `index` of a 4-D tensor.
    pub fn sample_slice(&self, index: usize) -> &[f32] {
        let n: usize = self.shape[1..].iter().product();
        &self.data[index * n..(index + 1) * n]
    }

    /// Gather samples along the batch axis.
    pub fn select(&self, indices: &[usize]) -> Result<Tensor> {
        let (b, c, h, w) = self.dims4()?;
        let n = c * h * w;
        let mut data = Vec::with_capacity(indices.len() * n);
        for &i in indices {
            if i >= b {
                return Err(Error::dim("select", format!("index {i} out of batch {b}")));
            }
            data.extend_from_slice(&self.data[i * n..(i + 1) * n]);
        }
        Tensor::new(vec![indices.len(), c, h, w], data)
    }

    pub fn map(&self, f: impl Fn(f32) -> f32) -> Tensor {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Tensor, f: impl Fn(f32, f32) -> f32) -> Result<Tensor> {
        self.expect_same_shape(other, "zip_map")?;
        Ok(Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    pub fn add_assign(&mut self, other: &Tensor) -> Result<()> {
        self.expect_same_shape(other, "add_assign")?;
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().map(|&v| v as f64).sum()
    }

    pub fn mean(&self) -> f64 {
        self.sum() / self.data.len() as f64
    }

    /// Inner product with `f64` accumulation.
    pub fn dot(&self, other: &Tensor) -> Result<f64> {
        self.expect_same_shape(other, "dot")?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| a as f64 * b as f64)
            .sum())
    }

    pub fn max_abs_diff(&self, other: &Tensor) -> Result<f32> {
        self.expect_same_shape(other, "max_abs_diff")?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f32::max))
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub(crate) fn expect_same_shape(&self, other: &Tensor, op: &'static str) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::dim(
                op,
                format!("shapes {:?} and {:?} differ", self.shape, other.shape),
            ));
        }
        Ok(())
    }
}
