//! Reverse-mode differentiation over a linear record of executed operations.
//!
//! A [`GradTape`] borrows parameter tensors for the duration of one forward
//! and backward pass. [`GradTape::backward`] walks the record in reverse and
//! returns one accumulated gradient per parameter id.

use std::borrow::Cow;
use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::kernels::{self, ConvGeom};
use crate::tensor::Tensor;

/// Handle to a value recorded on a tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Input,
    Param(usize),
    Conv2d {
        input: Var,
        kernels: Var,
        bias: Var,
        geom: ConvGeom,
    },
    ConvTranspose2d {
        input: Var,
        kernels: Var,
        bias: Var,
        geom: ConvGeom,
        output_padding: usize,
    },
    Relu(Var),
    Sigmoid(Var),
    Mse {
        pred: Var,
        target: Var,
        scale: f64,
    },
}

struct Node<'p> {
    value: Cow<'p, Tensor>,
    op: Op,
    needs_grad: bool,
}

#[derive(Default)]
pub struct GradTape<'p> {
    nodes: Vec<Node<'p>>,
    scalars: BTreeMap<usize, f64>,
    differentiated: bool,
}

/// Accumulated `∂loss/∂p`, keyed by parameter id.
#[derive(Debug, Clone, Default)]
pub struct Gradients {
    by_param: BTreeMap<usize, Tensor>,
}

impl Gradients {
    pub fn get(&self, param: usize) -> Option<&Tensor> {
        self.by_param.get(&param)
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &Tensor)> {
        self.by_param.iter().map(|(&k, v)| (k, v))
    }

    pub fn len(&self) -> usize {
        self.by_param.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_param.is_empty()
    }

    /// Set the gradient of `param`, replacing any previous value.
    pub fn insert(&mut self, param: usize, grad: Tensor) {
        self.by_param.insert(param, grad);
    }

    /// Add every gradient of `other` into `self`.
    pub fn merge(&mut self, other: Gradients) -> Result<()> {
        for (id, g) in other.by_param {
            self.accumulate(id, g)?;
        }
        Ok(())
    }

    fn accumulate(&mut self, param: usize, grad: Tensor) -> Result<()> {
        match self.by_param.get_mut(&param) {
            Some(acc) => acc.add_assign(&grad),
            None => {
                self.by_param.insert(param, grad);
                Ok(())
            }
        }
    }
}

impl<'p> GradTape<'p> {
    pub fn new() -> Self {
        Self::default()
    }

    /// Drop the record so the tape can be reused for a fresh pass.
    pub fn reset(&mut self) {
        self.nodes.clear();
        self.scalars.clear();
        self.differentiated = false;
    }

    fn push(&mut self, value: Cow<'p, Tensor>, op: Op, needs_grad: bool) -> Var {
        self.nodes.push(Node { value, op, needs_grad });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].needs_grad)
    }

    pub fn value(&self, var: Var) -> &Tensor {
        &self.nodes[var.0].value
    }

    /// Full-precision value of a loss node.
    pub fn scalar(&self, var: Var) -> Option<f64> {
        self.scalars.get(&var.0).copied()
    }

    pub fn input(&mut self, value: Tensor) -> Var {
        self.push(Cow::Owned(value), Op::Input, false)
    }

    pub fn input_ref(&mut self, value: &'p Tensor) -> Var {
        self.push(Cow::Borrowed(value), Op::Input, false)
    }

    /// Record a learnable tensor. Recording the same id twice is allowed; the
    /// contributions of both uses are summed in the gradient.
    pub fn param(&mut self, id: usize, value: &'p Tensor) -> Var {
        self.push(Cow::Borrowed(value), Op::Param(id), true)
    }

    pub fn conv2d(&mut self, input: Var, kernels: Var, bias: Var, geom: ConvGeom) -> Result<Var> {
        let out = kernels::conv2d(self.value(input), self.value(kernels), self.value(bias), geom)?;
        let needs = self.needs(&[input, kernels, bias]);
        Ok(self.push(
            Cow::Owned(out),
            Op::Conv2d {
                input,
                kernels,
                bias,
                geom,
            },
            needs,
        ))
    }

    pub fn conv_transpose2d(
        &mut self,
        input: Var,
        kernels: Var,
        bias: Var,
        geom: ConvGeom,
        output_padding: usize,
    ) -> Result<Var> {
        let out = kernels::conv_transpose2d(
            self.value(input),
            self.value(kernels),
            self.value(bias),
            geom,
            output_padding,
        )?;
        let needs = self.needs(&[input, kernels, bias]);
        Ok(self.push(
            Cow::Owned(out),
            Op::ConvTranspose2d {
                input,
                kernels,
                bias,
                geom,
                output_padding,
            },
            needs,
        ))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let out = kernels::relu(self.value(x));
        let needs = self.needs(&[x]);
        self.push(Cow::Owned(out), Op::Relu(x), needs)
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let out = kernels::sigmoid(self.value(x));
        let needs = self.needs(&[x]);
        self.push(Cow::Owned(out), Op::Sigmoid(x), needs)
    }

    /// `scale · mean((pred − target)²)` as a scalar node.
    pub fn mse(&mut self, pred: Var, target: Var, scale: f64) -> Result<Var> {
        let loss = scale * kernels::mse_loss(self.value(pred), self.value(target))?;
        let needs = self.needs(&[pred, target]);
        let var = self.push(
            Cow::Owned(Tensor::scalar(loss as f32)),
            Op::Mse { pred, target, scale },
            needs,
        );
        self.scalars.insert(var.0, loss);
        Ok(var)
    }

    /// Propagate `∂loss/∂·` back through the record.
    ///
    /// Fails with [`Error::BackwardTwice`] if called again before [`reset`].
    ///
    /// [`reset`]: GradTape::reset
    pub fn backward(&mut self, loss: Var) -> Result<Gradients> {
        if self.differentiated {
            return Err(Error::BackwardTwice);
        }
        if self.value(loss).len() != 1 {
            return Err(Error::dim(
                "backward",
                format!("loss must be a scalar, got shape {:?}", self.value(loss).shape()),
            ));
        }
        self.differentiated = true;

        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::full(self.value(loss).shape(), 1.0));
        let mut out = Gradients::default();

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            if !node.needs_grad {
                continue;
            }
            let send = |var: Var, grad: Tensor, grads: &mut Vec<Option<Tensor>>| -> Result<()> {
                if !self.nodes[var.0].needs_grad {
                    return Ok(());
                }
                match &mut grads[var.0] {
                    Some(acc) => acc.add_assign(&grad),
                    slot @ None => {
                        *slot = Some(grad);
                        Ok(())
                    }
                }
            };
            match node.op {
                Op::Input => {}
                Op::Param(id) => out.accumulate(id, g)?,
                Op::Conv2d {
                    input,
                    kernels,
                    bias,
                    geom,
                } => {
                    let cg = kernels::conv2d_backward(self.value(input), self.value(kernels), &g, geom)?;
                    send(input, cg.input, &mut grads)?;
                    send(kernels, cg.kernels, &mut grads)?;
                    send(bias, cg.bias, &mut grads)?;
                }
                Op::ConvTranspose2d {
                    input,
                    kernels,
                    bias,
                    geom,
                    output_padding,
                } => {
                    let cg = kernels::conv_transpose2d_backward(
                        self.value(input),
                        self.value(kernels),
                        &g,
                        geom,
                        output_padding,
                    )?;
                    send(input, cg.input, &mut grads)?;
                    send(kernels, cg.kernels, &mut grads)?;
                    send(bias, cg.bias, &mut grads)?;
                }
                Op::Relu(x) => {
                    let gx = kernels::relu_backward(&node.value, &g)?;
                    send(x, gx, &mut grads)?;
                }
                Op::Sigmoid(x) => {
                    let gx = kernels::sigmoid_backward(&node.value, &g)?;
                    send(x, gx, &mut grads)?;
                }
                Op::Mse { pred, target, scale } => {
                    let upstream = g.data()[0] as f64;
                    let (p, t) = (self.value(pred), self.value(target));
                    let gp = kernels::mse_loss_backward(p, t, scale * upstream)?;
                    if self.nodes[target.0].needs_grad {
                        send(target, gp.map(|v| -v), &mut grads)?;
                    }
                    send(pred, gp, &mut grads)?;
                }
            }
        }
        Ok(out)
    }
}
