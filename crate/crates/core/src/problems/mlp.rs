//! Small fully connected network with hand-written backpropagation.
//!
//! Parameters live in one flat vector so the network can be optimized by
//! either gradient methods or ES. Layer `l` occupies its weight matrix
//! (`out × in`, column-major) followed by its bias vector.

use nalgebra::DMatrixView;
use rand::Rng;

use crate::{Matrix, Vector};

use super::ProblemError;

/// Weights start uniform on `±INIT_SCALE / √fan_in`; biases start at zero.
pub const INIT_SCALE: f64 = 1.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OutputTransform {
    Identity,
    /// `ln(1 + eᶻ)`, keeps the output positive.
    Softplus,
}

pub fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Inverse of [`softplus`] for positive arguments.
pub fn softplus_inverse(y: f64) -> f64 {
    y + (-(-y).exp_m1()).ln()
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// ReLU on every hidden layer, `output` on the last one.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    sizes: Vec<usize>,
    output: OutputTransform,
    params: Vector,
}

/// Gradients of a scalar loss with respect to parameters and inputs.
#[derive(Clone, Debug, PartialEq)]
pub struct MlpGradients {
    pub params: Vector,
    pub input: Matrix,
}

struct Trace {
    /// Layer inputs; `inputs[0]` is the network input.
    inputs: Vec<Matrix>,
    /// Pre-activations of every layer.
    pre: Vec<Matrix>,
}

impl Mlp {
    /// `sizes = [input, hidden..., output]`.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], output: OutputTransform, rng: &mut R) -> Self {
        assert!(sizes.len() >= 2 && sizes.iter().all(|&s| s > 0), "invalid layer sizes");
        let mut net = Self {
            sizes: sizes.to_vec(),
            output,
            params: Vector::zeros(Self::count_params(sizes)),
        };
        let mut offset = 0;
        for w in sizes.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let bound = INIT_SCALE / (fan_in as f64).sqrt();
            for i in 0..fan_in * fan_out {
                net.params[offset + i] = rng.random_range(-bound..bound);
            }
            offset += fan_in * fan_out + fan_out;
        }
        net
    }

    pub fn zeros(sizes: &[usize], output: OutputTransform) -> Self {
        Self {
            sizes: sizes.to_vec(),
            output,
            params: Vector::zeros(Self::count_params(sizes)),
        }
    }

    fn count_params(sizes: &[usize]) -> usize {
        sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &Vector {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut Vector {
        &mut self.params
    }

    pub fn set_params(&mut self, params: Vector) -> Result<(), ProblemError> {
        self.check_params(&params)?;
        self.params = params;
        Ok(())
    }

    /// Bias of the final layer.
    pub fn output_bias_mut(&mut self) -> &mut [f64] {
        let out = self.output_dim();
        let len = self.params.len();
        &mut self.params.as_mut_slice()[len - out..]
    }

    fn check_params(&self, params: &Vector) -> Result<(), ProblemError> {
        if params.len() != self.params.len() {
            return Err(ProblemError::DimensionMismatch {
                expected: self.params.len(),
                actual: params.len(),
            });
        }
        Ok(())
    }

    fn layer<'a>(&self, params: &'a Vector, index: usize) -> (DMatrixView<'a, f64>, &'a [f64]) {
        let offset: usize = self.sizes.windows(2).take(index).map(|w| w[0] * w[1] + w[1]).sum();
        let (fan_in, fan_out) = (self.sizes[index], self.sizes[index + 1]);
        let slice = params.as_slice();
        let weights = DMatrixView::from_slice(&slice[offset..offset + fan_in * fan_out], fan_out, fan_in);
        let bias = &slice[offset + fan_in * fan_out..offset + fan_in * fan_out + fan_out];
        (weights, bias)
    }

    fn trace(&self, params: &Vector, inputs: &Matrix) -> Trace {
        let layers = self.sizes.len() - 1;
        let mut trace = Trace {
            inputs: Vec::with_capacity(layers),
            pre: Vec::with_capacity(layers),
        };
        let mut current = inputs.clone();
        for l in 0..layers {
            let (w, b) = self.layer(params, l);
            let mut z = w * &current;
            for mut col in z.column_iter_mut() {
                for (v, bias) in col.iter_mut().zip(b) {
                    *v += bias;
                }
            }
            let next = if l + 1 < layers {
                z.map(|v| v.max(0.0))
            } else {
                match self.output {
                    OutputTransform::Identity => z.clone(),
                    OutputTransform::Softplus => z.map(softplus),
                }
            };
            trace.inputs.push(current);
            trace.pre.push(z);
            current = next;
        }
        trace.inputs.push(current);
        trace
    }

    fn check_inputs(&self, inputs: &Matrix) -> Result<(), ProblemError> {
        if inputs.nrows() != self.input_dim() {
            return Err(ProblemError::DimensionMismatch {
                expected: self.input_dim(),
                actual: inputs.nrows(),
            });
        }
        Ok(())
    }

    /// Outputs for a batch of inputs stored as columns.
    pub fn forward_batch_with(&self, params: &Vector, inputs: &Matrix) -> Result<Matrix, ProblemError> {
        self.check_params(params)?;
        self.check_inputs(inputs)?;
        Ok(self.trace(params, inputs).inputs.pop().unwrap())
    }

    pub fn forward_batch(&self, inputs: &Matrix) -> Result<Matrix, ProblemError> {
        self.forward_batch_with(&self.params, inputs)
    }

    pub fn forward_with(&self, params: &Vector, input: &Vector) -> Result<Vector, ProblemError> {
        let out = self.forward_batch_with(params, &Matrix::from_column_slice(input.len(), 1, input.as_slice()))?;
        Ok(out.column(0).into_owned())
    }

    pub fn forward(&self, input: &Vector) -> Result<Vector, ProblemError> {
        self.forward_with(&self.params, input)
    }

    /// Backpropagates `output_grads` (the loss gradient with respect to the
    /// transformed outputs, one column per input). Parameter gradients are
    /// summed over the batch; input gradients are returned per column.
    pub fn backward_batch_with(
        &self,
        params: &Vector,
        inputs: &Matrix,
        output_grads: &Matrix,
    ) -> Result<MlpGradients, ProblemError> {
        self.check_params(params)?;
        self.check_inputs(inputs)?;
        if output_grads.nrows() != self.output_dim() || output_grads.ncols() != inputs.ncols() {
            return Err(ProblemError::DimensionMismatch {
                expected: self.output_dim() * inputs.ncols(),
                actual: output_grads.len(),
            });
        }
        let trace = self.trace(params, inputs);
        let layers = self.sizes.len() - 1;
        let mut grads = Vector::zeros(params.len());

        let last = &trace.pre[layers - 1];
        let mut delta = match self.output {
            OutputTransform::Identity => output_grads.clone(),
            OutputTransform::Softplus => output_grads.zip_map(last, |g, z| g * sigmoid(z)),
        };
        let mut offset = params.len();
        for l in (0..layers).rev() {
            let (fan_in, fan_out) = (self.sizes[l], self.sizes[l + 1]);
            offset -= fan_in * fan_out + fan_out;
            let dw = &delta * trace.inputs[l].transpose();
            grads.as_mut_slice()[offset..offset + fan_in * fan_out].copy_from_slice(dw.as_slice());
            for (j, row) in delta.row_iter().enumerate() {
                grads[offset + fan_in * fan_out + j] = row.sum();
            }
            let (w, _) = self.layer(params, l);
            let mut back = w.transpose() * &delta;
            if l > 0 {
                back.zip_apply(&trace.pre[l - 1], |d, z| {
                    if z <= 0.0 {
                        *d = 0.0;
                    }
                });
            }
            delta = back;
        }
        Ok(MlpGradients {
            params: grads,
            input: delta,
        })
    }

    /// Single-input backward pass: `(∂L/∂params, ∂L/∂input)`.
    pub fn backward_with(
        &self,
        params: &Vector,
        input: &Vector,
        output_grad: &Vector,
    ) -> Result<(Vector, Vector), ProblemError> {
        let g = self.backward_batch_with(
            params,
            &Matrix::from_column_slice(input.len(), 1, input.as_slice()),
            &Matrix::from_column_slice(output_grad.len(), 1, output_grad.as_slice()),
        )?;
        Ok((g.params, g.input.column(0).into_owned()))
    }

    pub fn backward(&self, input: &Vector, output_grad: &Vector) -> Result<(Vector, Vector), ProblemError> {
        self.backward_with(&self.params, input, output_grad)
    }
}
