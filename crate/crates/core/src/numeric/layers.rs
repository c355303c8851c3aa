use rand::Rng;
use serde::{Deserialize, Serialize};

use super::matrix::DenseMatrix;
use super::params::ParamSet;
use crate::error::{Error, Result};

/// `y = W·x + b` with `W` stored as `out × in`.
///
/// The same type doubles as its own gradient buffer: `grad.weight` holds
/// ∂L/∂W and `grad.bias` holds ∂L/∂b.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffineLayer {
    pub weight: DenseMatrix,
    pub bias: Vec<f64>,
}

impl AffineLayer {
    pub fn zeros(input: usize, output: usize) -> Self {
        Self {
            weight: DenseMatrix::zeros(output, input),
            bias: vec![0.0; output],
        }
    }

    /// Uniform fan-in initialization in `[-1/√in, 1/√in]` for weights and biases.
    pub fn init_uniform<R: Rng + ?Sized>(input: usize, output: usize, rng: &mut R) -> Self {
        let mut layer = Self::zeros(input, output);
        let bound = 1.0 / (input.max(1) as f64).sqrt();
        for w in layer.weight.as_mut_slice() {
            *w = rng.random_range(-bound..=bound);
        }
        for b in &mut layer.bias {
            *b = rng.random_range(-bound..=bound);
        }
        layer
    }

    pub fn from_parts(weight: DenseMatrix, bias: Vec<f64>) -> Result<Self> {
        if bias.len() != weight.rows() {
            return Err(Error::shape("AffineLayer bias", weight.rows(), bias.len()));
        }
        Ok(Self { weight, bias })
    }

    pub fn input_dim(&self) -> usize {
        self.weight.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.weight.rows()
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.output_dim()];
        self.forward_into(x, &mut out)?;
        Ok(out)
    }

    pub fn forward_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::shape("affine_forward input", self.input_dim(), x.len()));
        }
        if out.len() != self.output_dim() {
            return Err(Error::shape("affine_forward output", self.output_dim(), out.len()));
        }
        self.weight.matvec_into(x, out);
        for (o, b) in out.iter_mut().zip(&self.bias) {
            *o += b;
        }
        Ok(())
    }

    /// Accumulates `grad_out ⊗ x` and `grad_out` into `grad`, returns `Wᵀ·grad_out`.
    pub fn backward(&self, x: &[f64], grad_out: &[f64], grad: &mut AffineLayer) -> Result<Vec<f64>> {
        let mut grad_in = vec![0.0; self.input_dim()];
        self.backward_acc(x, grad_out, grad, &mut grad_in)?;
        Ok(grad_in)
    }

    /// Like [`backward`](Self::backward) but adds the input gradient into `grad_in`.
    pub fn backward_acc(
        &self,
        x: &[f64],
        grad_out: &[f64],
        grad: &mut AffineLayer,
        grad_in: &mut [f64],
    ) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::shape("affine_backward input", self.input_dim(), x.len()));
        }
        if grad_out.len() != self.output_dim() {
            return Err(Error::shape(
                "affine_backward grad_out",
                self.output_dim(),
                grad_out.len(),
            ));
        }
        if grad.weight.rows() != self.output_dim() || grad.weight.cols() != self.input_dim() {
            return Err(Error::shape(
                "affine_backward grad buffer",
                self.weight.as_slice().len(),
                grad.weight.as_slice().len(),
            ));
        }
        if grad_in.len() != self.input_dim() {
            return Err(Error::shape("affine_backward grad_in", self.input_dim(), grad_in.len()));
        }
        grad.weight.rank1_acc(grad_out, x);
        for (gb, g) in grad.bias.iter_mut().zip(grad_out) {
            *gb += g;
        }
        self.weight.matvec_t_acc(grad_out, grad_in);
        Ok(())
    }

    pub fn num_params(&self) -> usize {
        self.weight.as_slice().len() + self.bias.len()
    }
}

impl ParamSet for AffineLayer {
    fn blocks(&self) -> Vec<(String, &[f64])> {
        vec![
            ("weight".to_string(), self.weight.as_slice()),
            ("bias".to_string(), self.bias.as_slice()),
        ]
    }

    fn blocks_mut(&mut self) -> Vec<(String, &mut [f64])> {
        vec![
            ("weight".to_string(), self.weight.as_mut_slice()),
            ("bias".to_string(), self.bias.as_mut_slice()),
        ]
    }
}

/// Positions where the ReLU input was strictly positive.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ReluMask(Vec<bool>);

impl ReluMask {
    pub fn from_bits(bits: Vec<bool>) -> Self {
        Self(bits)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_set(&self, i: usize) -> bool {
        self.0[i]
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }
}

pub fn relu_forward(x: &[f64]) -> (Vec<f64>, ReluMask) {
    let mask: Vec<bool> = x.iter().map(|&v| v > 0.0).collect();
    let y = x.iter().map(|&v| if v > 0.0 { v } else { 0.0 }).collect();
    (y, ReluMask(mask))
}

/// Passes the gradient where the mask is set; the subgradient at 0 is 0.
pub fn relu_backward(mask: &ReluMask, grad_out: &[f64]) -> Vec<f64> {
    debug_assert_eq!(mask.len(), grad_out.len());
    mask.0
        .iter()
        .zip(grad_out)
        .map(|(&on, &g)| if on { g } else { 0.0 })
        .collect()
}
