//! Reverse-mode differentiation over dense `f64` tensors.
//!
//! A [`Tape`] records every primitive executed on it; [`Tape::backward`]
//! walks the record in reverse once and returns the adjoint of every node
//! that depends on a trainable leaf. Tapes are single-owner and cheap to
//! build, so data parallelism means one tape per sample.

mod gradcheck;
mod optim;
mod tape;

pub use gradcheck::{central_difference, grad_check};
pub use optim::{Adam, AdamConfig, PlateauScheduler};
pub use tape::{Gradients, Tape, Var, BCE_CLAMP, IDW_EXACT_HIT};
pub(crate) use tape::{bce_term, bce_value as tape_bce};

use serde::{Deserialize, Serialize};

use crate::error::{shape_err, Result};

/// Row-major dense tensor. A scalar has an empty shape and one value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(shape_err(
                "Tensor::new",
                format!("shape {shape:?} needs {expected} values, got {}", data.len()),
            ));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Self {
            shape,
            data: vec![0.0; n],
        }
    }

    pub fn scalar(value: f64) -> Self {
        Self {
            shape: Vec::new(),
            data: vec![value],
        }
    }

    pub fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        Self::new(vec![rows, cols], data)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// `(rows, cols)` of a 2-D tensor.
    pub fn dims2(&self) -> Option<(usize, usize)> {
        match self.shape.as_slice() {
            [r, c] => Some((*r, *c)),
            _ => None,
        }
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let (_, c) = self.dims2().expect("row() on a 2-D tensor");
        &self.data[i * c..(i + 1) * c]
    }

    pub fn item(&self) -> f64 {
        self.data[0]
    }
}
