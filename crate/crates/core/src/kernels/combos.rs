use std::sync::Arc;

use super::PeriodicKernel;
use crate::cell::PeriodicityCell;
use crate::error::{Error, Result};
use crate::multi_index::MultiIndex;

/// The constant kernel `h ≡ c`; it is periodic and belongs to every class.
#[derive(Debug, Clone)]
pub struct ConstantKernel {
    cell: PeriodicityCell,
    value: f64,
    lambda: f64,
}

impl ConstantKernel {
    pub fn new(cell: &PeriodicityCell, value: f64, lambda: f64) -> Result<Self> {
        super::check_lambda(cell.dim(), lambda)?;
        Ok(Self {
            cell: cell.clone(),
            value,
            lambda,
        })
    }
}

impl PeriodicKernel for ConstantKernel {
    fn name(&self) -> String {
        format!("constant({})", self.value)
    }

    fn cell(&self) -> &PeriodicityCell {
        &self.cell
    }

    fn lambda(&self) -> f64 {
        self.lambda
    }

    fn value_centered(&self, _x: &[f64]) -> f64 {
        self.value
    }

    fn derivative_centered(&self, _x: &[f64], beta: &MultiIndex) -> f64 {
        if beta.is_zero() {
            self.value
        } else {
            0.0
        }
    }
}

/// `Σ c_i h_i` over kernels sharing one cell; `λ` is the largest exponent.
#[derive(Clone)]
pub struct LinearCombination {
    cell: PeriodicityCell,
    terms: Vec<(f64, Arc<dyn PeriodicKernel>)>,
}

impl LinearCombination {
    pub fn new(terms: Vec<(f64, Arc<dyn PeriodicKernel>)>) -> Result<Self> {
        let first = terms.first().ok_or(Error::InvalidParameter {
            name: "terms",
            reason: "empty combination".into(),
        })?;
        let cell = first.1.cell().clone();
        if terms.iter().any(|(_, k)| k.cell() != &cell) {
            return Err(Error::InvalidParameter {
                name: "terms",
                reason: "kernels live on different cells".into(),
            });
        }
        Ok(Self { cell, terms })
    }
}

impl PeriodicKernel for LinearCombination {
    fn name(&self) -> String {
        let parts: Vec<String> = self
            .terms
            .iter()
            .map(|(c, k)| format!("{c}*{}", k.name()))
            .collect();
        parts.join(" + ")
    }

    fn cell(&self) -> &PeriodicityCell {
        &self.cell
    }

    fn lambda(&self) -> f64 {
        self.terms
            .iter()
            .map(|(_, k)| k.lambda())
            .fold(0.0, f64::max)
    }

    fn is_differentiable(&self) -> bool {
        self.terms.iter().all(|(_, k)| k.is_differentiable())
    }

    fn truncation_error(&self) -> f64 {
        self.terms
            .iter()
            .map(|(c, k)| c.abs() * k.truncation_error())
            .sum()
    }

    fn value_centered(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(c, k)| c * k.value_centered(x))
            .sum()
    }

    fn derivative_centered(&self, x: &[f64], beta: &MultiIndex) -> f64 {
        self.terms
            .iter()
            .map(|(c, k)| c * k.derivative_centered(x, beta))
            .sum()
    }
}

/// Hides the derivatives of a kernel, leaving a class-`A⁰` member.
#[derive(Clone)]
pub struct ValueOnly<K>(pub K);

impl<K: PeriodicKernel> PeriodicKernel for ValueOnly<K> {
    fn name(&self) -> String {
        format!("value_only({})", self.0.name())
    }

    fn cell(&self) -> &PeriodicityCell {
        self.0.cell()
    }

    fn lambda(&self) -> f64 {
        self.0.lambda()
    }

    fn is_differentiable(&self) -> bool {
        false
    }

    fn truncation_error(&self) -> f64 {
        self.0.truncation_error()
    }

    fn value_centered(&self, x: &[f64]) -> f64 {
        self.0.value_centered(x)
    }

    fn derivative_centered(&self, x: &[f64], beta: &MultiIndex) -> f64 {
        if beta.is_zero() {
            self.0.value_centered(x)
        } else {
            f64::NAN
        }
    }
}
