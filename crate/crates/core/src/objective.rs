//! Scalar functions on `R^d`.

use crate::error::Result;

/// A real-valued function of a point. Used for both the objective `f` and
/// surrogates `g`; only the order it induces on points matters to the
/// optimizer.
pub trait Evaluate {
    fn evaluate(&self, x: &[f64]) -> Result<f64>;
}

impl<T: Evaluate + ?Sized> Evaluate for &T {
    fn evaluate(&self, x: &[f64]) -> Result<f64> {
        (**self).evaluate(x)
    }
}

impl<T: Evaluate + ?Sized> Evaluate for alloc::boxed::Box<T> {
    fn evaluate(&self, x: &[f64]) -> Result<f64> {
        (**self).evaluate(x)
    }
}

impl<T: Evaluate + ?Sized> Evaluate for alloc::sync::Arc<T> {
    fn evaluate(&self, x: &[f64]) -> Result<f64> {
        (**self).evaluate(x)
    }
}

/// Adapts a plain closure.
#[derive(Clone, Copy, Debug)]
pub struct FnEvaluator<F>(pub F);

impl<F> Evaluate for FnEvaluator<F>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    fn evaluate(&self, x: &[f64]) -> Result<f64> {
        (self.0)(x)
    }
}

/// `-f`.
#[derive(Clone, Copy, Debug)]
pub struct Negated<E>(pub E);

impl<E: Evaluate> Evaluate for Negated<E> {
    fn evaluate(&self, x: &[f64]) -> Result<f64> {
        self.0.evaluate(x).map(|v| -v)
    }
}
