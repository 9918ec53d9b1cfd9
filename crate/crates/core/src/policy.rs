//! Markov feedback controls `(t, x) ↦ a`.

/// A feedback control. Implementors must be cheap to call and thread-safe;
/// simulators call them once per path and time step.
pub trait FeedbackPolicy: Sync {
    fn control(&self, t: f64, x: f64) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantPolicy(pub f64);

impl FeedbackPolicy for ConstantPolicy {
    fn control(&self, _t: f64, _x: f64) -> f64 {
        self.0
    }
}

/// Wraps a closure as a policy.
pub struct FnPolicy<F>(pub F);

impl<F> FeedbackPolicy for FnPolicy<F>
where
    F: Fn(f64, f64) -> f64 + Sync,
{
    fn control(&self, t: f64, x: f64) -> f64 {
        (self.0)(t, x)
    }
}

impl<P: FeedbackPolicy + ?Sized> FeedbackPolicy for &P {
    fn control(&self, t: f64, x: f64) -> f64 {
        (**self).control(t, x)
    }
}
