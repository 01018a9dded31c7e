use alloc::vec;
use alloc::vec::Vec;

use super::{Gradients, LayeredNet};
use crate::error::check_len;
use crate::{Error, Result};

/// Whether a step follows the gradient or its negation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// Maximize (actors).
    Ascend,
    /// Minimize (critics).
    Descend,
}

/// Adam moments for one net, with bias correction.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    first: Vec<f64>,
    second: Vec<f64>,
    step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Adam {
    pub fn new(net: &LayeredNet) -> Self {
        let n = net.param_count();
        Adam {
            first: vec![0.0; n],
            second: vec![0.0; n],
            step: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// Applies one update. On error neither the net nor the moments change.
    pub fn step(
        &mut self,
        net: &mut LayeredNet,
        grads: &Gradients,
        lr: f64,
        direction: Direction,
    ) -> Result<()> {
        if !(lr > 0.0 && lr.is_finite()) {
            return Err(Error::InvalidSpec(alloc::format!(
                "learning rate {lr} must be positive"
            )));
        }
        check_len("adam moments", self.first.len(), net.param_count())?;
        if !grads.matches(net) {
            return Err(Error::Shape {
                context: "adam gradients",
                expected: net.param_count(),
                got: grads.len(),
            });
        }
        if !grads.is_finite() {
            return Err(Error::Numeric("gradient"));
        }
        self.step += 1;
        let t = self.step as f64;
        let correction1 = 1.0 - libm::pow(self.beta1, t);
        let correction2 = 1.0 - libm::pow(self.beta2, t);
        let sign = match direction {
            Direction::Ascend => -1.0,
            Direction::Descend => 1.0,
        };
        let (b1, b2, eps) = (self.beta1, self.beta2, self.eps);
        for (((p, &g), m), v) in net
            .params_mut()
            .zip(grads.values())
            .zip(self.first.iter_mut())
            .zip(self.second.iter_mut())
        {
            let g = sign * g;
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            let m_hat = *m / correction1;
            let v_hat = *v / correction2;
            *p -= lr * m_hat / (libm::sqrt(v_hat) + eps);
        }
        Ok(())
    }
}
