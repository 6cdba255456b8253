//! Adam optimizer with bias correction and L2-in-gradient weight decay.

use crate::scalar::Scalar;
use crate::tensor::Parameter;

/// Adam state: one pair of moment buffers per parameter, positionally aligned
/// with the parameter list handed to [`Adam::step`].
pub struct Adam<T: Scalar> {
    lr: T,
    beta1: T,
    beta2: T,
    eps: T,
    weight_decay: T,
    step: u64,
    moments: Vec<(Vec<T>, Vec<T>)>,
}

impl<T: Scalar> Adam<T> {
    /// Defaults: `beta1 = 0.9`, `beta2 = 0.999`, `eps = 1e-8`. Weight decay is
    /// added to the raw gradient before the moment update (classic Adam + L2).
    pub fn new(lr: T, weight_decay: T) -> Self {
        Adam {
            lr,
            beta1: T::from_f64(0.9),
            beta2: T::from_f64(0.999),
            eps: T::from_f64(1e-8),
            weight_decay,
            step: 0,
            moments: Vec::new(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One update over all parameters. The parameter list must be the same,
    /// in the same order, on every call.
    pub fn step(&mut self, params: &mut [&mut Parameter<T>]) {
        if self.moments.is_empty() {
            self.moments = params
                .iter()
                .map(|p| {
                    let n = p.grad().len();
                    (vec![T::zero(); n], vec![T::zero(); n])
                })
                .collect();
        }
        assert_eq!(
            self.moments.len(),
            params.len(),
            "parameter list changed between optimizer steps"
        );
        self.step += 1;
        let t = self.step as i32;
        let bc1 = T::one() - self.beta1.powi(t);
        let bc2 = T::one() - self.beta2.powi(t);
        for (p, (m, v)) in params.iter_mut().zip(self.moments.iter_mut()) {
            assert_eq!(p.grad().len(), m.len(), "parameter shape changed");
            let mut data = p.value().data().to_vec();
            for i in 0..data.len() {
                let g = p.grad()[i] + self.weight_decay * data[i];
                m[i] = self.beta1 * m[i] + (T::one() - self.beta1) * g;
                v[i] = self.beta2 * v[i] + (T::one() - self.beta2) * g * g;
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                data[i] = data[i] - self.lr * m_hat / (v_hat.sqrt() + self.eps);
            }
            p.set_data(data);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;

    #[test]
    fn zero_grad_is_a_fixed_point() {
        let mut p = Parameter::new(Tensor::new(1, 2, vec![1.5, -0.5]).unwrap());
        let mut opt = Adam::new(0.05, 0.0);
        opt.step(&mut [&mut p]);
        assert_eq!(p.value().data(), &[1.5, -0.5]);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        // theta = 1, g = 1, lr = 0.05: bias-corrected first step is ~lr
        let mut p = Parameter::new(Tensor::<f64>::scalar(1.0));
        let mut opt = Adam::new(0.05, 0.0);
        let loss = p.value().sum_all();
        let store = loss.backward().unwrap();
        p.accumulate(&store);
        opt.step(&mut [&mut p]);
        let got = p.value().data()[0];
        assert!((got - 0.95).abs() < 1e-6, "got {got}");
    }

    #[test]
    fn converges_on_quadratic() {
        // f(theta) = theta^2 from theta = 1
        let mut p = Parameter::new(Tensor::<f64>::scalar(1.0));
        let mut opt = Adam::new(0.05, 0.0);
        for _ in 0..200 {
            p.zero_grad();
            let loss = p.value().mul(p.value()).unwrap().sum_all();
            let store = loss.backward().unwrap();
            p.accumulate(&store);
            opt.step(&mut [&mut p]);
        }
        let theta = p.value().data()[0];
        assert!(theta.abs() < 1e-2, "theta {theta}");
        assert_eq!(opt.step_count(), 200);
    }

    #[test]
    fn weight_decay_pulls_toward_zero() {
        let mut p = Parameter::new(Tensor::<f64>::scalar(1.0));
        let mut opt = Adam::new(0.01, 0.1);
        for _ in 0..50 {
            p.zero_grad();
            opt.step(&mut [&mut p]); // gradient is zero; only decay acts
        }
        assert!(p.value().data()[0] < 1.0);
    }
}
