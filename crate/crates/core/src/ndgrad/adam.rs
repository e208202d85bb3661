use super::ParamStore;
use crate::{Error, Result};

/// Bias-corrected Adam.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Adam {
    pub lr: f32,
    pub beta1: f32,
    pub beta2: f32,
    pub eps: f32,
}

impl Default for Adam {
    fn default() -> Self {
        Adam::new(1e-4)
    }
}

impl Adam {
    pub fn new(lr: f32) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    /// Applies one update to every parameter. Gradients are left in place;
    /// the caller zeroes them before the next accumulation.
    pub fn step(&self, store: &mut ParamStore) -> Result<()> {
        if !(self.lr > 0.0) {
            return Err(Error::contract(format!("learning rate must be positive, got {}", self.lr)));
        }
        if let Some(p) = store.iter().find(|p| p.value.grad().is_none()) {
            return Err(Error::MissingGradient(p.name.clone()));
        }
        for p in store.iter_mut() {
            p.step_count += 1;
            let t = p.step_count as i32;
            let bc1 = (1.0 - (self.beta1 as f64).powi(t)) as f32;
            let bc2 = (1.0 - (self.beta2 as f64).powi(t)) as f32;
            let grad = p.value.grad().expect("checked above").to_vec();
            let m = p.adam_m.data_mut();
            let v = p.adam_v.data_mut();
            let theta = p.value.data_mut();
            for i in 0..grad.len() {
                let g = grad[i];
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g;
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g * g;
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                theta[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ndgrad::{Parameter, Tape, Tensor};

    fn scalar_store(v: f32) -> ParamStore {
        let mut s = ParamStore::new();
        s.add(Parameter::new("theta", Tensor::scalar(v)));
        s
    }

    #[test]
    fn first_step_matches_hand_evaluation() {
        let mut s = scalar_store(0.0);
        s.iter_mut().next().unwrap().value.accumulate_grad(&[2.0]);
        Adam::new(1e-4).step(&mut s).unwrap();
        // m_hat = 2, v_hat = 4: delta = -1e-4 * 2 / (2 + 1e-8)
        let expected = -(1e-4f64 * 2.0 / (2.0 + 1e-8)) as f32;
        let got = s.iter().next().unwrap().value.data()[0];
        assert!((got - expected).abs() <= 1e-12, "{got} vs {expected}");
        assert_eq!(s.iter().next().unwrap().step_count, 1);
    }

    #[test]
    fn zero_gradient_is_a_bitwise_no_op() {
        let mut s = scalar_store(0.123_456_7);
        s.iter_mut().next().unwrap().value.accumulate_grad(&[0.0]);
        let before = s.clone();
        Adam::new(1e-4).step(&mut s).unwrap();
        let (a, b) = (before.iter().next().unwrap(), s.iter().next().unwrap());
        assert_eq!(a.value.data()[0].to_bits(), b.value.data()[0].to_bits());
    }

    #[test]
    fn missing_gradient_is_an_error() {
        let mut s = scalar_store(1.0);
        assert!(matches!(Adam::new(1e-4).step(&mut s), Err(Error::MissingGradient(_))));
    }

    /// Plain f64 Adam on (theta - 3)^2, used as a reference for the tape version.
    fn reference_adam(steps: usize, lr: f64) -> f64 {
        let (mut theta, mut m, mut v) = (0.0f64, 0.0f64, 0.0f64);
        for t in 1..=steps {
            let g = 2.0 * (theta - 3.0);
            m = 0.9 * m + 0.1 * g;
            v = 0.999 * v + 0.001 * g * g;
            let mh = m / (1.0 - 0.9f64.powi(t as i32));
            let vh = v / (1.0 - 0.999f64.powi(t as i32));
            theta -= lr * mh / (vh.sqrt() + 1e-8);
        }
        theta
    }

    #[test]
    fn converges_on_quadratic() {
        let mut s = scalar_store(0.0);
        let id = s.ids().next().unwrap();
        let adam = Adam::new(0.1);
        for _ in 0..200 {
            s.zero_grad();
            let mut tape = Tape::new();
            let w = tape.param(&s, id);
            let d = tape.add_scalar(w, -3.0);
            let sq = tape.square(d);
            let f = tape.sum(sq);
            tape.backward(f, &mut s);
            adam.step(&mut s).unwrap();
        }
        let theta = s.get(id).value.data()[0] as f64;
        let reference = reference_adam(200, 0.1);
        assert!((theta - 3.0).abs() < 0.1, "theta = {theta}");
        assert!((theta - reference).abs() < 1e-3, "{theta} vs reference {reference}");
    }
}
