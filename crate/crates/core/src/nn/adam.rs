use std::collections::BTreeMap;

use ndarray::{ArrayD, Zip};

use super::{Grads, ParamStore, Scalar};

/// Adam with bias correction. Moment decays and the stabiliser default to
/// 0.9 / 0.999 / 1e-8.
#[derive(Debug, Clone)]
pub struct Adam<T> {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    m: BTreeMap<String, ArrayD<T>>,
    v: BTreeMap<String, ArrayD<T>>,
}

impl<T: Scalar> Adam<T> {
    pub fn new(lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: BTreeMap::new(),
            v: BTreeMap::new(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn step(&mut self, params: &mut ParamStore<T>, grads: &Grads<T>) {
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        let step_size = T::from_f64_lossy(self.lr / bc1);
        let (b1, b2) = (T::from_f64_lossy(self.beta1), T::from_f64_lossy(self.beta2));
        let (one, eps) = (T::one(), T::from_f64_lossy(self.eps));
        let inv_sqrt_bc2 = T::from_f64_lossy(1.0 / bc2.sqrt());
        for (name, g) in grads {
            let Some(p) = params.params.get_mut(name) else { continue };
            let m = self.m.entry(name.clone()).or_insert_with(|| ArrayD::zeros(g.raw_dim()));
            let v = self.v.entry(name.clone()).or_insert_with(|| ArrayD::zeros(g.raw_dim()));
            Zip::from(p).and(m).and(v).and(g).for_each(|p, m, v, &g| {
                *m = b1 * *m + (one - b1) * g;
                *v = b2 * *v + (one - b2) * g * g;
                *p -= step_size * *m / ((*v).sqrt() * inv_sqrt_bc2 + eps);
            });
        }
    }
}

#[cfg(test)]
mod tests {
    use ndarray::arr1;

    use super::*;

    #[test]
    fn first_step_moves_by_lr_against_gradient_sign() {
        let mut params = ParamStore::<f64>::default();
        params.params.insert("w".into(), arr1(&[1.0, -2.0, 0.5]).into_dyn());
        let mut grads = Grads::new();
        grads.insert("w".into(), arr1(&[0.3, -4.0, 0.0]).into_dyn());
        let mut adam = Adam::new(0.1);
        adam.step(&mut params, &grads);
        let w = &params.params["w"];
        assert!((w[0] - 0.9).abs() < 1e-6);
        assert!((w[1] + 1.9).abs() < 1e-6);
        assert_eq!(w[2], 0.5);
    }

    #[test]
    fn minimises_quadratic() {
        let mut params = ParamStore::<f64>::default();
        params.params.insert("w".into(), arr1(&[3.0, -5.0]).into_dyn());
        let mut adam = Adam::new(0.05);
        for _ in 0..2000 {
            let grads: Grads<f64> = [("w".to_string(), params.params["w"].mapv(|x| 2.0 * x))].into();
            adam.step(&mut params, &grads);
        }
        assert!(params.params["w"].iter().all(|x| x.abs() < 1e-2));
    }
}
