//! Adam with bias correction.

use super::params::Params;
use super::tensor::Scalar;
use super::ModelConfig;

pub struct Adam<T> {
    m: Params<T>,
    v: Params<T>,
    t: i32,
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
}

impl<T: Scalar> Adam<T> {
    pub fn new(cfg: &ModelConfig, lr: f64, beta1: f64, beta2: f64, eps: f64) -> Self {
        Adam {
            m: Params::zeros(cfg),
            v: Params::zeros(cfg),
            t: 0,
            lr,
            beta1,
            beta2,
            eps,
        }
    }

    pub fn step(&mut self, params: &mut Params<T>, grads: &Params<T>) {
        self.t += 1;
        let one = T::one();
        let b1 = T::from_f64(self.beta1);
        let b2 = T::from_f64(self.beta2);
        let corr1 = T::from_f64(1.0 - self.beta1.powi(self.t));
        let corr2 = T::from_f64(1.0 - self.beta2.powi(self.t));
        let lr = T::from_f64(self.lr);
        let eps = T::from_f64(self.eps);

        let g_arrays = grads.arrays();
        let m_arrays = self.m.arrays_mut();
        let v_arrays = self.v.arrays_mut();
        for ((((_, p_arr), (_, g_arr)), (_, m_arr)), (_, v_arr)) in params
            .arrays_mut()
            .into_iter()
            .zip(g_arrays)
            .zip(m_arrays)
            .zip(v_arrays)
        {
            for (((pv, &gv), mv), vv) in
                p_arr.iter_mut().zip(g_arr.iter()).zip(m_arr.iter_mut()).zip(v_arr.iter_mut())
            {
                *mv = b1 * *mv + (one - b1) * gv;
                *vv = b2 * *vv + (one - b2) * gv * gv;
                let m_hat = *mv / corr1;
                let v_hat = *vv / corr2;
                *pv -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
    }
}
