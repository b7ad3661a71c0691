use serde::{Deserialize, Serialize};

/// Adam with Nesterov momentum and the warming momentum schedule
/// `mu_t = beta1 * (1 - 0.5 * 0.96^(t * schedule_decay))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NadamParams {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub schedule_decay: f64,
}

impl Default for NadamParams {
    fn default() -> Self {
        Self { learning_rate: 0.002, beta1: 0.9, beta2: 0.999, epsilon: 1e-7, schedule_decay: 0.004 }
    }
}

#[derive(Debug, Clone)]
pub struct Nadam {
    params: NadamParams,
    m: Vec<f64>,
    v: Vec<f64>,
    step: u64,
    mu_product: f64,
}

impl Nadam {
    pub fn new(params: NadamParams, size: usize) -> Self {
        Self { params, m: vec![0.0; size], v: vec![0.0; size], step: 0, mu_product: 1.0 }
    }

    fn mu(&self, t: u64) -> f64 {
        self.params.beta1 * (1.0 - 0.5 * 0.96_f64.powf(t as f64 * self.params.schedule_decay))
    }

    pub fn step(&mut self, weights: &mut [f64], grad: &[f64]) {
        debug_assert_eq!(weights.len(), grad.len());
        self.step += 1;
        let t = self.step;
        let p = self.params;
        let mu_t = self.mu(t);
        let mu_next = self.mu(t + 1);
        self.mu_product *= mu_t;
        let prod_t = self.mu_product;
        let prod_next = prod_t * mu_next;
        let v_bias = 1.0 - p.beta2.powf(t as f64);
        for i in 0..weights.len() {
            let g = grad[i];
            self.m[i] = p.beta1 * self.m[i] + (1.0 - p.beta1) * g;
            self.v[i] = p.beta2 * self.v[i] + (1.0 - p.beta2) * g * g;
            let g_hat = g / (1.0 - prod_t);
            let m_hat = self.m[i] / (1.0 - prod_next);
            let v_hat = self.v[i] / v_bias;
            let m_bar = (1.0 - mu_t) * g_hat + mu_next * m_hat;
            weights[i] -= p.learning_rate * m_bar / (v_hat.sqrt() + p.epsilon);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_matches_hand_computation() {
        let p = NadamParams::default();
        let mut opt = Nadam::new(p, 1);
        let mut w = [1.0];
        opt.step(&mut w, &[0.5]);
        let mu1 = 0.9 * (1.0 - 0.5 * 0.96_f64.powf(0.004));
        let mu2 = 0.9 * (1.0 - 0.5 * 0.96_f64.powf(0.008));
        let m = 0.1 * 0.5;
        let v: f64 = 0.001 * 0.25;
        let g_hat = 0.5 / (1.0 - mu1);
        let m_hat = m / (1.0 - mu1 * mu2);
        let v_hat = v / (1.0 - 0.999);
        let m_bar = (1.0 - mu1) * g_hat + mu2 * m_hat;
        let expected = 1.0 - 0.002 * m_bar / (v_hat.sqrt() + 1e-7);
        assert!((w[0] - expected).abs() < 1e-15);
    }

    #[test]
    fn minimises_a_quadratic() {
        let mut opt = Nadam::new(NadamParams { learning_rate: 0.05, ..Default::default() }, 2);
        let mut w = [3.0, -2.0];
        for _ in 0..2000 {
            let g = [2.0 * (w[0] - 1.0), 2.0 * (w[1] + 0.5)];
            opt.step(&mut w, &g);
        }
        assert!((w[0] - 1.0).abs() < 1e-3);
        assert!((w[1] + 0.5).abs() < 1e-3);
    }
}
