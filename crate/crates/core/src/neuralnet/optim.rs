use std::collections::BTreeMap;

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPS: f64 = 1e-8;

#[derive(Clone, Debug)]
pub struct Adam {
    pub lr: f64,
    pub weight_decay: f64,
    /// Shrink weights directly instead of adding `weight_decay·θ` to the gradient.
    pub decoupled: bool,
    t: u64,
    moments: BTreeMap<String, (Vec<f64>, Vec<f64>)>,
}

impl Adam {
    pub fn new(lr: f64, weight_decay: f64) -> Self {
        Adam { lr, weight_decay, decoupled: false, t: 0, moments: BTreeMap::new() }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    /// Advance the step counter; call once per mini-batch before [`Adam::update`].
    pub fn tick(&mut self) {
        self.t += 1;
    }

    pub fn update(&mut self, name: &str, theta: &mut [f64], grad: &[f64]) {
        assert!(self.t > 0, "tick before update");
        let (m, v) = self.moments.entry(name.to_string()).or_insert_with(|| (vec![0.0; theta.len()], vec![0.0; theta.len()]));
        let c1 = 1.0 - BETA1.powi(self.t as i32);
        let c2 = 1.0 - BETA2.powi(self.t as i32);
        for i in 0..theta.len() {
            let mut gi = grad[i];
            if !self.decoupled {
                gi += self.weight_decay * theta[i];
            }
            m[i] = BETA1 * m[i] + (1.0 - BETA1) * gi;
            v[i] = BETA2 * v[i] + (1.0 - BETA2) * gi * gi;
            let step = self.lr * (m[i] / c1) / ((v[i] / c2).sqrt() + EPS);
            if self.decoupled {
                theta[i] -= self.lr * self.weight_decay * theta[i];
            }
            theta[i] -= step;
        }
    }
}
