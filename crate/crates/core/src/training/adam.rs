//! Adam optimizer state, aligned with a network's canonical parameter
//! order.

/// Second-moment decay and denominator epsilon (the values the cited
/// training procedure uses; beta1 and the learning rate come from
/// config).
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub t: u64,
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(sizes: &[usize]) -> Self {
        Self {
            t: 0,
            m: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            v: sizes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    /// One update over `(param, grad)` pairs in canonical order. Each
    /// gradient is multiplied by `grad_scale` first (batch averaging).
    pub fn step(
        &mut self,
        lr: f64,
        beta1: f64,
        grad_scale: f64,
        pairs: crate::networks::layers::ParamGradPairs<'_>,
    ) {
        assert_eq!(pairs.len(), self.m.len(), "optimizer/parameter mismatch");
        self.t += 1;
        let bc1 = 1.0 - beta1.powi(self.t as i32);
        let bc2 = 1.0 - ADAM_BETA2.powi(self.t as i32);
        for (idx, (w, g)) in pairs.into_iter().enumerate() {
            let m = &mut self.m[idx];
            let v = &mut self.v[idx];
            for i in 0..w.len() {
                let gi = g[i] * grad_scale;
                m[i] = beta1 * m[i] + (1.0 - beta1) * gi;
                v[i] = ADAM_BETA2 * v[i] + (1.0 - ADAM_BETA2) * gi * gi;
                let mhat = m[i] / bc1;
                let vhat = v[i] / bc2;
                w[i] -= lr * mhat / (vhat.sqrt() + ADAM_EPS);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_learning_rate() {
        // With bias correction, the first Adam step has magnitude ~lr.
        let mut w = vec![1.0];
        let g = vec![0.5];
        let mut opt = AdamState::new(&[1]);
        opt.step(0.01, 0.5, 1.0, vec![(&mut w, &g)]);
        assert!((w[0] - (1.0 - 0.01)).abs() < 1e-6, "w = {}", w[0]);
    }

    #[test]
    fn descends_a_quadratic() {
        // minimize (w - 3)^2
        let mut w = vec![0.0];
        let mut opt = AdamState::new(&[1]);
        for _ in 0..2000 {
            let g = vec![2.0 * (w[0] - 3.0)];
            opt.step(0.05, 0.9, 1.0, vec![(&mut w, &g)]);
        }
        assert!((w[0] - 3.0).abs() < 1e-2, "w = {}", w[0]);
    }
}
