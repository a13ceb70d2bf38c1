use crate::model::{GradientBundle, ParameterStore, RowGrads};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// First and second moments for every parameter tensor, in
/// [`ParameterStore::tensors`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(p: &ParameterStore) -> Self {
        let zeros: Vec<Vec<f64>> = p.tensors().iter().map(|(_, t)| vec![0.0; t.len()]).collect();
        AdamState {
            step: 0,
            beta1: ADAM_BETA1,
            beta2: ADAM_BETA2,
            eps: ADAM_EPS,
            first: zeros.clone(),
            second: zeros,
        }
    }

    pub fn first_moment(&self, tensor: usize) -> &[f64] {
        &self.first[tensor]
    }

    pub fn second_moment(&self, tensor: usize) -> &[f64] {
        &self.second[tensor]
    }
}

struct Step {
    beta1: f64,
    beta2: f64,
    eps: f64,
    lr_corrected: f64,
    bias2: f64,
}

impl Step {
    #[inline]
    fn apply(&self, x: &mut [f64], g: &[f64], m: &mut [f64], v: &mut [f64]) {
        for i in 0..x.len() {
            m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g[i];
            v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g[i] * g[i];
            let v_hat = v[i] / self.bias2;
            x[i] -= self.lr_corrected * m[i] / (v_hat.sqrt() + self.eps);
        }
    }
}

/// One Adam update with bias correction. Embedding rows that received no
/// gradient keep both their values and their moments.
pub fn adam_step(p: &mut ParameterStore, state: &mut AdamState, grads: &GradientBundle, lr: f64) {
    state.step += 1;
    let t = state.step as i32;
    let bias1 = 1.0 - state.beta1.powi(t);
    let step = Step {
        beta1: state.beta1,
        beta2: state.beta2,
        eps: state.eps,
        lr_corrected: lr / bias1,
        bias2: 1.0 - state.beta2.powi(t),
    };
    let d = p.dim();
    let sparse: [&RowGrads; 3] = [&grads.entity, &grads.concept, &grads.relation];
    let dense = grads.tensors();
    for (k, (_, x)) in p.tensors_mut().into_iter().enumerate() {
        let (m, v) = (&mut state.first[k], &mut state.second[k]);
        if k < 3 {
            for (row, g) in sparse[k].touched_rows() {
                let r = row * d..(row + 1) * d;
                step.apply(&mut x[r.clone()], g, &mut m[r.clone()], &mut v[r]);
            }
        } else {
            step.apply(x, dense[k].1, m, v);
        }
    }
}
