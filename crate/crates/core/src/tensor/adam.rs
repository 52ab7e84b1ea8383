use super::Tensor;
use crate::error::{Error, Result};

/// Per-parameter Adam moments.
#[derive(Clone, Debug)]
pub struct AdamState {
    pub first_moment: Vec<Vec<f64>>,
    pub second_moment: Vec<Vec<f64>>,
    pub step_count: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    pub fn new(params: &[Tensor], beta1: f64, beta2: f64, epsilon: f64) -> Self {
        Self {
            first_moment: params.iter().map(|p| vec![0.0; p.numel()]).collect(),
            second_moment: params.iter().map(|p| vec![0.0; p.numel()]).collect(),
            step_count: 0,
            beta1,
            beta2,
            epsilon,
        }
    }

    /// `beta = (0.9, 0.999)`, `eps = 1e-8`.
    pub fn with_defaults(params: &[Tensor]) -> Self {
        Self::new(params, 0.9, 0.999, 1e-8)
    }
}

/// One bias-corrected Adam update. Gradients are left in place; the caller
/// resets them. Nothing is modified unless every parameter has a gradient.
pub fn adam_step(params: &[Tensor], state: &mut AdamState, learning_rate: f64) -> Result<()> {
    if params.len() != state.first_moment.len() {
        return Err(Error::InvalidArgument(format!(
            "optimizer state tracks {} parameters, got {}",
            state.first_moment.len(),
            params.len()
        )));
    }
    for (i, p) in params.iter().enumerate() {
        if p.grad_data().is_none() {
            return Err(Error::Autograd(format!("parameter {i} (shape {:?}) has no gradient", p.shape())));
        }
        if state.first_moment[i].len() != p.numel() {
            return Err(Error::Shape(format!("optimizer moment {i} does not match parameter shape {:?}", p.shape())));
        }
    }
    state.step_count += 1;
    let t = state.step_count as i32;
    let (b1, b2, eps) = (state.beta1, state.beta2, state.epsilon);
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);
    for (i, p) in params.iter().enumerate() {
        let grad = p.grad_data();
        let g = grad.as_ref().expect("checked above");
        let m = &mut state.first_moment[i];
        let v = &mut state.second_moment[i];
        let mut data = p.data_mut();
        for j in 0..g.len() {
            m[j] = b1 * m[j] + (1.0 - b1) * g[j];
            v[j] = b2 * v[j] + (1.0 - b2) * g[j] * g[j];
            let m_hat = m[j] / c1;
            let v_hat = v[j] / c2;
            data[j] -= learning_rate * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn param_with_grad(v: f64, g: f64) -> Tensor {
        let p = Tensor::parameter(vec![v], &[1]).unwrap();
        p.mul_scalar(g).sum().backward().unwrap();
        p
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let p = param_with_grad(1.5, 0.0);
        let mut st = AdamState::with_defaults(std::slice::from_ref(&p));
        adam_step(std::slice::from_ref(&p), &mut st, 0.002).unwrap();
        assert_eq!(p.item(), 1.5);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let p = param_with_grad(0.0, 0.5);
        let mut st = AdamState::with_defaults(std::slice::from_ref(&p));
        adam_step(std::slice::from_ref(&p), &mut st, 0.002).unwrap();
        // m_hat = g, v_hat = g^2 -> step = lr * g / (|g| + eps)
        let expected = -0.002 * 0.5 / (0.5 + 1e-8);
        assert!((p.item() - expected).abs() < 1e-15);
        assert_eq!(p.grad().unwrap().item(), 0.5);
    }

    #[test]
    fn second_moment_closed_form_after_two_steps() {
        let g = 0.5;
        let p = param_with_grad(0.0, g);
        let mut st = AdamState::with_defaults(std::slice::from_ref(&p));
        adam_step(std::slice::from_ref(&p), &mut st, 0.002).unwrap();
        adam_step(std::slice::from_ref(&p), &mut st, 0.002).unwrap();
        assert_eq!(st.step_count, 2);
        let b2: f64 = 0.999;
        let want = (1.0 - b2) * g * g * (1.0 + b2);
        assert!((st.second_moment[0][0] - want).abs() < 1e-18);
        let b1: f64 = 0.9;
        assert!((st.first_moment[0][0] - (1.0 - b1) * g * (1.0 + b1)).abs() < 1e-15);
    }

    #[test]
    fn missing_grad_rejected_without_side_effects() {
        let a = param_with_grad(1.0, 1.0);
        let b = Tensor::parameter(vec![2.0], &[1]).unwrap();
        let params = vec![a.clone(), b];
        let mut st = AdamState::with_defaults(&params);
        assert!(adam_step(&params, &mut st, 0.1).is_err());
        assert_eq!(a.item(), 1.0);
        assert_eq!(st.step_count, 0);
    }
}
