/// Huber penalty of a single residual.
pub fn huber(r: f64, gamma: f64) -> f64 {
    let a = r.abs();
    if a <= gamma {
        0.5 * r * r
    } else {
        gamma * a - 0.5 * gamma * gamma
    }
}

/// Derivative of [`huber`] with respect to the residual: the residual clipped
/// to `[-gamma, gamma]`.
pub fn huber_derivative(r: f64, gamma: f64) -> f64 {
    r.clamp(-gamma, gamma)
}

/// Mean Huber penalty of `target - pred` over all components.
pub fn huber_loss(target: &[f64], pred: &[f64], gamma: f64) -> f64 {
    assert_eq!(target.len(), pred.len(), "length mismatch");
    assert!(gamma > 0.0, "gamma must be positive");
    if target.is_empty() {
        return 0.0;
    }
    let sum: f64 = target.iter().zip(pred).map(|(t, p)| huber(t - p, gamma)).sum();
    sum / target.len() as f64
}
