/// Central-difference estimate of the gradient of `f` at `x`.
pub fn finite_difference_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64], epsilon: f64) -> Vec<f64> {
    assert!(epsilon > 0.0, "epsilon must be positive");
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            probe[i] = x[i] + epsilon;
            let up = f(&probe);
            probe[i] = x[i] - epsilon;
            let down = f(&probe);
            probe[i] = x[i];
            (up - down) / (2.0 * epsilon)
        })
        .collect()
}

/// |a - b| / max(|a|, |b|, floor), so values near zero are compared absolutely.
pub fn relative_error(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}
