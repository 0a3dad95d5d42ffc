//! Central finite differences, used as the independent oracle for every
//! analytic gradient in the crate.

use super::mlp::{Gradients, Mlp};
use crate::error::{Error, Result};

/// `(f(θ + h e_i) - f(θ - h e_i)) / 2h` for each coordinate of `theta`.
pub fn finite_difference(mut f: impl FnMut(&[f64]) -> f64, theta: &[f64], step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::invalid(format!("finite-difference step must be positive, got {step}")));
    }
    let mut probe = theta.to_vec();
    let mut grad = Vec::with_capacity(theta.len());
    for i in 0..theta.len() {
        let orig = probe[i];
        probe[i] = orig + step;
        let plus = f(&probe);
        probe[i] = orig - step;
        let minus = f(&probe);
        probe[i] = orig;
        if !plus.is_finite() || !minus.is_finite() {
            return Err(Error::numeric(format!("objective is non-finite around parameter {i}")));
        }
        grad.push((plus - minus) / (2.0 * step));
    }
    Ok(grad)
}

/// Finite-difference gradient of `f` with respect to every parameter of `net`.
pub fn finite_difference_gradient(
    f: impl Fn(&Mlp) -> f64,
    net: &Mlp,
    step: f64,
) -> Result<Gradients> {
    let theta = net.flat_params();
    let mut scratch = net.clone();
    let grad = finite_difference(
        |p| {
            scratch.set_flat_params(p).expect("length preserved");
            f(&scratch)
        },
        &theta,
        step,
    )?;
    Gradients::from_flat(net, &grad)
}

/// Largest elementwise relative error between two gradient vectors, where
/// entries whose absolute difference is below `abs_floor` count as exact.
pub fn max_relative_error(analytic: &[f64], numeric: &[f64], abs_floor: f64) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| {
            let diff = (a - n).abs();
            if diff <= abs_floor {
                0.0
            } else {
                diff / a.abs().max(n.abs())
            }
        })
        .fold(0.0, f64::max)
}
