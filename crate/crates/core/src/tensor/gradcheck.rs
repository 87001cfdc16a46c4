//! Central finite-difference checks of tape gradients.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Graph, Tensor, Var};
use crate::error::Result;

/// Step used by the finite-difference checks.
pub const FD_STEP: f64 = 1e-5;
/// Relative error bound for analytic vs numeric gradients.
pub const FD_TOLERANCE: f64 = 1e-4;

/// Builds the (possibly non-scalar) output of the function under test.
pub trait GradFn: Fn(&mut Graph, &[Var]) -> Result<Var> {}
impl<F: Fn(&mut Graph, &[Var]) -> Result<Var>> GradFn for F {}

/// Scalar loss `sum(f(x) * r)` with a fixed random cotangent `r` when `f` is
/// not already scalar.
fn scalarize(graph: &mut Graph, out: Var, cotangent_seed: u64) -> Result<Var> {
    let value = graph.value(out);
    if value.is_scalar() {
        return Ok(out);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cotangent_seed);
    let r = Tensor::from_fn(value.shape(), |_| rng.random_range(-1.0..1.0));
    let r = graph.constant(r);
    let prod = graph.mul(out, r)?;
    graph.sum(prod)
}

fn evaluate(inputs: &[Tensor], f: &impl GradFn, seed: u64) -> Result<f64> {
    let mut g = Graph::new();
    let vars: Vec<Var> = inputs.iter().map(|t| g.constant(t.clone())).collect();
    let out = f(&mut g, &vars)?;
    let loss = scalarize(&mut g, out, seed)?;
    Ok(g.value(loss).item())
}

/// Largest norm-wise relative error `‖analytic − numeric‖∞ / max(‖analytic‖∞, ‖numeric‖∞)`
/// over every input tensor.
pub fn max_relative_error(inputs: &[Tensor], f: impl GradFn, step: f64, seed: u64) -> Result<f64> {
    let mut g = Graph::new();
    let vars: Vec<Var> = inputs.iter().map(|t| g.param(t.clone())).collect();
    let out = f(&mut g, &vars)?;
    let loss = scalarize(&mut g, out, seed)?;
    let grads = g.backward(loss)?;

    let mut worst = 0.0f64;
    for (k, &v) in vars.iter().enumerate() {
        let analytic = grads.get_or_zero(v);
        let mut numeric = vec![0.0; analytic.numel()];
        let mut probe = inputs.to_vec();
        for (i, slot) in numeric.iter_mut().enumerate() {
            let x0 = inputs[k].data()[i];
            probe[k].data_mut()[i] = x0 + step;
            let up = evaluate(&probe, &f, seed)?;
            probe[k].data_mut()[i] = x0 - step;
            let down = evaluate(&probe, &f, seed)?;
            probe[k].data_mut()[i] = x0;
            *slot = (up - down) / (2.0 * step);
        }
        let scale = analytic
            .max_abs()
            .max(numeric.iter().fold(0.0f64, |m, x| m.max(x.abs())));
        if scale == 0.0 {
            continue;
        }
        let diff = analytic
            .data()
            .iter()
            .zip(&numeric)
            .fold(0.0f64, |m, (a, n)| m.max((a - n).abs()));
        worst = worst.max(diff / scale);
    }
    Ok(worst)
}

/// Uniform random tensor in `[lo, hi)`, rejecting values closer than `gap`
/// to zero (keeps finite differences away from kinks at the origin).
pub fn random_tensor(rng: &mut impl Rng, shape: &[usize], lo: f64, hi: f64, gap: f64) -> Tensor {
    Tensor::from_fn(shape, |_| loop {
        let x = rng.random_range(lo..hi);
        if x.abs() >= gap {
            break x;
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn detects_a_wrong_gradient() {
        // d/dx of sum(x*x) computed through mul is right; a scale-by-3 "square" is not.
        let x = vec![Tensor::new(vec![3], vec![0.3, -1.2, 2.0]).unwrap()];
        let ok = max_relative_error(&x, |g: &mut Graph, v: &[Var]| g.mul(v[0], v[0]), FD_STEP, 1).unwrap();
        assert!(ok < FD_TOLERANCE);
        // Evaluate a different function than the one differentiated by
        // switching on whether the inputs require gradients.
        let wrong = max_relative_error(
            &x,
            |g: &mut Graph, v: &[Var]| {
                if g.requires_grad(v[0]) {
                    g.scale(v[0], 3.0)
                } else {
                    g.mul(v[0], v[0])
                }
            },
            FD_STEP,
            1,
        )
        .unwrap();
        assert!(wrong > 0.1);
    }
}
