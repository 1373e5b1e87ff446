//! Central-finite-difference verification of analytic gradients.

use rand::Rng;

use super::{SeedStreams, Tensor};
use crate::error::{Error, Result};

/// Compare `analytic_grads` against central differences of `loss_fn` at
/// `samples` randomly chosen coordinates and return the worst relative
/// error |g_a - g_fd| / max(1, |g_a|, |g_fd|).
///
/// `loss_fn` must be deterministic in its inputs (re-seed any dropout masks
/// identically on every call).
pub fn finite_difference_check(
    loss_fn: &mut dyn FnMut(&[Tensor]) -> Result<f64>,
    params: &[Tensor],
    analytic_grads: &[Tensor],
    perturbation: f64,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    if !(1e-7..=1e-3).contains(&perturbation) {
        return Err(Error::invalid(format!(
            "perturbation {perturbation} outside [1e-7, 1e-3]"
        )));
    }
    if params.len() != analytic_grads.len() {
        return Err(Error::invalid("params/grads length mismatch"));
    }
    let total: usize = params.iter().map(|p| p.len()).sum();
    if total == 0 {
        return Err(Error::invalid("no parameters to check"));
    }

    let mut rng = SeedStreams::new(seed).stream("gradcheck");
    let mut work: Vec<Tensor> = params.to_vec();
    let mut worst: f64 = 0.0;

    for _ in 0..samples {
        let flat = rng.random_range(0..total);
        let (pi, ci) = locate(params, flat);

        let orig = work[pi].data()[ci];
        work[pi].data_mut()[ci] = orig + perturbation;
        let up = loss_fn(&work)?;
        work[pi].data_mut()[ci] = orig - perturbation;
        let down = loss_fn(&work)?;
        work[pi].data_mut()[ci] = orig;
        if !up.is_finite() || !down.is_finite() {
            return Err(Error::invalid("non-finite loss during finite differencing"));
        }

        let g_fd = (up - down) / (2.0 * perturbation);
        let g_a = analytic_grads[pi].data()[ci];
        let rel = (g_a - g_fd).abs() / 1.0_f64.max(g_a.abs()).max(g_fd.abs());
        worst = worst.max(rel);
    }
    Ok(worst)
}

fn locate(params: &[Tensor], mut flat: usize) -> (usize, usize) {
    for (i, p) in params.iter().enumerate() {
        if flat < p.len() {
            return (i, flat);
        }
        flat -= p.len();
    }
    unreachable!("flat index out of range");
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tape;

    #[test]
    fn quadratic_is_exact() {
        // loss = 0.5 * x^2 at x = 3: analytic gradient 3.
        let params = vec![Tensor::vector(&[3.0])];
        let grads = vec![Tensor::vector(&[3.0])];
        let mut f = |p: &[Tensor]| Ok(0.5 * p[0].data()[0] * p[0].data()[0]);
        let err = finite_difference_check(&mut f, &params, &grads, 1e-5, 10, 7).unwrap();
        assert!(err < 1e-9, "relative error {err}");
    }

    #[test]
    fn rejects_out_of_range_perturbation() {
        let params = vec![Tensor::vector(&[1.0])];
        let grads = vec![Tensor::vector(&[1.0])];
        let mut f = |_: &[Tensor]| Ok(0.0);
        assert!(finite_difference_check(&mut f, &params, &grads, 1e-2, 1, 0).is_err());
        assert!(finite_difference_check(&mut f, &params, &grads, 1e-8, 1, 0).is_err());
    }

    #[test]
    fn non_finite_loss_is_error() {
        let params = vec![Tensor::vector(&[0.0])];
        let grads = vec![Tensor::vector(&[0.0])];
        // ln goes NaN on the negative side of the central difference.
        let mut f = |p: &[Tensor]| Ok(p[0].data()[0].ln());
        assert!(finite_difference_check(&mut f, &params, &grads, 1e-5, 4, 0).is_err());
    }

    #[test]
    fn detects_corrupted_backward() {
        // Forward pass uses grad_scale(x, 2.0): values are untouched but the
        // backward pass doubles the gradient, which the check must flag.
        let x0 = Tensor::vector(&[1.3, -0.4, 0.9]);
        let w0 = Tensor::from_vec(vec![3, 1], vec![0.2, -1.1, 0.5]).unwrap();

        let build = |p: &[Tensor], corrupt: bool| -> (Tape, crate::tensor::NodeId, Vec<crate::tensor::NodeId>) {
            let mut tape = Tape::new();
            let x = tape.leaf(Tensor::from_vec(vec![1, 3], p[0].data().to_vec()).unwrap());
            let w = tape.leaf(p[1].clone());
            let xx = if corrupt { tape.grad_scale(x, 2.0) } else { x };
            let y = tape.matmul(xx, w);
            let sq = tape.matmul(y, y); // scalar [1,1] = y^2
            (tape, sq, vec![x, w])
        };

        let params = vec![x0, w0];
        for corrupt in [false, true] {
            let (mut tape, out, leaves) = build(&params, corrupt);
            let grads = tape.backward(out);
            let analytic: Vec<Tensor> = leaves
                .iter()
                .map(|&l| {
                    let g = grads.get(l);
                    Tensor::from_vec(vec![g.len()], g.data().to_vec()).unwrap()
                })
                .collect();
            let mut f = |p: &[Tensor]| {
                let (t, o, _) = build(p, corrupt);
                Ok(t.value(o).data()[0])
            };
            let err =
                finite_difference_check(&mut f, &params, &analytic, 1e-5, 20, 11).unwrap();
            if corrupt {
                assert!(err > 0.1, "corruption not detected, err = {err}");
            } else {
                assert!(err < 1e-7, "clean graph reported err = {err}");
            }
        }
    }
}
