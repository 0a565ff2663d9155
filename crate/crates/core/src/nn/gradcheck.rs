//! Finite-difference gradient oracle.
//!
//! [`finite_diff_grad`] estimates the gradient of an arbitrary scalar loss
//! over a network's parameters by central differences. It shares no code with
//! the backward pass, which is the point: everything gradient-shaped in this
//! crate is ultimately checked against it.

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::nn::activation::Activation;
use crate::nn::loss::softmax_cross_entropy;
use crate::nn::mlp::{Gradients, Mlp};
use crate::rng::SplitMix64;
use crate::scalar::Scalar;

/// Central-difference gradient estimate `(f(p + h) - f(p - h)) / 2h` for
/// every parameter of `net`.
///
/// `loss_fn` must be deterministic. Errors name the offending parameter if a
/// probe produces a non-finite loss.
pub fn finite_diff_grad<F, L>(net: &Mlp<F>, step: F, mut loss_fn: L) -> Result<Gradients<F>>
where
    F: Scalar,
    L: FnMut(&Mlp<F>) -> Result<F>,
{
    if !(step > F::zero()) || !step.is_finite() {
        return Err(Error::invalid(format!(
            "finite-difference step must be positive and finite, got {step}"
        )));
    }
    let mut probe = net.clone();
    let mut grads = Gradients::zeros_like(net);
    let two = F::from_f64_lossy(2.0);
    for index in 0..net.param_count() {
        let original = probe.param(index).expect("index in range");

        probe.set_param(index, original + step)?;
        let plus = loss_fn(&probe)?;
        probe.set_param(index, original - step)?;
        let minus = loss_fn(&probe)?;
        probe.set_param(index, original)?;

        if !plus.is_finite() || !minus.is_finite() {
            return Err(Error::NonFinite(format!(
                "finite_diff_grad probe at parameter {index}"
            )));
        }
        let estimate = (plus - minus) / (two * step);
        set_gradient_entry(&mut grads, index, estimate);
    }
    Ok(grads)
}

fn set_gradient_entry<F: Scalar>(grads: &mut Gradients<F>, flat_index: usize, value: F) {
    let mut index = flat_index;
    for layer in grads.layers_mut() {
        let w = layer.d_weight.data().len();
        if index < w {
            layer.d_weight.data_mut()[index] = value;
            return;
        }
        index -= w;
        if index < layer.d_bias.len() {
            layer.d_bias[index] = value;
            return;
        }
        index -= layer.d_bias.len();
    }
    unreachable!("flat index {flat_index} out of range");
}

/// Outcome of comparing analytic gradients against the finite-difference
/// oracle on one network instance.
#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub params_checked: usize,
    pub max_rel_error: f64,
    pub worst_param: usize,
    pub passed: bool,
}

/// Tolerances for [`check_gradients`]: relative error bound with an absolute
/// floor near zero.
#[derive(Debug, Clone, Copy)]
pub struct GradCheckTolerance {
    pub rel: f64,
    pub abs_floor: f64,
}

impl Default for GradCheckTolerance {
    fn default() -> Self {
        // Central differences with step 1e-5 in double precision.
        GradCheckTolerance {
            rel: 1e-4,
            abs_floor: 1e-7,
        }
    }
}

/// Compares two gradient sets entry by entry.
///
/// An entry passes when `|a - b| <= abs_floor` or the relative error
/// `|a - b| / max(|a|, |b|)` is at most `rel`.
pub fn compare_gradients<F: Scalar>(
    analytic: &Gradients<F>,
    numeric: &Gradients<F>,
    tolerance: GradCheckTolerance,
) -> GradCheckReport {
    let mut max_rel_error = 0.0_f64;
    let mut worst_param = 0;
    let mut passed = true;
    let mut index = 0usize;
    let consider = |a: f64, b: f64, idx: usize, max_rel: &mut f64, worst: &mut usize, ok: &mut bool| {
        let diff = (a - b).abs();
        let scale = a.abs().max(b.abs());
        let rel = if scale > 0.0 { diff / scale } else { 0.0 };
        if rel > *max_rel {
            *max_rel = rel;
            *worst = idx;
        }
        if diff > tolerance.abs_floor && rel > tolerance.rel {
            *ok = false;
        }
    };
    for (la, ln) in analytic.layers().iter().zip(numeric.layers().iter()) {
        for (&a, &b) in la.d_weight.data().iter().zip(ln.d_weight.data().iter()) {
            consider(
                a.to_f64().unwrap_or(f64::NAN),
                b.to_f64().unwrap_or(f64::NAN),
                index,
                &mut max_rel_error,
                &mut worst_param,
                &mut passed,
            );
            index += 1;
        }
        for (&a, &b) in la.d_bias.iter().zip(ln.d_bias.iter()) {
            consider(
                a.to_f64().unwrap_or(f64::NAN),
                b.to_f64().unwrap_or(f64::NAN),
                index,
                &mut max_rel_error,
                &mut worst_param,
                &mut passed,
            );
            index += 1;
        }
    }
    GradCheckReport {
        params_checked: index,
        max_rel_error,
        worst_param,
        passed,
    }
}

/// One randomized backward-vs-oracle comparison: builds a seeded network and
/// batch, runs the analytic backward pass under softmax cross-entropy, and
/// checks it against [`finite_diff_grad`].
///
/// `corrupt` perturbs one analytic gradient entry before the comparison; it
/// exists so detector sanity can be tested end to end.
pub fn check_random_instance(
    seed: u64,
    step: f64,
    tolerance: GradCheckTolerance,
    corrupt: bool,
) -> Result<GradCheckReport> {
    let mut rng = SplitMix64::derive(seed, 0xC0DE);
    // Central differences straddle the ReLU kink: wherever a pre-activation
    // lies within `step` of zero, the two-sided secant and the one-sided
    // analytic derivative legitimately disagree. Dead rows land there
    // *exactly* (biases start at zero), so such draws indict the probe, not
    // the backward pass. Redraw until every kink is safely out of reach.
    let kink_margin = step * 64.0;
    let (net, input, labels) = 'draw: {
        for _ in 0..64 {
            let n_layers = 2 + rng.next_below(2) as usize;
            let mut dims = Vec::with_capacity(n_layers + 1);
            dims.push(2 + rng.next_below(15) as usize);
            for _ in 0..n_layers {
                dims.push(2 + rng.next_below(31) as usize);
            }
            let acts: Vec<Activation> = (0..n_layers)
                .map(|i| {
                    if i == n_layers - 1 {
                        Activation::Identity
                    } else {
                        match rng.next_below(2) {
                            0 => Activation::Relu,
                            _ => Activation::Tanh,
                        }
                    }
                })
                .collect();
            let net: Mlp<f64> = Mlp::init(&dims, &acts, &mut rng)?;

            let batch = 1 + rng.next_below(4) as usize;
            let input = Matrix::from_vec(
                batch,
                dims[0],
                (0..batch * dims[0]).map(|_| rng.uniform(-1.5, 1.5)).collect(),
            )?;
            let labels: Vec<usize> = (0..batch)
                .map(|_| rng.next_below(*dims.last().unwrap() as u64) as usize)
                .collect();
            if min_relu_kink_distance(&net, &input)? > kink_margin {
                break 'draw (net, input, labels);
            }
        }
        return Err(Error::Contract(
            "gradient check could not draw a kink-free instance in 64 attempts".into(),
        ));
    };

    let (_, cache) = net.forward(&input)?;
    let (loss_val, dlogits) = softmax_cross_entropy(cache.output(), &labels)?;
    debug_assert!(loss_val.is_finite());
    let (mut analytic, _) = net.backward(&cache, &dlogits)?;

    if corrupt {
        let first = &mut analytic.layers_mut()[0];
        let v = first.d_weight.get(0, 0);
        first.d_weight.set(0, 0, v + 1.0);
    }

    let numeric = finite_diff_grad(&net, step, |candidate| {
        let (out, _) = candidate.forward(&input)?;
        let (loss, _) = softmax_cross_entropy(&out, &labels)?;
        Ok(loss)
    })?;

    Ok(compare_gradients(&analytic, &numeric, tolerance))
}

/// Smallest |pre-activation| over every ReLU unit when `input` runs through
/// `net`; infinity when no layer uses ReLU.
fn min_relu_kink_distance(net: &Mlp<f64>, input: &Matrix<f64>) -> Result<f64> {
    let mut distance = f64::INFINITY;
    let mut activation = input.clone();
    for layer in net.layers() {
        if layer.activation() == Activation::Relu {
            let weight = layer.weight();
            let bias = layer.bias();
            for row in 0..activation.rows() {
                for unit in 0..layer.out_dim() {
                    let mut z = bias[unit];
                    for k in 0..layer.in_dim() {
                        z += activation.get(row, k) * weight.get(k, unit);
                    }
                    distance = distance.min(z.abs());
                }
            }
        }
        activation = layer.forward(&activation)?;
    }
    Ok(distance)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::layer::DenseLayer;
    use crate::nn::mlp::UpdateDirection;

    fn single_param_net(value: f64) -> Mlp<f64> {
        let weight = Matrix::from_vec(1, 1, vec![value]).unwrap();
        // Bias-free single weight: treat the bias as a second parameter the
        // quadratic loss ignores.
        let layer = DenseLayer::new(weight, vec![0.0], Activation::Identity).unwrap();
        Mlp::new(vec![layer]).unwrap()
    }

    #[test]
    fn quadratic_loss_gives_analytic_derivative() {
        let net = single_param_net(3.0);
        let grads = finite_diff_grad(&net, 1e-5, |n| {
            let p = n.param(0).unwrap();
            Ok(p * p)
        })
        .unwrap();
        let g = grads.layers()[0].d_weight.get(0, 0);
        assert!((g - 6.0).abs() < 1e-6, "gradient {g}");
    }

    #[test]
    fn constant_loss_gives_zero_gradients() {
        let net = single_param_net(1.5);
        let grads = finite_diff_grad(&net, 1e-5, |_| Ok(42.0)).unwrap();
        assert!(grads.layers()[0].d_weight.data().iter().all(|&g| g == 0.0));
        assert!(grads.layers()[0].d_bias.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn nonfinite_probe_names_the_parameter() {
        let net = single_param_net(1.0);
        let err = finite_diff_grad(&net, 1e-5, |n| {
            let p = n.param(0).unwrap();
            Ok(if p > 1.0 { f64::NAN } else { p })
        })
        .unwrap_err();
        assert!(err.to_string().contains("parameter 0"), "{err}");
    }

    #[test]
    fn invalid_step_is_rejected() {
        let net = single_param_net(1.0);
        assert!(finite_diff_grad(&net, 0.0, |_| Ok(0.0)).is_err());
        assert!(finite_diff_grad(&net, -1e-5, |_| Ok(0.0)).is_err());
    }

    #[test]
    fn backward_matches_oracle_on_two_layer_tanh_net() {
        let mut rng = SplitMix64::derive(99, 1);
        let net: Mlp<f64> =
            Mlp::init(&[3, 6, 4], &[Activation::Tanh, Activation::Tanh], &mut rng).unwrap();
        let input = Matrix::from_vec(2, 3, (0..6).map(|_| rng.uniform(-1.0, 1.0)).collect()).unwrap();
        let labels = [1usize, 3];

        let (_, cache) = net.forward(&input).unwrap();
        let (_, dlogits) = softmax_cross_entropy(cache.output(), &labels).unwrap();
        let (analytic, _) = net.backward(&cache, &dlogits).unwrap();

        let numeric = finite_diff_grad(&net, 1e-5, |candidate| {
            let (out, _) = candidate.forward(&input)?;
            Ok(softmax_cross_entropy(&out, &labels)?.0)
        })
        .unwrap();

        let report = compare_gradients(&analytic, &numeric, GradCheckTolerance::default());
        assert!(
            report.passed,
            "max rel error {} at param {}",
            report.max_rel_error, report.worst_param
        );
        assert!(report.max_rel_error < 1e-4);
    }

    #[test]
    fn randomized_instances_pass_and_corruption_is_detected() {
        for seed in 0..5 {
            let report =
                check_random_instance(seed, 1e-5, GradCheckTolerance::default(), false).unwrap();
            assert!(report.passed, "seed {seed}: {report:?}");
        }
        let corrupted =
            check_random_instance(0, 1e-5, GradCheckTolerance::default(), true).unwrap();
        assert!(!corrupted.passed);
    }

    #[test]
    fn oracle_agrees_with_update_direction_semantics() {
        // Ascent on loss L equals descent on -L: verified through the oracle.
        let mut rng = SplitMix64::derive(4, 2);
        let net: Mlp<f64> = Mlp::init(&[2, 2], &[Activation::Tanh], &mut rng).unwrap();
        let input = Matrix::from_vec(1, 2, vec![0.4, -0.3]).unwrap();
        let labels = [0usize];
        let loss = |n: &Mlp<f64>| -> crate::error::Result<f64> {
            let (out, _) = n.forward(&input)?;
            Ok(softmax_cross_entropy(&out, &labels)?.0)
        };
        let grads = finite_diff_grad(&net, 1e-5, loss).unwrap();
        let neg_grads = finite_diff_grad(&net, 1e-5, |n| loss(n).map(|v| -v)).unwrap();

        let mut up = net.clone();
        up.apply_update(&grads, 0.1, UpdateDirection::Ascent).unwrap();
        let mut down = net.clone();
        down.apply_update(&neg_grads, 0.1, UpdateDirection::Descent).unwrap();
        // Finite differences of L and -L are exact negations, so the two
        // trajectories agree bit for bit.
        assert_eq!(up.param_hash(), down.param_hash());
    }
}
