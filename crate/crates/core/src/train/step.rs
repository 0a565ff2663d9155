use crate::error::{Error, Result};
use crate::nn::{softmax_cross_entropy, UpdateDirection};
use crate::Matrix64;

use super::{ModelAssembly, Strategy};

fn validate_rate(name: &str, rate: f64) -> Result<()> {
    if !(rate >= 0.0) || !rate.is_finite() {
        return Err(Error::invalid(format!(
            "{name} must be non-negative and finite, got {rate}"
        )));
    }
    Ok(())
}

/// One descent step on the emotion task: cross-entropy over the emotion head,
/// gradients flowing back through the shared representation. Updates the
/// emotion head and the upstream — plus the projector under SNP, which joins
/// the upstream's optimization. The speaker head is never touched. `eta = 0`
/// is a null step: the loss is computed and reported, no parameter moves.
pub fn emotion_step(
    model: &mut ModelAssembly,
    features: &Matrix64,
    labels: &[usize],
    eta: f64,
) -> Result<f64> {
    validate_rate("eta", eta)?;
    if features.rows() == 0 {
        return Err(Error::invalid("emotion_step: empty batch"));
    }

    let (upstream_out, upstream_cache) = model.upstream().forward(features)?;
    let (representation, projector_cache) = match model.projector() {
        Some(projector) => {
            let (rep, cache) = projector.forward(&upstream_out)?;
            (rep, Some(cache))
        }
        None => (upstream_out, None),
    };
    let (logits, head_cache) = model.emotion_head().forward(&representation)?;
    let (loss, dlogits) = softmax_cross_entropy(&logits, labels)?;
    if eta == 0.0 {
        return Ok(loss);
    }

    let (head_grads, d_representation) = model.emotion_head().backward(&head_cache, &dlogits)?;
    let (projector_grads, d_upstream_out) = match (model.projector(), &projector_cache) {
        (Some(projector), Some(cache)) => {
            let (grads, d_input) = projector.backward(cache, &d_representation)?;
            (Some(grads), d_input)
        }
        _ => (None, d_representation),
    };
    let (upstream_grads, _) = model.upstream().backward(&upstream_cache, &d_upstream_out)?;

    let (upstream, projector, emotion_head, _, upstream_passes) = model.parts_mut();
    *upstream_passes += 1;
    emotion_head.apply_update(&head_grads, eta, UpdateDirection::Descent)?;
    if let (Some(projector), Some(grads)) = (projector, &projector_grads) {
        projector.apply_update(grads, eta, UpdateDirection::Descent)?;
    }
    upstream.apply_update(&upstream_grads, eta, UpdateDirection::Descent)?;
    Ok(loss)
}

/// One adversarial step on the speaker task: the speaker head descends its
/// cross-entropy at rate `eta` while the shared representation *ascends* it
/// at rate `lambda` — through the upstream under TAP, through the projector
/// only under SNP (the upstream is frozen there and receives no gradient
/// computation at all). Never scheduled under BASELINE; calling it anyway is
/// a scheduler bug and reports a contract error. The emotion head is never
/// touched.
pub fn speaker_step(
    model: &mut ModelAssembly,
    features: &Matrix64,
    labels: &[usize],
    eta: f64,
    lambda: f64,
) -> Result<f64> {
    if model.strategy() == Strategy::Baseline {
        return Err(Error::contract(
            "speaker_step scheduled under BASELINE; the baseline never runs adversarial steps",
        ));
    }
    validate_rate("eta", eta)?;
    validate_rate("lambda", lambda)?;
    if features.rows() == 0 {
        return Err(Error::invalid("speaker_step: empty batch"));
    }

    let (upstream_out, upstream_cache) = model.upstream().forward(features)?;
    let (representation, projector_cache) = match model.projector() {
        Some(projector) => {
            let (rep, cache) = projector.forward(&upstream_out)?;
            (rep, Some(cache))
        }
        None => (upstream_out, None),
    };
    let (logits, head_cache) = model.speaker_head().forward(&representation)?;
    let (loss, dlogits) = softmax_cross_entropy(&logits, labels)?;
    if eta == 0.0 && lambda == 0.0 {
        return Ok(loss);
    }

    let (head_grads, d_representation) = model.speaker_head().backward(&head_cache, &dlogits)?;
    let ascent_grads = if lambda == 0.0 {
        None
    } else {
        match model.strategy() {
            Strategy::Snp => {
                // Frozen upstream: backpropagation stops at the projector, so
                // no upstream gradients are ever computed here.
                let cache = projector_cache.as_ref().expect("SNP assembly has a projector");
                let projector = model.projector().expect("SNP assembly has a projector");
                let (grads, _) = projector.backward(cache, &d_representation)?;
                Some(grads)
            }
            Strategy::Tap => {
                let (grads, _) = model.upstream().backward(&upstream_cache, &d_representation)?;
                Some(grads)
            }
            Strategy::Baseline => unreachable!("rejected above"),
        }
    };

    let (upstream, projector, _, speaker_head, upstream_passes) = model.parts_mut();
    if eta > 0.0 {
        speaker_head.apply_update(&head_grads, eta, UpdateDirection::Descent)?;
    }
    if let Some(grads) = &ascent_grads {
        match projector {
            Some(projector) => projector.apply_update(grads, lambda, UpdateDirection::Ascent)?,
            None => {
                *upstream_passes += 1;
                upstream.apply_update(grads, lambda, UpdateDirection::Ascent)?;
            }
        }
    }
    Ok(loss)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{finite_diff_grad, Gradients, UpdateDirection};
    use crate::rng::SplitMix64;
    use crate::train::AssemblyPlan;
    use crate::Matrix64;

    fn tiny_plan(strategy: Strategy) -> AssemblyPlan {
        AssemblyPlan {
            upstream_dims: vec![5, 4],
            ..AssemblyPlan::new(3, 3, 4, strategy)
        }
    }

    fn random_batch(rows: usize, cols: usize, classes: usize, seed: u64) -> (Matrix64, Vec<usize>) {
        let mut rng = SplitMix64::new(seed);
        let features = Matrix64::from_vec(
            rows,
            cols,
            (0..rows * cols).map(|_| rng.gaussian()).collect(),
        )
        .unwrap();
        let labels = (0..rows).map(|_| rng.next_below(classes as u64) as usize).collect();
        (features, labels)
    }

    #[test]
    fn zero_eta_emotion_step_reports_loss_without_moving() {
        let mut model = tiny_plan(Strategy::Tap).build(1).unwrap();
        let before = model.assembly_hash();
        let (x, y) = random_batch(4, 3, 3, 2);
        let loss = emotion_step(&mut model, &x, &y, 0.0).unwrap();
        assert!(loss > 0.0);
        assert_eq!(model.assembly_hash(), before);
    }

    #[test]
    fn emotion_step_never_touches_the_speaker_head() {
        for strategy in [Strategy::Snp, Strategy::Tap, Strategy::Baseline] {
            let mut model = tiny_plan(strategy).build(3).unwrap();
            let before = model.speaker_head().param_hash();
            let (x, y) = random_batch(4, 3, 3, 4);
            emotion_step(&mut model, &x, &y, 0.1).unwrap();
            assert_eq!(model.speaker_head().param_hash(), before, "{strategy}");
            assert_ne!(model.upstream().param_hash(), tiny_plan(strategy).build(3).unwrap().upstream().param_hash());
        }
    }

    #[test]
    fn emotion_step_matches_finite_difference_oracle() {
        // Cross-check the emotion update on every part against central
        // differences of the end-to-end loss with the other parts fixed.
        for strategy in [Strategy::Snp, Strategy::Tap] {
            let model0 = tiny_plan(strategy).build(5).unwrap();
            let (x, y) = random_batch(3, 3, 3, 6);
            let eta = 0.05;

            let mut stepped = model0.clone();
            let loss = emotion_step(&mut stepped, &x, &y, eta).unwrap();
            assert!(loss.is_finite());

            // Upstream oracle.
            let fd = finite_diff_grad(model0.upstream(), 1e-5, |candidate| {
                let (out, _) = candidate.forward(&x)?;
                let rep = match model0.projector() {
                    Some(p) => p.forward(&out)?.0,
                    None => out,
                };
                let (logits, _) = model0.emotion_head().forward(&rep)?;
                Ok(softmax_cross_entropy(&logits, &y)?.0)
            })
            .unwrap();
            assert_part_update(model0.upstream(), stepped.upstream(), &fd, -eta);

            // Projector oracle (SNP only).
            if let (Some(p0), Some(p1)) = (model0.projector(), stepped.projector()) {
                let fd = finite_diff_grad(p0, 1e-5, |candidate| {
                    let (out, _) = model0.upstream().forward(&x)?;
                    let (rep, _) = candidate.forward(&out)?;
                    let (logits, _) = model0.emotion_head().forward(&rep)?;
                    Ok(softmax_cross_entropy(&logits, &y)?.0)
                })
                .unwrap();
                assert_part_update(p0, p1, &fd, -eta);
            }

            // Head oracle.
            let fd = finite_diff_grad(model0.emotion_head(), 1e-5, |candidate| {
                let rep = model0.representation(&x)?;
                let (logits, _) = candidate.forward(&rep)?;
                Ok(softmax_cross_entropy(&logits, &y)?.0)
            })
            .unwrap();
            assert_part_update(model0.emotion_head(), stepped.emotion_head(), &fd, -eta);
        }
    }

    /// Asserts `after = before + signed_rate · fd_grad` parameter-wise within
    /// the oracle's resolution.
    fn assert_part_update(
        before: &crate::Mlp64,
        after: &crate::Mlp64,
        fd: &Gradients<f64>,
        signed_rate: f64,
    ) {
        for index in 0..before.param_count() {
            let expected = before.param(index).unwrap() + signed_rate * fd.entry(index).unwrap();
            let actual = after.param(index).unwrap();
            let tolerance = 1e-8 * expected.abs().max(1.0);
            assert!(
                (actual - expected).abs() <= tolerance,
                "param {index}: {actual} vs {expected}"
            );
        }
    }

    #[test]
    fn speaker_step_under_baseline_is_a_contract_error() {
        let mut model = tiny_plan(Strategy::Baseline).build(7).unwrap();
        let (x, y) = random_batch(2, 3, 4, 8);
        let err = speaker_step(&mut model, &x, &y, 0.1, 0.0).unwrap_err();
        assert!(matches!(err, Error::Contract(_)), "{err}");
    }

    #[test]
    fn lambda_zero_speaker_step_moves_only_the_speaker_head() {
        for strategy in [Strategy::Snp, Strategy::Tap] {
            let mut model = tiny_plan(strategy).build(9).unwrap();
            let upstream_before = model.upstream().param_hash();
            let projector_before = model.projector().map(|p| p.param_hash());
            let head_before = model.speaker_head().param_hash();
            let (x, y) = random_batch(4, 3, 4, 10);
            speaker_step(&mut model, &x, &y, 0.1, 0.0).unwrap();
            assert_eq!(model.upstream().param_hash(), upstream_before, "{strategy}");
            assert_eq!(model.projector().map(|p| p.param_hash()), projector_before);
            assert_ne!(model.speaker_head().param_hash(), head_before);
        }
    }

    #[test]
    fn snp_speaker_step_freezes_upstream_and_skips_its_gradients() {
        let mut model = tiny_plan(Strategy::Snp).build(11).unwrap();
        let upstream_before = model.upstream().param_hash();
        let (x, y) = random_batch(4, 3, 4, 12);
        for _ in 0..50 {
            speaker_step(&mut model, &x, &y, 0.1, 0.5).unwrap();
        }
        assert_eq!(model.upstream().param_hash(), upstream_before);
        assert_eq!(model.upstream_grad_passes(), 0);
        // The projector absorbed the ascent.
        assert_ne!(
            model.projector().unwrap().param_hash(),
            tiny_plan(Strategy::Snp).build(11).unwrap().projector().unwrap().param_hash()
        );
    }

    #[test]
    fn tap_speaker_step_ascends_upstream_by_lambda_times_gradient() {
        let model0 = tiny_plan(Strategy::Tap).build(13).unwrap();
        let (x, y) = random_batch(3, 3, 4, 14);
        let lambda = 0.03;

        let mut stepped = model0.clone();
        speaker_step(&mut stepped, &x, &y, 0.1, lambda).unwrap();
        assert_eq!(stepped.upstream_grad_passes(), 1);

        let fd = finite_diff_grad(model0.upstream(), 1e-5, |candidate| {
            let (out, _) = candidate.forward(&x)?;
            let (logits, _) = model0.speaker_head().forward(&out)?;
            Ok(softmax_cross_entropy(&logits, &y)?.0)
        })
        .unwrap();
        // Ascent: parameters move in the +gradient direction, magnitude λ·|g|.
        assert_part_update(model0.upstream(), stepped.upstream(), &fd, lambda);
    }

    #[test]
    fn speaker_step_never_touches_the_emotion_head() {
        for strategy in [Strategy::Snp, Strategy::Tap] {
            let mut model = tiny_plan(strategy).build(15).unwrap();
            let before = model.emotion_head().param_hash();
            let (x, y) = random_batch(4, 3, 4, 16);
            speaker_step(&mut model, &x, &y, 0.1, 0.01).unwrap();
            assert_eq!(model.emotion_head().param_hash(), before, "{strategy}");
        }
    }

    #[test]
    fn speaker_ascent_equals_descent_on_negated_gradients() {
        // Replicate one SNP/TAP speaker step by hand with negated gradients
        // and a descent update; the results must agree bit-for-bit.
        for (strategy, seed) in [(Strategy::Tap, 17u64), (Strategy::Snp, 18u64)] {
            let model0 = tiny_plan(strategy).build(seed).unwrap();
            let (x, y) = random_batch(4, 3, 4, seed + 1);
            let (eta, lambda) = (0.07, 0.02);

            let mut via_step = model0.clone();
            speaker_step(&mut via_step, &x, &y, eta, lambda).unwrap();

            let mut by_hand = model0.clone();
            let (upstream_out, upstream_cache) = by_hand.upstream().forward(&x).unwrap();
            let (rep, proj_cache) = match by_hand.projector() {
                Some(p) => {
                    let (r, c) = p.forward(&upstream_out).unwrap();
                    (r, Some(c))
                }
                None => (upstream_out, None),
            };
            let (logits, head_cache) = by_hand.speaker_head().forward(&rep).unwrap();
            let (_, dlogits) = softmax_cross_entropy(&logits, &y).unwrap();
            let (head_grads, d_rep) = by_hand.speaker_head().backward(&head_cache, &dlogits).unwrap();
            let ascent_target_grads = match strategy {
                Strategy::Snp => {
                    by_hand
                        .projector()
                        .unwrap()
                        .backward(proj_cache.as_ref().unwrap(), &d_rep)
                        .unwrap()
                        .0
                }
                _ => by_hand.upstream().backward(&upstream_cache, &d_rep).unwrap().0,
            };
            let (upstream, projector, _, speaker_head, _) = by_hand.parts_mut();
            speaker_head
                .apply_update(&head_grads, eta, UpdateDirection::Descent)
                .unwrap();
            match projector {
                Some(p) => p
                    .apply_update(&ascent_target_grads.negated(), lambda, UpdateDirection::Descent)
                    .unwrap(),
                None => upstream
                    .apply_update(&ascent_target_grads.negated(), lambda, UpdateDirection::Descent)
                    .unwrap(),
            }

            assert_eq!(via_step.assembly_hash(), by_hand.assembly_hash(), "{strategy}");
        }
    }

    #[test]
    fn out_of_range_labels_are_validation_errors() {
        let mut model = tiny_plan(Strategy::Tap).build(19).unwrap();
        let (x, _) = random_batch(2, 3, 3, 20);
        assert!(emotion_step(&mut model, &x, &[0, 3], 0.1).is_err());
        assert!(speaker_step(&mut model, &x, &[0, 4], 0.1, 0.0).is_err());
    }
}
