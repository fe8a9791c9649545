//! Reverse-mode gradients against independent central differences, linearity
//! of the backward pass, loss gradients, Adam, and kernel recovery.

use eqcontour::autodiff::{
    convolution_map, extract_convolution_kernel, forward_backward, forward_loss, Tape, KERNEL_TOLERANCE,
};
use eqcontour::layers::{circular_convolution, conv_forward, ActivationKind, FilterBank};
use eqcontour::model::{
    build_autoencoder, build_classifier, build_regressor, AutoencoderConfig, ClassifierConfig, Model, RegressorConfig,
};
use eqcontour::optim::{loss_and_grad, AdamState, LossKind, LossSpec, Output, Target};
use eqcontour::{Contour, Error};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_contour(rng: &mut ChaCha8Rng, k: usize, n: usize) -> Contour {
    Contour::new(
        (0..k)
            .map(|_| (0..n).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect())
            .collect(),
    )
    .unwrap()
}

fn models(n: usize) -> Vec<Model> {
    let mut out = Vec::new();
    for (i, activation) in [ActivationKind::Siglog, ActivationKind::AmplitudePhase].into_iter().enumerate() {
        let cls = ClassifierConfig {
            widths: vec![3, 4],
            kernel_size: 3,
            activation,
            hidden: if i == 0 { Some(4) } else { None },
            ..Default::default()
        };
        let reg = RegressorConfig {
            widths: vec![3, 3],
            kernel_size: 3,
            activation,
        };
        let ae = AutoencoderConfig {
            widths: vec![3],
            latent_channels: 2,
            kernel_size: 3,
            activation,
            ..Default::default()
        };
        out.push(build_classifier(n, 1, 3, &cls).unwrap());
        out.push(build_regressor(n, 1, &reg).unwrap());
        out.push(build_autoencoder(n, 1, 2, &ae).unwrap());
    }
    for (i, m) in out.iter_mut().enumerate() {
        m.init_random(11 + i as u64);
    }
    out
}

// Owned targets matching a model's head.
enum Owned {
    Class(usize),
    Real(Vec<f64>),
    Contour(Contour),
}

impl Owned {
    fn target(&self) -> Target<'_> {
        match self {
            Owned::Class(c) => Target::Class(*c),
            Owned::Real(v) => Target::Real(v),
            Owned::Contour(c) => Target::Contour(c),
        }
    }
}

fn target_for(model: &Model, rng: &mut ChaCha8Rng) -> Owned {
    match model.forward(&Contour::zeros(1, model.input_n()), &[]).unwrap() {
        Output::Real(v) if model.meta().task.loss() == LossKind::CrossEntropy => Owned::Class(rng.gen_range(0..v.len())),
        Output::Real(v) => Owned::Real((0..v.len()).map(|_| rng.gen_range(0.0..2.0)).collect()),
        Output::Contour(c) => Owned::Contour(random_contour(rng, c.k(), c.n())),
    }
}

#[test]
fn analytic_gradients_match_central_differences() {
    let n = 8;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for model in models(n) {
        let x = model.prepare_input(&random_contour(&mut rng, 1, n)).unwrap();
        let owned = target_for(&model, &mut rng);
        let loss = LossSpec::new(model.meta().task.loss());
        let (_, grad) = forward_backward(&model, &x, &[], &loss, &owned.target()).unwrap();
        assert_eq!(grad.len(), model.num_params());
        let h = 1e-6;
        let mut probe = model.clone();
        let mut worst: f64 = 0.0;
        for i in 0..model.num_params() {
            let base = model.params().values()[i];
            probe.params_mut().values_mut()[i] = base + h;
            let up = forward_loss(&probe, &x, &[], &loss, &owned.target()).unwrap();
            probe.params_mut().values_mut()[i] = base - h;
            let down = forward_loss(&probe, &x, &[], &loss, &owned.target()).unwrap();
            probe.params_mut().values_mut()[i] = base;
            let numeric = (up - down) / (2.0 * h);
            // absolute slack covers the round-off of the difference quotient
            let err = (grad[i] - numeric).abs() - 1e-8 * up.abs().max(1.0);
            worst = worst.max(err / grad[i].abs().max(numeric.abs()).max(1e-6));
        }
        assert!(worst <= 1e-5, "{:?}: worst relative error {worst}", model.meta().task);
    }
}

#[test]
fn backward_is_linear_in_the_output_gradient() {
    let n = 8;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for model in models(n) {
        let x = model.prepare_input(&random_contour(&mut rng, 1, n)).unwrap();
        let tape = Tape::record(&model, &x, &[]).unwrap();
        let (a, b) = (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
        let (g1, g2, mix) = match tape.output() {
            Output::Real(v) => {
                let r1: Vec<f64> = (0..v.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let r2: Vec<f64> = (0..v.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let m = r1.iter().zip(&r2).map(|(p, q)| a * p + b * q).collect();
                (Output::Real(r1), Output::Real(r2), Output::Real(m))
            }
            Output::Contour(c) => {
                let r1 = random_contour(&mut rng, c.k(), c.n());
                let r2 = random_contour(&mut rng, c.k(), c.n());
                let m = Contour::new(
                    r1.channels()
                        .iter()
                        .zip(r2.channels())
                        .map(|(p, q)| p.iter().zip(q).map(|(s, t)| s * a + t * b).collect())
                        .collect(),
                )
                .unwrap();
                (Output::Contour(r1), Output::Contour(r2), Output::Contour(m))
            }
        };
        let d1 = tape.backward(&model, &g1).unwrap();
        let d2 = tape.backward(&model, &g2).unwrap();
        let dm = tape.backward(&model, &mix).unwrap();
        for i in 0..dm.len() {
            let want = a * d1[i] + b * d2[i];
            assert!((dm[i] - want).abs() <= 1e-10 * want.abs().max(1.0), "param {i}");
        }
        assert_eq!(tape.replay(&model).unwrap(), model.forward(&x, &[]).unwrap());
    }
}

#[test]
fn loss_gradients_follow_the_real_imaginary_convention() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let h = 1e-6;
    // complex MSE: perturb real and imaginary parts separately
    let p = random_contour(&mut rng, 2, 5);
    let t = random_contour(&mut rng, 2, 5);
    let spec = LossSpec::new(LossKind::MseComplex);
    let (_, g) = loss_and_grad(&spec, &Output::Contour(p.clone()), &Target::Contour(&t)).unwrap();
    let g = g.as_contour().unwrap().clone();
    for c in 0..2 {
        for q in 0..5 {
            for dir in [Complex64::new(h, 0.0), Complex64::new(0.0, h)] {
                let bump = |s: f64| {
                    let mut ch = p.channels().to_vec();
                    ch[c][q] += dir * s;
                    let out = Output::Contour(Contour::new(ch).unwrap());
                    loss_and_grad(&spec, &out, &Target::Contour(&t)).unwrap().0
                };
                let numeric = (bump(1.0) - bump(-1.0)) / (2.0 * h);
                let analytic = if dir.re != 0.0 { g.get(c, q).re } else { g.get(c, q).im };
                assert!((numeric - analytic).abs() <= 1e-8);
            }
        }
    }
    // cross-entropy and MAE on real outputs
    let logits: Vec<f64> = (0..4).map(|_| rng.gen_range(-3.0..3.0)).collect();
    let targets: Vec<f64> = (0..4).map(|_| rng.gen_range(-3.0..3.0)).collect();
    let cases = [
        (LossKind::CrossEntropy, Target::Class(2)),
        (LossKind::MaeReal, Target::Real(&targets)),
    ];
    for (kind, target) in cases {
        let spec = LossSpec::new(kind);
        let (l, g) = loss_and_grad(&spec, &Output::Real(logits.clone()), &target).unwrap();
        let g = g.as_real().unwrap().to_vec();
        for i in 0..4 {
            let bump = |s: f64| {
                let mut v = logits.clone();
                v[i] += s * h;
                loss_and_grad(&spec, &Output::Real(v), &target).unwrap().0
            };
            assert!(((bump(1.0) - bump(-1.0)) / (2.0 * h) - g[i]).abs() <= 1e-7, "{kind:?} {i}");
        }
        if kind == LossKind::CrossEntropy {
            // log-sum-exp oracle
            let lse = logits.iter().map(|v| v.exp()).sum::<f64>().ln();
            assert!((l - (lse - logits[2])).abs() <= 1e-12);
        }
    }
}

#[test]
fn adam_matches_a_reference_recursion() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut params: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut reference = params.clone();
    let (mut m, mut v) = (vec![0.0; 6], vec![0.0; 6]);
    let mut adam = AdamState::new(6, 0.01);
    for t in 1..=25 {
        let grad: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
        adam.step(&mut params, &grad).unwrap();
        for i in 0..6 {
            m[i] = 0.9 * m[i] + 0.1 * grad[i];
            v[i] = 0.999 * v[i] + 0.001 * grad[i] * grad[i];
            let mh = m[i] / (1.0 - 0.9f64.powi(t));
            let vh = v[i] / (1.0 - 0.999f64.powi(t));
            reference[i] -= 0.01 * mh / (vh.sqrt() + 1e-8);
        }
    }
    assert_eq!(adam.steps(), 25);
    for (a, b) in params.iter().zip(&reference) {
        assert!((a - b).abs() <= 1e-14);
    }
    let before = params.clone();
    let err = adam.step(&mut params, &[0.0, f64::NAN, 0.0, 0.0, 0.0, 0.0]).unwrap_err();
    assert!(matches!(err, Error::NonFiniteGradient { index: 1, .. }));
    assert_eq!(params, before);
}

fn complex_vec(n: usize) -> impl Strategy<Value = Vec<Complex64>> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0).prop_map(|(a, b)| Complex64::new(a, b)), n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kernel_of_a_convolution_is_recovered((n, y) in (1usize..=16).prop_flat_map(|n| (Just(n), complex_vec(n))), seed in any::<u64>()) {
        let got = extract_convolution_kernel(convolution_map(y.clone()), n, 8, seed).unwrap();
        prop_assert!(got.residual <= 1e-12);
        for (a, b) in got.kernel.iter().zip(&y) {
            prop_assert!((a - b).norm() <= 1e-12);
        }
    }

    #[test]
    fn conv_layer_kernel_is_its_zero_padded_taps((n, taps) in (2usize..=16).prop_flat_map(|n| (Just(n), (1..=n).prop_flat_map(complex_vec)))) {
        let bank = FilterBank::single(taps.clone()).unwrap();
        let map = |x: &[Complex64]| {
            let c = Contour::from_samples(x.to_vec()).unwrap();
            conv_forward(&bank, &c).unwrap().channel(0).to_vec()
        };
        let got = extract_convolution_kernel(map, n, 8, 0).unwrap();
        let mut padded = taps.clone();
        padded.resize(n, Complex64::new(0.0, 0.0));
        for (a, b) in got.kernel.iter().zip(&padded) {
            prop_assert!((a - b).norm() <= 1e-12);
        }
    }

    #[test]
    fn position_dependent_maps_are_rejected(n in 2usize..=16, y in complex_vec(16)) {
        let y = y[..n].to_vec();
        prop_assume!(y.iter().any(|z| z.norm() > 0.1));
        // gain depends on position, so the map does not commute with shifts
        let gained = |x: &[Complex64]| {
            circular_convolution(&y, x).unwrap().into_iter().enumerate().map(|(q, z)| z * (1.0 + q as f64)).collect::<Vec<_>>()
        };
        match extract_convolution_kernel(gained, n, 8, 1) {
            Err(Error::NotConvolutional { residual }) => prop_assert!(residual > KERNEL_TOLERANCE),
            other => prop_assert!(false, "accepted: {:?}", other),
        }
        let conj = |x: &[Complex64]| x.iter().map(|z| z.conj()).collect::<Vec<_>>();
        let rejected = matches!(extract_convolution_kernel(conj, n, 8, 1), Err(Error::NotConvolutional { .. }));
        prop_assert!(rejected);
    }
}
