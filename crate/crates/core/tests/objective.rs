use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use savopt::linalg::{dot, norm};
use savopt::objective::{
    directional_quartic, eval, grad, quartic_value, BatchSampler, MiniBatchObjective,
};
use savopt::problems::{
    synth_ratings, LeastSquares, PhaseRetrieval, Quadratic, Rastrigin, Rosenbrock,
    SeparablePolynomial, SynthSpec, TruthKind,
};
use savopt::{Error, NoisyGradient, Objective};

fn problems() -> Vec<(&'static str, Box<dyn Objective>)> {
    let ls = LeastSquares::new(
        DMatrix::from_row_slice(3, 2, &[1.0, 2.0, -1.0, 0.5, 0.3, 4.0]),
        DVector::from_vec(vec![1.0, -2.0, 0.5]),
    )
    .unwrap();
    let mf = synth_ratings(&SynthSpec {
        users: 6,
        items: 5,
        rank: 2,
        ratings: 20,
        noise: 0.1,
        seed: 3,
    })
    .unwrap()
    .problem
    .with_embedding_dim(3)
    .unwrap();
    vec![
        ("quadratic", Box::new(Quadratic::new(10).unwrap())),
        ("rastrigin", Box::new(Rastrigin::new(5))),
        ("rosenbrock-2d", Box::new(Rosenbrock::standard(2))),
        ("rosenbrock-7d", Box::new(Rosenbrock::standard(7))),
        (
            "polynomial",
            Box::new(SeparablePolynomial::new([0.0, 0.0, 1.0, 0.0, 0.1], 3)),
        ),
        ("least-squares", Box::new(ls)),
        (
            "phase-1d",
            Box::new(PhaseRetrieval::generate(&[8], 3, TruthKind::ComplexGaussian, 5).unwrap()),
        ),
        (
            "phase-2d",
            Box::new(PhaseRetrieval::generate(&[4, 4], 2, TruthKind::RealUniform, 6).unwrap()),
        ),
        ("matrix-factorization", Box::new(mf)),
    ]
}

fn unit(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let v: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let s = norm(&v);
    v.iter().map(|x| x / s).collect()
}

#[test]
fn documented_values() {
    assert_eq!(eval(&Rastrigin::new(4), &[0.0; 4]).unwrap(), 0.0);
    assert_eq!(eval(&Rosenbrock::standard(2), &[1.0, 1.0]).unwrap(), 0.0);
    let q = eval(&Quadratic::benchmark(), &[1.0; 100]).unwrap();
    let oracle: f64 = (1..=50).map(|_| 1.0).sum::<f64>() + (1..=50).map(|_| 0.01).sum::<f64>();
    assert!((q - oracle).abs() < 1e-12 && (q - 50.5).abs() < 1e-12);
}

#[test]
fn documented_gradients() {
    assert_eq!(grad(&Rastrigin::new(3), &[0.0; 3]).unwrap(), vec![0.0; 3]);
    assert_eq!(
        grad(&SeparablePolynomial::square(), &[1.0]).unwrap(),
        vec![2.0]
    );
    let (a, b, x, y) = (1.0, 100.0, 0.0, 0.0);
    let hand = [
        -2.0 * (a - x) - 4.0 * b * x * (y - x * x),
        2.0 * b * (y - x * x),
    ];
    assert_eq!(
        grad(&Rosenbrock::standard(2), &[0.0, 0.0]).unwrap(),
        hand.to_vec()
    );
}

#[test]
fn non_finite_values_signal_divergence() {
    let r = Rosenbrock::standard(2);
    assert!(matches!(eval(&r, &[1e200, 1.0]), Err(Error::Diverged(_))));
    assert!(matches!(grad(&r, &[1e200, 1.0]), Err(Error::Diverged(_))));
    assert!(matches!(
        eval(&r, &[f64::NAN, 1.0]),
        Err(Error::Diverged(_))
    ));
    assert!(matches!(
        eval(&r, &[1.0]),
        Err(Error::DimensionMismatch { .. })
    ));
}

#[test]
fn documented_ray_expansions() {
    let c = directional_quartic(&SeparablePolynomial::square(), &[1.0], &[-1.0]).unwrap();
    assert_eq!(c, [1.0, -2.0, 1.0, 0.0, 0.0]);
    let c = directional_quartic(&Rosenbrock::standard(2), &[0.0, 0.0], &[1.0, 0.0]).unwrap();
    assert_eq!(c, [1.0, -2.0, 1.0, 0.0, 100.0]);
    let r = Rosenbrock::standard(2);
    let c = directional_quartic(&r, &[0.3, -0.2], &[0.0, 0.0]).unwrap();
    assert_eq!(c, [r.value(&[0.3, -0.2]), 0.0, 0.0, 0.0, 0.0]);
    assert!(matches!(
        directional_quartic(&Rastrigin::new(2), &[0.0; 2], &[1.0, 0.0]),
        Err(Error::Unsupported(_))
    ));
}

#[test]
fn finite_difference_gradients() {
    let h = 1e-6;
    for (name, p) in problems() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let theta: Vec<f64> = (0..p.dim()).map(|_| rng.random_range(-1.5..1.5)).collect();
            let d = unit(&mut rng, p.dim());
            let plus: Vec<f64> = theta.iter().zip(&d).map(|(t, x)| t + h * x).collect();
            let minus: Vec<f64> = theta.iter().zip(&d).map(|(t, x)| t - h * x).collect();
            let fd = (p.value(&plus) - p.value(&minus)) / (2.0 * h);
            let f = p.value(&theta);
            let err = (fd - dot(&p.gradient(&theta), &d)).abs();
            assert!(err <= 1e-5 * (1.0 + f.abs()), "{name}: {err}");
        }
    }
}

#[test]
fn quartic_rays_match_direct_evaluation() {
    for (name, p) in problems() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let theta: Vec<f64> = (0..p.dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let d = unit(&mut rng, p.dim());
        let Some(c) = p.quartic_ray(&theta, &d) else {
            continue;
        };
        assert!(
            (c[0] - p.value(&theta)).abs() <= 1e-12 * (1.0 + c[0].abs()),
            "{name}"
        );
        assert!(
            (c[1] - dot(&p.gradient(&theta), &d)).abs() <= 1e-9 * (1.0 + c[1].abs()),
            "{name}"
        );
        for alpha in [0.0, 0.1, 1.0, -2.0] {
            let pt: Vec<f64> = theta.iter().zip(&d).map(|(t, x)| t + alpha * x).collect();
            let direct = p.value(&pt);
            let ray = quartic_value(&c, alpha);
            assert!(
                (ray - direct).abs() <= 1e-9 * (1.0 + direct.abs()),
                "{name} α={alpha}"
            );
        }
    }
}

#[test]
fn noise_is_reproducible_and_centered() {
    let base = Rosenbrock::standard(3);
    let theta = [0.2, -0.4, 0.9];
    let exact = base.gradient(&theta);
    let w = NoisyGradient::new(Rosenbrock::standard(3), 0.0, 9).unwrap();
    assert_eq!(w.gradient(&theta), exact);

    let eps = 0.1;
    let a = NoisyGradient::new(Rosenbrock::standard(3), eps, 7).unwrap();
    let b = NoisyGradient::new(Rosenbrock::standard(3), eps, 7).unwrap();
    assert_eq!(a.gradient(&theta), b.gradient(&theta));
    assert_eq!(a.noisy_grad_at(&theta, 41), b.noisy_grad_at(&theta, 41));
    assert_eq!(a.value(&theta), base.value(&theta));
    assert_eq!(a.exact_gradient(&theta), exact);

    let draws = 100_000;
    let mut mean = [0.0; 3];
    for i in 0..draws {
        for (m, (g, e)) in mean
            .iter_mut()
            .zip(a.noisy_grad_at(&theta, i).iter().zip(&exact))
        {
            *m += (g - e) / eps / draws as f64;
        }
    }
    assert!(mean.iter().all(|m| m.abs() < 0.02), "{mean:?}");
}

#[test]
fn negative_noise_level_is_rejected() {
    assert!(NoisyGradient::new(Rastrigin::new(2), -0.1, 0).is_err());
}

#[test]
fn sampler_covers_each_epoch_once() {
    let mut s = BatchSampler::new(23, 5, 4).unwrap();
    assert_eq!(s.batches_per_epoch(), 5);
    let mut first_epoch = Vec::new();
    for epoch in 0..3 {
        let mut seen = Vec::new();
        for b in 0..5 {
            let (batch, new_epoch) = s.next_batch();
            assert_eq!(new_epoch, b == 0);
            seen.extend(batch);
        }
        assert_eq!(seen.len(), 23);
        assert_eq!(
            seen.iter().copied().collect::<BTreeSet<_>>(),
            (0..23).collect()
        );
        if epoch == 0 {
            first_epoch = seen;
        } else {
            assert_ne!(seen, first_epoch);
        }
    }
    assert!(BatchSampler::new(10, 0, 0).is_err());
}

#[test]
fn mini_batch_gradient_matches_full_on_one_batch() {
    let p = synth_ratings(&SynthSpec {
        users: 5,
        items: 4,
        rank: 2,
        ratings: 12,
        noise: 0.0,
        seed: 1,
    })
    .unwrap()
    .problem;
    let n_train = p.train().len();
    let theta = p.random_init(0.3, 2);
    let mb = MiniBatchObjective::new(p.clone(), n_train, 3).unwrap();
    assert_eq!(mb.batch().len(), n_train);
    let full = p.gradient(&theta);
    for (a, b) in mb.gradient(&theta).iter().zip(&full) {
        assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()));
    }
}
