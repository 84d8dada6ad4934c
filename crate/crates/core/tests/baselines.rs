use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use savopt::baselines::{
    adam_step, gd_step, minimize_quartic_ray, nag_step, steepest_descent_step, AdamState, NagState,
};
use savopt::objective::quartic_value;
use savopt::problems::{LeastSquares, Quadratic, Rastrigin, Rosenbrock, SeparablePolynomial};
use savopt::sav::quadratic_alpha_oracle;
use savopt::{Error, LinearOperator, Objective};

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + b.abs())
}

fn square() -> SeparablePolynomial {
    SeparablePolynomial::square()
}

#[test]
fn gd_examples() {
    let z = LinearOperator::zero(1).unwrap();
    assert!(close(
        gd_step(&[1.0], &square(), &z, 0.1).unwrap()[0],
        0.8,
        1e-15
    ));
    let f = Rosenbrock::standard(3);
    let theta = [0.3, -0.5, 1.1];
    for (lambda, dt) in [(1.0, 0.01), (2.5, 0.1), (0.3, 1.0)] {
        let pre = gd_step(
            &theta,
            &f,
            &LinearOperator::scaled_identity(lambda, 3).unwrap(),
            dt,
        )
        .unwrap();
        let plain = gd_step(
            &theta,
            &f,
            &LinearOperator::zero(3).unwrap(),
            dt / (1.0 + dt * lambda),
        )
        .unwrap();
        for (a, b) in pre.iter().zip(&plain) {
            assert!(close(*a, *b, 1e-14));
        }
    }
}

#[test]
fn gd_on_quadratic_matches_closed_form() {
    let q = Quadratic::benchmark();
    let z = LinearOperator::zero(100).unwrap();
    for (dt, want, tol) in [
        (0.01, 0.3351, 1e-3),
        (0.1, 0.009121, 1e-4),
        (1.0, 50.0, 1e-6),
    ] {
        let mut theta = vec![1.0; 100];
        for _ in 0..1000 {
            theta = gd_step(&theta, &q, &z, dt).unwrap();
        }
        let closed: f64 = q
            .weights()
            .iter()
            .map(|w| w * (1.0 - 2.0 * w * dt).powi(2000))
            .sum();
        let f = q.value(&theta);
        assert!(
            (f - closed).abs() <= 1e-12 * (1.0 + closed),
            "dt={dt}: {f} vs {closed}"
        );
        assert!((f - want).abs() <= tol, "dt={dt}: {f}");
    }
}

#[test]
fn gd_unit_step_preserves_stiff_coordinates() {
    let q = Quadratic::benchmark();
    let theta = gd_step(
        &vec![1.0; 100],
        &q,
        &LinearOperator::zero(100).unwrap(),
        1.0,
    )
    .unwrap();
    for (i, t) in theta.iter().enumerate().filter(|(i, _)| i % 2 == 0) {
        assert_eq!(t.abs(), 1.0, "coordinate {i}");
    }
}

#[test]
fn gd_decreases_below_stability_limit() {
    let q = Quadratic::benchmark();
    let z = LinearOperator::zero(100).unwrap();
    let mut theta: Vec<f64> = (0..100).map(|i| (i as f64 * 0.37).sin()).collect();
    for _ in 0..100 {
        let next = gd_step(&theta, &q, &z, 0.99).unwrap();
        assert!(q.value(&next) < q.value(&theta));
        theta = next;
    }
}

#[test]
fn nag_examples() {
    let s = nag_step(&NagState::new(vec![1.0], 0.1), &square()).unwrap();
    assert!(close(s.velocity[0], 0.2, 1e-15) && close(s.theta[0], 0.8, 1e-15));

    let f = Rosenbrock::standard(2);
    let z = LinearOperator::zero(2).unwrap();
    let mut nag = NagState {
        gamma: 0.0,
        ..NagState::new(vec![-1.0, 2.0], 1e-3)
    };
    let mut gd = vec![-1.0, 2.0];
    for _ in 0..50 {
        nag = nag_step(&nag, &f).unwrap();
        gd = gd_step(&gd, &f, &z, 1e-3).unwrap();
        assert_eq!(nag.theta, gd);
    }
}

#[test]
fn nag_rosenbrock_table_value() {
    let f = Rosenbrock::standard(2);
    let mut s = NagState::new(vec![-3.0, -4.0], 1e-4);
    for _ in 0..1000 {
        s = nag_step(&s, &f).unwrap();
    }
    let loss = f.value(&s.theta);
    assert!((loss - 5.326).abs() <= 0.2 * 5.326, "{loss}");
}

#[test]
fn adam_examples() {
    let s = adam_step(&AdamState::new(vec![1.0], 0.1), &square()).unwrap();
    assert!(close(s.theta[0], 0.9, 1e-8));

    let flat = Rastrigin::new(2);
    let mut s = AdamState::new(vec![0.0, 0.0], 0.5);
    for _ in 0..10 {
        s = adam_step(&s, &flat).unwrap();
        assert_eq!(s.theta, vec![0.0, 0.0]);
    }

    let f = Rosenbrock::standard(4);
    let theta = vec![3.0, -2.0, 0.1, 1e-6];
    let s = adam_step(&AdamState::new(theta.clone(), 0.05), &f).unwrap();
    for (a, b) in s.theta.iter().zip(&theta) {
        assert!((a - b).abs() <= 0.05 / (1.0 - 0.9));
    }
}

#[test]
fn adam_rosenbrock_table_values() {
    let f = Rosenbrock::standard(2);
    for (lr, want) in [(1e-2, 12.5), (1.0, 1.2)] {
        let mut s = AdamState::new(vec![-3.0, -4.0], lr);
        for _ in 0..1000 {
            s = adam_step(&s, &f).unwrap();
        }
        let loss = f.value(&s.theta);
        assert!((loss - want).abs() <= 0.2 * want, "lr={lr}: {loss}");
    }
}

#[test]
fn steepest_descent_examples() {
    let (theta, alpha) = steepest_descent_step(&[1.0], &square()).unwrap();
    assert!(close(alpha, 0.5, 1e-14) && theta[0].abs() < 1e-14);

    let q4 = SeparablePolynomial::new([0.0, 0.0, 0.0, 0.0, 1.0], 1);
    let (theta, alpha) = steepest_descent_step(&[1.0], &q4).unwrap();
    assert!(close(alpha, 0.25, 1e-12) && theta[0].abs() < 1e-12);

    let (theta, alpha) = steepest_descent_step(&[0.0, 0.0], &Rastrigin::new(2)).unwrap();
    assert_eq!((theta, alpha), (vec![0.0, 0.0], 0.0));
    assert!(matches!(
        steepest_descent_step(&[0.3, 0.1], &Rastrigin::new(2)),
        Err(Error::Unsupported(_))
    ));
}

#[test]
fn steepest_descent_on_least_squares_matches_oracle() {
    let a = DMatrix::from_row_slice(3, 3, &[2.0, 0.5, 0.0, 0.5, 1.0, 0.3, 0.0, 0.3, 0.7]);
    let b = DVector::from_vec(vec![1.0, -1.0, 2.0]);
    let ls = LeastSquares::new(a.clone(), b.clone()).unwrap();
    let mut theta = vec![0.0, 0.0, 0.0];
    for _ in 0..10 {
        let (_, beta) = quadratic_alpha_oracle(&a, &b, &theta).unwrap();
        let (next, alpha) = steepest_descent_step(&theta, &ls).unwrap();
        assert!(close(alpha, beta, 1e-10), "{alpha} vs {beta}");
        theta = next;
    }
}

#[test]
fn quartic_ray_unbounded_below_is_rejected() {
    assert!(minimize_quartic_ray(&[0.0, -1.0, 0.0, 0.0, -1.0]).is_err());
    assert!(minimize_quartic_ray(&[0.0, -1.0, 0.0, 1.0, 0.0]).is_err());
    assert_eq!(
        minimize_quartic_ray(&[3.0, 1.0, 1.0, 0.0, 0.0]).unwrap(),
        0.0
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn quartic_minimizer_beats_grid(
        c0 in -5.0..5.0f64,
        c1 in -5.0..5.0f64,
        c2 in -5.0..5.0f64,
        c3 in -5.0..5.0f64,
        c4 in 0.01..5.0f64,
    ) {
        let c = [c0, c1, c2, c3, c4];
        let a = minimize_quartic_ray(&c).unwrap();
        prop_assert!(a >= 0.0);
        let best = quartic_value(&c, a);
        for i in 0..=4000 {
            let x = i as f64 * 1e-3;
            prop_assert!(best <= quartic_value(&c, x) + 1e-9 * (1.0 + best.abs()), "α={a} loses to {x}");
        }
    }

    #[test]
    fn steepest_descent_never_increases(theta in prop::collection::vec(-3.0..3.0f64, 5)) {
        let f = Rosenbrock::standard(5);
        let (next, _) = steepest_descent_step(&theta, &f).unwrap();
        let (f0, f1) = (f.value(&theta), f.value(&next));
        prop_assert!(f1 <= f0 + 1e-12 * (1.0 + f0.abs()));
    }
}
