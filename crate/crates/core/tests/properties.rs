use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;

use wavefront::heteroclinic::{compute_heteroclinic, integrate_dde};
use wavefront::model::{Atom, Chemostat, DelayKernel, DensityPiece, FnSegment, HistorySegment, LogisticDistributed, Model, Segment};
use wavefront::profile::{alpha, beta, solve_profile, wave_params};
use wavefront::spectrum::{count_roots_rect, root_continuation, spectrum_report, CharProblem, Rect};
use wavefront::Tolerances;

const TAU: f64 = 1.0;

/// Two atoms plus one quadratic density piece, all `n x n`.
fn kernel_from(n: usize, w: &[f64]) -> DelayKernel {
    let mat = |k: usize| DMatrix::from_fn(n, n, |i, j| w[(k * n * n + i * n + j) % w.len()]);
    let atoms = vec![Atom { theta: 0.0, weight: mat(0) }, Atom { theta: -0.6 * TAU, weight: mat(1) }];
    let density = vec![DensityPiece { start: -TAU, end: -0.2 * TAU, coeffs: vec![mat(2), mat(3), mat(4)] }];
    DelayKernel::new(n, TAU, atoms, density, 8).unwrap()
}

/// Smooth test segment `phi_i(theta) = a_i + b_i sin(w_i theta + p_i)`.
fn wave(p: &[f64]) -> FnSegment<impl Fn(f64, &mut [f64]) + '_> {
    let n = p.len() / 4;
    FnSegment::new(n, TAU, move |t, out: &mut [f64]| {
        for (i, o) in out.iter_mut().enumerate() {
            let q = &p[4 * i..4 * i + 4];
            *o = q[0] + q[1] * (q[2] * t + q[3]).sin();
        }
    })
}

fn sup_norm_on_grid(seg: &dyn Segment) -> f64 {
    (0..=400).map(|k| -TAU * k as f64 / 400.0).flat_map(|t| seg.eval(t)).fold(0.0, |m, x| m.max(x.abs()))
}

fn builtin_models() -> Vec<Box<dyn Model>> {
    let uniform = DelayKernel::new(
        1,
        TAU,
        vec![],
        vec![DensityPiece { start: -TAU, end: 0.0, coeffs: vec![DMatrix::from_element(1, 1, 1.0)] }],
        8,
    )
    .unwrap();
    vec![
        Box::new(LogisticDistributed::fisher_kpp_delay(1.0, 1.0, 1.0).unwrap()),
        Box::new(LogisticDistributed::new(1.5, uniform).unwrap()),
        Box::new(Chemostat::new(1.0, 2.0, 0.2, 3.0, 1.0, 1.0, 1.0).unwrap()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kernel_is_linear(
        n in 1usize..=2,
        w in prop::collection::vec(-2.0f64..2.0, 20),
        p in prop::collection::vec(-2.0f64..2.0, 8),
        q in prop::collection::vec(-2.0f64..2.0, 8),
        a in -3.0f64..3.0,
        b in -3.0f64..3.0,
    ) {
        let k = kernel_from(n, &w);
        let (phi, psi) = (wave(&p[..4 * n]), wave(&q[..4 * n]));
        let combo = FnSegment::new(n, TAU, |t, out: &mut [f64]| {
            let (x, y) = (phi.eval(t), psi.eval(t));
            for i in 0..n {
                out[i] = a * x[i] + b * y[i];
            }
        });
        let lhs = k.apply(&combo).unwrap();
        let (kx, ky) = (k.apply(&phi).unwrap(), k.apply(&psi).unwrap());
        for i in 0..n {
            let rhs = a * kx[i] + b * ky[i];
            prop_assert!((lhs[i] - rhs).abs() <= 1e-12 * (1.0 + rhs.abs() + (a * kx[i]).abs() + (b * ky[i]).abs()));
        }
    }

    #[test]
    fn symbol_matches_exponential_segment(
        n in 1usize..=2,
        w in prop::collection::vec(-2.0f64..2.0, 20),
        v in prop::collection::vec(-1.0f64..1.0, 2),
        z in -5.0f64..5.0,
    ) {
        let k = kernel_from(n, &w);
        let seg = FnSegment::new(n, TAU, |t, out: &mut [f64]| {
            for i in 0..n {
                out[i] = (z * t).exp() * v[i];
            }
        });
        let applied = k.apply(&seg).unwrap();
        let sym = k.symbol(Complex64::new(z, 0.0));
        for i in 0..n {
            let expect: Complex64 = (0..n).map(|j| sym[(i, j)] * v[j]).sum();
            prop_assert!(expect.im.abs() < 1e-12);
            prop_assert!((applied[i] - expect.re).abs() <= 1e-9 * (1.0 + expect.re.abs()), "{} vs {}", applied[i], expect.re);
        }
    }

    #[test]
    fn kernel_norm_bounds_application(
        n in 1usize..=2,
        w in prop::collection::vec(-2.0f64..2.0, 20),
        p in prop::collection::vec(-2.0f64..2.0, 8),
    ) {
        let k = kernel_from(n, &w);
        let phi = wave(&p[..4 * n]);
        let bound = k.norm() * sup_norm_on_grid(&phi);
        for x in k.apply(&phi).unwrap() {
            prop_assert!(x.abs() <= bound * (1.0 + 1e-9) + 1e-12);
        }
    }

    #[test]
    fn charpoly_is_conjugate_symmetric(
        w in prop::collection::vec(-2.0f64..2.0, 20),
        re in -3.0f64..3.0,
        im in -3.0f64..3.0,
        eps in 0.0f64..1.0,
    ) {
        let problem = CharProblem::new(kernel_from(2, &w), eps).unwrap();
        let z = Complex64::new(re, im);
        let (a, b) = (problem.charpoly(z.conj()), problem.charpoly(z).conj());
        prop_assert!((a - b).norm() <= 1e-12 * (1.0 + a.norm()));
    }

    #[test]
    fn kernel_root_identities(eps in 1e-3f64..10.0, d in 0.1f64..10.0) {
        let (a, b) = (alpha(eps, d), beta(eps, d));
        let e2 = eps * eps * d;
        prop_assert!(a < 0.0 && b > 0.0);
        prop_assert!(((a + b) * e2 - 1.0).abs() <= 1e-12);
        prop_assert!((a * b * e2 + 1.0).abs() <= 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn root_counts_add_over_partitions(
        w in -1.5f64..-0.1,
        theta in -1.0f64..-0.2,
        g in 0.2f64..2.0,
        cut_re in 0.1f64..0.9,
        cut_im in 0.1f64..0.9,
    ) {
        // z = g + w e^{z theta}
        let atoms = vec![Atom { theta: 0.0, weight: DMatrix::from_element(1, 1, g) }, Atom { theta, weight: DMatrix::from_element(1, 1, w) }];
        let problem = CharProblem::new(DelayKernel::new(1, 1.0, atoms, vec![], 8).unwrap(), 0.0).unwrap();
        let tol = Tolerances::default();
        let (re0, re1, im0, im1) = (-2.0, 3.0, -6.0, 6.0);
        let xr = re0 + cut_re * (re1 - re0);
        let xi = im0 + cut_im * (im1 - im0);
        let count = |r: Rect| count_roots_rect(&problem, &r, &tol).unwrap();
        let whole = count(Rect::new(re0, re1, im0, im1));
        let parts = count(Rect::new(re0, xr, im0, xi)) + count(Rect::new(xr, re1, im0, xi))
            + count(Rect::new(re0, xr, xi, im1)) + count(Rect::new(xr, re1, xi, im1));
        prop_assert_eq!(whole, parts);
        let upper = count(Rect::new(re0, re1, 0.5, im1));
        let lower = count(Rect::new(re0, re1, im0, -0.5));
        prop_assert_eq!(upper, lower);
    }

    #[test]
    fn integrator_is_fourth_order(u0 in 0.05f64..0.9, b in 0.5f64..2.0) {
        let m = LogisticDistributed::fisher_kpp_delay(b, 0.0, 1.0).unwrap();
        let exact = |t: f64| u0 / (u0 + (1.0 - u0) * (-b * t).exp());
        let t_end = 2.0;
        let err = |h: f64| {
            let traj = integrate_dde(&m, &HistorySegment::constant(0.0, &[u0]), t_end, h).unwrap();
            (traj.eval(t_end)[0] - exact(t_end)).abs()
        };
        let (coarse, fine) = (err(0.1), err(0.05));
        prop_assert!(coarse / fine >= 14.0, "{} / {}", coarse, fine);
    }

    #[test]
    fn jacobian_matches_central_differences(p in prop::collection::vec(0.0f64..1.0, 8)) {
        for model in builtin_models() {
            let n = model.dim();
            let tau = model.tau();
            let k = model.equilibrium().to_vec();
            // phi(theta) = K * p0 (1 + 0.3 sin(p1 theta)); direction psi smooth and of mixed sign
            let phi = |t: f64, out: &mut [f64]| {
                for i in 0..n {
                    out[i] = k[i] * p[2 * i] * (1.0 + 0.3 * (5.0 * p[2 * i + 1] * t).sin());
                }
            };
            let dir = |t: f64, out: &mut [f64]| {
                for i in 0..n {
                    out[i] = (3.0 * p[4 + i] * t + p[6 + i]).cos();
                }
            };
            let jac = model.jacobian_at(&FnSegment::new(n, tau, phi));
            let lin = jac.apply(&FnSegment::new(n, tau, dir)).unwrap();
            let fd = |h: f64| {
                let shifted = |s: f64| FnSegment::new(n, tau, move |t, out: &mut [f64]| {
                    let mut d = vec![0.0; n];
                    phi(t, out);
                    dir(t, &mut d);
                    for i in 0..n {
                        out[i] += s * d[i];
                    }
                });
                let (mut fp, mut fm) = (vec![0.0; n], vec![0.0; n]);
                model.eval(&shifted(h), &mut fp);
                model.eval(&shifted(-h), &mut fm);
                (0..n).map(|i| ((fp[i] - fm[i]) / (2.0 * h) - lin[i]).abs()).fold(0.0, f64::max)
            };
            let (e1, e2) = (fd(1e-3), fd(5e-4));
            if e1 > 1e-11 {
                prop_assert!((e1 / e2).log2() >= 1.9, "{}: {} then {}", model.name(), e1, e2);
            }
        }
    }
}

#[test]
fn lambda_eps_approaches_lambda0_monotonically() {
    let tol = Tolerances::default();
    for model in builtin_models() {
        let spec = spectrum_report(model.as_ref(), &[], &tol).unwrap();
        let kernel = model.jacobian_at(&FnSegment::new(model.dim(), model.tau(), |_, out: &mut [f64]| out.fill(0.0)));
        let base = CharProblem::with_diffusion(kernel, 0.0, model.diffusion().to_vec()).unwrap();
        let gaps: Vec<f64> = (3..=10)
            .map(|k| {
                let eps = 0.5f64.powi(k);
                let (lam, _, _) = root_continuation(&base.at_epsilon(eps).unwrap(), spec.lambda0, &tol).unwrap();
                (lam - spec.lambda0).abs()
            })
            .collect();
        assert!(gaps.windows(2).all(|g| g[1] < g[0]), "{}: {gaps:?}", model.name());
    }
}

#[test]
fn contraction_ratio_does_not_grow_with_speed() {
    let tol = Tolerances::default();
    let m = LogisticDistributed::fisher_kpp_delay(1.0, 1.0, 1.0).unwrap();
    let spec = spectrum_report(&m, &[], &tol).unwrap();
    let het = compute_heteroclinic(&m, &spec, &tol).unwrap();
    let speeds = [4.0, 6.0, 9.0, 14.0, 20.0];
    let rho: Vec<f64> = speeds
        .iter()
        .map(|&c| {
            let p = wave_params(&m, c, &spec, &tol).unwrap();
            let psi = solve_profile(&m, &het, &p, &tol).unwrap();
            *psi.diagnostics.contraction_ratios.last().unwrap()
        })
        .collect();
    for w in rho.windows(2) {
        assert!(w[1] <= w[0] + 0.05, "{rho:?}");
    }
}
