mod common;

use proptest::prelude::*;
use rand::Rng;
use weakdep::functional::{
    adjoint_operators, check_model_membership, cond_mean_operators, evaluate_phi, expected_m, psi1_mean,
    response_vectors, riesz_alpha, riesz_pairing, solve_g, solve_q, FunctionalSpec, GridFunction,
};
use weakdep::law::{DiscreteLaw, SupportSpec};
use weakdep::linalg::{Matrix, Svd};
use weakdep::Error;

const TOL: f64 = 1e-8;

/// Z uniform, `P(W=1 | Z=l) = pw[l]`, `P(Y=1 | Z=l) = r[l]`, Y ⊥ W | Z.
fn binary_first_stage(pw: [f64; 2], r: [f64; 2]) -> DiscreteLaw<f64> {
    DiscreteLaw::from_fn(SupportSpec::binary(1), |h, l, j, _| {
        let w = if j == 1 { pw[l] } else { 1.0 - pw[l] };
        let y = if h == 1 { r[l] } else { 1.0 - r[l] };
        0.5 * w * y
    })
    .unwrap()
}

#[test]
fn binary_solve_matches_direct_two_by_two() {
    let law = binary_first_stage([0.2, 0.6], [0.3, 0.7]);
    let g = solve_g(&law, TOL).unwrap();
    // [[0.8, 0.2], [0.4, 0.6]] g = [0.3, 0.7] by Cramer's rule
    let det = 0.8 * 0.6 - 0.2 * 0.4;
    let g0 = (0.3 * 0.6 - 0.2 * 0.7) / det;
    let g1 = (0.8 * 0.7 - 0.3 * 0.4) / det;
    assert!((g.get(0, 0) - g0).abs() < 1e-12 && (g.get(1, 0) - g1).abs() < 1e-12);
    assert!((g.get(0, 0) - 0.1).abs() < 1e-12 && (g.get(1, 0) - 1.1).abs() < 1e-12);
}

#[test]
fn independent_w_with_varying_response_has_no_solution() {
    let law = binary_first_stage([0.4, 0.4], [0.3, 0.7]);
    match solve_g(&law, TOL) {
        Err(Error::NoSolution { stratum: 0, residual }) => assert!(residual > TOL),
        other => panic!("{other:?}"),
    }
    let report = check_model_membership(&law, &FunctionalSpec::Late, TOL);
    assert!(!report.in_model && report.g_residual > TOL);
    // α non-constant in W with a rank-one adjoint
    let alpha = riesz_alpha(&law, &FunctionalSpec::Late).unwrap();
    assert!(matches!(solve_q(&law, &alpha, TOL), Err(Error::NoSolution { .. })));
}

#[test]
fn deterministic_w_equals_z() {
    let r = [0.3, 0.7];
    let law = DiscreteLaw::from_fn(SupportSpec::binary(1), |h, l, j, _| {
        if l != j {
            return 0.0;
        }
        0.5 * if h == 1 { r[l] } else { 1.0 - r[l] }
    })
    .unwrap();
    let t = cond_mean_operators(&law).unwrap();
    assert!(t[0].max_abs_diff(&Matrix::identity(2)) < 1e-15);
    let g = solve_g(&law, TOL).unwrap();
    assert!((g.get(0, 0) - 0.3).abs() < 1e-12 && (g.get(1, 0) - 0.7).abs() < 1e-12);
    let alpha = riesz_alpha(&law, &FunctionalSpec::Late).unwrap();
    let q = solve_q(&law, &alpha, TOL).unwrap();
    assert!(q.values.max_abs_diff(&alpha.values) < 1e-12);
    assert!((evaluate_phi(&law, &FunctionalSpec::Late, TOL).unwrap() - 0.4).abs() < 1e-12);
    let report = check_model_membership(&law, &FunctionalSpec::Late, TOL);
    assert!(report.in_model && report.g_residual < 1e-14 && report.q_residual < 1e-14);
}

#[test]
fn independence_gives_rank_one_operator() {
    let law = binary_first_stage([0.35, 0.35], [0.5, 0.5]);
    let t = &cond_mean_operators(&law).unwrap()[0];
    assert_eq!(Svd::new(t).rank(), 1);
    let r = &response_vectors(&law).unwrap()[0];
    assert!((r[0] - r[1]).abs() < 1e-15);
}

#[test]
fn response_vector_matches_direct_summation() {
    for seed in 0..20 {
        let law = common::random_law(seed);
        let s = law.support();
        let rs = response_vectors(&law).unwrap();
        for m in 0..s.k_x() {
            for l in 0..s.k_z() {
                let (mut num, mut den) = (0.0, 0.0);
                for h in 0..s.k_y() {
                    for j in 0..s.k_w() {
                        num += law.p(h, l, j, m) * s.y_mean(h);
                        den += law.p(h, l, j, m);
                    }
                }
                assert!((rs[m][l] - num / den).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn late_phi_and_q_match_moment_formulas() {
    let mut r = common::rng(11);
    for _ in 0..100 {
        let law = common::random_late_law(&mut r);
        let phi = evaluate_phi(&law, &FunctionalSpec::Late, TOL).unwrap();
        let wald = common::wald_ratio(&law);
        assert!((phi - wald).abs() < 1e-10 * wald.abs().max(1.0), "{phi} vs {wald}");

        // q(Z) = (2Z − 1) var(Z) / (f_Z(Z) cov(W, Z)); without the var(Z)
        // factor E[q | W] would be α / var(Z)
        let pz = law.p_zx();
        let pwz = law.marginal(&[weakdep::law::Var::Z, weakdep::law::Var::W]);
        let ez = pz[(1, 0)];
        let ew = pwz.get(&[0, 1]) + pwz.get(&[1, 1]);
        let cov = pwz.get(&[1, 1]) - ez * ew;
        let alpha = riesz_alpha(&law, &FunctionalSpec::Late).unwrap();
        let q = solve_q(&law, &alpha, TOL).unwrap();
        for l in 0..2 {
            let var_z = pz[(0, 0)] * pz[(1, 0)];
            let oracle = (2.0 * l as f64 - 1.0) * var_z / (pz[(l, 0)] * cov);
            assert!((q.get(l, 0) - oracle).abs() < 1e-9 * oracle.abs().max(1.0));
        }
    }
}

#[test]
fn closed_form_representers() {
    // LATE with f(W=1) = 0.5
    let law = binary_first_stage([0.3, 0.7], [0.4, 0.6]);
    let a = riesz_alpha(&law, &FunctionalSpec::Late).unwrap();
    assert!((a.get(0, 0) + 2.0).abs() < 1e-12 && (a.get(1, 0) - 2.0).abs() < 1e-12);

    // AteIv with f(W=1 | X=m) = 0.25
    let law = DiscreteLaw::from_fn(SupportSpec::binary(2), |_, l, j, m| {
        let w = if j == 1 { 0.25 } else { 0.75 };
        w * [0.3, 0.7][l] * [0.4, 0.6][m] / 2.0
    })
    .unwrap();
    let a = riesz_alpha(&law, &FunctionalSpec::AteIv).unwrap();
    for m in 0..2 {
        assert!((a.get(1, m) - 4.0f64).abs() < 1e-12 && (a.get(0, m) + 4.0f64 / 3.0).abs() < 1e-12);
    }
}

#[test]
fn proximal_representer_matches_treatment_kernel() {
    let mut r = common::rng(3);
    for _ in 0..20 {
        let k = r.random_range(1..=3);
        let s = common::support(&mut r, 2, k, 4, false);
        let law = common::law(&mut r, s);
        let a = riesz_alpha(&law, &FunctionalSpec::ProximalAte).unwrap();
        for j in 0..k {
            for l in 0..2 {
                let mut by_a = [0.0; 2];
                for (t, slot) in by_a.iter_mut().enumerate() {
                    for h in 0..2 {
                        for z in 0..k {
                            *slot += law.p(h, z, j, 2 * l + t);
                        }
                    }
                }
                for t in 0..2 {
                    let f = by_a[t] / (by_a[0] + by_a[1]);
                    let oracle = (2.0 * t as f64 - 1.0) / f;
                    assert!((a.get(j, 2 * l + t) - oracle).abs() < 1e-10 * oracle.abs());
                }
            }
        }
    }
}

fn specs_for(law: &DiscreteLaw<f64>, r: &mut impl Rng) -> Vec<FunctionalSpec<f64>> {
    let s = law.support();
    let mut out = vec![FunctionalSpec::Generic {
        alpha: Matrix::from_fn(s.k_w(), s.k_x(), |_, _| r.random_range(-1.0..1.0)),
    }];
    if s.k_w() == 2 {
        out.push(FunctionalSpec::AteIv);
    }
    if s.k_x() == 1 {
        out.push(FunctionalSpec::Npiv { omega: (0..s.k_w()).map(|_| r.random_range(-1.0..1.0)).collect() });
    }
    if s.k_x() == 2 {
        out.push(FunctionalSpec::TreatedMean);
    }
    if s.k_x().is_multiple_of(2) {
        out.push(FunctionalSpec::ProximalAte);
    }
    out
}

#[test]
fn representer_reproduces_the_functional() {
    let mut r = common::rng(21);
    for seed in 0..60 {
        let law = common::random_law(seed);
        let s = law.support();
        for spec in specs_for(&law, &mut r) {
            let alpha = riesz_alpha(&law, &spec).unwrap();
            for _ in 0..5 {
                let g = GridFunction { values: Matrix::from_fn(s.k_w(), s.k_x(), |_, _| r.random_range(-3.0..3.0)) };
                let direct = expected_m(&law, &spec, &g).unwrap();
                let paired = riesz_pairing(&law, &alpha, &g);
                assert!((direct - paired).abs() < 1e-10 * direct.abs().max(1.0), "{}: {direct} vs {paired}", spec.name());
            }
        }
    }
}

#[test]
fn operators_fix_constants_and_are_adjoint() {
    let mut r = common::rng(4);
    for seed in 100..140 {
        let law = common::random_law(seed);
        let s = law.support();
        let t = cond_mean_operators(&law).unwrap();
        let a = adjoint_operators(&law).unwrap();
        let pzx = law.p_zx();
        let pwx = law.p_wx();
        for m in 0..s.k_x() {
            let c = r.random_range(-5.0..5.0);
            assert!(t[m].matvec(&vec![c; s.k_w()]).iter().all(|v| (v - c).abs() < 1e-12));
            let g: Vec<f64> = (0..s.k_w()).map(|_| r.random_range(-1.0..1.0)).collect();
            let q: Vec<f64> = (0..s.k_z()).map(|_| r.random_range(-1.0..1.0)).collect();
            let tg = t[m].matvec(&g);
            let aq = a[m].matvec(&q);
            let lhs: f64 = (0..s.k_z()).map(|l| q[l] * tg[l] * pzx[(l, m)]).sum();
            let rhs: f64 = (0..s.k_w()).map(|j| aq[j] * g[j] * pwx[(j, m)]).sum();
            assert!((lhs - rhs).abs() < 1e-10);
        }
    }
}

#[test]
fn phi_is_well_defined_on_a_singular_operator() {
    // rank-2 W | Z kernel: the third row averages the first two
    let rows = [[0.5, 0.5, 0.0], [0.0, 0.0, 1.0], [0.25, 0.25, 0.5]];
    let ey = [0.2, 0.5, 0.7];
    let s = SupportSpec::counting(&[0.0, 1.0], 3, 1).unwrap();
    let law = DiscreteLaw::from_fn(s, |h, l, j, _| {
        let y = if h == 1 { ey[j] } else { 1.0 - ey[j] };
        rows[l][j] * y / 3.0
    })
    .unwrap();
    let spec = FunctionalSpec::Generic { alpha: Matrix::from_rows(&[vec![1.0], vec![1.0], vec![2.0]]) };
    let report = check_model_membership(&law, &spec, TOL);
    assert!(report.in_model, "{report:?}");
    let t = &cond_mean_operators(&law).unwrap()[0];
    let kernel = Svd::new(t).kernel_basis();
    assert_eq!(kernel.len(), 1);
    let g = solve_g(&law, TOL).unwrap();
    let alpha = riesz_alpha(&law, &spec).unwrap();
    let phi = riesz_pairing(&law, &alpha, &g);
    for c in [-3.0, 0.5, 10.0] {
        let other = GridFunction::from_columns(&[g.column(0).iter().zip(&kernel[0]).map(|(a, k)| a + c * k).collect()]);
        let resid: f64 = t.matvec(&other.column(0)).iter().zip(&response_vectors(&law).unwrap()[0]).map(|(a, b)| (a - b).abs()).sum();
        assert!(resid < 1e-10);
        assert!((riesz_pairing(&law, &alpha, &other) - phi).abs() <= 1e-8);
    }
}

#[test]
fn zero_generic_representer_gives_zero() {
    let law = common::random_law(5);
    let s = law.support();
    let spec = FunctionalSpec::Generic { alpha: Matrix::zeros(s.k_w(), s.k_x()) };
    assert_eq!(evaluate_phi(&law, &spec, TOL).unwrap(), 0.0);
}

#[test]
fn incompatible_variants_are_rejected() {
    let law = common::late_law(0.5, [0.2, 0.8], [0.3, 0.7]);
    assert!(matches!(evaluate_phi(&law, &FunctionalSpec::TreatedMean, TOL), Err(Error::IncompatibleFunctional(_))));
    assert!(matches!(evaluate_phi(&law, &FunctionalSpec::ProximalAte, TOL), Err(Error::IncompatibleFunctional(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn psi1_is_unbiased_exactly_at_phi(seed in 0u64..10_000, shift in -2.0f64..2.0) {
        let law = common::random_law(seed);
        let mut r = common::rng(seed);
        for spec in specs_for(&law, &mut r) {
            let g = solve_g(&law, TOL).unwrap();
            let alpha = riesz_alpha(&law, &spec).unwrap();
            let q = solve_q(&law, &alpha, TOL).unwrap();
            let phi = riesz_pairing(&law, &alpha, &g);
            prop_assert!(psi1_mean(&law, &spec, &g, &q, phi).abs() < 1e-10 * phi.abs().max(1.0));
            if shift.abs() > 1e-3 {
                let off = psi1_mean(&law, &spec, &g, &q, phi + shift);
                prop_assert!((off + shift).abs() < 1e-9 * phi.abs().max(1.0));
            }
        }
    }

    #[test]
    fn random_square_laws_are_in_the_model(seed in 0u64..10_000) {
        let law = common::random_law(seed);
        let solves = weakdep::functional::solve_g_report(&law, TOL).unwrap();
        for s in &solves {
            prop_assert!(s.consistent);
        }
    }
}
