mod common;

use proptest::prelude::*;
use rand::Rng;
use weakdep::law::{estimate, kl_divergence, sample, tv_distance, DiscreteLaw, Observation, Dataset, SupportSpec, Var};
use weakdep::Error;

#[test]
fn marginal_matches_direct_double_sum() {
    for seed in 0..20 {
        let law = common::random_law(seed);
        let s = law.support().clone();
        let wx = law.marginal(&[Var::W, Var::X]);
        for j in 0..s.k_w() {
            for m in 0..s.k_x() {
                let mut direct = 0.0;
                for h in 0..s.k_y() {
                    for l in 0..s.k_z() {
                        direct += law.p(h, l, j, m);
                    }
                }
                assert!((wx.get(&[j, m]) - direct).abs() < 1e-15);
            }
        }
        assert!((wx.total() - 1.0).abs() < 1e-10);
    }
}

#[test]
fn kernel_is_ratio_of_marginals_and_reconstructs_joint() {
    for seed in 20..40 {
        let law = common::random_law(seed);
        let s = law.support().clone();
        let k = law.conditional_kernel(Var::W, Some(Var::Z)).unwrap();
        assert!(k.max_row_defect() < 1e-10);
        for m in 0..s.k_x() {
            for l in 0..s.k_z() {
                let mut zx = 0.0;
                let mut wzx = vec![0.0; s.k_w()];
                for h in 0..s.k_y() {
                    for j in 0..s.k_w() {
                        zx += law.p(h, l, j, m);
                        wzx[j] += law.p(h, l, j, m);
                    }
                }
                for j in 0..s.k_w() {
                    let oracle = wzx[j] / zx / s.mu_w()[j];
                    assert!((k.strata[m][(l, j)] - oracle).abs() < 1e-10 * oracle.max(1.0));
                    // f(W | Z, X) μ_W P(Z, X) re-yields P(W, Z, X)
                    assert!((k.prob(m, l, j) * zx - wzx[j]).abs() < 1e-12);
                }
            }
        }
    }
}

#[test]
fn independent_w_and_z_give_identical_rows() {
    let s = SupportSpec::counting(&[0.0, 1.0, 2.0], 3, 2).unwrap();
    let a = [0.2, 0.5, 0.3];
    let b = [0.1, 0.6, 0.3];
    let law = DiscreteLaw::from_fn(s, |h, l, j, m| a[h] * b[l] * a[j] * (m + 1) as f64).unwrap();
    let k = law.conditional_kernel(Var::W, Some(Var::Z)).unwrap();
    for m in 0..2 {
        for l in 1..3 {
            for j in 0..3 {
                assert!((k.strata[m][(l, j)] - k.strata[m][(0, j)]).abs() < 1e-12);
            }
        }
    }
}

fn subset_tv(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len();
    let mut best: f64 = 0.0;
    for mask in 0u32..(1 << n) {
        let gap: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| a[i] - b[i]).sum();
        best = best.max(gap.abs());
    }
    best
}

#[test]
fn tv_equals_subset_enumeration() {
    let mut r = common::rng(5);
    for _ in 0..30 {
        // 2·2·1·3 = 12 cells
        let s = SupportSpec::counting(&[0.0, 1.0], 1, 3).unwrap();
        let a = common::law(&mut r, s.clone());
        let b = common::law(&mut r, s);
        assert!(a.mass().len() <= 12);
        let tv = a.tv_distance(&b).unwrap();
        assert!((tv - subset_tv(a.mass(), b.mass())).abs() < 1e-12);
    }
}

#[test]
fn point_masses_are_at_distance_one() {
    let s: SupportSpec<f64> = SupportSpec::binary(1);
    let a = DiscreteLaw::point_mass(s.clone(), [0, 0, 0, 0]);
    let b = DiscreteLaw::point_mass(s, [1, 0, 1, 0]);
    assert_eq!(a.tv_distance(&b).unwrap(), 1.0);
    assert_eq!(a.tv_distance(&a).unwrap(), 0.0);
    assert!(matches!(a.kl_divergence(&b), Err(Error::AbsoluteContinuityViolation { .. })));
}

#[test]
fn kl_two_cell_closed_form() {
    let kl = kl_divergence(&[0.5, 0.5], &[0.25, 0.75]).unwrap();
    let oracle = 0.5 * 2f64.ln() + 0.5 * (2.0f64 / 3.0).ln();
    assert!((kl - oracle).abs() < 1e-15);
}

#[test]
fn different_supports_are_rejected() {
    let a: DiscreteLaw<f64> = DiscreteLaw::uniform(SupportSpec::binary(1));
    let b = DiscreteLaw::uniform(SupportSpec::binary(2));
    assert_eq!(a.tv_distance(&b), Err(Error::SupportMismatch));
}

fn mass_vec(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.01f64..1.0, len).prop_map(|v| {
        let t: f64 = v.iter().sum();
        v.into_iter().map(|x| x / t).collect()
    })
}

proptest! {
    #[test]
    fn pinsker_holds(a in mass_vec(16), b in mass_vec(16)) {
        let tv = tv_distance(&a, &b);
        let kl = kl_divergence(&a, &b).unwrap();
        prop_assert!(tv <= (kl / 2.0).sqrt() + 1e-12);
    }

    #[test]
    fn tv_is_a_metric(a in mass_vec(8), b in mass_vec(8), c in mass_vec(8)) {
        let ab = tv_distance(&a, &b);
        prop_assert!((ab - tv_distance(&b, &a)).abs() < 1e-15);
        prop_assert!(ab <= tv_distance(&a, &c) + tv_distance(&c, &b) + 1e-12);
        prop_assert!((0.0..=1.0).contains(&ab));
    }

    #[test]
    fn marginals_are_normalized(seed in 0u64..1000) {
        let law = common::random_law(seed);
        for keep in [&[Var::Y][..], &[Var::Z, Var::X], &[Var::Y, Var::W, Var::X]] {
            let t = law.marginal(keep);
            prop_assert!((t.total() - 1.0).abs() < 1e-10);
            prop_assert!(t.data.iter().all(|&p| p >= 0.0));
        }
    }
}

#[test]
fn sample_frequencies_within_clt_band() {
    let law = common::random_law(77);
    let n = 100_000;
    let data = sample(&law, n, 3);
    let counts = estimate(&data, law.support(), 0.0).unwrap();
    for (&p, &f) in law.mass().iter().zip(counts.mass()) {
        assert!((f - p).abs() <= 4.0 * (p * (1.0 - p) / n as f64).sqrt(), "{p} vs {f}");
    }
}

#[test]
fn sampling_is_deterministic_and_point_masses_repeat() {
    let law = common::random_law(8);
    assert_eq!(sample(&law, 500, 9), sample(&law, 500, 9));
    assert_ne!(sample(&law, 500, 9), sample(&law, 500, 10));
    let point = DiscreteLaw::point_mass(law.support().clone(), [1, 0, 0, 0]);
    let rows = sample(&point, 50, 1).rows;
    assert!(rows.iter().all(|o| *o == rows[0]));
    assert_eq!(rows[0].y, law.support().y_mean(1));
}

#[test]
fn estimate_round_trip_and_limits() {
    let law = common::random_law(31);
    let back = estimate(&sample(&law, 1_000_000, 4), law.support(), 0.0).unwrap();
    assert!(law.tv_distance(&back).unwrap() < 0.005);

    let s = SupportSpec::binary(1);
    let rows = Dataset::new(vec![Observation { y: 1.0, z: 1, w: 0, x: 0 }; 25]);
    let point = estimate(&rows, &s, 0.0).unwrap();
    assert_eq!(point.p(1, 1, 0, 0), 1.0);
    let smooth = estimate(&rows, &s, 1e9).unwrap();
    let u = 1.0 / s.cells() as f64;
    assert!(smooth.mass().iter().all(|&p| (p - u).abs() < 1e-6));
    assert_eq!(estimate(&Dataset::default(), &s, 0.0), Err(Error::EmptyDataset));
}

#[test]
fn rows_outside_the_support_are_rejected() {
    let s = SupportSpec::binary(1);
    let mut r = common::rng(1);
    let y: f64 = r.random_range(0.1..0.9);
    let rows = Dataset::new(vec![Observation { y, z: 0, w: 0, x: 0 }]);
    assert_eq!(estimate(&rows, &s, 0.0), Err(Error::RowOutsideSupport { row: 0 }));
}
