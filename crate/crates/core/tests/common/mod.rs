#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use weakdep::adversarial::BaseLawSpec;
use weakdep::functional::FunctionalSpec;
use weakdep::law::{DiscreteLaw, SupportSpec};
use weakdep::linalg::Matrix;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn measures(r: &mut ChaCha8Rng, k: usize, unit: bool) -> Vec<f64> {
    (0..k).map(|_| if unit { 1.0 } else { r.random_range(0.5..2.0) }).collect()
}

/// Random support with `k_z = k_w`; `iota_y` is never collinear with `mu_y`.
pub fn support(r: &mut ChaCha8Rng, k_y: usize, k: usize, k_x: usize, unit: bool) -> SupportSpec<f64> {
    let mu_y = measures(r, k_y, unit);
    let mut iota: Vec<f64> = mu_y.iter().enumerate().map(|(h, m)| m * h as f64).collect();
    iota[0] += r.random_range(-0.5..0.5);
    SupportSpec::new(mu_y, measures(r, k, unit), measures(r, k, unit), measures(r, k_x, unit), iota).unwrap()
}

/// Random strictly positive law.
pub fn law(r: &mut ChaCha8Rng, s: SupportSpec<f64>) -> DiscreteLaw<f64> {
    let raw: Vec<f64> = (0..s.cells()).map(|_| r.random_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    DiscreteLaw::new(s, raw.into_iter().map(|p| p / total).collect()).unwrap()
}

pub fn random_law(seed: u64) -> DiscreteLaw<f64> {
    let mut r = rng(seed);
    let k_y = r.random_range(2..=4);
    let k = r.random_range(1..=4);
    let k_x = r.random_range(1..=3);
    let unit = r.random_bool(0.5);
    let s = support(&mut r, k_y, k, k_x, unit);
    law(&mut r, s)
}

/// Binary `2 × 2 × 2 × 1` law with positive mass everywhere.
pub fn random_late_law(r: &mut ChaCha8Rng) -> DiscreteLaw<f64> {
    let s = SupportSpec::counting(&[0.0, r.random_range(0.5..3.0)], 2, 1).unwrap();
    law(r, s)
}

fn density_column(r: &mut ChaCha8Rng, mu: &[f64]) -> Vec<f64> {
    let raw: Vec<f64> = mu.iter().map(|_| r.random_range(0.2..1.0)).collect();
    let total: f64 = raw.iter().zip(mu).map(|(p, m)| p * m).sum();
    raw.into_iter().map(|p| p / total).collect()
}

/// Random base `P*` for the given functional on a random support.
pub fn random_base(seed: u64, functional: FunctionalSpec<f64>, k: usize, k_y: usize, k_x: usize, unit: bool) -> BaseLawSpec<f64> {
    let mut r = rng(seed);
    let s = support(&mut r, k_y, k, k_x, unit);
    let raw: Vec<f64> = (0..k * k_x).map(|_| r.random_range(0.2..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let f_zx = Matrix::from_fn(k, k_x, |l, m| raw[l * k_x + m] / total);
    let w_cols: Vec<Vec<f64>> = (0..k_x).map(|_| density_column(&mut r, s.mu_w())).collect();
    let y_cols: Vec<Vec<f64>> = (0..k_x).map(|_| density_column(&mut r, s.mu_y())).collect();
    let pi_w = Matrix::from_fn(k, k_x, |j, m| w_cols[m][j]);
    let pi_y = Matrix::from_fn(k_y, k_x, |h, m| y_cols[m][h]);
    BaseLawSpec::new(s, functional, f_zx, pi_w, pi_y).unwrap()
}

/// Random base with a random generic representer.
pub fn random_generic_base(seed: u64) -> BaseLawSpec<f64> {
    let mut r = rng(seed ^ 0xa5a5);
    let k = r.random_range(2..=4);
    let k_y = r.random_range(2..=4);
    let k_x = r.random_range(1..=3);
    let alpha = Matrix::from_fn(k, k_x, |_, _| r.random_range(-2.0..2.0));
    random_base(seed, FunctionalSpec::Generic { alpha }, k, k_y, k_x, r.random_bool(0.5))
}

/// Binary LATE law from first-stage and outcome probabilities, with Y ⊥ Z | W.
pub fn late_law(pz1: f64, pw1: [f64; 2], py1: [f64; 2]) -> DiscreteLaw<f64> {
    DiscreteLaw::from_fn(SupportSpec::binary(1), |h, l, j, _| {
        let pz = if l == 1 { pz1 } else { 1.0 - pz1 };
        let pw = if j == 1 { pw1[l] } else { 1.0 - pw1[l] };
        let py = if h == 1 { py1[j] } else { 1.0 - py1[j] };
        pz * pw * py
    })
    .unwrap()
}

/// `(E[Y|Z=1] − E[Y|Z=0]) / (E[W|Z=1] − E[W|Z=0])` by direct summation.
pub fn wald_ratio(law: &DiscreteLaw<f64>) -> f64 {
    let s = law.support();
    let mut pz = [0.0; 2];
    let mut ey = [0.0; 2];
    let mut ew = [0.0; 2];
    for h in 0..s.k_y() {
        for l in 0..2 {
            for j in 0..2 {
                let p = law.p(h, l, j, 0);
                pz[l] += p;
                ey[l] += p * s.y_mean(h);
                ew[l] += p * j as f64;
            }
        }
    }
    (ey[1] / pz[1] - ey[0] / pz[0]) / (ew[1] / pz[1] - ew[0] / pz[0])
}
