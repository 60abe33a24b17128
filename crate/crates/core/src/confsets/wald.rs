use super::{check_level, normal_quantile, ConfidenceRegion, Interval};
use crate::error::{Error, Result};
use crate::functional::{riesz_alpha, solve_g, solve_q, FunctionalSpec, GridFunction};
use crate::law::{estimate, Dataset, Observation, SupportSpec};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaldOptions {
    /// Fit `ĝ, q̂` on one half and evaluate on the other, both ways.
    pub cross_fit: bool,
    /// Residual tolerance for the empirical integral equations.
    pub tol: f64,
}

impl Default for WaldOptions {
    fn default() -> Self {
        Self { cross_fit: false, tol: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WaldOutcome {
    pub estimate: f64,
    pub se: f64,
    pub region: ConfidenceRegion,
}

struct Nuisances {
    g: GridFunction<f64>,
    q: GridFunction<f64>,
}

fn fit(rows: &[Observation], spec: &FunctionalSpec<f64>, support: &SupportSpec<f64>, tol: f64) -> Result<Nuisances> {
    let law = estimate(&Dataset::new(rows.to_vec()), support, 0.0)?;
    let degenerate = |e: Error| match e {
        Error::RowOutsideSupport { .. } | Error::EmptyDataset | Error::IncompatibleFunctional(_) => e,
        other => Error::DegenerateSample(other.to_string()),
    };
    let g = solve_g(&law, tol).map_err(degenerate)?;
    let alpha = riesz_alpha(&law, spec).map_err(degenerate)?;
    let q = solve_q(&law, &alpha, tol).map_err(degenerate)?;
    if !g.is_finite() || !q.is_finite() {
        return Err(Error::DegenerateSample("non-finite nuisance estimate".into()));
    }
    Ok(Nuisances { g, q })
}

fn psi(rows: &[Observation], spec: &FunctionalSpec<f64>, support: &SupportSpec<f64>, nu: &Nuisances) -> Vec<f64> {
    rows.iter()
        .map(|o| spec.m_value(support, &nu.g, o.w, o.x) + nu.q.get(o.z, o.x) * (o.y - nu.g.get(o.w, o.x)))
        .collect()
}

/// `ψ¹_{ĝ, q̂, 0}(O_i)` for every row, with nuisances solved on the
/// empirical law (or on the opposite half when cross-fitting).
pub fn influence_values(
    data: &Dataset,
    spec: &FunctionalSpec<f64>,
    support: &SupportSpec<f64>,
    opts: &WaldOptions,
) -> Result<Vec<f64>> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    spec.check_support(support)?;
    if !opts.cross_fit {
        let nu = fit(&data.rows, spec, support, opts.tol)?;
        return Ok(psi(&data.rows, spec, support, &nu));
    }
    if data.len() < 2 {
        return Err(Error::DegenerateSample("cross-fitting needs at least two rows".into()));
    }
    let (a, b) = data.rows.split_at(data.len() / 2);
    let nu_a = fit(a, spec, support, opts.tol)?;
    let nu_b = fit(b, spec, support, opts.tol)?;
    let mut out = psi(a, spec, support, &nu_b);
    out.extend(psi(b, spec, support, &nu_a));
    Ok(out)
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let ss: f64 = v.iter().map(|x| (x - mean) * (x - mean)).sum();
    (mean, (ss / (n - 1.0)).sqrt())
}

/// `φ̂ ± z_{1−α/2} σ̂ / √n`, intersected with `s`. `σ̂` is the sample
/// standard deviation (divisor `n − 1`) of the influence values.
pub fn wald_ci(
    data: &Dataset,
    spec: &FunctionalSpec<f64>,
    support: &SupportSpec<f64>,
    level: f64,
    s: Interval,
    opts: &WaldOptions,
) -> Result<WaldOutcome> {
    check_level(level)?;
    let psi = influence_values(data, spec, support, opts)?;
    if psi.len() < 2 {
        return Err(Error::DegenerateSample("at least two rows are needed for a standard error".into()));
    }
    let (estimate, se) = mean_sd(&psi);
    let half = normal_quantile(0.5 + level / 2.0) * se / (psi.len() as f64).sqrt();
    let ci = Interval { lo: estimate - half, hi: estimate + half };
    Ok(WaldOutcome { estimate, se, region: ConfidenceRegion::from_pieces(vec![ci], s) })
}

/// Inverts the generic score statistic `√n P_n{ψ¹_θ} / σ̂_θ` with
/// `σ̂²_θ = P_n{ψ¹_θ²}`. Since `ψ¹_θ = ψ¹_0 − θ` the accepted set is
/// `φ̂ ± z s / √(n − z²)` (`s` the divisor-`n` deviation), or the whole
/// line once `n ≤ z²`.
pub fn dn_score_invert(
    data: &Dataset,
    spec: &FunctionalSpec<f64>,
    support: &SupportSpec<f64>,
    level: f64,
    s: Interval,
    opts: &WaldOptions,
) -> Result<WaldOutcome> {
    check_level(level)?;
    let psi = influence_values(data, spec, support, opts)?;
    let n = psi.len() as f64;
    let estimate = psi.iter().sum::<f64>() / n;
    let var = psi.iter().map(|x| (x - estimate) * (x - estimate)).sum::<f64>() / n;
    let z = normal_quantile(0.5 + level / 2.0);
    let ci = if n > z * z {
        let half = z * (var / (n - z * z)).sqrt();
        Interval { lo: estimate - half, hi: estimate + half }
    } else {
        Interval::real_line()
    };
    Ok(WaldOutcome { estimate, se: (var / n).sqrt(), region: ConfidenceRegion::from_pieces(vec![ci], s) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::law::Observation;

    fn late_rows(counts: [[usize; 2]; 4]) -> Dataset {
        // counts[(z, w) as 2z + w] = [#Y=0, #Y=1]
        let mut rows = Vec::new();
        for (zw, c) in counts.iter().enumerate() {
            for (y, &k) in c.iter().enumerate() {
                for _ in 0..k {
                    rows.push(Observation { y: y as f64, z: zw / 2, w: zw % 2, x: 0 });
                }
            }
        }
        Dataset::new(rows)
    }

    #[test]
    fn late_point_estimate_is_the_sample_wald_ratio() {
        let data = late_rows([[30, 10], [5, 5], [8, 4], [12, 26]]);
        let s = SupportSpec::binary(1);
        let out = wald_ci(&data, &FunctionalSpec::Late, &s, 0.95, Interval::real_line(), &WaldOptions::default()).unwrap();
        let mean = |f: &dyn Fn(&Observation) -> f64, z: usize| {
            let r: Vec<_> = data.rows.iter().filter(|o| o.z == z).collect();
            r.iter().map(|o| f(o)).sum::<f64>() / r.len() as f64
        };
        let ratio = (mean(&|o| o.y, 1) - mean(&|o| o.y, 0)) / (mean(&|o| o.w as f64, 1) - mean(&|o| o.w as f64, 0));
        assert!((out.estimate - ratio).abs() < 1e-10);
        assert!(out.region.contains(ratio));
    }

    #[test]
    fn independent_sample_is_degenerate() {
        // W independent of Z in the sample, outcome means differ by arm.
        let data = late_rows([[10, 10], [10, 10], [5, 15], [5, 15]]);
        let s = SupportSpec::binary(1);
        let err = wald_ci(&data, &FunctionalSpec::Late, &s, 0.95, Interval::real_line(), &WaldOptions::default());
        assert!(matches!(err, Err(Error::DegenerateSample(_))));
    }

    #[test]
    fn constant_influence_values_give_a_point() {
        // Y constant: g ≡ y, φ = 0, ψ ≡ 0.
        let mut data = late_rows([[0, 0], [0, 0], [0, 0], [0, 0]]);
        for (z, w, k) in [(0, 0, 7), (0, 1, 3), (1, 0, 2), (1, 1, 8)] {
            for _ in 0..k {
                data.rows.push(Observation { y: 1.0, z, w, x: 0 });
            }
        }
        let s = SupportSpec::binary(1);
        let out = wald_ci(&data, &FunctionalSpec::Late, &s, 0.95, Interval::real_line(), &WaldOptions::default()).unwrap();
        assert!(out.estimate.abs() < 1e-12 && out.se < 1e-12);
        assert!(out.region.diameter() < 1e-11);
    }

    #[test]
    fn cross_fitting_runs_on_balanced_halves() {
        let data = late_rows([[30, 10], [5, 5], [8, 4], [12, 26]]);
        let mut rows = data.rows.clone();
        // interleave so both halves see every cell
        rows.sort_by_key(|o| (o.z, o.w, o.y as usize));
        let (even, odd): (Vec<_>, Vec<_>) = rows.iter().enumerate().partition(|(i, _)| i % 2 == 0);
        let rows: Vec<Observation> = even.into_iter().chain(odd).map(|(_, o)| *o).collect();
        let s = SupportSpec::binary(1);
        let opts = WaldOptions { cross_fit: true, ..Default::default() };
        let out = wald_ci(&Dataset::new(rows), &FunctionalSpec::Late, &s, 0.95, Interval::real_line(), &opts).unwrap();
        assert!(out.estimate.is_finite() && out.se > 0.0);
    }

    #[test]
    fn dn_set_is_slightly_wider_than_wald() {
        let data = late_rows([[30, 10], [5, 5], [8, 4], [12, 26]]);
        let s = SupportSpec::binary(1);
        let o = WaldOptions::default();
        let w = wald_ci(&data, &FunctionalSpec::Late, &s, 0.9, Interval::real_line(), &o).unwrap();
        let d = dn_score_invert(&data, &FunctionalSpec::Late, &s, 0.9, Interval::real_line(), &o).unwrap();
        assert!((w.estimate - d.estimate).abs() < 1e-12);
        let (wi, di) = (w.region.intervals()[0], d.region.intervals()[0]);
        assert!(di.lo <= wi.lo && wi.hi <= di.hi);
    }
}
