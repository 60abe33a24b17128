//! The binary union-bound set. With binary `Z, W, X` the solution of the
//! integral equation is
//! `g(W, x) = (ν_x / δ_x){W − E(W | Z=1, x)} + E(Y | Z=1, x)` where
//! `ν_x = E(Y | Z=1, x) − E(Y | Z=0, x)` and `δ_x = E(W | Z=1, x) − E(W | Z=0, x)`.
//! The estimand is written as sums, products and ratios of means, each
//! factor gets a Wald interval, and the intervals are combined by
//! interval arithmetic.
//!
//! Standard errors come from influence functions of the sample means:
//! a conditional mean `μ = E(V | Z=z, X=x)` has influence
//! `1{Z=z, X=x}(V − μ)/p̂(z, x)`, a product `ab` has `a·IF_b + b·IF_a`, and
//! the standard error is `√(P_n{IF²}/n)`.

use super::{check_level, interval_div, normal_quantile, ConfidenceRegion, Interval};
use crate::error::{Error, Result};
use crate::law::{Dataset, Observation};

/// Which estimand the components assemble.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnionTarget {
    /// `E[g(W, 1)] = (ν_1/δ_1){E(W) − E(W | Z=1, X=1)} + E(Y | Z=1, X=1)`.
    TreatedMean,
    /// No covariates: `ν/δ`.
    Late,
}

/// How the terms of the estimand are grouped into component intervals.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Grouping {
    /// `γ^W = ν_1{E(W) − E(W | Z=1, X=1)}`, `δ_1` and `γ^Y = E(Y | Z=1, X=1)`.
    Combined,
    /// Separate intervals for `ν_1`, `δ_1`, the W gap and `γ^Y`.
    Separate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnionConfig {
    pub target: UnionTarget,
    pub grouping: Grouping,
    /// Fractions of `α` per component, in the order of
    /// [`UnionOutcome::components`]; equal split when `None`.
    pub split: Option<Vec<f64>>,
}

impl UnionConfig {
    pub fn new(target: UnionTarget) -> Self {
        Self { target, grouping: Grouping::Combined, split: None }
    }

    pub fn component_count(&self) -> usize {
        match (self.target, self.grouping) {
            (UnionTarget::Late, _) => 2,
            (UnionTarget::TreatedMean, Grouping::Combined) => 3,
            (UnionTarget::TreatedMean, Grouping::Separate) => 4,
        }
    }
}

/// A component Wald interval at its own level.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentCi {
    pub name: &'static str,
    pub estimate: f64,
    pub se: f64,
    pub level: f64,
    pub interval: Interval,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnionOutcome {
    pub region: ConfidenceRegion,
    pub components: Vec<ComponentCi>,
    /// Plug-in value of the estimand; NaN when the sample `δ` is zero.
    pub estimate: f64,
}

/// A sample mean together with its per-row influence values.
struct Est {
    value: f64,
    inf: Vec<f64>,
}

impl Est {
    fn sub(&self, o: &Est) -> Est {
        Est { value: self.value - o.value, inf: self.inf.iter().zip(&o.inf).map(|(a, b)| a - b).collect() }
    }

    fn mul(&self, o: &Est) -> Est {
        Est {
            value: self.value * o.value,
            inf: self.inf.iter().zip(&o.inf).map(|(a, b)| o.value * a + self.value * b).collect(),
        }
    }

    fn ci(&self, name: &'static str, level: f64) -> ComponentCi {
        let n = self.inf.len() as f64;
        let se = (self.inf.iter().map(|v| v * v).sum::<f64>() / n / n).sqrt();
        let half = normal_quantile(0.5 + level / 2.0) * se;
        ComponentCi {
            name,
            estimate: self.value,
            se,
            level,
            interval: Interval { lo: self.value - half, hi: self.value + half },
        }
    }
}

fn cond_mean(rows: &[Observation], z: usize, x: usize, v: impl Fn(&Observation) -> f64) -> Result<Est> {
    let n = rows.len() as f64;
    let inside = |o: &Observation| o.z == z && o.x == x;
    let count = rows.iter().filter(|o| inside(o)).count();
    if count == 0 {
        return Err(Error::EmptyStratum(vec![z, x]));
    }
    let p = count as f64 / n;
    let mu = rows.iter().filter(|o| inside(o)).map(&v).sum::<f64>() / count as f64;
    let inf = rows.iter().map(|o| if inside(o) { (v(o) - mu) / p } else { 0.0 }).collect();
    Ok(Est { value: mu, inf })
}

fn mean(rows: &[Observation], v: impl Fn(&Observation) -> f64) -> Est {
    let mu = rows.iter().map(&v).sum::<f64>() / rows.len() as f64;
    Est { value: mu, inf: rows.iter().map(|o| v(o) - mu).collect() }
}

/// Divides and, when the denominator interval has zero in its interior and
/// the numerator is not `{0}`, widens to all of `s`.
fn ratio(num: Interval, den: Interval, s: Interval) -> ConfidenceRegion {
    if den.straddles_zero() && !num.is_zero() {
        return ConfidenceRegion::FullRange(s);
    }
    interval_div(num, den)
}

fn split_levels(cfg: &UnionConfig, level: f64) -> Result<Vec<f64>> {
    let k = cfg.component_count();
    let alpha = 1.0 - level;
    let fractions = match &cfg.split {
        None => vec![1.0 / k as f64; k],
        Some(f) => {
            let total: f64 = f.iter().sum();
            if f.len() != k || f.iter().any(|&x| !(x > 0.0 && x < 1.0)) || (total - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidInput(format!(
                    "split needs {k} fractions in (0, 1) summing to 1, got {f:?}"
                )));
            }
            f.clone()
        }
    };
    Ok(fractions.iter().map(|f| 1.0 - f * alpha).collect())
}

/// `B_n` for binary `Z, W, X` (Y arbitrary), at overall level `level` by
/// the union bound, intersected with `s`.
pub fn binary_union_set(data: &Dataset, level: f64, s: Interval, cfg: &UnionConfig) -> Result<UnionOutcome> {
    check_level(level)?;
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let k_x = match cfg.target {
        UnionTarget::TreatedMean => 2,
        UnionTarget::Late => 1,
    };
    if let Some(i) = data.rows.iter().position(|o| o.z > 1 || o.w > 1 || o.x >= k_x) {
        return Err(Error::InvalidInput(format!("row {i} is outside binary Z, W and {k_x} X cells")));
    }
    let levels = split_levels(cfg, level)?;
    let rows = &data.rows;
    let x = k_x - 1;
    let w = |o: &Observation| o.w as f64;
    let y = |o: &Observation| o.y;
    let y1 = cond_mean(rows, 1, x, y)?;
    let y0 = cond_mean(rows, 0, x, y)?;
    let w1 = cond_mean(rows, 1, x, w)?;
    let w0 = cond_mean(rows, 0, x, w)?;
    let nu = y1.sub(&y0);
    let de = w1.sub(&w0);
    let (region, components, estimate) = match (cfg.target, cfg.grouping) {
        (UnionTarget::Late, _) => {
            let c_nu = nu.ci("nu", levels[0]);
            let c_de = de.ci("de", levels[1]);
            let region = ratio(c_nu.interval, c_de.interval, s);
            (region, vec![c_nu, c_de], nu.value / de.value)
        }
        (UnionTarget::TreatedMean, grouping) => {
            let gap = mean(rows, w).sub(&w1);
            let est = nu.value / de.value * gap.value + y1.value;
            match grouping {
                Grouping::Combined => {
                    let gw = nu.mul(&gap);
                    let c_de = de.ci("de", levels[0]);
                    let c_w = gw.ci("gamma_w", levels[1]);
                    let c_y = y1.ci("gamma_y", levels[2]);
                    let region = ratio(c_w.interval, c_de.interval, s).shift(&c_y.interval);
                    (region, vec![c_de, c_w, c_y], est)
                }
                Grouping::Separate => {
                    let c_de = de.ci("de", levels[0]);
                    let c_nu = nu.ci("nu", levels[1]);
                    let c_gap = gap.ci("w_gap", levels[2]);
                    let c_y = y1.ci("gamma_y", levels[3]);
                    let q = ratio(c_nu.interval, c_de.interval, s);
                    let region = if q.is_full() && !c_gap.interval.is_zero() {
                        ConfidenceRegion::FullRange(s)
                    } else {
                        q.scale(&c_gap.interval).shift(&c_y.interval)
                    };
                    (region, vec![c_de, c_nu, c_gap, c_y], est)
                }
            }
        }
    };
    let region = region.intersect(s);
    Ok(UnionOutcome { region, components, estimate: if de.value == 0.0 { f64::NAN } else { estimate } })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tm_rows() -> Dataset {
        // (z, w, x, y, count)
        let cells = [
            (0, 0, 0, 0.0, 20),
            (0, 1, 0, 1.0, 10),
            (1, 1, 0, 1.0, 15),
            (1, 0, 0, 0.0, 5),
            (0, 0, 1, 0.0, 25),
            (0, 1, 1, 1.0, 5),
            (0, 0, 1, 1.0, 8),
            (1, 1, 1, 1.0, 30),
            (1, 0, 1, 0.0, 7),
            (1, 1, 1, 0.0, 9),
        ];
        let mut rows = Vec::new();
        for (z, w, x, y, k) in cells {
            for _ in 0..k {
                rows.push(Observation { y, z, w, x });
            }
        }
        Dataset::new(rows)
    }

    #[test]
    fn components_and_estimate() {
        let data = tm_rows();
        let s = Interval { lo: -20.0, hi: 20.0 };
        let out = binary_union_set(&data, 0.95, s, &UnionConfig::new(UnionTarget::TreatedMean)).unwrap();
        assert_eq!(out.components.len(), 3);
        for c in &out.components {
            assert!((c.level - (1.0 - 0.05 / 3.0)).abs() < 1e-15);
            assert!(c.interval.contains(c.estimate));
        }
        if !out.components[0].interval.contains(0.0) {
            assert!(out.region.contains(out.estimate));
        }
    }

    #[test]
    fn separate_grouping_has_four_components() {
        let cfg = UnionConfig { grouping: Grouping::Separate, ..UnionConfig::new(UnionTarget::TreatedMean) };
        let out = binary_union_set(&tm_rows(), 0.9, Interval { lo: -20.0, hi: 20.0 }, &cfg).unwrap();
        assert_eq!(out.components.len(), 4);
    }

    #[test]
    fn bad_split_is_rejected() {
        let cfg = UnionConfig { split: Some(vec![0.5, 0.5]), ..UnionConfig::new(UnionTarget::TreatedMean) };
        assert!(binary_union_set(&tm_rows(), 0.9, Interval { lo: -1.0, hi: 1.0 }, &cfg).is_err());
    }

    #[test]
    fn missing_stratum_is_reported() {
        let rows: Vec<_> = tm_rows().rows.into_iter().filter(|o| !(o.z == 0 && o.x == 1)).collect();
        let err = binary_union_set(&Dataset::new(rows), 0.9, Interval::real_line(), &UnionConfig::new(UnionTarget::TreatedMean));
        assert_eq!(err, Err(Error::EmptyStratum(vec![0, 1])));
    }

    #[test]
    fn straddling_denominator_gives_full_range() {
        let s = Interval { lo: -3.0, hi: 3.0 };
        let r = ratio(Interval { lo: 0.1, hi: 0.2 }, Interval { lo: -0.1, hi: 0.1 }, s);
        assert_eq!(r, ConfidenceRegion::FullRange(s));
    }
}
