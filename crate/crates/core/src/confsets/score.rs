use super::{check_level, normal_quantile, ConfidenceRegion, Interval};
use crate::error::{Error, Result};
use crate::law::Dataset;

/// The LATE score statistic at one `θ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreEval {
    pub theta: f64,
    /// `T_n(θ) = √n P_n{η} / σ̂_θ`.
    pub statistic: f64,
    /// `σ̂²_θ = P_n{η²}`.
    pub variance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreGrid {
    pub points: usize,
}

impl Default for ScoreGrid {
    fn default() -> Self {
        Self { points: 4001 }
    }
}

/// Sufficient statistics of the plug-in estimating function
/// `η_i(θ) = c_i (u_i − θ v_i)` with `c_i = (2Z_i − 1)/f̂_Z(Z_i)`,
/// `u_i = Y_i − Ȳ_1`, `v_i = W_i − W̄_1`. The `1/cov_n(W, Z)` factor
/// multiplies both `P_n{η}` and `σ̂_θ` and is dropped.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LateMoments {
    pub n: f64,
    /// `P_n{η(θ)} = a − θ b`.
    pub a: f64,
    pub b: f64,
    pub s_uu: f64,
    pub s_uv: f64,
    pub s_vv: f64,
}

impl LateMoments {
    pub fn from_data(data: &Dataset) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if let Some(i) = data.rows.iter().position(|o| o.z > 1 || o.w > 1 || o.x != 0) {
            return Err(Error::InvalidInput(format!("row {i} is not a binary (Z, W) row without covariates")));
        }
        let mut count = [0.0f64; 2];
        let mut ysum = [0.0f64; 2];
        let mut wsum = [0.0f64; 2];
        for o in &data.rows {
            count[o.z] += 1.0;
            ysum[o.z] += o.y;
            wsum[o.z] += o.w as f64;
        }
        if count[0] == 0.0 || count[1] == 0.0 {
            return Err(Error::AllZOneArm);
        }
        let n = data.len() as f64;
        let f = [count[0] / n, count[1] / n];
        let ybar = [ysum[0] / count[0], ysum[1] / count[1]];
        let wbar = [wsum[0] / count[0], wsum[1] / count[1]];
        let (mut s_uu, mut s_uv, mut s_vv) = (0.0, 0.0, 0.0);
        for o in &data.rows {
            let c = if o.z == 1 { 1.0 / f[1] } else { -1.0 / f[0] };
            let u = o.y - ybar[1];
            let v = o.w as f64 - wbar[1];
            s_uu += c * c * u * u;
            s_uv += c * c * u * v;
            s_vv += c * c * v * v;
        }
        Ok(Self {
            n,
            a: ybar[1] - ybar[0],
            b: wbar[1] - wbar[0],
            s_uu: s_uu / n,
            s_uv: s_uv / n,
            s_vv: s_vv / n,
        })
    }

    pub fn eval(&self, theta: f64) -> ScoreEval {
        let mean = self.a - theta * self.b;
        let variance = (self.s_uu - 2.0 * theta * self.s_uv + theta * theta * self.s_vv).max(0.0);
        ScoreEval { theta, statistic: self.n.sqrt() * mean / variance.sqrt(), variance }
    }

    /// `|T_n(θ)| ≤ z`, written without the division so that a zero
    /// variance with zero mean is accepted.
    pub fn accepts(&self, theta: f64, z: f64) -> bool {
        let e = self.eval(theta);
        let mean = self.a - theta * self.b;
        self.n * mean * mean <= z * z * e.variance
    }
}

/// `C_n = {θ ∈ S : |T_n(θ)| ≤ z_{1−α/2}}` over an evenly spaced grid on
/// bounded `s`. Each accepted grid point contributes its cell (half a step
/// each side); adjacent cells merge.
pub fn score_invert_late(data: &Dataset, level: f64, s: Interval, grid: ScoreGrid) -> Result<ConfidenceRegion> {
    check_level(level)?;
    if !s.is_bounded() {
        return Err(Error::InvalidInput(format!("score inversion needs a bounded range, got {s}")));
    }
    if grid.points < 2 {
        return Err(Error::InvalidInput("score grid needs at least two points".into()));
    }
    let mom = LateMoments::from_data(data)?;
    let z = normal_quantile(0.5 + level / 2.0);
    let step = s.width() / (grid.points - 1) as f64;
    let mut pieces: Vec<Interval> = Vec::new();
    let mut run: Option<(usize, usize)> = None;
    let theta = |k: usize| if k + 1 == grid.points { s.hi } else { s.lo + k as f64 * step };
    let close = |a: usize, b: usize| Interval {
        lo: (theta(a) - step / 2.0).max(s.lo),
        hi: (theta(b) + step / 2.0).min(s.hi),
    };
    for k in 0..grid.points {
        if mom.accepts(theta(k), z) {
            run = Some(run.map_or((k, k), |(a, _)| (a, k)));
        } else if let Some((a, b)) = run.take() {
            pieces.push(close(a, b));
        }
    }
    if let Some((a, b)) = run {
        pieces.push(close(a, b));
    }
    Ok(ConfidenceRegion::from_pieces(pieces, s))
}

/// The acceptance region of the score test in closed form: the solution
/// set of a quadratic inequality in `θ`, intersected with `s`.
pub fn score_region_analytic(data: &Dataset, level: f64, s: Interval) -> Result<ConfidenceRegion> {
    check_level(level)?;
    let m = LateMoments::from_data(data)?;
    let z2 = normal_quantile(0.5 + level / 2.0).powi(2);
    // A θ² + B θ + C ≤ 0
    let qa = m.n * m.b * m.b - z2 * m.s_vv;
    let qb = -2.0 * m.n * m.a * m.b + 2.0 * z2 * m.s_uv;
    let qc = m.n * m.a * m.a - z2 * m.s_uu;
    let all = || vec![Interval::real_line()];
    let pieces = if qa == 0.0 {
        if qb == 0.0 {
            if qc <= 0.0 { all() } else { Vec::new() }
        } else if qb > 0.0 {
            vec![Interval { lo: f64::NEG_INFINITY, hi: -qc / qb }]
        } else {
            vec![Interval { lo: -qc / qb, hi: f64::INFINITY }]
        }
    } else {
        let disc = qb * qb - 4.0 * qa * qc;
        if disc < 0.0 {
            if qa < 0.0 { all() } else { Vec::new() }
        } else {
            let r = disc.sqrt();
            let (r1, r2) = {
                let x = (-qb - r) / (2.0 * qa);
                let y = (-qb + r) / (2.0 * qa);
                (x.min(y), x.max(y))
            };
            if qa > 0.0 {
                vec![Interval { lo: r1, hi: r2 }]
            } else {
                vec![
                    Interval { lo: f64::NEG_INFINITY, hi: r1 },
                    Interval { lo: r2, hi: f64::INFINITY },
                ]
            }
        }
    };
    Ok(ConfidenceRegion::from_pieces(pieces, s))
}
