//! The conditional mean operator, the integral equation and its adjoint,
//! Riesz representers for the supported estimands, and `φ(P) = E[α g]`.
//!
//! Grid functions hold cell *values*: `g[j][m]` is the value of `g` on
//! `W ∈ S^W_j, X ∈ S^X_m`. Operators are written in probabilities, so
//! `T_m[l][j] = P(W = j | Z = l, X = m)`, which equals the density kernel
//! times `μ_W(j)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::law::{DiscreteLaw, SupportSpec, Var};
use crate::linalg::{lstsq_min_norm, norm, Matrix};
use crate::scalar::Real;

/// The estimand `φ(P) = E[m(O, g_P)]`, identified by its `m` and Riesz
/// representer.
#[derive(Debug, Clone, PartialEq)]
pub enum FunctionalSpec<T> {
    /// `X = (A, L)` encoded as `m = 2·L + A`; `m(O, g) = g(W, 1, L) − g(W, 0, L)`.
    ProximalAte,
    /// No covariates; `m(O, g) = Σ_j g(j) ω(j) μ_W(j)`.
    Npiv { omega: Vec<T> },
    /// Binary W; `m(O, g) = g(1, X) − g(0, X)`.
    AteIv,
    /// Binary W and Z, no covariates; `m(O, g) = g(1) − g(0)`.
    Late,
    /// Binary X; `m(O, g) = g(W, 1)`, the treated counterfactual mean.
    TreatedMean,
    /// Fixed representer `α[j][m]`; `m(O, g) = α(W, X) g(W, X)`.
    Generic { alpha: Matrix<T> },
}

/// Values of a function of `(W, X)` (or `(Z, X)`) on the cell grid,
/// `k_w × k_x` (or `k_z × k_x`).
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction<T> {
    pub values: Matrix<T>,
}

pub type RieszRepresenter<T> = GridFunction<T>;

impl<T: Real> GridFunction<T> {
    pub fn zeros(cells: usize, strata: usize) -> Self {
        Self { values: Matrix::zeros(cells, strata) }
    }

    pub fn from_columns(cols: &[Vec<T>]) -> Self {
        let cells = cols.first().map_or(0, Vec::len);
        Self { values: Matrix::from_fn(cells, cols.len(), |r, m| cols[m][r]) }
    }

    pub fn get(&self, cell: usize, m: usize) -> T {
        self.values[(cell, m)]
    }

    pub fn column(&self, m: usize) -> Vec<T> {
        (0..self.values.rows()).map(|r| self.values[(r, m)]).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.values.is_finite()
    }
}

impl<T: Real> FunctionalSpec<T> {
    pub fn name(&self) -> &'static str {
        match self {
            FunctionalSpec::ProximalAte => "proximal_ate",
            FunctionalSpec::Npiv { .. } => "npiv",
            FunctionalSpec::AteIv => "ate_iv",
            FunctionalSpec::Late => "late",
            FunctionalSpec::TreatedMean => "treated_mean",
            FunctionalSpec::Generic { .. } => "generic",
        }
    }

    /// Structural requirements of the variant against the support.
    pub fn check_support(&self, s: &SupportSpec<T>) -> Result<()> {
        let bad = |msg: String| Err(Error::IncompatibleFunctional(msg));
        match self {
            FunctionalSpec::ProximalAte if !s.k_x().is_multiple_of(2) => {
                bad(format!("proximal_ate needs an even k_x, got {}", s.k_x()))
            }
            FunctionalSpec::Npiv { omega } if s.k_x() != 1 || omega.len() != s.k_w() => bad(format!(
                "npiv needs k_x = 1 and {} weights, got k_x = {} and {}",
                s.k_w(),
                s.k_x(),
                omega.len()
            )),
            FunctionalSpec::AteIv if s.k_w() != 2 => bad(format!("ate_iv needs k_w = 2, got {}", s.k_w())),
            FunctionalSpec::Late if s.k_w() != 2 || s.k_z() != 2 || s.k_x() != 1 => bad(format!(
                "late needs k_w = k_z = 2 and k_x = 1, got {}, {}, {}",
                s.k_w(),
                s.k_z(),
                s.k_x()
            )),
            FunctionalSpec::TreatedMean if s.k_x() != 2 => {
                bad(format!("treated_mean needs k_x = 2, got {}", s.k_x()))
            }
            FunctionalSpec::Generic { alpha } if alpha.rows() != s.k_w() || alpha.cols() != s.k_x() => bad(format!(
                "generic alpha is {}×{}, expected {}×{}",
                alpha.rows(),
                alpha.cols(),
                s.k_w(),
                s.k_x()
            )),
            FunctionalSpec::Generic { alpha } if !alpha.is_finite() => bad("generic alpha has non-finite entries".into()),
            _ => Ok(()),
        }
    }

    /// `m(O, g)` for an observation in cell `(W = j, X = m)`. No variant
    /// depends on Y or Z.
    pub fn m_value(&self, s: &SupportSpec<T>, g: &GridFunction<T>, j: usize, m: usize) -> T {
        match self {
            FunctionalSpec::ProximalAte => {
                let l = m / 2;
                g.get(j, 2 * l + 1) - g.get(j, 2 * l)
            }
            FunctionalSpec::Npiv { omega } => {
                (0..s.k_w()).map(|c| g.get(c, 0) * omega[c] * s.mu_w()[c]).sum()
            }
            FunctionalSpec::AteIv => g.get(1, m) - g.get(0, m),
            FunctionalSpec::Late => g.get(1, 0) - g.get(0, 0),
            FunctionalSpec::TreatedMean => g.get(j, 1),
            FunctionalSpec::Generic { alpha } => alpha[(j, m)] * g.get(j, m),
        }
    }
}

/// `T_m[l][j] = P(W = j | Z = l, X = m)`.
pub fn cond_mean_operator<T: Real>(law: &DiscreteLaw<T>, m: usize) -> Result<Matrix<T>> {
    Ok(cond_mean_operators(law)?.swap_remove(m))
}

/// [`cond_mean_operator`] for every stratum.
pub fn cond_mean_operators<T: Real>(law: &DiscreteLaw<T>) -> Result<Vec<Matrix<T>>> {
    let k = law.conditional_kernel(Var::W, Some(Var::Z))?;
    let mu_w = law.support().mu_w();
    Ok(k.strata
        .iter()
        .map(|km| Matrix::from_fn(km.rows(), km.cols(), |l, j| km[(l, j)] * mu_w[j]))
        .collect())
}

/// `A_m[j][l] = P(Z = l | W = j, X = m)`, the matrix of `T'` in stratum `m`.
pub fn adjoint_operators<T: Real>(law: &DiscreteLaw<T>) -> Result<Vec<Matrix<T>>> {
    let k = law.conditional_kernel(Var::Z, Some(Var::W))?;
    let mu_z = law.support().mu_z();
    Ok(k.strata
        .iter()
        .map(|km| Matrix::from_fn(km.rows(), km.cols(), |j, l| km[(j, l)] * mu_z[l]))
        .collect())
}

/// `r_m[l] = E[Y | Z = l, X = m]`, with Y summarized by its cell means.
pub fn response_vector<T: Real>(law: &DiscreteLaw<T>, m: usize) -> Result<Vec<T>> {
    Ok(response_vectors(law)?.swap_remove(m))
}

pub fn response_vectors<T: Real>(law: &DiscreteLaw<T>) -> Result<Vec<Vec<T>>> {
    let k = law.conditional_kernel(Var::Y, Some(Var::Z))?;
    let ybar = law.support().y_means();
    Ok((0..law.support().k_x())
        .map(|m| {
            (0..law.support().k_z())
                .map(|l| (0..ybar.len()).map(|h| k.prob(m, l, h) * ybar[h]).sum())
                .collect()
        })
        .collect())
}

/// Per-stratum outcome of a consistency-checked linear solve.
#[derive(Debug, Clone, PartialEq)]
pub struct StratumSolve<T> {
    pub x: Vec<T>,
    pub residual: T,
    pub rank: usize,
    pub consistent: bool,
}

/// Residual test `‖A x − b‖ ≤ tol · max(1, ‖b‖)`.
fn solve_checked<T: Real>(a: &Matrix<T>, b: &[T], tol: T) -> StratumSolve<T> {
    let sol = lstsq_min_norm(a, b);
    let scale = norm(b).max(T::one());
    let consistent = sol.residual.is_finite() && sol.residual <= tol * scale;
    StratumSolve { x: sol.x, residual: sol.residual, rank: sol.rank, consistent }
}

fn first_failure<T: Real>(solves: &[StratumSolve<T>]) -> Option<Error> {
    solves.iter().enumerate().find(|(_, s)| !s.consistent).map(|(m, s)| Error::NoSolution {
        stratum: m,
        residual: s.residual.to_f64_lossy(),
    })
}

/// Solves `T_m g_m = r_m` in every stratum without failing on inconsistency.
pub fn solve_g_report<T: Real>(law: &DiscreteLaw<T>, tol: T) -> Result<Vec<StratumSolve<T>>> {
    let ops = cond_mean_operators(law)?;
    let rs = response_vectors(law)?;
    Ok(ops.iter().zip(&rs).map(|(t, r)| solve_checked(t, r, tol)).collect())
}

/// Minimum-norm solution `g` of the integral equation, or `NoSolution` when
/// `r_m` is outside the range of `T_m` at tolerance `tol`.
pub fn solve_g<T: Real>(law: &DiscreteLaw<T>, tol: T) -> Result<GridFunction<T>> {
    let solves = solve_g_report(law, tol)?;
    if let Some(e) = first_failure(&solves) {
        return Err(e);
    }
    Ok(GridFunction::from_columns(&solves.into_iter().map(|s| s.x).collect::<Vec<_>>()))
}

/// Solves `E[q(Z, X) | W, X] = α(W, X)` stratum by stratum.
pub fn solve_q_report<T: Real>(
    law: &DiscreteLaw<T>,
    alpha: &RieszRepresenter<T>,
    tol: T,
) -> Result<Vec<StratumSolve<T>>> {
    let ops = adjoint_operators(law)?;
    Ok(ops.iter().enumerate().map(|(m, a)| solve_checked(a, &alpha.column(m), tol)).collect())
}

pub fn solve_q<T: Real>(law: &DiscreteLaw<T>, alpha: &RieszRepresenter<T>, tol: T) -> Result<GridFunction<T>> {
    let solves = solve_q_report(law, alpha, tol)?;
    if let Some(e) = first_failure(&solves) {
        return Err(e);
    }
    Ok(GridFunction::from_columns(&solves.into_iter().map(|s| s.x).collect::<Vec<_>>()))
}

/// Cellwise Riesz representer of `spec` under `law`.
pub fn riesz_alpha<T: Real>(law: &DiscreteLaw<T>, spec: &FunctionalSpec<T>) -> Result<RieszRepresenter<T>> {
    let s = law.support();
    spec.check_support(s)?;
    let (k_w, k_x) = (s.k_w(), s.k_x());
    let pwx = law.p_wx();
    let positive = |p: T, cell: Vec<usize>| if p > T::zero() { Ok(p) } else { Err(Error::PositivityViolation { cell }) };
    let mut alpha = Matrix::zeros(k_w, k_x);
    match spec {
        FunctionalSpec::Late | FunctionalSpec::AteIv => {
            let px = law.p_x();
            for m in 0..k_x {
                for j in 0..k_w {
                    let p = positive(pwx[(j, m)], vec![j, m])?;
                    let sign = if j == 1 { T::one() } else { -T::one() };
                    alpha[(j, m)] = sign * px[m] / p;
                }
            }
        }
        FunctionalSpec::ProximalAte => {
            for j in 0..k_w {
                for l in 0..k_x / 2 {
                    let pl = pwx[(j, 2 * l)] + pwx[(j, 2 * l + 1)];
                    for a in 0..2 {
                        let m = 2 * l + a;
                        let p = positive(pwx[(j, m)], vec![j, m])?;
                        let sign = if a == 1 { T::one() } else { -T::one() };
                        alpha[(j, m)] = sign * pl / p;
                    }
                }
            }
        }
        FunctionalSpec::Npiv { omega } => {
            for j in 0..k_w {
                let p = positive(pwx[(j, 0)], vec![j, 0])?;
                alpha[(j, 0)] = omega[j] * s.mu_w()[j] / p;
            }
        }
        FunctionalSpec::TreatedMean => {
            for j in 0..k_w {
                let p = positive(pwx[(j, 1)], vec![j, 1])?;
                alpha[(j, 1)] = (pwx[(j, 0)] + pwx[(j, 1)]) / p;
            }
        }
        FunctionalSpec::Generic { alpha: a } => alpha = a.clone(),
    }
    Ok(GridFunction { values: alpha })
}

/// `E[α(W, X) g(W, X)]`.
pub fn riesz_pairing<T: Real>(law: &DiscreteLaw<T>, alpha: &RieszRepresenter<T>, g: &GridFunction<T>) -> T {
    let pwx = law.p_wx();
    let mut acc = T::zero();
    for j in 0..pwx.rows() {
        for m in 0..pwx.cols() {
            acc = acc + alpha.get(j, m) * g.get(j, m) * pwx[(j, m)];
        }
    }
    acc
}

/// `E[m(O, g)]` computed directly from the definition of `m`.
pub fn expected_m<T: Real>(law: &DiscreteLaw<T>, spec: &FunctionalSpec<T>, g: &GridFunction<T>) -> Result<T> {
    spec.check_support(law.support())?;
    let pwx = law.p_wx();
    let mut acc = T::zero();
    for j in 0..pwx.rows() {
        for m in 0..pwx.cols() {
            acc = acc + spec.m_value(law.support(), g, j, m) * pwx[(j, m)];
        }
    }
    Ok(acc)
}

/// `φ(P) = Σ_{j,m} α[j][m] g[j][m] P(W = j, X = m)`.
pub fn evaluate_phi<T: Real>(law: &DiscreteLaw<T>, spec: &FunctionalSpec<T>, tol: T) -> Result<T> {
    let alpha = riesz_alpha(law, spec)?;
    let g = solve_g(law, tol)?;
    Ok(riesz_pairing(law, &alpha, &g))
}

/// Exact expectation of `ψ¹(O) = m(O, g) + q(Z, X){Y − g(W, X)} − θ`.
pub fn psi1_mean<T: Real>(
    law: &DiscreteLaw<T>,
    spec: &FunctionalSpec<T>,
    g: &GridFunction<T>,
    q: &GridFunction<T>,
    theta: T,
) -> T {
    let s = law.support();
    let ybar = s.y_means();
    let mut acc = T::zero();
    for (i, &p) in law.mass().iter().enumerate() {
        if p == T::zero() {
            continue;
        }
        let [h, l, j, m] = s.unflat(i);
        let v = spec.m_value(s, g, j, m) + q.get(l, m) * (ybar[h] - g.get(j, m)) - theta;
        acc = acc + p * v;
    }
    acc
}

/// Diagnostics for membership of a law in the model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MembershipReport {
    pub in_model: bool,
    pub positivity_ok: bool,
    /// Largest `g` residual over strata.
    pub g_residual: f64,
    /// Largest `q` residual over strata.
    pub q_residual: f64,
    pub g_residuals: Vec<f64>,
    pub q_residuals: Vec<f64>,
    pub detail: Option<String>,
}

/// Runs `riesz_alpha`, `solve_g` and `solve_q` and aggregates their
/// diagnostics; `in_model` holds iff all pass at `tol`.
pub fn check_model_membership<T: Real>(law: &DiscreteLaw<T>, spec: &FunctionalSpec<T>, tol: T) -> MembershipReport {
    let mut report = MembershipReport {
        in_model: false,
        positivity_ok: false,
        g_residual: f64::INFINITY,
        q_residual: f64::INFINITY,
        g_residuals: Vec::new(),
        q_residuals: Vec::new(),
        detail: None,
    };
    if !law.validate().is_empty() {
        report.detail = Some("law fails validation".into());
        return report;
    }
    let alpha = match riesz_alpha(law, spec) {
        Ok(a) => {
            report.positivity_ok = true;
            Some(a)
        }
        Err(e) => {
            report.detail = Some(e.to_string());
            None
        }
    };
    let max = |v: &[f64]| v.iter().copied().fold(0.0, f64::max);
    let mut g_ok = false;
    match solve_g_report(law, tol) {
        Ok(solves) => {
            report.g_residuals = solves.iter().map(|s| s.residual.to_f64_lossy()).collect();
            report.g_residual = max(&report.g_residuals);
            g_ok = solves.iter().all(|s| s.consistent);
            if let Some(e) = first_failure(&solves) {
                report.detail.get_or_insert(e.to_string());
            }
        }
        Err(e) => {
            report.detail.get_or_insert(e.to_string());
        }
    }
    let mut q_ok = false;
    if let Some(alpha) = alpha {
        match solve_q_report(law, &alpha, tol) {
            Ok(solves) => {
                report.q_residuals = solves.iter().map(|s| s.residual.to_f64_lossy()).collect();
                report.q_residual = max(&report.q_residuals);
                q_ok = solves.iter().all(|s| s.consistent);
                if let Some(e) = first_failure(&solves) {
                    report.detail.get_or_insert(e.to_string());
                }
            }
            Err(e) => {
                report.detail.get_or_insert(e.to_string());
            }
        }
    }
    report.in_model = report.positivity_ok && g_ok && q_ok;
    report
}

/// On-disk form of a [`FunctionalSpec`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionalFile {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<Vec<Vec<f64>>>,
}

impl FunctionalFile {
    pub fn to_spec<T: Real>(&self) -> Result<FunctionalSpec<T>> {
        let unexpected = |field: &str| {
            Err(Error::Parse(format!("field `{field}` is not used by kind `{}`", self.kind)))
        };
        let lit = |v: &[f64]| v.iter().map(|&x| T::lit(x)).collect::<Vec<T>>();
        if self.kind != "npiv" && self.omega.is_some() {
            return unexpected("omega");
        }
        if self.kind != "generic" && self.alpha.is_some() {
            return unexpected("alpha");
        }
        match self.kind.as_str() {
            "late" => Ok(FunctionalSpec::Late),
            "ate_iv" => Ok(FunctionalSpec::AteIv),
            "proximal_ate" => Ok(FunctionalSpec::ProximalAte),
            "treated_mean" => Ok(FunctionalSpec::TreatedMean),
            "npiv" => {
                let omega = self.omega.as_ref().ok_or_else(|| Error::Parse("npiv requires `omega`".into()))?;
                Ok(FunctionalSpec::Npiv { omega: lit(omega) })
            }
            "generic" => {
                let rows = self.alpha.as_ref().ok_or_else(|| Error::Parse("generic requires `alpha`".into()))?;
                let width = rows.first().map_or(0, Vec::len);
                if width == 0 || rows.iter().any(|r| r.len() != width) {
                    return Err(Error::Parse("`alpha` must be a non-empty rectangular k_w × k_x array".into()));
                }
                let rows: Vec<Vec<T>> = rows.iter().map(|r| lit(r)).collect();
                Ok(FunctionalSpec::Generic { alpha: Matrix::from_rows(&rows) })
            }
            other => Err(Error::Parse(format!("unknown functional kind `{other}`"))),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

impl<T: Real> From<&FunctionalSpec<T>> for FunctionalFile {
    fn from(spec: &FunctionalSpec<T>) -> Self {
        let f = |v: &[T]| v.iter().map(|x| x.to_f64_lossy()).collect::<Vec<f64>>();
        FunctionalFile {
            kind: spec.name().to_string(),
            omega: match spec {
                FunctionalSpec::Npiv { omega } => Some(f(omega)),
                _ => None,
            },
            alpha: match spec {
                FunctionalSpec::Generic { alpha } => Some(alpha.to_rows().iter().map(|r| f(r)).collect()),
                _ => None,
            },
        }
    }
}
