//! Weak-dependence perturbations of a conditional-independence base law.
//!
//! The base `P*` has `(Y, W) ⊥ Z | X` and `Y ⊥ W | X`, so its conditional
//! mean operator is rank one and the integral equation has no solution for
//! non-constant responses. Perturbing the W|Z kernel by `η_W I` and the Y|Z
//! kernel by `η_Y M` yields laws inside the model whose functional can be
//! steered to any target value while staying arbitrarily close to `P*`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functional::{
    check_model_membership, evaluate_phi, riesz_alpha, FunctionalFile, FunctionalSpec, MembershipReport,
    RieszRepresenter,
};
use crate::law::{DiscreteLaw, LawFile, SupportFile, SupportSpec, Var};
use crate::linalg::{dot, Matrix};
use crate::scalar::Real;

/// Strict inequalities are enforced with this absolute slack.
const POSITIVITY_SLACK: f64 = 1e-12;

/// `P*` in factored form: `p(h,l,j,m) = π_Y|m(h) μ_Y(h) · π_W|m(j) μ_W(j) · f_zx(l,m)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BaseLawSpec<T> {
    support: SupportSpec<T>,
    functional: FunctionalSpec<T>,
    /// `k_z × k_x` masses of `(Z, X)`.
    f_zx: Matrix<T>,
    /// `k_w × k_x` densities of `W | X`.
    pi_w: Matrix<T>,
    /// `k_y × k_x` densities of `Y | X`.
    pi_y: Matrix<T>,
    alpha_tilde: RieszRepresenter<T>,
    law: DiscreteLaw<T>,
}

impl<T: Real> BaseLawSpec<T> {
    pub fn new(
        support: SupportSpec<T>,
        functional: FunctionalSpec<T>,
        f_zx: Matrix<T>,
        pi_w: Matrix<T>,
        pi_y: Matrix<T>,
    ) -> Result<Self> {
        let [k_y, k_z, k_w, k_x] = support.shape();
        let bad = |msg: String| Err(Error::DegenerateBase(msg));
        if (f_zx.rows(), f_zx.cols()) != (k_z, k_x)
            || (pi_w.rows(), pi_w.cols()) != (k_w, k_x)
            || (pi_y.rows(), pi_y.cols()) != (k_y, k_x)
        {
            return bad("factor shapes do not match the support".into());
        }
        if let Some(&v) = f_zx.as_slice().iter().find(|v| !(**v > T::zero() && v.is_finite())) {
            return bad(format!("(Z, X) masses must be positive, found {v}"));
        }
        let total: T = f_zx.as_slice().iter().copied().sum();
        if (total - T::one()).abs() > T::mass_tol() {
            return bad(format!("(Z, X) masses sum to {total}"));
        }
        for (name, pi, mu) in [("W", &pi_w, support.mu_w()), ("Y", &pi_y, support.mu_y())] {
            for m in 0..k_x {
                let col: Vec<T> = (0..pi.rows()).map(|r| pi[(r, m)]).collect();
                if let Some(v) = col.iter().find(|v| !(**v > T::zero() && v.is_finite())) {
                    return bad(format!("{name} | X = {m} density must be positive, found {v}"));
                }
                let integral = dot(&col, mu);
                if (integral - T::one()).abs() > T::derived_tol() {
                    return bad(format!("{name} | X = {m} density integrates to {integral}"));
                }
            }
        }
        functional.check_support(&support)?;
        let law = DiscreteLaw::from_fn(support.clone(), |h, l, j, m| {
            pi_y[(h, m)] * support.mu_y()[h] * pi_w[(j, m)] * support.mu_w()[j] * f_zx[(l, m)]
        })?;
        let alpha_tilde = riesz_alpha(&law, &functional)?;
        let varies = (0..k_x).any(|m| {
            let col = alpha_tilde.column(m);
            let lo = col.iter().copied().fold(T::infinity(), T::min);
            let hi = col.iter().copied().fold(T::neg_infinity(), T::max);
            let scale = lo.abs().max(hi.abs()).max(T::one());
            hi - lo > T::lit(1e3) * T::epsilon() * scale
        });
        if !varies {
            return bad("the representer is constant in W within every X stratum".into());
        }
        Ok(Self { support, functional, f_zx, pi_w, pi_y, alpha_tilde, law })
    }

    /// Projects `law` onto its conditional-independence counterpart with the
    /// same `(Z, X)`, `W | X` and `Y | X` margins.
    pub fn from_law(law: &DiscreteLaw<T>, functional: FunctionalSpec<T>) -> Result<Self> {
        let s = law.support().clone();
        let px = law.p_x();
        let pwx = law.p_wx();
        let pyx = law.marginal(&[Var::Y, Var::X]);
        let pi_w = Matrix::from_fn(s.k_w(), s.k_x(), |j, m| pwx[(j, m)] / px[m] / s.mu_w()[j]);
        let pi_y = Matrix::from_fn(s.k_y(), s.k_x(), |h, m| pyx.get(&[h, m]) / px[m] / s.mu_y()[h]);
        Self::new(s, functional, law.p_zx(), pi_w, pi_y)
    }

    /// The binary LATE base: `P(Z = 1) = 1/2`, uniform W and Y, `Y ∈ {0, 1}`.
    pub fn late_demo() -> Self {
        let half = T::lit(0.5);
        let col = Matrix::from_rows(&[vec![half], vec![half]]);
        Self::new(SupportSpec::binary(1), FunctionalSpec::Late, col.clone(), col.clone(), col)
            .expect("demo base is valid")
    }

    pub fn support(&self) -> &SupportSpec<T> {
        &self.support
    }
    pub fn functional(&self) -> &FunctionalSpec<T> {
        &self.functional
    }
    pub fn f_zx(&self) -> &Matrix<T> {
        &self.f_zx
    }
    pub fn pi_w(&self) -> &Matrix<T> {
        &self.pi_w
    }
    pub fn pi_y(&self) -> &Matrix<T> {
        &self.pi_y
    }
    pub fn alpha_tilde(&self) -> &RieszRepresenter<T> {
        &self.alpha_tilde
    }
    /// The assembled product law `P*`.
    pub fn law(&self) -> &DiscreteLaw<T> {
        &self.law
    }

    pub fn f_x(&self) -> Vec<T> {
        (0..self.f_zx.cols()).map(|m| (0..self.f_zx.rows()).map(|l| self.f_zx[(l, m)]).sum()).collect()
    }

    fn pi_w_col(&self, m: usize) -> Vec<T> {
        (0..self.pi_w.rows()).map(|j| self.pi_w[(j, m)]).collect()
    }

    fn pi_y_col(&self, m: usize) -> Vec<T> {
        (0..self.pi_y.rows()).map(|h| self.pi_y[(h, m)]).collect()
    }
}

/// Minimum-Frobenius-norm `M` with `M ι_y = α̃_m` and `M μ_Y = 0`:
/// `M = α̃_m u₁ᵀ` with `u₁` the dual vector of `ι_y` in `span(ι_y, μ_Y)`.
pub fn build_m<T: Real>(alpha_tilde_m: &[T], iota_y: &[T], mu_y: &[T]) -> Result<Matrix<T>> {
    let ii = dot(iota_y, iota_y);
    let mm = dot(mu_y, mu_y);
    let im = dot(iota_y, mu_y);
    let det = ii * mm - im * im;
    if !(det > T::lit(1e3) * T::epsilon() * ii * mm) {
        return Err(Error::CollinearSupport);
    }
    let u1: Vec<T> = iota_y.iter().zip(mu_y).map(|(&i, &m)| (mm * i - im * m) / det).collect();
    Ok(Matrix::outer(alpha_tilde_m, &u1))
}

/// `(Π^{W|Z,m})⁻¹ = (1/η) I − 1/(η πᵀ1 + η²) · 1 πᵀ`.
pub fn sherman_morrison_inverse<T: Real>(pi_w_m: &[T], eta_w: T) -> Result<Matrix<T>> {
    let s: T = pi_w_m.iter().copied().sum();
    if eta_w == T::zero() || !((T::one() + s / eta_w).abs() > T::lit(POSITIVITY_SLACK)) {
        return Err(Error::SingularPerturbation { stratum: 0 });
    }
    let k = pi_w_m.len();
    let c = T::one() / (eta_w * s + eta_w * eta_w);
    Ok(Matrix::from_fn(k, k, |r, col| {
        let diag = if r == col { T::one() / eta_w } else { T::zero() };
        diag - c * pi_w_m[col]
    }))
}

/// `Π^{W|Z,m} = 1 π_W|mᵀ + η_W I`.
fn pi_w_matrix<T: Real>(pi_w_m: &[T], eta_w: T) -> Matrix<T> {
    let k = pi_w_m.len();
    Matrix::from_fn(k, k, |_, j| pi_w_m[j]).add(&Matrix::identity(k).scale(eta_w))
}

/// `Π^{Y|Z,m} = 1 π_Y|mᵀ + η_Y M^m`.
fn pi_y_matrix<T: Real>(pi_y_m: &[T], eta_y: T, m: &Matrix<T>) -> Matrix<T> {
    Matrix::from_fn(m.rows(), pi_y_m.len(), |_, h| pi_y_m[h]).add(&m.scale(eta_y))
}

/// Perturbation sizes and the per-stratum Y-direction matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationParams<T> {
    eta_w: T,
    eta_y: T,
    m: Vec<Matrix<T>>,
}

impl<T: Real> PerturbationParams<T> {
    /// `η_Y = γ η_W` with the minimum-norm `M^m` built from the base.
    pub fn new(base: &BaseLawSpec<T>, eta_w: T, gamma: T) -> Result<Self> {
        Self::with_eta_y(base, eta_w, gamma * eta_w)
    }

    /// Independent `η_W` and `η_Y`, e.g. to remove the Y perturbation.
    pub fn with_eta_y(base: &BaseLawSpec<T>, eta_w: T, eta_y: T) -> Result<Self> {
        let s = &base.support;
        let m = (0..s.k_x())
            .map(|m| build_m(&base.alpha_tilde.column(m), s.iota_y(), s.mu_y()))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { eta_w, eta_y, m })
    }

    /// Caller-supplied `M^m`; the linear constraints are checked by
    /// [`perturb_kernels`].
    pub fn with_matrices(eta_w: T, eta_y: T, m: Vec<Matrix<T>>) -> Self {
        Self { eta_w, eta_y, m }
    }

    pub fn eta_w(&self) -> T {
        self.eta_w
    }
    pub fn eta_y(&self) -> T {
        self.eta_y
    }
    /// `η_Y / η_W`; zero when `η_W = 0`.
    pub fn gamma(&self) -> T {
        if self.eta_w == T::zero() {
            T::zero()
        } else {
            self.eta_y / self.eta_w
        }
    }
    pub fn m(&self) -> &[Matrix<T>] {
        &self.m
    }

    /// Every invariant failure, named; empty iff the parameters are admissible.
    pub fn violations(&self, base: &BaseLawSpec<T>) -> Vec<String> {
        let s = &base.support;
        let slack = T::lit(POSITIVITY_SLACK);
        let mut out = Vec::new();
        if self.m.len() != s.k_x() {
            out.push(format!("expected {} M matrices, got {}", s.k_x(), self.m.len()));
            return out;
        }
        for l in 0..s.k_z() {
            if !(T::one() + self.eta_w * s.mu_w()[l] > slack) {
                out.push(format!("W normalizer 1 + η_W μ_W({l}) is not positive"));
            }
        }
        for (m, mm) in self.m.iter().enumerate() {
            if (mm.rows(), mm.cols()) != (s.k_z(), s.k_y()) {
                out.push(format!("M[{m}] has shape {}×{}", mm.rows(), mm.cols()));
                continue;
            }
            let piw = pi_w_matrix(&base.pi_w_col(m), self.eta_w);
            if let Some(i) = piw.as_slice().iter().position(|v| !(*v > slack)) {
                out.push(format!("Π^W entry ({}, {}) of stratum {m} is not positive", i / piw.cols(), i % piw.cols()));
            }
            if self.eta_w != T::zero() {
                let sum: T = base.pi_w_col(m).iter().copied().sum();
                if !((T::one() + sum / self.eta_w).abs() > slack) {
                    out.push(format!("Sherman-Morrison denominator vanishes in stratum {m}"));
                }
            }
            let piy = pi_y_matrix(&base.pi_y_col(m), self.eta_y, mm);
            if let Some(i) = piy.as_slice().iter().position(|v| !(*v > slack)) {
                out.push(format!("Π^Y entry ({}, {}) of stratum {m} is not positive", i / piy.cols(), i % piy.cols()));
            }
            let alpha = base.alpha_tilde.column(m);
            let scale = alpha.iter().fold(T::one(), |a, v| a.max(v.abs()));
            let r1 = mm.matvec(s.iota_y());
            let r2 = mm.matvec(s.mu_y());
            let c1 = r1.iter().zip(&alpha).fold(T::zero(), |a, (x, y)| a.max((*x - *y).abs()));
            let c2 = r2.iter().fold(T::zero(), |a, x| a.max(x.abs()));
            let tol = T::lit(1e-12).max(T::lit(64.0) * T::epsilon()) * scale;
            if c1 > tol || c2 > tol {
                out.push(format!("M[{m}] violates its linear constraints (residuals {:e}, {:e})", c1.to_f64_lossy(), c2.to_f64_lossy()));
            }
        }
        out
    }
}

/// Assembles the perturbed law `f_Y|Z,X · f_W|Z,X · f_zx`.
pub fn perturb_kernels<T: Real>(base: &BaseLawSpec<T>, params: &PerturbationParams<T>) -> Result<DiscreteLaw<T>> {
    if let Some(v) = params.violations(base).into_iter().next() {
        return Err(Error::InvalidPerturbation(v));
    }
    let s = &base.support;
    let piw: Vec<Matrix<T>> = (0..s.k_x()).map(|m| pi_w_matrix(&base.pi_w_col(m), params.eta_w)).collect();
    let piy: Vec<Matrix<T>> =
        (0..s.k_x()).map(|m| pi_y_matrix(&base.pi_y_col(m), params.eta_y, &params.m[m])).collect();
    let (mu_y, mu_w) = (s.mu_y(), s.mu_w());
    let [ky, kz, kw, kx] = s.shape();
    let mut mass = Vec::with_capacity(s.cells());
    for h in 0..ky {
        for l in 0..kz {
            let norm = T::one() + params.eta_w * mu_w[l];
            for j in 0..kw {
                for m in 0..kx {
                    let fy = piy[m][(l, h)] * mu_y[h];
                    let fw = piw[m][(l, j)] * mu_w[j] / norm;
                    mass.push(fy * fw * base.f_zx[(l, m)]);
                }
            }
        }
    }
    // Rounding can leave the total a few ulps off one.
    let total: T = mass.iter().copied().sum();
    DiscreteLaw::new(s.clone(), mass.into_iter().map(|p| p / total).collect())
}

/// `φ(P)` of the perturbed law through the Sherman-Morrison solution `g†`
/// and the representer of the perturbed law.
pub fn closed_form_phi<T: Real>(base: &BaseLawSpec<T>, params: &PerturbationParams<T>) -> Result<T> {
    let law = perturb_kernels(base, params)?;
    let alpha = riesz_alpha(&law, &base.functional)?;
    let s = &base.support;
    let eta = params.eta_w;
    let mut phi = T::zero();
    for m in 0..s.k_x() {
        let pi_w = base.pi_w_col(m);
        let inv = sherman_morrison_inverse(&pi_w, eta).map_err(|_| Error::SingularPerturbation { stratum: m })?;
        let piw = pi_w_matrix(&pi_w, eta);
        let piy = pi_y_matrix(&base.pi_y_col(m), params.eta_y, &params.m[m]);
        let v: Vec<T> = piy
            .matvec(s.iota_y())
            .into_iter()
            .zip(s.mu_w())
            .map(|(x, &mu)| (T::one() + eta * mu) * x)
            .collect();
        let g_dagger = inv.matvec(&v);
        let mut stratum = T::zero();
        for l in 0..s.k_z() {
            let inner: T = (0..s.k_w()).map(|j| piw[(l, j)] * alpha.get(j, m) * g_dagger[j]).sum();
            stratum = stratum + base.f_zx[(l, m)] / (T::one() + eta * s.mu_w()[l]) * inner;
        }
        phi = phi + stratum;
    }
    Ok(phi)
}

/// Slope and intercept of the `η_W → 0` limit of `φ` as a function of `γ`:
/// `Σ_m P(X = m) a_m` and `Σ_m P(X = m) b_m`.
pub fn limit_coefficients<T: Real>(base: &BaseLawSpec<T>) -> (T, T) {
    let s = &base.support;
    let f_x = base.f_x();
    let (mut a_sum, mut b_sum) = (T::zero(), T::zero());
    for m in 0..s.k_x() {
        let pi_w = base.pi_w_col(m);
        let alpha = base.alpha_tilde.column(m);
        let total: T = pi_w.iter().copied().sum();
        let first: T = pi_w.iter().zip(&alpha).map(|(&p, &a)| p * a).sum();
        let second: T = pi_w.iter().zip(&alpha).map(|(&p, &a)| p * a * a).sum();
        let a = second - first * first / total;
        let c_y = dot(&base.pi_y_col(m), s.iota_y());
        let mean_alpha: T = (0..s.k_w()).map(|j| pi_w[j] * s.mu_w()[j] * alpha[j]).sum();
        a_sum = a_sum + f_x[m] * a;
        b_sum = b_sum + f_x[m] * c_y * mean_alpha;
    }
    (a_sum, b_sum)
}

/// `lim_{η_W → 0} φ` at fixed `γ = η_Y / η_W`.
pub fn limit_phi<T: Real>(base: &BaseLawSpec<T>, gamma: T) -> T {
    let (a, b) = limit_coefficients(base);
    gamma * a + b
}

/// The `γ` whose limit value is `ζ`.
pub fn gamma_for_target<T: Real>(base: &BaseLawSpec<T>, zeta: T) -> Result<T> {
    let (a, b) = limit_coefficients(base);
    if !(a > T::zero()) {
        return Err(Error::DegenerateBase(format!("limit slope {a} is not positive")));
    }
    Ok((zeta - b) / a)
}

/// Largest `t > 0` such that every positivity invariant at `η_W = sign·t`,
/// `η_Y = γ η_W` keeps a margin of `min(margin, value/2)` over its value at
/// `t = 0`.
pub fn max_admissible_eta<T: Real>(base: &BaseLawSpec<T>, gamma: T, sign: T, margin: T) -> Result<T> {
    let s = &base.support;
    let params = PerturbationParams::new(base, T::zero(), gamma)?;
    let mut t_max = T::infinity();
    let mut limit = |c: T, d: T| {
        if d < T::zero() {
            let floor = margin.min(c / T::lit(2.0));
            t_max = t_max.min((c - floor) / -d);
        }
    };
    for &mu in s.mu_w() {
        limit(T::one(), sign * mu);
    }
    for m in 0..s.k_x() {
        for &p in &base.pi_w_col(m) {
            limit(p, sign);
        }
        let pi_y = base.pi_y_col(m);
        let mm = &params.m[m];
        for l in 0..mm.rows() {
            for (h, &p) in pi_y.iter().enumerate() {
                limit(p, sign * gamma * mm[(l, h)]);
            }
        }
    }
    Ok(t_max.min(T::one()))
}

/// Options for [`generate_sequence`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenerateOptions<T> {
    /// Bound on `|φ(P_t) − ζ|` and on closed-form/solver disagreement.
    pub cert_tol: T,
    /// Residual tolerance for the model-membership check.
    pub solve_tol: T,
    /// Positivity margin used to size the largest admissible `η_W`.
    pub margin: T,
    /// Halvings of `η_W` tried before giving up on a sign.
    pub max_halvings: usize,
}

impl<T: Real> Default for GenerateOptions<T> {
    fn default() -> Self {
        Self { cert_tol: T::solve_tol(), solve_tol: T::solve_tol(), margin: T::lit(1e-3), max_halvings: 40 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SequenceStep<T> {
    pub tv_target: T,
    pub eta_w: T,
    pub gamma: T,
    pub law: DiscreteLaw<T>,
    /// `φ` from the generic solver.
    pub phi_verified: T,
    /// `φ` from the Sherman-Morrison closed form.
    pub phi_closed_form: T,
    pub tv_to_base: T,
    pub kl_to_base: T,
    pub membership: MembershipReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdversarialSequence<T> {
    pub base: BaseLawSpec<T>,
    pub target_zeta: T,
    pub steps: Vec<SequenceStep<T>>,
}

/// `γ` with `φ(γ, η_W) = ζ`. At fixed `η_W` the representer depends only on
/// the `(W, X)` margin, which does not involve `η_Y`, so `φ` is affine in
/// `γ`: a secant through two evaluations followed by one correction.
fn solve_gamma<T: Real>(base: &BaseLawSpec<T>, eta: T, zeta: T, seed: T) -> Result<(T, PerturbationParams<T>)> {
    let eval = |gamma: T| -> Result<T> { closed_form_phi(base, &PerturbationParams::new(base, eta, gamma)?) };
    let g0 = seed;
    let g1 = seed + T::one();
    let f0 = eval(g0)?;
    let f1 = eval(g1)?;
    let slope = f1 - f0;
    if !(slope.abs() > T::epsilon()) || !slope.is_finite() {
        return Err(Error::InvalidPerturbation(format!("φ is flat in γ at η_W = {eta}")));
    }
    let mut gamma = g0 + (zeta - f0) / slope;
    let fg = eval(gamma)?;
    gamma = gamma + (zeta - fg) / slope;
    Ok((gamma, PerturbationParams::new(base, eta, gamma)?))
}

/// Generates laws `P_t` with `φ(P_t) = ζ` and `TV(P_t, P*) ≤ tv_targets[t]`.
///
/// For each step, `η_W` runs down the grid `s·2^{-k}` from the largest
/// admissible size `s` (positive sign first, then negative), `γ` is solved
/// exactly at each `η_W`, and the first law that satisfies positivity, the
/// TV target and strict TV decrease is certified and kept.
pub fn generate_sequence<T: Real>(
    base: &BaseLawSpec<T>,
    zeta: T,
    tv_targets: &[T],
    opts: &GenerateOptions<T>,
) -> Result<AdversarialSequence<T>> {
    if tv_targets.is_empty() {
        return Err(Error::InvalidInput("no TV targets".into()));
    }
    if tv_targets.iter().any(|t| !(*t > T::zero())) || tv_targets.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::InvalidInput("TV targets must be positive and strictly decreasing".into()));
    }
    let gamma0 = gamma_for_target(base, zeta)?;
    let mut steps: Vec<SequenceStep<T>> = Vec::with_capacity(tv_targets.len());
    let mut prev_tv = T::infinity();
    for (t, &target) in tv_targets.iter().enumerate() {
        let mut found = None;
        let mut tried = Vec::new();
        'signs: for sign in [T::one(), -T::one()] {
            let seed = steps.last().map_or(gamma0, |s| s.gamma);
            let top = max_admissible_eta(base, seed, sign, opts.margin)?;
            let mut eta_abs = top;
            for _ in 0..=opts.max_halvings {
                let eta = sign * eta_abs;
                eta_abs = eta_abs / T::lit(2.0);
                let Ok((gamma, params)) = solve_gamma(base, eta, zeta, seed) else {
                    continue;
                };
                let Ok(law) = perturb_kernels(base, &params) else {
                    continue;
                };
                let tv = law.tv_distance(&base.law)?;
                if tv <= target && tv < prev_tv {
                    found = Some((eta, gamma, params, law, tv));
                    break 'signs;
                }
            }
            tried.push(format!("{} η_W down to {:e}", if sign > T::zero() { "positive" } else { "negative" }, (sign * eta_abs * T::lit(2.0)).to_f64_lossy()));
        }
        let Some((eta, gamma, params, law, tv)) = found else {
            return Err(Error::BracketingFailure {
                step: t,
                detail: format!(
                    "no admissible η_W reaches TV ≤ {:e} with φ = {} (tried {})",
                    target.to_f64_lossy(),
                    zeta.to_f64_lossy(),
                    tried.join(", ")
                ),
            });
        };
        let phi_closed_form = closed_form_phi(base, &params)?;
        let fail = |detail: String| Error::CertificationFailure { step: t, detail };
        let phi_verified = evaluate_phi(&law, &base.functional, opts.solve_tol).map_err(|e| fail(e.to_string()))?;
        if !((phi_verified - zeta).abs() <= opts.cert_tol) {
            return Err(fail(format!("solver φ = {phi_verified} misses ζ = {zeta}")));
        }
        if !((phi_verified - phi_closed_form).abs() <= opts.cert_tol) {
            return Err(fail(format!("solver φ = {phi_verified} disagrees with closed form {phi_closed_form}")));
        }
        let membership = check_model_membership(&law, &base.functional, opts.solve_tol);
        if !membership.in_model {
            return Err(fail(format!("law is outside the model: {:?}", membership.detail)));
        }
        let kl_to_base = law.kl_divergence(&base.law)?;
        prev_tv = tv;
        steps.push(SequenceStep {
            tv_target: target,
            eta_w: eta,
            gamma,
            law,
            phi_verified,
            phi_closed_form,
            tv_to_base: tv,
            kl_to_base,
            membership,
        });
    }
    Ok(AdversarialSequence { base: base.clone(), target_zeta: zeta, steps })
}

/// On-disk form of a [`BaseLawSpec`]; per-stratum vectors are indexed by X cell first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaseFile {
    pub support: SupportFile,
    pub functional: FunctionalFile,
    /// `f_zx[m][l] = P(Z = l, X = m)`.
    pub f_zx: Vec<Vec<f64>>,
    /// `pi_w_given_x[m][j]`, density of `W | X = m` on cell `j`.
    pub pi_w_given_x: Vec<Vec<f64>>,
    /// `pi_y_given_x[m][h]`, density of `Y | X = m` on cell `h`.
    pub pi_y_given_x: Vec<Vec<f64>>,
}

impl BaseFile {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_base(&self) -> Result<BaseLawSpec<f64>> {
        let support = self.support.to_spec::<f64>()?;
        let functional = self.functional.to_spec()?;
        let by_stratum = |name: &str, v: &[Vec<f64>], cells: usize| -> Result<Matrix<f64>> {
            if v.len() != support.k_x() || v.iter().any(|c| c.len() != cells) {
                return Err(Error::Parse(format!("`{name}` must be {} lists of {cells} values", support.k_x())));
            }
            Ok(Matrix::from_fn(cells, v.len(), |r, m| v[m][r]))
        };
        let f_zx = by_stratum("f_zx", &self.f_zx, support.k_z())?;
        let pi_w = by_stratum("pi_w_given_x", &self.pi_w_given_x, support.k_w())?;
        let pi_y = by_stratum("pi_y_given_x", &self.pi_y_given_x, support.k_y())?;
        BaseLawSpec::new(support, functional, f_zx, pi_w, pi_y)
    }
}

impl From<&BaseLawSpec<f64>> for BaseFile {
    fn from(b: &BaseLawSpec<f64>) -> Self {
        let cols = |a: &Matrix<f64>| (0..a.cols()).map(|m| (0..a.rows()).map(|r| a[(r, m)]).collect()).collect();
        BaseFile {
            support: b.support().into(),
            functional: b.functional().into(),
            f_zx: cols(b.f_zx()),
            pi_w_given_x: cols(b.pi_w()),
            pi_y_given_x: cols(b.pi_y()),
        }
    }
}

/// Per-step certificate, as written next to the generated law files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub step: usize,
    pub tv_target: f64,
    pub eta_w: f64,
    pub gamma: f64,
    pub eta_y: f64,
    pub phi_verified: f64,
    pub phi_closed_form: f64,
    pub tv_to_base: f64,
    pub kl_to_base: f64,
    pub in_model: bool,
    pub g_residual: f64,
    pub q_residual: f64,
}

impl AdversarialSequence<f64> {
    pub fn certificates(&self) -> Vec<Certificate> {
        self.steps
            .iter()
            .enumerate()
            .map(|(i, s)| Certificate {
                step: i,
                tv_target: s.tv_target,
                eta_w: s.eta_w,
                gamma: s.gamma,
                eta_y: s.gamma * s.eta_w,
                phi_verified: s.phi_verified,
                phi_closed_form: s.phi_closed_form,
                tv_to_base: s.tv_to_base,
                kl_to_base: s.kl_to_base,
                in_model: s.membership.in_model,
                g_residual: s.membership.g_residual,
                q_residual: s.membership.q_residual,
            })
            .collect()
    }

    pub fn law_files(&self) -> Vec<LawFile> {
        self.steps.iter().map(|s| LawFile::from(&s.law)).collect()
    }
}
