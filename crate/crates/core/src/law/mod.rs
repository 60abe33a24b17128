//! Finitely supported joint laws of `O = (Y, Z, W, X)`.
//!
//! A law is stored as a probability-mass tensor over the product of cells
//! `(h, l, j, m)`, row-major in that order. Densities with respect to the
//! cell measures are derived views: `π = p / (μ_Y(h) μ_Z(l) μ_W(j) μ_X(m))`.

mod io;
mod sample;

pub use io::{LawFile, SupportFile};
pub use sample::{estimate, read_dataset_csv, sample, write_dataset_csv, Dataset, Observation};

use std::fmt;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Real;

/// Coordinate of `O`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Var {
    Y,
    Z,
    W,
    X,
}

impl Var {
    pub const ALL: [Var; 4] = [Var::Y, Var::Z, Var::W, Var::X];

    fn axis(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Var::Y => "Y",
            Var::Z => "Z",
            Var::W => "W",
            Var::X => "X",
        };
        f.write_str(s)
    }
}

/// Cell structure of the support: counts, per-cell measures, and the per-cell
/// integrals `ι_y(h) = ∫_{S^Y_h} y dμ_Y`.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportSpec<T> {
    k_y: usize,
    k_z: usize,
    k_w: usize,
    k_x: usize,
    mu_y: Vec<T>,
    mu_z: Vec<T>,
    mu_w: Vec<T>,
    mu_x: Vec<T>,
    iota_y: Vec<T>,
}

impl<T: Real> SupportSpec<T> {
    /// Validates every support invariant: positive finite measures,
    /// `k_y ≥ 2`, `k_z = k_w`, and `ι_y` not collinear with `μ_Y`.
    pub fn new(
        mu_y: Vec<T>,
        mu_z: Vec<T>,
        mu_w: Vec<T>,
        mu_x: Vec<T>,
        iota_y: Vec<T>,
    ) -> Result<Self> {
        let bad = |msg: String| Err(Error::InvalidSupport(msg));
        if mu_y.len() < 2 {
            return bad(format!("k_y = {} but at least two Y cells are required", mu_y.len()));
        }
        if mu_z.is_empty() || mu_x.is_empty() {
            return bad("k_z and k_x must be positive".into());
        }
        if mu_z.len() != mu_w.len() {
            return bad(format!("k_z = {} differs from k_w = {}", mu_z.len(), mu_w.len()));
        }
        if iota_y.len() != mu_y.len() {
            return bad(format!("iota_y has length {}, expected {}", iota_y.len(), mu_y.len()));
        }
        for (name, v) in [("mu_y", &mu_y), ("mu_z", &mu_z), ("mu_w", &mu_w), ("mu_x", &mu_x)] {
            if let Some(i) = v.iter().position(|&x| !(x > T::zero() && x.is_finite())) {
                return bad(format!("{name}[{i}] = {} is not a positive finite measure", v[i]));
            }
        }
        if iota_y.iter().any(|x| !x.is_finite()) {
            return bad("iota_y has non-finite entries".into());
        }
        if collinear(&iota_y, &mu_y) {
            return Err(Error::CollinearSupport);
        }
        Ok(Self {
            k_y: mu_y.len(),
            k_z: mu_z.len(),
            k_w: mu_w.len(),
            k_x: mu_x.len(),
            mu_y,
            mu_z,
            mu_w,
            mu_x,
            iota_y,
        })
    }

    /// Counting measures on every axis with the given Y values (singleton cells).
    pub fn counting(y_values: &[T], k: usize, k_x: usize) -> Result<Self> {
        Self::new(
            vec![T::one(); y_values.len()],
            vec![T::one(); k],
            vec![T::one(); k],
            vec![T::one(); k_x],
            y_values.to_vec(),
        )
    }

    /// Binary Y ∈ {0, 1}, binary Z and W, and `k_x` strata, all singleton cells.
    pub fn binary(k_x: usize) -> Self {
        Self::counting(&[T::zero(), T::one()], 2, k_x).expect("binary support is valid")
    }

    pub fn k_y(&self) -> usize {
        self.k_y
    }
    pub fn k_z(&self) -> usize {
        self.k_z
    }
    pub fn k_w(&self) -> usize {
        self.k_w
    }
    pub fn k_x(&self) -> usize {
        self.k_x
    }
    pub fn mu_y(&self) -> &[T] {
        &self.mu_y
    }
    pub fn mu_z(&self) -> &[T] {
        &self.mu_z
    }
    pub fn mu_w(&self) -> &[T] {
        &self.mu_w
    }
    pub fn mu_x(&self) -> &[T] {
        &self.mu_x
    }
    pub fn iota_y(&self) -> &[T] {
        &self.iota_y
    }

    pub fn len(&self, v: Var) -> usize {
        match v {
            Var::Y => self.k_y,
            Var::Z => self.k_z,
            Var::W => self.k_w,
            Var::X => self.k_x,
        }
    }

    pub fn measure(&self, v: Var) -> &[T] {
        match v {
            Var::Y => &self.mu_y,
            Var::Z => &self.mu_z,
            Var::W => &self.mu_w,
            Var::X => &self.mu_x,
        }
    }

    pub fn shape(&self) -> [usize; 4] {
        [self.k_y, self.k_z, self.k_w, self.k_x]
    }

    pub fn cells(&self) -> usize {
        self.k_y * self.k_z * self.k_w * self.k_x
    }

    /// Row-major flat index of cell `(h, l, j, m)`.
    pub fn flat(&self, h: usize, l: usize, j: usize, m: usize) -> usize {
        ((h * self.k_z + l) * self.k_w + j) * self.k_x + m
    }

    pub fn unflat(&self, mut idx: usize) -> [usize; 4] {
        let m = idx % self.k_x;
        idx /= self.k_x;
        let j = idx % self.k_w;
        idx /= self.k_w;
        let l = idx % self.k_z;
        [idx / self.k_z, l, j, m]
    }

    /// Representative value of Y on cell `h`: the cell mean `ι_y(h) / μ_Y(h)`.
    pub fn y_mean(&self, h: usize) -> T {
        self.iota_y[h] / self.mu_y[h]
    }

    pub fn y_means(&self) -> Vec<T> {
        (0..self.k_y).map(|h| self.y_mean(h)).collect()
    }

    pub fn cast<U: Real>(&self) -> SupportSpec<U> {
        let c = |v: &[T]| v.iter().map(|x| U::lit(x.to_f64_lossy())).collect::<Vec<U>>();
        SupportSpec {
            k_y: self.k_y,
            k_z: self.k_z,
            k_w: self.k_w,
            k_x: self.k_x,
            mu_y: c(&self.mu_y),
            mu_z: c(&self.mu_z),
            mu_w: c(&self.mu_w),
            mu_x: c(&self.mu_x),
            iota_y: c(&self.iota_y),
        }
    }
}

/// `a` and `b` are collinear when Cauchy-Schwarz is tight to rounding.
fn collinear<T: Real>(a: &[T], b: &[T]) -> bool {
    let aa = crate::linalg::dot(a, a);
    let bb = crate::linalg::dot(b, b);
    let ab = crate::linalg::dot(a, b);
    let gram = aa * bb - ab * ab;
    aa == T::zero() || bb == T::zero() || gram <= T::lit(1e3) * T::epsilon() * aa * bb
}

/// A failed [`DiscreteLaw`] invariant.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NegativeMass { cell: [usize; 4], value: f64 },
    NonFiniteMass { cell: [usize; 4] },
    TotalMass { total: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NegativeMass { cell: [h, l, j, m], value } => {
                write!(f, "negative mass at ({h},{l},{j},{m}): {value}")
            }
            Violation::NonFiniteMass { cell: [h, l, j, m] } => {
                write!(f, "non-finite mass at ({h},{l},{j},{m})")
            }
            Violation::TotalMass { total } => write!(f, "total mass {total} ≠ 1"),
        }
    }
}

/// Probability-mass tensor `p[h][l][j][m]` over a [`SupportSpec`].
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteLaw<T> {
    support: SupportSpec<T>,
    mass: Vec<T>,
}

impl<T: Real> DiscreteLaw<T> {
    /// Builds a law and rejects it unless [`validate`](Self::validate) is empty.
    pub fn new(support: SupportSpec<T>, mass: Vec<T>) -> Result<Self> {
        let law = Self::new_unchecked(support, mass)?;
        let violations = law.validate();
        if let Some(v) = violations.first() {
            return Err(Error::InvalidLaw(v.to_string()));
        }
        Ok(law)
    }

    /// Checks only the tensor shape; use for diagnostics on suspect input.
    pub fn new_unchecked(support: SupportSpec<T>, mass: Vec<T>) -> Result<Self> {
        if mass.len() != support.cells() {
            return Err(Error::InvalidLaw(format!(
                "mass has {} entries, support has {} cells",
                mass.len(),
                support.cells()
            )));
        }
        Ok(Self { support, mass })
    }

    /// Builds a law from a function of the cell index, then normalizes.
    pub fn from_fn(support: SupportSpec<T>, f: impl Fn(usize, usize, usize, usize) -> T) -> Result<Self> {
        let mut mass = Vec::with_capacity(support.cells());
        let [ky, kz, kw, kx] = support.shape();
        for h in 0..ky {
            for l in 0..kz {
                for j in 0..kw {
                    for m in 0..kx {
                        mass.push(f(h, l, j, m));
                    }
                }
            }
        }
        let total: T = mass.iter().copied().sum();
        if !(total > T::zero()) {
            return Err(Error::InvalidLaw("mass function sums to zero".into()));
        }
        Self::new(support, mass.into_iter().map(|p| p / total).collect())
    }

    pub fn uniform(support: SupportSpec<T>) -> Self {
        let n = support.cells();
        let p = T::one() / T::from_usize_lossy(n);
        Self { support, mass: vec![p; n] }
    }

    pub fn point_mass(support: SupportSpec<T>, cell: [usize; 4]) -> Self {
        let mut mass = vec![T::zero(); support.cells()];
        mass[support.flat(cell[0], cell[1], cell[2], cell[3])] = T::one();
        Self { support, mass }
    }

    pub fn support(&self) -> &SupportSpec<T> {
        &self.support
    }

    pub fn mass(&self) -> &[T] {
        &self.mass
    }

    pub fn p(&self, h: usize, l: usize, j: usize, m: usize) -> T {
        self.mass[self.support.flat(h, l, j, m)]
    }

    /// Density `π_{h,l,j,m}` with respect to the product cell measure.
    pub fn density(&self, h: usize, l: usize, j: usize, m: usize) -> T {
        let s = &self.support;
        self.p(h, l, j, m) / (s.mu_y[h] * s.mu_z[l] * s.mu_w[j] * s.mu_x[m])
    }

    /// Every failed invariant; empty iff the law is valid.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let mut total = T::zero();
        for (i, &p) in self.mass.iter().enumerate() {
            if !p.is_finite() {
                out.push(Violation::NonFiniteMass { cell: self.support.unflat(i) });
                continue;
            }
            if p < T::zero() {
                out.push(Violation::NegativeMass { cell: self.support.unflat(i), value: p.to_f64_lossy() });
            }
            total = total + p;
        }
        if (total - T::one()).abs() > T::mass_tol() {
            out.push(Violation::TotalMass { total: total.to_f64_lossy() });
        }
        out
    }

    pub fn cast<U: Real>(&self) -> DiscreteLaw<U> {
        DiscreteLaw {
            support: self.support.cast(),
            mass: self.mass.iter().map(|x| U::lit(x.to_f64_lossy())).collect(),
        }
    }

    /// Marginal mass table over `keep`, with axes in `Y, Z, W, X` order.
    pub fn marginal(&self, keep: &[Var]) -> MassTable<T> {
        let mut vars: Vec<Var> = keep.to_vec();
        vars.sort();
        vars.dedup();
        let shape: Vec<usize> = vars.iter().map(|&v| self.support.len(v)).collect();
        let size = shape.iter().product::<usize>();
        let mut data = vec![T::zero(); size];
        for (i, &p) in self.mass.iter().enumerate() {
            let cell = self.support.unflat(i);
            let mut idx = 0;
            for (v, &n) in vars.iter().zip(&shape) {
                idx = idx * n + cell[v.axis()];
            }
            data[idx] = data[idx] + p;
        }
        MassTable { vars, shape, data }
    }

    /// `P(Z = l, X = m)` as a `k_z × k_x` matrix.
    pub fn p_zx(&self) -> Matrix<T> {
        let t = self.marginal(&[Var::Z, Var::X]);
        Matrix::from_fn(self.support.k_z, self.support.k_x, |l, m| t.get(&[l, m]))
    }

    /// `P(W = j, X = m)` as a `k_w × k_x` matrix.
    pub fn p_wx(&self) -> Matrix<T> {
        let t = self.marginal(&[Var::W, Var::X]);
        Matrix::from_fn(self.support.k_w, self.support.k_x, |j, m| t.get(&[j, m]))
    }

    pub fn p_x(&self) -> Vec<T> {
        self.marginal(&[Var::X]).data
    }

    /// Conditional density of `target` given `(row, X)` (or given `X` alone
    /// when `row` is `None`), one matrix per X stratum with rows indexed by
    /// the conditioning cell and columns by the target cell.
    pub fn conditional_kernel(&self, target: Var, row: Option<Var>) -> Result<Kernel<T>> {
        if target == Var::X || row == Some(Var::X) || row == Some(target) {
            return Err(Error::InvalidInput(format!(
                "unsupported conditional {target} | {}",
                row.map_or("X".to_string(), |r| format!("{r},X"))
            )));
        }
        let k_x = self.support.k_x;
        let n_t = self.support.len(target);
        let col_measure = self.support.measure(target).to_vec();
        let mut strata = Vec::with_capacity(k_x);
        match row {
            Some(r) => {
                let joint = self.marginal(&[target, r, Var::X]);
                let cond = self.marginal(&[r, Var::X]);
                let n_r = self.support.len(r);
                let target_first = target < r;
                for m in 0..k_x {
                    let mut k = Matrix::zeros(n_r, n_t);
                    for a in 0..n_r {
                        let denom = cond.get(&[a, m]);
                        if !(denom > T::zero()) {
                            return Err(Error::ZeroConditioningMass { cell: vec![a, m] });
                        }
                        for c in 0..n_t {
                            let num = if target_first { joint.get(&[c, a, m]) } else { joint.get(&[a, c, m]) };
                            k[(a, c)] = num / denom / col_measure[c];
                        }
                    }
                    strata.push(k);
                }
            }
            None => {
                let joint = self.marginal(&[target, Var::X]);
                let px = self.p_x();
                for (m, &denom) in px.iter().enumerate() {
                    if !(denom > T::zero()) {
                        return Err(Error::ZeroConditioningMass { cell: vec![m] });
                    }
                    strata.push(Matrix::from_fn(1, n_t, |_, c| joint.get(&[c, m]) / denom / col_measure[c]));
                }
            }
        }
        Ok(Kernel { target, row, col_measure, strata })
    }

    fn check_same_support(&self, other: &Self) -> Result<()> {
        if self.support != other.support {
            return Err(Error::SupportMismatch);
        }
        Ok(())
    }

    /// Total variation distance, `½ Σ |p_a − p_b|`.
    pub fn tv_distance(&self, other: &Self) -> Result<T> {
        self.check_same_support(other)?;
        Ok(tv_distance(&self.mass, &other.mass))
    }

    /// `Σ p_a log(p_a / p_b)` with `0 log 0 = 0`.
    pub fn kl_divergence(&self, other: &Self) -> Result<T> {
        self.check_same_support(other)?;
        kl_divergence(&self.mass, &other.mass)
    }
}

/// Total variation distance between two mass vectors on the same cells.
pub fn tv_distance<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| (x - y).abs()).sum::<T>() / T::lit(2.0)
}

/// Kullback-Leibler divergence `D(a ‖ b)` between mass vectors.
pub fn kl_divergence<T: Real>(a: &[T], b: &[T]) -> Result<T> {
    let mut acc = T::zero();
    for (i, (&pa, &pb)) in a.iter().zip(b).enumerate() {
        if pa <= T::zero() {
            continue;
        }
        if pb <= T::zero() {
            return Err(Error::AbsoluteContinuityViolation { cell: i });
        }
        acc = acc + pa * (pa / pb).ln();
    }
    Ok(acc.max(T::zero()))
}

/// Marginal mass over a subset of coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct MassTable<T> {
    pub vars: Vec<Var>,
    pub shape: Vec<usize>,
    pub data: Vec<T>,
}

impl<T: Real> MassTable<T> {
    pub fn get(&self, idx: &[usize]) -> T {
        debug_assert_eq!(idx.len(), self.shape.len());
        let mut flat = 0;
        for (&i, &n) in idx.iter().zip(&self.shape) {
            debug_assert!(i < n);
            flat = flat * n + i;
        }
        self.data[flat]
    }

    pub fn total(&self) -> T {
        self.data.iter().copied().sum()
    }
}

/// Per-stratum conditional densities. Row `r` of stratum `m` integrates to
/// one against `col_measure`.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel<T> {
    pub target: Var,
    pub row: Option<Var>,
    pub col_measure: Vec<T>,
    pub strata: Vec<Matrix<T>>,
}

impl<T: Real> Kernel<T> {
    /// Conditional probability of target cell `c` given row cell `r` in stratum `m`.
    pub fn prob(&self, m: usize, r: usize, c: usize) -> T {
        self.strata[m][(r, c)] * self.col_measure[c]
    }

    /// Largest deviation of a row integral from one.
    pub fn max_row_defect(&self) -> T {
        let mut worst = T::zero();
        for k in &self.strata {
            for r in 0..k.rows() {
                let s: T = (0..k.cols()).map(|c| k[(r, c)] * self.col_measure[c]).sum();
                worst = worst.max((s - T::one()).abs());
            }
        }
        worst
    }
}
