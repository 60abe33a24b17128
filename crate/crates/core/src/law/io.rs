use serde::{Deserialize, Serialize};

use super::{DiscreteLaw, SupportSpec};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// On-disk form of a [`SupportSpec`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SupportFile {
    pub k_y: usize,
    pub k_z: usize,
    pub k_w: usize,
    pub k_x: usize,
    pub mu_y: Vec<f64>,
    pub mu_z: Vec<f64>,
    pub mu_w: Vec<f64>,
    pub mu_x: Vec<f64>,
    pub iota_y: Vec<f64>,
}

/// On-disk form of a [`DiscreteLaw`]: the support plus the flat row-major
/// mass array over `(h, l, j, m)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LawFile {
    pub support: SupportFile,
    pub mass: Vec<f64>,
}

impl SupportFile {
    pub fn to_spec<T: Real>(&self) -> Result<SupportSpec<T>> {
        let checks = [
            ("k_y", self.k_y, "mu_y", self.mu_y.len()),
            ("k_z", self.k_z, "mu_z", self.mu_z.len()),
            ("k_w", self.k_w, "mu_w", self.mu_w.len()),
            ("k_x", self.k_x, "mu_x", self.mu_x.len()),
            ("k_y", self.k_y, "iota_y", self.iota_y.len()),
        ];
        for (k, n, v, len) in checks {
            if n != len {
                return Err(Error::InvalidSupport(format!("{k} = {n} but {v} has length {len}")));
            }
        }
        let c = |v: &[f64]| v.iter().map(|&x| T::lit(x)).collect::<Vec<T>>();
        SupportSpec::new(c(&self.mu_y), c(&self.mu_z), c(&self.mu_w), c(&self.mu_x), c(&self.iota_y))
    }
}

impl<T: Real> From<&SupportSpec<T>> for SupportFile {
    fn from(s: &SupportSpec<T>) -> Self {
        let c = |v: &[T]| v.iter().map(|x| x.to_f64_lossy()).collect::<Vec<f64>>();
        SupportFile {
            k_y: s.k_y(),
            k_z: s.k_z(),
            k_w: s.k_w(),
            k_x: s.k_x(),
            mu_y: c(s.mu_y()),
            mu_z: c(s.mu_z()),
            mu_w: c(s.mu_w()),
            mu_x: c(s.mu_x()),
            iota_y: c(s.iota_y()),
        }
    }
}

impl LawFile {
    /// Shape-checked law; call [`DiscreteLaw::validate`] for the invariants.
    pub fn to_law_unchecked<T: Real>(&self) -> Result<DiscreteLaw<T>> {
        let support = self.support.to_spec()?;
        DiscreteLaw::new_unchecked(support, self.mass.iter().map(|&x| T::lit(x)).collect())
    }

    pub fn to_law<T: Real>(&self) -> Result<DiscreteLaw<T>> {
        let law = self.to_law_unchecked::<T>()?;
        DiscreteLaw::new(law.support().clone(), law.mass().to_vec())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("law file serializes")
    }
}

impl<T: Real> From<&DiscreteLaw<T>> for LawFile {
    fn from(law: &DiscreteLaw<T>) -> Self {
        LawFile {
            support: law.support().into(),
            mass: law.mass().iter().map(|x| x.to_f64_lossy()).collect(),
        }
    }
}
