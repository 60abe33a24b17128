use std::io::{Read, Write};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{DiscreteLaw, SupportSpec};
use crate::error::{Error, Result};

/// One draw of `O`: the real outcome and the Z, W, X cell indices.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub y: f64,
    pub z: usize,
    pub w: usize,
    pub x: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    pub rows: Vec<Observation>,
}

impl Dataset {
    pub fn new(rows: Vec<Observation>) -> Self {
        Self { rows }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// The Y cell a row belongs to: the first cell whose mean matches `y`.
    pub fn y_cell(support: &SupportSpec<f64>, y: f64) -> Option<usize> {
        (0..support.k_y()).find(|&h| {
            let c = support.y_mean(h);
            (c - y).abs() <= 1e-9 * c.abs().max(1.0)
        })
    }
}

/// Draws `n` i.i.d. rows. Y is emitted as the cell mean of its cell.
pub fn sample(law: &DiscreteLaw<f64>, n: usize, seed: u64) -> Dataset {
    let support = law.support();
    let means = support.y_means();
    let dist = WeightedIndex::new(law.mass().iter().map(|&p| p.max(0.0))).expect("valid law has positive total mass");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = (0..n)
        .map(|_| {
            let [h, l, j, m] = support.unflat(dist.sample(&mut rng));
            Observation { y: means[h], z: l, w: j, x: m }
        })
        .collect();
    Dataset { rows }
}

/// Smoothed empirical law: `(count + s) / (n + s · cells)` on every cell.
pub fn estimate(data: &Dataset, support: &SupportSpec<f64>, smoothing: f64) -> Result<DiscreteLaw<f64>> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if !(smoothing >= 0.0 && smoothing.is_finite()) {
        return Err(Error::InvalidInput(format!("smoothing must be nonnegative, got {smoothing}")));
    }
    let mut counts = vec![0u64; support.cells()];
    for (i, o) in data.rows.iter().enumerate() {
        let h = Dataset::y_cell(support, o.y).ok_or(Error::RowOutsideSupport { row: i })?;
        if o.z >= support.k_z() || o.w >= support.k_w() || o.x >= support.k_x() {
            return Err(Error::RowOutsideSupport { row: i });
        }
        counts[support.flat(h, o.z, o.w, o.x)] += 1;
    }
    let denom = data.len() as f64 + smoothing * support.cells() as f64;
    let mass = counts.iter().map(|&c| (c as f64 + smoothing) / denom).collect();
    DiscreteLaw::new_unchecked(support.clone(), mass)
}

pub fn write_dataset_csv<W: Write>(data: &Dataset, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in &data.rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a `y,z,w,x` CSV with header.
pub fn read_dataset_csv<R: Read>(input: R) -> Result<Dataset> {
    let mut r = csv::Reader::from_reader(input);
    let headers = r.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["y", "z", "w", "x"] {
        return Err(Error::Parse(format!("expected header y,z,w,x, found {}", headers.iter().collect::<Vec<_>>().join(","))));
    }
    let rows = r.deserialize().collect::<std::result::Result<Vec<Observation>, _>>()?;
    Ok(Dataset { rows })
}
