use crate::error::{Error, Result};

/// Dense row-major set of `n` vectors in `d` dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    n: usize,
    d: usize,
    data: Vec<f32>,
    source: String,
}

impl Dataset {
    /// Builds a dataset, rejecting empty shapes and non-finite entries.
    pub fn new(n: usize, d: usize, data: Vec<f32>, source: impl Into<String>) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyInput("dataset has no points"));
        }
        if d == 0 {
            return Err(Error::InvalidData("dimension must be at least 1".into()));
        }
        if data.len() != n * d {
            return Err(Error::InvalidData(format!(
                "expected {} values for {n}x{d}, got {}",
                n * d,
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidData(format!(
                "non-finite value at row {}, column {}",
                pos / d,
                pos % d
            )));
        }
        Ok(Self {
            n,
            d,
            data,
            source: source.into(),
        })
    }

    pub fn from_rows(rows: &[Vec<f32>], source: impl Into<String>) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: bad.len(),
            });
        }
        Self::new(rows.len(), d, rows.concat(), source)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f32> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> std::slice::Chunks<'_, f32> {
        self.data.chunks(self.d)
    }

    /// Mean Euclidean norm of the rows, accumulated in f64.
    pub fn mean_norm(&self) -> f64 {
        let total: f64 = self
            .rows()
            .map(|r| {
                r.iter()
                    .map(|&v| f64::from(v) * f64::from(v))
                    .sum::<f64>()
                    .sqrt()
            })
            .sum();
        total / self.n as f64
    }

    /// Zero-pads every row to `padded_d` columns.
    pub fn padded(&self, padded_d: usize) -> Dataset {
        if padded_d == self.d {
            return self.clone();
        }
        assert!(padded_d > self.d, "padding cannot shrink rows");
        let mut data = vec![0.0f32; self.n * padded_d];
        for (dst, src) in data.chunks_mut(padded_d).zip(self.rows()) {
            dst[..self.d].copy_from_slice(src);
        }
        Dataset {
            n: self.n,
            d: padded_d,
            data,
            source: self.source.clone(),
        }
    }

    /// Copies the listed rows into a new dataset.
    pub fn subset(&self, ids: &[u32]) -> Result<Dataset> {
        let mut data = Vec::with_capacity(ids.len() * self.d);
        for &id in ids {
            data.extend_from_slice(self.row(id as usize));
        }
        Dataset::new(ids.len(), self.d, data, format!("{}[subset]", self.source))
    }

    /// Scales every nonzero row to unit norm.
    pub fn normalized(&self) -> Dataset {
        let mut data = self.data.clone();
        for row in data.chunks_mut(self.d) {
            let norm = row
                .iter()
                .map(|&v| f64::from(v) * f64::from(v))
                .sum::<f64>()
                .sqrt();
            if norm > 0.0 {
                row.iter_mut()
                    .for_each(|v| *v = (f64::from(*v) / norm) as f32);
            }
        }
        Dataset {
            n: self.n,
            d: self.d,
            data,
            source: self.source.clone(),
        }
    }
}

/// Pads a query to `padded_d` with zeros.
pub fn pad_vector(v: &[f32], padded_d: usize) -> Vec<f32> {
    let mut out = v.to_vec();
    out.resize(padded_d.max(v.len()), 0.0);
    out
}
