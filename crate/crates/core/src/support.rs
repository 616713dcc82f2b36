//! Discrete initial data: atoms `y_j` in `R^d` with values `g_j`.

use crate::error::{CoreError, Result};
use std::path::Path;

/// Atoms and initial values of a discrete initial-data measure.
///
/// Atoms are stored row-major (`n * dim` floats). The set is immutable after
/// construction; construction rejects duplicate atoms, length mismatches and
/// non-finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportSet {
    dim: usize,
    atoms: Vec<f64>,
    values: Vec<f64>,
}

impl SupportSet {
    pub fn new(dim: usize, atoms: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(CoreError::EmptyInput("dimension must be at least 1"));
        }
        if atoms.is_empty() {
            return Err(CoreError::EmptyInput("support needs at least one atom"));
        }
        if !atoms.len().is_multiple_of(dim) {
            return Err(CoreError::DimensionMismatch {
                expected: dim,
                got: atoms.len(),
            });
        }
        let n = atoms.len() / dim;
        if values.len() != n {
            return Err(CoreError::DimensionMismatch {
                expected: n,
                got: values.len(),
            });
        }
        if atoms.iter().chain(values.iter()).any(|v| !v.is_finite()) {
            return Err(CoreError::NonFinite("support atoms/values"));
        }
        // Distinctness via lexicographic sort over atom rows: O(n log n).
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| {
            let ra = &atoms[a * dim..(a + 1) * dim];
            let rb = &atoms[b * dim..(b + 1) * dim];
            ra.iter()
                .zip(rb)
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        for w in order.windows(2) {
            let ra = &atoms[w[0] * dim..(w[0] + 1) * dim];
            let rb = &atoms[w[1] * dim..(w[1] + 1) * dim];
            if ra == rb {
                return Err(CoreError::DuplicateAtoms(w[0], w[1]));
            }
        }
        Ok(Self { dim, atoms, values })
    }

    /// Convenience constructor for one-dimensional supports.
    pub fn new_1d(atoms: &[f64], values: &[f64]) -> Result<Self> {
        Self::new(1, atoms.to_vec(), values.to_vec())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        false // construction guarantees at least one atom
    }

    pub fn atom(&self, j: usize) -> &[f64] {
        &self.atoms[j * self.dim..(j + 1) * self.dim]
    }

    pub fn value(&self, j: usize) -> f64 {
        self.values[j]
    }

    pub fn atoms_flat(&self) -> &[f64] {
        &self.atoms
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Copy with one value replaced; used by finite-difference oracles.
    pub fn with_value(&self, j: usize, g: f64) -> Result<Self> {
        if j >= self.len() {
            return Err(CoreError::IndexOutOfRange {
                index: j,
                len: self.len(),
            });
        }
        let mut values = self.values.clone();
        values[j] = g;
        Ok(Self {
            dim: self.dim,
            atoms: self.atoms.clone(),
            values,
        })
    }

    /// Largest pairwise atom distance; 0 for a single atom. O(n^2).
    pub fn diameter(&self) -> f64 {
        let n = self.len();
        let mut best = 0.0f64;
        for i in 0..n {
            for j in (i + 1)..n {
                best = best.max(crate::stable::dist_sq(self.atom(i), self.atom(j)));
            }
        }
        best.sqrt()
    }

    /// Smallest pairwise atom distance; +inf for a single atom. O(n^2).
    pub fn min_pairwise_distance(&self) -> f64 {
        let n = self.len();
        let mut best = f64::INFINITY;
        for i in 0..n {
            for j in (i + 1)..n {
                best = best.min(crate::stable::dist_sq(self.atom(i), self.atom(j)));
            }
        }
        best.sqrt()
    }

    /// Serialize as CSV with header `y_0,...,y_{d-1},g`, one atom per row.
    /// Floats use the shortest round-trippable decimal form.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for k in 0..self.dim {
            out.push_str(&format!("y_{k},"));
        }
        out.push_str("g\n");
        for j in 0..self.len() {
            for v in self.atom(j) {
                out.push_str(&format!("{v},"));
            }
            out.push_str(&format!("{}\n", self.value(j)));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or(CoreError::EmptyInput("csv support file"))?;
        let cols: Vec<&str> = header.split(',').map(str::trim).collect();
        if cols.len() < 2 || cols[cols.len() - 1] != "g" {
            return Err(CoreError::Parse(format!(
                "expected header y_0,...,y_{{d-1}},g; got {header:?}"
            )));
        }
        let dim = cols.len() - 1;
        let mut atoms = Vec::new();
        let mut values = Vec::new();
        for (i, line) in lines.enumerate() {
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != dim + 1 {
                return Err(CoreError::Parse(format!(
                    "row {}: expected {} fields, got {}",
                    i + 2,
                    dim + 1,
                    fields.len()
                )));
            }
            for f in &fields[..dim] {
                atoms.push(
                    f.parse::<f64>()
                        .map_err(|e| CoreError::Parse(format!("row {}: {e}", i + 2)))?,
                );
            }
            values.push(
                fields[dim]
                    .parse::<f64>()
                    .map_err(|e| CoreError::Parse(format!("row {}: {e}", i + 2)))?,
            );
        }
        Self::new(dim, atoms, values)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        Self::from_csv(&std::fs::read_to_string(path)?)
    }
}
