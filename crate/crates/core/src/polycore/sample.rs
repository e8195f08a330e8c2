use serde::{Deserialize, Serialize};

use super::PolyError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Train,
    Test,
    Unspecified,
}

/// A multiset of points in `R^d`, optionally labeled with values in `{0,1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    dim: usize,
    points: Vec<f64>,
    labels: Option<Vec<u8>>,
    provenance: Provenance,
    seed: Option<u64>,
}

impl Sample {
    /// Builds a sample from row-major point data.
    pub fn from_flat(dim: usize, points: Vec<f64>, labels: Option<Vec<u8>>) -> Result<Self, PolyError> {
        if dim == 0 {
            return Err(PolyError::ZeroDimension);
        }
        if !points.len().is_multiple_of(dim) {
            return Err(PolyError::DimensionMismatch { expected: dim, got: points.len() % dim });
        }
        let n = points.len() / dim;
        if let Some(l) = &labels {
            if l.len() != n {
                return Err(PolyError::LabelLength { labels: l.len(), points: n });
            }
            if let Some(&bad) = l.iter().find(|&&v| v > 1) {
                return Err(PolyError::InvalidLabel(bad as i64));
            }
        }
        Ok(Sample { dim, points, labels, provenance: Provenance::Unspecified, seed: None })
    }

    pub fn from_rows(dim: usize, rows: &[Vec<f64>], labels: Option<Vec<u8>>) -> Result<Self, PolyError> {
        let mut flat = Vec::with_capacity(rows.len() * dim);
        for r in rows {
            if r.len() != dim {
                return Err(PolyError::DimensionMismatch { expected: dim, got: r.len() });
            }
            flat.extend_from_slice(r);
        }
        Self::from_flat(dim, flat, labels)
    }

    pub fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = provenance;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.points.chunks_exact(self.dim)
    }

    pub fn flat_points(&self) -> &[f64] {
        &self.points
    }

    pub fn labels(&self) -> Option<&[u8]> {
        self.labels.as_deref()
    }

    pub fn require_labels(&self) -> Result<&[u8], PolyError> {
        self.labels.as_deref().ok_or(PolyError::MissingLabels)
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    /// Same points without labels.
    pub fn unlabeled(&self) -> Sample {
        Sample { labels: None, ..self.clone() }
    }

    /// Sub-multiset at the given indices (in the given order).
    pub fn subset(&self, indices: &[usize]) -> Sample {
        let mut points = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            points.extend_from_slice(self.point(i));
        }
        let labels = self.labels.as_ref().map(|l| indices.iter().map(|&i| l[i]).collect());
        Sample { dim: self.dim, points, labels, provenance: self.provenance, seed: self.seed }
    }

    /// Concatenation of two samples of the same dimension. Labels survive only if both have them.
    pub fn concat(&self, other: &Sample) -> Result<Sample, PolyError> {
        if self.dim != other.dim {
            return Err(PolyError::DimensionMismatch { expected: self.dim, got: other.dim });
        }
        let mut points = self.points.clone();
        points.extend_from_slice(&other.points);
        let labels = match (&self.labels, &other.labels) {
            (Some(a), Some(b)) => Some(a.iter().chain(b).copied().collect()),
            _ => None,
        };
        Ok(Sample { dim: self.dim, points, labels, provenance: self.provenance, seed: self.seed })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_labels() {
        assert!(matches!(
            Sample::from_flat(1, vec![0.0, 1.0], Some(vec![0])),
            Err(PolyError::LabelLength { labels: 1, points: 2 })
        ));
        assert!(matches!(Sample::from_flat(1, vec![0.0], Some(vec![2])), Err(PolyError::InvalidLabel(2))));
    }

    #[test]
    fn subset_keeps_labels_aligned() {
        let s = Sample::from_rows(2, &[vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]], Some(vec![0, 1, 1])).unwrap();
        let sub = s.subset(&[2, 0]);
        assert_eq!(sub.point(0), &[5.0, 6.0]);
        assert_eq!(sub.labels().unwrap(), &[1, 0]);
    }
}
