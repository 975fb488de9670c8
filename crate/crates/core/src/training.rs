use crate::error::{Error, Result};

/// One forecast case: ensemble mean, ensemble variance and the verifying
/// observation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Record {
    pub m: f64,
    pub v: f64,
    pub y: f64,
}

impl Record {
    pub fn new(m: f64, v: f64, y: f64) -> Self {
        Record { m, v, y }
    }
}

/// Ordered collection of forecast cases used to fit a recalibration model.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainingSet {
    records: Vec<Record>,
}

impl TrainingSet {
    /// Requires finite values and non-negative ensemble variances.
    pub fn new(records: Vec<Record>) -> Result<Self> {
        for (i, r) in records.iter().enumerate() {
            if !(r.m.is_finite() && r.v.is_finite() && r.y.is_finite()) {
                return Err(Error::Input(format!("record {i} has a non-finite value: {r:?}")));
            }
            if r.v < 0.0 {
                return Err(Error::Input(format!("record {i} has negative ensemble variance {}", r.v)));
            }
        }
        Ok(TrainingSet { records })
    }

    pub fn from_triples(triples: &[(f64, f64, f64)]) -> Result<Self> {
        Self::new(triples.iter().map(|&(m, v, y)| Record { m, v, y }).collect())
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Subset by index, in the order given.
    pub fn select(&self, indices: &[usize]) -> TrainingSet {
        TrainingSet {
            records: indices.iter().map(|&i| self.records[i]).collect(),
        }
    }

    pub fn has_distinct_means(&self) -> bool {
        match self.records.first() {
            Some(first) => self.records.iter().any(|r| r.m != first.m),
            None => false,
        }
    }

    /// Records in a canonical total order, so that fits do not depend on the
    /// order in which cases were supplied.
    pub(crate) fn canonical(&self) -> Vec<Record> {
        let mut rs = self.records.clone();
        rs.sort_by(|a, b| {
            a.m.total_cmp(&b.m)
                .then(a.v.total_cmp(&b.v))
                .then(a.y.total_cmp(&b.y))
        });
        rs
    }
}

impl FromIterator<Record> for TrainingSet {
    /// Panics on non-finite values or negative variances; use
    /// [`TrainingSet::new`] for fallible construction.
    fn from_iter<I: IntoIterator<Item = Record>>(iter: I) -> Self {
        TrainingSet::new(iter.into_iter().collect()).expect("valid records")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_negative_variance_and_nan() {
        assert!(TrainingSet::from_triples(&[(0.0, -1.0, 0.0)]).is_err());
        assert!(TrainingSet::from_triples(&[(f64::NAN, 1.0, 0.0)]).is_err());
    }

    #[test]
    fn distinct_means() {
        let t = TrainingSet::from_triples(&[(1.0, 0.0, 0.0), (1.0, 0.0, 2.0)]).unwrap();
        assert!(!t.has_distinct_means());
        let t = TrainingSet::from_triples(&[(1.0, 0.0, 0.0), (1.5, 0.0, 2.0)]).unwrap();
        assert!(t.has_distinct_means());
    }
}
