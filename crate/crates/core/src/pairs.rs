//! Pair features from drug embedding vectors.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView1, ArrayViewMut1};
use serde::{Deserialize, Serialize};

use crate::embedding::DrugVectors;
use crate::graph::{TargetRow, TargetTable};
use crate::{Error, Result};

/// Binary operator combining two drug vectors into one pair vector.
///
/// `Difference` and `Concatenate` depend on pair orientation; the drug order
/// of the target table is used as given.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PairOperator {
    Absolute,
    Squared,
    Difference,
    Hadamard,
    Concatenate,
}

impl PairOperator {
    pub const ALL: [PairOperator; 5] = [
        PairOperator::Absolute,
        PairOperator::Squared,
        PairOperator::Difference,
        PairOperator::Hadamard,
        PairOperator::Concatenate,
    ];

    pub fn output_width(self, dimensions: usize) -> usize {
        match self {
            PairOperator::Concatenate => 2 * dimensions,
            _ => dimensions,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            PairOperator::Absolute => "absolute",
            PairOperator::Squared => "squared",
            PairOperator::Difference => "difference",
            PairOperator::Hadamard => "hadamard",
            PairOperator::Concatenate => "concatenate",
        }
    }

    /// Writes `g(a, b)` into `out`, which must have `output_width` entries.
    pub fn apply_into(self, a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>, mut out: ArrayViewMut1<'_, f64>) {
        let d = a.len();
        match self {
            PairOperator::Concatenate => {
                for i in 0..d {
                    out[i] = a[i];
                    out[d + i] = b[i];
                }
            }
            op => {
                for i in 0..d {
                    let (x, y) = (a[i], b[i]);
                    out[i] = match op {
                        PairOperator::Absolute => (x - y).abs(),
                        PairOperator::Squared => (x - y) * (x - y),
                        PairOperator::Difference => x - y,
                        PairOperator::Hadamard => x * y,
                        PairOperator::Concatenate => unreachable!(),
                    };
                }
            }
        }
    }

    pub fn apply(self, a: &[f64], b: &[f64]) -> Vec<f64> {
        let mut out = ndarray::Array1::zeros(self.output_width(a.len()));
        self.apply_into(ArrayView1::from(a), ArrayView1::from(b), out.view_mut());
        out.to_vec()
    }
}

impl fmt::Display for PairOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PairOperator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PairOperator::ALL
            .into_iter()
            .find(|op| op.name() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::InvalidConfig(format!("unknown pair operator {s:?}")))
    }
}

/// Labeled pair rows with their feature vectors (one row of `features` per
/// pair, in target-table order).
#[derive(Debug, Clone, PartialEq)]
pub struct PairFeatureTable {
    pub pairs: Vec<TargetRow>,
    pub features: Array2<f64>,
    pub operator: Option<PairOperator>,
}

impl PairFeatureTable {
    pub fn new(pairs: Vec<TargetRow>, features: Array2<f64>, operator: Option<PairOperator>) -> Result<Self> {
        if pairs.len() != features.nrows() {
            return Err(Error::DimensionMismatch {
                expected: pairs.len(),
                actual: features.nrows(),
            });
        }
        Ok(Self {
            pairs,
            features,
            operator,
        })
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn width(&self) -> usize {
        self.features.ncols()
    }

    pub fn labels(&self) -> Vec<u8> {
        self.pairs.iter().map(|p| p.label).collect()
    }

    /// Rows at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Self {
        Self {
            pairs: indices.iter().map(|&i| self.pairs[i].clone()).collect(),
            features: self.features.select(ndarray::Axis(0), indices),
            operator: self.operator,
        }
    }
}

pub fn pair_features(
    vectors: &DrugVectors,
    targets: &TargetTable,
    op: PairOperator,
) -> Result<PairFeatureTable> {
    if targets.is_empty() {
        return Err(Error::EmptyTargets);
    }
    let width = op.output_width(vectors.dimensions());
    let mut features = Array2::zeros((targets.len(), width));
    for (pair, row) in targets.pairs.iter().zip(features.rows_mut()) {
        let a = vectors.get(&pair.drug_1)?;
        let b = vectors.get(&pair.drug_2)?;
        op.apply_into(a, b, row);
    }
    PairFeatureTable::new(targets.pairs.clone(), features, Some(op))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn componentwise_definitions() {
        assert_eq!(PairOperator::Hadamard.apply(&[1.0, 2.0], &[3.0, 4.0]), [3.0, 8.0]);
        let (a, b) = ([1.0, 5.0], [4.0, 2.0]);
        assert_eq!(PairOperator::Absolute.apply(&a, &b), [3.0, 3.0]);
        assert_eq!(PairOperator::Squared.apply(&a, &b), [9.0, 9.0]);
        assert_eq!(PairOperator::Difference.apply(&a, &b), [-3.0, 3.0]);
        assert_eq!(PairOperator::Concatenate.apply(&a, &b), [1.0, 5.0, 4.0, 2.0]);
    }

    #[test]
    fn parse_names() {
        for op in PairOperator::ALL {
            assert_eq!(op.name().parse::<PairOperator>().unwrap(), op);
        }
        assert!("sum".parse::<PairOperator>().is_err());
    }

    #[test]
    fn features_follow_target_order() {
        let v = DrugVectors::new(
            vec!["a".into(), "b".into(), "c".into()],
            array![[1.0, 0.0], [0.5, 2.0], [0.0, 1.0]],
        )
        .unwrap();
        let t = TargetTable {
            pairs: vec![TargetRow::new("c", "a", 0), TargetRow::new("a", "b", 1)],
        };
        let f = pair_features(&v, &t, PairOperator::Hadamard).unwrap();
        assert_eq!(f.features, array![[0.0, 0.0], [0.5, 0.0]]);
        assert_eq!(f.labels(), [0, 1]);
        let f = pair_features(&v, &t, PairOperator::Concatenate).unwrap();
        assert_eq!(f.width(), 4);

        let t = TargetTable {
            pairs: vec![TargetRow::new("a", "zz", 0)],
        };
        assert!(matches!(
            pair_features(&v, &t, PairOperator::Absolute),
            Err(Error::UnknownDrug(_))
        ));
        let t = TargetTable { pairs: vec![] };
        assert!(matches!(
            pair_features(&v, &t, PairOperator::Absolute),
            Err(Error::EmptyTargets)
        ));
    }
}
