use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::pairs::PairFeatureTable;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitConfig {
    pub train_fraction: f64,
    pub seed: u64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            train_fraction: 0.8,
            seed: 42,
        }
    }
}

impl SplitConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "train_fraction must lie in (0, 1), got {}",
                self.train_fraction
            )));
        }
        Ok(())
    }
}

/// Seeded permutation of `0..n`.
pub fn shuffled_indices(n: usize, seed: u64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    idx
}

/// Train/test row indices: the first `ceil(f * n)` entries of a seeded
/// shuffle train, the rest test.
pub fn split_indices(labels: &[u8], cfg: &SplitConfig) -> Result<(Vec<usize>, Vec<usize>)> {
    cfg.validate()?;
    let n = labels.len();
    if n == 0 {
        return Err(Error::DegenerateSplit("table is empty".into()));
    }
    let train_len = (cfg.train_fraction * n as f64).ceil() as usize;
    if train_len == 0 || train_len >= n {
        return Err(Error::DegenerateSplit(format!(
            "{n} rows at fraction {} leaves one side empty",
            cfg.train_fraction
        )));
    }
    let mut idx = shuffled_indices(n, cfg.seed);
    let test = idx.split_off(train_len);
    check_two_classes(labels, &idx)?;
    Ok((idx, test))
}

pub fn train_test_split(
    table: &PairFeatureTable,
    cfg: &SplitConfig,
) -> Result<(PairFeatureTable, PairFeatureTable)> {
    let (train, test) = split_indices(&table.labels(), cfg)?;
    Ok((table.select(&train), table.select(&test)))
}

/// First `count` rows of a seeded shuffle of `indices`.
pub fn subsample(indices: &[usize], count: usize, seed: u64) -> Vec<usize> {
    let mut idx = indices.to_vec();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    idx.truncate(count);
    idx
}

pub(crate) fn check_two_classes(labels: &[u8], rows: &[usize]) -> Result<()> {
    let pos = rows.iter().filter(|&&i| labels[i] == 1).count();
    if pos == 0 || pos == rows.len() {
        return Err(Error::DegenerateSplit(format!(
            "training side of {} rows has a single class",
            rows.len()
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eight_two_split() {
        let labels = [0, 1, 0, 1, 0, 1, 0, 1, 0, 1];
        let (train, test) = split_indices(&labels, &SplitConfig::default()).unwrap();
        assert_eq!((train.len(), test.len()), (8, 2));
        let mut all: Vec<_> = train.iter().chain(&test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
        assert_eq!(
            (train, test),
            split_indices(&labels, &SplitConfig::default()).unwrap()
        );
    }

    #[test]
    fn ceil_rounding() {
        let labels = [0, 1, 0];
        let cfg = SplitConfig {
            train_fraction: 0.5,
            seed: 3,
        };
        // ceil(1.5) = 2 rows train; may be single-class for some seeds.
        match split_indices(&labels, &cfg) {
            Ok((train, test)) => assert_eq!((train.len(), test.len()), (2, 1)),
            Err(e) => assert!(matches!(e, Error::DegenerateSplit(_))),
        }
    }

    #[test]
    fn degenerate_splits() {
        let labels = [1, 0, 0, 0, 0, 0, 0, 0, 0, 0];
        let cfg = SplitConfig {
            train_fraction: 0.1,
            seed: 0,
        };
        // One training row is always single-class.
        assert!(matches!(
            split_indices(&labels, &cfg),
            Err(Error::DegenerateSplit(_))
        ));
        assert!(matches!(
            split_indices(&[0, 1], &SplitConfig { train_fraction: 0.9, seed: 0 }),
            Err(Error::DegenerateSplit(_))
        ));
        assert!(SplitConfig { train_fraction: 1.0, seed: 0 }.validate().is_err());
    }
}
