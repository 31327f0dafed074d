//! Graded "same state" thresholds learned from experienced state changes.
//!
//! For every latent coordinate the absolute pre/post differences of all
//! triplets are sorted; level 1 takes the smallest difference, the top level
//! the largest, and the levels in between sample the sorted list at evenly
//! spaced ranks. Two latents are the same state at a level when every
//! coordinate differs by no more than that level's threshold.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::memory::TripletStore;
use crate::perception::Latent;

pub const DEFAULT_LEVELS: usize = 200;

#[derive(Clone, Debug, PartialEq)]
pub struct ThresholdTable {
    levels: usize,
    latent_dim: usize,
    /// Row-major, one row of `latent_dim` thresholds per level.
    distances: Vec<f64>,
}

/// Rank into a sorted list of `samples` values used by 1-based `level`.
pub fn level_rank(level: usize, levels: usize, samples: usize) -> usize {
    debug_assert!(levels >= 2 && (1..=levels).contains(&level) && samples >= 1);
    let num = 2 * (level - 1) * (samples - 1) + (levels - 1);
    num / (2 * (levels - 1))
}

impl ThresholdTable {
    pub fn build(store: &TripletStore, levels: usize) -> Result<Self> {
        if !store.is_encoded() {
            return Err(Error::Phase("threshold table needs an encoded store".into()));
        }
        Self::from_pairs(store.triplets().iter().map(|t| t.latents()), levels)
    }

    /// Builds the table from `(pre, post)` latent pairs.
    pub fn from_pairs<'a, I>(pairs: I, levels: usize) -> Result<Self>
    where
        I: IntoIterator<Item = (&'a Latent, &'a Latent)>,
    {
        if levels < 2 {
            return Err(Error::config(format!("need at least 2 abstraction levels, got {levels}")));
        }
        let mut columns: Vec<Vec<f64>> = Vec::new();
        let mut count = 0;
        for (pre, post) in pairs {
            if count == 0 {
                columns = vec![Vec::new(); pre.len()];
            }
            if pre.len() != columns.len() || post.len() != columns.len() {
                return Err(Error::dims(columns.len(), pre.len().max(post.len())));
            }
            for (col, (a, b)) in columns.iter_mut().zip(pre.values().iter().zip(post.values())) {
                col.push((*a as f64 - *b as f64).abs());
            }
            count += 1;
        }
        if count == 0 {
            return Err(Error::config("cannot build thresholds from an empty store"));
        }
        let latent_dim = columns.len();
        for col in columns.iter_mut() {
            col.sort_by(f64::total_cmp);
        }
        let mut distances = Vec::with_capacity(levels * latent_dim);
        for level in 1..=levels {
            let rank = level_rank(level, levels, count);
            distances.extend(columns.iter().map(|col| col[rank]));
        }
        Ok(Self {
            levels,
            latent_dim,
            distances,
        })
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn latent_dim(&self) -> usize {
        self.latent_dim
    }

    fn check_level(&self, level: usize) -> Result<()> {
        if level == 0 || level > self.levels {
            return Err(Error::LevelOutOfRange {
                level,
                levels: self.levels,
            });
        }
        Ok(())
    }

    /// Thresholds of a 1-based level.
    pub fn row(&self, level: usize) -> Result<&[f64]> {
        self.check_level(level)?;
        Ok(self.row_unchecked(level))
    }

    pub(crate) fn row_unchecked(&self, level: usize) -> &[f64] {
        let start = (level - 1) * self.latent_dim;
        &self.distances[start..start + self.latent_dim]
    }

    pub fn same_state(&self, a: &Latent, b: &Latent, level: usize) -> Result<bool> {
        self.check_level(level)?;
        if a.len() != self.latent_dim || b.len() != self.latent_dim {
            return Err(Error::dims(self.latent_dim, a.len().max(b.len())));
        }
        Ok(within(a, b, self.row_unchecked(level)))
    }

    /// `level,latent_0,...` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("level");
        for j in 0..self.latent_dim {
            write!(out, ",latent_{j}").unwrap();
        }
        out.push('\n');
        for level in 1..=self.levels {
            write!(out, "{level}").unwrap();
            for d in self.row_unchecked(level) {
                write!(out, ",{d}").unwrap();
            }
            out.push('\n');
        }
        out
    }
}

/// Coordinatewise `|a - b| <= threshold`.
pub(crate) fn within(a: &Latent, b: &Latent, thresholds: &[f64]) -> bool {
    a.values()
        .iter()
        .zip(b.values())
        .zip(thresholds)
        .all(|((x, y), t)| (*x as f64 - *y as f64).abs() <= *t)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pairs(diffs: &[Vec<f32>]) -> Vec<(Latent, Latent)> {
        diffs
            .iter()
            .map(|d| (Latent::zeros(d.len()), Latent(d.clone())))
            .collect()
    }

    fn table(diffs: &[Vec<f32>], levels: usize) -> ThresholdTable {
        let p = pairs(diffs);
        ThresholdTable::from_pairs(p.iter().map(|(a, b)| (a, b)), levels).unwrap()
    }

    #[test]
    fn rank_endpoints() {
        for levels in [2, 3, 10, 200] {
            for samples in [1, 2, 7, 500] {
                assert_eq!(level_rank(1, levels, samples), 0);
                assert_eq!(level_rank(levels, levels, samples), samples - 1);
            }
        }
    }

    #[test]
    fn single_triplet_fills_every_row() {
        let t = table(&[vec![0.5, -0.25, 2.0]], 200);
        for level in 1..=200 {
            assert_eq!(t.row(level).unwrap(), &[0.5, 0.25, 2.0]);
        }
    }

    #[test]
    fn three_diffs_three_levels() {
        let t = table(&[vec![0.9], vec![0.1], vec![0.5]], 3);
        let col: Vec<f64> = (1..=3).map(|l| t.row(l).unwrap()[0]).collect();
        assert_eq!(col, vec![0.1f32 as f64, 0.5f32 as f64, 0.9f32 as f64]);
    }

    #[test]
    fn empty_and_degenerate_inputs() {
        let none: Vec<(&Latent, &Latent)> = vec![];
        assert!(ThresholdTable::from_pairs(none, 10).unwrap_err().is_config());
        let p = pairs(&[vec![1.0]]);
        assert!(ThresholdTable::from_pairs(p.iter().map(|(a, b)| (a, b)), 1)
            .unwrap_err()
            .is_config());
    }

    #[test]
    fn same_state_semantics() {
        let t = table(&[vec![0.1, 0.1], vec![0.4, 0.2], vec![1.0, 1.0]], 3);
        let a = Latent(vec![0.0, 0.0]);
        assert!(t.same_state(&a, &a, 1).unwrap());
        // second coordinate over its level-1 threshold
        assert!(!t.same_state(&a, &Latent(vec![0.05, 0.15]), 1).unwrap());
        let b = Latent(vec![0.3, 0.3]);
        assert!(!t.same_state(&a, &b, 1).unwrap());
        assert!(t.same_state(&a, &b, 3).unwrap());
        assert!(matches!(
            t.same_state(&a, &b, 0),
            Err(Error::LevelOutOfRange { level: 0, levels: 3 })
        ));
        assert!(t.same_state(&a, &b, 4).is_err());
    }

    #[test]
    fn csv_shape() {
        let t = table(&[vec![0.1, 0.2]], 4);
        let csv = t.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "level,latent_0,latent_1");
        assert_eq!(lines.len(), 5);
    }
}
