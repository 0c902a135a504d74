use serde::Serialize;

use crate::error::{Error, Result};

/// Largest supported number of sites; configurations are stored as `u32` bitmasks
/// and the index table has `2^m` entries.
pub const MAX_SITES: usize = 16;

/// Finite mutation space: `m` sites with positive quadrature weights.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DiscreteSpace {
    weights: Vec<f64>,
}

impl DiscreteSpace {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() || weights.len() > MAX_SITES {
            return Err(Error::Model(format!(
                "number of sites must lie in 1..={MAX_SITES}, got {}",
                weights.len()
            )));
        }
        if let Some((i, w)) = weights
            .iter()
            .enumerate()
            .find(|(_, w)| !(w.is_finite() && **w > 0.0))
        {
            return Err(Error::Model(format!("weight of site {} is {w}, must be > 0", i + 1)));
        }
        Ok(DiscreteSpace { weights })
    }

    pub fn uniform(m: usize, weight: f64) -> Result<Self> {
        Self::new(vec![weight; m])
    }

    pub fn sites(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

/// Canonical enumeration of configurations `eta` (sets of distinct sites) with
/// `|eta| <= n_max`, level-major and lexicographic within a level.
#[derive(Clone, Debug, PartialEq)]
pub struct Layout {
    m: usize,
    n_max: usize,
    masks: Vec<u32>,
    level_start: Vec<usize>,
    index: Vec<u32>,
}

const ABSENT: u32 = u32::MAX;

impl Layout {
    pub fn new(m: usize, n_max: usize) -> Result<Self> {
        if m == 0 || m > MAX_SITES {
            return Err(Error::Model(format!("number of sites must lie in 1..={MAX_SITES}")));
        }
        let mut masks = Vec::new();
        let mut level_start = Vec::with_capacity(n_max + 2);
        for n in 0..=n_max {
            level_start.push(masks.len());
            let mut combo: Vec<usize> = (0..n).collect();
            if n > m {
                continue;
            }
            loop {
                masks.push(combo.iter().fold(0u32, |acc, &i| acc | (1 << i)));
                // advance to the next combination in lexicographic order
                let mut pos = n;
                while pos > 0 && combo[pos - 1] == m - n + pos - 1 {
                    pos -= 1;
                }
                if pos == 0 {
                    break;
                }
                combo[pos - 1] += 1;
                for q in pos..n {
                    combo[q] = combo[q - 1] + 1;
                }
            }
        }
        level_start.push(masks.len());
        let mut index = vec![ABSENT; 1 << m];
        for (i, &mask) in masks.iter().enumerate() {
            index[mask as usize] = i as u32;
        }
        Ok(Layout {
            m,
            n_max,
            masks,
            level_start,
            index,
        })
    }

    pub fn sites(&self) -> usize {
        self.m
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    /// Total number of stored values.
    pub fn len(&self) -> usize {
        self.masks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masks.is_empty()
    }

    pub fn masks(&self) -> &[u32] {
        &self.masks
    }

    pub fn mask(&self, idx: usize) -> u32 {
        self.masks[idx]
    }

    pub fn level(&self, idx: usize) -> usize {
        self.masks[idx].count_ones() as usize
    }

    /// Index range of level `n` (empty beyond `n_max`).
    pub fn level_range(&self, n: usize) -> std::ops::Range<usize> {
        if n > self.n_max {
            let end = self.masks.len();
            return end..end;
        }
        self.level_start[n]..self.level_start[n + 1]
    }

    /// Position of `mask`, or `None` if it lies above the truncation level.
    #[inline]
    pub fn index_of(&self, mask: u32) -> Option<usize> {
        match self.index[mask as usize] {
            ABSENT => None,
            i => Some(i as usize),
        }
    }

    /// Bitmask of a configuration given as 0-based site indices.
    pub fn mask_of(&self, sites: &[usize]) -> Result<u32> {
        let mut mask = 0u32;
        for &i in sites {
            if i >= self.m {
                return Err(Error::MalformedConfiguration(format!(
                    "site {i} out of range for {} sites",
                    self.m
                )));
            }
            if mask & (1 << i) != 0 {
                return Err(Error::MalformedConfiguration(format!(
                    "site {i} repeated in {sites:?}"
                )));
            }
            mask |= 1 << i;
        }
        Ok(mask)
    }

    /// Ascending 0-based site indices of a bitmask.
    pub fn sites_of(mask: u32) -> impl Iterator<Item = usize> {
        (0..32).filter(move |i| mask & (1 << i) != 0)
    }

    /// `{1,3}` style label with 1-based sites; `{}` for the empty configuration.
    pub fn label(mask: u32) -> String {
        let parts: Vec<String> = Self::sites_of(mask).map(|i| (i + 1).to_string()).collect();
        format!("{{{}}}", parts.join(","))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn binom(n: usize, k: usize) -> usize {
        (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
    }

    #[test]
    fn level_sizes_are_binomial() {
        let l = Layout::new(5, 3).unwrap();
        for n in 0..=3 {
            assert_eq!(l.level_range(n).len(), binom(5, n));
        }
        assert_eq!(l.len(), 1 + 5 + 10 + 10);
        assert!(l.level_range(4).is_empty());
    }

    #[test]
    fn order_is_level_major_then_lexicographic() {
        let l = Layout::new(3, 3).unwrap();
        let labels: Vec<String> = l.masks().iter().map(|&m| Layout::label(m)).collect();
        assert_eq!(
            labels,
            ["{}", "{1}", "{2}", "{3}", "{1,2}", "{1,3}", "{2,3}", "{1,2,3}"]
        );
    }

    #[test]
    fn levels_above_the_site_count_are_empty() {
        let l = Layout::new(2, 4).unwrap();
        assert_eq!(l.len(), 4);
        assert!(l.level_range(3).is_empty());
    }

    #[test]
    fn truncated_configurations_have_no_index() {
        let l = Layout::new(4, 2).unwrap();
        assert!(l.index_of(0b0111).is_none());
        assert_eq!(l.index_of(0), Some(0));
        assert_eq!(l.index_of(0b0011), Some(5));
    }

    #[test]
    fn repeated_or_out_of_range_sites_are_malformed() {
        let l = Layout::new(3, 2).unwrap();
        assert!(matches!(l.mask_of(&[1, 1]), Err(Error::MalformedConfiguration(_))));
        assert!(matches!(l.mask_of(&[3]), Err(Error::MalformedConfiguration(_))));
        assert_eq!(l.mask_of(&[2, 0]).unwrap(), 0b101);
    }

    #[test]
    fn space_rejects_bad_weights() {
        assert!(DiscreteSpace::new(vec![]).is_err());
        assert!(DiscreteSpace::new(vec![1.0, 0.0]).is_err());
        assert!(DiscreteSpace::new(vec![1.0, f64::NAN]).is_err());
        assert_eq!(DiscreteSpace::uniform(4, 0.25).unwrap().sites(), 4);
    }
}
