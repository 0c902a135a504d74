use std::sync::Arc;

use serde::Serialize;

use super::space::Layout;
use crate::error::{Error, Result};
use crate::scale::ScaleNorm;

/// Truncated correlation hierarchy: one value per configuration `eta` with
/// `|eta| <= n_max`, stored in the canonical order of its [`Layout`].
#[derive(Clone, Debug, PartialEq)]
pub struct CorrelationHierarchy {
    layout: Arc<Layout>,
    values: Vec<f64>,
}

impl CorrelationHierarchy {
    pub fn zeros(layout: Arc<Layout>) -> Self {
        let values = vec![0.0; layout.len()];
        CorrelationHierarchy { layout, values }
    }

    pub fn from_values(layout: Arc<Layout>, values: Vec<f64>) -> Result<Self> {
        if values.len() != layout.len() {
            return Err(Error::domain(format!(
                "hierarchy needs {} values, got {}",
                layout.len(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("hierarchy values must be finite"));
        }
        Ok(CorrelationHierarchy { layout, values })
    }

    /// Product hierarchy `k(eta) = prod_{i in eta} rho_i`, so `k(empty) = 1`.
    pub fn poisson(layout: Arc<Layout>, density: &[f64]) -> Result<Self> {
        if density.len() != layout.sites() {
            return Err(Error::domain(format!(
                "density has {} entries for {} sites",
                density.len(),
                layout.sites()
            )));
        }
        let values = layout
            .masks()
            .iter()
            .map(|&mask| Layout::sites_of(mask).fold(1.0, |p, i| p * density[i]))
            .collect();
        Self::from_values(layout, values)
    }

    pub fn layout(&self) -> &Arc<Layout> {
        &self.layout
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Value at a configuration of 0-based sites; zero above the truncation level.
    pub fn get(&self, sites: &[usize]) -> Result<f64> {
        let mask = self.layout.mask_of(sites)?;
        Ok(self.layout.index_of(mask).map_or(0.0, |i| self.values[i]))
    }

    pub fn set(&mut self, sites: &[usize], value: f64) -> Result<()> {
        let mask = self.layout.mask_of(sites)?;
        let i = self.layout.index_of(mask).ok_or_else(|| {
            Error::domain(format!("configuration {sites:?} lies above the truncation level"))
        })?;
        self.values[i] = value;
        Ok(())
    }

    pub fn level(&self, n: usize) -> &[f64] {
        &self.values[self.layout.level_range(n)]
    }

    /// `max_eta |k(eta)| e^{-alpha |eta|}`.
    pub fn norm(&self, alpha: f64) -> f64 {
        HierarchyNorm::new(self.layout.clone()).norm(&self.values, alpha)
    }
}

/// The norm `max_eta |k(eta)| e^{-alpha |eta|}` on flat hierarchy vectors.
#[derive(Clone, Debug)]
pub struct HierarchyNorm {
    layout: Arc<Layout>,
}

impl HierarchyNorm {
    pub fn new(layout: Arc<Layout>) -> Self {
        HierarchyNorm { layout }
    }
}

impl ScaleNorm for HierarchyNorm {
    fn norm(&self, v: &[f64], alpha: f64) -> f64 {
        let mut best = 0.0f64;
        for n in 0..=self.layout.n_max() {
            let r = self.layout.level_range(n);
            if r.is_empty() {
                continue;
            }
            let w = (-alpha * n as f64).exp();
            let m = v[r].iter().fold(0.0f64, |m, x| m.max(x.abs()));
            best = best.max(w * m);
        }
        best
    }
}

/// One row of a trajectory export: `(level, configuration label, value)`.
#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct HierarchyEntry {
    pub level: usize,
    pub configuration: String,
    pub value: f64,
}

impl CorrelationHierarchy {
    pub fn entries(&self) -> Vec<HierarchyEntry> {
        entries_of(&self.layout, &self.values)
    }
}

/// Labelled entries of a flat value vector, in layout order.
pub fn entries_of(layout: &Layout, values: &[f64]) -> Vec<HierarchyEntry> {
    layout
        .masks()
        .iter()
        .zip(values)
        .map(|(&mask, &value)| HierarchyEntry {
            level: mask.count_ones() as usize,
            configuration: Layout::label(mask),
            value,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn poisson_hierarchy_is_a_product() {
        let l = Arc::new(Layout::new(3, 3).unwrap());
        let k = CorrelationHierarchy::poisson(l, &[0.5, 2.0, 3.0]).unwrap();
        assert_eq!(k.get(&[]).unwrap(), 1.0);
        assert_eq!(k.get(&[0, 2]).unwrap(), 1.5);
        assert_eq!(k.get(&[2, 1, 0]).unwrap(), 3.0);
        assert_eq!(k.level(1), &[0.5, 2.0, 3.0]);
    }

    #[test]
    fn norm_weights_levels() {
        let l = Arc::new(Layout::new(2, 2).unwrap());
        let k = CorrelationHierarchy::from_values(l, vec![1.0, -3.0, 0.0, 5.0]).unwrap();
        assert_eq!(k.norm(0.0), 5.0);
        let a = 1.0f64;
        let expected = (3.0 * (-a).exp()).max(5.0 * (-2.0 * a).exp()).max(1.0);
        assert_eq!(k.norm(a), expected);
    }

    #[test]
    fn norm_is_nonincreasing_in_alpha() {
        let l = Arc::new(Layout::new(3, 3).unwrap());
        let k = CorrelationHierarchy::poisson(l, &[2.0, 0.1, 4.0]).unwrap();
        let mut prev = f64::INFINITY;
        for i in 0..20 {
            let n = k.norm(0.1 * i as f64);
            assert!(n <= prev);
            prev = n;
        }
    }

    #[test]
    fn truncated_configurations_read_as_zero() {
        let l = Arc::new(Layout::new(3, 1).unwrap());
        let k = CorrelationHierarchy::poisson(l, &[1.0, 1.0, 1.0]).unwrap();
        assert_eq!(k.get(&[0, 1]).unwrap(), 0.0);
        assert!(k.get(&[0, 0]).is_err());
    }
}
