//! The hierarchy operators on flat value vectors.
//!
//! Sums over sites outside `eta` skip sites already in `eta`, and the double sums
//! skip the diagonal, so only simple configurations occur. Values above the
//! truncation level are read as zero.

use super::rates::RatesAt;
use super::space::Layout;

/// `Phi(eta) = sum_{i in eta} h_i + 1/2 sum_{i != j in eta} psi_ij`.
pub fn selection_cost(r: &RatesAt, mask: u32) -> f64 {
    let m = r.m;
    let mut single = 0.0;
    let mut pair = 0.0;
    for i in Layout::sites_of(mask) {
        single += r.h[i];
        for j in Layout::sites_of(mask) {
            if j != i {
                pair += r.psi[i * m + j];
            }
        }
    }
    single + 0.5 * pair
}

#[inline]
fn read(layout: &Layout, k: &[f64], mask: u32) -> f64 {
    layout.index_of(mask).map_or(0.0, |i| k[i])
}

/// `sum_{i not in eta} w_i h_i k(eta + i) + 1/2 sum_{i != j not in eta} w_i w_j psi_ij k(eta + i + j)`.
///
/// At `eta = {}` this is exactly `B^Delta(k)`; both call this one function so the
/// level-0 output of `L^Delta` cancels bit for bit.
fn raising(layout: &Layout, r: &RatesAt, k: &[f64], mask: u32) -> f64 {
    let m = r.m;
    let mut single = 0.0;
    let mut pair = 0.0;
    for i in 0..m {
        let bi = 1u32 << i;
        if mask & bi != 0 {
            continue;
        }
        single += r.wh[i] * read(layout, k, mask | bi);
        for j in 0..m {
            let bj = 1u32 << j;
            if j == i || mask & bj != 0 {
                continue;
            }
            pair += r.wwpsi[i * m + j] * read(layout, k, mask | bi | bj);
        }
    }
    single + 0.5 * pair
}

/// `(A0 k)(eta) = Phi(eta) k(eta) + raising terms`.
pub fn apply_a0(layout: &Layout, r: &RatesAt, k: &[f64]) -> Vec<f64> {
    layout
        .masks()
        .iter()
        .zip(k)
        .map(|(&mask, &kv)| selection_cost(r, mask) * kv + raising(layout, r, k, mask))
        .collect()
}

fn a1_entry(layout: &Layout, r: &RatesAt, k: &[f64], mask: u32) -> f64 {
    let m = r.m;
    let mut interaction = 0.0;
    let mut appearance = 0.0;
    for i in Layout::sites_of(mask) {
        for j in 0..m {
            let bj = 1u32 << j;
            if mask & bj != 0 {
                continue;
            }
            interaction += r.wpsi[i * m + j] * read(layout, k, mask | bj);
        }
        appearance += r.a[i] * read(layout, k, mask & !(1 << i));
    }
    -interaction + appearance
}

/// `(A1 k)(eta) = -sum_{i in eta} sum_{j not in eta} w_j psi_ij k(eta + j) + sum_{i in eta} a_i k(eta - i)`.
pub fn apply_a1(layout: &Layout, r: &RatesAt, k: &[f64]) -> Vec<f64> {
    layout
        .masks()
        .iter()
        .map(|&mask| a1_entry(layout, r, k, mask))
        .collect()
}

/// `B^Delta(k) = sum_i w_i h_i k({i}) + 1/2 sum_{i != j} w_i w_j psi_ij k({i, j})`.
pub fn bdelta(layout: &Layout, r: &RatesAt, k: &[f64]) -> f64 {
    raising(layout, r, k, 0)
}

/// `L^Delta k = -A0 k + A1 k + B^Delta(k) k`.
pub fn apply_ldelta(layout: &Layout, r: &RatesAt, k: &[f64]) -> Vec<f64> {
    let bd = bdelta(layout, r, k);
    layout
        .masks()
        .iter()
        .zip(k)
        .map(|(&mask, &kv)| {
            let a0 = selection_cost(r, mask) * kv + raising(layout, r, k, mask);
            let a1 = a1_entry(layout, r, k, mask);
            -a0 + a1 + bd * kv
        })
        .collect()
}

/// `B(k) = A1 k + B^Delta(k) k`, the perturbation fed to the fixed-point solver.
pub fn apply_perturbation(layout: &Layout, r: &RatesAt, k: &[f64]) -> Vec<f64> {
    let bd = bdelta(layout, r, k);
    layout
        .masks()
        .iter()
        .zip(k)
        .map(|(&mask, &kv)| a1_entry(layout, r, k, mask) + bd * kv)
        .collect()
}
