//! Volume-constrained thresholding and the prediction sets.
//!
//! Nodes are ranked by the pair `(Phi, index)`, a total order, so "the `k`
//! smallest values" is always well defined. The multiplier `sigma` is the
//! rank-`k` pair; comparisons against it use the same order, which makes the
//! prediction sets exactly the nodes thresholding would switch.

use std::cmp::Ordering;

use crate::error::{IctmError, Result};
use crate::grid::{IndicatorField, ScalarField};

fn rank(values: &[f64], a: usize, b: usize) -> Ordering {
    values[a].total_cmp(&values[b]).then(a.cmp(&b))
}

/// The `k` nodes with the smallest `(value, index)` pairs, in ascending order.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub nodes: Vec<usize>,
    /// Value of the last selected node, or `-inf` when nothing is selected.
    pub sigma: f64,
    /// Index of the last selected node.
    pub sigma_node: Option<usize>,
}

pub fn select_smallest(values: &[f64], k: usize) -> Result<Selection> {
    if k > values.len() {
        return Err(IctmError::VolumeTarget {
            target: k,
            n_nodes: values.len(),
        });
    }
    if let Some(i) = values.iter().position(|v| v.is_nan()) {
        return Err(IctmError::NonFinite(i));
    }
    let mut order: Vec<usize> = (0..values.len()).collect();
    if k == 0 {
        return Ok(Selection {
            nodes: Vec::new(),
            sigma: f64::NEG_INFINITY,
            sigma_node: None,
        });
    }
    if k < values.len() {
        order.select_nth_unstable_by(k - 1, |&a, &b| rank(values, a, b));
    }
    order.truncate(k);
    order.sort_unstable_by(|&a, &b| rank(values, a, b));
    let last = order[k - 1];
    Ok(Selection {
        sigma: values[last],
        sigma_node: Some(last),
        nodes: order,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdResult {
    pub chi: IndicatorField,
    pub sigma: f64,
    pub target_ones: usize,
}

/// Ones on the `target_ones` nodes with the smallest `Phi`, ties to lower index.
pub fn volume_threshold(phi: &ScalarField, target_ones: usize) -> Result<ThresholdResult> {
    let sel = select_smallest(phi.values(), target_ones)?;
    Ok(ThresholdResult {
        chi: IndicatorField::from_ones(phi.grid(), sel.nodes)?,
        sigma: sel.sigma,
        target_ones,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionSets {
    /// Nodes to switch on (`chi = 0`, at or below `sigma`), `Phi` ascending.
    pub a: Vec<usize>,
    /// Nodes to switch off (`chi = 1`, above `sigma`), `Phi` descending.
    pub b: Vec<usize>,
    pub sigma: f64,
}

impl PredictionSets {
    pub fn n(&self) -> usize {
        self.a.len()
    }
}

/// Prediction sets from raw node values; `chi` holds 0/1 bytes.
pub fn prediction_sets_from_values(
    phi: &[f64],
    chi: &[u8],
    target_ones: usize,
) -> Result<PredictionSets> {
    if phi.len() != chi.len() {
        return Err(IctmError::FieldLength {
            expected: phi.len(),
            got: chi.len(),
        });
    }
    let actual = chi.iter().filter(|&&c| c == 1).count();
    if actual != target_ones {
        return Err(IctmError::InfeasibleVolume {
            target: target_ones,
            actual,
        });
    }
    let sel = select_smallest(phi, target_ones)?;
    let below = |i: usize| match sel.sigma_node {
        Some(s) => rank(phi, i, s) != Ordering::Greater,
        None => false,
    };
    let mut a: Vec<usize> = (0..phi.len())
        .filter(|&i| chi[i] == 0 && below(i))
        .collect();
    let mut b: Vec<usize> = (0..phi.len())
        .filter(|&i| chi[i] == 1 && !below(i))
        .collect();
    a.sort_unstable_by(|&x, &y| rank(phi, x, y));
    b.sort_unstable_by(|&x, &y| rank(phi, y, x));
    // Under a total order the counts always agree; kept so a full swap can
    // never change the volume.
    let n = a.len().min(b.len());
    a.truncate(n);
    b.truncate(n);
    Ok(PredictionSets {
        a,
        b,
        sigma: sel.sigma,
    })
}

pub fn prediction_sets(
    phi: &ScalarField,
    chi: &IndicatorField,
    target_ones: usize,
) -> Result<PredictionSets> {
    if phi.grid() != chi.grid() {
        return Err(IctmError::GridMismatch);
    }
    prediction_sets_from_values(phi.values(), chi.values(), target_ones)
}
