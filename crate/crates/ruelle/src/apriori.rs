//! Discretized symbol spaces.
//!
//! The symbol set `M` with its a priori measure `nu` is represented by a
//! finite quadrature rule: nodes, positive weights, and a metric with
//! diameter one. Every integral over `M` downstream of this module is the
//! corresponding weighted sum, with no further discretization error — the
//! finite rule is treated as the system itself.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::Serialize;

use crate::{Error, Result};

/// Whether the quadrature weights form a probability or a plain counting
/// (or otherwise unnormalized) measure.
///
/// Counting weights exist so that a two-symbol Markov kernel `J` with unit
/// column sums yields a literally normalized potential `log J`. The same
/// operator is obtained in probability mode from the potential
/// `log(d * J)`; both conventions produce identical matrices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightMode {
    Probability,
    Counting,
}

/// A finite quadrature rule standing in for `(M, d_M, nu)`.
///
/// Immutable after construction; shared behind `Arc` by all functions
/// defined on it.
#[derive(Debug, Clone, Serialize)]
pub struct AprioriSpace {
    label: String,
    /// One coordinate tuple per node (a single angle for the circle,
    /// the symbol index for finite alphabets).
    nodes: Vec<Vec<f64>>,
    weights: Vec<f64>,
    /// Row-major `n x n` distances, scaled to diameter one.
    metric: Vec<f64>,
    mode: WeightMode,
}

const PROBABILITY_TOL: f64 = 1e-12;

impl AprioriSpace {
    fn build(
        label: String,
        nodes: Vec<Vec<f64>>,
        weights: Vec<f64>,
        mut metric: Vec<f64>,
    ) -> Result<Arc<Self>> {
        let n = nodes.len();
        if n < 2 {
            return Err(Error::InvalidArgument(format!(
                "need at least 2 nodes, got {n}"
            )));
        }
        if weights.iter().any(|&w| !w.is_finite() || w <= 0.0) {
            return Err(Error::InvalidArgument(
                "all quadrature weights must be positive and finite".into(),
            ));
        }
        // Rescale the metric to diameter exactly one.
        let diam = metric.iter().cloned().fold(0.0, f64::max);
        if diam <= 0.0 {
            return Err(Error::InvalidArgument("metric has zero diameter".into()));
        }
        for d in metric.iter_mut() {
            *d /= diam;
        }
        let total: f64 = weights.iter().sum();
        let mode = if (total - 1.0).abs() <= PROBABILITY_TOL {
            WeightMode::Probability
        } else {
            WeightMode::Counting
        };
        Ok(Arc::new(Self {
            label,
            nodes,
            weights,
            metric,
            mode,
        }))
    }

    /// Finite alphabet `{0, .., d-1}` with the discrete metric.
    ///
    /// Without explicit weights the a priori measure is uniform `1/d`
    /// (probability mode). Explicit weights are taken verbatim; weights
    /// summing to one give probability mode, anything else counting mode.
    pub fn finite_alphabet(d: usize, weights: Option<&[f64]>) -> Result<Arc<Self>> {
        if d < 2 {
            return Err(Error::InvalidArgument(format!(
                "alphabet size must be at least 2, got {d}"
            )));
        }
        let weights = match weights {
            Some(w) => {
                if w.len() != d {
                    return Err(Error::DimensionMismatch(format!(
                        "expected {d} weights, got {}",
                        w.len()
                    )));
                }
                w.to_vec()
            }
            None => vec![1.0 / d as f64; d],
        };
        let nodes = (0..d).map(|i| vec![i as f64]).collect();
        let mut metric = vec![1.0; d * d];
        for i in 0..d {
            metric[i * d + i] = 0.0;
        }
        Self::build(format!("finite-{d}"), nodes, weights, metric)
    }

    /// Equispaced nodes on the circle with uniform weights `1/n` (the
    /// trapezoid rule for the uniform measure) and arc-length metric.
    pub fn circle(n_nodes: usize) -> Result<Arc<Self>> {
        if n_nodes < 4 {
            return Err(Error::InvalidArgument(format!(
                "circle needs at least 4 nodes, got {n_nodes}"
            )));
        }
        let n = n_nodes;
        let nodes: Vec<Vec<f64>> = (0..n).map(|i| vec![2.0 * PI * i as f64 / n as f64]).collect();
        let weights = vec![1.0 / n as f64; n];
        let mut metric = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let gap = i.abs_diff(j).min(n - i.abs_diff(j));
                metric[i * n + j] = gap as f64 * 2.0 * PI / n as f64;
            }
        }
        Self::build(format!("circle-{n}"), nodes, weights, metric)
    }

    /// Number of quadrature nodes.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn mode(&self) -> WeightMode {
        self.mode
    }

    /// Coordinates of node `i`.
    pub fn node(&self, i: usize) -> &[f64] {
        &self.nodes[i]
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Total mass of the a priori measure (1 in probability mode).
    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Distance between nodes, symmetric with zero diagonal and diameter one.
    pub fn metric(&self, i: usize, j: usize) -> f64 {
        self.metric[i * self.len() + j]
    }

    /// Quadrature of per-node values: `sum_i nu_i values_i`.
    pub fn integrate_symbol(&self, values: &[f64]) -> Result<f64> {
        if values.len() != self.len() {
            return Err(Error::DimensionMismatch(format!(
                "expected {} values, got {}",
                self.len(),
                values.len()
            )));
        }
        Ok(self
            .weights
            .iter()
            .zip(values)
            .map(|(w, v)| w * v)
            .sum())
    }

    /// Structural equality; functions on equal spaces are interoperable.
    pub fn same_space(&self, other: &Self) -> bool {
        std::ptr::eq(self, other)
            || (self.mode == other.mode
                && self.nodes == other.nodes
                && self.weights == other.weights
                && self.metric == other.metric)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_default_weights() {
        let s = AprioriSpace::finite_alphabet(2, None).unwrap();
        assert_eq!(s.weights(), &[0.5, 0.5]);
        assert_eq!(s.mode(), WeightMode::Probability);
    }

    #[test]
    fn counting_weights() {
        let s = AprioriSpace::finite_alphabet(2, Some(&[1.0, 1.0])).unwrap();
        assert_eq!(s.mode(), WeightMode::Counting);
        assert_eq!(s.total_mass(), 2.0);
    }

    #[test]
    fn explicit_probability_weights() {
        let s = AprioriSpace::finite_alphabet(3, Some(&[0.2, 0.3, 0.5])).unwrap();
        assert_eq!(s.mode(), WeightMode::Probability);
        assert_eq!(s.weights(), &[0.2, 0.3, 0.5]);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(AprioriSpace::finite_alphabet(1, None).is_err());
        assert!(AprioriSpace::finite_alphabet(2, Some(&[1.0, -1.0])).is_err());
        assert!(AprioriSpace::finite_alphabet(2, Some(&[1.0, 0.0])).is_err());
        assert!(AprioriSpace::circle(3).is_err());
    }

    #[test]
    fn circle_nodes_and_weights() {
        let s = AprioriSpace::circle(4).unwrap();
        assert_eq!(s.node(1)[0], PI / 2.0);
        assert_eq!(s.node(3)[0], 3.0 * PI / 2.0);
        assert_eq!(s.weight(0), 0.25);

        let s = AprioriSpace::circle(256).unwrap();
        assert!((s.total_mass() - 1.0).abs() < 1e-15);

        // Odd node counts are accepted.
        let s = AprioriSpace::circle(5).unwrap();
        assert_eq!(s.weight(2), 0.2);
    }

    #[test]
    fn metric_has_unit_diameter() {
        for s in [
            AprioriSpace::finite_alphabet(3, None).unwrap(),
            AprioriSpace::circle(7).unwrap(),
            AprioriSpace::circle(8).unwrap(),
        ] {
            let n = s.len();
            let mut diam: f64 = 0.0;
            for i in 0..n {
                assert_eq!(s.metric(i, i), 0.0);
                for j in 0..n {
                    assert_eq!(s.metric(i, j), s.metric(j, i));
                    diam = diam.max(s.metric(i, j));
                }
            }
            assert!((diam - 1.0).abs() < 1e-15, "{}: diam {diam}", s.label());
        }
    }

    #[test]
    fn integrate_symbol_examples() {
        let s = AprioriSpace::finite_alphabet(2, None).unwrap();
        assert_eq!(s.integrate_symbol(&[1.0, 1.0]).unwrap(), 1.0);
        assert_eq!(s.integrate_symbol(&[1.0, 3.0]).unwrap(), 2.0);
        assert!(s.integrate_symbol(&[1.0]).is_err());

        let c = AprioriSpace::circle(256).unwrap();
        let vals: Vec<f64> = (0..256).map(|i| c.node(i)[0].cos()).collect();
        assert!(c.integrate_symbol(&vals).unwrap().abs() < 1e-14);
    }

    #[test]
    fn refinement_is_spectrally_accurate() {
        // 1/(a - cos t) has geometrically decaying Fourier coefficients, so
        // the equispaced rule converges geometrically; the mean is known in
        // closed form: 1/sqrt(a^2 - 1) = 4/3 for a = 1.25.
        let exact = 4.0 / 3.0;
        let err = |n: usize| -> f64 {
            let s = AprioriSpace::circle(n).unwrap();
            let vals: Vec<f64> = (0..n).map(|i| 1.0 / (1.25 - s.node(i)[0].cos())).collect();
            (s.integrate_symbol(&vals).unwrap() - exact).abs()
        };
        let (e8, e16, e32) = (err(8), err(16), err(32));
        assert!(e16 < 1e-2 * e8, "e8={e8:.3e} e16={e16:.3e}");
        assert!(e32 < 1e-2 * e16, "e16={e16:.3e} e32={e32:.3e}");
    }
}
