use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Upper bound on the total node count a grid may have.
pub const MAX_GRID_NODES: usize = 10_000_000;

/// Axis-aligned box `[lower_d, upper_d]` in one or two dimensions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxDomain {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl BoxDomain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Self {
        Self { lower, upper }
    }

    pub fn interval(lo: f64, hi: f64) -> Self {
        Self::new(vec![lo], vec![hi])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn volume(&self) -> f64 {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(lo, hi)| hi - lo)
            .product()
    }

    fn validate(&self) -> Result<()> {
        let n = self.lower.len();
        if n == 0 || n > 2 || self.upper.len() != n {
            return Err(Error::InvalidGrid(format!(
                "dimension must be 1 or 2 with matching bounds (got {} lower, {} upper)",
                self.lower.len(),
                self.upper.len()
            )));
        }
        for (axis, (&lo, &hi)) in self.lower.iter().zip(&self.upper).enumerate() {
            if !lo.is_finite() || !hi.is_finite() {
                return Err(Error::InvalidGrid(format!("axis {axis}: bounds must be finite")));
            }
            if hi <= lo {
                return Err(Error::InvalidGrid(format!(
                    "axis {axis}: degenerate bounds [{lo}, {hi}]"
                )));
            }
        }
        Ok(())
    }
}

/// Uniform midpoint grid on a box.
///
/// Nodes are cell centres, stored row-major (last axis fastest). Every node
/// carries the same quadrature weight, the cell volume.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    domain: BoxDomain,
    counts: Vec<usize>,
    spacing: Vec<f64>,
    nodes: Vec<f64>,
    weight: f64,
}

impl Grid {
    /// Midpoint grid with `resolution[d]` cells along axis `d`.
    pub fn build(domain: BoxDomain, resolution: &[usize]) -> Result<Self> {
        domain.validate()?;
        let dim = domain.dim();
        if resolution.len() != dim {
            return Err(Error::InvalidGrid(format!(
                "expected {dim} resolution entries, got {}",
                resolution.len()
            )));
        }
        check_counts(resolution)?;
        let spacing: Vec<f64> = (0..dim)
            .map(|d| (domain.upper[d] - domain.lower[d]) / resolution[d] as f64)
            .collect();
        let axes: Vec<Vec<f64>> = (0..dim)
            .map(|d| {
                (0..resolution[d])
                    .map(|i| domain.lower[d] + (i as f64 + 0.5) * spacing[d])
                    .collect()
            })
            .collect();
        Ok(Self::from_axes(domain, resolution.to_vec(), spacing, &axes))
    }

    /// Box `center ± half_width` on the fixed lattice `center + (k + 1/2) h`.
    ///
    /// Grids built this way with the same `center` and `spacing` are nested:
    /// every node of a smaller box is bit-identical to a node of a larger one.
    pub fn nested_box(center: &[f64], half_width: f64, spacing: f64) -> Result<Self> {
        let dim = center.len();
        if !(spacing.is_finite() && spacing > 0.0) {
            return Err(Error::InvalidGrid(format!("spacing must be positive, got {spacing}")));
        }
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "half width must be positive, got {half_width}"
            )));
        }
        let ratio = half_width / spacing;
        let cells = ratio.round();
        if (ratio - cells).abs() > 1e-9 * ratio.max(1.0) {
            return Err(Error::InvalidGrid(format!(
                "half width {half_width} is not a multiple of the spacing {spacing}"
            )));
        }
        let cells = cells as i64;
        let domain = BoxDomain::new(
            center.iter().map(|c| c - half_width).collect(),
            center.iter().map(|c| c + half_width).collect(),
        );
        domain.validate()?;
        let counts = vec![2 * cells as usize; dim];
        check_counts(&counts)?;
        let axes: Vec<Vec<f64>> = center
            .iter()
            .map(|&c| {
                (-cells..cells)
                    .map(|k| c + (k as f64 + 0.5) * spacing)
                    .collect()
            })
            .collect();
        Ok(Self::from_axes(domain, counts, vec![spacing; dim], &axes))
    }

    fn from_axes(domain: BoxDomain, counts: Vec<usize>, spacing: Vec<f64>, axes: &[Vec<f64>]) -> Self {
        let dim = axes.len();
        let total: usize = counts.iter().product();
        let mut nodes = Vec::with_capacity(total * dim);
        match dim {
            1 => nodes.extend_from_slice(&axes[0]),
            _ => {
                for &x in &axes[0] {
                    for &y in &axes[1] {
                        nodes.push(x);
                        nodes.push(y);
                    }
                }
            }
        }
        let weight = spacing.iter().product();
        Self {
            domain,
            counts,
            spacing,
            nodes,
            weight,
        }
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    /// Largest per-axis spacing.
    pub fn h(&self) -> f64 {
        self.spacing.iter().copied().fold(0.0, f64::max)
    }

    pub fn len(&self) -> usize {
        self.nodes.len() / self.dim()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, i: usize) -> &[f64] {
        let d = self.dim();
        &self.nodes[i * d..(i + 1) * d]
    }

    pub fn nodes(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.nodes.chunks_exact(self.dim())
    }

    /// Midpoint quadrature weight shared by every node.
    pub fn weight(&self) -> f64 {
        self.weight
    }

    pub fn weights(&self) -> Vec<f64> {
        vec![self.weight; self.len()]
    }

    /// Distance from node `i` to the boundary of the box.
    pub fn boundary_distance(&self, i: usize) -> f64 {
        self.node(i)
            .iter()
            .enumerate()
            .map(|(d, &x)| (x - self.domain.lower[d]).min(self.domain.upper[d] - x))
            .fold(f64::INFINITY, f64::min)
    }

    /// The same grid mapped by `x -> factor * x`.
    pub fn scaled(&self, factor: f64) -> Self {
        let scale = |v: &Vec<f64>| v.iter().map(|x| x * factor).collect::<Vec<_>>();
        Self {
            domain: BoxDomain::new(scale(&self.domain.lower), scale(&self.domain.upper)),
            counts: self.counts.clone(),
            spacing: scale(&self.spacing),
            nodes: scale(&self.nodes),
            weight: self.weight * factor.powi(self.dim() as i32),
        }
    }

    /// True when every node of `inner` is also (bit-for-bit) a node of `self`.
    pub fn contains_nodes_of(&self, inner: &Grid) -> bool {
        if inner.dim() != self.dim() {
            return false;
        }
        let own: HashSet<Vec<u64>> = self
            .nodes()
            .map(|p| p.iter().map(|x| x.to_bits()).collect())
            .collect();
        inner
            .nodes()
            .all(|p| own.contains(&p.iter().map(|x| x.to_bits()).collect::<Vec<_>>()))
    }
}

fn check_counts(counts: &[usize]) -> Result<()> {
    if let Some(&c) = counts.iter().find(|&&c| c < 2) {
        return Err(Error::InvalidGrid(format!(
            "need at least 2 nodes per axis, got {c}"
        )));
    }
    let total: u128 = counts.iter().map(|&c| c as u128).product();
    if total > MAX_GRID_NODES as u128 {
        return Err(Error::TooManyNodes {
            nodes: total,
            limit: MAX_GRID_NODES,
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn four_node_interval() {
        let g = Grid::build(BoxDomain::interval(0.0, 1.0), &[4]).unwrap();
        let xs: Vec<f64> = g.nodes().map(|p| p[0]).collect();
        assert_eq!(xs, vec![0.125, 0.375, 0.625, 0.875]);
        assert_eq!(g.weights(), vec![0.25; 4]);
    }

    #[test]
    fn square_weights_sum_to_area() {
        let g = Grid::build(BoxDomain::new(vec![0.0, 0.0], vec![1.0, 1.0]), &[3, 3]).unwrap();
        assert_eq!(g.len(), 9);
        let total: f64 = g.weights().iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        // row-major, last axis fastest
        assert_eq!(g.node(1), &[1.0 / 6.0, 0.5]);
    }

    #[test]
    fn weights_match_volume_on_odd_boxes() {
        let g = Grid::build(BoxDomain::new(vec![-0.3, 2.0], vec![1.7, 2.9]), &[37, 11]).unwrap();
        let total: f64 = g.weights().iter().sum();
        let vol = g.domain().volume();
        assert!(((total - vol) / vol).abs() < 1e-12);
        for p in g.nodes() {
            assert!(p[0] > -0.3 && p[0] < 1.7 && p[1] > 2.0 && p[1] < 2.9);
        }
    }

    #[test]
    fn midpoint_refinement_is_not_node_nested() {
        let coarse = Grid::build(BoxDomain::interval(0.0, 1.0), &[4]).unwrap();
        let fine = Grid::build(BoxDomain::interval(0.0, 1.0), &[8]).unwrap();
        for p in coarse.nodes() {
            assert!(fine.nodes().all(|q| q[0] != p[0]));
        }
        assert!(!fine.contains_nodes_of(&coarse));
    }

    #[test]
    fn nested_boxes_share_nodes() {
        let h = 1.0 / 64.0;
        let sizes = [1.0, 2.0, 4.0, 8.0];
        let grids: Vec<Grid> = sizes
            .iter()
            .map(|&l| Grid::nested_box(&[0.0], l, h).unwrap())
            .collect();
        for pair in grids.windows(2) {
            assert!(pair[1].contains_nodes_of(&pair[0]));
            assert!(pair[1].len() > pair[0].len());
        }
        let g2 = Grid::nested_box(&[0.5, -1.0], 0.25, 0.125).unwrap();
        let g3 = Grid::nested_box(&[0.5, -1.0], 0.5, 0.125).unwrap();
        assert!(g3.contains_nodes_of(&g2));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(Grid::build(BoxDomain::interval(0.0, f64::NAN), &[4]).is_err());
        assert!(Grid::build(BoxDomain::interval(1.0, 1.0), &[4]).is_err());
        assert!(Grid::build(BoxDomain::interval(0.0, 1.0), &[1]).is_err());
        assert!(matches!(
            Grid::build(BoxDomain::new(vec![0.0, 0.0], vec![1.0, 1.0]), &[10_000, 10_000]),
            Err(Error::TooManyNodes { .. })
        ));
        assert!(Grid::nested_box(&[0.0], 1.0, 0.3).is_err());
    }

    #[test]
    fn scaling_maps_nodes_and_weights() {
        let g = Grid::build(BoxDomain::new(vec![0.0, 0.0], vec![1.0, 2.0]), &[4, 8]).unwrap();
        let s = g.scaled(3.0);
        assert_eq!(s.len(), g.len());
        assert_eq!(s.node(5), &[3.0 * g.node(5)[0], 3.0 * g.node(5)[1]]);
        assert!((s.weight() - 9.0 * g.weight()).abs() < 1e-15);
    }
}
