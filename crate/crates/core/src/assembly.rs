//! Dense Nyström assembly of `L_Ω + a` and `M_{σ,m,Ω} + a`.

use std::collections::VecDeque;
use std::fmt;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid_kernel::{Coefficient, Grid, KernelSpec};

/// Dense storage limit.
pub const MAX_OPERATOR_DIM: usize = 4096;

/// Relative asymmetry tolerated by the `symmetric` flag.
const SYMMETRY_TOL: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    /// `∫_Ω K(x, y) φ(y) dy + a(x) φ(x)`
    #[serde(rename = "L_plus_a")]
    LPlusA,
    /// `σ^{-m} (∫_Ω J_σ(x - y) φ(y) dy - φ(x)) + a(x) φ(x)`
    #[serde(rename = "M_plus_a")]
    MPlusA,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::LPlusA => "L_plus_a",
            Variant::MPlusA => "M_plus_a",
        })
    }
}

/// Assembled operator `A = P + diag(a + shift)` where `P_ij = s w_j K(x_i, x_j)`
/// and `s = σ^{-m}` for the M-variant, `1` otherwise.
#[derive(Debug, Clone)]
pub struct DiscreteOperator {
    matrix: DMatrix<f64>,
    zero_order: Vec<f64>,
    masses: Vec<f64>,
    shift: f64,
    coefficient: Vec<f64>,
    variant: Variant,
    symmetric: bool,
    components: Vec<Vec<usize>>,
    source: Option<Source>,
    holder: f64,
}

/// What an assembled operator was built from.
#[derive(Debug, Clone)]
pub struct Source {
    pub grid: Grid,
    pub kernel: KernelSpec,
    pub coefficient: Coefficient,
    /// Accumulated factor of `assemble_scaled` calls.
    pub spatial_scale: f64,
}

impl DiscreteOperator {
    /// Operator from an explicit nonnegative integral part and zero-order
    /// diagonal, with no grid behind it.
    pub fn from_parts(integral: DMatrix<f64>, zero_order: Vec<f64>) -> Result<Self> {
        let n = zero_order.len();
        if integral.nrows() != n || integral.ncols() != n {
            return Err(Error::Dimension {
                expected: n,
                got: integral.nrows(),
            });
        }
        if n == 0 {
            return Err(Error::InvalidArgument("empty operator".into()));
        }
        if n > MAX_OPERATOR_DIM {
            return Err(Error::OperatorTooLarge {
                n,
                limit: MAX_OPERATOR_DIM,
            });
        }
        if integral.iter().chain(&zero_order).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("operator entries".into()));
        }
        if integral.iter().any(|&v| v < 0.0) {
            return Err(Error::InvalidArgument(
                "integral part must be entrywise nonnegative".into(),
            ));
        }
        let masses = integral.row_iter().map(|r| r.sum()).collect();
        let mut matrix = integral;
        for (i, z) in zero_order.iter().enumerate() {
            matrix[(i, i)] += z;
        }
        Ok(Self::finish(
            matrix,
            zero_order.clone(),
            masses,
            0.0,
            zero_order,
            Variant::LPlusA,
            None,
            1.0,
        ))
    }

    #[allow(clippy::too_many_arguments)]
    fn finish(
        matrix: DMatrix<f64>,
        zero_order: Vec<f64>,
        masses: Vec<f64>,
        shift: f64,
        coefficient: Vec<f64>,
        variant: Variant,
        source: Option<Source>,
        holder: f64,
    ) -> Self {
        let symmetric = is_symmetric(&matrix);
        let components = support_components(&matrix);
        Self {
            matrix,
            zero_order,
            masses,
            shift,
            coefficient,
            variant,
            symmetric,
            components,
            source,
            holder,
        }
    }

    pub fn dim(&self) -> usize {
        self.zero_order.len()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// `a_i + shift`.
    pub fn zero_order(&self) -> &[f64] {
        &self.zero_order
    }

    /// `a_i`.
    pub fn coefficient_values(&self) -> &[f64] {
        &self.coefficient
    }

    /// Row sums of the integral part, `p_i` (including the `σ^{-m}` factor).
    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    /// Weakly connected components of the off-diagonal support graph.
    pub fn components(&self) -> &[Vec<usize>] {
        &self.components
    }

    pub fn is_connected(&self) -> bool {
        self.components.len() == 1
    }

    pub fn source(&self) -> Option<&Source> {
        self.source.as_ref()
    }

    pub fn grid(&self) -> Option<&Grid> {
        self.source.as_ref().map(|s| &s.grid)
    }

    /// Quadrature weights (all ones for operators built from parts).
    pub fn weights(&self) -> Vec<f64> {
        match &self.source {
            Some(s) => s.grid.weights(),
            None => vec![1.0; self.dim()],
        }
    }

    /// Declared Hölder exponent of the coefficient.
    pub fn holder(&self) -> f64 {
        self.holder
    }

    /// Grid spacing, or 0 for operators built from parts.
    pub fn spacing(&self) -> f64 {
        self.grid().map_or(0.0, Grid::h)
    }

    pub fn sigma(&self) -> Option<f64> {
        self.source.as_ref().and_then(|s| s.kernel.sigma())
    }

    pub fn m(&self) -> Option<f64> {
        match self.variant {
            Variant::MPlusA => self.source.as_ref().and_then(|s| s.kernel.m()),
            Variant::LPlusA => None,
        }
    }

    pub fn kernel_label(&self) -> String {
        self.source
            .as_ref()
            .map_or_else(|| "explicit".to_string(), |s| s.kernel.label())
    }

    pub fn coefficient_label(&self) -> String {
        self.source
            .as_ref()
            .map_or_else(|| "explicit".to_string(), |s| s.coefficient.label())
    }

    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.matrix * x
    }

    /// Same integral part with the coefficient replaced by `a`.
    pub fn with_coefficient(&self, a: &Coefficient) -> Result<Self> {
        if a.len() != self.dim() {
            return Err(Error::NodeMismatch {
                grid: self.dim(),
                coefficient: a.len(),
            });
        }
        let mut out = self.clone();
        for (i, &ai) in a.values().iter().enumerate() {
            let z = ai + self.shift;
            out.matrix[(i, i)] += z - self.zero_order[i];
            out.zero_order[i] = z;
        }
        out.coefficient = a.values().to_vec();
        out.holder = a.holder();
        if let Some(src) = &mut out.source {
            src.coefficient = a.clone();
        }
        Ok(out)
    }

    /// Sub-operator restricted to the given node indices.
    pub fn restrict(&self, idx: &[usize]) -> Self {
        let n = idx.len();
        let mut matrix = DMatrix::zeros(n, n);
        for (a, &i) in idx.iter().enumerate() {
            for (b, &j) in idx.iter().enumerate() {
                matrix[(a, b)] = self.matrix[(i, j)];
            }
        }
        let pick = |v: &[f64]| idx.iter().map(|&i| v[i]).collect::<Vec<_>>();
        let masses = idx
            .iter()
            .enumerate()
            .map(|(a, &i)| (0..n).map(|b| matrix[(a, b)]).sum::<f64>() - self.zero_order[i])
            .collect();
        Self::finish(
            matrix,
            pick(&self.zero_order),
            masses,
            self.shift,
            pick(&self.coefficient),
            self.variant,
            None,
            self.holder,
        )
    }
}

/// Assemble the dense operator for `variant` on `grid`.
///
/// Integrals run over the grid only (Dirichlet-exterior convention), so the
/// kernel mass at nodes within reach of the boundary is below one.
pub fn assemble(
    grid: &Grid,
    k: &KernelSpec,
    a: &Coefficient,
    variant: Variant,
) -> Result<DiscreteOperator> {
    k.validate()?;
    k.check_resolution(grid)?;
    if a.len() != grid.len() {
        return Err(Error::NodeMismatch {
            grid: grid.len(),
            coefficient: a.len(),
        });
    }
    let (prefactor, shift) = match variant {
        Variant::LPlusA => (1.0, 0.0),
        Variant::MPlusA => {
            let (sigma, m) = match k {
                KernelSpec::Convolution { sigma, m, .. } => (*sigma, *m),
                _ => {
                    return Err(Error::InvalidKernel(
                        "the M-variant needs a convolution kernel".into(),
                    ))
                }
            };
            let s = sigma.powf(-m);
            (s, -s)
        }
    };
    let source = Source {
        grid: grid.clone(),
        kernel: k.clone(),
        coefficient: a.clone(),
        spatial_scale: 1.0,
    };
    build(
        grid,
        |x, y| k.eval(x, y),
        prefactor,
        shift,
        a.values(),
        variant,
        source,
        a.holder(),
    )
}

#[allow(clippy::too_many_arguments)]
fn build(
    grid: &Grid,
    kernel: impl Fn(&[f64], &[f64]) -> f64 + Sync,
    prefactor: f64,
    shift: f64,
    a: &[f64],
    variant: Variant,
    source: Source,
    holder: f64,
) -> Result<DiscreteOperator> {
    let n = grid.len();
    if n > MAX_OPERATOR_DIM {
        return Err(Error::OperatorTooLarge {
            n,
            limit: MAX_OPERATOR_DIM,
        });
    }
    let w = grid.weight();
    // rows are independent, so parallel and serial assembly agree bitwise
    let rows: Vec<(Vec<f64>, f64)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let x = grid.node(i);
            let row: Vec<f64> = grid.nodes().map(|y| prefactor * w * kernel(x, y)).collect();
            let mass = row.iter().sum();
            (row, mass)
        })
        .collect();
    let mut data = Vec::with_capacity(n * n);
    let mut masses = Vec::with_capacity(n);
    for (row, mass) in rows {
        data.extend(row);
        masses.push(mass);
    }
    let mut matrix = DMatrix::from_row_slice(n, n, &data);
    let zero_order: Vec<f64> = a.iter().map(|ai| ai + shift).collect();
    for (i, z) in zero_order.iter().enumerate() {
        matrix[(i, i)] += z;
    }
    if matrix.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("assembled matrix".into()));
    }
    let op = DiscreteOperator::finish(
        matrix,
        zero_order,
        masses,
        shift,
        a.to_vec(),
        variant,
        Some(source),
        holder,
    );
    if !op.is_connected() {
        log::warn!(
            "support graph has {} components; λ_p is taken over the dominant one",
            op.components.len()
        );
    }
    Ok(op)
}

/// Operator on the scaled domain `s Ω` with kernel `s^{-N} K(x/s, y/s)` and
/// coefficient `a(x/s)`, reassembled from scratch on the mapped grid.
pub fn assemble_scaled(op: &DiscreteOperator, s: f64) -> Result<DiscreteOperator> {
    if !(s.is_finite() && s > 0.0) {
        return Err(Error::InvalidArgument(format!("scale must be positive, got {s}")));
    }
    let src = op.source.as_ref().ok_or_else(|| {
        Error::InvalidArgument("scaling needs an operator assembled on a grid".into())
    })?;
    let total = src.spatial_scale * s;
    let grid = src.grid.scaled(s);
    let dim = grid.dim();
    let norm = total.powi(dim as i32).recip();
    let kernel = &src.kernel;
    let base = |x: &[f64]| -> [f64; 2] {
        let mut out = [0.0; 2];
        for (o, v) in out.iter_mut().zip(x) {
            *o = v / total;
        }
        out
    };
    let scaled_kernel = |x: &[f64], y: &[f64]| {
        let (bx, by) = (base(x), base(y));
        norm * kernel.eval(&bx[..dim], &by[..dim])
    };
    let a: Vec<f64> = match src.coefficient.spec() {
        Some(spec) => grid.nodes().map(|x| spec.eval(&base(x)[..dim])).collect(),
        None => src.coefficient.values().to_vec(),
    };
    let coefficient = Coefficient::from_values(a.clone(), src.coefficient.holder())?;
    let prefactor = match op.variant {
        Variant::LPlusA => 1.0,
        Variant::MPlusA => -op.shift,
    };
    let source = Source {
        grid: grid.clone(),
        kernel: kernel.clone(),
        coefficient,
        spatial_scale: total,
    };
    build(
        &grid,
        scaled_kernel,
        prefactor,
        op.shift,
        &a,
        op.variant,
        source,
        op.holder,
    )
}

/// `max_i (a_i + shift)`: `ν` for the L-variant, `ν - σ^{-m}` for the M-variant.
pub fn effective_sup(op: &DiscreteOperator) -> f64 {
    op.zero_order
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max)
}

fn is_symmetric(m: &DMatrix<f64>) -> bool {
    let scale = m.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            if (m[(i, j)] - m[(j, i)]).abs() > SYMMETRY_TOL * scale {
                return false;
            }
        }
    }
    true
}

fn support_components(m: &DMatrix<f64>) -> Vec<Vec<usize>> {
    let n = m.nrows();
    let mut label = vec![usize::MAX; n];
    let mut components = Vec::new();
    for start in 0..n {
        if label[start] != usize::MAX {
            continue;
        }
        let id = components.len();
        let mut members = vec![start];
        label[start] = id;
        let mut queue = VecDeque::from([start]);
        while let Some(i) = queue.pop_front() {
            for j in 0..n {
                if label[j] == usize::MAX && j != i && (m[(i, j)] > 0.0 || m[(j, i)] > 0.0) {
                    label[j] = id;
                    members.push(j);
                    queue.push_back(j);
                }
            }
        }
        members.sort_unstable();
        components.push(members);
    }
    components
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid_kernel::{BoxDomain, CoefficientSpec, KernelFamily};
    use nalgebra::SymmetricEigen;

    fn unit_grid(n: usize) -> Grid {
        Grid::build(BoxDomain::interval(0.0, 1.0), &[n]).unwrap()
    }

    fn zero(grid: &Grid) -> Coefficient {
        Coefficient::on_grid(&CoefficientSpec::constant(0.0), grid).unwrap()
    }

    #[test]
    fn row_sums_are_kernel_masses() {
        let g = unit_grid(64);
        let k = KernelSpec::convolution(KernelFamily::Uniform, 1.0, 1.0, 2.0);
        let op = assemble(&g, &k, &zero(&g), Variant::LPlusA).unwrap();
        for i in 0..g.len() {
            let rs: f64 = op.matrix().row(i).sum();
            let p = crate::grid_kernel::kernel_mass(&k, &g, g.node(i));
            assert!((rs - p).abs() < 1e-14);
            assert!(rs > 0.0 && rs <= 1.0);
        }
        assert!(op.is_symmetric());
        assert!(op.is_connected());
    }

    #[test]
    fn m_zero_is_l_minus_identity() {
        let g = unit_grid(40);
        let k = KernelSpec::convolution(KernelFamily::Triangle, 1.0, 0.2, 0.0);
        let a = Coefficient::on_grid(
            &CoefficientSpec::GaussianBump {
                amplitude: 1.0,
                width: 0.2,
                center: vec![0.5],
                offset: 0.0,
            },
            &g,
        )
        .unwrap();
        let l = assemble(&g, &k, &zero(&g), Variant::LPlusA).unwrap();
        let m = assemble(&g, &k, &a, Variant::MPlusA).unwrap();
        let expected = l.matrix() - DMatrix::identity(40, 40) + DMatrix::from_diagonal(&DVector::from_vec(a.values().to_vec()));
        assert!((m.matrix() - expected).amax() < 1e-15);
        assert_eq!(m.shift(), -1.0);
    }

    #[test]
    fn constant_coefficient_is_diagonal_shift() {
        let g = unit_grid(50);
        let k = KernelSpec::convolution(KernelFamily::Quartic, 1.0, 0.3, 1.0);
        let base = assemble(&g, &k, &zero(&g), Variant::LPlusA).unwrap();
        let a = Coefficient::on_grid(&CoefficientSpec::constant(2.5), &g).unwrap();
        let shifted = assemble(&g, &k, &a, Variant::LPlusA).unwrap();
        let diff = shifted.matrix() - base.matrix();
        assert_eq!(diff, DMatrix::identity(50, 50) * 2.5);
    }

    #[test]
    fn effective_sup_values() {
        let g = unit_grid(160);
        let z = zero(&g);
        let l = assemble(&g, &KernelSpec::convolution(KernelFamily::Uniform, 1.0, 0.1, 2.0), &z, Variant::LPlusA).unwrap();
        assert_eq!(effective_sup(&l), 0.0);
        let m2 = assemble(&g, &KernelSpec::convolution(KernelFamily::Uniform, 1.0, 0.1, 2.0), &z, Variant::MPlusA).unwrap();
        assert!((effective_sup(&m2) + 100.0).abs() < 1e-10);
        let a = Coefficient::from_values(vec![0.3; 160], 1.0).unwrap();
        let m0 = assemble(&g, &KernelSpec::convolution(KernelFamily::Uniform, 1.0, 0.1, 0.0), &a, Variant::MPlusA).unwrap();
        assert!((effective_sup(&m0) + 0.7).abs() < 1e-15);
    }

    #[test]
    fn scaled_reassembly_matches_entrywise() {
        let g = unit_grid(48);
        let k = KernelSpec::convolution(KernelFamily::Epanechnikov, 1.0, 0.25, 2.0);
        let a = Coefficient::on_grid(
            &CoefficientSpec::CosineBump {
                amplitude: 1.0,
                frequency: 1.0,
                center: vec![0.3],
                offset: 0.0,
                support: None,
            },
            &g,
        )
        .unwrap();
        let op = assemble(&g, &k, &a, Variant::LPlusA).unwrap();
        let same = assemble_scaled(&op, 1.0).unwrap();
        assert_eq!(same.matrix(), op.matrix());
        let twice = assemble_scaled(&op, 2.0).unwrap();
        assert!((twice.matrix() - op.matrix()).amax() < 1e-14);
        let half = assemble_scaled(&op, 0.5).unwrap();
        let e0 = SymmetricEigen::new(op.matrix().clone()).eigenvalues;
        let e1 = SymmetricEigen::new(half.matrix().clone()).eigenvalues;
        let mut e0: Vec<f64> = e0.iter().copied().collect();
        let mut e1: Vec<f64> = e1.iter().copied().collect();
        e0.sort_by(f64::total_cmp);
        e1.sort_by(f64::total_cmp);
        for (x, y) in e0.iter().zip(&e1) {
            assert!((x - y).abs() < 1e-12);
        }
        let back = assemble_scaled(&twice, 0.5).unwrap();
        assert!((back.matrix() - op.matrix()).amax() < 1e-13);
        assert_eq!(back.grid().unwrap().node(3), op.grid().unwrap().node(3));
    }

    #[test]
    fn under_resolved_assembly_is_rejected() {
        let g = unit_grid(20);
        let k = KernelSpec::convolution(KernelFamily::Uniform, 1.0, 0.1, 2.0);
        assert!(matches!(
            assemble(&g, &k, &zero(&g), Variant::MPlusA),
            Err(Error::Resolution { .. })
        ));
    }

    #[test]
    fn disconnected_parts_are_reported() {
        let mut p = DMatrix::zeros(4, 4);
        p[(0, 1)] = 1.0;
        p[(1, 0)] = 1.0;
        p[(2, 3)] = 0.5;
        let op = DiscreteOperator::from_parts(p, vec![0.0; 4]).unwrap();
        assert_eq!(op.components(), &[vec![0, 1], vec![2, 3]]);
        assert!(!op.is_symmetric());
    }

    #[test]
    fn general_kernel_is_not_symmetric() {
        let g = unit_grid(64);
        let k = KernelSpec::General {
            family: KernelFamily::Uniform,
            radius: 0.5,
            g: CoefficientSpec::constant(1.0),
            h: CoefficientSpec::Tabulated {
                points: vec![0.0, 1.0],
                values: vec![1.0, 2.0],
            },
        };
        let op = assemble(&g, &k, &zero(&g), Variant::LPlusA).unwrap();
        assert!(!op.is_symmetric());
        assert!(op.is_connected());
        assert!(assemble(&g, &k, &zero(&g), Variant::MPlusA).is_err());
    }
}
