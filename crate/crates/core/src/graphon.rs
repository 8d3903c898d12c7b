//! Symmetric graphon kernels on `[0,1]²` and their midpoint discretization.
//!
//! Grid functions live on `n` uniform cells with midpoints `(i - 1/2)/n`. The
//! inner product is the cell-weighted sum `<u, v> = (1/n) Σ u_i v_i`, so the
//! matrix transpose is the adjoint and the spectral norm of a matrix is its
//! operator norm on the discretized `L²[0,1]`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check, Error, Result, Violation};
use crate::linalg;
use crate::scalar::Real;

/// Analytic kernels available from configuration files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NamedKernel {
    /// `min(α, β)`
    Min,
    /// `αβ`
    Product,
    /// `cos(π(α − β))`
    CosineDifference,
}

/// A symmetric kernel with range in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GraphonSpec {
    Constant {
        c: f64,
    },
    /// Piecewise constant on the product cells of `partition`.
    Step {
        partition: Vec<f64>,
        values: Vec<Vec<f64>>,
    },
    Named {
        name: NamedKernel,
    },
}

/// Anything that can be sampled as a graphon kernel.
///
/// The library accepts arbitrary evaluators; they are checked for symmetry and
/// range on the grid nodes when discretized.
pub trait Kernel {
    fn value(&self, alpha: f64, beta: f64) -> f64;
}

impl<F> Kernel for F
where
    F: Fn(f64, f64) -> f64,
{
    fn value(&self, alpha: f64, beta: f64) -> f64 {
        self(alpha, beta)
    }
}

impl GraphonSpec {
    /// The constant-one kernel, whose operator averages a grid function.
    pub fn mean_field() -> Self {
        GraphonSpec::Constant { c: 1.0 }
    }

    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        match self {
            GraphonSpec::Constant { c } => {
                if !c.is_finite() || c.abs() > 1.0 {
                    out.push(Violation::new("c", format!("must lie in [-1, 1], got {c}")));
                }
            }
            GraphonSpec::Step { partition, values } => {
                let k = partition.len().saturating_sub(1);
                if partition.len() < 2 {
                    out.push(Violation::new(
                        "partition",
                        "needs at least two breakpoints (one cell)",
                    ));
                } else {
                    if partition[0] != 0.0 || partition[k] != 1.0 {
                        out.push(Violation::new("partition", "must start at 0 and end at 1"));
                    }
                    if partition.windows(2).any(|w| !(w[1] > w[0])) {
                        out.push(Violation::new(
                            "partition",
                            "breakpoints must be strictly increasing",
                        ));
                    }
                }
                if values.len() != k || values.iter().any(|row| row.len() != k) {
                    out.push(Violation::new(
                        "values",
                        format!("must be a {k}x{k} matrix matching the partition"),
                    ));
                } else {
                    for i in 0..k {
                        for j in 0..k {
                            let v = values[i][j];
                            if !v.is_finite() || v.abs() > 1.0 {
                                out.push(Violation::new(
                                    format!("values[{i}][{j}]"),
                                    format!("must lie in [-1, 1], got {v}"),
                                ));
                            }
                            if j > i && values[i][j] != values[j][i] {
                                out.push(Violation::new(
                                    format!("values[{i}][{j}]"),
                                    "step values must be symmetric",
                                ));
                            }
                        }
                    }
                }
            }
            GraphonSpec::Named { .. } => {}
        }
        out
    }

    /// Kernel value `M(α, β)`.
    pub fn evaluate(&self, alpha: f64, beta: f64) -> Result<f64> {
        for (label, x) in [("alpha", alpha), ("beta", beta)] {
            if !(0.0..=1.0).contains(&x) {
                return Err(Error::Domain(format!("{label} = {x} is outside [0, 1]")));
            }
        }
        Ok(self.value(alpha, beta))
    }

    /// Cell index of `x` in a step partition; the last cell is closed on the right.
    fn cell(partition: &[f64], x: f64) -> usize {
        let cells = partition.len() - 1;
        partition[1..cells]
            .iter()
            .take_while(|&&b| b <= x)
            .count()
    }
}

impl Kernel for GraphonSpec {
    fn value(&self, alpha: f64, beta: f64) -> f64 {
        match self {
            GraphonSpec::Constant { c } => *c,
            GraphonSpec::Step { partition, values } => {
                values[Self::cell(partition, alpha)][Self::cell(partition, beta)]
            }
            GraphonSpec::Named { name } => match name {
                NamedKernel::Min => alpha.min(beta),
                NamedKernel::Product => alpha * beta,
                NamedKernel::CosineDifference => (PI * (alpha - beta).abs()).cos(),
            },
        }
    }
}

/// Uniform cell grid on `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Grid {
    n: usize,
}

impl Grid {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("grid_n", "must be at least 1"));
        }
        Ok(Self { n })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn cell_weight(&self) -> f64 {
        1.0 / self.n as f64
    }

    #[inline]
    pub fn midpoint(&self, i: usize) -> f64 {
        (i as f64 + 0.5) / self.n as f64
    }

    pub fn midpoints(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(|i| self.midpoint(i))
    }

    /// Samples a function of `α` at the cell midpoints.
    pub fn sample<T: Real>(&self, f: impl Fn(f64) -> f64) -> DVector<T> {
        DVector::from_iterator(self.n, self.midpoints().map(|a| T::lit(f(a))))
    }

    /// Weighted inner product `(1/n) Σ u_i v_i`.
    pub fn inner<T: Real>(&self, u: &DVector<T>, v: &DVector<T>) -> T {
        linalg::weighted_dot(u, v, self.n)
    }
}

/// Matrix acting on grid functions, entry `(i, j) = M(α_i, α_j) / n`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscretizedOperator<T: Real> {
    entries: DMatrix<T>,
    grid: Grid,
}

impl<T: Real> DiscretizedOperator<T> {
    /// Discretizes an arbitrary kernel, checking symmetry and range on the nodes.
    pub fn from_kernel<K: Kernel + ?Sized>(kernel: &K, grid: Grid) -> Result<Self> {
        let n = grid.n();
        let w = grid.cell_weight();
        let mut entries = DMatrix::<T>::zeros(n, n);
        for i in 0..n {
            let a = grid.midpoint(i);
            for j in i..n {
                let b = grid.midpoint(j);
                let v = kernel.value(a, b);
                if !v.is_finite() || v.abs() > 1.0 {
                    return Err(Error::Domain(format!(
                        "kernel value {v} at ({a}, {b}) is outside [-1, 1]"
                    )));
                }
                if j > i && kernel.value(b, a) != v {
                    return Err(Error::NotSymmetric((kernel.value(b, a) - v).abs()));
                }
                let e = T::lit(v * w);
                entries[(i, j)] = e;
                entries[(j, i)] = e;
            }
        }
        Ok(Self { entries, grid })
    }

    /// Wraps an explicit matrix; it must be square and sized to the grid.
    pub fn from_matrix(entries: DMatrix<T>, grid: Grid) -> Result<Self> {
        if entries.nrows() != grid.n() || entries.ncols() != grid.n() {
            return Err(Error::Shape {
                expected: grid.n(),
                found: entries.nrows().max(entries.ncols()),
            });
        }
        Ok(Self { entries, grid })
    }

    pub fn entries(&self) -> &DMatrix<T> {
        &self.entries
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    /// Operator action, approximating `∫ M(α_i, β) v(β) dβ` at each midpoint.
    pub fn apply(&self, v: &DVector<T>) -> Result<DVector<T>> {
        if v.len() != self.grid.n() {
            return Err(Error::Shape {
                expected: self.grid.n(),
                found: v.len(),
            });
        }
        Ok(&self.entries * v)
    }

    /// Largest absolute eigenvalue; with uniform weights this is the
    /// operator norm under the weighted inner product.
    pub fn operator_norm(&self) -> Result<T> {
        let asym = linalg::relative_asymmetry(&self.entries);
        if asym > 1e-12 {
            return Err(Error::NotSymmetric(asym));
        }
        Ok(linalg::spectral_norm_sym(&self.entries))
    }
}

/// Midpoint collocation of a validated graphon spec.
pub fn discretize<T: Real>(spec: &GraphonSpec, grid: Grid) -> Result<DiscretizedOperator<T>> {
    check(spec.validate())?;
    DiscretizedOperator::from_kernel(spec, grid)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_block() -> GraphonSpec {
        GraphonSpec::Step {
            partition: vec![0.0, 0.5, 1.0],
            values: vec![vec![0.8, 0.1], vec![0.1, 0.6]],
        }
    }

    #[test]
    fn evaluates_catalog_kernels() {
        assert_eq!(GraphonSpec::Constant { c: 0.5 }.evaluate(0.2, 0.9).unwrap(), 0.5);
        assert_eq!(two_block().evaluate(0.25, 0.75).unwrap(), 0.1);
        let min = GraphonSpec::Named { name: NamedKernel::Min };
        assert_eq!(min.evaluate(0.3, 0.7).unwrap(), 0.3);
        let prod = GraphonSpec::Named { name: NamedKernel::Product };
        assert_eq!(prod.evaluate(0.5, 0.4).unwrap(), 0.2);
        let cos = GraphonSpec::Named { name: NamedKernel::CosineDifference };
        assert!((cos.evaluate(0.0, 1.0).unwrap() + 1.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_points_outside_unit_square() {
        let g = GraphonSpec::Constant { c: 0.5 };
        assert!(matches!(g.evaluate(-0.1, 0.5), Err(Error::Domain(_))));
        assert!(matches!(g.evaluate(0.5, 1.5), Err(Error::Domain(_))));
    }

    #[test]
    fn step_lookup_closes_last_cell() {
        let g = two_block();
        assert_eq!(g.evaluate(1.0, 1.0).unwrap(), 0.6);
        assert_eq!(g.evaluate(0.0, 0.0).unwrap(), 0.8);
        assert_eq!(g.evaluate(0.5, 0.0).unwrap(), 0.1);
    }

    #[test]
    fn validation_itemizes_bad_step_specs() {
        let g = GraphonSpec::Step {
            partition: vec![0.0, 0.7, 0.7, 0.9],
            values: vec![vec![0.0; 3], vec![0.0; 3], vec![2.0, 0.0, 0.0]],
        };
        let v = g.validate();
        assert!(v.iter().any(|x| x.field == "partition"));
        assert!(v.iter().any(|x| x.field == "values[2][0]"));
        assert!(!GraphonSpec::Constant { c: 1.5 }.validate().is_empty());
        assert!(two_block().validate().is_empty());
    }

    #[test]
    fn constant_one_discretizes_to_averaging() {
        let op = discretize::<f64>(&GraphonSpec::mean_field(), Grid::new(2).unwrap()).unwrap();
        assert_eq!(op.entries(), &DMatrix::from_element(2, 2, 0.5));
    }

    #[test]
    fn min_kernel_matrix_is_exactly_symmetric() {
        let g = GraphonSpec::Named { name: NamedKernel::Min };
        let op = discretize::<f64>(&g, Grid::new(64).unwrap()).unwrap();
        assert_eq!(op.entries(), &op.entries().transpose());
    }

    #[test]
    fn constant_kernel_averages() {
        let grid = Grid::new(5).unwrap();
        let v = DVector::from_vec(vec![1.0, -2.0, 3.0, 0.5, 7.5]);
        let mean = v.sum() / 5.0;
        let op = discretize::<f64>(&GraphonSpec::Constant { c: 0.3 }, grid).unwrap();
        let out = op.apply(&v).unwrap();
        for x in out.iter() {
            assert!((x - 0.3 * mean).abs() < 1e-14);
        }
        let zero = discretize::<f64>(&GraphonSpec::Constant { c: 0.0 }, grid).unwrap();
        assert!(zero.apply(&v).unwrap().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn two_block_action_on_sign_vector() {
        let grid = Grid::new(6).unwrap();
        let op = discretize::<f64>(&two_block(), grid).unwrap();
        let v = grid.sample::<f64>(|a| if a < 0.5 { 1.0 } else { -1.0 });
        let out = op.apply(&v).unwrap();
        for (i, x) in out.iter().enumerate() {
            let expected = if i < 3 { 0.35 } else { -0.25 };
            assert!((x - expected).abs() < 1e-15, "{i}: {x}");
        }
    }

    #[test]
    fn apply_checks_length() {
        let op = discretize::<f64>(&two_block(), Grid::new(4).unwrap()).unwrap();
        let err = op.apply(&DVector::zeros(3)).unwrap_err();
        assert!(matches!(err, Error::Shape { expected: 4, found: 3 }));
    }

    #[test]
    fn operator_norms() {
        let grid = Grid::new(8).unwrap();
        for c in [-0.7, 0.0, 0.4] {
            let op = discretize::<f64>(&GraphonSpec::Constant { c }, grid).unwrap();
            assert!((op.operator_norm().unwrap() - f64::abs(c)).abs() < 1e-14);
        }
        // eigenvalues of 0.5·[[0.8,0.1],[0.1,0.6]] by the 2x2 quadratic formula
        let (a, b, d) = (0.4f64, 0.05f64, 0.3f64);
        let disc = ((a - d) * (a - d) / 4.0 + b * b).sqrt();
        let expected = f64::max(((a + d) / 2.0 + disc).abs(), ((a + d) / 2.0 - disc).abs());
        let op = discretize::<f64>(&two_block(), grid).unwrap();
        assert!((op.operator_norm().unwrap() - expected).abs() < 1e-14);
    }

    #[test]
    fn non_symmetric_matrix_is_a_contract_violation() {
        let grid = Grid::new(2).unwrap();
        let m = DMatrix::from_row_slice(2, 2, &[0.0, 0.5, 0.0, 0.0]);
        let op = DiscretizedOperator::from_matrix(m, grid).unwrap();
        assert!(matches!(op.operator_norm(), Err(Error::NotSymmetric(_))));
    }

    #[test]
    fn custom_kernels_are_checked() {
        let grid = Grid::new(4).unwrap();
        let skew = |a: f64, b: f64| 0.5 * (a - b);
        assert!(DiscretizedOperator::<f64>::from_kernel(&skew, grid).is_err());
        let big = |_: f64, _: f64| 2.0;
        assert!(DiscretizedOperator::<f64>::from_kernel(&big, grid).is_err());
        let ok = |a: f64, b: f64| (a * b).sqrt();
        assert!(DiscretizedOperator::<f64>::from_kernel(&ok, grid).is_ok());
    }
}
