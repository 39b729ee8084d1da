//! Cubic Hermite spline collocation for the linearized radial operator
//!
//! ```text
//! -x z'' - z' + J' z' + J z = rhs,    z'(0) = left,  z(X_inf) = right
//! ```
//!
//! Unknowns are nodal values `U_i` and first-derivative moments `M_i` (three
//! components each). The equation is enforced at the two Gauss points of
//! every subinterval, which makes the scheme fourth order. Rows are ordered
//! left boundary, interval blocks, right boundary; with unknowns grouped per
//! node the matrix is almost block diagonal with 8 sub- and superdiagonals.

use std::sync::Arc;

use crate::banded::{BandLu, BandMatrix};
use crate::mesh::Grid;
use crate::model::Mat3;
use crate::{CollocationError, Vec3};

pub use crate::banded::factorization_count;

/// Relative Gauss abscissae on `[0, 1]`.
pub const GAUSS_THETA: [f64; 2] = [0.5 - 0.288_675_134_594_812_9, 0.5 + 0.288_675_134_594_812_9];

const BAND: usize = 8;
const UNKNOWNS_PER_NODE: usize = 6;

/// Hermite basis on the unit interval with the two derivative functions
/// left unscaled by `h`: returns `(psi, dpsi/dtheta, d2psi/dtheta2)` for
/// `[U_i, M_i / h, U_{i+1}, M_{i+1} / h]`.
pub fn hermite_basis(theta: f64) -> ([f64; 4], [f64; 4], [f64; 4]) {
    let t = theta;
    let t2 = t * t;
    let t3 = t2 * t;
    (
        [1.0 - 3.0 * t2 + 2.0 * t3, t - 2.0 * t2 + t3, 3.0 * t2 - 2.0 * t3, t3 - t2],
        [-6.0 * t + 6.0 * t2, 1.0 - 4.0 * t + 3.0 * t2, 6.0 * t - 6.0 * t2, 3.0 * t2 - 2.0 * t],
        [-6.0 + 12.0 * t, -4.0 + 6.0 * t, 6.0 - 12.0 * t, 6.0 * t - 2.0],
    )
}

/// Value and first two derivatives at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplinePoint {
    pub value: Vec3,
    pub d1: Vec3,
    pub d2: Vec3,
}

/// Piecewise-cubic, globally C1 vector function on a grid.
#[derive(Debug, Clone)]
pub struct SplineFunction {
    grid: Arc<Grid>,
    values: Vec<Vec3>,
    moments: Vec<Vec3>,
}

impl SplineFunction {
    pub fn new(grid: Arc<Grid>, values: Vec<Vec3>, moments: Vec<Vec3>) -> Self {
        assert_eq!(values.len(), grid.nodes().len());
        assert_eq!(moments.len(), grid.nodes().len());
        Self { grid, values, moments }
    }

    pub fn zeros(grid: Arc<Grid>) -> Self {
        let n = grid.nodes().len();
        Self::new(grid, vec![[0.0; 3]; n], vec![[0.0; 3]; n])
    }

    /// Samples `f(x) -> (value, derivative)` at the nodes.
    pub fn interpolate(grid: Arc<Grid>, f: impl Fn(f64) -> (Vec3, Vec3)) -> Self {
        let (values, moments) = grid.nodes().iter().map(|&x| f(x)).unzip();
        Self::new(grid, values, moments)
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[Vec3] {
        &self.values
    }

    pub fn moments(&self) -> &[Vec3] {
        &self.moments
    }

    pub fn value_at_node(&self, i: usize) -> Vec3 {
        self.values[i]
    }

    pub fn moment_at_node(&self, i: usize) -> Vec3 {
        self.moments[i]
    }

    pub fn eval(&self, x: f64) -> Result<SplinePoint, CollocationError> {
        let i = self.grid.locate(x).ok_or(CollocationError::OutOfRange {
            x,
            x_max: self.grid.x_inf(),
        })?;
        let h = self.grid.step(i);
        Ok(self.eval_local(i, (x - self.grid.nodes()[i]) / h))
    }

    /// Evaluation at relative coordinate `theta` inside interval `i`.
    pub fn eval_local(&self, i: usize, theta: f64) -> SplinePoint {
        let h = self.grid.step(i);
        let (p, dp, ddp) = hermite_basis(theta);
        let (u0, m0, u1, m1) = (self.values[i], self.moments[i], self.values[i + 1], self.moments[i + 1]);
        SplinePoint {
            value: std::array::from_fn(|k| p[0] * u0[k] + h * p[1] * m0[k] + p[2] * u1[k] + h * p[3] * m1[k]),
            d1: std::array::from_fn(|k| (dp[0] * u0[k] + dp[2] * u1[k]) / h + dp[1] * m0[k] + dp[3] * m1[k]),
            d2: std::array::from_fn(|k| (ddp[0] * u0[k] + ddp[2] * u1[k]) / (h * h) + (ddp[1] * m0[k] + ddp[3] * m1[k]) / h),
        }
    }

    /// `self + sum_j c_j s_j`, all on the same grid.
    pub fn combine(&self, terms: &[(f64, &SplineFunction)]) -> Self {
        let mut out = self.clone();
        for &(c, s) in terms {
            debug_assert!(Arc::ptr_eq(&self.grid, &s.grid) || *self.grid == *s.grid);
            for (dst, src) in out.values.iter_mut().zip(&s.values) {
                for k in 0..3 {
                    dst[k] += c * src[k];
                }
            }
            for (dst, src) in out.moments.iter_mut().zip(&s.moments) {
                for k in 0..3 {
                    dst[k] += c * src[k];
                }
            }
        }
        out
    }
}

/// A Gauss point `xi = x_i + theta_j h_i`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollocationPoint {
    pub interval: usize,
    pub j: usize,
    pub theta: f64,
    pub x: f64,
    pub h: f64,
}

pub fn collocation_points(grid: &Grid) -> impl Iterator<Item = CollocationPoint> + '_ {
    (0..grid.intervals()).flat_map(move |i| {
        let h = grid.step(i);
        let x0 = grid.nodes()[i];
        GAUSS_THETA.iter().enumerate().map(move |(j, &theta)| CollocationPoint {
            interval: i,
            j,
            theta,
            x: x0 + theta * h,
            h,
        })
    })
}

/// Linear coefficients and the `M` right-hand sides at one Gauss point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointCoefficients<const M: usize = 3> {
    /// `dF/dy`.
    pub jac_y: Mat3,
    /// `dF/dy'`.
    pub jac_dy: Mat3,
    pub rhs: [Vec3; M],
}

/// Assembled collocation matrix with `M` right-hand sides.
#[derive(Debug, Clone)]
pub struct LinearizedSystem<const M: usize = 3> {
    grid: Arc<Grid>,
    matrix: BandMatrix,
    rhs: [Vec<f64>; M],
}

impl<const M: usize> LinearizedSystem<M> {
    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn matrix(&self) -> &BandMatrix {
        &self.matrix
    }

    pub fn rhs(&self) -> &[Vec<f64>; M] {
        &self.rhs
    }
}

fn value_col(node: usize, k: usize) -> usize {
    UNKNOWNS_PER_NODE * node + k
}

fn moment_col(node: usize, k: usize) -> usize {
    UNKNOWNS_PER_NODE * node + 3 + k
}

/// Builds the collocation system. `coefficients` is called once per Gauss
/// point in grid order. `left_bc[r]` and `right_bc[r]` are the derivative at
/// 0 and the value at `X_inf` for right-hand side `r`.
pub fn assemble<E, const M: usize>(
    grid: &Arc<Grid>,
    mut coefficients: impl FnMut(&CollocationPoint) -> Result<PointCoefficients<M>, E>,
    left_bc: [Vec3; M],
    right_bc: [Vec3; M],
) -> Result<LinearizedSystem<M>, E> {
    let n_int = grid.intervals();
    let dim = UNKNOWNS_PER_NODE * (n_int + 1);
    let mut matrix = BandMatrix::zeros(dim, BAND, BAND);
    let mut rhs: [Vec<f64>; M] = std::array::from_fn(|_| vec![0.0; dim]);

    for k in 0..3 {
        matrix.set(k, moment_col(0, k), 1.0);
        for r in 0..M {
            rhs[r][k] = left_bc[r][k];
        }
    }

    for pt in collocation_points(grid) {
        let c = coefficients(&pt)?;
        let (p, dp, ddp) = hermite_basis(pt.theta);
        let h = pt.h;
        let xi = pt.x;
        let i = pt.interval;
        // Per-basis scaling: columns U_i, M_i, U_{i+1}, M_{i+1}.
        let val = [p[0], h * p[1], p[2], h * p[3]];
        let d1 = [dp[0] / h, dp[1], dp[2] / h, dp[3]];
        let d2 = [ddp[0] / (h * h), ddp[1] / h, ddp[2] / (h * h), ddp[3] / h];
        let cols = |l: usize, n: usize| match l {
            0 => value_col(i, n),
            1 => moment_col(i, n),
            2 => value_col(i + 1, n),
            _ => moment_col(i + 1, n),
        };
        for k in 0..3 {
            let row = 3 + UNKNOWNS_PER_NODE * i + 3 * pt.j + k;
            for l in 0..4 {
                for n in 0..3 {
                    let mut a = c.jac_dy[k][n] * d1[l] + c.jac_y[k][n] * val[l];
                    if n == k {
                        a -= xi * d2[l] + d1[l];
                    }
                    matrix.set(row, cols(l, n), a);
                }
            }
            for r in 0..M {
                rhs[r][row] = c.rhs[r][k];
            }
        }
    }

    for k in 0..3 {
        let row = dim - 3 + k;
        matrix.set(row, value_col(n_int, k), 1.0);
        for r in 0..M {
            rhs[r][row] = right_bc[r][k];
        }
    }

    Ok(LinearizedSystem {
        grid: Arc::clone(grid),
        matrix,
        rhs,
    })
}

/// Factors the matrix once and back-substitutes every right-hand side.
pub fn factor_and_solve<const M: usize>(sys: LinearizedSystem<M>) -> Result<[SplineFunction; M], CollocationError> {
    let LinearizedSystem { grid, matrix, rhs } = sys;
    let lu: BandLu = matrix.factor()?;
    Ok(rhs.map(|mut b| {
        lu.solve_in_place(&mut b);
        unpack(&grid, &b)
    }))
}

fn unpack(grid: &Arc<Grid>, sol: &[f64]) -> SplineFunction {
    let (values, moments) = sol
        .chunks_exact(UNKNOWNS_PER_NODE)
        .map(|c| ([c[0], c[1], c[2]], [c[3], c[4], c[5]]))
        .unzip();
    SplineFunction::new(Arc::clone(grid), values, moments)
}
