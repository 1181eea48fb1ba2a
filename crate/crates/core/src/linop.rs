//! Linear operators between `l^r` spaces, source-consistent test problems,
//! calibrated noise, and a numerical range diagnostic.
//!
//! Operators act through the standard coordinate pairing, so the adjoint is
//! the transpose regardless of the space exponents; the Banach geometry
//! enters only through the norms and duality mappings applied around the
//! operator.

use std::path::Path;

use crate::banach::{conjugate_exponent, LpSpace};
use crate::regfun::{Regularizer, SUBGRADIENT_TOL};
use crate::rng::{gaussian_vector, rng_from_seed};
use crate::{check_dim, check_finite, Error, Matrix, Result, Tolerance, Vector};

/// Relative singular-value cutoff for the range diagnostic: directions with
/// singular values below `cutoff * sigma_max` are treated as numerically
/// outside the operator's reachable range. A plain least-squares solve would
/// report a zero residual for every invertible matrix and could never flag a
/// preimage whose norm blows up with the conditioning.
pub const RANGE_RCOND: f64 = 1e-2;

/// Concrete operator representation.
#[derive(Debug, Clone)]
pub enum OperatorKind {
    /// Dense row-major matrix.
    Dense(Matrix),
    /// Diagonal scaling, square.
    Diagonal(Vector),
    /// Circular convolution with a kernel, square:
    /// `(A x)_i = sum_j k_j x_{(i-j) mod n}`.
    Convolution(Vector),
}

/// Linear operator from a domain `l^r` space to a range `l^r` space.
#[derive(Debug, Clone)]
pub struct LinearOperator {
    kind: OperatorKind,
    domain: LpSpace,
    range: LpSpace,
}

/// Result of the range membership diagnostic.
#[derive(Debug, Clone, Copy)]
pub struct RangeDiagnostic {
    /// Relative Euclidean residual of the truncated least-squares solve.
    pub residual: f64,
    /// True when the dual reference point vanishes and the diagnostic says
    /// nothing (the exact solution already minimizes the regularizer).
    pub degenerate: bool,
}

impl LinearOperator {
    pub fn dense(matrix: Matrix, domain: LpSpace, range: LpSpace) -> Result<Self> {
        if matrix.ncols() != domain.dim() {
            return Err(Error::DimensionMismatch { expected: domain.dim(), got: matrix.ncols() });
        }
        if matrix.nrows() != range.dim() {
            return Err(Error::DimensionMismatch { expected: range.dim(), got: matrix.nrows() });
        }
        if !matrix.iter().all(|x| x.is_finite()) {
            return Err(Error::NonFinite { context: "dense operator entries" });
        }
        Ok(LinearOperator { kind: OperatorKind::Dense(matrix), domain, range })
    }

    pub fn diagonal(values: Vector, domain: LpSpace, range: LpSpace) -> Result<Self> {
        if domain.dim() != range.dim() {
            return Err(Error::DimensionMismatch { expected: domain.dim(), got: range.dim() });
        }
        check_dim(&values, domain.dim())?;
        check_finite(&values, "diagonal operator entries")?;
        Ok(LinearOperator { kind: OperatorKind::Diagonal(values), domain, range })
    }

    pub fn convolution(kernel: Vector, domain: LpSpace, range: LpSpace) -> Result<Self> {
        if domain.dim() != range.dim() {
            return Err(Error::DimensionMismatch { expected: domain.dim(), got: range.dim() });
        }
        check_dim(&kernel, domain.dim())?;
        check_finite(&kernel, "convolution kernel")?;
        Ok(LinearOperator { kind: OperatorKind::Convolution(kernel), domain, range })
    }

    pub fn kind(&self) -> &OperatorKind {
        &self.kind
    }

    pub fn domain(&self) -> &LpSpace {
        &self.domain
    }

    pub fn range(&self) -> &LpSpace {
        &self.range
    }

    /// `A x`.
    pub fn apply(&self, x: &Vector) -> Result<Vector> {
        check_dim(x, self.domain.dim())?;
        check_finite(x, "operator argument")?;
        Ok(match &self.kind {
            OperatorKind::Dense(m) => m * x,
            OperatorKind::Diagonal(d) => d.component_mul(x),
            OperatorKind::Convolution(k) => circular(k, x, false),
        })
    }

    /// `A* w` through the coordinate pairing: the transpose for a dense
    /// matrix, the same diagonal, and index-reversed (correlation) for the
    /// circular convolution.
    pub fn adjoint_apply(&self, w: &Vector) -> Result<Vector> {
        check_dim(w, self.range.dim())?;
        check_finite(w, "adjoint argument")?;
        Ok(match &self.kind {
            OperatorKind::Dense(m) => m.transpose() * w,
            OperatorKind::Diagonal(d) => d.component_mul(w),
            OperatorKind::Convolution(k) => circular(k, w, true),
        })
    }

    /// Dense matrix representation (used by diagnostics and test oracles).
    pub fn to_dense(&self) -> Matrix {
        match &self.kind {
            OperatorKind::Dense(m) => m.clone(),
            OperatorKind::Diagonal(d) => Matrix::from_diagonal(d),
            OperatorKind::Convolution(k) => {
                let n = k.len();
                Matrix::from_fn(n, n, |i, j| k[(i + n - j) % n])
            }
        }
    }

    /// Checks whether the normalizing dual direction `J_{p*}(omega)` is
    /// numerically reachable by the operator, using the default
    /// singular-value cutoff [`RANGE_RCOND`].
    pub fn range_diagnostic(&self, omega: &Vector, p: f64) -> Result<RangeDiagnostic> {
        self.range_diagnostic_with_rcond(omega, p, RANGE_RCOND)
    }

    /// Range diagnostic with an explicit relative singular-value cutoff.
    ///
    /// Computes `u = J_{p*}(omega)` in the dual of the range space, solves
    /// `min_v ||A v - u||_2` with singular values below `rcond * sigma_max`
    /// truncated, and reports the relative Euclidean residual. A residual
    /// near zero means `u` is reachable with a moderate preimage; a residual
    /// of order one flags directions outside the well-conditioned range.
    pub fn range_diagnostic_with_rcond(
        &self,
        omega: &Vector,
        p: f64,
        rcond: f64,
    ) -> Result<RangeDiagnostic> {
        if !(p.is_finite() && p > 1.0) {
            return Err(Error::InvalidExponent { value: p, reason: "residual exponent must be > 1" });
        }
        if !(rcond.is_finite() && (0.0..1.0).contains(&rcond)) {
            return Err(Error::InvalidArgument(format!("rcond must lie in [0, 1), got {rcond}")));
        }
        check_dim(omega, self.range.dim())?;
        let u = self.range.dual().duality_map(omega, conjugate_exponent(p))?;
        let u_norm = u.norm();
        if u_norm == 0.0 {
            return Ok(RangeDiagnostic { residual: 0.0, degenerate: true });
        }
        let svd = self.to_dense().svd(true, true);
        let sigma_max = svd.singular_values.max();
        let eps = (rcond * sigma_max).max(f64::MIN_POSITIVE);
        let v = svd
            .solve(&u, eps)
            .map_err(|e| Error::InvalidArgument(format!("svd solve failed: {e}")))?;
        let residual = (self.apply(&v)? - &u).norm() / u_norm;
        Ok(RangeDiagnostic { residual, degenerate: false })
    }
}

fn circular(kernel: &Vector, x: &Vector, adjoint: bool) -> Vector {
    let n = kernel.len();
    Vector::from_fn(n, |i, _| {
        let mut acc = 0.0;
        for j in 0..n {
            let idx = if adjoint { (i + j) % n } else { (i + n - j) % n };
            acc += kernel[j] * x[idx];
        }
        acc
    })
}

/// Test problem with a known solution tied to a dual source element.
///
/// Construction guarantees the compatibility chain
/// `xi+ = A* omega+`, `x+ in dR*(xi+)`, `y+ = A x+`, and
/// `||y_obs - y+|| = delta` in the range norm; [`ProblemInstance::validate`]
/// re-checks all of it.
#[derive(Debug, Clone)]
pub struct ProblemInstance {
    pub operator: LinearOperator,
    pub regularizer: Regularizer,
    /// Residual norm exponent of the data-fit term.
    pub p: f64,
    /// Exact solution.
    pub x_dagger: Vector,
    /// Dual source element in the dual of the range space.
    pub omega_dagger: Vector,
    /// `A* omega_dagger`, a subgradient of the regularizer at `x_dagger`.
    pub xi_dagger: Vector,
    /// Exact data `A x_dagger`.
    pub y_dagger: Vector,
    /// Noise level; `y_obs` sits at this distance from `y_dagger`.
    pub delta: f64,
    /// Observed data.
    pub y_obs: Vector,
    /// Seed used to draw the noise direction.
    pub noise_seed: u64,
}

/// Builds the exact-data instance for a dual source element `omega_dagger`:
/// `xi+ = A* omega+`, `x+` the canonical conjugate subgradient at `xi+`,
/// `y+ = A x+`, observed data equal to `y+`.
pub fn build_source_problem(
    operator: LinearOperator,
    regularizer: Regularizer,
    p: f64,
    omega_dagger: Vector,
) -> Result<ProblemInstance> {
    if !(p.is_finite() && p > 1.0) {
        return Err(Error::InvalidExponent { value: p, reason: "residual exponent must be > 1" });
    }
    if regularizer.dim() != operator.domain().dim() {
        return Err(Error::DimensionMismatch {
            expected: operator.domain().dim(),
            got: regularizer.dim(),
        });
    }
    if let Regularizer::PowerNorm { space, .. } = &regularizer {
        if space.exponent() != operator.domain().exponent() {
            return Err(Error::InvalidArgument(format!(
                "norm power regularizer uses exponent {} but the operator domain is l^{}",
                space.exponent(),
                operator.domain().exponent()
            )));
        }
    }
    check_dim(&omega_dagger, operator.range().dim())?;
    check_finite(&omega_dagger, "dual source element")?;

    let xi_dagger = operator.adjoint_apply(&omega_dagger)?;
    let x_dagger = regularizer.conjugate_subgradient(&xi_dagger)?;
    regularizer.check_subgradient(&x_dagger, &xi_dagger, SUBGRADIENT_TOL).map_err(|e| {
        Error::SourceCondition(format!("constructed solution failed verification: {e}"))
    })?;
    let y_dagger = operator.apply(&x_dagger)?;
    Ok(ProblemInstance {
        operator,
        regularizer,
        p,
        x_dagger,
        omega_dagger,
        xi_dagger,
        y_obs: y_dagger.clone(),
        y_dagger,
        delta: 0.0,
        noise_seed: 0,
    })
}

/// Adds noise at exact distance `delta` in the range norm: a seeded Gaussian
/// direction is rescaled so that `||y_obs - y_dagger|| = delta`.
pub fn make_noise(y_dagger: &Vector, delta: f64, range: &LpSpace, seed: u64) -> Result<Vector> {
    check_dim(y_dagger, range.dim())?;
    if !(delta.is_finite() && delta >= 0.0) {
        return Err(Error::InvalidArgument(format!("noise level must be >= 0, got {delta}")));
    }
    if delta == 0.0 {
        return Ok(y_dagger.clone());
    }
    let mut rng = rng_from_seed(seed);
    loop {
        let g = gaussian_vector(&mut rng, range.dim());
        let n = range.norm(&g)?;
        if n > 1e-12 {
            return Ok(y_dagger + g * (delta / n));
        }
    }
}

impl ProblemInstance {
    /// Same instance observed through noise of level `delta` drawn with
    /// `seed`.
    pub fn with_noise(&self, delta: f64, seed: u64) -> Result<ProblemInstance> {
        let y_obs = make_noise(&self.y_dagger, delta, self.operator.range(), seed)?;
        let mut out = self.clone();
        out.delta = delta;
        out.y_obs = y_obs;
        out.noise_seed = seed;
        Ok(out)
    }

    /// Re-checks every structural invariant of the instance.
    pub fn validate(&self, tol: Tolerance) -> Result<()> {
        let xi = self.operator.adjoint_apply(&self.omega_dagger)?;
        let xi_err = (&xi - &self.xi_dagger).amax();
        if !tol.accepts(xi_err, self.xi_dagger.amax().max(1.0)) {
            return Err(Error::SourceCondition(format!(
                "stored xi does not match A* omega (deviation {xi_err:.3e})"
            )));
        }
        self.regularizer
            .check_subgradient(&self.x_dagger, &self.xi_dagger, SUBGRADIENT_TOL)
            .map_err(|e| Error::SourceCondition(format!("subgradient check failed: {e}")))?;
        let y = self.operator.apply(&self.x_dagger)?;
        let y_err = (&y - &self.y_dagger).amax();
        if !tol.accepts(y_err, self.y_dagger.amax().max(1.0)) {
            return Err(Error::SourceCondition(format!(
                "stored exact data does not match A x (deviation {y_err:.3e})"
            )));
        }
        let dist = self.operator.range().norm(&(&self.y_obs - &self.y_dagger))?;
        if (dist - self.delta).abs() > 1e-12 * self.delta.max(1.0) {
            return Err(Error::SourceCondition(format!(
                "observed data sits at distance {dist:.6e}, expected delta {:.6e}",
                self.delta
            )));
        }
        Ok(())
    }
}

/// Reads a dense matrix from plain text: first line `rows cols`, then
/// whitespace-separated row-major entries.
pub fn load_dense_text(path: &Path) -> Result<Matrix> {
    let content = std::fs::read_to_string(path)?;
    let mut tokens = content.split_whitespace();
    let mut next_dim = |what: &str| -> Result<usize> {
        tokens
            .next()
            .ok_or_else(|| Error::Config(format!("matrix file {}: missing {what}", path.display())))?
            .parse::<usize>()
            .map_err(|e| Error::Config(format!("matrix file {}: bad {what}: {e}", path.display())))
    };
    let rows = next_dim("row count")?;
    let cols = next_dim("column count")?;
    let values: Vec<f64> = tokens
        .map(|t| {
            t.parse::<f64>()
                .map_err(|e| Error::Config(format!("matrix file {}: bad entry {t:?}: {e}", path.display())))
        })
        .collect::<Result<_>>()?;
    if values.len() != rows * cols {
        return Err(Error::Config(format!(
            "matrix file {}: expected {} entries, found {}",
            path.display(),
            rows * cols,
            values.len()
        )));
    }
    if !values.iter().all(|x| x.is_finite()) {
        return Err(Error::Config(format!("matrix file {}: non-finite entry", path.display())));
    }
    Ok(Matrix::from_row_slice(rows, cols, &values))
}

/// Reads a kernel or other vector from the same plain-text matrix format;
/// accepts an `n x 1` or `1 x n` shape.
pub fn load_vector_text(path: &Path) -> Result<Vector> {
    let m = load_dense_text(path)?;
    if m.nrows() != 1 && m.ncols() != 1 {
        return Err(Error::Config(format!(
            "vector file {}: expected a 1 x n or n x 1 shape, got {} x {}",
            path.display(),
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(Vector::from_iterator(m.len(), m.iter().copied()))
}
