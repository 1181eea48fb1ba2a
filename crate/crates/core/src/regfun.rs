//! Convex regularization functionals, their conjugates, and Bregman
//! distances.
//!
//! Two functionals are provided: the norm power `(1/q) ||x||_r^q` on an
//! `l^r` space and the negative entropy `sum(x_i ln x_i - x_i + 1)` on the
//! nonnegative orthant. Subgradient membership is always verified through
//! the Fenchel-Young identity `R(x) + R*(xi) = <xi, x>`, so Bregman
//! distances cannot silently be computed against an invalid dual point.

use crate::banach::{conjugate_exponent, LpSpace};
use crate::linop::LinearOperator;
use crate::{check_dim, check_finite, Error, Result, Tolerance, Vector};

/// Default tolerance for Fenchel-Young subgradient verification.
pub const SUBGRADIENT_TOL: Tolerance = Tolerance { abs: 1e-9, rel: 1e-9 };

/// Convex regularization functional on a finite-dimensional space.
#[derive(Debug, Clone)]
pub enum Regularizer {
    /// `x -> (1/gauge) ||x||_r^gauge` on the given space, `gauge > 1`.
    PowerNorm { space: LpSpace, gauge: f64 },
    /// `x -> sum_i (x_i ln x_i - x_i + 1)` for `x >= 0`, `+inf` elsewhere,
    /// with `0 ln 0 = 0`.
    NegEntropy { dim: usize },
}

/// A point paired with a verified subgradient of a regularizer at that
/// point; construction fails unless the Fenchel-Young identity holds.
#[derive(Debug, Clone)]
pub struct SubgradientChoice {
    pub x: Vector,
    pub xi: Vector,
}

impl SubgradientChoice {
    pub fn verified(reg: &Regularizer, x: Vector, xi: Vector, tol: Tolerance) -> Result<Self> {
        reg.check_subgradient(&x, &xi, tol)?;
        Ok(SubgradientChoice { x, xi })
    }
}

impl Regularizer {
    pub fn power_norm(space: LpSpace, gauge: f64) -> Result<Self> {
        if !(gauge.is_finite() && gauge > 1.0) {
            return Err(Error::InvalidExponent {
                value: gauge,
                reason: "norm power gauge must be finite and > 1",
            });
        }
        Ok(Regularizer::PowerNorm { space, gauge })
    }

    pub fn neg_entropy(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("regularizer dimension must be at least 1".into()));
        }
        Ok(Regularizer::NegEntropy { dim })
    }

    pub fn dim(&self) -> usize {
        match self {
            Regularizer::PowerNorm { space, .. } => space.dim(),
            Regularizer::NegEntropy { dim } => *dim,
        }
    }

    /// Value of the functional; `+inf` outside the effective domain.
    pub fn eval(&self, x: &Vector) -> Result<f64> {
        check_dim(x, self.dim())?;
        check_finite(x, "regularizer argument")?;
        match self {
            Regularizer::PowerNorm { space, gauge } => {
                Ok(space.norm(x)?.powf(*gauge) / gauge)
            }
            Regularizer::NegEntropy { .. } => {
                if x.iter().any(|&t| t < 0.0) {
                    return Ok(f64::INFINITY);
                }
                Ok(x.iter().map(|&t| if t == 0.0 { 1.0 } else { t * t.ln() - t + 1.0 }).sum())
            }
        }
    }

    /// Convexity conjugate `R*(xi) = sup_x <xi, x> - R(x)`.
    ///
    /// Norm power: `(1/q*) ||xi||_{r*}^{q*}`. Negative entropy:
    /// `sum_i (exp(xi_i) - 1)`.
    pub fn conjugate(&self, xi: &Vector) -> Result<f64> {
        check_dim(xi, self.dim())?;
        check_finite(xi, "conjugate argument")?;
        match self {
            Regularizer::PowerNorm { space, gauge } => {
                let qs = conjugate_exponent(*gauge);
                Ok(space.dual().norm(xi)?.powf(qs) / qs)
            }
            Regularizer::NegEntropy { .. } => Ok(xi.iter().map(|&t| t.exp() - 1.0).sum()),
        }
    }

    /// Canonical subgradient at `x`: the duality mapping for the norm power,
    /// `ln x_i` (componentwise) for the negative entropy.
    pub fn subgradient(&self, x: &Vector) -> Result<Vector> {
        check_dim(x, self.dim())?;
        check_finite(x, "subgradient argument")?;
        match self {
            Regularizer::PowerNorm { space, gauge } => space.duality_map(x, *gauge),
            Regularizer::NegEntropy { dim } => {
                if x.iter().any(|&t| t <= 0.0) {
                    return Err(Error::NoSubgradient {
                        reason: "negative entropy has no subgradient on the boundary x_i <= 0",
                    });
                }
                Ok(Vector::from_iterator(*dim, x.iter().map(|&t| t.ln())))
            }
        }
    }

    /// Canonical element of the conjugate's subdifferential at `xi`: the
    /// dual-space duality mapping for the norm power, `exp(xi_i)` for the
    /// negative entropy.
    pub fn conjugate_subgradient(&self, xi: &Vector) -> Result<Vector> {
        check_dim(xi, self.dim())?;
        check_finite(xi, "conjugate subgradient argument")?;
        match self {
            Regularizer::PowerNorm { space, gauge } => {
                space.adjoint_duality_map(xi, conjugate_exponent(*gauge))
            }
            Regularizer::NegEntropy { dim } => {
                Ok(Vector::from_iterator(*dim, xi.iter().map(|&t| t.exp())))
            }
        }
    }

    /// Fenchel-Young gap `R(x) + R*(xi) - <xi, x>`; nonnegative, and zero
    /// exactly when `xi` is a subgradient of the functional at `x`.
    pub fn fenchel_young_gap(&self, x: &Vector, xi: &Vector) -> Result<f64> {
        let r = self.eval(x)?;
        let rs = self.conjugate(xi)?;
        Ok(r + rs - xi.dot(x))
    }

    /// Verifies `xi` is a subgradient at `x` within `tol`.
    pub fn check_subgradient(&self, x: &Vector, xi: &Vector, tol: Tolerance) -> Result<()> {
        let r = self.eval(x)?;
        let rs = self.conjugate(xi)?;
        let pairing = xi.dot(x);
        let gap = r + rs - pairing;
        let scale = r.abs().max(rs.abs()).max(pairing.abs()).max(1.0);
        if gap.is_finite() && gap <= tol.abs + tol.rel * scale {
            Ok(())
        } else {
            Err(Error::NotASubgradient { gap, tol: tol.abs + tol.rel * scale })
        }
    }

    /// Bregman distance `R(x~) - R(x) - <xi, x~ - x>` for a verified
    /// subgradient `xi` at the base point `x` (default tolerance).
    pub fn bregman(&self, x_tilde: &Vector, x: &Vector, xi: &Vector) -> Result<f64> {
        self.bregman_with_tol(x_tilde, x, xi, SUBGRADIENT_TOL)
    }

    pub fn bregman_with_tol(
        &self,
        x_tilde: &Vector,
        x: &Vector,
        xi: &Vector,
        tol: Tolerance,
    ) -> Result<f64> {
        self.check_subgradient(x, xi, tol)?;
        Ok(self.eval(x_tilde)? - self.eval(x)? - xi.dot(&(x_tilde - x)))
    }

    /// Symmetric Bregman distance `<xi - xi~, x - x~>` for verified
    /// subgradients `xi` at `x` and `xi~` at `x~`; equals the sum of the two
    /// one-sided distances.
    pub fn sym_bregman(
        &self,
        x: &Vector,
        x_tilde: &Vector,
        xi: &Vector,
        xi_tilde: &Vector,
    ) -> Result<f64> {
        self.check_subgradient(x, xi, SUBGRADIENT_TOL)?;
        self.check_subgradient(x_tilde, xi_tilde, SUBGRADIENT_TOL)?;
        Ok((xi - xi_tilde).dot(&(x - x_tilde)))
    }

    /// Bregman distance of the conjugate between pulled-back dual points,
    /// anchored at a reference solution:
    /// `R*(A* w) - R*(A* w+) - <A*(w - w+), x+>`
    /// where `x+` must satisfy the source condition `x+ in dR*(A* w+)`.
    pub fn dual_bregman(
        &self,
        a: &LinearOperator,
        omega: &Vector,
        omega_dagger: &Vector,
        x_dagger: &Vector,
    ) -> Result<f64> {
        let xi = a.adjoint_apply(omega)?;
        let xi_dagger = a.adjoint_apply(omega_dagger)?;
        if let Err(Error::NotASubgradient { gap, tol }) =
            self.check_subgradient(x_dagger, &xi_dagger, SUBGRADIENT_TOL)
        {
            return Err(Error::SourceCondition(format!(
                "reference point is not a conjugate subgradient of A* omega (gap {gap:.3e}, tol {tol:.3e})"
            )));
        }
        Ok(self.conjugate(&xi)? - self.conjugate(&xi_dagger)? - (xi - xi_dagger).dot(x_dagger))
    }
}
