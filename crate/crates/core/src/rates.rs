//! Convergence-rate toolkit: index functions and their conjugate
//! transform, the a-priori error bound they induce, the a-priori parameter
//! choice, log-log slope fitting, and a sampling probe for variational
//! source conditions.

use serde::Serialize;

use crate::banach::conjugate_exponent;
use crate::linop::ProblemInstance;
use crate::rng::{gaussian_vector, rng_from_seed};
use crate::{Error, Result};

/// Index function `Phi: [0, inf) -> [0, inf)`: zero at zero, strictly
/// increasing, concave. Used to express smoothness of the reference
/// solution relative to the operator.
#[derive(Debug, Clone)]
pub enum IndexFunction {
    /// `Phi(t) = c t^mu` with `c > 0` and `0 < mu <= 1`.
    Power { c: f64, mu: f64 },
    /// Piecewise-linear interpolant through `(t_i, phi_i)` starting at
    /// `(0, 0)`; extended beyond the last node with the final slope.
    Tabulated { ts: Vec<f64>, phis: Vec<f64> },
}

impl IndexFunction {
    pub fn power(c: f64, mu: f64) -> Result<Self> {
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "index function coefficient must be positive, got {c}"
            )));
        }
        if !(mu.is_finite() && mu > 0.0 && mu <= 1.0) {
            return Err(Error::InvalidExponent {
                value: mu,
                reason: "index function exponent must lie in (0, 1]",
            });
        }
        Ok(IndexFunction::Power { c, mu })
    }

    /// Builds a tabulated index function. The table must start at `(0, 0)`,
    /// be strictly increasing in both coordinates, and have non-increasing
    /// chord slopes (concavity).
    pub fn tabulated(ts: Vec<f64>, phis: Vec<f64>) -> Result<Self> {
        if ts.len() != phis.len() {
            return Err(Error::DimensionMismatch { expected: ts.len(), got: phis.len() });
        }
        if ts.len() < 2 {
            return Err(Error::InvalidArgument(
                "tabulated index function needs at least two nodes".into(),
            ));
        }
        if ts[0] != 0.0 || phis[0] != 0.0 {
            return Err(Error::InvalidArgument(
                "tabulated index function must start at (0, 0)".into(),
            ));
        }
        if ts.iter().chain(phis.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { context: "index function table" });
        }
        let mut prev_slope = f64::INFINITY;
        for i in 1..ts.len() {
            if ts[i] <= ts[i - 1] || phis[i] <= phis[i - 1] {
                return Err(Error::InvalidArgument(
                    "tabulated index function must be strictly increasing".into(),
                ));
            }
            let slope = (phis[i] - phis[i - 1]) / (ts[i] - ts[i - 1]);
            if slope > prev_slope * (1.0 + 1e-12) {
                return Err(Error::InvalidArgument(
                    "tabulated index function must be concave".into(),
                ));
            }
            prev_slope = slope;
        }
        Ok(IndexFunction::Tabulated { ts, phis })
    }

    /// Evaluates the index function; arguments below zero clamp to zero.
    pub fn eval(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        match self {
            IndexFunction::Power { c, mu } => c * t.powf(*mu),
            IndexFunction::Tabulated { ts, phis } => {
                let n = ts.len();
                if t >= ts[n - 1] {
                    let slope = (phis[n - 1] - phis[n - 2]) / (ts[n - 1] - ts[n - 2]);
                    return phis[n - 1] + slope * (t - ts[n - 1]);
                }
                let hi = ts.partition_point(|&node| node < t).max(1);
                let (t0, t1) = (ts[hi - 1], ts[hi]);
                let (p0, p1) = (phis[hi - 1], phis[hi]);
                p0 + (p1 - p0) * (t - t0) / (t1 - t0)
            }
        }
    }
}

/// Conjugate transform `Psi(s) = sup_{t >= 0} (s Phi(t) - t)` of an index
/// function, in evaluatable form.
#[derive(Debug, Clone)]
pub enum PsiConjugate {
    /// `Psi(s) = coeff * s^power` (power functions with `mu < 1`).
    PowerSmooth { coeff: f64, power: f64 },
    /// For `mu = 1` the supremum is `0` below `s = 1/c` and infinite above.
    LinearCap { threshold: f64 },
    /// Discrete supremum over the table nodes.
    Table { ts: Vec<f64>, phis: Vec<f64> },
}

/// Conjugate transform of an index function.
///
/// For `Phi(t) = c t^mu` with `mu = 1/q*` the transform is the power
/// function `Psi(s) = (c^q q*^{1-q} / q) s^q` with `1/q + 1/q* = 1`; for a
/// table it is the discrete supremum over the nodes, an inner approximation
/// that converges as the table refines.
pub fn psi_conjugate(phi: &IndexFunction) -> PsiConjugate {
    match phi {
        IndexFunction::Power { c, mu } => {
            if *mu == 1.0 {
                PsiConjugate::LinearCap { threshold: 1.0 / c }
            } else {
                let q = 1.0 / (1.0 - mu);
                let q_star = 1.0 / mu;
                PsiConjugate::PowerSmooth {
                    coeff: c.powf(q) * q_star.powf(1.0 - q) / q,
                    power: q,
                }
            }
        }
        IndexFunction::Tabulated { ts, phis } => {
            PsiConjugate::Table { ts: ts.clone(), phis: phis.clone() }
        }
    }
}

impl PsiConjugate {
    /// Evaluates the transform; non-positive arguments give `0` (the
    /// supremum is attained at `t = 0`).
    pub fn eval(&self, s: f64) -> f64 {
        if s <= 0.0 {
            return 0.0;
        }
        match self {
            PsiConjugate::PowerSmooth { coeff, power } => coeff * s.powf(*power),
            PsiConjugate::LinearCap { threshold } => {
                if s <= *threshold {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            PsiConjugate::Table { ts, phis } => ts
                .iter()
                .zip(phis.iter())
                .map(|(&t, &phi)| s * phi - t)
                .fold(0.0, f64::max),
        }
    }
}

/// A-priori bound on the dual-space Bregman error under a source condition
/// with index function `phi` and a `q`-convexity constant `c_convexity` of
/// the regularizer:
/// `Psi(alpha^{p*-1}) + delta^p / (p p*^{1/p*} c_convexity^{p/p*} alpha)`.
pub fn theoretical_bound(
    phi: &IndexFunction,
    c_convexity: f64,
    p: f64,
    alpha: f64,
    delta: f64,
) -> Result<f64> {
    if !(p.is_finite() && p > 1.0) {
        return Err(Error::InvalidExponent { value: p, reason: "residual exponent must be > 1" });
    }
    if !(c_convexity.is_finite() && c_convexity > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "convexity constant must be positive, got {c_convexity}"
        )));
    }
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "regularization parameter must be positive, got {alpha}"
        )));
    }
    if !(delta.is_finite() && delta >= 0.0) {
        return Err(Error::InvalidArgument(format!("noise level must be >= 0, got {delta}")));
    }
    let ps = conjugate_exponent(p);
    let psi = psi_conjugate(phi);
    let noise_term =
        delta.powf(p) / (p * ps.powf(1.0 / ps) * c_convexity.powf(p / ps) * alpha);
    Ok(psi.eval(alpha.powf(ps - 1.0)) + noise_term)
}

/// Exponent of the a-priori parameter choice: `alpha ~ delta^{this}`.
pub fn alpha_exponent(p: f64, q: f64) -> f64 {
    let ps = conjugate_exponent(p);
    p / ((ps - 1.0) * q + 1.0)
}

/// A-priori parameter choice `alpha = c0 * delta^{p / ((p*-1) q + 1)}`
/// balancing the two terms of [`theoretical_bound`] for smooth sources.
pub fn choose_alpha(delta: f64, p: f64, q: f64, c0: f64) -> Result<f64> {
    if !(delta.is_finite() && delta > 0.0) {
        return Err(Error::InvalidArgument(format!("noise level must be positive, got {delta}")));
    }
    if !(p.is_finite() && p > 1.0) {
        return Err(Error::InvalidExponent { value: p, reason: "residual exponent must be > 1" });
    }
    if !(q.is_finite() && q >= 1.0) {
        return Err(Error::InvalidExponent { value: q, reason: "smoothness index must be >= 1" });
    }
    if !(c0.is_finite() && c0 > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "parameter-choice constant must be positive, got {c0}"
        )));
    }
    Ok(c0 * delta.powf(alpha_exponent(p, q)))
}

/// Predicted decay exponent of the Bregman error under the a-priori choice:
/// error `~ delta^{p* q / ((p*-1) q + 1)}`.
pub fn predicted_exponent(p: f64, q: f64) -> f64 {
    let ps = conjugate_exponent(p);
    ps * q / ((ps - 1.0) * q + 1.0)
}

/// Decay exponent of the Bregman error in `alpha` for exact data:
/// error `~ alpha^{(p*-1) q}`.
pub fn exact_data_exponent(p: f64, q: f64) -> f64 {
    let ps = conjugate_exponent(p);
    (ps - 1.0) * q
}

/// Ordinary least-squares fit of `ln y` against `ln x`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope, `sqrt(SSR / (n-2) / Sxx)`.
    pub stderr: f64,
}

/// Fits a power law `y ~ x^slope` by least squares in log-log coordinates.
/// Requires at least three strictly positive, finite samples.
pub fn fit_loglog(xs: &[f64], ys: &[f64]) -> Result<SlopeFit> {
    if xs.len() != ys.len() {
        return Err(Error::DimensionMismatch { expected: xs.len(), got: ys.len() });
    }
    if xs.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "slope fit needs at least 3 points, got {}",
            xs.len()
        )));
    }
    if xs.iter().chain(ys.iter()).any(|&v| !(v.is_finite() && v > 0.0)) {
        return Err(Error::InvalidArgument(
            "slope fit requires strictly positive finite samples".into(),
        ));
    }
    let n = xs.len() as f64;
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = lx.iter().zip(ly.iter()).map(|(a, b)| (a - mx) * (b - my)).sum();
    if sxx <= 0.0 {
        return Err(Error::InvalidArgument("slope fit abscissae are all identical".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 =
        lx.iter().zip(ly.iter()).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let stderr = (ssr / (n - 2.0) / sxx).sqrt();
    Ok(SlopeFit { slope, intercept, stderr })
}

/// Median of a non-empty sample of finite values.
pub fn median(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptySample);
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { context: "median input" });
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len();
    if n % 2 == 1 {
        Ok(sorted[n / 2])
    } else {
        Ok(0.5 * (sorted[n / 2 - 1] + sorted[n / 2]))
    }
}

/// Result of the variational-inequality sampling probe.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct VarIneqProbe {
    /// Largest observed `<omega - omega+, J_{p*}(omega+)> / Phi(D*)`;
    /// at most `1` when the source condition holds with `Phi`.
    pub max_ratio: Option<f64>,
    /// Log-log slope of the pairing against the dual Bregman distance over
    /// samples where both are positive; near the source smoothness index
    /// when the condition is tight.
    pub fitted_mu: Option<f64>,
    /// Number of positive sample pairs behind `fitted_mu`.
    pub n_pairs: usize,
    /// Set when the reference dual element vanishes (nothing to probe).
    pub degenerate: bool,
}

/// Samples the variational inequality
/// `<omega - omega+, J_{p*}(omega+)> <= Phi(D*(A* omega; A* omega+))`
/// at `omega = omega+ + t v` for random unit directions `v` and a log grid
/// of `t` between `1e-4` and `1` times `||omega+||`.
pub fn var_ineq_probe(
    instance: &ProblemInstance,
    phi: &IndexFunction,
    n_directions: usize,
    n_steps: usize,
    seed: u64,
) -> Result<VarIneqProbe> {
    if n_directions == 0 || n_steps == 0 {
        return Err(Error::InvalidArgument("probe needs at least one direction and step".into()));
    }
    let a = &instance.operator;
    let y_dual = a.range().dual();
    let omega_norm = y_dual.norm(&instance.omega_dagger)?;
    if omega_norm == 0.0 {
        return Ok(VarIneqProbe { max_ratio: None, fitted_mu: None, n_pairs: 0, degenerate: true });
    }
    let ps = conjugate_exponent(instance.p);
    let u = y_dual.duality_map(&instance.omega_dagger, ps)?;
    let mut rng = rng_from_seed(seed);
    let (t_lo, t_hi) = (1e-4_f64, 1.0_f64);
    let mut max_ratio = f64::NEG_INFINITY;
    let mut any_ratio = false;
    let mut dists = Vec::new();
    let mut pairings = Vec::new();
    for _ in 0..n_directions {
        let mut v = gaussian_vector(&mut rng, a.range().dim());
        let nv = y_dual.norm(&v)?;
        if nv == 0.0 {
            continue;
        }
        v /= nv;
        for j in 0..n_steps {
            let frac = if n_steps == 1 {
                t_hi
            } else {
                t_lo * (t_hi / t_lo).powf(j as f64 / (n_steps - 1) as f64)
            };
            let t = omega_norm * frac;
            let omega = &instance.omega_dagger + &v * t;
            let dstar = instance
                .regularizer
                .dual_bregman(a, &omega, &instance.omega_dagger, &instance.x_dagger)?
                .max(0.0);
            let lhs = t * v.dot(&u);
            let rhs = phi.eval(dstar);
            if rhs > 0.0 && rhs.is_finite() {
                max_ratio = max_ratio.max(lhs / rhs);
                any_ratio = true;
            }
            if lhs > 0.0 && dstar > 0.0 {
                dists.push(dstar);
                pairings.push(lhs);
            }
        }
    }
    let fitted_mu = if dists.len() >= 3 { Some(fit_loglog(&dists, &pairings)?.slope) } else { None };
    Ok(VarIneqProbe {
        max_ratio: any_ratio.then_some(max_ratio),
        fitted_mu,
        n_pairs: dists.len(),
        degenerate: !any_ratio,
    })
}
