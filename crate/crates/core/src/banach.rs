//! Finite-dimensional `l^r` spaces and their duality structure.
//!
//! A space is described by its dimension and norm exponent `r` (strictly
//! between 1 and infinity, so the space is smooth and strictly convex). The
//! module provides the norm, the duality mapping with gauge `q` (the gradient
//! of `v -> (1/q) ||v||^q`), its inverse from the dual space, Bregman
//! distances of norm powers, and two sampled probes for the convexity
//! constants that enter error bounds.

use rand::Rng;

use crate::rng::{gaussian_vector, rng_from_seed};
use crate::{check_dim, check_finite, Error, Result, Vector};

/// Finite-dimensional `l^r` space with `1 < r < infinity`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LpSpace {
    dim: usize,
    r: f64,
}

/// Structural convexity/smoothness exponents of an `l^r` space together with
/// sampled estimates of the associated constants.
///
/// The powers are exact: `l^r` is `max(r,2)`-convex and `min(r,2)`-smooth.
/// The constants are empirical lower estimates obtained from random samples
/// and are deterministic for a fixed seed.
#[derive(Debug, Clone, Copy)]
pub struct SmoothnessProfile {
    /// Power of convexity: `r` for `r >= 2`, `2` for `1 < r <= 2`.
    pub convexity_power: f64,
    /// Sampled estimate of `K` in `modulus(eps) >= K eps^convexity_power`.
    pub convexity_constant: f64,
    /// Power of smoothness: `r` for `r <= 2`, `2` for `r >= 2`.
    pub smoothness_power: f64,
    /// Sampled infimum of `bregman(y~, y) / ||y~ - y||^convexity_power`.
    pub qconvexity_constant: f64,
}

fn check_exponent(value: f64, what: &'static str) -> Result<()> {
    if value.is_finite() && value > 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidExponent { value, reason: what })
    }
}

/// Conjugate exponent `s / (s - 1)`.
pub fn conjugate_exponent(s: f64) -> f64 {
    s / (s - 1.0)
}

impl LpSpace {
    /// New space of dimension `dim >= 1` with norm exponent `r > 1`.
    pub fn new(dim: usize, r: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("space dimension must be at least 1".into()));
        }
        check_exponent(r, "norm exponent must be finite and > 1")?;
        Ok(LpSpace { dim, r })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn exponent(&self) -> f64 {
        self.r
    }

    /// Exponent `r* = r/(r-1)` of the dual space.
    pub fn dual_exponent(&self) -> f64 {
        conjugate_exponent(self.r)
    }

    /// Dual space `l^{r*}` of the same dimension.
    pub fn dual(&self) -> LpSpace {
        LpSpace { dim: self.dim, r: self.dual_exponent() }
    }

    /// `l^r` norm. Scales by the largest coordinate magnitude so that large
    /// or tiny inputs do not overflow the summed powers.
    pub fn norm(&self, v: &Vector) -> Result<f64> {
        check_dim(v, self.dim)?;
        check_finite(v, "norm")?;
        let m = v.amax();
        if m == 0.0 {
            return Ok(0.0);
        }
        let sum: f64 = v.iter().map(|x| (x.abs() / m).powf(self.r)).sum();
        Ok(m * sum.powf(1.0 / self.r))
    }

    /// Duality mapping with gauge `q > 1`: the gradient of
    /// `v -> (1/q) ||v||_r^q`, with the zero vector mapped to zero.
    ///
    /// Coordinates of the image are
    /// `||v||^{q-r} sign(v_i) |v_i|^{r-1}`; the image lies in the dual space
    /// and satisfies `<w, v> = ||w||_{r*} ||v||_r` and
    /// `||w||_{r*} = ||v||_r^{q-1}`.
    pub fn duality_map(&self, v: &Vector, gauge: f64) -> Result<Vector> {
        check_exponent(gauge, "duality mapping gauge must be finite and > 1")?;
        let n = self.norm(v)?;
        if n == 0.0 {
            return Ok(Vector::zeros(self.dim));
        }
        // Work with the normalized vector so intermediate powers stay bounded.
        let scale = n.powf(gauge - 1.0);
        Ok(Vector::from_iterator(
            self.dim,
            v.iter().map(|&x| {
                let u = x.abs() / n;
                if u == 0.0 {
                    0.0
                } else {
                    x.signum() * scale * u.powf(self.r - 1.0)
                }
            }),
        ))
    }

    /// Duality mapping of the dual space with gauge `q* = q/(q-1)`, which
    /// inverts [`LpSpace::duality_map`]: applied to `w = duality_map(v, q)`
    /// it returns `v`.
    pub fn adjoint_duality_map(&self, omega: &Vector, gauge_star: f64) -> Result<Vector> {
        self.dual().duality_map(omega, gauge_star)
    }

    /// Bregman distance of `(1/q) ||.||^q` from `y` to `y~`:
    /// `(1/q)||y~||^q - (1/q)||y||^q - <duality_map(y, q), y~ - y>`.
    pub fn bregman(&self, y_tilde: &Vector, y: &Vector, gauge: f64) -> Result<f64> {
        let jq = self.duality_map(y, gauge)?;
        let nt = self.norm(y_tilde)?;
        let ny = self.norm(y)?;
        Ok((nt.powf(gauge) - ny.powf(gauge)) / gauge - jq.dot(&(y_tilde - y)))
    }

    /// Symmetric Bregman distance
    /// `<duality_map(y~, q) - duality_map(y, q), y~ - y>`; equals the sum of
    /// the two one-sided distances.
    pub fn sym_bregman(&self, y_tilde: &Vector, y: &Vector, gauge: f64) -> Result<f64> {
        let jt = self.duality_map(y_tilde, gauge)?;
        let jy = self.duality_map(y, gauge)?;
        Ok((jt - jy).dot(&(y_tilde - y)))
    }

    /// Sampled infimum of `bregman(y~, y, q) / ||y~ - y||^q` over random
    /// Gaussian pairs: a statistical upper estimate of the constant `C` in
    /// `C ||y - y~||^q <= bregman(y~, y, q)`.
    ///
    /// Requires `q >= max(r, 2)`; no positive constant exists below that
    /// power. Deterministic for a fixed seed. Near-coincident pairs are
    /// redrawn to keep the ratio numerically meaningful.
    pub fn qconvexity_constant(&self, gauge: f64, nsamples: usize, seed: u64) -> Result<f64> {
        check_exponent(gauge, "convexity gauge must be finite and > 1")?;
        let q_min = self.r.max(2.0);
        if gauge < q_min - 1e-12 {
            return Err(Error::InvalidExponent {
                value: gauge,
                reason: "gauge below the convexity power of the space",
            });
        }
        if nsamples == 0 {
            return Err(Error::EmptySample);
        }
        let mut rng = rng_from_seed(seed);
        let mut inf = f64::INFINITY;
        let mut taken = 0;
        while taken < nsamples {
            let y = gaussian_vector(&mut rng, self.dim);
            let yt = gaussian_vector(&mut rng, self.dim);
            let dist = self.norm(&(&yt - &y))?;
            if dist < 1e-8 {
                continue;
            }
            let ratio = self.bregman(&yt, &y, gauge)? / dist.powf(gauge);
            if ratio < inf {
                inf = ratio;
            }
            taken += 1;
        }
        Ok(inf)
    }

    /// Sampled upper estimate of the modulus of convexity at `eps`:
    /// the infimum of `1 - ||y + y~||/2` over unit vectors with
    /// `||y - y~|| = eps`, `0 < eps <= 2`.
    ///
    /// Pairs at the exact distance are constructed by bisecting along the arc
    /// `t -> normalize(cos(pi t) y + sin(pi t) w)` from `y` to `-y`, on which
    /// the distance to `y` grows continuously from 0 to 2.
    pub fn convexity_modulus_probe(&self, eps: f64, nsamples: usize, seed: u64) -> Result<f64> {
        if !(eps > 0.0 && eps <= 2.0) {
            return Err(Error::InvalidArgument(format!(
                "modulus probe requires 0 < eps <= 2, got {eps}"
            )));
        }
        if nsamples == 0 {
            return Err(Error::EmptySample);
        }
        let mut rng = rng_from_seed(seed);
        let mut inf = f64::INFINITY;
        for _ in 0..nsamples {
            let y = self.random_unit(&mut rng)?;
            let w = self.random_unit(&mut rng)?;
            let arc = |t: f64| -> Result<Vector> {
                let c = (std::f64::consts::PI * t).cos();
                let s = (std::f64::consts::PI * t).sin();
                let raw = &y * c + &w * s;
                let n = self.norm(&raw)?;
                Ok(raw / n)
            };
            let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                if self.norm(&(arc(mid)? - &y))? < eps {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let yt = arc(0.5 * (lo + hi))?;
            let value = 1.0 - self.norm(&(&y + &yt))? / 2.0;
            inf = inf.min(value.clamp(0.0, 1.0));
        }
        Ok(inf)
    }

    /// Structural convexity/smoothness powers with sampled constants; the
    /// convexity constant scans `eps` over a coarse grid, the Bregman
    /// constant samples random pairs. Deterministic for a fixed seed.
    pub fn smoothness_profile(&self, nsamples: usize, seed: u64) -> Result<SmoothnessProfile> {
        let convexity_power = self.r.max(2.0);
        let smoothness_power = self.r.min(2.0);
        let qconvexity_constant = self.qconvexity_constant(convexity_power, nsamples.max(1), seed)?;
        let mut convexity_constant = f64::INFINITY;
        for k in 1..=10 {
            let eps = 0.2 * k as f64;
            let probe = self.convexity_modulus_probe(eps, (nsamples / 10).max(8), seed ^ k)?;
            convexity_constant = convexity_constant.min(probe / eps.powf(convexity_power));
        }
        Ok(SmoothnessProfile {
            convexity_power,
            convexity_constant,
            smoothness_power,
            qconvexity_constant,
        })
    }

    fn random_unit<R: Rng>(&self, rng: &mut R) -> Result<Vector> {
        loop {
            let v = gaussian_vector(rng, self.dim);
            let n = self.norm(&v)?;
            if n > 1e-6 {
                return Ok(v / n);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use proptest::prelude::*;

    fn vec2(a: f64, b: f64) -> Vector {
        Vector::from_vec(vec![a, b])
    }

    #[test]
    fn space_validation() {
        assert!(LpSpace::new(0, 2.0).is_err());
        assert!(LpSpace::new(3, 1.0).is_err());
        assert!(LpSpace::new(3, f64::INFINITY).is_err());
        assert!(LpSpace::new(3, 1.5).is_ok());
    }

    #[test]
    fn dual_exponent_pairs() {
        let x = LpSpace::new(4, 1.5).unwrap();
        assert_relative_eq!(x.dual_exponent(), 3.0);
        assert_relative_eq!(x.dual().dual().exponent(), 1.5, max_relative = 1e-15);
        let h = LpSpace::new(4, 2.0).unwrap();
        assert_relative_eq!(h.dual_exponent(), 2.0);
    }

    #[test]
    fn norm_euclidean_three_four_five() {
        let s = LpSpace::new(2, 2.0).unwrap();
        assert_relative_eq!(s.norm(&vec2(3.0, 4.0)).unwrap(), 5.0);
        assert_eq!(s.norm(&Vector::zeros(2)).unwrap(), 0.0);
    }

    #[test]
    fn norm_cubic_example() {
        let s = LpSpace::new(3, 3.0).unwrap();
        let n = s.norm(&Vector::from_vec(vec![1.0, -2.0, 2.0])).unwrap();
        // |1|^3 + |-2|^3 + |2|^3 = 17, so the norm cubed must be 17.
        assert_relative_eq!(n.powi(3), 17.0, max_relative = 1e-12);
    }

    #[test]
    fn norm_rejects_bad_input() {
        let s = LpSpace::new(2, 2.0).unwrap();
        assert!(s.norm(&Vector::from_vec(vec![1.0])).is_err());
        assert!(s.norm(&vec2(1.0, f64::NAN)).is_err());
    }

    #[test]
    fn duality_map_is_identity_on_hilbert_space() {
        let s = LpSpace::new(2, 2.0).unwrap();
        let v = vec2(3.0, 4.0);
        let w = s.duality_map(&v, 2.0).unwrap();
        assert_relative_eq!(w[0], 3.0, max_relative = 1e-14);
        assert_relative_eq!(w[1], 4.0, max_relative = 1e-14);
    }

    #[test]
    fn duality_map_gauge_three_scales_by_norm() {
        let s = LpSpace::new(2, 2.0).unwrap();
        let v = vec2(1.0, -2.0);
        let w = s.duality_map(&v, 3.0).unwrap();
        let n = 5.0_f64.sqrt();
        assert_relative_eq!(w[0], n, max_relative = 1e-13);
        assert_relative_eq!(w[1], -2.0 * n, max_relative = 1e-13);
    }

    #[test]
    fn duality_map_r4_gauge4_is_componentwise_cube() {
        let s = LpSpace::new(2, 4.0).unwrap();
        let v = vec2(1.0, 2.0);
        let w = s.duality_map(&v, 4.0).unwrap();
        assert_relative_eq!(w[0], 1.0, max_relative = 1e-12);
        assert_relative_eq!(w[1], 8.0, max_relative = 1e-12);
        // The image norm in l^{4/3} equals ||v||_4^3.
        let wn = s.dual().norm(&w).unwrap();
        let vn = s.norm(&v).unwrap();
        assert_relative_eq!(wn, vn.powi(3), max_relative = 1e-12);
    }

    #[test]
    fn duality_map_sends_zero_to_zero() {
        let s = LpSpace::new(3, 1.5).unwrap();
        let w = s.duality_map(&Vector::zeros(3), 1.25_f64.recip() + 1.0).unwrap();
        assert_eq!(w, Vector::zeros(3));
        let w = s.adjoint_duality_map(&Vector::zeros(3), 2.0).unwrap();
        assert_eq!(w, Vector::zeros(3));
    }

    #[test]
    fn adjoint_duality_map_inverts_duality_map() {
        let s = LpSpace::new(3, 3.0).unwrap();
        let gauge = 2.5;
        let v = Vector::from_vec(vec![1.0, -2.0, 0.5]);
        let w = s.duality_map(&v, gauge).unwrap();
        let back = s.adjoint_duality_map(&w, conjugate_exponent(gauge)).unwrap();
        for i in 0..3 {
            assert_relative_eq!(back[i], v[i], max_relative = 1e-10);
        }
    }

    #[test]
    fn bregman_of_equal_points_vanishes() {
        let s = LpSpace::new(2, 3.0).unwrap();
        let v = vec2(0.7, -1.2);
        assert_abs_diff_eq!(s.bregman(&v, &v, 2.5).unwrap(), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(s.sym_bregman(&v, &v, 2.5).unwrap(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn bregman_hilbert_is_half_squared_distance() {
        let s = LpSpace::new(2, 2.0).unwrap();
        let d = s.bregman(&vec2(1.0, 0.0), &vec2(0.0, 1.0), 2.0).unwrap();
        assert_relative_eq!(d, 1.0, max_relative = 1e-13);
        let sym = s.sym_bregman(&vec2(1.0, 0.0), &vec2(0.0, 1.0), 2.0).unwrap();
        assert_relative_eq!(sym, 2.0, max_relative = 1e-13);
    }

    #[test]
    fn bregman_r3_matches_term_by_term_evaluation() {
        let s = LpSpace::new(3, 3.0).unwrap();
        let y = Vector::from_vec(vec![1.0, 2.0, -1.0]);
        let yt = Vector::from_vec(vec![0.5, -1.0, 2.0]);
        // Independent evaluation: norms and mapping coordinates from scratch.
        let ny = (1.0_f64 + 8.0 + 1.0).powf(1.0 / 3.0);
        let nyt = (0.125_f64 + 1.0 + 8.0).powf(1.0 / 3.0);
        let j = [1.0, 4.0, -1.0]; // sign(y_i) |y_i|^2 for r = q = 3
        let pairing: f64 = (0..3).map(|i| j[i] * (yt[i] - y[i])).sum();
        let expected = nyt.powi(3) / 3.0 - ny.powi(3) / 3.0 - pairing;
        assert_relative_eq!(s.bregman(&yt, &y, 3.0).unwrap(), expected, max_relative = 1e-12);
    }

    #[test]
    fn qconvexity_constant_is_half_on_hilbert_space() {
        let s = LpSpace::new(3, 2.0).unwrap();
        let c = s.qconvexity_constant(2.0, 500, 7).unwrap();
        assert_abs_diff_eq!(c, 0.5, epsilon = 1e-6);
    }

    #[test]
    fn qconvexity_constant_r2_gauge3_bounds() {
        let s = LpSpace::new(2, 2.0).unwrap();
        let c = s.qconvexity_constant(3.0, 4000, 11).unwrap();
        assert!(c > 0.0, "constant must be positive, got {c}");
        assert!(c <= 1.0 / 3.0 + 1e-9, "constant exceeds 1/3: {c}");
    }

    #[test]
    fn qconvexity_constant_shrinks_with_more_samples() {
        // With a shared seed the first samples coincide, so the infimum over
        // a longer run can only be smaller or equal.
        let s = LpSpace::new(2, 2.0).unwrap();
        let few = s.qconvexity_constant(3.0, 300, 5).unwrap();
        let many = s.qconvexity_constant(3.0, 3000, 5).unwrap();
        assert!(many <= few + 1e-15, "many={many} few={few}");
    }

    #[test]
    fn qconvexity_constant_rejects_bad_gauge_and_empty_sample() {
        let s = LpSpace::new(2, 3.0).unwrap();
        assert!(s.qconvexity_constant(2.0, 100, 0).is_err()); // below convexity power 3
        assert!(s.qconvexity_constant(3.0, 0, 0).is_err());
    }

    #[test]
    fn modulus_probe_matches_hilbert_closed_form() {
        let s = LpSpace::new(3, 2.0).unwrap();
        // In Hilbert space 1 - ||y + y~||/2 depends only on the distance:
        // the closed form is 1 - sqrt(1 - eps^2/4).
        let at = |eps: f64| s.convexity_modulus_probe(eps, 12, 3).unwrap();
        assert_abs_diff_eq!(at(2.0), 1.0, epsilon = 1e-6);
        assert_abs_diff_eq!(at(1.0), 1.0 - (3.0_f64).sqrt() / 2.0, epsilon = 1e-9);
    }

    #[test]
    fn modulus_probe_is_monotone_on_a_grid() {
        let s = LpSpace::new(2, 3.0).unwrap();
        let grid = [0.3, 0.8, 1.3, 1.8];
        let vals: Vec<f64> =
            grid.iter().map(|&e| s.convexity_modulus_probe(e, 200, 17).unwrap()).collect();
        for w in vals.windows(2) {
            assert!(w[1] >= w[0] - 1e-3, "modulus decreased on grid: {vals:?}");
        }
    }

    #[test]
    fn modulus_probe_rejects_out_of_range_eps() {
        let s = LpSpace::new(2, 2.0).unwrap();
        assert!(s.convexity_modulus_probe(0.0, 10, 0).is_err());
        assert!(s.convexity_modulus_probe(2.5, 10, 0).is_err());
    }

    #[test]
    fn smoothness_profile_powers() {
        let a = LpSpace::new(4, 1.5).unwrap().smoothness_profile(200, 1).unwrap();
        assert_eq!(a.convexity_power, 2.0);
        assert_eq!(a.smoothness_power, 1.5);
        let b = LpSpace::new(4, 3.0).unwrap().smoothness_profile(200, 1).unwrap();
        assert_eq!(b.convexity_power, 3.0);
        assert_eq!(b.smoothness_power, 2.0);
        assert!(b.qconvexity_constant > 0.0);
        assert!(b.convexity_constant >= 0.0);
    }

    /// Exponent pairs exercised by the property suite.
    fn exponent_pairs() -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        for r in [1.5, 2.0, 3.0, 4.0] {
            for q in [1.5, 2.0, 3.0] {
                out.push((r, q));
            }
        }
        out
    }

    fn nonzero_coords(dim: usize) -> impl Strategy<Value = Vec<f64>> {
        // Magnitudes bounded away from zero keep |.|^{r-1} differentiable
        // for r < 2 in the finite-difference checks.
        prop::collection::vec(
            prop_oneof![0.1..10.0_f64, -10.0..-0.1_f64],
            dim..=dim,
        )
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]

        #[test]
        fn duality_map_defining_identities(coords in nonzero_coords(4)) {
            for (r, q) in exponent_pairs() {
                let s = LpSpace::new(4, r).unwrap();
                let v = Vector::from_vec(coords.clone());
                let n = s.norm(&v).unwrap();
                let w = s.duality_map(&v, q).unwrap();
                let wn = s.dual().norm(&w).unwrap();
                let scale = n.powf(q).max(1e-300);
                prop_assert!((w.dot(&v) - wn * n).abs() <= 1e-10 * scale);
                prop_assert!((wn - n.powf(q - 1.0)).abs() <= 1e-10 * n.powf(q - 1.0));
            }
        }

        #[test]
        fn duality_map_is_gauge_homogeneous(coords in nonzero_coords(3), lambda in -10.0..10.0_f64) {
            for (r, q) in exponent_pairs() {
                let s = LpSpace::new(3, r).unwrap();
                let v = Vector::from_vec(coords.clone());
                let lhs = s.duality_map(&(&v * lambda), q).unwrap();
                let rhs = s.duality_map(&v, q).unwrap()
                    * (lambda.abs().powf(q - 1.0) * if lambda < 0.0 { -1.0 } else { 1.0 });
                let scale = s.dual().norm(&rhs).unwrap().max(1e-12);
                prop_assert!((&lhs - &rhs).amax() <= 1e-10 * scale);
            }
        }

        #[test]
        fn duality_map_matches_finite_difference_gradient(coords in nonzero_coords(3)) {
            for (r, q) in exponent_pairs() {
                let s = LpSpace::new(3, r).unwrap();
                let v = Vector::from_vec(coords.clone());
                let w = s.duality_map(&v, q).unwrap();
                let f = |u: &Vector| s.norm(u).unwrap().powf(q) / q;
                // Central differences resolve each component down to roundoff
                // in f, so compare against the gradient's magnitude.
                let scale = w.amax().max(1e-6);
                for i in 0..3 {
                    let h = 1e-5 * v[i].abs().max(1.0);
                    let mut vp = v.clone();
                    let mut vm = v.clone();
                    vp[i] += h;
                    vm[i] -= h;
                    let fd = (f(&vp) - f(&vm)) / (2.0 * h);
                    prop_assert!(
                        (fd - w[i]).abs() <= 1e-6 * scale,
                        "r={} q={} i={} fd={} analytic={}", r, q, i, fd, w[i]
                    );
                }
            }
        }

        #[test]
        fn duality_map_roundtrips_through_dual(coords in nonzero_coords(4)) {
            for (r, q) in exponent_pairs() {
                let s = LpSpace::new(4, r).unwrap();
                let v = Vector::from_vec(coords.clone());
                let w = s.duality_map(&v, q).unwrap();
                let back = s.adjoint_duality_map(&w, conjugate_exponent(q)).unwrap();
                let scale = s.norm(&v).unwrap();
                prop_assert!((&back - &v).amax() <= 1e-10 * scale);
            }
        }

        #[test]
        fn bregman_is_nonnegative_and_detects_coincidence(
            a in nonzero_coords(3),
            b in nonzero_coords(3),
        ) {
            for (r, q) in exponent_pairs() {
                let s = LpSpace::new(3, r).unwrap();
                let y = Vector::from_vec(a.clone());
                let yt = Vector::from_vec(b.clone());
                let d = s.bregman(&yt, &y, q).unwrap();
                let scale = s.norm(&y).unwrap().powf(q) + s.norm(&yt).unwrap().powf(q);
                prop_assert!(d >= -1e-12 * scale.max(1.0));
                if (&yt - &y).amax() > 1e-3 {
                    prop_assert!(d > 0.0, "r={} q={} d={}", r, q, d);
                }
            }
        }

        #[test]
        fn sym_bregman_is_sum_of_one_sided(a in nonzero_coords(3), b in nonzero_coords(3)) {
            for (r, q) in exponent_pairs() {
                let s = LpSpace::new(3, r).unwrap();
                let y = Vector::from_vec(a.clone());
                let yt = Vector::from_vec(b.clone());
                let sym = s.sym_bregman(&yt, &y, q).unwrap();
                let two_sided = s.bregman(&yt, &y, q).unwrap() + s.bregman(&y, &yt, q).unwrap();
                let scale = sym.abs().max(1.0);
                prop_assert!((sym - two_sided).abs() <= 1e-12 * scale);
            }
        }

        #[test]
        fn hilbert_bregman_ratio_is_exactly_half(a in nonzero_coords(3), b in nonzero_coords(3)) {
            let s = LpSpace::new(3, 2.0).unwrap();
            let y = Vector::from_vec(a);
            let yt = Vector::from_vec(b);
            let dist = s.norm(&(&yt - &y)).unwrap();
            prop_assume!(dist > 1e-3);
            let ratio = s.bregman(&yt, &y, 2.0).unwrap() / dist.powi(2);
            prop_assert!((ratio - 0.5).abs() <= 1e-12);
        }
    }
}
