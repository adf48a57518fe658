//! Scalar building blocks: the saturated soft-thresholding operator, its
//! value function, and standard-normal helpers.
//!
//! The saturated soft threshold is the proximal map of `lambda*|x|` restricted
//! to a box `[l, u]` with `l <= 0 <= u`. Bounds are extended reals: with
//! `l = -inf` and `u = +inf` the operator reduces to the conventional soft
//! threshold, so the unconstrained elastic net shares this code path.

use crate::error::{Error, Result};
use crate::num::{real, Real};

/// Threshold level and box bounds for [`eta`] / [`e_val`].
///
/// Invariants: `lambda >= 0` and finite, `l <= 0 <= u`, `l < u`. Either bound
/// may be infinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdParams<T> {
    lambda: T,
    l: T,
    u: T,
}

impl<T: Real> ThresholdParams<T> {
    pub fn new(lambda: T, l: T, u: T) -> Result<Self> {
        if !(lambda >= T::zero()) || !lambda.is_finite() {
            return Err(Error::invalid(
                "lambda",
                format!("threshold must be finite and nonnegative, got {lambda}"),
            ));
        }
        if l.is_nan() || u.is_nan() {
            return Err(Error::invalid("box", "bounds must not be NaN"));
        }
        if !(l <= T::zero()) {
            return Err(Error::invalid("l", format!("lower bound must be <= 0, got {l}")));
        }
        if !(u >= T::zero()) {
            return Err(Error::invalid("u", format!("upper bound must be >= 0, got {u}")));
        }
        if !(l < u) {
            return Err(Error::invalid("box", format!("need l < u, got [{l}, {u}]")));
        }
        Ok(Self { lambda, l, u })
    }

    /// Threshold with an unconstrained box (conventional soft threshold).
    pub fn unbounded(lambda: T) -> Result<Self> {
        Self::new(lambda, T::neg_infinity(), T::infinity())
    }

    pub fn lambda(&self) -> T {
        self.lambda
    }

    pub fn lower(&self) -> T {
        self.l
    }

    pub fn upper(&self) -> T {
        self.u
    }
}

/// Saturated soft threshold: the minimizer over `x` in `[l, u]` of
/// `(1/2)(x - a)^2 + lambda*|x|`.
///
/// Nondecreasing and 1-Lipschitz in `a`; the result always lies in `[l, u]`.
/// Ties at branch boundaries resolve to the earlier branch; adjacent branches
/// agree in value there, so the choice is observationally irrelevant.
#[inline]
pub fn eta<T: Real>(a: T, p: &ThresholdParams<T>) -> T {
    let (lambda, l, u) = (p.lambda, p.l, p.u);
    if a > u + lambda {
        u
    } else if a > lambda {
        a - lambda
    } else if a >= -lambda {
        T::zero()
    } else if a > l - lambda {
        a + lambda
    } else {
        l
    }
}

/// Value function of the saturated soft threshold: the minimum over `x` in
/// `[l, u]` of `(1/2)(x - a)^2 + lambda*|x|`.
///
/// Satisfies `e_val(a, p) == 0.5*(eta(a, p) - a)^2 + lambda*|eta(a, p)|`.
#[inline]
pub fn e_val<T: Real>(a: T, p: &ThresholdParams<T>) -> T {
    let (lambda, l, u) = (p.lambda, p.l, p.u);
    let half = real::<T>(0.5);
    if a > u + lambda {
        half * (u - a) * (u - a) + lambda * u
    } else if a > lambda {
        lambda * a - half * lambda * lambda
    } else if a >= -lambda {
        half * a * a
    } else if a > l - lambda {
        -(lambda * a) - half * lambda * lambda
    } else {
        half * (l - a) * (l - a) - lambda * l
    }
}

/// Standard-normal upper-tail probability `P[N(0,1) > x]`.
///
/// Computed through the complementary error function, which keeps relative
/// accuracy in the far tail.
#[inline]
pub fn q_func<T: Real>(x: T) -> T {
    real::<T>(0.5) * (x * real::<T>(std::f64::consts::FRAC_1_SQRT_2)).erfc()
}

/// Standard-normal density.
#[inline]
pub fn gauss_pdf<T: Real>(x: T) -> T {
    // 1/sqrt(2*pi)
    real::<T>(0.398_942_280_401_432_7) * (-real::<T>(0.5) * x * x).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn p64(lambda: f64, l: f64, u: f64) -> ThresholdParams<f64> {
        ThresholdParams::new(lambda, l, u).unwrap()
    }

    #[test]
    fn eta_branch_examples() {
        assert_eq!(eta(0.0, &p64(0.5, -1.0, 1.0)), 0.0);
        assert_eq!(eta(2.0, &p64(0.3, -1.0, 1.0)), 1.0);
        assert!((eta(0.8, &p64(0.3, -1.0, 1.0)) - 0.5).abs() < 1e-15);
        assert_eq!(eta(-0.5, &p64(0.2, -0.1, 1.0)), -0.1);
    }

    #[test]
    fn e_val_branch_examples() {
        assert_eq!(e_val(0.0, &p64(0.5, -1.0, 1.0)), 0.0);
        assert!((e_val(2.0, &p64(0.3, -1.0, 1.0)) - 0.8).abs() < 1e-15);
        assert!((e_val(0.8, &p64(0.3, -1.0, 1.0)) - 0.195).abs() < 1e-15);
    }

    #[test]
    fn q_func_basics() {
        assert_eq!(q_func(0.0_f64), 0.5);
        assert!(q_func(40.0_f64) < 1e-300);
        // Independent oracle: composite Simpson quadrature of the density
        // over [1, 10] plus a negligible tail. Resolution keeps the rule's
        // error well under 1e-12.
        let (a, b, steps) = (1.0_f64, 10.0_f64, 200_000_usize);
        let h = (b - a) / steps as f64;
        let mut acc = gauss_pdf(a) + gauss_pdf(b);
        for i in 1..steps {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * gauss_pdf(a + i as f64 * h);
        }
        let oracle = acc * h / 3.0;
        assert!((q_func(1.0_f64) - oracle).abs() < 1e-12);
        assert!((q_func(1.0_f64) - 0.158_655_253_931_457_05).abs() < 1e-12);
    }

    #[test]
    fn q_func_symmetry() {
        for &x in &[0.0, 0.3, 1.0, 2.5, 7.0] {
            assert!((q_func(x) + q_func(-x) - 1.0_f64).abs() < 1e-15);
        }
    }

    #[test]
    fn consistency_identity_and_monotonicity() {
        let mut rng = ChaCha20Rng::seed_from_u64(42);
        for _ in 0..20_000 {
            let lambda = rng.gen_range(0.0..2.0);
            let l = -rng.gen_range(0.0..2.0f64);
            let u = rng.gen_range(1e-6..2.0);
            let p = p64(lambda, l, u);
            let a = rng.gen_range(-4.0..4.0);
            let x = eta(a, &p);
            assert!(x >= l && x <= u);
            let direct = 0.5 * (x - a) * (x - a) + lambda * x.abs();
            assert!(
                (e_val(a, &p) - direct).abs() <= 1e-12,
                "identity failed at a={a} p={p:?}"
            );
            // nondecreasing and 1-Lipschitz
            let a2 = a + rng.gen_range(0.0..0.5);
            let x2 = eta(a2, &p);
            assert!(x2 >= x - 1e-15);
            assert!(x2 - x <= a2 - a + 1e-15);
        }
    }

    #[test]
    fn reduces_to_soft_threshold_with_infinite_box() {
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        let p = ThresholdParams::unbounded(0.7_f64).unwrap();
        for _ in 0..1000 {
            let a = rng.gen_range(-5.0..5.0f64);
            let soft = a.signum() * (a.abs() - 0.7).max(0.0);
            assert_eq!(eta(a, &p), soft);
        }
    }

    #[test]
    fn grid_search_oracle_small() {
        // Desk-size version of the full-scale oracle in the acceptance suite.
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        for _ in 0..200 {
            let lambda = rng.gen_range(0.0..1.5);
            let l = -rng.gen_range(1e-3..1.5f64);
            let u = rng.gen_range(1e-3..1.5);
            let p = p64(lambda, l, u);
            let a = rng.gen_range(-3.0..3.0);
            // Grid anchored at 0 so the kink and both endpoints are grid
            // points; value error is then purely quadratic in the step.
            let step = 1e-4;
            let k_lo = (l / step).ceil() as i64;
            let k_hi = (u / step).floor() as i64;
            let mut best_x = l;
            let mut best_f = f64::INFINITY;
            let mut consider = |x: f64| {
                let f = 0.5 * (x - a) * (x - a) + lambda * x.abs();
                if f < best_f {
                    best_f = f;
                    best_x = x;
                }
            };
            consider(l);
            for k in k_lo..=k_hi {
                consider(k as f64 * step);
            }
            consider(u);
            assert!((eta(a, &p) - best_x).abs() <= 1e-4);
            assert!(e_val(a, &p) <= best_f + 1e-12);
            assert!(best_f - e_val(a, &p) <= 1e-6 + 0.5 * step * step);
        }
    }

    #[test]
    fn rejects_invalid_params() {
        assert!(ThresholdParams::new(-0.1, -1.0, 1.0f64).is_err());
        assert!(ThresholdParams::new(0.1, 0.5, 1.0f64).is_err());
        assert!(ThresholdParams::new(0.1, -1.0, -0.5f64).is_err());
        assert!(ThresholdParams::new(f64::NAN, -1.0, 1.0).is_err());
        assert!(ThresholdParams::new(0.1, f64::NAN, 1.0).is_err());
        assert!(ThresholdParams::new(f64::INFINITY, -1.0, 1.0).is_err());
    }

    #[test]
    fn works_in_f32() {
        let p = ThresholdParams::new(0.3f32, -1.0, 1.0).unwrap();
        assert_eq!(eta(2.0f32, &p), 1.0);
        assert!((q_func(0.0f32) - 0.5).abs() < 1e-7);
    }
}
