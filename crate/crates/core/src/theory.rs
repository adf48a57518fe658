//! Deterministic asymptotic theory: the scalar min-max objective, its
//! saddle point, and the derived predictions (mean squared error and
//! support-recovery probabilities).
//!
//! Everything reduces to expectations of piecewise-quadratic functions of a
//! Gaussian. Those are computed two independent ways:
//!
//! * an exact path built on truncated-Gaussian moments over the five branches
//!   of the saturated soft threshold (the default), and
//! * a breakpoint-splitting composite Gauss-Legendre quadrature fallback that
//!   evaluates the kernels directly against the normal density
//!   ([`expected_e_quadrature`], [`upsilon_quadrature`]).
//!
//! The two paths share no integration code, so their agreement is a genuine
//! cross-check of both.

use crate::error::{Error, Result};
use crate::kernels::{e_val, eta, gauss_pdf, q_func, ThresholdParams};
use crate::model::{Prior, ProblemConfig};
use crate::num::{real, Real};

/// Default tolerance on the max-norm of the saddle objective's gradient.
pub const DEFAULT_SADDLE_TOL: f64 = 1e-10;

/// Solution of the scalar min-max problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SaddlePoint<T> {
    pub tau: T,
    pub beta: T,
    /// `theta = beta/(2*tau) + lambda2`.
    pub theta: T,
    /// Objective value at the saddle.
    pub d_value: T,
    /// Max of the two stationarity residuals `|dD/dtau|`, `|dD/dbeta|`.
    pub residual: T,
}

/// Asymptotic predictions derived from a saddle point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoryPrediction<T> {
    pub saddle: SaddlePoint<T>,
    pub mse: T,
    /// Correlation functional `E[eta(...) * X0]`.
    pub upsilon: T,
    pub phi_on: T,
    pub phi_off: T,
}

// ---------------------------------------------------------------------------
// Scalarization: the effective per-entry parameters at a given (tau, beta).
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy)]
struct Scalarization<T> {
    theta: T,
    /// Coefficient of a nonzero atom inside the threshold argument.
    c_x: T,
    /// Coefficient of the Gaussian inside the threshold argument.
    s: T,
    /// Effective threshold level.
    lambda: T,
}

impl<T: Real> Scalarization<T> {
    fn at(tau: T, beta: T, cfg: &ProblemConfig<T>) -> Result<Self> {
        if !(tau > T::zero()) || !tau.is_finite() {
            return Err(Error::invalid("tau", format!("must be positive, got {tau}")));
        }
        if !(beta > T::zero()) || !beta.is_finite() {
            return Err(Error::invalid("beta", format!("must be positive, got {beta}")));
        }
        let two = real::<T>(2.0);
        let theta = beta / (two * tau) + cfg.lambda2;
        Ok(Self {
            theta,
            c_x: cfg.gamma() * beta / (two * theta * tau),
            s: beta / (two * theta),
            lambda: cfg.lambda1 / (two * theta),
        })
    }

    fn threshold(&self, cfg: &ProblemConfig<T>) -> Result<ThresholdParams<T>> {
        ThresholdParams::new(self.lambda, cfg.box_lo, cfg.box_hi)
    }
}

// ---------------------------------------------------------------------------
// Truncated standard-normal moments and piecewise-quadratic expectations.
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy)]
struct Moments<T> {
    m0: T,
    m1: T,
    m2: T,
    m3: T,
}

fn trunc_moments<T: Real>(h1: T, h2: T) -> Moments<T> {
    let pdf_weighted = |h: T, scale: T| {
        if h.is_finite() {
            scale * gauss_pdf(h)
        } else {
            T::zero()
        }
    };
    let p1 = gauss_pdf(h1);
    let p2 = gauss_pdf(h2);
    let m0 = q_func(h1) - q_func(h2);
    let m1 = p1 - p2;
    let m2 = m0 + pdf_weighted(h1, h1) - pdf_weighted(h2, h2);
    let two = real::<T>(2.0);
    let m3 = two * m1 + pdf_weighted(h1, h1 * h1) - pdf_weighted(h2, h2 * h2);
    Moments { m0, m1, m2, m3 }
}

/// One branch of a piecewise-quadratic function of the threshold argument:
/// `p2*a^2 + p1*a + p0` on the interval `(lo, hi)`.
#[derive(Debug, Clone, Copy)]
struct Piece<T> {
    lo: T,
    hi: T,
    p2: T,
    p1: T,
    p0: T,
}

#[derive(Debug, Clone)]
struct PiecewiseQuad<T> {
    pieces: Vec<Piece<T>>,
}

impl<T: Real> PiecewiseQuad<T> {
    /// Branches of the value function `e`.
    fn value_fn(p: &ThresholdParams<T>) -> Self {
        let (lam, l, u) = (p.lambda(), p.lower(), p.upper());
        let half = real::<T>(0.5);
        let mut pieces = Vec::with_capacity(5);
        if l.is_finite() {
            pieces.push(Piece {
                lo: T::neg_infinity(),
                hi: l - lam,
                p2: half,
                p1: -l,
                p0: half * l * l - lam * l,
            });
        }
        pieces.push(Piece {
            lo: l - lam,
            hi: -lam,
            p2: T::zero(),
            p1: -lam,
            p0: -half * lam * lam,
        });
        pieces.push(Piece {
            lo: -lam,
            hi: lam,
            p2: half,
            p1: T::zero(),
            p0: T::zero(),
        });
        pieces.push(Piece {
            lo: lam,
            hi: u + lam,
            p2: T::zero(),
            p1: lam,
            p0: -half * lam * lam,
        });
        if u.is_finite() {
            pieces.push(Piece {
                lo: u + lam,
                hi: T::infinity(),
                p2: half,
                p1: -u,
                p0: half * u * u + lam * u,
            });
        }
        Self { pieces }
    }

    /// Branches of the minimizer `eta`.
    fn minimizer(p: &ThresholdParams<T>) -> Self {
        let (lam, l, u) = (p.lambda(), p.lower(), p.upper());
        let mut pieces = Vec::with_capacity(5);
        if l.is_finite() {
            pieces.push(Piece {
                lo: T::neg_infinity(),
                hi: l - lam,
                p2: T::zero(),
                p1: T::zero(),
                p0: l,
            });
        }
        pieces.push(Piece {
            lo: l - lam,
            hi: -lam,
            p2: T::zero(),
            p1: T::one(),
            p0: lam,
        });
        // eta = 0 on [-lam, lam]: contributes nothing
        pieces.push(Piece {
            lo: lam,
            hi: u + lam,
            p2: T::zero(),
            p1: T::one(),
            p0: -lam,
        });
        if u.is_finite() {
            pieces.push(Piece {
                lo: u + lam,
                hi: T::infinity(),
                p2: T::zero(),
                p1: T::zero(),
                p0: u,
            });
        }
        Self { pieces }
    }

    /// Branches of `|eta|`.
    fn minimizer_abs(p: &ThresholdParams<T>) -> Self {
        let (lam, l, u) = (p.lambda(), p.lower(), p.upper());
        let mut pieces = Vec::with_capacity(5);
        if l.is_finite() {
            pieces.push(Piece {
                lo: T::neg_infinity(),
                hi: l - lam,
                p2: T::zero(),
                p1: T::zero(),
                p0: -l,
            });
        }
        pieces.push(Piece {
            lo: l - lam,
            hi: -lam,
            p2: T::zero(),
            p1: -T::one(),
            p0: -lam,
        });
        pieces.push(Piece {
            lo: lam,
            hi: u + lam,
            p2: T::zero(),
            p1: T::one(),
            p0: -lam,
        });
        if u.is_finite() {
            pieces.push(Piece {
                lo: u + lam,
                hi: T::infinity(),
                p2: T::zero(),
                p1: T::zero(),
                p0: u,
            });
        }
        Self { pieces }
    }

    /// Branches of `a - eta(a)`, the derivative of `e` in its argument.
    fn residual(p: &ThresholdParams<T>) -> Self {
        let (lam, l, u) = (p.lambda(), p.lower(), p.upper());
        let mut pieces = Vec::with_capacity(5);
        if l.is_finite() {
            pieces.push(Piece {
                lo: T::neg_infinity(),
                hi: l - lam,
                p2: T::zero(),
                p1: T::one(),
                p0: -l,
            });
        }
        pieces.push(Piece {
            lo: l - lam,
            hi: -lam,
            p2: T::zero(),
            p1: T::zero(),
            p0: -lam,
        });
        pieces.push(Piece {
            lo: -lam,
            hi: lam,
            p2: T::zero(),
            p1: T::one(),
            p0: T::zero(),
        });
        pieces.push(Piece {
            lo: lam,
            hi: u + lam,
            p2: T::zero(),
            p1: T::zero(),
            p0: lam,
        });
        if u.is_finite() {
            pieces.push(Piece {
                lo: u + lam,
                hi: T::infinity(),
                p2: T::zero(),
                p1: T::one(),
                p0: -u,
            });
        }
        Self { pieces }
    }

    #[cfg(test)]
    fn eval(&self, a: T) -> T {
        self.pieces
            .iter()
            .filter(|p| a > p.lo && a <= p.hi)
            .map(|p| p.p2 * a * a + p.p1 * a + p.p0)
            .fold(T::zero(), |acc, v| acc + v)
    }

    /// `E[f(c + s*H)]` for standard normal `H`.
    fn expect(&self, c: T, s: T) -> T {
        let two = real::<T>(2.0);
        let mut acc = T::zero();
        for p in &self.pieces {
            let h1 = (p.lo - c) / s;
            let h2 = (p.hi - c) / s;
            if !(h1 < h2) {
                continue;
            }
            let m = trunc_moments(h1, h2);
            let ea = c * m.m0 + s * m.m1;
            let ea2 = c * c * m.m0 + two * c * s * m.m1 + s * s * m.m2;
            acc = acc + p.p2 * ea2 + p.p1 * ea + p.p0 * m.m0;
        }
        acc
    }

    /// `E[f(c + s*H) * H]`.
    fn expect_times_h(&self, c: T, s: T) -> T {
        let two = real::<T>(2.0);
        let mut acc = T::zero();
        for p in &self.pieces {
            let h1 = (p.lo - c) / s;
            let h2 = (p.hi - c) / s;
            if !(h1 < h2) {
                continue;
            }
            let m = trunc_moments(h1, h2);
            let eah = c * m.m1 + s * m.m2;
            let ea2h = c * c * m.m1 + two * c * s * m.m2 + s * s * m.m3;
            acc = acc + p.p2 * ea2h + p.p1 * eah + p.p0 * m.m1;
        }
        acc
    }
}

/// Expectation of `f` over the full entry law: the zero atom with weight
/// `1 - kappa` plus the prior atoms with weight `kappa * p`.
fn mixture_expect<T: Real>(
    pw: &PiecewiseQuad<T>,
    sc: &Scalarization<T>,
    cfg: &ProblemConfig<T>,
    prior: &Prior<T>,
    times_h: bool,
) -> T {
    let one_pt = |c: T| {
        if times_h {
            pw.expect_times_h(c, sc.s)
        } else {
            pw.expect(c, sc.s)
        }
    };
    let mut acc = (T::one() - cfg.kappa) * one_pt(T::zero());
    for &(v, p) in prior.atoms() {
        acc = acc + cfg.kappa * p * one_pt(sc.c_x * v);
    }
    acc
}

// ---------------------------------------------------------------------------
// The min-max objective and its gradient.
// ---------------------------------------------------------------------------

/// `E[e(c_x*X0 + s*H; lambda, l, u)]` over the full entry law.
pub fn expected_e<T: Real>(
    tau: T,
    beta: T,
    cfg: &ProblemConfig<T>,
    prior: &Prior<T>,
) -> Result<T> {
    cfg.validate()?;
    let sc = Scalarization::at(tau, beta, cfg)?;
    let pw = PiecewiseQuad::value_fn(&sc.threshold(cfg)?);
    Ok(mixture_expect(&pw, &sc, cfg, prior, false))
}

/// The deterministic min-max objective.
pub fn d_objective<T: Real>(
    tau: T,
    beta: T,
    cfg: &ProblemConfig<T>,
    prior: &Prior<T>,
) -> Result<T> {
    cfg.validate()?;
    let sc = Scalarization::at(tau, beta, cfg)?;
    let (two, four) = (real::<T>(2.0), real::<T>(4.0));
    let theta = sc.theta;
    let gamma = cfg.gamma();
    let kappa2 = cfg.kappa * prior.second_moment();
    let pw = PiecewiseQuad::value_fn(&sc.threshold(cfg)?);
    let e_term = mixture_expect(&pw, &sc, cfg, prior, false);
    Ok(beta * tau * cfg.delta / two
        + beta * cfg.sigma_z2 / (two * tau)
        - beta * beta * (theta + T::one()) / (four * theta)
        + (beta / (two * tau) - beta * beta * gamma * gamma / (four * theta * tau * tau)) * kappa2
        + two * theta * e_term)
}

/// Analytic gradient `(dD/dtau, dD/dbeta)`.
///
/// The expectation term differentiates through the envelope identities
/// `de/da = a - eta(a)` and `de/dlambda = |eta(a)|`, so every ingredient is
/// again a piecewise-quadratic Gaussian expectation.
pub fn d_gradient<T: Real>(
    tau: T,
    beta: T,
    cfg: &ProblemConfig<T>,
    prior: &Prior<T>,
) -> Result<(T, T)> {
    cfg.validate()?;
    let sc = Scalarization::at(tau, beta, cfg)?;
    let (two, four) = (real::<T>(2.0), real::<T>(4.0));
    let theta = sc.theta;
    let gamma = cfg.gamma();
    let kappa2 = cfg.kappa * prior.second_moment();
    let sigma2 = cfg.sigma_z2;

    let theta_tau = -beta / (two * tau * tau);
    let theta_beta = (two * tau).recip();

    // deterministic part
    let p_tau = beta * cfg.delta / two - beta * sigma2 / (two * tau * tau)
        + beta * beta * theta_tau / (four * theta * theta)
        - kappa2 * beta / (two * tau * tau)
        + kappa2 * gamma * gamma * beta * beta / four
            * (theta_tau / (theta * theta * tau * tau) + two / (theta * tau * tau * tau));
    let p_beta = tau * cfg.delta / two + sigma2 / (two * tau) - beta / two
        - beta / (two * theta)
        + beta * beta * theta_beta / (four * theta * theta)
        + kappa2 / (two * tau)
        - kappa2 * gamma * gamma * beta / (two * theta * tau * tau)
        + kappa2 * gamma * gamma * beta * beta * theta_beta / (four * theta * theta * tau * tau);

    // chain rule through the scalarization
    let dcx_tau = -gamma * beta * (theta_tau * tau + theta) / (two * theta * theta * tau * tau);
    let ds_tau = -beta * theta_tau / (two * theta * theta);
    let dlam_tau = -cfg.lambda1 * theta_tau / (two * theta * theta);
    let dcx_beta = gamma * (theta - beta * theta_beta) / (two * theta * theta * tau);
    let ds_beta = (theta - beta * theta_beta) / (two * theta * theta);
    let dlam_beta = -cfg.lambda1 * theta_beta / (two * theta * theta);

    let thr = sc.threshold(cfg)?;
    let e_pw = PiecewiseQuad::value_fn(&thr);
    let resid_pw = PiecewiseQuad::residual(&thr);
    let abs_pw = PiecewiseQuad::minimizer_abs(&thr);

    let e_term = mixture_expect(&e_pw, &sc, cfg, prior, false);
    let resid_h = mixture_expect(&resid_pw, &sc, cfg, prior, true);
    let abs_term = mixture_expect(&abs_pw, &sc, cfg, prior, false);
    // E[(a - eta) * X0]: the zero atom drops out through the X0 factor.
    let mut resid_x0 = T::zero();
    for &(v, p) in prior.atoms() {
        resid_x0 = resid_x0 + cfg.kappa * p * v * resid_pw.expect(sc.c_x * v, sc.s);
    }

    let de_tau = dcx_tau * resid_x0 + ds_tau * resid_h + dlam_tau * abs_term;
    let de_beta = dcx_beta * resid_x0 + ds_beta * resid_h + dlam_beta * abs_term;

    let d_tau = p_tau + two * theta_tau * e_term + two * theta * de_tau;
    let d_beta = p_beta + two * theta_beta * e_term + two * theta * de_beta;
    Ok((d_tau, d_beta))
}

// ---------------------------------------------------------------------------
// Saddle-point search.
// ---------------------------------------------------------------------------

const BRACKET_LO: f64 = 1e-4;
const BRACKET_HI: f64 = 1e2;
const MAX_EXPANSIONS: usize = 60;
const MAX_BISECTIONS: usize = 300;

/// Maximizes `beta -> D(tau, beta)` by bisection on the (strictly decreasing
/// through the maximizer) partial derivative.
fn inner_max_beta<T: Real>(
    tau: T,
    cfg: &ProblemConfig<T>,
    prior: &Prior<T>,
    tol: T,
) -> Result<(T, T)> {
    let d_beta = |b: T| -> Result<T> { Ok(d_gradient(tau, b, cfg, prior)?.1) };
    let mut lo = real::<T>(BRACKET_LO);
    let mut hi = real::<T>(BRACKET_HI);
    let mut expansions = 0;
    while d_beta(lo)? <= T::zero() {
        lo = lo * real(0.5);
        expansions += 1;
        if expansions > MAX_EXPANSIONS {
            return Err(Error::BracketExhausted {
                variable: "beta",
                expansions,
                endpoint: lo.to_f64().unwrap_or(f64::NAN),
            });
        }
    }
    expansions = 0;
    while d_beta(hi)? >= T::zero() {
        hi = hi * real(2.0);
        expansions += 1;
        if expansions > MAX_EXPANSIONS {
            return Err(Error::BracketExhausted {
                variable: "beta",
                expansions,
                endpoint: hi.to_f64().unwrap_or(f64::NAN),
            });
        }
    }
    let mut mid = (lo + hi) * real(0.5);
    let mut g = d_beta(mid)?;
    for _ in 0..MAX_BISECTIONS {
        if g.abs() <= tol || (hi - lo) <= T::epsilon() * mid.max(T::one()) {
            break;
        }
        if g > T::zero() {
            lo = mid;
        } else {
            hi = mid;
        }
        mid = (lo + hi) * real(0.5);
        g = d_beta(mid)?;
    }
    Ok((mid, g))
}

/// Finds the saddle `(tau*, beta*)` with `||grad D||_inf <= tol`.
///
/// The inner concave maximization over `beta` runs at a tighter tolerance so
/// the outer derivative (exact by the envelope theorem at the inner maximizer)
/// stays reliable. The outer search bisects the marginal derivative over a
/// geometrically expanded bracket; the positivity of both coordinates is a
/// hard postcondition.
pub fn solve_saddle<T: Real>(
    cfg: &ProblemConfig<T>,
    prior: &Prior<T>,
    tol: T,
) -> Result<SaddlePoint<T>> {
    cfg.validate()?;
    if !(tol > T::zero()) {
        return Err(Error::invalid("tol", format!("must be positive, got {tol}")));
    }
    let inner_tol = (tol * real(1e-3)).max(real(1e-15));
    let marginal = |t: T| -> Result<(T, T)> {
        let (beta, _) = inner_max_beta(t, cfg, prior, inner_tol)?;
        let (d_tau, _) = d_gradient(t, beta, cfg, prior)?;
        Ok((d_tau, beta))
    };

    let mut lo = real::<T>(BRACKET_LO);
    let mut hi = real::<T>(BRACKET_HI);
    let mut expansions = 0;
    while marginal(lo)?.0 >= T::zero() {
        lo = lo * real(0.5);
        expansions += 1;
        if expansions > MAX_EXPANSIONS {
            return Err(Error::BracketExhausted {
                variable: "tau",
                expansions,
                endpoint: lo.to_f64().unwrap_or(f64::NAN),
            });
        }
    }
    expansions = 0;
    while marginal(hi)?.0 <= T::zero() {
        hi = hi * real(2.0);
        expansions += 1;
        if expansions > MAX_EXPANSIONS {
            return Err(Error::BracketExhausted {
                variable: "tau",
                expansions,
                endpoint: hi.to_f64().unwrap_or(f64::NAN),
            });
        }
    }

    let mut tau = (lo + hi) * real(0.5);
    let (mut g_tau, mut beta) = marginal(tau)?;
    for _ in 0..MAX_BISECTIONS {
        if g_tau.abs() <= tol || (hi - lo) <= T::epsilon() * tau.max(T::one()) {
            break;
        }
        if g_tau < T::zero() {
            lo = tau;
        } else {
            hi = tau;
        }
        tau = (lo + hi) * real(0.5);
        let m = marginal(tau)?;
        g_tau = m.0;
        beta = m.1;
    }

    let (d_tau, d_beta) = d_gradient(tau, beta, cfg, prior)?;
    let residual = d_tau.abs().max(d_beta.abs());
    if residual > tol {
        return Err(Error::SaddleFailure(format!(
            "stationarity residual {residual} exceeds tolerance {tol} at tau={tau}, beta={beta}"
        )));
    }
    // positivity is guaranteed in theory; enforce it as a hard postcondition
    if !(tau > T::zero()) || !(beta > T::zero()) {
        return Err(Error::SaddleFailure(format!(
            "nonpositive saddle coordinates: tau={tau}, beta={beta}"
        )));
    }
    let theta = beta / (real::<T>(2.0) * tau) + cfg.lambda2;
    Ok(SaddlePoint {
        tau,
        beta,
        theta,
        d_value: d_objective(tau, beta, cfg, prior)?,
        residual,
    })
}

// ---------------------------------------------------------------------------
// Predictions.
// ---------------------------------------------------------------------------

fn check_saddle<T: Real>(sp: &SaddlePoint<T>) -> Result<()> {
    if !(sp.tau > T::zero()) || !(sp.beta > T::zero()) || !sp.tau.is_finite() || !sp.beta.is_finite()
    {
        return Err(Error::invalid(
            "saddle",
            format!("invalid saddle point tau={}, beta={}", sp.tau, sp.beta),
        ));
    }
    Ok(())
}

/// Correlation functional `E[eta(c_x*X0 + s*H; lambda, l, u) * X0]` at the
/// saddle. The zero atom contributes nothing through the `X0` factor.
pub fn upsilon<T: Real>(
    sp: &SaddlePoint<T>,
    cfg: &ProblemConfig<T>,
    prior: &Prior<T>,
) -> Result<T> {
    check_saddle(sp)?;
    let sc = Scalarization::at(sp.tau, sp.beta, cfg)?;
    let pw = PiecewiseQuad::minimizer(&sc.threshold(cfg)?);
    let mut acc = T::zero();
    for &(v, p) in prior.atoms() {
        acc = acc + cfg.kappa * p * v * pw.expect(sc.c_x * v, sc.s);
    }
    Ok(acc)
}

/// Support-recovery probabilities at the saddle.
///
/// Monotonicity of the threshold map turns each event into at most two
/// Gaussian tails: `|eta| >= xi` happens through the upper crossing
/// `a >= xi + lambda` (active iff `xi <= u`) or the lower crossing
/// `a <= -xi - lambda` (active iff `xi <= -l`). `phi_off` is the complement
/// for the zero atom. When `xi` exceeds both box magnitudes, `phi_on` is
/// identically zero; that is a valid (if degenerate) prediction, not an
/// error.
pub fn support_probabilities<T: Real>(
    sp: &SaddlePoint<T>,
    cfg: &ProblemConfig<T>,
    prior: &Prior<T>,
) -> Result<(T, T)> {
    check_saddle(sp)?;
    cfg.validate()?;
    let sc = Scalarization::at(sp.tau, sp.beta, cfg)?;
    let (lam, s) = (sc.lambda, sc.s);
    let xi = cfg.xi;
    let (l, u) = (cfg.box_lo, cfg.box_hi);

    let mut phi_on = T::zero();
    for &(v, p) in prior.atoms() {
        let c = sc.c_x * v;
        let mut hit = T::zero();
        if xi <= u {
            hit = hit + q_func((xi + lam - c) / s);
        }
        if xi <= -l {
            hit = hit + q_func((c + xi + lam) / s);
        }
        phi_on = phi_on + p * hit;
    }

    let mut phi_off = T::one();
    if u > xi {
        phi_off = phi_off - q_func((xi + lam) / s);
    }
    if -l > xi {
        phi_off = phi_off - q_func((xi + lam) / s);
    }
    Ok((phi_on, phi_off))
}

/// True when the support threshold exceeds both box magnitudes, making
/// `phi_on` identically zero. Callers may surface this as a diagnostic.
pub fn xi_unreachable<T: Real>(cfg: &ProblemConfig<T>) -> bool {
    cfg.xi > cfg.box_hi.max(-cfg.box_lo)
}

/// Full prediction at the default saddle tolerance.
pub fn predict<T: Real>(cfg: &ProblemConfig<T>, prior: &Prior<T>) -> Result<TheoryPrediction<T>> {
    predict_with_tol(cfg, prior, real(DEFAULT_SADDLE_TOL))
}

pub fn predict_with_tol<T: Real>(
    cfg: &ProblemConfig<T>,
    prior: &Prior<T>,
    tol: T,
) -> Result<TheoryPrediction<T>> {
    let saddle = solve_saddle(cfg, prior, tol)?;
    let ups = upsilon(&saddle, cfg, prior)?;
    let two = real::<T>(2.0);
    let mse =
        cfg.delta * saddle.tau * saddle.tau - cfg.sigma_z2 + two * (cfg.gamma() - T::one()) * ups;
    if mse < T::zero() {
        return Err(Error::NegativePrediction {
            value: mse.to_f64().unwrap_or(f64::NAN),
        });
    }
    let (phi_on, phi_off) = support_probabilities(&saddle, cfg, prior)?;
    Ok(TheoryPrediction {
        saddle,
        mse,
        upsilon: ups,
        phi_on,
        phi_off,
    })
}

/// Predicted mean squared error (full prediction; read the `mse` field).
pub fn predict_mse<T: Real>(cfg: &ProblemConfig<T>, prior: &Prior<T>) -> Result<TheoryPrediction<T>> {
    predict(cfg, prior)
}

/// Predicted support-recovery probabilities `(phi_on, phi_off)`.
pub fn predict_support<T: Real>(cfg: &ProblemConfig<T>, prior: &Prior<T>) -> Result<(T, T)> {
    let p = predict(cfg, prior)?;
    Ok((p.phi_on, p.phi_off))
}

// ---------------------------------------------------------------------------
// Closed forms for the unit-atom (sparse-Bernoulli) prior. These are
// cross-checks of the generic machinery, asserted in the regime with l = 0
// and 0 < xi <= u where they are valid.
// ---------------------------------------------------------------------------

/// `E[(a0 + a1*H) * 1{h1 < H < h2}]`.
fn trunc_linear<T: Real>(a0: T, a1: T, h1: T, h2: T) -> T {
    a0 * (q_func(h1) - q_func(h2)) + a1 * (gauss_pdf(h1) - gauss_pdf(h2))
}

/// Closed form of the correlation functional for the unit-atom prior with a
/// finite box, written directly in terms of Q-function tails and truncated
/// first moments. The mean shift `c = gamma*beta/(2*theta*tau)` plays the
/// role of the shift constant throughout.
pub fn upsilon_bernoulli_closed<T: Real>(
    sp: &SaddlePoint<T>,
    cfg: &ProblemConfig<T>,
) -> Result<T> {
    check_saddle(sp)?;
    if !cfg.box_lo.is_finite() || !cfg.box_hi.is_finite() {
        return Err(Error::invalid("box", "closed form requires finite bounds"));
    }
    let sc = Scalarization::at(sp.tau, sp.beta, cfg)?;
    let (two, c) = (real::<T>(2.0), sc.c_x);
    let (theta, beta, l1) = (sc.theta, sp.beta, cfg.lambda1);
    let (l, u, kappa) = (cfg.box_lo, cfg.box_hi, cfg.kappa);

    let sat_hi = u * q_func((two * theta * (u - c) + l1) / beta);
    let sat_lo = l * q_func((two * theta * (c - l) + l1) / beta);
    let mid_pos = trunc_linear(
        c - l1 / (two * theta),
        beta / (two * theta),
        (l1 - two * theta * c) / beta,
        (two * theta * (u - c) + l1) / beta,
    );
    let mid_neg = trunc_linear(
        c + l1 / (two * theta),
        beta / (two * theta),
        (two * theta * (l - c) - l1) / beta,
        (-two * theta * c - l1) / beta,
    );
    Ok(kappa * (sat_hi + sat_lo + mid_pos + mid_neg))
}

/// Closed-form support probabilities for the unit-atom prior in the `l = 0`,
/// `0 < xi <= u` regime:
/// `phi_on = Q((2*theta*xi + lambda1)/beta - gamma/tau)` and
/// `phi_off = 1 - Q((2*theta*xi + lambda1)/beta)`.
pub fn support_bernoulli_closed<T: Real>(
    sp: &SaddlePoint<T>,
    cfg: &ProblemConfig<T>,
) -> Result<(T, T)> {
    check_saddle(sp)?;
    if cfg.box_lo != T::zero() || !(cfg.xi > T::zero() && cfg.xi <= cfg.box_hi) {
        return Err(Error::invalid(
            "box",
            "closed form requires l = 0 and 0 < xi <= u",
        ));
    }
    let two = real::<T>(2.0);
    let arg = (two * sp.theta * cfg.xi + cfg.lambda1) / sp.beta;
    let phi_on = q_func(arg - cfg.gamma() / sp.tau);
    let phi_off = T::one() - q_func(arg);
    Ok((phi_on, phi_off))
}

// ---------------------------------------------------------------------------
// Quadrature fallback: breakpoint-splitting composite Gauss-Legendre against
// the explicit normal density. Shares no code with the moment-based path.
// ---------------------------------------------------------------------------

/// Integration window: the integrands grow at most quadratically, so mass
/// beyond this many standard deviations is far below every tolerance in use.
const QUAD_WINDOW: f64 = 12.0;
const QUAD_PANEL_WIDTH: f64 = 0.5;
const QUAD_ORDER: usize = 16;

/// Gauss-Legendre nodes and weights on [-1, 1] by Newton iteration on the
/// Legendre recurrence.
fn gauss_legendre<T: Real>(order: usize) -> Vec<(T, T)> {
    let nf = order as f64;
    let mut rule = Vec::with_capacity(order);
    for i in 0..order {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        for _ in 0..100 {
            // Legendre polynomial and derivative at x
            let (mut p0, mut p1) = (1.0_f64, x);
            for k in 2..=order {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let dp = nf * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (mut p0, mut p1) = (1.0_f64, x);
        for k in 2..=order {
            let kf = k as f64;
            let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
            p0 = p1;
            p1 = p2;
        }
        let dp = nf * (x * p1 - p0) / (x * x - 1.0);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        rule.push((real::<T>(x), real::<T>(w)));
    }
    rule
}

/// `E[f(H)]` for standard normal `H`, splitting panels at `breakpoints` so
/// each panel sees a smooth integrand. Uses at least 201 nodes.
fn gauss_expect_split<T: Real>(f: impl Fn(T) -> T, breakpoints: &[T]) -> T {
    let w = real::<T>(QUAD_WINDOW);
    let mut cuts: Vec<T> = vec![-w];
    let mut sorted: Vec<T> = breakpoints
        .iter()
        .copied()
        .filter(|b| b.is_finite() && b.abs() < w)
        .collect();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    for b in sorted {
        if b > *cuts.last().unwrap() {
            cuts.push(b);
        }
    }
    cuts.push(w);

    let rule = gauss_legendre::<T>(QUAD_ORDER);
    let half = real::<T>(0.5);
    let mut acc = T::zero();
    for seg in cuts.windows(2) {
        let (lo, hi) = (seg[0], seg[1]);
        let len = (hi - lo).to_f64().unwrap_or(0.0);
        let panels = (len / QUAD_PANEL_WIDTH).ceil().max(1.0) as usize;
        let pw = (hi - lo) / real(panels as f64);
        for k in 0..panels {
            let a = lo + pw * real(k as f64);
            let mid = a + half * pw;
            let scale = half * pw;
            for &(node, weight) in &rule {
                let h = mid + scale * node;
                acc = acc + weight * scale * f(h) * gauss_pdf(h);
            }
        }
    }
    acc
}

/// Quadrature route for [`expected_e`]; agreement between the two is part of
/// the acceptance suite.
pub fn expected_e_quadrature<T: Real>(
    tau: T,
    beta: T,
    cfg: &ProblemConfig<T>,
    prior: &Prior<T>,
) -> Result<T> {
    cfg.validate()?;
    let sc = Scalarization::at(tau, beta, cfg)?;
    let thr = sc.threshold(cfg)?;
    let kinks = [
        cfg.box_lo - sc.lambda,
        -sc.lambda,
        sc.lambda,
        cfg.box_hi + sc.lambda,
    ];
    let one_atom = |c: T| {
        let bp: Vec<T> = kinks.iter().map(|&k| (k - c) / sc.s).collect();
        gauss_expect_split(|h| e_val(c + sc.s * h, &thr), &bp)
    };
    let mut acc = (T::one() - cfg.kappa) * one_atom(T::zero());
    for &(v, p) in prior.atoms() {
        acc = acc + cfg.kappa * p * one_atom(sc.c_x * v);
    }
    Ok(acc)
}

/// Quadrature route for [`upsilon`].
pub fn upsilon_quadrature<T: Real>(
    sp: &SaddlePoint<T>,
    cfg: &ProblemConfig<T>,
    prior: &Prior<T>,
) -> Result<T> {
    check_saddle(sp)?;
    let sc = Scalarization::at(sp.tau, sp.beta, cfg)?;
    let thr = sc.threshold(cfg)?;
    let kinks = [
        cfg.box_lo - sc.lambda,
        -sc.lambda,
        sc.lambda,
        cfg.box_hi + sc.lambda,
    ];
    let mut acc = T::zero();
    for &(v, p) in prior.atoms() {
        let c = sc.c_x * v;
        let bp: Vec<T> = kinks.iter().map(|&k| (k - c) / sc.s).collect();
        let e = gauss_expect_split(|h| eta(c + sc.s * h, &thr), &bp);
        acc = acc + cfg.kappa * p * v * e;
    }
    Ok(acc)
}
