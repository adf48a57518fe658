//! Problem configuration, signal priors, random instance generation under the
//! additive measurement-uncertainty model, and empirical metrics.
//!
//! An instance consists of a sparse signal `x0`, a true measurement matrix `H`
//! with iid `N(0, 1/n)` entries, an error matrix `Omega` of the same law, and
//! noise `z`. Observations are `y = H*x0 + z`, while the estimator only sees
//! `A = gamma*H + eps*Omega` with `gamma = sqrt(1 - eps2)`.

use rand::distributions::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::num::{real, Real};

/// All scalar parameters of the model and the estimator.
///
/// `sigma_z2` and the signal-to-noise ratio are linked by
/// `snr = kappa / sigma_z2`; use [`ProblemConfig::with_snr`] to specify the
/// noise level through the SNR instead.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProblemConfig<T> {
    /// Measurement ratio `m/n`.
    pub delta: T,
    /// Sparsity ratio `k/n`, in (0, 1).
    pub kappa: T,
    /// Variance of the measurement-matrix error, in [0, 1].
    pub eps2: T,
    /// Noise variance.
    pub sigma_z2: T,
    /// L1 regularization weight.
    pub lambda1: T,
    /// L2 regularization weight.
    pub lambda2: T,
    /// Lower box bound (`<= 0`, may be `-inf`).
    pub box_lo: T,
    /// Upper box bound (`>= 0`, may be `+inf`).
    pub box_hi: T,
    /// Hard threshold for support decisions.
    pub xi: T,
}

impl<T: Real> ProblemConfig<T> {
    /// Replaces `sigma_z2` so that `kappa / sigma_z2 == snr`.
    pub fn with_snr(mut self, snr: T) -> Result<Self> {
        if !(snr > T::zero()) || !snr.is_finite() {
            return Err(Error::invalid("snr", format!("must be positive and finite, got {snr}")));
        }
        self.sigma_z2 = self.kappa / snr;
        Ok(self)
    }

    /// `gamma = sqrt(1 - eps2)`, the weight of the true matrix inside `A`.
    pub fn gamma(&self) -> T {
        (T::one() - self.eps2).sqrt()
    }

    /// `eps = sqrt(eps2)`, the weight of the error matrix inside `A`.
    pub fn eps(&self) -> T {
        self.eps2.sqrt()
    }

    pub fn snr(&self) -> T {
        self.kappa / self.sigma_z2
    }

    /// Returns a copy with the box constraint removed (standard elastic net).
    pub fn without_box(mut self) -> Self {
        self.box_lo = T::neg_infinity();
        self.box_hi = T::infinity();
        self
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |field: &'static str, v: T| -> Result<()> {
            if !(v > T::zero()) || !v.is_finite() {
                return Err(Error::invalid(field, format!("must be positive and finite, got {v}")));
            }
            Ok(())
        };
        pos("delta", self.delta)?;
        if !(self.kappa > T::zero() && self.kappa < T::one()) {
            return Err(Error::invalid(
                "kappa",
                format!("must lie strictly in (0, 1), got {}", self.kappa),
            ));
        }
        if !(self.eps2 >= T::zero() && self.eps2 <= T::one()) {
            return Err(Error::invalid(
                "eps2",
                format!("must lie in [0, 1], got {}", self.eps2),
            ));
        }
        pos("sigma_z2", self.sigma_z2)?;
        pos("lambda1", self.lambda1)?;
        pos("lambda2", self.lambda2)?;
        pos("xi", self.xi)?;
        if self.box_lo.is_nan() || self.box_hi.is_nan() {
            return Err(Error::invalid("box", "bounds must not be NaN"));
        }
        if !(self.box_lo <= T::zero()) {
            return Err(Error::invalid("l", format!("must be <= 0, got {}", self.box_lo)));
        }
        if !(self.box_hi >= T::zero()) {
            return Err(Error::invalid("u", format!("must be >= 0, got {}", self.box_hi)));
        }
        if !(self.box_lo < self.box_hi) {
            return Err(Error::invalid(
                "box",
                format!("need l < u, got [{}, {}]", self.box_lo, self.box_hi),
            ));
        }
        Ok(())
    }
}

/// Distribution of the nonzero signal entries: finite discrete atoms
/// `(value, probability)`. The full entry law mixes in the zero atom with
/// weight `1 - kappa`.
#[derive(Debug, Clone, PartialEq)]
pub struct Prior<T> {
    atoms: Vec<(T, T)>,
}

impl<T: Real> Prior<T> {
    pub fn new(atoms: Vec<(T, T)>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::invalid("prior.atoms", "need at least one atom"));
        }
        let mut total = T::zero();
        for &(v, p) in &atoms {
            if !v.is_finite() || v == T::zero() {
                return Err(Error::invalid(
                    "prior.atoms",
                    format!("atom values must be finite and nonzero, got {v}"),
                ));
            }
            if !(p >= T::zero()) || !p.is_finite() {
                return Err(Error::invalid(
                    "prior.atoms",
                    format!("atom probabilities must be nonnegative, got {p}"),
                ));
            }
            total = total + p;
        }
        if (total - T::one()).abs() > real(1e-9) {
            return Err(Error::invalid(
                "prior.atoms",
                format!("probabilities must sum to 1, got {total}"),
            ));
        }
        Ok(Self { atoms })
    }

    /// The unit-atom prior used throughout the sparse-Bernoulli experiments:
    /// nonzero entries equal 1.
    pub fn bernoulli() -> Self {
        Self {
            atoms: vec![(T::one(), T::one())],
        }
    }

    pub fn atoms(&self) -> &[(T, T)] {
        &self.atoms
    }

    /// Second moment of the nonzero-entry law.
    pub fn second_moment(&self) -> T {
        self.atoms
            .iter()
            .fold(T::zero(), |acc, &(v, p)| acc + p * v * v)
    }

    /// Rescales atom values so the nonzero-entry law has unit second moment.
    pub fn normalized_unit_second_moment(&self) -> Self {
        let scale = self.second_moment().sqrt().recip();
        Self {
            atoms: self.atoms.iter().map(|&(v, p)| (v * scale, p)).collect(),
        }
    }

    /// Checks every atom value lies inside the box (vacuous for infinite
    /// bounds).
    pub fn check_within_box(&self, lo: T, hi: T) -> Result<()> {
        for &(v, _) in &self.atoms {
            if v < lo || v > hi {
                return Err(Error::invalid(
                    "prior.atoms",
                    format!("atom value {v} lies outside the box [{lo}, {hi}]"),
                ));
            }
        }
        Ok(())
    }

    fn sample_value<R: Rng>(&self, rng: &mut R) -> T {
        let r: T = real(rng.gen::<f64>());
        let mut acc = T::zero();
        for &(v, p) in &self.atoms {
            acc = acc + p;
            if r < acc {
                return v;
            }
        }
        self.atoms[self.atoms.len() - 1].0
    }
}

/// One random problem realization, reproducible from `seed`.
#[derive(Debug, Clone)]
pub struct Instance<T> {
    pub n: usize,
    pub m: usize,
    pub x0: Vec<T>,
    pub h: Mat<T>,
    pub omega: Mat<T>,
    /// Observed matrix `gamma*H + eps*Omega`.
    pub a: Mat<T>,
    /// Observations `H*x0 + z`.
    pub y: Vec<T>,
    pub z: Vec<T>,
    pub seed: u64,
}

/// Draws a problem instance. Deterministic given `(cfg, prior, n, seed)`.
///
/// Sampling order from a single ChaCha20 stream seeded with `seed`: support
/// positions (partial Fisher-Yates), nonzero values, `H` row-major, `Omega`
/// row-major, then `z`. Gaussians come from `rand_distr::StandardNormal`,
/// which pins byte-level reproducibility within one build.
pub fn generate_instance<T: Real>(
    cfg: &ProblemConfig<T>,
    prior: &Prior<T>,
    n: usize,
    seed: u64,
) -> Result<Instance<T>>
where
    StandardNormal: Distribution<T>,
{
    cfg.validate()?;
    prior.check_within_box(cfg.box_lo, cfg.box_hi)?;
    if n < 2 {
        return Err(Error::invalid("n", format!("need n >= 2, got {n}")));
    }
    let nf = real::<T>(n as f64);
    let k = (cfg.kappa * nf)
        .round()
        .to_usize()
        .ok_or_else(|| Error::invalid("kappa", "round(kappa*n) out of range"))?;
    if k < 1 {
        return Err(Error::invalid("kappa", format!("round(kappa*n) = 0 at n = {n}")));
    }
    if k >= n {
        return Err(Error::invalid(
            "kappa",
            format!("round(kappa*n) = {k} leaves no off-support entries at n = {n}"),
        ));
    }
    let m = (cfg.delta * nf)
        .round()
        .to_usize()
        .ok_or_else(|| Error::invalid("delta", "round(delta*n) out of range"))?;
    if m < 1 {
        return Err(Error::invalid("delta", format!("round(delta*n) = 0 at n = {n}")));
    }

    let mut rng = ChaCha20Rng::seed_from_u64(seed);

    // Support: first k entries of a partial Fisher-Yates shuffle.
    let mut idx: Vec<usize> = (0..n).collect();
    for i in 0..k {
        let j = rng.gen_range(i..n);
        idx.swap(i, j);
    }
    let mut x0 = vec![T::zero(); n];
    for &i in &idx[..k] {
        x0[i] = prior.sample_value(&mut rng);
    }

    let scale = nf.sqrt().recip();
    let draw_matrix = |rng: &mut ChaCha20Rng| {
        let mut mat = Mat::zeros(m, n);
        for i in 0..m {
            for v in mat.row_mut(i) {
                let g: T = rng.sample(StandardNormal);
                *v = g * scale;
            }
        }
        mat
    };
    let h = draw_matrix(&mut rng);
    let omega = draw_matrix(&mut rng);

    let sigma_z = cfg.sigma_z2.sqrt();
    let z: Vec<T> = (0..m)
        .map(|_| {
            let g: T = rng.sample(StandardNormal);
            g * sigma_z
        })
        .collect();

    let (gamma, eps) = (cfg.gamma(), cfg.eps());
    let mut a = Mat::zeros(m, n);
    for i in 0..m {
        let (hr, or) = (h.row(i), omega.row(i));
        for (j, v) in a.row_mut(i).iter_mut().enumerate() {
            *v = gamma * hr[j] + eps * or[j];
        }
    }

    let mut y = vec![T::zero(); m];
    h.matvec(&x0, &mut y);
    for (yi, zi) in y.iter_mut().zip(&z) {
        *yi = *yi + *zi;
    }

    Ok(Instance {
        n,
        m,
        x0,
        h,
        omega,
        a,
        y,
        z,
        seed,
    })
}

/// Per-entry mean squared error `(1/n) * sum((xhat_i - x0_i)^2)`.
pub fn empirical_mse<T: Real>(xhat: &[T], x0: &[T]) -> Result<T> {
    if xhat.len() != x0.len() {
        return Err(Error::DimensionMismatch {
            context: "empirical_mse",
            expected: x0.len(),
            got: xhat.len(),
        });
    }
    let mut acc = T::zero();
    for (a, b) in xhat.iter().zip(x0) {
        let d = *a - *b;
        acc = acc + d * d;
    }
    Ok(acc / real(xhat.len() as f64))
}

/// Per-entry rates of successful support recovery.
///
/// `phi_on` is the fraction of on-support indices with `|xhat_i| >= xi`;
/// `phi_off` the fraction of off-support indices with `|xhat_i| <= xi`.
/// Boundary values count for both, matching the indicator definitions.
pub fn empirical_support<T: Real>(xhat: &[T], x0: &[T], xi: T) -> Result<(T, T)> {
    if xhat.len() != x0.len() {
        return Err(Error::DimensionMismatch {
            context: "empirical_support",
            expected: x0.len(),
            got: xhat.len(),
        });
    }
    if !(xi > T::zero()) {
        return Err(Error::invalid("xi", format!("must be positive, got {xi}")));
    }
    let k = x0.iter().filter(|v| **v != T::zero()).count();
    if k == 0 || k == x0.len() {
        return Err(Error::DegenerateSupport {
            nonzeros: k,
            len: x0.len(),
        });
    }
    let mut on_hits = 0usize;
    let mut off_hits = 0usize;
    for (xh, x) in xhat.iter().zip(x0) {
        if *x != T::zero() {
            if xh.abs() >= xi {
                on_hits += 1;
            }
        } else if xh.abs() <= xi {
            off_hits += 1;
        }
    }
    Ok((
        real::<T>(on_hits as f64) / real(k as f64),
        real::<T>(off_hits as f64) / real((x0.len() - k) as f64),
    ))
}

/// Aggregated Monte-Carlo metrics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmpiricalSummary<T> {
    pub mse: T,
    pub phi_on: T,
    pub phi_off: T,
    pub trials: usize,
    pub std_err_mse: T,
    pub std_err_on: T,
    pub std_err_off: T,
}

impl<T: Real> EmpiricalSummary<T> {
    /// Means and standard errors (sample std / sqrt(trials)) of per-trial
    /// metrics. With a single trial the standard errors are zero.
    pub fn from_trials(mse: &[T], phi_on: &[T], phi_off: &[T]) -> Result<Self> {
        let trials = mse.len();
        if trials == 0 || phi_on.len() != trials || phi_off.len() != trials {
            return Err(Error::invalid("trials", "need equal, nonzero metric counts"));
        }
        let stats = |xs: &[T]| -> (T, T) {
            let nf = real::<T>(trials as f64);
            let mean = xs.iter().fold(T::zero(), |a, &x| a + x) / nf;
            if trials < 2 {
                return (mean, T::zero());
            }
            let var = xs
                .iter()
                .fold(T::zero(), |a, &x| a + (x - mean) * (x - mean))
                / real::<T>((trials - 1) as f64);
            (mean, (var / nf).sqrt())
        };
        let (m, se_m) = stats(mse);
        let (on, se_on) = stats(phi_on);
        let (off, se_off) = stats(phi_off);
        Ok(Self {
            mse: m,
            phi_on: on,
            phi_off: off,
            trials,
            std_err_mse: se_m,
            std_err_on: se_on,
            std_err_off: se_off,
        })
    }
}
