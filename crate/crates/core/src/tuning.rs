//! Regularizer selection driven by the theory predictions: grid evaluation in
//! log space with two refinement rounds around the incumbent.

use crate::error::{Error, Result};
use crate::model::{Prior, ProblemConfig};
use crate::num::{real, Real};
use crate::theory::{predict, TheoryPrediction};

/// What to optimize over `(lambda1, lambda2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TuneObjective<T> {
    /// Minimize the predicted mean squared error.
    MinMse,
    /// Maximize the weighted support score
    /// `omega * phi_on + (1 - omega) * phi_off` with `omega` in [0, 1].
    SupportScore { omega: T },
}

/// Candidate regularizer values per axis (all strictly positive).
#[derive(Debug, Clone, PartialEq)]
pub struct TuneGrid<T> {
    pub lambda1: Vec<T>,
    pub lambda2: Vec<T>,
}

impl<T: Real> TuneGrid<T> {
    /// Log-spaced axis with `count` points from `lo` to `hi` inclusive.
    pub fn log_spaced(lo: T, hi: T, count: usize) -> Result<Vec<T>> {
        if !(lo > T::zero()) || !(hi >= lo) || count == 0 {
            return Err(Error::invalid(
                "grid",
                format!("need 0 < lo <= hi and count >= 1, got [{lo}, {hi}] x {count}"),
            ));
        }
        if count == 1 {
            return Ok(vec![lo]);
        }
        let (ll, lh) = (lo.ln(), hi.ln());
        let step = (lh - ll) / real((count - 1) as f64);
        Ok((0..count)
            .map(|i| (ll + step * real(i as f64)).exp())
            .collect())
    }

    fn validate(&self) -> Result<()> {
        if self.lambda1.is_empty() || self.lambda2.is_empty() {
            return Err(Error::invalid("grid", "axes must be nonempty"));
        }
        for &v in self.lambda1.iter().chain(self.lambda2.iter()) {
            if !(v > T::zero()) || !v.is_finite() {
                return Err(Error::invalid(
                    "grid",
                    format!("grid values must be positive and finite, got {v}"),
                ));
            }
        }
        Ok(())
    }
}

/// One evaluated grid point; `objective` is `None` when the saddle solve
/// failed there.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TunePoint<T> {
    pub lambda1: T,
    pub lambda2: T,
    pub objective: Option<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuneResult<T> {
    pub lambda1_star: T,
    pub lambda2_star: T,
    /// Objective at the incumbent: predicted MSE for [`TuneObjective::MinMse`]
    /// (smaller is better), the weighted support score otherwise (larger is
    /// better).
    pub objective_value: T,
    /// Every evaluation performed, across the initial grid and refinements.
    pub grid_trace: Vec<TunePoint<T>>,
}

fn score<T: Real>(objective: &TuneObjective<T>, p: &TheoryPrediction<T>) -> T {
    match objective {
        TuneObjective::MinMse => p.mse,
        TuneObjective::SupportScore { omega } => {
            *omega * p.phi_on + (T::one() - *omega) * p.phi_off
        }
    }
}

fn better<T: Real>(objective: &TuneObjective<T>, candidate: T, incumbent: T) -> bool {
    match objective {
        TuneObjective::MinMse => candidate < incumbent,
        TuneObjective::SupportScore { .. } => candidate > incumbent,
    }
}

/// Optimizes the regularizer pair against a theory-predicted objective.
///
/// `cfg`'s own `lambda1`/`lambda2` are ignored; every grid point is evaluated
/// with the pair substituted in. After the full grid, two refinement rounds
/// shrink a local log-space grid around the incumbent by a factor of 4 each.
/// Failed saddle solves mark their point invalid and the search continues; an
/// entirely invalid grid is an error.
pub fn tune<T: Real>(
    cfg: &ProblemConfig<T>,
    prior: &Prior<T>,
    objective: TuneObjective<T>,
    grid: &TuneGrid<T>,
) -> Result<TuneResult<T>> {
    grid.validate()?;
    if let TuneObjective::SupportScore { omega } = objective {
        if !(omega >= T::zero() && omega <= T::one()) {
            return Err(Error::invalid(
                "omega",
                format!("must lie in [0, 1], got {omega}"),
            ));
        }
    }

    let mut trace = Vec::new();
    let mut incumbent: Option<(T, T, T)> = None;

    let eval_grid = |l1s: &[T], l2s: &[T],
                         trace: &mut Vec<TunePoint<T>>,
                         incumbent: &mut Option<(T, T, T)>| {
        for &l1 in l1s {
            for &l2 in l2s {
                let mut point_cfg = *cfg;
                point_cfg.lambda1 = l1;
                point_cfg.lambda2 = l2;
                let obj = predict(&point_cfg, prior).ok().map(|p| score(&objective, &p));
                trace.push(TunePoint {
                    lambda1: l1,
                    lambda2: l2,
                    objective: obj,
                });
                if let Some(val) = obj {
                    let take = match incumbent {
                        None => true,
                        Some((_, _, best)) => better(&objective, val, *best),
                    };
                    if take {
                        *incumbent = Some((l1, l2, val));
                    }
                }
            }
        }
    };

    eval_grid(&grid.lambda1, &grid.lambda2, &mut trace, &mut incumbent);
    let (mut l1_star, mut l2_star, mut best) =
        incumbent.ok_or(Error::AllGridPointsInvalid)?;

    // log-space half-widths of the initial grid
    let half_width = |axis: &[T]| -> T {
        let lo = axis.iter().cloned().fold(T::infinity(), T::min);
        let hi = axis.iter().cloned().fold(T::zero(), T::max);
        (hi.ln() - lo.ln()) * real(0.5)
    };
    let (w1, w2) = (half_width(&grid.lambda1), half_width(&grid.lambda2));

    let refined_axis = |center: T, w: T| -> Vec<T> {
        let c = center.ln();
        let step = w * real(0.5);
        (-2i32..=2)
            .map(|i| (c + step * real(i as f64)).exp())
            .collect()
    };

    let shrink = real::<T>(4.0);
    let mut w1r = w1 / shrink;
    let mut w2r = w2 / shrink;
    for _ in 0..2 {
        if w1r <= T::zero() && w2r <= T::zero() {
            break;
        }
        let axis1 = refined_axis(l1_star, w1r);
        let axis2 = refined_axis(l2_star, w2r);
        let mut inc = Some((l1_star, l2_star, best));
        eval_grid(&axis1, &axis2, &mut trace, &mut inc);
        let (a, b, c) = inc.unwrap();
        l1_star = a;
        l2_star = b;
        best = c;
        w1r = w1r / shrink;
        w2r = w2r / shrink;
    }

    Ok(TuneResult {
        lambda1_star: l1_star,
        lambda2_star: l2_star,
        objective_value: best,
        grid_trace: trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base_config() -> ProblemConfig<f64> {
        ProblemConfig {
            delta: 0.7,
            kappa: 0.1,
            eps2: 0.1,
            sigma_z2: 0.2,
            lambda1: 0.1, // overwritten by the grid
            lambda2: 0.1,
            box_lo: 0.0,
            box_hi: 1.0,
            xi: 1e-3,
        }
    }

    #[test]
    fn single_point_grid_echoes_the_point() {
        let grid = TuneGrid {
            lambda1: vec![0.3],
            lambda2: vec![0.7],
        };
        let res = tune(&base_config(), &Prior::bernoulli(), TuneObjective::MinMse, &grid).unwrap();
        assert_eq!(res.lambda1_star, 0.3);
        assert_eq!(res.lambda2_star, 0.7);
        let mut cfg = base_config();
        cfg.lambda1 = 0.3;
        cfg.lambda2 = 0.7;
        let direct = predict(&cfg, &Prior::bernoulli()).unwrap().mse;
        assert!((res.objective_value - direct).abs() < 1e-12);
    }

    #[test]
    fn incumbent_is_best_of_trace_and_matches_reprediction() {
        let grid = TuneGrid {
            lambda1: TuneGrid::log_spaced(0.05, 2.0, 5).unwrap(),
            lambda2: TuneGrid::log_spaced(0.05, 2.0, 5).unwrap(),
        };
        let res = tune(&base_config(), &Prior::bernoulli(), TuneObjective::MinMse, &grid).unwrap();
        for p in &res.grid_trace {
            if let Some(v) = p.objective {
                assert!(res.objective_value <= v + 1e-15);
            }
        }
        let mut cfg = base_config();
        cfg.lambda1 = res.lambda1_star;
        cfg.lambda2 = res.lambda2_star;
        let re = predict(&cfg, &Prior::bernoulli()).unwrap().mse;
        assert!((res.objective_value - re).abs() < 1e-12);
    }

    #[test]
    fn support_score_weights_reduce_to_components() {
        let grid = TuneGrid {
            lambda1: vec![0.1, 0.3],
            lambda2: vec![0.1],
        };
        let prior = Prior::bernoulli();
        for (omega, pick_on) in [(0.0, false), (1.0, true)] {
            let res = tune(
                &base_config(),
                &prior,
                TuneObjective::SupportScore { omega },
                &grid,
            )
            .unwrap();
            let mut cfg = base_config();
            cfg.lambda1 = res.lambda1_star;
            cfg.lambda2 = res.lambda2_star;
            let p = predict(&cfg, &prior).unwrap();
            let expect = if pick_on { p.phi_on } else { p.phi_off };
            assert!((res.objective_value - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn pure_on_support_objective_prefers_small_lambda1() {
        // phi_on decreases in lambda1, so omega = 1 picks the smallest value
        let grid = TuneGrid {
            lambda1: TuneGrid::log_spaced(0.5, 10.0, 6).unwrap(),
            lambda2: vec![0.1],
        };
        let res = tune(
            &base_config(),
            &Prior::bernoulli(),
            TuneObjective::SupportScore { omega: 1.0 },
            &grid,
        )
        .unwrap();
        // refinement may move slightly below the coarse grid minimum
        assert!(res.lambda1_star <= grid.lambda1[1]);
    }

    #[test]
    fn rejects_bad_inputs() {
        let grid = TuneGrid {
            lambda1: vec![],
            lambda2: vec![0.1],
        };
        assert!(tune(&base_config(), &Prior::bernoulli(), TuneObjective::MinMse, &grid).is_err());
        let grid = TuneGrid {
            lambda1: vec![-0.1],
            lambda2: vec![0.1],
        };
        assert!(tune(&base_config(), &Prior::bernoulli(), TuneObjective::MinMse, &grid).is_err());
        let grid = TuneGrid {
            lambda1: vec![0.1],
            lambda2: vec![0.1],
        };
        let bad = TuneObjective::SupportScore { omega: 1.5 };
        assert!(tune(&base_config(), &Prior::bernoulli(), bad, &grid).is_err());
    }
}
