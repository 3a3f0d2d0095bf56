//! Multistart Nelder-Mead over the scheme parameters.
//!
//! Coordinates: `x_kl = ln(w_kl / sigma_Nk^2)` and `rho_k in [0, 1)` with
//! `a_k = rho_k * min(sqrt(w_k1 w_k2), sigma_Nk^2)`. Every trial point is
//! mapped onto the feasible set before evaluation: description noises of a
//! violated side receiver are shrunk by a common factor until its distortion
//! meets the target, then all noises are shrunk together for the central
//! receiver. All distortions decrease monotonically along these paths, so the
//! factor is found by bisection and every evaluated point is feasible.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::{distortions, sum_rate, sum_rate_closed_form, DistortionTriple, RateBreakdown, SchemeParams};
use super::ABSENT_DESCRIPTION_RATIO;
use crate::gaussmodel::SourceModel;
use crate::{Constraint, Error, Result};

const RHO_MAX: f64 = 1.0 - 1e-9;
const BISECTION_STEPS: usize = 80;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OptimizeOptions {
    /// Number of Nelder-Mead starts.
    pub starts: usize,
    /// Convergence tolerance on the objective spread of a simplex.
    pub tol: f64,
    pub seed: u64,
    /// Evaluation budget per start.
    pub max_evals: usize,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        OptimizeOptions { starts: 16, tol: 1e-7, seed: 0, max_evals: 6000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimizedScheme {
    pub params: SchemeParams,
    pub rates: RateBreakdown,
    /// `(delta_1, delta_2, delta_0)` achieved by `params`.
    pub distortions: [f64; 3],
}

struct Problem<'a> {
    model: &'a SourceModel,
    targets: &'a DistortionTriple,
}

impl Problem<'_> {
    fn log_bounds(&self) -> (f64, f64) {
        (-(ABSENT_DESCRIPTION_RATIO.ln()), ABSENT_DESCRIPTION_RATIO.ln())
    }

    fn decode(&self, theta: &[f64; 6]) -> SchemeParams {
        let (lo, hi) = self.log_bounds();
        let mut w = [0.0; 4];
        for (i, slot) in w.iter_mut().enumerate() {
            let k = i / 2 + 1;
            *slot = self.model.noise(k) * theta[i].clamp(lo, hi).exp();
        }
        let a = |k: usize| {
            let (w1, w2) = (w[2 * (k - 1)], w[2 * (k - 1) + 1]);
            theta[3 + k].clamp(0.0, RHO_MAX) * (w1 * w2).sqrt().min(self.model.noise(k))
        };
        SchemeParams { w11: w[0], w12: w[1], w21: w[2], w22: w[3], a1: a(1), a2: a(2) }
    }

    fn out_of_box(&self, theta: &[f64; 6]) -> f64 {
        let (lo, hi) = self.log_bounds();
        let mut excess = 0.0;
        for &x in &theta[..4] {
            excess += (lo - x).max(0.0) + (x - hi).max(0.0);
        }
        for &r in &theta[4..] {
            excess += (-r).max(0.0) + (r - RHO_MAX).max(0.0);
        }
        excess
    }

    fn receiver_ok(&self, p: &SchemeParams, l: usize) -> bool {
        distortions(self.model, p)[l - 1] <= self.targets.get(l)
    }

    fn central_ok(&self, p: &SchemeParams) -> bool {
        distortions(self.model, p)[2] <= self.targets.d0
    }

    /// Largest factor in `(0, 1]` for which `ok(scale(p, factor))` holds.
    fn shrink(&self, p: SchemeParams, scale: impl Fn(&SchemeParams, f64) -> SchemeParams, ok: impl Fn(&SchemeParams) -> bool) -> SchemeParams {
        if ok(&p) {
            return p;
        }
        let (mut good, mut bad) = (0.0_f64, 1.0_f64);
        for _ in 0..BISECTION_STEPS {
            let mid = 0.5 * (good + bad);
            if ok(&scale(&p, mid)) {
                good = mid;
            } else {
                bad = mid;
            }
        }
        scale(&p, good)
    }

    fn restore(&self, p: SchemeParams) -> SchemeParams {
        let mut p = p;
        for l in 1..=2 {
            p = self.shrink(
                p,
                |q, f| {
                    let mut q = *q;
                    if l == 1 {
                        q.w11 *= f;
                        q.w21 *= f;
                    } else {
                        q.w12 *= f;
                        q.w22 *= f;
                    }
                    q.a1 *= f.sqrt();
                    q.a2 *= f.sqrt();
                    q
                },
                |q| self.receiver_ok(q, l),
            );
        }
        self.shrink(
            p,
            |q, f| SchemeParams {
                w11: q.w11 * f,
                w12: q.w12 * f,
                w21: q.w21 * f,
                w22: q.w22 * f,
                a1: q.a1 * f,
                a2: q.a2 * f,
            },
            |q| self.central_ok(q),
        )
    }

    fn objective(&self, theta: &[f64; 6]) -> f64 {
        let p = self.restore(self.decode(theta));
        sum_rate_closed_form(self.model, &p) + self.out_of_box(theta)
    }
}

fn nelder_mead(f: impl Fn(&[f64; 6]) -> f64, start: [f64; 6], steps: [f64; 6], tol: f64, max_evals: usize) -> ([f64; 6], f64, usize) {
    const N: usize = 6;
    let mut simplex: Vec<([f64; N], f64)> = Vec::with_capacity(N + 1);
    simplex.push((start, f(&start)));
    for i in 0..N {
        let mut v = start;
        v[i] += steps[i];
        simplex.push((v, f(&v)));
    }
    let mut evals = N + 1;
    let by_value = |a: &([f64; N], f64), b: &([f64; N], f64)| a.1.total_cmp(&b.1);

    while evals < max_evals {
        simplex.sort_by(by_value);
        let best = simplex[0].1;
        let worst = simplex[N].1;
        if (worst - best).abs() <= tol * (1.0 + best.abs()) {
            break;
        }
        let mut centroid = [0.0; N];
        for (v, _) in &simplex[..N] {
            for i in 0..N {
                centroid[i] += v[i] / N as f64;
            }
        }
        let along = |t: f64| {
            let mut v = [0.0; N];
            for i in 0..N {
                v[i] = centroid[i] + t * (simplex[N].0[i] - centroid[i]);
            }
            v
        };
        let reflected = along(-1.0);
        let fr = f(&reflected);
        evals += 1;
        if fr < simplex[0].1 {
            let expanded = along(-2.0);
            let fe = f(&expanded);
            evals += 1;
            simplex[N] = if fe < fr { (expanded, fe) } else { (reflected, fr) };
        } else if fr < simplex[N - 1].1 {
            simplex[N] = (reflected, fr);
        } else {
            let (contracted, fc) = if fr < worst {
                let c = along(-0.5);
                (c, f(&c))
            } else {
                let c = along(0.5);
                (c, f(&c))
            };
            evals += 1;
            if fc < worst.min(fr) {
                simplex[N] = (contracted, fc);
            } else {
                let anchor = simplex[0].0;
                for entry in simplex.iter_mut().skip(1) {
                    for i in 0..N {
                        entry.0[i] = anchor[i] + 0.5 * (entry.0[i] - anchor[i]);
                    }
                    entry.1 = f(&entry.0);
                }
                evals += N;
            }
        }
    }
    simplex.sort_by(by_value);
    (simplex[0].0, simplex[0].1, evals)
}

fn check_feasible(model: &SourceModel, targets: &DistortionTriple) -> Result<()> {
    let floor = model.mmse_given_observations();
    for (constraint, target) in [
        (Constraint::Receiver1, targets.d1),
        (Constraint::Receiver2, targets.d2),
        (Constraint::Central, targets.d0),
    ] {
        if floor >= target {
            return Err(Error::Infeasible {
                constraint,
                detail: format!("target {target} does not exceed Var(S | X1, X2) = {floor}"),
            });
        }
    }
    Ok(())
}

/// Minimizes the achievable sum rate subject to the three distortion targets.
///
/// Deterministic for fixed `opts`: starting points come from a seeded
/// generator and the best start is chosen by value, then by start index.
pub fn optimize_sum_rate(model: &SourceModel, targets: &DistortionTriple, opts: &OptimizeOptions) -> Result<OptimizedScheme> {
    model.validate()?;
    DistortionTriple::new(targets.d1, targets.d2, targets.d0)?;
    check_feasible(model, targets)?;
    if opts.starts == 0 {
        return Err(Error::Domain("at least one optimizer start is required".into()));
    }
    let problem = Problem { model, targets };

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut starts = vec![[0.0, 0.0, 0.0, 0.0, 0.3, 0.3]];
    while starts.len() < opts.starts {
        let mut s = [0.0; 6];
        for x in s.iter_mut().take(4) {
            *x = rng.random_range(-4.0..4.0);
        }
        for r in s.iter_mut().skip(4) {
            *r = rng.random_range(0.0..0.95);
        }
        starts.push(s);
    }

    let f = |t: &[f64; 6]| problem.objective(t);
    let results: Vec<([f64; 6], f64)> = starts
        .par_iter()
        .map(|&s| {
            let mut point = s;
            let mut value = f64::INFINITY;
            let mut budget = opts.max_evals;
            let mut scale = 1.0;
            // restart from the incumbent until a full run stops improving
            while budget > 0 {
                let steps = [0.5 * scale, 0.5 * scale, 0.5 * scale, 0.5 * scale, 0.1 * scale, 0.1 * scale];
                let (p, v, used) = nelder_mead(f, point, steps, opts.tol, budget);
                budget = budget.saturating_sub(used);
                let improved = v < value - opts.tol * (1.0 + v.abs());
                point = p;
                value = v.min(value);
                if !improved {
                    break;
                }
                scale = (scale * 0.5).max(1e-3);
            }
            (point, value)
        })
        .collect();

    let (best_theta, _) = results
        .iter()
        .enumerate()
        .min_by(|(i, a), (j, b)| a.1.total_cmp(&b.1).then(i.cmp(j)))
        .map(|(_, r)| *r)
        .expect("at least one start");

    let params = problem.restore(problem.decode(&best_theta));
    let achieved = distortions(model, &params);
    for (i, constraint) in [Constraint::Receiver1, Constraint::Receiver2, Constraint::Central].into_iter().enumerate() {
        let target = targets.get([1, 2, 0][i]);
        if achieved[i] > target + 1e-9 {
            return Err(Error::Infeasible {
                constraint,
                detail: format!("optimizer ended at distortion {} > target {target}", achieved[i]),
            });
        }
    }
    let rates = sum_rate(model, &params)?;
    Ok(OptimizedScheme { params, rates, distortions: achieved })
}
