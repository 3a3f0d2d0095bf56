//! Builds a Gaussian scheme whose sum rate equals the lower bound at a
//! given point of `P`.
//!
//! Each encoder slice `(d_k1, d_k2, t_k)` is reparametrized as
//! `alpha_k0 = s_N e^{-2t} / (1 - e^{-2t})` and `alpha_kl = s_N d_kl / (s_N - d_kl)`.
//! With `w_kl = alpha_kl` the scheme reproduces `d_kl`. Then either a root
//! `a*` of `g_k` fixes the correlation and the converse noise (first case),
//! or the noises are taken independent with `sigma_Z^2 = 0` (second case).

use serde::Serialize;

use crate::bound::{
    bound_objective, classify_f_k, condition_holds, in_p, r_fn, BoundParams, FClass, PClass,
};
use crate::gaussmodel::{build_joint_cov, conditional_mi, SourceModel, Var};
use crate::scheme::{distortions, marginal_params, sum_rate, DistortionTriple, SchemeParams};
use crate::{Error, NoiseVar, Result};

/// Stand-in for an infinite `alpha`, as a multiple of `s_N`. Only used when
/// a slice sits on the `d = s_N` or `t = 0` boundary.
pub const INFINITE_ALPHA_RATIO: f64 = 1e15;

const BISECTION_GTOL: f64 = 1e-12;
const BISECTION_WIDTH: f64 = 1e-14;
const PSD_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AlphaTriple {
    pub a0: f64,
    pub a1: f64,
    pub a2: f64,
}

impl AlphaTriple {
    pub fn is_finite(&self) -> bool {
        self.a0.is_finite() && self.a1.is_finite() && self.a2.is_finite()
    }
}

/// `alpha` values of a slice; components are `+inf` on the `t = 0` and
/// `d = s_N` boundaries.
pub fn alphas(sigma_n2: f64, d1: f64, d2: f64, t: f64) -> AlphaTriple {
    let ratio = |d: f64| if d >= sigma_n2 { f64::INFINITY } else { sigma_n2 * d / (sigma_n2 - d) };
    let a0 = if t <= 0.0 {
        f64::INFINITY
    } else {
        // e / (1 - e) with e = e^{-2t}
        sigma_n2 / (2.0 * t).exp_m1()
    };
    AlphaTriple { a0, a1: ratio(d1), a2: ratio(d2) }
}

/// `g(beta) = 1/(alpha_0 + beta) - 1/(alpha_1 + beta) - 1/(alpha_2 + beta)`.
pub fn g_fn(alphas: &AlphaTriple, beta: f64) -> f64 {
    1.0 / (alphas.a0 + beta) - 1.0 / (alphas.a1 + beta) - 1.0 / (alphas.a2 + beta)
}

/// A root of `g` in `(0, s_N]` by bisection. Requires `g(0) > 0 >= g(s_N)`.
pub fn solve_a_star(sigma_n2: f64, alphas: &AlphaTriple) -> Result<f64> {
    let g0 = g_fn(alphas, 0.0);
    let gn = g_fn(alphas, sigma_n2);
    if !(g0 > 0.0 && gn <= 0.0) {
        return Err(Error::Domain(format!(
            "g must change sign on [0, s_N]: g(0) = {g0}, g(s_N) = {gn}"
        )));
    }
    let root = if gn == 0.0 {
        sigma_n2
    } else {
        let (mut lo, mut hi) = (0.0, sigma_n2);
        loop {
            let mid = 0.5 * (lo + hi);
            let g = g_fn(alphas, mid);
            if g.abs() <= BISECTION_GTOL || hi - lo <= BISECTION_WIDTH * sigma_n2 {
                break mid;
            }
            if g > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
    };
    let margin = psd_margin(alphas, root);
    if margin < -PSD_TOL {
        return Err(Error::Contradiction(format!(
            "alpha_1 alpha_2 - a*^2 = {margin} at a* = {root}"
        )));
    }
    Ok(root)
}

/// `alpha_1 alpha_2 - a^2`.
pub fn psd_margin(alphas: &AlphaTriple, a: f64) -> f64 {
    alphas.a1 * alphas.a2 - a * a
}

/// What was built for one encoder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EncoderConstruction {
    pub class: FClass,
    pub alphas: AlphaTriple,
    /// The root of `g`; `None` in the second case.
    pub a_star: Option<f64>,
    pub psd_margin: f64,
    pub sigma_z: NoiseVar,
    /// `I(X_k; U_k1, U_k2 | S)` of the constructed scheme.
    pub t_prime: f64,
    /// `I(U_k1; U_k2 | S, Y_k)` at the constructed converse noise.
    pub conditional_mi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquivalenceReport {
    /// Converse objective at `p` with the constructed `sigma_Z^2`, nats.
    pub lhs: f64,
    /// Decomposition of the constructed scheme's sum rate, nats.
    pub rhs: f64,
    /// `|lhs - rhs|`.
    pub diff: f64,
    /// Sum rate of the constructed scheme from log-determinants.
    pub achievable: f64,
    /// Converse objective at `p` with the maximizing `sigma_Z^2`.
    pub bound_value: f64,
    pub encoders: [EncoderConstruction; 2],
    pub scheme: SchemeParams,
    /// `(delta_1, delta_2, delta_0)` of the constructed scheme.
    pub distortions: [f64; 3],
    pub meets_targets: bool,
}

impl EquivalenceReport {
    pub fn sigma_z(&self) -> [NoiseVar; 2] {
        [self.encoders[0].sigma_z, self.encoders[1].sigma_z]
    }
}

fn cap(alpha: f64, sigma_n2: f64) -> f64 {
    if alpha.is_finite() { alpha } else { INFINITE_ALPHA_RATIO * sigma_n2 }
}

struct Slice {
    class: FClass,
    alphas: AlphaTriple,
    a_star: Option<f64>,
    w: (f64, f64),
    a: f64,
    sigma_z: NoiseVar,
}

fn construct_slice(sigma_n2: f64, d1: f64, d2: f64, t: f64) -> Result<Slice> {
    let class = classify_f_k(sigma_n2, d1, d2, t);
    let al = alphas(sigma_n2, d1, d2, t);
    let w = (cap(al.a1, sigma_n2), cap(al.a2, sigma_n2));
    match class {
        FClass::F1 => {
            let a = solve_a_star(sigma_n2, &al)?;
            let sigma_z = if a >= sigma_n2 {
                NoiseVar::Infinite
            } else {
                NoiseVar::Finite(a * sigma_n2 / (sigma_n2 - a))
            };
            Ok(Slice { class, alphas: al, a_star: Some(a), w, a, sigma_z })
        }
        FClass::F2 => Ok(Slice { class, alphas: al, a_star: None, w, a: 0.0, sigma_z: NoiseVar::Finite(0.0) }),
        FClass::F3 => Err(Error::Contradiction(format!(
            "slice ({d1}, {d2}, {t}) falls in F_k3 although the distortion condition holds"
        ))),
        FClass::Outside => Err(Error::Domain(format!("slice ({d1}, {d2}, {t}) is outside F_k"))),
    }
}

/// Constructs the matching scheme at `p` and evaluates both sides of the
/// equality.
pub fn construct_matching_scheme(
    model: &SourceModel,
    targets: &DistortionTriple,
    p: &BoundParams,
) -> Result<EquivalenceReport> {
    model.validate()?;
    targets.validate_for(model)?;
    if !condition_holds(model, targets) {
        return Err(Error::Domain("the distortion condition does not hold for these targets".into()));
    }
    if in_p(model, targets, p) == PClass::None {
        return Err(Error::Domain(format!("{p:?} is not in P")));
    }

    let s1 = construct_slice(model.sigma_n1_2, p.d11, p.d12, p.t1)?;
    let s2 = construct_slice(model.sigma_n2_2, p.d21, p.d22, p.t2)?;
    let scheme = SchemeParams::new(s1.w.0, s1.w.1, s2.w.0, s2.w.1, s1.a, s2.a)?;
    let marg = marginal_params(model, &scheme);

    let z = [s1.sigma_z, s2.sigma_z];
    let finite_z = (z[0].finite().unwrap_or(0.0), z[1].finite().unwrap_or(0.0));
    let cov = build_joint_cov(model, &scheme, Some(finite_z))?;
    let mut cond_mi = [0.0; 2];
    for k in 1..=2 {
        let given: Vec<Var> = if z[k - 1].is_infinite() { vec![Var::S] } else { vec![Var::S, Var::y(k)] };
        cond_mi[k - 1] = conditional_mi(&cov, &[Var::u(k, 1)], &[Var::u(k, 2)], &given)?;
    }

    let offset = 0.5 * (model.sigma_s2 * model.sigma_s2 / (targets.d1 * targets.d2)).ln();
    let r_at = |k: usize, d1: f64, d2: f64, t: f64| -> Result<f64> {
        let s = z[k - 1].finite().unwrap_or(f64::INFINITY);
        r_fn(model.noise(k), d1, d2, t, s)
    };
    let lhs = r_at(1, p.d11, p.d12, p.t1)? + r_at(2, p.d21, p.d22, p.t2)? + offset;

    let delta = distortions(model, &scheme);
    let decomposition_offset = 0.5 * (model.sigma_s2 * model.sigma_s2 / (delta[0] * delta[1])).ln();
    let rhs = r_at(1, marg[0].d1, marg[0].d2, marg[0].t)?
        + r_at(2, marg[1].d1, marg[1].d2, marg[1].t)?
        + cond_mi[0]
        + cond_mi[1]
        + decomposition_offset;

    let achievable = sum_rate(model, &scheme)?.sum_rate;
    let (bound_value, _) = bound_objective(model, targets, p)?;

    let mut encoders = Vec::with_capacity(2);
    for (k, s) in [s1, s2].into_iter().enumerate() {
        encoders.push(EncoderConstruction {
            class: s.class,
            alphas: s.alphas,
            a_star: s.a_star,
            psd_margin: psd_margin(&s.alphas, s.a),
            sigma_z: s.sigma_z,
            t_prime: marg[k].t,
            conditional_mi: cond_mi[k],
        });
    }
    let rel = 1e-9;
    let meets_targets = delta[0] <= targets.d1 * (1.0 + rel)
        && delta[1] <= targets.d2 * (1.0 + rel)
        && delta[2] <= targets.d0 * (1.0 + rel);

    Ok(EquivalenceReport {
        lhs,
        rhs,
        diff: (lhs - rhs).abs(),
        achievable,
        bound_value,
        encoders: [encoders[0], encoders[1]],
        scheme,
        distortions: delta,
        meets_targets,
    })
}
