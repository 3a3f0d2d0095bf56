//! The Gaussian achievable scheme.
//!
//! Each encoder forms two test-channel outputs `U_kl = X_k + W_kl`, where
//! `(W_k1, W_k2)` has variances `w_k1, w_k2` and covariance `-a_k`, and the
//! noises of different encoders are independent. Receiver `l` estimates `S`
//! from `(U_1l, U_2l)`, the central receiver from all four.
//!
//! The distortions and the marginal parameters `d'_kl = Var(X_k | U_kl, S)`,
//! `t'_k = I(X_k; U_k1, U_k2 | S)` have closed forms here; the sum rate
//! `I(X1,X2; U) + I(U11,U21; U12,U22)` is evaluated on the joint law through
//! [`crate::gaussmodel`].

mod optimize;

use serde::{Deserialize, Serialize};

use crate::gaussmodel::{self, SourceModel, Var};
use crate::{Error, Result};

pub use optimize::{optimize_sum_rate, OptimizeOptions, OptimizedScheme};

/// Upper cap on `w_kl / sigma_Nk^2` used to represent an absent description.
pub const ABSENT_DESCRIPTION_RATIO: f64 = 1e8;

/// The six degrees of freedom of the Gaussian scheme.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchemeParams {
    pub w11: f64,
    pub w12: f64,
    pub w21: f64,
    pub w22: f64,
    pub a1: f64,
    pub a2: f64,
}

impl SchemeParams {
    pub fn new(w11: f64, w12: f64, w21: f64, w22: f64, a1: f64, a2: f64) -> Result<Self> {
        let p = SchemeParams { w11, w12, w21, w22, a1, a2 };
        p.validate()?;
        Ok(p)
    }

    /// Independent description noises of equal variance on every link.
    pub fn uniform(w: f64) -> Result<Self> {
        Self::new(w, w, w, w, 0.0, 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("w11", self.w11),
            ("w12", self.w12),
            ("w21", self.w21),
            ("w22", self.w22),
            ("a1", self.a1),
            ("a2", self.a2),
        ];
        for (name, v) in fields {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidParams(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        for k in 1..=2 {
            let (w1, w2, a) = (self.w(k, 1), self.w(k, 2), self.a(k));
            if w1 * w2 < a * a {
                return Err(Error::InvalidParams(format!(
                    "noise covariance of encoder {k} is not PSD: w{k}1*w{k}2 = {} < a{k}^2 = {}",
                    w1 * w2,
                    a * a
                )));
            }
        }
        Ok(())
    }

    pub fn w(&self, k: usize, l: usize) -> f64 {
        match (k, l) {
            (1, 1) => self.w11,
            (1, 2) => self.w12,
            (2, 1) => self.w21,
            (2, 2) => self.w22,
            _ => panic!("description index ({k},{l}) out of range"),
        }
    }

    pub fn a(&self, k: usize) -> f64 {
        match k {
            1 => self.a1,
            2 => self.a2,
            _ => panic!("encoder index must be 1 or 2, got {k}"),
        }
    }
}

/// Target mean-squared distortions of the two side receivers and the
/// central receiver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistortionTriple {
    pub d1: f64,
    pub d2: f64,
    pub d0: f64,
}

impl DistortionTriple {
    /// Requires only positive finite values; see [`Self::validate_for`] for
    /// the ordering the converse needs.
    pub fn new(d1: f64, d2: f64, d0: f64) -> Result<Self> {
        for (name, v) in [("D1", d1), ("D2", d2), ("D0", d0)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidTargets(format!("{name} must be finite and > 0, got {v}")));
            }
        }
        Ok(DistortionTriple { d1, d2, d0 })
    }

    /// Receiver `l` target: 0 is the central receiver.
    pub fn get(&self, l: usize) -> f64 {
        match l {
            0 => self.d0,
            1 => self.d1,
            2 => self.d2,
            _ => panic!("receiver index must be 0, 1 or 2, got {l}"),
        }
    }

    /// `0 < D0 < min(D1, D2)` and `max(D1, D2) < sigma_S^2`.
    pub fn validate_for(&self, model: &SourceModel) -> Result<()> {
        DistortionTriple::new(self.d1, self.d2, self.d0)?;
        if self.d0 >= self.d1.min(self.d2) {
            return Err(Error::InvalidTargets(format!(
                "need D0 < min(D1, D2), got D0 = {} and min = {}",
                self.d0,
                self.d1.min(self.d2)
            )));
        }
        if self.d1.max(self.d2) >= model.sigma_s2 {
            return Err(Error::InvalidTargets(format!(
                "need max(D1, D2) < sigma_S^2 = {}, got {}",
                model.sigma_s2,
                self.d1.max(self.d2)
            )));
        }
        Ok(())
    }

    pub fn is_valid_for(&self, model: &SourceModel) -> bool {
        self.validate_for(model).is_ok()
    }
}

/// Marginal parameters of one encoder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EncoderMarginals {
    /// `Var(X_k | U_k1, S)`.
    pub d1: f64,
    /// `Var(X_k | U_k2, S)`.
    pub d2: f64,
    /// `I(X_k; U_k1, U_k2 | S)` in nats; `+inf` exactly when the noise
    /// covariance of the encoder is singular (see [`Self::t_unbounded`]).
    pub t: f64,
    /// `Var(X_k | U_k1, U_k2, S) = sigma_Nk^2 e^{-2 t}`, finite even when `t` is not.
    pub residual: f64,
}

impl EncoderMarginals {
    pub fn t_unbounded(&self) -> bool {
        self.t == f64::INFINITY
    }
}

/// `Var(X_k | U_kl, S) = sigma_N^2 w / (sigma_N^2 + w)`.
pub fn single_description_residual(sigma_n2: f64, w: f64) -> f64 {
    sigma_n2 * w / (sigma_n2 + w)
}

fn encoder_marginals(sigma_n2: f64, w1: f64, w2: f64, a: f64) -> EncoderMarginals {
    let spread = w1 + w2 + 2.0 * a;
    let det = w1 * w2 - a * a;
    let d1 = single_description_residual(sigma_n2, w1);
    let d2 = single_description_residual(sigma_n2, w2);
    if det <= 0.0 {
        return EncoderMarginals { d1, d2, t: f64::INFINITY, residual: 0.0 };
    }
    let numer = sigma_n2 * spread + det;
    EncoderMarginals {
        d1,
        d2,
        t: 0.5 * (numer / det).ln(),
        residual: sigma_n2 * det / numer,
    }
}

/// `(d'_k1, d'_k2, t'_k)` for both encoders.
pub fn marginal_params(model: &SourceModel, params: &SchemeParams) -> [EncoderMarginals; 2] {
    [1, 2].map(|k| encoder_marginals(model.noise(k), params.w(k, 1), params.w(k, 2), params.a(k)))
}

/// Residual of the identity
/// `1/(sigma_N^2 e^{-2t}/(1 - e^{-2t}) + a) = 1/(w1 + a) + 1/(w2 + a)`,
/// reported relative to the right-hand side.
pub fn information_identity_residual(model: &SourceModel, params: &SchemeParams, k: usize) -> f64 {
    let sn = model.noise(k);
    let m = encoder_marginals(sn, params.w(k, 1), params.w(k, 2), params.a(k));
    let a = params.a(k);
    let e = (-2.0 * m.t).exp();
    let lhs = 1.0 / (sn * e / (1.0 - e) + a);
    let rhs = 1.0 / (params.w(k, 1) + a) + 1.0 / (params.w(k, 2) + a);
    (lhs - rhs).abs() / rhs.abs()
}

/// Distortion of side receiver `l` from the marginal parameters:
/// `1/delta = 1/s_S + 1/s_N1 + 1/s_N2 - d_1l/s_N1^2 - d_2l/s_N2^2`.
pub fn receiver_distortion_from_marginals(model: &SourceModel, d_1l: f64, d_2l: f64) -> f64 {
    let (s1, s2) = (model.sigma_n1_2, model.sigma_n2_2);
    let inv = 1.0 / model.sigma_s2 + 1.0 / s1 + 1.0 / s2 - d_1l / (s1 * s1) - d_2l / (s2 * s2);
    1.0 / inv
}

/// `Var(S | U_1l, U_2l)`.
pub fn receiver_distortion(model: &SourceModel, params: &SchemeParams, l: usize) -> f64 {
    // 1/s_N - d'/s_N^2 == 1/(s_N + w); this form stays accurate for large w.
    let inv = 1.0 / model.sigma_s2
        + 1.0 / (model.sigma_n1_2 + params.w(1, l))
        + 1.0 / (model.sigma_n2_2 + params.w(2, l));
    1.0 / inv
}

/// Central distortion from the information parameters:
/// `1/delta_0 = 1/s_S + sum_k (1 - e^{-2 t_k}) / s_Nk`.
pub fn central_distortion_from_info(model: &SourceModel, t1: f64, t2: f64) -> f64 {
    let term = |sn: f64, t: f64| -(-2.0 * t).exp_m1() / sn;
    1.0 / (1.0 / model.sigma_s2 + term(model.sigma_n1_2, t1) + term(model.sigma_n2_2, t2))
}

/// `Var(S | U11, U12, U21, U22)`.
pub fn central_distortion(model: &SourceModel, params: &SchemeParams) -> f64 {
    let mut inv = 1.0 / model.sigma_s2;
    for k in 1..=2 {
        let sn = model.noise(k);
        let (w1, w2, a) = (params.w(k, 1), params.w(k, 2), params.a(k));
        let spread = w1 + w2 + 2.0 * a;
        let det = w1 * w2 - a * a;
        // (1 - e^{-2t'}) / s_N == spread / (s_N spread + det)
        let denom = sn * spread + det;
        inv += if det <= 0.0 || denom <= 0.0 { 1.0 / sn } else { spread / denom };
    }
    1.0 / inv
}

/// Distortions `(delta_1, delta_2, delta_0)`.
pub fn distortions(model: &SourceModel, params: &SchemeParams) -> [f64; 3] {
    [
        receiver_distortion(model, params, 1),
        receiver_distortion(model, params, 2),
        central_distortion(model, params),
    ]
}

/// Per-link rates of the explicit binning construction.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinkRates {
    /// `epsilon = delta / 8`.
    pub epsilon: f64,
    /// Codebook rates `R'_kl`, indexed `[k-1][l-1]`.
    pub r_prime: [[f64; 2]; 2],
    /// Transmitted (binned) rates `R_kl`, indexed `[k-1][l-1]`.
    pub r: [[f64; 2]; 2],
    /// Covering and binning constraints re-evaluated at the chosen rates.
    pub checks: Vec<RateCheck>,
}

impl LinkRates {
    pub fn total(&self) -> f64 {
        self.r.iter().flatten().sum()
    }

    pub fn all_strict(&self) -> bool {
        self.checks.iter().all(|c| c.holds())
    }
}

/// One inequality `lhs > rhs` of the rate constraints.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateCheck {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
}

impl RateCheck {
    pub fn holds(&self) -> bool {
        self.lhs > self.rhs
    }
}

/// The sum rate and its two mutual-information terms (nats).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateBreakdown {
    pub sum_rate: f64,
    /// `I(X1, X2; U11, U12, U21, U22)`.
    pub term_mi_joint: f64,
    /// `I(U11, U21; U12, U22)`.
    pub term_mi_cross: f64,
    pub links: Option<LinkRates>,
}

/// Sum rate `I(X1,X2; U) + I(U11,U21; U12,U22)` on the joint law.
pub fn sum_rate(model: &SourceModel, params: &SchemeParams) -> Result<RateBreakdown> {
    let cov = gaussmodel::build_joint_cov(model, params, None)?;
    let us = [Var::U11, Var::U12, Var::U21, Var::U22];
    let joint = gaussmodel::gaussian_mi(&cov, &us, &[Var::X1, Var::X2])?;
    let cross = gaussmodel::gaussian_mi(&cov, &[Var::U11, Var::U21], &[Var::U12, Var::U22])?;
    Ok(RateBreakdown { sum_rate: joint + cross, term_mi_joint: joint, term_mi_cross: cross, links: None })
}

/// The sum rate through the decomposition at `sigma_Z = 0`:
/// `sum_k 1/2 log((s_Nk + w_k1)(s_Nk + w_k2) / (w_k1 w_k2 - a_k^2))
///  + 1/2 log(s_S^2 / (delta_1 delta_2))`.
///
/// Returns `+inf` for degenerate parameters. Used as the optimizer objective.
pub fn sum_rate_closed_form(model: &SourceModel, params: &SchemeParams) -> f64 {
    let mut total = 0.0;
    for k in 1..=2 {
        let sn = model.noise(k);
        let (w1, w2, a) = (params.w(k, 1), params.w(k, 2), params.a(k));
        if w1 <= 0.0 || w2 <= 0.0 || a * a >= w1 * w2 {
            return f64::INFINITY;
        }
        total += 0.5 * ((sn / w1).ln_1p() + (sn / w2).ln_1p() - (-(a * a) / (w1 * w2)).ln_1p());
    }
    for l in 1..=2 {
        let snr = model.sigma_s2 / (model.sigma_n1_2 + params.w(1, l))
            + model.sigma_s2 / (model.sigma_n2_2 + params.w(2, l));
        total += 0.5 * snr.ln_1p();
    }
    total
}

/// Explicit rate tuple for slack `delta > 0`: every covering and binning
/// constraint holds strictly and the four rates sum to the sum rate plus
/// `delta`.
pub fn rate_tuple(model: &SourceModel, params: &SchemeParams, delta: f64) -> Result<RateBreakdown> {
    if !(delta.is_finite() && delta > 0.0) {
        return Err(Error::Domain(format!("rate slack must be finite and > 0, got {delta}")));
    }
    let mut breakdown = sum_rate(model, params)?;
    let cov = gaussmodel::build_joint_cov(model, params, None)?;
    let mi = |a: &[Var], b: &[Var]| gaussmodel::gaussian_mi(&cov, a, b);
    let cmi = |a: &[Var], b: &[Var], c: &[Var]| gaussmodel::conditional_mi(&cov, a, b, c);
    let eps = delta / 8.0;

    let mut r_prime = [[0.0; 2]; 2];
    let mut r = [[0.0; 2]; 2];
    let mut checks = Vec::with_capacity(12);
    for k in 1..=2 {
        let (x, u1, u2) = (Var::x(k), Var::u(k, 1), Var::u(k, 2));
        let i_x_u1 = mi(&[x], &[u1])?;
        let i_x_u2 = mi(&[x], &[u2])?;
        let i_x_u2_given_u1 = cmi(&[x], &[u2], &[u1])?;
        let i_u1_u2 = mi(&[u1], &[u2])?;
        let i_x_both = mi(&[x], &[u1, u2])?;
        r_prime[k - 1][0] = i_x_u1 + eps;
        r_prime[k - 1][1] = i_x_u2_given_u1 + i_u1_u2 + eps;
        checks.push(RateCheck { name: format!("R'{k}1 > I(X{k};U{k}1)"), lhs: r_prime[k - 1][0], rhs: i_x_u1 });
        checks.push(RateCheck { name: format!("R'{k}2 > I(X{k};U{k}2)"), lhs: r_prime[k - 1][1], rhs: i_x_u2 });
        checks.push(RateCheck {
            name: format!("R'{k}1 + R'{k}2 > I(X{k};U{k}1,U{k}2) + I(U{k}1;U{k}2)"),
            lhs: r_prime[k - 1][0] + r_prime[k - 1][1],
            rhs: i_x_both + i_u1_u2,
        });
    }
    for l in 1..=2 {
        let shared = mi(&[Var::u(1, l)], &[Var::u(2, l)])?;
        // encoder 1 is binned against encoder 2's description
        r[0][l - 1] = r_prime[0][l - 1] - shared + eps;
        r[1][l - 1] = r_prime[1][l - 1] + eps;
        checks.push(RateCheck {
            name: format!("R1{l} > R'1{l} - I(U1{l};U2{l})"),
            lhs: r[0][l - 1],
            rhs: r_prime[0][l - 1] - shared,
        });
        checks.push(RateCheck {
            name: format!("R2{l} > R'2{l} - I(U1{l};U2{l})"),
            lhs: r[1][l - 1],
            rhs: r_prime[1][l - 1] - shared,
        });
        checks.push(RateCheck {
            name: format!("R1{l} + R2{l} > R'1{l} + R'2{l} - I(U1{l};U2{l})"),
            lhs: r[0][l - 1] + r[1][l - 1],
            rhs: r_prime[0][l - 1] + r_prime[1][l - 1] - shared,
        });
    }
    breakdown.links = Some(LinkRates { epsilon: eps, r_prime, r, checks });
    Ok(breakdown)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit() -> SourceModel {
        SourceModel::new(1.0, 1.0, 1.0).unwrap()
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1.0)
    }

    #[test]
    fn receiver_distortion_examples() {
        let p = SchemeParams::uniform(1.0).unwrap();
        assert!(close(receiver_distortion(&unit(), &p, 1), 0.5, 1e-15));
        let p = SchemeParams::uniform(0.0).unwrap();
        assert!(close(receiver_distortion(&unit(), &p, 2), 1.0 / 3.0, 1e-15));
        let p = SchemeParams::uniform(1e12).unwrap();
        assert!(close(receiver_distortion(&unit(), &p, 1), 1.0, 1e-10));
    }

    #[test]
    fn marginal_form_matches_noise_form() {
        let model = SourceModel::new(2.0, 0.7, 1.3).unwrap();
        let p = SchemeParams::new(0.4, 2.0, 1.1, 0.3, 0.1, 0.2).unwrap();
        let m = marginal_params(&model, &p);
        for l in 1..=2 {
            let a = receiver_distortion(&model, &p, l);
            let b = receiver_distortion_from_marginals(&model, [m[0].d1, m[0].d2][l - 1], [m[1].d1, m[1].d2][l - 1]);
            assert!(close(a, b, 1e-13));
        }
        let c = central_distortion_from_info(&model, m[0].t, m[1].t);
        assert!(close(c, central_distortion(&model, &p), 1e-13));
    }

    #[test]
    fn central_distortion_examples() {
        let p = SchemeParams::uniform(1.0).unwrap();
        assert!(close(central_distortion(&unit(), &p), 3.0 / 7.0, 1e-15));
        let p = SchemeParams::uniform(0.0).unwrap();
        assert!(close(central_distortion(&unit(), &p), 1.0 / 3.0, 1e-15));
        // encoder 2 useless: single remote encoder with two descriptions
        let p = SchemeParams::new(1.0, 1.0, 1e14, 1e14, 0.0, 0.0).unwrap();
        let single = 1.0 / (1.0 + 1.0 / (1.0 + 0.5));
        assert!(close(central_distortion(&unit(), &p), single, 1e-12));
    }

    #[test]
    fn marginal_examples() {
        let p = SchemeParams::uniform(1.0).unwrap();
        let m = marginal_params(&unit(), &p);
        assert!(close(m[0].d1, 0.5, 1e-15));
        assert!(close(m[0].t, 0.5 * 3f64.ln(), 1e-15));
        assert!(information_identity_residual(&unit(), &p, 1) < 1e-12);
        let boundary = SchemeParams::new(1.0, 4.0, 1.0, 1.0, 2.0, 0.0).unwrap();
        let m = marginal_params(&unit(), &boundary);
        assert!(m[0].t_unbounded());
        assert_eq!(m[0].residual, 0.0);
        assert!(!m[1].t_unbounded());
    }

    #[test]
    fn closed_form_sum_rate_matches_joint_law() {
        let model = SourceModel::new(1.5, 0.6, 2.2).unwrap();
        let p = SchemeParams::new(0.4, 2.0, 1.1, 0.3, 0.5, 0.2).unwrap();
        let exact = sum_rate(&model, &p).unwrap();
        assert!(close(sum_rate_closed_form(&model, &p), exact.sum_rate, 1e-12));
    }

    #[test]
    fn disabled_descriptions_send_nothing() {
        let p = SchemeParams::uniform(1e10).unwrap();
        let r = sum_rate(&unit(), &p).unwrap();
        assert!(r.sum_rate < 1e-8);
        assert!(sum_rate_closed_form(&unit(), &p) < 1e-8);
    }

    #[test]
    fn rate_tuple_sums_to_sum_rate_plus_slack() {
        let p = SchemeParams::new(0.5, 0.8, 1.2, 0.9, 0.3, 0.1).unwrap();
        for delta in [0.1, 0.01] {
            let r = rate_tuple(&unit(), &p, delta).unwrap();
            let links = r.links.as_ref().unwrap();
            assert_eq!(links.checks.len(), 12);
            assert!(links.all_strict());
            assert!((links.total() - r.sum_rate - delta).abs() < 1e-9);
        }
        assert!(rate_tuple(&unit(), &p, 0.0).is_err());
    }

    #[test]
    fn targets_validation() {
        let m = unit();
        assert!(DistortionTriple::new(0.4, 0.4, 0.35).unwrap().is_valid_for(&m));
        assert!(!DistortionTriple::new(0.4, 0.4, 0.45).unwrap().is_valid_for(&m));
        assert!(!DistortionTriple::new(1.0, 0.4, 0.3).unwrap().is_valid_for(&m));
        assert!(DistortionTriple::new(0.4, -1.0, 0.3).is_err());
    }
}
