#![allow(dead_code)]

use proptest::prelude::*;
use vceo::scheme::distortions;
use vceo::{DistortionTriple, SchemeParams, SourceModel};

/// Log-uniform on `[lo, hi]`.
pub fn log_uniform(lo: f64, hi: f64) -> impl Strategy<Value = f64> {
    (lo.ln()..=hi.ln()).prop_map(f64::exp)
}

pub fn model() -> impl Strategy<Value = SourceModel> {
    (log_uniform(0.25, 4.0), log_uniform(0.25, 4.0), log_uniform(0.25, 4.0))
        .prop_map(|(s, n1, n2)| SourceModel::new(s, n1, n2).unwrap())
}

/// Scheme parameters with `w_kl / s_Nk` in `[1e-2, 1e2]` and correlation
/// coefficient `a / sqrt(w1 w2)` in `[0, 0.95]`.
pub fn params_for(m: SourceModel) -> impl Strategy<Value = SchemeParams> {
    (
        prop::array::uniform4(log_uniform(1e-2, 1e2)),
        prop::array::uniform2(0.0..0.95f64),
    )
        .prop_map(move |(w, rho)| scheme_from(&m, w, rho))
}

pub fn scheme_from(m: &SourceModel, w: [f64; 4], rho: [f64; 2]) -> SchemeParams {
    let (w11, w12) = (w[0] * m.sigma_n1_2, w[1] * m.sigma_n1_2);
    let (w21, w22) = (w[2] * m.sigma_n2_2, w[3] * m.sigma_n2_2);
    SchemeParams::new(w11, w12, w21, w22, rho[0] * (w11 * w12).sqrt(), rho[1] * (w21 * w22).sqrt()).unwrap()
}

/// Valid targets that satisfy the distortion condition, from three
/// fractions in `(0, 1)`.
pub fn condition_targets(m: &SourceModel, u: [f64; 3]) -> DistortionTriple {
    let max_inv = (1.0 / m.sigma_n1_2).max(1.0 / m.sigma_n2_2);
    let floor = m.mmse_given_observations();
    let ceiling = 1.0 / (max_inv + 1.0 / m.sigma_s2);
    let d1 = floor + u[0] * (ceiling - floor);
    let d2 = floor + u[1] * (ceiling - floor);
    let k = 1.0 / d1 + 1.0 / d2 - max_inv - 1.0 / m.sigma_s2;
    let lo = 1.0 / d1.min(d2);
    let hi = k.min(1.0 / floor);
    let d0 = 1.0 / (lo + u[2] * (hi - lo));
    DistortionTriple::new(d1, d2, d0).unwrap()
}

pub fn instance() -> impl Strategy<Value = (SourceModel, DistortionTriple)> {
    (model(), prop::array::uniform3(0.1..0.9f64)).prop_map(|(m, u)| (m, condition_targets(&m, u)))
}

/// Deterministic stream of instances for the non-proptest checks.
pub fn instances(n: usize, seed: u64) -> Vec<(SourceModel, DistortionTriple)> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let lu = |rng: &mut rand_chacha::ChaCha8Rng| (rng.random_range(0.25f64.ln()..4f64.ln())).exp();
    (0..n)
        .map(|_| {
            let m = SourceModel::new(lu(&mut rng), lu(&mut rng), lu(&mut rng)).unwrap();
            let u = [rng.random_range(0.1..0.9), rng.random_range(0.1..0.9), rng.random_range(0.1..0.9)];
            (m, condition_targets(&m, u))
        })
        .collect()
}

/// Random schemes meeting `targets`, by rejection.
pub fn feasible_schemes(m: &SourceModel, targets: &DistortionTriple, n: usize, seed: u64) -> Vec<SchemeParams> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    for _ in 0..2_000_000 {
        if out.len() == n {
            break;
        }
        let w = [0; 4].map(|_| rng.random_range(1e-4f64.ln()..10f64.ln()).exp());
        let rho = [0; 2].map(|_| rng.random_range(0.0..0.95));
        let p = scheme_from(m, w, rho);
        let d = distortions(m, &p);
        if d[0] <= targets.d1 && d[1] <= targets.d2 && d[2] <= targets.d0 {
            out.push(p);
        }
    }
    out
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}
