//! Exact Gaussian covariance algebra over the labelled variables of the
//! problem.
//!
//! Every random variable in the model is a linear combination of the
//! independent primitives `S, N1, N2, W, Z1, Z2`, so the joint covariance is
//! assembled as `C P C^T` with `C` the coefficient matrix and `P` the
//! primitive covariance. Conditioning uses a Cholesky solve and falls back to
//! an eigen pseudo-inverse when the conditioning block is singular (this is
//! how `sigma_W^2 = 0`, i.e. `U = X`, is supported).

use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::linalg;
use crate::scheme::SchemeParams;
use crate::{Error, Result};

/// Pivot tolerance (relative to the variable's own variance) below which a
/// conditioning block is treated as singular.
const CONDITIONING_RTOL: f64 = 1e-12;

/// Conditional variances below this fraction of the unconditional variance
/// are treated as deterministic dependence.
const DETERMINISTIC_RTOL: f64 = 1e-14;

/// Variances of the remote source and the two observation noises.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourceModel {
    pub sigma_s2: f64,
    pub sigma_n1_2: f64,
    pub sigma_n2_2: f64,
}

impl SourceModel {
    pub fn new(sigma_s2: f64, sigma_n1_2: f64, sigma_n2_2: f64) -> Result<Self> {
        let model = SourceModel { sigma_s2, sigma_n1_2, sigma_n2_2 };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("sigma_s2", self.sigma_s2),
            ("sigma_n1_2", self.sigma_n1_2),
            ("sigma_n2_2", self.sigma_n2_2),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidModel(format!("{name} must be finite and > 0, got {v}")));
            }
        }
        Ok(())
    }

    /// Observation noise variance of encoder `k` (1 or 2).
    pub fn noise(&self, k: usize) -> f64 {
        match k {
            1 => self.sigma_n1_2,
            2 => self.sigma_n2_2,
            _ => panic!("encoder index must be 1 or 2, got {k}"),
        }
    }

    /// `Var(S | X1, X2)`, the distortion floor of any scheme.
    pub fn mmse_given_observations(&self) -> f64 {
        1.0 / (1.0 / self.sigma_s2 + 1.0 / self.sigma_n1_2 + 1.0 / self.sigma_n2_2)
    }
}

/// Variable labels of the joint law.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Var {
    S,
    X1,
    X2,
    U11,
    U12,
    U21,
    U22,
    Y1,
    Y2,
}

impl Var {
    pub const BASE: [Var; 7] = [Var::S, Var::X1, Var::X2, Var::U11, Var::U12, Var::U21, Var::U22];
    pub const ALL: [Var; 9] =
        [Var::S, Var::X1, Var::X2, Var::U11, Var::U12, Var::U21, Var::U22, Var::Y1, Var::Y2];

    pub fn x(k: usize) -> Var {
        match k {
            1 => Var::X1,
            2 => Var::X2,
            _ => panic!("encoder index must be 1 or 2, got {k}"),
        }
    }

    pub fn y(k: usize) -> Var {
        match k {
            1 => Var::Y1,
            2 => Var::Y2,
            _ => panic!("encoder index must be 1 or 2, got {k}"),
        }
    }

    /// Description `l` of encoder `k`.
    pub fn u(k: usize, l: usize) -> Var {
        match (k, l) {
            (1, 1) => Var::U11,
            (1, 2) => Var::U12,
            (2, 1) => Var::U21,
            (2, 2) => Var::U22,
            _ => panic!("description index ({k},{l}) out of range"),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Var::S => "S",
            Var::X1 => "X1",
            Var::X2 => "X2",
            Var::U11 => "U11",
            Var::U12 => "U12",
            Var::U21 => "U21",
            Var::U22 => "U22",
            Var::Y1 => "Y1",
            Var::Y2 => "Y2",
        }
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A symmetric PSD covariance matrix with one label per row.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledCov {
    labels: Vec<Var>,
    matrix: DMatrix<f64>,
}

impl LabeledCov {
    /// Validates label uniqueness, symmetry (1e-12 relative) and positive
    /// semidefiniteness (smallest eigenvalue >= -1e-10 times the largest).
    pub fn new(labels: Vec<Var>, matrix: DMatrix<f64>) -> Result<Self> {
        let n = labels.len();
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(Error::InvalidCovariance(format!(
                "{} labels for a {}x{} matrix",
                n,
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        for (i, a) in labels.iter().enumerate() {
            if labels[..i].contains(a) {
                return Err(Error::Labels(format!("duplicate label {a}")));
            }
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidCovariance("non-finite entry".into()));
        }
        let scale = matrix.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        for i in 0..n {
            for j in (i + 1)..n {
                if (matrix[(i, j)] - matrix[(j, i)]).abs() > 1e-12 * scale {
                    return Err(Error::InvalidCovariance(format!(
                        "asymmetric at ({}, {})",
                        labels[i], labels[j]
                    )));
                }
            }
        }
        if n > 0 {
            let (min, max) = linalg::eigen_range(&matrix);
            if min < -1e-10 * max.max(0.0) {
                return Err(Error::InvalidCovariance(format!(
                    "not positive semidefinite (eigenvalues {min:e} .. {max:e})"
                )));
            }
        }
        Ok(LabeledCov { labels, matrix })
    }

    pub fn labels(&self) -> &[Var] {
        &self.labels
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn index_of(&self, v: Var) -> Option<usize> {
        self.labels.iter().position(|&l| l == v)
    }

    pub fn cov(&self, a: Var, b: Var) -> Result<f64> {
        let i = self.require(a)?;
        let j = self.require(b)?;
        Ok(self.matrix[(i, j)])
    }

    pub fn var(&self, a: Var) -> Result<f64> {
        self.cov(a, a)
    }

    fn require(&self, v: Var) -> Result<usize> {
        self.index_of(v).ok_or_else(|| Error::Labels(format!("label {v} not present")))
    }

    fn indices(&self, set: &[Var]) -> Result<Vec<usize>> {
        let mut out = Vec::with_capacity(set.len());
        for &v in set {
            let i = self.require(v)?;
            if out.contains(&i) {
                return Err(Error::Labels(format!("label {v} repeated in a set")));
            }
            out.push(i);
        }
        Ok(out)
    }

    fn block(&self, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
        DMatrix::from_fn(rows.len(), cols.len(), |i, j| self.matrix[(rows[i], cols[j])])
    }
}

fn disjoint(a: &[Var], b: &[Var]) -> Result<()> {
    if let Some(v) = a.iter().find(|v| b.contains(v)) {
        return Err(Error::Labels(format!("label {v} appears in two sets that must be disjoint")));
    }
    Ok(())
}

/// Joint covariance of `S, X1, X2, U11, U12, U21, U22` (and `Y1, Y2` when
/// the converse noise variances are given).
///
/// `S, N1, N2, W, Z1, Z2` are mutually independent; `W_k1, W_k2` have
/// covariance `-a_k`; descriptions of different encoders have independent
/// noise.
pub fn build_joint_cov(
    model: &SourceModel,
    params: &SchemeParams,
    noise_z: Option<(f64, f64)>,
) -> Result<LabeledCov> {
    model.validate()?;
    params.validate()?;
    if let Some((z1, z2)) = noise_z {
        if !(z1.is_finite() && z1 >= 0.0 && z2.is_finite() && z2 >= 0.0) {
            return Err(Error::InvalidParams(format!(
                "converse noise variances must be finite and >= 0, got ({z1}, {z2})"
            )));
        }
    }

    // primitives: S, N1, N2, W11, W12, W21, W22, Z1, Z2
    let mut p = DMatrix::<f64>::zeros(9, 9);
    p[(0, 0)] = model.sigma_s2;
    p[(1, 1)] = model.sigma_n1_2;
    p[(2, 2)] = model.sigma_n2_2;
    p[(3, 3)] = params.w11;
    p[(4, 4)] = params.w12;
    p[(3, 4)] = -params.a1;
    p[(4, 3)] = -params.a1;
    p[(5, 5)] = params.w21;
    p[(6, 6)] = params.w22;
    p[(5, 6)] = -params.a2;
    p[(6, 5)] = -params.a2;
    if let Some((z1, z2)) = noise_z {
        p[(7, 7)] = z1;
        p[(8, 8)] = z2;
    }

    let labels: Vec<Var> = if noise_z.is_some() { Var::ALL.to_vec() } else { Var::BASE.to_vec() };
    let mut c = DMatrix::<f64>::zeros(labels.len(), 9);
    for (row, &v) in labels.iter().enumerate() {
        let terms: &[usize] = match v {
            Var::S => &[0],
            Var::X1 => &[0, 1],
            Var::X2 => &[0, 2],
            Var::U11 => &[0, 1, 3],
            Var::U12 => &[0, 1, 4],
            Var::U21 => &[0, 2, 5],
            Var::U22 => &[0, 2, 6],
            Var::Y1 => &[0, 1, 7],
            Var::Y2 => &[0, 2, 8],
        };
        for &t in terms {
            c[(row, t)] = 1.0;
        }
    }
    let mut sigma = &c * &p * c.transpose();
    linalg::symmetrize(&mut sigma);
    LabeledCov::new(labels, sigma)
}

/// `Cov(A | B) = S_A - S_AB S_B^{-1} S_BA`, with a pseudo-inverse when
/// `S_B` is singular.
///
/// `A` and `B` may overlap; a target that is also conditioned on gets zero
/// conditional variance.
pub fn conditional_cov(cov: &LabeledCov, targets: &[Var], given: &[Var]) -> Result<DMatrix<f64>> {
    let a = cov.indices(targets)?;
    let b = cov.indices(given)?;
    let sigma_a = cov.block(&a, &a);
    if b.is_empty() {
        return Ok(sigma_a);
    }
    let sigma_b = cov.block(&b, &b);
    let sigma_ba = cov.block(&b, &a);

    let correction = match linalg::cholesky(&sigma_b, &linalg::diagonal(&sigma_b), CONDITIONING_RTOL) {
        Some(l) => {
            let x = linalg::forward_substitute(&l, &sigma_ba);
            x.transpose() * x
        }
        None => sigma_ba.transpose() * linalg::pseudo_inverse(&sigma_b) * &sigma_ba,
    };
    let mut out = sigma_a - correction;
    linalg::symmetrize(&mut out);
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::DegenerateConditioning(format!(
            "conditioning on {given:?} produced non-finite values"
        )));
    }
    let scale = linalg::diagonal(&cov.block(&a, &a)).iter().fold(0.0_f64, |m, v| m.max(*v));
    for i in 0..out.nrows() {
        if out[(i, i)] < -1e-9 * scale {
            return Err(Error::DegenerateConditioning(format!(
                "negative conditional variance {:e} for {}",
                out[(i, i)],
                targets[i]
            )));
        }
        // roundoff below zero on exact self-conditioning
        out[(i, i)] = out[(i, i)].max(0.0);
    }
    Ok(out)
}

fn log_det(m: &DMatrix<f64>, reference: &[f64], what: &str) -> Result<f64> {
    if m.nrows() == 0 {
        return Ok(0.0);
    }
    let l = linalg::cholesky(m, reference, DETERMINISTIC_RTOL)
        .ok_or_else(|| Error::InfiniteMutualInformation(format!("{what} is singular")))?;
    Ok(linalg::log_det_from_factor(&l))
}

/// `I(A; B)` in nats: `1/2 log det S_A - 1/2 log det S_{A|B}`.
pub fn gaussian_mi(cov: &LabeledCov, a: &[Var], b: &[Var]) -> Result<f64> {
    conditional_mi(cov, a, b, &[])
}

/// `I(A; B | C)` in nats, clamped at zero.
pub fn conditional_mi(cov: &LabeledCov, a: &[Var], b: &[Var], c: &[Var]) -> Result<f64> {
    disjoint(a, b)?;
    disjoint(a, c)?;
    disjoint(b, c)?;
    if a.is_empty() || b.is_empty() {
        return Ok(0.0);
    }
    let ia = cov.indices(a)?;
    let base = linalg::diagonal(&cov.block(&ia, &ia));

    if a.len() == 1 && b.len() == 1 {
        // -1/2 log(1 - rho^2) from the 2x2 conditional covariance; stays
        // accurate when the conditional correlation is near zero
        let pair = conditional_cov(cov, &[a[0], b[0]], c)?;
        let (va, vb, cab) = (pair[(0, 0)], pair[(1, 1)], pair[(0, 1)]);
        if va <= DETERMINISTIC_RTOL * base[0] {
            return Err(Error::InfiniteMutualInformation(format!("Cov({a:?} | {c:?}) is singular")));
        }
        if vb <= 0.0 {
            return Ok(0.0);
        }
        let rho2 = (cab * cab / (va * vb)).min(1.0);
        if 1.0 - rho2 <= DETERMINISTIC_RTOL {
            return Err(Error::InfiniteMutualInformation(format!("{a:?} is determined by {b:?} given {c:?}")));
        }
        return Ok(-0.5 * (-rho2).ln_1p());
    }

    let given_c = conditional_cov(cov, a, c)?;
    let mut bc: Vec<Var> = b.to_vec();
    bc.extend_from_slice(c);
    let given_bc = conditional_cov(cov, a, &bc)?;

    let ld_c = log_det(&given_c, &base, &format!("Cov({a:?} | {c:?})"))?;
    let ld_bc = log_det(&given_bc, &base, &format!("Cov({a:?} | {bc:?})"))?;
    let mi = 0.5 * (ld_c - ld_bc);
    if mi < -1e-10 {
        return Err(Error::DegenerateConditioning(format!(
            "negative conditional mutual information {mi:e}"
        )));
    }
    Ok(mi.max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit() -> SourceModel {
        SourceModel::new(1.0, 1.0, 1.0).unwrap()
    }

    fn params(w: [f64; 4], a1: f64, a2: f64) -> SchemeParams {
        SchemeParams::new(w[0], w[1], w[2], w[3], a1, a2).unwrap()
    }

    #[test]
    fn degenerate_descriptions_equal_observations() {
        let cov = build_joint_cov(&unit(), &params([0.0; 4], 0.0, 0.0), None).unwrap();
        assert_eq!(cov.cov(Var::U11, Var::U21).unwrap(), 1.0);
        assert_eq!(cov.cov(Var::X1, Var::X2).unwrap(), 1.0);
    }

    #[test]
    fn description_variances_add_up() {
        let cov = build_joint_cov(&unit(), &params([1.0; 4], 0.0, 0.0), None).unwrap();
        assert_eq!(cov.var(Var::U11).unwrap(), 3.0);
        assert_eq!(cov.cov(Var::U11, Var::U12).unwrap(), 2.0);
    }

    #[test]
    fn off_diagonal_noise_correlation() {
        let cov = build_joint_cov(&unit(), &params([1.0, 1.0, 1.0, 1.0], 0.5, 0.0), None).unwrap();
        assert_eq!(cov.cov(Var::U11, Var::U12).unwrap(), 1.5);
    }

    #[test]
    fn rejects_non_psd_noise() {
        let bad = SchemeParams { w11: 1.0, w12: 1.0, w21: 1.0, w22: 1.0, a1: 1.5, a2: 0.0 };
        assert!(build_joint_cov(&unit(), &bad, None).is_err());
    }

    #[test]
    fn conditioning_examples() {
        let cov = build_joint_cov(&unit(), &params([1.0; 4], 0.0, 0.0), None).unwrap();
        let v = conditional_cov(&cov, &[Var::S], &[Var::X1, Var::X2]).unwrap();
        assert!((v[(0, 0)] - 1.0 / 3.0).abs() < 1e-15);
        let v = conditional_cov(&cov, &[Var::S], &[]).unwrap();
        assert_eq!(v[(0, 0)], 1.0);
        let v = conditional_cov(&cov, &[Var::X1], &[Var::X1]).unwrap();
        assert!(v[(0, 0)].abs() < 1e-15);
    }

    #[test]
    fn self_conditioning_through_a_copy() {
        // U11 == X1 exactly, so conditioning X1 on U11 leaves nothing.
        let cov = build_joint_cov(&unit(), &params([0.0, 1.0, 1.0, 1.0], 0.0, 0.0), None).unwrap();
        let v = conditional_cov(&cov, &[Var::X1], &[Var::U11]).unwrap();
        assert!(v[(0, 0)].abs() < 1e-15);
        // singular conditioning block goes through the pseudo-inverse
        let v = conditional_cov(&cov, &[Var::S], &[Var::X1, Var::U11]).unwrap();
        assert!((v[(0, 0)] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn mutual_information_examples() {
        let cov = build_joint_cov(&unit(), &params([1.0; 4], 0.0, 0.0), None).unwrap();
        let mi = gaussian_mi(&cov, &[Var::S], &[Var::X1]).unwrap();
        assert!((mi - 0.5 * 2f64.ln()).abs() < 1e-14);
        assert_eq!(conditional_mi(&cov, &[Var::U11], &[Var::U21], &[Var::S]).unwrap(), 0.0);
        let mi = conditional_mi(&cov, &[Var::U11], &[Var::U12], &[Var::S, Var::X1]).unwrap();
        assert!(mi.abs() < 1e-14);
    }

    #[test]
    fn deterministic_dependence_is_infinite() {
        let cov = build_joint_cov(&unit(), &params([0.0, 1.0, 1.0, 1.0], 0.0, 0.0), None).unwrap();
        let err = gaussian_mi(&cov, &[Var::X1], &[Var::U11]).unwrap_err();
        assert!(matches!(err, Error::InfiniteMutualInformation(_)));
    }

    #[test]
    fn labeled_cov_validation() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(LabeledCov::new(vec![Var::S, Var::X1], m).is_err());
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0]);
        assert!(LabeledCov::new(vec![Var::S, Var::S], m.clone()).is_err());
        let m2 = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.4, 1.0]);
        assert!(LabeledCov::new(vec![Var::S, Var::X1], m2).is_err());
        assert!(LabeledCov::new(vec![Var::S, Var::X1], m).is_ok());
    }

    #[test]
    fn converse_noise_labels() {
        let cov = build_joint_cov(&unit(), &params([1.0; 4], 0.2, 0.3), Some((0.5, 0.0))).unwrap();
        assert_eq!(cov.labels().len(), 9);
        assert_eq!(cov.var(Var::Y1).unwrap(), 2.5);
        assert_eq!(cov.cov(Var::Y2, Var::X2).unwrap(), 2.0);
        assert!(build_joint_cov(&unit(), &params([1.0; 4], 0.0, 0.0), Some((-1.0, 0.0))).is_err());
    }
}
