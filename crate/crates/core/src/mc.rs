//! Monte-Carlo check of the closed-form distortions: sample the joint law,
//! fit least-squares linear predictors and compare mean squared residuals.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::gaussmodel::{build_joint_cov, SourceModel, Var};
use crate::linalg;
use crate::scheme::{distortions, marginal_params, SchemeParams};
use crate::{Error, Result};

/// Rows per independently seeded block. Part of the sampling contract.
pub const BLOCK_ROWS: usize = 8192;

/// Agreement threshold in standard errors.
pub const PASS_SIGMAS: f64 = 5.0;

/// Samples of `S, X1, X2, U11, U12, U21, U22`, stored by column.
#[derive(Debug, Clone, PartialEq)]
pub struct Samples {
    labels: Vec<Var>,
    columns: Vec<Vec<f64>>,
}

impl Samples {
    pub fn len(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn labels(&self) -> &[Var] {
        &self.labels
    }

    pub fn column(&self, v: Var) -> Result<&[f64]> {
        let i = self
            .labels
            .iter()
            .position(|&l| l == v)
            .ok_or_else(|| Error::Labels(format!("{v} is not sampled")))?;
        Ok(&self.columns[i])
    }
}

/// Draws `n` i.i.d. rows. Block `b` uses ChaCha8 seeded with `seed` on
/// stream `b`, so the output does not depend on the thread count.
pub fn sample_joint(model: &SourceModel, params: &SchemeParams, n: usize, seed: u64) -> Result<Samples> {
    if n == 0 {
        return Err(Error::Domain("sample count must be at least 1".into()));
    }
    let cov = build_joint_cov(model, params, None)?;
    let root = linalg::psd_square_root(cov.matrix());
    let dim = root.nrows();
    let cols = root.ncols();

    let blocks = n.div_ceil(BLOCK_ROWS);
    let chunks: Vec<Vec<f64>> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let rows = BLOCK_ROWS.min(n - b * BLOCK_ROWS);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b as u64);
            let mut z = vec![0.0; cols];
            let mut out = vec![0.0; rows * dim];
            for r in 0..rows {
                for zi in z.iter_mut() {
                    *zi = StandardNormal.sample(&mut rng);
                }
                for i in 0..dim {
                    let mut acc = 0.0;
                    for (j, zj) in z.iter().enumerate() {
                        acc += root[(i, j)] * zj;
                    }
                    out[r * dim + i] = acc;
                }
            }
            out
        })
        .collect();

    let mut columns = vec![Vec::with_capacity(n); dim];
    for chunk in &chunks {
        for row in chunk.chunks_exact(dim) {
            for (c, &x) in columns.iter_mut().zip(row) {
                c.push(x);
            }
        }
    }
    Ok(Samples { labels: cov.labels().to_vec(), columns })
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Mean squared residual of the least-squares affine predictor of `target`
/// from `given`, with standard error `sd(residual^2) / sqrt(n)`.
pub fn empirical_mmse(samples: &Samples, target: Var, given: &[Var]) -> Result<(f64, f64)> {
    let n = samples.len();
    if n < 2 {
        return Err(Error::Domain(format!("need at least 2 samples, got {n}")));
    }
    if given.contains(&target) {
        return Ok((0.0, 0.0));
    }
    let y = samples.column(target)?;
    let xs: Vec<&[f64]> = given.iter().map(|&v| samples.column(v)).collect::<Result<_>>()?;
    let y_mean = mean(y);
    let x_means: Vec<f64> = xs.iter().map(|x| mean(x)).collect();
    let p = xs.len();

    let beta = if p == 0 {
        Vec::new()
    } else {
        let mut gram = nalgebra::DMatrix::<f64>::zeros(p, p);
        let mut rhs = nalgebra::DMatrix::<f64>::zeros(p, 1);
        for i in 0..p {
            for j in 0..=i {
                let s: f64 = xs[i].iter().zip(xs[j]).map(|(a, b)| (a - x_means[i]) * (b - x_means[j])).sum();
                gram[(i, j)] = s;
                gram[(j, i)] = s;
            }
            rhs[(i, 0)] = xs[i].iter().zip(y).map(|(a, b)| (a - x_means[i]) * (b - y_mean)).sum();
        }
        let l = linalg::cholesky(&gram, &linalg::diagonal(&gram), 1e-10).ok_or_else(|| {
            Error::DegenerateRegression(format!("conditioning set {given:?} is collinear in the sample"))
        })?;
        let u = linalg::forward_substitute(&l, &rhs);
        let mut b = vec![0.0; p];
        for i in (0..p).rev() {
            let mut s = u[(i, 0)];
            for k in (i + 1)..p {
                s -= l[(k, i)] * b[k];
            }
            b[i] = s / l[(i, i)];
        }
        b
    };

    let sq: Vec<f64> = (0..n)
        .map(|r| {
            let mut res = y[r] - y_mean;
            for i in 0..p {
                res -= beta[i] * (xs[i][r] - x_means[i]);
            }
            res * res
        })
        .collect();
    let m = mean(&sq);
    let var = sq.iter().map(|s| (s - m) * (s - m)).sum::<f64>() / (n - 1) as f64;
    Ok((m, (var / n as f64).sqrt()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McEntry {
    pub name: String,
    pub analytic: f64,
    pub empirical: f64,
    pub stderr: f64,
}

impl McEntry {
    pub fn z_score(&self) -> f64 {
        (self.empirical - self.analytic).abs() / self.stderr
    }

    pub fn pass(&self) -> bool {
        (self.empirical - self.analytic).abs() <= PASS_SIGMAS * self.stderr
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McReport {
    pub n_samples: usize,
    pub seed: u64,
    pub entries: Vec<McEntry>,
}

impl McReport {
    pub fn all_pass(&self) -> bool {
        self.entries.iter().all(McEntry::pass)
    }
}

/// Compares `delta_1, delta_2, delta_0` and `d'_kl` against their
/// empirical linear-MMSE estimates.
pub fn validate(model: &SourceModel, params: &SchemeParams, n: usize, seed: u64) -> Result<McReport> {
    let samples = sample_joint(model, params, n, seed)?;
    let delta = distortions(model, params);
    let marg = marginal_params(model, params);
    let all_u = [Var::U11, Var::U12, Var::U21, Var::U22];

    let mut checks: Vec<(String, f64, Var, Vec<Var>)> = vec![
        ("delta_1".into(), delta[0], Var::S, vec![Var::U11, Var::U21]),
        ("delta_2".into(), delta[1], Var::S, vec![Var::U12, Var::U22]),
        ("delta_0".into(), delta[2], Var::S, all_u.to_vec()),
    ];
    for k in 1..=2 {
        for l in 1..=2 {
            let d = if l == 1 { marg[k - 1].d1 } else { marg[k - 1].d2 };
            checks.push((format!("d'_{k}{l}"), d, Var::x(k), vec![Var::u(k, l), Var::S]));
        }
    }
    let entries = checks
        .into_iter()
        .map(|(name, analytic, target, given)| {
            let (empirical, stderr) = empirical_mmse(&samples, target, &given)?;
            Ok(McEntry { name, analytic, empirical, stderr })
        })
        .collect::<Result<_>>()?;
    Ok(McReport { n_samples: n, seed, entries })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_shaped() {
        let m = SourceModel::new(1.0, 1.0, 1.0).unwrap();
        let p = SchemeParams::uniform(1.0).unwrap();
        let a = sample_joint(&m, &p, 20_000, 7).unwrap();
        let b = sample_joint(&m, &p, 20_000, 7).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 20_000);
        assert_eq!(a.labels().len(), 7);
        let c = sample_joint(&m, &p, 20_000, 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn self_and_empty_conditioning() {
        let m = SourceModel::new(1.0, 1.0, 1.0).unwrap();
        let p = SchemeParams::uniform(1.0).unwrap();
        let s = sample_joint(&m, &p, 50_000, 1).unwrap();
        assert_eq!(empirical_mmse(&s, Var::S, &[Var::S, Var::X1]).unwrap(), (0.0, 0.0));
        let (v, se) = empirical_mmse(&s, Var::S, &[]).unwrap();
        assert!((v - 1.0).abs() <= 5.0 * se);
    }

    #[test]
    fn collinear_conditioners_rejected() {
        let m = SourceModel::new(1.0, 1.0, 1.0).unwrap();
        // w = 0 makes U11 equal to X1
        let p = SchemeParams::new(0.0, 1.0, 1.0, 1.0, 0.0, 0.0).unwrap();
        let s = sample_joint(&m, &p, 1000, 1).unwrap();
        assert!(matches!(
            empirical_mmse(&s, Var::S, &[Var::X1, Var::U11]),
            Err(Error::DegenerateRegression(_))
        ));
    }
}
