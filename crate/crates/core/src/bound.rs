//! The converse side: the `r_k` function, the parameter sets `F_k`, `F`,
//! `P1`, `P2`, the projection of `F` onto `P = P1 u P2`, and the lower-bound
//! search
//!
//! ```text
//! inf_{p in P}  sup_{s1, s2 >= 0}  r_1(d11, d12, t1, s1) + r_2(d21, d22, t2, s2) + 1/2 log(s_S^2 / (D1 D2))
//! ```
//!
//! The infimum is taken over the two manifolds directly. On `P1` the free
//! coordinates are `(d11, d12, e1)` with `e_k = e^{-2 t_k}`; the side-receiver
//! equalities give `d21, d22` and the central equality gives `e2`. On `P2`
//! the free coordinates are `(d11, d12)` and `e_k` is pinned to
//! `min(d_k1, d_k2) / s_Nk`. In these coordinates every constraint is a
//! box or a linear bound, so the feasible slice of `e1` is an interval.

use rayon::prelude::*;
use serde::Serialize;

use crate::equivalence::{alphas, g_fn};
use crate::gaussmodel::SourceModel;
use crate::scheme::DistortionTriple;
use crate::{Constraint, Error, NoiseVar, Result};

/// Relative tolerance for set membership and equalities.
pub const MEMBERSHIP_RTOL: f64 = 1e-9;

/// The converse parameter vector `(d11, d12, d21, d22, t1, t2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
pub struct BoundParams {
    pub d11: f64,
    pub d12: f64,
    pub d21: f64,
    pub d22: f64,
    pub t1: f64,
    pub t2: f64,
}

impl BoundParams {
    pub fn d(&self, k: usize, l: usize) -> f64 {
        match (k, l) {
            (1, 1) => self.d11,
            (1, 2) => self.d12,
            (2, 1) => self.d21,
            (2, 2) => self.d22,
            _ => panic!("index ({k},{l}) out of range"),
        }
    }

    pub fn t(&self, k: usize) -> f64 {
        match k {
            1 => self.t1,
            2 => self.t2,
            _ => panic!("encoder index must be 1 or 2, got {k}"),
        }
    }

    /// `(d_k1, d_k2, t_k)`.
    pub fn slice(&self, k: usize) -> (f64, f64, f64) {
        (self.d(k, 1), self.d(k, 2), self.t(k))
    }

    fn set_d(&mut self, k: usize, l: usize, v: f64) {
        match (k, l) {
            (1, 1) => self.d11 = v,
            (1, 2) => self.d12 = v,
            (2, 1) => self.d21 = v,
            (2, 2) => self.d22 = v,
            _ => panic!("index ({k},{l}) out of range"),
        }
    }
}

fn le(a: f64, b: f64) -> bool {
    a <= b + MEMBERSHIP_RTOL * a.abs().max(b.abs())
}

fn approx_eq(a: f64, b: f64) -> bool {
    (a - b).abs() <= MEMBERSHIP_RTOL * a.abs().max(b.abs())
}

/// `(d1, d2, t) in F_k`: `s_N e^{-2t} <= min(d1, d2)` and
/// `max(d1, d2) <= s_N`, all nonnegative.
pub fn in_f_k(sigma_n2: f64, d1: f64, d2: f64, t: f64) -> bool {
    if !(d1 >= 0.0 && d2 >= 0.0 && t >= 0.0) || d1.is_nan() || d2.is_nan() {
        return false;
    }
    le(sigma_n2 * (-2.0 * t).exp(), d1.min(d2)) && le(d1.max(d2), sigma_n2)
}

/// Right-hand side of the side-receiver constraint for receiver `l`,
/// `1/s_S + 1/s_N1 + 1/s_N2 - d_1l/s_N1^2 - d_2l/s_N2^2`.
pub fn side_information(model: &SourceModel, d_1l: f64, d_2l: f64) -> f64 {
    let (s1, s2) = (model.sigma_n1_2, model.sigma_n2_2);
    1.0 / model.sigma_s2 + 1.0 / s1 + 1.0 / s2 - d_1l / (s1 * s1) - d_2l / (s2 * s2)
}

/// Right-hand side of the central constraint, `1/s_S + sum_k (1 - e^{-2 t_k}) / s_Nk`.
pub fn central_information(model: &SourceModel, t1: f64, t2: f64) -> f64 {
    1.0 / model.sigma_s2 - (-2.0 * t1).exp_m1() / model.sigma_n1_2 - (-2.0 * t2).exp_m1() / model.sigma_n2_2
}

/// `p in F`: both slices in `F_k` and all three distortion inequalities.
pub fn in_f(model: &SourceModel, targets: &DistortionTriple, p: &BoundParams) -> bool {
    (1..=2).all(|k| {
        let (d1, d2, t) = p.slice(k);
        in_f_k(model.noise(k), d1, d2, t)
    }) && (1..=2).all(|l| le(1.0 / targets.get(l), side_information(model, p.d(1, l), p.d(2, l))))
        && le(1.0 / targets.d0, central_information(model, p.t1, p.t2))
}

/// `r_k(d1, d2, t, s)` in nats for `(d1, d2, t) in F_k` and `s >= 0`.
pub fn r_fn(sigma_n2: f64, d1: f64, d2: f64, t: f64, sigma_z2: f64) -> Result<f64> {
    if !in_f_k(sigma_n2, d1, d2, t) {
        return Err(Error::Domain(format!("(d1, d2, t) = ({d1}, {d2}, {t}) is outside F_k for s_N = {sigma_n2}")));
    }
    if !(sigma_z2 >= 0.0) {
        return Err(Error::Domain(format!("sigma_Z^2 must be >= 0, got {sigma_z2}")));
    }
    if sigma_z2 == f64::INFINITY {
        return Ok(t);
    }
    Ok(r_eval(sigma_n2, d1, d2, t, sigma_n2 * (-2.0 * t).exp(), sigma_z2))
}

/// `r_k` with `v = s_N e^{-2t}` supplied; no domain checks.
fn r_eval(sn: f64, d1: f64, d2: f64, t: f64, v: f64, s: f64) -> f64 {
    t + 0.5 * ((sn + s) / ((d1 + s) * (d2 + s))).ln() + 0.5 * (v + s).ln()
}

/// The maximizing `sigma_Z^2` of `r_k` and the supremum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SupPoint {
    pub argmax: NoiseVar,
    pub value: f64,
}

/// `sup_{s >= 0} r_k(d1, d2, t, s)`.
///
/// Stationary points solve
/// `1/(s_N + s) + 1/(v + s) = 1/(d1 + s) + 1/(d2 + s)`, which after clearing
/// denominators is the quadratic
/// `[(d1 + d2) - (s_N + v)] s^2 + 2 (d1 d2 - s_N v) s + (s_N + v) d1 d2 - (d1 + d2) s_N v = 0`.
/// The candidates are `s = 0`, the nonnegative roots and the limit
/// `s -> inf`, where `r -> t`.
pub fn sup_sigma_z(sigma_n2: f64, d1: f64, d2: f64, t: f64) -> Result<SupPoint> {
    if !in_f_k(sigma_n2, d1, d2, t) {
        return Err(Error::Domain(format!("(d1, d2, t) = ({d1}, {d2}, {t}) is outside F_k for s_N = {sigma_n2}")));
    }
    Ok(sup_unchecked(sigma_n2, d1, d2, t, sigma_n2 * (-2.0 * t).exp()))
}

fn sup_unchecked(sn: f64, d1: f64, d2: f64, t: f64, v: f64) -> SupPoint {
    let qa = (d1 + d2) - (sn + v);
    let qb = 2.0 * (d1 * d2 - sn * v);
    let qc = (sn + v) * d1 * d2 - (d1 + d2) * sn * v;

    let mut best = SupPoint { argmax: NoiseVar::Finite(0.0), value: r_eval(sn, d1, d2, t, v, 0.0) };
    let mut consider = |s: f64| {
        if s.is_finite() && s > 0.0 {
            let value = r_eval(sn, d1, d2, t, v, s);
            if value > best.value {
                best = SupPoint { argmax: NoiseVar::Finite(s), value };
            }
        }
    };
    let scale = qa.abs().max(qb.abs()).max(qc.abs());
    if scale > 0.0 {
        if qa.abs() <= 1e-14 * scale {
            if qb != 0.0 {
                consider(-qc / qb);
            }
        } else {
            let disc = qb * qb - 4.0 * qa * qc;
            if disc >= 0.0 {
                let root = disc.sqrt();
                let q = -0.5 * (qb + qb.signum() * root);
                if q != 0.0 {
                    consider(q / qa);
                    consider(qc / q);
                } else {
                    consider(0.0);
                }
            }
        }
    }
    if t > best.value {
        best = SupPoint { argmax: NoiseVar::Infinite, value: t };
    }
    best
}

/// The distortion condition under which the bound is tight:
/// `1/D1 + 1/D2 - max(1/s_N1, 1/s_N2) - 1/s_S >= 1/D0`.
pub fn condition_holds(model: &SourceModel, targets: &DistortionTriple) -> bool {
    condition_margin(model, targets) >= 0.0
}

/// Left-hand side minus right-hand side of [`condition_holds`].
pub fn condition_margin(model: &SourceModel, targets: &DistortionTriple) -> f64 {
    let max_inv_noise = (1.0 / model.sigma_n1_2).max(1.0 / model.sigma_n2_2);
    1.0 / targets.d1 + 1.0 / targets.d2 - max_inv_noise - 1.0 / model.sigma_s2 - 1.0 / targets.d0
}

/// Which part of the partition of `F_k` a slice belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FClass {
    /// `g(0) > 0` and `g(s_N) <= 0`: a root of `g` exists in `(0, s_N]`.
    F1,
    /// `g(0) <= 0`.
    F2,
    /// `g(s_N) > 0`.
    F3,
    /// Not in `F_k` at all.
    Outside,
}

/// Classifies `(d1, d2, t)` by the signs of `g_k` at `0` and `s_N`.
pub fn classify_f_k(sigma_n2: f64, d1: f64, d2: f64, t: f64) -> FClass {
    if !in_f_k(sigma_n2, d1, d2, t) {
        return FClass::Outside;
    }
    let alpha = alphas(sigma_n2, d1, d2, t);
    if g_fn(&alpha, 0.0) <= 0.0 {
        FClass::F2
    } else if g_fn(&alpha, sigma_n2) <= 0.0 {
        FClass::F1
    } else {
        FClass::F3
    }
}

/// `d_k1 + d_k2 - s_Nk (1 + e^{-2 t_k})`; nonpositive on `P` under the condition.
pub fn pair_margin(sigma_n2: f64, d1: f64, d2: f64, t: f64) -> f64 {
    d1 + d2 - sigma_n2 * (1.0 + (-2.0 * t).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PClass {
    P1,
    P2,
    None,
}

/// Membership in `P1` (all three distortion equalities) or `P2` (side
/// equalities, strict central inequality, both `t_k` on the `F` boundary).
pub fn in_p(model: &SourceModel, targets: &DistortionTriple, p: &BoundParams) -> PClass {
    if !in_f(model, targets, p) {
        return PClass::None;
    }
    let sides = (1..=2).all(|l| approx_eq(1.0 / targets.get(l), side_information(model, p.d(1, l), p.d(2, l))));
    if !sides {
        return PClass::None;
    }
    let central = central_information(model, p.t1, p.t2);
    if approx_eq(1.0 / targets.d0, central) {
        return PClass::P1;
    }
    let pinned = (1..=2).all(|k| {
        let (d1, d2, t) = p.slice(k);
        approx_eq(model.noise(k) * (-2.0 * t).exp(), d1.min(d2))
    });
    if pinned && central > 1.0 / targets.d0 {
        PClass::P2
    } else {
        PClass::None
    }
}

/// Moves a point of `F` into `P` by raising `d11, d12` (then `d21, d22`)
/// until the side constraints are tight, then lowering `t1` (then `t2`) until
/// the central constraint is tight or `t_k` reaches the `F` boundary.
pub fn project_to_p(model: &SourceModel, targets: &DistortionTriple, p: &BoundParams) -> Result<BoundParams> {
    targets.validate_for(model)?;
    if !in_f(model, targets, p) {
        return Err(Error::Domain(format!("{p:?} is not in F for these targets")));
    }
    let (s1, s2) = (model.sigma_n1_2, model.sigma_n2_2);
    let base = 1.0 / model.sigma_s2 + 1.0 / s1 + 1.0 / s2;
    let mut q = *p;

    for l in 1..=2 {
        let budget = base - 1.0 / targets.get(l);
        let d1 = (s1 * s1 * (budget - q.d(2, l) / (s2 * s2))).min(s1).max(q.d(1, l));
        q.set_d(1, l, d1);
        let d2 = (s2 * s2 * (budget - d1 / (s1 * s1))).min(s2).max(q.d(2, l));
        q.set_d(2, l, d2);
    }

    let excess = 1.0 / targets.d0 - 1.0 / model.sigma_s2;
    let mut e = [(-2.0 * q.t1).exp(), (-2.0 * q.t2).exp()];
    for k in 1..=2 {
        let (sn, so) = if k == 1 { (s1, s2) } else { (s2, s1) };
        let other = e[2 - k];
        let tight = 1.0 - sn * (excess - (1.0 - other) / so);
        let boundary = q.d(k, 1).min(q.d(k, 2)) / sn;
        e[k - 1] = tight.min(boundary).max(e[k - 1]);
        if e[k - 1] < boundary {
            break;
        }
    }
    q.t1 = -0.5 * e[0].ln();
    q.t2 = -0.5 * e[1].ln();
    Ok(q)
}

/// Value of the bound objective at a point of `P` (or `F`), with the
/// per-encoder maximizers.
pub fn bound_objective(model: &SourceModel, targets: &DistortionTriple, p: &BoundParams) -> Result<(f64, [SupPoint; 2])> {
    let s1 = sup_sigma_z(model.sigma_n1_2, p.d11, p.d12, p.t1)?;
    let s2 = sup_sigma_z(model.sigma_n2_2, p.d21, p.d22, p.t2)?;
    Ok((s1.value + s2.value + rate_offset(model, targets), [s1, s2]))
}

fn rate_offset(model: &SourceModel, targets: &DistortionTriple) -> f64 {
    0.5 * (model.sigma_s2 * model.sigma_s2 / (targets.d1 * targets.d2)).ln()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundOptions {
    /// Grid points per free dimension.
    pub grid: usize,
    /// Refinement passes around the incumbent.
    pub refinements: usize,
    /// Window shrink factor per refinement pass.
    pub shrink: f64,
}

impl Default for BoundOptions {
    fn default() -> Self {
        BoundOptions { grid: 64, refinements: 2, shrink: 8.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Branch {
    P1,
    P2,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LowerBound {
    /// The bound in nats.
    pub value: f64,
    pub params: BoundParams,
    pub branch: Branch,
    pub sigma_z: [SupPoint; 2],
    /// Best value found on each branch, `None` when the branch is empty.
    pub branch_values: [Option<f64>; 2],
}

/// Constants of one instance in the reduced coordinates.
struct Reduced {
    s1: f64,
    s2: f64,
    /// `1/s_S + 1/s_N1 + 1/s_N2 - 1/D_l` for `l = 1, 2`.
    budget: [f64; 2],
    /// `1/D0 - 1/s_S`.
    excess: f64,
    offset: f64,
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    value: f64,
    coords: [f64; 3],
}

impl Candidate {
    const NONE: Candidate = Candidate { value: f64::INFINITY, coords: [f64::INFINITY; 3] };

    fn better(self, other: Candidate) -> Candidate {
        match self.value.total_cmp(&other.value) {
            std::cmp::Ordering::Less => self,
            std::cmp::Ordering::Greater => other,
            std::cmp::Ordering::Equal => {
                let ord = self.coords.iter().zip(other.coords.iter()).map(|(a, b)| a.total_cmp(b)).find(|o| o.is_ne());
                if ord == Some(std::cmp::Ordering::Greater) { other } else { self }
            }
        }
    }
}

impl Reduced {
    fn new(model: &SourceModel, targets: &DistortionTriple) -> Self {
        let base = 1.0 / model.sigma_s2 + 1.0 / model.sigma_n1_2 + 1.0 / model.sigma_n2_2;
        Reduced {
            s1: model.sigma_n1_2,
            s2: model.sigma_n2_2,
            budget: [base - 1.0 / targets.d1, base - 1.0 / targets.d2],
            excess: 1.0 / targets.d0 - 1.0 / model.sigma_s2,
            offset: rate_offset(model, targets),
        }
    }

    /// Feasible range of `d_1l` after eliminating `d_2l`.
    fn d1_range(&self, l: usize) -> Option<(f64, f64)> {
        let b = self.budget[l - 1];
        let lo = (self.s1 * self.s1 * (b - 1.0 / self.s2)).max(0.0);
        let hi = (self.s1 * self.s1 * b).min(self.s1);
        (hi >= lo).then_some((lo, hi))
    }

    fn d2(&self, l: usize, d1: f64) -> f64 {
        (self.s2 * self.s2 * (self.budget[l - 1] - d1 / (self.s1 * self.s1))).clamp(0.0, self.s2)
    }

    /// `e2` from the central equality.
    fn e2_from(&self, e1: f64) -> f64 {
        1.0 - self.s2 * self.excess + self.s2 / self.s1 * (1.0 - e1)
    }

    /// Feasible interval of `e1` on `P1` given the four `d`s.
    fn e1_range(&self, d: &[f64; 4]) -> Option<(f64, f64)> {
        let m1 = d[0].min(d[1]) / self.s1;
        let m2 = d[2].min(d[3]) / self.s2;
        let lo = (1.0 - self.s1 / self.s2 * (m2 - 1.0 + self.s2 * self.excess)).max(0.0);
        let hi = m1.min(1.0 + self.s1 / self.s2 * (1.0 - self.s2 * self.excess));
        (hi >= lo && hi > 0.0).then_some((lo, hi))
    }

    fn ds(&self, d11: f64, d12: f64) -> [f64; 4] {
        [d11, d12, self.d2(1, d11), self.d2(2, d12)]
    }

    fn value(&self, d: &[f64; 4], e1: f64, e2: f64) -> f64 {
        if !(e1 > 0.0 && e2 > 0.0) || d.iter().any(|&x| x <= 0.0) {
            return f64::INFINITY;
        }
        // e can exceed min(d)/s by roundoff at the F boundary
        let v1 = (self.s1 * e1).min(d[0].min(d[1]));
        let v2 = (self.s2 * e2).min(d[2].min(d[3]));
        let t1 = -0.5 * e1.ln();
        let t2 = -0.5 * e2.ln();
        sup_unchecked(self.s1, d[0], d[1], t1, v1).value + sup_unchecked(self.s2, d[2], d[3], t2, v2).value + self.offset
    }

    fn p1_value(&self, d11: f64, d12: f64, e1: f64) -> f64 {
        let d = self.ds(d11, d12);
        self.value(&d, e1, self.e2_from(e1))
    }

    fn p2_value(&self, d11: f64, d12: f64) -> f64 {
        let d = self.ds(d11, d12);
        let e1 = d[0].min(d[1]) / self.s1;
        let e2 = d[2].min(d[3]) / self.s2;
        if (1.0 - e1) / self.s1 + (1.0 - e2) / self.s2 < self.excess {
            return f64::INFINITY;
        }
        self.value(&d, e1, e2)
    }

    fn to_params(&self, d: &[f64; 4], e1: f64, e2: f64) -> BoundParams {
        BoundParams { d11: d[0], d12: d[1], d21: d[2], d22: d[3], t1: -0.5 * e1.ln(), t2: -0.5 * e2.ln() }
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n <= 1 || hi <= lo {
        return vec![0.5 * (lo + hi)];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

fn window(center: f64, width: f64, range: (f64, f64)) -> (f64, f64) {
    ((center - 0.5 * width).max(range.0), (center + 0.5 * width).min(range.1))
}

fn search_p1(r: &Reduced, opts: &BoundOptions) -> Option<Candidate> {
    let range11 = r.d1_range(1)?;
    let range12 = r.d1_range(2)?;
    let n = opts.grid.max(2);

    let mut win11 = range11;
    let mut win12 = range12;
    // absolute width of the e1 window; None means the full feasible slice
    let mut e_width: Option<f64> = None;
    let mut best = Candidate::NONE;

    for pass in 0..=opts.refinements {
        let xs = linspace(win11.0, win11.1, n);
        let ys = linspace(win12.0, win12.1, n);
        let incumbent = best;
        let found = xs
            .par_iter()
            .map(|&d11| {
                let mut local = Candidate::NONE;
                for &d12 in &ys {
                    let d = r.ds(d11, d12);
                    let Some(full) = r.e1_range(&d) else { continue };
                    let (lo, hi) = match e_width {
                        Some(w) => window(incumbent.coords[2], w, full),
                        None => full,
                    };
                    if hi < lo {
                        continue;
                    }
                    for e1 in linspace(lo.max(f64::MIN_POSITIVE), hi, n) {
                        let value = r.p1_value(d11, d12, e1);
                        local = local.better(Candidate { value, coords: [d11, d12, e1] });
                    }
                }
                local
            })
            .reduce(|| Candidate::NONE, Candidate::better);
        best = best.better(found);
        if !best.value.is_finite() {
            return None;
        }
        if pass == opts.refinements {
            break;
        }
        let shrink = opts.shrink.max(1.0);
        win11 = window(best.coords[0], (win11.1 - win11.0) / shrink, range11);
        win12 = window(best.coords[1], (win12.1 - win12.0) / shrink, range12);
        let full_e = r.e1_range(&r.ds(best.coords[0], best.coords[1])).map_or(0.0, |(lo, hi)| hi - lo);
        e_width = Some(e_width.unwrap_or(full_e) / shrink);
    }
    Some(best)
}

fn search_p2(r: &Reduced, opts: &BoundOptions) -> Option<Candidate> {
    let range11 = r.d1_range(1)?;
    let range12 = r.d1_range(2)?;
    let n = opts.grid.max(2);
    let mut win11 = range11;
    let mut win12 = range12;
    let mut best = Candidate::NONE;
    for pass in 0..=opts.refinements {
        let xs = linspace(win11.0, win11.1, n);
        let ys = linspace(win12.0, win12.1, n);
        let found = xs
            .par_iter()
            .map(|&d11| {
                ys.iter().fold(Candidate::NONE, |acc, &d12| {
                    acc.better(Candidate { value: r.p2_value(d11, d12), coords: [d11, d12, 0.0] })
                })
            })
            .reduce(|| Candidate::NONE, Candidate::better);
        best = best.better(found);
        if !best.value.is_finite() {
            return None;
        }
        if pass == opts.refinements {
            break;
        }
        let shrink = opts.shrink.max(1.0);
        win11 = window(best.coords[0], (win11.1 - win11.0) / shrink, range11);
        win12 = window(best.coords[1], (win12.1 - win12.0) / shrink, range12);
    }
    Some(best)
}

/// The sum-rate lower bound: grid search plus refinement on both branches
/// of `P`, keeping the smaller value.
pub fn lower_bound(model: &SourceModel, targets: &DistortionTriple, opts: &BoundOptions) -> Result<LowerBound> {
    model.validate()?;
    targets.validate_for(model)?;
    let floor = model.mmse_given_observations();
    if targets.d0 <= floor {
        return Err(Error::Infeasible {
            constraint: Constraint::Central,
            detail: format!("D0 = {} does not exceed Var(S | X1, X2) = {floor}", targets.d0),
        });
    }
    if opts.grid == 0 {
        return Err(Error::Domain("grid resolution must be positive".into()));
    }
    let r = Reduced::new(model, targets);

    let p1 = search_p1(&r, opts).map(|c| {
        let d = r.ds(c.coords[0], c.coords[1]);
        (c.value, r.to_params(&d, c.coords[2], r.e2_from(c.coords[2])))
    });
    let p2 = search_p2(&r, opts).map(|c| {
        let d = r.ds(c.coords[0], c.coords[1]);
        (c.value, r.to_params(&d, d[0].min(d[1]) / r.s1, d[2].min(d[3]) / r.s2))
    });
    let branch_values = [p1.map(|x| x.0), p2.map(|x| x.0)];

    let (branch, params) = match (p1, p2) {
        (Some(a), Some(b)) if b.0 < a.0 => (Branch::P2, b.1),
        (Some(a), _) => (Branch::P1, a.1),
        (None, Some(b)) => (Branch::P2, b.1),
        (None, None) => {
            return Err(Error::Infeasible {
                constraint: Constraint::ParameterSet,
                detail: "no point of P1 or P2 is compatible with the F bounds".into(),
            })
        }
    };
    let sigma_z = [
        sup_unchecked(r.s1, params.d11, params.d12, params.t1, (r.s1 * (-2.0 * params.t1).exp()).min(params.d11.min(params.d12))),
        sup_unchecked(r.s2, params.d21, params.d22, params.t2, (r.s2 * (-2.0 * params.t2).exp()).min(params.d21.min(params.d22))),
    ];
    let value = sigma_z[0].value + sigma_z[1].value + r.offset;
    Ok(LowerBound { value, params, branch, sigma_z, branch_values })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit() -> SourceModel {
        SourceModel::new(1.0, 1.0, 1.0).unwrap()
    }

    #[test]
    fn r_at_zero_noise() {
        let r = r_fn(1.0, 0.5, 0.5, 1.0, 0.0).unwrap();
        assert!((r - 2f64.ln()).abs() < 1e-15);
        assert!(r_fn(1.0, 1.5, 0.5, 1.0, 0.0).is_err());
        assert!(r_fn(1.0, 0.5, 0.5, 0.1, 0.0).is_err());
        assert_eq!(r_fn(1.0, 0.5, 0.5, 1.0, f64::INFINITY).unwrap(), 1.0);
    }

    #[test]
    fn sup_monotone_cases() {
        let t: f64 = 0.4;
        let v = (-2.0 * t).exp();
        let s = sup_sigma_z(1.0, v, v, t).unwrap();
        assert_eq!(s.argmax, NoiseVar::Finite(0.0));
        assert!((s.value - 2.0 * t).abs() < 1e-14);
        let s = sup_sigma_z(1.0, 1.0, 1.0, t).unwrap();
        assert_eq!(s.argmax, NoiseVar::Infinite);
        assert_eq!(s.value, t);
    }

    #[test]
    fn condition_examples() {
        let m = unit();
        assert!(condition_holds(&m, &DistortionTriple::new(0.4, 0.4, 0.35).unwrap()));
        assert!(!condition_holds(&m, &DistortionTriple::new(0.4, 0.4, 0.3).unwrap()));
        assert!(condition_holds(&m, &DistortionTriple::new(0.4, 0.4, 1.0 / 3.0).unwrap()));
    }

    #[test]
    fn classification_examples() {
        let t_half = 0.5 * 2f64.ln();
        assert_eq!(classify_f_k(1.0, 0.5, 0.5, t_half), FClass::F2);
        assert_eq!(classify_f_k(1.0, 0.6, 0.6, 0.5 * 3.5f64.ln()), FClass::F1);
        // d1 + d2 > s_N (1 + e^{-2t})
        assert_eq!(classify_f_k(1.0, 0.9, 0.95, 0.5 * 5f64.ln()), FClass::F3);
        assert_eq!(classify_f_k(1.0, 1.2, 0.5, 1.0), FClass::Outside);
    }

    #[test]
    fn projection_reaches_p() {
        let m = unit();
        let targets = DistortionTriple::new(0.4, 0.4, 0.35).unwrap();
        let p = BoundParams { d11: 0.1, d12: 0.15, d21: 0.2, d22: 0.1, t1: 2.0, t2: 2.5 };
        assert!(in_f(&m, &targets, &p));
        let q = project_to_p(&m, &targets, &p).unwrap();
        assert_ne!(in_p(&m, &targets, &q), PClass::None);
        assert!(q.d11 >= p.d11 && q.d22 >= p.d22 && q.t1 <= p.t1 && q.t2 <= p.t2);
        let again = project_to_p(&m, &targets, &q).unwrap();
        assert_eq!(in_p(&m, &targets, &again), in_p(&m, &targets, &q));
        for (a, b) in [(again.d11, q.d11), (again.d21, q.d21), (again.t1, q.t1), (again.t2, q.t2)] {
            assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
        }
    }

    #[test]
    fn projection_rejects_points_outside_f() {
        let m = unit();
        let targets = DistortionTriple::new(0.4, 0.4, 0.35).unwrap();
        let p = BoundParams { d11: 0.9, d12: 0.9, d21: 0.9, d22: 0.9, t1: 2.0, t2: 2.0 };
        assert!(project_to_p(&m, &targets, &p).is_err());
    }

    #[test]
    fn symmetric_lower_bound_is_finite() {
        let m = unit();
        let targets = DistortionTriple::new(0.4, 0.4, 0.35).unwrap();
        let lb = lower_bound(&m, &targets, &BoundOptions::default()).unwrap();
        assert!(lb.value.is_finite() && lb.value > 0.0);
        assert_ne!(in_p(&m, &targets, &lb.params), PClass::None);
    }
}
