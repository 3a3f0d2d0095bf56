use vceo::bound::{condition_holds, lower_bound, project_to_p, BoundOptions, Branch, LowerBound};
use vceo::equivalence::construct_matching_scheme;
use vceo::mc;
use vceo::scheme::{optimize_sum_rate, OptimizeOptions, OptimizedScheme};
use vceo::{Error, NoiseVar, SchemeParams};

use crate::instance::{InstanceSpec, SweepVar, Unit};
use crate::report::{Field, OutputFormat, Report, Table};

pub const EXIT_OK: i32 = 0;
pub const EXIT_PARSE: i32 = 1;
pub const EXIT_INFEASIBLE: i32 = 2;
pub const EXIT_VERIFY_FAIL: i32 = 3;
pub const EXIT_OUTSIDE_CONDITION: i32 = 4;

/// Fixed header of the sweep CSV.
pub const SWEEP_COLUMNS: [&str; 6] =
    ["swept_var", "swept_value", "achievable_nats", "lower_bound_nats", "gap_nats", "condition_holds"];

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

impl Outcome {
    fn ok(stdout: String) -> Self {
        Outcome { code: EXIT_OK, stdout, stderr: String::new() }
    }

    fn fail(code: i32, stderr: String) -> Self {
        Outcome { code, stdout: String::new(), stderr }
    }

    pub fn from_error(e: &Error) -> Self {
        let code = match e {
            Error::Infeasible { .. } => EXIT_INFEASIBLE,
            Error::InvalidModel(_) | Error::InvalidTargets(_) | Error::InvalidParams(_) => EXIT_PARSE,
            _ => EXIT_VERIFY_FAIL,
        };
        Outcome::fail(code, format!("error: {e}\n"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Settings {
    pub unit: Unit,
    pub format: OutputFormat,
}

pub fn optimize_options(spec: &InstanceSpec) -> OptimizeOptions {
    OptimizeOptions {
        starts: spec.options.starts,
        tol: spec.options.tol,
        seed: spec.options.seed,
        ..OptimizeOptions::default()
    }
}

pub fn bound_options(spec: &InstanceSpec) -> BoundOptions {
    BoundOptions { grid: spec.options.grid, refinements: spec.options.refinements, ..BoundOptions::default() }
}

fn check_targets(spec: &InstanceSpec) -> Result<(), Outcome> {
    spec.check_targets().map_err(|e| Outcome::fail(EXIT_PARSE, format!("error: {e}\n")))
}

fn push_params(r: &mut Report, p: &SchemeParams) {
    r.num("w11", p.w11).num("w12", p.w12).num("w21", p.w21).num("w22", p.w22).num("a1", p.a1).num("a2", p.a2);
}

fn push_targets(r: &mut Report, spec: &InstanceSpec) {
    r.num("D1", spec.targets.d1).num("D2", spec.targets.d2).num("D0", spec.targets.d0);
}

fn noise_num(v: NoiseVar) -> f64 {
    v.finite().unwrap_or(f64::INFINITY)
}

fn branch_name(b: Branch) -> &'static str {
    match b {
        Branch::P1 => "P1",
        Branch::P2 => "P2",
    }
}

const CONDITION_NOTE: &str = "theorem condition not satisfied; equality not guaranteed";

pub fn sum_rate(spec: &InstanceSpec, s: Settings) -> Outcome {
    if let Err(o) = check_targets(spec) {
        return o;
    }
    let model = spec.source_model();
    let targets = spec.distortion_targets();
    let opt = match optimize_sum_rate(&model, &targets, &optimize_options(spec)) {
        Ok(o) => o,
        Err(e) => return Outcome::from_error(&e),
    };
    let mut r = Report::default();
    r.text("unit", s.unit.name())
        .num("sum_rate", s.unit.scale(opt.rates.sum_rate))
        .num("mi_observations", s.unit.scale(opt.rates.term_mi_joint))
        .num("mi_cross", s.unit.scale(opt.rates.term_mi_cross));
    push_params(&mut r, &opt.params);
    r.num("delta_1", opt.distortions[0]).num("delta_2", opt.distortions[1]).num("delta_0", opt.distortions[2]);
    push_targets(&mut r, spec);
    r.flag("condition_holds", condition_holds(&model, &targets));
    Outcome::ok(r.render(s.format))
}

fn push_bound(r: &mut Report, lb: &LowerBound, unit: Unit) {
    r.num("lower_bound", unit.scale(lb.value)).text("branch", branch_name(lb.branch));
    let p = &lb.params;
    r.num("d11", p.d11).num("d12", p.d12).num("d21", p.d21).num("d22", p.d22).num("t1", p.t1).num("t2", p.t2);
    r.num("sigma_z1_2", noise_num(lb.sigma_z[0].argmax)).num("sigma_z2_2", noise_num(lb.sigma_z[1].argmax));
}

pub fn lower_bound_cmd(spec: &InstanceSpec, s: Settings) -> Outcome {
    if let Err(o) = check_targets(spec) {
        return o;
    }
    let model = spec.source_model();
    let targets = spec.distortion_targets();
    let lb = match lower_bound(&model, &targets, &bound_options(spec)) {
        Ok(lb) => lb,
        Err(e) => return Outcome::from_error(&e),
    };
    let holds = condition_holds(&model, &targets);
    let mut r = Report::default();
    r.text("unit", s.unit.name());
    push_bound(&mut r, &lb, s.unit);
    r.flag("condition_holds", holds);
    let mut out = Outcome::ok(String::new());
    if !holds {
        r.text("note", CONDITION_NOTE);
        out.stderr = format!("warning: {CONDITION_NOTE}\n");
    }
    out.stdout = r.render(s.format);
    out
}

/// `verify` with the identity tolerance `identity_tol` (strict) and the
/// optimizer relative tolerance `optimizer_rel_tol` (inclusive).
pub fn verify(spec: &InstanceSpec, s: Settings, identity_tol: f64, optimizer_rel_tol: f64) -> Outcome {
    if let Err(o) = check_targets(spec) {
        return o;
    }
    let model = spec.source_model();
    let targets = spec.distortion_targets();
    if !condition_holds(&model, &targets) {
        return Outcome {
            code: EXIT_OUTSIDE_CONDITION,
            stdout: String::new(),
            stderr: "outside theorem condition; no certificate attempted\n".into(),
        };
    }
    let run = || -> vceo::Result<(LowerBound, vceo::equivalence::EquivalenceReport, OptimizedScheme)> {
        let lb = lower_bound(&model, &targets, &bound_options(spec))?;
        let q = project_to_p(&model, &targets, &lb.params)?;
        let eq = construct_matching_scheme(&model, &targets, &q)?;
        let opt = optimize_sum_rate(&model, &targets, &optimize_options(spec))?;
        Ok((lb, eq, opt))
    };
    let (lb, eq, opt) = match run() {
        Ok(x) => x,
        Err(e) => return Outcome::from_error(&e),
    };

    let identity_pass = eq.diff < identity_tol;
    let opt_gap = (opt.rates.sum_rate - lb.value).abs() / lb.value.abs().max(f64::MIN_POSITIVE);
    let optimizer_pass = opt_gap <= optimizer_rel_tol;
    let pass = identity_pass && optimizer_pass && eq.meets_targets;

    let u = s.unit;
    let mut r = Report::default();
    r.text("result", if pass { "PASS" } else { "FAIL" }).text("unit", u.name());
    push_bound(&mut r, &lb, u);
    r.num("identity_lhs", u.scale(eq.lhs))
        .num("identity_rhs", u.scale(eq.rhs))
        .num("identity_diff", u.scale(eq.diff))
        .num("identity_tol", identity_tol)
        .flag("identity_pass", identity_pass)
        .num("constructed_sum_rate", u.scale(eq.achievable))
        .num("optimized_sum_rate", u.scale(opt.rates.sum_rate))
        .num("optimizer_rel_gap", opt_gap)
        .num("optimizer_rel_tol", optimizer_rel_tol)
        .flag("optimizer_pass", optimizer_pass)
        .flag("constructed_meets_targets", eq.meets_targets);
    for (k, enc) in eq.encoders.iter().enumerate() {
        let k = k + 1;
        r.text(&format!("case_{k}"), format!("{:?}", enc.class))
            .num(&format!("a_star_{k}"), enc.a_star.unwrap_or(0.0))
            .num(&format!("sigma_z{k}_2_constructed"), noise_num(enc.sigma_z))
            .num(&format!("conditional_mi_{k}"), u.scale(enc.conditional_mi));
    }
    push_params(&mut r, &eq.scheme);
    r.num("delta_1", eq.distortions[0]).num("delta_2", eq.distortions[1]).num("delta_0", eq.distortions[2]);

    Outcome { code: if pass { EXIT_OK } else { EXIT_VERIFY_FAIL }, stdout: r.render(s.format), stderr: String::new() }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    /// `None` where the point is invalid or infeasible.
    pub achievable: Option<f64>,
    pub lower_bound: Option<f64>,
    pub condition_holds: bool,
}

impl SweepRow {
    pub fn gap(&self) -> Option<f64> {
        Some(self.achievable? - self.lower_bound?)
    }
}

/// Evaluates the optimizer and the bound at each value of `var`.
pub fn sweep_rows(spec: &InstanceSpec, var: SweepVar, values: &[f64]) -> Vec<SweepRow> {
    values
        .iter()
        .map(|&value| {
            let point = spec.with(var, value);
            let model = point.source_model();
            let targets = point.distortion_targets();
            let valid = point.check().is_ok() && point.check_targets().is_ok();
            let condition = valid && condition_holds(&model, &targets);
            let (achievable, bound) = if valid {
                (
                    optimize_sum_rate(&model, &targets, &optimize_options(&point)).ok().map(|o| o.rates.sum_rate),
                    lower_bound(&model, &targets, &bound_options(&point)).ok().map(|b| b.value),
                )
            } else {
                (None, None)
            };
            SweepRow { value, achievable, lower_bound: bound, condition_holds: condition }
        })
        .collect()
}

pub fn sweep_table(var: SweepVar, rows: &[SweepRow], unit: Unit) -> Table {
    let opt = |v: Option<f64>| Field::Num(v.map_or(f64::NAN, |x| unit.scale(x)));
    Table {
        columns: SWEEP_COLUMNS.iter().map(|s| s.to_string()).collect(),
        rows: rows
            .iter()
            .map(|r| {
                vec![
                    Field::Text(var.name().into()),
                    Field::Num(r.value),
                    opt(r.achievable),
                    opt(r.lower_bound),
                    opt(r.gap()),
                    Field::Bool(r.condition_holds),
                ]
            })
            .collect(),
    }
}

pub fn sweep(spec: &InstanceSpec, s: Settings, var: SweepVar, values: &[f64]) -> Outcome {
    let rows = sweep_rows(spec, var, values);
    let stdout = match s.format {
        // the CSV columns are named in nats, so no unit conversion here
        OutputFormat::Csv => sweep_table(var, &rows, Unit::Nats).render_csv(),
        f => {
            let mut r = Report::default();
            r.text("unit", s.unit.name()).table("sweep", sweep_table(var, &rows, s.unit));
            r.render(f)
        }
    };
    Outcome::ok(stdout)
}

pub fn mc_check(spec: &InstanceSpec, s: Settings, samples: usize, seed: u64) -> Outcome {
    if let Err(o) = check_targets(spec) {
        return o;
    }
    let model = spec.source_model();
    let targets = spec.distortion_targets();
    let run = || -> vceo::Result<(OptimizedScheme, mc::McReport)> {
        let opt = optimize_sum_rate(&model, &targets, &optimize_options(spec))?;
        let report = mc::validate(&model, &opt.params, samples, seed)?;
        Ok((opt, report))
    };
    let (opt, report) = match run() {
        Ok(x) => x,
        Err(e) => return Outcome::from_error(&e),
    };
    let pass = report.all_pass();
    let mut r = Report::default();
    r.text("result", if pass { "PASS" } else { "FAIL" })
        .int("samples", report.n_samples as u64)
        .int("seed", report.seed)
        .num("pass_sigmas", mc::PASS_SIGMAS);
    push_params(&mut r, &opt.params);
    let table = Table {
        columns: ["quantity", "analytic", "empirical", "stderr", "z", "status"].iter().map(|s| s.to_string()).collect(),
        rows: report
            .entries
            .iter()
            .map(|e| {
                vec![
                    Field::Text(e.name.clone()),
                    Field::Num(e.analytic),
                    Field::Num(e.empirical),
                    Field::Num(e.stderr),
                    Field::Num(e.z_score()),
                    Field::Text(if e.pass() { "PASS" } else { "FAIL" }.into()),
                ]
            })
            .collect(),
    };
    r.table("distortions", table);
    Outcome { code: if pass { EXIT_OK } else { EXIT_VERIFY_FAIL }, stdout: r.render(s.format), stderr: String::new() }
}
