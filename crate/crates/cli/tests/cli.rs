use std::path::Path;
use std::process::Command;

use proptest::prelude::*;
use vceo_cli::report::fmt_num;
use vceo_cli::{parse_range, run, InstanceSpec, Outcome};

const UNIT: &str = "[model]\nsigma_s2 = 1.0\nsigma_n1_2 = 1.0\nsigma_n2_2 = 1.0\n\n[targets]\nd1 = 0.4\nd2 = 0.4\nd0 = 0.35\n";

const OUTSIDE: &str = "[model]\nsigma_s2 = 2.0\nsigma_n1_2 = 1.0\nsigma_n2_2 = 3.0\n\n[targets]\nd1 = 0.9\nd2 = 1.0\nd0 = 0.7\n";

fn write(dir: &tempfile::TempDir, name: &str, text: &str) -> String {
    let path = dir.path().join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn vceo(args: &[&str]) -> Outcome {
    run(std::iter::once("vceo").chain(args.iter().copied()))
}

fn field(out: &str, key: &str) -> f64 {
    let v: serde_json::Value = serde_json::from_str(out).unwrap();
    v[key].as_f64().unwrap_or_else(|| panic!("{key} missing in {out}"))
}

fn binary(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_vceo")).args(args).output().unwrap();
    (out.status.code().unwrap(), String::from_utf8(out.stdout).unwrap(), String::from_utf8(out.stderr).unwrap())
}

#[test]
fn exit_codes_from_the_binary() {
    let dir = tempfile::tempdir().unwrap();
    let unit = write(&dir, "unit.toml", UNIT);
    let infeasible = write(&dir, "infeasible.toml", &UNIT.replace("d0 = 0.35", "d0 = 0.3"));
    let outside = write(&dir, "outside.toml", OUTSIDE);
    let broken = write(&dir, "broken.toml", &UNIT.replace("d1 = 0.4", "d1 = ["));

    assert_eq!(binary(&["sum-rate", "--instance", &unit]).0, 0);
    let (code, _, err) = binary(&["sum-rate", "--instance", &infeasible]);
    assert_eq!(code, 2);
    assert!(err.contains("D0"), "{err}");
    let (code, _, err) = binary(&["lower-bound", "--instance", &broken]);
    assert_eq!(code, 1);
    assert!(err.contains("line"), "{err}");
    assert_eq!(binary(&["verify", "--instance", &unit]).0, 0);
    assert_eq!(binary(&["verify", "--instance", &unit, "--tol", "0"]).0, 3);
    let (code, _, err) = binary(&["verify", "--instance", &outside]);
    assert_eq!(code, 4, "{err}");
    assert!(err.contains("outside theorem condition"));
    assert_eq!(binary(&["sum-rate"]).0, 1);
    assert_eq!(binary(&["no-such-command"]).0, 1);
    assert_eq!(binary(&["--help"]).0, 0);
    assert_eq!(binary(&["sum-rate", "--instance", "/nonexistent/file.toml"]).0, 1);
}

#[test]
fn outside_condition_is_flagged_by_lower_bound() {
    let dir = tempfile::tempdir().unwrap();
    let outside = write(&dir, "o.toml", OUTSIDE);
    let out = vceo(&["lower-bound", "--instance", &outside]);
    assert_eq!(out.code, 0);
    assert!(out.stdout.contains("theorem condition not satisfied; equality not guaranteed"));
}

#[test]
fn bound_matches_sum_rate_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let unit = write(&dir, "unit.toml", UNIT);
    let a = vceo(&["lower-bound", "--instance", &unit, "--output", "json"]);
    let b = vceo(&["lower-bound", "--instance", &unit, "--output", "json"]);
    assert_eq!(a, b);
    let s = vceo(&["sum-rate", "--instance", &unit, "--output", "json"]);
    let (lb, sr) = (field(&a.stdout, "lower_bound"), field(&s.stdout, "sum_rate"));
    assert!(lb <= sr + 1e-9);
    assert!((sr - lb).abs() / lb <= 1e-3);
}

#[test]
fn bits_divide_by_ln2() {
    let dir = tempfile::tempdir().unwrap();
    let unit = write(&dir, "unit.toml", UNIT);
    let nats = field(&vceo(&["lower-bound", "--instance", &unit, "--output", "json"]).stdout, "lower_bound");
    let bits = field(&vceo(&["lower-bound", "--instance", &unit, "--output", "json", "--bits"]).stdout, "lower_bound");
    assert!((bits - nats / std::f64::consts::LN_2).abs() < 1e-12);
}

#[test]
fn sweep_csv_shape_and_monotonicity() {
    let dir = tempfile::tempdir().unwrap();
    let unit = write(&dir, "unit.toml", UNIT);
    let out = vceo(&["sweep", "--instance", &unit, "--var", "D0", "--range", "0.34:0.39", "--steps", "6"]);
    assert_eq!(out.code, 0, "{}", out.stderr);
    let mut lines = out.stdout.lines();
    assert_eq!(
        lines.next().unwrap(),
        "swept_var,swept_value,achievable_nats,lower_bound_nats,gap_nats,condition_holds"
    );
    let achievable: Vec<f64> = lines.map(|l| l.split(',').nth(2).unwrap().parse().unwrap()).collect();
    assert_eq!(achievable.len(), 6);
    for w in achievable.windows(2) {
        assert!(w[1] <= w[0] + 1e-6, "{achievable:?}");
    }
}

#[test]
fn single_step_sweep_matches_point_commands() {
    let dir = tempfile::tempdir().unwrap();
    let unit = write(&dir, "unit.toml", UNIT);
    let out = vceo(&["sweep", "--instance", &unit, "--var", "D0", "--range", "0.35:0.35", "--steps", "1"]);
    let row: Vec<String> = out.stdout.lines().nth(1).unwrap().split(',').map(String::from).collect();
    let lb = field(&vceo(&["lower-bound", "--instance", &unit, "--output", "json"]).stdout, "lower_bound");
    let sr = field(&vceo(&["sum-rate", "--instance", &unit, "--output", "json"]).stdout, "sum_rate");
    assert_eq!(row[2], fmt_num(sr));
    assert_eq!(row[3], fmt_num(lb));
    assert_eq!(row[5], "true");
}

#[test]
fn sweep_table_in_instance_file() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!("{UNIT}\n[sweep]\nvar = \"D0\"\nrange = \"0.30:0.32\"\nsteps = 2\n");
    let path = write(&dir, "s.toml", &text);
    let out = vceo(&["sweep", "--instance", &path]);
    assert_eq!(out.code, 0);
    assert_eq!(out.stdout.lines().count(), 3);
    assert!(out.stdout.contains("D0,0.3,nan,nan,nan,false"));
    let bad = vceo(&["sweep", "--instance", &path, "--range", "0.3"]);
    assert_eq!(bad.code, 1);
}

#[test]
fn mc_check_small_and_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let unit = write(&dir, "unit.toml", UNIT);
    let a = vceo(&["mc-check", "--instance", &unit, "--samples", "10", "--seed", "3", "--output", "json"]);
    let b = vceo(&["mc-check", "--instance", &unit, "--samples", "10", "--seed", "3", "--output", "json"]);
    assert_eq!(a, b);
    let v: serde_json::Value = serde_json::from_str(&a.stdout).unwrap();
    let rows = v["distortions"].as_array().unwrap();
    assert_eq!(rows.len(), 7);
    for r in rows {
        assert!(r["stderr"].as_f64().unwrap() > 0.0);
    }
    let big = vceo(&["mc-check", "--instance", &unit, "--samples", "200000"]);
    assert_eq!(big.code, 0, "{}", big.stdout);
}

#[test]
fn example_instances_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../instances");
    let mut n = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            InstanceSpec::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            n += 1;
        }
    }
    assert!(n > 0);
}

fn spec_strategy() -> impl Strategy<Value = InstanceSpec> {
    (
        prop::array::uniform3(1e-3..1e3f64),
        prop::array::uniform3(1e-3..1e3f64),
        1usize..64,
        2usize..200,
        any::<u32>(),
        prop::option::of((0usize..6, -10.0..10.0f64, -10.0..10.0f64, 1usize..100)),
    )
        .prop_map(|(m, t, starts, grid, seed, sweep)| {
            let mut s = InstanceSpec::new(
                vceo::SourceModel::new(m[0], m[1], m[2]).unwrap(),
                vceo::DistortionTriple::new(t[0], t[1], t[2]).unwrap(),
            );
            s.options.starts = starts;
            s.options.grid = grid;
            s.options.seed = seed as u64;
            s.sweep = sweep.map(|(v, a, b, steps)| vceo_cli::instance::SweepSection {
                var: vceo_cli::SweepVar::ALL[v],
                range: format!("{a}:{b}"),
                steps,
            });
            s
        })
}

proptest! {
    #[test]
    fn instance_round_trip(spec in spec_strategy()) {
        let text = spec.canonical();
        let back = InstanceSpec::parse(&text).unwrap();
        prop_assert_eq!(&back, &spec);
        prop_assert_eq!(back.canonical(), text);
    }

    #[test]
    fn range_round_trip(a in -1e6..1e6f64, b in -1e6..1e6f64) {
        let r = parse_range(&format!("{a}:{b}")).unwrap();
        prop_assert_eq!((r.start, r.end), (a, b));
    }

    #[test]
    fn range_parser_never_panics(s in ".{0,40}") {
        let _ = parse_range(&s);
    }

    #[test]
    fn instance_parser_never_panics(s in "[\\[\\]a-z0-9_=.\" \n-]{0,200}") {
        let _ = InstanceSpec::parse(&s);
    }
}

fn corpus(target: &str) -> Vec<String> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut out: Vec<String> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| String::from_utf8_lossy(&std::fs::read(e.unwrap().path()).unwrap()).into_owned())
        .collect();
    out.sort();
    out
}

#[test]
fn fuzz_seeds_replay() {
    let seeds = corpus("instance_toml");
    assert!(!seeds.is_empty());
    for s in &seeds {
        if let Ok(spec) = InstanceSpec::parse(s) {
            assert_eq!(InstanceSpec::parse(&spec.canonical()).unwrap(), spec);
        }
    }
    let ranges = corpus("sweep_range");
    assert!(ranges.iter().any(|r| parse_range(r).is_ok()));
    assert!(ranges.iter().any(|r| parse_range(r).is_err()));
    for r in ranges.iter().filter_map(|r| parse_range(r).ok()) {
        assert_eq!(r.points(3)[2], r.end);
    }
}
