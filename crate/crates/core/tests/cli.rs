use ellded::cli::run;

fn call(args: &[&str]) -> (i32, String, String) {
    let argv = std::iter::once("ellded").chain(args.iter().copied()).map(std::ffi::OsString::from);
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn json(args: &[&str]) -> serde_json::Value {
    let (code, out, err) = call(args);
    assert_eq!(code, 0, "{err}");
    serde_json::from_str(&out).unwrap()
}

#[test]
fn field_info_reports_the_discriminant() {
    let v = json(&["field", "info", "--D", "7"]);
    assert_eq!(v["d_K"], -7);
    assert_eq!(v["trace_omega"], 1);
}

#[test]
fn expansion_steps_carry_exact_determinants() {
    let v = json(&["cf", "expand", "--D", "2", "--z", "0.3,0.7", "--depth", "6", "--eps", "0.9"]);
    let steps = v["steps"].as_array().unwrap();
    assert_eq!(steps.len(), 6);
    assert!(steps.iter().all(|s| s["det_check"] == true));
}

#[test]
fn dedekind_sums_agree_with_the_library() {
    let v = json(&["dedekind", "eval", "--D", "2", "--a", "3+w", "--c", "5+2*w"]);
    assert_eq!(v["ncosets"], 33);
    assert!((v["normalized"].as_f64().unwrap() - 28.0 / 33.0).abs() < 1e-9);
}

#[test]
fn text_and_csv_formats() {
    let (code, out, _) = call(&["--format", "text", "field", "info", "--D", "3"]);
    assert_eq!(code, 0);
    assert!(out.lines().any(|l| l == "d_K = -3"));
    let (code, out, _) = call(&["cf", "expand", "--D", "1", "--z", "0.2,0.45", "--depth", "3", "--eps", "0.9", "--format", "csv"]);
    assert_eq!(code, 0);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines.len(), 4);
    assert!(lines[0].split(',').any(|h| h == "det_check"));
}

#[test]
fn exit_codes() {
    assert_eq!(call(&["field", "info", "--D", "4"]).0, 2);
    assert_eq!(call(&["dedekind", "eval", "--D", "2", "--a", "1", "--c", "100", "--budget", "10"]).0, 3);
    assert_eq!(call(&["eisen", "e2", "--D", "2", "--prec", "1e-20"]).0, 2);
    assert_eq!(call(&["nonsense"]).0, 2);
}

#[test]
fn witness_command() {
    let v = json(&["density", "witness", "--D", "7", "--x", "0.2,0.4", "--z", "-0.5,0.9", "--eps", "0.05"]);
    assert_eq!(v["D"], 7);
    let phi = v["phi_total"].as_array().unwrap();
    assert!(phi.iter().all(|p| p.as_f64().unwrap().abs() < 1e-6), "{v}");
}

#[test]
fn verify_all_passes() {
    let v = json(&["verify-all", "--D", "2", "--seed", "3"]);
    assert_eq!(v["pass"], true, "{v}");
    for suite in v["suites"].as_array().unwrap() {
        assert_eq!(suite["checks"], suite["passed"], "{suite}");
    }
}
