use augnewton_harness::cli::main_with_args;

fn run(args: &[&str]) -> i32 {
    main_with_args(std::iter::once("augnewton").chain(args.iter().copied()))
}

#[test]
fn exit_codes() {
    assert_eq!(
        run(&[
            "solve",
            "--method",
            "pnm",
            "--precond",
            "identity",
            "--dim",
            "5"
        ]),
        0
    );
    assert_eq!(run(&["solve", "--method", "nope"]), 2);
    assert_eq!(run(&["solve", "--precond", "cholesky"]), 2);
    assert_eq!(run(&["solve", "--data", "/no/such/file.csv"]), 2);
    assert_eq!(run(&["frobnicate"]), 2);
    assert_eq!(run(&["--help"]), 0);
    // a solver that cannot start is a solver failure
    assert_eq!(run(&["solve", "--rho0=-3"]), 1);
}

#[test]
fn demo_root_variants() {
    assert_eq!(
        run(&["demo-root", "--poly", "x^2-2", "--rho", "10", "--x0", "2"]),
        0
    );
    assert_eq!(
        run(&[
            "demo-root",
            "--poly",
            "x^2-2",
            "--x0",
            "-2",
            "--variant",
            "penalty"
        ]),
        0
    );
    assert_eq!(run(&["demo-root", "--poly", "x^^2", "--x0", "2"]), 2);
    // x² + 1 has no real root
    assert_eq!(
        run(&[
            "demo-root",
            "--poly",
            "x^2+1",
            "--x0",
            "2",
            "--max-iters",
            "20"
        ]),
        1
    );
}

#[test]
fn run_and_certify_round_trip() {
    let out = std::env::temp_dir().join(format!("augnewton-cli-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&out);
    let spec = concat!(env!("CARGO_MANIFEST_DIR"), "/data/bundled_logistic.json");
    let out_s = out.to_str().unwrap();
    assert_eq!(run(&["run", spec, "--out", out_s]), 0);
    let report = out.join("recert.json");
    let report_s = report.to_str().unwrap();
    assert_eq!(
        run(&["certify", "--out", out_s, "--solver", "pnm_c2", "--report", report_s, "--check"]),
        0
    );
    assert_eq!(
        std::fs::read(&report).unwrap(),
        std::fs::read(out.join("pnm_c2.cert.json")).unwrap()
    );
    assert_eq!(run(&["certify", "--out", out_s, "--solver", "newton"]), 2);
    std::fs::remove_dir_all(out).unwrap();
}
