use std::fs;
use std::path::{Path, PathBuf};

use augnewton::objective::Link;
use augnewton::solvers::{Method, Termination};
use augnewton_harness::dataset::{load_dataset, Format};
use augnewton_harness::experiment::{
    certify_written, report_json, run_experiment, ExperimentError, ExperimentSpec, FStarPolicy,
    PrecondKind, ProblemSpec, SolverSpec, Summary,
};
use augnewton_harness::instances::bundled_logistic;
use augnewton_harness::trace_io::{read_iterates, read_trace};

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("augnewton-{}-{name}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    dir
}

fn bundled_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data/logistic_n20_m200.csv")
}

fn spec(problem: ProblemSpec, solvers: Vec<SolverSpec>, out: PathBuf) -> ExperimentSpec {
    ExperimentSpec {
        problem,
        link: Link::Logistic,
        alpha: 0.1,
        solvers,
        seed: 7,
        out,
        diagnostics: true,
        fstar: FStarPolicy::Oracle,
        timing: false,
        x0: None,
    }
}

#[test]
fn bundled_file_matches_generator() {
    let d = load_dataset(&bundled_path(), Format::Csv).unwrap();
    assert_eq!(d, bundled_logistic());
    assert_eq!((d.features(), d.samples()), (20, 200));
}

#[test]
fn bundled_spec_parses() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/bundled_logistic.json");
    let s = ExperimentSpec::from_file(&path).unwrap();
    s.validate().unwrap();
    assert_eq!(s.solvers.len(), 6);
    match &s.problem {
        ProblemSpec::Dataset { path, .. } => assert!(path.exists()),
        other => panic!("{other:?}"),
    }
}

#[test]
fn quadratic_writes_three_traces_and_newton_is_exact() {
    let out = scratch("quadratic");
    let solvers = vec![
        SolverSpec::new(Method::Newton),
        SolverSpec::new(Method::Pnm),
        SolverSpec::new(Method::Anm),
    ];
    let summary = run_experiment(&spec(
        ProblemSpec::Quadratic { dim: 8 },
        solvers,
        out.clone(),
    ))
    .unwrap();
    for name in ["newton", "pnm", "anm"] {
        let rows = read_trace(&out.join(format!("{name}.trace.csv"))).unwrap();
        assert!(!rows.is_empty());
        assert_eq!(
            read_iterates(&out.join(format!("{name}.iterates.csv")))
                .unwrap()
                .len(),
            rows.len()
        );
    }
    let newton = summary.solver("newton").unwrap();
    assert_eq!(newton.iterations, Some(1));
    assert!(newton.final_gap.unwrap().abs() <= 1e-12);
    assert!(out.join("pnm.cert.json").exists());
    assert!(!out.join("newton.cert.json").exists());
    fs::remove_dir_all(out).unwrap();
}

#[test]
fn seeded_logistic_pnm_schedules_converge_quickly() {
    let out = scratch("pnm-schedules");
    let solvers = [1.0, 2.0, 10.0]
        .iter()
        .map(|&c| SolverSpec {
            c,
            ..SolverSpec::new(Method::Pnm).named(&format!("pnm_c{c}"))
        })
        .collect();
    let problem = ProblemSpec::Synthetic {
        features: 20,
        samples: 200,
    };
    let summary = run_experiment(&spec(problem, solvers, out.clone())).unwrap();
    for s in &summary.solvers {
        assert_eq!(s.termination, Some(Termination::Converged), "{}", s.name);
        assert!(
            s.iterations.unwrap() <= 200,
            "{} took {:?}",
            s.name,
            s.iterations
        );
    }
    fs::remove_dir_all(out).unwrap();
}

#[test]
fn traces_are_byte_identical_across_runs() {
    let (a, b) = (scratch("det-a"), scratch("det-b"));
    let solvers = vec![
        SolverSpec::new(Method::DampedNewton),
        SolverSpec {
            precond: PrecondKind::Diag,
            ..SolverSpec::new(Method::Anm)
        },
    ];
    let problem = ProblemSpec::Synthetic {
        features: 6,
        samples: 40,
    };
    run_experiment(&spec(problem.clone(), solvers.clone(), a.clone())).unwrap();
    run_experiment(&spec(problem, solvers, b.clone())).unwrap();
    for file in [
        "damped_newton.trace.csv",
        "anm.trace.csv",
        "anm.iterates.csv",
        "anm.cert.json",
    ] {
        assert_eq!(
            fs::read(a.join(file)).unwrap(),
            fs::read(b.join(file)).unwrap(),
            "{file}"
        );
    }
    fs::remove_dir_all(a).unwrap();
    fs::remove_dir_all(b).unwrap();
}

#[test]
fn recertification_reproduces_the_stored_report() {
    let out = scratch("recert");
    let solvers = vec![
        SolverSpec {
            c: 1.0,
            ..SolverSpec::new(Method::Pnm)
        },
        SolverSpec {
            c: 1.0,
            rho0: 3.0,
            ..SolverSpec::new(Method::Anm)
        },
    ];
    let s = spec(
        ProblemSpec::Dataset {
            path: bundled_path(),
            format: Format::Csv,
        },
        solvers,
        out.clone(),
    );
    run_experiment(&s).unwrap();
    for name in ["pnm", "anm"] {
        let again = certify_written(&out, name, None).unwrap();
        let stored = fs::read_to_string(out.join(format!("{name}.cert.json"))).unwrap();
        assert_eq!(report_json(&again), stored, "{name}");
    }
    assert!(matches!(
        certify_written(&out, "missing", None),
        Err(ExperimentError::InvalidSpec(_))
    ));
    fs::remove_dir_all(out).unwrap();
}

#[test]
fn outputs_parse_under_their_schemas() {
    let out = scratch("schema");
    let problem = ProblemSpec::Synthetic {
        features: 5,
        samples: 30,
    };
    let written = run_experiment(&spec(
        problem,
        vec![SolverSpec::new(Method::Pnm)],
        out.clone(),
    ))
    .unwrap();
    let header = fs::read_to_string(out.join("pnm.trace.csv")).unwrap();
    assert!(header.starts_with("k,f,gap,grad_norm,rho,step_norm_G,lyapunov,elapsed_ns\n"));
    let rows = read_trace(&out.join("pnm.trace.csv")).unwrap();
    assert!(rows.iter().all(|r| r.gap.is_some() && r.elapsed_ns == 0));
    assert!(rows[0].lyapunov.is_none() && rows[1].lyapunov.is_some());
    assert_eq!(Summary::read(&out).unwrap(), written);
    let cert: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("pnm.cert.json")).unwrap()).unwrap();
    for key in [
        "kind",
        "entries",
        "certified",
        "fraction_satisfied",
        "vacuous_count",
        "xi_min",
        "beta_min",
    ] {
        assert!(cert.get(key).is_some(), "{key}");
    }
    fs::remove_dir_all(out).unwrap();
}

#[test]
fn failing_solver_still_flushes_summary() {
    let out = scratch("partial");
    let solvers = vec![
        SolverSpec::new(Method::Newton),
        SolverSpec {
            rho0: -1.0,
            ..SolverSpec::new(Method::Pnm)
        },
    ];
    let err = run_experiment(&spec(
        ProblemSpec::Quadratic { dim: 3 },
        solvers,
        out.clone(),
    ))
    .unwrap_err();
    assert_eq!(err.exit_code(), 1);
    let summary = Summary::read(&out).unwrap();
    assert!(summary.solver("newton").unwrap().error.is_none());
    assert!(summary.solver("pnm").unwrap().error.is_some());
    assert!(out.join("newton.trace.csv").exists());
    fs::remove_dir_all(out).unwrap();
}

#[test]
fn invalid_specs_are_rejected() {
    let out = scratch("invalid");
    let empty = spec(ProblemSpec::Quadratic { dim: 3 }, vec![], out.clone());
    assert!(matches!(
        run_experiment(&empty),
        Err(ExperimentError::InvalidSpec(_))
    ));
    let dup = spec(
        ProblemSpec::Quadratic { dim: 3 },
        vec![SolverSpec::new(Method::Pnm), SolverSpec::new(Method::Pnm)],
        out.clone(),
    );
    assert!(matches!(
        run_experiment(&dup),
        Err(ExperimentError::InvalidSpec(_))
    ));
    let missing = spec(
        ProblemSpec::Dataset {
            path: "/definitely/not/here.csv".into(),
            format: Format::Csv,
        },
        vec![SolverSpec::new(Method::Pnm)],
        out,
    );
    let e = run_experiment(&missing).unwrap_err();
    assert_eq!(e.exit_code(), 2);
}
