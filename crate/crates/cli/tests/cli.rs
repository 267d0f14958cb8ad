use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use nullfem::linalg::mm::{read_matrix_market, read_vector};
use nullfem_cli::{exit, parse_problem, read_text, run, Method, RunOptions};

fn problem(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("problems")
        .join(name)
}

fn nullfem(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nullfem"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn write_problem(dir: &Path, body: &str) -> PathBuf {
    let p = dir.join("problem.toml");
    std::fs::write(&p, body).unwrap();
    p
}

#[test]
fn chain_csv_and_reactions() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("chain.csv");
    let o = nullfem(&[
        "solve",
        problem("chain.toml").to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));

    let csv = std::fs::read_to_string(&out).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows[0], "time,node,value");
    assert_eq!(rows.len(), 4);
    let values: Vec<f64> = rows[1..]
        .iter()
        .map(|r| r.split(',').nth(2).unwrap().parse().unwrap())
        .collect();
    for (v, want) in values.iter().zip([0.0, 1.0, 2.0]) {
        assert!((v - want).abs() <= 1e-14);
    }

    let reactions = std::fs::read_to_string(dir.path().join("chain.reactions.csv")).unwrap();
    let rows: Vec<&str> = reactions.lines().collect();
    assert_eq!(rows[0], "step,constraint_label,reaction");
    let fields: Vec<&str> = rows[1].split(',').collect();
    assert_eq!(&fields[..2], &["0", "support"]);
    assert!((fields[2].parse::<f64>().unwrap() + 1.0).abs() <= 1e-14);
}

#[test]
fn elimination_matches_nullspace() {
    for name in ["chain.toml", "bar_multipoint.toml", "poisson.toml"] {
        let p = parse_problem(&problem(name)).unwrap();
        let ns = run(&p, RunOptions::default()).unwrap().results;
        let el = run(
            &p,
            RunOptions {
                method: Method::Elimination,
                alpha: None,
            },
        )
        .unwrap()
        .results;
        let a = &ns.steps[0].values;
        let b = &el.steps[0].values;
        let scale = b.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let diff = a
            .iter()
            .zip(b)
            .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        assert!(diff <= 1e-10 * scale, "{name}: {diff}");
        assert_eq!(ns.labels, el.labels);
        assert!(el.diagnostics.basis.is_none());
        assert!(el.diagnostics.constraints_satisfied);
    }
}

#[test]
fn verify_passes_on_clean_runs() {
    for name in [
        "chain.toml",
        "bar_multipoint.toml",
        "poisson.toml",
        "bar_ramp.toml",
        "bar_free_vibration.toml",
    ] {
        let o = nullfem(&[
            "solve",
            problem(name).to_str().unwrap(),
            "--verify",
            "--format",
            "text",
        ]);
        assert_eq!(
            code(&o),
            exit::OK,
            "{name}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
    }
}

#[test]
fn verify_fails_when_penalty_misses_the_constraints() {
    let path = problem("bar_multipoint.toml");
    let path = path.to_str().unwrap();
    let loose = nullfem(&[
        "solve", path, "--method", "penalty", "--alpha", "1e3", "--verify",
    ]);
    assert_eq!(code(&loose), exit::NUMERICAL);
    assert!(String::from_utf8_lossy(&loose.stderr).contains("verification failed"));
    let unchecked = nullfem(&["solve", path, "--method", "penalty", "--alpha", "1e3"]);
    assert_eq!(code(&unchecked), exit::OK);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let base = std::fs::read_to_string(problem("chain.toml")).unwrap();

    let bad_key = write_problem(
        dir.path(),
        &base.replace("youngs = 1.0", "youngs = 1.0\nyoungs_modulus = 2.0"),
    );
    let o = nullfem(&["solve", bad_key.to_str().unwrap()]);
    assert_eq!(code(&o), exit::PARSE);
    assert!(String::from_utf8_lossy(&o.stderr).contains("youngs_modulus"));

    let infeasible = base.replace(
        "[[loads]]",
        "[[constraints]]\ntype = \"linear\"\ndofs = [0]\ncoefficients = [2.0]\nrhs = 1.0\nlabel = \"clash\"\n\n[[loads]]",
    );
    let p = write_problem(dir.path(), &infeasible);
    let o = nullfem(&["solve", p.to_str().unwrap()]);
    assert_eq!(code(&o), exit::INFEASIBLE);
    assert!(String::from_utf8_lossy(&o.stderr).contains("clash"));
    let o = nullfem(&["solve", p.to_str().unwrap(), "--method", "elimination"]);
    assert_eq!(code(&o), exit::INFEASIBLE);

    let floating = write_problem(
        dir.path(),
        &base.replace(
            "type = \"dirichlet\"\ndof = 0\nvalue = 0.0",
            "type = \"tie\"\ndofs = [0, 1]",
        ),
    );
    let o = nullfem(&["solve", floating.to_str().unwrap()]);
    assert_eq!(code(&o), exit::NUMERICAL);
    assert!(String::from_utf8_lossy(&o.stderr).contains("under-constrained"));

    let o = nullfem(&[
        "solve",
        problem("chain.toml").to_str().unwrap(),
        "--method",
        "lagrange",
    ]);
    assert_eq!(code(&o), exit::USAGE);
    let o = nullfem(&[
        "solve",
        problem("bar_ramp.toml").to_str().unwrap(),
        "--method",
        "penalty",
    ]);
    assert_eq!(code(&o), exit::USAGE);
    let o = nullfem(&["solve", dir.path().join("missing.toml").to_str().unwrap()]);
    assert_eq!(code(&o), exit::PARSE);
    assert_eq!(code(&nullfem(&[])), exit::USAGE);
    assert_eq!(code(&nullfem(&["--help"])), exit::OK);
    assert_eq!(code(&nullfem(&["--version"])), exit::OK);
}

#[test]
fn text_output_round_trips_the_result_set() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["bar_multipoint.toml", "bar_ramp.toml"] {
        let out = dir.path().join("r.txt");
        let o = nullfem(&[
            "solve",
            problem(name).to_str().unwrap(),
            "--format",
            "text",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code(&o), 0);
        let back = read_text(std::fs::read(&out).unwrap().as_slice()).unwrap();
        let mut direct = run(
            &parse_problem(&problem(name)).unwrap(),
            RunOptions::default(),
        )
        .unwrap()
        .results;
        direct.diagnostics.timings.clear();
        assert_eq!(back, direct);
    }
}

#[test]
fn dynamic_csv_has_rate_columns() {
    let o = nullfem(&["solve", problem("bar_ramp.toml").to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("time,node,value,velocity,acceleration"));
    assert_eq!(lines.count(), 201 * 6);
}

#[test]
fn dump_matrices_writes_readable_files() {
    let dir = tempfile::tempdir().unwrap();
    let dump = dir.path().join("dump");
    let o = nullfem(&[
        "solve",
        problem("bar_multipoint.toml").to_str().unwrap(),
        "--dump-matrices",
        dump.to_str().unwrap(),
        "--out",
        dir.path().join("r.csv").to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    let open = |name: &str| std::io::BufReader::new(std::fs::File::open(dump.join(name)).unwrap());
    let b = read_matrix_market(open("B.mtx")).unwrap();
    let c = read_matrix_market(open("C.mtx")).unwrap();
    let k_red = read_matrix_market(open("K_red.mtx")).unwrap();
    let v_p = read_vector(open("v_p.txt")).unwrap();
    let v_db = read_vector(open("v_DB.txt")).unwrap();
    assert_eq!((b.nrows(), b.ncols()), (3, 11));
    assert_eq!((c.nrows(), c.ncols()), (11, 8));
    assert_eq!((k_red.nrows(), k_red.ncols()), (8, 8));
    assert_eq!(v_db, vec![0.01, 0.0, 0.0]);
    assert!(b.matmul(&c).unwrap().max_abs() <= 1e-12);
    let bv = b.matvec(&v_p).unwrap();
    assert!(bv.iter().zip(&v_db).all(|(x, y)| (x - y).abs() <= 1e-12));

    let dump2 = dir.path().join("dump2");
    let o = nullfem(&[
        "solve",
        problem("bar_multipoint.toml").to_str().unwrap(),
        "--method",
        "elimination",
        "--dump-matrices",
        dump2.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    assert!(dump2.join("B.mtx").exists() && dump2.join("v_DB.txt").exists());
    assert!(!dump2.join("C.mtx").exists());
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["bar_multipoint.toml", "poisson.toml", "bar_ramp.toml"] {
        for format in ["csv", "text"] {
            let mut outputs = Vec::new();
            for k in 0..2 {
                let out = dir.path().join(format!("run{k}.{format}"));
                let dump = dir.path().join(format!("dump{k}"));
                let o = nullfem(&[
                    "solve",
                    problem(name).to_str().unwrap(),
                    "--format",
                    format,
                    "--out",
                    out.to_str().unwrap(),
                    "--dump-matrices",
                    dump.to_str().unwrap(),
                ]);
                assert_eq!(code(&o), 0);
                let mut bytes = std::fs::read(&out).unwrap();
                if format == "csv" {
                    bytes.extend(std::fs::read(out.with_extension("reactions.csv")).unwrap());
                }
                for f in ["B.mtx", "C.mtx", "K_red.mtx", "v_p.txt", "v_DB.txt"] {
                    bytes.extend(std::fs::read(dump.join(f)).unwrap());
                }
                outputs.push(bytes);
            }
            assert_eq!(outputs[0], outputs[1], "{name} {format}");
        }
    }
}
