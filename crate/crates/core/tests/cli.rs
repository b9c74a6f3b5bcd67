use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn tvopt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tvopt")).args(args).output().expect("spawn tvopt")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("config.toml");
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn table2_run_writes_one_trace_per_solver_and_flags_divergence() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let out_s = out.to_str().unwrap();

    let strict = tvopt(&["run", "--preset", "table2", "--out", out_s]);
    assert_eq!(code(&strict), 2, "{}", stderr(&strict));

    let relaxed = tvopt(&["run", "--preset", "table2", "--out", out_s, "--allow-divergence"]);
    assert_eq!(code(&relaxed), 0, "{}", stderr(&relaxed));

    let mut files: Vec<String> = fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    files.sort();
    assert_eq!(files, ["cp.csv", "foa_min.csv", "tvgd.csv", "ufopc_g0.csv", "ufopc_g1.csv"]);

    let wild = csv_rows(&out.join("ufopc_g1.csv"));
    assert_eq!(wild[0].join(","), "k,t,f_pred,grad_norm,gap,pred_seconds,corr_seconds,diverged");
    assert_eq!(wild.last().unwrap().last().unwrap(), "1");
    assert!(wild.len() < 52);

    let foa = csv_rows(&out.join("foa_min.csv"));
    assert_eq!(foa.len(), 101);
    assert!(foa[1..].iter().all(|r| r[7] == "0"));
}

#[test]
fn floats_carry_seventeen_significant_digits() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let res = tvopt(&["run", "--preset", "table2", "--out", out.to_str().unwrap(), "--allow-divergence"]);
    assert_eq!(code(&res), 0);
    let rows = csv_rows(&out.join("tvgd.csv"));
    let f = &rows[1][2];
    let mantissa = f.split('e').next().unwrap().replace(['.', '-'], "");
    assert_eq!(mantissa.len(), 17, "{f}");
    assert_eq!(f.parse::<f64>().unwrap().to_bits(), f.parse::<f64>().unwrap().to_bits());
}

#[test]
fn repeated_runs_are_byte_identical_across_execution_modes() {
    let dir = TempDir::new().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let common = ["--preset", "table2", "--allow-divergence", "--jobs", "2"];
    let ra = tvopt(&[&["run", "--out", a.to_str().unwrap()][..], &common].concat());
    let rb = tvopt(&[&["run", "--out", b.to_str().unwrap(), "--sequential"][..], &common].concat());
    assert_eq!((code(&ra), code(&rb)), (0, 0));
    for name in ["tvgd.csv", "ufopc_g0.csv", "ufopc_g1.csv", "foa_min.csv", "cp.csv"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name}");
    }
}

#[test]
fn single_step_without_corrections_gives_one_row() {
    let dir = TempDir::new().unwrap();
    let config = write_config(
        dir.path(),
        "[experiment]\ngrid = [[0.1, 1]]\nx0 = [8.0]\n[problem]\nkind = \"toy\"\n\
         [solver.gd]\nalgorithm = \"tvgd\"\ncorrections = 0\nbeta = 1.0\n",
    );
    let out = dir.path().join("out");
    let res = tvopt(&["run", "--config", &config, "--out", out.to_str().unwrap()]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    let rows = csv_rows(&out.join("gd.csv"));
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[1][0], "0");
}

#[test]
fn unknown_config_key_is_a_config_error_naming_the_key() {
    let dir = TempDir::new().unwrap();
    let config = write_config(
        dir.path(),
        "[experiment]\ngrid = [[0.1, 1]]\nx0 = [8.0]\nwobble = 3\n[problem]\nkind = \"toy\"\n",
    );
    let res = tvopt(&["run", "--config", &config, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&res), 1);
    assert!(stderr(&res).contains("wobble"), "{}", stderr(&res));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(code(&tvopt(&["run"])), 1);
    assert_eq!(code(&tvopt(&["frobnicate"])), 1);
    assert_eq!(code(&tvopt(&["run", "--preset", "nope"])), 1);
    assert_eq!(code(&tvopt(&["run", "--config", "/nonexistent/config.toml"])), 1);
    assert_eq!(code(&tvopt(&["--help"])), 0);
}

#[test]
fn ratings_flag_is_rejected_for_non_matrix_problems() {
    let dir = TempDir::new().unwrap();
    let res = tvopt(&[
        "run",
        "--preset",
        "table2",
        "--out",
        dir.path().to_str().unwrap(),
        "--ratings",
        "ratings.csv",
    ]);
    assert_eq!(code(&res), 1);
}

#[test]
fn failing_check_exits_three() {
    let dir = TempDir::new().unwrap();
    // without prediction the per-step increase does not shrink linearly here
    let config = write_config(
        dir.path(),
        "[experiment]\ngrid = [[0.02, 500], [0.01, 1000]]\nx0 = [8.0]\nchecks = [\"prediction_gap\"]\n\
         [problem]\nkind = \"toy\"\n[solver.gd]\nalgorithm = \"tvgd\"\nbeta = 1.0\n",
    );
    let out = dir.path().join("out");
    let res = tvopt(&["check", "--config", &config, "--out", out.to_str().unwrap()]);
    assert_eq!(code(&res), 3, "{}", stderr(&res));
    let rows = csv_rows(&out.join("checks.csv"));
    assert_eq!(rows[0].join(","), "check,target,h,value,lower,upper,passed,note");
    assert_eq!(rows.len(), 2);
}

#[test]
fn passing_checks_exit_zero() {
    let dir = TempDir::new().unwrap();
    let res = tvopt(&["check", "--preset", "table2", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    assert!(String::from_utf8_lossy(&res.stdout).contains("0 failed"));
}

#[test]
fn injected_sweep_recovers_slope_two() {
    let dir = TempDir::new().unwrap();
    let config = write_config(
        dir.path(),
        "[experiment]\ngrid = [[0.1, 10], [0.01, 10], [0.001, 10]]\nx0 = [0.0]\ninject_power = 2.0\n\
         [problem]\nkind = \"toy\"\n",
    );
    let out = dir.path().join("out");
    let res = tvopt(&["sweep", "--config", &config, "--out", out.to_str().unwrap()]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    let slopes = csv_rows(&out.join("slopes.csv"));
    assert_eq!(slopes.len(), 5);
    for row in &slopes[1..] {
        let slope: f64 = row[2].parse().unwrap();
        assert!((slope - 2.0).abs() < 1e-9, "{row:?}");
    }
    assert_eq!(csv_rows(&out.join("sweep.csv")).len(), 4);
}

#[test]
fn seed_flag_changes_random_initial_points() {
    let dir = TempDir::new().unwrap();
    let config = write_config(
        dir.path(),
        "[experiment]\ngrid = [[0.1, 3]]\nx0_normal = true\n[problem]\nkind = \"linreg_static\"\n\
         [solver.gd]\nalgorithm = \"tvgd\"\nbeta = 0.01\n",
    );
    let run = |seed: &str, sub: &str| {
        let out = dir.path().join(sub);
        let res = tvopt(&["run", "--config", &config, "--out", out.to_str().unwrap(), "--seed", seed]);
        assert_eq!(code(&res), 0, "{}", stderr(&res));
        fs::read(out.join("gd.csv")).unwrap()
    };
    assert_eq!(run("4", "a"), run("4", "b"));
    assert_ne!(run("4", "a"), run("5", "c"));
}

#[test]
fn presets_subcommand_lists_bundled_configs() {
    let res = tvopt(&["presets"]);
    assert_eq!(code(&res), 0);
    let text = String::from_utf8_lossy(&res.stdout);
    for name in ["table2", "table5", "table7", "table12", "mf_synth"] {
        assert!(text.lines().any(|l| l == name), "{name}");
    }
}
