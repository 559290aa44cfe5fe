//! End-to-end runs of the `strata` binary: exit codes, CSV emission, and
//! byte-level determinism across repeated runs and thread counts.

use std::path::PathBuf;
use std::process::Command;

fn strata() -> Command {
    Command::new(env!("CARGO_BIN_EXE_strata"))
}

fn workdir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("strata_cli_{name}"));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn scaling_run_succeeds_and_writes_schema_csv() {
    let dir = workdir("scaling");
    let cfg = dir.join("run.cfg");
    std::fs::write(&cfg, "example = bending\neps_list = 0.25, 0.125, 0.0625\n").unwrap();
    let out = dir.join("out.csv");
    let status = strata()
        .args(["scaling", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("schema=1\n"));
    assert!(text
        .lines()
        .nth(1)
        .unwrap()
        .starts_with("experiment,config_hash"));
    assert!(text.contains("power_law"));
}

#[test]
fn config_errors_exit_with_code_two() {
    let dir = workdir("badcfg");
    let cfg = dir.join("bad.cfg");
    std::fs::write(&cfg, "example = bending\nmystery_knob = 3\n").unwrap();
    let out = dir.join("out.csv");
    let output = strata()
        .args(["scaling", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8(output.stderr).unwrap();
    assert!(
        stderr.contains("mystery_knob"),
        "diagnostic names the field"
    );
    assert!(stderr.contains("line 2"), "diagnostic carries the line");

    // missing output path is also a config error
    let okcfg = dir.join("ok.cfg");
    std::fs::write(
        &okcfg,
        "example = rotation\neps_list = 0.25, 0.125, 0.0625\n",
    )
    .unwrap();
    let output = strata()
        .args(["scaling", "--config"])
        .arg(&okcfg)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn non_convergence_exits_with_code_three_and_partial_csv() {
    let dir = workdir("nonconv");
    let cfg = dir.join("run.cfg");
    std::fs::write(
        &cfg,
        "density = svk\nshear_list = 1\ncell_m = 5\ncell_m_n = 3\ncell_gauss = 2\ncell_max_iters = 0\n",
    )
    .unwrap();
    let out = dir.join("out.csv");
    let status = strata()
        .args(["cellsweep", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(3));
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.lines().count() > 2, "partial CSV still written");
}

#[test]
fn repeated_runs_and_thread_counts_are_byte_identical() {
    let dir = workdir("determinism");
    let cfg = dir.join("run.cfg");
    std::fs::write(
        &cfg,
        concat!(
            "example = wrinkling\n",
            "gamma = 0.5\n",
            "eps_list = 0.125, 0.0625, 0.03125\n",
            "seed = 11\n",
        ),
    )
    .unwrap();
    let mut outputs = Vec::new();
    for (name, threads) in [("a", "1"), ("b", "8"), ("c", "1")] {
        let out = dir.join(format!("{name}.csv"));
        let status = strata()
            .args(["scaling", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(&out)
            .args(["--threads", threads, "--seed", "11"])
            .status()
            .unwrap();
        assert!(status.success());
        outputs.push(std::fs::read(&out).unwrap());
    }
    assert_eq!(outputs[0], outputs[1], "threads 1 vs 8");
    assert_eq!(outputs[0], outputs[2], "repeated run");

    // the cell sweep exercises parallel restarts and matrix points
    let cfg = dir.join("sweep.cfg");
    std::fs::write(
        &cfg,
        concat!(
            "density = svk\n",
            "shear_list = 0.5, 1.5\n",
            "cell_m = 7\ncell_m_n = 5\ncell_gauss = 2\ncell_restarts = 4\n",
            "seed = 3\n",
        ),
    )
    .unwrap();
    let mut outputs = Vec::new();
    for (name, threads) in [("sa", "1"), ("sb", "8")] {
        let out = dir.join(format!("{name}.csv"));
        let status = strata()
            .args(["cellsweep", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(&out)
            .args(["--threads", threads])
            .status()
            .unwrap();
        assert!(status.success());
        outputs.push(std::fs::read(&out).unwrap());
    }
    assert_eq!(outputs[0], outputs[1], "cell sweep, threads 1 vs 8");
}

#[test]
fn pipeline_and_weakconv_subcommands_run() {
    let dir = workdir("subcommands");
    let cfg = dir.join("run.cfg");
    std::fs::write(
        &cfg,
        "example = recovery\neps_list = 0.125, 0.0625, 0.03125\nxi_list = 0.0625, 0.125\n",
    )
    .unwrap();
    for sub in ["pipeline", "weakconv"] {
        let out = dir.join(format!("{sub}.csv"));
        let status = strata()
            .args([sub, "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(&out)
            .status()
            .unwrap();
        assert!(status.success(), "{sub} run failed");
        let text = std::fs::read_to_string(&out).unwrap();
        assert!(text.starts_with("schema=1\n"));
    }
}

#[test]
fn out_path_from_config_is_honored() {
    let dir = workdir("outkey");
    let out = dir.join("from_config.csv");
    let cfg = dir.join("run.cfg");
    std::fs::write(
        &cfg,
        format!(
            "example = rotation\neps_list = 0.25, 0.125, 0.0625\nout = {}\n",
            out.display()
        ),
    )
    .unwrap();
    let status = strata()
        .args(["scaling", "--config"])
        .arg(&cfg)
        .status()
        .unwrap();
    assert!(status.success());
    assert!(out.exists());
}
