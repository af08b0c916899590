use std::path::Path;
use std::process::{Command, Output};

use haptica::output::{parse_report, read_trace};

const SMALL: &str = r#"
seed = 11

[grid]
resolution = 8

[sweep]
directions = 36

[freq_response]
points = 4
f_min = 20.0
f_max = 120.0
min_duration = 0.5

[sysid]
noise_sigma = 0.5

[sysid.chirp]
duration = 6.0

[render]
duration = 1.5
measure_window = [1.0, 1.5]
free_window = [0.0, 0.5]
waypoints = [[0.0, -0.1, 0.70], [1.0, -0.1, 0.5375]]

[stiffness_limit]
sweep_min = 20.0
sweep_max = 140.0
sweep_points = 3
encoder_bits = [10]
unquantized = false
"#;

fn haptica(args: &[&str], threads: Option<&str>) -> Output {
    let mut c = Command::new(env!("CARGO_BIN_EXE_haptica"));
    c.args(args);
    c.env_remove("HAPTICA_THREADS");
    if let Some(t) = threads {
        c.env("HAPTICA_THREADS", t);
    }
    c.output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn small_config(dir: &Path) -> String {
    let p = dir.join("small.cfg");
    std::fs::write(&p, SMALL).unwrap();
    p.to_str().unwrap().to_string()
}

fn run_all(cfg: &str, out: &Path, threads: &str) {
    let o = out.to_str().unwrap();
    for cmd in [
        &["analyze"][..],
        &["stiffness"],
        &["actuator", "step-response"],
        &["actuator", "freq-response"],
        &["sysid", "generate"],
        &["sysid", "validate"],
        &["render", "vbox"],
        &["render", "stiffness-limit"],
    ] {
        let mut args = vec!["--config", cfg, "--out", o, "--quiet"];
        args.extend_from_slice(cmd);
        let r = haptica(&args, Some(threads));
        assert_eq!(code(&r), 0, "{cmd:?}: {}", String::from_utf8_lossy(&r.stderr));
        assert!(r.stderr.is_empty(), "--quiet still printed: {}", String::from_utf8_lossy(&r.stderr));
    }
}

fn listing(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    v.sort();
    v
}

#[test]
fn reruns_are_byte_identical_across_thread_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    run_all(&cfg, &a, "1");
    run_all(&cfg, &b, "3");
    let (la, lb) = (listing(&a), listing(&b));
    let names: Vec<&str> = la.iter().map(|x| x.0.as_str()).collect();
    assert_eq!(
        names,
        [
            "analysis_summary.txt",
            "freq_response.csv",
            "freq_response.txt",
            "metrics_parallel_linear.csv",
            "metrics_parallel_rotational.csv",
            "metrics_serial_rotational.csv",
            "render_vbox.csv",
            "render_vbox.txt",
            "step_response.csv",
            "step_response.txt",
            "stiffness_limit.csv",
            "stiffness_limit.txt",
            "stiffness_parallel_linear.csv",
            "stiffness_parallel_rotational.csv",
            "stiffness_serial_rotational.csv",
            "stiffness_summary.txt",
            "sysid_dynamics.csv",
            "sysid_fit.txt",
            "sysid_generate.txt",
            "sysid_motor.csv",
            "sysid_validation.txt",
        ]
    );
    for (x, y) in la.iter().zip(&lb) {
        assert!(x.1 == y.1, "{} differs between runs", x.0);
    }
}

#[test]
fn csv_headers_and_line_endings() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let out = tmp.path().join("o");
    let o = out.to_str().unwrap();
    for cmd in [&["analyze"][..], &["stiffness"], &["render", "vbox"]] {
        let mut args = vec!["--config", &cfg, "--out", o, "--quiet", "--mechanism", "parallel_linear"];
        args.extend_from_slice(cmd);
        assert_eq!(code(&haptica(&args, None)), 0);
    }
    let head = |f: &str| std::fs::read_to_string(out.join(f)).unwrap().lines().next().unwrap().to_string();
    assert_eq!(head("metrics_parallel_linear.csv"), "x_m,y_m,theta_rad,reachable,force_N,inertial_force_N,density");
    assert_eq!(head("stiffness_parallel_linear.csv"), "x_m,y_m,theta_rad,mechanism,force_per_mm_N,min_eig_N_per_mm");
    assert_eq!(head("render_vbox.csv"), "t_s,x_m,y_m,xq_m,yq_m,Fd_x_N,Fd_y_N,tau1_N,tau2_N,clamped");
    let text = std::fs::read_to_string(out.join("metrics_parallel_linear.csv")).unwrap();
    assert!(!text.contains('\r'));
    assert_eq!(text.lines().count(), 1 + 64 * 36);
    assert!(!out.join("metrics_serial_rotational.csv").exists(), "--mechanism filters");
}

#[test]
fn seed_flag_changes_noisy_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for (dir, seed) in [(&a, "1"), (&b, "2")] {
        let r = haptica(&["--config", &cfg, "--out", dir.to_str().unwrap(), "--seed", seed, "sysid", "generate"], None);
        assert_eq!(code(&r), 0);
    }
    assert_ne!(std::fs::read(a.join("sysid_dynamics.csv")).unwrap(), std::fs::read(b.join("sysid_dynamics.csv")).unwrap());
}

#[test]
fn fit_reads_generated_traces() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let out = tmp.path().join("o");
    let o = out.to_str().unwrap();
    assert_eq!(code(&haptica(&["--config", &cfg, "--out", o, "sysid", "generate"], None)), 0);
    let tr = read_trace(&out.join("sysid_dynamics.csv")).unwrap();
    tr.validate().unwrap();
    assert_eq!(tr.len(), 6001);
    let r = haptica(&["--config", &cfg, "--out", o, "sysid", "fit"], None);
    assert_eq!(code(&r), 0);
    assert!(String::from_utf8_lossy(&r.stderr).contains("reading"));
    let rep = parse_report(&std::fs::read_to_string(out.join("sysid_fit.txt")).unwrap());
    let get = |k: &str| rep.iter().find(|p| p.0 == k).unwrap().1.parse::<f64>().unwrap();
    assert!((get("mass_kg") - 1.116).abs() < 0.05);
    assert!((get("motor_constant_NpA") - 3.25).abs() < 0.1);
}

#[test]
fn exit_codes() {
    assert_eq!(code(&haptica(&["--help"], None)), 0);
    assert_eq!(code(&haptica(&["--version"], None)), 0);
    assert_eq!(code(&haptica(&[], None)), 1);
    assert_eq!(code(&haptica(&["analyse"], None)), 1);
    assert_eq!(code(&haptica(&["--seed", "x", "analyze"], None)), 1);

    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("o");
    let o = out.to_str().unwrap();
    assert_eq!(code(&haptica(&["--config", "/nonexistent.cfg", "analyze"], None)), 2);
    let bad = tmp.path().join("bad.cfg");
    std::fs::write(&bad, "[grid]\nresolutoin = 3\n").unwrap();
    assert_eq!(code(&haptica(&["--config", bad.to_str().unwrap(), "--out", o, "analyze"], None)), 2);
    assert_eq!(code(&haptica(&["--out", o, "--mechanism", "nope", "analyze"], None)), 2);
    assert_eq!(code(&haptica(&["--out", o, "actuator", "step-response"], Some("zero"))), 2);

    // Valid config, but no grid cell is reachable.
    let far = tmp.path().join("far.cfg");
    std::fs::write(&far, "[grid]\nx_range = [5.0, 6.0]\ny_range = [5.0, 6.0]\nresolution = 3\n").unwrap();
    let r = haptica(&["--config", far.to_str().unwrap(), "--out", o, "--mechanism", "serial_rotational", "analyze"], None);
    assert_eq!(code(&r), 3, "{}", String::from_utf8_lossy(&r.stderr));

    // Output directory that cannot be created.
    let blocker = tmp.path().join("file");
    std::fs::write(&blocker, "").unwrap();
    let r = haptica(&["--out", blocker.join("sub").to_str().unwrap(), "actuator", "step-response"], None);
    assert_eq!(code(&r), 3);
}

#[test]
fn step_response_moves_free_rod() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("o");
    assert_eq!(code(&haptica(&["--out", out.to_str().unwrap(), "--quiet", "actuator", "step-response"], None)), 0);
    let tr = read_trace(&out.join("step_response.csv")).unwrap();
    assert_eq!(tr.x[0], 0.0);
    assert!(tr.x.last().unwrap() > &0.01);
    assert!(tr.force.iter().all(|f| *f == 0.0), "free rod has no external force");
}
