//! End-to-end behavior of the `hda` binary: flag handling, exit codes,
//! output files, and reproducibility. Each test drives the compiled binary
//! against a small generated world in a temp directory.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn hda() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hda"))
}

fn run(args: &[&str], dir: &Path) -> Output {
    hda()
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn assert_ok(out: &Output) {
    assert!(
        out.status.success(),
        "expected success, got {:?}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn assert_code(out: &Output, code: i32) {
    assert_eq!(
        out.status.code(),
        Some(code),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

const CONFIG: &str = "\
seed = 42
n_towers = 60
extent_m = 40000
density = clustered(4,5000)
n_users = 80
period = 2007-06-01..2007-07-31
events_per_user_day = 4.0
home_bias = 0.5
night_home_boost = 1.6
holiday = none
";

/// Generate a small world once and hand back the temp dir.
fn generated_world() -> TempDir {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("config.txt"), CONFIG).unwrap();
    let out = run(
        &["generate", "--config", "config.txt", "--out", "world"],
        dir.path(),
    );
    assert_ok(&out);
    dir
}

fn detect_all(dir: &Path) {
    let out = run(
        &[
            "detect",
            "--cdr",
            "world/cdr.csv",
            "--towers",
            "world/towers.csv",
            "--months",
            "2007-06:2007-07",
            "--out",
            "det",
        ],
        dir,
    );
    assert_ok(&out);
}

fn detection_paths(dir: &Path) -> Vec<String> {
    let mut paths: Vec<String> = fs::read_dir(dir.join("det"))
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.starts_with("detections_"))
        .map(|n| format!("det/{n}"))
        .collect();
    paths.sort();
    paths
}

#[test]
fn generate_writes_expected_files_and_is_reproducible() {
    let dir = generated_world();
    for file in ["cdr.csv", "towers.csv", "ground_truth.csv", "config.txt"] {
        assert!(dir.path().join("world").join(file).exists(), "{file}");
    }

    let out = run(
        &["generate", "--config", "config.txt", "--out", "world2"],
        dir.path(),
    );
    assert_ok(&out);
    for file in ["cdr.csv", "towers.csv", "ground_truth.csv"] {
        let a = fs::read(dir.path().join("world").join(file)).unwrap();
        let b = fs::read(dir.path().join("world2").join(file)).unwrap();
        assert_eq!(a, b, "{file} differs between identical runs");
    }
}

#[test]
fn generate_refuses_nonempty_dir_without_force() {
    let dir = generated_world();
    let again = run(
        &["generate", "--config", "config.txt", "--out", "world"],
        dir.path(),
    );
    assert_code(&again, 2);

    let forced = run(
        &[
            "generate",
            "--config",
            "config.txt",
            "--out",
            "world",
            "--force",
        ],
        dir.path(),
    );
    assert_ok(&forced);
}

#[test]
fn generate_seed_override_changes_output() {
    let dir = generated_world();
    let out = run(
        &[
            "generate",
            "--config",
            "config.txt",
            "--seed",
            "7",
            "--out",
            "world7",
        ],
        dir.path(),
    );
    assert_ok(&out);
    let a = fs::read(dir.path().join("world/cdr.csv")).unwrap();
    let b = fs::read(dir.path().join("world7/cdr.csv")).unwrap();
    assert_ne!(a, b, "seed override should change the records");
    let snapshot = fs::read_to_string(dir.path().join("world7/config.txt")).unwrap();
    assert!(snapshot.contains("seed = 7"));
}

#[test]
fn generate_missing_config_key_names_it() {
    let dir = TempDir::new().unwrap();
    let broken = CONFIG.replace("home_bias = 0.5\n", "");
    fs::write(dir.path().join("config.txt"), broken).unwrap();
    let out = run(
        &["generate", "--config", "config.txt", "--out", "world"],
        dir.path(),
    );
    assert_code(&out, 2);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(
        stderr.contains("home_bias"),
        "error should name the missing key, got: {stderr}"
    );
}

#[test]
fn detect_writes_five_files_with_su_filled() {
    let dir = generated_world();
    detect_all(dir.path());
    let paths = detection_paths(dir.path());
    assert_eq!(paths.len(), 5, "one detection file per algorithm: {paths:?}");

    let body = fs::read_to_string(dir.path().join("det/detections_max_activities.csv")).unwrap();
    let mut lines = body.lines();
    assert_eq!(
        lines.next().unwrap(),
        "user_id,month,algorithm,l1,p1,l2,p2,l3,p3,su_m"
    );
    let first = lines.next().expect("at least one detection");
    let su = first.rsplit(',').next().unwrap();
    assert!(!su.is_empty(), "SU column should be filled: {first}");
    su.parse::<f64>().unwrap();
}

#[test]
fn detect_unknown_tower_is_a_data_error() {
    let dir = generated_world();
    let mut cdr = fs::read_to_string(dir.path().join("world/cdr.csv")).unwrap();
    cdr.push_str("u000,2007-06-02T10:00:00,T9999,in,call,60\n");
    fs::write(dir.path().join("bad.csv"), cdr).unwrap();
    let out = run(
        &[
            "detect",
            "--cdr",
            "bad.csv",
            "--towers",
            "world/towers.csv",
            "--months",
            "2007-06:2007-07",
            "--out",
            "det",
        ],
        dir.path(),
    );
    assert_code(&out, 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("T9999"));
}

#[test]
fn detect_empty_month_warns_and_writes_header_only() {
    let dir = generated_world();
    let out = run(
        &[
            "detect",
            "--cdr",
            "world/cdr.csv",
            "--towers",
            "world/towers.csv",
            "--months",
            "2008-01",
            "--out",
            "det",
        ],
        dir.path(),
    );
    assert_ok(&out);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("2008-01"), "should warn about the empty month");
    let body = fs::read_to_string(dir.path().join("det/detections_night_window.csv")).unwrap();
    assert_eq!(body.lines().count(), 1, "header only");
}

#[test]
fn detect_infers_months_when_not_given() {
    let dir = generated_world();
    let out = run(
        &[
            "detect",
            "--cdr",
            "world/cdr.csv",
            "--towers",
            "world/towers.csv",
            "--out",
            "det_auto",
        ],
        dir.path(),
    );
    assert_ok(&out);
    detect_all(dir.path());
    let explicit = fs::read(dir.path().join("det/detections_night_window.csv")).unwrap();
    let inferred = fs::read(dir.path().join("det_auto/detections_night_window.csv")).unwrap();
    assert_eq!(explicit, inferred);
}

#[test]
fn detect_algorithm_subset_and_unknown_name() {
    let dir = generated_world();
    let out = run(
        &[
            "detect",
            "--cdr",
            "world/cdr.csv",
            "--towers",
            "world/towers.csv",
            "--months",
            "2007-06",
            "--algorithms",
            "night_window,max_activities",
            "--out",
            "det2",
        ],
        dir.path(),
    );
    assert_ok(&out);
    let names: Vec<String> = fs::read_dir(dir.path().join("det2"))
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.starts_with("detections_"))
        .collect();
    assert_eq!(names.len(), 2, "{names:?}");

    let bad = run(
        &[
            "detect",
            "--cdr",
            "world/cdr.csv",
            "--towers",
            "world/towers.csv",
            "--algorithms",
            "nonsense",
            "--out",
            "det3",
        ],
        dir.path(),
    );
    assert_code(&bad, 1);
}

#[test]
fn compare_identity_pair_is_one_and_ten_pairs_for_five_algorithms() {
    let dir = generated_world();
    detect_all(dir.path());
    let paths = detection_paths(dir.path());
    let mut args = vec!["compare", "--detections"];
    args.extend(paths.iter().map(|s| s.as_str()));
    args.extend(["--out", "cmp"]);
    let out = run(&args, dir.path());
    assert_ok(&out);

    let body = fs::read_to_string(dir.path().join("cmp/smc_matrix.csv")).unwrap();
    let mut months: BTreeMap<&str, usize> = BTreeMap::new();
    for line in body.lines().skip(1) {
        let month = line.split(',').next().unwrap();
        *months.entry(month).or_default() += 1;
    }
    // 5 algorithms -> 10 unordered pairs, per month and pooled.
    assert_eq!(months["2007-06"], 10);
    assert_eq!(months["2007-07"], 10);
    assert_eq!(months["all"], 10);
}

#[test]
fn compare_disjoint_user_sets_is_an_error() {
    let dir = generated_world();
    detect_all(dir.path());
    let body = fs::read_to_string(dir.path().join("det/detections_max_activities.csv")).unwrap();
    let mut a = String::from("user_id,month,algorithm,l1,p1,l2,p2,l3,p3,su_m\n");
    let mut b = a.clone();
    for (i, line) in body.lines().skip(1).enumerate() {
        // Split the users into two disjoint halves under different labels.
        if i % 2 == 0 {
            a.push_str(line);
            a.push('\n');
        } else {
            b.push_str(&line.replace("max_activities", "night_window"));
            b.push('\n');
        }
    }
    fs::write(dir.path().join("a.csv"), a).unwrap();
    fs::write(dir.path().join("b.csv"), b).unwrap();
    let out = run(
        &[
            "compare",
            "--detections",
            "a.csv",
            "b.csv",
            "--out",
            "cmp2",
        ],
        dir.path(),
    );
    assert_code(&out, 2);
}

#[test]
fn validate_truth_identity_gives_zero_angle_and_full_accuracy() {
    let dir = generated_world();
    // Build detections that copy the ground truth exactly.
    let truth = fs::read_to_string(dir.path().join("world/ground_truth.csv")).unwrap();
    let mut dets = String::from("user_id,month,algorithm,l1,p1,l2,p2,l3,p3,su_m\n");
    for line in truth.lines().skip(1) {
        let (user, home) = line.split_once(',').unwrap();
        dets.push_str(&format!("{user},2007-06,max_activities,{home},10,,,,,0\n"));
    }
    fs::write(dir.path().join("ideal.csv"), dets).unwrap();
    let out = run(
        &[
            "validate",
            "--detections",
            "ideal.csv",
            "--truth",
            "world/ground_truth.csv",
            "--towers",
            "world/towers.csv",
            "--out",
            "val",
        ],
        dir.path(),
    );
    assert_ok(&out);
    let validation = fs::read_to_string(dir.path().join("val/validation.csv")).unwrap();
    let accuracy = fs::read_to_string(dir.path().join("val/accuracy.csv")).unwrap();
    let row = validation.lines().nth(1).unwrap();
    let csm: f64 = row.split(',').nth(2).unwrap().parse().unwrap();
    assert_eq!(csm, 0.0, "identical distribution must give 0 degrees");
    let row = accuracy.lines().nth(1).unwrap();
    let acc: f64 = row.split(',').nth(2).unwrap().parse().unwrap();
    assert_eq!(acc, 1.0);
}

#[test]
fn validate_requires_exactly_one_reference_source() {
    let dir = generated_world();
    detect_all(dir.path());
    let neither = run(
        &[
            "validate",
            "--detections",
            "det/detections_night_window.csv",
            "--towers",
            "world/towers.csv",
            "--out",
            "val",
        ],
        dir.path(),
    );
    assert_code(&neither, 1);

    let both = run(
        &[
            "validate",
            "--detections",
            "det/detections_night_window.csv",
            "--truth",
            "world/ground_truth.csv",
            "--reference",
            "world/ground_truth.csv",
            "--towers",
            "world/towers.csv",
            "--out",
            "val",
        ],
        dir.path(),
    );
    assert_code(&both, 1);
}

#[test]
fn validate_empty_detections_is_an_error() {
    let dir = generated_world();
    fs::write(
        dir.path().join("empty.csv"),
        "user_id,month,algorithm,l1,p1,l2,p2,l3,p3,su_m\n",
    )
    .unwrap();
    let out = run(
        &[
            "validate",
            "--detections",
            "empty.csv",
            "--truth",
            "world/ground_truth.csv",
            "--towers",
            "world/towers.csv",
            "--out",
            "val",
        ],
        dir.path(),
    );
    assert_code(&out, 2);
}

#[test]
fn filter_nests_by_threshold_and_reports_counts() {
    let dir = generated_world();
    detect_all(dir.path());
    for (km, out_dir) in [("1", "f1"), ("70", "f70")] {
        let out = run(
            &[
                "filter",
                "--detections",
                "det/detections_max_activities.csv",
                "--max-su-km",
                km,
                "--out",
                out_dir,
            ],
            dir.path(),
        );
        assert_ok(&out);
    }
    let narrow = fs::read_to_string(dir.path().join("f1/detections_filtered.csv")).unwrap();
    let wide = fs::read_to_string(dir.path().join("f70/detections_filtered.csv")).unwrap();
    let wide_rows: std::collections::HashSet<&str> = wide.lines().collect();
    for line in narrow.lines() {
        assert!(
            wide_rows.contains(line),
            "70 km keep-set should contain the 1 km keep-set"
        );
    }

    let report = fs::read_to_string(dir.path().join("f1/filter_report.csv")).unwrap();
    let row = report.lines().nth(1).unwrap();
    let fields: Vec<&str> = row.split(',').collect();
    assert_eq!(fields[0], "1000");
    let kept: u64 = fields[1].parse().unwrap();
    let dropped: u64 = fields[2].parse().unwrap();
    let total = fs::read_to_string(dir.path().join("det/detections_max_activities.csv"))
        .unwrap()
        .lines()
        .count() as u64
        - 1;
    assert_eq!(kept + dropped, total);

    let bad = run(
        &[
            "filter",
            "--detections",
            "det/detections_max_activities.csv",
            "--max-su-km",
            "-3",
            "--out",
            "fbad",
        ],
        dir.path(),
    );
    assert_code(&bad, 1);
}

#[test]
fn hotspot_runs_and_rejects_bad_confidence() {
    let dir = generated_world();
    detect_all(dir.path());
    let stats = run(
        &[
            "stats",
            "--detections",
            "det/detections_night_window.csv",
            "--out",
            "st",
        ],
        dir.path(),
    );
    assert_ok(&stats);

    let out = run(
        &[
            "hotspot",
            "--vector",
            "st/su_by_tower.csv",
            "--towers",
            "world/towers.csv",
            "--band-m",
            "8000",
            "--confidence",
            "0.95",
            "--out",
            "hs",
        ],
        dir.path(),
    );
    assert_ok(&out);
    let body = fs::read_to_string(dir.path().join("hs/hotspots.csv")).unwrap();
    assert_eq!(body.lines().next().unwrap(), "tower_id,value,z,classification");
    assert!(body.lines().count() > 1);

    let bad = run(
        &[
            "hotspot",
            "--vector",
            "st/su_by_tower.csv",
            "--towers",
            "world/towers.csv",
            "--confidence",
            "0.8",
            "--out",
            "hs2",
        ],
        dir.path(),
    );
    assert_code(&bad, 1);

    // A constant field has no spatial structure to classify.
    let towers = fs::read_to_string(dir.path().join("world/towers.csv")).unwrap();
    let mut flat = String::from("tower_id,value\n");
    for line in towers.lines().skip(1) {
        let id = line.split(',').next().unwrap();
        flat.push_str(&format!("{id},5\n"));
    }
    fs::write(dir.path().join("flat.csv"), flat).unwrap();
    let degenerate = run(
        &[
            "hotspot",
            "--vector",
            "flat.csv",
            "--towers",
            "world/towers.csv",
            "--out",
            "hs3",
        ],
        dir.path(),
    );
    assert_code(&degenerate, 2);
}

#[test]
fn stats_writes_correlation_with_truth() {
    let dir = generated_world();
    detect_all(dir.path());
    let paths = detection_paths(dir.path());
    let mut args = vec!["stats", "--detections"];
    args.extend(paths.iter().map(|s| s.as_str()));
    args.extend([
        "--truth",
        "world/ground_truth.csv",
        "--towers",
        "world/towers.csv",
        "--out",
        "st",
    ]);
    let out = run(&args, dir.path());
    assert_ok(&out);
    for file in [
        "counts.csv",
        "su_summary.csv",
        "su_by_tower.csv",
        "correlation.csv",
    ] {
        assert!(dir.path().join("st").join(file).exists(), "{file}");
    }
    let corr = fs::read_to_string(dir.path().join("st/correlation.csv")).unwrap();
    let row = corr.lines().nth(1).unwrap();
    let n_points: usize = row.split(',').nth(1).unwrap().parse().unwrap();
    // 5 algorithms x 2 months.
    assert_eq!(n_points, 10);

    // Excluding a month drops its points and records the exclusion.
    let mut args = vec!["stats", "--detections"];
    args.extend(paths.iter().map(|s| s.as_str()));
    args.extend([
        "--truth",
        "world/ground_truth.csv",
        "--towers",
        "world/towers.csv",
        "--exclude-months",
        "2007-07",
        "--out",
        "st2",
    ]);
    let out = run(&args, dir.path());
    assert_ok(&out);
    let corr = fs::read_to_string(dir.path().join("st2/correlation.csv")).unwrap();
    let row = corr.lines().nth(1).unwrap();
    let fields: Vec<&str> = row.split(',').collect();
    assert_eq!(fields[1], "5");
    assert_eq!(fields[2], "2007-07");
}

#[test]
fn stats_with_nothing_to_do_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    let out = run(&["stats", "--out", "st"], dir.path());
    assert_code(&out, 1);
}

#[test]
fn detect_is_reproducible_across_thread_counts() {
    let dir = generated_world();
    for (threads, out_dir) in [("1", "t1"), ("4", "t4")] {
        let out = run(
            &[
                "detect",
                "--cdr",
                "world/cdr.csv",
                "--towers",
                "world/towers.csv",
                "--months",
                "2007-06:2007-07",
                "--threads",
                threads,
                "--out",
                out_dir,
            ],
            dir.path(),
        );
        assert_ok(&out);
    }
    for name in [
        "detections_max_activities.csv",
        "detections_max_distinct_days.csv",
        "detections_night_window.csv",
        "detections_spatial_perimeter.csv",
        "detections_night_window_spatial_perimeter.csv",
    ] {
        let a = fs::read(dir.path().join("t1").join(name)).unwrap();
        let b = fs::read(dir.path().join("t4").join(name)).unwrap();
        assert_eq!(a, b, "{name} differs across thread counts");
    }
}

#[test]
fn usage_errors_exit_one() {
    let dir = TempDir::new().unwrap();
    let unknown_flag = run(&["detect", "--no-such-flag"], dir.path());
    assert_code(&unknown_flag, 1);
    let unknown_cmd = run(&["frobnicate"], dir.path());
    assert_code(&unknown_cmd, 1);
    let help = hda().arg("--help").output().unwrap();
    assert_code(&help, 0);
}
