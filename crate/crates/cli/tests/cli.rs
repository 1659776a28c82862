use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn pmedian(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pmedian")).args(args).output().expect("spawn pmedian")
}

fn s(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

fn city(dir: &Path, customers: &str, sites: &str, p: &str) -> String {
    let out = dir.join("city");
    let o = pmedian(&["gen-instance", "--out", &s(&out), "--customers", customers, "--sites", sites, "--p", p, "--seed", "3"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    s(&out)
}

fn stdout_value(o: &Output, key: &str) -> String {
    let text = String::from_utf8_lossy(&o.stdout);
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key}=")).map(str::to_string))
        .unwrap_or_else(|| panic!("no {key} in {text}"))
}

#[test]
fn invalid_config_key_exits_with_2_and_names_it() {
    let tmp = TempDir::new().unwrap();
    let inst = city(tmp.path(), "10", "20", "3");
    let cfg = tmp.path().join("bad.cfg");
    fs::write(&cfg, "algorithm=GA\nnot_a_key=4\n").unwrap();
    let o = pmedian(&["solve", "--instance", &inst, "--config", &s(&cfg), "--out", &s(&tmp.path().join("o"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("not_a_key"));
}

#[test]
fn single_site_instance_has_forced_solution() {
    let tmp = TempDir::new().unwrap();
    let inst = city(tmp.path(), "1", "1", "1");
    let out = tmp.path().join("o");
    let o = pmedian(&["solve", "--instance", &inst, "--algorithm", "VNS", "--out", &s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(fs::read_to_string(out.join("solution.txt")).unwrap().trim(), "1");
    let csv = fs::read_to_string(out.join("solution.csv")).unwrap();
    assert!(csv.starts_with("id,lat,lon\n1,"));
}

#[test]
fn eval_reproduces_solve_fitness_exactly() {
    let tmp = TempDir::new().unwrap();
    let inst = city(tmp.path(), "40", "90", "6");
    let out = tmp.path().join("o");
    let o = pmedian(&["solve", "--instance", &inst, "--algorithm", "ILS", "--iter", "30", "--seed", "5", "--out", &s(&out)]);
    assert!(o.status.success());
    let trace = fs::read_to_string(out.join("trace.csv")).unwrap();
    let tail = trace.lines().last().unwrap().split(',').nth(1).unwrap().to_string();
    let e = pmedian(&["eval", "--instance", &inst, "--solution", &s(&out.join("solution.txt"))]);
    assert!(e.status.success());
    assert_eq!(stdout_value(&e, "fitness"), tail);
    assert_eq!(stdout_value(&o, "fitness"), tail);
}

#[test]
fn eval_rejects_duplicates_and_unknown_ids() {
    let tmp = TempDir::new().unwrap();
    let inst = city(tmp.path(), "10", "20", "3");
    let f = tmp.path().join("sol.txt");
    fs::write(&f, "1\n2\n2\n").unwrap();
    let o = pmedian(&["eval", "--instance", &inst, "--solution", &s(&f)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("duplicate"));
    fs::write(&f, "1\n9999\n").unwrap();
    let o = pmedian(&["eval", "--instance", &inst, "--solution", &s(&f)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("9999"));
}

#[test]
fn all_sites_bound_every_solution() {
    let tmp = TempDir::new().unwrap();
    let inst = city(tmp.path(), "15", "25", "4");
    let all = tmp.path().join("all.txt");
    fs::write(&all, (1..=25).map(|i| format!("{i}\n")).collect::<String>()).unwrap();
    let some = tmp.path().join("some.txt");
    fs::write(&some, "3\n8\n13\n21\n").unwrap();
    let fa: f64 = stdout_value(&pmedian(&["eval", "--instance", &inst, "--solution", &s(&all)]), "fitness").parse().unwrap();
    let fs_: f64 = stdout_value(&pmedian(&["eval", "--instance", &inst, "--solution", &s(&some)]), "fitness").parse().unwrap();
    assert!(fa <= fs_);
}

#[test]
fn experiment_writes_records_summary_and_baseline_ecdf() {
    let tmp = TempDir::new().unwrap();
    let inst = city(tmp.path(), "30", "60", "5");
    let out = tmp.path().join("x");
    let o = pmedian(&[
        "experiment", "--instance", &inst, "--algorithms", "SA", "--scenarios", "graph:citizens", "--runs", "2", "--iter", "20",
        "--time-budget", "20", "--seed", "40", "--out", &s(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let runs = out.join("runs").join("graph_citizens").join("SA");
    assert!(runs.join("seed_40.json").exists() && runs.join("seed_41.json").exists());
    assert_eq!(fs::read_dir(&runs).unwrap().count(), 2);

    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    let row: Vec<&str> = summary.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(&row[..4], ["graph", "citizens", "SA", "2"]);
    let (min, med, max): (f64, f64, f64) = (row[4].parse().unwrap(), row[5].parse().unwrap(), row[7].parse().unwrap());
    assert!(min <= med && med <= max);

    let ecdf = fs::read_to_string(out.join("ecdf.csv")).unwrap();
    assert!(ecdf.lines().any(|l| l == "graph,citizens,BASELINE,0,1"));
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert!(manifest["note"].as_str().unwrap().contains("wall-clock"));
}

#[test]
fn experiment_records_failed_cells_and_exits_nonzero() {
    let tmp = TempDir::new().unwrap();
    let inst = city(tmp.path(), "12", "24", "3");
    fs::remove_file(Path::new(&inst).join("activity.csv")).unwrap();
    let out = tmp.path().join("x");
    let o = pmedian(&[
        "experiment", "--instance", &inst, "--algorithms", "ILS", "--scenarios", "euclidean:uniform,euclidean:demand", "--runs", "1",
        "--iter", "5", "--out", &s(&out),
    ]);
    assert_eq!(o.status.code(), Some(1));
    let failures = fs::read_to_string(out.join("failures.csv")).unwrap();
    assert_eq!(failures.lines().count(), 2);
    assert!(failures.contains("euclidean,demand,ILS,1,"));
    assert!(out.join("runs/euclidean_uniform/ILS/seed_1.json").exists());
}

#[test]
fn expand_rejects_targets_not_above_baseline() {
    let tmp = TempDir::new().unwrap();
    let inst = city(tmp.path(), "20", "50", "5");
    let o = pmedian(&["expand", "--instance", &inst, "--targets", "5,8", "--out", &s(&tmp.path().join("e"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("target 5"));
}

#[test]
fn expand_keeps_baseline_and_reports_its_evaluation() {
    let tmp = TempDir::new().unwrap();
    let inst = city(tmp.path(), "30", "70", "5");
    let out = tmp.path().join("e");
    let o = pmedian(&["expand", "--instance", &inst, "--targets", "6,8", "--seeds", "2", "--iter", "20", "--out", &s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("expansion.csv")).unwrap();
    let rows: Vec<Vec<String>> = csv.lines().skip(1).map(|l| l.split(',').map(String::from).collect()).collect();
    assert_eq!(rows.len(), 3);
    let e = pmedian(&["eval", "--instance", &inst, "--solution", &format!("{inst}/baseline.txt")]);
    assert_eq!(stdout_value(&e, "fitness"), rows[0][1]);
    assert_eq!(stdout_value(&e, "mean_walk_m"), rows[0][2]);
    let base = fs::read_to_string(Path::new(&inst).join("baseline.txt")).unwrap();
    let grown = fs::read_to_string(out.join("solutions/stations_8.txt")).unwrap();
    assert!(grown.starts_with(&base));
    let walks: Vec<f64> = rows.iter().map(|r| r[2].parse().unwrap()).collect();
    assert!(walks[1] < walks[0] && walks[2] < walks[1]);
}

#[test]
fn precomputed_cache_is_used_and_checked() {
    let tmp = TempDir::new().unwrap();
    let inst = city(tmp.path(), "20", "40", "4");
    let sol = tmp.path().join("sol.txt");
    fs::write(&sol, "1\n2\n3\n4\n").unwrap();
    let before = stdout_value(&pmedian(&["eval", "--instance", &inst, "--solution", &s(&sol)]), "fitness");
    assert!(pmedian(&["precompute-distances", "--instance", &inst]).status.success());
    let after = stdout_value(&pmedian(&["eval", "--instance", &inst, "--solution", &s(&sol)]), "fitness");
    assert_eq!(before, after);

    let cache = Path::new(&inst).join("distances.bin");
    let mut bytes = fs::read(&cache).unwrap();
    let mid = bytes.len() / 2;
    bytes[mid] ^= 0xff;
    fs::write(&cache, bytes).unwrap();
    let o = pmedian(&["eval", "--instance", &inst, "--solution", &s(&sol)]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("checksum"));
}
