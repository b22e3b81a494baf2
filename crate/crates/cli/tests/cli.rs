use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

use hkmedian::algorithm::Algorithm;
use hkmedian::datasets::{load_csv, CsvOptions};
use hkmedian::sensitivity::avg_sensitivity_exact;

fn hkmedian(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hkmedian"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = hkmedian(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn code(args: &[&str]) -> i32 {
    hkmedian(args).status.code().expect("exit code")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

/// Rows of a CSV output after its config line and header.
fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(2)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn write_points(dir: &TempDir) -> std::path::PathBuf {
    let path = dir.path().join("points.csv");
    let mut text = String::new();
    for i in 0..12 {
        let (x, y) = ((i % 4) as f64 * 1.5 + (i / 4) as f64 * 20.0, (i * 7 % 5) as f64 * 0.3);
        text.push_str(&format!("{x},{y}\n"));
    }
    text.push_str("200,200\n");
    fs::write(&path, text).unwrap();
    path
}

#[test]
fn cluster_writes_requested_levels_reproducibly() {
    let dir = TempDir::new().unwrap();
    let input = write_points(&dir);
    let (a, b) = (dir.path().join("a.json"), dir.path().join("b.json"));
    let args = |out: &Path| {
        vec![
            "cluster",
            "--input",
            p(&input),
            "--algorithm",
            "stable",
            "--epsilon",
            "1",
            "--k",
            "4",
            "--seed",
            "7",
            "--out",
        ]
        .into_iter()
        .map(str::to_string)
        .chain([p(out).to_string()])
        .collect::<Vec<_>>()
    };
    ok(&args(&a).iter().map(String::as_str).collect::<Vec<_>>());
    ok(&args(&b).iter().map(String::as_str).collect::<Vec<_>>());
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());

    let doc = read_json(&a);
    let levels = doc["runs"][0]["levels"].as_array().unwrap();
    assert_eq!(levels.len(), 4);
    let last = &levels[3];
    assert_eq!(last["k"], 4);
    assert_eq!(last["blocks"].as_array().unwrap().len(), 4);
    for key in ["euclidean_cost", "tree_cost"] {
        let costs: Vec<f64> = levels.iter().map(|l| l[key].as_f64().unwrap()).collect();
        assert!(costs.windows(2).all(|w| w[1] <= w[0] + 1e-9), "{key}: {costs:?}");
    }
    assert_eq!(doc["config"]["seed"], 7);
}

#[test]
fn every_output_reruns_from_its_embedded_config() {
    let dir = TempDir::new().unwrap();
    let d = |name: &str| dir.path().join(name);
    ok(&[
        "cluster",
        "--generator",
        "mixture:n=40,d=2,clusters=3",
        "--algorithm",
        "stable,ward",
        "--epsilon",
        "10",
        "--seed",
        "3",
        "--out",
        p(&d("c1.json")),
    ]);
    ok(&["cluster", "--config", p(&d("c1.json")), "--out", p(&d("c2.json"))]);
    assert_eq!(fs::read(d("c1.json")).unwrap(), fs::read(d("c2.json")).unwrap());

    ok(&[
        "cost-curve",
        "--generator",
        "uniform:n=30,d=2",
        "--algorithm",
        "clnss-greedy,single",
        "--trials",
        "4",
        "--out",
        p(&d("k1.csv")),
    ]);
    ok(&["cost-curve", "--config", p(&d("k1.csv")), "--out", p(&d("k2.csv"))]);
    assert_eq!(fs::read(d("k1.csv")).unwrap(), fs::read(d("k2.csv")).unwrap());

    ok(&[
        "sensitivity",
        "--generator",
        "gaussian:n=25,d=2",
        "--algorithm",
        "stable",
        "--epsilon",
        "5",
        "--k",
        "3",
        "--delete",
        "frac:0.1",
        "--trials",
        "6",
        "--out",
        p(&d("s1")),
    ]);
    ok(&[
        "sensitivity",
        "--config",
        p(&d("s1/stable-eps5-frac0.1-k3.json")),
        "--out",
        p(&d("s2")),
    ]);
    for f in [
        "summary.csv",
        "stable-eps5-frac0.1-k3.csv",
        "stable-eps5-frac0.1-k3.json",
    ] {
        assert_eq!(
            fs::read(d("s1").join(f)).unwrap(),
            fs::read(d("s2").join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn worker_count_does_not_change_results() {
    let dir = TempDir::new().unwrap();
    let run = |workers: &str, out: &str| {
        ok(&[
            "sensitivity",
            "--generator",
            "gaussian:n=40,d=2",
            "--algorithm",
            "stable,clnss-greedy",
            "--epsilon",
            "1",
            "--k-range",
            "2:4",
            "--delete",
            "count:3",
            "--trials",
            "12",
            "--workers",
            workers,
            "--out",
            p(&dir.path().join(out)),
        ]);
        fs::read(dir.path().join(out).join("summary.csv")).unwrap()
    };
    assert_eq!(run("1", "one"), run("4", "four"));
}

#[test]
fn exact_mode_matches_the_library() {
    let dir = TempDir::new().unwrap();
    let input = write_points(&dir);
    let out = dir.path().join("s");
    ok(&[
        "sensitivity",
        "--input",
        p(&input),
        "--algorithm",
        "complete,clnss-deterministic",
        "--k",
        "3",
        "--exact",
        "--out",
        p(&out),
    ]);
    let ds = load_csv(&input, CsvOptions::default()).unwrap();
    let rows = csv_rows(&out.join("summary.csv"));
    for (row, name) in rows.iter().zip(["complete", "clnss-deterministic"]) {
        let expect = avg_sensitivity_exact(&Algorithm::from_name(name, None).unwrap(), &ds, 3).unwrap();
        assert_eq!(row[0], name);
        assert_eq!(row[6].parse::<f64>().unwrap(), expect.mean);
    }
    let sampled = dir.path().join("t");
    ok(&[
        "sensitivity",
        "--input",
        p(&input),
        "--algorithm",
        "complete,clnss-deterministic",
        "--k",
        "3",
        "--out",
        p(&sampled),
    ]);
    let means = |path: &Path| {
        csv_rows(&path.join("summary.csv"))
            .into_iter()
            .map(|r| r[6].clone())
            .collect::<Vec<_>>()
    };
    assert_eq!(means(&out), means(&sampled));
}

#[test]
fn cost_curves_decrease_and_reach_zero() {
    let dir = TempDir::new().unwrap();
    let input = write_points(&dir);
    let out = dir.path().join("curve.csv");
    ok(&[
        "cost-curve",
        "--input",
        p(&input),
        "--algorithm",
        "stable,clnss-greedy,single,complete,average,ward",
        "--epsilon",
        "1",
        "--trials",
        "5",
        "--out",
        p(&out),
    ]);
    let rows = csv_rows(&out);
    assert_eq!(rows.len(), 6 * 13);
    for curve in rows.chunks(13) {
        let costs: Vec<f64> = curve.iter().map(|r| r[3].parse().unwrap()).collect();
        assert!(
            costs.windows(2).all(|w| w[1] <= w[0] + 1e-9),
            "{}: {costs:?}",
            curve[0][1]
        );
        assert!(costs[12].abs() < 1e-9, "{} at k = n", curve[0][1]);
    }
}

#[test]
fn single_linkage_costs_more_with_outliers() {
    let dir = TempDir::new().unwrap();
    let input = dir.path().join("outliers.csv");
    let mut text = String::new();
    for c in 0..4 {
        for i in 0..15 {
            let a = i as f64 * 0.4;
            text.push_str(&format!(
                "{},{}\n",
                c as f64 * 10.0 + a.cos() * (1.0 + i as f64 * 0.05),
                a.sin() * 1.5
            ));
        }
    }
    for i in 0..4 {
        text.push_str(&format!("{},{}\n", 15.0 + i as f64 * 9.0, 40.0 + i as f64 * 11.0));
    }
    fs::write(&input, text).unwrap();
    let out = dir.path().join("curve.csv");
    ok(&[
        "cost-curve",
        "--input",
        p(&input),
        "--algorithm",
        "single,complete,average,ward",
        "--k-range",
        "2:8",
        "--out",
        p(&out),
    ]);
    let rows = csv_rows(&out);
    let total = |name: &str| {
        rows.iter()
            .filter(|r| r[1] == name)
            .map(|r| r[3].parse::<f64>().unwrap())
            .sum::<f64>()
    };
    for other in ["complete", "average", "ward"] {
        assert!(
            total("single") >= total(other),
            "single {} vs {other} {}",
            total("single"),
            total(other)
        );
    }
}

#[test]
fn clusterability_reports_and_presets() {
    let dir = TempDir::new().unwrap();
    for labels in [vec!["--labels", "truth"], vec!["--eps", "2", "--min-samples", "3"]] {
        let out = dir.path().join(labels[1]);
        let mut args = vec![
            "clusterability",
            "--generator",
            "clusterable:m=5,size=12",
            "--out",
            p(&out),
        ];
        args.extend(labels.iter().copied());
        ok(&args);
        let doc = read_json(&out.join("report.json"));
        assert_eq!(doc["report"]["verdict"], true);
        assert_eq!(doc["clusters"].as_array().unwrap().len(), 5);
        let table = csv_rows(&out.join("table.csv"));
        assert_eq!(table.len(), 5);
        for row in &table {
            let (intra, inter): (f64, f64) = (row[2].parse().unwrap(), row[3].parse().unwrap());
            assert!(inter > 2.0 * intra);
        }
        assert_eq!(csv_rows(&out.join("labels.csv")).len(), 60);
    }
    for preset in ["wholesale", "diabetes", "digits", "yeast", "iris", "wine", "wdbc"] {
        let out = hkmedian(&[
            "clusterability",
            "--generator",
            "mixture:n=150,d=2,clusters=3,spread=3",
            "--scale",
            "--preset",
            preset,
        ]);
        assert!(
            out.status.success(),
            "{preset}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        let doc: Value = serde_json::from_slice(&out.stdout).unwrap();
        assert_eq!(doc["dbscan"]["min_samples"], 3);
    }
}

#[test]
fn generated_files_load_back() {
    let dir = TempDir::new().unwrap();
    let csv = dir.path().join("adv.csv");
    ok(&["gen", "--generator", "adversarial:n=64", "--out", p(&csv)]);
    let side = read_json(&dir.path().join("adv.csv.json"));
    assert_eq!(side["n"], 64);
    assert_eq!(side["extra"]["cells"].as_array().unwrap().len(), 16);
    let from_file = ok(&[
        "cluster",
        "--input",
        p(&csv),
        "--header",
        "--algorithm",
        "clnss-deterministic",
        "--k",
        "5",
    ]);
    let from_gen = ok(&[
        "cluster",
        "--generator",
        "adversarial:n=64",
        "--algorithm",
        "clnss-deterministic",
        "--k",
        "5",
    ]);
    let runs = |o: &Output| serde_json::from_slice::<Value>(&o.stdout).unwrap()["runs"].clone();
    assert_eq!(runs(&from_file), runs(&from_gen));
}

#[test]
fn toml_config_with_flag_override() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(
        &cfg,
        "generator = \"line:n=20,d1=0.5\"\nalgorithms = [\"single\"]\nk = 3\nseed = 4\n",
    )
    .unwrap();
    let out = ok(&["cluster", "--config", p(&cfg), "--k", "2"]);
    let doc: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["config"]["k"], 2);
    assert_eq!(doc["config"]["seed"], 4);
    assert_eq!(doc["runs"][0]["levels"].as_array().unwrap().len(), 2);
    fs::write(&cfg, "colour = 3\n").unwrap();
    assert_eq!(code(&["cluster", "--config", p(&cfg)]), 2);
}

#[test]
fn exit_codes_separate_config_and_data_errors() {
    let dir = TempDir::new().unwrap();
    let input = write_points(&dir);
    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "1,2\n3,oops\n").unwrap();
    let dup = dir.path().join("dup.csv");
    fs::write(&dup, "1,2\n1,2\n").unwrap();
    let ragged = dir.path().join("ragged.csv");
    fs::write(&ragged, "1,2\n3\n").unwrap();
    let i = p(&input);
    assert_eq!(code(&["cluster", "--input", p(&bad), "--algorithm", "single"]), 3);
    assert_eq!(code(&["cluster", "--input", p(&dup), "--algorithm", "single"]), 3);
    assert_eq!(code(&["cluster", "--input", p(&ragged), "--algorithm", "single"]), 3);
    assert_eq!(
        code(&["cluster", "--input", "/no/such/file.csv", "--algorithm", "single"]),
        3
    );
    assert_eq!(
        code(&["cluster", "--input", i, "--algorithm", "single", "--epsilon", "1"]),
        2
    );
    assert_eq!(code(&["cluster", "--input", i, "--algorithm", "kmeans"]), 2);
    assert_eq!(
        code(&["cluster", "--input", i, "--algorithm", "single", "--k", "99"]),
        2
    );
    assert_eq!(code(&["cluster", "--input", i]), 2);
    assert_eq!(code(&["sensitivity", "--input", i, "--algorithm", "single"]), 2);
    assert_eq!(
        code(&[
            "sensitivity",
            "--input",
            i,
            "--algorithm",
            "stable",
            "--k",
            "2",
            "--exact",
            "--out",
            p(dir.path())
        ]),
        2
    );
    assert_eq!(
        code(&[
            "sensitivity",
            "--input",
            i,
            "--algorithm",
            "single",
            "--k",
            "2",
            "--delete",
            "frac:2",
            "--out",
            p(dir.path())
        ]),
        2
    );
    assert_eq!(code(&["clusterability", "--input", i]), 2);
    assert_eq!(
        code(&[
            "gen",
            "--generator",
            "adversarial:n=50",
            "--out",
            p(&dir.path().join("x.csv"))
        ]),
        2
    );
    assert_eq!(
        code(&["cluster", "--generator", "uniform:n=5", "--algorithm", "single"]),
        2
    );
    assert_eq!(code(&["bogus"]), 2);
    let c = dir.path().join("c.json");
    ok(&["cluster", "--input", i, "--algorithm", "single", "--out", p(&c)]);
    assert_eq!(code(&["cost-curve", "--config", p(&c)]), 2);
}

#[test]
fn inputs_are_never_modified() {
    let dir = TempDir::new().unwrap();
    let input = write_points(&dir);
    let before = fs::read(&input).unwrap();
    ok(&[
        "cluster",
        "--input",
        p(&input),
        "--algorithm",
        "ward",
        "--scale",
        "--out",
        p(&dir.path().join("o.json")),
    ]);
    assert_eq!(
        code(&[
            "cluster",
            "--input",
            p(&input),
            "--algorithm",
            "ward",
            "--out",
            p(&input)
        ]),
        2
    );
    assert_eq!(fs::read(&input).unwrap(), before);
}
