//! End-to-end checks of the command-line surface: file formats, CSV
//! determinism, the plain/encrypted mirror, exit codes, and the
//! config/env/flag precedence chain.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_pega"))
}

fn workdir(label: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("pega-cli-test-{}-{label}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn triangle_file(dir: &Path) -> PathBuf {
    let path = dir.join("triangle.tsp");
    std::fs::write(
        &path,
        "NAME: triangle\nTYPE: TSP\nDIMENSION: 3\nEDGE_WEIGHT_TYPE: EXPLICIT\nEDGE_WEIGHT_FORMAT: FULL_MATRIX\nEDGE_WEIGHT_SECTION\n0 12 7\n12 0 20\n7 20 0\nEOF\n",
    )
    .unwrap();
    path
}

fn gr48_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/tsplib/gr48.tsp")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn assert_ok(output: &Output) {
    assert!(
        output.status.success(),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr)
    );
}

#[test]
fn keygen_encrypt_roundtrip() {
    let dir = workdir("keygen");
    let keys = dir.join("keys-roundtrip");
    let out = run(&["keygen", "--bits", "128", "--seed", "5", "--out", keys.to_str().unwrap()]);
    assert_ok(&out);
    for file in ["pk.bin", "sk.bin", "share1.bin", "share2.bin"] {
        assert!(keys.join(file).exists(), "{file} missing");
    }

    let tsp = triangle_file(&dir);
    let container = dir.join("triangle.etsp");
    let out = run(&[
        "encrypt",
        "--tsp",
        tsp.to_str().unwrap(),
        "--pk",
        keys.join("pk.bin").to_str().unwrap(),
        "--scale",
        "24",
        "--perm-seed",
        "3",
        "--out",
        container.to_str().unwrap(),
    ]);
    assert_ok(&out);
    let bytes = std::fs::read(&container).unwrap();
    let parsed = pega_core::tsp::EncryptedTsp::from_bytes(&bytes).unwrap();
    assert_eq!(parsed.m, 3);
    assert_eq!(parsed.scale, 24);
    let map_bytes = std::fs::read(dir.join("triangle.etsp.map")).unwrap();
    pega_core::tsp::CityMap::from_bytes(&map_bytes).unwrap();
}

#[test]
fn solve_triangle_finds_the_only_tour_cost() {
    let dir = workdir("triangle");
    let tsp = triangle_file(&dir);
    for mode in ["plain", "pega"] {
        let csv = dir.join(format!("triangle-{mode}.csv"));
        let out = run(&[
            "solve",
            "--tsp",
            tsp.to_str().unwrap(),
            "--mode",
            mode,
            "--selection",
            "tournament",
            "--pop",
            "4",
            "--gens",
            "3",
            "--scale",
            "24",
            "--bits",
            "128",
            "--csv",
            csv.to_str().unwrap(),
        ]);
        assert_ok(&out);
        let text = std::fs::read_to_string(&csv).unwrap();
        assert!(text.ends_with("cost=39\n"), "{mode}: {text}");
        assert!(text.starts_with("generation,best_cost,mean_cost\n"));
    }
}

#[test]
fn csv_output_is_deterministic_and_mirrors_across_modes() {
    let dir = workdir("determinism");
    let gr48 = gr48_path();
    let mut csvs = Vec::new();
    for (mode, name) in
        [("plain", "a.csv"), ("plain", "b.csv"), ("pega", "c.csv")]
    {
        let csv = dir.join(name);
        let out = run(&[
            "solve",
            "--tsp",
            gr48.to_str().unwrap(),
            "--mode",
            mode,
            "--selection",
            "tournament",
            "--pop",
            "12",
            "--gens",
            "8",
            "--scale",
            "64",
            "--bits",
            "192",
            "--master-seed",
            "41",
            "--csv",
            csv.to_str().unwrap(),
        ]);
        assert_ok(&out);
        csvs.push(std::fs::read(&csv).unwrap());
    }
    assert_eq!(csvs[0], csvs[1], "identical invocations must emit identical bytes");
    assert_eq!(csvs[0], csvs[2], "plain and encrypted runs must mirror");
}

#[test]
fn append_final_collects_one_number_per_run() {
    let dir = workdir("finals");
    let tsp = triangle_file(&dir);
    let finals = dir.join("finals.txt");
    let _ = std::fs::remove_file(&finals);
    for seed in ["1", "2"] {
        let out = run(&[
            "solve",
            "--tsp",
            tsp.to_str().unwrap(),
            "--pop",
            "4",
            "--gens",
            "2",
            "--scale",
            "24",
            "--master-seed",
            seed,
            "--csv",
            dir.join("scratch.csv").to_str().unwrap(),
            "--append-final",
            finals.to_str().unwrap(),
        ]);
        assert_ok(&out);
    }
    let text = std::fs::read_to_string(&finals).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines, vec!["39", "39"]);
}

#[test]
fn stats_reports_textbook_values_and_pvalues() {
    let dir = workdir("stats");
    let a = dir.join("sample_a.txt");
    let b = dir.join("sample_b.txt");

    // identical samples: p = 1
    std::fs::write(&a, "1\n2\n3\n4\n5\n").unwrap();
    let out = run(&["stats", "--csv-a", a.to_str().unwrap(), "--csv-b", a.to_str().unwrap()]);
    assert_ok(&out);
    let text = String::from_utf8_lossy(&out.stdout).to_string();
    assert!(text.contains("p_value 1"), "{text}");

    // disjoint samples: tiny p
    let lo: String = (1..=30).map(|i| format!("{i}\n")).collect();
    let hi: String = (101..=130).map(|i| format!("{i}\n")).collect();
    std::fs::write(&a, lo).unwrap();
    std::fs::write(&b, hi).unwrap();
    let out = run(&["stats", "--csv-a", a.to_str().unwrap(), "--csv-b", b.to_str().unwrap()]);
    assert_ok(&out);
    let text = String::from_utf8_lossy(&out.stdout).to_string();
    let p: f64 = text
        .lines()
        .find_map(|line| line.strip_prefix("p_value "))
        .unwrap()
        .parse()
        .unwrap();
    assert!(p < 1e-6, "{text}");

    // textbook mean and sample std
    std::fs::write(&a, "2\n4\n4\n4\n5\n5\n7\n9\n").unwrap();
    let out = run(&["stats", "--csv-a", a.to_str().unwrap(), "--csv-b", a.to_str().unwrap()]);
    assert_ok(&out);
    let text = String::from_utf8_lossy(&out.stdout).to_string();
    assert!(text.contains("mean_a 5"), "{text}");
    let std_a: f64 = text
        .lines()
        .find_map(|line| line.strip_prefix("std_a "))
        .unwrap()
        .parse()
        .unwrap();
    assert!((std_a - (32.0f64 / 7.0).sqrt()).abs() < 1e-9);
}

#[test]
fn exit_codes_distinguish_usage_and_data_errors() {
    // unknown flag: usage error
    let out = bin().arg("solve").arg("--no-such-flag").output().unwrap();
    assert_eq!(out.status.code(), Some(1));

    // missing required option: usage error
    let out = run(&["solve"]);
    assert_eq!(out.status.code(), Some(1));

    // unreadable instance: data error
    let out = run(&["solve", "--tsp", "/nonexistent/x.tsp", "--gens", "1"]);
    assert_eq!(out.status.code(), Some(2));

    // unsupported weight type: data error
    let dir = workdir("exitcodes");
    let geo = dir.join("geo.tsp");
    std::fs::write(&geo, "NAME: g\nTYPE: TSP\nDIMENSION: 3\nEDGE_WEIGHT_TYPE: GEO\nEOF\n")
        .unwrap();
    let out = run(&["solve", "--tsp", geo.to_str().unwrap(), "--gens", "1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn config_file_and_env_fill_missing_flags() {
    let dir = workdir("config");
    let tsp = triangle_file(&dir);
    let config = dir.join("run.conf");
    std::fs::write(
        &config,
        format!("tsp={}\npop=4\ngens=2\nscale=24\nmaster-seed=9\n", tsp.display()),
    )
    .unwrap();

    // everything from the config file
    let csv_a = dir.join("conf_a.csv");
    let out = bin()
        .args(["solve", "--config", config.to_str().unwrap(), "--csv", csv_a.to_str().unwrap()])
        .output()
        .unwrap();
    assert_ok(&out);

    // env overrides config (seed change => same file shape, run succeeds)
    let csv_b = dir.join("conf_b.csv");
    let out = bin()
        .args(["solve", "--config", config.to_str().unwrap(), "--csv", csv_b.to_str().unwrap()])
        .env("PEGA_MASTER_SEED", "10")
        .output()
        .unwrap();
    assert_ok(&out);

    // CLI overrides both: pin the seed back to 9 and compare with run A
    let csv_c = dir.join("conf_c.csv");
    let out = bin()
        .args([
            "solve",
            "--config",
            config.to_str().unwrap(),
            "--master-seed",
            "9",
            "--csv",
            csv_c.to_str().unwrap(),
        ])
        .env("PEGA_MASTER_SEED", "10")
        .output()
        .unwrap();
    assert_ok(&out);

    let a = std::fs::read(&csv_a).unwrap();
    let c = std::fs::read(&csv_c).unwrap();
    assert_eq!(a, c, "CLI flag must override the environment");
}

#[test]
fn bench_reports_payloads_for_each_instance() {
    let out = run(&[
        "bench",
        "--instances",
        gr48_path().to_str().unwrap(),
        "--bits",
        "128",
        "--scale",
        "40",
        "--pop",
        "6",
        "--gens",
        "2",
    ]);
    assert_ok(&out);
    let text = String::from_utf8_lossy(&out.stdout).to_string();
    assert!(text.contains("gr48"), "{text}");
    assert!(text.contains("1128"), "pair count missing: {text}");
}
