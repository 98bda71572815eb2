mod common;

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use common::px;
use crisp_match::io::{self, MapFormat};
use crisp_match::synth::{polyline_dataset, PolylineParams};
use crisp_match::{thin, BinaryMap, ConfidenceMap};

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_crisp-match"))
        .args(args)
        .env_remove("CRISP_MATCH_THREADS")
        .output()
        .expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

/// The 5×5 worked example: GT {(1,1),(3,3)}, three predictions.
fn worked_example(dir: &Path) -> (PathBuf, PathBuf) {
    let mut pred = ConfidenceMap::zeros(5, 5);
    pred.set(1, 2, 0.9);
    pred.set(2, 2, 0.8);
    pred.set(4, 3, 0.95);
    let gt = BinaryMap::from_pixels(5, 5, &[px(1, 1), px(3, 3)]);
    let (p, g) = (dir.join("p.emap"), dir.join("g.pgm"));
    io::write_map(&pred, &p, MapFormat::Emap).unwrap();
    io::write_map(&gt, &g, MapFormat::Pgm).unwrap();
    (p, g)
}

#[test]
fn match_writes_the_optimal_label() {
    let dir = tempfile::tempdir().unwrap();
    let (p, g) = worked_example(dir.path());
    let out = dir.path().join("ghat.pgm");
    let o = cli(&[
        "match",
        "--pred",
        s(&p),
        "--gt",
        s(&g),
        "--tau-c",
        "0.1",
        "--tau-d",
        "4",
        "--alpha",
        "2",
        "--out",
        s(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let label = io::read_binary_map(&out).unwrap();
    assert_eq!(label.ones(), vec![px(1, 2), px(4, 3)]);
    // Confidences pass through f32, so compare the cost loosely.
    let cost_line = stdout(&o)
        .lines()
        .find(|l| l.starts_with("total cost"))
        .unwrap()
        .to_string();
    let cost: f64 = cost_line.rsplit(' ').next().unwrap().parse().unwrap();
    assert!((cost + 1.7).abs() < 1e-6, "{cost_line}");
}

#[test]
fn match_defaults_and_emap_output() {
    let dir = tempfile::tempdir().unwrap();
    let (p, g) = worked_example(dir.path());
    let out = dir.path().join("ghat.emap");
    let o = cli(&[
        "match",
        "--pred",
        s(&p),
        "--gt",
        s(&g),
        "--tiles",
        "1x1",
        "--out",
        s(&out),
    ]);
    assert!(o.status.success());
    let label = io::read_map(&out).unwrap();
    assert!(label.values().iter().all(|&v| v == 0.0 || v == 1.0));
    assert_eq!(label.values().iter().filter(|&&v| v == 1.0).count(), 2);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let (p, g) = worked_example(dir.path());
    let out = dir.path().join("o.pgm");
    // Missing required flag.
    assert_eq!(cli(&["match", "--pred", s(&p)]).status.code(), Some(1));
    // Unknown subcommand.
    assert_eq!(cli(&["frobnicate"]).status.code(), Some(1));
    // Invalid parameter value.
    let o = cli(&[
        "match",
        "--pred",
        s(&p),
        "--gt",
        s(&g),
        "--tau-d",
        "0",
        "--out",
        s(&out),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!o.stderr.is_empty() && o.stdout.is_empty());
    // Missing input file.
    let missing = dir.path().join("missing.emap");
    let o = cli(&[
        "match",
        "--pred",
        s(&missing),
        "--gt",
        s(&g),
        "--out",
        s(&out),
    ]);
    assert_eq!(o.status.code(), Some(2));
    // Unwritable output.
    let o = cli(&[
        "match",
        "--pred",
        s(&p),
        "--gt",
        s(&g),
        "--out",
        s(&dir.path().join("no/such/dir.pgm")),
    ]);
    assert_eq!(o.status.code(), Some(2));
    // Malformed manifest.
    let m = dir.path().join("m.tsv");
    std::fs::write(&m, "p.emap\n").unwrap();
    assert_eq!(cli(&["eval", "--manifest", s(&m)]).status.code(), Some(1));
    // Corrupt map.
    let bad = dir.path().join("bad.pgm");
    std::fs::write(&bad, b"P6 1 1 255\n\0").unwrap();
    assert_eq!(
        cli(&["postprocess", "--pred", s(&bad), "--out", s(&out)])
            .status
            .code(),
        Some(1)
    );
    // Help and version succeed.
    assert_eq!(cli(&["--help"]).status.code(), Some(0));
    assert_eq!(cli(&["--version"]).status.code(), Some(0));
}

#[test]
fn help_lists_every_flag_with_defaults() {
    let expected: &[(&str, &[&str])] = &[
        (
            "match",
            &[
                "--pred",
                "--gt",
                "--tau-c",
                "--tau-d",
                "--alpha",
                "--tiles",
                "--out",
                "--threads",
                "[default: 0.01]",
                "[default: 4]",
                "[default: 25]",
            ],
        ),
        (
            "postprocess",
            &[
                "--pred",
                "--nms-r",
                "--nms-s",
                "--nms-e",
                "--threshold",
                "--out",
                "[default: 1]",
                "[default: 5]",
                "[default: 1.01]",
            ],
        ),
        (
            "eval",
            &[
                "--manifest",
                "--protocol",
                "--tolerance",
                "--distance",
                "--report",
                "--box-blur",
                "--threads",
                "[default: seval]",
                "[default: euclidean]",
                "[default: 4]",
            ],
        ),
        (
            "loss",
            &[
                "--pred",
                "--gt",
                "--beta",
                "--eps",
                "--l-model",
                "--grad-out",
                "--tau-c",
                "--tau-d",
                "--alpha",
                "[default: 1]",
            ],
        ),
        (
            "bench",
            &[
                "--scenario",
                "--sizes",
                "--trials",
                "--images",
                "--parallel",
                "--json",
                "[default: 50,100,200,400]",
                "[default: 3]",
            ],
        ),
    ];
    for (sub, flags) in expected {
        let o = cli(&[sub, "--help"]);
        assert!(o.status.success());
        let text = stdout(&o);
        for f in *flags {
            assert!(text.contains(f), "`{sub} --help` lacks {f}:\n{text}");
        }
        assert!(text.contains("CRISP_MATCH_THREADS"));
    }
}

#[test]
fn seval_on_thinned_ground_truth_scores_one() {
    let dir = tempfile::tempdir().unwrap();
    let params = PolylineParams {
        margin: 8,
        ..PolylineParams::default()
    };
    let mut manifest = String::from("# thinned ground truth as prediction\n");
    for (i, img) in polyline_dataset(4, 72, 56, &params, 31)
        .into_iter()
        .enumerate()
    {
        let gt = thin(&img.gt);
        let (p, g) = (format!("p{i}.emap"), format!("g{i}.pgm"));
        io::write_map(&gt.to_confidence(), dir.path().join(&p), MapFormat::Emap).unwrap();
        io::write_map(&gt, dir.path().join(&g), MapFormat::Pgm).unwrap();
        manifest.push_str(&format!("id=img{i}\t{p}\t{g}\n"));
    }
    let m = dir.path().join("m.tsv");
    std::fs::write(&m, manifest).unwrap();
    let report = dir.path().join("r.json");
    let o = cli(&[
        "eval",
        "--manifest",
        s(&m),
        "--protocol",
        "seval",
        "--tolerance",
        "4",
        "--report",
        s(&report),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(v["ods"].as_f64(), Some(1.0));
    assert_eq!(v["protocol"], "seval");
    assert_eq!(v["thresholds"].as_array().unwrap().len(), 100);
    assert_eq!(v["dataset_curve"].as_array().unwrap().len(), 100);
    let images = v["images"].as_array().unwrap();
    assert_eq!(images.len(), 4);
    assert_eq!(images[2]["id"], "img2");
    assert!(images.iter().all(|i| i["ac"].as_f64().is_some()));
}

#[test]
fn eval_to_stdout_with_blur_and_manhattan() {
    let dir = tempfile::tempdir().unwrap();
    let (p, g) = worked_example(dir.path());
    let m = dir.path().join("m.tsv");
    std::fs::write(&m, format!("{}\t{}\t{}\n", s(&p), s(&g), s(&g))).unwrap();
    let o = cli(&[
        "eval",
        "--manifest",
        s(&m),
        "--protocol",
        "ceval",
        "--distance",
        "manhattan",
        "--box-blur",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["protocol"], "ceval");
    assert_eq!(v["images"][0]["id"], "p");
    for key in ["ods", "ois", "ap", "ac"] {
        let x = v[key].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&x), "{key} = {x}");
    }
}

fn read_raw_emap(path: &Path) -> (usize, usize, Vec<f32>) {
    let bytes = std::fs::read(path).unwrap();
    assert_eq!(&bytes[..4], b"EMAP");
    let w = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let h = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let values = bytes[12..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    (w, h, values)
}

#[test]
fn loss_reports_value_total_and_gradient() {
    let dir = tempfile::tempdir().unwrap();
    let pred = ConfidenceMap::new(2, 1, vec![0.9, 0.1]).unwrap();
    let gt = BinaryMap::from_pixels(2, 1, &[px(0, 0)]);
    let (p, g, grad) = (
        dir.path().join("p.emap"),
        dir.path().join("g.pgm"),
        dir.path().join("d.emap"),
    );
    io::write_map(&pred, &p, MapFormat::Emap).unwrap();
    io::write_map(&gt, &g, MapFormat::Pgm).unwrap();
    let o = cli(&[
        "loss",
        "--pred",
        s(&p),
        "--gt",
        s(&g),
        "--beta",
        "5",
        "--l-model",
        "1",
        "--grad-out",
        s(&grad),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    // The prediction went through f32, so use that value for the oracle.
    let e = 0.9f32 as f64;
    let lm = -(e.ln()) - (1.0 - 0.1f32 as f64).ln();
    assert!((v["l_matched"].as_f64().unwrap() - lm).abs() < 1e-12);
    assert!((v["total"].as_f64().unwrap() - (5.0 * lm + 1.0)).abs() < 1e-12);
    let (w, h, d) = read_raw_emap(&grad);
    assert_eq!((w, h), (2, 1));
    assert!((d[0] as f64 + 1.0 / e).abs() < 1e-6 && (d[1] as f64 - 1.0 / e).abs() < 1e-6);

    // Two annotations double the matched term.
    let o2 = cli(&["loss", "--pred", s(&p), "--gt", s(&g), "--gt", s(&g)]);
    let v2: serde_json::Value = serde_json::from_str(&stdout(&o2)).unwrap();
    assert!((v2["l_matched"].as_f64().unwrap() - 2.0 * lm).abs() < 1e-12);
}

#[test]
fn postprocess_writes_thin_binary_and_nms_maps() {
    let dir = tempfile::tempdir().unwrap();
    let mut band = ConfidenceMap::zeros(40, 20);
    for x in 8..32 {
        band.set(x, 9, 0.5);
        band.set(x, 10, 0.9);
        band.set(x, 11, 0.5);
    }
    let p = dir.path().join("band.emap");
    io::write_map(&band, &p, MapFormat::Emap).unwrap();
    let bin = dir.path().join("bin.pgm");
    let o = cli(&[
        "postprocess",
        "--pred",
        s(&p),
        "--threshold",
        "0.3",
        "--out",
        s(&bin),
    ]);
    assert!(o.status.success());
    let edges = io::read_binary_map(&bin).unwrap();
    // Away from the blunt ends only the crest row survives.
    let interior: Vec<_> = edges
        .ones()
        .into_iter()
        .filter(|q| (10..30).contains(&q.x))
        .collect();
    assert_eq!(interior.len(), 20);
    assert!(interior.iter().all(|q| q.y == 10));

    let suppressed = dir.path().join("nms.emap");
    let o = cli(&[
        "postprocess",
        "--pred",
        s(&p),
        "--nms-r",
        "2",
        "--nms-s",
        "0",
        "--nms-e",
        "1.0",
        "--out",
        s(&suppressed),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let m = io::read_map(&suppressed).unwrap();
    assert!(m.get(15, 9) == 0.0 && m.get(15, 11) == 0.0 && m.get(15, 10) > 0.0);
}

#[test]
fn bench_prints_table_and_json() {
    let args = [
        "bench", "--sizes", "4,16", "--trials", "3", "--images", "2", "--width", "40", "--height",
        "30",
    ];
    let o = cli(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let table = stdout(&o);
    assert!(table.starts_with("scenario"));
    assert!(table.contains("nms+thin x100") && table.contains("dense log-log slope"));

    let mut with_json = args.to_vec();
    with_json.extend(["--json", "--parallel", "--threads", "2"]);
    let o = cli(&with_json);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["pipeline"].as_array().unwrap().len(), 3);
    assert!(v["dense_scaling"]["slope"].as_f64().is_some());
    assert!(v["pipeline"][0]["repetitions"].as_u64().unwrap() >= 3);
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("scenario"));
}

#[test]
fn threads_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let (p, g) = worked_example(dir.path());
    let out = dir.path().join("o.pgm");
    let run = |threads: &str| {
        Command::new(env!("CARGO_BIN_EXE_crisp-match"))
            .args(["match", "--pred", s(&p), "--gt", s(&g), "--out", s(&out)])
            .env("CRISP_MATCH_THREADS", threads)
            .output()
            .unwrap()
    };
    assert!(run("2").status.success());
    assert_eq!(run("many").status.code(), Some(1));
}
