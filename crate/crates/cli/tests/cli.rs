use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use sha2::{Digest, Sha256};
use sounder_core::toolkit::capture::{CaptureKind, CaptureMetadata};
use sounder_core::toolkit::pipeline::{RX_CAPTURE, TX_CAPTURE};
use sounder_core::toolkit::tables::{read_column, validate_table};
use sounder_core::CaptureFile;

/// A reduced frame (1023-chip header, two 511-chip bodies). Its 51.1 ns
/// window keeps the 20 ns reflection in the causal half.
const SMALL: &str = r#"
[waveform]
header_degree = 10
body_degree = 9
repetitions = 2
"#;

fn sounder(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sounder"))
        .args(args)
        .output()
        .expect("spawn sounder")
}

fn ok(args: &[&str]) -> Output {
    let out = sounder(args);
    assert!(
        out.status.success(),
        "sounder {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn digests(dir: &Path) -> Vec<(String, String)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let hash = Sha256::digest(fs::read(&p).unwrap());
                let hex: String = hash.iter().map(|b| format!("{b:02x}")).collect();
                out.push((p.strip_prefix(dir).unwrap().to_string_lossy().into_owned(), hex));
            }
        }
    }
    out.sort();
    out
}

fn metadata(path: &Path) -> CaptureMetadata {
    CaptureFile::read(path).unwrap().metadata
}

#[test]
fn generate_records_frame_arithmetic() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("default");
    ok(&["--out", s(&out), "generate"]);
    let m = metadata(&out.join(TX_CAPTURE));
    assert_eq!(m.kind, CaptureKind::Transmit);
    assert_eq!(m.layout.total_chips, 73_711);
    assert_eq!(m.sample_rate_hz, 40e9);

    let cfg = write_config(dir.path(), "one.toml", "[waveform]\nrepetitions = 1\n");
    let out = dir.path().join("one");
    ok(&["--config", &cfg, "--out", s(&out), "generate"]);
    assert_eq!(metadata(&out.join(TX_CAPTURE)).layout.total_chips, 12_286);
}

#[test]
fn malformed_config_exits_with_2_and_a_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bad.toml", "seed = 3\n\n[waveform]\nrepetitons = 2\n");
    let out = sounder(&["--config", &cfg, "generate"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 4"), "{err}");
    assert!(err.contains("repetitons"), "{err}");

    let cfg = write_config(dir.path(), "range.toml", "frames = 0\n");
    assert_eq!(sounder(&["--config", &cfg, "generate"]).status.code(), Some(2));
    let cfg = write_config(dir.path(), "same.toml", "[waveform]\nheader_degree = 9\nbody_degree = 9\n");
    assert_eq!(sounder(&["--config", &cfg, "generate"]).status.code(), Some(2));
    let cfg = write_config(dir.path(), "path.toml", "[weather]\ncsv = \"missing.csv\"\n");
    assert_eq!(sounder(&["--config", &cfg, "generate"]).status.code(), Some(2));
    assert_eq!(sounder(&["--scenario", "fog", "generate"]).status.code(), Some(2));
    assert_eq!(sounder(&["--config", "/nonexistent.toml", "generate"]).status.code(), Some(2));
}

#[test]
fn runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "small.toml", SMALL);
    let weather = write_config(
        dir.path(),
        "w.csv",
        "timestamp_s,temperature_c,water_vapor_gm3,pressure_hpa,precipitation_rate_mm_h,precipitation_kind\n\
         0,-2.32,3.54,1020,0.45,snow\n60,7.23,7.09,1014,1.84,rain\n",
    );
    let run = |tag: &str| {
        let out = dir.path().join(tag);
        for cmd in ["generate", "simulate", "analyze"] {
            ok(&["--config", &cfg, "--seed", "7", "--frames", "3", "--scenario", "rain", "--out", s(&out), cmd]);
        }
        ok(&["--config", &cfg, "--out", s(&out), "weather", &weather]);
        ok(&["--config", &cfg, "--out", s(&out), "report", "capacity"]);
        ok(&["--config", &cfg, "--out", s(&out), "report", "frame"]);
        let metrics = out.join("metrics.csv");
        ok(&["--out", s(&out.join("fit")), "fit", s(&metrics), "--column", "k_factor_db", "--family", "normal"]);
        digests(&out)
    };
    let a = run("a");
    let b = run("b");
    assert!(a.len() > 10);
    assert_eq!(a, b);

    let c = dir.path().join("c");
    ok(&["--config", &cfg, "--seed", "8", "--frames", "3", "--scenario", "rain", "--out", s(&c), "simulate"]);
    let rx_a = digests(&dir.path().join("a")).into_iter().find(|(n, _)| n == RX_CAPTURE);
    let rx_c = digests(&c).into_iter().find(|(n, _)| n == RX_CAPTURE);
    assert_ne!(rx_a, rx_c);
}

#[test]
fn batch_of_120_frames_yields_rows_and_a_k_fit() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "small.toml", SMALL);
    let out = dir.path().join("batch");
    let args = ["--config", &cfg, "--frames", "120", "--scenario", "clear", "--out", s(&out)];
    ok(&[&args[..], &["simulate"]].concat());
    ok(&[&args[..], &["analyze"]].concat());

    let ids = read_column(&out.join("metrics.csv"), "frame_id").unwrap();
    assert_eq!(ids, (0..120).map(f64::from).collect::<Vec<_>>());
    let text = fs::read_to_string(out.join("metrics.csv")).unwrap();
    assert!(text.lines().skip(1).all(|l| l.starts_with("clear,")));

    let mut r = csv::Reader::from_path(out.join("fits.csv")).unwrap();
    let rows: Vec<csv::StringRecord> = r.records().map(|x| x.unwrap()).collect();
    let k_normal: Vec<_> = rows.iter().filter(|r| &r[1] == "k_factor_db" && &r[2] == "normal").collect();
    assert_eq!(k_normal.len(), 2);
    let mean: f64 = k_normal.iter().find(|r| &r[3] == "mean").unwrap()[4].parse().unwrap();
    assert!((mean - 35.2).abs() < 0.5, "{mean}");
    assert!(k_normal.iter().all(|r| &r[5] == "120"));

    // The reduced frame has ~16 dB less processing gain than the default,
    // so weak paths are resolved less precisely.
    let truth = read_column(&out.join("truth_metrics.csv"), "k_factor_db").unwrap();
    let got = read_column(&out.join("metrics.csv"), "k_factor_db").unwrap();
    let mean_err = truth.iter().zip(&got).map(|(t, g)| g - t).sum::<f64>() / 120.0;
    assert!(mean_err.abs() < 0.3, "{mean_err}");
    for (t, g) in truth.iter().zip(&got) {
        assert!((t - g).abs() < 2.0, "{t} vs {g}");
    }
}

#[test]
fn empty_capture_reports_no_frame_found() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "small.toml", SMALL);
    let out = dir.path().join("run");
    ok(&["--config", &cfg, "--frames", "1", "--out", s(&out), "simulate"]);
    let rx = out.join(RX_CAPTURE);
    let mut cap = CaptureFile::read(&rx).unwrap();

    let silent = dir.path().join("silent");
    fs::create_dir(&silent).unwrap();
    cap.samples.iter_mut().for_each(|x| *x = num_complex::Complex::new(0.0, 0.0));
    cap.write(&silent.join(RX_CAPTURE)).unwrap();
    let res = sounder(&["--config", &cfg, "--out", s(&silent), "analyze"]);
    assert_eq!(res.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&res.stderr).contains("no frame found"));

    let empty = dir.path().join("empty");
    fs::create_dir(&empty).unwrap();
    cap.samples.clear();
    cap.metadata.frames = 0;
    cap.write(&empty.join(RX_CAPTURE)).unwrap();
    let res = sounder(&["--config", &cfg, "--out", s(&empty), "analyze"]);
    assert_eq!(res.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&res.stderr).contains("no frame found"));
}

fn cluster_power_db(taps_csv: &Path) -> f64 {
    let delay = read_column(taps_csv, "delay_ns").unwrap();
    let power = read_column(taps_csv, "power_db").unwrap();
    let frame = read_column(taps_csv, "frame_id").unwrap();
    let frames = frame.iter().copied().fold(0.0, f64::max) + 1.0;
    let total: f64 = delay
        .iter()
        .zip(&power)
        .filter(|(d, _)| (19.0..22.0).contains(*d))
        .map(|(_, p)| 10f64.powf(p / 10.0))
        .sum();
    10.0 * (total / frames).log10()
}

#[test]
fn snow_weakens_the_20ns_cluster() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "small.toml", SMALL);
    let mut level = Vec::new();
    for sc in ["clear", "snow"] {
        let out = dir.path().join(sc);
        ok(&["--config", &cfg, "--frames", "20", "--scenario", sc, "--out", s(&out), "simulate"]);
        let taps = out.join("taps.csv");
        validate_table(&taps).unwrap();
        level.push(cluster_power_db(&taps));
    }
    assert!(level[1] < level[0] - 2.0, "clear {} dB, snow {} dB", level[0], level[1]);
}

#[test]
fn noiseless_single_tap_reproduces_the_transmit_frame() {
    let dir = tempfile::tempdir().unwrap();
    let base = format!(
        "{SMALL}\n[channel]\nsnr_db = inf\nhardware = false\ntaps = [{{ delay_ns = DELAY, power_db = POWER }}]\n"
    );
    let run = |tag: &str, delay: &str, power: &str| {
        let cfg = write_config(dir.path(), &format!("{tag}.toml"), &base.replace("DELAY", delay).replace("POWER", power));
        let out = dir.path().join(tag);
        ok(&["--config", &cfg, "--out", s(&out), "generate"]);
        ok(&["--config", &cfg, "--out", s(&out), "simulate"]);
        let tx = CaptureFile::read(&out.join(TX_CAPTURE)).unwrap();
        let rx = CaptureFile::read(&out.join(RX_CAPTURE)).unwrap();
        assert_eq!(rx.metadata.kind, CaptureKind::Receive);
        (tx.samples, rx.samples)
    };

    let (tx, rx) = run("identity", "0.0", "0.0");
    assert_eq!(&rx[..tx.len()], &tx[..]);
    assert!(rx[tx.len()..].iter().all(|x| x.norm() == 0.0));

    // One sample at 40 GS/s is 25 ps; −20·log10(2) dB halves the amplitude.
    let (tx, rx) = run("shifted", "0.025", "-6.020599913279624");
    let peak = tx.iter().map(|x| x.norm()).fold(0.0, f32::max);
    assert!(rx[0].norm() < 1e-6 * peak);
    for n in 0..tx.len() {
        let want = tx[n] * 0.5;
        assert!((rx[n + 1] - want).norm() < 1e-5 * peak, "sample {n}");
    }
}

#[test]
fn weather_ledger_terms() {
    let dir = tempfile::tempdir().unwrap();
    let mut rows = String::from(
        "timestamp_s,temperature_c,water_vapor_gm3,pressure_hpa,precipitation_rate_mm_h,precipitation_kind\n\
         0,12.23,5.15,1026,0,none\n",
    );
    for h in 1..=5 {
        let rate = if h == 3 { 1.8 } else { 0.45 };
        rows.push_str(&format!("{},-2.32,3.54,1020,{rate},snow\n", h * 3600));
    }
    let csv_path = write_config(dir.path(), "series.csv", &rows);
    let out = dir.path().join("w");
    ok(&["--out", s(&out), "weather", &csv_path]);
    let ledger = out.join("ledger.csv");
    assert_eq!(validate_table(&ledger).unwrap(), 6);
    let fspl = read_column(&ledger, "fspl_db").unwrap();
    assert!((fspl[0] + 112.27).abs() < 0.01, "{}", fspl[0]);
    let sc = read_column(&ledger, "scattering_db").unwrap();
    assert_eq!(sc[0], 0.0);
    let pr = read_column(&ledger, "received_power_dbm").unwrap();
    assert!(pr[2] - pr[3] > 2.0, "{pr:?}");
    assert_eq!(pr[2], pr[4]);

    // The path can also come from the configuration, relative to it.
    let cfg = write_config(dir.path(), "w.toml", "[weather]\ncsv = \"series.csv\"\n");
    let out2 = dir.path().join("w2");
    ok(&["--config", &cfg, "--out", s(&out2), "weather"]);
    assert_eq!(fs::read(&ledger).unwrap(), fs::read(out2.join("ledger.csv")).unwrap());

    let bad = write_config(dir.path(), "bad.csv", "timestamp_s,temperature_c\n0,1\n");
    assert_eq!(sounder(&["--out", s(&out), "weather", &bad]).status.code(), Some(1));
}

#[test]
fn capacity_report_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r");
    let res = ok(&["--out", s(&out), "report", "capacity"]);
    let stdout = String::from_utf8(res.stdout).unwrap();
    assert!(stdout.starts_with("scenario,noise,snr_db,spectral_efficiency,capacity_gbps"));
    let cap = read_column(&out.join("capacity.csv"), "capacity_gbps").unwrap();
    assert_eq!(cap.len(), 6);
    assert!((cap[0] - 340.83).abs() < 0.01);

    // A received power of thermal floor + 10 dB gives 10 dB thermal SNR.
    let cfg = write_config(dir.path(), "pr.toml", "[capacity.received_power_dbm]\nclear = -60.0\n");
    let out = dir.path().join("pr");
    ok(&["--config", &cfg, "--out", s(&out), "report", "capacity"]);
    let snr = read_column(&out.join("capacity.csv"), "snr_db").unwrap();
    let thermal_floor = 10.0 * (1.380649e-23_f64 * 290.0 * 20e9 / 1e-3).log10();
    assert!((snr[0] - (-60.0 - thermal_floor)).abs() < 1e-9, "{}", snr[0]);
    assert!(snr[1] < snr[0]);
    assert!((snr[2] - 49.99).abs() < 1e-12);
}

#[test]
fn fit_accepts_plain_lists() {
    let dir = tempfile::tempdir().unwrap();
    let values: Vec<String> = (0..200).map(|i| format!("{}", 30.0 + (i as f64 * 0.618).fract())).collect();
    let list = write_config(dir.path(), "list.txt", &format!("# samples\n{}\n", values.join("\n")));
    let out = dir.path().join("f");
    let res = ok(&["--out", s(&out), "fit", &list, "--family", "normal"]);
    assert!(String::from_utf8_lossy(&res.stdout).starts_with("normal n=200"));
    let mean = read_column(&out.join("fits.csv"), "value").unwrap()[0];
    assert!((mean - 30.5).abs() < 0.01);
    let bad = write_config(dir.path(), "bad.txt", "1\nx\n");
    assert_eq!(sounder(&["--out", s(&out), "fit", &bad]).status.code(), Some(1));
    assert_eq!(sounder(&["--out", s(&out), "fit", &list, "--family", "gamma"]).status.code(), Some(2));
}

#[test]
fn every_emitted_table_validates() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "small.toml", SMALL);
    let out = dir.path().join("all");
    for cmd in ["simulate", "analyze"] {
        ok(&["--config", &cfg, "--frames", "12", "--scenario", "snow", "--out", s(&out), cmd]);
    }
    ok(&["--out", s(&out), "report", "frame"]);
    let mut checked = 0;
    for e in fs::read_dir(&out).unwrap() {
        let p = e.unwrap().path();
        if p.extension().is_some_and(|x| x == "csv") {
            validate_table(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
            checked += 1;
        }
    }
    assert!(checked >= 9, "{checked}");
    let json: serde_json::Value = serde_json::from_slice(&fs::read(out.join("fits.json")).unwrap()).unwrap();
    assert_eq!(json[0]["family"], "normal");
    assert_eq!(json[0]["scenario"], "snow");
}
