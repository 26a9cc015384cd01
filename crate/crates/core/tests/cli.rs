//! End-to-end tests of the `ppgan` binary: bitwise reproducibility of
//! training runs, gap-free checkpoint resume, the corpus -> label model
//! -> train -> score pipeline, the synthesizers, the accountant query
//! surface, and the exit-code contract.

use std::ffi::OsStr;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn ppgan<S: AsRef<OsStr>>(args: impl IntoIterator<Item = S>) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ppgan"))
        .args(args)
        .output()
        .expect("spawn ppgan")
}

/// Run the binary, assert exit code 0, and return (stdout, stderr).
fn expect_success<S: AsRef<OsStr>>(args: impl IntoIterator<Item = S>) -> (String, String) {
    let out = ppgan(args);
    let stdout = String::from_utf8(out.stdout).unwrap();
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert_eq!(
        out.status.code(),
        Some(0),
        "expected success\nstdout:\n{stdout}\nstderr:\n{stderr}"
    );
    (stdout, stderr)
}

/// Run the binary and assert it exits with `code`, returning stderr.
fn expect_code<S: AsRef<OsStr>>(args: impl IntoIterator<Item = S>, code: i32) -> String {
    let out = ppgan(args);
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert_eq!(
        out.status.code(),
        Some(code),
        "expected exit code {code}\nstdout:\n{}\nstderr:\n{stderr}",
        String::from_utf8_lossy(&out.stdout)
    );
    stderr
}

fn path_str(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Extract the f64 following `prefix` on its own stdout line.
fn parsed_value(stdout: &str, prefix: &str) -> f64 {
    stdout
        .lines()
        .find_map(|line| line.strip_prefix(prefix))
        .unwrap_or_else(|| panic!("no line starts with {prefix:?} in:\n{stdout}"))
        .trim()
        .parse()
        .unwrap_or_else(|err| panic!("unparsable value after {prefix:?}: {err}"))
}

fn synth_corpus(dir: &Path, count: usize, seed: u64) {
    expect_success([
        "synth-digits",
        "--out-dir",
        path_str(dir),
        "--count",
        &count.to_string(),
        "--seed",
        &seed.to_string(),
    ]);
}

/// A small private run over a 120-image corpus: q = 0.1 per critic
/// step, sigma 2, generous ceiling so nothing halts.
fn private_config(seed: u64, gen_iters: u64, checkpoint_interval: u64) -> String {
    format!(
        "seed = {seed}\n\
         alpha_d = 0.05\n\
         alpha_g = 0.05\n\
         weight_clip = 0.05\n\
         grad_clip = 1\n\
         batch = 12\n\
         critic_iters = 2\n\
         gen_iters = {gen_iters}\n\
         sigma_n = 2\n\
         latent_dim = 4\n\
         delta = 0.00001\n\
         epsilon_target = 8\n\
         gen_hidden = 8\n\
         critic_hidden = 8\n\
         downsample = 8\n\
         checkpoint_interval = {checkpoint_interval}\n"
    )
}

fn train_args<'a>(config: &'a Path, data: &'a Path, out: &'a Path) -> Vec<&'a str> {
    vec![
        "train",
        "--config",
        path_str(config),
        "--data-dir",
        path_str(data),
        "--out-dir",
        path_str(out),
    ]
}

// ---------------------------------------------------------------------------
// training runs
// ---------------------------------------------------------------------------

#[test]
fn train_runs_are_bit_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    synth_corpus(&data, 120, 5);
    let config = dir.path().join("run.cfg");
    fs::write(&config, private_config(3, 20, 0)).unwrap();

    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    let (_, stderr) = expect_success(train_args(&config, &data, &out_a));
    assert!(
        stderr.contains("sampling ratio"),
        "q = 0.1 should draw the coarse-calibration warning, got:\n{stderr}"
    );
    expect_success(train_args(&config, &data, &out_b));

    for name in ["metrics.csv", "checkpoint-000020.bin", "summary.txt"] {
        let a = fs::read(out_a.join(name)).unwrap();
        let b = fs::read(out_b.join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between identical runs");
    }
    let summary = fs::read_to_string(out_a.join("summary.txt")).unwrap();
    assert!(summary.contains("halted = no"), "{summary}");
    assert!(summary.contains("final_epsilon = "), "{summary}");
}

#[test]
fn resume_continues_without_gaps_and_reproduces_the_full_run() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    synth_corpus(&data, 120, 5);
    let config = dir.path().join("run.cfg");
    fs::write(&config, private_config(4, 30, 10)).unwrap();

    let out_full = dir.path().join("full");
    expect_success(train_args(&config, &data, &out_full));
    let metrics_full = fs::read_to_string(out_full.join("metrics.csv")).unwrap();
    let final_full = fs::read(out_full.join("checkpoint-000030.bin")).unwrap();
    let mid = out_full.join("checkpoint-000010.bin");
    assert!(mid.exists(), "periodic checkpoint missing");

    // Resuming into a fresh directory continues from iteration 11 and
    // lands on the same final parameters, bit for bit.
    let out_resumed = dir.path().join("resumed");
    let mut args = train_args(&config, &data, &out_resumed);
    args.extend(["--resume", path_str(&mid)]);
    expect_success(args);
    assert_eq!(
        fs::read(out_resumed.join("checkpoint-000030.bin")).unwrap(),
        final_full,
        "resumed final checkpoint differs from the uninterrupted run"
    );
    let full_lines: Vec<&str> = metrics_full.lines().collect();
    let resumed_text = fs::read_to_string(out_resumed.join("metrics.csv")).unwrap();
    let resumed_lines: Vec<&str> = resumed_text.lines().collect();
    assert_eq!(resumed_lines[0], full_lines[0], "metrics header differs");
    assert_eq!(
        &resumed_lines[1..],
        &full_lines[11..31],
        "resumed metrics rows differ from the matching tail of the full run"
    );

    // Resuming in place rewrites rows past the checkpoint and ends with
    // a metrics file identical to the uninterrupted one: no gap, no
    // duplicate rows.
    let mut args = train_args(&config, &data, &out_full);
    args.extend(["--resume", path_str(&mid)]);
    expect_success(args);
    assert_eq!(
        fs::read_to_string(out_full.join("metrics.csv")).unwrap(),
        metrics_full,
        "in-place resume changed the metrics file"
    );
    assert_eq!(
        fs::read(out_full.join("checkpoint-000030.bin")).unwrap(),
        final_full
    );

    // An edited config no longer matches the hash the checkpoint
    // embeds, and so does a seed override; both refuse to resume.
    let tampered = dir.path().join("tampered.cfg");
    fs::write(&tampered, private_config(4, 30, 10).replace("alpha_d = 0.05", "alpha_d = 0.06"))
        .unwrap();
    let out_t1 = dir.path().join("t1");
    let mut args = train_args(&tampered, &data, &out_t1);
    args.extend(["--resume", path_str(&mid)]);
    let stderr = expect_code(args, 5);
    assert!(stderr.contains("refusing to resume"), "{stderr}");

    let out_t2 = dir.path().join("t2");
    let mut args = train_args(&config, &data, &out_t2);
    args.extend(["--resume", path_str(&mid), "--seed", "99"]);
    expect_code(args, 5);
}

// ---------------------------------------------------------------------------
// corpus -> label model -> train -> score
// ---------------------------------------------------------------------------

#[test]
fn pipeline_from_corpus_to_scores_keeps_one_csv_header() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    synth_corpus(&data, 600, 7);

    let label_model = dir.path().join("label-model.bin");
    expect_success([
        "train-label-model",
        "--data-dir",
        path_str(&data),
        "--out",
        path_str(&label_model),
        "--epochs",
        "30",
        "--downsample",
        "8",
        "--seed",
        "0",
    ]);

    // A short non-private run; omitting sigma_n resolves it to 0 at an
    // infinite target.
    let config = dir.path().join("run.cfg");
    fs::write(
        &config,
        "seed = 9\n\
         alpha_d = 0.05\n\
         alpha_g = 0.05\n\
         weight_clip = 0.05\n\
         grad_clip = 1\n\
         batch = 32\n\
         critic_iters = 2\n\
         gen_iters = 15\n\
         latent_dim = 4\n\
         delta = 0.00001\n\
         epsilon_target = inf\n\
         gen_hidden = 8\n\
         critic_hidden = 8\n\
         downsample = 8\n\
         checkpoint_interval = 0\n",
    )
    .unwrap();
    let out = dir.path().join("run");
    expect_success(train_args(&config, &data, &out));
    let summary = fs::read_to_string(out.join("summary.txt")).unwrap();
    assert!(summary.contains("final_epsilon = non-private"), "{summary}");

    let checkpoint = out.join("checkpoint-000015.bin");
    for seed in ["0", "1"] {
        let (stdout, _) = expect_success([
            "score",
            "--checkpoint",
            path_str(&checkpoint),
            "--label-model",
            path_str(&label_model),
            "--out-dir",
            path_str(&out),
            "--samples",
            "200",
            "--splits",
            "5",
            "--seed",
            seed,
        ]);
        let is_mean = parsed_value(&stdout, "is_mean = ");
        assert!(is_mean >= 1.0, "inception score below its floor: {is_mean}");
        let gs = parsed_value(&stdout, "gs = ");
        assert!((0.0..=1.0).contains(&gs), "generate score out of range: {gs}");
    }

    let scores = fs::read_to_string(out.join("scores.csv")).unwrap();
    let lines: Vec<&str> = scores.lines().collect();
    assert_eq!(lines.len(), 3, "two appends should leave one header + two rows:\n{scores}");
    assert_eq!(lines[0], "eps,seed,is_mean,is_std,gs");
    assert!(lines[1].starts_with("inf,0,"), "{scores}");
    assert!(lines[2].starts_with("inf,1,"), "{scores}");
}

// ---------------------------------------------------------------------------
// synthesizers and the accountant query surface
// ---------------------------------------------------------------------------

#[test]
fn synth_ehr_is_seed_deterministic_under_a_full_code_header() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let c = dir.path().join("c.csv");
    for (path, seed) in [(&a, "9"), (&b, "9"), (&c, "10")] {
        let (stdout, _) = expect_success([
            "synth-ehr",
            "--count",
            "25",
            "--out",
            path_str(path),
            "--seed",
            seed,
        ]);
        assert!(stdout.contains("wrote 25 records"), "{stdout}");
    }
    let text_a = fs::read(&a).unwrap();
    assert_eq!(text_a, fs::read(&b).unwrap(), "same seed produced different records");
    assert_ne!(text_a, fs::read(&c).unwrap(), "different seeds produced identical records");

    let text = String::from_utf8(text_a).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 26, "expected a header plus 25 rows");
    let header: Vec<&str> = lines[0].split(',').collect();
    assert_eq!(header.len(), 1071);
    assert_eq!(header[0], "1");
    assert_eq!(header[1070], "1071");
    for row in &lines[1..] {
        for cell in row.split(',') {
            let value: f64 = cell.parse().unwrap();
            assert!(value == 0.0 || value == 1.0, "non-binary cell {value}");
        }
    }
}

#[test]
fn accountant_reports_the_three_comparable_epsilons() {
    let (stdout, _) = expect_success([
        "accountant",
        "--query",
        "eps-for-delta",
        "--q",
        "0.01",
        "--sigma",
        "4",
        "--steps",
        "100",
        "--delta",
        "0.00001",
    ]);
    let accountant = parsed_value(&stdout, "accountant epsilon = ");
    let closed = parsed_value(&stdout, "closed-form epsilon = ");
    let strong = parsed_value(&stdout, "strong-composition epsilon = ");
    for eps in [accountant, closed, strong] {
        assert!(eps.is_finite() && eps > 0.0, "bad epsilon {eps}");
    }
    assert!(
        accountant < strong,
        "accountant {accountant} should beat strong composition {strong}"
    );

    let (stdout, _) = expect_success([
        "accountant",
        "--query",
        "delta-for-eps",
        "--q",
        "0.01",
        "--sigma",
        "4",
        "--steps",
        "100",
        "--epsilon",
        "1",
    ]);
    let delta = parsed_value(&stdout, "accountant delta = ");
    assert!((0.0..=1.0).contains(&delta), "delta {delta} out of range");
}

// ---------------------------------------------------------------------------
// exit codes
// ---------------------------------------------------------------------------

#[test]
fn failures_map_to_the_documented_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    synth_corpus(&data, 64, 1);

    // 2: the argument parser rejects unknown flags and subcommands.
    expect_code(["train", "--nonsense"], 2);
    expect_code(["no-such-command"], 2);

    // 4: invalid configuration or parameters.
    let bad_key = dir.path().join("bad-key.cfg");
    fs::write(&bad_key, private_config(1, 5, 0) + "mystery = 1\n").unwrap();
    let stderr = expect_code(train_args(&bad_key, &data, &dir.path().join("o1")), 4);
    assert!(stderr.starts_with("error:"), "{stderr}");
    assert!(stderr.contains("mystery"), "{stderr}");

    let no_noise = dir.path().join("no-noise.cfg");
    fs::write(&no_noise, private_config(1, 5, 0).replace("sigma_n = 2", "sigma_n = 0")).unwrap();
    expect_code(train_args(&no_noise, &data, &dir.path().join("o2")), 4);

    expect_code(
        [
            "calibrate",
            "--epsilon=-1",
            "--delta",
            "0.00001",
            "--q",
            "0.01",
            "--n-d",
            "5",
        ],
        4,
    );
    expect_code(
        [
            "accountant",
            "--query",
            "eps-for-delta",
            "--q",
            "0.01",
            "--sigma",
            "4",
            "--steps",
            "10",
        ],
        4,
    );

    // 5: missing or malformed inputs.
    let missing = dir.path().join("missing.cfg");
    expect_code(train_args(&missing, &data, &dir.path().join("o3")), 5);
    expect_code(
        [
            "score",
            "--checkpoint",
            path_str(&dir.path().join("missing.bin")),
            "--label-model",
            path_str(&dir.path().join("missing-too.bin")),
            "--out-dir",
            path_str(&dir.path().join("o4")),
        ],
        5,
    );
}
