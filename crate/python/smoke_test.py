#!/usr/bin/env python3
"""Smoke test for the ppgan_py extension module.

Builds nothing itself: run `cargo build -p ppgan-py` (and, for the
checkpoint round-trip at the end, `cargo build -p ppgan-core`) first.
The script copies the cdylib into a temp directory under the import
name `ppgan_py.so`, imports it, and exercises every binding, then
drives the `ppgan` binary to produce a real checkpoint and label model
and scores them through Python.
"""

import math
import shutil
import subprocess
import sys
import tempfile
from pathlib import Path

REPO = Path(__file__).resolve().parents[1]
LIB = REPO / "target" / "debug" / "libppgan_py.so"
BIN = REPO / "target" / "debug" / "ppgan"


def import_extension(tmp: Path):
    if not LIB.exists():
        sys.exit(f"{LIB} not found; run `cargo build -p ppgan-py` first")
    shutil.copy(LIB, tmp / "ppgan_py.so")
    sys.path.insert(0, str(tmp))
    import ppgan_py

    return ppgan_py


def check_rng(pp):
    a = pp.RngStream(7, pp.STREAM_TRAIN)
    b = pp.RngStream(7, pp.STREAM_TRAIN)
    assert [a.next_u64() for _ in range(5)] == [b.next_u64() for _ in range(5)]
    assert a.counter == b.counter == 5
    assert a.seed == 7 and a.stream_id == pp.STREAM_TRAIN

    child = pp.RngStream(7, pp.STREAM_TRAIN).child(3)
    fresh = pp.RngStream(7, pp.STREAM_TRAIN)
    assert child.next_u64() != fresh.next_u64(), "child stream repeats its parent"

    u = pp.RngStream(1, pp.STREAM_EVAL)
    draws = [u.next_uniform() for _ in range(100)]
    assert all(0.0 <= d < 1.0 for d in draws)
    assert len(set(draws)) == 100
    r = pp.RngStream(1, pp.STREAM_EVAL)
    assert all(2.0 <= r.next_range(2.0, 3.0) < 3.0 for _ in range(20))
    assert all(0 <= r.next_index(6) < 6 for _ in range(20))
    print("rng streams: deterministic, children independent")


def check_dp(pp):
    clipped = pp.clip_l2([3.0, 4.0], 1.0)
    norm = math.hypot(*clipped)
    assert abs(norm - 1.0) < 1e-12, norm
    assert pp.clip_l2([0.3, 0.4], 1.0) == [0.3, 0.4]

    stream = pp.RngStream(5, pp.STREAM_TRAIN)
    assert pp.add_gaussian_noise([1.0, 2.0], 0.0, 1.0, stream) == [1.0, 2.0]
    assert stream.counter == 0, "zero noise must not consume draws"
    noisy = pp.add_gaussian_noise([1.0, 2.0], 2.0, 1.0, stream)
    assert noisy != [1.0, 2.0] and all(math.isfinite(v) for v in noisy)

    sigma = pp.calibrate_sigma_eq17(10.0, 1e-5, 0.01, 5)
    assert abs(sigma - 0.015174271293851464) < 1e-12, sigma
    assert pp.calibrate_sigma_lemma1(0.5, 1e-5, 1.0) > 0.0
    try:
        pp.calibrate_sigma_eq17(-1.0, 1e-5, 0.01, 5)
    except ValueError:
        pass
    else:
        raise AssertionError("negative epsilon must raise ValueError")
    print(f"dp primitives: clip, noise, calibrations (sigma_n = {sigma})")


def check_accountant(pp):
    # Full sampling has the analytic log moment lam * (lam + 1) / (2 sigma^2).
    lm = pp.log_moment_subsampled_gaussian(1.0, 2.0, 4.0)
    assert abs(lm - 2.5) < 1e-9, lm
    assert pp.log_moment_discrete([0.5, 0.5], [0.4, 0.6], 2.0) > 0.0
    assert math.isinf(pp.log_moment_discrete([1.0, 0.0], [0.0, 1.0], 2.0))

    ledger = pp.MomentLedger()
    ledger.accumulate(0.01, 4.0, 10_000)
    eps = ledger.eps_for_delta(1e-5)
    assert abs(eps - 1.2585747412982335) < 1e-9, eps
    assert ledger.delta_for_eps(eps) <= 1e-5 + 1e-12
    print(f"accountant: 10^4 steps at q=0.01, sigma=4 spend eps = {eps:.4f}")


def check_data(pp):
    vec = pp.encode_admission([9, 42, 146])
    assert len(vec) == pp.CODE_SPACE == 1071
    assert sum(vec) == 3.0
    assert vec[8] == vec[41] == vec[145] == 1.0, "codes are 1-indexed"

    rows = pp.synth_ehr_demo(5, 3)
    again = pp.synth_ehr_demo(5, 3)
    assert rows == again, "EHR sampling must be seed-deterministic"
    assert len(rows) == 5 and all(len(r) == 1071 for r in rows)
    assert all(v in (0.0, 1.0) for r in rows for v in r)
    print("data: admission encoding 1-indexed, EHR demo sampler deterministic")


def check_checkpoint_pipeline(pp, tmp: Path):
    if not BIN.exists():
        sys.exit(f"{BIN} not found; run `cargo build -p ppgan-core` first")

    def run(*args):
        subprocess.run([str(BIN), *args], check=True, capture_output=True)

    data = tmp / "data"
    run("synth-digits", "--out-dir", str(data), "--count", "600", "--seed", "7")
    label_model = tmp / "label-model.bin"
    run(
        "train-label-model",
        "--data-dir", str(data),
        "--out", str(label_model),
        "--epochs", "30",
        "--downsample", "8",
    )
    config = tmp / "run.cfg"
    config.write_text(
        "seed = 9\n"
        "alpha_d = 0.05\n"
        "alpha_g = 0.05\n"
        "weight_clip = 0.05\n"
        "grad_clip = 1\n"
        "batch = 32\n"
        "critic_iters = 2\n"
        "gen_iters = 15\n"
        "latent_dim = 4\n"
        "delta = 0.00001\n"
        "epsilon_target = inf\n"
        "gen_hidden = 8\n"
        "critic_hidden = 8\n"
        "downsample = 8\n"
        "checkpoint_interval = 0\n"
    )
    out = tmp / "run"
    run("train", "--config", str(config), "--data-dir", str(data), "--out-dir", str(out))
    checkpoint = out / "checkpoint-000015.bin"

    images = pp.sample_generator(str(checkpoint), 12, 0)
    assert len(images) == 12 and all(len(row) == 64 for row in images)
    assert all(-1.0 <= v <= 1.0 for row in images for v in row)
    repeat = pp.sample_generator(str(checkpoint), 12, 0)
    assert images == repeat, "generator sampling must be seed-deterministic"

    report = pp.score_checkpoint(
        str(checkpoint), str(label_model), samples=200, splits=5, seed=0
    )
    assert set(report) == {"is_values", "is_mean", "is_std", "gs"}
    assert len(report["is_values"]) == 5
    assert report["is_mean"] >= 1.0
    assert 0.0 <= report["gs"] <= 1.0
    print(
        "checkpoint pipeline: sampled and scored a trained generator "
        f"(is_mean = {report['is_mean']:.3f}, gs = {report['gs']:.3f})"
    )


def main():
    with tempfile.TemporaryDirectory() as tmpdir:
        tmp = Path(tmpdir)
        pp = import_extension(tmp)
        check_rng(pp)
        check_dp(pp)
        check_accountant(pp)
        check_data(pp)
        check_checkpoint_pipeline(pp, tmp)
    print("smoke test: all checks passed")


if __name__ == "__main__":
    main()
