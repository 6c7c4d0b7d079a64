"""Command-line surface: subcommands, exit codes, byte determinism."""

import json

import numpy as np
import pytest

from tokensieve import read_bundle
from tokensieve.cli import main


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture
def fixture_bundle(tmp_path):
    path = tmp_path / "fixture.tkb"
    assert run("synth", "--seed", 5, "--n", 576, "--out", path) == 0
    return path


class TestSynth:
    def test_writes_readable_bundle(self, tmp_path):
        out = tmp_path / "s.tkb"
        assert run("synth", "--seed", 1, "--n", 64, "--d", 8, "--dt", 4,
                   "--salient-visual", 4, "--salient-text", 4, "--out", out) == 0
        bundle = read_bundle(out)
        assert bundle.n_tokens == 64 and bundle.dim == 8

    def test_same_seed_same_bytes(self, tmp_path):
        a, b = tmp_path / "a.tkb", tmp_path / "b.tkb"
        run("synth", "--seed", 9, "--n", 100, "--salient-visual", 5,
            "--salient-text", 5, "--out", a)
        run("synth", "--seed", 9, "--n", 100, "--salient-visual", 5,
            "--salient-text", 5, "--out", b)
        assert a.read_bytes() == b.read_bytes()


class TestCompress:
    def test_basic_run(self, tmp_path, fixture_bundle):
        out = tmp_path / "out.tkb"
        report = tmp_path / "report.txt"
        assert run("compress", "--in", fixture_bundle, "--k-lof", 20,
                   "--out", out, "--report", report) == 0
        text = report.read_text()
        assert "n_input = 576" in text
        ratio = float(
            [l for l in text.splitlines() if l.startswith("retention_ratio")][0]
            .split("=")[1]
        )
        assert 0.0 < ratio <= 1.0
        compressed = read_bundle(out)
        assert compressed.n_tokens < 576

    def test_deterministic_outputs_across_threads(self, tmp_path, fixture_bundle):
        blobs = {}
        for threads in (1, 2, 4):
            files = {}
            for run_id in ("x", "y"):
                out = tmp_path / ("out_%s_%d.tkb" % (run_id, threads))
                report = tmp_path / ("rep_%s_%d.txt" % (run_id, threads))
                viz = tmp_path / ("viz_%s_%d" % (run_id, threads))
                assert run("compress", "--in", fixture_bundle, "--out", out,
                           "--report", report, "--viz", viz,
                           "--no-timing", "--threads", threads) == 0
                files[run_id] = (
                    out.read_bytes(),
                    report.read_bytes(),
                    (tmp_path / ("viz_%s_%d_visual.pgm" % (run_id, threads))).read_bytes(),
                    (tmp_path / ("viz_%s_%d_text.pgm" % (run_id, threads))).read_bytes(),
                    (tmp_path / ("viz_%s_%d_mask.pgm" % (run_id, threads))).read_bytes(),
                )
            assert files["x"] == files["y"], "repeat runs must match"
            blobs[threads] = files["x"]
        assert blobs[1] == blobs[2] == blobs[4], "thread count must not matter"

    def test_thread_count_excluded_from_report(self, tmp_path, fixture_bundle):
        reports = []
        for threads in (1, 4):
            report = tmp_path / ("tr%d.txt" % threads)
            run("compress", "--in", fixture_bundle, "--out", tmp_path / "o.tkb",
                "--report", report, "--no-timing", "--threads", threads)
            reports.append(report.read_bytes())
        assert reports[0] == reports[1]

    def test_model_config_populates_flops(self, tmp_path, fixture_bundle):
        cfg = tmp_path / "model.json"
        cfg.write_text(json.dumps(
            {"layers": 32, "hidden": 4096, "ffn": 11008, "text_len": 60}
        ))
        report = tmp_path / "rep.txt"
        assert run("compress", "--in", fixture_bundle, "--out", tmp_path / "o.tkb",
                   "--report", report, "--model-config", cfg) == 0
        text = report.read_text()
        before = float([l for l in text.splitlines() if l.startswith("flops_before")][0].split("=")[1])
        after = float([l for l in text.splitlines() if l.startswith("flops_after")][0].split("=")[1])
        assert abs(before - 8.5e12) / 8.5e12 < 0.05
        assert after < before

    def test_malformed_input_exits_3(self, tmp_path):
        bad = tmp_path / "bad.tkb"
        bad.write_bytes(b"XXXXjunk")
        assert run("compress", "--in", bad, "--out", tmp_path / "o.tkb",
                   "--report", tmp_path / "r.txt") == 3

    def test_missing_file_exits_3(self, tmp_path):
        assert run("compress", "--in", tmp_path / "absent.tkb",
                   "--out", tmp_path / "o.tkb", "--report", tmp_path / "r.txt") == 3

    def test_unknown_flag_exits_2(self, tmp_path, fixture_bundle):
        with pytest.raises(SystemExit) as exc:
            run("compress", "--in", fixture_bundle, "--out", tmp_path / "o.tkb",
                "--report", tmp_path / "r.txt", "--bogus")
        assert exc.value.code == 2


class TestScore:
    def test_visual_csv(self, tmp_path, fixture_bundle):
        csv = tmp_path / "scores.csv"
        assert run("score", "--in", fixture_bundle, "--mode", "visual",
                   "--out-csv", csv) == 0
        lines = csv.read_text().splitlines()
        assert lines[0] == "index,raw,normalized"
        assert len(lines) == 577
        raw = np.array([float(l.split(",")[1]) for l in lines[1:]])
        assert raw.sum() == pytest.approx(1.0, abs=1e-6)

    def test_text_mode_without_text_exits_3(self, tmp_path):
        path = tmp_path / "vt.tkb"
        run("synth", "--seed", 2, "--n", 64, "--salient-text", 0, "--out", path)
        assert run("score", "--in", path, "--mode", "text",
                   "--out-csv", tmp_path / "x.csv") == 3


class TestCost:
    def test_published_flops(self, capsys):
        assert run("cost", "--layers", 32, "--dmodel", 4096, "--dff", 11008,
                   "--n-visual", 576, "--n-text", 60) == 0
        out = capsys.readouterr().out
        flops = float([l for l in out.splitlines() if l.startswith("prefill_flops")][0].split("=")[1])
        assert abs(flops - 8.5e12) / 8.5e12 < 0.05


class TestOracleCheck:
    def test_passes(self, capsys):
        assert run("oracle-check", "--seed", 3, "--cases", 8) == 0
        out = capsys.readouterr().out
        assert "lof oracle: 8/8 passed" in out
        assert "assign oracle: 8/8 passed" in out
