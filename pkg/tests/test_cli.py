import json
import subprocess
import sys

import numpy as np
import pytest

import lapsparse as lp
import lapsparse.cli as cli
from lapsparse.cli import main, manifest_to_argv


K3_EDGES = "0 1\n1 2\n0 2\n"


@pytest.fixture
def workdir(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    (tmp_path / "g.tsv").write_text(K3_EDGES, encoding="utf-8")
    return tmp_path


def run_ok(argv, capsys):
    code = main(argv)
    captured = capsys.readouterr()
    assert code == 0, captured.err
    return captured


# ---------------------------------------------------------------------------
# top-level behavior
# ---------------------------------------------------------------------------


def test_no_command_prints_usage(capsys):
    assert main([]) == 1
    assert "usage" in capsys.readouterr().err


def test_module_entry_point_version():
    out = subprocess.run(
        [sys.executable, "-m", "lapsparse", "--version"], capture_output=True, text=True
    )
    assert out.returncode == 0
    assert out.stdout.strip() == lp.__version__


def test_missing_input_file_is_io_error(workdir, capsys):
    code = main(["sparsify", "--input", "nope.tsv", "--coeffs", "0,1",
                 "--samples", "10", "--seed", "1", "--output", "op.tsv"])
    assert code == 2
    assert "error" in capsys.readouterr().err


def test_malformed_edge_file_is_data_error(workdir, capsys):
    (workdir / "bad.tsv").write_text("0 1 0.25\n", encoding="utf-8")
    code = main(["sparsify", "--input", "bad.tsv", "--coeffs", "0,1",
                 "--samples", "10", "--seed", "1", "--output", "op.tsv"])
    assert code == 2
    assert "weighted edge lists are not supported" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# sparsify
# ---------------------------------------------------------------------------


def sparsify_argv(**over):
    args = {
        "--input": "g.tsv",
        "--coeffs": "0,1",
        "--samples": "200",
        "--seed": "7",
        "--workers": "1",
        "--output": "op.tsv",
    }
    args.update(over)
    argv = ["sparsify"]
    for k, v in args.items():
        if v is not None:
            argv.extend([k, v])
    return argv


def test_sparsify_writes_expected_files(workdir, capsys):
    captured = run_ok(sparsify_argv(), capsys)
    assert "seed: 7" in captured.out
    assert "nnz:" in captured.out
    for name in ("op.tsv", "op.tsv.meta.json", "op.tsv.idmap.tsv", "op.tsv.manifest.json"):
        assert (workdir / name).exists(), name
    rows = [ln.split("\t") for ln in (workdir / "op.tsv").read_text().splitlines()]
    assert all(len(r) == 3 for r in rows)
    meta = json.loads((workdir / "op.tsv.meta.json").read_text())
    assert meta["meta"]["seed"] == 7
    assert meta["meta"]["mode"] == "static"


def test_sparsify_deterministic_bytes(tmp_path, monkeypatch, capsys):
    blobs = []
    for sub in ("a", "b"):
        d = tmp_path / sub
        d.mkdir()
        (d / "g.tsv").write_text(K3_EDGES, encoding="utf-8")
        monkeypatch.chdir(d)
        run_ok(sparsify_argv(), capsys)
        blobs.append(((d / "op.tsv").read_bytes(), (d / "op.tsv.meta.json").read_bytes()))
    assert blobs[0] == blobs[1]


def test_sparsify_workers_deterministic(tmp_path, monkeypatch, capsys):
    blobs = []
    for sub in ("a", "b"):
        d = tmp_path / sub
        d.mkdir()
        (d / "g.tsv").write_text(K3_EDGES, encoding="utf-8")
        monkeypatch.chdir(d)
        run_ok(sparsify_argv(**{"--workers": "3", "--samples": "500"}), capsys)
        blobs.append((d / "op.tsv").read_bytes())
    assert blobs[0] == blobs[1]


def test_manifest_replay_reproduces_output(tmp_path, monkeypatch, capsys):
    first = tmp_path / "first"
    first.mkdir()
    (first / "g.tsv").write_text(K3_EDGES, encoding="utf-8")
    monkeypatch.chdir(first)
    run_ok(sparsify_argv(**{"--coeffs": "0.5,1,-0.25", "--samples": "333"}), capsys)
    manifest = json.loads((first / "op.tsv.manifest.json").read_text())

    replay = tmp_path / "replay"
    replay.mkdir()
    (replay / "g.tsv").write_text(K3_EDGES, encoding="utf-8")
    monkeypatch.chdir(replay)
    run_ok(manifest_to_argv(manifest), capsys)
    assert (replay / "op.tsv").read_bytes() == (first / "op.tsv").read_bytes()


def test_sparsify_generates_and_reports_seed(workdir, capsys):
    captured = run_ok(sparsify_argv(**{"--seed": None}), capsys)
    line = next(ln for ln in captured.out.splitlines() if ln.startswith("seed: "))
    seed = int(line.split()[1])
    manifest = json.loads((workdir / "op.tsv.manifest.json").read_text())
    assert manifest["seed"] == seed


def test_sparsify_appnp_coefficients(workdir, capsys):
    run_ok(sparsify_argv(**{"--coeffs": None, "--appnp-alpha": "0.1", "--K": "2"}), capsys)
    manifest = json.loads((workdir / "op.tsv.manifest.json").read_text())
    np.testing.assert_allclose(manifest["params"]["coeffs"], [0.1, 0.09, 0.81], atol=1e-15)


def test_sparsify_learnable_hop_files(workdir, capsys):
    run_ok(
        ["sparsify", "--input", "g.tsv", "--mode", "learnable", "--K", "2",
         "--samples", "100", "--seed", "3", "--workers", "1", "--output", "lop.tsv"],
        capsys,
    )
    for k in range(3):
        assert (workdir / f"lop.tsv.hop{k}").exists()
    hop0 = (workdir / "lop.tsv.hop0").read_text().splitlines()
    assert hop0 == ["0\t0\t1.0", "1\t1\t1.0", "2\t2\t1.0"]
    back = lp.read_operator(workdir / "lop.tsv")
    assert back.hops is not None and len(back.hops) == 3


def test_sparsify_nodewise_remaps_start_ids(tmp_path, monkeypatch, capsys):
    monkeypatch.chdir(tmp_path)
    (tmp_path / "raw.tsv").write_text("10 20\n20 30\n", encoding="utf-8")
    (tmp_path / "starts.txt").write_text("20\n", encoding="utf-8")
    run_ok(
        ["sparsify", "--input", "raw.tsv", "--mode", "nodewise", "--coeffs", "0,1",
         "--start-set", "starts.txt", "--samples", "50", "--seed", "2",
         "--workers", "1", "--output", "op.tsv"],
        capsys,
    )
    rows = {int(ln.split("\t")[0]) for ln in (tmp_path / "op.tsv").read_text().splitlines()}
    assert rows == {1}  # raw id 20 compacts to 1
    idmap = (tmp_path / "op.tsv.idmap.tsv").read_text().splitlines()
    assert idmap == ["10\t0", "20\t1", "30\t2"]


def test_sparsify_nodewise_unknown_start_id(workdir, capsys):
    (workdir / "starts.txt").write_text("99\n", encoding="utf-8")
    code = main(["sparsify", "--input", "g.tsv", "--mode", "nodewise", "--coeffs", "0,1",
                 "--start-set", "starts.txt", "--samples", "10", "--seed", "1",
                 "--output", "op.tsv"])
    assert code == 2
    assert "not present" in capsys.readouterr().err


@pytest.mark.parametrize(
    "over,frag",
    [
        ({"--samples": "10", "--ec": "1.0"}, "not both"),
        ({"--coeffs": "0,1", "--appnp-alpha": "0.1"}, "not both"),
        ({"--coeffs": "0,1", "--K": "2"}, "conflicts"),
        ({"--coeffs": None, "--appnp-alpha": "0.1"}, "needs --K"),
        ({"--coeffs": None}, "needs --coeffs"),
        ({"--coeffs": ""}, "empty"),
        ({"--coeffs": "0,abc"}, "comma-separated numbers"),
        ({"--workers": "0"}, "workers"),
        ({"--start-set": "starts.txt"}, "only meaningful"),
    ],
)
def test_sparsify_usage_errors(workdir, capsys, over, frag):
    base = {"--input": "g.tsv", "--coeffs": "0,1", "--samples": "10",
            "--seed": "1", "--output": "op.tsv"}
    base.update(over)
    argv = ["sparsify"]
    for k, v in base.items():
        if v is not None:
            argv.extend([k, v])
    assert main(argv) == 1
    assert frag in capsys.readouterr().err


def test_sparsify_learnable_rejects_coeffs(workdir, capsys):
    code = main(["sparsify", "--input", "g.tsv", "--mode", "learnable",
                 "--coeffs", "0,1", "--K", "2", "--samples", "10",
                 "--seed", "1", "--output", "op.tsv"])
    assert code == 1
    assert "--K only" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# verify
# ---------------------------------------------------------------------------


def test_verify_report_structure(workdir, capsys):
    captured = run_ok(
        ["verify", "--input", "g.tsv", "--coeffs", "0,1", "--trials", "30",
         "--samples", "400", "--probes", "8", "--ec-sweep", "0.5,5",
         "--seed", "0", "--workers", "1", "--output", "chk"],
        capsys,
    )
    assert "unbiasedness: trials=30" in captured.out
    assert "ec=0.5" in captured.out and "ec=5" in captured.out
    doc = json.loads((workdir / "chk.report.json").read_text())
    assert doc["unbiasedness"]["trials"] == 30
    assert doc["unbiasedness"]["deterministic_bias"] is False
    assert [pt["ec"] for pt in doc["sweep"]] == [0.5, 5.0]
    for pt in doc["sweep"]:
        assert pt["draws"] >= 1
        assert np.isfinite(pt["frob_rel_err"])
    assert (workdir / "chk.ec0.5.diff.tsv").exists()
    assert (workdir / "chk.ec5.diff.tsv").exists()


def test_verify_trials_zero_skips_unbiasedness(workdir, capsys):
    captured = run_ok(
        ["verify", "--input", "g.tsv", "--coeffs", "0,1", "--trials", "0",
         "--seed", "0", "--workers", "1", "--output", "chk"],
        capsys,
    )
    assert "unbiasedness" not in captured.out
    doc = json.loads((workdir / "chk.report.json").read_text())
    assert doc["unbiasedness"] is None
    assert doc["sweep"] == []


def test_verify_diff_grid_is_complete(workdir, capsys):
    run_ok(
        ["verify", "--input", "g.tsv", "--coeffs", "0,1", "--trials", "0",
         "--ec-sweep", "2", "--seed", "4", "--workers", "1", "--output", "chk"],
        capsys,
    )
    lines = (workdir / "chk.ec2.diff.tsv").read_text().splitlines()
    assert lines[0] == "u\tv\tdiff"
    assert len(lines) == 1 + 9
    vals = [float(ln.split("\t")[2]) for ln in lines[1:]]
    assert all(-0.5 <= v <= 0.5 for v in vals)


def test_verify_exit_3_on_deterministic_bias(workdir, capsys, monkeypatch):
    from lapsparse.oracle import zscore_table

    biased = zscore_table(np.stack([np.ones((2, 2))] * 5), np.zeros((2, 2)))
    assert biased.deterministic_bias
    monkeypatch.setattr(cli, "unbiasedness_test", lambda *a, **k: biased)
    code = main(["verify", "--input", "g.tsv", "--coeffs", "0,1", "--trials", "30",
                 "--seed", "0", "--workers", "1", "--output", "chk"])
    assert code == 3
    assert "verification failure" in capsys.readouterr().err
    # the report still lands on disk for post-mortem reading
    doc = json.loads((workdir / "chk.report.json").read_text())
    assert doc["unbiasedness"]["deterministic_bias"] is True


# ---------------------------------------------------------------------------
# appnp-check
# ---------------------------------------------------------------------------


def test_appnp_check_outputs(workdir, capsys):
    captured = run_ok(
        ["appnp-check", "--input", "g.tsv", "--alpha", "0.2", "--K", "3",
         "--samples", "2000", "--trials", "5", "--seed", "0", "--workers", "1",
         "--output", "loss.json"],
        capsys,
    )
    assert "rel_err median=" in captured.out
    doc = json.loads((workdir / "loss.json").read_text())
    assert doc["summary"]["trials"] == 5
    assert len(doc["reports"]) == 5
    assert doc["summary"]["rel_err_median"] >= 0.0
    assert not doc["summary"]["any_absolute"]


def test_appnp_check_reads_signal_file(workdir, capsys):
    lp.write_signal(workdir / "x.tsv", np.array([1.0, -1.0, 0.5]))
    run_ok(
        ["appnp-check", "--input", "g.tsv", "--alpha", "0.5", "--K", "2",
         "--samples", "500", "--trials", "3", "--signal", "x.tsv",
         "--seed", "1", "--workers", "1", "--output", "loss.json"],
        capsys,
    )
    doc = json.loads((workdir / "loss.json").read_text())
    assert doc["summary"]["trials"] == 3


def test_appnp_check_alpha_out_of_range(workdir, capsys):
    code = main(["appnp-check", "--input", "g.tsv", "--alpha", "1.5", "--K", "2",
                 "--samples", "10", "--seed", "0", "--output", "loss.json"])
    assert code == 1
    assert "alpha" in capsys.readouterr().err


def test_appnp_check_requires_budget(workdir, capsys):
    code = main(["appnp-check", "--input", "g.tsv", "--alpha", "0.2", "--K", "2",
                 "--seed", "0", "--output", "loss.json"])
    assert code == 1
    assert "budget" in capsys.readouterr().err


def test_appnp_check_bad_signal_file(workdir, capsys):
    (workdir / "x.tsv").write_text("not a signal\n", encoding="utf-8")
    code = main(["appnp-check", "--input", "g.tsv", "--alpha", "0.2", "--K", "2",
                 "--samples", "10", "--signal", "x.tsv", "--seed", "0",
                 "--output", "loss.json"])
    assert code == 2


# ---------------------------------------------------------------------------
# bench / homophily
# ---------------------------------------------------------------------------


def test_bench_empty_sweep_header_only(workdir, capsys):
    captured = run_ok(
        ["bench", "--input", "g.tsv", "--seed", "0", "--workers", "1", "--output", "bench.tsv"],
        capsys,
    )
    assert "bench rows: 0" in captured.out
    lines = (workdir / "bench.tsv").read_text().splitlines()
    assert lines == ["n\tm\tK\tM\tsample_time_s\tspmv_time_s\tpeak_mem_bytes"]


def test_bench_sweep_rows(workdir, capsys):
    run_ok(
        ["bench", "--input", "g.tsv", "--samples-sweep", "100,200",
         "--hops-sweep", "1,2", "--seed", "0", "--workers", "1", "--output", "bench.tsv"],
        capsys,
    )
    lines = (workdir / "bench.tsv").read_text().splitlines()
    assert len(lines) == 5
    for ln in lines[1:]:
        n, m, k, draws, t_s, t_m, peak = ln.split("\t")
        assert (int(n), int(m)) == (3, 3)
        assert int(k) in (1, 2) and int(draws) in (100, 200)
        assert float(t_s) >= 0 and float(t_m) >= 0 and int(peak) > 0


def test_bench_rejects_bad_sweeps(workdir, capsys):
    code = main(["bench", "--input", "g.tsv", "--hops-sweep", "0",
                 "--samples-sweep", "10", "--seed", "0", "--output", "bench.tsv"])
    assert code == 1


def test_homophily_prints_fraction(workdir, capsys):
    (workdir / "lab.tsv").write_text("0 1\n1 0\n2 1\n", encoding="utf-8")
    captured = run_ok(["homophily", "--input", "g.tsv", "--labels", "lab.tsv"], capsys)
    assert captured.out.strip() == "0.3333"


def test_homophily_missing_label_is_data_error(workdir, capsys):
    (workdir / "lab.tsv").write_text("0 1\n1 0\n", encoding="utf-8")
    code = main(["homophily", "--input", "g.tsv", "--labels", "lab.tsv"])
    assert code == 2
    assert "missing" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# manifest helpers
# ---------------------------------------------------------------------------


def test_manifest_to_argv_shapes_flags():
    doc = {
        "command": "sparsify",
        "params": {
            "input": "g.tsv",
            "coeffs": [0.5, 1.0],
            "samples": 10,
            "ec": None,
            "symmetrize": True,
            "add-self-loops": False,
            "output": "op.tsv",
        },
    }
    argv = manifest_to_argv(doc)
    assert argv == ["sparsify", "--input", "g.tsv", "--coeffs", "0.5,1.0",
                    "--samples", "10", "--symmetrize", "--output", "op.tsv"]
