"""End-to-end checks of the command line front end."""

import csv
import io
import json

import numpy as np
import pytest

from reinwalk.asclt import asclt_hat, checkpoint_grid, cosine
from reinwalk.cli import (
    ARTIFACT_VERSION,
    DEFAULT_SEED,
    ExperimentConfig,
    _parse_dist_field,
    _parse_function_field,
    _slices,
    _validate,
    config_from_argv,
    main,
    run,
)
from reinwalk.coeffs import build_coeff_table, coeff_ratio, loglog
from reinwalk.exact import exact_distribution
from reinwalk.reinforce import WalkConfig, batch_walk
from reinwalk.rng import derive_substreams
from reinwalk.steps import rademacher
from reinwalk.strongapprox import lil_stats, make_tracker, simulate_bm


def read_csv(path):
    with open(path) as fh:
        lines = fh.read().splitlines()
    assert lines[0].startswith(f"# {ARTIFACT_VERSION} ")
    rows = list(csv.reader(io.StringIO("\n".join(lines[1:]))))
    return lines[0], rows[0], rows[1:]


def read_json(path):
    with open(path) as fh:
        return json.load(fh)


def test_config_defaults():
    cfg = ExperimentConfig(command="simulate")
    assert cfg.seed == DEFAULT_SEED
    assert cfg.dist == {"kind": "rademacher"}
    assert cfg.f == {"kind": "cosine"}
    assert cfg.format is None
    _validate(cfg)


@pytest.mark.parametrize(
    "fields, message",
    [
        (dict(command="walk"), "command must be one of"),
        (dict(command="simulate", n=0), "n must be an integer >= 1"),
        (dict(command="simulate", paths=0), "paths must be an integer >= 1"),
        (dict(command="simulate", seed=-1), "seed must be a 64-bit integer"),
        (dict(command="simulate", mode="both"), "mode must be positive or negative"),
        (dict(command="simulate", p=1.0), "p must lie in"),
        (dict(command="simulate", format="tsv"), "format must be csv or json"),
        (dict(command="simulate", checkpoints=1.0), "growth factor must exceed 1"),
        (dict(command="simulate", paths=3), "single trajectory"),
        (dict(command="coeffs", n=20_000_000), "capped at 1e7"),
        (dict(command="oracle", truncation={"alpha": 0.5}), "truncation not supported"),
        (dict(command="asclt", n=1), "at least 2 steps"),
        (dict(command="lil", n=2), "start at n = 3"),
        (dict(command="bm", n=2), "start at n = 3"),
        (dict(command="lil", kind="walk"), "kind must be one of"),
        (dict(command="simulate", dist={"kind": "poisson"}), "unknown distribution kind"),
        (dict(command="simulate", truncation={"beta": 1}), "unknown truncation fields"),
    ],
)
def test_validation_names_offending_field(fields, message):
    with pytest.raises(ValueError, match=message):
        _validate(ExperimentConfig(**fields))


def test_parse_dist_field():
    assert _parse_dist_field("rademacher") == {"kind": "rademacher"}
    spec = _parse_dist_field('{"kind": "gaussian", "mean": 0.5, "sd": 2.0}')
    assert spec == {"kind": "gaussian", "mean": 0.5, "sd": 2.0}
    assert _parse_dist_field(spec) is spec
    with pytest.raises(ValueError, match="missing field"):
        _parse_dist_field('{"kind": "gaussian", "mean": 0.5}')
    with pytest.raises(ValueError, match="kind name or JSON object"):
        _parse_dist_field(7)


def test_parse_function_field():
    assert _parse_function_field("cosine", None) == {"kind": "cosine"}
    assert _parse_function_field("exp_quadratic", 0.25) == {
        "kind": "exp_quadratic",
        "gamma": 0.25,
    }
    assert _parse_function_field("constant", 2.0) == {"kind": "constant", "c": 2.0}
    spec = {"kind": "smoothed_indicator", "a": -1.0, "b": 1.0, "width": 0.1}
    assert _parse_function_field(json.dumps(spec), None) == spec
    with pytest.raises(ValueError, match="needs --alpha"):
        _parse_function_field("exp_quadratic", None)
    with pytest.raises(ValueError, match="--alpha only applies"):
        _parse_function_field("cosine", 1.0)


def test_config_from_argv_merges_file_and_flags(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"p": 0.25, "n": 50, "seed": 7}))
    cfg = config_from_argv(["simulate", "--config", str(path), "--n", "80"])
    assert (cfg.command, cfg.p, cfg.n, cfg.seed) == ("simulate", 0.25, 80, 7)

    path.write_text(json.dumps({"horizon": 50}))
    with pytest.raises(ValueError, match="unknown config fields"):
        config_from_argv(["simulate", "--config", str(path)])

    path.write_text(json.dumps({"command": "coeffs"}))
    with pytest.raises(ValueError, match="names command"):
        config_from_argv(["simulate", "--config", str(path)])


def test_slices_cover_and_are_worker_independent():
    for paths in (1, 2, 5, 16, 17, 200):
        pairs = _slices(paths, 16)
        assert pairs[0][0] == 0 and pairs[-1][1] == paths
        assert all(a < b for a, b in pairs)
        assert [b for _, b in pairs[:-1]] == [a for a, _ in pairs[1:]]


def test_simulate_csv_shape_and_values(tmp_path):
    out = tmp_path / "walk.csv"
    code = main(
        ["simulate", "--mode", "positive", "--p", "0", "--n", "1000", "--paths", "1", "--out", str(out)]
    )
    assert code == 0
    header, columns, rows = read_csv(out)
    assert header == f"# {ARTIFACT_VERSION} simulate"
    assert columns == ["n", "S_n", "G_n"]
    assert len(rows) == 1000

    keys = derive_substreams(DEFAULT_SEED, np.arange(1))
    wcfg = WalkConfig(mode="positive", p=0.0, dist=rademacher(), track_com=False)
    batch = batch_walk(wcfg, keys, 1000, record_s=True)
    s = np.array([float(r[1]) for r in rows])
    np.testing.assert_array_equal(s, batch.s_history[:, 0])
    g = np.array([float(r[2]) for r in rows])
    np.testing.assert_allclose(g, np.cumsum(s) / np.arange(1, 1001), rtol=1e-15)

    manifest = read_json(str(out) + ".manifest.json")
    assert manifest["artifact"] == ARTIFACT_VERSION
    assert manifest["replicate_seeds"] == [int(keys[0])]
    assert manifest["config"]["n"] == 1000
    assert manifest["aggregate"]["s_final"] == s[-1]


def test_coeffs_csv_matches_table(tmp_path):
    out = tmp_path / "table.csv"
    assert main(["coeffs", "--mode", "negative", "--p", "0.3", "--n", "40", "--out", str(out)]) == 0
    _, columns, rows = read_csv(out)
    assert columns == ["n", "a_n", "s_n2", "ratio"]
    table = build_coeff_table("negative", 0.3, 40)
    ks = np.arange(1, 41)
    np.testing.assert_array_equal([int(r[0]) for r in rows], ks)
    np.testing.assert_array_equal([float(r[1]) for r in rows], np.exp(table.log_a[1:]))
    np.testing.assert_array_equal([float(r[2]) for r in rows], table.s2[1:])
    np.testing.assert_array_equal([float(r[3]) for r in rows], coeff_ratio(table, ks))


def test_oracle_outputs(tmp_path, capsys):
    out = tmp_path / "law.csv"
    assert main(["oracle", "--p", "0.3", "--n", "5", "--out", str(out), "--format", "csv"]) == 0
    _, columns, rows = read_csv(out)
    assert columns == ["value", "probability"]
    law = exact_distribution(5, 0.3, "positive", rademacher())
    assert [(float(r[0]), float(r[1])) for r in rows] == law.sorted_atoms()

    summary = read_json(str(out) + ".summary.json")
    assert summary["mean"] == pytest.approx(summary["mean_recursion"], abs=1e-12)
    assert summary["variance"] == pytest.approx(summary["variance_recursion"], abs=1e-12)

    assert main(["oracle", "--p", "0.3", "--n", "5", "--format", "json"]) == 0
    printed = json.loads(capsys.readouterr().out)
    assert printed["atoms"] == len(rows)


def test_asclt_artifacts_match_module(tmp_path):
    out = tmp_path / "series.csv"
    args = ["asclt", "--p", "0.25", "--n", "500", "--paths", "6", "--seed", "99", "--out", str(out), "--format", "csv"]
    assert main(args) == 0
    _, columns, rows = read_csv(out)
    assert columns == ["n", "path_id", "T_n"]
    cps = checkpoint_grid(500)
    cps = cps[cps >= 2]
    assert len(rows) == 6 * cps.size
    assert sorted({int(r[1]) for r in rows}) == list(range(6))

    keys = derive_substreams(99, np.arange(6))
    wcfg = WalkConfig(mode="positive", p=0.25, dist=rademacher(), track_com=False)
    batch = batch_walk(wcfg, keys, 500, record_s=True)
    _, series = asclt_hat(batch.s_history, 0.25, rademacher(), cosine(), checkpoints=cps)
    got = np.array([float(r[2]) for r in rows]).reshape(6, cps.size).T
    # the cli folds each replicate slice separately, so sums may reassociate
    np.testing.assert_allclose(got, series, rtol=1e-13, atol=1e-15)

    summary = read_json(str(out) + ".summary.json")
    assert summary["target"] == pytest.approx(0.606531, abs=1e-6)
    assert summary["mean"] == pytest.approx(float(np.mean(series[-1])))
    assert summary["abs_error"] == pytest.approx(abs(summary["mean"] - summary["target"]))


def test_lil_trace_matches_stats(tmp_path):
    out = tmp_path / "lil.csv"
    args = ["lil", "--kind", "walk_hat", "--p", "0.25", "--n", "400", "--paths", "3", "--seed", "5", "--out", str(out), "--format", "csv"]
    assert main(args) == 0
    _, columns, rows = read_csv(out)
    assert columns == ["n", "stat", "running_max", "constant"]
    tracker = make_tracker("walk_hat", 0.25, rademacher())
    assert all(float(r[3]) == tracker.constant for r in rows)
    rmax = [float(r[2]) for r in rows]
    assert rmax == sorted(rmax)

    keys = derive_substreams(5, np.arange(3))
    wcfg = WalkConfig(mode="positive", p=0.25, dist=rademacher(), track_com=False)
    batch = batch_walk(wcfg, keys[:1], 400, record_s=True)
    ns = np.array([int(r[0]) for r in rows])
    expected = lil_stats(tracker, ns, batch.s_history[ns - 1, 0])
    np.testing.assert_allclose([float(r[1]) for r in rows], expected, rtol=1e-12)

    summary = read_json(str(out) + ".summary.json")
    assert summary["in_band"] + summary["out_of_band"] == 3
    assert summary["constant"] == tracker.constant


def test_bm_trace_matches_path(tmp_path):
    out = tmp_path / "bm.csv"
    assert main(["bm", "--n", "300", "--paths", "2", "--seed", "11", "--out", str(out), "--format", "csv"]) == 0
    _, columns, rows = read_csv(out)
    assert columns == ["n", "stat", "running_max", "constant"]
    assert all(float(r[3]) == 1.0 for r in rows)

    key = int(derive_substreams(11, np.arange(2))[0])
    path = simulate_bm(np.arange(1, 301, dtype=np.float64), key)
    ns = np.array([int(r[0]) for r in rows])
    expected = np.abs(path.values[ns]) / np.sqrt(2.0 * ns * loglog(ns.astype(np.float64)))
    np.testing.assert_allclose([float(r[1]) for r in rows], expected, rtol=1e-12)

    summary = read_json(str(out) + ".summary.json")
    assert summary["band"] == [0.4, 1.3]
    assert summary["paths"] == 2


def _artifact_bytes(out):
    with open(out, "rb") as fh:
        primary = fh.read()
    with open(str(out) + ".summary.json", "rb") as fh:
        summary = fh.read()
    manifest = read_json(str(out) + ".manifest.json")
    manifest.pop("wall_time_s")
    return primary, summary, manifest


@pytest.mark.parametrize(
    "args",
    [
        ["asclt", "--p", "0.25", "--n", "800", "--paths", "7"],
        ["lil", "--kind", "com_hat_sub", "--p", "0", "--n", "600", "--paths", "5"],
        ["bm", "--n", "500", "--paths", "5"],
    ],
)
def test_outputs_invariant_under_thread_count(args, tmp_path, monkeypatch):
    blobs = []
    out = tmp_path / "run.csv"
    for threads in ("1", "3"):
        monkeypatch.setenv("REINFORCE_THREADS", threads)
        assert main(args + ["--out", str(out), "--format", "csv"]) == 0
        blobs.append(_artifact_bytes(out))
    assert blobs[0] == blobs[1]


def test_substreams_have_no_collisions():
    keys = derive_substreams(DEFAULT_SEED, np.arange(1_000_001))
    assert np.unique(keys).size == 1_000_001


def test_cli_error_exit_codes(tmp_path, capsys):
    assert main(["simulate", "--paths", "2"]) == 2
    assert "single trajectory" in capsys.readouterr().err
    assert main(["verify", "--suite", "nope"]) == 2
    assert "suite must be one of" in capsys.readouterr().err
    missing = tmp_path / "absent" / "file.csv"
    assert main(["coeffs", "--n", "5", "--out", str(missing)]) == 1


def test_verify_oracle_suite_passes(capsys):
    assert main(["verify", "--suite", "oracle"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines and all(line.startswith("[criterion 1]") for line in lines)
    assert all(line.endswith("PASS") for line in lines)


def test_run_returns_manifest_for_stdout_runs(capsys):
    manifest = run(ExperimentConfig(command="coeffs", n=3, p=0.1))
    captured = capsys.readouterr().out
    assert captured.splitlines()[0] == f"# {ARTIFACT_VERSION} coeffs"
    assert manifest.command == "coeffs"
    assert manifest.aggregate["n"] == 3
    assert manifest.wall_time_s >= 0.0
