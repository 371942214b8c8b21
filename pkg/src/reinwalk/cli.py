"""Command line front end: seeded experiments and deterministic artifacts.

Every invocation is described by an ExperimentConfig, assembled from
subcommand flags optionally overlaid on a JSON config file.  A run yields a
primary artifact (CSV rows or a summary JSON, picked by --format with a
per-command default) and, when writing to a file, a summary and a run
manifest alongside it.  Replicates draw their streams from counter-mixed
substreams of the master seed and are aggregated in replicate order with
pairwise folds, so outputs are byte-identical for a fixed config no matter
how many workers REINFORCE_THREADS grants.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .asclt import (
    asclt_check,
    asclt_hat,
    checkpoint_grid,
    function_from_spec,
    gaussian_expectation,
)
from .coeffs import build_coeff_table, coeff_ratio, loglog
from .exact import exact_distribution, mean_recursion, var_recursion
from .reinforce import WalkConfig, batch_walk
from .rng import derive_substreams
from .steps import TruncationRule, distribution_from_spec
from .strongapprox import TRACKER_KINDS, lil_normalizers, make_tracker, simulate_bm

ARTIFACT_VERSION = "reinwalk-csv v1"

# Master seed used when none is given, so documented invocations are
# reproducible verbatim.
DEFAULT_SEED = 1729

COMMANDS = ("coeffs", "simulate", "oracle", "asclt", "lil", "bm", "verify")

# Sanity band for running-max/constant ratios and the fraction of paths
# expected inside it.
LIL_BAND = (0.4, 1.3)
LIL_BAND_FLOOR = 0.9

# Commands whose primary artifact is the summary JSON rather than CSV rows.
_JSON_FIRST = frozenset({"asclt", "lil", "bm", "verify"})

# Fixed replicate-slice targets per command.  Boundaries depend only on the
# replicate count, never on the worker pool, so scheduling cannot leak into
# results.  Observer-driven commands use wider slices to amortize the
# per-step Python overhead.
_SLICE_TARGETS = {"asclt": 16, "lil": 4, "bm": 4}

# Replicate sub-chunk budget (grid points times paths) for commands that
# hold full per-step histories in memory.
_CHUNK_ELEMENTS = 20_000_000


@dataclass
class ExperimentConfig:
    """One resolved experiment invocation.

    ``dist`` and ``f`` are JSON-style spec dicts (the forms accepted by
    steps.distribution_from_spec and asclt.function_from_spec); ``format``
    None picks the command default.  ``kind`` names the tracked process for
    the lil command and is ignored elsewhere.
    """

    command: str
    mode: str = "positive"
    p: float = 0.0
    dist: dict = field(default_factory=lambda: {"kind": "rademacher"})
    truncation: dict | None = None
    n: int = 1000
    paths: int = 1
    seed: int = DEFAULT_SEED
    f: dict = field(default_factory=lambda: {"kind": "cosine"})
    kind: str = "walk_hat"
    suite: str | None = None
    checkpoints: float = 1.5
    out: str | None = None
    format: str | None = None


@dataclass
class RunManifest:
    """Reproducibility record written next to file outputs.

    ``wall_time_s`` is the one field allowed to differ between otherwise
    identical runs; byte comparisons should drop it.
    """

    artifact: str
    command: str
    config: dict
    replicate_seeds: list
    aggregate: dict
    wall_time_s: float


@dataclass
class CommandResult:
    columns: tuple
    rows: list
    summary: dict
    replicate_seeds: list


def _rule(obj: dict | None) -> TruncationRule:
    if obj is None:
        return TruncationRule()
    extra = set(obj) - {"alpha", "enabled"}
    if extra:
        raise ValueError(f"unknown truncation fields {sorted(extra)}")
    return TruncationRule(
        alpha=float(obj.get("alpha", 1.0 / 3.0)), enabled=bool(obj.get("enabled", True))
    )


def _validate(cfg: ExperimentConfig) -> None:
    if cfg.command not in COMMANDS:
        raise ValueError(f"command must be one of {COMMANDS}, got {cfg.command!r}")
    if not isinstance(cfg.n, int) or cfg.n < 1:
        raise ValueError(f"n must be an integer >= 1, got {cfg.n!r}")
    if not isinstance(cfg.paths, int) or cfg.paths < 1:
        raise ValueError(f"paths must be an integer >= 1, got {cfg.paths!r}")
    if not isinstance(cfg.seed, int) or not 0 <= cfg.seed < 2**64:
        raise ValueError(f"seed must be a 64-bit integer, got {cfg.seed!r}")
    if cfg.mode not in ("positive", "negative"):
        raise ValueError(f"mode must be positive or negative, got {cfg.mode!r}")
    if not 0.0 <= cfg.p < 1.0:
        raise ValueError(f"p must lie in [0, 1), got {cfg.p}")
    if cfg.format not in (None, "csv", "json"):
        raise ValueError(f"format must be csv or json, got {cfg.format!r}")
    if not cfg.checkpoints > 1.0:
        raise ValueError(f"checkpoints growth factor must exceed 1, got {cfg.checkpoints}")
    distribution_from_spec(cfg.dist)
    function_from_spec(cfg.f)
    _rule(cfg.truncation)
    if cfg.command in ("coeffs", "simulate") and cfg.n > 10_000_000:
        raise ValueError(f"n capped at 1e7 for {cfg.command}, got {cfg.n}")
    if cfg.command == "simulate" and cfg.paths != 1:
        raise ValueError(f"simulate writes a single trajectory, got paths={cfg.paths}")
    if cfg.command == "oracle" and cfg.truncation is not None:
        raise ValueError("oracle enumerates the untruncated law; truncation not supported")
    if cfg.command == "asclt" and cfg.n < 2:
        raise ValueError(f"asclt needs at least 2 steps of history, got n={cfg.n}")
    if cfg.command in ("lil", "bm") and cfg.n < 3:
        raise ValueError(f"{cfg.command} statistics start at n = 3, got n={cfg.n}")
    if cfg.command == "lil" and cfg.kind not in TRACKER_KINDS:
        raise ValueError(f"kind must be one of {TRACKER_KINDS}, got {cfg.kind!r}")


def _thread_count() -> int:
    raw = os.environ.get("REINFORCE_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ValueError(f"REINFORCE_THREADS must be an integer, got {raw!r}") from None


def _slices(paths: int, target: int) -> list:
    m = min(paths, target)
    edges = sorted({(i * paths) // m for i in range(m + 1)})
    return list(zip(edges[:-1], edges[1:]))


def _map_slices(worker, tasks: list) -> list:
    threads = _thread_count()
    if threads == 1 or len(tasks) == 1:
        return [worker(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=min(threads, len(tasks))) as pool:
        return list(pool.map(worker, tasks))


def _asclt_slice(task: dict) -> np.ndarray:
    """T series (checkpoints by paths) for one replicate slice."""
    dist = distribution_from_spec(task["dist"])
    f = function_from_spec(task["f"])
    wcfg = WalkConfig(
        mode=task["mode"],
        p=task["p"],
        dist=dist,
        truncation=_rule(task["truncation"]),
        track_com=False,
    )
    keys = np.asarray(task["keys"], dtype=np.uint64)
    cps = np.asarray(task["cps"], dtype=np.int64)
    n = task["n"]
    average = asclt_hat if task["mode"] == "positive" else asclt_check
    width = max(1, _CHUNK_ELEMENTS // n)
    series = []
    for lo in range(0, keys.size, width):
        batch = batch_walk(wcfg, keys[lo : lo + width], n, record_s=True)
        _, t = average(batch.s_history, task["p"], dist, f, checkpoints=cps)
        series.append(t)
    return np.hstack(series)


def _lil_slice(task: dict) -> tuple:
    """Per-path running maxima (and checkpoint trace for the first path)."""
    dist = distribution_from_spec(task["dist"])
    kind = task["kind"]
    tracker = make_tracker(kind, task["p"], dist)
    com_kind = kind.startswith("com")
    wcfg = WalkConfig(
        mode="negative" if "check" in kind else "positive",
        p=task["p"],
        dist=dist,
        truncation=_rule(task["truncation"]),
        track_com=com_kind,
    )
    keys = np.asarray(task["keys"], dtype=np.uint64)
    n = task["n"]
    drift, den = lil_normalizers(tracker, np.arange(3, n + 1, dtype=np.int64))
    inv = 1.0 / den
    is_cp = np.zeros(n + 1, dtype=bool)
    is_cp[np.asarray(task["cps"], dtype=np.int64)] = True
    best = np.zeros(keys.size)
    trace: list = []
    want_trace = task["trace"]

    def observe(m, s, com):
        if m < 3:
            return
        value = com / m if com_kind else s
        stat = np.abs(value - drift[m - 3]) * inv[m - 3]
        np.maximum(best, stat, out=best)
        if want_trace and is_cp[m]:
            trace.append((m, float(stat[0]), float(best[0])))

    batch_walk(wcfg, keys, n, observer=observe)
    return best, trace


def _bm_slice(task: dict) -> tuple:
    """Running maxima of |W(k)| / sqrt(2 k loglog k) along the integer clock."""
    keys = np.asarray(task["keys"], dtype=np.uint64)
    n = task["n"]
    grid = np.arange(1, n + 1, dtype=np.float64)
    ks = np.arange(3, n + 1, dtype=np.float64)
    den = np.sqrt(2.0 * ks * loglog(ks))
    cps = [int(k) for k in task["cps"] if k >= 3]
    best = np.empty(keys.size)
    trace: list = []
    for j in range(keys.size):
        path = simulate_bm(grid, int(keys[j]))
        stat = np.abs(path.values[3:]) / den
        rmax = np.maximum.accumulate(stat)
        best[j] = rmax[-1]
        if task["trace"] and j == 0:
            trace = [(k, float(stat[k - 3]), float(rmax[k - 3])) for k in cps]
    return best, trace


def _cmd_coeffs(cfg: ExperimentConfig) -> CommandResult:
    table = build_coeff_table(cfg.mode, cfg.p, cfg.n)
    ks = np.arange(1, cfg.n + 1)
    a = np.exp(table.log_a[1:])
    s2 = table.s2[1:]
    ratio = np.atleast_1d(coeff_ratio(table, ks))
    rows = list(zip(ks.tolist(), a.tolist(), s2.tolist(), ratio.tolist()))
    summary = {
        "command": "coeffs",
        "mode": cfg.mode,
        "p": cfg.p,
        "n": cfg.n,
        "a_n": float(a[-1]),
        "s_n2": float(s2[-1]),
        "ratio": float(ratio[-1]),
    }
    return CommandResult(("n", "a_n", "s_n2", "ratio"), rows, summary, [])


def _cmd_simulate(cfg: ExperimentConfig) -> CommandResult:
    keys = derive_substreams(cfg.seed, np.arange(1))
    wcfg = WalkConfig(
        mode=cfg.mode,
        p=cfg.p,
        dist=distribution_from_spec(cfg.dist),
        truncation=_rule(cfg.truncation),
        track_com=False,
    )
    batch = batch_walk(wcfg, keys, cfg.n, record_s=True)
    s = batch.s_history[:, 0]
    g = np.cumsum(s) / np.arange(1, cfg.n + 1, dtype=np.float64)
    rows = list(zip(range(1, cfg.n + 1), s.tolist(), g.tolist()))
    summary = {
        "command": "simulate",
        "mode": cfg.mode,
        "p": cfg.p,
        "n": cfg.n,
        "s_final": float(s[-1]),
        "g_final": float(g[-1]),
    }
    return CommandResult(("n", "S_n", "G_n"), rows, summary, [int(keys[0])])


def _cmd_oracle(cfg: ExperimentConfig) -> CommandResult:
    dist = distribution_from_spec(cfg.dist)
    law = exact_distribution(cfg.n, cfg.p, cfg.mode, dist)
    means = mean_recursion(cfg.n, cfg.p, cfg.mode, dist)
    variances = var_recursion(cfg.n, cfg.p, cfg.mode, dist)
    rows = law.sorted_atoms()
    summary = {
        "command": "oracle",
        "mode": cfg.mode,
        "p": cfg.p,
        "n": cfg.n,
        "atoms": len(rows),
        "total_mass": law.total_mass(),
        "mean": law.mean(),
        "variance": law.variance(),
        "mean_recursion": float(means[-1]),
        "variance_recursion": float(variances[-1]),
    }
    return CommandResult(("value", "probability"), rows, summary, [])


def _cmd_asclt(cfg: ExperimentConfig) -> CommandResult:
    cps = checkpoint_grid(cfg.n, cfg.checkpoints)
    cps = cps[cps >= 2]
    keys = derive_substreams(cfg.seed, np.arange(cfg.paths))
    tasks = [
        {
            "mode": cfg.mode,
            "p": cfg.p,
            "dist": cfg.dist,
            "f": cfg.f,
            "truncation": cfg.truncation,
            "n": cfg.n,
            "cps": cps.tolist(),
            "keys": keys[a:b].tolist(),
        }
        for a, b in _slices(cfg.paths, _SLICE_TARGETS["asclt"])
    ]
    series = np.hstack(_map_slices(_asclt_slice, tasks))
    target = gaussian_expectation(function_from_spec(cfg.f))
    final = series[-1]
    mean = float(np.mean(final))
    sd = float(np.std(final, ddof=1)) if cfg.paths > 1 else 0.0
    rows = [
        (int(cps[i]), j, float(series[i, j]))
        for j in range(cfg.paths)
        for i in range(cps.size)
    ]
    summary = {
        "command": "asclt",
        "mode": cfg.mode,
        "p": cfg.p,
        "f": cfg.f,
        "n": cfg.n,
        "paths": cfg.paths,
        "mean": mean,
        "sd": sd,
        "target": float(target),
        "abs_error": abs(mean - float(target)),
    }
    return CommandResult(("n", "path_id", "T_n"), rows, summary, [int(k) for k in keys])


def _band_summary(command: str, cfg: ExperimentConfig, maxima: np.ndarray, constant: float) -> dict:
    lo, hi = LIL_BAND
    ratios = maxima / constant
    in_band = int(np.count_nonzero((ratios >= lo) & (ratios <= hi)))
    fraction = in_band / cfg.paths
    return {
        "command": command,
        "n": cfg.n,
        "paths": cfg.paths,
        "constant": constant,
        "band": [lo, hi],
        "in_band": in_band,
        "out_of_band": cfg.paths - in_band,
        "fraction": fraction,
        "median_ratio": float(np.median(ratios)),
        "pass": fraction >= LIL_BAND_FLOOR,
    }


def _cmd_lil(cfg: ExperimentConfig) -> CommandResult:
    dist = distribution_from_spec(cfg.dist)
    tracker = make_tracker(cfg.kind, cfg.p, dist)
    cps = checkpoint_grid(cfg.n, cfg.checkpoints)
    keys = derive_substreams(cfg.seed, np.arange(cfg.paths))
    tasks = [
        {
            "kind": cfg.kind,
            "p": cfg.p,
            "dist": cfg.dist,
            "truncation": cfg.truncation,
            "n": cfg.n,
            "cps": cps.tolist(),
            "keys": keys[a:b].tolist(),
            "trace": i == 0,
        }
        for i, (a, b) in enumerate(_slices(cfg.paths, _SLICE_TARGETS["lil"]))
    ]
    parts = _map_slices(_lil_slice, tasks)
    maxima = np.concatenate([part[0] for part in parts])
    rows = [(m, stat, rmax, tracker.constant) for m, stat, rmax in parts[0][1]]
    summary = _band_summary("lil", cfg, maxima, tracker.constant)
    summary["kind"] = cfg.kind
    summary["p"] = cfg.p
    return CommandResult(
        ("n", "stat", "running_max", "constant"), rows, summary, [int(k) for k in keys]
    )


def _cmd_bm(cfg: ExperimentConfig) -> CommandResult:
    cps = checkpoint_grid(cfg.n, cfg.checkpoints)
    keys = derive_substreams(cfg.seed, np.arange(cfg.paths))
    tasks = [
        {
            "n": cfg.n,
            "cps": cps.tolist(),
            "keys": keys[a:b].tolist(),
            "trace": i == 0,
        }
        for i, (a, b) in enumerate(_slices(cfg.paths, _SLICE_TARGETS["bm"]))
    ]
    parts = _map_slices(_bm_slice, tasks)
    maxima = np.concatenate([part[0] for part in parts])
    rows = [(m, stat, rmax, 1.0) for m, stat, rmax in parts[0][1]]
    summary = _band_summary("bm", cfg, maxima, 1.0)
    return CommandResult(
        ("n", "stat", "running_max", "constant"), rows, summary, [int(k) for k in keys]
    )


def _cmd_verify(cfg: ExperimentConfig) -> CommandResult:
    from . import verify

    names = list(verify.SUITES) if cfg.suite is None else [cfg.suite]
    if cfg.suite is not None and cfg.suite not in verify.SUITES:
        raise ValueError(f"suite must be one of {tuple(verify.SUITES)}, got {cfg.suite!r}")
    results = []
    for name in names:
        for res in verify.run_suite(name):
            results.append(res)
            sys.stdout.write(verify.format_result(res) + "\n")
            sys.stdout.flush()
    failures = sum(1 for r in results if not r.passed)
    summary = {
        "command": "verify",
        "suites": names,
        "checks": len(results),
        "failures": failures,
        "pass": failures == 0,
        "results": [asdict(r) for r in results],
    }
    return CommandResult((), [], summary, [])


_COMMANDS = {
    "coeffs": _cmd_coeffs,
    "simulate": _cmd_simulate,
    "oracle": _cmd_oracle,
    "asclt": _cmd_asclt,
    "lil": _cmd_lil,
    "bm": _cmd_bm,
    "verify": _cmd_verify,
}


def _cell(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".17g")


def _csv_text(command: str, columns: tuple, rows: list) -> str:
    lines = [f"# {ARTIFACT_VERSION} {command}", ",".join(columns)]
    lines.extend(",".join(_cell(v) for v in row) for row in rows)
    return "\n".join(lines) + "\n"


def _json_text(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _write(path: str, text: str) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(text)


def _emit(cfg: ExperimentConfig, result: CommandResult, manifest: RunManifest) -> None:
    fmt = cfg.format or ("json" if cfg.command in _JSON_FIRST else "csv")
    if cfg.out is None:
        # verify already streamed its per-check lines.
        if cfg.command != "verify":
            text = (
                _csv_text(cfg.command, result.columns, result.rows)
                if fmt == "csv"
                else _json_text(result.summary)
            )
            sys.stdout.write(text)
        return
    if fmt == "csv":
        _write(cfg.out, _csv_text(cfg.command, result.columns, result.rows))
        _write(cfg.out + ".summary.json", _json_text(result.summary))
    else:
        _write(cfg.out, _json_text(result.summary))
    _write(cfg.out + ".manifest.json", _json_text(asdict(manifest)))


def run(config: ExperimentConfig) -> RunManifest:
    """Execute the configured command, write its artifacts, return the manifest.

    ``aggregate`` echoes the command summary; for verify it carries the
    failure count that drives the process exit code.
    """
    _validate(config)
    start = time.perf_counter()
    result = _COMMANDS[config.command](config)
    manifest = RunManifest(
        artifact=ARTIFACT_VERSION,
        command=config.command,
        config=asdict(config),
        replicate_seeds=result.replicate_seeds,
        aggregate=result.summary,
        wall_time_s=time.perf_counter() - start,
    )
    _emit(config, result, manifest)
    return manifest


def _parse_dist_field(value) -> dict:
    if isinstance(value, str):
        text = value.strip()
        value = json.loads(text) if text.startswith("{") else {"kind": text}
    if not isinstance(value, dict):
        raise ValueError(f"dist must be a kind name or JSON object, got {value!r}")
    try:
        distribution_from_spec(value)
    except KeyError as exc:
        raise ValueError(f"dist spec is missing field {exc}") from None
    return value


def _parse_function_field(value, alpha: float | None) -> dict:
    if isinstance(value, str):
        text = value.strip()
        value = json.loads(text) if text.startswith("{") else {"kind": text}
    if not isinstance(value, dict):
        raise ValueError(f"f must be a function name or JSON object, got {value!r}")
    parametric = {"constant": "c", "exp_quadratic": "gamma"}
    kind = value.get("kind")
    if alpha is not None:
        if kind not in parametric:
            raise ValueError(f"--alpha only applies to {sorted(parametric)}, got f={kind!r}")
        value = dict(value, **{parametric[kind]: alpha})
    if kind in parametric and parametric[kind] not in value:
        raise ValueError(f"test function {kind!r} needs --alpha or an explicit spec")
    try:
        function_from_spec(value)
    except KeyError as exc:
        raise ValueError(f"test function spec is missing field {exc}") from None
    return value


_CONFIG_FIELDS = {
    "command",
    "mode",
    "p",
    "dist",
    "truncation",
    "n",
    "paths",
    "seed",
    "f",
    "kind",
    "suite",
    "checkpoints",
    "out",
    "format",
}

_HELP = {
    "coeffs": "dump the de-biasing coefficient table as CSV (n, a_n, s_n2, ratio)",
    "simulate": "dump one trajectory as CSV (n, S_n, G_n)",
    "oracle": "enumerate the exact small-n law: CSV (value, probability) plus moments",
    "asclt": "log-averaged CLT functional over replicates: CSV (n, path_id, T_n) plus aggregate",
    "lil": "running-max iterated-logarithm statistics for a reinforced walk",
    "bm": "running-max iterated-logarithm statistics for Brownian motion",
    "verify": "run acceptance suites; exit 0 iff every check passes",
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="reinwalk", description="Reinforced random walk laboratory."
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name, help=_HELP[name])
        s.add_argument("--config", help="JSON file with ExperimentConfig fields")
        s.add_argument("--seed", type=int, help=f"master seed (default {DEFAULT_SEED})")
        s.add_argument("--n", type=int, help="horizon / table length")
        s.add_argument("--paths", type=int, help="replicate count")
        s.add_argument("--p", type=float, help="memory parameter in [0, 1)")
        s.add_argument("--mode", choices=("positive", "negative"))
        s.add_argument("--dist", help="step law: kind name or JSON spec")
        s.add_argument("--f", help="test function: name or JSON spec")
        s.add_argument(
            "--alpha", type=float, help="parameter for constant / exp_quadratic"
        )
        s.add_argument("--kind", choices=TRACKER_KINDS, help="lil tracked process")
        s.add_argument("--suite", help="verify: run a single named suite")
        s.add_argument("--checkpoints", type=float, help="emission grid growth factor")
        s.add_argument("--out", help="output file (summary and manifest land beside it)")
        s.add_argument("--format", choices=("csv", "json"))
    return parser


def config_from_argv(argv=None) -> ExperimentConfig:
    ns = _build_parser().parse_args(argv)
    merged: dict = {}
    if ns.config:
        with open(ns.config) as fh:
            loaded = json.load(fh)
        if not isinstance(loaded, dict):
            raise ValueError("config file must hold a JSON object")
        unknown = set(loaded) - _CONFIG_FIELDS
        if unknown:
            raise ValueError(f"unknown config fields {sorted(unknown)}")
        if loaded.get("command", ns.command) != ns.command:
            raise ValueError(
                f"config file names command {loaded['command']!r}, invoked {ns.command!r}"
            )
        merged.update(loaded)
    for key in ("seed", "n", "paths", "p", "mode", "kind", "suite", "checkpoints", "out", "format"):
        value = getattr(ns, key)
        if value is not None:
            merged[key] = value
    if ns.dist is not None:
        merged["dist"] = ns.dist
    if ns.f is not None:
        merged["f"] = ns.f
    merged["command"] = ns.command
    merged["dist"] = _parse_dist_field(merged.get("dist", "rademacher"))
    merged["f"] = _parse_function_field(merged.get("f", "cosine"), ns.alpha)
    return ExperimentConfig(**merged)


def main(argv=None) -> int:
    try:
        config = config_from_argv(argv)
        manifest = run(config)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 1 if manifest.aggregate.get("failures") else 0


if __name__ == "__main__":
    sys.exit(main())
