"""Command-line front end: ``psc fit | select | simulate | bench``.

Every subcommand reads its settings from flags, optionally layered over a
JSON config file (``--config``) whose keys are the flag names with dashes
replaced by underscores. Flags win over file values.

Reports are JSON; labels, loadings and curves are CSV. Wall-clock timings go
to a separate ``timing.json`` so that ``report.json`` is byte-identical across
repeated runs with the same seed.

Exit codes: 0 success, 2 invalid input, 3 numerical or clustering failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
import time
from pathlib import Path

import numpy as np

from .baseline import kmeans_baseline
from .cluster import PscConfig, run_psc
from .errors import ParseError, PscNumericalError, ValidationError
from .metrics import accuracy, ari
from .selection import select_k
from .synth import SCENARIOS, ScenarioSpec, generate

log = logging.getLogger("psc")

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL = 0, 2, 3


def _is_number(cell: str) -> bool:
    try:
        float(cell)
    except ValueError:
        return False
    return True


def ingest_csv(path):
    """Read a numeric CSV into ``(data, labels)``.

    A first row with no numeric cell is taken as a header. If the header's
    last column is named ``label`` that column is returned separately as
    integer labels, otherwise ``labels`` is None. Row and column numbers in
    errors are 1-based and count the header line.
    """
    path = Path(path)
    try:
        with path.open(newline="", encoding="utf-8") as fh:
            rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    except (OSError, UnicodeDecodeError) as exc:
        raise ValidationError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise ParseError(f"{path} holds no data", row=None, column=None)

    header = None
    offset = 1
    if not any(_is_number(c) for c in rows[0]):
        header = [c.strip() for c in rows[0]]
        rows = rows[1:]
        offset = 2
    if not rows:
        raise ParseError(f"{path} has a header but no data rows", row=None, column=None)

    width = len(header) if header is not None else len(rows[0])
    values = np.empty((len(rows), width))
    for i, row in enumerate(rows):
        if len(row) != width:
            raise ParseError(
                f"{len(row)} fields, expected {width}", row=i + offset, column=None
            )
        for j, cell in enumerate(row):
            try:
                v = float(cell)
            except ValueError:
                raise ParseError(
                    f"non-numeric cell {cell.strip()!r}",
                    row=i + offset, column=j + 1,
                ) from None
            if not math.isfinite(v):
                raise ParseError(
                    "non-finite value", row=i + offset, column=j + 1
                )
            values[i, j] = v

    labels = None
    if header is not None and header[-1].lower() == "label":
        col = values[:, -1]
        if not np.all(col == np.round(col)):
            bad = int(np.flatnonzero(col != np.round(col))[0])
            raise ParseError(
                "label is not an integer", row=bad + offset, column=width
            )
        labels = col.astype(np.int64)
        values = values[:, :-1]
    if values.shape[1] == 0:
        raise ParseError(f"{path} has no variable columns", row=None, column=None)
    return values, labels


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return int(v)
    return v


def write_matrix_csv(path, matrix, header=None) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        if header is not None:
            w.writerow(header)
        rows = np.atleast_2d(matrix) if isinstance(matrix, np.ndarray) else matrix
        for row in rows:
            w.writerow([_cell(v) for v in row])


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.integer, bool, np.bool_)):
        return obj.item() if isinstance(obj, np.generic) else obj
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def write_json(path, payload) -> None:
    text = json.dumps(_jsonable(payload), indent=2, sort_keys=True, allow_nan=False)
    Path(path).write_text(text + "\n", encoding="utf-8")


def _int_list(text):
    if isinstance(text, (list, tuple)):
        return [int(v) for v in text]
    if isinstance(text, (int, float)):
        return int(text)
    parts = [p for p in str(text).split(",") if p.strip()]
    try:
        vals = [int(p) for p in parts]
    except ValueError:
        raise ValidationError(f"expected comma-separated integers, got {text!r}") from None
    return vals[0] if len(vals) == 1 else vals


def _float_list(text):
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    if isinstance(text, (int, float)):
        return float(text)
    parts = [p for p in str(text).split(",") if p.strip()]
    try:
        vals = [float(p) for p in parts]
    except ValueError:
        raise ValidationError(f"expected comma-separated numbers, got {text!r}") from None
    return vals[0] if len(vals) == 1 else vals


# key -> (default, converter); flags and config-file keys share these names
SETTINGS = {
    "input": (None, str),
    "out": (None, str),
    "k": (None, int),
    "ranks": (None, _int_list),
    "gamma": (None, _float_list),
    "nonzeros": (None, _int_list),
    "restarts": (10, int),
    "seed": (None, int),
    "max_iter": (100, int),
    "tol": (None, float),
    "k_max": (None, int),
    "r_max": (None, int),
    "scenario": (None, str),
    "noise_sd": (None, float),
    "points_per_cluster": (100, int),
    "p": (None, int),
    "coord_range": (None, float),
    "reps": (None, int),
    "kmeans_restarts": (10, int),
}


def resolve_settings(args: argparse.Namespace) -> dict:
    """Defaults, then the JSON config file, then explicit flags."""
    merged = {key: default for key, (default, _) in SETTINGS.items()}
    if getattr(args, "config", None):
        try:
            loaded = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ValidationError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(loaded, dict):
            raise ValidationError("config file must hold a JSON object")
        unknown = sorted(set(loaded) - set(SETTINGS))
        if unknown:
            raise ValidationError(f"unknown config keys: {', '.join(unknown)}")
        merged.update(loaded)
    for key in SETTINGS:
        value = getattr(args, key, None)
        if value is not None:
            merged[key] = value
    for key, (_, convert) in SETTINGS.items():
        if merged[key] is not None:
            try:
                merged[key] = convert(merged[key])
            except (TypeError, ValueError) as exc:
                raise ValidationError(f"bad value for {key}: {merged[key]!r}") from exc
    return merged


def _require(settings, *keys):
    missing = [k for k in keys if settings[k] is None]
    if missing:
        raise ValidationError("missing required setting(s): " + ", ".join("--" + k.replace("_", "-") for k in missing))


def _psc_config(s, k) -> PscConfig:
    gammas = s["gamma"]
    if gammas is not None and np.all(np.asarray(gammas) == 0):
        gammas = None
    return PscConfig(
        k=k,
        ranks=s["ranks"] if s["ranks"] is not None else 1,
        gammas=gammas,
        nonzeros=s["nonzeros"],
        tol=s["tol"],
        max_iter=s["max_iter"],
        restarts=s["restarts"],
        seed=s["seed"] if s["seed"] is not None else 0,
        r_max=s.get("r_max_fit"),
    )


def _out_dir(s) -> Path:
    _require(s, "out")
    out = Path(s["out"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def _spec(s) -> ScenarioSpec:
    return ScenarioSpec(
        scenario=s["scenario"],
        points_per_cluster=s["points_per_cluster"],
        p=s["p"],
        noise_sd=s["noise_sd"],
        nonzeros=s["nonzeros"] if isinstance(s["nonzeros"], int) else 10,
        seed=s["seed"],
        coord_range=s["coord_range"],
    )


def cmd_fit(s) -> dict:
    _require(s, "input", "k")
    out = _out_dir(s)
    X, truth = ingest_csv(s["input"])
    config = _psc_config(s, s["k"])
    start = time.perf_counter()
    res = run_psc(X, config)
    seconds = time.perf_counter() - start

    report = {
        "command": "fit",
        "config": {k: s[k] for k in ("input", "k", "ranks", "gamma", "nonzeros", "restarts",
                                     "seed", "max_iter", "tol")},
        "n": X.shape[0],
        "p": X.shape[1],
        "labels": res.labels,
        "cluster_sizes": res.partition.sizes,
        "ranks": res.ranks,
        "objective": res.objective,
        "objective_trace": res.objective_trace,
        "press_trace": res.press_trace,
        "assignment_trace": res.assignment_trace,
        "iterations": res.iterations,
        "converged": res.converged,
        "restart_index": res.restart_index,
        "repairs": res.repairs,
        "selected_variables": [[idx.tolist() for idx in m.support()] for m in res.models],
        "loadings": [m.loadings for m in res.models],
        "means": [m.mean for m in res.models],
    }
    if truth is not None:
        report["metrics"] = {"accuracy": accuracy(truth, res.labels), "ari": ari(truth, res.labels)}

    write_json(out / "report.json", report)
    write_json(out / "timing.json", {"fit_seconds": seconds})
    write_matrix_csv(out / "labels.csv", [[i, int(l)] for i, l in enumerate(res.labels, start=1)],
                     ["observation", "label"])
    for c, m in enumerate(res.models, start=1):
        write_matrix_csv(out / f"loadings_{c}.csv", m.loadings,
                         [f"component_{r}" for r in range(1, m.rank + 1)])
    iters = len(res.objective_trace)
    write_matrix_csv(out / "curves.csv",
                     [[t, res.objective_trace[t], res.press_trace[t]] for t in range(iters)],
                     ["iteration", "objective", "press"])
    log.info("fit: objective %.6g after %d iterations (%.2fs)", res.objective, res.iterations, seconds)
    return report


def cmd_select(s) -> dict:
    _require(s, "input", "k_max")
    if s["k_max"] < 3:
        raise ValidationError("k-max must be at least 3 so both criteria can be evaluated")
    out = _out_dir(s)
    X, _ = ingest_csv(s["input"])
    base = _psc_config(dict(s, r_max_fit=s["r_max"]), 1)
    start = time.perf_counter()
    sel = select_k(X, s["k_max"], base)
    seconds = time.perf_counter() - start

    report = {
        "command": "select",
        "config": {k: s[k] for k in ("input", "k_max", "r_max", "ranks", "gamma", "nonzeros",
                                     "restarts", "seed", "max_iter", "tol")},
        "candidate_ks": sel.candidate_ks,
        "press_by_k": sel.press_by_k,
        "wk_by_k": sel.wk_by_k,
        "sod_by_k": sel.sod_by_k,
        "chosen_k_press": sel.chosen_k_press,
        "chosen_k_sod": sel.chosen_k_sod,
        "ranks_by_cluster": sel.ranks_by_cluster,
        "skipped": sel.skipped,
    }
    write_json(out / "report.json", report)
    write_json(out / "timing.json", {"select_seconds": seconds})
    write_matrix_csv(out / "curves.csv",
                     [[k, p, w, sd] for k, p, w, sd in
                      zip(sel.candidate_ks, sel.press_by_k, sel.wk_by_k, sel.sod_by_k)],
                     ["k", "press", "wk", "sod"])
    log.info("select: PRESS picks K=%s, SOD picks K=%s", sel.chosen_k_press, sel.chosen_k_sod)
    return report


def cmd_simulate(s) -> dict:
    _require(s, "scenario", "seed", "out")
    ds = generate(_spec(s))
    p = ds.data.shape[1]
    out = Path(s["out"])
    if out.parent != Path(""):
        out.parent.mkdir(parents=True, exist_ok=True)
    rows = [x.tolist() + [int(l)] for x, l in zip(ds.data, ds.labels)]
    write_matrix_csv(out, rows, [f"x{j}" for j in range(1, p + 1)] + ["label"])
    log.info("simulate: wrote %d x %d scenario %s to %s", *ds.data.shape, s["scenario"], out)
    return {"command": "simulate", "n": ds.data.shape[0], "p": p, "k": ds.k}


def _summary(values):
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        return None, None
    sd = float(v.std(ddof=1)) if v.size > 1 else None
    return float(v.mean()), sd


def cmd_bench(s) -> dict:
    _require(s, "scenario", "seed", "reps")
    if s["reps"] < 1:
        raise ValidationError("reps must be at least 1")
    out = _out_dir(s)
    scores = {"psc": [], "kmeans": []}
    failures = {"psc": [], "kmeans": []}
    per_rep = []
    start = time.perf_counter()
    for rep in range(s["reps"]):
        seed = s["seed"] + rep
        ds = generate(_spec(dict(s, seed=seed)))
        ranks = s["ranks"] if s["ranks"] is not None else ds.spec.ranks
        nonzeros = s["nonzeros"] if ds.spec.is_sparse else None
        row = {"rep": rep, "seed": seed}
        try:
            cfg = _psc_config(dict(s, ranks=ranks, nonzeros=nonzeros, seed=seed), ds.k)
            res = run_psc(ds.data, cfg)
            scores["psc"].append((accuracy(ds.labels, res.labels), ari(ds.labels, res.labels)))
            row["psc_accuracy"], row["psc_ari"] = scores["psc"][-1]
        except (PscNumericalError, ValidationError) as exc:
            failures["psc"].append({"rep": rep, "error": str(exc)})
        try:
            part, _ = kmeans_baseline(ds.data, ds.k, restarts=s["kmeans_restarts"], seed=seed)
            scores["kmeans"].append((accuracy(ds.labels, part.labels), ari(ds.labels, part.labels)))
            row["kmeans_accuracy"], row["kmeans_ari"] = scores["kmeans"][-1]
        except (PscNumericalError, ValidationError) as exc:
            failures["kmeans"].append({"rep": rep, "error": str(exc)})
        per_rep.append(row)
    seconds = time.perf_counter() - start
    if not scores["psc"] and not scores["kmeans"]:
        raise PscNumericalError("every replication failed for every method")

    table = []
    for method in ("psc", "kmeans"):
        acc_mean, acc_sd = _summary([a for a, _ in scores[method]])
        ari_mean, ari_sd = _summary([r for _, r in scores[method]])
        table.append({
            "method": method,
            "accuracy_mean": acc_mean,
            "accuracy_sd": acc_sd,
            "ari_mean": ari_mean,
            "ari_sd": ari_sd,
            "completed": len(scores[method]),
            "failures": failures[method],
        })
    report = {
        "command": "bench",
        "config": {k: s[k] for k in ("scenario", "reps", "seed", "ranks", "gamma", "nonzeros", "restarts",
                                     "max_iter", "noise_sd", "points_per_cluster", "p", "coord_range",
                                     "kmeans_restarts")},
        "table": table,
    }
    write_json(out / "report.json", report)
    write_json(out / "timing.json", {"bench_seconds": seconds})
    cols = ["rep", "seed", "psc_accuracy", "psc_ari", "kmeans_accuracy", "kmeans_ari"]
    write_matrix_csv(out / "reps.csv", [[r.get(c, "") for c in cols] for r in per_rep], cols)
    write_matrix_csv(out / "table.csv",
                     [[t["method"], t["accuracy_mean"], t["accuracy_sd"], t["ari_mean"], t["ari_sd"]]
                      for t in table],
                     ["method", "accuracy_mean", "accuracy_sd", "ari_mean", "ari_sd"])
    for t in table:
        log.info("bench %s: accuracy %s (%s), ARI %s (%s)", t["method"], t["accuracy_mean"],
                 t["accuracy_sd"], t["ari_mean"], t["ari_sd"])
    return report


COMMANDS = {"fit": cmd_fit, "select": cmd_select, "simulate": cmd_simulate, "bench": cmd_bench}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="psc", description="Predictive subspace clustering.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON file of settings; flags override it")
        p.add_argument("--seed", type=int)
        p.add_argument("--out")

    def clustering(p):
        p.add_argument("--ranks", help="subspace dimension, one value or one per cluster")
        p.add_argument("--gamma", help="soft-threshold level, one value or one per cluster")
        p.add_argument("--nonzeros", help="target nonzeros per loading, instead of --gamma")
        p.add_argument("--restarts", type=int)
        p.add_argument("--max-iter", type=int)
        p.add_argument("--tol", type=float)

    def scenario(p):
        p.add_argument("--scenario", choices=SCENARIOS)
        p.add_argument("--noise-sd", type=float)
        p.add_argument("--points-per-cluster", type=int)
        p.add_argument("--p", type=int, help="ambient dimension")
        p.add_argument("--coord-range", type=float)

    fit = sub.add_parser("fit", help="cluster a CSV file")
    common(fit)
    clustering(fit)
    fit.add_argument("--input")
    fit.add_argument("--k", type=int)

    select = sub.add_parser("select", help="choose K (and optionally ranks) for a CSV file")
    common(select)
    clustering(select)
    select.add_argument("--input")
    select.add_argument("--k-max", type=int)
    select.add_argument("--r-max", type=int)

    simulate = sub.add_parser("simulate", help="write a synthetic scenario to CSV")
    common(simulate)
    scenario(simulate)
    simulate.add_argument("--nonzeros", type=int)

    bench = sub.add_parser("bench", help="Monte Carlo comparison of PSC and K-means")
    common(bench)
    clustering(bench)
    scenario(bench)
    bench.add_argument("--reps", type=int)
    bench.add_argument("--kmeans-restarts", type=int)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        settings = resolve_settings(args)
        COMMANDS[args.command](settings)
    except ValidationError as exc:
        print(f"psc {args.command}: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except PscNumericalError as exc:
        print(f"psc {args.command}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"psc {args.command}: {exc}", file=sys.stderr)
        return EXIT_INVALID
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
