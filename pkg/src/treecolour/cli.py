"""Command-line front end.

Every subcommand resolves its configuration (flags first, then an optional
key=value config file, then built-in defaults), runs with per-trial RNG
streams derived from the seed, and writes CSV or JSON output atomically.
Outputs are byte-identical for a fixed (config, seed) whatever the worker
count.
"""
from __future__ import annotations

import argparse
import json
import os
import random
import sys
import tempfile
from fractions import Fraction
from typing import Optional

from .coupling import couple_tree_improved, naive_couple_tree
from .estimators import (
    BoundParams,
    estimate_branching,
    estimate_event_A,
    estimate_level_disagreements,
    estimate_list_statistics,
    estimate_tv_upper,
    gof_both_marginals,
)
from .oracle import (
    DEFAULT_BUDGET,
    EnumerationBudgetError,
    ListConstraints,
    conditional_list_measure,
    enumerate_measure,
    tv_distance_leaves,
)
from .tree_model import TreeShape, level_of, vertex_count
from .walks import absorbed_walk_dp, conditional_positive_mean, first_passage_prob, s_matrix_run

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_BUDGET = 3

SEED_NOTE = ("Trial i uses random.Random(splitmix64(seed + golden64*(i+1))) "
             "where golden64 = 0x9E3779B97F4A7C15; sharding across threads "
             "never changes the streams.")


class ConfigError(Exception):
    """Invalid configuration; the message names the offending field."""


def _fmt_float(x: float) -> str:
    return f"{x:.17g}"


def _fmt_frac(x: Fraction) -> str:
    return f"{x.numerator}/{x.denominator}"


def _csv(header: list[str], rows: list[list[str]]) -> str:
    lines = [",".join(header)]
    lines.extend(",".join(row) for row in rows)
    return "\n".join(lines) + "\n"


def _write(text: str, out: Optional[str], summary: str) -> None:
    if out is None:
        sys.stdout.write(text)
        return
    directory = os.path.dirname(os.path.abspath(out))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-treecolour-")
    try:
        with os.fdopen(fd, "w") as handle:
            handle.write(text)
        os.replace(tmp, out)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    print(f"{summary} -> {out}")


def _json_out(config: dict, payload: dict) -> str:
    return json.dumps({"config": config, **payload}, indent=2,
                      sort_keys=True) + "\n"


def _require(config: dict, field: str, minimum: Optional[int] = None) -> int:
    value = config.get(field)
    if value is None:
        raise ConfigError(f"missing required field: {field}")
    if minimum is not None and value < minimum:
        raise ConfigError(f"field {field} must be >= {minimum}, got {value}")
    return value


def _check_colour(config: dict, field: str, k: int) -> int:
    value = _require(config, field)
    if not 1 <= value <= k:
        raise ConfigError(f"field {field} must be a colour in 1..{k}, "
                          f"got {value}")
    return value


_FIELD_TYPES = {
    "d": int, "k": int, "height": int, "c": int, "q": int, "trials": int,
    "seed": int, "threads": int, "budget": int, "imax": int, "cap": int,
    "columns": int, "exclude_parent": int, "epsilon": float,
}


def _resolve(args: argparse.Namespace, defaults: dict) -> dict:
    """Merge flags over config-file values over defaults."""
    from_file: dict = {}
    if getattr(args, "config", None):
        try:
            with open(args.config) as handle:
                for line in handle:
                    line = line.split("#", 1)[0].strip()
                    if not line:
                        continue
                    if "=" not in line:
                        raise ConfigError(
                            f"config file line not key=value: {line!r}")
                    key, raw = (part.strip() for part in line.split("=", 1))
                    from_file[key.replace("-", "_")] = raw
        except OSError as exc:
            raise ConfigError(f"config file unreadable: {exc}") from exc
    resolved = dict(defaults)
    for key, raw in from_file.items():
        if key not in defaults:
            raise ConfigError(f"unknown config file field: {key}")
        kind = _FIELD_TYPES.get(key, str)
        try:
            resolved[key] = kind(raw)
        except ValueError as exc:
            raise ConfigError(f"bad value for field {key}: {raw!r}") from exc
    for key in defaults:
        flag = getattr(args, key, None)
        if flag is not None:
            resolved[key] = flag
    return resolved


def _common_checks(config: dict) -> None:
    _require(config, "seed", 0)
    _require(config, "threads", 1)
    if config.get("format") not in ("csv", "json"):
        raise ConfigError(f"field format must be csv or json, "
                          f"got {config.get('format')!r}")
    if config.get("coupling") not in (None, "naive", "improved"):
        raise ConfigError(f"field coupling must be naive or improved, "
                          f"got {config.get('coupling')!r}")


def _bound_params(config: dict, d: int, k: int) -> Optional[BoundParams]:
    eps = config.get("epsilon")
    if eps is None:
        import math
        eps = k * math.log(d) / d - 1.0 if d > 1 else None
    if eps is None or eps <= 0:
        return None
    return BoundParams(eps, "ratio")


def cmd_broadcast(config: dict) -> int:
    from .broadcast import sample_broadcast
    d = _require(config, "d", 1)
    k = _require(config, "k", 2)
    h = _require(config, "height", 0)
    c = _check_colour(config, "c", k)
    shape = TreeShape(d, h)
    trials = _require(config, "trials", 1)
    rows = []
    runs = []
    for trial in range(trials):
        rng = _trial_stream(config["seed"], trial)
        col = sample_broadcast(shape, k, c, rng)
        runs.append([int(v) for v in col.colours])
        for v in range(vertex_count(shape)):
            rows.append([str(trial), str(v), str(level_of(shape, v)),
                         str(int(col.colours[v]))])
    if config["format"] == "csv":
        text = _csv(["trial", "vertex", "level", "colour"], rows)
    else:
        text = _json_out(config, {"colourings": runs})
    _write(text, config.get("out"),
           f"broadcast: {trials} colouring(s) of {vertex_count(shape)} vertices")
    return EXIT_OK


def cmd_couple(config: dict) -> int:
    d = _require(config, "d", 1)
    k = _require(config, "k", 2)
    h = _require(config, "height", 0)
    c = _check_colour(config, "c", k)
    q = _check_colour(config, "q", k)
    shape = TreeShape(d, h)
    coupling = config["coupling"]
    rng = _trial_stream(config["seed"], 0)
    if coupling == "naive":
        if c == q:
            raise ConfigError("field q: the naive coupling needs c != q")
        x, y, records = naive_couple_tree(shape, k, c, q, rng)
    else:
        x, y, records = couple_tree_improved(shape, k, c, q, rng)
    flat = {rec.vertex: rec for level in records for rec in level}
    rows = []
    for v in range(vertex_count(shape)):
        rec = flat.get(v)
        rows.append([
            str(v), str(level_of(shape, v)),
            str(int(x.colours[v])), str(int(y.colours[v])),
            rec.source if rec else "",
            ("1" if rec.residual else "0") if rec else "",
        ])
    if config["format"] == "csv":
        text = _csv(["vertex", "level", "x_colour", "y_colour",
                     "source", "residual"], rows)
    else:
        text = _json_out(config, {
            "x": [int(v) for v in x.colours],
            "y": [int(v) for v in y.colours],
            "records": [
                {"vertex": r.vertex, "level": r.level, "source": r.source,
                 "x_colour": r.x_colour, "y_colour": r.y_colour,
                 "residual": r.residual}
                for level in records for r in level
            ],
        })
    n_dis = sum(len(level) for level in records)
    _write(text, config.get("out"),
           f"couple: {coupling} run with {n_dis} disagreement(s)")
    return EXIT_OK


def cmd_decay(config: dict) -> int:
    d = _require(config, "d", 1)
    k = _require(config, "k", 3)
    h = _require(config, "height", 1)
    c = _check_colour(config, "c", k)
    q = _check_colour(config, "q", k)
    trials = _require(config, "trials", 2)
    shape = TreeShape(d, h)
    reports = estimate_level_disagreements(
        shape, k, c, q, config["coupling"], trials, config["seed"],
        config["threads"], _bound_params(config, d, k))
    eps = _bound_params(config, d, k)
    rows = []
    for rep in reports:
        lvl = rep.extra["level"]
        if eps is not None:
            b1 = BoundParams(eps.epsilon, "ratio").level_bound(d, lvl)
            b2 = BoundParams(eps.epsilon, "shift").level_bound(d, lvl)
            bounds = [_fmt_float(b1), _fmt_float(b2)]
        else:
            bounds = ["", ""]
        rows.append([str(lvl), _fmt_float(rep.mean), _fmt_float(rep.stderr)]
                    + bounds)
    if config["format"] == "csv":
        text = _csv(["level", "mean", "stderr", "bound_v1", "bound_v2"], rows)
    else:
        text = _json_out(config, {"levels": [
            {"level": int(row[0]), "mean": float(row[1]),
             "stderr": float(row[2]),
             "bound_v1": float(row[3]) if row[3] else None,
             "bound_v2": float(row[4]) if row[4] else None}
            for row in rows]})
    _write(text, config.get("out"), f"decay: {h} level(s), {trials} trial(s)")
    return EXIT_OK


def cmd_branching(config: dict) -> int:
    d = _require(config, "d", 1)
    k = _require(config, "k", 3)
    c = _check_colour(config, "c", k)
    q = _check_colour(config, "q", k)
    if c == q:
        raise ConfigError("field q: branching needs a disagreeing pair")
    trials = _require(config, "trials", 2)
    rep = estimate_branching(d, k, c, q, trials, config["seed"],
                             config["threads"], config["coupling"])
    naive_sq = (d / (k - 1)) ** 2
    sources = rep.extra.get("source_means", {})
    row = [[config["coupling"], _fmt_float(rep.mean), _fmt_float(rep.stderr),
            _fmt_float(naive_sq),
            _fmt_float(sources.get("non-rescuable-bad", float("nan"))),
            _fmt_float(sources.get("unmatched-rescuable", float("nan"))),
            _fmt_float(sources.get("unmatched-fail", float("nan")))]]
    if config["format"] == "csv":
        text = _csv(["coupling", "mean", "stderr", "naive_two_level",
                     "src_non_rescuable_bad", "src_unmatched_rescuable",
                     "src_unmatched_fail"], row)
    else:
        text = _json_out(config, {
            "mean": rep.mean, "stderr": rep.stderr,
            "naive_two_level": naive_sq, "source_means": sources})
    _write(text, config.get("out"),
           f"branching: mean {rep.mean:.6g} +- {rep.stderr:.2g}")
    return EXIT_OK


def cmd_stats(config: dict) -> int:
    d = _require(config, "d", 1)
    k = _require(config, "k", 4)
    c = _check_colour(config, "c", k)
    q = _check_colour(config, "q", k)
    trials = _require(config, "trials", 2)
    reports = estimate_list_statistics(
        d, k, c, q, trials, config["seed"], config["threads"],
        _bound_params(config, d, k))
    rows = []
    for key, rep in reports.items():
        for bound in rep.bounds or [None]:
            rows.append([
                key, rep.quantity, str(rep.trials), _fmt_float(rep.mean),
                _fmt_float(rep.stderr),
                bound.label if bound else "",
                _fmt_float(bound.value) if bound and bound.value is not None else "",
                bound.verdict if bound else "",
            ])
    if config["format"] == "csv":
        text = _csv(["key", "quantity", "trials", "mean", "stderr",
                     "bound_label", "bound_value", "verdict"], rows)
    else:
        text = _json_out(config, {"statistics": {
            key: {"quantity": rep.quantity, "trials": rep.trials,
                  "mean": rep.mean, "stderr": rep.stderr,
                  "bounds": [{"label": b.label, "value": b.value,
                              "verdict": b.verdict} for b in rep.bounds],
                  "extra": {kk: vv for kk, vv in rep.extra.items()
                            if isinstance(vv, (int, float, str, bool))}}
            for key, rep in reports.items()}})
    _write(text, config.get("out"), f"stats: {len(reports)} quantities")
    return EXIT_OK


def cmd_event_a(config: dict) -> int:
    d = _require(config, "d", 2)
    k = _require(config, "k", 4)
    trials = _require(config, "trials", 2)
    eps = config.get("epsilon")
    params = BoundParams(eps, "ratio") if eps is not None else None
    reports = estimate_event_A(d, k, trials, config["seed"],
                               config["threads"], params)
    rows = []
    for key in ("E1", "E2", "E3", "union"):
        rep = reports[key]
        wilson = rep.extra.get("wilson")
        rows.append([key, rep.quantity, _fmt_float(rep.mean),
                     _fmt_float(rep.stderr),
                     _fmt_float(wilson[0]) if wilson else "",
                     _fmt_float(wilson[1]) if wilson else ""])
    if config["format"] == "csv":
        text = _csv(["event", "description", "frequency", "stderr",
                     "wilson_low", "wilson_high"], rows)
    else:
        text = _json_out(config, {"events": {
            key: {"frequency": reports[key].mean,
                  "stderr": reports[key].stderr,
                  "wilson": reports[key].extra.get("wilson"),
                  "epsilon": reports[key].extra["epsilon"]}
            for key in reports}})
    _write(text, config.get("out"),
           f"eventA: union frequency {reports['union'].mean:.6g}")
    return EXIT_OK


def cmd_validate(config: dict) -> int:
    d = _require(config, "d", 1)
    k = _require(config, "k", 2)
    h = _require(config, "height", 0)
    c = _check_colour(config, "c", k)
    q = _check_colour(config, "q", k)
    if c == q:
        raise ConfigError("field q: validation needs a disagreeing pair")
    trials = _require(config, "trials", 2)
    shape = TreeShape(d, h)
    results = gof_both_marginals(shape, k, c, q, config["coupling"], trials,
                                 config["seed"], config["threads"])
    rows = [[side, _fmt_float(res.statistic), str(res.dof),
             _fmt_float(res.p_value), str(res.cells), str(res.pooled),
             str(res.trials)]
            for side, res in results.items()]
    if config["format"] == "csv":
        text = _csv(["side", "statistic", "dof", "p_value", "cells",
                     "pooled", "trials"], rows)
    else:
        text = _json_out(config, {"marginals": {
            side: {"statistic": res.statistic, "dof": res.dof,
                   "p_value": res.p_value, "cells": res.cells,
                   "pooled": res.pooled}
            for side, res in results.items()}})
    _write(text, config.get("out"),
           f"validate: p(X)={results['X'].p_value:.4g} "
           f"p(Y)={results['Y'].p_value:.4g}")
    return EXIT_OK


def cmd_tvbound(config: dict) -> int:
    d = _require(config, "d", 1)
    k = _require(config, "k", 2)
    h = _require(config, "height", 0)
    c = _check_colour(config, "c", k)
    q = _check_colour(config, "q", k)
    trials = _require(config, "trials", 2)
    shape = TreeShape(d, h)
    rep = estimate_tv_upper(shape, k, c, q, config["coupling"], trials,
                            config["seed"], config["threads"])
    bound = rep.bounds[0] if rep.bounds else None
    row = [[_fmt_float(rep.mean), _fmt_float(rep.stderr),
            rep.extra.get("tv_exact", ""),
            bound.verdict if bound else ""]]
    if config["format"] == "csv":
        text = _csv(["mean", "stderr", "tv_exact", "verdict"], row)
    else:
        text = _json_out(config, {
            "mean": rep.mean, "stderr": rep.stderr,
            "tv_exact": rep.extra.get("tv_exact"),
            "verdict": bound.verdict if bound else None,
            "wilson": rep.extra.get("wilson")})
    _write(text, config.get("out"),
           f"tvbound: leaf disagreement frequency {rep.mean:.6g}")
    return EXIT_OK


def cmd_oracle(config: dict) -> int:
    sub = config["oracle_command"]
    d = _require(config, "d", 1)
    k = _require(config, "k", 2)
    if sub == "tv":
        h = _require(config, "height", 0)
        c = _check_colour(config, "c", k)
        q = _check_colour(config, "q", k)
        tv = tv_distance_leaves(TreeShape(d, h), k, c, q,
                                budget=config["budget"])
        if config["format"] == "csv":
            text = _csv(["tv", "tv_float"],
                        [[_fmt_frac(tv), _fmt_float(float(tv))]])
        else:
            text = _json_out(config, {"tv": _fmt_frac(tv),
                                      "tv_float": float(tv)})
        if config.get("out") is None:
            print(_fmt_frac(tv))
            print(_fmt_float(float(tv)))
        else:
            _write(text, config["out"], f"oracle tv: {_fmt_frac(tv)}")
        return EXIT_OK
    if sub == "measure":
        h = _require(config, "height", 0)
        c = _check_colour(config, "c", k)
        measure = enumerate_measure(TreeShape(d, h), k, c,
                                    budget=config["budget"])
        rows = [["-".join(map(str, cfg)), _fmt_frac(mass),
                 _fmt_float(float(mass))]
                for cfg, mass in zip(measure.support, measure.masses)]
        if config["format"] == "csv":
            text = _csv(["configuration", "mass", "mass_float"], rows)
        else:
            text = _json_out(config, {"measure": {
                row[0]: row[1] for row in rows}})
        _write(text, config.get("out"),
               f"oracle measure: {len(rows)} configurations")
        return EXIT_OK
    # listlaw
    exclude = config.get("exclude_parent")
    if exclude is None:
        raise ConfigError("missing required field: exclude-parent")
    constraints = ListConstraints(
        exclude_parent=exclude,
        require_present=frozenset(_parse_colours(config.get("require", ""))),
        require_absent=frozenset(_parse_colours(config.get("absent", ""))),
        unused_outside=None,
    )
    measure = conditional_list_measure(d, k, constraints,
                                       budget=config["budget"])
    rows = [["-".join(map(str, entries)), _fmt_frac(mass),
             _fmt_float(float(mass))]
            for entries, mass in zip(measure.support, measure.masses)]
    if config["format"] == "csv":
        text = _csv(["entries", "mass", "mass_float"], rows)
    else:
        text = _json_out(config, {"measure": {row[0]: row[1] for row in rows}})
    _write(text, config.get("out"), f"oracle listlaw: {len(rows)} lists")
    return EXIT_OK


def cmd_walk(config: dict) -> int:
    sub = config["walk_command"]
    if sub == "fp":
        imax = _require(config, "imax", 0)
        rows = []
        for i in range(imax + 1):
            p = first_passage_prob(i)
            rows.append([str(i), _fmt_frac(p), _fmt_float(float(p))])
        if config["format"] == "csv":
            text = _csv(["i", "probability", "probability_float"], rows)
        else:
            text = _json_out(config, {"first_passage": {
                row[0]: row[1] for row in rows}})
        _write(text, config.get("out"), f"walk fp: i = 0..{imax}")
        return EXIT_OK
    if sub == "dp":
        cap = _require(config, "cap", 1)
        dist = absorbed_walk_dp(cap)
        cond, comparison, exceeds = conditional_positive_mean(cap)
        payload = {
            "cap": cap,
            "survival": _fmt_frac(dist.survival),
            "conditional_mean": _fmt_frac(cond),
            "expected_stopped_plus_one": _fmt_frac(dist.expected_plus_one),
            "sqrt_bound_2n_over_pi": comparison,
            "conditional_mean_exceeds_bound": exceeds,
        }
        if config["format"] == "csv":
            text = _csv(list(payload), [[str(v) for v in payload.values()]])
        else:
            text = _json_out(config, payload)
        if config.get("out") is None and config["format"] == "json":
            sys.stdout.write(text)
        else:
            _write(text, config.get("out"),
                   f"walk dp: cap {cap}, E[stopped+1] = "
                   f"{payload['expected_stopped_plus_one']}")
        return EXIT_OK
    # smatrix
    n_columns = _require(config, "columns", 1)
    cap = _require(config, "cap", 1)
    rng = _trial_stream(config["seed"], 0)
    matrix, delta = s_matrix_run(n_columns, cap, rng)
    rows = [[str(idx), str(col[0]), str(col[1])]
            for idx, col in enumerate(matrix.columns)]
    if config["format"] == "csv":
        text = _csv(["column", "fail_row", "good_row"], rows)
        text += f"# delta,{delta}\n"
    else:
        text = _json_out(config, {
            "columns": [list(col) for col in matrix.columns],
            "delta": delta})
    _write(text, config.get("out"), f"walk smatrix: |delta| = {delta}")
    return EXIT_OK


def _parse_colours(raw: Optional[str]) -> list[int]:
    raw = "" if raw is None else str(raw).strip()
    if not raw:
        return []
    return [int(part) for part in raw.split(",")]


def _trial_stream(seed: int, index: int) -> random.Random:
    from .estimators import trial_rng
    return trial_rng(seed, index)


_COMMON_DEFAULTS = {
    "d": None, "k": None, "height": None, "c": 1, "q": 2,
    "coupling": "improved", "trials": 2, "seed": 0, "threads": 1,
    "format": "csv", "out": None, "epsilon": None, "budget": DEFAULT_BUDGET,
}


def _add_common(parser: argparse.ArgumentParser, **overrides) -> None:
    parser.add_argument("--config", help="key=value config file; flags win")
    parser.add_argument("--d", type=int, help="children per internal vertex")
    parser.add_argument("--k", type=int, help="palette size")
    parser.add_argument("--height", type=int, help="tree height")
    parser.add_argument("--c", type=int, help="X root colour (default 1)")
    parser.add_argument("--q", type=int, help="Y root colour (default 2)")
    parser.add_argument("--coupling", choices=("naive", "improved"),
                        help="coupling kind (default improved)")
    parser.add_argument("--trials", type=int, help="number of runs")
    parser.add_argument("--seed", type=int, help="64-bit master seed")
    parser.add_argument("--threads", type=int, help="worker count")
    parser.add_argument("--format", choices=("csv", "json"),
                        help="output format (default csv)")
    parser.add_argument("--out", help="output path (atomic write)")
    parser.add_argument("--epsilon", type=float,
                        help="decay-rate epsilon for bound columns")
    parser.add_argument("--budget", type=int,
                        help="oracle enumeration budget")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="treecolour",
        description="Coupled broadcast colourings on complete d-ary trees.",
        epilog=SEED_NOTE)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("broadcast", "couple", "decay", "branching", "stats",
                 "eventA", "validate", "tvbound"):
        _add_common(sub.add_parser(name, epilog=SEED_NOTE))
    oracle = sub.add_parser("oracle", epilog=SEED_NOTE)
    oracle_sub = oracle.add_subparsers(dest="oracle_command", required=True)
    for name in ("tv", "measure", "listlaw"):
        p = oracle_sub.add_parser(name)
        _add_common(p)
        if name == "listlaw":
            p.add_argument("--exclude-parent", type=int, dest="exclude_parent",
                           help="parent colour the entries avoid")
            p.add_argument("--require", help="comma-separated required colours")
            p.add_argument("--absent", help="comma-separated absent colours")
    walk = sub.add_parser("walk", epilog=SEED_NOTE)
    walk_sub = walk.add_subparsers(dest="walk_command", required=True)
    for name in ("fp", "dp", "smatrix"):
        p = walk_sub.add_parser(name)
        _add_common(p)
        p.add_argument("--imax", type=int, help="largest first-passage index")
        p.add_argument("--cap", type=int, help="walk length cap")
        p.add_argument("--columns", type=int, help="S-matrix column budget")
    return parser


_DISPATCH = {
    "broadcast": cmd_broadcast,
    "couple": cmd_couple,
    "decay": cmd_decay,
    "branching": cmd_branching,
    "stats": cmd_stats,
    "eventA": cmd_event_a,
    "validate": cmd_validate,
    "tvbound": cmd_tvbound,
    "oracle": cmd_oracle,
    "walk": cmd_walk,
}


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    defaults = dict(_COMMON_DEFAULTS)
    for extra_field in ("oracle_command", "walk_command", "exclude_parent",
                        "require", "absent", "imax", "cap", "columns"):
        if hasattr(args, extra_field):
            defaults.setdefault(extra_field, None)
    try:
        config = _resolve(args, defaults)
        config["command"] = args.command
        _common_checks(config)
        return _DISPATCH[args.command](config)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except EnumerationBudgetError as exc:
        print(f"error: enumeration refused: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
