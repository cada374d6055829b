"""Command-line interface: score, rank, and simulate subcommands.

Exit codes: 0 success, 2 input/validation problems (single-line reason on
stderr), 1 internal errors.  Output files are written atomically (temp file
plus rename) and are byte-identical across repeat runs of the same config;
the run manifest (which records wall time) goes to a sibling
``<out>.manifest.json`` and is excluded from that determinism contract.
"""

from __future__ import annotations

import argparse
import json
import os
import platform
import sys
import time

import numpy as np
import scipy

from . import __version__
from .data import DataError, load_csv, load_groups
from .estimators import score_all, score_groups
from .influence import infer_scores
from .nuisance import BasisConfig
from .ranking import rank, select_by_test, select_top_k
from .simulation import SimScenario, run_replicates, uniform_closed_form_phi

__all__ = ["main", "build_parser"]

SCHEMA_VERSION = 1
CSV_COLUMNS = (
    "id",
    "name",
    "theta",
    "phi",
    "psi",
    "se_phi",
    "ci_lo",
    "ci_hi",
    "p_value",
    "rank",
    "selected",
)

_ESTIMATOR_FLAG = {"plugin-om": "plugin_om", "plugin-ps": "plugin_ps", "dr": "dr", "tmle": "tmle"}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="confscreen",
        description="Rank and select confounders by difference/ratio confounding scores.",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def add_common(p, needs_data: bool):
        if needs_data:
            p.add_argument("--data", required=True, help="input CSV with header row")
            p.add_argument("--outcome", required=True, help="outcome column name")
            p.add_argument("--exposure", required=True, help="binary exposure column name")
            p.add_argument("--groups", default=None, help="JSON file of name -> column list")
            p.add_argument(
                "--saturated",
                action="store_true",
                help="use exact per-level fits for discrete covariates",
            )
        p.add_argument(
            "--estimator",
            choices=sorted(_ESTIMATOR_FLAG),
            default="tmle",
        )
        p.add_argument("--score", choices=("difference", "ratio"), default="difference")
        p.add_argument("--degree", type=int, default=3, help="polynomial basis degree")
        p.add_argument(
            "--alpha",
            type=float,
            default=0.10,
            help="test level; confidence intervals are at 1 - alpha (default 90%%)",
        )
        p.add_argument("--top-k", type=int, default=None, help="select the top K ranks instead of testing")
        p.add_argument("--outcome-kind", choices=("continuous", "bounded"), default="continuous")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--threads", type=int, default=None)
        p.add_argument("--out", required=True, help="output file path")
        p.add_argument("--format", choices=("json", "csv"), default="json")

    add_common(sub.add_parser("score", help="estimate scores for every covariate"), True)
    add_common(sub.add_parser("rank", help="rank covariates and select a subset"), True)
    p_sim = sub.add_parser("simulate", help="run a synthetic-design experiment")
    p_sim.add_argument("--scenario", required=True, help="JSON scenario file")
    add_common(p_sim, False)
    return parser


def _resolved_config(args) -> dict:
    """Resolved config echoed into every report.

    The thread count is an execution detail that must not affect report
    bytes (thread-count invariance); it is recorded in the manifest only.
    """
    return {k: v for k, v in sorted(vars(args).items()) if k != "threads"}


def _atomic_write(path: str, text: str) -> None:
    tmp = f"{path}.tmp.{os.getpid()}"
    with open(tmp, "w", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _write_manifest(out_path: str, config: dict, wall_time: float, threads=None) -> None:
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "config": {**config, "threads": threads},
        "versions": {
            "confscreen": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
        },
        "seed": config.get("seed"),
        "wall_time_seconds": wall_time,
    }
    _atomic_write(f"{out_path}.manifest.json", json.dumps(manifest, indent=2) + "\n")


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _rows_to_csv(rows: list[dict]) -> str:
    lines = [",".join(CSV_COLUMNS)]
    for row in rows:
        lines.append(",".join(_fmt(row.get(col)) for col in CSV_COLUMNS))
    return "\n".join(lines) + "\n"


def _emit_results(args, config: dict, rows: list[dict], extra: dict | None = None) -> None:
    if args.format == "csv":
        _atomic_write(args.out, _rows_to_csv(rows))
    else:
        doc = {"schema_version": SCHEMA_VERSION, "config": config, "results": rows}
        if extra:
            doc.update(extra)
        _atomic_write(args.out, json.dumps(doc, indent=2) + "\n")


def _estimate_rows(estimates, inferences, names) -> list[dict]:
    rows = []
    for est, inf, name in zip(estimates, inferences, names):
        rows.append(
            {
                "id": est.covariate_id if not isinstance(est.covariate_id, tuple) else list(est.covariate_id),
                "name": name,
                "theta": est.theta_hat,
                "phi": est.phi_hat,
                "psi": est.psi_hat,
                "se_phi": inf.se_phi if inf else None,
                "ci_lo": inf.ci_phi[0] if inf else None,
                "ci_hi": inf.ci_phi[1] if inf else None,
                "p_value": inf.p_phi if inf else None,
                "rank": None,
                "selected": None,
                "warnings": list(est.diagnostics.get("warnings", [])),
            }
        )
    return rows


def _load_inputs(args):
    dataset = load_csv(args.data, args.outcome, args.exposure, args.outcome_kind)
    basis = BasisConfig(degree=args.degree)
    estimator_kind = _ESTIMATOR_FLAG[args.estimator]
    return dataset, basis, estimator_kind


def _inferences_for(estimates, estimator_kind, alpha):
    if estimator_kind in ("dr", "tmle"):
        return [infer_scores(est, alpha) for est in estimates]
    return [None] * len(estimates)


def cmd_score(args) -> int:
    config = _resolved_config(args)
    start = time.monotonic()
    dataset, basis, estimator_kind = _load_inputs(args)
    if args.groups:
        spec = load_groups(args.groups, dataset)
        members = spec.member_indices(dataset)
        estimates = score_groups(dataset, members, estimator_kind, basis, threads=args.threads)
        names = [name for name, _ in members]
    else:
        estimates = score_all(
            dataset, estimator_kind, basis, threads=args.threads, saturated=args.saturated
        )
        names = list(dataset.column_names)
    inferences = _inferences_for(estimates, estimator_kind, args.alpha)
    rows = _estimate_rows(estimates, inferences, names)
    _emit_results(args, config, rows)
    _write_manifest(args.out, config, time.monotonic() - start, args.threads)
    return 0


def cmd_rank(args) -> int:
    config = _resolved_config(args)
    start = time.monotonic()
    dataset, basis, estimator_kind = _load_inputs(args)
    if args.groups:
        spec = load_groups(args.groups, dataset)
        members = spec.member_indices(dataset)
        estimates = score_groups(dataset, members, estimator_kind, basis, threads=args.threads)
        names = [name for name, _ in members]
    else:
        estimates = score_all(
            dataset, estimator_kind, basis, threads=args.threads, saturated=args.saturated
        )
        names = list(dataset.column_names)
    inferences = _inferences_for(estimates, estimator_kind, args.alpha)
    has_inference = inferences[0] is not None
    report = rank(estimates, args.score, names=names, inferences=inferences if has_inference else None)
    if args.top_k is not None:
        report = select_top_k(report, args.top_k)
    else:
        report = select_by_test(report, args.alpha)

    by_name = {name: (est, inf) for name, est, inf in zip(names, estimates, inferences)}
    rows = []
    for row in report.rows:
        est, inf = by_name[row.name]
        rows.append(
            {
                "id": row.id if not isinstance(row.id, tuple) else list(row.id),
                "name": row.name,
                "theta": est.theta_hat,
                "phi": est.phi_hat,
                "psi": est.psi_hat,
                "se_phi": inf.se_phi if inf else None,
                "ci_lo": inf.ci_phi[0] if inf else None,
                "ci_hi": inf.ci_phi[1] if inf else None,
                "p_value": row.p_value,
                "rank": row.rank,
                "selected": bool(row.selected),
                "flags": list(row.flags),
            }
        )
    _emit_results(args, config, rows, extra={"selection_rule": list(report.selection_rule)})
    _write_manifest(args.out, config, time.monotonic() - start, args.threads)
    return 0


def _load_scenario(path: str, seed_override) -> SimScenario:
    with open(path) as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}: invalid scenario file: {exc}") from None
    if not isinstance(raw, dict) or "kind" not in raw:
        raise DataError(f"{path}: scenario file must be a JSON object with a 'kind' field")
    allowed = {"kind", "n", "p", "rho", "theta", "seed", "replicates", "alphas", "betas", "beta0"}
    unknown = set(raw) - allowed
    if unknown:
        raise DataError(f"{path}: unknown scenario fields {sorted(unknown)}")
    if seed_override is not None:
        raw["seed"] = seed_override
    for key in ("alphas", "betas"):
        if key in raw and raw[key] is not None:
            raw[key] = tuple(float(v) for v in raw[key])
    return SimScenario(**raw)


def cmd_simulate(args) -> int:
    config = _resolved_config(args)
    start = time.monotonic()
    scenario = _load_scenario(args.scenario, args.seed)
    estimator_kind = _ESTIMATOR_FLAG[args.estimator]
    basis = BasisConfig(degree=args.degree)
    rule = ("top_k", args.top_k) if args.top_k is not None else ("alpha_test", args.alpha)
    if rule[0] == "alpha_test" and estimator_kind not in ("dr", "tmle"):
        raise DataError("alpha-test selection needs --estimator dr or tmle; pass --top-k instead")
    result = run_replicates(
        scenario,
        estimator_kind=estimator_kind,
        basis=basis,
        score_kind=args.score,
        rule=rule,
        alpha=args.alpha,
        threads=args.threads,
    )
    aggregates = dict(result.aggregates)
    if scenario.kind == "uniform_closed_form":
        aggregates["oracle_phi"] = [uniform_closed_form_phi(scenario, j) for j in range(scenario.p)]

    per_replicate = [
        {
            "replicate": r,
            "sensitivity": float(result.sensitivity[r]),
            "specificity": float(result.specificity[r]),
        }
        for r in range(scenario.replicates)
    ]
    roc = [[float(x), float(y)] for x, y in result.roc_mean]

    if args.format == "csv":
        lines = ["replicate,sensitivity,specificity"]
        for row in per_replicate:
            lines.append(f"{row['replicate']},{row['sensitivity']!r},{row['specificity']!r}")
        _atomic_write(args.out, "\n".join(lines) + "\n")
        roc_lines = ["k,sensitivity,false_positive_rate"]
        for k, (sens, fpr) in enumerate(roc):
            roc_lines.append(f"{k},{sens!r},{fpr!r}")
        _atomic_write(f"{args.out}.roc.csv", "\n".join(roc_lines) + "\n")
        _atomic_write(
            f"{args.out}.summary.json",
            json.dumps({"schema_version": SCHEMA_VERSION, "config": config, "aggregates": aggregates}, indent=2)
            + "\n",
        )
    else:
        doc = {
            "schema_version": SCHEMA_VERSION,
            "config": config,
            "scenario": {k: (list(v) if isinstance(v, tuple) else v) for k, v in vars(scenario).items()},
            "per_replicate": per_replicate,
            "aggregates": aggregates,
            "roc": roc,
        }
        _atomic_write(args.out, json.dumps(doc, indent=2) + "\n")
    _write_manifest(args.out, config, time.monotonic() - start, args.threads)
    return 0


_COMMANDS = {"score": cmd_score, "rank": cmd_rank, "simulate": cmd_simulate}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.subcommand](args)
    except (DataError, OSError) as exc:
        msg = str(exc).replace("\n", " ")
        print(f"error: {msg}", file=sys.stderr)
        return 2
    except Exception as exc:  # pragma: no cover - defensive
        msg = str(exc).replace("\n", " ")
        print(f"internal-error: {type(exc).__name__}: {msg}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
