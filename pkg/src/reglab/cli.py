"""Command-line interface.

Exit codes: 0 success, 2 precondition error, 3 inconclusive verdict.
"""

from __future__ import annotations

import argparse
import csv
import datetime
import hashlib
import json
import math
import os
import sys
import tempfile

import numpy as np

from . import gallery
from .core import Tolerances, value_to_json
from .errors import InconclusiveError, PreconditionError
from .families import INCONCLUSIVE, ParamGrid, refine_until
from .phi import phi_refinement
from .selfadjoint import sa_refinement

SCHEMA = 1
EXIT_OK, EXIT_PRECONDITION, EXIT_INCONCLUSIVE = 0, 2, 3


def clean(obj):
    """JSON-safe copy: numpy scalars unwrapped, nan -> null, inf -> "inf"."""
    if isinstance(obj, dict):
        return {str(k): clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return None
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    return obj


def digest(report: dict) -> str:
    body = {k: v for k, v in report.items() if k not in ("timestamp", "digest")}
    return hashlib.sha256(json.dumps(body, sort_keys=True).encode()).hexdigest()


def write_csv(path, rows, columns) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: "" if row.get(k) is None else (repr(float(row[k])) if isinstance(row[k], float) else row[k])
                             for k in columns})


def _tolerances(args) -> Tolerances:
    return Tolerances.from_env(algebraic=args.tol) if args.tol is not None else Tolerances.from_env()


def _load(args):
    if not args.family:
        raise PreconditionError("--family is required")
    try:
        with open(args.family) as fh:
            spec = json.load(fh)
    except OSError as exc:
        raise PreconditionError(f"cannot read {args.family}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise PreconditionError(f"{args.family}: invalid JSON ({exc})") from exc
    if args.seed is not None and isinstance(spec, dict) and "generator" in spec:
        spec = {**spec, "seed": args.seed}
    return gallery.family_from_json(spec), spec


def _finish(args, command, spec, results, artifacts, out) -> dict:
    report = clean({
        "schema": SCHEMA,
        "command": command,
        "spec": spec,
        "options": {"metric": getattr(args, "metric", None), "refine": getattr(args, "refine", None),
                    "tol": args.tol, "seed": args.seed, "target": getattr(args, "target", None)},
        "results": results,
        "artifacts": sorted(artifacts),
    })
    report["timestamp"] = datetime.datetime.now(datetime.timezone.utc).isoformat()
    report["digest"] = digest(report)
    if out:
        with open(os.path.join(out, "report.json"), "w") as fh:
            json.dump(report, fh, indent=2, sort_keys=True)
            fh.write("\n")
    else:
        json.dump(report, sys.stdout, indent=2, sort_keys=True)
        sys.stdout.write("\n")
    return report


def _outdir(args):
    if args.out:
        os.makedirs(args.out, exist_ok=True)
    return args.out


# ---------------------------------------------------------------------------
# commands


def cmd_analyze(args) -> int:
    F, spec = _load(args)
    report = refine_until(F, args.metric, target=args.target, max_depth=args.refine, tol=_tolerances(args))
    out = _outdir(args)
    artifacts = []
    if out:
        report.to_csv(os.path.join(out, "continuity.csv"))
        artifacts.append("continuity.csv")
    _finish(args, "analyze", spec, report.summary(), artifacts, out)
    return EXIT_INCONCLUSIVE if report.verdict == INCONCLUSIVE else EXIT_OK


PHI_COLUMNS = ["level", "points", "step", "raw_graph_modulus", "raw_riesz_modulus", "phi_riesz_modulus",
               "identity_residual"]


def cmd_phi(args) -> int:
    F, spec = _load(args)
    table, result = phi_refinement(F, args.refine, _tolerances(args))
    out = _outdir(args)
    artifacts = []
    if out:
        write_csv(os.path.join(out, "phi_moduli.csv"), table, PHI_COLUMNS)
        rows = []
        for i, x in enumerate(result.nodes):
            last = i == len(result.nodes) - 1
            rows.append({
                "x": float(x),
                "d_graph_raw": None if last else float(result.raw.d_graph[i]),
                "d_riesz_raw": None if last or np.isnan(result.raw.d_riesz[i]) else float(result.raw.d_riesz[i]),
                "d_riesz_phi": None if last else float(result.out.d_riesz[i]),
            })
        write_csv(os.path.join(out, "phi_nodes.csv"), rows, ["x", "d_graph_raw", "d_riesz_raw", "d_riesz_phi"])
        artifacts += ["phi_moduli.csv", "phi_nodes.csv"]
    results = {"levels": table, "kernel_mismatches": result.kernel_mismatches, "bisected": result.refined}
    _finish(args, "phi", spec, results, artifacts, out)
    return EXIT_OK


SA_COLUMNS = ["level", "points", "step", "raw_riesz_modulus", "conj_riesz_modulus", "raw_graph_modulus",
              "spectral_error", "adaptation_defect"]


def cmd_trivialize(args) -> int:
    F, spec = _load(args)
    table, result = sa_refinement(F, args.refine, tol=_tolerances(args))
    out = _outdir(args)
    artifacts = []
    if out:
        write_csv(os.path.join(out, "trivialize_moduli.csv"), table, SA_COLUMNS)
        write_csv(os.path.join(out, "trivialize_nodes.csv"), result.rows(),
                  ["x", "gap", "defect", "d_riesz_raw", "d_riesz_conj"])
        artifacts += ["trivialize_moduli.csv", "trivialize_nodes.csv"]
        if result.frame is not None:
            with open(os.path.join(out, "frame.json"), "w") as fh:
                fh.write(result.frame.dumps())
            artifacts.append("frame.json")
    results = {
        "levels": table,
        "classification": result.classification,
        "note": result.note,
        "charts": [c.to_json() for c in result.charts],
        "chain_levels": sorted({c.lam for c in result.chain}),
    }
    _finish(args, "trivialize", spec, results, artifacts, out)
    return EXIT_OK


def cmd_gallery(args) -> int:
    if not args.name:
        json.dump(clean(gallery.GENERATORS), sys.stdout, indent=2, sort_keys=True)
        sys.stdout.write("\n")
        return EXIT_OK
    try:
        params = json.loads(args.params) if args.params else {}
    except json.JSONDecodeError as exc:
        raise PreconditionError(f"--params is not valid JSON ({exc})") from exc
    grid = ParamGrid(args.start, args.end, args.points)
    seed = args.seed or 0
    spec = {"generator": args.name, "params": params, "grid": grid.to_json(), "seed": seed}
    out = _outdir(args)
    artifacts = []
    if args.check:
        if args.name != "dixmier_douady":
            raise PreconditionError("--check is only defined for dixmier_douady")
        results = gallery.dd_constancy_check(grid=grid, seed=seed, **params)
    else:
        F = gallery.family_from_json(spec)
        values = [F.at(x) for x in grid.nodes()]
        results = {"nodes": grid.nodes(), "provenance": F.provenance}
        if out:
            with open(os.path.join(out, "values.json"), "w") as fh:
                json.dump({"schema": SCHEMA, "nodes": grid.nodes().tolist(),
                           "values": [value_to_json(v) for v in values]}, fh)
            artifacts.append("values.json")
    if out:
        with open(os.path.join(out, "family.json"), "w") as fh:
            json.dump(spec, fh, indent=2, sort_keys=True)
        artifacts.append("family.json")
    _finish(args, "gallery", spec, results, artifacts, out)
    return EXIT_OK


def cmd_report(args) -> int:
    path = args.dir if args.dir.endswith(".json") else os.path.join(args.dir, "report.json")
    try:
        with open(path) as fh:
            report = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise PreconditionError(f"cannot read report {path}: {exc}") from exc
    if report.get("schema") != SCHEMA:
        raise PreconditionError(f"unsupported report schema {report.get('schema')!r}")
    ok = digest(report) == report.get("digest")
    summary = {"command": report.get("command"), "digest_ok": ok}
    if args.replay:
        opts = report.get("options", {})
        with tempfile.TemporaryDirectory() as tmp:
            spec_path = os.path.join(tmp, "family.json")
            with open(spec_path, "w") as fh:
                json.dump(report["spec"], fh)
            argv = [report["command"], "--family", spec_path, "--out", os.path.join(tmp, "out")]
            if opts.get("refine") is not None:
                argv += ["--refine", str(opts["refine"])]
            if opts.get("metric") is not None and report["command"] == "analyze":
                argv += ["--metric", opts["metric"]]
            if opts.get("target") is not None and report["command"] == "analyze":
                argv += ["--target", repr(opts["target"])]
            if opts.get("tol") is not None:
                argv += ["--tol", repr(opts["tol"])]
            if report["command"] == "gallery":
                raise PreconditionError("gallery reports are replayed with the gallery command")
            run(argv)
            with open(os.path.join(tmp, "out", "report.json")) as fh:
                again = json.load(fh)
        summary["replay_matches"] = again["digest"] == report["digest"]
        ok = ok and summary["replay_matches"]
    summary["results"] = report.get("results")
    json.dump(summary, sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")
    return EXIT_OK if ok else EXIT_INCONCLUSIVE


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="reglab", description="Graph vs Riesz continuity of operator families.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, refine):
        p.add_argument("--family", help="family spec JSON")
        p.add_argument("--refine", type=int, default=refine, help="number of grid doublings")
        p.add_argument("--tol", type=float, default=None, help="algebraic tolerance (overrides RGL_TOL)")
        p.add_argument("--seed", type=int, default=None, help="override the spec seed")
        p.add_argument("--out", default=None, help="report directory")

    p = sub.add_parser("analyze", help="refine until the topologies separate or the moduli decay")
    common(p, 8)
    p.add_argument("--metric", choices=("graph", "riesz", "both"), default="both")
    p.add_argument("--target", type=float, default=1e-2, help="modulus counted as continuity evidence")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("phi", help="raw and twisted moduli under refinement")
    common(p, 4)
    p.set_defaults(func=cmd_phi)

    p = sub.add_parser("trivialize", help="conjugate a self-adjoint family by an adapted trivialization")
    common(p, 3)
    p.set_defaults(func=cmd_trivialize)

    p = sub.add_parser("gallery", help="list generators or sample one")
    p.add_argument("name", nargs="?", choices=sorted(gallery.GENERATORS))
    p.add_argument("--params", default=None, help="generator parameters as JSON")
    p.add_argument("--start", type=float, default=0.0)
    p.add_argument("--end", type=float, default=1.0)
    p.add_argument("--points", type=int, default=17)
    p.add_argument("--check", action="store_true", help="run the constancy check (dixmier_douady)")
    p.add_argument("--tol", type=float, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_gallery)

    p = sub.add_parser("report", help="verify a report digest, optionally replaying it")
    p.add_argument("dir", help="report directory or report.json")
    p.add_argument("--replay", action="store_true")
    p.add_argument("--tol", type=float, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_report)
    return parser


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


def main(argv=None) -> int:
    try:
        return run(argv)
    except PreconditionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION
    except InconclusiveError as exc:
        print(f"inconclusive: {exc}", file=sys.stderr)
        return EXIT_INCONCLUSIVE


if __name__ == "__main__":
    sys.exit(main())
