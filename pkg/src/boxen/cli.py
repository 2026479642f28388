"""Command-line entry point: ``boxen {predict,simulate,sweep,tune}``.

Exit codes: 0 success, 1 invalid input, 2 numerical failure.
"""
from __future__ import annotations

import argparse
import ast
import csv
import dataclasses
import datetime as _dt
import hashlib
import io
import json
import logging
import math
import sys
from pathlib import Path

from . import __version__
from .experiments import AXES, ESTIMATORS, SweepRow, simulate, sweep
from .model import ConfigError, Prior, ProblemConfig
from .parallel import worker_cap
from .theory import SaddleError, predict
from .tuning import LogGrid, TuneObjective, tune

log = logging.getLogger("boxen")

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL = 0, 1, 2

SIMULATE_COLUMNS = ["trial", "seed", "mse", "phi_on", "phi_off", "iters", "kkt_residual", "converged",
                    "se_mse", "se_phi_on", "se_phi_off"]
SWEEP_COLUMNS = [f.name for f in dataclasses.fields(SweepRow)]
TRACE_COLUMNS = ["lambda1", "lambda2", "objective", "round"]
PREDICT_COLUMNS = ["tau", "beta", "theta", "mse", "phi_on", "phi_off"]

REQUIRED = ("delta", "kappa", "eps2", "lambda1", "lambda2")
FLOAT_KEYS = ("delta", "kappa", "eps2", "sigma_z2", "snr", "lambda1", "lambda2", "l", "u", "xi")
QUICK_N, QUICK_TRIALS = 200, 50
DEFAULT_N, DEFAULT_TRIALS = 500, 100


# --------------------------------------------------------------------------
# configuration files


def _parse_value(key: str, text: str):
    text = text.strip()
    low = text.lower()
    if low in ("inf", "+inf", "infinity"):
        return math.inf
    if low in ("-inf", "-infinity"):
        return -math.inf
    if low in ("true", "false"):
        return low == "true"
    try:
        return ast.literal_eval(text)
    except (ValueError, SyntaxError):
        raise ConfigError(key, f"cannot parse value {text!r}") from None


def read_config_text(text: str) -> dict:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        sep = "=" if "=" in line else ":" if ":" in line else None
        if sep is None:
            raise ConfigError(f"line {lineno}", f"expected 'key = value', got {raw!r}")
        key, value = (s.strip() for s in line.split(sep, 1))
        out[key] = _parse_value(key, value)
    return out


def build_problem(raw: dict, require_lambdas: bool = True) -> tuple[ProblemConfig, Prior]:
    """Validate a flat key-value mapping into ``(ProblemConfig, Prior)``."""
    raw = dict(raw)
    known = set(FLOAT_KEYS) | {"prior.atoms", "prior.unit_variance"}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigError(unknown[0], "unknown configuration key")
    if not require_lambdas:
        raw.setdefault("lambda1", 1.0)
        raw.setdefault("lambda2", 1.0)
    for key in REQUIRED:
        if key not in raw:
            raise ConfigError(key, "missing required key")
    if ("sigma_z2" in raw) == ("snr" in raw):
        raise ConfigError("sigma_z2", "give exactly one of sigma_z2 or snr")
    vals = {}
    for key in FLOAT_KEYS:
        if key in raw:
            v = raw[key]
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise ConfigError(key, f"expected a number, got {v!r}")
            vals[key] = float(v)
    snr = vals.pop("snr", None)
    if snr is not None:
        if not snr > 0:
            raise ConfigError("snr", f"must be > 0 (got {snr})")
        vals["sigma_z2"] = vals["kappa"] / snr
    cfg = ProblemConfig(**vals)

    atoms = raw.get("prior.atoms", [(1.0, 1.0)])
    try:
        atoms = [(float(v), float(p)) for v, p in atoms]
    except (TypeError, ValueError):
        raise ConfigError("prior.atoms", f"expected a list of (value, prob) pairs, got {atoms!r}") from None
    prior = Prior.from_atoms(atoms, unit_variance=bool(raw.get("prior.unit_variance", False)))
    prior.check_box(cfg)
    return cfg, prior


def load_problem(path, overrides=(), require_lambdas: bool = True):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError("config", str(exc)) from None
    raw = read_config_text(text)
    for item in overrides:
        if "=" not in item:
            raise ConfigError("set", f"override must be key=value, got {item!r}")
        key, value = item.split("=", 1)
        raw[key.strip()] = _parse_value(key.strip(), value)
    return build_problem(raw, require_lambdas)


# --------------------------------------------------------------------------
# manifests and output


def make_manifest(command: str, cfg: ProblemConfig, prior: Prior, **extra) -> dict:
    return {
        "command": command,
        "config": cfg.to_dict(),
        "prior": {"atoms": prior.atoms},
        **extra,
        "tool_version": __version__,
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
    }


def manifest_hash(manifest: dict) -> str:
    """SHA-256 of the manifest minus its timestamp."""
    body = {k: v for k, v in manifest.items() if k != "timestamp"}
    return hashlib.sha256(json.dumps(_json_safe(body), sort_keys=True).encode()).hexdigest()


def _fmt(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return "" if v is None else str(v)


def render_csv(columns, rows, manifest: dict | None = None) -> str:
    buf = io.StringIO()
    if manifest is not None:
        buf.write(f"# manifest_sha256={manifest_hash(manifest)}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt(row.get(c)) for c in columns])
    return buf.getvalue()


def _json_safe(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    return obj


def emit(text: str, out: str | None, manifest: dict | None = None):
    """Write ``text`` to ``out`` (plus a ``.manifest.json`` beside it) or stdout."""
    if out is None:
        sys.stdout.write(text)
        if manifest is not None:
            sys.stderr.write("# manifest " + json.dumps(_json_safe(manifest), sort_keys=True) + "\n")
        return
    path = Path(out)
    path.write_text(text, encoding="utf-8")
    if manifest is not None:
        Path(str(path) + ".manifest.json").write_text(
            json.dumps(_json_safe(manifest), indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _float_list(text: str, key: str) -> list[float]:
    try:
        vals = [float(v) for v in text.replace(",", " ").split()]
    except ValueError:
        raise ConfigError(key, f"expected a list of numbers, got {text!r}") from None
    if not vals:
        raise ConfigError(key, "empty list")
    return vals


def _grid(text: str, key: str) -> LogGrid:
    vals = _float_list(text, key)
    if len(vals) == 1:
        vals = [vals[0], vals[0], 1]
    if len(vals) == 2:
        vals.append(12)
    if len(vals) != 3 or vals[2] != int(vals[2]):
        raise ConfigError(key, "expected 'lo,hi[,num]'")
    try:
        return LogGrid(vals[0], vals[1], int(vals[2]))
    except ValueError as exc:
        raise ConfigError(key, str(exc)) from None


def _size(args):
    n = args.n if args.n is not None else (QUICK_N if args.quick else DEFAULT_N)
    trials = args.trials if args.trials is not None else (QUICK_TRIALS if args.quick else DEFAULT_TRIALS)
    return n, trials


# --------------------------------------------------------------------------
# commands


def cmd_predict(args) -> int:
    cfg, prior = load_problem(args.config, args.set)
    pred = predict(cfg, prior)
    record = pred.as_record()
    print(json.dumps(record))
    for note in pred.notes:
        log.warning(note)
    if args.out:
        manifest = make_manifest("predict", cfg, prior)
        emit(render_csv(PREDICT_COLUMNS, [record], manifest), args.out, manifest)
    return EXIT_OK


def _simulate_from(cfg, prior, n, trials, seed, estimator, out, workers) -> int:
    if n < 10:
        raise ConfigError("n", f"must be >= 10 (got {n})")
    rows, s = simulate(cfg, prior, n, trials, seed, estimator, workers=workers)
    table = [dataclasses.asdict(r) for r in rows]
    nonconv = sum(not r.converged for r in rows)
    table.append({
        "trial": "summary", "mse": s.mse, "phi_on": s.phi_on, "phi_off": s.phi_off,
        "iters": sum(r.iters for r in rows) / len(rows), "kkt_residual": max(r.kkt_residual for r in rows),
        "converged": f"{len(rows) - nonconv}/{len(rows)}",
        "se_mse": s.std_err_mse, "se_phi_on": s.std_err_on, "se_phi_off": s.std_err_off,
    })
    manifest = make_manifest("simulate", cfg, prior, seed=seed, n=n, trials=trials, estimator=estimator)
    emit(render_csv(SIMULATE_COLUMNS, table, manifest), out, manifest)
    if nonconv:
        log.warning("%d of %d trials did not converge", nonconv, len(rows))
        return EXIT_NUMERICAL
    return EXIT_OK


def cmd_simulate(args) -> int:
    if args.manifest:
        try:
            man = json.loads(Path(args.manifest).read_text(encoding="utf-8"))
            raw = {k: (float(v) if isinstance(v, str) else v) for k, v in man["config"].items()}
            cfg = ProblemConfig(**raw)
            prior = Prior.from_atoms(man["prior"]["atoms"])
            n, trials, seed = man["n"], man["trials"], man["seed"]
            estimator = man.get("estimator", "box_en")
        except (OSError, KeyError, TypeError, ValueError) as exc:
            raise ConfigError("manifest", f"unreadable manifest: {exc}") from None
    else:
        if not args.config:
            raise ConfigError("config", "simulate needs --config or --manifest")
        cfg, prior = load_problem(args.config, args.set)
        n, trials = _size(args)
        seed, estimator = args.seed, args.estimator
    if trials < 1:
        raise ConfigError("trials", f"must be >= 1 (got {trials})")
    return _simulate_from(cfg, prior, n, trials, seed, estimator, args.out, args.workers)


def cmd_sweep(args) -> int:
    cfg, prior = load_problem(args.config, args.set)
    n, trials = _size(args)
    if trials > 0 and n < 10:
        raise ConfigError("n", f"must be >= 10 (got {n})")
    values = _float_list(args.values, "values")
    estimators = [e.strip() for e in args.estimators.split(",") if e.strip()]
    for e in estimators:
        if e not in ESTIMATORS:
            raise ConfigError("estimators", f"unknown estimator {e!r}; choose from {', '.join(ESTIMATORS)}")
    rows = sweep(cfg, prior, args.axis, values, n, trials, args.seed, estimators, workers=args.workers)
    manifest = make_manifest("sweep", cfg, prior, seed=args.seed, n=n, trials=trials, axis=args.axis,
                             values=values, estimators=estimators)
    emit(render_csv(SWEEP_COLUMNS, [dataclasses.asdict(r) for r in rows], manifest), args.out, manifest)
    return EXIT_OK if all(r.status == "ok" for r in rows) else EXIT_NUMERICAL


def cmd_tune(args) -> int:
    cfg, prior = load_problem(args.config, args.set, require_lambdas=False)
    if args.objective == "support_score":
        objective = TuneObjective("support_score", 0.5 if args.omega is None else args.omega)
    else:
        if args.omega is not None:
            raise ConfigError("omega", "only valid with --objective support_score")
        objective = TuneObjective("min_mse")
    res = tune(cfg, prior, objective, _grid(args.grid_l1, "grid-l1"), _grid(args.grid_l2, "grid-l2"),
               workers=args.workers)
    print(json.dumps({"lambda1_star": res.lambda1_star, "lambda2_star": res.lambda2_star,
                      "objective": objective.kind, "omega": objective.omega,
                      "objective_value": res.objective_value}))
    if args.out:
        trace = [dict(zip(TRACE_COLUMNS, t)) for t in res.grid_trace]
        manifest = make_manifest("tune", cfg, prior, objective=objective.kind, omega=objective.omega,
                                 grid_l1=args.grid_l1, grid_l2=args.grid_l2)
        emit(render_csv(TRACE_COLUMNS, trace, manifest), args.out, manifest)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="boxen", description="Box-Elastic Net theory and simulation.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config_required=True):
        sp.add_argument("--config", required=config_required, help="key = value problem file")
        sp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override a config key")
        sp.add_argument("--out", help="output file (default: stdout)")
        sp.add_argument("--workers", type=int, default=1, help="worker processes (capped by $BOXEN_MAX_WORKERS)")

    def sized(sp):
        sp.add_argument("--n", type=int, help=f"signal length (default {DEFAULT_N})")
        sp.add_argument("--trials", type=int, help=f"Monte-Carlo trials (default {DEFAULT_TRIALS})")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--quick", action="store_true", help=f"n={QUICK_N}, trials={QUICK_TRIALS} unless given")

    sp = sub.add_parser("predict", help="saddle point and asymptotic predictions")
    common(sp)
    sp.set_defaults(func=cmd_predict)

    sp = sub.add_parser("simulate", help="Monte-Carlo trials at one configuration")
    common(sp, config_required=False)
    sized(sp)
    sp.add_argument("--estimator", choices=ESTIMATORS, default="box_en")
    sp.add_argument("--manifest", help="re-run from a manifest written by an earlier simulate")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("sweep", help="theory and simulation along one parameter")
    common(sp)
    sized(sp)
    sp.add_argument("--axis", choices=AXES, required=True)
    sp.add_argument("--values", required=True, help="comma-separated axis values")
    sp.add_argument("--estimators", default="box_en", help="comma-separated subset of box_en,standard_en")
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("tune", help="pick (lambda1, lambda2) from theory")
    common(sp)
    sp.add_argument("--objective", choices=("min_mse", "support_score"), default="min_mse")
    sp.add_argument("--omega", type=float, help="on-support weight for support_score (tool default 0.5)")
    sp.add_argument("--grid-l1", default="0.01,10,12", help="lo,hi[,num] log-spaced lambda1 grid")
    sp.add_argument("--grid-l2", default="0.01,10,12", help="lo,hi[,num] log-spaced lambda2 grid")
    sp.set_defaults(func=cmd_tune)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "workers", 1) > worker_cap():
        log.info("capping workers at %d", worker_cap())
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except SaddleError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
