"""Scenario runner: ``offdiag-holonomy <subcommand> --config file.yaml``.

Exit status: 0 when every numeric check passes, 2 on a numeric check
failure, 1 on usage or configuration errors.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import hashlib
import io
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np
import yaml

from .holonomy import (
    HOLONOMY_TOL,
    HolonomyError,
    build_sigma_table,
    complex_to_json,
    enumerate_strict_sequences,
    gamma_product,
    holonomy_of_order,
    rank_budget_report,
)
from .interferometer import ProtocolSpec, extract_holonomy, run_protocol
from .models import (
    ORACLE_SEQUENCES,
    TRIPOD_LABELS,
    TripodPath,
    random_tripod_path,
    rank_counterexample,
    tripod_curve,
    tripod_hamiltonian,
    tripod_oracle,
)
from .numkernel import RankTolerance
from .subspaces import CurveError, load_curve

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2
KINDS = ("holonomy", "diagnostics", "tripod", "interferometer", "oracle-check")

COMMON_KEYS = {"schema", "kind", "seed", "grid", "tolerance", "out", "workers"}
SCHEMA = {
    "holonomy": COMMON_KEYS | {"path", "curve_file", "sequences"},
    "diagnostics": COMMON_KEYS | {"path", "curve_file", "fixture", "max_power"},
    "tripod": COMMON_KEYS | {"sweep", "theta_sines", "phi_sines", "omega", "sequences"},
    "interferometer": COMMON_KEYS | {"paths", "sequences", "strategies", "filter_grid"},
    "oracle-check": COMMON_KEYS | {"paths", "random_paths", "sequences"},
}
DEFAULTS = {"seed": 0, "grid": 200, "tolerance": 1e-5, "out": "results", "workers": 1}


class ConfigError(ValueError):
    """Invalid scenario configuration; the message names the offending field."""


# config ------------------------------------------------------------------------


def load_config(path) -> dict:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"config: cannot read {path}: {exc}") from None
    try:
        doc = yaml.safe_load(text) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"config: not valid YAML: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError("config: top level must be a mapping")
    doc["_base"] = str(Path(path).resolve().parent)
    return doc


def validate_config(cfg: dict, kind: str) -> dict:
    """Check keys and types, fill defaults, and return a normalized copy."""
    cfg = dict(cfg)
    base = cfg.pop("_base", ".")
    if cfg.get("schema", SCHEMA_VERSION) != SCHEMA_VERSION:
        raise ConfigError(f"config.schema: unsupported version {cfg.get('schema')!r}")
    if cfg.get("kind", kind) != kind:
        raise ConfigError(f"config.kind: file describes {cfg['kind']!r}, command is {kind!r}")
    unknown = set(cfg) - SCHEMA[kind]
    if unknown:
        raise ConfigError(f"config: unknown keys {sorted(unknown)} for scenario {kind!r}")
    out = {**DEFAULTS, **cfg, "schema": SCHEMA_VERSION, "kind": kind}
    if not isinstance(out["grid"], int) or out["grid"] < 1:
        raise ConfigError(f"config.grid: expected a positive integer, got {out['grid']!r}")
    if not isinstance(out["tolerance"], (int, float)) or out["tolerance"] <= 0:
        raise ConfigError(f"config.tolerance: expected a positive number, got {out['tolerance']!r}")
    if not isinstance(out["seed"], int) or out["seed"] < 0:
        raise ConfigError(f"config.seed: expected a nonnegative integer, got {out['seed']!r}")
    if "curve_file" in out:
        p = Path(out["curve_file"])
        if not p.is_absolute():
            p = Path(base) / p
        if not p.exists():
            raise ConfigError(f"config.curve_file: {p} does not exist")
        out["curve_file"] = str(p)
    if "path" in out:
        _path_from(out["path"], "config.path")
    for i, spec in enumerate(out.get("paths", []) or []):
        _path_from(spec, f"config.paths[{i}]")
    if "fixture" in out and out["fixture"] != "counterexample":
        raise ConfigError(f"config.fixture: unknown fixture {out['fixture']!r}")
    if kind == "tripod":
        sweep = out.get("sweep")
        if not isinstance(sweep, dict) or "theta1" not in sweep:
            raise ConfigError("config.sweep: expected a mapping with a theta1 range")
        for key in sweep:
            if key not in ("theta1", "phi1"):
                raise ConfigError(f"config.sweep.{key}: unknown sweep variable")
            _range(sweep[key], f"config.sweep.{key}")
    if kind == "interferometer":
        for s in out.setdefault("strategies", ["adiabatic"]):
            if s not in ("adiabatic", "filtering", "nonadiabatic"):
                raise ConfigError(f"config.strategies: unknown strategy {s!r}")
        if "filtering" in out["strategies"] and "filter_grid" not in out:
            raise ConfigError("config.filter_grid: required for the filtering strategy")
    return out


def _path_from(spec, where: str) -> TripodPath:
    if not isinstance(spec, dict):
        raise ConfigError(f"{where}: expected a mapping")
    try:
        return TripodPath.from_spec(spec)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"{where}: {exc}") from None


def _range(value, where: str) -> np.ndarray:
    if isinstance(value, (int, float)):
        return np.array([float(value)])
    if isinstance(value, list) and len(value) == 3 and isinstance(value[2], int) and value[2] >= 1:
        return np.linspace(float(value[0]), float(value[1]), value[2])
    raise ConfigError(f"{where}: expected a number or [start, stop, count]")


def config_hash(cfg: dict) -> str:
    canon = json.dumps({k: v for k, v in cfg.items() if k not in ("out", "workers")},
                       sort_keys=True, default=str)
    return hashlib.sha256(canon.encode()).hexdigest()[:16]


def _parse_sequences(raw, eta: int, default) -> list[tuple[int, ...]]:
    if raw is None:
        return list(default)
    seqs = []
    for i, seq in enumerate(raw):
        try:
            labels = tuple(TRIPOD_LABELS[x] if isinstance(x, str) else int(x) for x in seq)
        except (KeyError, TypeError, ValueError):
            raise ConfigError(f"config.sequences[{i}]: bad label in {seq!r}") from None
        if not labels or any(not 1 <= x <= eta for x in labels):
            raise ConfigError(f"config.sequences[{i}]: labels must lie in 1..{eta}")
        seqs.append(labels)
    return seqs


# output ----------------------------------------------------------------------


def _write_json(path: Path, payload) -> None:
    path.write_text(json.dumps(payload, indent=1, sort_keys=True) + "\n", encoding="utf-8")


def _write_csv(path: Path, rows: list[dict]) -> None:
    buf = io.StringIO()
    stamp = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    buf.write(f"# generated {stamp}\n")
    if rows:
        writer = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
    path.write_text(buf.getvalue(), encoding="utf-8")


def _ordered_map(fn, items, workers: int):
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _curve(cfg):
    if "curve_file" in cfg:
        return load_curve(cfg["curve_file"]), None
    if "path" in cfg:
        path = _path_from(cfg["path"], "config.path")
        return tripod_curve(path, cfg["grid"]), path
    raise ConfigError("config: need one of 'path' or 'curve_file'")


# scenarios -------------------------------------------------------------------


def scenario_holonomy(cfg: dict) -> tuple[int, dict]:
    c, _ = _curve(cfg)
    table = build_sigma_table(c)
    default = [(l,) for l in range(1, c.eta + 1)]
    for kappa in range(2, c.eta + 1):
        default += enumerate_strict_sequences(c.eta, kappa)
    seqs = _parse_sequences(cfg.get("sequences"), c.eta, default)
    h = config_hash(cfg)
    records = [{**holonomy_of_order(table, s).to_dict(), "config_hash": h} for s in seqs]
    return EXIT_OK, {"holonomy.json": {"config_hash": h, "seed": cfg["seed"],
                                       "unitarity_defect": table.unitarity_defect(),
                                       "results": records}}


def scenario_diagnostics(cfg: dict) -> tuple[int, dict]:
    if cfg.get("fixture") == "counterexample":
        table = rank_counterexample()
    else:
        c, _ = _curve(cfg)
        table = build_sigma_table(c)
    report = rank_budget_report(table, max_power=cfg.get("max_power", 4))
    strict = []
    for kappa in range(2, table.eta + 1):
        for seq in enumerate_strict_sequences(table.eta, kappa):
            g = gamma_product(table, seq)
            strict.append({"seq": list(seq), "norm": float(np.linalg.norm(g, 2)),
                           "status": holonomy_of_order(table, seq).status})
    defect = table.unitarity_defect()
    ok = defect <= 1e-8 and report.bounds_hold and report.max_trace_error <= 1e-8
    h = config_hash(cfg)
    payload = {"config_hash": h, "seed": cfg["seed"], "dims": list(table.dims),
               "S_tot": complex_to_json(table.S_tot), "unitarity_defect": defect,
               "rank_budget": report.to_dict(), "strict_gammas": strict,
               "all_strict_vanish": all(r["status"] == "undefined" for r in strict),
               "checks_pass": ok}
    return (EXIT_OK if ok else EXIT_NUMERIC), {"diagnostics.json": payload}


def _tripod_point(args):
    theta1, phi1, cfg, seqs = args
    theta = np.concatenate([[theta1], cfg.get("theta_sines", [])])
    phi = np.concatenate([[phi1], cfg.get("phi_sines", [])])
    path = TripodPath.fourier(theta, phi, cfg.get("omega", 1.0))
    table = build_sigma_table(tripod_curve(path, cfg["grid"]))
    oracle = tripod_oracle(path)
    row = {"theta1": f"{theta1:.12g}", "phi1": f"{phi1:.12g}", "Z": f"{oracle.Z:.12g}"}
    mismatch = False
    for seq in seqs:
        name = "U[" + "".join(seq) + "]"
        res = holonomy_of_order(table, oracle.labels(seq))
        row[name + ".status"] = res.status
        row[name + ".oracle"] = oracle[seq].status
        row[name + ".rank"] = res.rank
        mismatch |= res.status != oracle[seq].status
    return row, mismatch


def scenario_tripod(cfg: dict) -> tuple[int, dict]:
    thetas = _range(cfg["sweep"]["theta1"], "config.sweep.theta1")
    phis = _range(cfg["sweep"].get("phi1", 0.0), "config.sweep.phi1")
    seqs = [tuple(s) for s in cfg.get("sequences", ORACLE_SEQUENCES)]
    for i, s in enumerate(seqs):
        if tuple(s) not in set(ORACLE_SEQUENCES):
            raise ConfigError(f"config.sequences[{i}]: {s!r} has no closed form")
    points = [(t, p, cfg, seqs) for t in thetas for p in phis]
    out = _ordered_map(_tripod_point, points, cfg["workers"])
    h = config_hash(cfg)
    rows = [{**row, "config_hash": h} for row, _ in out]
    status = EXIT_NUMERIC if any(m for _, m in out) else EXIT_OK
    return status, {"tripod.csv": rows}


def _interferometer_point(args):
    idx, path_spec, strategy, seq, cfg = args
    path = TripodPath.from_spec(path_spec)
    curve = tripod_curve(path, cfg["grid"])
    H = lambda s: tripod_hamiltonian(path, s)  # noqa: E731
    if strategy == "nonadiabatic":
        from .interferometer import schrodinger_curve
        from .models import tripod_frames

        curve = schrodinger_curve(H, tripod_frames(path, 0.0), cfg["grid"])
    spec = ProtocolSpec(seq, strategy, curve, hamiltonian=H,
                        filter_grid=cfg.get("filter_grid"), name=f"path{idx}")
    result = run_protocol(spec)
    extraction = extract_holonomy(spec, n_trials=200, seed=cfg["seed"])
    flags = {"nodal": bool(result.flags["nodal"]),
             "undefined": bool(extraction.flags["undefined"]),
             "nonunique": bool(extraction.flags["nonunique"]),
             "max_random_gain": extraction.flags["max_random_gain"]}
    return {"spec_id": f"path{idx}", "strategy": strategy, "seq": list(seq), "p": result.p,
            "p_formula": result.p_formula, "p_max": extraction.p_max,
            "V_star": complex_to_json(extraction.V_block), "flags": flags}


def scenario_interferometer(cfg: dict) -> tuple[int, dict]:
    paths = cfg.get("paths") or []
    if not paths:
        raise ConfigError("config.paths: need at least one path")
    seqs = _parse_sequences(cfg.get("sequences"), 3, [(3, 1), (1, 3)])
    points = [(i, p, st, s, cfg) for i, p in enumerate(paths)
              for st in cfg["strategies"] for s in seqs]
    h = config_hash(cfg)
    records = [{**r, "config_hash": h} for r in _ordered_map(_interferometer_point, points,
                                                             cfg["workers"])]
    bad = any(r["flags"]["max_random_gain"] > 1e-9 for r in records)
    return (EXIT_NUMERIC if bad else EXIT_OK), {"interferometer.json": records}


def compare_with_oracle(paths, sequences, grid: int, tolerance: float, workers: int = 1) -> dict:
    """Per-sequence max deviation between engine holonomies and closed forms.

    Returns a report with ``ok`` false when any deviation exceeds
    ``tolerance``, any status disagrees, or a path cannot be resolved on
    the grid (listed under ``errors``).
    """
    def one(path):
        try:
            table = build_sigma_table(tripod_curve(path, grid))
        except (CurveError, HolonomyError) as exc:
            return str(exc)
        oracle = tripod_oracle(path)
        out = []
        for seq in sequences:
            res = holonomy_of_order(table, oracle.labels(seq))
            entry = oracle[seq]
            dev = (float(np.max(np.abs(res.holonomy - entry.value)))
                   if entry.value is not None and res.status != "undefined" else 0.0)
            out.append((seq, dev, res.status, entry.status))
        return out

    per_path = _ordered_map(one, list(paths), workers)
    summary = {}
    mismatches = []
    errors = []
    for i, rows in enumerate(per_path):
        if isinstance(rows, str):
            errors.append({"path": i, "error": rows})
            continue
        for seq, dev, got, want in rows:
            key = ",".join(seq)
            summary[key] = max(summary.get(key, 0.0), dev)
            if got != want:
                mismatches.append({"path": i, "seq": list(seq), "engine": got, "oracle": want})
    worst = max(summary.values(), default=0.0)
    return {"max_deviation": summary, "worst": worst, "status_mismatches": mismatches,
            "errors": errors, "tolerance": tolerance, "grid": grid,
            "ok": worst <= tolerance and not mismatches and not errors}


def default_oracle_paths(seed: int = 0, count: int = 20) -> list[TripodPath]:
    """Seeded random smooth paths followed by a family of straight lines."""
    rng = np.random.default_rng(seed)
    paths = [random_tripod_path(rng) for _ in range(count)]
    for theta1 in (0.4, 1.0, np.pi / 2, 2.1, 2.8):
        for phi1 in (-0.9, 0.3, 1.7):
            paths.append(TripodPath.linear(theta1, phi1))
    return paths


def scenario_oracle_check(cfg: dict) -> tuple[int, dict]:
    paths = [_path_from(p, f"config.paths[{i}]") for i, p in enumerate(cfg.get("paths") or [])]
    rnd = cfg.get("random_paths")
    if "paths" not in cfg and rnd is None:
        paths = default_oracle_paths(cfg["seed"])
    elif rnd:
        rng = np.random.default_rng(cfg["seed"])
        paths += [random_tripod_path(rng) for _ in range(int(rnd.get("count", 20)))]
    seqs = [tuple(s) for s in cfg.get("sequences", ORACLE_SEQUENCES)]
    for i, s in enumerate(seqs):
        if s not in set(ORACLE_SEQUENCES):
            raise ConfigError(f"config.sequences[{i}]: {s!r} has no closed form")
    report = compare_with_oracle(paths, seqs, cfg["grid"], cfg["tolerance"], cfg["workers"])
    report.update(config_hash=config_hash(cfg), seed=cfg["seed"], n_paths=len(paths))
    return (EXIT_OK if report["ok"] else EXIT_NUMERIC), {"oracle_check.json": report}


SCENARIOS = {
    "holonomy": scenario_holonomy,
    "diagnostics": scenario_diagnostics,
    "tripod": scenario_tripod,
    "interferometer": scenario_interferometer,
    "oracle-check": scenario_oracle_check,
}


def run_scenario(cfg: dict, kind: str, out_dir=None) -> int:
    """Validate ``cfg``, run the scenario and write its result files."""
    cfg = validate_config(cfg, kind)
    status, files = SCENARIOS[kind](cfg)
    out = Path(out_dir or cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    for name, payload in files.items():
        if name.endswith(".csv"):
            _write_csv(out / name, payload)
        else:
            _write_json(out / name, payload)
    return status


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="offdiag-holonomy", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for kind in KINDS:
        p = sub.add_parser(kind)
        p.add_argument("--config", required=True, help="YAML scenario file")
        p.add_argument("--grid", type=int, help="grid intervals M (overrides config)")
        p.add_argument("--seed", type=int, help="random seed (overrides config)")
        p.add_argument("--out", help="output directory (overrides config)")
        p.add_argument("--tolerance", type=float, help="numeric tolerance (overrides config)")
        p.add_argument("--workers", type=int, help="worker threads")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        for key in ("grid", "seed", "out", "tolerance", "workers"):
            value = getattr(args, key)
            if value is not None:
                cfg[key] = value
        return run_scenario(cfg, args.command)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (HolonomyError, ArithmeticError, ValueError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
