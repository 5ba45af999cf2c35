"""Command-line harness: dataset generation, exactness audits and op-count comparisons.

Exit codes: 0 when every audited answer and invariant holds, 1 when any of them
fails (or the build fails), 2 on usage errors.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import datasets
from .composite import DYNAMIC_MODES, MODES, CompositeOracle, OracleConfig
from .counters import OpCounter
from .errors import OracleError, ParameterError
from .metric import load_dataset

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
SEED_ENV = "NETORACLE_SEED"
TOL = 1e-9


class UsageError(Exception):
    pass


@dataclass
class DatasetSpec:
    kind: str = "uniform"
    n: int = 1000
    dim: int = 2
    seed: int = 0
    path: str | None = None
    format: str = "points"

    def load(self):
        if self.path is not None:
            with open(self.path, "rb") as fh:
                return load_dataset(fh, self.format)
        return datasets.generate(self.kind, self.n, self.dim, self.seed)


@dataclass
class RunConfig:
    dataset: DatasetSpec = field(default_factory=DatasetSpec)
    mode: str = "static_O1"
    epsilon: float = 0.25
    lam: float = 3.0
    D: int = 64
    seed: int = 0
    queries: int = 1000
    updates: int = 0
    pair_seed: int = 0
    step2: str = "auto"
    corrupt: bool = False
    out: str | None = None

    def oracle_config(self):
        return OracleConfig(epsilon=self.epsilon, lam=self.lam, mode=self.mode, D=self.D,
                            seed=self.seed, step2=self.step2)

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["dataset"] = DatasetSpec(**d.get("dataset", {}))
        return cls(**d)


# -- workload ------------------------------------------------------------------------

def _percentiles(values):
    if not values:
        return None
    a = np.asarray(values, dtype=float)
    return {"mean": float(a.mean()), "p50": float(np.percentile(a, 50)),
            "p90": float(np.percentile(a, 90)), "p99": float(np.percentile(a, 99)),
            "max": float(a.max())}


def _live(oracle):
    h = oracle.h
    return [p for p in h.order if p not in h.tombstones]


def _build(cfg, space):
    """Build the oracle; dynamic modes with a matrix dataset hold back ids for inserts."""
    reserve = []
    points = None
    if cfg.mode in DYNAMIC_MODES and cfg.updates and space.kind == "matrix":
        held = min(space.n_live() - 2, (cfg.updates + 1) // 2)
        ids = space.live_ids()
        if held > 0:
            points, reserve = ids[:-held], ids[-held:]
    oracle = CompositeOracle(space, cfg.oracle_config(), points=points, counter=OpCounter())
    return oracle, reserve


def _apply_update(oracle, k, rng, reserve, lo, hi):
    """Alternate inserts and deletes; returns a small record of what changed."""
    live = _live(oracle)
    if k % 2 == 0 or len(live) <= 2:
        if oracle.space.kind == "points":
            p = oracle.dynamic_update("insert", rng.uniform(lo, hi))
        elif reserve:
            p = oracle.dynamic_update("insert", reserve.pop())
        else:
            return None
        return {"update": "insert", "id": int(p)}
    p = live[int(rng.integers(len(live)))]
    oracle.dynamic_update("delete", p)
    return {"update": "delete", "id": int(p)}


def _corrupt(oracle):
    """Scale the cached distance of the first link found."""
    h = oracle.h
    for p in h.order:
        for q in h.nbrs[p]:
            oracle.corrupt_link(p, q, 2.0)
            return [int(p), int(q)]
    return None


def _invariants(oracle):
    raw = oracle.verify_invariants()
    return {name: {"violations": len(bad), "examples": [str(b) for b in bad[:5]]}
            for name, bad in raw.items()}


def run_audit(cfg, records_fh=None):
    """Build, run the workload, audit every answer, and return the report dict."""
    if cfg.updates and cfg.mode not in DYNAMIC_MODES:
        raise UsageError(f"--updates needs a dynamic mode ({', '.join(DYNAMIC_MODES)})")
    report = {"config": cfg.to_dict()}
    t0 = time.perf_counter()
    try:
        space = cfg.dataset.load()
        oracle, reserve = _build(cfg, space)
    except (OracleError, ValueError, OSError) as exc:
        report["failure"] = {"stage": "build", "error": f"{type(exc).__name__}: {exc}"}
        report["status"] = "fail"
        return report
    build_s = time.perf_counter() - t0
    corrupted = _corrupt(oracle) if cfg.corrupt else None

    rng = np.random.default_rng(cfg.pair_seed)
    if space.kind == "points" and space.n_live() > 0:
        pts = np.asarray([space.coords(i) for i in space.live_ids()])
        lo, hi = pts.min(axis=0), pts.max(axis=0)
    else:
        lo = hi = None
    slots = set()
    if cfg.updates:
        slots = {int(k * cfg.queries / cfg.updates) for k in range(cfg.updates)}
    per_slot = {}
    for k in range(cfg.updates):
        s = int(k * cfg.queries / cfg.updates)
        per_slot[s] = per_slot.get(s, 0) + 1

    ok = errors = fallbacks = 0
    worst = 0.0
    ops, probes, paths = [], [], {}
    update_count = 0
    t1 = time.perf_counter()
    for q in range(cfg.queries):
        if q in slots:
            for _ in range(per_slot[q]):
                rec = _apply_update(oracle, update_count, rng, reserve, lo, hi)
                update_count += 1
                if rec is not None and records_fh is not None:
                    records_fh.write(json.dumps(rec) + "\n")
        live = _live(oracle)
        if len(live) < 2:
            break
        i, j = rng.choice(len(live), 2, replace=False)
        x, y = live[int(i)], live[int(j)]
        try:
            rec = oracle.audit_record(x, y)
        except OracleError as exc:
            errors += 1
            rec = {"x": int(x), "y": int(y), "error": f"{type(exc).__name__}: {exc}"}
        else:
            err = abs(rec["ratio"] - 1.0)
            rec["pass"] = err <= cfg.epsilon + TOL
            ok += rec["pass"]
            worst = max(worst, err)
            fallbacks += bool(rec["fallback_used"])
            ops.append(rec["ops"])
            probes.append(rec["probes"])
            paths[rec["path_taken"]] = paths.get(rec["path_taken"], 0) + 1
        if records_fh is not None:
            records_fh.write(json.dumps(rec, default=_jsonable) + "\n")
    query_s = time.perf_counter() - t1
    answered = len(ops)
    t2 = time.perf_counter()
    inv = _invariants(oracle)
    inv_s = time.perf_counter() - t2
    inv_bad = sum(v["violations"] for v in inv.values())

    report["summary"] = {
        "n": len(_live(oracle)), "answered": answered, "errors": errors, "updates": update_count,
        "pass_rate": ok / answered if answered else 1.0,
        "max_ratio_error": worst,
        "fallback_rate": fallbacks / answered if answered else 0.0,
        "ops": _percentiles(ops), "probes": _percentiles(probes), "paths": paths,
        "probe_formula": oracle.probe_formula(),
    }
    report["invariants"] = inv
    report["sizes"] = _jsonable(oracle.size_report())
    report["counters"] = dict(sorted(oracle.counter.snapshot().items()))
    if corrupted is not None:
        report["corrupted_link"] = corrupted
    report["timing"] = {"build_s": build_s, "query_s": query_s, "invariants_s": inv_s}
    failed = inv_bad > 0 or (answered and ok < answered)
    report["status"] = "fail" if failed else "pass"
    return report


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    return obj


def run_compare(configs):
    """Audit several configs over one dataset; returns (rows, reports)."""
    if not configs:
        raise UsageError("compare needs at least one mode")
    first = configs[0].dataset
    for c in configs[1:]:
        if asdict(c.dataset) != asdict(first):
            raise UsageError("compared configs must share one dataset")
    rows, reports = [], []
    for cfg in configs:
        rep = run_audit(cfg)
        reports.append(rep)
        s = rep.get("summary")
        if s is None:
            rows.append({"mode": cfg.mode, "status": "fail", "error": rep["failure"]["error"]})
            continue
        rows.append({"mode": cfg.mode, "status": rep["status"], "pass_rate": s["pass_rate"],
                     "max_ratio_error": s["max_ratio_error"], "fallback_rate": s["fallback_rate"],
                     "mean_ops": s["ops"]["mean"] if s["ops"] else None,
                     "p99_ops": s["ops"]["p99"] if s["ops"] else None,
                     "max_probes": s["probes"]["max"] if s["probes"] else None,
                     "probe_formula": s["probe_formula"]})
    rows.extend(_backup_rows(configs[0]))
    return rows, reports


def _backup_rows(cfg):
    """Per-query op counts of the two backup oracles on the shared dataset."""
    static = RunConfig.from_dict({**cfg.to_dict(), "mode": "static_O1", "updates": 0})
    space = static.dataset.load()
    oracle = CompositeOracle(space, static.oracle_config(), counter=OpCounter())
    live = _live(oracle)
    if len(live) < 2:
        return []
    rng = np.random.default_rng(cfg.pair_seed)
    pairs = [tuple(int(live[k]) for k in rng.choice(len(live), 2, replace=False))
             for _ in range(min(cfg.queries, 2000))]
    rows = []
    for name, build, ask, keys in (
            ("backup_forest", oracle.forest, lambda o, x, y: o.forest_query(x, y),
             ("forest_ops", "forest_lca_probes", "forest_scan")),
            ("backup_centroid", oracle.centroid, lambda o, x, y: o.centroid_query(x, y),
             ("centroid_outer", "centroid_inner"))):
        sub = build()
        worst = 0.0
        oracle.counter.reset()
        for x, y in pairs:
            est = ask(sub, x, y).estimate
            worst = max(worst, abs(est / space.exact_query(x, y) - 1.0))
        per = oracle.counter.total(keys) / len(pairs)
        rows.append({"mode": name, "status": "pass" if worst <= cfg.epsilon + TOL else "fail",
                     "max_ratio_error": worst, "mean_ops": per})
    return rows


def format_table(rows):
    cols = ("mode", "status", "pass_rate", "max_ratio_error", "fallback_rate", "mean_ops",
            "p99_ops", "max_probes", "probe_formula")
    fmt = lambda v: "-" if v is None else (f"{v:.4g}" if isinstance(v, float) else str(v))
    table = [cols] + [tuple(fmt(r.get(c)) for c in cols) for r in rows]
    widths = [max(len(r[k]) for r in table) for k in range(len(cols))]
    return "\n".join("  ".join(v.ljust(w) for v, w in zip(r, widths)).rstrip() for r in table)


def human_summary(report):
    if "failure" in report:
        return f"FAIL build: {report['failure']['error']}"
    s = report["summary"]
    ops = s["ops"] or {}
    lines = [
        f"{report['status'].upper()} mode={report['config']['mode']} n={s['n']} "
        f"answered={s['answered']} errors={s['errors']} updates={s['updates']}",
        f"  pass_rate={s['pass_rate']:.6f} max_ratio_error={s['max_ratio_error']:.6g} "
        f"fallback_rate={s['fallback_rate']:.4g}",
        f"  ops mean={ops.get('mean', 0):.3f} p99={ops.get('p99', 0):.3g} max={ops.get('max', 0):.3g}",
    ]
    for name, v in report["invariants"].items():
        lines.append(f"  invariants {name}: {v['violations']} violation(s)")
        lines.extend(f"    {e}" for e in v["examples"][:3])
    return "\n".join(lines)


# -- argument handling ----------------------------------------------------------------

def _default_seed():
    raw = os.environ.get(SEED_ENV)
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"{SEED_ENV} must be an integer, got {raw!r}") from None


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _dataset_args(p):
    p.add_argument("--dataset", default="uniform",
                   help=f"dataset kind ({', '.join(datasets.KINDS)}) or a path to a dataset file")
    p.add_argument("--format", choices=("points", "matrix"), default="points",
                   help="file format when --dataset is a path")
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--dim", type=int, default=2)
    p.add_argument("--seed", type=int, default=None, help=f"defaults to ${SEED_ENV} or 0")


def _oracle_args(p, multi=False):
    if multi:
        p.add_argument("--mode", action="append", choices=MODES, default=None,
                       help="repeat to compare several modes")
        p.add_argument("--config", action="append", default=None,
                       help="JSON run config file; repeatable")
    else:
        p.add_argument("--mode", choices=MODES, default="static_O1")
    p.add_argument("--epsilon", type=float, default=0.25)
    p.add_argument("--lambda", dest="lam", type=float, default=3.0)
    p.add_argument("--dim-D", dest="D", type=int, default=64)
    p.add_argument("--queries", type=int, default=1000)
    p.add_argument("--updates", type=int, default=0)
    p.add_argument("--step2", choices=("auto", "on", "off"), default="auto")
    p.add_argument("--out", default=None)


def build_parser():
    ap = _Parser(prog="netoracle", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen", help="write a seeded synthetic dataset")
    g.add_argument("--dataset", required=True, choices=datasets.KINDS)
    g.add_argument("--n", type=int, default=1000)
    g.add_argument("--dim", type=int, default=2)
    g.add_argument("--seed", type=int, default=None)
    g.add_argument("--out", default=None, help="output path (stdout when omitted)")

    a = sub.add_parser("audit", help="build an oracle and audit its answers exactly")
    _dataset_args(a)
    _oracle_args(a)
    a.add_argument("--corrupt-link", dest="corrupt", action="store_true",
                   help="test hook: scale one cached link distance before auditing")

    c = sub.add_parser("compare", help="audit several modes over one dataset")
    _dataset_args(c)
    _oracle_args(c, multi=True)

    d = sub.add_parser("dump-invariants", help="build an oracle and write its invariant report")
    _dataset_args(d)
    d.add_argument("--mode", choices=MODES, default="static_O1")
    d.add_argument("--epsilon", type=float, default=0.25)
    d.add_argument("--lambda", dest="lam", type=float, default=3.0)
    d.add_argument("--dim-D", dest="D", type=int, default=64)
    d.add_argument("--out", default=None)
    return ap


def _dataset_spec(args, seed):
    if args.n < 1 or args.dim < 1:
        raise UsageError("--n and --dim must be positive")
    if args.dataset in datasets.KINDS:
        return DatasetSpec(kind=args.dataset, n=args.n, dim=args.dim, seed=seed)
    if not Path(args.dataset).is_file():
        raise UsageError(f"--dataset {args.dataset!r} is neither a known kind nor a file")
    return DatasetSpec(kind="file", n=0, dim=0, seed=seed, path=args.dataset, format=args.format)


def _run_config(args, seed, mode=None):
    return RunConfig(dataset=_dataset_spec(args, seed), mode=mode or args.mode,
                     epsilon=args.epsilon, lam=args.lam, D=args.D, seed=seed,
                     queries=getattr(args, "queries", 0), updates=getattr(args, "updates", 0),
                     pair_seed=seed, step2=getattr(args, "step2", "auto"),
                     corrupt=getattr(args, "corrupt", False), out=args.out)


def _write_json(path, obj):
    text = json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n"
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _cmd_gen(args, seed):
    text, _ = datasets.generate_text(args.dataset, args.n, args.dim, seed)
    if args.out is None:
        sys.stdout.write(text)
    else:
        Path(args.out).write_text(text)
    return EXIT_OK


def _cmd_audit(args, seed):
    cfg = _run_config(args, seed)
    cfg.oracle_config()
    if args.out is None:
        report = run_audit(cfg)
        print(human_summary(report), file=sys.stderr)
        _write_json(None, report)
    else:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "records.jsonl", "w") as fh:
            report = run_audit(cfg, fh)
        _write_json(out / "summary.json", report)
        print(human_summary(report))
    return EXIT_OK if report["status"] == "pass" else EXIT_FAIL


def _cmd_compare(args, seed):
    configs = []
    for path in args.config or []:
        try:
            configs.append(RunConfig.from_dict(json.loads(Path(path).read_text())))
        except (OSError, ValueError, TypeError) as exc:
            raise UsageError(f"bad config {path}: {exc}") from None
    for mode in args.mode or []:
        configs.append(_run_config(args, seed, mode))
    for c in configs:
        c.oracle_config()
    rows, reports = run_compare(configs)
    print(format_table(rows))
    if args.out is not None:
        _write_json(args.out, {"rows": rows, "reports": reports})
    return EXIT_OK if all(r["status"] == "pass" for r in rows) else EXIT_FAIL


def _cmd_dump(args, seed):
    cfg = _run_config(args, seed)
    space = cfg.dataset.load()
    oracle = CompositeOracle(space, cfg.oracle_config())
    inv = _invariants(oracle)
    _write_json(args.out, {"config": cfg.to_dict(), "invariants": inv,
                           "sizes": oracle.size_report()})
    return EXIT_FAIL if any(v["violations"] for v in inv.values()) else EXIT_OK


COMMANDS = {"gen": _cmd_gen, "audit": _cmd_audit, "compare": _cmd_compare,
            "dump-invariants": _cmd_dump}


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
        seed = args.seed if args.seed is not None else _default_seed()
        return COMMANDS[args.command](args, seed)
    except (UsageError, ParameterError) as exc:
        print(f"netoracle: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
