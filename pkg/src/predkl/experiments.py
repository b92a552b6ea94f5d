"""Batch experiments: config in, versioned ``RunRecord`` out.

Each experiment is a list of independent cells. Cell ``i`` draws from
``SeedSequence(seed, spawn_key=(i,))`` so its numbers depend only on the
config, never on scheduling; the record embeds the resolved config so a
rerun reproduces every cell bit for bit.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Optional

import numpy as np

from . import __version__
from .admissibility import admissibility_report, truncate_dominate
from .config import ExperimentConfig
from .core_model import ModelConfig
from .estimators import PredictiveProcedure, piecewise_density
from .priors import build_prior, make_uniform
from .risk_lab import average_risk_gap, kl_risk, kl_risk_diff, verify_bridge

SCHEMA_VERSION = 1
EXIT_PASS, EXIT_ERROR, EXIT_CHECK_FAILED = 0, 1, 2
PLOT_KINDS = ("risk-curve", "bridge", "blyth-gap")


@dataclass
class RunRecord:
    experiment: str
    config: dict
    cells: list = field(default_factory=list)
    checks: list = field(default_factory=list)
    status: str = "pass"
    error: Optional[str] = None
    wall_clock_seconds: float = 0.0
    started_at: str = ""
    artifact_version: str = __version__
    schema_version: int = SCHEMA_VERSION

    @property
    def exit_code(self) -> int:
        return {"pass": EXIT_PASS, "fail": EXIT_CHECK_FAILED}.get(self.status, EXIT_ERROR)

    def to_dict(self) -> dict:
        return {"schema_version": self.schema_version, "artifact_version": self.artifact_version,
                "experiment": self.experiment, "status": self.status, "error": self.error,
                "started_at": self.started_at, "wall_clock_seconds": self.wall_clock_seconds,
                "config": self.config, "checks": self.checks, "cells": self.cells}

    def to_json(self) -> str:
        return json.dumps(_clean(self.to_dict()), indent=2, sort_keys=True, ensure_ascii=False) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "RunRecord":
        if d.get("schema_version") != SCHEMA_VERSION:
            raise ValueError(f"unsupported schema version {d.get('schema_version')!r}")
        return cls(experiment=d["experiment"], config=d["config"], cells=d["cells"],
                   checks=d["checks"], status=d["status"], error=d.get("error"),
                   wall_clock_seconds=d.get("wall_clock_seconds", 0.0),
                   started_at=d.get("started_at", ""),
                   artifact_version=d.get("artifact_version", ""), schema_version=d["schema_version"])

    @classmethod
    def from_json(cls, text: str) -> "RunRecord":
        return cls.from_dict(json.loads(text))


def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else repr(x)
    return obj


def _cell_seed(cfg: ExperimentConfig, i: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(entropy=cfg.seed, spawn_key=(i,))


def _mu(cfg: ExperimentConfig, radius: float) -> np.ndarray:
    p = cfg.model.p
    direction = np.zeros(p) if cfg.mu_direction is None else np.asarray(cfg.mu_direction, float)
    if cfg.mu_direction is None:
        direction[0] = 1.0
    return radius * direction / np.linalg.norm(direction)


def _check(name, passed, **detail):
    return {"name": name, "passed": bool(passed), **detail}


# -- experiments -----------------------------------------------------------
def _risk_table(cfg):
    """KL risk of each prior's Bayes rule across the mu grid (CRN across priors)."""
    cells, checks = [], []
    model = cfg.model
    for j, radius in enumerate(cfg.mu_radii):
        row = {}
        for spec in cfg.priors:
            prior = build_prior(spec, model.p)
            est = kl_risk(model, _mu(cfg, radius), PredictiveProcedure.bayes(prior), cfg.budget,
                          _cell_seed(cfg, j), cfg.workers)
            row[spec.label()] = est
            cells.append({"prior": spec.label(), "mu_norm": radius, "risk": est.value,
                          "se": est.std_error, "n": est.n, "seed": est.seed})
        base = row.get("uniform")
        if base is None:
            continue
        for label, est in row.items():
            if label == "uniform":
                continue
            tol = 2.0 * math.hypot(est.std_error, base.std_error)
            checks.append(_check(f"{label} <= uniform at |mu|={radius:g}",
                                 est.value <= base.value + tol,
                                 risk=est.value, uniform=base.value, tolerance=tol))
    return cells, checks


def _dominance_scan(cfg):
    """Bayes KL risk via the exact uniform risk minus the paired risk difference."""
    cells, checks = [], []
    model = cfg.model
    uniform_risk = 0.5 * model.p * math.log1p(model.v_x / model.v_y)
    i = 0
    for spec in cfg.priors:
        prior = build_prior(spec, model.p)
        for radius in cfg.mu_radii:
            diff = kl_risk_diff(model, _mu(cfg, radius), prior, cfg.budget, _cell_seed(cfg, i),
                                cfg.workers)
            i += 1
            cells.append({"prior": spec.label(), "mu_norm": radius, "risk": uniform_risk - diff.value,
                          "se": diff.std_error, "improvement": diff.value, "n": diff.n,
                          "seed": diff.seed})
            checks.append(_check(f"{spec.label()} not worse than uniform at |mu|={radius:g}",
                                 diff.value >= -2.0 * diff.std_error,
                                 improvement=diff.value, se=diff.std_error))
    return cells, checks


def _verify_bridge(cfg):
    cells, checks = [], []
    i = 0
    for spec in cfg.priors:
        prior = build_prior(spec, cfg.model.p)
        for radius in cfg.mu_radii:
            rep = verify_bridge(cfg.model, _mu(cfg, radius), prior, cfg.budget, _cell_seed(cfg, i),
                                cfg.workers, cfg.bridge_nodes)
            i += 1
            cells.append({"prior": spec.label(), "mu_norm": radius, "lhs": rep.lhs.value,
                          "lhs_se": rep.lhs.std_error, "rhs": rep.rhs.value,
                          "rhs_bound": rep.rhs.error_bound, "discrepancy": rep.discrepancy,
                          "passed": rep.passed, "diagnosis": rep.diagnosis})
            checks.append(_check(f"bridge {spec.label()} |mu|={radius:g}", rep.passed,
                                 discrepancy=rep.discrepancy))
    return cells, checks


def _blyth_run(cfg):
    base = build_prior(cfg.priors[0], cfg.model.p)
    cells, gaps = [], []
    for i, n in enumerate(cfg.blyth_n):
        est = average_risk_gap(cfg.model, base, n, cfg.budget, _cell_seed(cfg, i), cfg.workers,
                               cfg.bridge_nodes)
        gaps.append(est)
        cells.append({"base": cfg.priors[0].label(), "n": n, "gap": est.value, "se": est.std_error,
                      "prior_mass": est.extra.get("prior_mass"), "seed": est.seed})
    checks = [_check(f"gap(n={n}) >= -2 SE", g.value >= -2.0 * g.std_error, gap=g.value)
              for n, g in zip(cfg.blyth_n, gaps)]
    for (n1, a), (n2, b) in zip(zip(cfg.blyth_n, gaps), zip(cfg.blyth_n[1:], gaps[1:])):
        tol = 2.0 * math.hypot(a.std_error, b.std_error)
        checks.append(_check(f"gap(n={n2}) <= gap(n={n1}) within 2 SE", b.value <= a.value + tol))
    if len(gaps) >= 2:
        checks.append(_check(f"gap(n={cfg.blyth_n[-1]}) < gap(n={cfg.blyth_n[0]}) / 2",
                             gaps[-1].value < 0.5 * gaps[0].value))
    return cells, checks


def _check_admissibility(cfg):
    dims = cfg.check_p or [cfg.model.p]
    cells, checks = [], []
    i = 0
    for spec in cfg.priors:
        for p in dims:
            try:
                prior = build_prior(spec, p)
            except ValueError as exc:
                cells.append({"prior": spec.label(), "p": p, "route": None, "skipped": str(exc)})
                continue
            model = ModelConfig(p, cfg.model.v_x, cfg.model.v_y)
            rep = admissibility_report(prior, p, model, cfg.flatness_budget, _cell_seed(cfg, i))
            i += 1
            cell = {"prior": spec.label(), "p": p, "route": rep.route, "notes": rep.notes}
            for name, v in rep.verdicts.items():
                cell[name] = [x.verdict for x in v] if isinstance(v, list) else v.verdict
            cell["report"] = rep.to_dict()
            cells.append(cell)
            if spec.kind == "uniform":
                expect = p <= 2
                checks.append(_check(f"uniform p={p} route {'passes' if expect else 'is None'}",
                                     (rep.route is not None) == expect, route=rep.route))
    return cells, checks


def _truncation_demo(cfg):
    g0 = piecewise_density(cfg.truncation_edges, cfg.truncation_values, label="g0")
    res = truncate_dominate(g0, cfg.model)
    cells, checks = [], []
    edges = sorted(set(res.density.breakpoints))
    mass = 0.0
    peak = -math.inf
    for a, b in zip(edges[:-1], edges[1:]):
        val = math.exp(float(res.density.logdensity(np.array([0.5 * (a + b)]))[0]))
        mass += val * (b - a)
        peak = max(peak, val)
    summary = {"c": res.c, "bound": res.bound, "region": [list(r) for r in res.region],
               "measure": res.measure, "mass": mass, "max_density": peak,
               "infinite_loss_g0": res.infinite_loss}
    cells.append({"kind": "construction", **summary})
    checks.append(_check("lift factor c > 1", res.c > 1.0, c=res.c))
    checks.append(_check("g integrates to 1", abs(mass - 1.0) <= 1e-9, mass=mass))
    checks.append(_check("g <= C", peak <= res.bound * (1 + 1e-12), max_density=peak))
    for mu in cfg.truncation_mu:
        gap = res.loss_gap(mu)
        cells.append({"kind": "loss-gap", "mu": mu, "loss_gap": gap})
        checks.append(_check(f"loss gap at mu={mu:g} > 1e-6", gap > 1e-6, loss_gap=gap))
    return cells, checks


_RUNNERS = {
    "risk-table": _risk_table,
    "dominance-scan": _dominance_scan,
    "verify-bridge": _verify_bridge,
    "blyth-run": _blyth_run,
    "check-admissibility": _check_admissibility,
    "truncation-demo": _truncation_demo,
}


def run(cfg: ExperimentConfig, write: bool = True) -> RunRecord:
    """Execute ``cfg`` and (optionally) write the record to ``cfg.output_path``.

    Numerical failures are stored in the record with status ``error``
    rather than raised.
    """
    started = datetime.now(timezone.utc).isoformat(timespec="seconds")
    t0 = time.perf_counter()
    record = RunRecord(cfg.experiment, cfg.to_dict(), started_at=started)
    try:
        cells, checks = _RUNNERS[cfg.experiment](cfg)
    except (ArithmeticError, RuntimeError, ValueError) as exc:
        record.status = "error"
        record.error = f"{type(exc).__name__}: {exc}"
    else:
        record.cells = _clean(cells)
        record.checks = _clean(checks)
        record.status = "pass" if all(c["passed"] for c in checks) else "fail"
    record.wall_clock_seconds = time.perf_counter() - t0
    if write and cfg.output_path:
        write_record(record, cfg.output_path, cfg.output_format)
    return record


def resolve_output(path: str) -> str:
    """Apply ``PREDKL_OUTPUT_DIR`` (it replaces only the directory part)."""
    override = os.environ.get("PREDKL_OUTPUT_DIR")
    if override:
        return os.path.join(override, os.path.basename(path))
    return path


def write_record(record: RunRecord, path: str, fmt: str = "json") -> str:
    path = resolve_output(path)
    parent = os.path.dirname(path)
    if parent:
        os.makedirs(parent, exist_ok=True)
    if fmt == "json":
        text = record.to_json()
    elif fmt == "csv":
        text = record_to_csv(record)
    else:
        raise ValueError(f"unknown format {fmt!r}")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    return path


def _scalar_columns(rows):
    cols = []
    for row in rows:
        for k, v in row.items():
            if k not in cols and not isinstance(v, (dict, list)):
                cols.append(k)
    return cols


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return "" if v is None else str(v)


def _csv(columns, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(columns + ["schema_version"])
    for row in rows:
        writer.writerow([_fmt(row.get(c)) for c in columns] + [SCHEMA_VERSION])
    return buf.getvalue()


def record_to_csv(record: RunRecord) -> str:
    """The scalar columns of every cell, one row per cell."""
    return _csv(_scalar_columns(record.cells), record.cells)


def default_plot_kind(record: RunRecord) -> str:
    return {"risk-table": "risk-curve", "dominance-scan": "risk-curve", "verify-bridge": "bridge",
            "blyth-run": "blyth-gap"}.get(record.experiment, "")


def plot_rows(record: RunRecord, kind: str):
    """Long-format rows for ``kind`` as ``(columns, rows)``."""
    if kind not in PLOT_KINDS:
        raise ValueError(f"unknown plot kind {kind!r} (choose from {', '.join(PLOT_KINDS)})")
    if kind == "risk-curve":
        if record.experiment not in ("risk-table", "dominance-scan"):
            raise ValueError(f"a {record.experiment} record has no risk curves")
        cols = ["prior", "mu_norm", "risk", "se"]
        return cols, [{c: cell[c] for c in cols} for cell in record.cells]
    if kind == "bridge":
        if record.experiment != "verify-bridge":
            raise ValueError(f"a {record.experiment} record has no bridge comparisons")
        rows = []
        for cell in record.cells:
            rows.append({"series": "lhs", "prior": cell["prior"], "mu_norm": cell["mu_norm"],
                         "value": cell["lhs"], "error": cell["lhs_se"]})
            rows.append({"series": "rhs", "prior": cell["prior"], "mu_norm": cell["mu_norm"],
                         "value": cell["rhs"], "error": cell["rhs_bound"]})
        return ["series", "prior", "mu_norm", "value", "error"], rows
    if record.experiment != "blyth-run":
        raise ValueError(f"a {record.experiment} record has no Blyth gaps")
    cols = ["n", "gap", "se"]
    return cols, [{c: cell[c] for c in cols} for cell in record.cells]


def emit_plotdata(record: RunRecord, kind: Optional[str] = None, path: Optional[str] = None) -> str:
    """Write (or return) the CSV table for ``kind``; returns the CSV text."""
    kind = kind or default_plot_kind(record)
    cols, rows = plot_rows(record, kind)
    text = _csv(cols, rows)
    if path:
        path = resolve_output(path)
        parent = os.path.dirname(path)
        if parent:
            os.makedirs(parent, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    return text


def read_csv(text: str):
    """Parse a table written by this module back into typed rows."""
    rows = list(csv.DictReader(io.StringIO(text)))
    out = []
    for row in rows:
        typed = {}
        for k, v in row.items():
            try:
                typed[k] = int(v)
            except ValueError:
                try:
                    typed[k] = float(v)
                except ValueError:
                    typed[k] = v
        out.append(typed)
    return out


def reproduce(record: RunRecord, workers: Optional[int] = None):
    """Re-run the embedded config; returns ``(identical, differences)``."""
    cfg = ExperimentConfig.from_dict(record.config)
    if workers is not None:
        cfg.workers = workers
    fresh = run(cfg, write=False)
    diffs = []

    def walk(a, b, path):
        if isinstance(a, dict) and isinstance(b, dict):
            for k in sorted(set(a) | set(b)):
                walk(a.get(k), b.get(k), f"{path}.{k}")
        elif isinstance(a, list) and isinstance(b, list) and len(a) == len(b):
            for i, (x, y) in enumerate(zip(a, b)):
                walk(x, y, f"{path}[{i}]")
        elif a != b:
            diffs.append((path, a, b))

    walk(_clean(record.cells), _clean(fresh.cells), "cells")
    return not diffs and record.status == fresh.status, diffs
