"""Line-oriented ``key = value`` experiment configuration.

Grammar::

    # comment
    experiment = risk-table
    model.p = 3
    model.v_x = 1
    model.v_y = 1            # or model.bound = C (sets v_y from the density bound)
    prior.1.kind = uniform
    prior.2.kind = power
    prior.2.b = 1
    prior.3.kind = blyth
    prior.3.n = 8
    prior.3.base.kind = uniform
    mu.radii = 0, 1, 2, 4
    mu.direction = 1, 0, 0   # optional, defaults to the first axis
    budget = 100000
    seed = 12345
    workers = 1
    output.path = run.json
    output.format = json

Experiment-specific keys: ``bridge.nodes``, ``blyth.n`` (list),
``check.p`` (list of dimensions), ``truncation.edges``, ``truncation.values``
and ``truncation.mu`` (lists), ``flatness.budget``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Optional

from .core_model import ModelConfig
from .errors import ConfigError
from .priors import PriorFamilySpec

EXPERIMENTS = ("risk-table", "verify-bridge", "dominance-scan", "blyth-run",
               "check-admissibility", "truncation-demo")
FORMATS = ("json", "csv")
PRIOR_KINDS = ("uniform", "power", "harmonic", "gaussian", "blyth")

_SCALAR_KEYS = {
    "experiment", "model.p", "model.v_x", "model.v_y", "model.bound", "mu.radii", "mu.direction",
    "budget", "seed", "workers", "output.path", "output.format", "bridge.nodes", "blyth.n",
    "check.p", "truncation.edges", "truncation.values", "truncation.mu", "flatness.budget",
}
_PRIOR_FIELDS = {"kind", "b", "tau2", "n"}
_LINE = re.compile(r"^\s*([A-Za-z0-9_.]+)\s*=\s*(.*?)\s*$")


@dataclass
class ExperimentConfig:
    experiment: str
    model: ModelConfig
    priors: list = field(default_factory=list)
    mu_radii: list = field(default_factory=lambda: [0.0])
    mu_direction: Optional[list] = None
    budget: int = 10000
    seed: int = 0
    workers: int = 1
    output_path: Optional[str] = None
    output_format: str = "json"
    bridge_nodes: int = 16
    blyth_n: list = field(default_factory=lambda: [2, 8, 32])
    check_p: list = field(default_factory=list)
    truncation_edges: list = field(default_factory=list)
    truncation_values: list = field(default_factory=list)
    truncation_mu: list = field(default_factory=list)
    flatness_budget: int = 4000

    def to_pairs(self) -> list:
        """Canonical ``(key, value)`` pairs; parsing them gives back this config."""
        out = [("experiment", self.experiment), ("model.p", str(self.model.p)),
               ("model.v_x", repr(float(self.model.v_x))), ("model.v_y", repr(float(self.model.v_y)))]
        for i, spec in enumerate(self.priors, start=1):
            out.extend(_prior_pairs(f"prior.{i}", spec))
        out.append(("mu.radii", _join(self.mu_radii)))
        if self.mu_direction is not None:
            out.append(("mu.direction", _join(self.mu_direction)))
        out += [("budget", str(self.budget)), ("seed", str(self.seed)), ("workers", str(self.workers))]
        if self.output_path is not None:
            out.append(("output.path", self.output_path))
        out.append(("output.format", self.output_format))
        out += [("bridge.nodes", str(self.bridge_nodes)), ("blyth.n", _join(self.blyth_n, int)),
                ("flatness.budget", str(self.flatness_budget))]
        if self.check_p:
            out.append(("check.p", _join(self.check_p, int)))
        for key, vals in (("truncation.edges", self.truncation_edges),
                          ("truncation.values", self.truncation_values),
                          ("truncation.mu", self.truncation_mu)):
            if vals:
                out.append((key, _join(vals)))
        return out

    def to_text(self) -> str:
        return "".join(f"{k} = {v}\n" for k, v in self.to_pairs())

    def to_dict(self) -> dict:
        return dict(self.to_pairs())

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        return parse_config("".join(f"{k} = {v}\n" for k, v in d.items()))


def _join(vals, kind=float):
    return ", ".join(str(int(v)) if kind is int else repr(float(v)) for v in vals)


def _prior_pairs(prefix, spec: PriorFamilySpec):
    out = [(f"{prefix}.kind", spec.kind)]
    if spec.b is not None:
        out.append((f"{prefix}.b", repr(float(spec.b))))
    if spec.tau2 is not None:
        out.append((f"{prefix}.tau2", repr(float(spec.tau2))))
    if spec.n is not None:
        out.append((f"{prefix}.n", str(int(spec.n))))
    if spec.base is not None:
        out.extend(_prior_pairs(f"{prefix}.base", spec.base))
    return out


def _number(text, key, line, kind=float):
    try:
        val = kind(text)
    except ValueError:
        raise ConfigError(f"expected {'an integer' if kind is int else 'a number'}, got {text!r}",
                          line, key) from None
    if kind is float and not math.isfinite(val):
        raise ConfigError(f"value must be finite, got {text!r}", line, key)
    return val


def _list(text, key, line, kind=float):
    parts = [t.strip() for t in text.split(",") if t.strip()]
    if not parts:
        raise ConfigError("expected a comma-separated list", line, key)
    return [_number(t, key, line, kind) for t in parts]


def _build_prior(tree, path, lines):
    where = lines.get(f"{path}.kind")
    if "kind" not in tree:
        raise ConfigError("prior is missing its kind", where or lines.get(path), f"{path}.kind")
    kind = tree["kind"][0]
    if kind not in PRIOR_KINDS:
        raise ConfigError(f"unknown prior kind {kind!r} (choose from {', '.join(PRIOR_KINDS)})",
                          tree["kind"][1], f"{path}.kind")

    def num(name, cast=float):
        if name not in tree:
            raise ConfigError(f"{kind} prior needs '{name}'", tree["kind"][1], f"{path}.{name}")
        return _number(tree[name][0], f"{path}.{name}", tree[name][1], cast)

    if kind == "power":
        return PriorFamilySpec("power", b=num("b"))
    if kind == "gaussian":
        tau2 = num("tau2")
        if not tau2 > 0:
            raise ConfigError("tau2 must be positive", tree["tau2"][1], f"{path}.tau2")
        return PriorFamilySpec("gaussian", tau2=tau2)
    if kind == "blyth":
        n = num("n", int)
        if n < 2:
            raise ConfigError("n must be at least 2", tree["n"][1], f"{path}.n")
        if "base" not in tree:
            raise ConfigError("blyth prior needs a base", tree["kind"][1], f"{path}.base.kind")
        return PriorFamilySpec("blyth", base=_build_prior(tree["base"], f"{path}.base", lines), n=n)
    return PriorFamilySpec(kind)


def parse_config(text: str) -> ExperimentConfig:
    """Parse the ``key = value`` grammar; errors carry line and field."""
    values, lines, prior_raw = {}, {}, {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        body = raw.split("#", 1)[0].strip()
        if not body:
            continue
        m = _LINE.match(body)
        if not m:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", lineno)
        key, val = m.group(1), m.group(2)
        if key in values or key in lines:
            raise ConfigError("duplicate key", lineno, key)
        lines[key] = lineno
        if key.startswith("prior."):
            parts = key.split(".")
            if len(parts) < 3 or not parts[1].isdigit():
                raise ConfigError("prior keys look like prior.<index>.<field>", lineno, key)
            node = prior_raw.setdefault(int(parts[1]), {})
            for part in parts[2:-1]:
                if part != "base":
                    raise ConfigError(f"unknown prior sub-key {part!r}", lineno, key)
                node = node.setdefault("base", {})
            if parts[-1] not in _PRIOR_FIELDS:
                raise ConfigError(f"unknown prior field {parts[-1]!r}", lineno, key)
            node[parts[-1]] = (val, lineno)
            continue
        if key not in _SCALAR_KEYS:
            if key.startswith("model."):
                raise ConfigError("only isotropic models with scalar variances v_x, v_y are supported",
                                  lineno, key)
            raise ConfigError("unknown key", lineno, key)
        values[key] = val

    def get(key, cast=float, default=None, required=False):
        if key not in values:
            if required:
                raise ConfigError("missing required key", None, key)
            return default
        return _number(values[key], key, lines[key], cast)

    experiment = values.get("experiment")
    if experiment is None:
        raise ConfigError("missing required key", None, "experiment")
    if experiment not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {experiment!r} (choose from {', '.join(EXPERIMENTS)})",
                          lines["experiment"], "experiment")
    p = get("model.p", int, required=True)
    v_x = get("model.v_x", required=True)
    if "model.v_y" in values and "model.bound" in values:
        raise ConfigError("give either model.v_y or model.bound, not both", lines["model.bound"],
                          "model.bound")
    if "model.bound" in values:
        bound = get("model.bound")
        if not bound > 0:
            raise ConfigError("bound must be positive", lines["model.bound"], "model.bound")
        v_y = 1.0 / (2.0 * math.pi * bound ** (2.0 / p))
    else:
        v_y = get("model.v_y", required=True)
    try:
        model = ModelConfig(p, v_x, v_y)
    except ValueError as exc:
        key = "model.p" if "p must" in str(exc) else ("model.v_x" if "v_x" in str(exc) else "model.v_y")
        raise ConfigError(str(exc), lines.get(key), key) from None

    priors = [_build_prior(prior_raw[i], f"prior.{i}", lines) for i in sorted(prior_raw)]
    fmt = values.get("output.format", "json")
    if fmt not in FORMATS:
        raise ConfigError(f"format must be one of {', '.join(FORMATS)}", lines["output.format"],
                          "output.format")

    def lst(key, cast=float, default=None):
        return _list(values[key], key, lines[key], cast) if key in values else default

    cfg = ExperimentConfig(
        experiment=experiment, model=model, priors=priors,
        mu_radii=lst("mu.radii", default=[0.0]), mu_direction=lst("mu.direction"),
        budget=get("budget", int, 10000), seed=get("seed", int, 0), workers=get("workers", int, 1),
        output_path=values.get("output.path"), output_format=fmt,
        bridge_nodes=get("bridge.nodes", int, 16), blyth_n=lst("blyth.n", int, [2, 8, 32]),
        check_p=lst("check.p", int, []), truncation_edges=lst("truncation.edges", default=[]),
        truncation_values=lst("truncation.values", default=[]),
        truncation_mu=lst("truncation.mu", default=[]),
        flatness_budget=get("flatness.budget", int, 4000),
    )
    _validate(cfg, lines)
    return cfg


def _validate(cfg: ExperimentConfig, lines):
    if cfg.budget < 1:
        raise ConfigError("budget must be positive", lines.get("budget"), "budget")
    if cfg.workers < 1:
        raise ConfigError("workers must be positive", lines.get("workers"), "workers")
    if not 0 <= cfg.seed < 2**64:
        raise ConfigError("seed must be a 64-bit unsigned integer", lines.get("seed"), "seed")
    if any(r < 0 for r in cfg.mu_radii):
        raise ConfigError("radii must be nonnegative", lines.get("mu.radii"), "mu.radii")
    if cfg.mu_direction is not None:
        if len(cfg.mu_direction) != cfg.model.p:
            raise ConfigError(f"direction needs {cfg.model.p} entries", lines.get("mu.direction"),
                              "mu.direction")
        if not any(cfg.mu_direction):
            raise ConfigError("direction must be non-zero", lines.get("mu.direction"), "mu.direction")
    if cfg.bridge_nodes < 4:
        raise ConfigError("need at least 4 nodes", lines.get("bridge.nodes"), "bridge.nodes")
    needs_prior = cfg.experiment not in ("truncation-demo",)
    if needs_prior and not cfg.priors:
        raise ConfigError(f"{cfg.experiment} needs at least one prior", None, "prior.1.kind")
    if cfg.experiment == "blyth-run":
        if cfg.model.p > 2:
            raise ConfigError("blyth-run requires p <= 2", lines.get("model.p"), "model.p")
        if any(n < 2 for n in cfg.blyth_n):
            raise ConfigError("Blyth indices must be >= 2", lines.get("blyth.n"), "blyth.n")
    if cfg.experiment == "truncation-demo":
        if cfg.model.p != 1:
            raise ConfigError("truncation-demo runs in one dimension", lines.get("model.p"), "model.p")
        if len(cfg.truncation_values) != len(cfg.truncation_edges) - 1:
            raise ConfigError("need one value per interval between edges",
                              lines.get("truncation.values"), "truncation.values")
        if not cfg.truncation_mu:
            raise ConfigError("missing required key", None, "truncation.mu")
