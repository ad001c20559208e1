"""Experiment configuration in a flat ``key = value`` text format.

One pair per line, ``#`` starts a comment, lists are comma separated.
Tabulated activations list their knots as ``x:y`` pairs.  Serialization
writes every field in a fixed order so that parse -> serialize -> parse is
idempotent.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field, fields

from .errors import ConfigError, DomainError
from .kernels import ActivationKind, ActivationSpec
from .synthesis import MAX_ELL

EXPERIMENTS = ("kernel", "spectrum", "simulate", "nodal", "fractal-scan", "variance-scan", "network-check")
ESTIMATORS = ("auto", "plain", "conditioned")
KERNEL_METHODS = ("auto", "quadrature")
NETWORK_METHODS = ("conditional", "direct", "explicit")
BAND_LIMITS = ("tied", "fixed")

# experiments that write one module-level CSV and so take a single depth
SINGLE_DEPTH = ("spectrum", "simulate", "network-check")
MONTE_CARLO = ("nodal", "fractal-scan", "network-check")


@dataclass
class ExperimentConfig:
    experiment: str = ""
    activation: str = "relu"
    activation_param: float | None = None
    activation_points: tuple = ()
    gamma_b: float = 0.0
    kernel_method: str = "auto"
    depths: tuple = (1,)
    levels: tuple = (0.0,)
    d: int = 2
    ell_max: int | str = 64
    ell_max_cap: int = 1024
    variance_deficit: float = 1e-3
    n_theta: int = 256
    n_phi: int = 512
    n_replicas: int = 200
    seed: int = 0
    replica: int = 0
    estimator: str = "auto"
    n_levels: int = 32
    resolutions: tuple = (64, 128, 256, 512)
    band_limit: str = "tied"
    width: int = 1000
    n_angles: int = 9
    network_method: str = "conditional"
    n_points: int = 101
    output: str = ""
    samples_output: str = ""

    def activation_spec(self):
        try:
            kind = ActivationKind(self.activation)
        except ValueError:
            raise ConfigError(f"unknown activation {self.activation!r}", "activation") from None
        try:
            if kind is ActivationKind.GAUSSIAN:
                return ActivationSpec.gaussian(_need(self.activation_param, "activation_param"))
            if kind is ActivationKind.LEAKY_RELU:
                return ActivationSpec.leaky_relu(_need(self.activation_param, "activation_param"))
            if kind is ActivationKind.TABULATED:
                return ActivationSpec.tabulated(self.activation_points)
            return ActivationSpec(kind)
        except DomainError as exc:
            name = "activation_points" if kind is ActivationKind.TABULATED else "activation_param"
            raise ConfigError(str(exc), name) from None

    @property
    def auto_band_limit(self):
        return self.ell_max == "auto"

    def validate(self):
        """Check every field against the preconditions of the modules it feeds."""
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}", "experiment")
        self.activation_spec()
        if not 0.0 <= self.gamma_b < 1.0:
            raise ConfigError("must lie in [0, 1)", "gamma_b")
        _choice(self, "kernel_method", KERNEL_METHODS)
        _choice(self, "estimator", ESTIMATORS)
        _choice(self, "band_limit", BAND_LIMITS)
        _choice(self, "network_method", NETWORK_METHODS)
        if not self.depths or any(L < 1 for L in self.depths):
            raise ConfigError("need positive depths", "depths")
        if self.experiment in SINGLE_DEPTH and len(self.depths) != 1:
            raise ConfigError(f"{self.experiment} takes a single depth", "depths")
        if not self.levels or not all(math.isfinite(u) for u in self.levels):
            raise ConfigError("need finite levels", "levels")
        if self.d < 2:
            raise ConfigError("sphere dimension must be at least 2", "d")
        if self.experiment in ("simulate", "nodal", "fractal-scan") and self.d != 2:
            raise ConfigError(f"{self.experiment} runs on S^2 only", "d")
        if self.auto_band_limit:
            if self.experiment not in ("nodal", "simulate"):
                raise ConfigError("auto band limit is only available for nodal and simulate", "ell_max")
        elif not 0 <= self.ell_max <= MAX_ELL:
            raise ConfigError(f"must lie in [0, {MAX_ELL}]", "ell_max")
        if self.experiment == "variance-scan" and not self.auto_band_limit and self.ell_max < 64:
            raise ConfigError("variance scan needs ell_max >= 64", "ell_max")
        if not 1 <= self.ell_max_cap <= MAX_ELL:
            raise ConfigError(f"must lie in [1, {MAX_ELL}]", "ell_max_cap")
        if not 0.0 < self.variance_deficit < 1.0:
            raise ConfigError("must lie in (0, 1)", "variance_deficit")
        if self.n_theta < 4:
            raise ConfigError("need at least 4 rows", "n_theta")
        if self.n_phi < 8 or self.n_phi % 2:
            raise ConfigError("need an even count of at least 8", "n_phi")
        if self.experiment in MONTE_CARLO and self.n_replicas < 2:
            raise ConfigError("need at least two replicas", "n_replicas")
        if self.seed < 0:
            raise ConfigError("must be non-negative", "seed")
        if self.replica < 0:
            raise ConfigError("must be non-negative", "replica")
        if self.n_levels < 1:
            raise ConfigError("must be positive", "n_levels")
        if self.experiment == "fractal-scan":
            res = list(self.resolutions)
            if len(res) < 3 or any(b != 2 * a for a, b in zip(res, res[1:])) or res[0] < 4:
                raise ConfigError("need at least three doubling resolutions", "resolutions")
        if self.width < 1:
            raise ConfigError("must be positive", "width")
        if self.n_angles < 1:
            raise ConfigError("must be positive", "n_angles")
        if self.n_points < 2:
            raise ConfigError("need at least two points", "n_points")
        return self


def _need(value, name):
    if value is None:
        raise ConfigError("required for this activation", name)
    return value


def _choice(cfg, name, allowed):
    if getattr(cfg, name) not in allowed:
        raise ConfigError(f"must be one of {', '.join(allowed)}", name)


# ---------------------------------------------------------------------------
# text format

def _int(text, name):
    try:
        return int(text)
    except ValueError:
        raise ConfigError(f"not an integer: {text!r}", name) from None


def _float(text, name):
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"not a number: {text!r}", name) from None


def _items(text):
    return [s.strip() for s in text.split(",") if s.strip()]


def _points(text, name):
    out = []
    for item in _items(text):
        x, sep, y = item.partition(":")
        if not sep:
            raise ConfigError(f"expected x:y, got {item!r}", name)
        out.append((_float(x, name), _float(y, name)))
    return tuple(out)


def _parse_value(name, text):
    if name in ("experiment", "activation", "kernel_method", "estimator", "band_limit",
                "network_method", "output", "samples_output"):
        return text
    if name == "activation_param":
        return None if text in ("", "none") else _float(text, name)
    if name == "activation_points":
        return _points(text, name)
    if name in ("depths", "resolutions"):
        return tuple(_int(s, name) for s in _items(text))
    if name == "levels":
        return tuple(_float(s, name) for s in _items(text))
    if name == "ell_max":
        return "auto" if text == "auto" else _int(text, name)
    if name in ("gamma_b", "variance_deficit"):
        return _float(text, name)
    return _int(text, name)


_FIELDS = [f.name for f in fields(ExperimentConfig)]


def parse_config(text):
    """ExperimentConfig from ``key = value`` text; not yet validated."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep:
            raise ConfigError(f"line {lineno}: expected 'key = value'", key or "line")
        if key not in _FIELDS:
            raise ConfigError(f"unknown key on line {lineno}", key)
        if key in values:
            raise ConfigError(f"duplicate key on line {lineno}", key)
        values[key] = _parse_value(key, value.strip())
    return ExperimentConfig(**values)


def load_config(path):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}", "config") from None
    return parse_config(text)


def _format(value):
    if value is None:
        return "none"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        parts = []
        for v in value:
            parts.append(f"{_format(v[0])}:{_format(v[1])}" if isinstance(v, tuple) else _format(v))
        return ", ".join(parts)
    return str(value)


def serialize_config(cfg):
    lines = []
    for name in _FIELDS:
        value = getattr(cfg, name)
        if name in ("gamma_b", "variance_deficit"):
            value = float(value)
        elif name == "levels":
            value = tuple(float(u) for u in value)
        lines.append(f"{name} = {_format(value)}")
    return "\n".join(lines) + "\n"


def with_overrides(cfg, **changes):
    changes = {k: v for k, v in changes.items() if v is not None}
    return dataclasses.replace(cfg, **changes)
