"""Run configuration: a flat ``key = value`` text file overridden by command-line flags.

Keys are the field names of ``RunConfig``.  Lists are comma separated,
``none`` stands for an unset optional value, ``#`` starts a comment, and a
key ``tol.<name>`` overrides one entry of the tolerance table.
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field, fields

from .verification import TOLERANCES, SweepConfig


class ConfigError(ValueError):
    """Unknown key or malformed value in a configuration source."""


@dataclass
class RunConfig:
    seed: int = 7
    n: int = 2
    N: int = 720
    R: float = 3.0
    eps: float = 0.05
    eps_list: tuple = (0.02, 0.01, 0.005)
    eps_compress: float = 0.02
    amplitude: float = 0.5
    modes: int = 32
    sigma: float | None = None
    busemann_samples: int = 50
    pairs: int = 100
    lambda_points: int = 20
    lattice: int = 50
    isometry_samples: int = 100
    jacobian_samples: int = 1000
    jacobian_perturbed: int = 20
    deficiency_train: int = 500
    deficiency_heldout: int = 500
    scaling_samples: int = 16
    det_line_samples: int = 20
    mc_points: int = 10
    mc_normals: int = 10
    mc_points_perturbed: int = 2
    mc_normals_perturbed: int = 3
    compression_samples: int = 1000
    compression_perturbed: int = 40
    fill_radius: float = 0.6
    fill_triangles: int = 2000
    fill_amplitude: float = 0.1
    tolerances: dict = field(default_factory=lambda: dict(TOLERANCES))
    # run plumbing; not part of the reproducibility hash
    out: str = "out"
    threads: int | None = None

    PLUMBING = ("out", "threads")

    def sweep(self) -> SweepConfig:
        names = {f.name for f in fields(SweepConfig)}
        return SweepConfig(**{k: v for k, v in self.persisted().items() if k in names})

    def persisted(self):
        d = {f.name: getattr(self, f.name) for f in fields(self) if f.name not in self.PLUMBING}
        d["eps_list"] = list(d["eps_list"])
        d["tolerances"] = {k: float(v) for k, v in sorted(d["tolerances"].items())}
        return d

    def hash(self):
        blob = json.dumps(self.persisted(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def _field_types():
    return {f.name: f for f in fields(RunConfig)}


def _convert(name, text):
    f = _field_types().get(name)
    if f is None:
        raise ConfigError(f"unknown configuration key {name!r}")
    text = str(text).strip()
    default = f.default if f.default is not dataclasses.MISSING else None
    try:
        if name == "eps_list":
            vals = tuple(float(v) for v in text.split(",") if v.strip())
            if not vals:
                raise ValueError("empty list")
            return vals
        if text.lower() == "none":
            if name in ("sigma", "threads"):
                return None
            raise ValueError("value required")
        if name in ("sigma", "threads"):
            return float(text) if name == "sigma" else int(text)
        if name == "out":
            return text
        if isinstance(default, bool):
            return text.lower() in ("1", "true", "yes")
        if isinstance(default, int):
            return int(text)
        if isinstance(default, float):
            return float(text)
    except ValueError as exc:
        raise ConfigError(f"bad value for {name}: {text!r} ({exc})") from exc
    raise ConfigError(f"key {name!r} cannot be set from text")


def parse_config_text(text):
    """Key-value pairs of a config file, in file order."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        k, v = (p.strip() for p in line.split("=", 1))
        out[k] = v
    return out


def build_config(path=None, overrides=None):
    """RunConfig from an optional file, then overrides (already parsed or text)."""
    cfg = RunConfig()
    items = {}
    if path:
        try:
            with open(path) as fh:
                items.update(parse_config_text(fh.read()))
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    items.update({k: v for k, v in (overrides or {}).items() if v is not None})
    tol = dict(cfg.tolerances)
    for k, v in items.items():
        if k.startswith("tol."):
            name = k[4:]
            if name not in tol:
                raise ConfigError(f"unknown tolerance {name!r}")
            try:
                tol[name] = float(v)
            except ValueError as exc:
                raise ConfigError(f"bad tolerance {k}: {v!r}") from exc
            continue
        setattr(cfg, k, v if not isinstance(v, str) else _convert(k, v))
    cfg.tolerances = tol
    validate(cfg)
    return cfg


def validate(cfg: RunConfig):
    if cfg.n not in (2, 3):
        raise ConfigError("n must be 2 or 3")
    if cfg.N < 4:
        raise ConfigError("N must be at least 4")
    if cfg.R <= 0:
        raise ConfigError("R must be positive")
    if not 0 <= cfg.eps <= 0.2 or not 0 <= cfg.eps_compress <= 0.2:
        raise ConfigError("bump amplitudes must lie in [0, 0.2]")
    if any(not 0 < e <= 0.2 for e in cfg.eps_list) or len(cfg.eps_list) < 2:
        raise ConfigError("eps_list needs at least two amplitudes in (0, 0.2]")
    if cfg.sigma is not None and cfg.sigma <= 0:
        raise ConfigError("sigma must be positive")
    if cfg.threads is not None and cfg.threads < 1:
        raise ConfigError("threads must be at least 1")


def write_config(cfg: RunConfig, path):
    """Persist the reproducible part of ``cfg`` in the key-value format."""
    with open(path, "w") as fh:
        for k, v in cfg.persisted().items():
            if k == "tolerances":
                for name, t in v.items():
                    fh.write(f"tol.{name} = {t!r}\n")
            elif k == "eps_list":
                fh.write(f"{k} = {','.join(repr(e) for e in v)}\n")
            else:
                fh.write(f"{k} = {'none' if v is None else v}\n")
