"""Experiment configuration: YAML files, parameter paths, seeds and sweeps.

Configs are plain nested mappings loaded from YAML.  Keys carry their unit
(``length_km``, ``bandwidth_ghz``, ``delay_ps``).  A parameter path is a
dotted string where integer components index lists, e.g.
``fiber.0.length_km`` or ``network.loop.gain``.
"""

from __future__ import annotations

import copy
import hashlib
import itertools
import zlib

import numpy as np
import yaml


class ConfigError(ValueError):
    pass


def load_config(path) -> dict:
    with open(path) as fh:
        return parse_config(fh.read())


def parse_config(text: str) -> dict:
    cfg = yaml.safe_load(text)
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a mapping at top level")
    return cfg


def dump_config(cfg: dict) -> str:
    """Serialise so that ``parse_config(dump_config(c)) == c`` (floats via repr)."""
    return yaml.safe_dump(cfg, sort_keys=False, default_flow_style=None, width=100)


def save_config(cfg: dict, path) -> None:
    with open(path, "w") as fh:
        fh.write(dump_config(cfg))


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(dump_config(cfg).encode()).hexdigest()[:16]


def _split(path: str):
    if not path:
        raise ConfigError("empty parameter path")
    return [int(p) if p.lstrip("-").isdigit() else p for p in path.split(".")]


def get_path(cfg, path: str):
    node = cfg
    for part in _split(path):
        try:
            node = node[part]
        except (KeyError, IndexError, TypeError):
            raise ConfigError(f"parameter path {path!r} does not exist") from None
    return node


def set_path(cfg, path: str, value, create: bool = False) -> dict:
    """Copy of ``cfg`` with ``path`` set; missing keys are an error unless ``create``."""
    out = copy.deepcopy(cfg)
    parts = _split(path)
    node = out
    for part in parts[:-1]:
        if isinstance(part, str) and create and part not in node:
            node[part] = {}
        try:
            node = node[part]
        except (KeyError, IndexError, TypeError):
            raise ConfigError(f"parameter path {path!r} does not exist") from None
    last = parts[-1]
    if isinstance(node, dict):
        if last not in node and not create:
            raise ConfigError(f"parameter path {path!r} does not exist")
        node[last] = value
    else:
        try:
            node[last] = value
        except (IndexError, TypeError):
            raise ConfigError(f"parameter path {path!r} does not exist") from None
    return out


def derive_seed(master: int, *stage) -> int:
    """Deterministic 63-bit seed for a named stage, independent across stage names."""
    key = tuple(zlib.crc32(str(s).encode()) for s in stage)
    ss = np.random.SeedSequence(entropy=int(master), spawn_key=key)
    a, b = ss.generate_state(2, dtype=np.uint32)
    return int((int(a) << 31) ^ int(b))


class Seeds:
    """Per-stage seeds from ``cfg["seed"]``; ``cfg["seed_overrides"]`` pins single stages."""

    def __init__(self, master: int, overrides: dict | None = None):
        self.master = int(master)
        self.overrides = dict(overrides or {})

    @classmethod
    def from_config(cls, cfg: dict) -> "Seeds":
        return cls(cfg.get("seed", 0), cfg.get("seed_overrides"))

    def __call__(self, *stage) -> int:
        name = ".".join(str(s) for s in stage)
        if name in self.overrides:
            return int(self.overrides[name])
        return derive_seed(self.master, *stage)


def sweep_points(cfg: dict, axes=None) -> list[tuple[dict, dict]]:
    """Cartesian product of sweep axes.

    ``axes`` (default ``cfg["sweep"]``) maps parameter paths to value lists.
    Paths may also be tuples of paths swept together (zip), written in
    YAML as ``"a.b,c.d": [[1, 2], [3, 4]]``.  Returns ``(point_params,
    resolved_config)`` pairs in row-major order.
    """
    axes = cfg.get("sweep", {}) if axes is None else axes
    names = list(axes)
    for name, vals in axes.items():
        if not isinstance(vals, (list, tuple)) or len(vals) == 0:
            raise ConfigError(f"sweep axis {name!r} needs a non-empty list of values")
        for p in name.split(","):
            get_path(cfg, p.strip())
    base = {k: v for k, v in cfg.items() if k != "sweep"}
    points = []
    for combo in itertools.product(*(axes[n] for n in names)):
        c = base
        params = {}
        for name, val in zip(names, combo):
            paths = [p.strip() for p in name.split(",")]
            vals = val if len(paths) > 1 else [val]
            if len(vals) != len(paths):
                raise ConfigError(f"sweep axis {name!r}: value {val!r} does not match its paths")
            for p, v in zip(paths, vals):
                c = set_path(c, p, v)
                params[p] = v
        points.append((params, c))
    return points
