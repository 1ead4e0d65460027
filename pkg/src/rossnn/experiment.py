"""Declarative experiment runner.

An experiment config names a ``task`` (``equalize``, ``narma``, ``memcap``
or ``fading``), the component sections the task reads, an optional
``sweep`` (see :func:`rossnn.config.sweep_points`) and optional
``assertions``.  Every sweep point yields a list of records; records of all
points are merged in point order and written to ``results.csv``.

Result columns: ``point``, ``config_hash``, ``params`` (JSON of the swept
values), ``task``, ``variant``, ``metric``, ``value``, ``n``,
``wall_time_s``, ``status`` and ``reason``.  In deterministic mode the wall
time column is left empty (timings go to ``timing.csv``) so that reruns are
byte-identical.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import operator
import os
import tempfile
import time
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .benchmarks import (
    fading_profile, run_memory_capacity, run_narma_experiment,
)
from .config import ConfigError, config_hash, derive_seed, save_config, sweep_points
from .fiber import FiberSpec
from .network import PerturbationSpec, build_topology, perturb_topology
from .pipeline import run_transmission

log = logging.getLogger(__name__)

TASKS = ("equalize", "narma", "memcap", "fading")
COLUMNS = ("point", "config_hash", "params", "task", "variant", "metric", "value", "n",
           "wall_time_s", "status", "reason")
# reference levels reported next to BER results
FEC_LIMITS = {"HD-FEC": 3.8e-3, "HD-FEC-5e-3": 5e-3, "SD-FEC": 2e-2}


class ExperimentError(ValueError):
    pass


@dataclass(frozen=True)
class Record:
    variant: str
    metric: str
    value: float
    n: int = 0


@dataclass
class PointResult:
    index: int
    params: dict
    config_hash: str
    records: list = field(default_factory=list)
    wall_time: float = 0.0
    status: str = "ok"
    reason: str = ""
    artifacts: dict = field(default_factory=dict)


# -- tasks ----------------------------------------------------------------

def _task_equalize(cfg):
    out = []
    for r in run_transmission(cfg):
        out.append(Record(r["variant"], "BER", r["ber"], r["n_symbols"]))
        out.append(Record(r["variant"], "SER", r["ser"], r["n_symbols"]))
    out += [Record("reference", name, v, 0) for name, v in FEC_LIMITS.items()]
    return out, {}


def _task_narma(cfg):
    topo = build_topology(cfg["network"]) if cfg.get("network") else None
    ideal = run_narma_experiment(topo, cfg)
    out = [Record("ideal", "NMSE", ideal.nmse, ideal.n_test)]
    pc = cfg.get("perturbation")
    if pc and topo is not None:
        n_inst = int(pc.get("instances", 50))
        base_seed = int(pc.get("seed", derive_seed(cfg.get("seed", 0), "perturbation")))
        vals = []
        for k in range(n_inst):
            spec = PerturbationSpec(float(pc.get("relative_jitter", 0.1)), float(pc.get("n_eff_std", 0.15)),
                                    derive_seed(base_seed, k), float(pc.get("n_eff", 2.6)))
            r = run_narma_experiment(perturb_topology(topo, spec), cfg)
            vals.append(r.nmse)
            out.append(Record(f"instance_{k:03d}", "NMSE", r.nmse, r.n_test))
        out.append(Record("ensemble", "NMSE_mean", float(np.mean(vals)), n_inst))
        out.append(Record("ensemble", "NMSE_std", float(np.std(vals)), n_inst))
        out.append(Record("ensemble", "NMSE_max", float(np.max(vals)), n_inst))
    return out, {}


def _task_memcap(cfg):
    topo = build_topology(cfg["network"]) if cfg.get("network") else None
    mc, m = run_memory_capacity(topo, cfg)
    n = int((cfg.get("memcap") or {}).get("n_symbols", 8192))
    out = [Record("system", "MC", mc, n)]
    out += [Record("system", f"m_{i + 1}", float(v), n) for i, v in enumerate(m)]
    return out, {}


def _task_fading(cfg):
    fc = cfg.get("fading") or {}
    fibers = cfg.get("fiber") or []
    if len(fibers) != 1:
        raise ExperimentError("the fading task takes exactly one fibre span")
    prof = fading_profile(FiberSpec.from_config(fibers[0]),
                          sample_rate=float(fc.get("sample_rate_ghz", 320.0)) * 1e9,
                          n=int(fc.get("n_samples", 2**14)), n_tones=int(fc.get("n_tones", 256)),
                          f_max=float(fc.get("f_max_ghz", 60.0)) * 1e9,
                          depth=float(fc.get("depth", 1e-3)),
                          power=1e-3 * 10 ** (float(fc.get("power_dbm", 0.0)) / 10),
                          seed=derive_seed(cfg.get("seed", 0), "fading"))
    out = [Record(f"null_{k}", "null_freq", float(f), prof.frequency.size) for k, f in enumerate(prof.nulls)]
    out += [Record(f"null_{k}", "analytic_null_freq", float(f), 0) for k, f in enumerate(prof.analytic_nulls)]
    return out, {"spectrum": prof}


_TASKS = {"equalize": _task_equalize, "narma": _task_narma, "memcap": _task_memcap, "fading": _task_fading}


def run_point(index: int, params: dict, cfg: dict) -> PointResult:
    """Evaluate one resolved config; failures are captured, not raised."""
    res = PointResult(index, params, config_hash(cfg))
    task = cfg.get("task", "equalize")
    t0 = time.perf_counter()
    try:
        if task not in _TASKS:
            raise ExperimentError(f"unknown task {task!r}; choose one of {TASKS}")
        res.records, res.artifacts = _TASKS[task](cfg)
    except Exception as exc:  # isolate the point
        res.status = "failed"
        res.reason = f"{type(exc).__name__}: {exc}"
        log.warning("point %d failed: %s", index, res.reason)
        log.debug("%s", traceback.format_exc())
    res.wall_time = time.perf_counter() - t0
    return res


def _point_seed(cfg: dict, index: int, n_points: int) -> dict:
    mode = cfg.get("sweep_seeds", "per_point")
    if mode == "shared" or n_points == 1:
        return cfg
    if mode != "per_point":
        raise ConfigError(f"sweep_seeds must be 'per_point' or 'shared', got {mode!r}")
    return {**cfg, "seed": derive_seed(cfg.get("seed", 0), "point", index)}


def expand(cfg: dict):
    """Resolved ``(index, params, config)`` work items, in row-major sweep order."""
    if cfg.get("sweep"):
        pts = sweep_points(cfg)
    else:
        pts = [({}, {k: v for k, v in cfg.items() if k != "sweep"})]
    return [(i, p, _point_seed(c, i, len(pts))) for i, (p, c) in enumerate(pts)]


def _star(args):
    return run_point(*args)


def run(cfg: dict, workers: int = 1) -> list[PointResult]:
    """Run every sweep point; the result order is the point order regardless of workers."""
    items = expand(cfg)
    if workers <= 1 or len(items) == 1:
        return [run_point(*it) for it in items]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        results = list(ex.map(_star, items))
    return sorted(results, key=lambda r: r.index)


# -- output ---------------------------------------------------------------

def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def results_table(results, task: str, deterministic: bool = False) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(COLUMNS)
    for r in results:
        params = json.dumps(r.params, sort_keys=True)
        wt = "" if deterministic else f"{r.wall_time:.3f}"
        if r.status != "ok":
            wr.writerow([r.index, r.config_hash, params, task, "", "", "", "", wt, r.status, r.reason])
            continue
        for rec in r.records:
            wr.writerow([r.index, r.config_hash, params, task, rec.variant, rec.metric,
                         _fmt(float(rec.value)), rec.n, wt, r.status, ""])
    return buf.getvalue()


def _atomic_write(path: str, text: str) -> None:
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-")
    with os.fdopen(fd, "w", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def write_outputs(cfg: dict, results, out_dir: str, deterministic: bool = False) -> str:
    os.makedirs(out_dir, exist_ok=True)
    task = cfg.get("task", "equalize")
    path = os.path.join(out_dir, "results.csv")
    _atomic_write(path, results_table(results, task, deterministic))
    save_config(cfg, os.path.join(out_dir, "resolved_config.yaml"))
    timing = "point,wall_time_s\n" + "".join(f"{r.index},{r.wall_time:.3f}\n" for r in results)
    _atomic_write(os.path.join(out_dir, "timing.csv"), timing)
    for r in results:
        prof = r.artifacts.get("spectrum")
        if prof is not None:
            os.makedirs(os.path.join(out_dir, "spectra"), exist_ok=True)
            prof.to_csv(os.path.join(out_dir, "spectra", f"point_{r.index:04d}.csv"))
    return path


# -- assertions -----------------------------------------------------------

_OPS = {"<=": operator.le, "<": operator.lt, ">=": operator.ge, ">": operator.gt, "==": operator.eq}
_REDUCE = {"min": np.min, "max": np.max, "mean": np.mean}


def _select(results, where: dict):
    vals = []
    for r in results:
        if r.status != "ok":
            continue
        if any(r.params.get(k) != v for k, v in (where.get("params") or {}).items()):
            continue
        for rec in r.records:
            if "metric" in where and rec.metric != where["metric"]:
                continue
            if "variant" in where and rec.variant != where["variant"]:
                continue
            vals.append(float(rec.value))
    return np.array(vals)


@dataclass(frozen=True)
class AssertionOutcome:
    name: str
    passed: bool
    detail: str
    acceptance: bool


def check_assertions(cfg: dict, results) -> list[AssertionOutcome]:
    """Evaluate ``cfg["assertions"]``.

    Each entry has ``name``, a selector (``metric``, optional ``variant`` and
    ``params``), an ``op`` and either ``value`` or a ``ref`` selector times
    ``factor`` plus ``offset``.  ``reduce`` (``all`` by default, or ``min``/``max``/``mean``)
    collapses the selected values; with ``all`` every value must pass.
    Entries tagged ``acceptance: true`` decide the exit code.
    """
    out = []
    for a in cfg.get("assertions") or []:
        name = a.get("name", a.get("metric", "?"))
        op = _OPS[a.get("op", "<=")]
        vals = _select(results, a)
        red = a.get("reduce", "all")
        if vals.size == 0:
            out.append(AssertionOutcome(name, False, "no matching records", bool(a.get("acceptance"))))
            continue
        if "ref" in a:
            ref = _select(results, a["ref"])
            if ref.size == 0:
                out.append(AssertionOutcome(name, False, "no reference records", bool(a.get("acceptance"))))
                continue
            bound = (float(_REDUCE[a["ref"].get("reduce", "min")](ref)) * float(a.get("factor", 1.0))
                     + float(a.get("offset", 0.0)))
        else:
            bound = float(a["value"])
        if red == "all":
            ok = bool(all(op(v, bound) for v in vals))
            shown = vals.max() if a.get("op", "<=") in ("<=", "<") else vals.min()
        else:
            shown = float(_REDUCE[red](vals))
            ok = bool(op(shown, bound))
        out.append(AssertionOutcome(name, ok, f"{shown:.4g} {a.get('op', '<=')} {bound:.4g}",
                                    bool(a.get("acceptance"))))
    return out
