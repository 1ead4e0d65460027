"""Multi-bank recurrent spectrum-slicing networks.

A network splits its input equally over ``N_B`` banks.  A bank is a chain of
add/drop rings connected through-port to input, with the drop ports as the
network outputs, optionally enclosed by one shared feedback loop
(``loop_mode="bank"``: the loop filter is the whole through-port cascade) or
by one loop per ring (``loop_mode="per_filter"``).  A bank holding a single
two-port filter (MZDI or Butterworth) is exactly one filter-in-a-loop node.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import Union

import numpy as np

from .filters import (
    ButterworthSpec, FilterError, MrrSpec, MzdiSpec, RecurrentNodeSpec, StabilityError,
    butterworth_response, mrr_coupling_for_bandwidth, mrr_response, mzdi_response,
    node_response, db_per_cm_to_loss,
)
from .signal import FrequencyResponse, SampledWaveform

log = logging.getLogger(__name__)

FilterSpec = Union[MrrSpec, MzdiSpec, ButterworthSpec]

GHZ = 1e9
PS = 1e-12


class TopologyError(ValueError):
    pass


@dataclass(frozen=True)
class LoopSpec:
    """Feedback loop parameters: couplers ``a``/``b``, VOA amplitude ``gain``."""

    a: float = 0.5
    b: float = 0.5
    gain: float = 0.0
    delay: float = 0.0
    phase: float = 0.0

    def __post_init__(self):
        if not (0 <= self.a < 1 and 0 <= self.b < 1):
            raise TopologyError(f"loop couplers must lie in [0, 1), got a={self.a}, b={self.b}")
        if not 0 <= self.gain <= 1:
            raise TopologyError(f"loop gain must lie in [0, 1], got {self.gain}")
        if self.delay < 0:
            raise TopologyError("loop delay must be non-negative")

    @property
    def feedback(self) -> float:
        return float(np.sqrt(self.a * self.b) * self.gain)

    def factor(self, f):
        """``sqrt(ab) * L * exp(-i(2 pi f T_d + phi))``."""
        return self.feedback * np.exp(-1j * (2 * np.pi * f * self.delay + self.phase))


@dataclass(frozen=True)
class BankSpec:
    filters: tuple
    loop: LoopSpec | None = None
    transmissions: tuple = ()
    delays: tuple = ()
    phases: tuple = ()
    loop_mode: str = "bank"

    def __post_init__(self):
        filters = tuple(self.filters)
        object.__setattr__(self, "filters", filters)
        n_conn = max(len(filters) - 1, 0)
        for name, default in (("transmissions", 1.0), ("delays", 0.0), ("phases", 0.0)):
            v = tuple(float(x) for x in getattr(self, name))
            if not v:
                v = (default,) * n_conn
            if len(v) != n_conn:
                raise TopologyError(f"{name} needs {n_conn} entries, got {len(v)}")
            object.__setattr__(self, name, v)
        if not filters:
            raise TopologyError("a bank needs at least one filter")
        if any(not isinstance(f, MrrSpec) for f in filters) and len(filters) > 1:
            raise TopologyError("only add/drop rings can be chained inside a bank")
        if any(not 0 < t <= 1 for t in self.transmissions):
            raise TopologyError(f"inter-filter transmission must lie in (0, 1], got {self.transmissions}")
        if self.loop_mode not in ("bank", "per_filter"):
            raise TopologyError(f"unknown loop_mode {self.loop_mode!r}")
        if self.loop is not None:
            # the enclosed filters are passive, so sup|H| <= 1
            margin = self.loop.feedback
            if not margin < 1:
                raise StabilityError(margin)

    @property
    def n_filters(self) -> int:
        return len(self.filters)

    @property
    def centers(self) -> list[float]:
        return [f.f0 for f in self.filters]

    @property
    def center_detuning(self) -> float:
        return self.filters[0].f0

    @property
    def filter_spacing(self) -> float:
        c = self.centers
        return float(c[1] - c[0]) if len(c) > 1 else 0.0


@dataclass(frozen=True)
class NetworkTopology:
    banks: tuple

    def __post_init__(self):
        banks = tuple(self.banks)
        if not banks:
            raise TopologyError("a network needs at least one bank")
        object.__setattr__(self, "banks", banks)

    @property
    def n_banks(self) -> int:
        return len(self.banks)

    @property
    def n_outputs(self) -> int:
        return sum(b.n_filters for b in self.banks)

    @property
    def split(self) -> float:
        """Amplitude factor of the equal, lossless input splitter."""
        return 1.0 / np.sqrt(self.n_banks)


@dataclass(frozen=True)
class PerturbationSpec:
    """Fabrication jitter.

    ``relative_jitter`` is the half-width of the uniform multiplicative
    jitter on ring centre frequencies and connection transmissions;
    ``n_eff_std`` the standard deviation of the effective-index error of
    each connecting waveguide.
    """

    relative_jitter: float = 0.1
    n_eff_std: float = 0.15
    seed: int = 0
    n_eff: float = 2.6
    carrier_frequency: float = 193.4e12

    def __post_init__(self):
        if self.relative_jitter < 0 or self.n_eff_std < 0:
            raise TopologyError("perturbation magnitudes must be non-negative")


# -- transfer functions ---------------------------------------------------

def _two_port(spec) -> FrequencyResponse:
    if isinstance(spec, MzdiSpec):
        return mzdi_response(spec)
    if isinstance(spec, ButterworthSpec):
        return butterworth_response(spec)
    raise TopologyError(f"not a two-port filter: {spec!r}")


def _connection(bank: BankSpec, i: int, f):
    return bank.transmissions[i] * np.exp(-1j * (2 * np.pi * f * bank.delays[i] + bank.phases[i]))


def bank_transfer(bank: BankSpec, f) -> np.ndarray:
    """Output responses of one bank (before the splitter), shape ``(n_filters, len(f))``."""
    f = np.asarray(f, dtype=float)
    loop = bank.loop
    if not isinstance(bank.filters[0], MrrSpec):
        H = _two_port(bank.filters[0])
        if loop is None:
            return H(f)[None, :]
        node = RecurrentNodeSpec(H, loop.a, loop.b, loop.gain, loop.delay, loop.phase)
        return node_response(node)(f)[None, :]

    thru = [mrr_response(s, "through")(f) for s in bank.filters]
    drop = [mrr_response(s, "drop")(f) for s in bank.filters]
    out = np.empty((bank.n_filters, f.size), dtype=np.complex128)

    if loop is None or bank.loop_mode == "bank":
        entry = np.ones(f.size, dtype=np.complex128)
        prefix = []
        for j in range(bank.n_filters):
            prefix.append(entry)
            entry = entry * thru[j]
            if j < bank.n_filters - 1:
                entry = entry * _connection(bank, j, f)
        if loop is None:
            circ = np.ones(f.size, dtype=np.complex128)
        else:
            # entry now holds the full through-port cascade closing the loop
            circ = np.sqrt(1.0 - loop.a) / (1.0 + loop.factor(f) * entry)
        for j in range(bank.n_filters):
            out[j] = circ * prefix[j] * drop[j]
        return out

    x = np.ones(f.size, dtype=np.complex128)
    g = loop.factor(f)
    for j in range(bank.n_filters):
        circ = np.sqrt(1.0 - loop.a) * x / (1.0 + g * thru[j])
        out[j] = circ * drop[j]
        x = np.sqrt(1.0 - loop.b) * thru[j] * circ
        if j < bank.n_filters - 1:
            x = x * _connection(bank, j, f)
    return out


def network_transfer(t: NetworkTopology, f) -> np.ndarray:
    """All output responses, shape ``(n_outputs, len(f))``, bank-major order."""
    return np.concatenate([bank_transfer(b, f) for b in t.banks], axis=0) * t.split


def network_responses(t: NetworkTopology) -> list[FrequencyResponse]:
    responses = []
    offset = 0
    for bank in t.banks:
        for j in range(bank.n_filters):
            def func(f, bank=bank, j=j):
                return bank_transfer(bank, f)[j] * t.split
            spec = bank.filters[j]
            bw = getattr(spec, "bandwidth", np.nan)
            if isinstance(spec, ButterworthSpec):
                bw = 2 * spec.f_3db
            responses.append(FrequencyResponse(func, bw, spec.f0, f"out{offset + j}", 1.0))
        offset += bank.n_filters
    return responses


def process(w: SampledWaveform, t: NetworkTopology) -> list[SampledWaveform]:
    """Optical field at every drop port (or node output)."""
    f = np.fft.fftfreq(len(w), d=w.dt) + w.center_offset
    H = network_transfer(t, f)
    if not np.all(np.isfinite(H)):
        raise TopologyError("network response is not finite on the waveform grid")
    X = np.fft.fft(w.samples)
    return [w.with_samples(np.fft.ifft(X * h)) for h in H]


# -- construction ---------------------------------------------------------

def _filter_from_cfg(fc: dict, f0: float, i: int = 0, j: int = 0) -> FilterSpec:
    kind = fc.get("type", "mrr")
    bw = fc.get("bandwidth_ghz")
    if isinstance(bw, (list, tuple)):
        # one row per bank, one entry per filter
        try:
            bw = bw[i][j] if isinstance(bw[i], (list, tuple)) else bw[i]
        except IndexError:
            raise TopologyError("bandwidth_ghz table does not match the network shape") from None
        fc = {**fc, "bandwidth_ghz": bw}
    if kind == "mrr":
        radius = fc.get("radius_um", 55.0) * 1e-6
        n_eff = fc.get("n_eff", 2.6)
        loss = db_per_cm_to_loss(fc.get("loss_db_per_cm", 0.4))
        length = 2 * np.pi * radius
        if "bandwidth_ghz" in fc:
            k = mrr_coupling_for_bandwidth(fc["bandwidth_ghz"] * GHZ, length, n_eff, loss)
        else:
            k = fc.get("coupling", 0.4)
        return MrrSpec.symmetric(k, length, n_eff, loss, f0)
    if kind == "mzdi":
        return MzdiSpec.from_bandwidth(fc["bandwidth_ghz"] * GHZ, f0)
    if kind == "butterworth":
        return ButterworthSpec(int(fc.get("order", 1)), fc["bandwidth_ghz"] * GHZ / 2, f0)
    raise TopologyError(f"unknown filter type {kind!r}")


def filter_centers(cfg: dict) -> list[list[float]]:
    """Per-bank centre frequencies (Hz) from a network config section."""
    nb = int(cfg.get("n_banks", 1))
    nf = int(cfg.get("filters_per_bank", 1))
    if nb < 1 or nf < 1:
        raise TopologyError("n_banks and filters_per_bank must be >= 1")
    p = cfg.get("placement", {}) or {}
    if "centers_ghz" in p:
        centers = [[float(x) * GHZ for x in row] for row in p["centers_ghz"]]
        if len(centers) != nb or any(len(r) != nf for r in centers):
            raise TopologyError("centers_ghz must be an n_banks x filters_per_bank table")
        return centers
    if "auto_span_ghz" in p:
        span = float(p["auto_span_ghz"]) * GHZ
        shift = float(p.get("offset_ghz", 0.0)) * GHZ
        n = nb * nf
        if n == 1:
            grid = np.array([shift])
        else:
            if not span > 0:
                raise TopologyError("auto_span_ghz must be positive")
            grid = np.linspace(-span / 2, span / 2, n) + shift
        return [list(grid[k * nf:(k + 1) * nf]) for k in range(nb)]
    bank_centers = [float(x) * GHZ for x in p.get("bank_centers_ghz", [0.0] * nb)]
    if len(bank_centers) != nb:
        raise TopologyError("bank_centers_ghz needs one entry per bank")
    spacing = float(p.get("filter_spacing_ghz", 0.0)) * GHZ
    if nf > 1 and not spacing > 0:
        raise TopologyError("filter_spacing_ghz must be positive when banks hold several filters")
    return [[c + j * spacing for j in range(nf)] for c in bank_centers]


def _per_bank(section: dict, key: str, i: int, default: float) -> float:
    v = section.get(key, default)
    if isinstance(v, (list, tuple)):
        if i >= len(v):
            raise TopologyError(f"loop.{key} lists {len(v)} values but bank {i} needs one")
        v = v[i]
    return float(v)


def build_topology(cfg: dict) -> NetworkTopology:
    """Build a topology from the ``network`` section of an experiment config.

    Loop values may be scalars (shared) or lists with one entry per bank.
    """
    centers = filter_centers(cfg)
    fc = cfg.get("filter", {"type": "mrr"})
    conn = cfg.get("connection", {}) or {}
    lc = cfg.get("loop")
    mode = (lc or {}).get("mode", "bank")
    banks = []
    for i, row in enumerate(centers):
        loop = None
        if lc is not None:
            loop = LoopSpec(a=_per_bank(lc, "a", i, 0.5), b=_per_bank(lc, "b", i, 0.5),
                            gain=_per_bank(lc, "gain", i, 0.0),
                            delay=_per_bank(lc, "delay_ps", i, 0.0) * PS,
                            phase=_per_bank(lc, "phase_rad", i, 0.0))
        filters = tuple(_filter_from_cfg(fc, f0, i, j) for j, f0 in enumerate(row))
        n_conn = len(filters) - 1
        banks.append(BankSpec(
            filters=filters, loop=loop,
            transmissions=(float(conn.get("transmission", 1.0)),) * n_conn,
            delays=(float(conn.get("delay_ps", 0.0)) * PS,) * n_conn,
            phases=(float(conn.get("phase_rad", 0.0)),) * n_conn,
            loop_mode=mode,
        ))
    return NetworkTopology(tuple(banks))


def perturb_topology(t: NetworkTopology, p: PerturbationSpec, max_tries: int = 100) -> NetworkTopology:
    """Random fabrication instance of ``t``.

    Centre frequencies and connection transmissions are scaled by
    ``1 + U(-r, r)`` (transmissions clipped at 1 to stay passive); each
    connecting waveguide's index is drawn from ``N(n_eff, n_eff_std)``,
    which changes both its carrier phase and its group delay.
    """
    rng = np.random.Generator(np.random.MT19937(p.seed))
    r = p.relative_jitter
    rejected = 0
    for _ in range(max_tries):
        banks = []
        try:
            for bank in t.banks:
                filters = []
                for spec in bank.filters:
                    f0 = spec.f0 * (1.0 + rng.uniform(-r, r)) if r > 0 else spec.f0
                    filters.append(replace(spec, f0=f0))
                trans, delays, phases = [], [], []
                for tr, d, ph in zip(bank.transmissions, bank.delays, bank.phases):
                    if r > 0:
                        tr = min(tr * (1.0 + rng.uniform(-r, r)), 1.0)
                    if p.n_eff_std > 0:
                        dn = rng.normal(0.0, p.n_eff_std)
                        ph = ph + 2 * np.pi * p.carrier_frequency * d * dn / p.n_eff
                        d = d * (1.0 + dn / p.n_eff)
                    trans.append(tr)
                    delays.append(max(d, 0.0))
                    phases.append(float(np.mod(ph, 2 * np.pi)))
                banks.append(replace(bank, filters=tuple(filters), transmissions=tuple(trans),
                                     delays=tuple(delays), phases=tuple(phases)))
            out = NetworkTopology(tuple(banks))
        except (FilterError, TopologyError):
            rejected += 1
            continue
        if rejected:
            log.info("perturb_topology: %d instance(s) rejected and resampled", rejected)
        return out
    raise TopologyError(f"no valid perturbed instance after {max_tries} draws")


# -- serialisation --------------------------------------------------------

def _spec_to_dict(spec) -> dict:
    if isinstance(spec, MrrSpec):
        return {"type": "mrr", "t1": spec.t1, "t2": spec.t2, "k1": spec.k1, "k2": spec.k2,
                "loss_per_m": spec.loss, "length_m": spec.length, "n_eff": spec.n_eff,
                "f0_hz": spec.f0}
    if isinstance(spec, MzdiSpec):
        return {"type": "mzdi", "f0_hz": spec.f0, "delta_t_s": spec.delta_t}
    return {"type": "butterworth", "order": spec.order, "f_3db_hz": spec.f_3db, "f0_hz": spec.f0}


def _spec_from_dict(d: dict):
    kind = d["type"]
    if kind == "mrr":
        return MrrSpec(d["t1"], d["t2"], d["k1"], d["k2"], d["loss_per_m"], d["length_m"],
                       d["n_eff"], d["f0_hz"])
    if kind == "mzdi":
        return MzdiSpec(d["f0_hz"], d["delta_t_s"])
    return ButterworthSpec(d["order"], d["f_3db_hz"], d["f0_hz"])


def topology_to_dict(t: NetworkTopology) -> dict:
    banks = []
    for b in t.banks:
        loop = None if b.loop is None else {
            "a": b.loop.a, "b": b.loop.b, "gain": b.loop.gain,
            "delay_s": b.loop.delay, "phase_rad": b.loop.phase}
        banks.append({
            "filters": [_spec_to_dict(s) for s in b.filters],
            "loop": loop, "loop_mode": b.loop_mode,
            "transmissions": list(b.transmissions), "delays_s": list(b.delays),
            "phases_rad": list(b.phases),
        })
    return {"banks": banks}


def topology_from_dict(d: dict) -> NetworkTopology:
    banks = []
    for b in d["banks"]:
        lp = b.get("loop")
        loop = None if lp is None else LoopSpec(lp["a"], lp["b"], lp["gain"], lp["delay_s"], lp["phase_rad"])
        banks.append(BankSpec(tuple(_spec_from_dict(s) for s in b["filters"]), loop,
                              tuple(b["transmissions"]), tuple(b["delays_s"]), tuple(b["phases_rad"]),
                              b.get("loop_mode", "bank")))
    return NetworkTopology(tuple(banks))
